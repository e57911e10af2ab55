//! On-disk formats: binary captures with JSON oracle sidecars, codebook and
//! scene JSON documents, run manifests with content hashes, and the CSV/PGM
//! report exports.

pub mod capture;
pub mod codebook_file;
pub mod export;
pub mod manifest;
pub mod scene_file;

pub use capture::{read_capture, write_capture, CaptureHeader, OracleSidecar};
pub use codebook_file::{codebook_to_json, load_codebook, parse_codebook_json, save_codebook};
pub use manifest::{sha256_hex, sha256_of_file, Manifest};
pub use scene_file::{default_scene, load_scene, SceneFile};
