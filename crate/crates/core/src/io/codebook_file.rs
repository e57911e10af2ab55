//! Codebook JSON document: `{version, params{f0,fm,T,fs}, seed,
//! permutations[64][64]}`. Waveform samples are regenerated on load, never
//! stored.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::{ChirpParams, Permutation, WaveformCodebook};

pub const CODEBOOK_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodebookFile {
    pub version: u32,
    pub params: ChirpParams,
    pub seed: u64,
    pub permutations: Vec<Vec<usize>>,
}

/// Serialize a codebook to its JSON document (pretty, deterministic).
pub fn codebook_to_json(codebook: &WaveformCodebook) -> Result<Vec<u8>> {
    let doc = CodebookFile {
        version: CODEBOOK_VERSION,
        params: codebook.params,
        seed: codebook.seed,
        permutations: codebook
            .permutations
            .iter()
            .map(|p| p.map().to_vec())
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parse and rebuild: permutations are validated as bijections and the
/// waveforms regenerated from the stored parameters.
pub fn parse_codebook_json(bytes: &[u8]) -> Result<WaveformCodebook> {
    let doc: CodebookFile = serde_json::from_slice(bytes)?;
    if doc.version != CODEBOOK_VERSION {
        return Err(Error::Parameter(format!(
            "unsupported codebook version {}",
            doc.version
        )));
    }
    let permutations = doc
        .permutations
        .into_iter()
        .map(Permutation::new)
        .collect::<Result<Vec<_>>>()?;
    WaveformCodebook::from_permutations(doc.params, doc.seed, permutations)
}

pub fn save_codebook(path: &FsPath, codebook: &WaveformCodebook) -> Result<()> {
    std::fs::write(path, codebook_to_json(codebook)?)?;
    Ok(())
}

pub fn load_codebook(path: &FsPath) -> Result<WaveformCodebook> {
    let bytes = std::fs::read(path)?;
    parse_codebook_json(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::DEFAULT_SEED;

    #[test]
    fn json_roundtrip_is_byte_identical_and_lossless() {
        let cb = WaveformCodebook::build(ChirpParams::default(), DEFAULT_SEED).unwrap();
        let a = codebook_to_json(&cb).unwrap();
        let reloaded = parse_codebook_json(&a).unwrap();
        let b = codebook_to_json(&reloaded).unwrap();
        assert_eq!(a, b);
        assert_eq!(reloaded.permutations, cb.permutations);
        assert_eq!(reloaded.waveforms, cb.waveforms);
    }

    #[test]
    fn field_names_follow_the_interface() {
        let cb = WaveformCodebook::build(ChirpParams::default(), DEFAULT_SEED).unwrap();
        let text = String::from_utf8(codebook_to_json(&cb).unwrap()).unwrap();
        for key in ["\"version\"", "\"params\"", "\"f0\"", "\"fm\"", "\"T\"", "\"fs\"", "\"seed\"", "\"permutations\""] {
            assert!(text.contains(key), "missing {key}");
        }
    }

    #[test]
    fn duplicated_permutation_entry_is_rejected() {
        let cb = WaveformCodebook::build(ChirpParams::default(), DEFAULT_SEED).unwrap();
        let mut doc: CodebookFile =
            serde_json::from_slice(&codebook_to_json(&cb).unwrap()).unwrap();
        doc.permutations[5][0] = doc.permutations[5][1];
        let bytes = serde_json::to_vec(&doc).unwrap();
        let err = parse_codebook_json(&bytes).unwrap_err();
        assert!(err.to_string().contains("bijection"), "{err}");
    }
}
