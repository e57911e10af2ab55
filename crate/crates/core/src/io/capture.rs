//! Binary capture format.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic  "BSCP"          4 bytes
//! version u16            (currently 1)
//! fs      f64            sample rate, Hz
//! carrier f64            carrier frequency, Hz
//! position_index u16
//! rx_beam u8
//! flags   u8             reserved, 0
//! sample_count u32
//! samples f32 I/Q interleaved, sample_count pairs
//! ```
//!
//! Simulator runs add a `<name>.oracle.json` sidecar with the ground truth
//! (paths, start offset, RNG seed); the binary itself never carries it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path as FsPath;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::CaptureFrame;
use crate::error::{Error, Result};
use crate::scene::Path;

pub const CAPTURE_MAGIC: &[u8; 4] = b"BSCP";
pub const CAPTURE_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureHeader {
    pub version: u16,
    pub sample_rate_hz: f64,
    pub carrier_hz: f64,
    pub position_index: u16,
    pub rx_beam: u8,
    pub flags: u8,
    pub sample_count: u32,
}

fn format_err(path: &FsPath, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Write a capture; the oracle offset is deliberately not part of the file.
pub fn write_capture(path: &FsPath, capture: &CaptureFrame, carrier_hz: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CAPTURE_MAGIC)?;
    w.write_all(&CAPTURE_VERSION.to_le_bytes())?;
    w.write_all(&capture.sample_rate_hz.to_le_bytes())?;
    w.write_all(&carrier_hz.to_le_bytes())?;
    w.write_all(&(capture.position_index as u16).to_le_bytes())?;
    w.write_all(&[capture.rx_beam as u8, 0u8])?;
    w.write_all(&(capture.samples.len() as u32).to_le_bytes())?;
    for s in &capture.samples {
        w.write_all(&(s.re as f32).to_le_bytes())?;
        w.write_all(&(s.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a capture back; `true_start_offset` is `None` (sidecars carry it).
pub fn read_capture(path: &FsPath) -> Result<(CaptureFrame, CaptureHeader)> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| format_err(path, "truncated header"))?;
    if &magic != CAPTURE_MAGIC {
        return Err(format_err(path, "bad magic"));
    }
    let mut buf2 = [0u8; 2];
    let mut buf8 = [0u8; 8];
    let mut buf4 = [0u8; 4];

    r.read_exact(&mut buf2)
        .map_err(|_| format_err(path, "truncated header"))?;
    let version = u16::from_le_bytes(buf2);
    if version != CAPTURE_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    r.read_exact(&mut buf8)
        .map_err(|_| format_err(path, "truncated header"))?;
    let sample_rate_hz = f64::from_le_bytes(buf8);
    r.read_exact(&mut buf8)
        .map_err(|_| format_err(path, "truncated header"))?;
    let carrier_hz = f64::from_le_bytes(buf8);
    r.read_exact(&mut buf2)
        .map_err(|_| format_err(path, "truncated header"))?;
    let position_index = u16::from_le_bytes(buf2);
    r.read_exact(&mut buf2)
        .map_err(|_| format_err(path, "truncated header"))?;
    let [rx_beam, flags] = buf2;
    r.read_exact(&mut buf4)
        .map_err(|_| format_err(path, "truncated header"))?;
    let sample_count = u32::from_le_bytes(buf4);

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let expected = sample_count as usize * 8;
    if payload.len() != expected {
        return Err(format_err(
            path,
            format!(
                "sample payload is {} bytes, expected {expected} for {sample_count} samples",
                payload.len()
            ),
        ));
    }
    let samples: Vec<Complex64> = payload
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();

    let header = CaptureHeader {
        version,
        sample_rate_hz,
        carrier_hz,
        position_index,
        rx_beam,
        flags,
        sample_count,
    };
    Ok((
        CaptureFrame {
            position_index: position_index as usize,
            rx_beam: rx_beam as usize,
            sample_rate_hz,
            samples,
            true_start_offset: None,
        },
        header,
    ))
}

/// Ground truth written next to simulated captures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSidecar {
    pub true_start_offset: usize,
    pub run_seed: u64,
    pub snr_db: f64,
    pub paths: Vec<Path>,
}

impl OracleSidecar {
    /// Sidecar path for a capture path: `x.bscp` -> `x.oracle.json`.
    pub fn path_for(capture_path: &FsPath) -> std::path::PathBuf {
        capture_path.with_extension("oracle.json")
    }

    pub fn save(&self, capture_path: &FsPath) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)?;
        std::fs::write(Self::path_for(capture_path), bytes)?;
        Ok(())
    }

    pub fn load(capture_path: &FsPath) -> Result<Self> {
        let bytes = std::fs::read(Self::path_for(capture_path))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::PathKind;

    fn sample_capture() -> CaptureFrame {
        CaptureFrame {
            position_index: 74,
            rx_beam: 29,
            sample_rate_hz: 737.28e6,
            samples: (0..500)
                .map(|i| Complex64::new((i as f64 * 0.25).sin(), (i as f64 * 0.125).cos()))
                .collect(),
            true_start_offset: Some(123),
        }
    }

    #[test]
    fn roundtrip_preserves_f32_payload_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cap.bscp");
        let cap = sample_capture();
        write_capture(&path, &cap, 60.48e9).unwrap();
        let (read, header) = read_capture(&path).unwrap();
        assert_eq!(header.position_index, 74);
        assert_eq!(header.rx_beam, 29);
        assert_eq!(header.sample_count, 500);
        assert_eq!(header.carrier_hz, 60.48e9);
        assert_eq!(read.true_start_offset, None);
        for (a, b) in cap.samples.iter().zip(&read.samples) {
            assert_eq!(a.re as f32, b.re as f32);
            assert_eq!(a.im as f32, b.im as f32);
        }
        // Second write is byte-identical.
        let path2 = dir.path().join("cap2.bscp");
        write_capture(&path2, &cap, 60.48e9).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn truncated_capture_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cap.bscp");
        write_capture(&path, &sample_capture(), 60.48e9).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 11);
        std::fs::write(&path, &bytes).unwrap();
        let err = read_capture(&path).unwrap_err();
        assert!(err.to_string().contains("expected 4000"), "{err}");
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cap.bscp");
        std::fs::write(&path, b"NOPE....").unwrap();
        assert!(read_capture(&path).is_err());
    }

    #[test]
    fn oracle_sidecar_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cap.bscp");
        let sidecar = OracleSidecar {
            true_start_offset: 4242,
            run_seed: 7,
            snr_db: 15.0,
            paths: vec![Path {
                delay_s: 1e-8,
                gain_re: 1e-4,
                gain_im: 0.0,
                aod_az_deg: 18.0,
                aod_el_deg: 0.0,
                aoa_az_deg: -12.0,
                aoa_el_deg: 0.0,
                kind: PathKind::Direct,
            }],
        };
        sidecar.save(&path).unwrap();
        let loaded = OracleSidecar::load(&path).unwrap();
        assert_eq!(loaded.true_start_offset, 4242);
        assert_eq!(loaded.paths.len(), 1);
        assert_eq!(loaded.paths[0].kind, PathKind::Direct);
    }
}
