//! Capture synthesis: drive the sweep frame through the traced multipath
//! channel and produce unsynchronized complex baseband records.
//!
//! The transmitter plays the frame cyclically, so the steady-state received
//! signal is the frame circularly convolved with the channel taps. A capture
//! is that signal rotated by a random start offset (the receiver is not
//! synchronized) plus complex white Gaussian noise referenced to the
//! strongest path.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::beams::{array_factor, ArrayGeometry, BeamCodebook};
use crate::error::Result;
use crate::scene::{trace_paths, Path, Scene};
use crate::sweep::{build_sweep_frame, SweepFrame};
use crate::waveform::{derive_stream_seed, WaveformCodebook};

/// Lane tag separating capture RNG streams from waveform shuffles.
const CAPTURE_LANE: u64 = 0xcafe_0000_0000_0000;

/// One unsynchronized acquisition for a (position, Rx beam) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureFrame {
    pub position_index: usize,
    pub rx_beam: usize,
    pub sample_rate_hz: f64,
    pub samples: Vec<Complex64>,
    /// Oracle metadata: where the frame start landed. Stripped on export.
    pub true_start_offset: Option<usize>,
}

/// Per-path slot coefficients: the Rx-beam weight is common to the whole
/// capture, the Tx weight switches with the sweep slot.
fn path_slot_coefficients(
    path: &Path,
    frame: &SweepFrame,
    beams: &BeamCodebook,
    geometry: &ArrayGeometry,
    tx_yaw_deg: f64,
    rx_yaw_deg: f64,
    rx_beam: usize,
) -> Result<Vec<Complex64>> {
    let rx_steering = beams.beam_to_angles(rx_beam)?;
    let af_rx = array_factor(
        geometry,
        rx_steering,
        crate::beams::wrap_deg(path.aoa_az_deg - rx_yaw_deg),
        path.aoa_el_deg,
    );
    let base = path.gain() * af_rx;
    let local_aod = crate::beams::wrap_deg(path.aod_az_deg - tx_yaw_deg);
    frame
        .beam_order
        .iter()
        .map(|&tx_beam| {
            let af_tx = array_factor(
                geometry,
                beams.beam_to_angles(tx_beam)?,
                local_aod,
                path.aod_el_deg,
            );
            Ok(base * af_tx)
        })
        .collect()
}

/// Synthesize a capture from an explicit path list.
///
/// Deterministic in `run_seed`: the RNG stream is derived from
/// `(run_seed, position_index, rx_beam)`, the start offset is drawn first,
/// then the noise samples in order. Fractional delays round to the nearest
/// sample. Noise power is the strongest path's received power backed off by
/// `snr_db`, floored at `noise_floor_db` (pure floor noise when no path
/// arrives at all).
#[allow(clippy::too_many_arguments)]
pub fn synthesize_from_paths(
    paths: &[Path],
    frame: &SweepFrame,
    beams: &BeamCodebook,
    geometry: &ArrayGeometry,
    tx_yaw_deg: f64,
    rx_yaw_deg: f64,
    position_index: usize,
    rx_beam: usize,
    snr_db: f64,
    noise_floor_db: f64,
    run_seed: u64,
) -> Result<CaptureFrame> {
    let len = frame.len();
    let fs = frame.sample_rate_hz;
    let slot = frame.slot_len;

    let mut steady = vec![Complex64::new(0.0, 0.0); len];
    let mut ref_power = 0.0_f64;

    for path in paths {
        let coeffs = path_slot_coefficients(path, frame, beams, geometry, tx_yaw_deg, rx_yaw_deg, rx_beam)?;
        let peak = coeffs.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        ref_power = ref_power.max(peak);

        let delay = (path.delay_s * fs).round() as usize % len;
        for (k, &c) in coeffs.iter().enumerate() {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            let src = &frame.samples[k * slot..(k + 1) * slot];
            let start = (k * slot + delay) % len;
            let first = slot.min(len - start);
            for (i, s) in src[..first].iter().enumerate() {
                steady[start + i] += c * s;
            }
            for (i, s) in src[first..].iter().enumerate() {
                steady[i] += c * s;
            }
        }
    }

    let lane = CAPTURE_LANE | ((position_index as u64) << 16) | rx_beam as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_stream_seed(run_seed, lane));

    let offset = rng.random_range(0..len);
    let mut samples = vec![Complex64::new(0.0, 0.0); len];
    samples[offset..].copy_from_slice(&steady[..len - offset]);
    samples[..offset].copy_from_slice(&steady[len - offset..]);

    let floor = 10f64.powf(noise_floor_db / 10.0);
    let snr_noise = if ref_power > 0.0 {
        ref_power * 10f64.powf(-snr_db / 10.0)
    } else {
        0.0
    };
    let sigma_sq = snr_noise.max(floor);
    if sigma_sq > 0.0 {
        let normal = Normal::new(0.0, (sigma_sq / 2.0).sqrt()).expect("valid sigma");
        for s in &mut samples {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *s += Complex64::new(re, im);
        }
    }

    Ok(CaptureFrame {
        position_index,
        rx_beam,
        sample_rate_hz: fs,
        samples,
        true_start_offset: Some(offset),
    })
}

/// Scene-driven batch synthesizer: trace once per position, reuse the frame.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub scene: Scene,
    pub beams: BeamCodebook,
    pub geometry: ArrayGeometry,
    pub frame: SweepFrame,
}

impl Simulator {
    pub fn new(
        scene: Scene,
        codebook: &WaveformCodebook,
        beams: BeamCodebook,
        geometry: ArrayGeometry,
    ) -> Result<Self> {
        scene.validate()?;
        let frame = build_sweep_frame(codebook);
        Ok(Self {
            scene,
            beams,
            geometry,
            frame,
        })
    }

    /// Traced paths for a grid position.
    pub fn paths(&self, position_index: usize) -> Result<Vec<Path>> {
        let pos = self.scene.grid.position_m(position_index)?;
        trace_paths(&self.scene, pos)
    }

    /// Synthesize the capture for one (position, Rx beam) acquisition.
    pub fn capture(
        &self,
        position_index: usize,
        rx_beam: usize,
        snr_db: f64,
        run_seed: u64,
    ) -> Result<CaptureFrame> {
        let paths = self.paths(position_index)?;
        synthesize_from_paths(
            &paths,
            &self.frame,
            &self.beams,
            &self.geometry,
            self.scene.tx.yaw_deg,
            self.scene.rx_yaw_deg,
            position_index,
            rx_beam,
            snr_db,
            self.scene.noise_floor_db,
            run_seed,
        )
    }
}

/// One-shot convenience wrapper: builds the sweep frame internally.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_capture(
    scene: &Scene,
    codebook: &WaveformCodebook,
    beams: &BeamCodebook,
    geometry: &ArrayGeometry,
    position_index: usize,
    rx_beam: usize,
    snr_db: f64,
    run_seed: u64,
) -> Result<CaptureFrame> {
    let sim = Simulator::new(scene.clone(), codebook, beams.clone(), *geometry)?;
    sim.capture(position_index, rx_beam, snr_db, run_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::PathKind;
    use crate::waveform::{ChirpParams, DEFAULT_SEED};

    fn test_frame() -> SweepFrame {
        let cb = WaveformCodebook::build(ChirpParams::default(), DEFAULT_SEED).unwrap();
        build_sweep_frame(&cb)
    }

    /// Single-element geometry: unity gain for every steering/direction,
    /// turning the sweep into an all-omni transmission.
    fn omni_geometry() -> ArrayGeometry {
        ArrayGeometry {
            rows: 1,
            cols: 1,
            spacing_wavelengths: 0.5,
            carrier_hz: 60.48e9,
        }
    }

    fn unit_path(delay_s: f64, gain: Complex64) -> Path {
        Path {
            delay_s,
            gain_re: gain.re,
            gain_im: gain.im,
            aod_az_deg: 0.0,
            aod_el_deg: 0.0,
            aoa_az_deg: 0.0,
            aoa_el_deg: 0.0,
            kind: PathKind::Direct,
        }
    }

    /// Noiseless single path, delay 0: the capture is the rotated frame
    /// scaled by the path gain.
    #[test]
    fn identity_channel_reproduces_the_sweep() {
        let frame = test_frame();
        let beams = BeamCodebook::standard();
        let gain = Complex64::new(0.5, -0.25);
        let cap = synthesize_from_paths(
            &[unit_path(0.0, gain)],
            &frame,
            &beams,
            &omni_geometry(),
            0.0,
            0.0,
            0,
            0,
            f64::INFINITY,
            f64::NEG_INFINITY,
            1,
        )
        .unwrap();
        let off = cap.true_start_offset.unwrap();
        for (n, s) in cap.samples.iter().enumerate() {
            let expect = gain * frame.samples[(n + frame.len() - off) % frame.len()];
            assert!((s - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let frame = test_frame();
        let beams = BeamCodebook::standard();
        let geom = ArrayGeometry::default();
        let path = unit_path(30.0 / frame.sample_rate_hz, Complex64::new(1e-4, 2e-4));
        let a = synthesize_from_paths(
            &[path], &frame, &beams, &geom, 18.0, 180.0, 74, 29, 15.0, -140.0, 99,
        )
        .unwrap();
        let b = synthesize_from_paths(
            &[path], &frame, &beams, &geom, 18.0, 180.0, 74, 29, 15.0, -140.0, 99,
        )
        .unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.true_start_offset, b.true_start_offset);
        // A different seed moves the offset and the noise.
        let c = synthesize_from_paths(
            &[path], &frame, &beams, &geom, 18.0, 180.0, 74, 29, 15.0, -140.0, 100,
        )
        .unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn adding_a_separated_path_never_reduces_energy() {
        let frame = test_frame();
        let beams = BeamCodebook::standard();
        let geom = omni_geometry();
        let energy = |cap: &CaptureFrame| -> f64 { cap.samples.iter().map(|s| s.norm_sqr()).sum() };
        let p1 = unit_path(0.0, Complex64::new(1.0, 0.0));
        // 100 samples is far beyond the chirp autocorrelation mainlobe.
        let p2 = unit_path(100.0 / frame.sample_rate_hz, Complex64::new(0.7, 0.0));
        let one = synthesize_from_paths(
            &[p1], &frame, &beams, &geom, 0.0, 0.0, 0, 0, f64::INFINITY, f64::NEG_INFINITY, 5,
        )
        .unwrap();
        let two = synthesize_from_paths(
            &[p1, p2], &frame, &beams, &geom, 0.0, 0.0, 0, 0, f64::INFINITY, f64::NEG_INFINITY, 5,
        )
        .unwrap();
        assert!(energy(&two) > energy(&one));
    }

    #[test]
    fn empty_path_list_yields_floor_noise() {
        let frame = test_frame();
        let beams = BeamCodebook::standard();
        let cap = synthesize_from_paths(
            &[],
            &frame,
            &beams,
            &ArrayGeometry::default(),
            0.0,
            0.0,
            3,
            7,
            20.0,
            -30.0,
            11,
        )
        .unwrap();
        let mean_power: f64 =
            cap.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / cap.samples.len() as f64;
        let expect = 10f64.powf(-3.0); // -30 dB
        assert!((mean_power / expect - 1.0).abs() < 0.05, "power {mean_power}");
    }

    #[test]
    fn noise_tracks_requested_snr() {
        let frame = test_frame();
        let beams = BeamCodebook::standard();
        let geom = omni_geometry();
        let cap = synthesize_from_paths(
            &[unit_path(0.0, Complex64::new(1.0, 0.0))],
            &frame,
            &beams,
            &geom,
            0.0,
            0.0,
            0,
            0,
            10.0,
            f64::NEG_INFINITY,
            21,
        )
        .unwrap();
        // E|y|^2 = signal power (1) + noise power (0.1).
        let mean_power: f64 =
            cap.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / cap.samples.len() as f64;
        assert!((mean_power - 1.1).abs() < 0.02, "mean power {mean_power}");
    }
}
