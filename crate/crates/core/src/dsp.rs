//! Receiver processing chain: frame-start detection, matched-filter beam
//! identification, PDP extraction and alignment, RSS, beamspace maps and
//! grid-level analyses.
//!
//! Correlations run through the fast-convolution kernels in [`crate::fft`];
//! `valid_xcorr_direct` is the independent time-domain route used by the
//! dual-implementation equivalence check.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::beams::BeamCodebook;
use crate::channel::CaptureFrame;
use crate::error::{Error, Result};
use crate::fft;
use crate::par::*;
use crate::scene::{is_los, Scene};
use crate::sweep::SweepFrame;
use crate::waveform::{derive_stream_seed, WaveformCodebook};

/// Export floor: dB values are clamped here to keep files finite.
pub const DB_FLOOR: f64 = -160.0;

/// Normalized-correlation detection threshold for the golden codebook,
/// frozen from `calibrate_detection_threshold` at the 1e-3 false-alarm
/// quantile over 3000 trials (see `examples/calibrate.rs`).
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 0.09055;

/// Lags appended past each sweep slot when scanning for delayed paths.
pub const SLOT_LAG_MARGIN: usize = 512;

/// Bins excluded around the peak when estimating the off-peak floor.
const PEAK_EXCLUSION_BINS: usize = 2;

fn to_db(linear_power: f64) -> f64 {
    if linear_power > 0.0 {
        (10.0 * linear_power.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Circular slice of `len` samples starting at `start`.
pub fn circular_slice(samples: &[Complex64], start: usize, len: usize) -> Vec<Complex64> {
    let n = samples.len();
    (0..len).map(|i| samples[(start + i) % n]).collect()
}

/// Locate the sweep start in an unsynchronized capture.
///
/// Argmax over circular lag of the capture/frame cross-correlation
/// magnitude; ties resolve to the smallest lag. Exact for noiseless
/// circularly shifted frames.
pub fn detect_frame_start(capture: &CaptureFrame, frame: &SweepFrame) -> Result<usize> {
    if capture.samples.len() < frame.len() {
        return Err(Error::LengthMismatch(format!(
            "capture of {} samples shorter than frame of {}",
            capture.samples.len(),
            frame.len()
        )));
    }
    if capture.samples.iter().all(|s| s.norm_sqr() == 0.0) {
        return Err(Error::NoSignal);
    }
    let corr = fft::circular_xcorr(&capture.samples, &frame.samples);
    let mut best = (0usize, -1.0f64);
    for (lag, c) in corr.iter().enumerate() {
        let m = c.norm_sqr();
        if m > best.1 {
            best = (lag, m);
        }
    }
    Ok(best.0)
}

/// Normalized correlation magnitudes of one beam waveform against a window.
#[derive(Debug, Clone)]
pub struct CorrelationProfile {
    pub beam: usize,
    pub lags: Vec<i64>,
    pub magnitudes: Vec<f64>,
}

impl CorrelationProfile {
    /// (lag, magnitude) of the strongest correlation, smallest lag on ties.
    pub fn peak(&self) -> (i64, f64) {
        let mut best = (0usize, -1.0f64);
        for (i, &m) in self.magnitudes.iter().enumerate() {
            if m > best.1 {
                best = (i, m);
            }
        }
        (self.lags[best.0], best.1)
    }
}

/// Correlate a window against every codebook waveform.
///
/// Magnitudes are normalized per lag by `sqrt(E_waveform * E_window_section)`
/// so a perfectly matched section scores exactly 1.
pub fn matched_filter_bank(
    window: &[Complex64],
    codebook: &WaveformCodebook,
) -> Result<Vec<CorrelationProfile>> {
    let wf_len = codebook.waveform_len();
    if window.len() < wf_len {
        return Err(Error::LengthMismatch(format!(
            "window of {} samples shorter than waveform of {wf_len}",
            window.len()
        )));
    }

    // Sliding window-section energies via prefix sums.
    let mut prefix = Vec::with_capacity(window.len() + 1);
    prefix.push(0.0f64);
    for s in window {
        prefix.push(prefix.last().unwrap() + s.norm_sqr());
    }
    let section_energy: Vec<f64> = (0..=window.len() - wf_len)
        .map(|l| prefix[l + wf_len] - prefix[l])
        .collect();

    let energies: Vec<f64> = (0..codebook.n_beams()).map(|k| codebook.energy(k)).collect();
    let profiles: Vec<CorrelationProfile> = (0..codebook.n_beams())
        .into_par_iter()
        .map(|beam| {
            let corr = fft::valid_xcorr_fft(window, &codebook.waveforms[beam]);
            let magnitudes: Vec<f64> = corr
                .iter()
                .zip(&section_energy)
                .map(|(c, &ew)| {
                    let denom = (energies[beam] * ew).sqrt();
                    if denom > 0.0 {
                        (c.norm() / denom).min(1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            CorrelationProfile {
                beam,
                lags: (0..magnitudes.len() as i64).collect(),
                magnitudes,
            }
        })
        .collect();
    Ok(profiles)
}

/// Outcome of transmit-beam identification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamDecision {
    Beam(usize),
    BelowThreshold,
}

/// Pick the beam whose profile peaks highest (lowest index on ties); report
/// below-threshold when nothing exceeds the detection threshold.
pub fn identify_tx_beam(profiles: &[CorrelationProfile], threshold: f64) -> BeamDecision {
    let mut best: Option<(usize, f64)> = None;
    for p in profiles {
        let (_, mag) = p.peak();
        let better = match best {
            None => true,
            Some((b, m)) => mag > m || (mag == m && p.beam < b),
        };
        if better {
            best = Some((p.beam, mag));
        }
    }
    match best {
        Some((beam, mag)) if mag > threshold => BeamDecision::Beam(beam),
        _ => BeamDecision::BelowThreshold,
    }
}

/// Power delay profile: correlation power versus lag, dB relative to peak.
#[derive(Debug, Clone, PartialEq)]
pub struct PdpProfile {
    pub delay_bins: Vec<i64>,
    pub power_db: Vec<f64>,
    pub alignment_offset: i64,
}

impl PdpProfile {
    /// Bin of the strongest return (smallest bin on ties).
    pub fn peak_bin(&self) -> i64 {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &p) in self.power_db.iter().enumerate() {
            if p > best.1 {
                best = (i, p);
            }
        }
        self.delay_bins[best.0]
    }

    /// Median of the power values, the sidelobe/noise floor estimate.
    pub fn median_floor_db(&self) -> f64 {
        let mut v = self.power_db.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }
}

/// Cross-correlate a window with one waveform and express the squared
/// magnitude in dB relative to the peak. Delay resolution is one sample.
pub fn extract_pdp(window: &[Complex64], waveform: &[Complex64]) -> Result<PdpProfile> {
    if window.len() < waveform.len() {
        return Err(Error::LengthMismatch(format!(
            "window of {} samples shorter than waveform of {}",
            window.len(),
            waveform.len()
        )));
    }
    let corr = fft::valid_xcorr_fft(window, waveform);
    let powers: Vec<f64> = corr.iter().map(|c| c.norm_sqr()).collect();
    let peak = powers.iter().cloned().fold(0.0, f64::max);
    let power_db: Vec<f64> = if peak > 0.0 {
        powers.iter().map(|&p| to_db(p / peak)).collect()
    } else {
        vec![DB_FLOOR; powers.len()]
    };
    Ok(PdpProfile {
        delay_bins: (0..power_db.len() as i64).collect(),
        power_db,
        alignment_offset: 0,
    })
}

/// Round half up; keeps repeated alignment a no-op.
fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Shift one Rx beam's PDPs so the mean of their peak bins lands on
/// `reference_bin`. Inter-peak spacing is preserved exactly (one common
/// integer shift per group).
pub fn align_pdp_group(pdps: &[PdpProfile], reference_bin: i64) -> Vec<PdpProfile> {
    if pdps.is_empty() {
        return Vec::new();
    }
    let mean: f64 = pdps.iter().map(|p| p.peak_bin() as f64).sum::<f64>() / pdps.len() as f64;
    let shift = reference_bin - round_half_up(mean);
    pdps.iter()
        .map(|p| PdpProfile {
            delay_bins: p.delay_bins.iter().map(|b| b + shift).collect(),
            power_db: p.power_db.clone(),
            alignment_offset: p.alignment_offset + shift,
        })
        .collect()
}

/// Apply [`align_pdp_group`] independently to each Rx beam's PDP list.
pub fn align_pdps(groups: &[Vec<PdpProfile>], reference_bin: i64) -> Vec<Vec<PdpProfile>> {
    groups
        .iter()
        .map(|g| align_pdp_group(g, reference_bin))
        .collect()
}

/// Mean received power of a window in dB; -inf for empty/all-zero input.
pub fn compute_rss(window: &[Complex64]) -> f64 {
    if window.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mean: f64 = window.iter().map(|s| s.norm_sqr()).sum::<f64>() / window.len() as f64;
    if mean > 0.0 {
        10.0 * mean.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Received power per (Tx beam, Rx beam) for one grid position, in dB.
#[derive(Debug, Clone)]
pub struct BeamspaceMap {
    /// Indexed `powers_db[tx][rx]`.
    pub powers_db: Vec<Vec<f64>>,
    pub position_index: usize,
}

/// Mean linear power of each Tx slot of a capture, given the frame start.
pub fn capture_slot_powers(samples: &[Complex64], frame: &SweepFrame, start: usize) -> Vec<f64> {
    let slot = frame.slot_len;
    (0..frame.n_slots())
        .map(|k| {
            let begin = (start + k * slot) % samples.len();
            let mut acc = 0.0;
            for i in 0..slot {
                acc += samples[(begin + i) % samples.len()].norm_sqr();
            }
            acc / slot as f64
        })
        .collect()
}

/// Arrange one position's captures by Rx beam, requiring a complete sweep.
fn complete_rx_sweep(captures: &[CaptureFrame], n: usize) -> Result<Vec<&CaptureFrame>> {
    let mut by_rx: Vec<Option<&CaptureFrame>> = vec![None; n];
    for c in captures {
        if c.rx_beam >= n {
            return Err(Error::OutOfRange(format!("rx beam {}", c.rx_beam)));
        }
        if by_rx[c.rx_beam].is_some() {
            return Err(Error::Parameter(format!("duplicate rx beam {}", c.rx_beam)));
        }
        by_rx[c.rx_beam] = Some(c);
    }
    let missing: Vec<usize> = (0..n).filter(|&r| by_rx[r].is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::PartialMap(missing));
    }
    let position_index = captures[0].position_index;
    if captures.iter().any(|c| c.position_index != position_index) {
        return Err(Error::Parameter(
            "captures from multiple positions in one map".into(),
        ));
    }
    Ok(by_rx.into_iter().map(|c| c.expect("checked")).collect())
}

/// Per-Rx-beam synchronization and slot powers for a complete sweep.
fn sync_and_slot_powers(
    by_rx: &[&CaptureFrame],
    frame: &SweepFrame,
) -> Result<Vec<(usize, Vec<f64>)>> {
    by_rx
        .to_vec()
        .into_par_iter()
        .map(|capture| -> Result<(usize, Vec<f64>)> {
            let start = detect_frame_start(capture, frame)?;
            Ok((start, capture_slot_powers(&capture.samples, frame, start)))
        })
        .collect()
}

fn assemble_map(columns: &[(usize, Vec<f64>)], n: usize, position_index: usize) -> BeamspaceMap {
    let mut powers_db = vec![vec![0.0; n]; n];
    for (rx, (_, col)) in columns.iter().enumerate() {
        for (tx, &p) in col.iter().enumerate() {
            powers_db[tx][rx] = to_db(p);
        }
    }
    BeamspaceMap {
        powers_db,
        position_index,
    }
}

/// Build the 64 x 64 beamspace map from a complete Rx sweep of one position.
///
/// Each capture is synchronized independently, sliced into Tx slots and
/// reduced to per-slot power. Input order is irrelevant: columns are keyed
/// by the capture's Rx beam.
pub fn build_beamspace_map(captures: &[CaptureFrame], frame: &SweepFrame) -> Result<BeamspaceMap> {
    let n = frame.n_slots();
    let by_rx = complete_rx_sweep(captures, n)?;
    let columns = sync_and_slot_powers(&by_rx, frame)?;
    Ok(assemble_map(&columns, n, captures[0].position_index))
}

/// Peak power over median off-peak power of a correlation magnitude series;
/// the SNR estimate used for best-beam selection. Linear ratio.
pub fn peak_over_median_snr(magnitudes: &[f64]) -> f64 {
    if magnitudes.len() <= 2 * PEAK_EXCLUSION_BINS + 1 {
        return 0.0;
    }
    let (peak_idx, peak) = magnitudes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, &m)| (i, m))
        .unwrap();
    let mut off: Vec<f64> = magnitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(peak_idx) > PEAK_EXCLUSION_BINS)
        .map(|(_, &m)| m * m)
        .collect();
    off.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = off[off.len() / 2];
    if median > 0.0 {
        peak * peak / median
    } else {
        f64::INFINITY
    }
}

/// Everything the grid analyses need from one position.
#[derive(Debug, Clone)]
pub struct PositionAnalysis {
    pub beamspace: BeamspaceMap,
    /// Detected frame start per Rx beam.
    pub starts: Vec<usize>,
}

impl PositionAnalysis {
    /// Directional (tx, rx) pair with the highest received power, lowest
    /// indices on ties.
    ///
    /// With a single noise variance per capture, ranking beams by received
    /// power is the same ordering as ranking by SNR, and unlike a
    /// peak-over-floor estimate it does not saturate at the waveform's own
    /// sidelobe floor when the signal is strong.
    pub fn best_pair(&self) -> (usize, usize) {
        let mut best = (1, 1, f64::NEG_INFINITY);
        for (tx, row) in self.beamspace.powers_db.iter().enumerate().skip(1) {
            for (rx, &v) in row.iter().enumerate().skip(1) {
                if v > best.2 {
                    best = (tx, rx, v);
                }
            }
        }
        (best.0, best.1)
    }
}

/// Full per-position processing: synchronization plus beamspace powers,
/// detecting the frame start once per capture.
pub fn process_position(captures: &[CaptureFrame], frame: &SweepFrame) -> Result<PositionAnalysis> {
    let n = frame.n_slots();
    let by_rx = complete_rx_sweep(captures, n)?;
    let columns = sync_and_slot_powers(&by_rx, frame)?;
    let starts: Vec<usize> = columns.iter().map(|(s, _)| *s).collect();
    Ok(PositionAnalysis {
        beamspace: assemble_map(&columns, n, captures[0].position_index),
        starts,
    })
}

/// Rectangular matrix over the processed subset of grid positions.
///
/// `x_indices`/`y_indices` are the grid coordinates actually present; the
/// value layout is x-major.
#[derive(Debug, Clone)]
pub struct GridMatrix<T> {
    pub x_indices: Vec<usize>,
    pub y_indices: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Clone> GridMatrix<T> {
    pub fn shape(&self) -> (usize, usize) {
        (self.x_indices.len(), self.y_indices.len())
    }

    pub fn get(&self, xi: usize, yi: usize) -> &T {
        &self.values[xi * self.y_indices.len() + yi]
    }
}

/// Average RSS over beam pairs, per position.
#[derive(Debug, Clone)]
pub struct RssGrid {
    pub matrix: GridMatrix<f64>,
    pub grid: crate::scene::RxGrid,
}

/// Grid-level analysis products: spatial RSS, best-beam and LoS maps.
#[derive(Debug, Clone)]
pub struct GridAnalysis {
    pub rss: RssGrid,
    pub best_beam: GridMatrix<Option<usize>>,
    pub los: GridMatrix<bool>,
}

/// Reduce per-position analyses to the RSS grid, best-beam grid and the
/// geometric LoS mask. The output grid spans exactly the x/y indices present
/// in the dataset (missing combinations come out as NaN / None).
pub fn analyze_grid(
    positions: &[PositionAnalysis],
    scene: &Scene,
    exclude_omni: bool,
) -> Result<GridAnalysis> {
    if positions.is_empty() {
        return Err(Error::Parameter("no processed positions".into()));
    }
    let grid = scene.grid;
    let mut xs: Vec<usize> = Vec::new();
    let mut ys: Vec<usize> = Vec::new();
    for p in positions {
        let (ix, iy) = grid.index_to_xy(p.beamspace.position_index)?;
        if !xs.contains(&ix) {
            xs.push(ix);
        }
        if !ys.contains(&iy) {
            ys.push(iy);
        }
    }
    xs.sort_unstable();
    ys.sort_unstable();

    let shape = (xs.len(), ys.len());
    let mut rss = vec![f64::NAN; shape.0 * shape.1];
    let mut best = vec![None; shape.0 * shape.1];
    let mut los = vec![false; shape.0 * shape.1];

    for (xi, &ix) in xs.iter().enumerate() {
        for (yi, &iy) in ys.iter().enumerate() {
            let pos = grid.position_m(grid.xy_to_index(ix, iy))?;
            los[xi * shape.1 + yi] = is_los(scene, pos)?;
        }
    }

    for p in positions {
        let (ix, iy) = grid.index_to_xy(p.beamspace.position_index)?;
        let xi = xs.binary_search(&ix).unwrap();
        let yi = ys.binary_search(&iy).unwrap();
        let cell = xi * shape.1 + yi;

        let first = if exclude_omni { 1 } else { 0 };
        let mut acc = 0.0;
        let mut count = 0usize;
        for tx in first..p.beamspace.powers_db.len() {
            for rx in first..p.beamspace.powers_db[tx].len() {
                acc += 10f64.powf(p.beamspace.powers_db[tx][rx] / 10.0);
                count += 1;
            }
        }
        rss[cell] = to_db(acc / count as f64);
        best[cell] = Some(p.best_pair().0);
    }

    Ok(GridAnalysis {
        rss: RssGrid {
            matrix: GridMatrix {
                x_indices: xs.clone(),
                y_indices: ys.clone(),
                values: rss,
            },
            grid,
        },
        best_beam: GridMatrix {
            x_indices: xs.clone(),
            y_indices: ys.clone(),
            values: best,
        },
        los: GridMatrix {
            x_indices: xs,
            y_indices: ys,
            values: los,
        },
    })
}

/// Fraction of 4-adjacent LoS cell pairs whose best Tx beams sit within one
/// azimuth step of each other.
pub fn best_beam_azimuth_smoothness(analysis: &GridAnalysis, beams: &BeamCodebook) -> f64 {
    let (nx, ny) = analysis.best_beam.shape();
    let mut total = 0usize;
    let mut smooth = 0usize;
    let mut visit = |a: (usize, usize), b: (usize, usize)| {
        if !analysis.los.get(a.0, a.1) || !analysis.los.get(b.0, b.1) {
            return;
        }
        let (Some(ba), Some(bb)) = (*analysis.best_beam.get(a.0, a.1), *analysis.best_beam.get(b.0, b.1))
        else {
            return;
        };
        let (Some(aa), Some(ab)) = (beams.azimuth_index(ba), beams.azimuth_index(bb)) else {
            return;
        };
        total += 1;
        if aa.abs_diff(ab) <= 1 {
            smooth += 1;
        }
    };
    for xi in 0..nx {
        for yi in 0..ny {
            if xi + 1 < nx {
                visit((xi, yi), (xi + 1, yi));
            }
            if yi + 1 < ny {
                visit((xi, yi), (xi, yi + 1));
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        smooth as f64 / total as f64
    }
}

/// Noise-only Monte Carlo calibration of the detection threshold.
///
/// Each trial correlates a complex-Gaussian window against the whole bank
/// and records the best normalized peak; the threshold is the requested
/// false-alarm quantile of those maxima.
pub fn calibrate_detection_threshold(
    codebook: &WaveformCodebook,
    trials: usize,
    false_alarm: f64,
    seed: u64,
) -> Result<f64> {
    let wf_len = codebook.waveform_len();
    let window_len = wf_len + 256;
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");

    let mut maxima: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_stream_seed(seed, 0xca51_0000 | trial as u64));
            let window: Vec<Complex64> = (0..window_len)
                .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect();
            let profiles = matched_filter_bank(&window, codebook)?;
            Ok(profiles
                .iter()
                .map(|p| p.peak().1)
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    maxima.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (((1.0 - false_alarm) * trials as f64).ceil() as usize)
        .clamp(1, trials)
        - 1;
    Ok(maxima[rank])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beams::ArrayGeometry;
    use crate::channel::synthesize_from_paths;
    use crate::scene::{Path, PathKind};
    use crate::sweep::build_sweep_frame;
    use crate::waveform::{ChirpParams, DEFAULT_SEED};

    fn codebook() -> WaveformCodebook {
        WaveformCodebook::build(ChirpParams::default(), DEFAULT_SEED).unwrap()
    }

    fn omni_geometry() -> ArrayGeometry {
        ArrayGeometry {
            rows: 1,
            cols: 1,
            spacing_wavelengths: 0.5,
            carrier_hz: 60.48e9,
        }
    }

    fn unit_path(delay_s: f64) -> Path {
        Path {
            delay_s,
            gain_re: 1.0,
            gain_im: 0.0,
            aod_az_deg: 0.0,
            aod_el_deg: 0.0,
            aoa_az_deg: 0.0,
            aoa_el_deg: 0.0,
            kind: PathKind::Direct,
        }
    }

    fn shifted_frame_capture(frame: &SweepFrame, offset: usize) -> CaptureFrame {
        let len = frame.len();
        let samples: Vec<Complex64> = (0..len)
            .map(|n| frame.samples[(n + len - offset) % len])
            .collect();
        CaptureFrame {
            position_index: 0,
            rx_beam: 0,
            sample_rate_hz: frame.sample_rate_hz,
            samples,
            true_start_offset: Some(offset),
        }
    }

    #[test]
    fn detects_zero_and_nonzero_offsets_exactly() {
        let cb = codebook();
        let frame = build_sweep_frame(&cb);
        for offset in [0usize, 100, 2048, 131_000] {
            let cap = shifted_frame_capture(&frame, offset);
            assert_eq!(detect_frame_start(&cap, &frame).unwrap(), offset);
        }
    }

    #[test]
    fn detects_late_offset_through_noise_over_100_seeds() {
        let cb = codebook();
        let frame = build_sweep_frame(&cb);
        let len = frame.len();
        let offset = 131_000usize;
        let sigma = (10f64.powf(-10.0 / 10.0) / 2.0).sqrt(); // 10 dB SNR
        let normal = Normal::new(0.0, sigma).unwrap();
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<Complex64> = (0..len)
                .map(|n| {
                    frame.samples[(n + len - offset) % len]
                        + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
                })
                .collect();
            let cap = CaptureFrame {
                position_index: 0,
                rx_beam: 0,
                sample_rate_hz: frame.sample_rate_hz,
                samples,
                true_start_offset: Some(offset),
            };
            assert_eq!(detect_frame_start(&cap, &frame).unwrap(), offset, "seed {seed}");
        }
    }

    #[test]
    fn single_position_dataset_gives_1x1_grids() {
        let scene = crate::io::scene_file::default_scene();
        let analysis = PositionAnalysis {
            beamspace: BeamspaceMap {
                powers_db: vec![vec![-80.0; 64]; 64],
                position_index: 74,
            },
            starts: vec![0; 64],
        };
        let grid = analyze_grid(&[analysis], &scene, false).unwrap();
        assert_eq!(grid.rss.matrix.shape(), (1, 1));
        assert_eq!(grid.best_beam.shape(), (1, 1));
        assert_eq!(grid.los.shape(), (1, 1));
        assert!((grid.rss.matrix.get(0, 0) + 80.0).abs() < 1e-9);
    }

    #[test]
    fn all_zero_capture_is_no_signal() {
        let cb = codebook();
        let frame = build_sweep_frame(&cb);
        let cap = CaptureFrame {
            position_index: 0,
            rx_beam: 0,
            sample_rate_hz: frame.sample_rate_hz,
            samples: vec![Complex64::new(0.0, 0.0); frame.len()],
            true_start_offset: None,
        };
        assert!(matches!(detect_frame_start(&cap, &frame), Err(Error::NoSignal)));
    }

    #[test]
    fn matched_filter_peaks_at_one_for_exact_waveform() {
        let cb = codebook();
        let profiles = matched_filter_bank(&cb.waveforms[17], &cb).unwrap();
        let (lag, mag) = profiles[17].peak();
        assert_eq!(lag, 0);
        assert!((mag - 1.0).abs() < 1e-9);
        // Every other beam stays well below the quasi-orthogonality bound.
        for p in profiles.iter().filter(|p| p.beam != 17) {
            assert!(p.peak().1 <= 0.35, "beam {} peaked at {}", p.beam, p.peak().1);
        }
    }

    #[test]
    fn identification_is_invariant_to_complex_scaling() {
        let cb = codebook();
        let window = cb.waveforms[33].clone();
        let scaled: Vec<Complex64> = window
            .iter()
            .map(|s| s * Complex64::new(-3.7e-4, 1.9e-4))
            .collect();
        let a = identify_tx_beam(
            &matched_filter_bank(&window, &cb).unwrap(),
            DEFAULT_DETECTION_THRESHOLD,
        );
        let b = identify_tx_beam(
            &matched_filter_bank(&scaled, &cb).unwrap(),
            DEFAULT_DETECTION_THRESHOLD,
        );
        assert_eq!(a, BeamDecision::Beam(33));
        assert_eq!(a, b);
    }

    #[test]
    fn identify_breaks_ties_toward_lowest_beam() {
        let mk = |beam, mag| CorrelationProfile {
            beam,
            lags: vec![0],
            magnitudes: vec![mag],
        };
        let profiles = vec![mk(9, 0.8), mk(5, 0.8), mk(20, 0.4)];
        assert_eq!(identify_tx_beam(&profiles, 0.1), BeamDecision::Beam(5));
    }

    #[test]
    fn all_zero_profiles_are_below_threshold() {
        let profiles = vec![CorrelationProfile {
            beam: 0,
            lags: vec![0, 1],
            magnitudes: vec![0.0, 0.0],
        }];
        assert_eq!(
            identify_tx_beam(&profiles, DEFAULT_DETECTION_THRESHOLD),
            BeamDecision::BelowThreshold
        );
    }

    #[test]
    fn pdp_peaks_at_the_true_delay_bin() {
        let cb = codebook();
        let frame = build_sweep_frame(&cb);
        let beams = BeamCodebook::standard();
        let fs = frame.sample_rate_hz;
        let cap = synthesize_from_paths(
            &[unit_path(50.0 / fs)],
            &frame,
            &beams,
            &omni_geometry(),
            0.0,
            0.0,
            0,
            0,
            f64::INFINITY,
            f64::NEG_INFINITY,
            3,
        )
        .unwrap();
        let start = cap.true_start_offset.unwrap();
        let window = circular_slice(&cap.samples, start, frame.slot_len + SLOT_LAG_MARGIN);
        let pdp = extract_pdp(&window, &cb.waveforms[0]).unwrap();
        assert_eq!(pdp.peak_bin(), 50);
        assert!(
            pdp.median_floor_db() <= -30.0,
            "median floor {} dB",
            pdp.median_floor_db()
        );
    }

    #[test]
    fn two_equal_paths_make_two_equal_peaks() {
        let cb = codebook();
        let frame = build_sweep_frame(&cb);
        let beams = BeamCodebook::standard();
        let fs = frame.sample_rate_hz;
        let cap = synthesize_from_paths(
            &[unit_path(10.0 / fs), unit_path(30.0 / fs)],
            &frame,
            &beams,
            &omni_geometry(),
            0.0,
            0.0,
            0,
            0,
            f64::INFINITY,
            f64::NEG_INFINITY,
            4,
        )
        .unwrap();
        let start = cap.true_start_offset.unwrap();
        let window = circular_slice(&cap.samples, start, frame.slot_len + SLOT_LAG_MARGIN);
        let pdp = extract_pdp(&window, &cb.waveforms[0]).unwrap();
        let p10 = pdp.power_db[10];
        let p30 = pdp.power_db[30];
        assert!((p10 - p30).abs() < 0.5, "peaks {p10} vs {p30} dB");
        let peak = pdp.peak_bin();
        assert!(peak == 10 || peak == 30, "peak at {peak}");
        // Real peaks 20 bins apart: the midpoint sits clearly lower.
        assert!(pdp.power_db[20] < p10 - 3.0);
    }

    #[test]
    fn alignment_examples_and_idempotence() {
        let mk = |peak: i64| {
            let mut power_db = vec![-40.0; 120];
            power_db[peak as usize] = 0.0;
            PdpProfile {
                delay_bins: (0..120).collect(),
                power_db,
                alignment_offset: 0,
            }
        };
        // Single PDP, peak at 80, reference 0 -> peak lands at 0.
        let aligned = align_pdp_group(&[mk(80)], 0);
        assert_eq!(aligned[0].peak_bin(), 0);
        assert_eq!(aligned[0].alignment_offset, -80);
        // Peaks at 10 and 30 -> mean to reference, peaks at -10 and +10.
        let aligned = align_pdp_group(&[mk(10), mk(30)], 0);
        assert_eq!(aligned[0].peak_bin(), -10);
        assert_eq!(aligned[1].peak_bin(), 10);
        // Idempotence.
        let twice = align_pdp_group(&aligned, 0);
        assert_eq!(twice, aligned);
    }

    #[test]
    fn rss_of_unit_waveform_is_zero_db() {
        let cb = codebook();
        assert!(compute_rss(&cb.waveforms[0]).abs() < 1e-12);
        let scaled: Vec<Complex64> = cb.waveforms[0].iter().map(|s| s * 0.1).collect();
        assert!((compute_rss(&scaled) + 20.0).abs() < 1e-12);
        assert_eq!(compute_rss(&[]), f64::NEG_INFINITY);
        assert_eq!(
            compute_rss(&[Complex64::new(0.0, 0.0)]),
            f64::NEG_INFINITY
        );
    }

    fn capture_set(
        frame: &SweepFrame,
        beams: &BeamCodebook,
        geometry: &ArrayGeometry,
        paths: &[Path],
        snr_db: f64,
        seed: u64,
    ) -> Vec<CaptureFrame> {
        (0..64)
            .map(|rx| {
                synthesize_from_paths(
                    paths,
                    frame,
                    beams,
                    geometry,
                    0.0,
                    0.0,
                    0,
                    rx,
                    snr_db,
                    -90.0,
                    seed,
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn beamspace_map_is_input_order_invariant_and_geometry_consistent() {
        let cb = codebook();
        let frame = build_sweep_frame(&cb);
        let beams = BeamCodebook::standard();
        let geometry = ArrayGeometry::default();
        // One dominant path from a direction right on a codebook entry.
        let path = Path {
            delay_s: 12.0 / frame.sample_rate_hz,
            gain_re: 1e-3,
            gain_im: 0.0,
            aod_az_deg: 10.8,
            aod_el_deg: 0.0,
            aoa_az_deg: -16.2,
            aoa_el_deg: 0.0,
            kind: PathKind::Direct,
        };
        let mut captures = capture_set(&frame, &beams, &geometry, &[path], 40.0, 8);
        let map = build_beamspace_map(&captures, &frame).unwrap();

        // Shuffling the capture order leaves the matrix untouched.
        captures.reverse();
        captures.swap(3, 40);
        let map2 = build_beamspace_map(&captures, &frame).unwrap();
        for tx in 0..64 {
            assert_eq!(map.powers_db[tx], map2.powers_db[tx]);
        }

        // The argmax over directional pairs matches the array-factor oracle.
        let best_tx = crate::beams::best_directional_beam(&beams, &geometry, 10.8, 0.0);
        let best_rx = crate::beams::best_directional_beam(&beams, &geometry, -16.2, 0.0);
        let mut arg = (0, 0, f64::NEG_INFINITY);
        for tx in 1..64 {
            for rx in 1..64 {
                if map.powers_db[tx][rx] > arg.2 {
                    arg = (tx, rx, map.powers_db[tx][rx]);
                }
            }
        }
        assert_eq!((arg.0, arg.1), (best_tx, best_rx));
    }

    #[test]
    fn omni_row_matches_the_analytic_array_factor_average() {
        // With one path, omni row power / directional-row average must equal
        // 1 / mean_k |AF_tx(k, aod)|^2, computed analytically from the same
        // array factor the simulator uses.
        let cb = codebook();
        let frame = build_sweep_frame(&cb);
        let beams = BeamCodebook::standard();
        let geometry = ArrayGeometry::default();
        let path = Path {
            delay_s: 0.0,
            gain_re: 1e-3,
            gain_im: 0.0,
            aod_az_deg: 0.0,
            aod_el_deg: 0.0,
            aoa_az_deg: 0.0,
            aoa_el_deg: 0.0,
            kind: PathKind::Direct,
        };
        let captures = capture_set(&frame, &beams, &geometry, &[path], f64::INFINITY, 9);
        let map = build_beamspace_map(&captures, &frame).unwrap();

        let rx = 32; // boresight Rx beam
        let omni_db = map.powers_db[0][rx];
        let dir_mean_lin: f64 = (1..64)
            .map(|tx| 10f64.powf(map.powers_db[tx][rx] / 10.0))
            .sum::<f64>()
            / 63.0;
        let measured_gap_db = omni_db - 10.0 * dir_mean_lin.log10();

        let analytic_mean: f64 = (1..64)
            .map(|tx| {
                crate::beams::array_factor(
                    &geometry,
                    beams.beam_to_angles(tx).unwrap(),
                    0.0,
                    0.0,
                )
                .norm_sqr()
            })
            .sum::<f64>()
            / 63.0;
        let analytic_gap_db = -10.0 * analytic_mean.log10();

        assert!(
            (measured_gap_db - analytic_gap_db).abs() < 1.0,
            "measured {measured_gap_db} dB vs analytic {analytic_gap_db} dB"
        );
    }

    #[test]
    fn missing_rx_beam_is_a_partial_map_error() {
        let cb = codebook();
        let frame = build_sweep_frame(&cb);
        let beams = BeamCodebook::standard();
        let mut captures = capture_set(
            &frame,
            &beams,
            &omni_geometry(),
            &[unit_path(0.0)],
            30.0,
            10,
        );
        captures.remove(29);
        captures.remove(5);
        match build_beamspace_map(&captures, &frame) {
            Err(Error::PartialMap(missing)) => assert_eq!(missing, vec![5, 29]),
            other => panic!("expected partial-map error, got {other:?}"),
        }
    }

    #[test]
    fn peak_over_median_snr_behaves() {
        let mut mags = vec![0.1; 401];
        mags[200] = 1.0;
        let snr = peak_over_median_snr(&mags);
        assert!((snr - 100.0).abs() < 1e-9);
    }

    #[test]
    fn noise_only_windows_stay_below_threshold() {
        let cb = codebook();
        let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        for trial in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_stream_seed(0xfeed, trial));
            let window: Vec<Complex64> = (0..2304)
                .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect();
            let profiles = matched_filter_bank(&window, &cb).unwrap();
            assert_eq!(
                identify_tx_beam(&profiles, DEFAULT_DETECTION_THRESHOLD),
                BeamDecision::BelowThreshold
            );
        }
    }
}
