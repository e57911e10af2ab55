//! Segment-scrambled chirp codebook synthesis.
//!
//! A single wideband LFM chirp is cut into equal-length time segments; each
//! transmit beam gets the same segments reassembled in a beam-specific
//! pseudorandom order. All 64 waveforms share the chirp's constant envelope,
//! energy and coarse spectrum while staying quasi-orthogonal under matched
//! filtering, which is what lets the receiver tell beams apart.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::par::*;

/// Number of time segments the base chirp is cut into.
pub const SEGMENT_COUNT: usize = 64;
/// Number of transmit beams (and therefore scrambled waveforms).
pub const BEAM_COUNT: usize = 64;
/// Seed of the shipped golden codebook.
pub const DEFAULT_SEED: u64 = 0xfe7f_c71a_bf94_cc19;

/// Chirp sweep parameters.
///
/// The sampled baseband chirp is `s[n] = exp(j*2*pi*(f0*t + (fm/T)*t^2))` at
/// `t = n/fs`, so the instantaneous frequency runs from `f0` to `f0 + 2*fm`
/// over the duration. With the default symmetric sweep that is -300 MHz to
/// +300 MHz in 2.778 us at 737.28 MS/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpParams {
    /// Sweep start frequency in Hz.
    #[serde(rename = "f0")]
    pub f0_hz: f64,
    /// Sweep-rate parameter in Hz; the instantaneous frequency reaches
    /// `f0 + 2*fm` at the end of the chirp.
    #[serde(rename = "fm")]
    pub fm_hz: f64,
    /// Chirp duration in seconds.
    #[serde(rename = "T")]
    pub duration_s: f64,
    /// Sample rate in Hz.
    #[serde(rename = "fs")]
    pub sample_rate_hz: f64,
}

impl Default for ChirpParams {
    fn default() -> Self {
        Self {
            f0_hz: -300e6,
            fm_hz: 300e6,
            duration_s: 2.778e-6,
            sample_rate_hz: 737.28e6,
        }
    }
}

impl ChirpParams {
    /// Number of samples in one chirp: `round(T * fs)`.
    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    /// Validate the parameter set against the codebook constraints.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f0", self.f0_hz),
            ("fm", self.fm_hz),
            ("T", self.duration_s),
            ("fs", self.sample_rate_hz),
        ] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite")));
            }
        }
        if self.duration_s <= 0.0 {
            return Err(Error::Parameter("chirp duration must be positive".into()));
        }
        if self.sample_rate_hz <= 0.0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        if self.fm_hz <= self.f0_hz {
            return Err(Error::Parameter("fm must exceed f0".into()));
        }
        if self.sample_rate_hz <= self.fm_hz - self.f0_hz {
            return Err(Error::Parameter(
                "sample rate must exceed the swept bandwidth fm - f0".into(),
            ));
        }
        let n = self.sample_count();
        if n == 0 {
            return Err(Error::Parameter("chirp too short: zero samples".into()));
        }
        if !n.is_multiple_of(SEGMENT_COUNT) {
            return Err(Error::Parameter(format!(
                "sample count round(T*fs) = {n} must be divisible by {SEGMENT_COUNT}"
            )));
        }
        Ok(())
    }
}

/// Generate the baseband complex LFM chirp for `params`.
///
/// `s[n] = exp(j*2*pi*(f0*t + (fm/T)*t^2))`, `t = n/fs`. Unit modulus by
/// construction; `s[0] = 1`.
pub fn generate_base_chirp(params: &ChirpParams) -> Result<Vec<Complex64>> {
    params.validate()?;
    let n = params.sample_count();
    let fs = params.sample_rate_hz;
    let rate = params.fm_hz / params.duration_s;
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let phase = 2.0 * PI * (params.f0_hz * t + rate * t * t);
            Complex64::from_polar(1.0, phase)
        })
        .collect())
}

/// Cut `samples` into `n_segments` contiguous equal-length slices.
pub fn segment_waveform(samples: &[Complex64], n_segments: usize) -> Result<Vec<Vec<Complex64>>> {
    if n_segments == 0 {
        return Err(Error::Parameter("segment count must be positive".into()));
    }
    if !samples.len().is_multiple_of(n_segments) {
        return Err(Error::Parameter(format!(
            "length {} not divisible by segment count {}",
            samples.len(),
            n_segments
        )));
    }
    let seg_len = samples.len() / n_segments;
    Ok(samples.chunks(seg_len).map(|c| c.to_vec()).collect())
}

/// A bijection over `{0..n-1}`, the per-beam segment reordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(Error::Parameter(format!(
                    "not a bijection over 0..{n}: entry {v} duplicated or out of range"
                )));
            }
            seen[v] = true;
        }
        Ok(Self(map))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Self(inv)
    }
}

/// SplitMix64: tiny documented 64-bit generator driving the shuffles.
#[derive(Debug, Clone)]
pub(crate) struct SplitMix64(u64);

impl SplitMix64 {
    pub(crate) fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        mix64(self.0)
    }

    /// Unbiased draw from `0..bound` by masked rejection.
    fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let mask = bound.next_power_of_two().wrapping_sub(1);
        loop {
            let r = self.next_u64() & mask;
            if r < bound {
                return r;
            }
        }
    }
}

/// SplitMix64 finalizer (Stafford variant 13).
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a master seed and a lane index.
///
/// Double-mixed so nearby lanes land at unrelated points of the generator's
/// orbit; beams (and captures) can be generated in any order or in parallel.
pub(crate) fn derive_stream_seed(seed: u64, lane: u64) -> u64 {
    mix64(seed ^ mix64(lane.wrapping_add(0xa076_1d64_78bd_642f)))
}

/// Deterministic per-beam segment permutation: Fisher-Yates driven by a
/// SplitMix64 stream derived from `(seed, beam_index)`.
pub fn generate_permutation(seed: u64, beam_index: usize) -> Permutation {
    generate_permutation_n(seed, beam_index, SEGMENT_COUNT)
}

pub(crate) fn generate_permutation_n(seed: u64, beam_index: usize, n: usize) -> Permutation {
    let mut rng = SplitMix64::new(derive_stream_seed(seed, beam_index as u64));
    let mut map: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        map.swap(i, j);
    }
    Permutation(map)
}

/// Reassemble segments in permuted order: output slot `n` carries segment
/// `perm.map()[n]`.
pub fn assemble_waveform(segments: &[Vec<Complex64>], perm: &Permutation) -> Result<Vec<Complex64>> {
    if segments.len() != perm.len() {
        return Err(Error::LengthMismatch(format!(
            "{} segments vs permutation of length {}",
            segments.len(),
            perm.len()
        )));
    }
    let mut out = Vec::with_capacity(segments.iter().map(Vec::len).sum());
    for &src in perm.map() {
        out.extend_from_slice(&segments[src]);
    }
    Ok(out)
}

/// The 64 scrambled transmit waveforms plus the permutations that made them.
///
/// Beam 0 carries the omnidirectional beam's waveform; directional beams are
/// 1..=63. Everything is a pure function of `(params, seed)`.
#[derive(Debug, Clone)]
pub struct WaveformCodebook {
    pub params: ChirpParams,
    pub n_segments: usize,
    pub seed: u64,
    pub permutations: Vec<Permutation>,
    pub waveforms: Vec<Vec<Complex64>>,
}

impl WaveformCodebook {
    /// Build the codebook from scratch: chirp, segmentation, per-beam shuffles.
    pub fn build(params: ChirpParams, seed: u64) -> Result<Self> {
        let permutations: Vec<Permutation> = (0..BEAM_COUNT)
            .map(|k| generate_permutation(seed, k))
            .collect();
        Self::from_permutations(params, seed, permutations)
    }

    /// Rebuild waveforms from explicit permutations (codebook file import).
    pub fn from_permutations(
        params: ChirpParams,
        seed: u64,
        permutations: Vec<Permutation>,
    ) -> Result<Self> {
        if permutations.len() != BEAM_COUNT {
            return Err(Error::Parameter(format!(
                "expected {BEAM_COUNT} permutations, got {}",
                permutations.len()
            )));
        }
        let base = generate_base_chirp(&params)?;
        let segments = segment_waveform(&base, SEGMENT_COUNT)?;
        let waveforms = permutations
            .iter()
            .map(|p| assemble_waveform(&segments, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            n_segments: SEGMENT_COUNT,
            seed,
            permutations,
            waveforms,
        })
    }

    pub fn n_beams(&self) -> usize {
        self.waveforms.len()
    }

    pub fn waveform_len(&self) -> usize {
        self.params.sample_count()
    }

    /// Energy of one waveform (equals the sample count for unit envelopes).
    pub fn energy(&self, beam: usize) -> f64 {
        self.waveforms[beam].iter().map(|s| s.norm_sqr()).sum()
    }

    /// 16-bit full-scale quantization of one waveform, interleaved I/Q.
    pub fn quantize_i16(&self, beam: usize) -> Vec<i16> {
        const FULL_SCALE: f64 = 32767.0;
        let mut out = Vec::with_capacity(2 * self.waveforms[beam].len());
        for s in &self.waveforms[beam] {
            out.push((s.re * FULL_SCALE).round().clamp(-FULL_SCALE, FULL_SCALE) as i16);
            out.push((s.im * FULL_SCALE).round().clamp(-FULL_SCALE, FULL_SCALE) as i16);
        }
        out
    }
}

/// Fraction of `samples`' energy whose DFT bins fall inside `[band_lo, band_hi]` Hz.
pub fn in_band_energy_fraction(
    samples: &[Complex64],
    sample_rate_hz: f64,
    band_lo_hz: f64,
    band_hi_hz: f64,
) -> f64 {
    let n = samples.len();
    let spectrum = fft::fft(samples);
    let mut total = 0.0;
    let mut in_band = 0.0;
    for (k, v) in spectrum.iter().enumerate() {
        let freq = if k < n.div_ceil(2) {
            k as f64 * sample_rate_hz / n as f64
        } else {
            (k as f64 - n as f64) * sample_rate_hz / n as f64
        };
        let p = v.norm_sqr();
        total += p;
        if freq >= band_lo_hz && freq <= band_hi_hz {
            in_band += p;
        }
    }
    in_band / total
}

/// Worst-case normalized cross-correlation over the codebook.
#[derive(Debug, Clone, Copy)]
pub struct CrossCorrelationReport {
    /// max over ordered pairs k != j of peak |xcorr(x_k, x_j)| / energy(x_k).
    pub peak_ratio: f64,
    pub worst_pair: (usize, usize),
}

/// Brute-force the peak cross-correlation ratio over every ordered beam pair.
///
/// All linear lags of every pair are scanned (fast convolution per pair); the
/// normalizer is the matched-filter peak, i.e. the waveform energy.
pub fn peak_cross_correlation(codebook: &WaveformCodebook) -> CrossCorrelationReport {
    let n = codebook.n_beams();
    let len = codebook.waveform_len();
    let padded = (2 * len).next_power_of_two();

    let spectra: Vec<Vec<Complex64>> = codebook
        .waveforms
        .iter()
        .map(|w| {
            let mut buf = vec![Complex64::new(0.0, 0.0); padded];
            buf[..len].copy_from_slice(w);
            fft::plan_forward(padded).process(&mut buf);
            buf
        })
        .collect();
    let energies: Vec<f64> = (0..n).map(|k| codebook.energy(k)).collect();

    let per_k: Vec<(f64, (usize, usize))> = (0..n)
        .into_par_iter()
        .map(|k| {
            let inverse = fft::plan_inverse(padded);
            let mut worst = (0.0_f64, (k, k));
            let mut buf = vec![Complex64::new(0.0, 0.0); padded];
            for j in 0..n {
                if j == k {
                    continue;
                }
                for (b, (x, y)) in buf.iter_mut().zip(spectra[k].iter().zip(&spectra[j])) {
                    *b = x * y.conj();
                }
                inverse.process(&mut buf);
                let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max) / padded as f64;
                let ratio = peak / energies[k];
                if ratio > worst.0 {
                    worst = (ratio, (k, j));
                }
            }
            worst
        })
        .collect();

    let (peak_ratio, worst_pair) = per_k
        .into_iter()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .unwrap();
    CrossCorrelationReport {
        peak_ratio,
        worst_pair,
    }
}
