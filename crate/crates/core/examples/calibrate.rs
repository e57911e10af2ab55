//! Measure the codebook quality numbers that the tests freeze as regression
//! bounds: worst-case cross-correlation ratio, spectral occupancy, chirp
//! autocorrelation floor and the noise-only detection threshold.
//!
//! Run after changing the default seed or chirp parameters:
//!
//! ```text
//! cargo run --release -p beamsounder-core --example calibrate
//! ```

use beamsounder_core::dsp::calibrate_detection_threshold;
use beamsounder_core::fft::valid_xcorr_direct;
use beamsounder_core::sweep::build_sweep_frame;
use beamsounder_core::waveform::{
    in_band_energy_fraction, peak_cross_correlation, ChirpParams, WaveformCodebook, DEFAULT_SEED,
};

fn main() {
    let params = ChirpParams::default();
    let codebook = WaveformCodebook::build(params, DEFAULT_SEED).expect("default codebook");
    println!("seed: {:#018x}", codebook.seed);
    println!("waveforms: {} x {}", codebook.n_beams(), codebook.waveform_len());

    let frame = build_sweep_frame(&codebook);
    println!(
        "frame: {} samples, {:.4} us",
        frame.len(),
        frame.duration_s() * 1e6
    );

    // Spectral occupancy across all beams.
    let fractions: Vec<f64> = codebook
        .waveforms
        .iter()
        .map(|w| in_band_energy_fraction(w, params.sample_rate_hz, -300e6, 300e6))
        .collect();
    let min = fractions.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = fractions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "in-band energy fraction: min {:.6}, max {:.6}, spread {:.4} pp",
        min,
        max,
        (max - min) * 100.0
    );

    // Worst-case cross-correlation over all ordered pairs (fast path).
    let xc = peak_cross_correlation(&codebook);
    println!(
        "theta (peak xcorr ratio): {:.6} at pair {:?}",
        xc.peak_ratio, xc.worst_pair
    );

    // Direct time-domain spot check of the worst pair, all lags both sides.
    let (k, j) = xc.worst_pair;
    let len = codebook.waveform_len();
    let mut padded = vec![num_complex::Complex64::new(0.0, 0.0); len - 1];
    padded.extend_from_slice(&codebook.waveforms[k]);
    padded.extend(vec![num_complex::Complex64::new(0.0, 0.0); len - 1]);
    let direct = valid_xcorr_direct(&padded, &codebook.waveforms[j]);
    let direct_peak = direct.iter().map(|c| c.norm()).fold(0.0, f64::max) / codebook.energy(k);
    println!("  direct-route check of that pair: {direct_peak:.6}");

    // Autocorrelation sidelobe floor of beam 0 (median over lags).
    let mut window = codebook.waveforms[0].clone();
    window.extend(vec![num_complex::Complex64::new(0.0, 0.0); 512]);
    let auto = beamsounder_core::fft::valid_xcorr_fft(&window, &codebook.waveforms[0]);
    let peak = auto.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    let mut side_db: Vec<f64> = auto
        .iter()
        .map(|c| 10.0 * (c.norm_sqr() / peak).max(1e-30).log10())
        .collect();
    side_db.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "autocorr median sidelobe: {:.2} dB",
        side_db[side_db.len() / 2]
    );

    // Detection threshold at the 1e-3 false-alarm quantile.
    let threshold =
        calibrate_detection_threshold(&codebook, 3000, 1e-3, 0x7357_ca11).expect("calibration");
    println!("detection threshold (1e-3 FA, 3000 trials): {threshold:.6}");
}
