//! FFT-backed correlation kernels plus a direct time-domain reference.
//!
//! The fast path is used everywhere in the receiver chain; the direct path
//! exists as an independent implementation for the dual-route equivalence
//! check and stays free of any FFT machinery.

use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

static PLANNER: LazyLock<Mutex<FftPlanner<f64>>> =
    LazyLock::new(|| Mutex::new(FftPlanner::new()));

pub fn plan_forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.lock().unwrap().plan_fft_forward(len)
}

pub fn plan_inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.lock().unwrap().plan_fft_inverse(len)
}

/// Forward DFT of `samples` (unnormalized, like the underlying plan).
pub fn fft(samples: &[Complex64]) -> Vec<Complex64> {
    let mut buf = samples.to_vec();
    plan_forward(buf.len()).process(&mut buf);
    buf
}

/// Circular cross-correlation `r[l] = sum_i a[(l+i) mod L] * conj(b[i])`.
///
/// `b` is zero-padded to the length of `a`; the result has length `a.len()`.
pub fn circular_xcorr(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let len = a.len();
    assert!(b.len() <= len, "template longer than signal");

    let mut fa = a.to_vec();
    plan_forward(len).process(&mut fa);

    let mut fb = vec![Complex64::new(0.0, 0.0); len];
    fb[..b.len()].copy_from_slice(b);
    plan_forward(len).process(&mut fb);

    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    plan_inverse(len).process(&mut prod);
    let scale = 1.0 / len as f64;
    for v in &mut prod {
        *v *= scale;
    }
    prod
}

/// Cross-correlation of `window` against `template` at the valid lags
/// `0..=window.len() - template.len()`, computed by fast convolution.
///
/// Internally pads to the next power of two; padding does not contaminate the
/// valid lags because the template never wraps past the window there.
pub fn valid_xcorr_fft(window: &[Complex64], template: &[Complex64]) -> Vec<Complex64> {
    let w = window.len();
    let t = template.len();
    assert!(t > 0 && t <= w, "template must fit inside the window");
    let padded = w.next_power_of_two();

    let mut fw = vec![Complex64::new(0.0, 0.0); padded];
    fw[..w].copy_from_slice(window);
    plan_forward(padded).process(&mut fw);

    let mut ft = vec![Complex64::new(0.0, 0.0); padded];
    ft[..t].copy_from_slice(template);
    plan_forward(padded).process(&mut ft);

    let mut prod: Vec<Complex64> = fw.iter().zip(&ft).map(|(x, y)| x * y.conj()).collect();
    plan_inverse(padded).process(&mut prod);
    let scale = 1.0 / padded as f64;
    prod.truncate(w - t + 1);
    for v in &mut prod {
        *v *= scale;
    }
    prod
}

/// Direct time-domain counterpart of [`valid_xcorr_fft`]. O(n*m); the
/// independent reference for the dual-implementation check.
pub fn valid_xcorr_direct(window: &[Complex64], template: &[Complex64]) -> Vec<Complex64> {
    let w = window.len();
    let t = template.len();
    assert!(t > 0 && t <= w, "template must fit inside the window");
    (0..=w - t)
        .map(|lag| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, x) in template.iter().enumerate() {
                acc += window[lag + i] * x.conj();
            }
            acc
        })
        .collect()
}
