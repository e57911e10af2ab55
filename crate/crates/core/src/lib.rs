//! Beamspace channel-sounding toolkit for the 60 GHz band.
//!
//! The pieces mirror a chirp-based beam-sweeping sounder:
//!
//! - [`waveform`]: segment-scrambled quasi-orthogonal chirp codebook.
//! - [`beams`]: beam index <-> steering angle mapping and the 2x8 array factor.
//! - [`sweep`]: cyclic 64-beam transmit frame with beam-switch events.
//! - [`scene`] / [`channel`]: plan-view multipath model and capture synthesis.
//! - [`dsp`]: frame sync, matched-filter beam identification, PDPs, RSS,
//!   beamspace maps and grid analyses.
//! - [`io`] / [`pipeline`]: file formats, manifests, batch runs.
//!
//! Heavy loops parallelize through rayon when the `parallel` feature (on by
//! default) is enabled; without it the same code runs sequentially.

pub mod beams;
pub mod channel;
pub mod dsp;
pub mod error;
pub mod fft;
pub mod io;
pub mod par;
pub mod pipeline;
pub mod scene;
pub mod sweep;
pub mod waveform;

pub use error::{Error, Result};
