//! Transmit control plane: cyclic playback of the 64 waveforms with
//! beam-switch events.
//!
//! The frame is the back-to-back concatenation of all beam waveforms, omni
//! first, directional 1..=63 after. A BeamIncrement event fires at every slot
//! boundary, and one BeamReset at the frame end models the playback address
//! wrapping back to the start.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::waveform::WaveformCodebook;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepEvent {
    BeamIncrement,
    BeamReset,
}

/// One full transmit sweep: samples, event schedule and beam order.
#[derive(Debug, Clone)]
pub struct SweepFrame {
    pub samples: Vec<Complex64>,
    pub events: Vec<(usize, SweepEvent)>,
    pub beam_order: Vec<usize>,
    pub slot_len: usize,
    pub sample_rate_hz: f64,
}

/// Concatenate the codebook in the default beam order (omni, then 1..=63).
pub fn build_sweep_frame(codebook: &WaveformCodebook) -> SweepFrame {
    let order: Vec<usize> = (0..codebook.n_beams()).collect();
    build_sweep_frame_with_order(codebook, order).expect("identity order is valid")
}

/// Concatenate the codebook in an explicit beam order.
pub fn build_sweep_frame_with_order(
    codebook: &WaveformCodebook,
    beam_order: Vec<usize>,
) -> Result<SweepFrame> {
    let n = codebook.n_beams();
    if beam_order.len() != n {
        return Err(Error::LengthMismatch(format!(
            "beam order has {} entries for {} beams",
            beam_order.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    for &b in &beam_order {
        if b >= n || seen[b] {
            return Err(Error::Parameter(format!("beam order entry {b} invalid")));
        }
        seen[b] = true;
    }

    let slot_len = codebook.waveform_len();
    let mut samples = Vec::with_capacity(n * slot_len);
    for &b in &beam_order {
        samples.extend_from_slice(&codebook.waveforms[b]);
    }
    let mut events: Vec<(usize, SweepEvent)> = (1..n)
        .map(|k| (k * slot_len, SweepEvent::BeamIncrement))
        .collect();
    events.push((n * slot_len, SweepEvent::BeamReset));

    Ok(SweepFrame {
        samples,
        events,
        beam_order,
        slot_len,
        sample_rate_hz: codebook.params.sample_rate_hz,
    })
}

impl SweepFrame {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_slots(&self) -> usize {
        self.beam_order.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Which beam is transmitting at a given sample index.
    pub fn beam_at_sample(&self, sample_index: usize) -> Result<usize> {
        if sample_index >= self.len() {
            return Err(Error::OutOfRange(format!(
                "sample {sample_index} outside frame of {}",
                self.len()
            )));
        }
        Ok(self.beam_order[sample_index / self.slot_len])
    }

    /// CSV export of the event schedule: `sample_index,event,beam`.
    ///
    /// The beam column is the one active after the event takes effect
    /// (wrapping to the first beam on reset).
    pub fn export_events_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "sample_index,event,beam")?;
        for &(idx, ev) in &self.events {
            let (name, beam) = match ev {
                SweepEvent::BeamIncrement => ("beam_increment", self.beam_order[idx / self.slot_len]),
                SweepEvent::BeamReset => ("beam_reset", self.beam_order[0]),
            };
            writeln!(w, "{idx},{name},{beam}")?;
        }
        Ok(())
    }
}
