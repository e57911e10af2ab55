//! Beam codebook, 2x8 array factor and pose geometry.
//!
//! Beam index layout: index 0 is the omnidirectional beam; directional beams
//! 1..=63 are elevation-major, azimuth-minor over 21 azimuths (-54 deg to
//! +54 deg, 5.4 deg step) times 3 elevations (+18, 0, -18 deg). That puts
//! beam 32 at (0 deg, 0 deg) boresight.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AZIMUTH_COUNT: usize = 21;
pub const ELEVATION_COUNT: usize = 3;
pub const DIRECTIONAL_COUNT: usize = AZIMUTH_COUNT * ELEVATION_COUNT;
pub const OMNI_INDEX: usize = 0;
pub const AZIMUTH_START_DEG: f64 = -54.0;
pub const AZIMUTH_STEP_DEG: f64 = 5.4;
pub const ELEVATIONS_DEG: [f64; ELEVATION_COUNT] = [18.0, 0.0, -18.0];

/// Wrap an angle to (-180, 180] degrees.
pub fn wrap_deg(mut a: f64) -> f64 {
    a %= 360.0;
    if a > 180.0 {
        a -= 360.0;
    } else if a <= -180.0 {
        a += 360.0;
    }
    a
}

/// Steering target of one beam index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamDirection {
    Omni,
    Steered { az_deg: f64, el_deg: f64 },
}

/// The 63 + 1 beam codebook: index <-> steering angle mapping.
#[derive(Debug, Clone)]
pub struct BeamCodebook {
    azimuths_deg: Vec<f64>,
    elevations_deg: Vec<f64>,
}

impl Default for BeamCodebook {
    fn default() -> Self {
        Self::standard()
    }
}

impl BeamCodebook {
    /// The 21 x 3 codebook used throughout.
    pub fn standard() -> Self {
        Self {
            azimuths_deg: (0..AZIMUTH_COUNT)
                .map(|a| AZIMUTH_START_DEG + AZIMUTH_STEP_DEG * a as f64)
                .collect(),
            elevations_deg: ELEVATIONS_DEG.to_vec(),
        }
    }

    pub fn n_beams(&self) -> usize {
        1 + self.n_directional()
    }

    pub fn n_directional(&self) -> usize {
        self.azimuths_deg.len() * self.elevations_deg.len()
    }

    /// Steering direction of a beam index (0 is omni).
    pub fn beam_to_angles(&self, beam_index: usize) -> Result<BeamDirection> {
        if beam_index == OMNI_INDEX {
            return Ok(BeamDirection::Omni);
        }
        if beam_index > self.n_directional() {
            return Err(Error::OutOfRange(format!(
                "beam index {beam_index} exceeds {}",
                self.n_directional()
            )));
        }
        let d = beam_index - 1;
        let e = d / self.azimuths_deg.len();
        let a = d % self.azimuths_deg.len();
        Ok(BeamDirection::Steered {
            az_deg: self.azimuths_deg[a],
            el_deg: self.elevations_deg[e],
        })
    }

    /// Nearest directional beam index for a steering angle pair.
    pub fn angles_to_beam(&self, az_deg: f64, el_deg: f64) -> usize {
        let a = self
            .azimuths_deg
            .iter()
            .enumerate()
            .min_by(|x, y| {
                (x.1 - az_deg)
                    .abs()
                    .partial_cmp(&(y.1 - az_deg).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        let e = self
            .elevations_deg
            .iter()
            .enumerate()
            .min_by(|x, y| {
                (x.1 - el_deg)
                    .abs()
                    .partial_cmp(&(y.1 - el_deg).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        1 + e * self.azimuths_deg.len() + a
    }

    /// Azimuth column of a directional beam (None for omni/out of range).
    pub fn azimuth_index(&self, beam_index: usize) -> Option<usize> {
        if beam_index == OMNI_INDEX || beam_index > self.n_directional() {
            return None;
        }
        Some((beam_index - 1) % self.azimuths_deg.len())
    }

    /// Elevation block of a directional beam (None for omni/out of range).
    pub fn elevation_index(&self, beam_index: usize) -> Option<usize> {
        if beam_index == OMNI_INDEX || beam_index > self.n_directional() {
            return None;
        }
        Some((beam_index - 1) / self.azimuths_deg.len())
    }

    /// CSV export: `index,azimuth_deg,elevation_deg` (omni row left blank).
    pub fn export_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,azimuth_deg,elevation_deg")?;
        for idx in 0..self.n_beams() {
            match self.beam_to_angles(idx).expect("index in range") {
                BeamDirection::Omni => writeln!(w, "{idx},,")?,
                BeamDirection::Steered { az_deg, el_deg } => {
                    writeln!(w, "{idx},{az_deg},{el_deg}")?
                }
            }
        }
        Ok(())
    }
}

/// Uniform rectangular array: rows along elevation, columns along azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in carrier wavelengths.
    pub spacing_wavelengths: f64,
    pub carrier_hz: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self {
            rows: 2,
            cols: 8,
            spacing_wavelengths: 0.5,
            carrier_hz: 60.48e9,
        }
    }
}

impl ArrayGeometry {
    pub fn n_elements(&self) -> usize {
        self.rows * self.cols
    }
}

/// Phase-steered array factor, normalized so |gain| = 1 when the observation
/// direction equals the steering direction. Omni steering returns 1 for every
/// direction. Steered beams radiate into the forward hemisphere only:
/// |azimuth| > 90 deg returns 0.
///
/// Angles are in the array's local frame, degrees.
pub fn array_factor(
    geometry: &ArrayGeometry,
    steering: BeamDirection,
    dir_az_deg: f64,
    dir_el_deg: f64,
) -> Complex64 {
    let (steer_az, steer_el) = match steering {
        BeamDirection::Omni => return Complex64::new(1.0, 0.0),
        BeamDirection::Steered { az_deg, el_deg } => (az_deg, el_deg),
    };
    if wrap_deg(dir_az_deg).abs() > 90.0 {
        return Complex64::new(0.0, 0.0);
    }

    // Direction cosines: u along the column (azimuth) axis, v along rows.
    let cosines = |az: f64, el: f64| {
        let (az, el) = (az.to_radians(), el.to_radians());
        (az.sin() * el.cos(), el.sin())
    };
    let (ud, vd) = cosines(dir_az_deg, dir_el_deg);
    let (us, vs) = cosines(steer_az, steer_el);

    let psi_u = 2.0 * std::f64::consts::PI * geometry.spacing_wavelengths * (ud - us);
    let psi_v = 2.0 * std::f64::consts::PI * geometry.spacing_wavelengths * (vd - vs);

    let mut sum = Complex64::new(0.0, 0.0);
    for r in 0..geometry.rows {
        for c in 0..geometry.cols {
            sum += Complex64::from_polar(1.0, c as f64 * psi_u + r as f64 * psi_v);
        }
    }
    sum / geometry.n_elements() as f64
}

/// Directional beam with the highest |array factor| toward a direction,
/// lowest index on ties.
pub fn best_directional_beam(
    beams: &BeamCodebook,
    geometry: &ArrayGeometry,
    dir_az_deg: f64,
    dir_el_deg: f64,
) -> usize {
    let mut best = (1, -1.0_f64);
    for d in 1..=beams.n_directional() {
        let steering = beams.beam_to_angles(d).expect("directional index");
        let g = array_factor(geometry, steering, dir_az_deg, dir_el_deg).norm();
        if g > best.1 {
            best = (d, g);
        }
    }
    best.0
}

/// Position plus yaw: local steering angles rotate to world by yaw only.
///
/// World azimuth convention: 0 deg along +y, positive toward +x, so
/// `az = atan2(dx, dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position_m: [f64; 2],
    pub yaw_deg: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw_deg: f64) -> Self {
        Self {
            position_m: [x, y],
            yaw_deg,
        }
    }

    /// Convert a world-frame azimuth to this pose's local frame.
    pub fn local_azimuth(&self, world_az_deg: f64) -> f64 {
        wrap_deg(world_az_deg - self.yaw_deg)
    }
}

/// World azimuth (degrees) of the vector from `from` to `to`.
pub fn world_azimuth_deg(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[0] - from[0]).atan2(to[1] - from[1]).to_degrees()
}
