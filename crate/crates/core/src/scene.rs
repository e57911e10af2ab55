//! Geometric indoor multipath model: plan-view room, doorway aperture,
//! reflectors, and image-method path tracing.
//!
//! The scene is 2D; elevation enters only through the array factors. Paths
//! are the direct ray (free space through the doorway, wall-penetration loss
//! otherwise) plus first-order specular reflections off every wall and
//! reflector whose mirror point is reachable.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beams::{world_azimuth_deg, Pose};
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Geometric tolerance in meters for aperture/occlusion tests.
const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment2 {
    pub a: Point2,
    pub b: Point2,
}

impl Segment2 {
    pub fn new(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Self {
            a: Point2::new(ax, ay),
            b: Point2::new(bx, by),
        }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    /// Signed area test: >0 left of a->b, <0 right, ~0 collinear.
    fn side(&self, p: Point2) -> f64 {
        (self.b.x - self.a.x) * (p.y - self.a.y) - (self.b.y - self.a.y) * (p.x - self.a.x)
    }

    /// Proper crossing point of segment `pq` with this segment, if any.
    ///
    /// Crossings at the very endpoints of `pq` are excluded (a ray leaving or
    /// arriving exactly on a surface is not an obstruction of that node).
    pub fn crossing(&self, p: Point2, q: Point2) -> Option<Point2> {
        let r = Point2::new(q.x - p.x, q.y - p.y);
        let s = Point2::new(self.b.x - self.a.x, self.b.y - self.a.y);
        let denom = r.x * s.y - r.y * s.x;
        if denom.abs() < 1e-15 {
            return None; // parallel or collinear: no proper crossing
        }
        let qp = Point2::new(self.a.x - p.x, self.a.y - p.y);
        let t = (qp.x * s.y - qp.y * s.x) / denom; // along p->q
        let u = (qp.x * r.y - qp.y * r.x) / denom; // along a->b
        let eps_t = GEOM_EPS / (r.x.hypot(r.y) + GEOM_EPS);
        let eps_u = GEOM_EPS / (s.x.hypot(s.y) + GEOM_EPS);
        if t > eps_t && t < 1.0 - eps_t && u >= -eps_u && u <= 1.0 + eps_u {
            Some(Point2::new(p.x + t * r.x, p.y + t * r.y))
        } else {
            None
        }
    }

    /// Mirror a point across this segment's infinite line.
    pub fn mirror(&self, p: Point2) -> Point2 {
        let dx = self.b.x - self.a.x;
        let dy = self.b.y - self.a.y;
        let len2 = dx * dx + dy * dy;
        let t = ((p.x - self.a.x) * dx + (p.y - self.a.y) * dy) / len2;
        let foot = Point2::new(self.a.x + t * dx, self.a.y + t * dy);
        Point2::new(2.0 * foot.x - p.x, 2.0 * foot.y - p.y)
    }

    /// Distance from a point to this segment.
    pub fn distance_to(&self, p: Point2) -> f64 {
        let dx = self.b.x - self.a.x;
        let dy = self.b.y - self.a.y;
        let len2 = dx * dx + dy * dy;
        if len2 < 1e-30 {
            return self.a.dist(p);
        }
        let t = (((p.x - self.a.x) * dx + (p.y - self.a.y) * dy) / len2).clamp(0.0, 1.0);
        Point2::new(self.a.x + t * dx, self.a.y + t * dy).dist(p)
    }
}

/// Surface material: power reflection/penetration behavior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Amplitude reflection coefficient in [0, 1].
    pub reflection: f64,
    /// One-pass penetration loss in dB; `None` means impenetrable (metal).
    pub penetration_db: Option<f64>,
}

impl Material {
    pub fn concrete() -> Self {
        Self {
            reflection: 0.3,
            penetration_db: Some(15.0),
        }
    }

    pub fn metal() -> Self {
        Self {
            reflection: 0.9,
            penetration_db: None,
        }
    }
}

/// A wall or reflector: a 2D segment with a material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub segment: Segment2,
    pub material: Material,
    pub label: String,
}

/// Receiver measurement grid: `nx * ny` positions, `spacing_m` apart.
///
/// Position index convention: `index = ix * ny + iy` with 0-based `ix`, `iy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RxGrid {
    pub nx: usize,
    pub ny: usize,
    pub spacing_m: f64,
    pub origin_m: [f64; 2],
}

impl Default for RxGrid {
    fn default() -> Self {
        Self {
            nx: 14,
            ny: 25,
            spacing_m: 0.15,
            origin_m: [0.0, 0.0],
        }
    }
}

impl RxGrid {
    pub fn n_positions(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index_to_xy(&self, index: usize) -> Result<(usize, usize)> {
        if index >= self.n_positions() {
            return Err(Error::OutOfRange(format!(
                "position index {index} exceeds {}",
                self.n_positions() - 1
            )));
        }
        Ok((index / self.ny, index % self.ny))
    }

    pub fn xy_to_index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    pub fn position_m(&self, index: usize) -> Result<Point2> {
        let (ix, iy) = self.index_to_xy(index)?;
        Ok(Point2::new(
            self.origin_m[0] + ix as f64 * self.spacing_m,
            self.origin_m[1] + iy as f64 * self.spacing_m,
        ))
    }

    /// Physical extents `( (nx-1)*spacing, (ny-1)*spacing )` in meters.
    pub fn extents_m(&self) -> (f64, f64) {
        (
            (self.nx as f64 - 1.0) * self.spacing_m,
            (self.ny as f64 - 1.0) * self.spacing_m,
        )
    }

    pub fn contains(&self, p: Point2) -> bool {
        let (ex, ey) = self.extents_m();
        let eps = 1e-9;
        p.x >= self.origin_m[0] - eps
            && p.x <= self.origin_m[0] + ex + eps
            && p.y >= self.origin_m[1] - eps
            && p.y <= self.origin_m[1] + ey + eps
    }
}

/// Room description: walls (one carrying the doorway aperture), reflectors,
/// transmitter pose, receiver grid and orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub walls: Vec<Surface>,
    pub doorway: Segment2,
    pub reflectors: Vec<Surface>,
    pub tx: Pose,
    /// Orientation applied to the receiver array at every grid position.
    pub rx_yaw_deg: f64,
    pub grid: RxGrid,
    /// Absolute noise floor in dB relative to unit waveform power.
    pub noise_floor_db: f64,
    pub carrier_hz: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        for s in self.walls.iter().chain(&self.reflectors) {
            if s.segment.length() < GEOM_EPS {
                return Err(Error::Parameter(format!("degenerate segment '{}'", s.label)));
            }
            if !(0.0..=1.0).contains(&s.material.reflection) {
                return Err(Error::Parameter(format!(
                    "reflection coefficient of '{}' outside [0, 1]",
                    s.label
                )));
            }
            if let Some(db) = s.material.penetration_db {
                if db < 0.0 {
                    return Err(Error::Parameter(format!(
                        "negative penetration loss on '{}'",
                        s.label
                    )));
                }
            }
        }
        if self.grid.nx == 0 || self.grid.ny == 0 || self.grid.spacing_m <= 0.0 {
            return Err(Error::Parameter("empty receiver grid".into()));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    fn surfaces(&self) -> impl Iterator<Item = &Surface> {
        self.walls.iter().chain(self.reflectors.iter())
    }
}

/// How a path got from TX to RX.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Direct,
    Penetrated,
    Reflection,
}

/// One propagation path: geometry resolved into delay, complex gain and
/// world-frame departure/arrival azimuths (elevation is 0 in plan view).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub delay_s: f64,
    pub gain_re: f64,
    pub gain_im: f64,
    pub aod_az_deg: f64,
    pub aod_el_deg: f64,
    pub aoa_az_deg: f64,
    pub aoa_el_deg: f64,
    pub kind: PathKind,
}

impl Path {
    pub fn gain(&self) -> Complex64 {
        Complex64::new(self.gain_re, self.gain_im)
    }
}

/// Free-space amplitude `lambda / (4 pi d)` with carrier phase rotation.
fn free_space_gain(length_m: f64, wavelength_m: f64) -> Complex64 {
    let amp = wavelength_m / (4.0 * std::f64::consts::PI * length_m);
    let phase = -2.0 * std::f64::consts::PI * length_m / wavelength_m;
    Complex64::from_polar(amp.min(1.0), phase)
}

/// Attenuation of one leg crossing scene surfaces.
///
/// Returns the linear amplitude factor and whether any lossy crossing
/// happened; `None` if the leg is blocked by an impenetrable surface.
/// Crossings inside the doorway aperture are free. `skip` exempts the
/// reflecting surface itself from its own legs.
fn leg_attenuation(scene: &Scene, from: Point2, to: Point2, skip: Option<&Surface>) -> Option<(f64, bool)> {
    let mut amp = 1.0;
    let mut attenuated = false;
    for surface in scene.surfaces() {
        if let Some(skipped) = skip {
            if std::ptr::eq(surface, skipped) {
                continue;
            }
        }
        if let Some(hit) = surface.segment.crossing(from, to) {
            if scene.doorway.distance_to(hit) < 1e-6 {
                continue; // through the aperture
            }
            let db = surface.material.penetration_db?;
            amp *= 10f64.powf(-db / 20.0);
            attenuated = true;
        }
    }
    Some((amp, attenuated))
}

/// Trace the direct ray and all first-order specular reflections from the
/// scene transmitter to `rx`. Paths come back sorted by delay.
pub fn trace_paths(scene: &Scene, rx: Point2) -> Result<Vec<Path>> {
    if !scene.grid.contains(rx) {
        return Err(Error::OutOfBounds(rx.x, rx.y));
    }
    let tx = Point2::new(scene.tx.position_m[0], scene.tx.position_m[1]);
    let lambda = scene.wavelength_m();
    let mut paths = Vec::new();

    // Direct ray.
    let d = tx.dist(rx);
    if d > GEOM_EPS {
        if let Some((amp, attenuated)) = leg_attenuation(scene, tx, rx, None) {
            let gain = free_space_gain(d, lambda) * amp;
            paths.push(Path {
                delay_s: d / SPEED_OF_LIGHT,
                gain_re: gain.re,
                gain_im: gain.im,
                aod_az_deg: world_azimuth_deg(tx.into(), rx.into()),
                aod_el_deg: 0.0,
                aoa_az_deg: world_azimuth_deg(rx.into(), tx.into()),
                aoa_el_deg: 0.0,
                kind: if attenuated {
                    PathKind::Penetrated
                } else {
                    PathKind::Direct
                },
            });
        }
    }

    // First-order specular reflections via the image method.
    for surface in scene.surfaces() {
        let seg = &surface.segment;
        // Specular bounce needs TX and RX on the same side of the plane.
        if seg.side(tx) * seg.side(rx) <= 0.0 {
            continue;
        }
        let image = seg.mirror(tx);
        let Some(bounce) = seg.crossing(image, rx) else {
            continue;
        };
        // No wall inside the doorway aperture to bounce off.
        if scene.doorway.distance_to(bounce) < 1e-6 {
            continue;
        }
        let Some((amp_in, _)) = leg_attenuation(scene, tx, bounce, Some(surface)) else {
            continue;
        };
        let Some((amp_out, _)) = leg_attenuation(scene, bounce, rx, Some(surface)) else {
            continue;
        };
        let total_len = tx.dist(bounce) + bounce.dist(rx);
        let gain =
            free_space_gain(total_len, lambda) * (surface.material.reflection * amp_in * amp_out);
        if gain.norm() == 0.0 {
            continue;
        }
        paths.push(Path {
            delay_s: total_len / SPEED_OF_LIGHT,
            gain_re: gain.re,
            gain_im: gain.im,
            aod_az_deg: world_azimuth_deg(tx.into(), bounce.into()),
            aod_el_deg: 0.0,
            aoa_az_deg: world_azimuth_deg(rx.into(), bounce.into()),
            aoa_el_deg: 0.0,
            kind: PathKind::Reflection,
        });
    }

    paths.sort_by(|a, b| a.delay_s.partial_cmp(&b.delay_s).unwrap());
    Ok(paths)
}

/// Line-of-sight test: the direct ray reaches RX without any lossy crossing.
pub fn is_los(scene: &Scene, rx: Point2) -> Result<bool> {
    if !scene.grid.contains(rx) {
        return Err(Error::OutOfBounds(rx.x, rx.y));
    }
    let tx = Point2::new(scene.tx.position_m[0], scene.tx.position_m[1]);
    Ok(matches!(
        leg_attenuation(scene, tx, rx, None),
        Some((_, false))
    ))
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_scene(tx: Pose, grid: RxGrid) -> Scene {
        Scene {
            walls: vec![],
            doorway: Segment2::new(-1e6, -1e6, -1e6 + 1e-3, -1e6),
            reflectors: vec![],
            tx,
            rx_yaw_deg: 180.0,
            grid,
            noise_floor_db: -140.0,
            carrier_hz: 60.48e9,
        }
    }

    fn big_grid() -> RxGrid {
        RxGrid {
            nx: 100,
            ny: 100,
            spacing_m: 0.15,
            origin_m: [-5.0, -5.0],
        }
    }

    #[test]
    fn default_grid_is_14_by_25_covering_1_95_by_3_6_m() {
        let grid = RxGrid::default();
        assert_eq!(grid.n_positions(), 350);
        let (ex, ey) = grid.extents_m();
        assert!((ex - 1.95).abs() < 1e-12);
        assert!((ey - 3.6).abs() < 1e-12);
    }

    #[test]
    fn position_index_convention() {
        let grid = RxGrid::default();
        assert_eq!(grid.index_to_xy(74).unwrap(), (2, 24));
        assert_eq!(grid.xy_to_index(2, 24), 74);
        assert!(grid.index_to_xy(350).is_err());
    }

    #[test]
    fn free_space_direct_path_delay() {
        let scene = empty_scene(Pose::new(0.0, 0.0, 0.0), big_grid());
        let rx = Point2::new(3.0, 0.0);
        let paths = trace_paths(&scene, rx).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].kind, PathKind::Direct);
        let expect = 3.0 / SPEED_OF_LIGHT;
        assert!((paths[0].delay_s - expect).abs() < 1e-15);
        assert!((paths[0].delay_s - 10.007e-9).abs() < 5e-12);
    }

    #[test]
    fn ray_through_doorway_is_unattenuated() {
        let mut scene = empty_scene(Pose::new(0.0, -1.0, 0.0), big_grid());
        scene.walls.push(Surface {
            segment: Segment2::new(-5.0, 0.0, 5.0, 0.0),
            material: Material::concrete(),
            label: "tx wall".into(),
        });
        scene.doorway = Segment2::new(-0.4, 0.0, 0.4, 0.0);
        // RX straight through the aperture.
        let paths = trace_paths(&scene, Point2::new(0.0, 2.0)).unwrap();
        let direct = paths.iter().find(|p| p.kind == PathKind::Direct).unwrap();
        let free = free_space_gain(3.0, scene.wavelength_m());
        assert!((direct.gain().norm() - free.norm()).abs() < 1e-15);
        // RX behind the wall proper: penetrated, 15 dB weaker.
        let paths = trace_paths(&scene, Point2::new(2.0, 2.0)).unwrap();
        let pen = paths.iter().find(|p| p.kind == PathKind::Penetrated).unwrap();
        let free = free_space_gain(Point2::new(0.0, -1.0).dist(Point2::new(2.0, 2.0)), scene.wavelength_m());
        let ratio_db = 20.0 * (pen.gain().norm() / free.norm()).log10();
        assert!((ratio_db + 15.0).abs() < 1e-9, "got {ratio_db} dB");
    }

    #[test]
    fn mirror_wall_reflection_matches_closed_form() {
        // Wall parallel to the TX-RX line at offset h: image-method length
        // must equal sqrt(d^2 + 4 h^2).
        let d = 4.0;
        let h = 1.5;
        let mut scene = empty_scene(Pose::new(0.0, 0.0, 0.0), big_grid());
        scene.walls.push(Surface {
            segment: Segment2::new(-10.0, h, 10.0, h),
            material: Material::concrete(),
            label: "mirror".into(),
        });
        let paths = trace_paths(&scene, Point2::new(d, 0.0)).unwrap();
        let refl = paths
            .iter()
            .find(|p| p.kind == PathKind::Reflection)
            .expect("reflection present");
        let expect_len = (d * d + 4.0 * h * h).sqrt();
        assert!((refl.delay_s * SPEED_OF_LIGHT - expect_len).abs() < 1e-9);
        // Amplitude carries the reflection coefficient.
        let free = free_space_gain(expect_len, scene.wavelength_m());
        assert!((refl.gain().norm() - 0.3 * free.norm()).abs() < 1e-15);
        // And the bounce point sits midway in x.
        assert!((refl.aod_az_deg - world_azimuth_deg([0.0, 0.0], [d / 2.0, h])).abs() < 1e-9);
    }

    #[test]
    fn reflection_is_never_shorter_than_direct() {
        let mut scene = empty_scene(Pose::new(0.3, 0.2, 0.0), big_grid());
        scene.walls.push(Surface {
            segment: Segment2::new(-8.0, 3.0, 8.0, 3.2),
            material: Material::concrete(),
            label: "slanted".into(),
        });
        let rx = Point2::new(2.5, 1.0);
        let paths = trace_paths(&scene, rx).unwrap();
        let direct = paths.iter().find(|p| p.kind == PathKind::Direct).unwrap();
        for p in paths.iter().filter(|p| p.kind == PathKind::Reflection) {
            assert!(p.delay_s >= direct.delay_s);
        }
    }

    #[test]
    fn metal_blocks_direct_ray() {
        let mut scene = empty_scene(Pose::new(0.0, -1.0, 0.0), big_grid());
        scene.walls.push(Surface {
            segment: Segment2::new(-5.0, 0.0, 5.0, 0.0),
            material: Material::metal(),
            label: "metal sheet".into(),
        });
        let paths = trace_paths(&scene, Point2::new(0.0, 2.0)).unwrap();
        // Direct blocked, and TX/RX sit on opposite sides so no bounce either.
        assert!(paths.is_empty());
    }

    #[test]
    fn rx_outside_grid_is_rejected() {
        let scene = empty_scene(Pose::new(0.0, 0.0, 0.0), RxGrid::default());
        assert!(trace_paths(&scene, Point2::new(100.0, 0.0)).is_err());
    }

    #[test]
    fn empty_path_list_in_deep_shadow() {
        // Metal box around the RX: no direct, no reflection reaches inside.
        let mut scene = empty_scene(Pose::new(0.0, -3.0, 0.0), big_grid());
        for seg in [
            Segment2::new(1.0, 1.0, 3.0, 1.0),
            Segment2::new(3.0, 1.0, 3.0, 3.0),
            Segment2::new(3.0, 3.0, 1.0, 3.0),
            Segment2::new(1.0, 3.0, 1.0, 1.0),
        ] {
            scene.walls.push(Surface {
                segment: seg,
                material: Material::metal(),
                label: "box".into(),
            });
        }
        let paths = trace_paths(&scene, Point2::new(2.0, 2.0)).unwrap();
        assert!(paths.is_empty());
    }
}
