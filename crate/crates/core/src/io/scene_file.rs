//! Scene JSON document: named materials plus walls/doorway/reflectors in
//! plan view. A built-in default scene approximates the measured room: a
//! corridor-side transmitter against the south wall, a doorway, a metal
//! ventilation-grid column near the entrance and a metal closet.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::beams::Pose;
use crate::error::{Error, Result};
use crate::scene::{Material, RxGrid, Scene, Segment2, Surface};

/// JSON bytes of the shipped default scene.
pub const DEFAULT_SCENE_JSON: &str = include_str!("../../assets/default_scene.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceSpec {
    /// `[x0, y0, x1, y1]` in meters.
    pub segment: [f64; 4],
    /// Key into the `materials` table.
    pub material: String,
    pub label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub materials: BTreeMap<String, Material>,
    pub walls: Vec<SurfaceSpec>,
    /// Open segment in the transmitter wall, `[x0, y0, x1, y1]`.
    pub doorway: [f64; 4],
    pub reflectors: Vec<SurfaceSpec>,
    pub tx_pose: Pose,
    pub rx_yaw_deg: f64,
    pub grid: RxGrid,
    pub noise_floor_db: f64,
    pub carrier_hz: f64,
}

impl SceneFile {
    pub fn resolve(&self) -> Result<Scene> {
        let lookup = |spec: &SurfaceSpec| -> Result<Surface> {
            let material = self.materials.get(&spec.material).copied().ok_or_else(|| {
                Error::Parameter(format!(
                    "surface '{}' references unknown material '{}'",
                    spec.label, spec.material
                ))
            })?;
            Ok(Surface {
                segment: Segment2::new(spec.segment[0], spec.segment[1], spec.segment[2], spec.segment[3]),
                material,
                label: spec.label.clone(),
            })
        };
        let scene = Scene {
            walls: self.walls.iter().map(lookup).collect::<Result<Vec<_>>>()?,
            doorway: Segment2::new(self.doorway[0], self.doorway[1], self.doorway[2], self.doorway[3]),
            reflectors: self
                .reflectors
                .iter()
                .map(lookup)
                .collect::<Result<Vec<_>>>()?,
            tx: self.tx_pose,
            rx_yaw_deg: self.rx_yaw_deg,
            grid: self.grid,
            noise_floor_db: self.noise_floor_db,
            carrier_hz: self.carrier_hz,
        };
        scene.validate()?;
        Ok(scene)
    }
}

pub fn parse_scene_json(bytes: &[u8]) -> Result<Scene> {
    let file: SceneFile = serde_json::from_slice(bytes)?;
    file.resolve()
}

pub fn load_scene(path: &FsPath) -> Result<Scene> {
    parse_scene_json(&std::fs::read(path)?)
}

/// The built-in default scene.
pub fn default_scene() -> Scene {
    parse_scene_json(DEFAULT_SCENE_JSON.as_bytes()).expect("embedded scene is valid")
}
