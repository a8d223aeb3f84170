#![allow(dead_code)]

use std::path::PathBuf;

use mffm::forward::{farfield_band, FrequencyGrid, SourceProfile, SourceScene};
use mffm::geometry::{Direction, Point, Shape};
use mffm::imaging::PicardKernel;
use mffm::operator::assemble_toeplitz;
use mffm::pipeline::Scenario;
use mffm::spectral::{sharpen, SharpOperator};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(&scenario_path(name)).unwrap()
}

/// Unit disk at the origin with the default polynomial profile, pulsed once at `t0`.
pub fn disk_scene(t0: f64) -> SourceScene {
    SourceScene::stationary(Shape::disk(Point::new2(0.0, 0.0), 1.0), SourceProfile::Polynomial2d, vec![t0], 1.0)
}

pub fn sharp_for(scene: &SourceScene, dir: Direction, pts: usize) -> SharpOperator {
    let grid = FrequencyGrid::default();
    let band = farfield_band(scene, 0, &dir, &grid, pts).unwrap();
    sharpen(&assemble_toeplitz(&band).unwrap().entries, dir, grid).unwrap()
}

pub fn kernel_for(scene: &SourceScene, dir: Direction, cutoff: f64) -> PicardKernel {
    PicardKernel::new(&sharp_for(scene, dir, 200), cutoff).unwrap()
}

/// `(x̂, −x̂)` kernels for the disk scene.
pub fn disk_pair(t0: f64, angle_deg: f64) -> (PicardKernel, PicardKernel) {
    let scene = disk_scene(t0);
    let d = Direction::from_angle_deg(angle_deg);
    (kernel_for(&scene, d, 1e-14), kernel_for(&scene, d.neg(), 1e-14))
}
