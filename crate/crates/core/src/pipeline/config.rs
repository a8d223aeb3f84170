//! Scenario files: one JSON document per experiment, versioned, strict.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::forward::{FrequencyGrid, SourceScene};
use crate::geometry::{Direction, Point, SamplingGrid};
use crate::imaging::{eta_range, Baseline};
use crate::operator::NoiseSpec;

use super::PipelineError;

pub const SCHEMA_VERSION: u32 = 1;

/// Observation directions; each listed direction is completed with its antipode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum DirectionSpec {
    /// 2D directions given by angle from the x₁ axis.
    AnglesDeg { angles_deg: Vec<f64> },
    /// Explicit vectors, normalized on load.
    Vectors { vectors: Vec<Point> },
    /// `n` points of a Fibonacci lattice on the upper unit hemisphere.
    FibonacciHemisphere { fibonacci_hemisphere: usize },
}

impl Default for DirectionSpec {
    fn default() -> Self {
        DirectionSpec::AnglesDeg { angles_deg: vec![0.0, 45.0, 90.0, 135.0] }
    }
}

impl DirectionSpec {
    pub fn resolve(&self) -> Result<Vec<Direction>, PipelineError> {
        let dirs = match self {
            DirectionSpec::AnglesDeg { angles_deg } => {
                angles_deg.iter().map(|&a| Direction::from_angle_deg(a)).collect()
            }
            DirectionSpec::Vectors { vectors } => {
                vectors.iter().map(|v| Direction::normalized(*v)).collect::<Result<Vec<_>, _>>()?
            }
            DirectionSpec::FibonacciHemisphere { fibonacci_hemisphere } => {
                Direction::fibonacci_hemisphere(*fibonacci_hemisphere)
            }
        };
        if dirs.is_empty() {
            return Err(PipelineError::Config("at least one observation direction is required".into()));
        }
        Ok(dirs)
    }
}

/// η scan: absolute bounds, or a half-width around each configured pulse instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum EtaWindow {
    Absolute {
        min: f64,
        max: f64,
        #[serde(default = "default_eta_step")]
        step: f64,
    },
    AroundPulse {
        half_width: f64,
        #[serde(default = "default_eta_step")]
        step: f64,
    },
}

fn default_eta_step() -> f64 {
    0.05
}

impl Default for EtaWindow {
    fn default() -> Self {
        EtaWindow::AroundPulse { half_width: 3.0, step: default_eta_step() }
    }
}

impl EtaWindow {
    /// Scan values for a pulse nominally at `t_nominal`.
    pub fn etas(&self, t_nominal: f64) -> Vec<f64> {
        match *self {
            EtaWindow::Absolute { min, max, step } => eta_range(min, max, step),
            EtaWindow::AroundPulse { half_width, step } => {
                // keep the sample lattice anchored at t_nominal
                let n = (half_width / step + 1e-9).floor() as i64;
                (-n..=n).map(|k| t_nominal + k as f64 * step).collect()
            }
        }
    }

    pub fn step(&self) -> f64 {
        match *self {
            EtaWindow::Absolute { step, .. } | EtaWindow::AroundPulse { step, .. } => step,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            EtaWindow::Absolute { min, max, .. } => max - min,
            EtaWindow::AroundPulse { half_width, .. } => 2.0 * half_width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// h-profile support threshold relative to its maximum.
    #[serde(default = "Thresholds::default_rel")]
    pub rel_threshold: f64,
    #[serde(default)]
    pub baseline: Baseline,
    /// Spectral cutoff; defaults to `1e−14` without noise and `1e−3` with noise.
    #[serde(default)]
    pub cutoff_rel: Option<f64>,
    /// Level (relative to the maximum) defining reconstructed supports.
    #[serde(default = "Thresholds::default_level")]
    pub field_level: f64,
}

impl Thresholds {
    fn default_rel() -> f64 {
        0.01
    }

    fn default_level() -> f64 {
        0.5
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            rel_threshold: Self::default_rel(),
            baseline: Baseline::None,
            cutoff_rel: None,
            field_level: Self::default_level(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripMode {
    /// `1/I` for the first configured direction only.
    #[default]
    SingleDirection,
    /// `W` for the first pair.
    Pair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripConfig {
    pub etas: Vec<f64>,
    #[serde(default)]
    pub mode: StripMode,
    #[serde(default)]
    pub pulse: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HullConfig {
    /// Imaging instant per pulse; recovered from the h profile when absent.
    #[serde(default)]
    pub t0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSignalConfig {
    pub receiver: Point,
    #[serde(default)]
    pub t_min: f64,
    pub t_max: f64,
    #[serde(default = "TimeSignalConfig::default_dt")]
    pub dt: f64,
    #[serde(default = "TimeSignalConfig::default_sphere_pts")]
    pub sphere_pts: usize,
}

impl TimeSignalConfig {
    fn default_dt() -> f64 {
        0.01
    }

    fn default_sphere_pts() -> usize {
        200_000
    }

    pub fn times(&self) -> Vec<f64> {
        let n = ((self.t_max - self.t_min) / self.dt + 1e-9).floor() as usize;
        (0..=n).map(|k| self.t_min + k as f64 * self.dt).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub field_csv: bool,
    #[serde(default = "yes")]
    pub pgm: bool,
    /// Far-field bands of every processed pulse.
    #[serde(default)]
    pub bands_csv: bool,
    /// One field file per trajectory pulse in addition to the overlay.
    #[serde(default)]
    pub per_pulse_fields: bool,
}

fn yes() -> bool {
    true
}

impl Default for Outputs {
    fn default() -> Self {
        Self { field_csv: true, pgm: true, bands_csv: false, per_pulse_fields: false }
    }
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub scene: SourceScene,
    #[serde(default)]
    pub frequency: FrequencyGrid,
    #[serde(default)]
    pub directions: DirectionSpec,
    /// Direction whose pair drives the h profile; defaults to the first direction.
    #[serde(default)]
    pub pulse_direction: Option<Point>,
    /// Defaults to 121×121 cells on [−6, 6]² or 60³ cells on [−6, 6]³.
    #[serde(default)]
    pub sampling: Option<SamplingGrid>,
    /// Radius of the ball B_R searched by the h profile; defaults to the sampling box circumradius.
    #[serde(default)]
    pub ball_radius: Option<f64>,
    #[serde(default)]
    pub eta_window: EtaWindow,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Quadrature resolution for synthesis; defaults to 200 (2D) or 60 (3D).
    #[serde(default)]
    pub pts_per_axis: Option<usize>,
    /// Process every `pulse_stride`-th pulse in trajectory runs.
    #[serde(default = "one")]
    pub pulse_stride: usize,
    #[serde(default)]
    pub strip: Option<StripConfig>,
    #[serde(default)]
    pub hull: HullConfig,
    #[serde(default)]
    pub timesignal: Option<TimeSignalConfig>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn one() -> usize {
    1
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn dim(&self) -> usize {
        self.scene.dim()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.version != SCHEMA_VERSION {
            return Err(PipelineError::Config(format!(
                "unsupported scenario version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        self.scene.validate()?;
        self.frequency.validate()?;
        let dim = self.dim();
        for d in self.directions.resolve()? {
            if d.dim() != dim {
                return Err(PipelineError::Config(format!("{}-dimensional direction in a {dim}D scene", d.dim())));
            }
        }
        if let Some(p) = self.pulse_direction {
            if p.dim() != dim {
                return Err(PipelineError::Config("pulse_direction has the wrong dimension".into()));
            }
            Direction::normalized(p)?;
        }
        let grid = self.sampling_grid()?;
        if grid.dim() != dim {
            return Err(PipelineError::Config("sampling grid dimension differs from the scene".into()));
        }
        if let Some(r) = self.ball_radius {
            if !(r > 0.0) {
                return Err(PipelineError::Config("ball_radius must be positive".into()));
            }
        }
        let step = self.eta_window.step();
        if !(step > 0.0) || !(self.eta_window.length() >= 0.0) {
            return Err(PipelineError::Config("η window needs a positive step and nonnegative length".into()));
        }
        let period = self.frequency.alias_period();
        if self.eta_window.length() >= period {
            return Err(PipelineError::Config(format!(
                "η window of length {} is not shorter than the alias period 2π/Δω = {period}",
                self.eta_window.length()
            )));
        }
        if !(self.noise.level >= 0.0) || !self.noise.level.is_finite() {
            return Err(PipelineError::Config("noise level must be finite and nonnegative".into()));
        }
        let t = &self.thresholds;
        if !(t.rel_threshold > 0.0 && t.rel_threshold <= 1.0) {
            return Err(PipelineError::Config("rel_threshold must lie in (0, 1]".into()));
        }
        if !(t.field_level > 0.0 && t.field_level <= 1.0) {
            return Err(PipelineError::Config("field_level must lie in (0, 1]".into()));
        }
        if let Some(c) = t.cutoff_rel {
            if !(0.0..1.0).contains(&c) {
                return Err(PipelineError::Config("cutoff_rel must lie in [0, 1)".into()));
            }
        }
        if self.pts_per_axis.is_some_and(|p| p < 4) {
            return Err(PipelineError::Config("pts_per_axis must be at least 4".into()));
        }
        if self.pulse_stride == 0 {
            return Err(PipelineError::Config("pulse_stride must be positive".into()));
        }
        if let Some(s) = &self.strip {
            if s.pulse >= self.scene.pulses.len() {
                return Err(PipelineError::Config("strip pulse index out of range".into()));
            }
        }
        if let Some(ts) = &self.timesignal {
            if !(ts.dt > 0.0) || !(ts.t_max > ts.t_min) || ts.sphere_pts == 0 {
                return Err(PipelineError::Config("time signal needs dt > 0, t_max > t_min and sphere_pts > 0".into()));
            }
        }
        Ok(())
    }

    pub fn sampling_grid(&self) -> Result<SamplingGrid, PipelineError> {
        match &self.sampling {
            Some(g) => {
                g.validate()?;
                Ok(g.clone())
            }
            None if self.dim() == 3 => Ok(SamplingGrid::cube(3, -6.0, 6.0, 60)?),
            None => Ok(SamplingGrid::cube(2, -6.0, 6.0, 121)?),
        }
    }

    pub fn ball_radius(&self) -> Result<f64, PipelineError> {
        Ok(match self.ball_radius {
            Some(r) => r,
            None => self.sampling_grid()?.circumradius(),
        })
    }

    pub fn cutoff_rel(&self) -> f64 {
        self.thresholds.cutoff_rel.unwrap_or(if self.noise.is_active() { 1e-3 } else { 1e-14 })
    }

    pub fn pts_per_axis(&self) -> usize {
        self.pts_per_axis.unwrap_or(if self.dim() == 3 { 60 } else { 200 })
    }

    pub fn pulse_direction(&self) -> Result<Direction, PipelineError> {
        match self.pulse_direction {
            Some(p) => Ok(Direction::normalized(p)?),
            None => Ok(self.directions.resolve()?[0]),
        }
    }

    /// Pulse indices visited by trajectory runs.
    pub fn processed_pulses(&self) -> Vec<usize> {
        (0..self.scene.pulses.len()).step_by(self.pulse_stride).collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISK: &str = r#"{
        "version": 1,
        "scene": {
            "shape": {"kind": "disk", "center": [0, 0], "radius": 1},
            "trajectory": {"kind": "fixed", "point": [0, 0]},
            "pulses": [4.0]
        },
        "directions": {"angles_deg": [0]}
    }"#;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = Scenario::from_json(DISK).unwrap();
        assert_eq!(s.frequency, FrequencyGrid::default());
        assert_eq!(s.sampling_grid().unwrap().resolution, vec![121, 121]);
        assert_eq!(s.cutoff_rel(), 1e-14);
        assert_eq!(s.pts_per_axis(), 200);
        assert_eq!(s.eta_window.etas(4.0).len(), 121);
        assert_eq!(s.scene.wave_speed, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = DISK.replace("\"version\": 1,", "\"version\": 1, \"colour\": 3,");
        assert!(matches!(Scenario::from_json(&text), Err(PipelineError::Config(_))));
        let text = DISK.replace("\"radius\": 1", "\"radius\": 1, \"mass\": 2");
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn version_is_checked() {
        let text = DISK.replace("\"version\": 1", "\"version\": 2");
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn aliasing_window_is_rejected() {
        let text = DISK.replace(
            "\"directions\": {\"angles_deg\": [0]}",
            "\"directions\": {\"angles_deg\": [0]}, \"eta_window\": {\"min\": 0, \"max\": 40}",
        );
        let err = Scenario::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("alias"), "{err}");
    }

    #[test]
    fn noisy_runs_truncate_more() {
        let text = DISK.replace("\"version\": 1,", "\"version\": 1, \"noise\": {\"level\": 0.02, \"seed\": 1},");
        assert_eq!(Scenario::from_json(&text).unwrap().cutoff_rel(), 1e-3);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = Scenario::from_json(DISK).unwrap();
        assert_eq!(a.hash(), Scenario::from_json(DISK).unwrap().hash());
        let mut b = a.clone();
        b.noise.seed = 7;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn direction_specs() {
        let v: DirectionSpec = serde_json::from_str(r#"{"vectors": [[0, 0, 2]]}"#).unwrap();
        let d = v.resolve().unwrap();
        assert_eq!(d[0].as_point().coords(), &[0.0, 0.0, 1.0]);
        let f: DirectionSpec = serde_json::from_str(r#"{"fibonacci_hemisphere": 10}"#).unwrap();
        assert_eq!(f.resolve().unwrap().len(), 10);
        assert_eq!(DirectionSpec::default().resolve().unwrap().len(), 4);
    }

    #[test]
    fn around_pulse_window_is_anchored() {
        let w = EtaWindow::AroundPulse { half_width: 0.1, step: 0.05 };
        assert_eq!(w.etas(2.0), vec![1.9, 1.95, 2.0, 2.05, 2.1]);
    }
}
