//! Scenario runs: synthesize → assemble → (noise) → sharpen → invert → persist.

pub mod config;
pub mod io;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::forward::{farfield_band, find_peaks, time_signal, write_bands_csv, FarFieldBand, ForwardError};
use crate::geometry::{Direction, GeometryError, Point};
use crate::imaging::{
    estimate_pulse, h_profile, normalize, scan_field, Combine, ImagingError, IndicatorField, Normalization,
    PicardKernel, PulseEstimate,
};
use crate::operator::{add_noise, assemble_toeplitz, OperatorError};
use crate::spectral::{sharpen, SpectralError};

pub use config::Scenario;
use config::StripMode;
use io::{OutputDir, PulseRecord, RunManifest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("pulse {pulse}: h profile has no support")]
    NoSupport { pulse: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

impl PipelineError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Numerical(_) | PipelineError::NoSupport { .. } => 3,
            PipelineError::Io(_) => 4,
        }
    }
}

impl From<GeometryError> for PipelineError {
    fn from(e: GeometryError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<ForwardError> for PipelineError {
    fn from(e: ForwardError) -> Self {
        match e {
            ForwardError::Io(e) => PipelineError::Io(e.to_string()),
            other => PipelineError::Config(other.to_string()),
        }
    }
}

impl From<OperatorError> for PipelineError {
    fn from(e: OperatorError) -> Self {
        PipelineError::Numerical(e.to_string())
    }
}

impl From<SpectralError> for PipelineError {
    fn from(e: SpectralError) -> Self {
        PipelineError::Numerical(e.to_string())
    }
}

impl From<ImagingError> for PipelineError {
    fn from(e: ImagingError) -> Self {
        PipelineError::Numerical(e.to_string())
    }
}

/// Operators of one pulse: the imaging directions as consecutive `(x̂, −x̂)`
/// kernels and the pair that drives the h profile.
#[derive(Clone, Debug)]
pub struct PulseBundle {
    pub pulse: usize,
    pub kernels: Vec<PicardKernel>,
    pub pulse_pair: (PicardKernel, PicardKernel),
    pub bands: Vec<FarFieldBand>,
}

/// `[d₀, −d₀, d₁, −d₁, …]` followed by the pulse pair when it is not among them.
fn expanded_directions(scn: &Scenario) -> Result<(Vec<Direction>, usize), PipelineError> {
    let mut dirs = Vec::new();
    for d in scn.directions.resolve()? {
        dirs.push(d);
        dirs.push(d.neg());
    }
    let p = scn.pulse_direction()?;
    let pos = dirs.iter().position(|d| d.approx_eq(&p, 1e-12));
    let idx = match pos {
        Some(i) if i % 2 == 0 => i,
        _ => {
            dirs.push(p);
            dirs.push(p.neg());
            dirs.len() - 2
        }
    };
    Ok((dirs, idx))
}

/// Noise stream for `(pulse, direction)`.
fn noise_stream(pulse: usize, dir_index: usize) -> u64 {
    ((pulse as u64) << 32) | dir_index as u64
}

pub fn build_bundle(scn: &Scenario, pulse: usize) -> Result<PulseBundle, PipelineError> {
    let (dirs, pair_idx) = expanded_directions(scn)?;
    let grid = scn.frequency;
    let pts = scn.pts_per_axis();
    let cutoff = scn.cutoff_rel();
    let built: Vec<(FarFieldBand, PicardKernel)> = dirs
        .par_iter()
        .enumerate()
        .map(|(k, d)| -> Result<_, PipelineError> {
            let band = farfield_band(&scn.scene, pulse, d, &grid, pts)?;
            let f = assemble_toeplitz(&band)?;
            let m = add_noise(&f.entries, &scn.noise, noise_stream(pulse, k))?;
            let sharp = sharpen(&m, *d, grid)?;
            Ok((band, PicardKernel::new(&sharp, cutoff)?))
        })
        .collect::<Result<_, _>>()?;
    let m = 2 * scn.directions.resolve()?.len();
    let (bands, kernels): (Vec<_>, Vec<_>) = built.into_iter().unzip();
    let pulse_pair = (kernels[pair_idx].clone(), kernels[pair_idx + 1].clone());
    Ok(PulseBundle { pulse, kernels: kernels[..m].to_vec(), pulse_pair, bands })
}

/// h profile and pulse estimate of one pulse.
#[derive(Clone, Debug)]
pub struct PulseResult {
    pub etas: Vec<f64>,
    pub h: Vec<f64>,
    pub estimate: Result<PulseEstimate, PipelineError>,
}

pub fn pulse_profile(scn: &Scenario, bundle: &PulseBundle) -> Result<PulseResult, PipelineError> {
    let t_nominal = scn.scene.pulse_time(bundle.pulse)?;
    let etas = scn.eta_window.etas(t_nominal);
    let grid = scn.sampling_grid()?;
    let c = scn.scene.wave_speed;
    let h = h_profile(&bundle.pulse_pair.0, &bundle.pulse_pair.1, &grid, scn.ball_radius()?, &etas, c)?;
    let t = &scn.thresholds;
    let estimate = estimate_pulse(&h, &etas, t.rel_threshold, t.baseline, c).map_err(|e| match e {
        ImagingError::NoSupport => PipelineError::NoSupport { pulse: bundle.pulse },
        other => other.into(),
    });
    Ok(PulseResult { etas, h, estimate })
}

/// Field of the chosen strip indicator at `eta`.
pub fn strip_field(
    scn: &Scenario,
    bundle: &PulseBundle,
    eta: f64,
    mode: StripMode,
) -> Result<IndicatorField, PipelineError> {
    let grid = scn.sampling_grid()?;
    let (kernels, combine) = match mode {
        StripMode::SingleDirection => (vec![bundle.kernels[0].clone()], Combine::SingleDirection),
        StripMode::Pair => (bundle.kernels[..2].to_vec(), Combine::SinglePairW),
    };
    Ok(scan_field(&kernels, &grid, eta, scn.scene.wave_speed, combine)?)
}

/// Normalized multi-direction field at `t0`.
pub fn hull_field(scn: &Scenario, bundle: &PulseBundle, t0: f64) -> Result<IndicatorField, PipelineError> {
    let grid = scn.sampling_grid()?;
    let raw = scan_field(&bundle.kernels, &grid, t0, scn.scene.wave_speed, Combine::MultiDirectionI)?;
    Ok(normalize(&raw))
}

/// Result for one trajectory pulse.
#[derive(Clone, Debug)]
pub struct TrajectoryPoint {
    pub pulse: usize,
    pub t_nominal: f64,
    pub truth: Point,
    pub estimate: Option<PulseEstimate>,
    pub centroid: Option<Point>,
    pub failure: Option<String>,
    pub field: Option<IndicatorField>,
}

impl TrajectoryPoint {
    pub fn error(&self) -> Option<f64> {
        self.centroid.map(|c| c.distance(&self.truth))
    }
}

/// Recovers `t0` and the support centroid of one pulse.
pub fn trajectory_point(scn: &Scenario, pulse: usize) -> Result<TrajectoryPoint, PipelineError> {
    let t_nominal = scn.scene.pulse_time(pulse)?;
    let truth = scn.scene.source_position(pulse)?;
    let mut point =
        TrajectoryPoint { pulse, t_nominal, truth, estimate: None, centroid: None, failure: None, field: None };
    let attempt = || -> Result<(PulseEstimate, IndicatorField), PipelineError> {
        let bundle = build_bundle(scn, pulse)?;
        let est = pulse_profile(scn, &bundle)?.estimate?;
        let field = hull_field(scn, &bundle, est.t0)?;
        Ok((est, field))
    };
    match attempt() {
        Ok((est, field)) => {
            point.estimate = Some(est);
            point.centroid = field.centroid(scn.thresholds.field_level);
            if point.centroid.is_none() {
                point.failure = Some("empty superlevel set".into());
            }
            point.field = Some(field);
        }
        Err(e @ PipelineError::Io(_)) | Err(e @ PipelineError::Config(_)) => return Err(e),
        Err(e) => {
            log::warn!("pulse {pulse}: {e}");
            point.failure = Some(e.to_string());
        }
    }
    Ok(point)
}

/// Pointwise maximum of normalized fields on a common grid.
pub fn overlay(fields: &[&IndicatorField]) -> Option<IndicatorField> {
    let first = fields.first()?;
    let mut values = vec![0.0f64; first.values.len()];
    for f in fields {
        for (v, w) in values.iter_mut().zip(&f.values) {
            *v = v.max(*w);
        }
    }
    Some(IndicatorField { grid: first.grid.clone(), values, normalization: Normalization::MaxOne })
}

struct Run<'a> {
    scn: &'a Scenario,
    out: OutputDir,
    started: Instant,
    command: &'static str,
    warnings: Vec<String>,
    pulses: Vec<PulseRecord>,
    peaks: Vec<f64>,
}

impl<'a> Run<'a> {
    fn new(scn: &'a Scenario, out_dir: &Path, command: &'static str) -> Result<Self, PipelineError> {
        let warnings = scn.scene.validate()?;
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(Self {
            scn,
            out: OutputDir::new(out_dir)?,
            started: Instant::now(),
            command,
            warnings,
            pulses: Vec::new(),
            peaks: Vec::new(),
        })
    }

    fn finish(self) -> Result<RunManifest, PipelineError> {
        let directions = expanded_directions(self.scn)?.0.iter().map(|d| d.as_point().coords().to_vec()).collect();
        let manifest = RunManifest {
            command: self.command.to_string(),
            scenario_hash: self.scn.hash(),
            seed: self.scn.noise.seed,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            directions,
            eta_step: self.scn.eta_window.step(),
            cutoff_rel: self.scn.cutoff_rel(),
            pulses: self.pulses,
            outputs: Vec::new(),
            warnings: self.warnings,
            peaks: self.peaks,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        self.out.finish(manifest)
    }
}

fn record(pulse: usize, t_nominal: f64) -> PulseRecord {
    PulseRecord { pulse, t_nominal, estimate: None, centroid: None, true_position: None, error: None }
}

/// Writes the far-field bands of every pulse.
pub fn run_synthesize(scn: &Scenario, out_dir: &Path) -> Result<RunManifest, PipelineError> {
    let mut run = Run::new(scn, out_dir, "synthesize")?;
    let (dirs, _) = expanded_directions(scn)?;
    for j in 0..scn.scene.pulses.len() {
        let bands = dirs
            .par_iter()
            .map(|d| farfield_band(&scn.scene, j, d, &scn.frequency, scn.pts_per_axis()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut buf = Vec::new();
        write_bands_csv(&mut buf, &bands).map_err(|e| PipelineError::Io(e.to_string()))?;
        run.out.write(&format!("bands_pulse_{j}.csv"), &buf)?;
        run.pulses.push(record(j, scn.scene.pulses[j]));
    }
    run.finish()
}

fn write_bands(run: &mut Run, bundle: &PulseBundle) -> Result<(), PipelineError> {
    if run.scn.outputs.bands_csv {
        let mut buf = Vec::new();
        write_bands_csv(&mut buf, &bundle.bands).map_err(|e| PipelineError::Io(e.to_string()))?;
        run.out.write(&format!("bands_pulse_{}.csv", bundle.pulse), &buf)?;
    }
    Ok(())
}

/// Pulse-moment recovery for every pulse; writes `h_profile_<j>.csv`.
///
/// A pulse without support is recorded in the manifest and reported as an
/// error after all pulses have been processed.
pub fn run_pulse(scn: &Scenario, out_dir: &Path) -> Result<RunManifest, PipelineError> {
    let mut run = Run::new(scn, out_dir, "pulse")?;
    let mut first_err = None;
    for j in 0..scn.scene.pulses.len() {
        let bundle = build_bundle(scn, j)?;
        write_bands(&mut run, &bundle)?;
        let res = pulse_profile(scn, &bundle)?;
        run.out.write(&format!("h_profile_{j}.csv"), io::h_profile_csv(&res.etas, &res.h).as_bytes())?;
        let mut rec = record(j, scn.scene.pulses[j]);
        match res.estimate {
            Ok(e) => {
                log::info!("pulse {j}: t0 = {:.4}, interval [{:.4}, {:.4}]", e.t0, e.eta1, e.eta2);
                rec.estimate = Some(e);
            }
            Err(e) => {
                rec.error = Some(e.to_string());
                first_err.get_or_insert(e);
            }
        }
        run.pulses.push(rec);
    }
    let manifest = run.finish()?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Strip indicator fields for each configured η; writes `strip_eta<η>.{csv,pgm}`.
pub fn run_strip(scn: &Scenario, out_dir: &Path) -> Result<RunManifest, PipelineError> {
    let cfg = scn.strip.as_ref().ok_or_else(|| PipelineError::Config("scenario has no `strip` section".into()))?;
    let mut run = Run::new(scn, out_dir, "strip")?;
    let bundle = build_bundle(scn, cfg.pulse)?;
    write_bands(&mut run, &bundle)?;
    for &eta in &cfg.etas {
        let field = normalize(&strip_field(scn, &bundle, eta, cfg.mode)?);
        run.out.write_field(&format!("strip_eta{eta:.2}"), &field, scn.outputs.field_csv, scn.outputs.pgm)?;
    }
    run.pulses.push(record(cfg.pulse, scn.scene.pulses[cfg.pulse]));
    run.finish()
}

/// Multi-direction support image of every pulse; writes `hull_<j>.{csv,pgm}`.
pub fn run_hull(scn: &Scenario, out_dir: &Path) -> Result<RunManifest, PipelineError> {
    let mut run = Run::new(scn, out_dir, "hull")?;
    for j in 0..scn.scene.pulses.len() {
        let bundle = build_bundle(scn, j)?;
        write_bands(&mut run, &bundle)?;
        let mut rec = record(j, scn.scene.pulses[j]);
        let t0 = match scn.hull.t0 {
            Some(t) => t,
            None => {
                let est = pulse_profile(scn, &bundle)?.estimate?;
                rec.estimate = Some(est);
                est.t0
            }
        };
        let field = hull_field(scn, &bundle, t0)?;
        rec.centroid = field.centroid(scn.thresholds.field_level).map(|p| p.coords().to_vec());
        rec.true_position = Some(scn.scene.source_position(j)?.coords().to_vec());
        run.out.write_field(&format!("hull_{j}"), &field, scn.outputs.field_csv, scn.outputs.pgm)?;
        run.pulses.push(rec);
    }
    run.finish()
}

/// Trajectory reconstruction over the processed pulses; writes
/// `trajectory.csv` and the overlay of all normalized support images.
pub fn run_trajectory(scn: &Scenario, out_dir: &Path) -> Result<RunManifest, PipelineError> {
    if scn.scene.pulses.len() < 2 {
        return Err(PipelineError::Config("a trajectory run needs at least two pulses".into()));
    }
    let mut run = Run::new(scn, out_dir, "trajectory")?;
    let dim = scn.dim();
    let axes = ["x", "y", "z"];
    let mut table = String::from("pulse,t_nominal,t0,eta1,eta2,");
    for prefix in ["true", "est"] {
        for a in &axes[..dim] {
            table.push_str(&format!("{prefix}_{a},"));
        }
    }
    table.push_str("error,status\n");

    let mut fields = Vec::new();
    for j in scn.processed_pulses() {
        let p = trajectory_point(scn, j)?;
        let f = crate::fmt_e;
        let (t0, e1, e2) = p.estimate.map(|e| (f(e.t0), f(e.eta1), f(e.eta2))).unwrap_or_default();
        table.push_str(&format!("{j},{},{t0},{e1},{e2},", f(p.t_nominal)));
        for c in p.truth.coords() {
            table.push_str(&format!("{},", f(*c)));
        }
        match p.centroid {
            Some(c) => c.coords().iter().for_each(|v| table.push_str(&format!("{},", f(*v)))),
            None => (0..dim).for_each(|_| table.push(',')),
        }
        let err = p.error().map(f).unwrap_or_default();
        let status = if p.failure.is_some() { "failed" } else { "ok" };
        table.push_str(&format!("{err},{status}\n"));

        let mut rec = record(j, p.t_nominal);
        rec.estimate = p.estimate;
        rec.centroid = p.centroid.map(|c| c.coords().to_vec());
        rec.true_position = Some(p.truth.coords().to_vec());
        rec.error = p.failure.clone();
        run.pulses.push(rec);
        if let Some(field) = p.field {
            if scn.outputs.per_pulse_fields {
                run.out.write_field(&format!("hull_{j}"), &field, scn.outputs.field_csv, scn.outputs.pgm)?;
            }
            fields.push(field);
        }
    }
    run.out.write("trajectory.csv", table.as_bytes())?;
    if let Some(ov) = overlay(&fields.iter().collect::<Vec<_>>()) {
        run.out.write_field("trajectory_overlay", &ov, scn.outputs.field_csv, scn.outputs.pgm)?;
    }
    run.finish()
}

/// Receiver signal `U(x₀, t)`; writes `signal.csv` and records the peak times.
pub fn run_timesignal(scn: &Scenario, out_dir: &Path) -> Result<RunManifest, PipelineError> {
    let cfg =
        scn.timesignal.as_ref().ok_or_else(|| PipelineError::Config("scenario has no `timesignal` section".into()))?;
    let mut run = Run::new(scn, out_dir, "timesignal")?;
    let times = cfg.times();
    let u = time_signal(&scn.scene, &cfg.receiver, &times, cfg.sphere_pts)?;
    run.peaks = find_peaks(&times, &u, 0.05);
    let mut text = String::from("t,u\n");
    for (t, v) in times.iter().zip(&u) {
        text.push_str(&format!("{},{}\n", crate::fmt_e(*t), crate::fmt_e(*v)));
    }
    run.out.write("signal.csv", text.as_bytes())?;
    run.finish()
}
