//! Artifact writers and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fmt_e;
use crate::imaging::{IndicatorField, PulseEstimate};

use super::PipelineError;

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `x,y[,z],value` rows in grid order.
pub fn field_csv(field: &IndicatorField) -> String {
    let dim = field.grid.dim();
    let mut out = String::with_capacity(field.values.len() * 64);
    out.push_str(if dim == 3 { "x,y,z,value\n" } else { "x,y,value\n" });
    for (i, v) in field.values.iter().enumerate() {
        for c in field.grid.cell_center(i).coords() {
            out.push_str(&fmt_e(*c));
            out.push(',');
        }
        out.push_str(&fmt_e(*v));
        out.push('\n');
    }
    out
}

/// Plain PGM with values mapped linearly from `[0, max]` to `[0, 65535]`.
///
/// Rows run from high x₂ (top) to low x₂; 3D fields are max-projected along x₃.
pub fn field_pgm(field: &IndicatorField) -> String {
    let g = &field.grid;
    let (nx, ny) = (g.resolution[0], g.resolution[1]);
    let nz = if g.dim() == 3 { g.resolution[2] } else { 1 };
    let mut img = vec![0.0f64; nx * ny];
    for ix in 0..nx {
        for iy in 0..ny {
            let base = (ix * ny + iy) * nz;
            img[iy * nx + ix] = field.values[base..base + nz].iter().cloned().fold(0.0, f64::max);
        }
    }
    let max = img.iter().cloned().fold(0.0, f64::max);
    let mut out = format!("P2\n{nx} {ny}\n65535\n");
    for iy in (0..ny).rev() {
        let row: Vec<String> = (0..nx)
            .map(|ix| {
                let v = img[iy * nx + ix];
                let q = if max > 0.0 { (v / max * 65535.0).round().clamp(0.0, 65535.0) } else { 0.0 };
                (q as u32).to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn h_profile_csv(etas: &[f64], h: &[f64]) -> String {
    let mut out = String::from("eta,h\n");
    for (e, v) in etas.iter().zip(h) {
        out.push_str(&format!("{},{}\n", fmt_e(*e), fmt_e(*v)));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub pulse: usize,
    pub t_nominal: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimate: Option<PulseEstimate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub centroid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_position: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub software_version: String,
    pub directions: Vec<Vec<f64>>,
    pub eta_step: f64,
    pub cutoff_rel: f64,
    pub pulses: Vec<PulseRecord>,
    pub outputs: Vec<OutputRecord>,
    pub warnings: Vec<String>,
    /// Peak times of a receiver signal run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub peaks: Vec<f64>,
    pub wall_time_s: f64,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Collects output files under one directory and records their hashes.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    records: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn new(root: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(Self { root: root.to_path_buf(), records: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf, PipelineError> {
        let path = self.root.join(name);
        write_atomic(&path, contents)?;
        let sha256 = hex::encode(Sha256::digest(contents));
        self.records.retain(|r| r.path != name);
        self.records.push(OutputRecord { path: name.to_string(), sha256 });
        Ok(path)
    }

    pub fn write_field(
        &mut self,
        stem: &str,
        field: &IndicatorField,
        csv: bool,
        pgm: bool,
    ) -> Result<(), PipelineError> {
        if csv {
            self.write(&format!("{stem}.csv"), field_csv(field).as_bytes())?;
        }
        if pgm {
            self.write(&format!("{stem}.pgm"), field_pgm(field).as_bytes())?;
        }
        Ok(())
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest, PipelineError> {
        manifest.outputs = self.records;
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.root.join(MANIFEST_NAME), text.as_bytes())?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, PipelineError> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

/// Files whose current hash differs from the manifest (or that are missing).
pub fn verify_outputs(dir: &Path, manifest: &RunManifest) -> Vec<String> {
    manifest
        .outputs
        .iter()
        .filter(|r| sha256_file(&dir.join(&r.path)).map(|h| h != r.sha256).unwrap_or(true))
        .map(|r| r.path.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, SamplingGrid};
    use crate::imaging::Normalization;

    fn small_field() -> IndicatorField {
        let grid = SamplingGrid::new(Point::new2(0.0, 0.0), Point::new2(2.0, 1.0), vec![2, 1]).unwrap();
        IndicatorField { grid, values: vec![0.5, 1.0], normalization: Normalization::Raw }
    }

    #[test]
    fn csv_layout() {
        let text = field_csv(&small_field());
        assert_eq!(
            text,
            "x,y,value\n5.000000000000e-01,5.000000000000e-01,5.000000000000e-01\n\
             1.500000000000e+00,5.000000000000e-01,1.000000000000e+00\n"
        );
    }

    #[test]
    fn pgm_scaling() {
        let text = field_pgm(&small_field());
        assert_eq!(text, "P2\n2 1\n65535\n32768 65535\n");
    }

    #[test]
    fn pgm_orientation_puts_high_y_on_top() {
        let grid = SamplingGrid::new(Point::new2(0.0, 0.0), Point::new2(1.0, 2.0), vec![1, 2]).unwrap();
        let f = IndicatorField { grid, values: vec![0.0, 1.0], normalization: Normalization::Raw };
        assert_eq!(field_pgm(&f), "P2\n1 2\n65535\n65535\n0\n");
    }

    #[test]
    fn outputs_are_hashed_and_verified() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::new(dir.path()).unwrap();
        out.write("a.txt", b"hello").unwrap();
        let m = out
            .finish(RunManifest {
                command: "test".into(),
                scenario_hash: String::new(),
                seed: 0,
                software_version: "0".into(),
                directions: vec![],
                eta_step: 0.05,
                cutoff_rel: 0.0,
                pulses: vec![],
                outputs: vec![],
                warnings: vec![],
                peaks: vec![],
                wall_time_s: 0.0,
            })
            .unwrap();
        assert_eq!(m.outputs[0].sha256, "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
        let back = read_manifest(dir.path()).unwrap();
        assert!(verify_outputs(dir.path(), &back).is_empty());
        fs::write(dir.path().join("a.txt"), b"changed").unwrap();
        assert_eq!(verify_outputs(dir.path(), &back), vec!["a.txt".to_string()]);
    }
}
