//! Far-field synthesis for pulsed moving sources, plus the time-domain
//! receiver signal used to illustrate pulse separability.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Direction, GeometryError, Point, Shape, Trajectory};
use crate::matrix::pairwise_sum;

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("pulse index {index} out of range ({count} pulses)")]
    PulseIndex { index: usize, count: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("band csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Real-valued source amplitude, evaluated at the offset `x − a(t_j)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceProfile {
    /// `2x₁ + 3x₂² + x₁x₂² + 1` (only the first two components are used).
    #[default]
    Polynomial2d,
    Constant {
        value: f64,
    },
    /// `strength · exp(−|x|²/(2η)) / (√(2π) η)` with `η = eta_width`.
    Gaussian {
        strength: f64,
        eta_width: f64,
    },
}

impl SourceProfile {
    pub fn eval(&self, offset: &Point) -> f64 {
        match self {
            SourceProfile::Polynomial2d => {
                let (x1, x2) = (offset.x(), offset.y());
                2.0 * x1 + 3.0 * x2 * x2 + x1 * x2 * x2 + 1.0
            }
            SourceProfile::Constant { value } => *value,
            SourceProfile::Gaussian { strength, eta_width } => {
                strength * (-offset.dot(offset) / (2.0 * eta_width)).exp() / ((2.0 * PI).sqrt() * eta_width)
            }
        }
    }

    /// Radius beyond which a gaussian is treated as zero.
    pub fn effective_radius(&self) -> Option<f64> {
        match self {
            SourceProfile::Gaussian { eta_width, .. } => Some(3.0 * (2.0 * eta_width).sqrt()),
            _ => None,
        }
    }
}

/// Per-pulse amplitude factor applied on top of the spatial profile.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseModulation {
    #[default]
    None,
    /// Multiply pulse `j` by `cos(t_j)`.
    CosPulseTime,
}

impl PulseModulation {
    pub fn factor(&self, t: f64) -> f64 {
        match self {
            PulseModulation::None => 1.0,
            PulseModulation::CosPulseTime => t.cos(),
        }
    }
}

/// Symmetric band `[κ − K, κ + K]` sampled at the midpoints `ω_j = (j − ½)Δω`, `Δω = K/N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "FrequencyGrid::default_half_band")]
    pub half_band: f64,
    #[serde(default = "FrequencyGrid::default_n")]
    pub n: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self { kappa: 0.0, half_band: Self::default_half_band(), n: Self::default_n() }
    }
}

impl FrequencyGrid {
    fn default_half_band() -> f64 {
        3.0 * PI
    }

    fn default_n() -> usize {
        48
    }

    pub fn new(kappa: f64, half_band: f64, n: usize) -> Result<Self, ForwardError> {
        let g = Self { kappa, half_band, n };
        g.validate()?;
        Ok(g)
    }

    /// Grid covering `(ω_min, ω_max)`.
    pub fn from_band(omega_min: f64, omega_max: f64, n: usize) -> Result<Self, ForwardError> {
        Self::new(0.5 * (omega_min + omega_max), 0.5 * (omega_max - omega_min), n)
    }

    pub fn validate(&self) -> Result<(), ForwardError> {
        if !(self.half_band > 0.0) || !self.half_band.is_finite() {
            return Err(ForwardError::InvalidGrid(format!("half_band must be positive, got {}", self.half_band)));
        }
        if self.n == 0 {
            return Err(ForwardError::InvalidGrid("n must be at least 1".into()));
        }
        if !self.kappa.is_finite() {
            return Err(ForwardError::InvalidGrid("kappa must be finite".into()));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.half_band / self.n as f64
    }

    /// `ω_j = (j − ½)Δω` for `j ≥ 1`.
    pub fn omega(&self, j: usize) -> f64 {
        (j as f64 - 0.5) * self.delta()
    }

    /// `τ_n = nΔω`.
    pub fn tau(&self, n: usize) -> f64 {
        n as f64 * self.delta()
    }

    pub fn sample_count(&self) -> usize {
        2 * self.n - 1
    }

    /// Period in η (and in `x̂·y/c`) of the discrete test vectors.
    pub fn alias_period(&self) -> f64 {
        2.0 * PI / self.delta()
    }
}

/// The ground truth: a pulsed source moving along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceScene {
    pub shape: Shape,
    #[serde(default)]
    pub profile: SourceProfile,
    #[serde(default)]
    pub modulation: PulseModulation,
    pub trajectory: Trajectory,
    pub pulses: Vec<f64>,
    #[serde(default = "SourceScene::default_speed")]
    pub wave_speed: f64,
}

impl SourceScene {
    fn default_speed() -> f64 {
        1.0
    }

    /// A source resting at the shape's current location, pulsed at `pulses`.
    pub fn stationary(shape: Shape, profile: SourceProfile, pulses: Vec<f64>, wave_speed: f64) -> Self {
        let trajectory = Trajectory::fixed(shape.center());
        Self { shape, profile, modulation: PulseModulation::None, trajectory, pulses, wave_speed }
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// Checks hard constraints and returns warnings for soft ones.
    pub fn validate(&self) -> Result<Vec<String>, ForwardError> {
        self.shape.validate()?;
        if self.trajectory.dim() != self.dim() {
            return Err(ForwardError::InvalidScene(format!(
                "trajectory is {}-dimensional but the shape is {}-dimensional",
                self.trajectory.dim(),
                self.dim()
            )));
        }
        if !(self.wave_speed > 0.0) {
            return Err(ForwardError::InvalidScene(format!("wave speed must be positive, got {}", self.wave_speed)));
        }
        if self.pulses.is_empty() {
            return Err(ForwardError::InvalidScene("at least one pulse is required".into()));
        }
        if self.pulses.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ForwardError::InvalidScene("pulse instants must be strictly increasing".into()));
        }
        for &t in &self.pulses {
            self.trajectory.position(t)?;
        }
        let mut warnings = Vec::new();
        let diam = self.shape.diameter();
        for (j, w) in self.pulses.windows(2).enumerate() {
            if w[1] - w[0] <= diam / self.wave_speed {
                warnings.push(format!(
                    "pulses {j} and {} are {} apart, not more than diam/c = {}; signals may overlap",
                    j + 1,
                    w[1] - w[0],
                    diam / self.wave_speed
                ));
            }
        }
        let horizon = self.pulses.last().copied().unwrap_or(1.0).max(1.0);
        let speed = self.trajectory.max_speed(horizon, 2000);
        if speed >= self.wave_speed {
            warnings.push(format!("trajectory speed {speed:.3} is not below the wave speed {}", self.wave_speed));
        }
        Ok(warnings)
    }

    pub fn pulse_time(&self, j: usize) -> Result<f64, ForwardError> {
        self.pulses.get(j).copied().ok_or(ForwardError::PulseIndex { index: j, count: self.pulses.len() })
    }

    pub fn source_position(&self, j: usize) -> Result<Point, ForwardError> {
        Ok(self.trajectory.position(self.pulse_time(j)?)?)
    }

    /// Support D_j of pulse `j`.
    pub fn support(&self, j: usize) -> Result<Shape, ForwardError> {
        Ok(self.shape.placed_at(self.source_position(j)?))
    }

    /// `S_j(y)` including the pulse modulation.
    pub fn source_value(&self, j: usize, y: &Point) -> Result<f64, ForwardError> {
        let t = self.pulse_time(j)?;
        let a = self.trajectory.position(t)?;
        Ok(self.modulation.factor(t) * self.profile.eval(&y.sub(&a)))
    }

    /// Quadrature nodes of D_j with weights already multiplied by `S_j`.
    fn weighted_nodes(&self, j: usize, pts_per_axis: usize) -> Result<Vec<(Point, f64)>, ForwardError> {
        let t = self.pulse_time(j)?;
        let a = self.trajectory.position(t)?;
        let amp = self.modulation.factor(t);
        let nodes = self.shape.placed_at(a).quadrature_points(pts_per_axis)?;
        Ok(nodes
            .into_iter()
            .map(|(y, w)| {
                let s = amp * self.profile.eval(&y.sub(&a));
                (y, w * s)
            })
            .collect())
    }
}

fn check_dir(scene: &SourceScene, dir: &Direction) -> Result<(), ForwardError> {
    if dir.dim() != scene.dim() {
        return Err(GeometryError::DimensionMismatch { expected: scene.dim(), got: dir.dim() }.into());
    }
    Ok(())
}

/// `u∞(x̂, ω) = (2π)^{-1/2} Σ_q w_q exp(−iω(x̂·y_q/c − t_j)) S_j(y_q)`.
pub fn farfield(
    scene: &SourceScene,
    j: usize,
    dir: &Direction,
    omega: f64,
    pts_per_axis: usize,
) -> Result<Complex64, ForwardError> {
    check_dir(scene, dir)?;
    let t = scene.pulse_time(j)?;
    let c = scene.wave_speed;
    let terms: Vec<Complex64> = scene
        .weighted_nodes(j, pts_per_axis)?
        .iter()
        .map(|(y, ws)| Complex64::from_polar(*ws, -omega * (dir.dot(y) / c - t)))
        .collect();
    Ok(pairwise_sum(&terms) / (2.0 * PI).sqrt())
}

/// Far-field samples of one pulse along one direction on a frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FarFieldBand {
    pub direction: Direction,
    pub grid: FrequencyGrid,
    /// `u∞(κ + ω_j)`, `j = 1..N`.
    pub plus: Vec<Complex64>,
    /// `u∞(κ − ω_j)`, `j = 1..N−1`.
    pub minus: Vec<Complex64>,
}

impl FarFieldBand {
    pub fn sample_count(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    /// `(ω, u∞(ω))` pairs in ascending frequency order.
    pub fn samples(&self) -> Vec<(f64, Complex64)> {
        let g = &self.grid;
        let mut out: Vec<(f64, Complex64)> =
            self.minus.iter().enumerate().rev().map(|(i, v)| (g.kappa - g.omega(i + 1), *v)).collect();
        out.extend(self.plus.iter().enumerate().map(|(i, v)| (g.kappa + g.omega(i + 1), *v)));
        out
    }
}

/// Samples `u∞` at `κ ± ω_j` for one pulse and direction.
///
/// Phases are advanced by a per-node recurrence instead of one `exp` per
/// sample; each frequency is still summed pairwise over nodes.
pub fn farfield_band(
    scene: &SourceScene,
    j: usize,
    dir: &Direction,
    grid: &FrequencyGrid,
    pts_per_axis: usize,
) -> Result<FarFieldBand, ForwardError> {
    grid.validate()?;
    check_dir(scene, dir)?;
    let t = scene.pulse_time(j)?;
    let c = scene.wave_speed;
    let nodes = scene.weighted_nodes(j, pts_per_axis)?;
    let phase: Vec<f64> = nodes.iter().map(|(y, _)| dir.dot(y) / c - t).collect();
    let dw = grid.delta();
    let norm = (2.0 * PI).sqrt();

    let base: Vec<Complex64> =
        nodes.iter().zip(&phase).map(|((_, ws), s)| Complex64::from_polar(*ws, -grid.kappa * s)).collect();
    let step: Vec<Complex64> = phase.iter().map(|s| Complex64::from_polar(1.0, -dw * s)).collect();
    let half: Vec<Complex64> = phase.iter().map(|s| Complex64::from_polar(1.0, -0.5 * dw * s)).collect();

    let mut cur_p: Vec<Complex64> = base.iter().zip(&half).map(|(b, h)| b * h).collect();
    let mut cur_m: Vec<Complex64> = base.iter().zip(&half).map(|(b, h)| b * h.conj()).collect();
    let mut plus = Vec::with_capacity(grid.n);
    let mut minus = Vec::with_capacity(grid.n.saturating_sub(1));
    for k in 1..=grid.n {
        plus.push(pairwise_sum(&cur_p) / norm);
        if k < grid.n {
            minus.push(pairwise_sum(&cur_m) / norm);
            for ((p, m), s) in cur_p.iter_mut().zip(cur_m.iter_mut()).zip(&step) {
                *p *= s;
                *m *= s.conj();
            }
        }
    }
    Ok(FarFieldBand { direction: *dir, grid: *grid, plus, minus })
}

pub const BAND_CSV_HEADER: &str = "direction_index,omega,re,im";

/// Writes bands in ascending-ω order per direction, directions in the given order.
pub fn write_bands_csv<W: Write>(mut w: W, bands: &[FarFieldBand]) -> std::io::Result<()> {
    writeln!(w, "{BAND_CSV_HEADER}")?;
    for (d, band) in bands.iter().enumerate() {
        for (omega, v) in band.samples() {
            writeln!(w, "{d},{},{},{}", crate::fmt_e(omega), crate::fmt_e(v.re), crate::fmt_e(v.im))?;
        }
    }
    Ok(())
}

/// Reads bands written by [`write_bands_csv`]; `directions` and `grid` supply the metadata.
pub fn read_bands_csv<R: BufRead>(
    r: R,
    grid: &FrequencyGrid,
    directions: &[Direction],
) -> Result<Vec<FarFieldBand>, ForwardError> {
    let mut rows: Vec<Vec<(f64, Complex64)>> = vec![Vec::new(); directions.len()];
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 {
            if line.trim() != BAND_CSV_HEADER {
                return Err(ForwardError::Csv { line: lineno, msg: format!("expected header `{BAND_CSV_HEADER}`") });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(ForwardError::Csv { line: lineno, msg: format!("expected 4 fields, got {}", f.len()) });
        }
        let bad = |m: &str| ForwardError::Csv { line: lineno, msg: m.to_string() };
        let d: usize = f[0].trim().parse().map_err(|_| bad("bad direction index"))?;
        let omega: f64 = f[1].trim().parse().map_err(|_| bad("bad omega"))?;
        let re: f64 = f[2].trim().parse().map_err(|_| bad("bad real part"))?;
        let im: f64 = f[3].trim().parse().map_err(|_| bad("bad imaginary part"))?;
        let slot = rows.get_mut(d).ok_or_else(|| bad("direction index out of range"))?;
        slot.push((omega, Complex64::new(re, im)));
    }
    let tol = 1e-9 * (grid.kappa.abs() + grid.half_band);
    rows.into_iter()
        .zip(directions)
        .map(|(samples, dir)| {
            if samples.len() != grid.sample_count() {
                return Err(ForwardError::Csv {
                    line: 0,
                    msg: format!("expected {} samples per direction, got {}", grid.sample_count(), samples.len()),
                });
            }
            let (minus_rev, plus) = samples.split_at(grid.n - 1);
            for (k, (omega, _)) in plus.iter().enumerate() {
                if (omega - (grid.kappa + grid.omega(k + 1))).abs() > tol {
                    return Err(ForwardError::Csv { line: 0, msg: format!("unexpected frequency {omega}") });
                }
            }
            for (k, (omega, _)) in minus_rev.iter().rev().enumerate() {
                if (omega - (grid.kappa - grid.omega(k + 1))).abs() > tol {
                    return Err(ForwardError::Csv { line: 0, msg: format!("unexpected frequency {omega}") });
                }
            }
            Ok(FarFieldBand {
                direction: *dir,
                grid: *grid,
                plus: plus.iter().map(|(_, v)| *v).collect(),
                minus: minus_rev.iter().rev().map(|(_, v)| *v).collect(),
            })
        })
        .collect()
}

/// Orthonormal frame whose third axis is `e3`.
fn frame(e3: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if e3[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let cross =
        |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let e1 = cross(helper, e3);
    let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    let e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
    (e1, cross(e3, e1))
}

/// Receiver signal `U(x₀, t) = Σ_j (4π(t − t_j))⁻¹ ∮_{|y − x₀| = t − t_j} S_j(y) ds(y)`
/// for wave speed 1.
///
/// The sphere integral uses a `sphere_pts`-node Fibonacci lattice whose pole
/// points at the source, so only the cap that can meet the source is visited.
pub fn time_signal(
    scene: &SourceScene,
    receiver: &Point,
    t_grid: &[f64],
    sphere_pts: usize,
) -> Result<Vec<f64>, ForwardError> {
    if scene.dim() != 3 || receiver.dim() != 3 {
        return Err(ForwardError::Unsupported("the time-domain signal needs a 3D scene and receiver".into()));
    }
    if scene.wave_speed != 1.0 {
        return Err(ForwardError::Unsupported(format!(
            "the time-domain signal is defined for wave speed 1, got {}",
            scene.wave_speed
        )));
    }
    if sphere_pts == 0 {
        return Err(ForwardError::InvalidScene("sphere_pts must be positive".into()));
    }
    // A profile with an effective radius is treated as zero beyond it;
    // otherwise the source is its profile restricted to the shape.
    let (reach, masked) = match scene.profile.effective_radius() {
        Some(r) => (r, false),
        None => {
            let (lo, hi) = scene.shape.bounding_box();
            (0.5 * hi.distance(&lo), true)
        }
    };
    let golden = PI * (3.0 - 5f64.sqrt());
    let n = sphere_pts as f64;

    let mut pulses = Vec::with_capacity(scene.pulses.len());
    for j in 0..scene.pulses.len() {
        let t = scene.pulse_time(j)?;
        let a = scene.trajectory.position(t)?;
        let to_src = a.sub(receiver);
        let d = to_src.norm();
        let support = scene.shape.placed_at(a);
        pulses.push((j, t, a, d, to_src, support));
    }

    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut total = 0.0;
        for (j, tj, a, d, to_src, support) in &pulses {
            let r = t - tj;
            if r <= 0.0 || (r - d).abs() > reach {
                continue;
            }
            // nodes k have z_k = 1 − (2k+1)/n; keep those with cos θ ≥ cmin
            let cmin = if *d > 0.0 { ((r * r + d * d - reach * reach) / (2.0 * r * d)).clamp(-1.0, 1.0) } else { -1.0 };
            let kmax = (((1.0 - cmin) * n / 2.0).ceil() as usize + 1).min(sphere_pts);
            let e3 = if *d > 0.0 { [to_src.x() / d, to_src.y() / d, to_src.z() / d] } else { [0.0, 0.0, 1.0] };
            let (e1, e2) = frame(e3);
            let mut acc = 0.0;
            for k in 0..kmax {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / n;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let (s, c) = (golden * k as f64).sin_cos();
                let (u1, u2) = (rho * c, rho * s);
                let y = Point::new3(
                    receiver.x() + r * (u1 * e1[0] + u2 * e2[0] + z * e3[0]),
                    receiver.y() + r * (u1 * e1[1] + u2 * e2[1] + z * e3[1]),
                    receiver.z() + r * (u1 * e1[2] + u2 * e2[2] + z * e3[2]),
                );
                let off = y.sub(a);
                if off.norm() > reach || (masked && !support.contains(&y)?) {
                    continue;
                }
                acc += scene.source_value(*j, &y)?;
            }
            // (4πr²/n) / (4πr) = r/n
            total += acc * r / n;
        }
        out.push(total);
    }
    Ok(out)
}

/// Local maxima of `|u|` that exceed `rel · max|u|`, refined by a parabola
/// through the three samples around each maximum.
pub fn find_peaks(t: &[f64], u: &[f64], rel: f64) -> Vec<f64> {
    let a: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    let max = a.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 || a.len() < 3 {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    for i in 1..a.len() - 1 {
        if a[i] > a[i - 1] && a[i] >= a[i + 1] && a[i] >= rel * max {
            let denom = a[i - 1] - 2.0 * a[i] + a[i + 1];
            let shift = if denom != 0.0 { 0.5 * (a[i - 1] - a[i + 1]) / denom } else { 0.0 };
            let h = 0.5 * (t[i + 1] - t[i - 1]);
            peaks.push(t[i] + shift.clamp(-0.5, 0.5) * h);
        }
    }
    peaks
}
