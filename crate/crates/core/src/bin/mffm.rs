use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use mffm::forward::{FrequencyGrid, SourceProfile, SourceScene};
use mffm::geometry::{Direction, Point, SamplingGrid, Shape};
use mffm::imaging::{estimate_pulse, eta_range, h_profile, picard_indicator, test_vector, Baseline, PicardKernel};
use mffm::matrix::CMatrix;
use mffm::operator::assemble_toeplitz;
use mffm::pipeline::io::{read_manifest, verify_outputs};
use mffm::pipeline::{self, PipelineError, Scenario};
use mffm::spectral::{hermitian_eigen, sharpen};

#[derive(Parser, Debug)]
#[command(name = "mffm", version, about = "Multi-frequency imaging of pulsed moving sources")]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the noise seed of the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Re-run the scenario and compare every output hash with the manifest in --out.
    #[arg(long, global = true)]
    verify: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write the far-field bands of every pulse.
    Synthesize,
    /// Recover pulse instants from h profiles.
    Pulse,
    /// Image strips for the configured η values.
    Strip,
    /// Image supports from all observation directions.
    Hull,
    /// Reconstruct a trajectory pulse by pulse.
    Trajectory,
    /// Compute the time-domain receiver signal.
    Timesignal,
    /// Run built-in numerical checks.
    Selftest,
}

fn run(cmd: Command, scn: &Scenario, out: &Path) -> Result<pipeline::io::RunManifest, PipelineError> {
    match cmd {
        Command::Synthesize => pipeline::run_synthesize(scn, out),
        Command::Pulse => pipeline::run_pulse(scn, out),
        Command::Strip => pipeline::run_strip(scn, out),
        Command::Hull => pipeline::run_hull(scn, out),
        Command::Trajectory => pipeline::run_trajectory(scn, out),
        Command::Timesignal => pipeline::run_timesignal(scn, out),
        Command::Selftest => unreachable!("selftest takes no scenario"),
    }
}

fn verify(cmd: Command, scn: &Scenario, out: &Path) -> Result<(), PipelineError> {
    let manifest = read_manifest(out)?;
    let mut bad = verify_outputs(out, &manifest);
    let scratch = out.join(".verify");
    let rerun = run(cmd, scn, &scratch);
    let rerun = rerun.map(|m| {
        bad.extend(verify_outputs(&scratch, &manifest));
        if m.outputs.len() != manifest.outputs.len() {
            bad.push(format!("output count {} != {}", m.outputs.len(), manifest.outputs.len()));
        }
    });
    let _ = std::fs::remove_dir_all(&scratch);
    rerun?;
    if bad.is_empty() {
        println!("verified {} outputs", manifest.outputs.len());
        Ok(())
    } else {
        bad.sort();
        bad.dedup();
        Err(PipelineError::Numerical(format!("outputs differ from the manifest: {}", bad.join(", "))))
    }
}

fn check(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn selftest() -> Result<bool, PipelineError> {
    let mut all = true;

    let n = 24;
    let a = CMatrix::from_fn(n, n, |r, c| {
        let x = ((r * 7 + c * 13) % 17) as f64 / 17.0 - 0.5;
        let y = ((r * 5 + c * 3) % 11) as f64 / 11.0 - 0.5;
        Complex64::new(x, y)
    })
    .hermitian_part();
    let eig = hermitian_eigen(&a)?;
    let res = eig.max_residual(&a) / a.frobenius_norm();
    let uni = eig.unitarity_defect();
    all &= check("eigensolver", res <= 1e-10 && uni <= 1e-10, format!("residual {res:.2e}, unitarity {uni:.2e}"));

    let grid = FrequencyGrid::default();
    let dir = Direction::from_angle_deg(0.0);
    let id = sharpen(&CMatrix::identity(grid.n), dir, grid)?;
    let phi = test_vector(&Point::new2(0.4, -0.2), 1.3, &dir, 1.0, &grid);
    let v = picard_indicator(&id, &phi, 0.0)?;
    all &= check("picard identity", (v - grid.n as f64).abs() <= 1e-12, format!("{v} vs {}", grid.n));

    let scene =
        SourceScene::stationary(Shape::disk(Point::new2(0.0, 0.0), 1.0), SourceProfile::Polynomial2d, vec![4.0], 1.0);
    let kernels = [dir, dir.neg()]
        .iter()
        .map(|d| -> Result<PicardKernel, PipelineError> {
            let band = mffm::forward::farfield_band(&scene, 0, d, &grid, 100)?;
            let sharp = sharpen(&assemble_toeplitz(&band)?.entries, *d, grid)?;
            Ok(PicardKernel::new(&sharp, 1e-14)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sg = SamplingGrid::cube(2, -6.0, 6.0, 61)?;
    let etas = eta_range(0.0, 8.0, 0.05);
    let h = h_profile(&kernels[0], &kernels[1], &sg, sg.circumradius(), &etas, 1.0)?;
    let est = estimate_pulse(&h, &etas, 0.01, Baseline::None, 1.0)?;
    all &= check("pulse recovery", (est.t0 - 4.0).abs() <= 0.1, format!("t0 = {:.3} (true 4)", est.t0));
    Ok(all)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }

    let result = if let Command::Selftest = cli.command {
        match selftest() {
            Ok(true) => Ok(()),
            Ok(false) => Err(PipelineError::Numerical("self test failed".into())),
            Err(e) => Err(e),
        }
    } else {
        (|| {
            let path = cli.config.as_ref().ok_or_else(|| PipelineError::Config("--config is required".into()))?;
            let mut scn = Scenario::load(path)?;
            if let Some(seed) = cli.seed {
                scn.noise.seed = seed;
            }
            if cli.verify {
                return verify(cli.command, &scn, &cli.out);
            }
            let m = run(cli.command, &scn, &cli.out)?;
            for p in &m.pulses {
                if let Some(e) = &p.estimate {
                    println!("pulse {}: t0 = {:.4} (interval [{:.4}, {:.4}])", p.pulse, e.t0, e.eta1, e.eta2);
                }
                if let Some(err) = &p.error {
                    println!("pulse {}: failed: {err}", p.pulse);
                }
            }
            if !m.peaks.is_empty() {
                let peaks: Vec<String> = m.peaks.iter().map(|t| format!("{t:.3}")).collect();
                println!("signal peaks: {}", peaks.join(", "));
            }
            println!("wrote {} files to {}", m.outputs.len(), cli.out.display());
            Ok(())
        })()
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
