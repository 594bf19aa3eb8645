//! The `kdv5` scenario runner: `kdv5 <command> --config <path> [--out <dir>] [--threads N]`.
//!
//! Exit codes: 0 on success, 2 for invalid invocations or configurations,
//! 3 for numerical failures (and failed `verify` checks).

pub mod config;
pub mod output;
mod verify;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;

pub use config::{parse_config, Command, FieldSpec, ScenarioConfig};
use output::{fields_csv, norms_csv, read_signal, sha256_hex, signal_csv, trajectory_csv, Artifacts};

use crate::error::{Error, Result};
use crate::hum::{
    observability_report, physical_control, solve_linear_control_with, solve_nonlinear_control,
    ControlSignal, HumOptions, NonlinearControlOptions,
};
use crate::linear::{assemble_generator, energy_ledger, evolve_linear, step_count, LedgerReport};
use crate::nonlinear::{
    evolve_nonlinear, fluctuation, measure_decay, nonlinearity, NonlinearModel, SolverOptions,
};
use crate::spectral::{sobolev_norm, PeriodicGrid, SpectralField, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kdv5", version, about = "Simulation, stabilization and exact control of periodic fifth-order KdV")]
struct Cli {
    command: Command,
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel kernels.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

/// A loaded, validated scenario with every model and field built.
pub struct Scenario {
    pub command: Command,
    pub config: ScenarioConfig,
    pub config_sha256: String,
    pub base_dir: PathBuf,
    pub grid: PeriodicGrid,
    pub model: NonlinearModel,
    pub initial: SpectralField,
    pub target: Option<SpectralField>,
    pub signal: Option<ControlSignal>,
}

impl Scenario {
    /// Everything that can be checked before running; failures map to exit code 2.
    pub fn load(command: Command, text: &str, source: &Path) -> std::result::Result<Self, String> {
        let name = source.display().to_string();
        let config = parse_config(text, &name)?;
        config
            .validate_for(command)
            .map_err(|e| config::describe(text, &name, &e))?;
        let grid = at(&name, "grid", config.grid())?;
        let model = at(&name, "model", config.nonlinear_model(&grid, command))?;
        let r = &config.run;
        let initial = match &config.initial_data {
            Some(f) => at(&name, "initial_data", f.build(&grid, r.seed, r.s))?,
            None => SpectralField::zeros(&grid),
        };
        let target = match &config.target_data {
            Some(f) => Some(at(&name, "target_data", f.build(&grid, r.seed.wrapping_add(1), r.s))?),
            None => None,
        };
        let base_dir = source.parent().map(Path::to_path_buf).unwrap_or_default();
        let signal = match &r.signal {
            Some(p) => {
                let path = base_dir.join(p);
                let sig = at(&name, "run.signal", read_signal(&path, &grid))?;
                let steps = step_count(r.t_final, r.dt).map_err(|e| e.to_string())?;
                if sig.steps() != steps || sig.dt() != r.dt {
                    return Err(format!(
                        "{name}: run.signal: signal has {} steps of {}, run needs {steps} of {}",
                        sig.steps(),
                        sig.dt(),
                        r.dt
                    ));
                }
                Some(sig)
            }
            None => None,
        };
        Ok(Scenario {
            command,
            config_sha256: sha256_hex(text.as_bytes()),
            config,
            base_dir,
            grid,
            model,
            initial,
            target,
            signal,
        })
    }
}

fn at<T>(source: &str, what: &str, r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e: Error| format!("{source}: {what}: {e}"))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    threads: usize,
    config_sha256: &'a str,
    config: &'a ScenarioConfig,
    status: &'a str,
    files: &'a std::collections::BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Failure {
    kind: String,
    message: String,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return EXIT_CONFIG;
    }
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return EXIT_CONFIG;
        }
    };
    let scenario = match Scenario::load(cli.command, &text, &cli.config) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let out = cli
        .out
        .clone()
        .or_else(|| scenario.config.output.directory.as_ref().map(|d| scenario.base_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} threads: {e}", cli.threads);
            return EXIT_CONFIG;
        }
    };
    let mut art = match Artifacts::create(&out) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_NUMERICAL;
        }
    };
    let outcome = pool.install(|| execute(&scenario, &mut art));
    let (code, status) = match &outcome {
        Ok(true) => (EXIT_OK, "ok"),
        Ok(false) => (EXIT_NUMERICAL, "verification_failed"),
        Err(_) => (EXIT_NUMERICAL, "error"),
    };
    if let Err(e) = &outcome {
        eprintln!("error: {e}");
        let f = Failure {
            kind: e.kind().to_string(),
            message: e.to_string(),
        };
        if let Err(io) = art.write_json("error.json", &f) {
            eprintln!("error: {io}");
        }
    }
    let files = art.files().clone();
    let manifest = Manifest {
        tool: "kdv5",
        version: env!("CARGO_PKG_VERSION"),
        command: scenario.command.name(),
        threads: cli.threads,
        config_sha256: &scenario.config_sha256,
        config: &scenario.config,
        status,
        files: &files,
    };
    if let Err(e) = art.write_json("manifest.json", &manifest) {
        eprintln!("error: {e}");
        return EXIT_NUMERICAL;
    }
    code
}

/// Runs the command and writes its artifacts. `Ok(false)` means a `verify`
/// check failed.
pub fn execute(sc: &Scenario, art: &mut Artifacts) -> Result<bool> {
    match sc.command {
        Command::Simulate | Command::Stabilize => evolve_command(sc, art).map(|_| true),
        Command::Control => control_command(sc, art).map(|_| true),
        Command::Observability => {
            let r = &sc.config.run;
            let report = observability_report(&sc.model.linear, r.t_final, r.dt)?;
            art.write_json("observability.json", &report)?;
            Ok(true)
        }
        Command::Verify => verify::run(sc, art),
    }
}

fn write_trajectory(sc: &Scenario, art: &mut Artifacts, traj: &Trajectory) -> Result<()> {
    let o = &sc.config.output;
    art.write("trajectory.csv", &trajectory_csv(traj, o.trajectory, o.sample_every))?;
    art.write("norms.csv", &norms_csv(traj, &sc.config.norm_indices(), o.sample_every))
}

#[derive(Serialize)]
struct RunSummary {
    t_final: f64,
    steps: usize,
    mean_initial: f64,
    mean_drift: f64,
    l2_initial: f64,
    l2_final: f64,
    norm_s_initial: f64,
    norm_s_final: f64,
}

#[derive(Serialize)]
struct DecayReport {
    rate: f64,
    c_hat: f64,
    final_ratio: f64,
    conclusive: bool,
    window: (f64, f64),
    /// `min Re λ(L)` of the generator about the mean.
    spectral_abscissa: f64,
}

fn evolve_command(sc: &Scenario, art: &mut Artifacts) -> Result<()> {
    let r = &sc.config.run;
    let forcing = match &sc.signal {
        Some(sig) => Some(sig.forcing(&sc.model.linear)?),
        None => None,
    };
    let traj = if r.linear {
        evolve_linear(&sc.model.linear, &sc.initial, forcing.as_deref(), r.t_final, r.dt)?
    } else {
        let opts = SolverOptions {
            s: r.s,
            rho: r.rho,
            blowup_factor: r.blowup_factor,
        };
        evolve_nonlinear(&sc.model, &sc.initial, forcing.as_deref(), r.t_final, r.dt, &opts)?
    };
    write_trajectory(sc, art, &traj)?;
    let m0 = traj.first().mean();
    let summary = RunSummary {
        t_final: traj.t_final(),
        steps: traj.len() - 1,
        mean_initial: m0,
        mean_drift: traj.states().iter().map(|u| (u.mean() - m0).abs()).fold(0.0, f64::max),
        l2_initial: traj.first().l2_norm(),
        l2_final: traj.last().l2_norm(),
        norm_s_initial: sobolev_norm(traj.first(), r.s),
        norm_s_final: sobolev_norm(traj.last(), r.s),
    };
    art.write_json("summary.json", &summary)?;
    if sc.command == Command::Stabilize {
        let ledger = stabilize_ledger(sc, &traj, forcing.as_deref())?;
        art.write_json("ledger.json", &ledger)?;
        let fit = measure_decay(&traj, r.s)?;
        let shifted = sc.model.shifted(m0);
        let decay = DecayReport {
            rate: fit.rate,
            c_hat: fit.c_hat,
            final_ratio: fit.final_ratio,
            conclusive: fit.conclusive,
            window: fit.window,
            spectral_abscissa: assemble_generator(&shifted.linear)?.spectral_abscissa(),
        };
        art.write_json("decay.json", &decay)?;
    }
    Ok(())
}

/// Energy ledger of the fluctuation. In nonlinear runs the nonlinearity is
/// booked as forcing, so `forcing_work` is the work of `F − N(ũ)`.
fn stabilize_ledger(
    sc: &Scenario,
    traj: &Trajectory,
    forcing: Option<&[SpectralField]>,
) -> Result<LedgerReport> {
    if sc.config.run.linear {
        return energy_ledger(&sc.model.linear, traj, forcing);
    }
    let m = traj.first().mean();
    let shifted = sc.model.shifted(m);
    let fl = fluctuation(traj)?;
    let work: Vec<SpectralField> = fl
        .states()
        .iter()
        .enumerate()
        .map(|(n, u)| {
            let nl = nonlinearity(u, &shifted)?;
            Ok(match forcing {
                Some(f) => &f[n] - &nl,
                None => -&nl,
            })
        })
        .collect::<Result<_>>()?;
    energy_ledger(&shifted.linear, &fl, Some(&work))
}

#[derive(Serialize)]
struct ControlReport {
    mode: &'static str,
    method: &'static str,
    /// Relative for linear control, absolute for nonlinear control, both in `H^s`.
    endpoint_error: f64,
    s: f64,
    signal_energy: f64,
    signal_energy_s: f64,
    cg_iterations: usize,
    iterations: usize,
    distances: Vec<f64>,
    ratios: Vec<f64>,
}

fn control_command(sc: &Scenario, art: &mut Artifacts) -> Result<()> {
    let r = &sc.config.run;
    let target = sc.target.as_ref().expect("checked at load time");
    let (report, signal, traj) = if r.linear {
        let weight = r.weighted.then_some(r.s);
        let c = solve_linear_control_with(
            &sc.model.linear,
            &sc.initial,
            target,
            r.t_final,
            r.dt,
            r.s,
            weight,
            &HumOptions::default(),
        )?;
        let report = ControlReport {
            mode: if r.weighted { "weighted" } else { "linear" },
            method: c.method,
            endpoint_error: c.endpoint_error,
            s: r.s,
            signal_energy: c.signal.energy(),
            signal_energy_s: c.signal.dr_energy(r.s),
            cg_iterations: c.cg_iterations,
            iterations: 0,
            distances: vec![],
            ratios: vec![],
        };
        (report, c.signal, c.trajectory)
    } else {
        let opts = NonlinearControlOptions {
            s: r.s,
            tol: r.tol,
            max_iterations: r.max_iterations,
            relaxation: r.relaxation,
            rho: r.rho,
            hum: HumOptions::default(),
        };
        let c = solve_nonlinear_control(&sc.model, &sc.initial, target, r.t_final, r.dt, &opts)?;
        let report = ControlReport {
            mode: "nonlinear",
            method: c.method,
            endpoint_error: c.endpoint_error,
            s: r.s,
            signal_energy: c.signal.energy(),
            signal_energy_s: c.signal.dr_energy(r.s),
            cg_iterations: 0,
            iterations: c.iterations,
            distances: c.distances,
            ratios: c.ratios,
        };
        (report, c.signal, c.trajectory)
    };
    art.write("signal.csv", &signal_csv(&signal))?;
    write_trajectory(sc, art, &traj)?;
    let h = physical_control(&sc.model.linear, &traj, &signal)?;
    art.write("physical_control.csv", &fields_csv(&sc.grid, r.dt, &h))?;
    art.write_json("control.json", &report)
}
