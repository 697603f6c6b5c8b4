use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twolevel::adaptive::{ld_schedule, refine_loop, write_json_lines, RefineMethod, RefineOptions};
use twolevel::error::{Error, Result};
use twolevel::harness::{crb_sweep, estimate, run_comparison, ExperimentConfig, OutputFormat, Strategy};
use twolevel::likelihood::Strategy3Options;
use twolevel::model::{builtin_models, ModelKind, SystemParams};
use twolevel::noise::{simulate_trace, stream_seed, uniform_times, MeasurementTrace, NoiseSpec};

/// Simulate two-level system measurements and estimate (omega, gamma)
#[derive(Parser, Debug)]
#[command(name = "twolevel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct SystemArgs {
    /// Built-in model number (1-10); overridden by --omega/--gamma
    #[arg(long, default_value_t = 1)]
    model: usize,
    #[arg(long, requires = "gamma")]
    omega: Option<f64>,
    #[arg(long, requires = "omega")]
    gamma: Option<f64>,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta_i: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta_m: f64,
}

impl SystemArgs {
    fn params(&self) -> Result<SystemParams> {
        let base = match (self.omega, self.gamma) {
            (Some(w), Some(g)) => SystemParams::new(w, g),
            _ => builtin_models()
                .model(self.model)
                .ok_or_else(|| Error::InvalidConfig(format!("no built-in model {}", self.model)))?,
        };
        let p = base.with_angles(self.theta_i, self.theta_m);
        p.validate()?;
        Ok(p)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit a simulated trace as CSV (t,d)
    Simulate {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, default_value = "fid")]
        kind: ModelKind,
        /// none, gaussian:<sigma> or projection:<ne>
        #[arg(long, default_value = "gaussian:0.05")]
        noise: NoiseSpec,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 30.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate (omega, gamma) from a trace CSV and emit the fit as JSON
    Estimate {
        #[arg(long)]
        strategy: Strategy,
        #[arg(long, default_value = "fid")]
        kind: ModelKind,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte-Carlo comparison sweep from a JSON config
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "json")]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iterative refinement; one JSON line per iteration
    Adaptive {
        /// ld or variance
        #[arg(long)]
        method: RefineMethod,
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, default_value = "gaussian:0.05")]
        noise: NoiseSpec,
        #[arg(long, default_value_t = 20)]
        n0: usize,
        #[arg(long, default_value_t = 8)]
        ni: usize,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, default_value_t = 30.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cramér–Rao gap of Strategy 3 under projection noise
    Fisher {
        /// Sweep the ensemble sizes given by --ne
        #[arg(long)]
        ne_sweep: bool,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        ne: Vec<u64>,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        model: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { system, kind, noise, samples, t_max, seed, out } => {
            let trace = simulate_trace(&system.params()?, kind, &uniform_times(samples, t_max), noise, seed)?;
            trace.write_csv(output(&out)?)
        }
        Command::Estimate { strategy, kind, input, out } => {
            let trace = MeasurementTrace::read_csv(File::open(&input)?)?;
            let fit = estimate(&trace, kind, strategy, &Strategy3Options::default())?;
            let mut w = output(&out)?;
            writeln!(w, "{}", fit.to_json()?)?;
            Ok(w.flush()?)
        }
        Command::Compare { config, format, out } => {
            let stats = run_comparison(&ExperimentConfig::from_path(&config)?)?;
            let mut w = output(&out)?;
            match format {
                OutputFormat::Csv => stats.write_csv(&mut w)?,
                OutputFormat::Json => writeln!(w, "{}", stats.to_json()?)?,
            }
            Ok(w.flush()?)
        }
        Command::Adaptive { method, system, noise, n0, ni, iterations, t_max, seed, out } => {
            let truth = system.params()?;
            noise.validate()?;
            let initial = ld_schedule(n0, 0, 0, t_max)?.remove(0);
            let mut batch = 0u64;
            let acquire = |times: &[f64]| {
                batch += 1;
                simulate_trace(&truth, ModelKind::DephasingFid, times, noise, stream_seed(seed, &[batch]))
            };
            let opts = RefineOptions { t_max, ni, ..Default::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[u64::MAX]));
            let steps = refine_loop(&initial, acquire, ModelKind::DephasingFid, method, iterations, &opts, &mut rng)?;
            let rows: Vec<serde_json::Value> = steps
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "iteration": s.iteration,
                        "n_samples": s.n_samples,
                        "e_omega": (s.fit.omega - truth.omega).abs() / truth.omega,
                        "e_gamma": (s.fit.gamma - truth.gamma).abs() / truth.gamma,
                        "fit": s.fit,
                    })
                })
                .collect();
            let mut w = output(&out)?;
            write_json_lines(&mut w, &rows)?;
            Ok(w.flush()?)
        }
        Command::Fisher { ne_sweep, ne, runs, model, seed, out } => {
            let truth = builtin_models()
                .model(model)
                .ok_or_else(|| Error::InvalidConfig(format!("no built-in model {model}")))?;
            let list = if ne_sweep { ne } else { ne.into_iter().take(1).collect() };
            let rows = crb_sweep(&truth, &list, runs, seed)?;
            let mut w = output(&out)?;
            writeln!(w, "{}", serde_json::to_string_pretty(&rows)?)?;
            Ok(w.flush()?)
        }
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim(), 2),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}
