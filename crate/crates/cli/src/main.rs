use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cagrad::combiners::Method;
use cagrad::harness::{
    self, run_experiment_with, sweep_c, toy_config, write_json, write_trajectories, ExperimentConfig, RunReport,
    StepperSpec, Trajectory,
};
use cagrad::verify::{run_suite, VerifyOptions};
use cagrad::{Error, Execution};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

/// Multi-task gradient combination experiments.
#[derive(Debug, Parser)]
#[command(name = "cagrad", version, about)]
struct Cli {
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the two-task toy study from its five standard starting points.
    Toy {
        #[arg(long, value_enum)]
        method: ToyMethod,
        /// Ball radius factor; required for cagrad.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        /// Directory for run_<i>.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a cagrad config once per value of c.
    Sweep {
        config: PathBuf,
        /// Comma-separated values of c.
        #[arg(long, value_delimiter = ',', required = true)]
        c_list: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the sweep summary JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomized property suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, hide = true, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ToyMethod {
    Gd,
    Mgda,
    Pcgrad,
    Cagrad,
}

impl From<ToyMethod> for Method {
    fn from(m: ToyMethod) -> Self {
        match m {
            ToyMethod::Gd => Method::Mean,
            ToyMethod::Mgda => Method::Mgda,
            ToyMethod::Pcgrad => Method::Pcgrad,
            ToyMethod::Cagrad => Method::Cagrad,
        }
    }
}

/// Exit status: 0 success, 1 runtime or verification failure, 2 usage or
/// config error.
enum Failure {
    Runtime(String),
    Usage(String),
}

impl Failure {
    fn config(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }

    fn runtime(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            Cli::command()
                .error(clap::error::ErrorKind::InvalidValue, "--threads must be at least 1")
                .exit();
        }
        #[cfg(feature = "parallel")]
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Toy {
            method,
            c,
            seed,
            steps,
            lr,
            out,
        } => cmd_toy(method, c, seed, steps, lr, out),
        Command::Run { config, seed, out } => cmd_run(&config, seed, out),
        Command::Sweep {
            config,
            c_list,
            seed,
            out,
        } => cmd_sweep(&config, &c_list, seed, out),
        Command::Verify {
            seed,
            trials,
            tolerance_scale,
        } => cmd_verify(seed, trials, tolerance_scale),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn cmd_toy(
    method: ToyMethod,
    c: Option<f64>,
    seed: u64,
    steps: Option<u64>,
    lr: Option<f64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let c = match (method, c) {
        (ToyMethod::Cagrad, None) => Cli::command()
            .error(
                clap::error::ErrorKind::MissingRequiredArgument,
                "--c is required when --method is cagrad",
            )
            .exit(),
        (ToyMethod::Cagrad, Some(c)) => c,
        (_, Some(_)) => {
            return Err(Failure::Usage("--c only applies to --method cagrad".into()));
        }
        (_, None) => 0.0,
    };
    let mut cfg = toy_config(method.into(), c);
    cfg.seed = seed;
    if let Some(s) = steps {
        cfg.steps = s;
    }
    if let Some(lr) = lr {
        cfg.stepper = StepperSpec::Adam { lr };
    }
    cfg.output_path = out;
    execute(&cfg)
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_file(path).map_err(Failure::config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn cmd_run(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = load(path, seed)?;
    if out.is_some() {
        cfg.output_path = out;
    }
    execute(&cfg)
}

fn execute(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let (problem, _) = cfg.resolve().map_err(Failure::config)?;
    let trajectories = run_experiment_with(cfg, Execution::Parallel).map_err(Failure::runtime)?;
    let report = RunReport::new(cfg, &trajectories);
    if let Some(dir) = &cfg.output_path {
        write_trajectories(dir, &trajectories, problem.dim(), problem.tasks()).map_err(Failure::runtime)?;
        write_json(&dir.join("summary.json"), &report).map_err(Failure::runtime)?;
    }
    print_runs(&trajectories);
    println!(
        "{}: {} converged, {} stalled, {} diverged of {}",
        cfg.method.method.name(),
        report.converged,
        report.stalled,
        report.diverged,
        report.runs.len()
    );
    if report.diverged > 0 {
        return Err(Failure::Runtime(format!("{} run(s) diverged", report.diverged)));
    }
    Ok(())
}

fn print_runs(trajectories: &[Trajectory]) {
    for t in trajectories {
        let s = &t.summary;
        let status = if s.diverged {
            "diverged"
        } else if s.converged {
            "converged"
        } else if s.stalled {
            "stalled"
        } else {
            "running"
        };
        let losses: Vec<String> = s.final_losses.iter().map(|v| harness::format_float(*v)).collect();
        // long parameter vectors stay in the CSV and summary
        let init = if s.init.len() <= 4 {
            format!(" init={:?}", s.init)
        } else {
            String::new()
        };
        println!(
            "run {}{init} status={status} pareto_stat={} losses=[{}]",
            s.init_index,
            harness::format_float(s.final_pareto_stationarity),
            losses.join(", ")
        );
        eprintln!("run {} wall time {:.3}s", s.init_index, s.wall_time.as_secs_f64());
    }
}

fn cmd_sweep(path: &Path, c_list: &[f64], seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load(path, seed)?;
    if c_list.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
        return Err(Failure::Usage(
            "every value in --c-list must be finite and nonnegative".into(),
        ));
    }
    // config problems surface before any run starts
    for &c in c_list {
        let mut one = cfg.clone();
        one.method.c = c;
        one.resolve().map_err(Failure::config)?;
    }
    let report = sweep_c(&cfg, c_list, Execution::Parallel).map_err(|e| match e {
        Error::Config(_) => Failure::config(e),
        other => Failure::runtime(other),
    })?;
    let path = out.or_else(|| cfg.output_path.as_ref().map(|d| d.join("sweep.json")));
    if let Some(p) = &path {
        write_json(p, &report).map_err(Failure::runtime)?;
    }
    for row in &report.rows {
        let s = &row.summary;
        println!(
            "c={} run {} converged={} stalled={} diverged={} pareto_stat={}",
            row.c,
            s.init_index,
            s.converged,
            s.stalled,
            s.diverged,
            harness::format_float(s.final_pareto_stationarity)
        );
    }
    println!("{} rows", report.rows.len());
    let diverged = report.rows.iter().filter(|r| r.summary.diverged).count();
    if diverged > 0 {
        return Err(Failure::Runtime(format!("{diverged} run(s) diverged")));
    }
    Ok(())
}

fn cmd_verify(seed: u64, trials: usize, tolerance_scale: f64) -> Result<(), Failure> {
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let opts = VerifyOptions {
        seed,
        trials,
        tolerance_scale,
        execution: Execution::Parallel,
    };
    let outcomes = run_suite(&opts).map_err(Failure::runtime)?;
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} propert(y/ies) failed")));
    }
    println!("all {} properties passed", outcomes.len());
    Ok(())
}
