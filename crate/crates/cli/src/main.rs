use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use erkn_cli::config::{Kind, RawConfig};
use erkn_cli::{load_config, run_experiment, CliError, ExperimentConfig};
use erkn_core::{MethodTableau, METHOD_NAMES};

#[derive(Parser)]
#[command(name = "erkn", version, about = "Symplectic ERKN integrators: verification and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Symplecticity residuals, order-condition slopes and map checks.
    Verify(Common),
    /// Global error against step size (fine schedule).
    Converge(Common),
    /// Global error against CPU time (coarse schedule).
    Efficiency(Common),
    /// Energy error over growing integration intervals.
    Energy(Common),
    /// Stability and periodicity regions.
    Stability(Common),
    /// Print the registered methods.
    ListMethods,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML config; command-line flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Method name, repeatable or comma separated.
    #[arg(long = "method", value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Step size(s), strictly decreasing.
    #[arg(long = "h", value_delimiter = ',')]
    h: Vec<f64>,
    /// End time; several values for energy runs.
    #[arg(long = "t-end", value_delimiter = ',')]
    t_end: Vec<f64>,
    /// Sine-Gordon grid size.
    #[arg(long)]
    n: Option<usize>,
    /// Sine-Gordon grid spacing, "1/N" or "2/N".
    #[arg(long)]
    spacing: Option<String>,
    /// Duffing parameter.
    #[arg(long)]
    k: Option<f64>,
    /// Stellar frequencies and coupling.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    v_min: Option<f64>,
    #[arg(long)]
    v_max: Option<f64>,
    #[arg(long)]
    z_min: Option<f64>,
    #[arg(long)]
    z_max: Option<f64>,
    #[arg(long)]
    nv: Option<usize>,
    #[arg(long)]
    nz: Option<usize>,
    /// Write NaN for timings and null wall-clock so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

impl Common {
    fn overrides(&self, kind: Kind) -> RawConfig {
        let nonempty = |v: &Vec<f64>| (!v.is_empty()).then(|| v.clone());
        let (t_end, t_ends) = match kind {
            Kind::Energy => (None, nonempty(&self.t_end)),
            _ => (self.t_end.first().copied(), None),
        };
        RawConfig {
            kind: Some(kind),
            problem: self.problem.clone(),
            methods: (!self.methods.is_empty()).then(|| self.methods.clone()),
            h: nonempty(&self.h),
            t_end,
            t_ends,
            out_dir: self.out_dir.clone(),
            n: self.n,
            spacing: self.spacing.clone(),
            k: self.k,
            a: self.a,
            b: self.b,
            eps: self.eps,
            timing: self.no_timing.then_some(false),
            v_min: self.v_min,
            v_max: self.v_max,
            z_min: self.z_min,
            z_max: self.z_max,
            nv: self.nv,
            nz: self.nz,
            ..Default::default()
        }
    }
}

fn run(kind: Kind, args: &Common) -> Result<ExitCode, CliError> {
    if kind != Kind::Energy && args.t_end.len() > 1 {
        return Err(CliError::Config("--t-end takes one value outside energy runs".into()));
    }
    let base = match &args.config {
        Some(path) => load_config(path)?,
        None => RawConfig::default(),
    };
    if let Some(k) = base.kind.filter(|k| *k != kind) {
        return Err(CliError::Config(format!("config is for `{k}` but the `{kind}` command was given")));
    }
    let cfg = ExperimentConfig::resolve(base.overlay(args.overrides(kind)))?;
    let report = run_experiment(&cfg)?;
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    if report.row_errors > 0 {
        eprintln!("{} run(s) stopped with an error; see the status column", report.row_errors);
    }
    if report.verify_failures > 0 {
        eprintln!("{} verification check(s) failed", report.verify_failures);
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::ListMethods => {
            for name in METHOD_NAMES {
                let m = MethodTableau::by_name(name).expect("registered method");
                let family = if m.is_classical() { "classical RKN" } else { "exponential" };
                println!("{name}\torder {}\t{} stage(s)\t{family}", m.order(), m.stages());
            }
            return ExitCode::SUCCESS;
        }
        Command::Verify(a) => (Kind::Verify, a),
        Command::Converge(a) => (Kind::Converge, a),
        Command::Efficiency(a) => (Kind::Efficiency, a),
        Command::Energy(a) => (Kind::Energy, a),
        Command::Stability(a) => (Kind::Stability, a),
    };
    match run(kind, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("erkn: {e}");
            ExitCode::from(2)
        }
    }
}
