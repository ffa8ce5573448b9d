//! Command-line interface. `run` returns the process exit code: 0 on success,
//! 1 for usage and input errors, 2 for numeric or solver failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use super::bundle::{Bundle, GenParams};
use super::{noise_scaling_study, parse_grid, phase_transition_sweep, relative_errors, ExperimentConfig, SolverChoice};
use crate::certificate::{golfing_run, local_isometry_spectrum, verify_dual_conditions, TangentFrame};
use crate::coherence::{
    coherence_report, construct_admissible_partition, construct_partition, verify_admissible, Partition,
    PartitionOptions, ADMISSIBLE_NU,
};
use crate::convex::{operator_norm_estimate, solve_nuclear, ConvexConfig};
use crate::error::{Error, Result};
use crate::operators::{BasisChoice, MeasurementEnsemble};
use crate::rng::{derive_seed, stream};
use crate::wirtinger::{solve_wirtinger, EtaInitPolicy, WirtingerConfig};

#[derive(Parser, Debug)]
#[command(name = "blindmix", version, about = "Blind deconvolution and demixing experiments")]
pub struct Cli {
    /// Master seed; every random draw of a command derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub omega: f64,
    /// Output file (standard output when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; tables default to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Dft,
    Random,
}

impl From<BasisArg> for BasisChoice {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Dft => BasisChoice::PartialDft,
            BasisArg::Random => BasisChoice::RandomOrthonormal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Convex,
    Wirtinger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Convex,
    Wirtinger,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EtaPolicyArg {
    FixedInverse,
    DoublePrevious,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Emit an ensemble, ground truth and observation bundle.
    Gen(GenArgs),
    /// Run a solver on a bundle.
    Solve(SolveArgs),
    /// Report coherence parameters of a bundle.
    Coherence(PartitionArgs),
    /// Construct a partition and check its admissibility.
    Partition(PartitionArgs),
    /// Run the Golfing scheme and check the dual-certificate conditions.
    Certify(PartitionArgs),
    /// Extreme eigenvalues of the tangent-space Gram matrix.
    Isometry(IsometryArgs),
    /// Phase-transition sweep over a grid of oversampling ratios.
    Sweep(SweepArgs),
    /// Convex recovery error against the noise level.
    Noise(NoiseArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Number of measurements; overrides --rho.
    #[arg(long)]
    pub l: Option<usize>,
    /// Oversampling ratio, `L = round(rho r (K + N))`.
    #[arg(long, default_value_t = 4.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = BasisArg::Dft)]
    pub basis: BasisArg,
    /// Store the truth with unit-norm channels.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ConvexArgs {
    #[arg(long, default_value_t = ConvexConfig::default().max_iters)]
    pub convex_max_iters: usize,
    #[arg(long, default_value_t = ConvexConfig::default().tol_rel)]
    pub convex_tol_rel: f64,
    /// Defaults to `1e-9 (1 + ||y||)`.
    #[arg(long)]
    pub convex_tol_feas: Option<f64>,
    #[arg(long, default_value_t = ConvexConfig::default().step_ratio)]
    pub convex_step_ratio: f64,
    #[arg(long, default_value_t = ConvexConfig::default().operator_norm_margin)]
    pub convex_margin: f64,
    /// Keep the primal and dual steps fixed instead of rebalancing them.
    #[arg(long)]
    pub convex_fixed_steps: bool,
}

impl ConvexArgs {
    fn config(&self) -> ConvexConfig {
        ConvexConfig {
            max_iters: self.convex_max_iters,
            tol_rel: self.convex_tol_rel,
            tol_feas: self.convex_tol_feas,
            step_ratio: self.convex_step_ratio,
            adaptive_steps: !self.convex_fixed_steps,
            operator_norm_margin: self.convex_margin,
            ..ConvexConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct WirtingerArgs {
    #[arg(long, default_value_t = WirtingerConfig::default().grad_tol)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = WirtingerConfig::default().max_iters)]
    pub wirtinger_max_iters: usize,
    #[arg(long, default_value_t = WirtingerConfig::default().armijo_c)]
    pub armijo_c: f64,
    #[arg(long, default_value_t = WirtingerConfig::default().shrink)]
    pub shrink: f64,
    #[arg(long, value_enum, default_value_t = EtaPolicyArg::DoublePrevious)]
    pub eta_policy: EtaPolicyArg,
    #[arg(long, default_value_t = WirtingerConfig::default().max_backtracks)]
    pub max_backtracks: usize,
}

impl WirtingerArgs {
    fn config(&self) -> WirtingerConfig {
        WirtingerConfig {
            grad_tol: self.grad_tol,
            max_iters: self.wirtinger_max_iters,
            armijo_c: self.armijo_c,
            shrink: self.shrink,
            eta_init_policy: match self.eta_policy {
                EtaPolicyArg::FixedInverse => EtaInitPolicy::FixedInverseLipschitz,
                EtaPolicyArg::DoublePrevious => EtaInitPolicy::DoublePrevious,
            },
            max_backtracks: self.max_backtracks,
            ..WirtingerConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[command(flatten)]
    pub convex: ConvexArgs,
    #[command(flatten)]
    pub wirtinger: WirtingerArgs,
}

#[derive(Args, Debug)]
pub struct PartitionArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Number of sets; chosen from the admissible range when omitted.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = ADMISSIBLE_NU)]
    pub nu: f64,
    #[arg(long, default_value_t = 50)]
    pub max_attempts: usize,
    /// Never use the decimated partition for DFT bases.
    #[arg(long)]
    pub no_dft_shortcut: bool,
    /// Plain i.i.d. assignment without greedy refinement.
    #[arg(long)]
    pub no_refine: bool,
}

impl PartitionArgs {
    fn options(&self) -> PartitionOptions {
        PartitionOptions {
            nu: self.nu,
            dft_shortcut: !self.no_dft_shortcut,
            max_attempts: self.max_attempts,
            refine: !self.no_refine,
            ..PartitionOptions::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct IsometryArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Also report per-set weighted spectra on `T^p`.
    #[arg(long)]
    pub with_partition: bool,
    #[arg(long)]
    pub p: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value_t = SolverArg::Both)]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 4)]
    pub r: usize,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long)]
    pub rho: String,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = BasisArg::Dft)]
    pub basis: BasisArg,
    #[command(flatten)]
    pub convex: ConvexArgs,
    #[command(flatten)]
    pub wirtinger: WirtingerArgs,
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Single oversampling ratio.
    #[arg(long, default_value_t = 8.0)]
    pub rho: f64,
    #[arg(long, default_value = "0.001,0.003,0.01,0.03,0.1")]
    pub tau_grid: String,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = BasisArg::Dft)]
    pub basis: BasisArg,
    #[command(flatten)]
    pub convex: ConvexArgs,
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli).and_then(|text| emit(&cli, &text)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                2
            } else {
                1
            }
        }
    }
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn json_only(cli: &Cli) -> Result<()> {
    if cli.format == Some(Format::Csv) {
        return Err(Error::Config("csv output is available for sweep and noise only".into()));
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn load(path: &PathBuf) -> Result<(Bundle, MeasurementEnsemble)> {
    let bundle = Bundle::load(path)?;
    let ens = bundle.ensemble()?;
    Ok((bundle, ens))
}

fn gamma_estimate(ens: &MeasurementEnsemble, seed: u64) -> f64 {
    operator_norm_estimate(ens, 100, &mut stream(derive_seed(seed, "gamma", 0, 0)))
}

fn build_partition(args: &PartitionArgs, ens: &MeasurementEnsemble, cli: &Cli) -> Result<Partition> {
    let mut rng = stream(derive_seed(cli.seed, "partition", 0, 0));
    match args.p {
        Some(p) => construct_partition(ens, p, &args.options(), &mut rng),
        None => construct_admissible_partition(ens, cli.omega, &args.options(), &mut rng),
    }
}

fn execute(cli: &Cli) -> Result<String> {
    if !(cli.omega >= 1.0) {
        return Err(Error::Config(format!("omega must be >= 1, got {}", cli.omega)));
    }
    match &cli.command {
        Command::Gen(a) => {
            json_only(cli)?;
            let l = match a.l {
                Some(l) => l,
                None => ExperimentConfig::new(a.r, a.k, a.n, vec![a.rho], 0, SolverChoice::Convex).measurements(a.rho)?,
            };
            let params =
                GenParams { l, r: a.r, k: a.k, n: a.n, tau: a.tau, basis: a.basis.into(), normalize_truth: a.normalize };
            let mut text = Bundle::generate(&params, derive_seed(cli.seed, "gen", 0, 0))?.to_json()?;
            text.push('\n');
            Ok(text)
        }
        Command::Solve(a) => {
            json_only(cli)?;
            let (bundle, ens) = load(&a.bundle)?;
            let obs = bundle.observation()?;
            let (mut value, estimate) = match a.method {
                MethodArg::Convex => {
                    let res = solve_nuclear(&ens, &obs, &a.convex.config())?;
                    (serde_json::to_value(&res)?, res.estimate)
                }
                MethodArg::Wirtinger => {
                    let res = solve_wirtinger(&ens, &obs, &a.wirtinger.config())?;
                    (serde_json::to_value(&res)?, res.estimate)
                }
            };
            let errors = match &bundle.truth {
                Some(t) => Some(relative_errors(&estimate, &t.lift())?),
                None => None,
            };
            if let Value::Object(map) = &mut value {
                map.insert("method".into(), json!(format!("{:?}", a.method).to_lowercase()));
                map.insert("relative_errors".into(), json!(errors));
            }
            to_json(&value)
        }
        Command::Coherence(a) => {
            json_only(cli)?;
            let (bundle, ens) = load(&a.bundle)?;
            let gamma = gamma_estimate(&ens, cli.seed);
            let report = match &bundle.truth {
                Some(t) => {
                    let part = build_partition(a, &ens, cli)?;
                    let channels = t.normalized().channels;
                    coherence_report(&ens, Some((&part, &channels)), cli.omega, gamma)?
                }
                None => coherence_report(&ens, None, cli.omega, gamma)?,
            };
            to_json(&report)
        }
        Command::Partition(a) => {
            json_only(cli)?;
            let (_, ens) = load(&a.bundle)?;
            let part = build_partition(a, &ens, cli)?;
            let report = verify_admissible(&part, &ens, cli.omega)?;
            to_json(&json!({ "partition": part.summary(), "admissibility": report }))
        }
        Command::Certify(a) => {
            json_only(cli)?;
            let (bundle, ens) = load(&a.bundle)?;
            let truth = bundle.truth.as_ref().ok_or_else(|| Error::Config("bundle carries no ground truth".into()))?;
            let part = build_partition(a, &ens, cli)?;
            let trace = golfing_run(&ens, truth, &part)?;
            let gamma = gamma_estimate(&ens, cli.seed);
            let report = verify_dual_conditions(&trace, gamma)?;
            to_json(&json!({ "gamma": gamma, "partition_sets": part.count(), "trace": trace, "conditions": report }))
        }
        Command::Isometry(a) => {
            json_only(cli)?;
            let (bundle, ens) = load(&a.bundle)?;
            let truth = bundle.truth.as_ref().ok_or_else(|| Error::Config("bundle carries no ground truth".into()))?;
            let frame = TangentFrame::new(truth)?;
            let spectrum = if a.with_partition {
                let pargs = PartitionArgs {
                    bundle: a.bundle.clone(),
                    p: a.p,
                    nu: ADMISSIBLE_NU,
                    max_attempts: 50,
                    no_dft_shortcut: false,
                    no_refine: false,
                };
                let part = build_partition(&pargs, &ens, cli)?;
                let frame = frame.with_partition(&part)?;
                local_isometry_spectrum(&ens, &frame, Some(&part))?
            } else {
                local_isometry_spectrum(&ens, &frame, None)?
            };
            to_json(&spectrum)
        }
        Command::Sweep(a) => {
            let solver = match a.solver {
                SolverArg::Convex => SolverChoice::Convex,
                SolverArg::Wirtinger => SolverChoice::Wirtinger,
                SolverArg::Both => SolverChoice::Both,
            };
            let mut cfg = ExperimentConfig::new(a.r, a.k, a.n, parse_grid(&a.rho)?, a.trials, solver);
            cfg.tau = a.tau;
            cfg.master_seed = cli.seed;
            cfg.omega = cli.omega;
            cfg.basis = a.basis.into();
            cfg.convex = a.convex.config();
            cfg.wirtinger = a.wirtinger.config();
            let table = phase_transition_sweep(&cfg)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => table.to_csv_string(),
                Format::Json => to_json(&table),
            }
        }
        Command::Noise(a) => {
            let mut cfg = ExperimentConfig::new(a.r, a.k, a.n, vec![a.rho], a.trials, SolverChoice::Convex);
            cfg.master_seed = cli.seed;
            cfg.omega = cli.omega;
            cfg.basis = a.basis.into();
            cfg.convex = a.convex.config();
            let table = noise_scaling_study(&cfg, &parse_grid(&a.tau_grid)?)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut buf = Vec::new();
                    table.write_csv(&mut buf)?;
                    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
                }
                Format::Json => to_json(&table),
            }
        }
    }
}
