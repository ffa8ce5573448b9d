//! Experiment harness: seeded trials, phase-transition sweeps, noise-scaling
//! studies and their tabular output. The command-line front end lives in
//! [`cli`].

pub mod bundle;
pub mod cli;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::k_mu;
use crate::convex::{solve_nuclear, ConvexConfig, SolverStatus};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::operators::{random_direction, BasisChoice, FactoredSignal, LiftedSignal, MeasurementEnsemble, Observation};
use crate::rng::{derive_seed, stream};
use crate::wirtinger::{solve_wirtinger, WirtingerConfig};

/// Per-block relative error threshold that counts as recovery.
pub const SUCCESS_THRESHOLD: f64 = 0.01;

/// `||X_i - X0_i||_F / ||X0_i||_F` for each block.
pub fn relative_errors(estimate: &LiftedSignal, truth: &LiftedSignal) -> Result<Vec<f64>> {
    if estimate.dims() != truth.dims() {
        return Err(Error::dim("estimate and truth shapes differ"));
    }
    estimate
        .blocks
        .iter()
        .zip(&truth.blocks)
        .enumerate()
        .map(|(i, (e, t))| {
            let denom = linalg::norm_sq(t).sqrt();
            if denom == 0.0 {
                Err(Error::UndefinedRatio(i))
            } else {
                Ok(linalg::norm_sq(&(e - t)).sqrt() / denom)
            }
        })
        .collect()
}

/// Per-block success at a 1% relative error.
pub fn success(estimate: &LiftedSignal, truth: &LiftedSignal) -> Result<Vec<bool>> {
    Ok(relative_errors(estimate, truth)?.into_iter().map(|e| e <= SUCCESS_THRESHOLD).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Convex,
    Wirtinger,
    Both,
}

impl SolverChoice {
    fn solvers(self) -> &'static [Solver] {
        match self {
            SolverChoice::Convex => &[Solver::Convex],
            SolverChoice::Wirtinger => &[Solver::Wirtinger],
            SolverChoice::Both => &[Solver::Convex, Solver::Wirtinger],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Convex,
    Wirtinger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub r: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub rho_grid: Vec<f64>,
    pub trials_per_point: usize,
    pub solver: SolverChoice,
    pub tau: f64,
    pub master_seed: u64,
    pub omega: f64,
    pub basis: BasisChoice,
    pub convex: ConvexConfig,
    pub wirtinger: WirtingerConfig,
}

impl ExperimentConfig {
    pub fn new(r: usize, k: usize, n: usize, rho_grid: Vec<f64>, trials_per_point: usize, solver: SolverChoice) -> Self {
        Self {
            r,
            k,
            n,
            rho_grid,
            trials_per_point,
            solver,
            tau: 0.0,
            master_seed: 0,
            omega: 1.0,
            basis: BasisChoice::PartialDft,
            convex: ConvexConfig::default(),
            wirtinger: WirtingerConfig::default(),
        }
    }

    /// `L = round(rho r (K + N))`
    pub fn measurements(&self, rho: f64) -> Result<usize> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Config(format!("rho must be positive, got {rho}")));
        }
        let l = (rho * (self.r * (self.k + self.n)) as f64).round() as usize;
        if l < self.k.max(self.n) || l == 0 {
            return Err(Error::Config(format!("rho = {rho} gives L = {l} < max(K, N)")));
        }
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.k == 0 || self.n == 0 {
            return Err(Error::Config("r, K and N must be positive".into()));
        }
        if self.rho_grid.is_empty() {
            return Err(Error::Config("rho grid is empty".into()));
        }
        for &rho in &self.rho_grid {
            self.measurements(rho)?;
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!("tau must be finite and >= 0, got {}", self.tau)));
        }
        self.convex.validate()?;
        self.wirtinger.validate()
    }

    fn dims(&self) -> Vec<(usize, usize)> {
        vec![(self.k, self.n); self.r]
    }
}

/// Seeded problem instance: ensemble, ground truth, observation.
#[derive(Clone, Debug)]
pub struct Instance {
    pub ensemble: MeasurementEnsemble,
    pub truth: FactoredSignal,
    pub observation: Observation,
}

/// Draws bases and encoders, then the truth, then the noise direction, all
/// from one stream.
pub fn sample_instance(
    l: usize,
    dims: &[(usize, usize)],
    basis: BasisChoice,
    tau: f64,
    seed: u64,
) -> Result<Instance> {
    let mut rng = stream(seed);
    let ensemble = MeasurementEnsemble::sample(l, dims, basis, &mut rng)?;
    let truth = FactoredSignal::sample(dims, &mut rng);
    let observation = crate::operators::synthesize_observation(&ensemble, &truth, tau, &mut rng)?;
    Ok(Instance { ensemble, truth, observation })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOutcome {
    pub solver: Solver,
    pub success: Vec<bool>,
    pub relative_errors: Vec<f64>,
    pub iterations: usize,
    pub status: SolverStatus,
}

/// Everything a trial reports except wall-clock time, which is kept apart so
/// that the outcome itself is a pure function of the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub rho: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub trial: usize,
    pub outcomes: Vec<SolverOutcome>,
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub outcome: TrialOutcome,
    /// Seconds spent in each solver, aligned with `outcome.outcomes`.
    pub seconds: Vec<f64>,
}

pub const SWEEP_TAG: &str = "sweep";

/// One seeded trial at `cfg.rho_grid[rho_index]`. Every selected solver runs
/// on the same instance.
pub fn run_trial(cfg: &ExperimentConfig, rho_index: usize, trial: usize) -> Result<TrialResult> {
    let rho = *cfg
        .rho_grid
        .get(rho_index)
        .ok_or_else(|| Error::Config(format!("rho index {rho_index} outside the grid")))?;
    let wrap = |e: Error| Error::Trial { rho, trial, source: Box::new(e) };
    let l = cfg.measurements(rho)?;
    let seed = derive_seed(cfg.master_seed, SWEEP_TAG, rho_index as u64, trial as u64);
    let inst = sample_instance(l, &cfg.dims(), cfg.basis, cfg.tau, seed).map_err(wrap)?;
    let x0 = inst.truth.lift();

    let mut outcomes = Vec::new();
    let mut seconds = Vec::new();
    for &solver in cfg.solver.solvers() {
        let start = Instant::now();
        let (estimate, iterations, status) = match solver {
            Solver::Convex => {
                let res = solve_nuclear(&inst.ensemble, &inst.observation, &cfg.convex).map_err(wrap)?;
                (res.estimate, res.iterations, res.status)
            }
            Solver::Wirtinger => {
                let res = solve_wirtinger(&inst.ensemble, &inst.observation, &cfg.wirtinger).map_err(wrap)?;
                (res.estimate, res.iterations, res.status)
            }
        };
        seconds.push(start.elapsed().as_secs_f64());
        let errors = relative_errors(&estimate, &x0).map_err(wrap)?;
        outcomes.push(SolverOutcome {
            solver,
            success: errors.iter().map(|&e| e <= SUCCESS_THRESHOLD).collect(),
            relative_errors: errors,
            iterations,
            status,
        });
    }
    Ok(TrialResult { outcome: TrialOutcome { rho, l, trial, outcomes }, seconds })
}

/// One row per `(rho, solver)`. `trials` and `successes` count devices, that
/// is trials times `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransitionRow {
    pub solver: Solver,
    pub r: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub rho: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub mean_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransitionTable {
    pub rows: Vec<PhaseTransitionRow>,
}

impl PhaseTransitionTable {
    pub fn rows_for(&self, solver: Solver) -> impl Iterator<Item = &PhaseTransitionRow> {
        self.rows.iter().filter(move |r| r.solver == solver)
    }

    /// First `rho` at which the success rate reaches 1/2, linearly
    /// interpolated between neighbouring grid points.
    pub fn crossing(&self, solver: Solver) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self.rows_for(solver).filter_map(|r| r.success_rate.map(|s| (r.rho, s))).collect();
        if pts.first().is_some_and(|&(_, s)| s >= 0.5) {
            return Some(pts[0].0);
        }
        pts.windows(2).find(|w| w[0].1 < 0.5 && w[1].1 >= 0.5).map(|w| {
            let ((r0, s0), (r1, s1)) = (w[0], w[1]);
            r0 + (0.5 - s0) * (r1 - r0) / (s1 - s0)
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record([
                "solver", "r", "K", "N", "L", "rho", "trials", "successes", "success_rate", "mean_iterations", "mean_seconds",
            ])?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}

/// Runs every `(rho, trial)` pair in parallel and aggregates per device.
/// Rows come out ordered by `rho`, then solver, regardless of scheduling.
pub fn phase_transition_sweep(cfg: &ExperimentConfig) -> Result<PhaseTransitionTable> {
    Ok(aggregate(cfg, &sweep_trials(cfg)?))
}

/// Raw per-trial results of a sweep, ordered by `(rho, trial)`.
pub fn sweep_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..cfg.rho_grid.len()).flat_map(|i| (0..cfg.trials_per_point).map(move |t| (i, t))).collect();
    jobs.par_iter().map(|&(i, t)| run_trial(cfg, i, t)).collect()
}

pub fn aggregate(cfg: &ExperimentConfig, trials: &[TrialResult]) -> PhaseTransitionTable {
    let mut rows = Vec::new();
    for &rho in &cfg.rho_grid {
        let l = cfg.measurements(rho).unwrap_or(0);
        for (s, &solver) in cfg.solver.solvers().iter().enumerate() {
            let at_rho: Vec<&TrialResult> = trials.iter().filter(|t| t.outcome.rho == rho).collect();
            let mut successes = 0;
            let mut devices = 0;
            let mut iters = 0.0;
            let mut secs = 0.0;
            for t in &at_rho {
                let o = &t.outcome.outcomes[s];
                devices += o.success.len();
                successes += o.success.iter().filter(|&&b| b).count();
                iters += o.iterations as f64;
                secs += t.seconds[s];
            }
            let n = at_rho.len();
            rows.push(PhaseTransitionRow {
                solver,
                r: cfg.r,
                k: cfg.k,
                n: cfg.n,
                l,
                rho,
                trials: devices,
                successes,
                success_rate: (devices > 0).then(|| successes as f64 / devices as f64),
                mean_iterations: (n > 0).then(|| iters / n as f64),
                mean_seconds: (n > 0).then(|| secs / n as f64),
            });
        }
    }
    PhaseTransitionTable { rows }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub tau: f64,
    pub mean_error: f64,
    pub theorem_bound_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTable {
    pub rows: Vec<NoiseRow>,
    /// Constant `C` in `C tau sqrt(r max{1, r K_mu N / L} log2 L)`, fitted at
    /// the smallest positive `tau`.
    pub bound_constant: Option<f64>,
    /// Least-squares slope of `log(mean_error)` against `log(tau)` over `tau > 0`.
    pub slope: Option<f64>,
}

impl NoiseTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(["tau", "mean_error", "theorem_bound_value"])?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const NOISE_TAG: &str = "noise";

/// Convex recovery error against `tau` at `L` from `cfg.rho_grid[0]`.
///
/// Each trial fixes one instance and one unit noise direction `e`, and solves
/// with `y = A(X0) + tau e` for every `tau`, so the errors differ only through
/// the noise level.
pub fn noise_scaling_study(cfg: &ExperimentConfig, tau_grid: &[f64]) -> Result<NoiseTable> {
    cfg.validate()?;
    if cfg.solver != SolverChoice::Convex {
        return Err(Error::Config("the noise study runs the convex solver only".into()));
    }
    if tau_grid.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::Config("tau values must be finite and >= 0".into()));
    }
    let rho = cfg.rho_grid[0];
    let l = cfg.measurements(rho)?;
    let dims = cfg.dims();

    let per_trial: Vec<(Vec<f64>, f64)> = (0..cfg.trials_per_point)
        .into_par_iter()
        .map(|trial| {
            let wrap = |e: Error| Error::Trial { rho, trial, source: Box::new(e) };
            let mut rng = stream(derive_seed(cfg.master_seed, NOISE_TAG, 0, trial as u64));
            let ens = MeasurementEnsemble::sample(l, &dims, cfg.basis, &mut rng).map_err(wrap)?;
            let truth = FactoredSignal::sample(&dims, &mut rng);
            let direction = random_direction(&mut rng, l);
            let x0 = truth.lift();
            let clean = ens.forward(&x0).map_err(wrap)?;
            let errors = tau_grid
                .iter()
                .map(|&tau| {
                    let obs = Observation { y: &clean + &direction * C64::from(tau), tau };
                    let res = solve_nuclear(&ens, &obs, &cfg.convex).map_err(wrap)?;
                    Ok((&res.estimate - &x0).norm())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((errors, k_mu(&ens)))
        })
        .collect::<Result<_>>()?;

    let trials = per_trial.len().max(1) as f64;
    let mean_errors: Vec<f64> =
        (0..tau_grid.len()).map(|j| per_trial.iter().map(|(e, _)| e[j]).sum::<f64>() / trials).collect();
    let kmu = per_trial.iter().map(|&(_, k)| k).fold(0.0, f64::max).max(1.0);
    let (lf, rf) = (l as f64, cfg.r as f64);
    let envelope_unit = (rf * (rf * kmu * cfg.n as f64 / lf).max(1.0) * lf.log2()).sqrt();

    let fit_index = tau_grid
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j);
    let bound_constant = match (fit_index, per_trial.is_empty()) {
        (Some(j), false) => Some(mean_errors[j] / (tau_grid[j] * envelope_unit)),
        _ => None,
    };
    let rows = tau_grid
        .iter()
        .zip(&mean_errors)
        .map(|(&tau, &mean_error)| NoiseRow {
            tau,
            mean_error,
            theorem_bound_value: bound_constant.map(|c| c * tau * envelope_unit),
        })
        .collect();
    let pts: Vec<(f64, f64)> = tau_grid
        .iter()
        .zip(&mean_errors)
        .filter(|(&t, &e)| t > 0.0 && e > 0.0)
        .map(|(&t, &e)| (t.ln(), e.ln()))
        .collect();
    Ok(NoiseTable { rows, bound_constant, slope: least_squares_slope(&pts) })
}

/// Slope of the least-squares line through `points`; `None` with fewer than
/// two distinct abscissae.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Parses `start:stop:step` (inclusive of `stop` up to rounding) or a
/// comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse grid '{text}'"));
    if text.contains(':') {
        let parts: Vec<f64> = text.split(':').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| round12(start + i as f64 * step)).collect())
    } else {
        text.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect()
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}
