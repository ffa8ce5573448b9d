//! Nonconvex recovery by Wirtinger gradient descent on the residual
//! `F(h, x) = ||A(h_1 x_1^*, ..., h_r x_r^*) - y||^2`, started from a spectral
//! initialization.

use serde::{Deserialize, Serialize};

use crate::convex::{operator_norm_estimate, SolverStatus};
use crate::error::{Error, Result};
use crate::linalg::{self, CVec, C64};
use crate::operators::{FactoredSignal, LiftedSignal, MeasurementEnsemble, Observation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EtaInitPolicy {
    /// Every search starts from `1 / gamma^2`.
    FixedInverseLipschitz,
    /// Every search starts from twice the previously accepted step; the first
    /// from `1 / gamma^2`.
    DoublePrevious,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WirtingerConfig {
    /// Stop once `||grad F|| < grad_tol`.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub shrink: f64,
    pub eta_init_policy: EtaInitPolicy,
    pub max_backtracks: usize,
    /// Power iterations for the `gamma` used in the first step size.
    pub norm_iters: usize,
    pub norm_seed: u64,
}

impl Default for WirtingerConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-4,
            max_iters: 1000,
            armijo_c: 1e-4,
            shrink: 0.5,
            eta_init_policy: EtaInitPolicy::DoublePrevious,
            max_backtracks: 50,
            norm_iters: 50,
            norm_seed: 0x5eed,
        }
    }
}

impl WirtingerConfig {
    /// `max_iters = 0` is accepted and returns the initialization.
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config("grad_tol must be positive".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c <= 0.5) {
            return Err(Error::Config(format!("armijo_c must lie in (0, 0.5], got {}", self.armijo_c)));
        }
        if self.norm_iters < 1 {
            return Err(Error::Config("norm_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Iterate of the gradient method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WirtingerState {
    pub point: FactoredSignal,
    pub objective: f64,
    pub grad_norm: f64,
}

/// Block-wise gradients with respect to channels and messages.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub grad_h: Vec<CVec>,
    pub grad_x: Vec<CVec>,
}

impl Gradients {
    pub fn norm_sq(&self) -> f64 {
        self.grad_h.iter().chain(&self.grad_x).map(linalg::vnorm_sq).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

fn residual(ens: &MeasurementEnsemble, obs: &Observation, point: &FactoredSignal) -> Result<CVec> {
    if obs.y.len() != ens.l() {
        return Err(Error::dim(format!("observation has length {}, expected L = {}", obs.y.len(), ens.l())));
    }
    Ok(ens.forward_factored(point)? - &obs.y)
}

/// `F(h, x)`
pub fn objective(ens: &MeasurementEnsemble, obs: &Observation, point: &FactoredSignal) -> Result<f64> {
    Ok(linalg::vnorm_sq(&residual(ens, obs, point)?))
}

/// `grad_h_i = (diag(C_i conj(x_i)) B_i)^* r` and
/// `grad_x_i = (diag(B_i h_i) C_i)^T conj(r)` with `r = A(h x^*) - y`.
///
/// These are the conjugate Wirtinger derivatives. The real partial
/// derivatives of `F` are twice their real and imaginary parts.
pub fn gradients(ens: &MeasurementEnsemble, obs: &Observation, point: &FactoredSignal) -> Result<Gradients> {
    let r = residual(ens, obs, point)?;
    Ok(gradients_from_residual(ens, point, &r))
}

fn gradients_from_residual(ens: &MeasurementEnsemble, point: &FactoredSignal, r: &CVec) -> Gradients {
    let mut grad_h = Vec::with_capacity(ens.r());
    let mut grad_x = Vec::with_capacity(ens.r());
    for (i, block) in ens.blocks().iter().enumerate() {
        let b = block.basis.entries();
        let cm = block.encoder.entries();
        let bh = b * &point.channels[i];
        let cx = cm * point.messages[i].map(|z| z.conj());
        grad_h.push(b.ad_mul(&cx.map(|z| z.conj()).component_mul(r)));
        grad_x.push(cm.tr_mul(&bh.component_mul(&r.map(|z| z.conj()))));
    }
    Gradients { grad_h, grad_x }
}

/// Spectral initialization from `A^*(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralInit {
    pub point: FactoredSignal,
    /// Top singular value of each block of `A^*(y)`.
    pub top_singular_values: Vec<f64>,
    /// Blocks whose two leading singular values (nearly) coincide.
    pub degenerate: Vec<bool>,
}

const DEGENERACY_TOL: f64 = 1e-10;

/// `v_k = sqrt(d_k) u_top`, `u_k = sqrt(d_k) v_top` for the top singular pair
/// of each block of `A^*(y)`, rotated so that the largest-magnitude entry of
/// `v_k` is real and nonnegative.
pub fn spectral_init(ens: &MeasurementEnsemble, obs: &Observation) -> Result<SpectralInit> {
    let z = ens.adjoint(&obs.y)?;
    let mut channels = Vec::with_capacity(ens.r());
    let mut messages = Vec::with_capacity(ens.r());
    let mut tops = Vec::with_capacity(ens.r());
    let mut degenerate = Vec::with_capacity(ens.r());
    for zk in &z.blocks {
        let (u, s, v) = linalg::svd_sorted(zk);
        let d = s.first().copied().unwrap_or(0.0);
        if d == 0.0 {
            channels.push(CVec::zeros(zk.nrows()));
            messages.push(CVec::zeros(zk.ncols()));
            degenerate.push(false);
        } else {
            let scale = C64::from(d.sqrt());
            let left: CVec = u.column(0).into_owned();
            let right: CVec = v.column(0).into_owned();
            let phase = linalg::canonical_phase(&left);
            channels.push(left * (scale * phase));
            messages.push(right * (scale * phase));
            degenerate.push(s.get(1).is_some_and(|&s2| d - s2 <= DEGENERACY_TOL * d));
        }
        tops.push(d);
    }
    Ok(SpectralInit { point: FactoredSignal::new(channels, messages)?, top_singular_values: tops, degenerate })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineSearch {
    pub eta: f64,
    pub objective: f64,
    pub point: FactoredSignal,
    pub backtracks: usize,
    /// The decrease test failed for every trial step.
    pub stalled: bool,
}

fn step(point: &FactoredSignal, grad: &Gradients, eta: f64) -> FactoredSignal {
    let e = C64::from(eta);
    FactoredSignal {
        channels: point.channels.iter().zip(&grad.grad_h).map(|(h, g)| h - g * e).collect(),
        messages: point.messages.iter().zip(&grad.grad_x).map(|(x, g)| x - g * e).collect(),
    }
}

/// Backtracking from `eta0` until `F(new) <= F - c eta ||grad||^2`.
pub fn line_search(
    ens: &MeasurementEnsemble,
    obs: &Observation,
    state: &WirtingerState,
    grad: &Gradients,
    eta0: f64,
    cfg: &WirtingerConfig,
) -> Result<LineSearch> {
    let gsq = grad.norm_sq();
    if !(gsq > 0.0) {
        return Err(Error::Config("line search needs a nonzero gradient".into()));
    }
    let mut eta = eta0;
    let mut last = None;
    for backtracks in 0..=cfg.max_backtracks {
        let candidate = step(&state.point, grad, eta);
        let f = objective(ens, obs, &candidate)?;
        if f.is_finite() && f <= state.objective - cfg.armijo_c * eta * gsq {
            return Ok(LineSearch { eta, objective: f, point: candidate, backtracks, stalled: false });
        }
        last = Some((eta, f, candidate, backtracks));
        eta *= cfg.shrink;
    }
    let (eta, objective, point, backtracks) = last.expect("at least one trial step");
    Ok(LineSearch { eta, objective, point, backtracks, stalled: true })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WirtingerResult {
    pub factored: FactoredSignal,
    pub estimate: LiftedSignal,
    pub iterations: usize,
    pub status: SolverStatus,
    /// `F` at the returned point.
    pub objective: f64,
    pub grad_norm: f64,
    /// `sum_i ||h_i x_i^*||_*` at the returned point.
    pub final_objective: f64,
    /// `max(0, ||A(X) - y|| - tau)` at the returned point.
    pub feasibility_gap: f64,
    /// `F` after the initialization and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub degenerate_init: Vec<bool>,
}

/// Spectral initialization followed by gradient descent with one shared
/// step size for all channel and message blocks.
pub fn solve_wirtinger(ens: &MeasurementEnsemble, obs: &Observation, cfg: &WirtingerConfig) -> Result<WirtingerResult> {
    cfg.validate()?;
    let init = spectral_init(ens, obs)?;
    let gamma = operator_norm_estimate(ens, cfg.norm_iters, &mut crate::rng::stream(cfg.norm_seed));
    let eta_first = if gamma > 0.0 { 1.0 / (gamma * gamma) } else { 1.0 };

    let r = residual(ens, obs, &init.point)?;
    let mut grad = gradients_from_residual(ens, &init.point, &r);
    let mut state = WirtingerState {
        objective: linalg::vnorm_sq(&r),
        grad_norm: grad.norm(),
        point: init.point,
    };
    if !state.objective.is_finite() {
        return Err(Error::Numeric { iteration: 0, reason: "objective at initialization is not finite".into() });
    }
    let mut trace = vec![state.objective];
    let mut steps = Vec::new();
    let mut status = SolverStatus::MaxIters;
    let mut iterations = 0;
    let mut eta_prev = eta_first;

    for it in 1..=cfg.max_iters {
        if state.grad_norm < cfg.grad_tol {
            status = SolverStatus::Converged;
            break;
        }
        let eta0 = match cfg.eta_init_policy {
            EtaInitPolicy::FixedInverseLipschitz => eta_first,
            EtaInitPolicy::DoublePrevious if it == 1 => eta_first,
            EtaInitPolicy::DoublePrevious => 2.0 * eta_prev,
        };
        let ls = line_search(ens, obs, &state, &grad, eta0, cfg)?;
        if ls.stalled {
            status = SolverStatus::Stalled;
            break;
        }
        if !ls.objective.is_finite() {
            return Err(Error::Numeric { iteration: it, reason: "objective is not finite".into() });
        }
        let r = residual(ens, obs, &ls.point)?;
        grad = gradients_from_residual(ens, &ls.point, &r);
        state = WirtingerState { objective: ls.objective, grad_norm: grad.norm(), point: ls.point };
        if !state.grad_norm.is_finite() {
            return Err(Error::Numeric { iteration: it, reason: "gradient is not finite".into() });
        }
        eta_prev = ls.eta;
        trace.push(state.objective);
        steps.push(ls.eta);
        iterations = it;
    }
    if status == SolverStatus::MaxIters && cfg.max_iters > 0 && state.grad_norm < cfg.grad_tol {
        status = SolverStatus::Converged;
    }

    let estimate = state.point.lift();
    let fit = linalg::vnorm_sq(&residual(ens, obs, &state.point)?).sqrt();
    Ok(WirtingerResult {
        final_objective: estimate.nuclear_norm(),
        feasibility_gap: (fit - obs.tau).max(0.0),
        estimate,
        factored: state.point,
        iterations,
        status,
        objective: state.objective,
        grad_norm: state.grad_norm,
        objective_trace: trace,
        step_sizes: steps,
        degenerate_init: init.degenerate,
    })
}
