//! Nuclear-norm recovery
//!
//! ```text
//! minimize  sum_i ||X_i||_*   subject to  ||A(X) - y|| <= tau
//! ```
//!
//! solved with a primal-dual hybrid-gradient iteration. The primal update is
//! block-wise singular value thresholding; the dual update is the Moreau
//! decomposition of the indicator of the ball of radius `tau` around `y`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::operators::{LiftedSignal, MeasurementEnsemble, Observation};
use crate::rng::complex_normal_mat;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexConfig {
    pub max_iters: usize,
    /// Threshold on `||X_{k+1} - X_k||_F / ||X_{k+1}||_F`.
    pub tol_rel: f64,
    /// Threshold on `max(0, ||A(X) - y|| - tau)`. `None` means `1e-9 (1 + ||y||)`.
    pub tol_feas: Option<f64>,
    /// Ratio of primal to dual step size (initial ratio when `adaptive_steps`).
    pub step_ratio: f64,
    /// Rebalance the two steps from the primal and dual residuals, keeping
    /// their product fixed and shrinking each adjustment geometrically.
    pub adaptive_steps: bool,
    /// Steps satisfy `s t ||A||^2 <= 1 - operator_norm_margin`.
    pub operator_norm_margin: f64,
    /// Power iterations used to estimate `||A||`.
    pub norm_iters: usize,
    /// Seed of the power-iteration starting point.
    pub norm_seed: u64,
}

impl Default for ConvexConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol_rel: 1e-7,
            tol_feas: None,
            step_ratio: 1.0,
            adaptive_steps: true,
            operator_norm_margin: 0.05,
            norm_iters: 100,
            norm_seed: 0x5eed,
        }
    }
}

impl ConvexConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.tol_rel > 0.0) || self.tol_feas.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.step_ratio > 0.0) || !self.step_ratio.is_finite() {
            return Err(Error::Config("step_ratio must be positive".into()));
        }
        if !(self.operator_norm_margin > 0.0 && self.operator_norm_margin < 1.0) {
            return Err(Error::Config("operator_norm_margin must lie in (0, 1)".into()));
        }
        if self.norm_iters < 1 {
            return Err(Error::Config("norm_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn feasibility_tolerance(&self, y: &CVec) -> f64 {
        self.tol_feas.unwrap_or(1e-9 * (1.0 + linalg::vnorm_sq(y).sqrt()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Converged,
    MaxIters,
    /// Line search could not decrease the objective (nonconvex solver only).
    Stalled,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverResult {
    pub estimate: LiftedSignal,
    pub iterations: usize,
    /// `sum_i ||X_i||_*` of the estimate.
    pub final_objective: f64,
    /// `max(0, ||A(X) - y|| - tau)` of the estimate.
    pub feasibility_gap: f64,
    pub status: SolverStatus,
    /// Primal objective minus the dual value of the rescaled final dual iterate.
    pub duality_gap: f64,
    /// Primal and dual step sizes at the final iteration.
    pub steps: (f64, f64),
}

/// Proximal operator of `threshold ||.||_*`.
pub fn svt(m: &CMat, threshold: f64) -> Result<CMat> {
    Ok(svt_with_norm(m, threshold)?.0)
}

/// `svt` together with the nuclear norm of its output.
fn svt_with_norm(m: &CMat, threshold: f64) -> Result<(CMat, f64)> {
    if !(threshold >= 0.0) {
        return Err(Error::Config(format!("threshold must be >= 0, got {threshold}")));
    }
    if !linalg::is_finite(m) {
        return Err(Error::Numeric { iteration: 0, reason: "non-finite matrix passed to svt".into() });
    }
    let (u, s, v) = linalg::svd_sorted(m);
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    let mut nuclear = 0.0;
    for (j, &sigma) in s.iter().enumerate() {
        let shrunk = sigma - threshold;
        if shrunk <= 0.0 {
            break;
        }
        nuclear += shrunk;
        out += u.column(j) * v.column(j).adjoint() * C64::from(shrunk);
    }
    Ok((out, nuclear))
}

/// Euclidean projection onto the ball of `radius` around `center`.
pub fn project_ball(v: &CVec, center: &CVec, radius: f64) -> CVec {
    let diff = v - center;
    let dist = linalg::vnorm_sq(&diff).sqrt();
    if dist <= radius {
        v.clone()
    } else {
        center + diff * C64::from(radius / dist)
    }
}

/// Power-iteration estimate of `||A||_{F -> 2}`.
///
/// The Rayleigh quotient of `A^* A` is nondecreasing along power iterates,
/// and the running maximum is returned, so the estimate never decreases when
/// `iters` grows with the same `rng` state.
pub fn operator_norm_estimate<R: Rng + ?Sized>(ens: &MeasurementEnsemble, iters: usize, rng: &mut R) -> f64 {
    let mut x = LiftedSignal {
        blocks: ens.dims().iter().map(|&(k, n)| complex_normal_mat(rng, k, n)).collect(),
    };
    let mut best: f64 = 0.0;
    for _ in 0..iters.max(1) {
        let norm = x.norm();
        if norm == 0.0 {
            break;
        }
        x = x.scaled(C64::from(1.0 / norm));
        let ax = ens.forward(&x).expect("shapes come from the ensemble");
        best = best.max(linalg::vnorm_sq(&ax));
        x = ens.adjoint(&ax).expect("shapes come from the ensemble");
    }
    best.sqrt()
}

/// `-Re<u, y> - tau ||u||` after rescaling `u` so that `max_i ||A_i^* u||_op <= 1`.
fn dual_value(ens: &MeasurementEnsemble, u: &CVec, obs: &Observation) -> f64 {
    let scale = ens
        .adjoint(u)
        .expect("dual variable has length L")
        .blocks
        .iter()
        .map(linalg::spectral_norm)
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let raw = -linalg::vinner(u, &obs.y).re - obs.tau * linalg::vnorm_sq(u).sqrt();
    (raw / scale).max(0.0)
}

fn residual_gap(ax: &CVec, obs: &Observation) -> f64 {
    (linalg::vnorm_sq(&(ax - &obs.y)).sqrt() - obs.tau).max(0.0)
}

const ADAPT_START: f64 = 0.5;
const ADAPT_DECAY: f64 = 0.95;
const ADAPT_BALANCE: f64 = 2.0;

pub fn solve_nuclear(ens: &MeasurementEnsemble, obs: &Observation, cfg: &ConvexConfig) -> Result<SolverResult> {
    cfg.validate()?;
    if obs.y.len() != ens.l() {
        return Err(Error::dim(format!("observation has length {}, expected L = {}", obs.y.len(), ens.l())));
    }
    if !(obs.tau >= 0.0) {
        return Err(Error::Config(format!("tau must be >= 0, got {}", obs.tau)));
    }
    let tol_feas = cfg.feasibility_tolerance(&obs.y);

    let norm = operator_norm_estimate(ens, cfg.norm_iters, &mut crate::rng::stream(cfg.norm_seed));
    if norm == 0.0 {
        let x = ens.zeros();
        let gap = residual_gap(&CVec::zeros(ens.l()), obs);
        let status = if gap <= tol_feas { SolverStatus::Converged } else { SolverStatus::MaxIters };
        return Ok(SolverResult {
            estimate: x,
            iterations: 0,
            final_objective: 0.0,
            feasibility_gap: gap,
            status,
            duality_gap: 0.0,
            steps: (0.0, 0.0),
        });
    }
    // power iteration underestimates, so leave a little extra room
    let norm = norm * 1.01;
    let base = (1.0 - cfg.operator_norm_margin).sqrt() / norm;
    let (mut s, mut t) = (base * cfg.step_ratio, base / cfg.step_ratio);
    let mut adapt = ADAPT_START;

    let mut x = ens.zeros();
    let mut ax = CVec::zeros(ens.l());
    let mut u = CVec::zeros(ens.l());
    let mut grad = ens.zeros();
    let mut best: Option<(f64, f64, LiftedSignal, usize)> = None;
    let mut status = SolverStatus::MaxIters;
    let mut iterations = cfg.max_iters;

    for k in 1..=cfg.max_iters {
        let mut blocks = Vec::with_capacity(ens.r());
        let mut objective = 0.0;
        for (xi, gi) in x.blocks.iter().zip(&grad.blocks) {
            let arg = xi - gi * C64::from(s);
            if !linalg::is_finite(&arg) {
                return Err(Error::Numeric { iteration: k, reason: "primal iterate is not finite".into() });
            }
            let (next, nuc) = svt_with_norm(&arg, s)?;
            objective += nuc;
            blocks.push(next);
        }
        let x_next = LiftedSignal { blocks };
        let ax_next = ens.forward(&x_next)?;

        // dual step on the extrapolated point 2 X_{k+1} - X_k
        let v = &u + (&ax_next * C64::from(2.0) - &ax) * C64::from(t);
        let u_next = &v - project_ball(&(&v / C64::from(t)), &obs.y, obs.tau) * C64::from(t);
        if !objective.is_finite() || !u_next.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Numeric { iteration: k, reason: "iterates diverged".into() });
        }
        let grad_next = ens.adjoint(&u_next)?;

        let dx = &x - &x_next;
        let change = dx.norm();
        let size = x_next.norm();
        let gap = residual_gap(&ax_next, obs);

        if cfg.adaptive_steps {
            // residuals of the optimality conditions at the new iterate
            let mut primal = dx.scaled(C64::from(1.0 / s));
            primal.axpy(C64::from(-1.0), &(&grad - &grad_next));
            let dual = (&u - &u_next) / C64::from(t) - (&ax - &ax_next);
            let (p, d) = (primal.norm(), linalg::vnorm_sq(&dual).sqrt());
            if p > ADAPT_BALANCE * d {
                s /= 1.0 - adapt;
                t *= 1.0 - adapt;
                adapt *= ADAPT_DECAY;
            } else if d > ADAPT_BALANCE * p {
                s *= 1.0 - adapt;
                t /= 1.0 - adapt;
                adapt *= ADAPT_DECAY;
            }
        }

        let rank_key = gap.max(tol_feas);
        let better = match &best {
            None => true,
            Some((bk, bo, _, _)) => rank_key < *bk || (rank_key == *bk && objective <= *bo),
        };
        x = x_next;
        ax = ax_next;
        u = u_next;
        grad = grad_next;
        if better {
            best = Some((rank_key, objective, x.clone(), k));
        }

        if change <= cfg.tol_rel * size && gap <= tol_feas {
            status = SolverStatus::Converged;
            iterations = k;
            break;
        }
    }

    let (_, _, estimate, _) = best.expect("at least one iteration ran");
    let ax_best = ens.forward(&estimate)?;
    let final_objective = estimate.nuclear_norm();
    let feasibility_gap = residual_gap(&ax_best, obs);
    let duality_gap = final_objective - dual_value(ens, &u, obs);
    Ok(SolverResult {
        estimate,
        iterations,
        final_objective,
        feasibility_gap,
        status,
        duality_gap,
        steps: (s, t),
    })
}
