//! Coherence parameters and measurement partitions for the Golfing scheme.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::operators::{BasisKind, LiftedSignal, MeasurementEnsemble, SubspaceBasis};

/// Frame-deviation target of an admissible partition.
pub const ADMISSIBLE_NU: f64 = 1.0 / 32.0;

/// Tolerance used when checking that channel vectors are unit norm.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// `mu_i^2 = max_l (L / K_i) ||b_{i,l}||^2`.
pub fn mu_max(basis: &SubspaceBasis, l: usize) -> f64 {
    let k = basis.dim() as f64;
    (0..basis.rows())
        .map(|row| basis.row_norm_sq(row))
        .fold(0.0, f64::max)
        * l as f64
        / k
}

/// `K_{i,mu} = K_i mu_i^2`.
pub fn k_mu_block(basis: &SubspaceBasis, l: usize) -> f64 {
    basis.dim() as f64 * mu_max(basis, l)
}

/// `K_mu = max_i K_{i,mu}`.
pub fn k_mu(ens: &MeasurementEnsemble) -> f64 {
    ens.blocks().iter().map(|b| k_mu_block(&b.basis, ens.l())).fold(0.0, f64::max)
}

/// `2 sqrt(omega max{1, r K_mu N / L} log2(L + r K N))`.
pub fn gamma_tilde(ens: &MeasurementEnsemble, omega: f64) -> f64 {
    gamma_tilde_from(ens.l(), ens.r(), k_mu(ens), ens.k_max(), ens.n_max(), omega)
}

pub fn gamma_tilde_from(l: usize, r: usize, k_mu: f64, k: usize, n: usize, omega: f64) -> f64 {
    let (lf, rf) = (l as f64, r as f64);
    let ratio = (rf * k_mu * n as f64 / lf).max(1.0);
    2.0 * (omega * ratio * (lf + rf * (k * n) as f64).log2()).sqrt()
}

/// Bounds `(lower, upper) = (log2(8 gamma sqrt(r)) / 2, log2(8 gamma sqrt(r)))`
/// on the number of partition sets.
pub fn partition_count_range(gamma_tilde: f64, r: usize) -> (f64, f64) {
    let upper = (8.0 * gamma_tilde * (r as f64).sqrt()).log2();
    (0.5 * upper, upper)
}

/// `clamp(ceil(log2(8 gamma sqrt(r)) / 2), 1, L)`.
pub fn select_partition_count(gamma_tilde: f64, r: usize, l: usize) -> usize {
    let (lower, _) = partition_count_range(gamma_tilde, r);
    (lower.ceil().max(1.0) as usize).min(l.max(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PartitionStrategy {
    /// Arithmetic progressions `{p, p + P, p + 2P, ...}`.
    Decimated,
    /// i.i.d. uniform assignment, optionally refined by greedy moves.
    Random { attempts: usize, refined: bool },
    /// Sets supplied by the caller.
    Explicit,
}

/// Partition `{Gamma_p}` of the measurement indices with the per-set frame
/// operators `T_{i,p} = (L/Q) sum_{l in Gamma_p} b_{i,l} b_{i,l}^*` and their
/// inverses `S_{i,p}`.
#[derive(Clone, Debug)]
pub struct Partition {
    pub sets: Vec<Vec<usize>>,
    pub q: f64,
    /// Indexed `[block][set]`.
    pub t_matrices: Vec<Vec<CMat>>,
    /// Indexed `[block][set]`.
    pub s_matrices: Vec<Vec<CMat>>,
    pub nu_achieved: f64,
    pub strategy: PartitionStrategy,
}

impl Partition {
    /// Builds the frame operators for caller-supplied sets.
    pub fn from_sets(ens: &MeasurementEnsemble, sets: Vec<Vec<usize>>) -> Result<Self> {
        Self::build(ens, sets, PartitionStrategy::Explicit)
    }

    fn build(ens: &MeasurementEnsemble, sets: Vec<Vec<usize>>, strategy: PartitionStrategy) -> Result<Self> {
        validate_cover(&sets, ens.l())?;
        let q = ens.l() as f64 / sets.len() as f64;
        let t_matrices = frame_operators(ens, &sets, q);
        let nu_achieved = max_deviation(&t_matrices);
        let mut s_matrices = Vec::with_capacity(t_matrices.len());
        for (i, ts) in t_matrices.iter().enumerate() {
            let mut row = Vec::with_capacity(ts.len());
            for (p, t) in ts.iter().enumerate() {
                let s = t.clone().try_inverse().ok_or(Error::PartitionDegenerate { block: i, set: p })?;
                if !linalg::is_finite(&s) {
                    return Err(Error::PartitionDegenerate { block: i, set: p });
                }
                row.push(s);
            }
            s_matrices.push(row);
        }
        Ok(Self { sets, q, t_matrices, s_matrices, nu_achieved, strategy })
    }

    /// `P`
    pub fn count(&self) -> usize {
        self.sets.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    pub fn sizes_balanced(&self) -> bool {
        sizes_balanced(&self.sizes(), self.q)
    }

    /// Set index of every measurement.
    pub fn assignment(&self, l: usize) -> Vec<usize> {
        let mut a = vec![0; l];
        for (p, set) in self.sets.iter().enumerate() {
            for &idx in set {
                a[idx] = p;
            }
        }
        a
    }

    /// `S^p(W) = (S_{1,p} W_1, ..., S_{r,p} W_r)`.
    pub fn apply_s(&self, p: usize, w: &LiftedSignal) -> LiftedSignal {
        LiftedSignal {
            blocks: w.blocks.iter().enumerate().map(|(i, wi)| &self.s_matrices[i][p] * wi).collect(),
        }
    }

    pub fn summary(&self) -> PartitionSummary {
        PartitionSummary {
            p: self.count(),
            q: self.q,
            sizes: self.sizes(),
            nu_achieved: self.nu_achieved,
            strategy: self.strategy,
            sets: self.sets.clone(),
        }
    }
}

/// Serializable view of a [`Partition`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub p: usize,
    pub q: f64,
    pub sizes: Vec<usize>,
    pub nu_achieved: f64,
    pub strategy: PartitionStrategy,
    pub sets: Vec<Vec<usize>>,
}

fn validate_cover(sets: &[Vec<usize>], l: usize) -> Result<()> {
    if sets.is_empty() {
        return Err(Error::Config("partition needs at least one set".into()));
    }
    let mut seen = vec![false; l];
    for set in sets {
        for &idx in set {
            if idx >= l {
                return Err(Error::IndexOutOfRange { index: idx, len: l });
            }
            if seen[idx] {
                return Err(Error::Config(format!("measurement {idx} appears in two sets")));
            }
            seen[idx] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Config(format!("measurement {missing} is not covered")));
    }
    Ok(())
}

fn sizes_balanced(sizes: &[usize], q: f64) -> bool {
    sizes.iter().all(|&s| (s as f64) >= 0.5 * q && (s as f64) <= 1.5 * q)
}

fn frame_operators(ens: &MeasurementEnsemble, sets: &[Vec<usize>], q: f64) -> Vec<Vec<CMat>> {
    let scale = ens.l() as f64 / q;
    ens.blocks()
        .iter()
        .map(|block| {
            let b = block.basis.entries();
            sets.iter()
                .map(|set| {
                    // sum_l b_l b_l^* = (rows of B restricted to set)^* (rows)
                    let rows = CMat::from_fn(set.len(), b.ncols(), |j, k| b[(set[j], k)]);
                    rows.ad_mul(&rows) * C64::from(scale)
                })
                .collect()
        })
        .collect()
}

fn max_deviation(t_matrices: &[Vec<CMat>]) -> f64 {
    t_matrices
        .iter()
        .flatten()
        .map(|t| linalg::hermitian_norm(&(CMat::identity(t.nrows(), t.ncols()) - t)))
        .fold(0.0, f64::max)
}

/// `{p, p + P, p + 2P, ...}` for `p = 0..P`.
pub fn decimated_sets(l: usize, p: usize) -> Vec<Vec<usize>> {
    (0..p).map(|start| (start..l).step_by(p).collect()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionOptions {
    /// Target bound on `max_{i,p} ||I - T_{i,p}||`.
    pub nu: f64,
    /// Use the decimated partition when every basis is a partial DFT,
    /// `P` divides `L`, and `max_i K_i <= L / P`.
    pub dft_shortcut: bool,
    pub max_attempts: usize,
    /// Greedy single-index moves after each random assignment.
    pub refine: bool,
    /// Upper bound on refinement sweeps per attempt.
    pub max_refine_sweeps: usize,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self { nu: ADMISSIBLE_NU, dft_shortcut: true, max_attempts: 50, refine: true, max_refine_sweeps: 50 }
    }
}

/// Partition of `[L]` into `p` sets with `nu_achieved <= opts.nu` and
/// `Q/2 <= |Gamma_p| <= 3Q/2`.
pub fn construct_partition<R: Rng + ?Sized>(
    ens: &MeasurementEnsemble,
    p: usize,
    opts: &PartitionOptions,
    rng: &mut R,
) -> Result<Partition> {
    let l = ens.l();
    if p < 1 || p > l {
        return Err(Error::Config(format!("partition count must satisfy 1 <= P <= L, got P={p}, L={l}")));
    }
    if !(opts.nu > 0.0 && opts.nu < 1.0) {
        return Err(Error::Config(format!("nu must lie in (0, 1), got {}", opts.nu)));
    }
    let q = l as f64 / p as f64;

    if opts.dft_shortcut
        && l % p == 0
        && ens.k_max() as f64 <= q
        && ens.blocks().iter().all(|b| b.basis.kind() == BasisKind::PartialDft)
    {
        return Partition::build(ens, decimated_sets(l, p), PartitionStrategy::Decimated);
    }

    let mut best_nu = f64::INFINITY;
    for attempt in 1..=opts.max_attempts {
        let mut assignment: Vec<usize> = (0..l).map(|_| rng.random_range(0..p)).collect();
        if opts.refine && p > 1 {
            refine_assignment(ens, &mut assignment, p, q, opts.max_refine_sweeps, rng);
        }
        let sets = sets_from_assignment(&assignment, p);
        let sizes: Vec<usize> = sets.iter().map(Vec::len).collect();
        let t = frame_operators(ens, &sets, q);
        let nu = max_deviation(&t);
        best_nu = best_nu.min(nu);
        if nu <= opts.nu && sizes_balanced(&sizes, q) {
            let strategy = PartitionStrategy::Random { attempts: attempt, refined: opts.refine };
            return Partition::build(ens, sets, strategy);
        }
    }
    Err(Error::PartitionConstruction { attempts: opts.max_attempts, best_nu })
}

fn sets_from_assignment(assignment: &[usize], p: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); p];
    for (idx, &s) in assignment.iter().enumerate() {
        sets[s].push(idx);
    }
    sets
}

/// Greedy descent on `sum_{i,p} ||T_{i,p} - I||_F^2` by moving one index at a
/// time to the set that lowers it most, keeping every set size within
/// `[Q/2, 3Q/2]`.
fn refine_assignment<R: Rng + ?Sized>(
    ens: &MeasurementEnsemble,
    assignment: &mut [usize],
    p: usize,
    q: f64,
    max_sweeps: usize,
    rng: &mut R,
) {
    let l = ens.l();
    let scale = l as f64 / q;
    let rows: Vec<Vec<CVec>> = ens
        .blocks()
        .iter()
        .map(|blk| (0..l).map(|idx| blk.basis.row_vector(idx)).collect())
        .collect();
    // deviation D_{i,p} = T_{i,p} - I
    let mut dev: Vec<Vec<CMat>> = ens
        .blocks()
        .iter()
        .map(|blk| (0..p).map(|_| -CMat::identity(blk.basis.dim(), blk.basis.dim())).collect())
        .collect();
    let mut sizes = vec![0usize; p];
    for (idx, &s) in assignment.iter().enumerate() {
        sizes[s] += 1;
        for (i, blk_rows) in rows.iter().enumerate() {
            let b = &blk_rows[idx];
            dev[i][s] += b * b.adjoint() * C64::from(scale);
        }
    }
    let (min_size, max_size) = ((0.5 * q).ceil() as usize, (1.5 * q).floor() as usize);
    let mut order: Vec<usize> = (0..l).collect();
    for _ in 0..max_sweeps {
        order.shuffle(rng);
        let mut moved = 0;
        for &idx in &order {
            let from = assignment[idx];
            if sizes[from] <= min_size {
                continue;
            }
            // quadratic forms b^* D b for each block and set
            let forms: Vec<Vec<f64>> = rows
                .iter()
                .zip(&dev)
                .map(|(blk_rows, d)| {
                    let b = &blk_rows[idx];
                    d.iter().map(|dp| (b.adjoint() * dp * b)[0].re).collect()
                })
                .collect();
            let self_term: f64 = rows.iter().map(|blk_rows| linalg::vnorm_sq(&blk_rows[idx]).powi(2)).sum();
            let mut best = (None, -1e-14);
            for to in 0..p {
                if to == from || sizes[to] >= max_size {
                    continue;
                }
                let delta: f64 = forms.iter().map(|f| 2.0 * scale * (f[to] - f[from])).sum::<f64>()
                    + 2.0 * scale * scale * self_term;
                if delta < best.1 {
                    best = (Some(to), delta);
                }
            }
            if let (Some(to), _) = best {
                for (i, blk_rows) in rows.iter().enumerate() {
                    let b = &blk_rows[idx];
                    let outer = b * b.adjoint() * C64::from(scale);
                    dev[i][from] -= &outer;
                    dev[i][to] += &outer;
                }
                sizes[from] -= 1;
                sizes[to] += 1;
                assignment[idx] = to;
                moved += 1;
            }
        }
        if moved == 0 {
            break;
        }
    }
}

/// Picks `P` from the admissible range and builds a partition, retrying with
/// `P + 1` and `P + 2` if construction fails.
pub fn construct_admissible_partition<R: Rng + ?Sized>(
    ens: &MeasurementEnsemble,
    omega: f64,
    opts: &PartitionOptions,
    rng: &mut R,
) -> Result<Partition> {
    let base = select_partition_count(gamma_tilde(ens, omega), ens.r(), ens.l());
    let mut last_err = None;
    for p in base..=(base + 2).min(ens.l()) {
        match construct_partition(ens, p, opts, rng) {
            Ok(part) => return Ok(part),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(Error::Config("no admissible partition count".into())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub size_ok: bool,
    pub nu_ok: bool,
    pub p_range_ok: bool,
    pub gamma_tilde: f64,
    pub p: usize,
    pub p_lower: f64,
    pub p_upper: f64,
    pub nu_achieved: f64,
    /// Human-readable reasons for each failed condition.
    pub failures: Vec<String>,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.size_ok && self.nu_ok && self.p_range_ok
    }
}

/// Checks the three admissibility conditions (balanced sizes, frame deviation
/// at most 1/32, `P` in the range set by `gamma_tilde`).
pub fn verify_admissible(partition: &Partition, ens: &MeasurementEnsemble, omega: f64) -> Result<AdmissibilityReport> {
    if !(omega >= 1.0) {
        return Err(Error::Config(format!("omega must be >= 1, got {omega}")));
    }
    let gt = gamma_tilde(ens, omega);
    let (p_lower, p_upper) = partition_count_range(gt, ens.r());
    let p = partition.count();
    let size_ok = partition.sizes_balanced();
    let nu_ok = partition.nu_achieved <= ADMISSIBLE_NU;
    let pf = p as f64;
    let p_range_ok = pf >= p_lower && pf <= p_upper;
    let mut failures = Vec::new();
    if !size_ok {
        failures.push(format!("set sizes {:?} outside [{:.2}, {:.2}]", partition.sizes(), 0.5 * partition.q, 1.5 * partition.q));
    }
    if !nu_ok {
        failures.push(format!("nu = {:.4e} exceeds 1/32", partition.nu_achieved));
    }
    if pf < p_lower {
        failures.push(format!("P = {p} below lower bound {p_lower:.3}"));
    }
    if pf > p_upper {
        failures.push(format!("P = {p} above upper bound {p_upper:.3}"));
    }
    Ok(AdmissibilityReport {
        size_ok,
        nu_ok,
        p_range_ok,
        gamma_tilde: gt,
        p,
        p_lower,
        p_upper,
        nu_achieved: partition.nu_achieved,
        failures,
    })
}

/// Both inner maxima of `mu_h^2` are kept so the corrected term can be
/// studied on its own.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuH {
    pub mu_h_sq: f64,
    /// `L max_{l,i} |b_{i,l}^* h_i|^2`
    pub direct_term: f64,
    /// `L max_{p,l,i} |b_{i,l}^* S_{i,p} h_i|^2`
    pub corrected_term: f64,
}

pub fn mu_h_sq(partition: &Partition, ens: &MeasurementEnsemble, channels: &[CVec]) -> Result<MuH> {
    if channels.len() != ens.r() {
        return Err(Error::dim("one channel vector per block required"));
    }
    for (i, (h, (k, _))) in channels.iter().zip(ens.dims()).enumerate() {
        if h.len() != k {
            return Err(Error::dim(format!("channel {i} has length {}, expected {k}", h.len())));
        }
        let norm = linalg::vnorm_sq(h).sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Normalization { block: i, norm });
        }
    }
    let l = ens.l();
    let mut direct: f64 = 0.0;
    let mut corrected: f64 = 0.0;
    for (i, (block, h)) in ens.blocks().iter().zip(channels).enumerate() {
        let b = block.basis.entries();
        // row l of B is b_l^*, so (B v)[l] = b_l^* v
        direct = direct.max((b * h).iter().map(|z| z.norm_sqr()).fold(0.0, f64::max));
        for s in &partition.s_matrices[i] {
            let sh = s * h;
            corrected = corrected.max((b * sh).iter().map(|z| z.norm_sqr()).fold(0.0, f64::max));
        }
    }
    let (direct_term, corrected_term) = (l as f64 * direct, l as f64 * corrected);
    Ok(MuH { mu_h_sq: direct_term.max(corrected_term), direct_term, corrected_term })
}

/// `||Z||_B = sqrt(L max_l sum_i ||Z_i^* b_{i,l}||^2)`.
pub fn b_norm(x: &LiftedSignal, ens: &MeasurementEnsemble) -> Result<f64> {
    ens.check_signal(x)?;
    let mut acc = vec![0.0; ens.l()];
    for (block, xi) in ens.blocks().iter().zip(&x.blocks) {
        // row l of B X_i is (X_i^* b_l)^*
        let bx = block.basis.entries() * xi;
        for (l, a) in acc.iter_mut().enumerate() {
            *a += bx.row(l).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    Ok((ens.l() as f64 * acc.into_iter().fold(0.0, f64::max)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mu_sq_per_block: Vec<f64>,
    pub k_mu_per_block: Vec<f64>,
    pub k_mu: f64,
    pub mu_h_sq: Option<f64>,
    pub mu_h_direct_term: Option<f64>,
    pub mu_h_corrected_term: Option<f64>,
    pub gamma_tilde: f64,
    pub gamma_estimate: f64,
}

/// Collects the coherence quantities of an ensemble. `mu_h` fields are filled
/// when a partition and unit channels are supplied.
pub fn coherence_report(
    ens: &MeasurementEnsemble,
    partition: Option<(&Partition, &[CVec])>,
    omega: f64,
    gamma_estimate: f64,
) -> Result<CoherenceReport> {
    let l = ens.l();
    let mu_sq_per_block: Vec<f64> = ens.blocks().iter().map(|b| mu_max(&b.basis, l)).collect();
    let k_mu_per_block: Vec<f64> = ens
        .blocks()
        .iter()
        .zip(&mu_sq_per_block)
        .map(|(b, mu)| b.basis.dim() as f64 * mu)
        .collect();
    let k_mu = k_mu_per_block.iter().copied().fold(0.0, f64::max);
    let muh = match partition {
        Some((part, channels)) => Some(mu_h_sq(part, ens, channels)?),
        None => None,
    };
    Ok(CoherenceReport {
        mu_sq_per_block,
        k_mu_per_block,
        k_mu,
        mu_h_sq: muh.map(|m| m.mu_h_sq),
        mu_h_direct_term: muh.map(|m| m.direct_term),
        mu_h_corrected_term: muh.map(|m| m.corrected_term),
        gamma_tilde: gamma_tilde(ens, omega),
        gamma_estimate,
    })
}
