//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Above this size operator norms of Hermitian matrices switch to power iteration.
pub const DENSE_EIG_LIMIT: usize = 64;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Frobenius inner product `sum a_k conj(b_k)`, linear in the first argument.
pub fn inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// Euclidean inner product `sum a_k conj(b_k)`.
pub fn vinner(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn vnorm_sq(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Thin SVD with singular values sorted in decreasing order.
///
/// Returns `(U, s, V)` with `M = U diag(s) V*`.
pub fn svd_sorted(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return (CMat::zeros(rows, 0), Vec::new(), CMat::zeros(cols, 0));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = order.iter().map(|&j| svd.singular_values[j]).collect();
    let u_sorted = CMat::from_fn(rows, k, |r, j| u[(r, order[j])]);
    let v_sorted = CMat::from_fn(cols, k, |r, j| v_t[(order[j], r)].conj());
    (u_sorted, s, v_sorted)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m)[0]
}

pub fn nuclear_norm(m: &CMat) -> f64 {
    singular_values(m).iter().sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vecs = CMat::from_fn(n, n, |r, j| eig.eigenvectors[(r, order[j])]);
    (vals, vecs)
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut vals: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// `(M + M*) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Operator norm of a Hermitian matrix: dense eigenvalues for small sizes,
/// power iteration on `M^2` otherwise.
pub fn hermitian_norm(m: &CMat) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    if n <= DENSE_EIG_LIMIT {
        let vals = hermitian_eigenvalues(m);
        return vals[0].abs().max(vals[n - 1].abs());
    }
    let h = hermitize(m);
    // deterministic start with all directions present
    let mut v = CVec::from_fn(n, |i, _| c(1.0 + 0.1 * i as f64, 0.3 - 0.01 * i as f64));
    v /= C64::from(vnorm_sq(&v).sqrt());
    let mut est = 0.0;
    for _ in 0..1000 {
        let w = &h * (&h * &v);
        let nw = vnorm_sq(&w).sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w / C64::from(nw);
        if (next - est).abs() <= 1e-14 * next {
            est = next;
            break;
        }
        est = next;
    }
    est
}

/// Square root of a Hermitian positive semidefinite matrix.
pub fn hermitian_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eig(m);
    let d = CMat::from_diagonal(&CVec::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::from(l.max(0.0).sqrt())),
    ));
    &vecs * d * vecs.adjoint()
}

/// Modified Gram-Schmidt with re-orthogonalization. Vectors whose residual
/// norm falls below `tol` (relative to their original norm) are dropped.
pub fn gram_schmidt(vectors: &[CVec], tol: f64) -> Vec<CVec> {
    let mut basis: Vec<CVec> = Vec::new();
    for v in vectors {
        let scale = vnorm_sq(v).sqrt();
        if scale == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = vinner(&w, q);
                w -= q * proj;
            }
        }
        let nw = vnorm_sq(&w).sqrt();
        if nw > tol * scale {
            basis.push(w / C64::from(nw));
        }
    }
    basis
}

/// Rotate `v` by a unit phase so that its largest-magnitude entry is real
/// and nonnegative. Returns the applied phase.
pub fn canonical_phase(v: &CVec) -> C64 {
    let mut best = C64::new(0.0, 0.0);
    for z in v.iter() {
        if z.norm() > best.norm() {
            best = *z;
        }
    }
    if best.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        best.conj() / best.norm()
    }
}
