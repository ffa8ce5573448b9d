//! Dual-certificate machinery at executable scale.
//!
//! For a rank-one ground truth `X_i = sigma_i h_i m_i^*` with unit `h_i, m_i`
//! the tangent space is `T_i = {h_i u^* + v m_i^*}`. The Golfing scheme builds
//! `Y = A^*(z)` with `P_T Y` close to `sgn(X)` and `P_{T^perp} Y` small in
//! operator norm. This module runs that construction, measures how close it
//! comes, and computes the restricted Gram spectra that control it.

use serde::{Deserialize, Serialize};

use crate::coherence::Partition;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::operators::{FactoredSignal, LiftedSignal, MeasurementEnsemble};

/// Rank tolerance used when orthonormalizing spanning sets.
pub const RANK_TOL: f64 = 1e-10;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// `h_i m_i^*` for blocks with `||h_i|| ||x_i|| > 0`, zero otherwise.
pub fn sgn_lifted(truth: &FactoredSignal) -> LiftedSignal {
    LiftedSignal {
        blocks: truth
            .channels
            .iter()
            .zip(&truth.messages)
            .map(|(h, x)| {
                let (nh, nx) = (linalg::vnorm_sq(h).sqrt(), linalg::vnorm_sq(x).sqrt());
                if nh * nx > 0.0 {
                    (h / C64::from(nh)) * (x / C64::from(nx)).adjoint()
                } else {
                    CMat::zeros(h.len(), x.len())
                }
            })
            .collect(),
    }
}

/// Unit channels and messages with orthonormal bases of each `T_i` and,
/// when built against a partition, of each `T^p_i = T_i + S_{i,p} T_i`.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub channels: Vec<CVec>,
    pub messages: Vec<CVec>,
    /// `bases[i]` is a Frobenius-orthonormal basis of `T_i`.
    pub bases: Vec<Vec<CMat>>,
    /// `set_bases[p][i]` spans `T^p_i`.
    pub set_bases: Option<Vec<Vec<Vec<CMat>>>>,
}

fn unit_matrix(k: usize, n: usize, row: usize, col: usize) -> CMat {
    let mut m = CMat::zeros(k, n);
    m[(row, col)] = C64::new(1.0, 0.0);
    m
}

fn orthonormalize(spanning: &[CMat]) -> Vec<CMat> {
    let Some(first) = spanning.first() else { return Vec::new() };
    let (k, n) = first.shape();
    let flat: Vec<CVec> = spanning.iter().map(|m| CVec::from_column_slice(m.as_slice())).collect();
    linalg::gram_schmidt(&flat, RANK_TOL)
        .into_iter()
        .map(|v| CMat::from_column_slice(k, n, v.as_slice()))
        .collect()
}

/// `{h e_n^*} u {e_k m^*}`
fn tangent_spanning_set(h: &CVec, m: &CVec) -> Vec<CMat> {
    let (k, n) = (h.len(), m.len());
    let mut span: Vec<CMat> = (0..n).map(|col| h * unit_matrix(1, n, 0, col)).collect();
    span.extend((0..k).map(|row| unit_matrix(k, 1, row, 0) * m.adjoint()));
    span
}

impl TangentFrame {
    /// Frame of the normalized ground truth. Every block needs a nonzero
    /// channel and message.
    pub fn new(truth: &FactoredSignal) -> Result<Self> {
        let mut channels = Vec::with_capacity(truth.r());
        let mut messages = Vec::with_capacity(truth.r());
        for (i, (h, x)) in truth.channels.iter().zip(&truth.messages).enumerate() {
            let (nh, nx) = (linalg::vnorm_sq(h).sqrt(), linalg::vnorm_sq(x).sqrt());
            if nh == 0.0 || nx == 0.0 || !nh.is_finite() || !nx.is_finite() {
                return Err(Error::Frame(format!("block {i} has a zero or non-finite factor")));
            }
            channels.push(h / C64::from(nh));
            messages.push(x / C64::from(nx));
        }
        let bases = channels.iter().zip(&messages).map(|(h, m)| orthonormalize(&tangent_spanning_set(h, m))).collect();
        Ok(Self { channels, messages, bases, set_bases: None })
    }

    /// Adds bases of `T^p` for every set of `partition`.
    pub fn with_partition(mut self, partition: &Partition) -> Result<Self> {
        if partition.s_matrices.len() != self.r() {
            return Err(Error::dim("partition block count does not match the frame"));
        }
        let mut set_bases = Vec::with_capacity(partition.count());
        for p in 0..partition.count() {
            let mut per_block = Vec::with_capacity(self.r());
            for (i, (h, m)) in self.channels.iter().zip(&self.messages).enumerate() {
                let s = &partition.s_matrices[i][p];
                if s.nrows() != h.len() {
                    return Err(Error::dim(format!("S_{{{i},{p}}} does not match channel length")));
                }
                let mut span = tangent_spanning_set(h, m);
                let sh = s * h;
                span.extend((0..m.len()).map(|col| &sh * unit_matrix(1, m.len(), 0, col)));
                per_block.push(orthonormalize(&span));
            }
            set_bases.push(per_block);
        }
        self.set_bases = Some(set_bases);
        Ok(self)
    }

    pub fn r(&self) -> usize {
        self.channels.len()
    }

    /// `sum_i dim T_i`
    pub fn dim(&self) -> usize {
        self.bases.iter().map(Vec::len).sum()
    }

    /// `h h^* Z + (I - h h^*) Z m m^*`
    pub fn project_block(&self, i: usize, z: &CMat) -> CMat {
        let (h, m) = (&self.channels[i], &self.messages[i]);
        let hz = h * (h.adjoint() * z);
        let zm = (z - &hz) * m * m.adjoint();
        hz + zm
    }

    /// `(I - h h^*) Z (I - m m^*)`
    pub fn project_block_perp(&self, i: usize, z: &CMat) -> CMat {
        z - self.project_block(i, z)
    }

    /// Largest deviation of any block basis from Frobenius orthonormality.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut check = |basis: &[CMat]| {
            for (a, ea) in basis.iter().enumerate() {
                for (b, eb) in basis.iter().enumerate() {
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((linalg::inner(ea, eb) - C64::from(target)).norm());
                }
            }
        };
        for basis in &self.bases {
            check(basis);
        }
        if let Some(sets) = &self.set_bases {
            for basis in sets.iter().flatten() {
                check(basis);
            }
        }
        worst
    }
}

/// Block-wise `P_{T_i}`.
pub fn project_tangent(frame: &TangentFrame, x: &LiftedSignal) -> Result<LiftedSignal> {
    if x.r() != frame.r() {
        return Err(Error::dim("signal block count does not match the frame"));
    }
    for (i, (xi, (h, m))) in x.blocks.iter().zip(frame.channels.iter().zip(&frame.messages)).enumerate() {
        if xi.shape() != (h.len(), m.len()) {
            return Err(Error::dim(format!("block {i} has shape {:?}, expected ({}, {})", xi.shape(), h.len(), m.len())));
        }
    }
    Ok(LiftedSignal { blocks: x.blocks.iter().enumerate().map(|(i, xi)| frame.project_block(i, xi)).collect() })
}

/// Record of one Golfing-scheme run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GolfingTrace {
    /// `||W_p||_F` for `p = 0..=P`.
    pub w_norms: Vec<f64>,
    /// `mu_p` for `p = 0..P`.
    pub mu_seq: Vec<f64>,
    /// `Y = Y_P`
    pub certificate: LiftedSignal,
    /// `z` with `Y = A^*(z)`.
    #[serde(with = "crate::serial::cvec")]
    pub dual_vector: CVec,
    /// `||P_T Y - sgn(X)||_F`
    pub alpha_achieved: f64,
    /// `max_i ||P_{T_i^perp} Y_i||`
    pub beta_achieved: f64,
    pub z_norm: f64,
    /// `||A^*(z) - Y||_F`
    pub consistency_error: f64,
    /// Largest violation of `W_p = W_{p-1} - (L/Q) P_T A^* A^p S^p W_{p-1}`.
    pub recursion_error: f64,
}

/// Runs `Y_p = Y_{p-1} + (L/Q) A^* A^p S^p (W_{p-1})` with
/// `W_p = sgn(X) - P_T(Y_p)` over the sets of `partition`, in order.
///
/// The channels of `truth` are normalized internally.
/// `z = (L/Q) sum_p A^p S^p (W_{p-1})`, which makes `A^*(z) = Y` exact.
pub fn golfing_run(ens: &MeasurementEnsemble, truth: &FactoredSignal, partition: &Partition) -> Result<GolfingTrace> {
    ens.check_factored(truth)?;
    if partition.s_matrices.len() != ens.r() || partition.sets.iter().map(Vec::len).sum::<usize>() != ens.l() {
        return Err(Error::dim("partition was not built for this ensemble"));
    }
    let frame = TangentFrame::new(truth)?;
    let sgn = sgn_lifted(truth);
    let l = ens.l();
    let scale = C64::from(l as f64 / partition.q);

    let mut y = ens.zeros();
    let mut w = sgn.clone();
    let mut z = CVec::zeros(l);
    let mut w_norms = vec![w.norm()];
    let mut mu_seq = Vec::with_capacity(partition.count());
    let mut recursion_error: f64 = 0.0;

    for (p, set) in partition.sets.iter().enumerate() {
        mu_seq.push(mu_term(ens, partition, &w, p));
        let corrected = partition.apply_s(p, &w);
        let v = ens.restricted_forward(set, &corrected)? * scale;
        let update = ens.adjoint(&v)?;
        y = &y + &update;
        z += &v;
        let w_next = &sgn - &project_tangent(&frame, &y)?;
        let predicted = &w - &project_tangent(&frame, &update)?;
        recursion_error = recursion_error.max((&w_next - &predicted).norm());
        if !w_next.is_finite() {
            return Err(Error::Numeric { iteration: p + 1, reason: "golfing iterate is not finite".into() });
        }
        w = w_next;
        w_norms.push(w.norm());
    }

    let alpha_achieved = (&project_tangent(&frame, &y)? - &sgn).norm();
    let beta_achieved = y
        .blocks
        .iter()
        .enumerate()
        .map(|(i, yi)| linalg::spectral_norm(&frame.project_block_perp(i, yi)))
        .fold(0.0, f64::max);
    let consistency_error = (&ens.adjoint(&z)? - &y).norm();
    let z_norm = linalg::vnorm_sq(&z).sqrt();
    Ok(GolfingTrace {
        w_norms,
        mu_seq,
        certificate: y,
        dual_vector: z,
        alpha_achieved,
        beta_achieved,
        z_norm,
        consistency_error,
        recursion_error,
    })
}

/// `sqrt(L) max_{l in Gamma_p, k} ||W_k^* S_{k,p} b_{k,l}||`
fn mu_term(ens: &MeasurementEnsemble, partition: &Partition, w: &LiftedSignal, p: usize) -> f64 {
    let mut best: f64 = 0.0;
    for (k, (block, wk)) in ens.blocks().iter().zip(&w.blocks).enumerate() {
        // rows of B S^* W give (W^* S b_l)^* for each l
        let m = block.basis.entries() * partition.s_matrices[k][p].adjoint() * wk;
        for &l in &partition.sets[p] {
            best = best.max(m.row(l).iter().map(|z| z.norm_sqr()).sum::<f64>());
        }
    }
    (ens.l() as f64).sqrt() * best.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub cond1_ok: bool,
    pub cond2_ok: bool,
    /// `1 / (8 gamma)`
    pub alpha_bound: f64,
    pub beta_bound: f64,
    /// `alpha_bound - alpha_achieved`
    pub alpha_margin: f64,
    /// `beta_bound - beta_achieved`
    pub beta_margin: f64,
}

/// Compares a trace with `alpha = 1/(8 gamma)` and `beta = 1/4`.
pub fn verify_dual_conditions(trace: &GolfingTrace, gamma: f64) -> Result<DualReport> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let alpha_bound = 1.0 / (8.0 * gamma);
    let beta_bound = 0.25;
    Ok(DualReport {
        cond1_ok: trace.alpha_achieved <= alpha_bound,
        cond2_ok: trace.beta_achieved <= beta_bound,
        alpha_bound,
        beta_bound,
        alpha_margin: alpha_bound - trace.alpha_achieved,
        beta_margin: beta_bound - trace.beta_achieved,
    })
}

/// Extreme eigenvalues of a restricted Gram matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub min_eig: f64,
    pub max_eig: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometrySpectrum {
    pub min_eig: f64,
    pub max_eig: f64,
    pub dim: usize,
    /// Spectrum of `(L/Q) ||A^p(Y)||^2` against `sum_i ||T_{i,p}^{1/2} Y_i||_F^2` on `T^p`.
    pub per_set: Option<Vec<Spectrum>>,
}

fn embedded(bases: &[Vec<CMat>]) -> Vec<(usize, CMat)> {
    bases.iter().enumerate().flat_map(|(i, b)| b.iter().map(move |e| (i, e.clone()))).collect()
}

/// Gram matrix `<A(E_a), A(E_b)>` over the frame basis of `T`, and per-set
/// weighted spectra on `T^p` when a partition is supplied.
pub fn local_isometry_spectrum(
    ens: &MeasurementEnsemble,
    frame: &TangentFrame,
    partition: Option<&Partition>,
) -> Result<IsometrySpectrum> {
    if frame.r() != ens.r() {
        return Err(Error::dim("frame block count does not match the ensemble"));
    }
    let defect = frame.orthonormality_defect();
    if defect > ORTHONORMAL_TOL {
        return Err(Error::Frame(format!("basis is not orthonormal (defect {defect:.3e})")));
    }
    let elems = embedded(&frame.bases);
    let images: Vec<CVec> = elems.iter().map(|(i, e)| ens.forward_block(*i, e)).collect::<Result<_>>()?;
    let gram = CMat::from_fn(images.len(), images.len(), |a, b| linalg::vinner(&images[b], &images[a]));
    let vals = linalg::hermitian_eigenvalues(&gram);

    let per_set = match partition {
        None => None,
        Some(part) => {
            let sets = frame
                .set_bases
                .as_ref()
                .ok_or_else(|| Error::Frame("frame has no per-set bases; build it with the partition".into()))?;
            if sets.len() != part.count() {
                return Err(Error::Frame("per-set bases do not match the partition".into()));
            }
            let scale = ens.l() as f64 / part.q;
            let mut spectra = Vec::with_capacity(part.count());
            for (p, bases) in sets.iter().enumerate() {
                let elems = embedded(bases);
                let images: Vec<CVec> = elems
                    .iter()
                    .map(|(i, e)| {
                        let full = ens.forward_block(*i, e)?;
                        let mut out = CVec::zeros(ens.l());
                        for &l in &part.sets[p] {
                            out[l] = full[l];
                        }
                        Ok(out)
                    })
                    .collect::<Result<_>>()?;
                let d = elems.len();
                let g = CMat::from_fn(d, d, |a, b| linalg::vinner(&images[b], &images[a]) * scale);
                // <E_a, T E_b> vanishes across blocks
                let m = CMat::from_fn(d, d, |a, b| {
                    let ((ia, ea), (ib, eb)) = (&elems[a], &elems[b]);
                    if ia == ib {
                        linalg::inner(&(&part.t_matrices[*ib][p] * eb), ea)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                let (mvals, mvecs) = linalg::hermitian_eig(&m);
                if mvals.first().is_some_and(|&v| v <= 0.0) {
                    return Err(Error::PartitionDegenerate { block: 0, set: p });
                }
                let inv_sqrt = &mvecs
                    * CMat::from_diagonal(&CVec::from_iterator(d, mvals.iter().map(|&v| C64::from(1.0 / v.sqrt()))))
                    * mvecs.adjoint();
                let whitened = &inv_sqrt * g * &inv_sqrt;
                let ev = linalg::hermitian_eigenvalues(&whitened);
                spectra.push(Spectrum { min_eig: ev[0], max_eig: ev[d - 1] });
            }
            Some(spectra)
        }
    };

    Ok(IsometrySpectrum { min_eig: vals[0], max_eig: vals[vals.len() - 1], dim: vals.len(), per_set })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::{construct_partition, PartitionOptions};
    use crate::linalg::c;
    use crate::operators::{BasisChoice, Block, Encoder, SubspaceBasis};
    use crate::rng::{complex_normal_mat, complex_normal_vec, stream};

    fn truth(dims: &[(usize, usize)], seed: u64) -> FactoredSignal {
        FactoredSignal::sample(dims, &mut stream(seed))
    }

    #[test]
    fn sgn_cases() {
        let mut t = truth(&[(3, 2), (2, 4), (4, 4)], 1);
        let s = sgn_lifted(&t);
        assert!((s.norm() - 3f64.sqrt()).abs() < 1e-12);
        let x0 = t.lift();
        for (si, xi) in s.blocks.iter().zip(&x0.blocks) {
            assert!((linalg::inner(xi, si).re - linalg::nuclear_norm(xi)).abs() < 1e-10);
        }
        t.messages[1] = CVec::zeros(4);
        let s = sgn_lifted(&t);
        assert_eq!(linalg::norm_sq(&s.blocks[1]), 0.0);
        assert!(TangentFrame::new(&t).is_err());
    }

    #[test]
    fn frame_dimensions_and_orthonormality() {
        let dims = [(3, 5), (4, 4)];
        let frame = TangentFrame::new(&truth(&dims, 2)).unwrap();
        assert_eq!(frame.dim(), (3 + 5 - 1) + (4 + 4 - 1));
        assert!(frame.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn closed_form_projection_matches_basis_projection() {
        let dims = [(3, 4), (2, 2)];
        let frame = TangentFrame::new(&truth(&dims, 3)).unwrap();
        let mut rng = stream(4);
        for (i, &(k, n)) in dims.iter().enumerate() {
            let z = complex_normal_mat(&mut rng, k, n);
            let mut via_basis = CMat::zeros(k, n);
            for e in &frame.bases[i] {
                via_basis += e * linalg::inner(&z, e);
            }
            assert!(linalg::norm_sq(&(via_basis - frame.project_block(i, &z))).sqrt() < 1e-10);
        }
    }

    #[test]
    fn projection_properties() {
        let dims = [(3, 4), (2, 3)];
        let t = truth(&dims, 5);
        let frame = TangentFrame::new(&t).unwrap();
        let mut rng = stream(6);
        let x = LiftedSignal { blocks: dims.iter().map(|&(k, n)| complex_normal_mat(&mut rng, k, n)).collect() };
        let px = project_tangent(&frame, &x).unwrap();
        let ppx = project_tangent(&frame, &px).unwrap();
        assert!((&ppx - &px).norm() < 1e-10);
        assert!((&x - &px).inner(&px).norm() < 1e-10);

        // an element of T is fixed
        let in_t = LiftedSignal {
            blocks: frame.bases.iter().map(|b| &b[0] * c(0.5, -1.0) + &b[b.len() - 1] * c(2.0, 0.0)).collect(),
        };
        assert!((&project_tangent(&frame, &in_t).unwrap() - &in_t).norm() < 1e-12);

        // g q^* with g orthogonal to h and q orthogonal to m is annihilated
        let (h, m) = (&frame.channels[0], &frame.messages[0]);
        let g0 = complex_normal_vec(&mut rng, 3);
        let g = &g0 - h * h.dotc(&g0);
        let q0 = complex_normal_vec(&mut rng, 4);
        let q = &q0 - m * m.dotc(&q0);
        assert!(linalg::norm_sq(&frame.project_block(0, &(&g * q.adjoint()))).sqrt() < 1e-12);
    }

    #[test]
    fn golfing_identities() {
        let mut rng = stream(7);
        let ens = MeasurementEnsemble::sample(256, &[(4, 4), (4, 4)], BasisChoice::PartialDft, &mut rng).unwrap();
        let t = FactoredSignal::sample(&ens.dims(), &mut rng);
        let part = construct_partition(&ens, 4, &PartitionOptions::default(), &mut rng).unwrap();
        let trace = golfing_run(&ens, &t, &part).unwrap();
        assert_eq!(trace.w_norms.len(), 5);
        assert_eq!(trace.mu_seq.len(), 4);
        assert!((trace.w_norms[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!(trace.consistency_error < 1e-10);
        assert!(trace.recursion_error < 1e-10);
        assert!((trace.alpha_achieved - trace.w_norms[4]).abs() < 1e-10);
        let json = serde_json::to_value(&trace).unwrap();
        for key in ["w_norms", "mu_seq", "alpha_achieved", "beta_achieved", "z_norm"] {
            assert!(json.get(key).is_some());
        }
    }

    #[test]
    fn golfing_with_random_partition() {
        let mut rng = stream(8);
        let ens = MeasurementEnsemble::sample(512, &[(3, 2), (2, 3)], BasisChoice::RandomOrthonormal, &mut rng).unwrap();
        let t = FactoredSignal::sample(&ens.dims(), &mut rng);
        let opts = PartitionOptions { dft_shortcut: false, ..Default::default() };
        let part = construct_partition(&ens, 2, &opts, &mut rng).unwrap();
        let trace = golfing_run(&ens, &t, &part).unwrap();
        assert!(trace.consistency_error < 1e-10);
        assert!(trace.recursion_error < 1e-10);
    }

    #[test]
    fn single_set_golfing_is_unbiased() {
        let (l, k, n) = (16, 2, 2);
        let basis = SubspaceBasis::partial_dft(l, k).unwrap();
        let t = truth(&[(k, n)], 9);
        let sgn = sgn_lifted(&t);
        let mut rng = stream(10);
        let mut mean = CMat::zeros(k, n);
        let draws = 1000;
        for _ in 0..draws {
            let encoder = Encoder::sample(l, n, &mut rng).unwrap();
            let ens = MeasurementEnsemble::new(vec![Block { basis: basis.clone(), encoder }]).unwrap();
            let part = Partition::from_sets(&ens, vec![(0..l).collect()]).unwrap();
            let trace = golfing_run(&ens, &t, &part).unwrap();
            mean += &trace.certificate.blocks[0];
        }
        mean /= C64::from(draws as f64);
        let rel = linalg::norm_sq(&(mean - &sgn.blocks[0])).sqrt() / sgn.norm();
        assert!(rel <= 0.1, "{rel}");
    }

    fn synthetic_trace(y: LiftedSignal, sgn: &LiftedSignal, frame: &TangentFrame) -> GolfingTrace {
        let alpha = (&project_tangent(frame, &y).unwrap() - sgn).norm();
        let beta = y
            .blocks
            .iter()
            .enumerate()
            .map(|(i, yi)| linalg::spectral_norm(&frame.project_block_perp(i, yi)))
            .fold(0.0, f64::max);
        GolfingTrace {
            w_norms: vec![],
            mu_seq: vec![],
            certificate: y,
            dual_vector: CVec::zeros(1),
            alpha_achieved: alpha,
            beta_achieved: beta,
            z_norm: 0.0,
            consistency_error: 0.0,
            recursion_error: 0.0,
        }
    }

    #[test]
    fn dual_conditions_trivial_traces() {
        let t = truth(&[(3, 3), (2, 2)], 11);
        let frame = TangentFrame::new(&t).unwrap();
        let sgn = sgn_lifted(&t);
        let exact = verify_dual_conditions(&synthetic_trace(sgn.clone(), &sgn, &frame), 3.0).unwrap();
        assert!(exact.cond1_ok && exact.cond2_ok);
        assert!(exact.alpha_margin > 0.0);
        let zero = LiftedSignal::zeros(&t.dims());
        let tr = synthetic_trace(zero, &sgn, &frame);
        assert!((tr.alpha_achieved - 2f64.sqrt()).abs() < 1e-12);
        let rep = verify_dual_conditions(&tr, 1.0).unwrap();
        assert!(!rep.cond1_ok && rep.cond2_ok);
        assert!(verify_dual_conditions(&tr, 0.0).is_err());
    }

    #[test]
    fn isometry_one_dimensional() {
        let l = 8;
        let mut rng = stream(12);
        let ens = MeasurementEnsemble::sample(l, &[(1, 1)], BasisChoice::PartialDft, &mut rng).unwrap();
        let t = truth(&[(1, 1)], 13);
        let frame = TangentFrame::new(&t).unwrap();
        let spectrum = local_isometry_spectrum(&ens, &frame, None).unwrap();
        assert_eq!(spectrum.dim, 1);
        let hm = &frame.channels[0] * frame.messages[0].adjoint();
        let expect = linalg::vnorm_sq(&ens.forward_block(0, &hm).unwrap());
        assert!((spectrum.min_eig - expect).abs() < 1e-12 && (spectrum.max_eig - expect).abs() < 1e-12);
    }

    #[test]
    fn isometry_large_l_and_weighted_sets() {
        let mut rng = stream(14);
        let ens = MeasurementEnsemble::sample(1024, &[(4, 4), (4, 4)], BasisChoice::PartialDft, &mut rng).unwrap();
        let t = FactoredSignal::sample(&ens.dims(), &mut rng);
        let part = construct_partition(&ens, 2, &PartitionOptions::default(), &mut rng).unwrap();
        let frame = TangentFrame::new(&t).unwrap().with_partition(&part).unwrap();
        for bases in frame.set_bases.as_ref().unwrap() {
            for b in bases {
                assert!(b.len() <= 2 * 4 + 4 - 1);
            }
        }
        let spectrum = local_isometry_spectrum(&ens, &frame, Some(&part)).unwrap();
        assert!(spectrum.min_eig >= 0.6 && spectrum.max_eig <= 1.4, "{spectrum:?}");
        for s in spectrum.per_set.unwrap() {
            assert!(s.min_eig >= 0.4 && s.max_eig <= 1.6, "{s:?}");
        }
    }

    #[test]
    fn isometry_rejects_broken_frame() {
        let ens = MeasurementEnsemble::sample(16, &[(2, 2)], BasisChoice::PartialDft, &mut stream(15)).unwrap();
        let mut frame = TangentFrame::new(&truth(&[(2, 2)], 16)).unwrap();
        frame.bases[0][0] *= C64::from(2.0);
        assert!(matches!(local_isometry_spectrum(&ens, &frame, None), Err(Error::Frame(_))));
    }

    #[test]
    fn gram_expectation_is_identity() {
        let (l, k, n) = (16, 2, 2);
        let basis = SubspaceBasis::partial_dft(l, k).unwrap();
        let t = truth(&[(k, n)], 17);
        let frame = TangentFrame::new(&t).unwrap();
        let d = frame.dim();
        let mut mean = CMat::zeros(d, d);
        let mut rng = stream(18);
        let draws = 1000;
        for _ in 0..draws {
            let encoder = Encoder::sample(l, n, &mut rng).unwrap();
            let ens = MeasurementEnsemble::new(vec![Block { basis: basis.clone(), encoder }]).unwrap();
            let images: Vec<CVec> = frame.bases[0].iter().map(|e| ens.forward_block(0, e).unwrap()).collect();
            mean += CMat::from_fn(d, d, |a, b| linalg::vinner(&images[b], &images[a]));
        }
        mean /= C64::from(draws as f64);
        let dev = linalg::hermitian_norm(&(mean - CMat::identity(d, d)));
        assert!(dev <= 0.05, "{dev}");
    }
}
