//! Measurement ensembles and the lifted bilinear measurement operator.
//!
//! Block `i` of an ensemble holds a basis `B_i` (`L x K_i`, orthonormal
//! columns) and a Gaussian encoder `C_i` (`L x N_i`). Writing `b_{i,l}` for
//! the conjugate of row `l` of `B_i` and `c_{i,l}` for row `l` of `C_i`, the
//! lifted operator is
//!
//! ```text
//! A(X)[l] = sum_i b_{i,l}^* X_i c_{i,l}
//! A^*(y)_i = sum_l y[l] b_{i,l} c_{i,l}^*
//! ```
//!
//! so that `A(h x^*)` equals `sum_i diag(B_i h_i) C_i conj(x_i)`.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::rng::{complex_normal_mat, complex_normal_vec};

/// Orthonormality tolerance accepted for externally supplied bases.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    PartialDft,
    GeneralOrthonormal,
}

/// `L x K` matrix with orthonormal columns.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    entries: CMat,
    kind: BasisKind,
}

impl SubspaceBasis {
    /// First `K` columns of the unitary `L`-point DFT matrix,
    /// entry `(l, k) = exp(2 pi i l k / L) / sqrt(L)` (zero-based).
    pub fn partial_dft(l: usize, k: usize) -> Result<Self> {
        if k < 1 || k > l {
            return Err(Error::dim(format!("partial DFT needs 1 <= K <= L, got K={k}, L={l}")));
        }
        let scale = 1.0 / (l as f64).sqrt();
        let entries = CMat::from_fn(l, k, |row, col| {
            // reduce the exponent mod L before converting to keep the phase exact
            let e = (row * col) % l;
            C64::from_polar(scale, 2.0 * PI * e as f64 / l as f64)
        });
        Ok(Self { entries, kind: BasisKind::PartialDft })
    }

    /// QR-orthonormalized i.i.d. complex Gaussian `L x K` matrix.
    pub fn random_orthonormal<R: Rng + ?Sized>(l: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k < 1 || k > l {
            return Err(Error::dim(format!("basis needs 1 <= K <= L, got K={k}, L={l}")));
        }
        let g = complex_normal_mat(rng, l, k);
        let q = g.qr().q();
        Ok(Self { entries: q, kind: BasisKind::GeneralOrthonormal })
    }

    pub fn from_entries(entries: CMat, kind: BasisKind) -> Result<Self> {
        let (l, k) = entries.shape();
        if k < 1 || k > l {
            return Err(Error::dim(format!("basis needs 1 <= K <= L, got K={k}, L={l}")));
        }
        let basis = Self { entries, kind };
        let defect = basis.orthonormality_defect();
        if defect > ORTHONORMAL_TOL {
            return Err(Error::dim(format!("basis columns not orthonormal (|B*B - I| = {defect:.3e})")));
        }
        Ok(basis)
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// `L`
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    /// `K`
    pub fn dim(&self) -> usize {
        self.entries.ncols()
    }

    /// `b_l`: the conjugate transpose of row `l`.
    pub fn row_vector(&self, l: usize) -> CVec {
        CVec::from_iterator(self.dim(), self.entries.row(l).iter().map(|z| z.conj()))
    }

    pub fn row_norm_sq(&self, l: usize) -> f64 {
        self.entries.row(l).iter().map(|z| z.norm_sqr()).sum()
    }

    /// `||B^* B - I||_{2->2}`
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.entries.ad_mul(&self.entries) - CMat::identity(self.dim(), self.dim());
        linalg::hermitian_norm(&gram)
    }
}

pub fn build_partial_dft_basis(l: usize, k: usize) -> Result<SubspaceBasis> {
    SubspaceBasis::partial_dft(l, k)
}

/// `L x N` matrix of i.i.d. CN(0,1) entries.
#[derive(Clone, Debug)]
pub struct Encoder {
    entries: CMat,
}

impl Encoder {
    pub fn sample<R: Rng + ?Sized>(l: usize, n: usize, rng: &mut R) -> Result<Self> {
        if l < 1 || n < 1 {
            return Err(Error::dim(format!("encoder needs L, N >= 1, got L={l}, N={n}")));
        }
        Ok(Self { entries: complex_normal_mat(rng, l, n) })
    }

    pub fn from_entries(entries: CMat) -> Result<Self> {
        if entries.nrows() < 1 || entries.ncols() < 1 {
            return Err(Error::dim("empty encoder"));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.ncols()
    }

    /// `c_l`: row `l` as a column vector (not conjugated).
    pub fn row_vector(&self, l: usize) -> CVec {
        self.entries.row(l).transpose()
    }
}

pub fn sample_encoder<R: Rng + ?Sized>(l: usize, n: usize, rng: &mut R) -> Result<Encoder> {
    Encoder::sample(l, n, rng)
}

#[derive(Clone, Debug)]
pub struct Block {
    pub basis: SubspaceBasis,
    pub encoder: Encoder,
}

/// How to generate the subspace bases of a fresh ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisChoice {
    PartialDft,
    RandomOrthonormal,
}

#[derive(Clone, Debug)]
pub struct MeasurementEnsemble {
    l: usize,
    blocks: Vec<Block>,
}

impl MeasurementEnsemble {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| Error::dim("ensemble needs r >= 1 blocks"))?;
        let l = first.basis.rows();
        for (i, b) in blocks.iter().enumerate() {
            if b.basis.rows() != l || b.encoder.entries().nrows() != l {
                return Err(Error::dim(format!("block {i} does not have L = {l} rows")));
            }
            if b.basis.dim() > l {
                return Err(Error::dim(format!("block {i} has K > L")));
            }
        }
        Ok(Self { l, blocks })
    }

    /// Fresh ensemble with `dims[i] = (K_i, N_i)`. Bases are drawn first (all
    /// blocks), then encoders, so the encoder stream does not depend on the
    /// basis choice.
    pub fn sample<R: Rng + ?Sized>(
        l: usize,
        dims: &[(usize, usize)],
        basis: BasisChoice,
        rng: &mut R,
    ) -> Result<Self> {
        let bases = dims
            .iter()
            .map(|&(k, _)| match basis {
                BasisChoice::PartialDft => SubspaceBasis::partial_dft(l, k),
                BasisChoice::RandomOrthonormal => SubspaceBasis::random_orthonormal(l, k, rng),
            })
            .collect::<Result<Vec<_>>>()?;
        let blocks = bases
            .into_iter()
            .zip(dims)
            .map(|(basis, &(_, n))| Ok(Block { basis, encoder: Encoder::sample(l, n, rng)? }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn r(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Block {
        &self.blocks[i]
    }

    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(|b| (b.basis.dim(), b.encoder.dim())).collect()
    }

    pub fn k_max(&self) -> usize {
        self.blocks.iter().map(|b| b.basis.dim()).max().unwrap_or(0)
    }

    pub fn n_max(&self) -> usize {
        self.blocks.iter().map(|b| b.encoder.dim()).max().unwrap_or(0)
    }

    pub fn zeros(&self) -> LiftedSignal {
        LiftedSignal::zeros(&self.dims())
    }

    pub fn check_signal(&self, x: &LiftedSignal) -> Result<()> {
        if x.blocks.len() != self.r() {
            return Err(Error::dim(format!("signal has {} blocks, ensemble has {}", x.blocks.len(), self.r())));
        }
        for (i, (xi, (k, n))) in x.blocks.iter().zip(self.dims()).enumerate() {
            if xi.shape() != (k, n) {
                return Err(Error::dim(format!("block {i} has shape {:?}, expected ({k}, {n})", xi.shape())));
            }
        }
        Ok(())
    }

    fn check_measurements(&self, y: &CVec) -> Result<()> {
        if y.len() != self.l {
            return Err(Error::dim(format!("vector has length {}, expected L = {}", y.len(), self.l)));
        }
        Ok(())
    }

    /// `A_i(X_i)`
    pub fn forward_block(&self, i: usize, xi: &CMat) -> Result<CVec> {
        let block = self.blocks.get(i).ok_or_else(|| Error::dim(format!("no block {i}")))?;
        let (k, n) = (block.basis.dim(), block.encoder.dim());
        if xi.shape() != (k, n) {
            return Err(Error::dim(format!("block {i} has shape {:?}, expected ({k}, {n})", xi.shape())));
        }
        let mut out = CVec::zeros(self.l);
        accumulate_block(block, xi, &mut out);
        Ok(out)
    }

    /// `A(X) = sum_i A_i(X_i)`
    pub fn forward(&self, x: &LiftedSignal) -> Result<CVec> {
        self.check_signal(x)?;
        let mut out = CVec::zeros(self.l);
        for (block, xi) in self.blocks.iter().zip(&x.blocks) {
            accumulate_block(block, xi, &mut out);
        }
        Ok(out)
    }

    /// `A^p(X)`: `A(X)` with entries outside `set` zeroed.
    pub fn restricted_forward(&self, set: &[usize], x: &LiftedSignal) -> Result<CVec> {
        if let Some(&bad) = set.iter().find(|&&l| l >= self.l) {
            return Err(Error::IndexOutOfRange { index: bad, len: self.l });
        }
        let full = self.forward(x)?;
        let mut out = CVec::zeros(self.l);
        for &l in set {
            out[l] = full[l];
        }
        Ok(out)
    }

    /// `A_i^*(y) = B_i^* diag(y) conj(C_i)`
    pub fn adjoint_block(&self, i: usize, y: &CVec) -> Result<CMat> {
        self.check_measurements(y)?;
        let block = self.blocks.get(i).ok_or_else(|| Error::dim(format!("no block {i}")))?;
        Ok(adjoint_block_unchecked(block, y))
    }

    pub fn adjoint(&self, y: &CVec) -> Result<LiftedSignal> {
        self.check_measurements(y)?;
        Ok(LiftedSignal { blocks: self.blocks.iter().map(|b| adjoint_block_unchecked(b, y)).collect() })
    }

    /// `sum_i diag(B_i h_i) C_i conj(x_i)`, the unlifted form of `A(h x^*)`.
    pub fn forward_factored(&self, f: &FactoredSignal) -> Result<CVec> {
        self.check_factored(f)?;
        let mut out = CVec::zeros(self.l);
        for (i, block) in self.blocks.iter().enumerate() {
            let bh = block.basis.entries() * &f.channels[i];
            let cx = block.encoder.entries() * f.messages[i].map(|z| z.conj());
            out += bh.component_mul(&cx);
        }
        Ok(out)
    }

    pub fn check_factored(&self, f: &FactoredSignal) -> Result<()> {
        if f.channels.len() != self.r() || f.messages.len() != self.r() {
            return Err(Error::dim("factored signal block count does not match ensemble"));
        }
        for (i, (k, n)) in self.dims().into_iter().enumerate() {
            if f.channels[i].len() != k || f.messages[i].len() != n {
                return Err(Error::dim(format!("factored block {i} does not have dims ({k}, {n})")));
            }
        }
        Ok(())
    }
}

fn accumulate_block(block: &Block, xi: &CMat, out: &mut CVec) {
    let bx = block.basis.entries() * xi;
    let c = block.encoder.entries();
    for n in 0..c.ncols() {
        for l in 0..c.nrows() {
            out[l] += bx[(l, n)] * c[(l, n)];
        }
    }
}

fn adjoint_block_unchecked(block: &Block, y: &CVec) -> CMat {
    let c = block.encoder.entries();
    let mut weighted = CMat::zeros(c.nrows(), c.ncols());
    for n in 0..c.ncols() {
        for l in 0..c.nrows() {
            weighted[(l, n)] = y[l] * c[(l, n)].conj();
        }
    }
    block.basis.entries().ad_mul(&weighted)
}

/// Element of the product space `C^{K_1 x N_1} x ... x C^{K_r x N_r}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedSignal {
    #[serde(with = "crate::serial::cmat_seq")]
    pub blocks: Vec<CMat>,
}

impl LiftedSignal {
    pub fn zeros(dims: &[(usize, usize)]) -> Self {
        Self { blocks: dims.iter().map(|&(k, n)| CMat::zeros(k, n)).collect() }
    }

    pub fn r(&self) -> usize {
        self.blocks.len()
    }

    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(|b| b.shape()).collect()
    }

    /// `<self, other>_F = sum_i <X_i, Z_i>_F`, linear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| linalg::inner(a, b)).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.blocks.iter().map(linalg::norm_sq).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `sum_i ||X_i||_*`
    pub fn nuclear_norm(&self) -> f64 {
        self.blocks.iter().map(linalg::nuclear_norm).sum()
    }

    pub fn scaled(&self, a: C64) -> Self {
        Self { blocks: self.blocks.iter().map(|b| b * a).collect() }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: C64, other: &Self) {
        for (x, z) in self.blocks.iter_mut().zip(&other.blocks) {
            *x += z * a;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(linalg::is_finite)
    }

    /// Blocks flattened column-major into one vector.
    pub fn flatten(&self) -> CVec {
        let total: usize = self.blocks.iter().map(|b| b.len()).sum();
        CVec::from_iterator(total, self.blocks.iter().flat_map(|b| b.iter().copied()))
    }

    pub fn unflatten(v: &CVec, dims: &[(usize, usize)]) -> Self {
        let mut offset = 0;
        let blocks = dims
            .iter()
            .map(|&(k, n)| {
                let b = CMat::from_iterator(k, n, v.iter().skip(offset).take(k * n).copied());
                offset += k * n;
                b
            })
            .collect();
        Self { blocks }
    }
}

impl Add for &LiftedSignal {
    type Output = LiftedSignal;

    fn add(self, rhs: &LiftedSignal) -> LiftedSignal {
        LiftedSignal { blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &LiftedSignal {
    type Output = LiftedSignal;

    fn sub(self, rhs: &LiftedSignal) -> LiftedSignal {
        LiftedSignal { blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a - b).collect() }
    }
}

/// Channels `h_i` and messages `x_i`; lifts to blocks `h_i x_i^*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactoredSignal {
    #[serde(with = "crate::serial::cvec_seq")]
    pub channels: Vec<CVec>,
    #[serde(with = "crate::serial::cvec_seq")]
    pub messages: Vec<CVec>,
}

impl FactoredSignal {
    pub fn new(channels: Vec<CVec>, messages: Vec<CVec>) -> Result<Self> {
        if channels.len() != messages.len() {
            return Err(Error::dim("channel and message counts differ"));
        }
        Ok(Self { channels, messages })
    }

    /// i.i.d. CN(0,1) channels and messages, channel then message per block.
    pub fn sample<R: Rng + ?Sized>(dims: &[(usize, usize)], rng: &mut R) -> Self {
        let mut channels = Vec::with_capacity(dims.len());
        let mut messages = Vec::with_capacity(dims.len());
        for &(k, n) in dims {
            channels.push(complex_normal_vec(rng, k));
            messages.push(complex_normal_vec(rng, n));
        }
        Self { channels, messages }
    }

    pub fn zeros(dims: &[(usize, usize)]) -> Self {
        Self {
            channels: dims.iter().map(|&(k, _)| CVec::zeros(k)).collect(),
            messages: dims.iter().map(|&(_, n)| CVec::zeros(n)).collect(),
        }
    }

    pub fn r(&self) -> usize {
        self.channels.len()
    }

    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.channels.iter().zip(&self.messages).map(|(h, x)| (h.len(), x.len())).collect()
    }

    pub fn lift(&self) -> LiftedSignal {
        lift(self)
    }

    /// Unit-norm channels with messages rescaled so the lift is unchanged.
    /// Zero channels are replaced by `e_1` and get a zero message.
    pub fn normalized(&self) -> Self {
        let mut channels = Vec::with_capacity(self.r());
        let mut messages = Vec::with_capacity(self.r());
        for (h, x) in self.channels.iter().zip(&self.messages) {
            let nh = linalg::vnorm_sq(h).sqrt();
            if nh == 0.0 {
                let mut e1 = CVec::zeros(h.len());
                e1[0] = C64::new(1.0, 0.0);
                channels.push(e1);
                messages.push(CVec::zeros(x.len()));
            } else {
                channels.push(h / C64::from(nh));
                messages.push(x * C64::from(nh));
            }
        }
        Self { channels, messages }
    }

    /// `sigma_i = ||x_i||`
    pub fn message_norms(&self) -> Vec<f64> {
        self.messages.iter().map(|x| linalg::vnorm_sq(x).sqrt()).collect()
    }
}

/// Blocks `h_i x_i^*`.
pub fn lift(f: &FactoredSignal) -> LiftedSignal {
    LiftedSignal {
        blocks: f.channels.iter().zip(&f.messages).map(|(h, x)| h * x.adjoint()).collect(),
    }
}

/// Measurements `y` together with the noise-norm bound `tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(with = "crate::serial::cvec")]
    pub y: CVec,
    pub tau: f64,
}

/// `y = A(lift(truth)) + e`, where `e` is a uniformly random direction scaled
/// to norm exactly `tau` (`tau = 0` gives `e = 0` and draws nothing).
pub fn synthesize_observation<R: Rng + ?Sized>(
    ens: &MeasurementEnsemble,
    truth: &FactoredSignal,
    tau: f64,
    rng: &mut R,
) -> Result<Observation> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Config(format!("noise level tau must be finite and >= 0, got {tau}")));
    }
    ens.check_factored(truth)?;
    let mut y = ens.forward(&truth.lift())?;
    if tau > 0.0 {
        let e = random_direction(rng, ens.l()) * C64::from(tau);
        y += e;
    }
    Ok(Observation { y, tau })
}

/// Uniformly distributed point on the unit sphere of `C^n`.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    loop {
        let g = complex_normal_vec(rng, n);
        let norm = linalg::vnorm_sq(&g).sqrt();
        if norm > 0.0 {
            return g / C64::from(norm);
        }
    }
}

/// Circular convolution `(w * s)[k] = sum_j w[j] s[(k - j) mod L]`, evaluated
/// as `sqrt(L) F^* diag(F w) F s` with the unitary DFT `F`.
pub fn circular_convolve(w: &[C64], s: &[C64]) -> Result<Vec<C64>> {
    if w.len() != s.len() {
        return Err(Error::dim(format!("convolution lengths differ: {} vs {}", w.len(), s.len())));
    }
    let l = w.len();
    if l == 0 {
        return Ok(Vec::new());
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(l);
    let inv = planner.plan_fft_inverse(l);
    let mut fw = w.to_vec();
    let mut fs = s.to_vec();
    fwd.process(&mut fw);
    fwd.process(&mut fs);
    let mut prod: Vec<C64> = fw.iter().zip(&fs).map(|(a, b)| a * b).collect();
    inv.process(&mut prod);
    // unnormalized transforms: sqrt(L) * (1/sqrt(L))^3 = 1/L overall
    let scale = 1.0 / l as f64;
    Ok(prod.into_iter().map(|z| z * scale).collect())
}

/// `O(L^2)` evaluation of the circular convolution.
pub fn circular_convolve_direct(w: &[C64], s: &[C64]) -> Result<Vec<C64>> {
    if w.len() != s.len() {
        return Err(Error::dim(format!("convolution lengths differ: {} vs {}", w.len(), s.len())));
    }
    let l = w.len();
    Ok((0..l)
        .map(|k| (0..l).map(|j| w[j] * s[(k + l - j) % l]).sum())
        .collect())
}
