//! Self-contained JSON document holding an ensemble, its ground truth and the
//! observation, as written by `gen` and read by the other subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::operators::{
    synthesize_observation, BasisChoice, BasisKind, Block, Encoder, FactoredSignal, MeasurementEnsemble, Observation,
    SubspaceBasis,
};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDims {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    #[serde(rename = "L")]
    pub l: usize,
    pub r: usize,
    pub dims: Vec<BlockDims>,
    pub basis_kinds: Vec<BasisKind>,
    #[serde(with = "crate::serial::cmat_seq")]
    pub bases: Vec<CMat>,
    #[serde(with = "crate::serial::cmat_seq")]
    pub encoders: Vec<CMat>,
    pub tau: f64,
    #[serde(with = "crate::serial::cvec")]
    pub y: CVec,
    pub truth: Option<FactoredSignal>,
    /// Channels of `truth` have unit norm.
    pub normalized_truth: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenParams {
    pub l: usize,
    pub r: usize,
    pub k: usize,
    pub n: usize,
    pub tau: f64,
    pub basis: BasisChoice,
    /// Rescale the truth to unit channels (the convention of the theory-side
    /// tools) instead of keeping the raw Gaussian draws.
    pub normalize_truth: bool,
}

impl Bundle {
    pub fn generate(params: &GenParams, seed: u64) -> Result<Self> {
        if params.r == 0 || params.k == 0 || params.n == 0 || params.l == 0 {
            return Err(Error::Config("L, r, K and N must be positive".into()));
        }
        let mut rng = stream(seed);
        let dims = vec![(params.k, params.n); params.r];
        let ens = MeasurementEnsemble::sample(params.l, &dims, params.basis, &mut rng)?;
        let mut truth = FactoredSignal::sample(&dims, &mut rng);
        if params.normalize_truth {
            truth = truth.normalized();
        }
        let obs = synthesize_observation(&ens, &truth, params.tau, &mut rng)?;
        Ok(Self::from_parts(&ens, &obs, Some(truth), params.normalize_truth))
    }

    pub fn from_parts(
        ens: &MeasurementEnsemble,
        obs: &Observation,
        truth: Option<FactoredSignal>,
        normalized_truth: bool,
    ) -> Self {
        Self {
            l: ens.l(),
            r: ens.r(),
            dims: ens.dims().into_iter().map(|(k, n)| BlockDims { k, n }).collect(),
            basis_kinds: ens.blocks().iter().map(|b| b.basis.kind()).collect(),
            bases: ens.blocks().iter().map(|b| b.basis.entries().clone()).collect(),
            encoders: ens.blocks().iter().map(|b| b.encoder.entries().clone()).collect(),
            tau: obs.tau,
            y: obs.y.clone(),
            truth,
            normalized_truth,
        }
    }

    /// Rebuilds the ensemble, re-checking shapes and orthonormality.
    pub fn ensemble(&self) -> Result<MeasurementEnsemble> {
        let r = self.r;
        if self.dims.len() != r || self.basis_kinds.len() != r || self.bases.len() != r || self.encoders.len() != r {
            return Err(Error::dim(format!("bundle lists do not all have r = {r} entries")));
        }
        let blocks = self
            .bases
            .iter()
            .zip(&self.encoders)
            .zip(self.dims.iter().zip(&self.basis_kinds))
            .enumerate()
            .map(|(i, ((b, c), (d, kind)))| {
                if b.shape() != (self.l, d.k) || c.shape() != (self.l, d.n) {
                    return Err(Error::dim(format!("block {i} matrices do not match L = {}, K = {}, N = {}", self.l, d.k, d.n)));
                }
                Ok(Block { basis: SubspaceBasis::from_entries(b.clone(), *kind)?, encoder: Encoder::from_entries(c.clone())? })
            })
            .collect::<Result<Vec<_>>>()?;
        MeasurementEnsemble::new(blocks)
    }

    pub fn observation(&self) -> Result<Observation> {
        if self.y.len() != self.l {
            return Err(Error::dim(format!("y has length {}, expected L = {}", self.y.len(), self.l)));
        }
        Ok(Observation { y: self.y.clone(), tau: self.tau })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
