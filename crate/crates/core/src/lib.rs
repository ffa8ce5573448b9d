//! Blind deconvolution and demixing of `r` bilinear contributions from one
//! noisy superposition.
//!
//! The crate is organized around the lifted measurement operator
//! ([`operators`]), two recovery algorithms ([`convex`] for nuclear-norm
//! minimization, [`wirtinger`] for nonconvex gradient descent), coherence and
//! partition machinery ([`coherence`]), an executable Golfing-scheme dual
//! certificate ([`certificate`]) and an experiment harness ([`harness`]).

pub mod coherence;
pub mod certificate;
pub mod convex;
pub mod wirtinger;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod operators;
pub mod rng;
pub mod serial;

pub use error::{Error, Result};
pub use operators::{
    BasisChoice, BasisKind, Block, Encoder, FactoredSignal, LiftedSignal, MeasurementEnsemble,
    Observation, SubspaceBasis,
};
