//! JSON encodings for complex arrays: every complex number is an `[re, im]`
//! pair and matrices are nested row-major (`rows[i][j]`).

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

pub type Pair = [f64; 2];

pub fn mat_to_rows(m: &CMat) -> Vec<Vec<Pair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn rows_to_mat(rows: &[Vec<Pair>]) -> Result<CMat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::dim("ragged matrix rows"));
    }
    Ok(CMat::from_fn(nrows, ncols, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn vec_to_pairs(v: &CVec) -> Vec<Pair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn pairs_to_vec(p: &[Pair]) -> CVec {
    CVec::from_iterator(p.len(), p.iter().map(|z| C64::new(z[0], z[1])))
}

/// `#[serde(with = "crate::serial::cmat")]`
pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        mat_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let rows = Vec::<Vec<Pair>>::deserialize(d)?;
        rows_to_mat(&rows).map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "crate::serial::cmat_seq")]`
pub mod cmat_seq {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMat], s: S) -> std::result::Result<S::Ok, S::Error> {
        ms.iter().map(mat_to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMat>, D::Error> {
        let all = Vec::<Vec<Vec<Pair>>>::deserialize(d)?;
        all.iter()
            .map(|rows| rows_to_mat(rows).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// `#[serde(with = "crate::serial::cvec")]`
pub mod cvec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> std::result::Result<S::Ok, S::Error> {
        vec_to_pairs(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CVec, D::Error> {
        Ok(pairs_to_vec(&Vec::<Pair>::deserialize(d)?))
    }
}

/// `#[serde(with = "crate::serial::cvec_seq")]`
pub mod cvec_seq {
    use super::*;

    pub fn serialize<S: Serializer>(vs: &[CVec], s: S) -> std::result::Result<S::Ok, S::Error> {
        vs.iter().map(vec_to_pairs).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CVec>, D::Error> {
        Ok(Vec::<Vec<Pair>>::deserialize(d)?.iter().map(|p| pairs_to_vec(p)).collect())
    }
}
