//! Exact backend: monomial operators `e_m ↦ c(m)·e_{σ(m)}` on the lattice
//! `Z_+^{d_plus} × Z^{d_bi}`.
//!
//! Index maps are affine with a unit lower-triangular integer matrix, so
//! `σ^{-1}` is exact. Coefficients are formal products of powers of fixed
//! moduli and phases (see [`coefficient`]). Relation checks compare images
//! index by index with no rounding; [`densify`] builds the matrices of a tuple
//! on a finite window for the dense backend.

pub mod affine;
pub mod classify;
pub mod coefficient;
pub mod densify;
pub mod monomial;
pub mod relations;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use affine::AffineMap;
pub use classify::{
    classify_index, pair_formula_sets, slice_dimensions, wandering_set, CoordinateOrbit, OrbitOutcome,
    PairFormulaSets, SliceClassification, SliceCounts, Witness,
};
pub use coefficient::{Coefficient, Match};
pub use densify::{densify, densify_op, oracle_agreement, Boundary, DensifiedTuple, OracleAgreement};
pub use monomial::{Base, LatticeTuple, MonomialOperator, WeightFactor, WeightRule};
pub use relations::{verify_lattice_relations, Counterexample, FamilyCheck, LatticeRelationReport, RelationFamily};

/// Multi-index; the first `d_plus` entries are unilateral (`≥ 0`).
pub type Index = Vec<i64>;

/// Image of a basis vector: a single term, or `None` when annihilated.
pub type Image = Option<(Index, Coefficient)>;

pub fn format_index(m: &[i64]) -> String {
    let mut s = String::from("(");
    for (k, v) in m.iter().enumerate() {
        if k > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{v}");
    }
    s.push(')');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeShape {
    pub d_plus: usize,
    pub d_bi: usize,
}

impl LatticeShape {
    pub const MAX_DIM: usize = 8;

    pub fn new(d_plus: usize, d_bi: usize) -> Result<Self> {
        let d = d_plus + d_bi;
        if d == 0 || d > Self::MAX_DIM {
            return Err(Error::Lattice(format!("lattice dimension {d} outside 1..={}", Self::MAX_DIM)));
        }
        Ok(Self { d_plus, d_bi })
    }

    pub fn dim(&self) -> usize {
        self.d_plus + self.d_bi
    }

    pub fn is_bilateral(&self, p: usize) -> bool {
        p >= self.d_plus
    }

    pub fn is_admissible(&self, m: &[i64]) -> bool {
        m.len() == self.dim() && m[..self.d_plus].iter().all(|&v| v >= 0)
    }

    pub fn check(&self, m: &[i64]) -> Result<()> {
        if m.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.len(),
            });
        }
        if !self.is_admissible(m) {
            return Err(Error::InadmissibleIndex(format_index(m)));
        }
        Ok(())
    }
}

/// Box of `N` values per coordinate: `0..N` on unilateral coordinates and
/// `−⌊N/2⌋ .. N−1−⌊N/2⌋` on bilateral ones. Enumerated lexicographically with
/// the first coordinate slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    shape: LatticeShape,
    n: usize,
}

impl Window {
    pub fn new(shape: LatticeShape, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("window size must be at least 1".into()));
        }
        let total = (n as u128).checked_pow(shape.dim() as u32).unwrap_or(u128::MAX);
        if total > 1 << 24 {
            return Err(Error::InvalidParameter(format!("window {n}^{} is too large", shape.dim())));
        }
        Ok(Self { shape, n })
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.shape.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inclusive range of coordinate `p`.
    pub fn range(&self, p: usize) -> (i64, i64) {
        let n = self.n as i64;
        if self.shape.is_bilateral(p) {
            let lo = -(n / 2);
            (lo, lo + n - 1)
        } else {
            (0, n - 1)
        }
    }

    pub fn contains(&self, m: &[i64]) -> bool {
        m.len() == self.shape.dim()
            && m.iter().enumerate().all(|(p, &v)| {
                let (lo, hi) = self.range(p);
                lo <= v && v <= hi
            })
    }

    pub fn position(&self, m: &[i64]) -> Option<usize> {
        if !self.contains(m) {
            return None;
        }
        let mut pos = 0usize;
        for (p, &v) in m.iter().enumerate() {
            pos = pos * self.n + (v - self.range(p).0) as usize;
        }
        Some(pos)
    }

    pub fn index_at(&self, mut pos: usize) -> Index {
        let d = self.shape.dim();
        let mut m = vec![0i64; d];
        for p in (0..d).rev() {
            m[p] = self.range(p).0 + (pos % self.n) as i64;
            pos /= self.n;
        }
        m
    }

    pub fn indices(&self) -> impl Iterator<Item = Index> + '_ {
        (0..self.len()).map(move |k| self.index_at(k))
    }

    /// Reduces bilateral coordinates into the window modulo `N`.
    pub fn wrap(&self, m: &[i64]) -> Index {
        m.iter()
            .enumerate()
            .map(|(p, &v)| {
                if self.shape.is_bilateral(p) {
                    let lo = self.range(p).0;
                    lo + (v - lo).rem_euclid(self.n as i64)
                } else {
                    v
                }
            })
            .collect()
    }

    /// Distance from the window edges that are not lattice edges: the upper
    /// end of unilateral coordinates and both ends of bilateral ones.
    pub fn margin_of(&self, m: &[i64]) -> i64 {
        m.iter()
            .enumerate()
            .map(|(p, &v)| {
                let (lo, hi) = self.range(p);
                if self.shape.is_bilateral(p) {
                    (v - lo).min(hi - v)
                } else {
                    hi - v
                }
            })
            .min()
            .unwrap_or(0)
    }
}
