//! Affine index maps `m ↦ A·m + δ` with `A` unit lower-triangular.

use serde::{Deserialize, Serialize};

use super::{Index, LatticeShape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineMap {
    a: Vec<Vec<i64>>,
    delta: Vec<i64>,
}

impl AffineMap {
    pub fn new(a: Vec<Vec<i64>>, delta: Vec<i64>) -> Result<Self> {
        let d = delta.len();
        if d == 0 || a.len() != d || a.iter().any(|r| r.len() != d) {
            return Err(Error::Lattice(format!("index map must be a {d}x{d} matrix with a length-{d} offset")));
        }
        for (p, row) in a.iter().enumerate() {
            if row[p] != 1 || row[p + 1..].iter().any(|&v| v != 0) {
                return Err(Error::Lattice(format!(
                    "index map matrix must be unit lower-triangular (row {})",
                    p + 1
                )));
            }
        }
        Ok(Self { a, delta })
    }

    pub fn identity(d: usize) -> Self {
        let a = (0..d).map(|p| (0..d).map(|q| i64::from(p == q)).collect()).collect();
        Self { a, delta: vec![0; d] }
    }

    pub fn translation(delta: Vec<i64>) -> Self {
        let mut s = Self::identity(delta.len());
        s.delta = delta;
        s
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    pub fn matrix(&self) -> &[Vec<i64>] {
        &self.a
    }

    pub fn delta(&self) -> &[i64] {
        &self.delta
    }

    pub fn apply(&self, m: &[i64]) -> Index {
        self.a
            .iter()
            .zip(&self.delta)
            .map(|(row, &d)| row.iter().zip(m).map(|(&x, &y)| x * y).sum::<i64>() + d)
            .collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        let d = self.dim();
        let a = (0..d)
            .map(|p| (0..d).map(|q| (0..d).map(|k| self.a[p][k] * inner.a[k][q]).sum()).collect())
            .collect();
        AffineMap {
            a,
            delta: self.apply(&inner.delta),
        }
    }

    pub fn inverse(&self) -> AffineMap {
        let d = self.dim();
        // forward substitution on A·X = I
        let mut x = vec![vec![0i64; d]; d];
        for col in 0..d {
            for p in 0..d {
                let mut v = i64::from(p == col);
                for k in 0..p {
                    v -= self.a[p][k] * x[k][col];
                }
                x[p][col] = v;
            }
        }
        let inv = AffineMap {
            a: x,
            delta: vec![0; d],
        };
        let shifted = inv.apply(&self.delta);
        AffineMap {
            a: inv.a,
            delta: shifted.into_iter().map(|v| -v).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.dim())
    }

    /// True when every admissible index is mapped to an admissible index.
    /// Unilateral coordinates come first, so a unilateral row only sees
    /// unilateral coordinates and it suffices that its entries and offset are
    /// nonnegative.
    pub fn preserves(&self, shape: &LatticeShape) -> bool {
        self.dim() == shape.dim()
            && (0..shape.d_plus).all(|p| self.delta[p] >= 0 && self.a[p][..p].iter().all(|&v| v >= 0))
    }

    /// True when `σ` permutes the admissible set: unilateral rows are the
    /// identity.
    pub fn is_bijective_on(&self, shape: &LatticeShape) -> bool {
        self.dim() == shape.dim()
            && (0..shape.d_plus).all(|p| self.delta[p] == 0 && self.a[p][..p].iter().all(|&v| v == 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_map(d: usize) -> impl Strategy<Value = AffineMap> {
        (
            proptest::collection::vec(-3i64..4, d * d),
            proptest::collection::vec(-5i64..6, d),
        )
            .prop_map(move |(entries, delta)| {
                let a = (0..d)
                    .map(|p| {
                        (0..d)
                            .map(|q| match q.cmp(&p) {
                                std::cmp::Ordering::Less => entries[p * d + q],
                                std::cmp::Ordering::Equal => 1,
                                std::cmp::Ordering::Greater => 0,
                            })
                            .collect()
                    })
                    .collect();
                AffineMap::new(a, delta).unwrap()
            })
    }

    #[test]
    fn rejects_non_triangular() {
        assert!(AffineMap::new(vec![vec![1, 1], vec![0, 1]], vec![0, 0]).is_err());
        assert!(AffineMap::new(vec![vec![2, 0], vec![0, 1]], vec![0, 0]).is_err());
    }

    #[test]
    fn preservation_rules() {
        let s = LatticeShape::new(2, 1).unwrap();
        let t = AffineMap::new(vec![vec![1, 0, 0], vec![0, 1, 0], vec![1, 0, 1]], vec![0, 1, 0]).unwrap();
        assert!(t.preserves(&s));
        assert!(!t.is_bijective_on(&s));
        let neg = AffineMap::translation(vec![-1, 0, 0]);
        assert!(!neg.preserves(&s));
        let bil = AffineMap::translation(vec![0, 0, -1]);
        assert!(bil.is_bijective_on(&s));
    }

    proptest! {
        #[test]
        fn inverse_roundtrip(s in arb_map(3), m in proptest::collection::vec(-20i64..20, 3)) {
            let inv = s.inverse();
            prop_assert_eq!(inv.apply(&s.apply(&m)), m.clone());
            prop_assert_eq!(s.apply(&inv.apply(&m)), m);
        }

        #[test]
        fn compose_matches_sequential(s in arb_map(3), t in arb_map(3), m in proptest::collection::vec(-20i64..20, 3)) {
            prop_assert_eq!(s.compose(&t).apply(&m), s.apply(&t.apply(&m)));
        }
    }
}
