//! Monomial operators and tuples of them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::affine::AffineMap;
use super::coefficient::Coefficient;
use super::{Image, LatticeShape};
use crate::error::{Error, Result};

const UNIT_SLACK: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Modulus(f64),
    Phase(f64),
}

/// `base^{⟨coeffs, m⟩ + constant}`; for a phase base `θ` this is
/// `e^{iθ(⟨coeffs, m⟩ + constant)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFactor {
    pub base: Base,
    pub coeffs: Vec<i64>,
    #[serde(default)]
    pub constant: i64,
}

impl WeightFactor {
    fn exponent(&self, m: &[i64]) -> i64 {
        self.coeffs.iter().zip(m).map(|(a, b)| a * b).sum::<i64>() + self.constant
    }

    fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
}

/// Product of [`WeightFactor`]s. An empty rule is the constant 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightRule {
    factors: Vec<WeightFactor>,
}

impl WeightRule {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn from_factors(factors: Vec<WeightFactor>) -> Self {
        Self { factors }.normalized()
    }

    /// Constant `ρ e^{iθ}` on a lattice of dimension `d`.
    pub fn constant(d: usize, rho: f64, theta: f64) -> Self {
        Self::one().times_polar(d, rho, theta)
    }

    pub fn times_polar(mut self, d: usize, rho: f64, theta: f64) -> Self {
        self.factors.push(WeightFactor {
            base: Base::Modulus(rho),
            coeffs: vec![0; d],
            constant: 1,
        });
        self.factors.push(WeightFactor {
            base: Base::Phase(theta),
            coeffs: vec![0; d],
            constant: 1,
        });
        self.normalized()
    }

    pub fn times_factor(mut self, f: WeightFactor) -> Self {
        self.factors.push(f);
        self.normalized()
    }

    pub fn factors(&self) -> &[WeightFactor] {
        &self.factors
    }

    /// Folds constant modulus factors into one and drops trivial factors.
    fn normalized(self) -> Self {
        let mut folded = 1.0f64;
        let d = self.factors.first().map_or(0, |f| f.coeffs.len());
        let mut out = Vec::with_capacity(self.factors.len());
        for f in self.factors {
            match f.base {
                Base::Modulus(rho) if f.is_constant() => folded *= rho.powi(f.constant as i32),
                Base::Modulus(rho) if rho == 1.0 => {}
                Base::Phase(theta) if theta == 0.0 => {}
                _ if f.is_constant() && f.constant == 0 => {}
                _ => out.push(f),
            }
        }
        if (folded - 1.0).abs() > UNIT_SLACK {
            out.insert(
                0,
                WeightFactor {
                    base: Base::Modulus(folded),
                    coeffs: vec![0; d],
                    constant: 1,
                },
            );
        }
        Self { factors: out }
    }

    pub fn eval(&self, m: &[i64]) -> Coefficient {
        let mut c = Coefficient::one();
        for f in &self.factors {
            let e = f.exponent(m);
            match f.base {
                Base::Modulus(rho) => c.mul_factor_modulus(rho, e),
                Base::Phase(theta) => c.mul_factor_phase(theta, e),
            }
        }
        c
    }

    /// `m ↦ c(σ(m))`.
    pub fn compose_affine(&self, sigma: &AffineMap) -> Self {
        let a = sigma.matrix();
        let d = sigma.dim();
        let factors = self
            .factors
            .iter()
            .map(|f| WeightFactor {
                base: f.base,
                coeffs: (0..d).map(|q| (0..d).map(|p| f.coeffs[p] * a[p][q]).sum()).collect(),
                constant: f.coeffs.iter().zip(sigma.delta()).map(|(u, v)| u * v).sum::<i64>() + f.constant,
            })
            .collect();
        Self { factors }.normalized()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Self { factors }.normalized()
    }

    pub fn conj(&self) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .map(|f| WeightFactor {
                    base: match f.base {
                        Base::Phase(t) => Base::Phase(-t),
                        b => b,
                    },
                    ..f.clone()
                })
                .collect(),
        }
    }

    fn validate(&self, shape: &LatticeShape) -> Result<()> {
        let d = shape.dim();
        for f in &self.factors {
            if f.coeffs.len() != d {
                return Err(Error::Lattice(format!(
                    "weight factor has {} exponent coefficients, lattice has dimension {d}",
                    f.coeffs.len()
                )));
            }
            let base = match f.base {
                Base::Modulus(r) => r,
                Base::Phase(t) => t,
            };
            if !base.is_finite() || matches!(f.base, Base::Modulus(r) if r <= 0.0) {
                return Err(Error::Lattice(format!("weight base {base} must be finite (and positive for moduli)")));
            }
            if let Base::Modulus(rho) = f.base {
                if f.is_constant() {
                    if rho.powi(f.constant as i32) > 1.0 + UNIT_SLACK {
                        return Err(Error::Lattice(format!("constant weight modulus {rho} exceeds 1")));
                    }
                    continue;
                }
                // ρ^{e(m)} ≤ 1 on the admissible set needs e of one sign there
                let bilateral_free = f.coeffs[shape.d_plus..].iter().all(|&c| c == 0);
                let nonneg = bilateral_free && f.constant >= 0 && f.coeffs[..shape.d_plus].iter().all(|&c| c >= 0);
                let nonpos = bilateral_free && f.constant <= 0 && f.coeffs[..shape.d_plus].iter().all(|&c| c <= 0);
                let ok = (rho < 1.0 && nonneg) || (rho > 1.0 && nonpos);
                if !ok {
                    return Err(Error::Lattice(format!(
                        "weight factor {rho}^(..) is not bounded by 1 on the admissible set"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `|c(m)| = 1` for every `m`.
    pub fn is_unimodular(&self) -> bool {
        self.factors.iter().all(|f| matches!(f.base, Base::Phase(_)))
    }

    /// True when the rule does not depend on the coordinates in `coords`.
    pub fn independent_of(&self, coords: impl Iterator<Item = usize> + Clone) -> bool {
        self.factors.iter().all(|f| coords.clone().all(|p| f.coeffs[p] == 0))
    }
}

/// `e_m ↦ c(m)·e_{σ(m)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonomialOperator {
    shape: LatticeShape,
    sigma: AffineMap,
    weight: WeightRule,
}

impl MonomialOperator {
    pub fn new(shape: LatticeShape, sigma: AffineMap, weight: WeightRule) -> Result<Self> {
        if sigma.dim() != shape.dim() {
            return Err(Error::DimensionMismatch {
                expected: shape.dim(),
                found: sigma.dim(),
            });
        }
        if !sigma.preserves(&shape) {
            return Err(Error::Lattice(
                "index map leaves the admissible set (unilateral rows need nonnegative entries and offset)".into(),
            ));
        }
        let weight = weight.normalized();
        weight.validate(&shape)?;
        Ok(Self { shape, sigma, weight })
    }

    pub fn identity(shape: LatticeShape) -> Self {
        Self {
            shape,
            sigma: AffineMap::identity(shape.dim()),
            weight: WeightRule::one(),
        }
    }

    /// Unweighted shift along coordinate `p` (unilateral or bilateral).
    pub fn shift(shape: LatticeShape, p: usize) -> Result<Self> {
        if p >= shape.dim() {
            return Err(Error::IndexOutOfRange {
                index: p,
                len: shape.dim(),
            });
        }
        let mut delta = vec![0; shape.dim()];
        delta[p] = 1;
        Self::new(shape, AffineMap::translation(delta), WeightRule::one())
    }

    /// `ρ e^{iθ}·I`.
    pub fn scalar(shape: LatticeShape, rho: f64, theta: f64) -> Result<Self> {
        Self::new(
            shape,
            AffineMap::identity(shape.dim()),
            WeightRule::constant(shape.dim(), rho, theta),
        )
    }

    /// Multiplies the weight by `ρ e^{iθ}`.
    pub fn scaled(&self, rho: f64, theta: f64) -> Result<Self> {
        let w = self.weight.clone().times_polar(self.shape.dim(), rho, theta);
        Self::new(self.shape, self.sigma.clone(), w)
    }

    pub fn with_weight_factor(&self, f: WeightFactor) -> Result<Self> {
        Self::new(self.shape, self.sigma.clone(), self.weight.clone().times_factor(f))
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn sigma(&self) -> &AffineMap {
        &self.sigma
    }

    pub fn weight(&self) -> &WeightRule {
        &self.weight
    }

    pub fn apply(&self, m: &[i64]) -> Result<Image> {
        self.shape.check(m)?;
        Ok(Some((self.sigma.apply(m), self.weight.eval(m))))
    }

    pub fn apply_adjoint(&self, p: &[i64]) -> Result<Image> {
        self.shape.check(p)?;
        let q = self.sigma.inverse().apply(p);
        if !self.shape.is_admissible(&q) {
            return Ok(None);
        }
        let c = self.weight.eval(&q).conj();
        Ok(Some((q, c)))
    }

    /// Pushes a single-term vector through the operator (or its adjoint),
    /// multiplying coefficients.
    pub fn act(&self, img: Image, adjoint: bool) -> Result<Image> {
        let Some((m, c)) = img else {
            return Ok(None);
        };
        let out = if adjoint { self.apply_adjoint(&m)? } else { self.apply(&m)? };
        Ok(out.map(|(p, d)| (p, c.mul(&d))))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &MonomialOperator) -> Result<Self> {
        if self.shape != inner.shape {
            return Err(Error::Lattice("operators live on different lattices".into()));
        }
        let weight = inner.weight.mul(&self.weight.compose_affine(&inner.sigma));
        Self::new(self.shape, self.sigma.compose(&inner.sigma), weight)
    }

    pub fn power(&self, k: usize) -> Result<Self> {
        let mut out = Self::identity(self.shape);
        for _ in 0..k {
            out = self.compose(&out)?;
        }
        Ok(out)
    }

    pub fn is_isometric(&self) -> bool {
        self.weight.is_unimodular()
    }

    pub fn is_unitary(&self) -> bool {
        self.is_isometric() && self.sigma.is_bijective_on(&self.shape)
    }

    /// Adjoint of a unitary monomial operator, again monomial.
    pub fn unitary_adjoint(&self) -> Result<Self> {
        if !self.is_unitary() {
            return Err(Error::Lattice("adjoint as a monomial operator needs a unitary operator".into()));
        }
        let inv = self.sigma.inverse();
        let weight = self.weight.compose_affine(&inv).conj();
        Self::new(self.shape, inv, weight)
    }
}

/// Tuple of monomial operators with monomial unitary twists. Twists are
/// stored for every ordered pair; `U_ji = U_ij*`.
#[derive(Debug, Clone)]
pub struct LatticeTuple {
    shape: LatticeShape,
    ops: Vec<MonomialOperator>,
    units: BTreeMap<(usize, usize), MonomialOperator>,
}

impl LatticeTuple {
    /// Twists may be given for either order of a pair; missing pairs get the
    /// identity.
    pub fn new(
        shape: LatticeShape,
        ops: Vec<MonomialOperator>,
        twists: Vec<((usize, usize), MonomialOperator)>,
    ) -> Result<Self> {
        let n = ops.len();
        if n == 0 {
            return Err(Error::InvalidParameter("a tuple needs at least one operator".into()));
        }
        if ops.iter().any(|o| o.shape != shape) {
            return Err(Error::Lattice("all operators must share the tuple's lattice".into()));
        }
        let mut units = BTreeMap::new();
        for ((i, j), u) in twists {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { index: i.max(j), len: n });
            }
            if i == j {
                return Err(Error::InvalidTwist(format!("diagonal twist ({}, {})", i + 1, j + 1)));
            }
            if u.shape != shape {
                return Err(Error::InvalidTwist("twist lives on a different lattice".into()));
            }
            if !u.is_unitary() {
                return Err(Error::InvalidTwist(format!("U_({}, {}) is not a unitary monomial operator", i + 1, j + 1)));
            }
            let adj = u.unitary_adjoint()?;
            if units.contains_key(&(i, j)) {
                return Err(Error::InvalidTwist(format!("twist ({}, {}) given twice", i + 1, j + 1)));
            }
            units.insert((i, j), u);
            units.insert((j, i), adj);
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    units.entry((i, j)).or_insert_with(|| MonomialOperator::identity(shape));
                }
            }
        }
        Ok(Self { shape, ops, units })
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.ops.len()
    }

    pub fn op(&self, i: usize) -> &MonomialOperator {
        &self.ops[i]
    }

    pub fn ops(&self) -> &[MonomialOperator] {
        &self.ops
    }

    /// `U_ij` for `i ≠ j` (0-based).
    pub fn twist(&self, i: usize, j: usize) -> &MonomialOperator {
        &self.units[&(i, j)]
    }

    /// Twists with `i < j`.
    pub fn upper_twists(&self) -> impl Iterator<Item = ((usize, usize), &MonomialOperator)> {
        self.units.iter().filter(|((i, j), _)| i < j).map(|(&k, u)| (k, u))
    }

    pub fn is_isometric(&self) -> bool {
        self.ops.iter().all(MonomialOperator::is_isometric)
    }

    pub fn ensure_isometric(&self) -> Result<()> {
        match self.ops.iter().position(|o| !o.is_isometric()) {
            Some(i) => Err(Error::Lattice(format!("T_{} has non-unimodular weights", i + 1))),
            None => Ok(()),
        }
    }

    /// Generators used to trace where an index can travel: the operators,
    /// and the twists.
    pub(crate) fn generators(&self) -> impl Iterator<Item = &MonomialOperator> {
        self.ops.iter().chain(self.units.values())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn s2() -> LatticeShape {
        LatticeShape::new(2, 0).unwrap()
    }

    #[test]
    fn shift_adjoint_annihilates_origin() {
        let s = MonomialOperator::shift(LatticeShape::new(1, 0).unwrap(), 0).unwrap();
        assert_eq!(s.apply_adjoint(&[0]).unwrap(), None);
        let (p, c) = s.apply_adjoint(&[3]).unwrap().unwrap();
        assert_eq!(p, vec![2]);
        assert_eq!(c, Coefficient::one());
        assert!(s.apply(&[-1]).is_err());
    }

    #[test]
    fn diagonal_weight_a_r() {
        let shape = LatticeShape::new(1, 0).unwrap();
        let theta = PI / 2.0;
        let a = MonomialOperator::new(
            shape,
            AffineMap::identity(1),
            WeightRule::constant(1, 0.5, 0.0).times_factor(WeightFactor {
                base: Base::Phase(theta),
                coeffs: vec![1],
                constant: 0,
            }),
        )
        .unwrap();
        let (p, c) = a.apply(&[3]).unwrap().unwrap();
        assert_eq!(p, vec![3]);
        // r^3 / 2 with r = i
        assert!((c.value() - faer::c64::new(0.0, -0.5)).norm() < 1e-15);
        assert!(!a.is_isometric());
    }

    #[test]
    fn unbounded_weights_rejected() {
        let shape = LatticeShape::new(1, 1).unwrap();
        let grow = WeightRule::one().times_factor(WeightFactor {
            base: Base::Modulus(0.5),
            coeffs: vec![-1, 0],
            constant: 0,
        });
        assert!(MonomialOperator::new(shape, AffineMap::identity(2), grow).is_err());
        let on_bilateral = WeightRule::one().times_factor(WeightFactor {
            base: Base::Modulus(0.5),
            coeffs: vec![0, 1],
            constant: 0,
        });
        assert!(MonomialOperator::new(shape, AffineMap::identity(2), on_bilateral).is_err());
        assert!(MonomialOperator::scalar(shape, 1.5, 0.0).is_err());
    }

    #[test]
    fn compose_and_unitary_adjoint() {
        let shape = LatticeShape::new(1, 1).unwrap();
        let sigma = AffineMap::new(vec![vec![1, 0], vec![1, 1]], vec![0, 1]).unwrap();
        let w = WeightRule::one().times_factor(WeightFactor {
            base: Base::Phase(0.3),
            coeffs: vec![1, 2],
            constant: 1,
        });
        let u = MonomialOperator::new(shape, sigma, w).unwrap();
        assert!(u.is_unitary());
        let adj = u.unitary_adjoint().unwrap();
        let id = adj.compose(&u).unwrap();
        for m in [[0i64, 0], [2, -3], [5, 7]] {
            let (p, c) = id.apply(&m).unwrap().unwrap();
            assert_eq!(p, m.to_vec());
            assert_eq!(c, Coefficient::one());
            let via_adj = adj.apply(&m).unwrap();
            assert_eq!(via_adj, u.apply_adjoint(&m).unwrap());
        }
    }

    #[test]
    fn adjoint_correctness_on_window() {
        let shape = s2();
        let sigma = AffineMap::new(vec![vec![1, 0], vec![2, 1]], vec![1, 0]).unwrap();
        let w = WeightRule::constant(2, 0.7, 0.4).times_factor(WeightFactor {
            base: Base::Phase(1.1),
            coeffs: vec![1, -1],
            constant: 0,
        });
        let t = MonomialOperator::new(shape, sigma, w).unwrap();
        let idx: Vec<Vec<i64>> = (0..6).flat_map(|a| (0..6).map(move |b| vec![a, b])).collect();
        for m in &idx {
            for p in &idx {
                // ⟨T e_m, e_p⟩ against conj⟨e_m, T* e_p⟩
                let fwd = t.apply(m).unwrap().filter(|(q, _)| q == p).map(|(_, c)| c.value());
                let adj = t.apply_adjoint(p).unwrap().filter(|(q, _)| q == m).map(|(_, c)| c.value().conj());
                match (fwd, adj) {
                    (None, None) => {}
                    (Some(a), Some(b)) => assert!((a - b).norm() < 1e-15),
                    other => panic!("mismatch at {m:?} {p:?}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn tuple_twists_fill_both_orders() {
        let shape = s2();
        let t1 = MonomialOperator::shift(shape, 0).unwrap();
        let t2 = MonomialOperator::shift(shape, 1).unwrap();
        let u = MonomialOperator::scalar(shape, 1.0, 0.5).unwrap();
        let t = LatticeTuple::new(shape, vec![t1, t2], vec![((1, 0), u)]).unwrap();
        let (_, c) = t.twist(0, 1).apply(&[0, 0]).unwrap().unwrap();
        assert_eq!(c, Coefficient::phase(-0.5));
        assert!(t.is_isometric());
        let bad = MonomialOperator::shift(shape, 0).unwrap();
        assert!(LatticeTuple::new(shape, vec![bad.clone(), bad.clone()], vec![((0, 1), bad)]).is_err());
    }
}
