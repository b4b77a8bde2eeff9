//! Coefficients of monomial operators kept as formal products
//! `∏ ρ_k^{a_k} · ∏ e^{iθ_k b_k}` with integer exponents.
//!
//! Two coefficients built from the same bases compare exactly by their
//! exponent maps. Phases are stored by `|θ|` (normalised to `(−π, π]`) with the
//! sign moved into the exponent, so `e^{iθ}` and `e^{−iθ}` share a key.
//! Products whose symbolic forms differ (say `e^{iπ/2}·e^{iπ/2}` against
//! `−1` written with another base) fall back to a numeric comparison.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;

use faer::c64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

/// Base of a factor, keyed by the bit pattern of the (normalised) float.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactorKey {
    Modulus(u64),
    Phase(u64),
}

impl FactorKey {
    pub fn base(&self) -> f64 {
        match *self {
            FactorKey::Modulus(b) | FactorKey::Phase(b) => f64::from_bits(b),
        }
    }
}

/// `θ` reduced to `(−π, π]`.
pub fn normalize_phase(theta: f64) -> f64 {
    if -PI < theta && theta <= PI {
        return theta;
    }
    let t = theta.rem_euclid(TAU);
    if t > PI {
        t - TAU
    } else {
        t
    }
}

/// Key and exponent sign for a modulus or phase base; `None` when the base is
/// trivial (`ρ = 1` or `θ ≡ 0`).
pub fn key_of_modulus(rho: f64) -> Option<FactorKey> {
    (rho != 1.0).then(|| FactorKey::Modulus(rho.to_bits()))
}

pub fn key_of_phase(theta: f64) -> Option<(FactorKey, i64)> {
    let t = normalize_phase(theta);
    if t == 0.0 {
        return None;
    }
    let sign = if t < 0.0 { -1 } else { 1 };
    Some((FactorKey::Phase(t.abs().to_bits()), sign))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct Coefficient {
    factors: BTreeMap<FactorKey, i64>,
}

/// Outcome of comparing two coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Match {
    Exact,
    Numeric,
    Differ,
}

/// Relative tolerance of the numeric fallback.
pub const NUMERIC_RTOL: f64 = 1e-12;

impl Coefficient {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn modulus(rho: f64) -> Self {
        let mut c = Self::one();
        c.mul_factor_modulus(rho, 1);
        c
    }

    pub fn phase(theta: f64) -> Self {
        let mut c = Self::one();
        c.mul_factor_phase(theta, 1);
        c
    }

    /// `ρ e^{iθ}` split into its modulus and phase factors.
    pub fn polar(rho: f64, theta: f64) -> Self {
        let mut c = Self::modulus(rho);
        c.mul_factor_phase(theta, 1);
        c
    }

    fn bump(&mut self, key: FactorKey, e: i64) {
        if e == 0 {
            return;
        }
        let slot = self.factors.entry(key).or_insert(0);
        *slot += e;
        if *slot == 0 {
            self.factors.remove(&key);
        }
    }

    pub fn mul_factor_modulus(&mut self, rho: f64, e: i64) {
        if let Some(k) = key_of_modulus(rho) {
            self.bump(k, e);
        }
    }

    pub fn mul_factor_phase(&mut self, theta: f64, e: i64) {
        if let Some((k, s)) = key_of_phase(theta) {
            self.bump(k, s * e);
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, &e) in &other.factors {
            out.bump(k, e);
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .map(|(&k, &e)| match k {
                    FactorKey::Phase(_) => (k, -e),
                    FactorKey::Modulus(_) => (k, e),
                })
                .collect(),
        }
    }

    /// `|c|`, symbolically.
    pub fn abs(&self) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .filter(|(k, _)| matches!(k, FactorKey::Modulus(_)))
                .map(|(&k, &e)| (k, e))
                .collect(),
        }
    }

    /// True when no modulus factor is left, i.e. `|c| = 1` exactly.
    pub fn is_unimodular(&self) -> bool {
        self.factors.keys().all(|k| matches!(k, FactorKey::Phase(_)))
    }

    pub fn factors(&self) -> impl Iterator<Item = (&FactorKey, &i64)> {
        self.factors.iter()
    }

    pub fn value(&self) -> c64 {
        let mut modulus = 1.0f64;
        let mut arg = 0.0f64;
        for (k, &e) in &self.factors {
            match *k {
                FactorKey::Modulus(_) => modulus *= k.base().powi(e as i32),
                FactorKey::Phase(_) => arg += k.base() * e as f64,
            }
        }
        c64::cis(normalize_phase(arg)) * modulus
    }

    pub fn compare(&self, other: &Self) -> Match {
        if self == other {
            return Match::Exact;
        }
        let (a, b) = (self.value(), other.value());
        if (a - b).norm() <= NUMERIC_RTOL * a.norm().max(b.norm()).max(1.0) {
            Match::Numeric
        } else {
            Match::Differ
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|(k, e)| match k {
                FactorKey::Modulus(_) => format!("{}^{}", k.base(), e),
                FactorKey::Phase(_) => format!("e^(i{}*{})", k.base(), e),
            })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.value();
        let mut st = s.serialize_struct("Coefficient", 3)?;
        st.serialize_field("symbolic", &self.to_string())?;
        st.serialize_field("re", &v.re)?;
        st.serialize_field("im", &v.im)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phases_cancel_symbolically() {
        let t = 2.0 * PI / 5.0;
        let a = Coefficient::phase(t);
        let b = Coefficient::phase(-t);
        assert_eq!(a.mul(&b), Coefficient::one());
        assert_eq!(a.conj(), b);
        assert_eq!(a.compare(&b.conj()), Match::Exact);
    }

    #[test]
    fn numeric_fallback() {
        let q = Coefficient::phase(PI / 2.0);
        let sq = q.mul(&q);
        let minus = Coefficient::phase(PI);
        assert_ne!(sq, minus);
        assert_eq!(sq.compare(&minus), Match::Numeric);
        assert_eq!(q.compare(&minus), Match::Differ);
    }

    #[test]
    fn modulus_and_value() {
        let c = Coefficient::polar(0.5, PI / 2.0);
        let v = c.mul(&c).value();
        assert!((v - c64::new(-0.25, 0.0)).norm() < 1e-16);
        assert!(!c.is_unimodular());
        assert!(Coefficient::phase(1.0).is_unimodular());
        assert_eq!(c.abs(), Coefficient::modulus(0.5));
        assert_eq!(Coefficient::polar(1.0, 0.0), Coefficient::one());
    }
}
