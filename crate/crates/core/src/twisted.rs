//! Tuples of contractions commuting up to a family of commuting unitaries
//! `U_ij`: `T_iT_j = U_ij T_jT_i`, `T_i*T_j = U_ij* T_jT_i*` and
//! `T_kU_ij = U_ijT_k`, with `U_ji = U_ij*`.
//!
//! Indices are 0-based in the API and 1-based in reports and messages.

use std::collections::BTreeMap;

use faer::{c64, Mat};
use serde::Serialize;

use crate::canonical;
use crate::error::{Error, Result};
use crate::operator::DenseOperator;
use crate::subspace::SubspaceBasis;
use crate::tolerance::ToleranceProfile;

/// The unitaries `U_ij`, `i < j`; unspecified pairs are the identity.
#[derive(Debug, Clone)]
pub struct TwistFamily {
    n: usize,
    dim: usize,
    units: BTreeMap<(usize, usize), DenseOperator>,
}

impl TwistFamily {
    /// Pairs may be given in either order; `(j, i)` with `j > i` stores the
    /// adjoint under `(i, j)`.
    pub fn new(n: usize, dim: usize, units: Vec<((usize, usize), DenseOperator)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((i, j), u) in units {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { index: i.max(j), len: n });
            }
            if i == j {
                return Err(Error::InvalidTwist(format!("diagonal entry U_{{{0}{0}}} is fixed to I", i + 1)));
            }
            if u.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: u.dim(),
                });
            }
            let (key, val) = if i < j { ((i, j), u) } else { ((j, i), u.adjoint()) };
            if map.insert(key, val).is_some() {
                return Err(Error::InvalidTwist(format!("pair ({}, {}) given twice", key.0 + 1, key.1 + 1)));
            }
        }
        Ok(Self { n, dim, units: map })
    }

    pub fn identity(n: usize, dim: usize) -> Self {
        Self {
            n,
            dim,
            units: BTreeMap::new(),
        }
    }

    /// `U_ij = c_ij · I`.
    pub fn scalar(n: usize, dim: usize, pairs: &[((usize, usize), c64)]) -> Result<Self> {
        Self::new(
            n,
            dim,
            pairs.iter().map(|&(p, c)| (p, DenseOperator::scalar(dim, c))).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `U_ij` with `U_ii = I` and `U_ji = U_ij*`.
    pub fn unit(&self, i: usize, j: usize) -> DenseOperator {
        if i == j {
            return DenseOperator::identity(self.dim);
        }
        let key = (i.min(j), i.max(j));
        match self.units.get(&key) {
            Some(u) if i < j => u.clone(),
            Some(u) => u.adjoint(),
            None => DenseOperator::identity(self.dim),
        }
    }

    /// Explicitly stored pairs `(i, j)`, `i < j`.
    pub fn stored(&self) -> impl Iterator<Item = (&(usize, usize), &DenseOperator)> {
        self.units.iter()
    }

    /// `U'_ij = U_{π(i)π(j)}`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let mut units = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                units.push(((i, j), self.unit(perm[i], perm[j])));
            }
        }
        Self::new(self.n, self.dim, units)
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut units = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                units.push(((i, j), self.unit(i, j).direct_sum(&other.unit(i, j))));
            }
        }
        Self::new(self.n, self.dim + other.dim, units)
    }

    /// Compressions `B* U_ij B`.
    pub fn restrict(&self, b: &SubspaceBasis) -> Result<Self> {
        let mut units = Vec::new();
        for (&(i, j), u) in &self.units {
            units.push(((i, j), u.restrict_to_reducing(b)?.0));
        }
        Self::new(self.n, b.dim(), units)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidPermutation(format!("expected {n} entries, got {}", perm.len())));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidPermutation(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Unitarity and mutual commutation of a twist family.
#[derive(Debug, Clone, Serialize)]
pub struct TwistReport {
    /// `((i, j), max(‖U*U − I‖, ‖UU* − I‖))`, 1-based.
    pub unitarity: Vec<((usize, usize), f64)>,
    /// `((i, j), (k, l), ‖U_ij U_kl − U_kl U_ij‖)`, 1-based.
    pub commutation: Vec<((usize, usize), (usize, usize), f64)>,
    pub pass: bool,
}

pub fn validate_twist(f: &TwistFamily, tol: &ToleranceProfile) -> Result<TwistReport> {
    let id = DenseOperator::identity(f.dim);
    let mut unitarity = Vec::new();
    let mut commutation = Vec::new();
    let pairs: Vec<(usize, usize)> = (0..f.n).flat_map(|i| (i + 1..f.n).map(move |j| (i, j))).collect();
    for &(i, j) in &pairs {
        let u = f.unit(i, j);
        let a = u.adjoint();
        let r = a.compose(&u)?.distance(&id)?.max(u.compose(&a)?.distance(&id)?);
        unitarity.push(((i + 1, j + 1), r));
    }
    for (x, &(i, j)) in pairs.iter().enumerate() {
        for &(k, l) in &pairs[x + 1..] {
            let r = f.unit(i, j).commutator_norm(&f.unit(k, l))?;
            commutation.push(((i + 1, j + 1), (k + 1, l + 1), r));
        }
    }
    let pass = unitarity.iter().all(|u| u.1 <= tol.residual_tol) && commutation.iter().all(|c| c.2 <= tol.residual_tol);
    Ok(TwistReport {
        unitarity,
        commutation,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairResidual {
    pub i: usize,
    pub j: usize,
    /// `‖T_iT_j − U_ij T_jT_i‖`.
    pub forward: f64,
    /// `‖T_i*T_j − U_ij* T_jT_i*‖`.
    pub adjoint: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwistCommuteResidual {
    pub k: usize,
    pub i: usize,
    pub j: usize,
    /// `‖T_kU_ij − U_ijT_k‖`.
    pub residual: f64,
}

/// Residuals of every defining relation, in spectral norm, optionally
/// measured only on a support subspace (`‖X·B‖` for a relation `X`).
#[derive(Debug, Clone, Serialize)]
pub struct RelationReport {
    pub tolerance: f64,
    /// `max(‖T_k‖ − 1, 0)` per operator.
    pub contraction: Vec<f64>,
    pub twist: TwistReport,
    /// Ordered pairs `(i, j)`, `i ≠ j`, lexicographic.
    pub pairs: Vec<PairResidual>,
    /// `(k, (i, j))` with `i < j`, lexicographic.
    pub twist_commute: Vec<TwistCommuteResidual>,
    pub pass: bool,
    pub first_failure: Option<String>,
    /// Isometric pairs passing the adjoint relation but failing the forward
    /// one; the implication between the two is expected and a hit needs review.
    pub review: Vec<String>,
}

impl RelationReport {
    pub fn max_pair_residual(&self) -> f64 {
        self.pairs.iter().map(|p| p.forward.max(p.adjoint)).fold(0.0, f64::max)
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairResidual> {
        self.pairs.iter().find(|p| p.i == i + 1 && p.j == j + 1)
    }
}

fn on_support(x: &DenseOperator, support: Option<&SubspaceBasis>) -> f64 {
    match support {
        None => x.norm(),
        Some(b) => {
            let xb = crate::dense::matmul(x.mat(), b.columns());
            crate::dense::spectral_norm(xb.as_ref())
        }
    }
}

/// Checks all relations for `ops` with twist `twist`; see [`RelationReport`].
pub fn verify_relations(
    ops: &[DenseOperator],
    twist: &TwistFamily,
    tol: &ToleranceProfile,
    support: Option<&SubspaceBasis>,
) -> Result<RelationReport> {
    let n = ops.len();
    if twist.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: twist.n(),
        });
    }
    let dim = twist.dim();
    for t in ops {
        if t.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: t.dim(),
            });
        }
    }
    if let Some(b) = support {
        if b.ambient_dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: b.ambient_dim(),
            });
        }
    }
    let eps = tol.residual_tol;
    let contraction: Vec<f64> = ops.iter().map(|t| (t.norm() - 1.0).max(0.0)).collect();
    let twist_report = validate_twist(twist, tol)?;
    let adj: Vec<DenseOperator> = ops.iter().map(|t| t.adjoint()).collect();

    // words are applied to the support columns (or to I) from the right
    let base: Option<Mat<c64>> = support.map(|b| b.columns().to_owned());
    let apply = |x: &DenseOperator, r: Option<&Mat<c64>>| -> Mat<c64> {
        match r {
            Some(r) => crate::dense::matmul(x.mat(), r.as_ref()),
            None => x.mat().to_owned(),
        }
    };
    let gap = |l: Mat<c64>, r: Mat<c64>| crate::dense::spectral_norm((&l - &r).as_ref());
    let mut units = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let u = twist.unit(i, j);
            units.insert((j, i), u.adjoint());
            units.insert((i, j), u);
        }
    }
    let on_base: Vec<Mat<c64>> = ops.iter().map(|t| apply(t, base.as_ref())).collect();
    let adj_on_base: Vec<Mat<c64>> = adj.iter().map(|t| apply(t, base.as_ref())).collect();

    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (u, u_adj) = (&units[&(i, j)], &units[&(j, i)]);
            let fwd = gap(
                apply(&ops[i], Some(&on_base[j])),
                apply(u, Some(&apply(&ops[j], Some(&on_base[i])))),
            );
            let bwd = gap(
                apply(&adj[i], Some(&on_base[j])),
                apply(u_adj, Some(&apply(&ops[j], Some(&adj_on_base[i])))),
            );
            pairs.push(PairResidual {
                i: i + 1,
                j: j + 1,
                forward: fwd,
                adjoint: bwd,
            });
        }
    }
    let mut twist_commute = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let u = &units[&(i, j)];
            let u_on_base = apply(u, base.as_ref());
            for k in 0..n {
                twist_commute.push(TwistCommuteResidual {
                    k: k + 1,
                    i: i + 1,
                    j: j + 1,
                    residual: gap(apply(&ops[k], Some(&u_on_base)), apply(u, Some(&on_base[k]))),
                });
            }
        }
    }
    twist_commute.sort_by_key(|c| (c.k, c.i, c.j));

    let mut first_failure = None;
    let mut note = |msg: String| {
        if first_failure.is_none() {
            first_failure = Some(msg);
        }
    };
    for (k, &c) in contraction.iter().enumerate() {
        if c > eps {
            note(format!("T_{} is not a contraction (norm exceeds 1 by {c:.3e})", k + 1));
        }
    }
    for &((i, j), r) in &twist_report.unitarity {
        if r > eps {
            note(format!("twist U_{{{i}{j}}} is not unitary (residual {r:.3e})"));
        }
    }
    for &((i, j), (k, l), r) in &twist_report.commutation {
        if r > eps {
            note(format!("twists U_{{{i}{j}}} and U_{{{k}{l}}} do not commute (residual {r:.3e})"));
        }
    }
    for p in &pairs {
        if p.forward > eps {
            note(format!("forward relation ({}, {}) fails (residual {:.3e})", p.i, p.j, p.forward));
        }
        if p.adjoint > eps {
            note(format!("adjoint relation ({}, {}) fails (residual {:.3e})", p.i, p.j, p.adjoint));
        }
    }
    for c in &twist_commute {
        if c.residual > eps {
            note(format!(
                "T_{} does not commute with U_{{{}{}}} (residual {:.3e})",
                c.k, c.i, c.j, c.residual
            ));
        }
    }

    let id = DenseOperator::identity(dim);
    let isometric = |k: usize| {
        adj[k]
            .compose(&ops[k])
            .and_then(|g| g.distance(&id))
            .map(|r| r <= eps)
            .unwrap_or(false)
    };
    let review = pairs
        .iter()
        .filter(|p| p.adjoint <= eps && p.forward > eps && isometric(p.i - 1) && isometric(p.j - 1))
        .map(|p| format!("isometric pair ({}, {}) passes the adjoint relation but not the forward one", p.i, p.j))
        .collect();

    Ok(RelationReport {
        tolerance: eps,
        contraction,
        twist: twist_report,
        pairs,
        twist_commute,
        pass: first_failure.is_none(),
        first_failure,
        review,
    })
}

/// Operators `T_1..T_n` with their twist family and the relation report from
/// construction time.
#[derive(Debug, Clone)]
pub struct TwistedTuple {
    ops: Vec<DenseOperator>,
    twist: TwistFamily,
    tol: ToleranceProfile,
    report: RelationReport,
}

impl TwistedTuple {
    /// Strict construction: fails with [`Error::RelationFailure`] unless every
    /// relation holds.
    pub fn new(ops: Vec<DenseOperator>, twist: TwistFamily, tol: ToleranceProfile) -> Result<Self> {
        let t = Self::audit(ops, twist, tol)?;
        if !t.report.pass {
            return Err(Error::RelationFailure(t.report.first_failure.clone().unwrap_or_default()));
        }
        Ok(t)
    }

    /// Audit construction: keeps the tuple whatever the relations say; the
    /// report is available through [`Self::report`].
    pub fn audit(ops: Vec<DenseOperator>, twist: TwistFamily, tol: ToleranceProfile) -> Result<Self> {
        tol.validate()?;
        if ops.is_empty() {
            return Err(Error::InvalidParameter("a tuple needs at least one operator".into()));
        }
        let report = verify_relations(&ops, &twist, &tol, None)?;
        Ok(Self { ops, twist, tol, report })
    }

    pub fn n(&self) -> usize {
        self.ops.len()
    }

    pub fn dim(&self) -> usize {
        self.twist.dim()
    }

    pub fn op(&self, i: usize) -> &DenseOperator {
        &self.ops[i]
    }

    pub fn ops(&self) -> &[DenseOperator] {
        &self.ops
    }

    pub fn twist(&self) -> &TwistFamily {
        &self.twist
    }

    pub fn tol(&self) -> &ToleranceProfile {
        &self.tol
    }

    pub fn report(&self) -> &RelationReport {
        &self.report
    }

    pub fn with_tol(&self, tol: ToleranceProfile) -> Result<Self> {
        Self::audit(self.ops.clone(), self.twist.clone(), tol)
    }

    /// `(T_{π(1)}, …, T_{π(n)})` with `U'_ij = U_{π(i)π(j)}`, audit mode.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n())?;
        let ops = perm.iter().map(|&p| self.ops[p].clone()).collect();
        Self::audit(ops, self.twist.permuted(perm)?, self.tol)
    }

    /// Componentwise direct sum, audit mode.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        let ops = self.ops.iter().zip(&other.ops).map(|(a, b)| a.direct_sum(b)).collect();
        Self::audit(ops, self.twist.direct_sum(&other.twist)?, self.tol)
    }

    /// Compressions of all operators and twists to `span(b)`, audit mode.
    pub fn restrict(&self, b: &SubspaceBasis) -> Result<Self> {
        let ops = self
            .ops
            .iter()
            .map(|t| t.restrict_to_reducing(b).map(|x| x.0))
            .collect::<Result<Vec<_>>>()?;
        Self::audit(ops, self.twist.restrict(b)?, self.tol)
    }
}

/// Relation report of a tuple on the whole space.
pub fn verify_tuple(t: &TwistedTuple) -> RelationReport {
    t.report.clone()
}

/// Relation report measured on `span(support)` only.
pub fn verify_tuple_on(t: &TwistedTuple, support: &SubspaceBasis) -> Result<RelationReport> {
    verify_relations(&t.ops, &t.twist, &t.tol, Some(support))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LemmaPart {
    /// `[T_i, T_j^m T_j^{*m}]` and `[T_i, T_j^{*m} T_j^m]`.
    Forward,
    /// `[T_i*, T_j^m T_j^{*m}]` and `[T_i*, T_j^{*m} T_j^m]`.
    Adjoint,
    /// `[T_i^l T_i^{*l}, I − T_j^m T_j^{*m}]` and `[T_i^{*l} T_i^l, I − T_j^{*m} T_j^m]`.
    Products,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaEntry {
    pub i: usize,
    pub j: usize,
    pub part: LemmaPart,
    /// Which of the two commutators of the part (0 or 1).
    pub variant: u8,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub l: usize,
    pub m: usize,
    pub entries: Vec<LemmaEntry>,
    pub max_residual: f64,
}

/// Commutators between `T_i` and the range/co-range projections of powers of
/// `T_j`, for all `i ≠ j`.
pub fn lemma_commutation_report(t: &TwistedTuple, l: usize, m: usize) -> Result<LemmaReport> {
    lemma_report_impl(t, l, m, None)
}

/// As [`lemma_commutation_report`], measured on `span(support)`.
pub fn lemma_commutation_report_on(t: &TwistedTuple, l: usize, m: usize, support: &SubspaceBasis) -> Result<LemmaReport> {
    lemma_report_impl(t, l, m, Some(support))
}

fn lemma_report_impl(t: &TwistedTuple, l: usize, m: usize, support: Option<&SubspaceBasis>) -> Result<LemmaReport> {
    let n = t.n();
    let id = DenseOperator::identity(t.dim());
    let commutator = |a: &DenseOperator, b: &DenseOperator| -> Result<f64> {
        let c = a.compose(b)?.sub(&b.compose(a)?)?;
        Ok(on_support(&c, support))
    };
    let mut entries = Vec::new();
    let powers: Vec<(DenseOperator, DenseOperator)> = t.ops.iter().map(|x| (x.power(m as i64), x.power(-(m as i64)))).collect();
    let lpowers: Vec<(DenseOperator, DenseOperator)> = t.ops.iter().map(|x| (x.power(l as i64), x.power(-(l as i64)))).collect();
    for i in 0..n {
        let ti = &t.ops[i];
        let ti_adj = ti.adjoint();
        let li = lpowers[i].0.compose(&lpowers[i].1)?;
        let li_star = lpowers[i].1.compose(&lpowers[i].0)?;
        for j in 0..n {
            if i == j {
                continue;
            }
            let range = powers[j].0.compose(&powers[j].1)?;
            let corange = powers[j].1.compose(&powers[j].0)?;
            let values = [
                (LemmaPart::Forward, 0, commutator(ti, &range)?),
                (LemmaPart::Forward, 1, commutator(ti, &corange)?),
                (LemmaPart::Adjoint, 0, commutator(&ti_adj, &range)?),
                (LemmaPart::Adjoint, 1, commutator(&ti_adj, &corange)?),
                (LemmaPart::Products, 0, commutator(&li, &id.sub(&range)?)?),
                (LemmaPart::Products, 1, commutator(&li_star, &id.sub(&corange)?)?),
            ];
            for (part, variant, residual) in values {
                entries.push(LemmaEntry {
                    i: i + 1,
                    j: j + 1,
                    part,
                    variant,
                    residual,
                });
            }
        }
    }
    let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    Ok(LemmaReport {
        l,
        m,
        entries,
        max_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub index: usize,
    pub unitary_dim: usize,
    pub cnu_dim: usize,
    /// `(j, residual against H_u, residual against H_¬u)`, 1-based `j`.
    pub residuals: Vec<(usize, f64, f64)>,
    pub pass: bool,
}

/// Checks that the canonical decomposition of `T_i` reduces every other `T_j`.
pub fn reduction_check(t: &TwistedTuple, i: usize) -> Result<ReductionReport> {
    if i >= t.n() {
        return Err(Error::IndexOutOfRange { index: i, len: t.n() });
    }
    let split = canonical::canonical_decompose(&t.ops[i], &t.tol)?;
    let mut residuals = Vec::new();
    for (j, tj) in t.ops.iter().enumerate() {
        if j == i {
            continue;
        }
        residuals.push((
            j + 1,
            tj.reducing_residual(&split.unitary_space)?,
            tj.reducing_residual(&split.cnu_space)?,
        ));
    }
    let pass = residuals.iter().all(|&(_, a, b)| a <= t.tol.residual_tol && b <= t.tol.residual_tol);
    Ok(ReductionReport {
        index: i + 1,
        unitary_dim: split.unitary_space.dim(),
        cnu_dim: split.cnu_space.dim(),
        residuals,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::random::{haar_unitary, phase_diagonal, random_contraction, seeded};
    use crate::zoo::{clock_shift_tuple, cyclic_shift, clock};
    use proptest::prelude::*;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn re(x: f64) -> c64 {
        c64::new(x, 0.0)
    }

    #[test]
    fn twist_validation() {
        let f = TwistFamily::identity(3, 4);
        let r = validate_twist(&f, &tol()).unwrap();
        assert!(r.pass);
        assert!(r.unitarity.iter().all(|u| u.1 == 0.0));

        let w = c64::cis(0.3);
        let f = TwistFamily::scalar(2, 3, &[((0, 1), w)]).unwrap();
        assert!(validate_twist(&f, &tol()).unwrap().pass);
        assert!((f.unit(1, 0).entry(0, 0) - w.conj()).norm() < 1e-16);

        // Hermitian G + G* with a seeded G: its unitarity defect is computed
        // directly from the spectrum, |λ² − 1| maximised.
        let g = random_contraction(&mut seeded(4), 3, 1.0);
        let h = g.add(&g.adjoint()).unwrap();
        let ev = h.mat().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let expected = ev.iter().map(|l| (l * l - 1.0).abs()).fold(0.0, f64::max);
        let f = TwistFamily::new(2, 3, vec![((0, 1), h)]).unwrap();
        let r = validate_twist(&f, &tol()).unwrap();
        assert!(!r.pass);
        assert!(r.unitarity[0].1 > 0.1);
        assert!((r.unitarity[0].1 - expected).abs() < 1e-12);
    }

    #[test]
    fn twist_rejects_bad_pairs() {
        assert!(TwistFamily::new(2, 2, vec![((0, 0), DenseOperator::identity(2))]).is_err());
        assert!(TwistFamily::new(2, 2, vec![((0, 2), DenseOperator::identity(2))]).is_err());
        assert!(TwistFamily::new(2, 2, vec![((0, 1), DenseOperator::identity(3))]).is_err());
    }

    #[test]
    fn commuting_diagonals_pass() {
        let a = DenseOperator::diagonal(&[re(0.5), re(0.2), c64::cis(1.0)]);
        let b = DenseOperator::diagonal(&[re(0.9), c64::new(0.0, 0.3), re(1.0)]);
        let t = TwistedTuple::new(vec![a, b], TwistFamily::identity(2, 3), tol()).unwrap();
        assert!(t.report().pass);
        assert_eq!(t.report().pairs.len(), 2);
        assert_eq!((t.report().pairs[0].i, t.report().pairs[0].j), (1, 2));
    }

    #[test]
    fn clock_shift_relations_and_failure_naming() {
        let t = clock_shift_tuple(5, &[1.0, 1.0], None).unwrap();
        assert!(t.report().pass);
        // Wrong twist: the forward relation (1, 2) is reported first.
        let bad = TwistedTuple::audit(t.ops().to_vec(), TwistFamily::identity(2, 5), tol()).unwrap();
        assert!(!bad.report().pass);
        assert!(bad.report().first_failure.as_ref().unwrap().starts_with("forward relation (1, 2)"));
        assert!(matches!(
            TwistedTuple::new(t.ops().to_vec(), TwistFamily::identity(2, 5), tol()),
            Err(Error::RelationFailure(_))
        ));
    }

    #[test]
    fn lemma_report_m_zero_is_exact() {
        let t = clock_shift_tuple(4, &[0.5, 0.7], None).unwrap();
        let r = lemma_commutation_report(&t, 0, 0).unwrap();
        assert_eq!(r.max_residual, 0.0);
        let r = lemma_commutation_report(&t, 2, 2).unwrap();
        assert!(r.max_residual <= 1e-12);
        assert_eq!(r.entries.len(), 2 * 6);
    }

    #[test]
    fn lemma_holds_for_weighted_shift_against_clock() {
        // T_1 = C, T_2 = S·diag(1, 0.5, 1) on C^3: a diagonal weight commutes
        // with C, so both relations survive and so does the lemma
        let w = c64::cis(std::f64::consts::TAU / 3.0);
        let d = DenseOperator::diagonal(&[re(1.0), re(0.5), re(1.0)]);
        let t2 = cyclic_shift(3).compose(&d).unwrap();
        let t = TwistedTuple::audit(vec![clock(3, w), t2], TwistFamily::scalar(2, 3, &[((0, 1), w)]).unwrap(), tol()).unwrap();
        assert!(t.report().pass, "{:?}", t.report().first_failure);
        let r = lemma_commutation_report(&t, 2, 3).unwrap();
        assert!(r.max_residual <= 1e-12, "{}", r.max_residual);
    }

    #[test]
    fn reduction_examples() {
        let single = TwistedTuple::new(vec![random_contraction(&mut seeded(1), 3, 0.8)], TwistFamily::identity(1, 3), tol()).unwrap();
        let r = reduction_check(&single, 0).unwrap();
        assert!(r.pass && r.residuals.is_empty());

        let cs = clock_shift_tuple(3, &[1.0, 1.0], None).unwrap();
        let r = reduction_check(&cs, 0).unwrap();
        assert!(r.pass);
        assert_eq!(r.unitary_dim, 3);
        assert!(matches!(reduction_check(&cs, 2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn planted_doubly_commuting_pair_reduces() {
        // (U ⊕ G_1) and (V ⊕ G_2) acting as tensor factors: T_1 = A ⊗ I, T_2 = I ⊗ B.
        let mut rng = seeded(12);
        let a = phase_diagonal(&mut rng, 2).direct_sum(&random_contraction(&mut rng, 2, 0.9));
        let b = phase_diagonal(&mut rng, 1).direct_sum(&random_contraction(&mut rng, 2, 0.9));
        let q = haar_unitary(&mut rng, 12);
        let t1 = a.kron(&DenseOperator::identity(3)).conjugate_by(&q).unwrap();
        let t2 = DenseOperator::identity(4).kron(&b).conjugate_by(&q).unwrap();
        let t = TwistedTuple::new(vec![t1, t2], TwistFamily::identity(2, 12), tol()).unwrap();
        for i in 0..2 {
            let r = reduction_check(&t, i).unwrap();
            assert!(r.pass, "{r:?}");
        }
        assert_eq!(reduction_check(&t, 0).unwrap().unitary_dim, 6);
    }

    #[test]
    fn support_restricts_residuals() {
        // A truncated shift commutes with itself trivially; pair it with a
        // diagonal that breaks commutation only at the last coordinate.
        let s = crate::operator::jordan_shift(4);
        let d = DenseOperator::diagonal(&[re(1.0), re(1.0), re(1.0), re(0.5)]);
        let t = TwistedTuple::audit(vec![s, d], TwistFamily::identity(2, 4), tol()).unwrap();
        assert!(!t.report().pass);
        let support = SubspaceBasis::coordinate(4, &[0, 1], tol()).unwrap();
        let r = verify_tuple_on(&t, &support).unwrap();
        assert!(r.pairs.iter().all(|p| p.forward == 0.0));
    }

    #[test]
    fn permutation_validation() {
        assert!(check_permutation(&[1, 0], 2).is_ok());
        assert!(check_permutation(&[1, 1], 2).is_err());
        assert!(check_permutation(&[0], 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn permuting_preserves_verification(d in 2usize..6, s1 in 0.2f64..1.0, s2 in 0.2f64..1.0, wrong in any::<bool>()) {
            let t = clock_shift_tuple(d, &[s1, s2], None).unwrap();
            let t = if wrong {
                TwistedTuple::audit(t.ops().to_vec(), TwistFamily::identity(2, d), tol()).unwrap()
            } else {
                t
            };
            let p = t.permuted(&[1, 0]).unwrap();
            prop_assert_eq!(p.report().pass, t.report().pass);
        }
    }
}
