//! Slice classification of lattice basis vectors for isometric tuples.
//!
//! For a tuple of monomial isometries every Wold projection is diagonal in
//! the lattice basis, so each `e_m` lies in exactly one slice `H_Λ`:
//! coordinate `i` belongs to `Λ` iff the backward orbit `σ_i^{-k}(m)` leaves
//! the admissible set. The decision uses structural certificates where the
//! index map allows one and otherwise walks at most `step_cap` steps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::affine::AffineMap;
use super::coefficient::{Coefficient, Match};
use super::monomial::{LatticeTuple, MonomialOperator};
use super::{format_index, Image, Index, LatticeShape, Window};
use crate::error::{Error, Result};
use crate::multi::SliceLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitOutcome {
    /// `σ^{-k}(m)` is admissible exactly for `k ≤ steps`.
    Exits { steps: usize },
    Never,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// Read off the index map: a unilateral offset forces exit, identity
    /// unilateral rows forbid it.
    Structural,
    /// Found by walking the orbit within the step cap.
    Explored,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateOrbit {
    /// 1-based.
    pub coordinate: usize,
    pub outcome: OrbitOutcome,
    pub certificate: Option<Certificate>,
}

/// `e_m = scalar · T_{path[0]} ⋯ T_{path[last]} e_core`, where
/// `scalar·conj(scalar) = 1`. `path` lists (1-based) the adjoints applied to
/// `e_m`, in order.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub path: Vec<usize>,
    pub core: Index,
    pub scalar: Coefficient,
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceClassification {
    pub index: Index,
    /// `None` when some coordinate is undecided.
    pub label: Option<SliceLabel>,
    pub coordinates: Vec<CoordinateOrbit>,
    pub witness: Option<Witness>,
    /// The decision looked at indices outside the window it was asked about.
    pub boundary: bool,
}

struct Walk {
    outcome: OrbitOutcome,
    certificate: Option<Certificate>,
    outside: bool,
}

fn unilateral_offset(sigma: &AffineMap, shape: &LatticeShape) -> bool {
    (0..shape.d_plus).any(|p| sigma.delta()[p] > 0)
}

fn backward_orbit(op: &MonomialOperator, m: &[i64], cap: usize, window: Option<&Window>) -> Walk {
    let shape = op.shape();
    let sigma = op.sigma();
    if sigma.is_bijective_on(&shape) {
        return Walk {
            outcome: OrbitOutcome::Never,
            certificate: Some(Certificate::Structural),
            outside: false,
        };
    }
    // With a positive unilateral offset that coordinate drops by at least the
    // offset per backward step, so the walk below terminates on its own.
    let structural = unilateral_offset(sigma, &shape);
    let inv = sigma.inverse();
    let mut cur = m.to_vec();
    let mut outside = false;
    let mut steps = 0usize;
    loop {
        let prev = inv.apply(&cur);
        if !shape.is_admissible(&prev) {
            let certificate = if structural {
                Certificate::Structural
            } else {
                Certificate::Explored
            };
            return Walk {
                outcome: OrbitOutcome::Exits { steps },
                certificate: Some(certificate),
                outside,
            };
        }
        if !structural && steps >= cap {
            return Walk {
                outcome: OrbitOutcome::Undecided,
                certificate: None,
                outside,
            };
        }
        outside |= window.is_some_and(|w| !w.contains(&prev));
        cur = prev;
        steps += 1;
    }
}

fn strip(t: &LatticeTuple, m: &[i64], label: SliceLabel, guard: usize, window: Option<&Window>) -> Result<Option<(Witness, bool)>> {
    let mut cur: Image = Some((m.to_vec(), Coefficient::one()));
    let mut path = Vec::new();
    let mut outside = false;
    loop {
        let mut progressed = false;
        for i in 0..t.n() {
            if !label.contains(i) {
                continue;
            }
            loop {
                let next = t.op(i).act(cur.clone(), true)?;
                if next.is_none() {
                    break;
                }
                if path.len() >= guard {
                    return Ok(None);
                }
                path.push(i + 1);
                outside |= window.is_some_and(|w| !w.contains(&next.as_ref().expect("checked").0));
                cur = next;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    let (core, scalar) = cur.expect("stripping never annihilates the current vector");
    Ok(Some((Witness { path, core, scalar }, outside)))
}

/// Applies `T_{path[last]}` first and `T_{path[0]}` last to `e_core`, then
/// multiplies by the witness scalar. Sound witnesses give `(m, 1)`.
pub fn replay_witness(t: &LatticeTuple, w: &Witness) -> Result<Image> {
    let mut cur: Image = Some((w.core.clone(), w.scalar.clone()));
    for &i in w.path.iter().rev() {
        if i == 0 || i > t.n() {
            return Err(Error::IndexOutOfRange { index: i, len: t.n() });
        }
        cur = t.op(i - 1).act(cur, false)?;
    }
    Ok(cur)
}

pub fn witness_is_sound(t: &LatticeTuple, m: &[i64], w: &Witness) -> Result<bool> {
    Ok(match replay_witness(t, w)? {
        Some((p, c)) => p == m && c.compare(&Coefficient::one()) != Match::Differ,
        None => false,
    })
}

pub(crate) fn classify_in(t: &LatticeTuple, m: &[i64], cap: usize, window: Option<&Window>) -> Result<SliceClassification> {
    let shape = t.shape();
    shape.check(m)?;
    let mut coordinates = Vec::with_capacity(t.n());
    let mut mask = 0u32;
    let mut decided = true;
    let mut boundary = false;
    for i in 0..t.n() {
        let walk = backward_orbit(t.op(i), m, cap, window);
        boundary |= walk.outside;
        match walk.outcome {
            OrbitOutcome::Exits { .. } => mask |= 1 << i,
            OrbitOutcome::Undecided => decided = false,
            OrbitOutcome::Never => {}
        }
        coordinates.push(CoordinateOrbit {
            coordinate: i + 1,
            outcome: walk.outcome,
            certificate: walk.certificate,
        });
    }
    let mut out = SliceClassification {
        index: m.to_vec(),
        label: None,
        coordinates,
        witness: None,
        boundary,
    };
    if !decided {
        return Ok(out);
    }
    let label = SliceLabel::new(t.n(), mask)?;
    let norm1: i64 = m.iter().map(|v| v.abs()).sum();
    let guard = cap.saturating_mul(t.n()).saturating_add(norm1 as usize * t.n()) + 1;
    match strip(t, m, label, guard, window)? {
        Some((w, outside)) => {
            out.boundary |= outside;
            out.witness = Some(w);
            out.label = Some(label);
        }
        None => {
            for c in out.coordinates.iter_mut().filter(|c| label.contains(c.coordinate - 1)) {
                c.outcome = OrbitOutcome::Undecided;
                c.certificate = None;
            }
        }
    }
    Ok(out)
}

/// Slice of `e_m`; `step_cap` bounds orbit walks that have no structural
/// certificate.
pub fn classify_index(t: &LatticeTuple, m: &[i64], step_cap: usize) -> Result<SliceClassification> {
    t.ensure_isometric()?;
    classify_in(t, m, step_cap, None)
}

#[derive(Debug, Clone)]
pub struct SliceCounts {
    pub window: usize,
    pub total: usize,
    pub counts: BTreeMap<SliceLabel, usize>,
    pub undecided: Vec<Index>,
    /// Classified indices whose decision needed indices outside the window.
    pub boundary: Vec<Index>,
    pub classifications: Vec<SliceClassification>,
}

impl Serialize for SliceCounts {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let counts: BTreeMap<String, usize> = self.counts.iter().map(|(l, c)| (l.to_string(), *c)).collect();
        let fmt = |v: &[Index]| v.iter().map(|m| format_index(m)).collect::<Vec<_>>();
        let mut st = s.serialize_struct("SliceCounts", 5)?;
        st.serialize_field("window", &self.window)?;
        st.serialize_field("total", &self.total)?;
        st.serialize_field("counts", &counts)?;
        st.serialize_field("undecided", &fmt(&self.undecided))?;
        st.serialize_field("boundary", &fmt(&self.boundary))?;
        st.end()
    }
}

impl SliceCounts {
    pub fn count(&self, label: SliceLabel) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    pub fn classified(&self) -> usize {
        self.counts.values().sum()
    }
}

pub fn slice_dimensions(t: &LatticeTuple, window: usize, step_cap: usize) -> Result<SliceCounts> {
    t.ensure_isometric()?;
    let w = Window::new(t.shape(), window)?;
    let idx: Vec<Index> = w.indices().collect();
    let classifications = idx
        .par_iter()
        .map(|m| classify_in(t, m, step_cap, Some(&w)))
        .collect::<Result<Vec<_>>>()?;
    let mut counts: BTreeMap<SliceLabel, usize> = SliceLabel::all(t.n()).map(|l| (l, 0)).collect();
    let mut undecided = Vec::new();
    let mut boundary = Vec::new();
    for c in &classifications {
        match c.label {
            Some(l) => {
                *counts.get_mut(&l).expect("all labels present") += 1;
                if c.boundary {
                    boundary.push(c.index.clone());
                }
            }
            None => undecided.push(c.index.clone()),
        }
    }
    Ok(SliceCounts {
        window,
        total: idx.len(),
        counts,
        undecided,
        boundary,
        classifications,
    })
}

/// Window indices with `T_i* e_m = 0` for every `i ∈ Λ`.
pub fn wandering_set(t: &LatticeTuple, label: SliceLabel, window: usize) -> Result<Vec<Index>> {
    t.ensure_isometric()?;
    if label.n() != t.n() {
        return Err(Error::DimensionMismatch {
            expected: t.n(),
            found: label.n(),
        });
    }
    let w = Window::new(t.shape(), window)?;
    let mut out = Vec::new();
    for m in w.indices() {
        let mut inside = true;
        for i in 0..t.n() {
            if label.contains(i) && t.op(i).apply_adjoint(&m)?.is_some() {
                inside = false;
                break;
            }
        }
        if inside {
            out.push(m);
        }
    }
    Ok(out)
}

/// The four index sets of an isometric pair evaluated from the explicit
/// formulas
///
/// * `uu = ⋂ T_1^{a} T_2^{b} H`
/// * `us = ⊕_b T_2^{b} (⋂_a T_1^{a} N(T_2*))`
/// * `su = ⊕_a T_1^{a} (⋂_b T_2^{b} N(T_1*))`
/// * `ss = ⊕ T_1^{a} T_2^{b} (N(T_1*) ∩ N(T_2*))`
///
/// with every quantifier over `0..=cap`. `us` is the slice where `T_1` is
/// unitary and `T_2` a shift, i.e. label `{2}`.
#[derive(Debug, Clone, Serialize)]
pub struct PairFormulaSets {
    pub uu: Vec<Index>,
    pub us: Vec<Index>,
    pub su: Vec<Index>,
    pub ss: Vec<Index>,
    /// Indices found in no set or in several.
    pub unassigned: Vec<Index>,
    #[serde(skip)]
    labels: Vec<(Index, Option<SliceLabel>)>,
}

impl PairFormulaSets {
    pub fn label_of(&self, m: &[i64]) -> Option<SliceLabel> {
        self.labels.iter().find(|(p, _)| p == m).and_then(|(_, l)| *l)
    }

    pub fn labels(&self) -> &[(Index, Option<SliceLabel>)] {
        &self.labels
    }
}

struct Backward {
    shape: LatticeShape,
    inv1: AffineMap,
    inv2: AffineMap,
}

impl Backward {
    fn pull(&self, p: &[i64], a: usize, b: usize) -> Index {
        let mut q = p.to_vec();
        for _ in 0..a {
            q = self.inv1.apply(&q);
        }
        for _ in 0..b {
            q = self.inv2.apply(&q);
        }
        q
    }

    fn kernel1(&self, q: &[i64]) -> bool {
        !self.shape.is_admissible(&self.inv1.apply(q))
    }

    fn kernel2(&self, q: &[i64]) -> bool {
        !self.shape.is_admissible(&self.inv2.apply(q))
    }

    fn admissible(&self, q: &[i64]) -> bool {
        self.shape.is_admissible(q)
    }

    fn in_uu(&self, p: &[i64], cap: usize) -> bool {
        (0..=cap).all(|a| (0..=cap).all(|b| self.admissible(&self.pull(p, a, b))))
    }

    /// `⊕_b T_2^{b} (⋂_a T_1^{a} N(T_2*))`.
    fn in_us(&self, p: &[i64], cap: usize) -> bool {
        (0..=cap).any(|b| {
            let q = self.pull(p, 0, b);
            self.admissible(&q)
                && (0..=cap).all(|a| {
                    let r = self.pull(&q, a, 0);
                    self.admissible(&r) && self.kernel2(&r)
                })
        })
    }

    fn in_su(&self, p: &[i64], cap: usize) -> bool {
        (0..=cap).any(|a| {
            let q = self.pull(p, a, 0);
            self.admissible(&q)
                && (0..=cap).all(|b| {
                    let r = self.pull(&q, 0, b);
                    self.admissible(&r) && self.kernel1(&r)
                })
        })
    }

    fn in_ss(&self, p: &[i64], cap: usize) -> bool {
        (0..=cap).any(|a| {
            (0..=cap).any(|b| {
                let q = self.pull(p, a, b);
                self.admissible(&q) && self.kernel1(&q) && self.kernel2(&q)
            })
        })
    }
}

pub fn pair_formula_sets(t: &LatticeTuple, window: usize, cap: usize) -> Result<PairFormulaSets> {
    if t.n() != 2 {
        return Err(Error::InvalidParameter(format!(
            "pair formulas need a pair, got a {}-tuple",
            t.n()
        )));
    }
    t.ensure_isometric()?;
    let w = Window::new(t.shape(), window)?;
    let bw = Backward {
        shape: t.shape(),
        inv1: t.op(0).sigma().inverse(),
        inv2: t.op(1).sigma().inverse(),
    };
    let idx: Vec<Index> = w.indices().collect();
    let flags: Vec<[bool; 4]> = idx
        .par_iter()
        .map(|p| [bw.in_uu(p, cap), bw.in_su(p, cap), bw.in_us(p, cap), bw.in_ss(p, cap)])
        .collect();
    let mut out = PairFormulaSets {
        uu: Vec::new(),
        us: Vec::new(),
        su: Vec::new(),
        ss: Vec::new(),
        unassigned: Vec::new(),
        labels: Vec::with_capacity(idx.len()),
    };
    for (p, f) in idx.into_iter().zip(flags) {
        let hits: Vec<u32> = (0..4u32).filter(|&k| f[k as usize]).collect();
        for &k in &hits {
            match k {
                0 => out.uu.push(p.clone()),
                1 => out.su.push(p.clone()),
                2 => out.us.push(p.clone()),
                _ => out.ss.push(p.clone()),
            }
        }
        let label = if hits.len() == 1 {
            Some(SliceLabel::new(2, hits[0])?)
        } else {
            out.unassigned.push(p.clone());
            None
        };
        out.labels.push((p, label));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn commuting_shifts_witness() {
        let t = zoo::lattice_shifts(2, 0).unwrap();
        let c = classify_index(&t, &[2, 3], 16).unwrap();
        assert_eq!(c.label, Some(SliceLabel::from_members(2, &[1, 2]).unwrap()));
        let w = c.witness.as_ref().unwrap();
        assert_eq!(w.path.len(), 5);
        assert_eq!(w.core, vec![0, 0]);
        assert!(witness_is_sound(&t, &[2, 3], w).unwrap());
        assert!(c
            .coordinates
            .iter()
            .all(|o| o.certificate == Some(Certificate::Structural)));
    }

    #[test]
    fn shift_with_bilateral() {
        let t = zoo::lattice_shifts(1, 1).unwrap();
        let counts = slice_dimensions(&t, 6, 24).unwrap();
        let l1 = SliceLabel::from_members(2, &[1]).unwrap();
        assert_eq!(counts.count(l1), 36);
        assert!(counts.undecided.is_empty());
        assert!(counts.boundary.is_empty());
        let c = classify_index(&t, &[3, -7], 4).unwrap();
        assert_eq!(c.label, Some(l1));
        assert_eq!(c.coordinates[1].outcome, OrbitOutcome::Never);
    }

    #[test]
    fn wandering_sets() {
        let t = zoo::lattice_shifts(2, 0).unwrap();
        let all = wandering_set(&t, SliceLabel::new(2, 0).unwrap(), 4).unwrap();
        assert_eq!(all.len(), 16);
        let both = wandering_set(&t, SliceLabel::new(2, 3).unwrap(), 4).unwrap();
        assert_eq!(both, vec![vec![0, 0]]);
    }

    #[test]
    fn example_phase_tuple_wandering_and_labels() {
        let t = zoo::hardy_pair_du(faer::c64::new(1.0, 0.0), faer::c64::new(1.0, 0.0), zoo::UMode::Phase(0.4 * std::f64::consts::PI), true).unwrap();
        let w2 = wandering_set(&t, SliceLabel::from_members(2, &[2]).unwrap(), 5).unwrap();
        assert_eq!(w2.len(), 5);
        assert!(w2.iter().all(|m| m[1] == 0));
        let counts = slice_dimensions(&t, 8, 32).unwrap();
        assert_eq!(counts.count(SliceLabel::new(2, 3).unwrap()), 64);
        for c in &counts.classifications {
            assert!(witness_is_sound(&t, &c.index, c.witness.as_ref().unwrap()).unwrap());
        }
    }

    #[test]
    fn bilateral_mode_labels() {
        let t = zoo::hardy_pair_du(faer::c64::new(1.0, 0.0), faer::c64::new(0.0, 1.0), zoo::UMode::Bilateral, true).unwrap();
        for k in -3..4 {
            let c = classify_index(&t, &[1, 2, k], 16).unwrap();
            assert_eq!(c.label, Some(SliceLabel::new(2, 3).unwrap()));
            assert!(witness_is_sound(&t, &[1, 2, k], c.witness.as_ref().unwrap()).unwrap());
        }
    }

    #[test]
    fn explored_route_and_undecided() {
        // σ(m0, m1) = (m0, m1 + m0): exits only when m0 > 0
        let shape = LatticeShape::new(2, 0).unwrap();
        let sigma = AffineMap::new(vec![vec![1, 0], vec![1, 1]], vec![0, 0]).unwrap();
        let op = MonomialOperator::new(shape, sigma, Default::default()).unwrap();
        let t = LatticeTuple::new(shape, vec![op], vec![]).unwrap();
        let c = classify_index(&t, &[1, 3], 10).unwrap();
        assert_eq!(c.coordinates[0].outcome, OrbitOutcome::Exits { steps: 3 });
        assert_eq!(c.coordinates[0].certificate, Some(Certificate::Explored));
        let c = classify_index(&t, &[0, 3], 10).unwrap();
        assert_eq!(c.coordinates[0].outcome, OrbitOutcome::Undecided);
        assert_eq!(c.label, None);
        let c = classify_index(&t, &[1, 30], 10).unwrap();
        assert_eq!(c.label, None);
    }

    #[test]
    fn rejects_non_isometric() {
        let t = zoo::counterexample_br(faer::c64::new(1.0, 0.0)).unwrap();
        assert!(classify_index(&t, &[0, 0], 4).is_ok());
        let a = zoo::hardy_pair_ar(faer::c64::new(0.0, 1.0), 0.5, 4).unwrap();
        assert!(classify_index(&a.lattice, &[0, 0], 4).is_err());
    }

    #[test]
    fn pair_formulas_match_classification() {
        for (name, t) in zoo::lattice_pair_zoo().unwrap() {
            let sets = pair_formula_sets(&t, 6, 24).unwrap();
            let counts = slice_dimensions(&t, 6, 24).unwrap();
            assert!(sets.unassigned.is_empty(), "{name}");
            for c in &counts.classifications {
                assert_eq!(c.label, sets.label_of(&c.index), "{name} at {:?}", c.index);
            }
        }
    }
}
