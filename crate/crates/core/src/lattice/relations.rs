//! Exact check of the twisted relations on lattice tuples.
//!
//! For every window index `m` and ordered pair `(i, j)`:
//!
//! * forward: `T_i T_j e_m = U_ij T_j T_i e_m`
//! * adjoint: `T_i* T_j e_m = U_ij* T_j T_i* e_m`
//! * twist: `T_k U_ij e_m = U_ij T_k e_m` for every `k`
//!
//! Both sides are single-term vectors, compared by index and coefficient.

use serde::Serialize;

use super::coefficient::Match;
use super::monomial::LatticeTuple;
use super::{format_index, Image, Index, Window};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationFamily {
    Forward,
    Adjoint,
    TwistCommute,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub index: Index,
    pub lhs: String,
    pub rhs: String,
    /// `‖lhs − rhs‖` of the two single-term vectors.
    pub residual: f64,
}

/// Result for one relation family and one pair; `i`, `j`, `k` are 1-based.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyCheck {
    pub family: RelationFamily,
    pub i: usize,
    pub j: usize,
    pub k: Option<usize>,
    pub checked: usize,
    pub numeric_matches: usize,
    pub failures: usize,
    pub max_residual: f64,
    pub first: Option<Counterexample>,
}

impl FamilyCheck {
    pub fn name(&self) -> String {
        match self.family {
            RelationFamily::Forward => format!("forward relation ({}, {})", self.i, self.j),
            RelationFamily::Adjoint => format!("adjoint relation ({}, {})", self.i, self.j),
            RelationFamily::TwistCommute => format!(
                "twist commutation T_{} with U_({}, {})",
                self.k.unwrap_or(0),
                self.i,
                self.j
            ),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeRelationReport {
    pub window: usize,
    pub indices: usize,
    pub checks: Vec<FamilyCheck>,
    pub pass: bool,
    pub first_failure: Option<String>,
}

impl LatticeRelationReport {
    pub fn find(&self, family: RelationFamily, i: usize, j: usize) -> Option<&FamilyCheck> {
        self.checks
            .iter()
            .find(|c| c.family == family && c.i == i && c.j == j && c.k.is_none())
    }

    pub fn max_residual(&self, family: RelationFamily) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.family == family)
            .map(|c| c.max_residual)
            .fold(0.0, f64::max)
    }
}

fn describe(img: &Image) -> String {
    match img {
        None => "0".into(),
        Some((m, c)) => format!("{}·e{}", c, format_index(m)),
    }
}

fn compare(a: &Image, b: &Image) -> (Match, f64) {
    match (a, b) {
        (None, None) => (Match::Exact, 0.0),
        (Some((_, c)), None) | (None, Some((_, c))) => (Match::Differ, c.value().norm()),
        (Some((p, c)), Some((q, d))) => {
            if p != q {
                let (x, y) = (c.value().norm(), d.value().norm());
                return (Match::Differ, x.hypot(y));
            }
            let r = (c.value() - d.value()).norm();
            match c.compare(d) {
                Match::Exact => (Match::Exact, 0.0),
                m => (m, r),
            }
        }
    }
}

struct Tally {
    check: FamilyCheck,
}

impl Tally {
    fn new(family: RelationFamily, i: usize, j: usize, k: Option<usize>) -> Self {
        Self {
            check: FamilyCheck {
                family,
                i: i + 1,
                j: j + 1,
                k: k.map(|k| k + 1),
                checked: 0,
                numeric_matches: 0,
                failures: 0,
                max_residual: 0.0,
                first: None,
            },
        }
    }

    fn record(&mut self, m: &Index, lhs: Image, rhs: Image) {
        let c = &mut self.check;
        c.checked += 1;
        let (verdict, r) = compare(&lhs, &rhs);
        c.max_residual = c.max_residual.max(r);
        match verdict {
            Match::Exact => {}
            Match::Numeric => c.numeric_matches += 1,
            Match::Differ => {
                c.failures += 1;
                if c.first.is_none() {
                    c.first = Some(Counterexample {
                        index: m.clone(),
                        lhs: describe(&lhs),
                        rhs: describe(&rhs),
                        residual: r,
                    });
                }
            }
        }
    }
}

pub fn verify_lattice_relations(t: &LatticeTuple, window: usize) -> Result<LatticeRelationReport> {
    let w = Window::new(t.shape(), window)?;
    let idx: Vec<Index> = w.indices().collect();
    let n = t.n();
    let mut checks = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (ti, tj, u) = (t.op(i), t.op(j), t.twist(i, j));
            let mut fwd = Tally::new(RelationFamily::Forward, i, j, None);
            let mut adj = Tally::new(RelationFamily::Adjoint, i, j, None);
            for m in &idx {
                let e = Some((m.clone(), super::Coefficient::one()));
                let lhs = ti.act(tj.act(e.clone(), false)?, false)?;
                let rhs = u.act(tj.act(ti.act(e.clone(), false)?, false)?, false)?;
                fwd.record(m, lhs, rhs);
                let lhs = ti.act(tj.act(e.clone(), false)?, true)?;
                let rhs = u.act(tj.act(ti.act(e, true)?, false)?, true)?;
                adj.record(m, lhs, rhs);
            }
            checks.push(fwd.check);
            checks.push(adj.check);
        }
    }
    for ((i, j), u) in t.upper_twists() {
        for k in 0..n {
            let tk = t.op(k);
            let mut tw = Tally::new(RelationFamily::TwistCommute, i, j, Some(k));
            for m in &idx {
                let e = Some((m.clone(), super::Coefficient::one()));
                let lhs = tk.act(u.act(e.clone(), false)?, false)?;
                let rhs = u.act(tk.act(e, false)?, false)?;
                tw.record(m, lhs, rhs);
            }
            checks.push(tw.check);
        }
    }
    let first_failure = checks.iter().find(|c| c.failures > 0).map(|c| {
        let ce = c.first.as_ref().expect("failing check records its first counterexample");
        format!("{} fails at m = {}", c.name(), format_index(&ce.index))
    });
    Ok(LatticeRelationReport {
        window,
        indices: idx.len(),
        pass: first_failure.is_none(),
        first_failure,
        checks,
    })
}
