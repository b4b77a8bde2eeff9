//! Matrices of lattice operators on a finite window.
//!
//! Images leaving the window are dropped. An index is interior to depth `d`
//! when every word of length `≤ d` in the generators (operators, twists and
//! their adjoints) keeps it inside the window or annihilates it; identities
//! of that length hold exactly on the span of such indices.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use super::classify::classify_in;
use super::monomial::{LatticeTuple, MonomialOperator};
use super::{Index, Window};
use crate::error::{Error, Result};
use crate::multi::{decompose, SliceLabel};
use crate::operator::DenseOperator;
use crate::subspace::SubspaceBasis;
use crate::tolerance::ToleranceProfile;
use crate::twisted::{TwistFamily, TwistedTuple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Drop images outside the window.
    #[default]
    Truncate,
    /// Wrap bilateral coordinates modulo the window size and truncate
    /// unilateral ones. Needs weights independent of bilateral coordinates.
    PeriodicBilateral,
}

/// Word length used for the relation mask: the longest side of a relation is
/// `U_ij T_j T_i`.
pub const RELATION_DEPTH: usize = 3;

#[derive(Debug, Clone)]
pub struct DensifiedTuple {
    pub window: Window,
    pub boundary: Boundary,
    pub ops: Vec<DenseOperator>,
    pub twist: TwistFamily,
    /// Depth-1 mask, in window order.
    pub interior: Vec<bool>,
    /// Depth-[`RELATION_DEPTH`] mask.
    pub relation_interior: Vec<bool>,
}

impl DensifiedTuple {
    pub fn indices(&self) -> Vec<Index> {
        self.window.indices().collect()
    }

    /// Coordinate basis of the indices set in `mask`.
    pub fn support(&self, mask: &[bool], tol: ToleranceProfile) -> Result<SubspaceBasis> {
        let keep: Vec<usize> = (0..mask.len()).filter(|&k| mask[k]).collect();
        if keep.is_empty() {
            return Err(Error::WindowTooSmall);
        }
        SubspaceBasis::coordinate(mask.len(), &keep, tol)
    }

    pub fn relation_support(&self, tol: ToleranceProfile) -> Result<SubspaceBasis> {
        self.support(&self.relation_interior, tol)
    }

    /// Audit-mode dense tuple; the relation report covers the whole window.
    pub fn tuple(&self, tol: ToleranceProfile) -> Result<TwistedTuple> {
        TwistedTuple::audit(self.ops.clone(), self.twist.clone(), tol)
    }
}

fn place(window: &Window, boundary: Boundary, p: &[i64]) -> Option<usize> {
    match boundary {
        Boundary::Truncate => window.position(p),
        Boundary::PeriodicBilateral => window.position(&window.wrap(p)),
    }
}

fn check_periodic(op: &MonomialOperator, boundary: Boundary) -> Result<()> {
    if boundary == Boundary::PeriodicBilateral {
        let s = op.shape();
        if !op.weight().independent_of(s.d_plus..s.dim()) {
            return Err(Error::Lattice(
                "periodic densification needs weights independent of bilateral coordinates".into(),
            ));
        }
    }
    Ok(())
}

fn matrix_of(op: &MonomialOperator, window: &Window, boundary: Boundary) -> Result<DenseOperator> {
    check_periodic(op, boundary)?;
    let len = window.len();
    let mut mat = Mat::<c64>::zeros(len, len);
    for (col, m) in window.indices().enumerate() {
        if let Some((p, c)) = op.apply(&m)? {
            if let Some(row) = place(window, boundary, &p) {
                mat[(row, col)] += c.value();
            }
        }
    }
    DenseOperator::from_mat(mat)
}

/// Indices whose neighbourhood of radius `depth` under `gens` (and their
/// adjoints) stays inside the window.
pub fn interior_mask(gens: &[&MonomialOperator], window: &Window, boundary: Boundary, depth: usize) -> Result<Vec<bool>> {
    let shape = window.shape();
    let inverses: Vec<_> = gens.iter().map(|g| g.sigma().inverse()).collect();
    let mut mask = Vec::with_capacity(window.len());
    for m in window.indices() {
        let mut frontier = vec![m];
        let mut ok = true;
        'grow: for _ in 0..depth {
            let mut next = Vec::new();
            for p in &frontier {
                for (g, inv) in gens.iter().zip(&inverses) {
                    let images = [Some(g.sigma().apply(p)), Some(inv.apply(p)).filter(|q| shape.is_admissible(q))];
                    for q in images.into_iter().flatten() {
                        let q = match boundary {
                            Boundary::Truncate => q,
                            Boundary::PeriodicBilateral => window.wrap(&q),
                        };
                        if !window.contains(&q) {
                            ok = false;
                            break 'grow;
                        }
                        next.push(q);
                    }
                }
            }
            next.sort_unstable();
            next.dedup();
            frontier = next;
        }
        mask.push(ok);
    }
    Ok(mask)
}

/// Matrix of one operator on a window of size `n`, with its depth-1 mask.
pub fn densify_op(op: &MonomialOperator, n: usize, boundary: Boundary) -> Result<(DenseOperator, Vec<bool>)> {
    if n < 2 {
        return Err(Error::InvalidParameter("densification needs a window of size at least 2".into()));
    }
    let w = Window::new(op.shape(), n)?;
    let mask = interior_mask(&[op], &w, boundary, 1)?;
    if !mask.iter().any(|&b| b) {
        return Err(Error::WindowTooSmall);
    }
    Ok((matrix_of(op, &w, boundary)?, mask))
}

pub fn densify(t: &LatticeTuple, n: usize, boundary: Boundary) -> Result<DensifiedTuple> {
    if n < 2 {
        return Err(Error::InvalidParameter("densification needs a window of size at least 2".into()));
    }
    let w = Window::new(t.shape(), n)?;
    let ops = t
        .ops()
        .iter()
        .map(|o| matrix_of(o, &w, boundary))
        .collect::<Result<Vec<_>>>()?;
    let mut units = Vec::new();
    for ((i, j), u) in t.upper_twists() {
        units.push(((i, j), matrix_of(u, &w, boundary)?));
    }
    let twist = TwistFamily::new(t.n(), w.len(), units)?;
    let gens: Vec<&MonomialOperator> = t.generators().collect();
    let interior = interior_mask(&gens, &w, boundary, 1)?;
    let relation_interior = interior_mask(&gens, &w, boundary, RELATION_DEPTH)?;
    if !interior.iter().any(|&b| b) {
        return Err(Error::WindowTooSmall);
    }
    Ok(DensifiedTuple {
        window: w,
        boundary,
        ops,
        twist,
        interior,
        relation_interior,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleMismatch {
    pub index: Index,
    pub lattice: Option<SliceLabel>,
    pub dense: Option<SliceLabel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleAgreement {
    pub window: usize,
    pub margin: i64,
    pub boundary: Boundary,
    pub compared: usize,
    pub agreed: usize,
    pub mismatches: Vec<OracleMismatch>,
}

impl OracleAgreement {
    pub fn fraction(&self) -> f64 {
        if self.compared == 0 {
            0.0
        } else {
            self.agreed as f64 / self.compared as f64
        }
    }
}

/// Squared projection weight above which a basis vector counts as lying in a
/// dense slice.
const MEMBERSHIP: f64 = 1.0 - 1e-6;

/// Compares [`super::classify_index`] labels with the dense slice containing
/// `e_m`, for window indices at distance `≥ margin` from the window's open
/// edges.
pub fn oracle_agreement(
    t: &LatticeTuple,
    n: usize,
    margin: i64,
    boundary: Boundary,
    step_cap: usize,
    tol: ToleranceProfile,
) -> Result<OracleAgreement> {
    t.ensure_isometric()?;
    let d = densify(t, n, boundary)?;
    let dense = TwistedTuple::new(d.ops.clone(), d.twist.clone(), tol)?;
    let result = decompose(&dense)?;
    let mut out = OracleAgreement {
        window: n,
        margin,
        boundary,
        compared: 0,
        agreed: 0,
        mismatches: Vec::new(),
    };
    for (pos, m) in d.window.indices().enumerate() {
        if d.window.margin_of(&m) < margin {
            continue;
        }
        let lattice = classify_in(t, &m, step_cap, None)?.label;
        let dense_label = result
            .nonzero()
            .find(|s| s.space.coordinate_weight(pos).powi(2) >= MEMBERSHIP)
            .map(|s| s.label);
        out.compared += 1;
        if lattice.is_some() && lattice == dense_label {
            out.agreed += 1;
        } else {
            out.mismatches.push(OracleMismatch {
                index: m,
                lattice,
                dense: dense_label,
            });
        }
    }
    if out.compared == 0 {
        return Err(Error::WindowTooSmall);
    }
    Ok(out)
}
