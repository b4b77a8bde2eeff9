//! Canonical decomposition `H = H_u ⊕ H_¬u` of a single contraction, with the
//! kernel-chain and range-chain formulas kept as independent oracles, and the
//! Wold split of an isometry into a unitary part and shift levels.

use faer::{c64, Mat};
use serde::Serialize;

use crate::dense;
use crate::error::{Error, Result};
use crate::operator::DenseOperator;
use crate::subspace::{self, SubspaceBasis};
use crate::tolerance::ToleranceProfile;

/// Residuals certifying a [`CanonicalSplit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitResiduals {
    /// Reducing residual of `T` against `H_u`; `H_¬u` has the same value since
    /// the two are complementary.
    pub reducing: f64,
    /// `max(‖U*U − I‖, ‖UU* − I‖)` for the unitary block `U`.
    pub unitary_block: f64,
    /// `‖B_u* B_¬u‖`.
    pub orthogonality: f64,
    /// Iterations the fixed point needed.
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct CanonicalSplit {
    pub unitary_space: SubspaceBasis,
    pub cnu_space: SubspaceBasis,
    pub unitary_block: DenseOperator,
    pub cnu_block: DenseOperator,
    pub residuals: SplitResiduals,
}

/// `I − T*T` and `I − TT*`.
fn defect_squares(t: &DenseOperator) -> Result<(DenseOperator, DenseOperator)> {
    let id = DenseOperator::identity(t.dim());
    let adj = t.adjoint();
    Ok((id.sub(&adj.compose(t)?)?, id.sub(&t.compose(&adj)?)?))
}

/// Largest subspace reducing `T` on which `T` is unitary, with the number of
/// iterations used.
///
/// Start from `N(D_T) ∩ N(D_{T*})` (taken as the kernels of `I − T*T` and
/// `I − TT*`, which are the same subspaces) and repeatedly keep only the
/// vectors `h` with `Th` and `T*h` still inside, until the dimension has not
/// changed for `stabilization_window` rounds.
fn fixed_point(t: &DenseOperator, tol: &ToleranceProfile) -> Result<(SubspaceBasis, usize)> {
    t.ensure_contraction(tol)?;
    let n = t.dim();
    if n == 0 {
        return Ok((SubspaceBasis::zero(0, *tol), 0));
    }
    let (left, right) = defect_squares(t)?;
    let mut m = subspace::intersect(&[subspace::kernel_of(&left, tol)?, subspace::kernel_of(&right, tol)?])?;
    let adj = t.adjoint();
    let mut stable = 0usize;
    let mut iterations = 0usize;
    let max_iterations = n + tol.stabilization_window + 1;
    while !m.is_zero() && stable < tol.stabilization_window && iterations < max_iterations {
        iterations += 1;
        let b = m.columns();
        let fwd = dense::reject(b, dense::matmul(t.mat(), b).as_ref());
        let bwd = dense::reject(b, dense::matmul(adj.mat(), b).as_ref());
        let stacked = dense::vstack(&[fwd.as_ref(), bwd.as_ref()]);
        let y = subspace::null_space_of(stacked.as_ref(), tol)?;
        let next = SubspaceBasis::from_raw(m.map_by_coords(y.as_ref()), *tol);
        if next.dim() == m.dim() {
            stable += 1;
        } else {
            stable = 0;
        }
        m = next;
    }
    Ok((m, iterations))
}

/// `H_u`: the largest subspace reducing `T` on which `T` acts unitarily.
pub fn unitary_part(t: &DenseOperator, tol: &ToleranceProfile) -> Result<SubspaceBasis> {
    Ok(fixed_point(t, tol)?.0)
}

/// `H_u ⊕ H_¬u` with both restrictions and their residuals.
pub fn canonical_decompose(t: &DenseOperator, tol: &ToleranceProfile) -> Result<CanonicalSplit> {
    let (hu, iterations) = fixed_point(t, tol)?;
    let full = SubspaceBasis::full(t.dim(), *tol);
    let hcnu = subspace::complement_in(&hu, &full)?;
    let (ub, red) = t.restrict_to_reducing(&hu)?;
    let (cb, _) = t.restrict_to_reducing(&hcnu)?;
    let unitary_block = if ub.dim() == 0 {
        0.0
    } else {
        let id = DenseOperator::identity(ub.dim());
        let adj = ub.adjoint();
        adj.compose(&ub)?.distance(&id)?.max(ub.compose(&adj)?.distance(&id)?)
    };
    let cross = dense::matmul(dense::adjoint(hu.columns()).as_ref(), hcnu.columns());
    Ok(CanonicalSplit {
        unitary_space: hu,
        cnu_space: hcnu,
        unitary_block: ub,
        cnu_block: cb,
        residuals: SplitResiduals {
            reducing: red,
            unitary_block,
            orthogonality: dense::spectral_norm(cross.as_ref()),
            iterations,
        },
    })
}

/// `⋂_{1≤m≤m_cap} N(I − T*^m T^m) ∩ N(I − T^m T*^m)`.
pub fn chain_unitary_part(t: &DenseOperator, tol: &ToleranceProfile, m_cap: usize) -> Result<SubspaceBasis> {
    t.ensure_contraction(tol)?;
    if m_cap == 0 {
        return Err(Error::InvalidParameter("m_cap must be at least 1".into()));
    }
    let n = t.dim();
    let id = DenseOperator::identity(n);
    let mut cur = SubspaceBasis::full(n, *tol);
    let mut pw = DenseOperator::identity(n);
    for _ in 0..m_cap {
        if cur.is_zero() {
            break;
        }
        pw = pw.compose(t)?;
        let adj = pw.adjoint();
        let left = subspace::kernel_of(&id.sub(&adj.compose(&pw)?)?, tol)?;
        let right = subspace::kernel_of(&id.sub(&pw.compose(&adj)?)?, tol)?;
        cur = subspace::intersect(&[cur, left, right])?;
    }
    Ok(cur)
}

/// `⋂_{1≤k≤m_cap} R(T*^k) ∩ R(T^k)`, valid when every power up to `m_cap` is a
/// partial isometry.
pub fn ppi_unitary_part(t: &DenseOperator, tol: &ToleranceProfile, m_cap: usize) -> Result<SubspaceBasis> {
    t.ensure_contraction(tol)?;
    let class = t.classify(tol, m_cap);
    if let Some(power) = class.first_failing_power {
        let p = t.power(power as i64);
        let r = p.compose(&p.adjoint())?.compose(&p)?.distance(&p)?;
        return Err(Error::NotPowerPartialIsometry { power, residual: r });
    }
    let n = t.dim();
    let mut cur = SubspaceBasis::full(n, *tol);
    let mut pw = DenseOperator::identity(n);
    for _ in 0..m_cap {
        if cur.is_zero() {
            break;
        }
        pw = pw.compose(t)?;
        let fwd = subspace::range_of(&pw, tol)?;
        let bwd = subspace::range_of(&pw.adjoint(), tol)?;
        cur = subspace::intersect(&[cur, fwd, bwd])?;
    }
    Ok(cur)
}

/// Wold split `H = H_u ⊕ ⨁_k T^k W` with wandering subspace `W`.
#[derive(Debug, Clone)]
pub struct WoldSplit {
    pub unitary_space: SubspaceBasis,
    pub wandering: SubspaceBasis,
    pub levels: Vec<SubspaceBasis>,
    /// Largest `|⟨x, y⟩|` between distinct levels.
    pub level_overlap: f64,
}

/// Wold split of an isometry. In finite dimensions an exact isometry is
/// unitary, so the wandering part is `{0}`; [`wold_split_on_window`] handles
/// truncated shifts.
pub fn wold_split_isometry(t: &DenseOperator, tol: &ToleranceProfile) -> Result<WoldSplit> {
    let c = t.classify(tol, 0);
    if !c.isometry.holds {
        return Err(Error::NotAnIsometry {
            residual: c.isometry.residual,
        });
    }
    let full = SubspaceBasis::full(t.dim(), *tol);
    wold_split_on_window(t, &full, tol)
}

/// Wold split of `T` over a subspace `domain` on which `T` is isometric,
/// typically the interior of a densified lattice window.
///
/// `wandering = N(T*) ∩ domain`, `levels[k] = T^k·wandering` until the image
/// vanishes (at most `dim` levels), and `unitary_space = H_u(T) ∩ domain`.
pub fn wold_split_on_window(t: &DenseOperator, domain: &SubspaceBasis, tol: &ToleranceProfile) -> Result<WoldSplit> {
    if domain.ambient_dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: domain.ambient_dim(),
        });
    }
    let tb = dense::matmul(t.mat(), domain.columns());
    let gram = dense::matmul(dense::adjoint(tb.as_ref()).as_ref(), tb.as_ref());
    let residual = dense::distance_to_identity(gram.as_ref());
    if residual > tol.residual_tol {
        return Err(Error::NotAnIsometry { residual });
    }
    let n = t.dim();
    let kernel_adj = subspace::kernel_of(&t.adjoint(), tol)?;
    let wandering = subspace::intersect(&[kernel_adj, domain.clone()])?;
    let unitary_space = subspace::intersect(&[unitary_part(t, tol)?, domain.clone()])?;

    let mut levels = Vec::new();
    let mut cur: Mat<c64> = wandering.columns().to_owned();
    for _ in 0..n.max(1) {
        if wandering.is_zero() || dense::spectral_norm(cur.as_ref()) <= tol.residual_tol {
            break;
        }
        levels.push(subspace::orthonormalize_columns(cur.as_ref(), tol)?);
        cur = dense::matmul(t.mat(), cur.as_ref());
    }
    let mut level_overlap = 0.0f64;
    for (a, la) in levels.iter().enumerate() {
        for lb in &levels[a + 1..] {
            let g = dense::matmul(dense::adjoint(la.columns()).as_ref(), lb.columns());
            for j in 0..g.ncols() {
                for i in 0..g.nrows() {
                    level_overlap = level_overlap.max(g[(i, j)].norm());
                }
            }
        }
    }
    Ok(WoldSplit {
        unitary_space,
        wandering,
        levels,
        level_overlap,
    })
}
