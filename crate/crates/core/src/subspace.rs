//! Rank-revealing subspace arithmetic on a finite-dimensional complex ambient
//! space: kernels, ranges, intersections, complements, spans, projectors and
//! principal angles.
//!
//! Every basis returned here is orthonormal and put in a canonical gauge (each
//! column's dominant entry is real positive and columns are ordered by the row
//! of that entry), so equal inputs give bit-identical bases.

use faer::{c64, Mat, MatRef};

use crate::dense;
use crate::error::{Error, Result};
use crate::operator::DenseOperator;
use crate::tolerance::ToleranceProfile;

/// Orthonormal spanning family of a subspace of `C^ambient_dim`, stored as the
/// columns of an `ambient_dim × dim` matrix.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    ambient_dim: usize,
    columns: Mat<c64>,
    tol: ToleranceProfile,
}

impl SubspaceBasis {
    pub fn zero(ambient_dim: usize, tol: ToleranceProfile) -> Self {
        Self {
            ambient_dim,
            columns: Mat::zeros(ambient_dim, 0),
            tol,
        }
    }

    pub fn full(ambient_dim: usize, tol: ToleranceProfile) -> Self {
        Self {
            ambient_dim,
            columns: Mat::identity(ambient_dim, ambient_dim),
            tol,
        }
    }

    /// Span of the standard basis vectors `e_i`, `i ∈ indices` (sorted, deduplicated).
    pub fn coordinate(ambient_dim: usize, indices: &[usize], tol: ToleranceProfile) -> Result<Self> {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if let Some(&bad) = idx.iter().find(|&&i| i >= ambient_dim) {
            return Err(Error::DimensionMismatch {
                expected: ambient_dim,
                found: bad + 1,
            });
        }
        let mut columns = Mat::zeros(ambient_dim, idx.len());
        for (k, &i) in idx.iter().enumerate() {
            columns[(i, k)] = c64::new(1.0, 0.0);
        }
        Ok(Self {
            ambient_dim,
            columns,
            tol,
        })
    }

    /// Wraps columns that are already orthonormal (checked against `residual_tol`).
    pub fn from_orthonormal(columns: Mat<c64>, tol: ToleranceProfile) -> Result<Self> {
        let basis = Self::from_raw(columns, tol);
        let residual = basis.orthonormality_residual();
        if residual > tol.residual_tol {
            return Err(Error::Numerical(format!(
                "columns are not orthonormal (residual {residual:.3e})"
            )));
        }
        Ok(basis)
    }

    pub(crate) fn from_raw(mut columns: Mat<c64>, tol: ToleranceProfile) -> Self {
        dense::canonicalize_columns(&mut columns);
        Self {
            ambient_dim: columns.nrows(),
            columns,
            tol,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn columns(&self) -> MatRef<'_, c64> {
        self.columns.as_ref()
    }

    pub fn column(&self, k: usize) -> Vec<c64> {
        (0..self.ambient_dim).map(|i| self.columns[(i, k)]).collect()
    }

    pub fn tol(&self) -> &ToleranceProfile {
        &self.tol
    }

    pub fn with_tol(mut self, tol: ToleranceProfile) -> Self {
        self.tol = tol;
        self
    }

    /// `‖B*B − I‖`.
    pub fn orthonormality_residual(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let gram = dense::matmul(dense::adjoint(self.columns()).as_ref(), self.columns());
        dense::distance_to_identity(gram.as_ref())
    }

    /// `‖(I − P)·X‖` for the columns `X` of `other`: zero iff `other ⊆ self`.
    pub fn containment_residual(&self, other: &SubspaceBasis) -> Result<f64> {
        self.check_ambient(other)?;
        if other.dim() == 0 {
            return Ok(0.0);
        }
        let r = dense::reject(self.columns(), other.columns());
        Ok(dense::spectral_norm(r.as_ref()))
    }

    /// Norm of the component of `v` orthogonal to this subspace.
    pub fn membership_residual(&self, v: &[c64]) -> Result<f64> {
        if v.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: v.len(),
            });
        }
        let x = Mat::from_fn(v.len(), 1, |i, _| v[i]);
        let r = dense::reject(self.columns(), x.as_ref());
        Ok((0..v.len()).map(|i| r[(i, 0)].norm_sqr()).sum::<f64>().sqrt())
    }

    /// Norm of the orthogonal projection of the standard basis vector `e_i`.
    pub fn coordinate_weight(&self, i: usize) -> f64 {
        (0..self.dim())
            .map(|k| self.columns[(i, k)].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn check_ambient(&self, other: &SubspaceBasis) -> Result<()> {
        if self.ambient_dim != other.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: other.ambient_dim,
            });
        }
        Ok(())
    }
}

/// Orthonormal basis for the span of `vectors`, each of length `ambient_dim`.
///
/// Rank is decided relative to the largest singular value of the stacked
/// vectors.
pub fn orthonormalize(
    ambient_dim: usize,
    vectors: &[Vec<c64>],
    tol: &ToleranceProfile,
) -> Result<SubspaceBasis> {
    if let Some(v) = vectors.iter().find(|v| v.len() != ambient_dim) {
        return Err(Error::DimensionMismatch {
            expected: ambient_dim,
            found: v.len(),
        });
    }
    let m = Mat::from_fn(ambient_dim, vectors.len(), |i, j| vectors[j][i]);
    orthonormalize_columns(m.as_ref(), tol)
}

/// Matrix form of [`orthonormalize`]: basis for the column space of `m`.
pub fn orthonormalize_columns(m: MatRef<'_, c64>, tol: &ToleranceProfile) -> Result<SubspaceBasis> {
    let cols = dense::column_space(m, tol.rank_rtol, 0.0)?;
    Ok(SubspaceBasis::from_raw(cols, *tol))
}

/// `N(A)`. Operators in this crate are normalized (contractions and their
/// defects), so the rank threshold never drops below `rank_rtol` in absolute
/// terms; a numerically zero matrix has a full kernel.
pub fn kernel_of(a: &DenseOperator, tol: &ToleranceProfile) -> Result<SubspaceBasis> {
    let k = dense::null_space(a.mat(), tol.rank_rtol, 1.0)?;
    Ok(SubspaceBasis::from_raw(k, *tol))
}

/// `R(A)`, the column space, with the same rank rule as [`kernel_of`].
pub fn range_of(a: &DenseOperator, tol: &ToleranceProfile) -> Result<SubspaceBasis> {
    let r = dense::column_space(a.mat(), tol.rank_rtol, 1.0)?;
    Ok(SubspaceBasis::from_raw(r, *tol))
}

/// Null space of an arbitrary (possibly rectangular) matrix, returned in the
/// column coordinates of `m`.
pub(crate) fn null_space_of(m: MatRef<'_, c64>, tol: &ToleranceProfile) -> Result<Mat<c64>> {
    dense::null_space(m, tol.rank_rtol, 1.0)
}

/// Orthonormal basis of the column space of an operator-scale matrix.
pub(crate) fn column_space_of(m: MatRef<'_, c64>, tol: &ToleranceProfile) -> Result<SubspaceBasis> {
    let r = dense::column_space(m, tol.rank_rtol, 1.0)?;
    Ok(SubspaceBasis::from_raw(r, *tol))
}

fn common_ambient(bases: &[SubspaceBasis]) -> Result<usize> {
    let first = bases
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty list of subspaces".into()))?;
    for b in &bases[1..] {
        first.check_ambient(b)?;
    }
    Ok(first.ambient_dim)
}

/// Intersection of all `bases`.
///
/// Computed inside the first subspace `A = span(B)`: `x = B·y` lies in every
/// other subspace `S_k` iff `(I − P_k)·B·y = 0`, so the answer is `B` times the
/// kernel of the stacked `(I − P_k)·B`.
pub fn intersect(bases: &[SubspaceBasis]) -> Result<SubspaceBasis> {
    common_ambient(bases)?;
    let first = &bases[0];
    let tol = first.tol;
    if bases.len() == 1 || first.is_zero() {
        return Ok(first.clone());
    }
    if bases[1..].iter().any(|b| b.is_zero()) {
        return Ok(SubspaceBasis::zero(first.ambient_dim, tol));
    }
    let rejected: Vec<Mat<c64>> = bases[1..]
        .iter()
        .filter(|b| b.dim() < b.ambient_dim)
        .map(|b| dense::reject(b.columns(), first.columns()))
        .collect();
    if rejected.is_empty() {
        return Ok(first.clone());
    }
    let refs: Vec<MatRef<'_, c64>> = rejected.iter().map(|m| m.as_ref()).collect();
    let stacked = dense::vstack(&refs);
    let y = null_space_of(stacked.as_ref(), &tol)?;
    Ok(SubspaceBasis::from_raw(first.map_by_coords(y.as_ref()), tol))
}

impl SubspaceBasis {
    /// `B·Y` for coordinates `Y` relative to this basis.
    pub(crate) fn map_by_coords(&self, y: MatRef<'_, c64>) -> Mat<c64> {
        dense::matmul(self.columns(), y)
    }
}

/// Orthogonal complement of `sub` inside `ambient`.
pub fn complement_in(sub: &SubspaceBasis, ambient: &SubspaceBasis) -> Result<SubspaceBasis> {
    ambient.check_ambient(sub)?;
    let tol = ambient.tol;
    let residual = ambient.containment_residual(sub)?;
    if residual > tol.residual_tol {
        return Err(Error::ContainmentViolation { residual });
    }
    if sub.is_zero() {
        return Ok(ambient.clone());
    }
    if ambient.is_zero() {
        return Ok(ambient.clone());
    }
    // y with (B_sub)^* B_amb y = 0.
    let gram = dense::matmul(dense::adjoint(sub.columns()).as_ref(), ambient.columns());
    let y = null_space_of(gram.as_ref(), &tol)?;
    Ok(SubspaceBasis::from_raw(ambient.map_by_coords(y.as_ref()), tol))
}

/// Closed linear span of all `bases`.
pub fn span_union(bases: &[SubspaceBasis]) -> Result<SubspaceBasis> {
    let n = common_ambient(bases)?;
    let tol = bases[0].tol;
    let refs: Vec<MatRef<'_, c64>> = bases.iter().map(|b| b.columns()).collect();
    let all = dense::hstack(n, &refs);
    column_space_of(all.as_ref(), &tol)
}

/// Principal angles between `a` and `b`, nondecreasing, in `[0, π/2]`.
///
/// Returns `min(dim a, dim b)` angles. Small angles come from the sines
/// (singular values of `(I − P_a)·B`), large ones from the cosines (singular
/// values of `A*B`), which keeps both ends accurate.
pub fn principal_angles(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<Vec<f64>> {
    a.check_ambient(b)?;
    let (a, b) = if a.dim() >= b.dim() { (a, b) } else { (b, a) };
    let k = b.dim();
    if k == 0 {
        return Ok(Vec::new());
    }
    let cross = dense::matmul(dense::adjoint(a.columns()).as_ref(), b.columns());
    let mut cos = dense::singular_values(cross.as_ref())?;
    cos.resize(k, 0.0);
    let rej = dense::reject(a.columns(), b.columns());
    let mut sin = dense::singular_values(rej.as_ref())?;
    sin.resize(k, 0.0);
    sin.reverse();
    let angles = cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            let c = c.clamp(0.0, 1.0);
            let s = s.clamp(0.0, 1.0);
            if c * c >= 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect();
    Ok(angles)
}

/// Largest principal angle, or `π/2` when the dimensions differ. Zero iff the
/// subspaces coincide.
pub fn subspace_gap(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    a.check_ambient(b)?;
    if a.dim() != b.dim() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    Ok(principal_angles(a, b)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Orthogonal projector `B B*`.
pub fn projector(b: &SubspaceBasis) -> DenseOperator {
    let p = dense::matmul(b.columns(), dense::adjoint(b.columns()).as_ref());
    DenseOperator::from_mat_unchecked(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::random::{complex_gaussian, seeded};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn re(x: f64) -> c64 {
        c64::new(x, 0.0)
    }

    fn span(n: usize, idx: &[usize]) -> SubspaceBasis {
        SubspaceBasis::coordinate(n, idx, tol()).unwrap()
    }

    /// Rank via Gram-Schmidt with pivoting on the raw vectors; independent of
    /// the SVD path.
    fn gram_schmidt_rank(vectors: &[Vec<c64>], eps: f64) -> usize {
        let mut basis: Vec<Vec<c64>> = Vec::new();
        let mut pool: Vec<Vec<c64>> = vectors.to_vec();
        loop {
            let mut best: Option<(usize, f64)> = None;
            for (k, v) in pool.iter().enumerate() {
                let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if best.map_or(true, |(_, b)| n > b) {
                    best = Some((k, n));
                }
            }
            match best {
                Some((k, n)) if n > eps => {
                    let q: Vec<c64> = pool[k].iter().map(|z| z / n).collect();
                    pool.remove(k);
                    for v in pool.iter_mut() {
                        let d: c64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                        for (x, y) in v.iter_mut().zip(&q) {
                            *x -= d * y;
                        }
                    }
                    basis.push(q);
                }
                _ => return basis.len(),
            }
        }
    }

    fn random_vectors(n: usize, count: usize, seed: u64) -> Vec<Vec<c64>> {
        let mut rng = seeded(seed);
        let m = complex_gaussian(&mut rng, n, count);
        (0..count).map(|j| (0..n).map(|i| m[(i, j)]).collect()).collect()
    }

    #[test]
    fn orthonormalize_collinear_and_empty() {
        let b = orthonormalize(2, &[vec![re(1.0), re(0.0)], vec![re(2.0), re(0.0)]], &tol()).unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.column(0), vec![re(1.0), re(0.0)]);
        let empty = orthonormalize(0, &[], &tol()).unwrap();
        assert_eq!(empty.dim(), 0);
        assert!(orthonormalize(2, &[vec![re(1.0)]], &tol()).is_err());
    }

    #[test]
    fn orthonormalize_random_matches_rank_oracle() {
        let vs = random_vectors(8, 5, 11);
        let b = orthonormalize(8, &vs, &tol()).unwrap();
        assert_eq!(gram_schmidt_rank(&vs, 1e-9), 5);
        assert_eq!(b.dim(), 5);
        assert!(b.orthonormality_residual() < 1e-12);
        for v in &vs {
            assert!(b.membership_residual(v).unwrap() < 1e-10);
        }
    }

    #[test]
    fn kernel_examples() {
        let z = DenseOperator::zeros(4);
        assert_eq!(kernel_of(&z, &tol()).unwrap().dim(), 4);

        let t = DenseOperator::diagonal(&[re(1.0), re(0.5)]);
        let defect = DenseOperator::identity(2).sub(&t.adjoint().compose(&t).unwrap()).unwrap();
        let k = kernel_of(&defect, &tol()).unwrap();
        assert_eq!(k.dim(), 1);
        assert!(subspace_gap(&k, &span(2, &[0])).unwrap() < 1e-14);
    }

    #[test]
    fn rank_three_product_kernel_and_range() {
        let mut rng = seeded(3);
        let l = complex_gaussian(&mut rng, 8, 3);
        let r = complex_gaussian(&mut rng, 3, 8);
        let a = DenseOperator::from_mat(&l * &r).unwrap();
        let rows: Vec<Vec<c64>> = (0..8).map(|j| (0..8).map(|i| a.mat()[(i, j)]).collect()).collect();
        let rank = gram_schmidt_rank(&rows, 1e-8);
        assert_eq!(rank, 3);
        let k = kernel_of(&a, &tol()).unwrap();
        let rg = range_of(&a, &tol()).unwrap();
        assert_eq!(k.dim(), 8 - rank);
        assert_eq!(rg.dim(), rank);
        let ak = a.mat() * k.columns();
        assert!(dense::spectral_norm(ak.as_ref()) < 1e-8);
    }

    #[test]
    fn range_examples() {
        assert_eq!(range_of(&DenseOperator::identity(3), &tol()).unwrap().dim(), 3);
        let u = vec![re(1.0), c64::new(0.0, 1.0), re(2.0)];
        let v = vec![re(0.5), re(-1.0), re(0.0)];
        let m = Mat::from_fn(3, 3, |i, j| u[i] * v[j].conj());
        let r = range_of(&DenseOperator::from_mat(m).unwrap(), &tol()).unwrap();
        assert_eq!(r.dim(), 1);
        assert!(r.membership_residual(&u).unwrap() < 1e-12);
    }

    #[test]
    fn intersect_examples() {
        let x = span(4, &[0, 2]);
        let full = SubspaceBasis::full(4, tol());
        assert!(subspace_gap(&intersect(&[x.clone(), full]).unwrap(), &x).unwrap() < 1e-14);
        let i = intersect(&[span(3, &[0, 1]), span(3, &[1, 2])]).unwrap();
        assert!(subspace_gap(&i, &span(3, &[1])).unwrap() < 1e-14);
        assert!(intersect(&[span(3, &[0]), span(4, &[0])]).is_err());
    }

    #[test]
    fn intersect_random_matches_membership_oracle() {
        let a = orthonormalize(8, &random_vectors(8, 5, 21), &tol()).unwrap();
        let b = orthonormalize(8, &random_vectors(8, 5, 22), &tol()).unwrap();
        let i = intersect(&[a.clone(), b.clone()]).unwrap();
        // Oracle: x = A y = B z  ⇔  [A, −B] (y; z) = 0; dimension of solutions
        // equals dim A + dim B − rank [A, B], found by Gram-Schmidt.
        let mut cols: Vec<Vec<c64>> = (0..5).map(|k| a.column(k)).collect();
        cols.extend((0..5).map(|k| b.column(k)));
        let joint_rank = gram_schmidt_rank(&cols, 1e-9);
        assert_eq!(joint_rank, 8);
        assert_eq!(i.dim(), 5 + 5 - joint_rank);
        assert_eq!(i.dim(), 2);
        for k in 0..i.dim() {
            let v = i.column(k);
            assert!(a.membership_residual(&v).unwrap() < 1e-10);
            assert!(b.membership_residual(&v).unwrap() < 1e-10);
        }
    }

    #[test]
    fn complement_examples() {
        let full = SubspaceBasis::full(4, tol());
        assert_eq!(complement_in(&SubspaceBasis::zero(4, tol()), &full).unwrap().dim(), 4);
        let c = complement_in(&span(2, &[0]), &span(2, &[0, 1])).unwrap();
        assert!(subspace_gap(&c, &span(2, &[1])).unwrap() < 1e-14);
        assert!(matches!(
            complement_in(&span(3, &[2]), &span(3, &[0, 1])),
            Err(Error::ContainmentViolation { .. })
        ));
    }

    #[test]
    fn complement_random_is_orthogonal() {
        let sub = orthonormalize(7, &random_vectors(7, 3, 5), &tol()).unwrap();
        let c = complement_in(&sub, &SubspaceBasis::full(7, tol())).unwrap();
        assert_eq!(c.dim(), 4);
        for i in 0..3 {
            for j in 0..4 {
                let d: c64 = sub
                    .column(i)
                    .iter()
                    .zip(c.column(j))
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                assert!(d.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn span_union_examples() {
        let x = span(3, &[1]);
        assert!(subspace_gap(&span_union(&[x.clone(), SubspaceBasis::zero(3, tol())]).unwrap(), &x).unwrap() < 1e-14);
        let u = span_union(&[span(2, &[0]), span(2, &[1])]).unwrap();
        assert_eq!(u.dim(), 2);
        let parts: Vec<SubspaceBasis> = (0..3)
            .map(|s| orthonormalize(6, &random_vectors(6, 2, 40 + s), &tol()).unwrap())
            .collect();
        let all: Vec<Vec<c64>> = parts.iter().flat_map(|p| (0..2).map(|k| p.column(k))).collect();
        assert_eq!(span_union(&parts).unwrap().dim(), gram_schmidt_rank(&all, 1e-9));
    }

    #[test]
    fn principal_angle_examples() {
        let x = span(3, &[0, 1]);
        assert!(principal_angles(&x, &x).unwrap().iter().all(|&a| a == 0.0));
        let a = principal_angles(&span(2, &[0]), &span(2, &[1])).unwrap();
        assert!((a[0] - FRAC_PI_2).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        let diag = orthonormalize(2, &[vec![re(s), re(s)]], &tol()).unwrap();
        let a = principal_angles(&span(2, &[0]), &diag).unwrap();
        assert!((a[0] - FRAC_PI_4).abs() < 1e-14);
    }

    #[test]
    fn projector_examples() {
        let p = projector(&SubspaceBasis::full(3, tol()));
        assert!(p.distance(&DenseOperator::identity(3)).unwrap() < 1e-15);
        let z = projector(&SubspaceBasis::zero(3, tol()));
        assert_eq!(z.norm(), 0.0);
        let s = 0.5f64.sqrt();
        let diag = orthonormalize(2, &[vec![re(s), re(s)]], &tol()).unwrap();
        let p = projector(&diag);
        for i in 0..2 {
            for j in 0..2 {
                assert!((p.mat()[(i, j)] - re(0.5)).norm() < 1e-15);
            }
        }
    }
}
