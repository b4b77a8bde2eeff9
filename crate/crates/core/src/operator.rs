//! Square complex matrices acting on the ambient space, with the operator
//! algebra needed by the decompositions: adjoints, products, signed powers,
//! defect operators, classification and restriction to reducing subspaces.

use faer::{c64, Mat, MatRef, Side};
use serde::Serialize;

use crate::dense;
use crate::error::{Error, Result};
use crate::subspace::SubspaceBasis;
use crate::tolerance::ToleranceProfile;

/// A `dim × dim` complex matrix with finite entries.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    mat: Mat<c64>,
}

/// Which defect: `Left` is `(I − T*T)^{1/2}`, `Right` is `(I − TT*)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectSide {
    Left,
    Right,
}

impl DenseOperator {
    pub fn from_mat(mat: Mat<c64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        for j in 0..mat.ncols() {
            for i in 0..mat.nrows() {
                let z = mat[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite);
                }
            }
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_mat_unchecked(mat: Mat<c64>) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    /// Row-major construction.
    pub fn from_rows(rows: &[Vec<c64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: r.len(),
            });
        }
        Self::from_mat(Mat::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> c64) -> Result<Self> {
        Self::from_mat(Mat::from_fn(dim, dim, f))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: Mat::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: Mat::zeros(dim, dim),
        }
    }

    pub fn scalar(dim: usize, c: c64) -> Self {
        Self {
            mat: Mat::from_fn(dim, dim, |i, j| if i == j { c } else { c64::new(0.0, 0.0) }),
        }
    }

    pub fn diagonal(d: &[c64]) -> Self {
        let n = d.len();
        Self {
            mat: Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { c64::new(0.0, 0.0) }),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> c64 {
        self.mat[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: dense::adjoint(self.mat()),
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            mat: dense::matmul(self.mat(), other.mat()),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            mat: Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] + other.mat[(i, j)]),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            mat: Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] - other.mat[(i, j)]),
        })
    }

    pub fn scale(&self, c: c64) -> Self {
        Self {
            mat: Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * c),
        }
    }

    /// `T^m` for `m ≥ 0`, `T*^{|m|}` for `m < 0`.
    pub fn power(&self, m: i64) -> Self {
        let base = if m < 0 { self.adjoint() } else { self.clone() };
        let mut e = m.unsigned_abs();
        let mut acc: Option<Mat<c64>> = None;
        let mut sq = base.mat;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => sq.clone(),
                    Some(a) => dense::matmul(a.as_ref(), sq.as_ref()),
                });
            }
            e >>= 1;
            if e > 0 {
                sq = dense::matmul(sq.as_ref(), sq.as_ref());
            }
        }
        Self {
            mat: acc.unwrap_or_else(|| Mat::identity(self.dim(), self.dim())),
        }
    }

    /// Largest singular value.
    pub fn norm(&self) -> f64 {
        dense::spectral_norm(self.mat())
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// `‖self·other − other·self‖`.
    pub fn commutator_norm(&self, other: &Self) -> Result<f64> {
        self.compose(other)?.distance(&other.compose(self)?)
    }

    /// `‖T − T*‖`.
    pub fn hermitian_residual(&self) -> f64 {
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] - self.mat[(j, i)].conj())
            .as_ref()
            .pipe(dense::spectral_norm)
    }

    /// Block diagonal `self ⊕ other`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (a, b) = (self.dim(), other.dim());
        Self {
            mat: Mat::from_fn(a + b, a + b, |i, j| {
                if i < a && j < a {
                    self.mat[(i, j)]
                } else if i >= a && j >= a {
                    other.mat[(i - a, j - a)]
                } else {
                    c64::new(0.0, 0.0)
                }
            }),
        }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let b = other.dim();
        let n = self.dim() * b;
        Self {
            mat: Mat::from_fn(n, n, |i, j| self.mat[(i / b, j / b)] * other.mat[(i % b, j % b)]),
        }
    }

    /// `Q · self · Q*`.
    pub fn conjugate_by(&self, q: &Self) -> Result<Self> {
        q.compose(self)?.compose(&q.adjoint())
    }

    /// Smallest eigenvalue of the Hermitian part of `self`.
    pub fn min_hermitian_eigenvalue(&self) -> Result<f64> {
        let h = self.hermitian_part();
        if h.dim() == 0 {
            return Ok(f64::INFINITY);
        }
        let ev = h
            .mat()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
        Ok(ev.into_iter().fold(f64::INFINITY, f64::min))
    }

    fn hermitian_part(&self) -> Self {
        Self {
            mat: Mat::from_fn(self.dim(), self.dim(), |i, j| {
                (self.mat[(i, j)] + self.mat[(j, i)].conj()) * 0.5
            }),
        }
    }

    /// `D_T = (I − T*T)^{1/2}` or `D_{T*} = (I − TT*)^{1/2}`.
    ///
    /// Eigenvalues of `I − T*T` in `[−residual_tol, rank_rtol]` are set to zero
    /// (so an isometry has defect exactly zero rather than `√ε`); anything more
    /// negative means `T` is not a contraction.
    pub fn defect_operator(&self, side: DefectSide, tol: &ToleranceProfile) -> Result<Self> {
        let gram = match side {
            DefectSide::Left => self.adjoint().compose(self)?,
            DefectSide::Right => self.compose(&self.adjoint())?,
        };
        let d = Self::identity(self.dim()).sub(&gram)?.hermitian_part();
        let n = d.dim();
        if n == 0 {
            return Ok(d);
        }
        let evd = d
            .mat()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
        let u = evd.U();
        let s: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -tol.residual_tol {
            return Err(Error::NotAContraction { min_eigenvalue: min });
        }
        let root: Vec<f64> = s
            .iter()
            .map(|&x| if x <= tol.rank_rtol { 0.0 } else { x.sqrt() })
            .collect();
        let scaled = Mat::from_fn(n, n, |i, k| u[(i, k)] * root[k]);
        let mat = dense::matmul(scaled.as_ref(), dense::adjoint(u).as_ref());
        Ok(Self { mat })
    }

    /// Errors unless `‖T‖ ≤ 1 + residual_tol`.
    pub fn ensure_contraction(&self, tol: &ToleranceProfile) -> Result<()> {
        let norm = self.norm();
        if norm > 1.0 + tol.residual_tol {
            return Err(Error::NotAContraction {
                min_eigenvalue: 1.0 - norm * norm,
            });
        }
        Ok(())
    }

    /// Tests the standard operator classes; see [`OperatorClass`].
    pub fn classify(&self, tol: &ToleranceProfile, m_max: usize) -> OperatorClass {
        let eps = tol.residual_tol;
        let n = self.dim();
        let id = Self::identity(n);
        let adj = self.adjoint();
        let flag = |residual: f64| Flag {
            holds: residual <= eps,
            residual,
        };
        let contraction = flag((self.norm() - 1.0).max(0.0));
        let isometry = flag(adj.compose(self).and_then(|g| g.distance(&id)).unwrap_or(f64::INFINITY));
        let coisometry = flag(self.compose(&adj).and_then(|g| g.distance(&id)).unwrap_or(f64::INFINITY));
        let partial_isometry = flag(partial_isometry_residual(self));

        let mut ppi_residual = 0.0f64;
        let mut first_failing_power = None;
        let mut pw = Self::identity(n);
        for k in 1..=m_max {
            pw = pw.compose(self).expect("square");
            let r = partial_isometry_residual(&pw);
            ppi_residual = ppi_residual.max(r);
            if r > eps && first_failing_power.is_none() {
                first_failing_power = Some(k);
            }
        }

        let unitary = Flag {
            holds: isometry.holds && coisometry.holds,
            residual: isometry.residual.max(coisometry.residual),
        };
        OperatorClass {
            contraction: Flag {
                holds: contraction.holds || isometry.holds,
                residual: contraction.residual,
            },
            partial_isometry: Flag {
                holds: partial_isometry.holds || isometry.holds,
                residual: partial_isometry.residual,
            },
            isometry,
            coisometry,
            unitary,
            power_partial_isometry: Flag {
                holds: first_failing_power.is_none(),
                residual: ppi_residual,
            },
            ppi_checked_up_to: m_max,
            first_failing_power,
        }
    }

    /// Compression `B* T B` to `span(B)` together with
    /// `max(‖(I−P)TP‖, ‖PT(I−P)‖)`, which vanishes iff `span(B)` reduces `T`.
    pub fn restrict_to_reducing(&self, m: &SubspaceBasis) -> Result<(Self, f64)> {
        if m.ambient_dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.ambient_dim(),
            });
        }
        let b = m.columns();
        let tb = dense::matmul(self.mat(), b);
        let block = dense::matmul(dense::adjoint(b).as_ref(), tb.as_ref());
        let off = off_diagonal_residual(self, m, &tb);
        Ok((Self { mat: block }, off))
    }

    /// Only the reducing residual of [`Self::restrict_to_reducing`].
    pub fn reducing_residual(&self, m: &SubspaceBasis) -> Result<f64> {
        if m.ambient_dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.ambient_dim(),
            });
        }
        let tb = dense::matmul(self.mat(), m.columns());
        Ok(off_diagonal_residual(self, m, &tb))
    }

    /// Image of a vector.
    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.mat[(i, j)] * v[j]).sum())
            .collect()
    }
}

fn off_diagonal_residual(t: &DenseOperator, m: &SubspaceBasis, tb: &Mat<c64>) -> f64 {
    let b = m.columns();
    if m.dim() == 0 || m.dim() == m.ambient_dim() {
        return 0.0;
    }
    // ‖(I−P)TP‖ = ‖(I−P)TB‖ and ‖PT(I−P)‖ = ‖(I−P)T*B‖ since B is an isometry.
    let lower = dense::reject(b, tb.as_ref());
    let tsb = dense::matmul(dense::adjoint(t.mat()).as_ref(), b);
    let upper = dense::reject(b, tsb.as_ref());
    dense::spectral_norm(lower.as_ref()).max(dense::spectral_norm(upper.as_ref()))
}

/// `‖T T* T − T‖`.
fn partial_isometry_residual(t: &DenseOperator) -> f64 {
    let ttt = dense::matmul(
        dense::matmul(t.mat(), dense::adjoint(t.mat()).as_ref()).as_ref(),
        t.mat(),
    );
    let d = Mat::from_fn(t.dim(), t.dim(), |i, j| ttt[(i, j)] - t.mat[(i, j)]);
    dense::spectral_norm(d.as_ref())
}

trait Pipe: Sized {
    fn pipe<R>(self, f: impl FnOnce(Self) -> R) -> R {
        f(self)
    }
}
impl<T> Pipe for T {}

/// A class membership test with its residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flag {
    pub holds: bool,
    pub residual: f64,
}

/// Result of [`DenseOperator::classify`].
///
/// Residuals: contraction `max(‖T‖ − 1, 0)`, isometry `‖T*T − I‖`,
/// coisometry `‖TT* − I‖`, partial isometry `‖TT*T − T‖`, and for power
/// partial isometry the largest `‖T^k T^{*k} T^k − T^k‖` over `1 ≤ k ≤ m_max`.
/// `unitary` holds iff both `isometry` and `coisometry` hold, and an isometry
/// is always reported as a contraction and a partial isometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorClass {
    pub contraction: Flag,
    pub isometry: Flag,
    pub coisometry: Flag,
    pub unitary: Flag,
    pub partial_isometry: Flag,
    pub power_partial_isometry: Flag,
    pub ppi_checked_up_to: usize,
    pub first_failing_power: Option<usize>,
}

/// The `d × d` nilpotent Jordan shift `e_k ↦ e_{k+1}`.
pub fn jordan_shift(d: usize) -> DenseOperator {
    DenseOperator::from_mat_unchecked(Mat::from_fn(d, d, |i, j| {
        if i == j + 1 {
            c64::new(1.0, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::random::{haar_unitary, random_contraction, seeded};
    use proptest::prelude::*;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn re(x: f64) -> c64 {
        c64::new(x, 0.0)
    }

    #[test]
    fn power_examples() {
        let mut rng = seeded(1);
        let t = random_contraction(&mut rng, 5, 0.9);
        assert_eq!(t.power(0).distance(&DenseOperator::identity(5)).unwrap(), 0.0);
        assert_eq!(t.adjoint().adjoint().distance(&t).unwrap(), 0.0);
        assert_eq!(jordan_shift(3).power(3).norm(), 0.0);
        let neg = t.power(-2);
        let manual = t.adjoint().compose(&t.adjoint()).unwrap();
        assert!(neg.distance(&manual).unwrap() < 1e-15);
    }

    #[test]
    fn defect_examples() {
        let mut rng = seeded(2);
        let u = haar_unitary(&mut rng, 4);
        assert_eq!(u.defect_operator(DefectSide::Left, &tol()).unwrap().norm(), 0.0);
        let t = DenseOperator::diagonal(&[re(1.0), re(0.6)]);
        let d = t.defect_operator(DefectSide::Left, &tol()).unwrap();
        assert!(d.distance(&DenseOperator::diagonal(&[re(0.0), re(0.8)])).unwrap() < 1e-15);
        let big = DenseOperator::diagonal(&[re(1.1)]);
        assert!(matches!(
            big.defect_operator(DefectSide::Left, &tol()),
            Err(Error::NotAContraction { .. })
        ));
    }

    #[test]
    fn defect_of_random_contraction_matches_eigen_oracle() {
        let mut rng = seeded(3);
        let t = random_contraction(&mut rng, 6, 0.9);
        let d = t.defect_operator(DefectSide::Left, &tol()).unwrap();
        // D² reproduces I − T*T, and the spectrum of D is √(1 − σ²) for the
        // singular values σ of T.
        let gram = DenseOperator::identity(6).sub(&t.adjoint().compose(&t).unwrap()).unwrap();
        assert!(d.compose(&d).unwrap().distance(&gram).unwrap() < 1e-12);
        let mut expected: Vec<f64> = dense::singular_values(t.mat())
            .unwrap()
            .iter()
            .map(|s| (1.0 - s * s).sqrt())
            .collect();
        expected.sort_by(f64::total_cmp);
        let got = d.mat().self_adjoint_eigenvalues(Side::Lower).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
            assert!(*a >= (1.0f64 - 0.81).sqrt() - 1e-12 && *a <= 1.0 + 1e-12);
        }
        let dr = t.defect_operator(DefectSide::Right, &tol()).unwrap();
        let gram_r = DenseOperator::identity(6).sub(&t.compose(&t.adjoint()).unwrap()).unwrap();
        assert!(dr.compose(&dr).unwrap().distance(&gram_r).unwrap() < 1e-12);
    }

    #[test]
    fn classify_examples() {
        let j = jordan_shift(4).classify(&tol(), 4);
        assert!(j.partial_isometry.holds);
        assert!(!j.isometry.holds);
        assert!(j.power_partial_isometry.holds);
        let h = DenseOperator::diagonal(&[re(0.5)]).classify(&tol(), 1);
        assert!(h.contraction.holds);
        assert!(!h.partial_isometry.holds);
        assert_eq!(h.first_failing_power, Some(1));
    }

    #[test]
    fn classify_planted_shift_plus_unitary_is_ppi() {
        let mut rng = seeded(4);
        let u = haar_unitary(&mut rng, 3);
        let q = haar_unitary(&mut rng, 7);
        let t = jordan_shift(4).direct_sum(&u).conjugate_by(&q).unwrap();
        let c = t.classify(&tol(), 7);
        for k in 1..=7 {
            let p = t.power(k as i64);
            let r = p.compose(&p.adjoint()).unwrap().compose(&p).unwrap().distance(&p).unwrap();
            assert!(r < 1e-10, "power {k}");
        }
        assert!(c.power_partial_isometry.holds);
        assert!(!c.isometry.holds);
    }

    #[test]
    fn haar_unitaries_classify_as_unitary() {
        for seed in 0..10 {
            let u = haar_unitary(&mut seeded(seed), 6);
            let c = u.classify(&tol(), 2);
            assert!(c.unitary.holds);
            assert!(c.unitary.residual <= 1e-12);
            assert!(c.isometry.holds && c.coisometry.holds && c.contraction.holds);
        }
    }

    #[test]
    fn restrict_examples() {
        let mut rng = seeded(5);
        let a = random_contraction(&mut rng, 3, 0.9);
        let b = random_contraction(&mut rng, 2, 0.9);
        let t = a.direct_sum(&b);
        let full = SubspaceBasis::full(5, tol());
        let (blk, off) = t.restrict_to_reducing(&full).unwrap();
        assert_eq!(off, 0.0);
        assert!(blk.distance(&t).unwrap() == 0.0);

        let first = SubspaceBasis::coordinate(5, &[0, 1, 2], tol()).unwrap();
        let (blk, off) = t.restrict_to_reducing(&first).unwrap();
        assert!(off < 1e-15);
        assert!(blk.distance(&a).unwrap() < 1e-15);

        let q = haar_unitary(&mut rng, 5);
        let tq = t.conjugate_by(&q).unwrap();
        let img = SubspaceBasis::from_orthonormal(
            Mat::from_fn(5, 3, |i, j| q.entry(i, j)),
            tol(),
        )
        .unwrap();
        let (_, off) = tq.restrict_to_reducing(&img).unwrap();
        assert!(off <= 1e-12);
    }

    fn arb_contraction() -> impl Strategy<Value = DenseOperator> {
        (1usize..7, any::<u64>()).prop_map(|(n, seed)| random_contraction(&mut seeded(seed), n, 1.0))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gram_is_hermitian_psd(t in arb_contraction()) {
            let g = t.adjoint().compose(&t).unwrap();
            prop_assert!(g.hermitian_residual() <= 1e-12);
            prop_assert!(g.min_hermitian_eigenvalue().unwrap() >= -1e-12);
        }

        #[test]
        fn power_is_additive(t in arb_contraction(), m in 0i64..5, k in 0i64..5) {
            let lhs = t.power(m + k);
            let rhs = t.power(m).compose(&t.power(k)).unwrap();
            prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-8 * t.dim() as f64);
        }

        #[test]
        fn defect_vanishes_iff_isometry(n in 1usize..6, seed in any::<u64>(), iso in any::<bool>()) {
            let mut rng = seeded(seed);
            let t = if iso { haar_unitary(&mut rng, n) } else { random_contraction(&mut rng, n, 0.95) };
            let c = t.classify(&tol(), 1);
            let d = t.defect_operator(DefectSide::Left, &tol()).unwrap();
            prop_assert_eq!(d.norm() <= tol().residual_tol, c.isometry.holds);
        }
    }
}
