//! Seeded random matrices: complex Gaussians, Haar unitaries, phase diagonals
//! and contractions of prescribed norm. All draws go through ChaCha8 so a
//! 64-bit seed fixes every output.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dense;
use crate::operator::DenseOperator;

pub type ZooRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ZooRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries with independent standard normal real and imaginary parts scaled
/// by `1/√2`.
pub fn complex_gaussian(rng: &mut ZooRng, rows: usize, cols: usize) -> Mat<c64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = c64::new(re * s, im * s);
        }
    }
    m
}

/// Haar-distributed unitary: QR of a complex Gaussian with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary(rng: &mut ZooRng, n: usize) -> DenseOperator {
    if n == 0 {
        return DenseOperator::identity(0);
    }
    let g = complex_gaussian(rng, n, n);
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let phase: Vec<c64> = (0..n)
        .map(|k| {
            let d = r[(k, k)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c64::new(1.0, 0.0)
            }
        })
        .collect();
    DenseOperator::from_mat_unchecked(Mat::from_fn(n, n, |i, j| q[(i, j)] * phase[j]))
}

/// `diag(e^{iθ_k})` with uniform phases.
pub fn phase_diagonal(rng: &mut ZooRng, n: usize) -> DenseOperator {
    let d: Vec<c64> = (0..n)
        .map(|_| {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            c64::cis(t)
        })
        .collect();
    DenseOperator::diagonal(&d)
}

/// Complex Gaussian rescaled to spectral norm exactly `norm` (up to rounding).
pub fn random_contraction(rng: &mut ZooRng, n: usize, norm: f64) -> DenseOperator {
    let g = complex_gaussian(rng, n, n);
    let s = dense::spectral_norm(g.as_ref());
    let f = if s > 0.0 { norm / s } else { 0.0 };
    DenseOperator::from_mat_unchecked(Mat::from_fn(n, n, |i, j| g[(i, j)] * f))
}
