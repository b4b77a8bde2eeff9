use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical thresholds shared by every dense computation.
///
/// `rank_rtol` decides numerical rank (relative to the largest singular value),
/// `residual_tol` bounds operator residuals such as `‖B*B − I‖`, and
/// `stabilization_window` is the number of consecutive unchanged iterations a
/// fixed-point loop must observe before it stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceProfile {
    pub rank_rtol: f64,
    pub residual_tol: f64,
    pub stabilization_window: usize,
}

impl ToleranceProfile {
    pub const DEFAULT_RANK_RTOL: f64 = 1e-10;
    pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
    pub const DEFAULT_STABILIZATION_WINDOW: usize = 3;

    pub fn new(rank_rtol: f64, residual_tol: f64, stabilization_window: usize) -> Result<Self> {
        let profile = Self {
            rank_rtol,
            residual_tol,
            stabilization_window,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rank_rtol > 0.0 && self.rank_rtol < 1.0) {
            return Err(Error::InvalidTolerance(format!(
                "rank_rtol must lie in (0, 1), got {}",
                self.rank_rtol
            )));
        }
        if !(self.residual_tol > 0.0 && self.residual_tol < 1.0) {
            return Err(Error::InvalidTolerance(format!(
                "residual_tol must lie in (0, 1), got {}",
                self.residual_tol
            )));
        }
        if self.stabilization_window < 1 {
            return Err(Error::InvalidTolerance(
                "stabilization_window must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_residual_tol(self, residual_tol: f64) -> Result<Self> {
        Self::new(self.rank_rtol, residual_tol, self.stabilization_window)
    }
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            rank_rtol: Self::DEFAULT_RANK_RTOL,
            residual_tol: Self::DEFAULT_RESIDUAL_TOL,
            stabilization_window: Self::DEFAULT_STABILIZATION_WINDOW,
        }
    }
}
