//! Passivity analysis for linear time-varying (LTV) systems
//!
//! ```text
//!     x'(t) = A(t) x(t) + B(t) u(t)
//!     y(t)  = C(t) x(t) + D(t) u(t)
//! ```
//!
//! with complex, piecewise-smooth coefficients that may jump at registered
//! breakpoints. The crate checks quadratic storage candidates
//! `V(t, x) = ½ x* Q(t) x` against the dissipation inequality with supply
//! rate `Re(y* u)`, and provides the supporting machinery:
//!
//! * [`matfun`]: piecewise matrix functions, one-sided limits, derivatives.
//! * [`odeflow`]: fundamental solution matrices and forced trajectories.
//! * [`loewner`]: Loewner-order monotonicity, AUC checks, congruences.
//! * [`nsd`]: rank profiles, kernel chains and null space decompositions.
//! * [`storage`]: dissipation, pointwise supply and kernel-condition checks.
//! * [`avstor`]: finite-horizon estimation of the available storage.
//! * [`sysfile`] and [`cli`]: the declarative system file and the command front end.

pub mod avstor;
pub mod cli;
pub mod corpus;
mod error;
pub mod grid;
pub mod linalg;
pub mod loewner;
pub mod matfun;
pub mod nsd;
pub mod odeflow;
pub mod report;
pub mod storage;
pub mod sysfile;

pub use error::{Error, Result};
pub use grid::{Interval, TimeGrid};
pub use matfun::{JumpRecord, MatrixFunction, PiecewiseMatrixFunction};
pub use odeflow::{FundamentalSolution, LtvSystem, PiecewiseConstantInput, Trajectory};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;

/// Numerical tolerances shared by the analyses.
///
/// `psd_rel`, `herm_rel` and `rank_rel` are relative factors; the absolute
/// thresholds are obtained by scaling with the norm of the matrix at hand.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance of the Runge–Kutta integrator.
    pub rtol: f64,
    /// Absolute tolerance of the Runge–Kutta integrator.
    pub atol: f64,
    /// Bound on `‖X X⁻¹ − I‖` and on `1 / cond(X)`.
    pub inv: f64,
    /// Agreement between direct integration and variation of constants.
    pub traj: f64,
    /// PSD slack factor: `τ_psd = psd_rel · (1 + ‖Q‖)`.
    pub psd_rel: f64,
    /// Hermitian residual factor: `τ_herm = herm_rel · ‖Q‖`.
    pub herm_rel: f64,
    /// Relative SVD threshold; `None` selects `max(n, m) · ε` raised to the
    /// evaluation accuracy of the function under test.
    pub rank_rel: Option<f64>,
    /// Dissipation slack factor: `τ_diss = diss_rel · (1 + |rhs|)`.
    pub diss_rel: f64,
    /// Kernel-condition factor: residuals must stay below `ker_rel · scale`.
    pub ker_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-9,
            atol: 1e-12,
            inv: 1e-8,
            traj: 1e-7,
            psd_rel: 1e-9,
            herm_rel: 1e-10,
            rank_rel: None,
            diss_rel: 1e-6,
            ker_rel: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn psd(&self, norm: f64) -> f64 {
        self.psd_rel * (1.0 + norm)
    }

    pub fn herm(&self, norm: f64) -> f64 {
        self.herm_rel * norm
    }

    pub fn diss(&self, rhs: f64) -> f64 {
        self.diss_rel * (1.0 + rhs.abs())
    }

    /// Relative rank threshold for an `n × n` matrix whose entries are known
    /// to relative accuracy `accuracy`.
    pub fn rank(&self, n: usize, accuracy: f64) -> f64 {
        match self.rank_rel {
            Some(r) => r,
            None => (n.max(1) as f64 * f64::EPSILON).max(accuracy),
        }
    }
}
