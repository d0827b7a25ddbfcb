//! Homogeneous and forced LTV dynamics.
//!
//! All integrations split the time axis at the breakpoints of the
//! coefficients and at the input-cell boundaries, so every Runge–Kutta step
//! sees a smooth right-hand side. Coefficients on a piece `[a, b]` are taken
//! from the smooth segment owning the open piece, including at its ends.

mod flow;
pub mod rk;
mod system;
mod trajectory;

pub use flow::{FlowDiagnostics, FundamentalSolution};
pub use rk::IntegratorStats;
pub use system::LtvSystem;
pub use trajectory::{
    solve_inhomogeneous, supply_integral, verify_variation_of_constants, PiecewiseConstantInput,
    Trajectory, VocReport,
};

use crate::matfun::MatrixFunction;
use crate::{CMat, CVec, Result, C64};

/// Value of `f` on the smooth piece `[a, b]` (given in either order).
pub(crate) fn eval_in_piece(f: &dyn MatrixFunction, t: f64, a: f64, b: f64) -> Result<CMat> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let t = t.clamp(lo, hi);
    if t >= hi {
        f.left_limit(t)
    } else {
        f.right_limit(t)
    }
}

/// Sorted list of the points of `points` strictly inside `(a, b)`, with `a`
/// and `b` prepended and appended.
pub(crate) fn piece_bounds(a: f64, b: f64, points: &[f64]) -> Vec<f64> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut v: Vec<f64> = points
        .iter()
        .copied()
        .filter(|&t| t > lo && t < hi && !crate::grid::matches_point(&[lo, hi], t))
        .collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v.dedup();
    let mut out = Vec::with_capacity(v.len() + 2);
    out.push(lo);
    out.extend(v);
    out.push(hi);
    if a > b {
        out.reverse();
    }
    out
}

pub(crate) fn pack_vec(v: &CVec, out: &mut [f64]) {
    for (i, z) in v.iter().enumerate() {
        out[2 * i] = z.re;
        out[2 * i + 1] = z.im;
    }
}

pub(crate) fn unpack_vec(data: &[f64], n: usize) -> CVec {
    CVec::from_fn(n, |i, _| C64::new(data[2 * i], data[2 * i + 1]))
}

/// Column-major interleaved packing.
pub(crate) fn pack_mat(m: &CMat, out: &mut [f64]) {
    for (k, z) in m.iter().enumerate() {
        out[2 * k] = z.re;
        out[2 * k + 1] = z.im;
    }
}

pub(crate) fn unpack_mat(data: &[f64], rows: usize, cols: usize) -> CMat {
    CMat::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|k| C64::new(data[2 * k], data[2 * k + 1])),
    )
}
