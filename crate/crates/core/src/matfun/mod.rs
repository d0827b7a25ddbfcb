//! Piecewise-defined matrix functions of one real time variable.
//!
//! A [`PiecewiseMatrixFunction`] is a tiling of its working interval by
//! half-open segments `[a, b)`. Each segment is smooth on its closure, so
//! the only discontinuities sit at the registered breakpoints, where the
//! point value may additionally be overridden.

pub mod expr;
mod piecewise;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::matches_point;
use crate::linalg::spectral_norm;
use crate::{CMat, Error, Interval, Result, TimeGrid};

pub use expr::{Expr, ExprError};
pub use piecewise::{PiecewiseMatrixFunction, Segment, SegmentData};

/// Left limit, point value and right limit at one time instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    #[serde(with = "crate::report::cmat")]
    pub left_limit: CMat,
    #[serde(with = "crate::report::cmat")]
    pub point_value: CMat,
    #[serde(with = "crate::report::cmat")]
    pub right_limit: CMat,
}

impl JumpRecord {
    /// `Q(t) − Q(t⁻)`.
    pub fn left_jump(&self) -> CMat {
        &self.point_value - &self.left_limit
    }

    /// `Q(t⁺) − Q(t)`.
    pub fn right_jump(&self) -> CMat {
        &self.right_limit - &self.point_value
    }

    /// `Q(t⁺) − Q(t⁻)`.
    pub fn total_jump(&self) -> CMat {
        &self.right_limit - &self.left_limit
    }
}

/// A matrix-valued function on a compact interval with finitely many
/// registered breakpoints.
///
/// Between breakpoints implementations are continuously differentiable.
/// At the domain ends the missing one-sided limit is the closure from
/// inside the domain.
pub trait MatrixFunction: Send + Sync + fmt::Debug {
    fn shape(&self) -> (usize, usize);

    fn domain(&self) -> Interval;

    /// Interior points where the function or its derivative may jump, sorted.
    fn breakpoints(&self) -> Vec<f64>;

    fn eval(&self, t: f64) -> Result<CMat>;

    fn left_limit(&self, t: f64) -> Result<CMat>;

    fn right_limit(&self, t: f64) -> Result<CMat>;

    fn left_derivative(&self, t: f64) -> Result<CMat>;

    fn right_derivative(&self, t: f64) -> Result<CMat>;

    /// Relative accuracy of `eval`; closed-form functions are exact to
    /// rounding, integrated ones to the integrator tolerance.
    fn accuracy(&self) -> f64 {
        f64::EPSILON
    }

    fn is_breakpoint(&self, t: f64) -> bool {
        matches_point(&self.breakpoints(), t)
    }

    /// Classical derivative away from breakpoints.
    fn derivative(&self, t: f64) -> Result<CMat> {
        let d = self.domain();
        d.check(t)?;
        if self.is_breakpoint(t) {
            return Err(Error::AtBreakpoint(t));
        }
        if t >= d.end {
            self.left_derivative(t)
        } else {
            self.right_derivative(t)
        }
    }

    fn one_sided_limits(&self, t: f64) -> Result<JumpRecord> {
        let d = self.domain();
        if !d.is_interior(t) {
            return Err(Error::OutOfDomain {
                t,
                start: d.start,
                end: d.end,
            });
        }
        Ok(JumpRecord {
            time: t,
            left_limit: self.left_limit(t)?,
            point_value: self.eval(t)?,
            right_limit: self.right_limit(t)?,
        })
    }

    /// One record per interior breakpoint.
    fn jump_table(&self) -> Result<Vec<JumpRecord>> {
        let d = self.domain();
        self.breakpoints()
            .into_iter()
            .filter(|&t| d.is_interior(t))
            .map(|t| self.one_sided_limits(t))
            .collect()
    }
}

/// Lower bound on the total variation obtained from one partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalVariation {
    pub value: f64,
    /// Largest grid spacing used; the bound converges as it shrinks.
    pub max_spacing: f64,
    pub nodes: usize,
}

/// Partition sum of spectral-norm increments over `grid ∩ [t0, t1]`.
///
/// Breakpoints inside `[t0, t1]` are inserted and traversed through their
/// left limit, point value and right limit, so jumps are counted exactly.
pub fn total_variation(
    f: &dyn MatrixFunction,
    t0: f64,
    t1: f64,
    grid: &TimeGrid,
) -> Result<TotalVariation> {
    let d = f.domain();
    d.check(t0)?;
    d.check(t1)?;
    if t1 < t0 {
        return Err(Error::InvalidArgument(format!("t1 = {t1} < t0 = {t0}")));
    }
    if t1 == t0 {
        return Ok(TotalVariation {
            value: 0.0,
            max_spacing: 0.0,
            nodes: 1,
        });
    }
    let window = Interval::new(t0, t1)?;
    let bps = f.breakpoints();
    let mut pts: Vec<f64> = grid
        .nodes()
        .iter()
        .copied()
        .filter(|t| window.contains(*t))
        .collect();
    pts.extend(bps.iter().copied().filter(|t| window.contains(*t)));
    pts.push(t0);
    pts.push(t1);
    let g = TimeGrid::from_nodes(pts)?;

    let mut chain: Vec<CMat> = Vec::new();
    let nodes = g.nodes();
    for (k, &t) in nodes.iter().enumerate() {
        let first = k == 0;
        let last = k + 1 == nodes.len();
        if matches_point(&bps, t) {
            if !first {
                chain.push(f.left_limit(t)?);
            }
            chain.push(f.eval(t)?);
            if !last {
                chain.push(f.right_limit(t)?);
            }
        } else {
            chain.push(f.eval(t)?);
        }
    }
    let value = chain
        .windows(2)
        .map(|w| spectral_norm(&(&w[1] - &w[0])))
        .sum();
    Ok(TotalVariation {
        value,
        max_spacing: g.max_spacing(),
        nodes: g.len(),
    })
}
