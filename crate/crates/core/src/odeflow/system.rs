use crate::matfun::{MatrixFunction, PiecewiseMatrixFunction};
use crate::{CMat, Error, Interval, Result, Tolerances};

use super::FundamentalSolution;

/// The coefficient quadruple `(A, B, C, D)` on a common working interval.
#[derive(Clone, Debug, PartialEq)]
pub struct LtvSystem {
    pub a: PiecewiseMatrixFunction,
    pub b: PiecewiseMatrixFunction,
    pub c: PiecewiseMatrixFunction,
    pub d: PiecewiseMatrixFunction,
    n: usize,
    m: usize,
    interval: Interval,
}

impl LtvSystem {
    pub fn new(
        a: PiecewiseMatrixFunction,
        b: PiecewiseMatrixFunction,
        c: PiecewiseMatrixFunction,
        d: PiecewiseMatrixFunction,
    ) -> Result<Self> {
        let (n, n2) = a.shape();
        if n != n2 {
            return Err(Error::ShapeMismatch(format!("A is {n}×{n2}")));
        }
        let m = b.shape().1;
        let expect = [("B", b.shape(), (n, m)), ("C", c.shape(), (m, n)), ("D", d.shape(), (m, m))];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::ShapeMismatch(format!(
                    "{name} is {}×{}, expected {}×{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        let interval = a.domain();
        for (name, f) in [("B", &b), ("C", &c), ("D", &d)] {
            if f.domain() != interval {
                return Err(Error::ShapeMismatch(format!(
                    "domain of {name} is [{}, {}], A lives on [{}, {}]",
                    f.domain().start,
                    f.domain().end,
                    interval.start,
                    interval.end
                )));
            }
        }
        Ok(LtvSystem {
            a,
            b,
            c,
            d,
            n,
            m,
            interval,
        })
    }

    /// System with constant coefficients.
    pub fn constant(a: &CMat, b: &CMat, c: &CMat, d: &CMat, interval: Interval) -> Result<Self> {
        Self::new(
            PiecewiseMatrixFunction::constant(a, interval),
            PiecewiseMatrixFunction::constant(b, interval),
            PiecewiseMatrixFunction::constant(c, interval),
            PiecewiseMatrixFunction::constant(d, interval),
        )
    }

    /// State dimension.
    /// The same system on a subinterval.
    pub fn restrict(&self, to: Interval) -> Result<Self> {
        Self::new(self.a.restrict(to)?, self.b.restrict(to)?, self.c.restrict(to)?, self.d.restrict(to)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Input and output dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// Union of the breakpoints of all four coefficients.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .flat_map(|f| f.breakpoints())
            .collect();
        v.sort_by(|x, y| x.total_cmp(y));
        v.dedup();
        v
    }

    /// Fundamental solution of `x' = A x` anchored at `t0`.
    pub fn fundamental_solution(&self, t0: f64, span: Interval, tol: &Tolerances) -> Result<FundamentalSolution> {
        FundamentalSolution::compute(&self.a, t0, span, tol)
    }
}
