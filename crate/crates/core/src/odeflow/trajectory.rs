use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::grid::matches_point;
use crate::linalg::GAUSS_LEGENDRE_8;
use crate::matfun::MatrixFunction;
use crate::{CVec, Error, Interval, Result, Tolerances, C64};

use super::rk::Dopri5;
use super::{eval_in_piece, pack_vec, unpack_vec, FundamentalSolution, LtvSystem};

/// Input that is constant on each cell `[nodes[k], nodes[k+1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseConstantInput {
    nodes: Vec<f64>,
    values: Vec<CVec>,
}

impl PiecewiseConstantInput {
    pub fn new(nodes: Vec<f64>, values: Vec<CVec>) -> Result<Self> {
        if nodes.len() < 2 || values.len() + 1 != nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} cell values for {} nodes",
                values.len(),
                nodes.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("input nodes must increase strictly".into()));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::ShapeMismatch("input values differ in length".into()));
        }
        Ok(PiecewiseConstantInput { nodes, values })
    }

    /// One cell carrying `value` over all of `interval`.
    pub fn constant(interval: Interval, value: CVec) -> Self {
        PiecewiseConstantInput {
            nodes: vec![interval.start, interval.end],
            values: vec![value],
        }
    }

    pub fn zero(m: usize, interval: Interval) -> Self {
        Self::constant(interval, CVec::zeros(m))
    }

    /// `cells` uniform cells on `interval` with the given values.
    pub fn uniform(interval: Interval, values: Vec<CVec>) -> Result<Self> {
        let cells = values.len();
        let h = interval.length() / cells as f64;
        let mut nodes: Vec<f64> = (0..cells).map(|k| interval.start + k as f64 * h).collect();
        nodes.push(interval.end);
        Self::new(nodes, values)
    }

    /// Uniform cells with independent complex entries of modulus at most
    /// `amplitude`.
    pub fn random<R: Rng>(rng: &mut R, m: usize, interval: Interval, cells: usize, amplitude: f64) -> Self {
        let values = (0..cells.max(1))
            .map(|_| {
                CVec::from_fn(m, |_, _| {
                    let r = amplitude * rng.gen::<f64>().sqrt();
                    let phi = std::f64::consts::TAU * rng.gen::<f64>();
                    C64::from_polar(r, phi)
                })
            })
            .collect();
        Self::uniform(interval, values).expect("uniform cells are valid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[CVec] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn span(&self) -> Interval {
        Interval {
            start: self.nodes[0],
            end: *self.nodes.last().unwrap(),
        }
    }

    /// Value on the cell owning `t` (half-open, last cell closed).
    pub fn value_at(&self, t: f64) -> &CVec {
        let k = self.nodes.partition_point(|&s| s <= t).saturating_sub(1);
        &self.values[k.min(self.values.len() - 1)]
    }
}

/// Sampled state-input-output solution.
///
/// `u[k]` is the input on the cell `[grid[k], grid[k+1])`. The outputs
/// `y_start[k]` and `y_end[k]` are the one-sided values of `C x + D u[k]` at
/// the two ends of cell `k`; `y[k]` uses the point values of `C` and `D` and
/// the input of the cell starting at node `k` (the last node uses the last
/// cell). `output_integral[k]` is `∫ y dt` from `grid[0]` to `grid[k]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    #[serde(skip)]
    pub x: Vec<CVec>,
    #[serde(skip)]
    pub u: Vec<CVec>,
    #[serde(skip)]
    pub y: Vec<CVec>,
    #[serde(skip)]
    pub y_start: Vec<CVec>,
    #[serde(skip)]
    pub y_end: Vec<CVec>,
    #[serde(skip)]
    pub output_integral: Vec<CVec>,
}

impl Trajectory {
    pub fn span(&self) -> Interval {
        Interval {
            start: self.grid[0],
            end: *self.grid.last().unwrap(),
        }
    }

    pub fn node_index(&self, t: f64) -> Option<usize> {
        self.grid
            .iter()
            .position(|&s| matches_point(&[s], t))
    }

    /// Supply `∫ Re(y* u) dt` between two grid nodes, computed from the
    /// integrated output; exact up to the integrator tolerance.
    pub fn exact_supply(&self, k0: usize, k1: usize) -> f64 {
        let (lo, hi, sign) = if k0 <= k1 { (k0, k1, 1.0) } else { (k1, k0, -1.0) };
        let s: f64 = (lo..hi)
            .map(|k| {
                let yi = &self.output_integral[k + 1] - &self.output_integral[k];
                yi.dotc(&self.u[k]).re
            })
            .sum();
        sign * s
    }

    /// Cumulative exact supply from the first node.
    pub fn cumulative_supply(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for k in 0..self.u.len() {
            let yi = &self.output_integral[k + 1] - &self.output_integral[k];
            acc += yi.dotc(&self.u[k]).re;
            out.push(acc);
        }
        out
    }

    /// CSV with a dimension comment line, a header and one row per node.
    pub fn write_csv<W: Write>(&self, out: W, extra: &[(&str, Vec<f64>)]) -> Result<()> {
        let n = self.x[0].len();
        let m = self.u.first().map(|v| v.len()).unwrap_or(0);
        let mut out = out;
        writeln!(out, "# n={n} m={m} nodes={}", self.grid.len())?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for (prefix, dim) in [("x", n), ("u", m), ("y", m)] {
            for i in 0..dim {
                header.push(format!("{prefix}{i}_re"));
                header.push(format!("{prefix}{i}_im"));
            }
        }
        header.push("supply".into());
        header.extend(extra.iter().map(|(name, _)| name.to_string()));
        w.write_record(&header)?;
        let supply = self.cumulative_supply();
        for k in 0..self.grid.len() {
            let u = &self.u[k.min(self.u.len() - 1)];
            let mut row = vec![format!("{:.17e}", self.grid[k])];
            for v in [&self.x[k], u, &self.y[k]] {
                for z in v.iter() {
                    row.push(format!("{:.17e}", z.re));
                    row.push(format!("{:.17e}", z.im));
                }
            }
            row.push(format!("{:.17e}", supply[k]));
            for (_, col) in extra {
                row.push(format!("{:.17e}", col[k]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates `x' = A x + B u` from `x(t0) = x0` over `span`, with the input
/// cells and the coefficient breakpoints (and `t0`) as mandatory step
/// boundaries. The output integral is carried as an extra state.
pub fn solve_inhomogeneous(
    sys: &LtvSystem,
    t0: f64,
    x0: &CVec,
    u: &PiecewiseConstantInput,
    span: Interval,
    tol: &Tolerances,
) -> Result<Trajectory> {
    let (n, m) = (sys.n(), sys.m());
    if x0.len() != n || u.dim() != m {
        return Err(Error::ShapeMismatch(format!(
            "x0 has length {}, input has {} channels; system is n = {n}, m = {m}",
            x0.len(),
            u.dim()
        )));
    }
    if !sys.interval().contains_interval(&span) {
        return Err(Error::OutOfDomain {
            t: span.start,
            start: sys.interval().start,
            end: sys.interval().end,
        });
    }
    span.check(t0)?;
    if !u.span().contains_interval(&span) {
        return Err(Error::InvalidArgument(format!(
            "input covers [{}, {}], not the span [{}, {}]",
            u.span().start,
            u.span().end,
            span.start,
            span.end
        )));
    }

    let mut pts: Vec<f64> = sys.breakpoints();
    pts.extend_from_slice(u.nodes());
    pts.push(t0);
    let grid = crate::TimeGrid::uniform_with(span, 1, &pts);
    let nodes = grid.nodes().to_vec();
    let cells = nodes.len() - 1;
    let k0 = nodes.iter().position(|&s| matches_point(&[t0], s)).expect("t0 inserted");

    let cell_u: Vec<CVec> = (0..cells)
        .map(|k| u.value_at(0.5 * (nodes[k] + nodes[k + 1])).clone())
        .collect();

    let dim = 2 * (n + m);
    let mut states: Vec<Vec<f64>> = vec![Vec::new(); nodes.len()];
    let mut init = vec![0.0; dim];
    pack_vec(x0, &mut init[..2 * n]);
    states[k0] = init;

    let mut rk = Dopri5::new(tol.rtol, tol.atol);
    let step = |from: usize, to: usize, cell: usize, rk: &mut Dopri5, states: &mut Vec<Vec<f64>>| -> Result<()> {
        let (p0, p1) = (nodes[from], nodes[to]);
        let uk = &cell_u[cell];
        let mut y = states[from].clone();
        rk.integrate_piece(
            |t, s, ds| {
                let a = eval_in_piece(&sys.a, t, p0, p1)?;
                let b = eval_in_piece(&sys.b, t, p0, p1)?;
                let c = eval_in_piece(&sys.c, t, p0, p1)?;
                let d = eval_in_piece(&sys.d, t, p0, p1)?;
                let x = unpack_vec(&s[..2 * n], n);
                pack_vec(&(&a * &x + &b * uk), &mut ds[..2 * n]);
                pack_vec(&(&c * &x + &d * uk), &mut ds[2 * n..]);
                Ok(())
            },
            p0,
            p1,
            &mut y,
            |_| {},
        )?;
        states[to] = y;
        Ok(())
    };
    for k in k0..cells {
        step(k, k + 1, k, &mut rk, &mut states)?;
    }
    for k in (0..k0).rev() {
        step(k + 1, k, k, &mut rk, &mut states)?;
    }

    let x: Vec<CVec> = states.iter().map(|s| unpack_vec(&s[..2 * n], n)).collect();
    let q0 = unpack_vec(&states[0][2 * n..], m);
    let output_integral: Vec<CVec> = states.iter().map(|s| unpack_vec(&s[2 * n..], m) - &q0).collect();
    let mut y = Vec::with_capacity(nodes.len());
    let mut y_start = Vec::with_capacity(cells);
    let mut y_end = Vec::with_capacity(cells);
    for k in 0..nodes.len() {
        let uk = &cell_u[k.min(cells - 1)];
        y.push(sys.c.eval(nodes[k])? * &x[k] + sys.d.eval(nodes[k])? * uk);
        if k < cells {
            y_start.push(sys.c.right_limit(nodes[k])? * &x[k] + sys.d.right_limit(nodes[k])? * uk);
            y_end.push(
                sys.c.left_limit(nodes[k + 1])? * &x[k + 1] + sys.d.left_limit(nodes[k + 1])? * uk,
            );
        }
    }
    Ok(Trajectory {
        grid: nodes,
        x,
        u: cell_u,
        y,
        y_start,
        y_end,
        output_integral,
    })
}

/// `∫_{t0}^{t1} Re(y* u) dt` by the trapezoid rule on each cell, with the
/// cells containing `t0` and `t1` split exactly (linear interpolation of the
/// output within the cell).
pub fn supply_integral(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    let span = traj.span();
    span.check(t0)?;
    span.check(t1)?;
    if t1 < t0 {
        return Ok(-supply_integral(traj, t1, t0)?);
    }
    let g = &traj.grid;
    let mut total = 0.0;
    for k in 0..g.len() - 1 {
        let (a, b) = (g[k], g[k + 1]);
        let lo = a.max(t0);
        let hi = b.min(t1);
        if hi <= lo {
            continue;
        }
        let at = |s: f64| -> f64 {
            let w = (s - a) / (b - a);
            let ys = &traj.y_start[k] * C64::new(1.0 - w, 0.0) + &traj.y_end[k] * C64::new(w, 0.0);
            ys.dotc(&traj.u[k]).re
        };
        total += 0.5 * (hi - lo) * (at(lo) + at(hi));
    }
    Ok(total)
}

/// Agreement between a directly integrated trajectory and the variation of
/// constants formula `x(t) = X(t) (X(t0)⁻¹ x0 + ∫ X(s)⁻¹ B(s) u(s) ds)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VocReport {
    /// Largest `‖x_direct − x_voc‖ / max(1, ‖x_direct‖)` over the nodes.
    pub max_deviation: f64,
    pub nodes: usize,
    pub passed: bool,
}

/// Recomputes the states of `traj` through the variation of constants formula
/// with `flow` (any anchor) and compares node by node.
pub fn verify_variation_of_constants(
    sys: &LtvSystem,
    flow: &FundamentalSolution,
    traj: &Trajectory,
    t0: f64,
    tol: &Tolerances,
) -> Result<VocReport> {
    let g = &traj.grid;
    let k0 = traj
        .node_index(t0)
        .ok_or_else(|| Error::InvalidArgument(format!("t0 = {t0} is not a trajectory node")))?;
    const SUB: usize = 4;
    let cell_integral = |k: usize| -> Result<CVec> {
        let (a, b) = (g[k], g[k + 1]);
        let h = (b - a) / SUB as f64;
        let mut acc = CVec::zeros(sys.n());
        for j in 0..SUB {
            let (s0, s1) = (a + j as f64 * h, a + (j + 1) as f64 * h);
            let (mid, half) = (0.5 * (s0 + s1), 0.5 * (s1 - s0));
            for (xg, wg) in GAUSS_LEGENDRE_8 {
                let s = mid + half * xg;
                let bs = eval_in_piece(&sys.b, s, a, b)?;
                acc += flow.inverse(s)? * (bs * &traj.u[k]) * C64::new(wg * half, 0.0);
            }
        }
        Ok(acc)
    };
    let base: CVec = flow.inverse(g[k0])? * &traj.x[k0];
    let mut z = vec![CVec::zeros(sys.n()); g.len()];
    z[k0] = base.clone();
    for k in k0..g.len() - 1 {
        z[k + 1] = &z[k] + cell_integral(k)?;
    }
    for k in (0..k0).rev() {
        z[k] = &z[k + 1] - cell_integral(k)?;
    }
    let mut worst: f64 = 0.0;
    for k in 0..g.len() {
        let x_voc: CVec = flow.eval(g[k])? * &z[k];
        let dev = (&x_voc - &traj.x[k]).norm() / traj.x[k].norm().max(1.0);
        worst = worst.max(dev);
    }
    Ok(VocReport {
        max_deviation: worst,
        nodes: g.len(),
        passed: worst <= tol.traj,
    })
}
