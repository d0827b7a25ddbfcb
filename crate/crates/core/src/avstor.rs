//! Finite-horizon estimation of the available storage
//!
//! ```text
//!     V_a(t0, x0) = sup_{t1 ≥ t0, u} −∫_{t0}^{t1} Re(y* u) dt,   x(t0) = x0.
//! ```
//!
//! Inputs are restricted to piecewise constants on uniform cells. For a
//! fixed horizon and cell count the objective is the quadratic
//! `J(u) = u* G u + Re(g* u)` with `G` the Hermitian part of the map from the
//! cell inputs to the cell integrals of `y`, and `g = Γ x0` the cell
//! integrals of the free response. When `G ⪰ 0` the supremum over that class
//! is `¼ g* G⁺ g`; an indefinite `G` means the supply can be driven to `−∞`.
//!
//! [`available_storage`] grows the input class by doubling the horizon or the
//! cell count, whichever gains more, so the estimates increase monotonically.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::loewner::StorageCandidate;
use crate::odeflow::{solve_inhomogeneous, LtvSystem, PiecewiseConstantInput, Trajectory};
use crate::report::MatrixJson;
use crate::storage::random_unit_ball;
use crate::{CMat, CVec, Error, Interval, Result, Tolerances, C64};

/// Upper limit on `m · cells`, the number of complex decision variables.
pub const MAX_DECISION_VARIABLES: usize = 2048;

/// Assembled quadratic program for one horizon and cell count.
#[derive(Clone, Debug)]
pub struct HorizonProblem {
    pub t0: f64,
    pub t1: f64,
    pub cells: usize,
    m: usize,
    /// Hermitian part of the input-to-output-integral map.
    g: CMat,
    /// Free-response output integrals, one column per unit initial state.
    gamma: CMat,
    eig_values: Vec<f64>,
    eig_vectors: CMat,
    threshold: f64,
}

/// Optimum of one horizon problem for one initial state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HorizonOutcome {
    pub horizon: f64,
    pub cells: usize,
    /// `−min J`; `None` when the objective is unbounded below.
    pub value: Option<f64>,
    pub unbounded: bool,
    pub min_eig: f64,
    pub max_eig: f64,
    /// `max |λ| / min |λ|` over the eigenvalues kept in the pseudo-inverse.
    pub condition: f64,
    /// Relative stationarity residual `‖2 G u + g‖ / ‖g‖`.
    pub residual: f64,
    #[serde(skip)]
    pub u: CVec,
}

fn cell_integrals(traj: &Trajectory, nodes: &[f64], m: usize) -> Result<CVec> {
    let cells = nodes.len() - 1;
    let mut out = CVec::zeros(m * cells);
    let idx: Vec<usize> = nodes
        .iter()
        .map(|&t| {
            traj.node_index(t)
                .ok_or_else(|| Error::InvalidArgument(format!("cell boundary {t} missing from the trajectory grid")))
        })
        .collect::<Result<_>>()?;
    for k in 0..cells {
        let yi = &traj.output_integral[idx[k + 1]] - &traj.output_integral[idx[k]];
        out.rows_mut(k * m, m).copy_from(&yi);
    }
    Ok(out)
}

impl HorizonProblem {
    /// Integrates the `n` free responses and the `m · cells` unit-input
    /// responses on `[t0, t1]`.
    pub fn assemble(sys: &LtvSystem, t0: f64, t1: f64, cells: usize, tol: &Tolerances) -> Result<Self> {
        let (n, m) = (sys.n(), sys.m());
        if cells == 0 {
            return Err(Error::InvalidArgument("at least one input cell is required".into()));
        }
        let vars = m * cells;
        if vars > MAX_DECISION_VARIABLES {
            return Err(Error::ProblemTooLarge {
                vars,
                limit: MAX_DECISION_VARIABLES,
            });
        }
        let span = Interval::new(t0, t1)?;
        let zero_in = PiecewiseConstantInput::uniform(span, vec![CVec::zeros(m); cells])?;
        let nodes = zero_in.nodes().to_vec();

        let free: Vec<Result<CVec>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut x0 = CVec::zeros(n);
                x0[i] = C64::new(1.0, 0.0);
                let traj = solve_inhomogeneous(sys, t0, &x0, &zero_in, span, tol)?;
                cell_integrals(&traj, &nodes, m)
            })
            .collect();
        let responses: Vec<Result<CVec>> = (0..vars)
            .into_par_iter()
            .map(|col| {
                let mut values = vec![CVec::zeros(m); cells];
                values[col / m][col % m] = C64::new(1.0, 0.0);
                let u = PiecewiseConstantInput::new(nodes.clone(), values)?;
                let traj = solve_inhomogeneous(sys, t0, &CVec::zeros(n), &u, span, tol)?;
                cell_integrals(&traj, &nodes, m)
            })
            .collect();

        let mut gamma = CMat::zeros(vars, n);
        for (i, c) in free.into_iter().enumerate() {
            gamma.set_column(i, &c?);
        }
        let mut map = CMat::zeros(vars, vars);
        for (j, c) in responses.into_iter().enumerate() {
            map.set_column(j, &c?);
        }
        let g = (&map + map.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(g.clone());
        let eig_values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let scale = eig_values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let threshold = tol.psd_rel.max(100.0 * tol.rtol.max(tol.atol)) * scale;
        Ok(HorizonProblem {
            t0,
            t1,
            cells,
            m,
            g,
            gamma,
            eig_values,
            eig_vectors: eig.eigenvectors,
            threshold,
        })
    }

    pub fn hessian(&self) -> &CMat {
        &self.g
    }

    pub fn min_eig(&self) -> f64 {
        self.eig_values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eig(&self) -> f64 {
        self.eig_values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_bounded(&self) -> bool {
        self.min_eig() >= -self.threshold
    }

    /// `J(u) = ∫ Re(y* u) dt` for the initial state `x0`.
    pub fn objective(&self, x0: &CVec, u: &CVec) -> f64 {
        let lin = &self.gamma * x0;
        u.dotc(&(&self.g * u)).re + lin.dotc(u).re
    }

    /// Minimizes `J` for the initial state `x0`.
    pub fn optimum(&self, x0: &CVec) -> Result<HorizonOutcome> {
        let vars = self.m * self.cells;
        let (min_eig, max_eig) = (self.min_eig(), self.max_eig());
        let base = HorizonOutcome {
            horizon: self.t1 - self.t0,
            cells: self.cells,
            value: None,
            unbounded: true,
            min_eig,
            max_eig,
            condition: f64::INFINITY,
            residual: f64::NAN,
            u: CVec::zeros(vars),
        };
        if !self.is_bounded() {
            return Ok(base);
        }
        let g = &self.gamma * x0;
        let gnorm = g.norm();
        let q = &self.eig_vectors;
        let coeffs = q.adjoint() * &g;
        let mut w = CVec::zeros(vars);
        let mut kept_min = f64::INFINITY;
        let mut kept_max: f64 = 0.0;
        for (k, &lam) in self.eig_values.iter().enumerate() {
            if lam > self.threshold {
                w[k] = coeffs[k] * C64::new(-0.5 / lam, 0.0);
                kept_min = kept_min.min(lam);
                kept_max = kept_max.max(lam);
            }
        }
        let u = q * w;
        let stationarity = &self.g * &u * C64::new(2.0, 0.0) + &g;
        let residual = if gnorm > 0.0 { stationarity.norm() / gnorm } else { 0.0 };
        if residual > 1e-6 {
            return Err(Error::IllConditioned { residual });
        }
        let value = -self.objective(x0, &u);
        Ok(HorizonOutcome {
            value: Some(value),
            unbounded: false,
            condition: if kept_min.is_finite() { kept_max / kept_min } else { 1.0 },
            residual,
            u,
            ..base
        })
    }

    /// The quadratic form `½ x* Q x` of the optimal values for this class:
    /// `Q = ½ Γ* G⁺ Γ`.
    pub fn storage_matrix(&self) -> Option<CMat> {
        if !self.is_bounded() {
            return None;
        }
        let q = &self.eig_vectors;
        let mut pinv_diag = CMat::zeros(self.eig_values.len(), self.eig_values.len());
        for (k, &lam) in self.eig_values.iter().enumerate() {
            if lam > self.threshold {
                pinv_diag[(k, k)] = C64::new(1.0 / lam, 0.0);
            }
        }
        let pinv = q * pinv_diag * q.adjoint();
        Some(self.gamma.adjoint() * pinv * &self.gamma * C64::new(0.5, 0.0))
    }
}

/// Single-resolution optimization for the initial state `x0`.
pub fn horizon_optimize(sys: &LtvSystem, t0: f64, x0: &CVec, t1: f64, cells: usize, tol: &Tolerances) -> Result<HorizonOutcome> {
    HorizonProblem::assemble(sys, t0, t1, cells, tol)?.optimum(x0)
}

/// Limits of the horizon and cell doubling.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonPolicy {
    pub initial_horizon: f64,
    pub initial_cells: usize,
    pub max_horizon: f64,
    pub max_cells: usize,
    /// Relative increase below which two consecutive stages count as
    /// converged.
    pub eps_conv: f64,
}

impl Default for HorizonPolicy {
    fn default() -> Self {
        HorizonPolicy {
            initial_horizon: 1.0,
            initial_cells: 16,
            max_horizon: 16.0,
            max_cells: 256,
            eps_conv: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageAction {
    Initial,
    Extend,
    Refine,
}

/// One entry of the per-horizon table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HorizonStage {
    pub action: StageAction,
    pub horizon: f64,
    pub cells: usize,
    pub value: Option<f64>,
    /// The value of the freshly optimized problem before the warm-start
    /// comparison.
    pub raw_value: Option<f64>,
    pub warm_started: bool,
    pub min_eig: f64,
    pub max_eig: f64,
    pub condition: f64,
    pub relative_increase: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    Limits,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AvstorEstimate {
    pub t0: f64,
    pub x0_re: Vec<f64>,
    pub x0_im: Vec<f64>,
    pub stages: Vec<HorizonStage>,
    /// Last (largest) value of the monotone sequence; `None` if unbounded.
    pub converged_value: Option<f64>,
    pub converged: bool,
    pub unbounded: bool,
    pub stop_reason: StopReason,
    pub note: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_a: Option<MatrixJson>,
}

impl AvstorEstimate {
    pub fn value(&self) -> Option<f64> {
        self.converged_value
    }
}

const UNBOUNDED_NOTE: &str = "indefinite Hessian: the supply can be driven to −∞ already within the piecewise-constant class, so the available storage is infinite";

/// Shared cache of assembled problems keyed by horizon and cell count.
#[derive(Debug, Default)]
pub struct ProblemCache {
    map: Mutex<HashMap<(u64, u64, usize), std::sync::Arc<HorizonProblem>>>,
}

impl ProblemCache {
    pub fn get(&self, sys: &LtvSystem, t0: f64, t1: f64, cells: usize, tol: &Tolerances) -> Result<std::sync::Arc<HorizonProblem>> {
        let key = (t0.to_bits(), t1.to_bits(), cells);
        if let Some(p) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(p.clone());
        }
        let p = std::sync::Arc::new(HorizonProblem::assemble(sys, t0, t1, cells, tol)?);
        self.map.lock().expect("cache lock").insert(key, p.clone());
        Ok(p)
    }
}

fn pad(u: &CVec, m: usize, action: StageAction) -> CVec {
    let cells = u.len() / m;
    match action {
        StageAction::Extend => {
            let mut v = CVec::zeros(2 * u.len());
            v.rows_mut(0, u.len()).copy_from(u);
            v
        }
        StageAction::Refine => {
            let mut v = CVec::zeros(2 * u.len());
            for k in 0..cells {
                for c in 0..m {
                    v[2 * k * m + c] = u[k * m + c];
                    v[(2 * k + 1) * m + c] = u[k * m + c];
                }
            }
            v
        }
        StageAction::Initial => u.clone(),
    }
}

/// Monotone sequence of estimates over growing input classes.
pub fn available_storage(
    sys: &LtvSystem,
    t0: f64,
    x0: &CVec,
    policy: &HorizonPolicy,
    tol: &Tolerances,
) -> Result<AvstorEstimate> {
    available_storage_cached(sys, t0, x0, policy, tol, &ProblemCache::default())
}

pub fn available_storage_cached(
    sys: &LtvSystem,
    t0: f64,
    x0: &CVec,
    policy: &HorizonPolicy,
    tol: &Tolerances,
    cache: &ProblemCache,
) -> Result<AvstorEstimate> {
    let domain = sys.interval();
    domain.check(t0)?;
    if x0.len() != sys.n() {
        return Err(Error::ShapeMismatch(format!("x0 has length {}, system has n = {}", x0.len(), sys.n())));
    }
    let m = sys.m();
    let max_h = policy.max_horizon.min(domain.end - t0);
    let mut horizon = policy.initial_horizon.min(max_h);
    let mut cells = policy.initial_cells.max(1);
    let mut est = AvstorEstimate {
        t0,
        x0_re: x0.iter().map(|z| z.re).collect(),
        x0_im: x0.iter().map(|z| z.im).collect(),
        stages: Vec::new(),
        converged_value: None,
        converged: false,
        unbounded: false,
        stop_reason: StopReason::Limits,
        note: String::new(),
        q_a: None,
    };

    let first = cache.get(sys, t0, t0 + horizon, cells, tol)?.optimum(x0)?;
    let push = |est: &mut AvstorEstimate, action, out: &HorizonOutcome, value, warm, rel| {
        est.stages.push(HorizonStage {
            action,
            horizon: out.horizon,
            cells: out.cells,
            value,
            raw_value: out.value,
            warm_started: warm,
            min_eig: out.min_eig,
            max_eig: out.max_eig,
            condition: out.condition,
            relative_increase: rel,
        });
    };
    push(&mut est, StageAction::Initial, &first, first.value, false, None);
    if first.unbounded {
        est.unbounded = true;
        est.stop_reason = StopReason::Unbounded;
        est.note = UNBOUNDED_NOTE.into();
        return Ok(est);
    }
    let mut value = first.value.unwrap_or(0.0).max(0.0);
    let mut u = first.u;
    let mut small_steps = 0;

    loop {
        let mut options = Vec::new();
        let h2 = 2.0 * horizon;
        if h2 <= max_h * (1.0 + 1e-12) && 2 * cells <= policy.max_cells && m * 2 * cells <= MAX_DECISION_VARIABLES {
            options.push((StageAction::Extend, h2.min(max_h), 2 * cells));
        }
        if 2 * cells <= policy.max_cells && m * 2 * cells <= MAX_DECISION_VARIABLES {
            options.push((StageAction::Refine, horizon, 2 * cells));
        }
        if options.is_empty() {
            est.stop_reason = StopReason::Limits;
            break;
        }
        let mut best: Option<(StageAction, f64, HorizonOutcome, f64, bool, CVec)> = None;
        for (action, h, c) in options {
            let prob = cache.get(sys, t0, t0 + h, c, tol)?;
            let out = prob.optimum(x0)?;
            if out.unbounded {
                push(&mut est, action, &out, None, false, None);
                est.unbounded = true;
                est.converged_value = None;
                est.stop_reason = StopReason::Unbounded;
                est.note = UNBOUNDED_NOTE.into();
                return Ok(est);
            }
            let warm_u = pad(&u, m, action);
            let warm = -prob.objective(x0, &warm_u);
            let raw = out.value.unwrap_or(f64::NEG_INFINITY);
            let (v, used_warm, uu) = if warm > raw { (warm, true, warm_u) } else { (raw, false, out.u.clone()) };
            let v = v.max(value);
            if best.as_ref().is_none_or(|b| v > b.3) {
                best = Some((action, h, out, v, used_warm, uu));
            }
        }
        let (action, h, out, v, warm, uu) = best.expect("at least one option");
        let rel = if v > 0.0 { (v - value) / v } else { 0.0 };
        push(&mut est, action, &out, Some(v), warm, Some(rel));
        horizon = h;
        cells = out.cells;
        value = v;
        u = uu;
        small_steps = if rel < policy.eps_conv { small_steps + 1 } else { 0 };
        if small_steps >= 2 {
            est.converged = true;
            est.stop_reason = StopReason::Converged;
            break;
        }
    }
    est.converged_value = Some(value);
    est.note = if est.converged {
        "relative increase below the threshold over two consecutive doublings".into()
    } else {
        "doubling limits reached before the convergence threshold; the value is a lower bound".into()
    };
    Ok(est)
}

/// Source of values `V(t0, x)` of a quadratic form.
pub trait QuadraticSampler: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &CVec) -> Result<f64>;
}

/// `½ x* Q x` for a fixed matrix.
#[derive(Clone, Debug)]
pub struct ExactSampler(pub CMat);

impl QuadraticSampler for ExactSampler {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn value(&self, x: &CVec) -> Result<f64> {
        Ok(0.5 * x.dotc(&(&self.0 * x)).re)
    }
}

/// Wraps a closure as a sampler.
pub struct FnSampler<F: Fn(&CVec) -> f64 + Sync> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&CVec) -> f64 + Sync> QuadraticSampler for FnSampler<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &CVec) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// Available-storage estimates at a fixed `t0`, sharing assembled problems
/// between initial states.
pub struct AvstorSampler<'a> {
    pub sys: &'a LtvSystem,
    pub t0: f64,
    pub policy: HorizonPolicy,
    pub tol: Tolerances,
    cache: ProblemCache,
}

impl<'a> AvstorSampler<'a> {
    pub fn new(sys: &'a LtvSystem, t0: f64, policy: HorizonPolicy, tol: Tolerances) -> Self {
        AvstorSampler {
            sys,
            t0,
            policy,
            tol,
            cache: ProblemCache::default(),
        }
    }

    pub fn estimate(&self, x0: &CVec) -> Result<AvstorEstimate> {
        available_storage_cached(self.sys, self.t0, x0, &self.policy, &self.tol, &self.cache)
    }
}

impl QuadraticSampler for AvstorSampler<'_> {
    fn dim(&self) -> usize {
        self.sys.n()
    }
    fn value(&self, x: &CVec) -> Result<f64> {
        let e = self.estimate(x)?;
        e.converged_value
            .ok_or_else(|| Error::InconsistentSampler("available storage is unbounded".into()))
    }
}

/// Matrix recovered by polarization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Polarization {
    #[serde(with = "crate::report::cmat")]
    pub q: CMat,
    /// `‖Q − Q*‖` before symmetrization.
    pub hermitian_residual: f64,
    /// Largest relative defect of `V(λx) = |λ|² V(x)` on the probe pairs.
    pub scaling_defect: f64,
    pub samples: usize,
}

/// Recovers `Q` from `V(x) = ½ x* Q x` using the standard-basis
/// combinations `e_i`, `e_i ± e_j`, `e_i ± i e_j`.
pub fn polarization_recover(sampler: &dyn QuadraticSampler, scaling_tol: f64) -> Result<Polarization> {
    let n = sampler.dim();
    let e = |i: usize| -> CVec {
        let mut v = CVec::zeros(n);
        v[i] = C64::new(1.0, 0.0);
        v
    };
    let mut probes: Vec<CVec> = (0..n).map(e).collect();
    for i in 0..n {
        for j in i + 1..n {
            for a in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0)] {
                probes.push(e(i) + e(j) * a);
            }
        }
    }
    // scaling probes
    let scale_pairs: Vec<(CVec, C64)> = (0..n.min(2))
        .map(|i| (e(i), C64::new(2.0, 0.0)))
        .chain((n >= 2).then(|| (e(0) + e(1), C64::new(0.0, 1.5))))
        .collect();
    let scale_probes: Vec<CVec> = scale_pairs.iter().map(|(x, l)| x * *l).collect();
    let all: Vec<CVec> = probes.iter().chain(&scale_probes).cloned().collect();
    let values: Vec<f64> = all.par_iter().map(|x| sampler.value(x)).collect::<Result<_>>()?;

    let mut scaling_defect: f64 = 0.0;
    for (k, (x, l)) in scale_pairs.iter().enumerate() {
        let base = values[probes.iter().position(|p| p == x).expect("probe present")];
        let scaled = values[probes.len() + k];
        let expect = l.norm_sqr() * base;
        let d = (scaled - expect).abs() / expect.abs().max(scaled.abs()).max(f64::MIN_POSITIVE);
        let d = if scaled == expect { 0.0 } else { d };
        scaling_defect = scaling_defect.max(d);
    }
    if scaling_defect > scaling_tol {
        return Err(Error::InconsistentSampler(format!(
            "V(λx) = |λ|² V(x) violated with relative defect {scaling_defect:e}"
        )));
    }

    let mut q = CMat::zeros(n, n);
    for i in 0..n {
        q[(i, i)] = C64::new(2.0 * values[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            let (vp, vm, vmi, vpi) = (values[k], values[k + 1], values[k + 2], values[k + 3]);
            k += 4;
            let qij = C64::new(0.5 * (vp - vm), 0.5 * (vmi - vpi));
            q[(i, j)] = qij;
            // the same samples give q_ji through e_j ± e_i = ±(e_i ± e_j), e_j ∓ i e_i = ∓i (e_i ± i e_j)
            q[(j, i)] = C64::new(0.5 * (vp - vm), -0.5 * (vmi - vpi));
        }
    }
    let hermitian_residual = crate::linalg::hermitian_residual(&q);
    let q = crate::linalg::hermitian_part(&q);
    Ok(Polarization {
        q,
        hermitian_residual,
        scaling_defect,
        samples: values.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityWitness {
    pub kind: String,
    pub probe: usize,
    pub defect: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityAudit {
    pub passed: bool,
    pub probes: usize,
    pub max_scaling_defect: f64,
    pub max_parallelogram_defect: f64,
    pub witnesses: Vec<IdentityWitness>,
    pub tolerance: f64,
}

/// Checks `V(λx) = |λ|² V(x)` and `V(x + y) + V(x − y) = 2V(x) + 2V(y)` on
/// random probes. Defects are measured relative to the sum of the moduli of
/// the terms involved.
pub fn quadratic_identity_audit(sampler: &dyn QuadraticSampler, probes: usize, tol: f64, seed: u64) -> Result<IdentityAudit> {
    let n = sampler.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(CVec, CVec, C64)> = (0..probes)
        .map(|_| {
            let x = random_unit_ball(&mut rng, n);
            let y = random_unit_ball(&mut rng, n);
            let r = 0.5 + 1.5 * rng.gen::<f64>();
            let lambda = C64::from_polar(r, std::f64::consts::TAU * rng.gen::<f64>());
            (x, y, lambda)
        })
        .collect();
    let evals: Vec<Result<[f64; 6]>> = cases
        .par_iter()
        .map(|(x, y, l)| {
            Ok([
                sampler.value(x)?,
                sampler.value(&(x * *l))?,
                sampler.value(y)?,
                sampler.value(&(x + y))?,
                sampler.value(&(x - y))?,
                l.norm_sqr(),
            ])
        })
        .collect();
    let mut audit = IdentityAudit {
        passed: true,
        probes,
        max_scaling_defect: 0.0,
        max_parallelogram_defect: 0.0,
        witnesses: Vec::new(),
        tolerance: tol,
    };
    for (k, e) in evals.into_iter().enumerate() {
        let [vx, vlx, vy, vp, vm, l2] = e?;
        let sd = (vlx - l2 * vx).abs();
        let st = tol * (vlx.abs() + l2 * vx.abs());
        let rel_s = if st > 0.0 { sd / (st / tol) } else { 0.0 };
        audit.max_scaling_defect = audit.max_scaling_defect.max(rel_s);
        if sd > st {
            audit.passed = false;
            audit.witnesses.push(IdentityWitness { kind: "scaling".into(), probe: k, defect: sd, threshold: st });
        }
        let pd = (vp + vm - 2.0 * vx - 2.0 * vy).abs();
        let pt = tol * (vp.abs() + vm.abs() + 2.0 * vx.abs() + 2.0 * vy.abs());
        let rel_p = if pt > 0.0 { pd / (pt / tol) } else { 0.0 };
        audit.max_parallelogram_defect = audit.max_parallelogram_defect.max(rel_p);
        if pd > pt {
            audit.passed = false;
            audit.witnesses.push(IdentityWitness { kind: "parallelogram".into(), probe: k, defect: pd, threshold: pt });
        }
    }
    Ok(audit)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimalityProbe {
    pub x_re: Vec<f64>,
    pub x_im: Vec<f64>,
    pub estimate: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimalityAudit {
    pub passed: bool,
    pub max_excess: f64,
    pub probes: Vec<MinimalityProbe>,
    pub tolerance: f64,
}

/// Checks `V_a(t0, x) ≤ ½ x* Q(t0) x + tol·(1 + bound)` for a verified
/// storage matrix `Q`; the zero vector is always the first probe.
pub fn minimality_audit(
    sampler: &dyn QuadraticSampler,
    t0: f64,
    q_known: &StorageCandidate,
    probes: usize,
    tol: f64,
    seed: u64,
) -> Result<MinimalityAudit> {
    let n = sampler.dim();
    let qt = q_known.eval(t0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = vec![CVec::zeros(n)];
    xs.extend((1..probes.max(1)).map(|_| random_unit_ball(&mut rng, n)));
    let results: Vec<Result<MinimalityProbe>> = xs
        .par_iter()
        .map(|x| {
            Ok(MinimalityProbe {
                x_re: x.iter().map(|z| z.re).collect(),
                x_im: x.iter().map(|z| z.im).collect(),
                estimate: sampler.value(x)?,
                bound: 0.5 * x.dotc(&(&qt * x)).re,
            })
        })
        .collect();
    let probes: Vec<MinimalityProbe> = results.into_iter().collect::<Result<_>>()?;
    let max_excess = probes
        .iter()
        .map(|p| p.estimate - p.bound - tol * (1.0 + p.bound.abs()))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MinimalityAudit {
        passed: max_excess <= 0.0,
        max_excess,
        probes,
        tolerance: tol,
    })
}

/// Polarized estimate of the storage matrix at `t0` attached to the
/// estimate for `x0`.
pub fn estimate_with_matrix(sampler: &AvstorSampler<'_>, x0: &CVec, scaling_tol: f64) -> Result<(AvstorEstimate, Option<Polarization>)> {
    let mut est = sampler.estimate(x0)?;
    if est.unbounded {
        return Ok((est, None));
    }
    let pol = polarization_recover(sampler, scaling_tol)?;
    est.q_a = Some(MatrixJson::from(&pol.q));
    Ok((est, Some(pol)))
}
