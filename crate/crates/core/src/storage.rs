//! Verification of quadratic storage candidates.
//!
//! A candidate `V(t, x) = ½ x* Q(t) x` is a storage function when
//!
//! ```text
//!     V(t1, x(t1)) − V(t0, x(t0)) ≤ ∫_{t0}^{t1} Re(y* u) dt
//! ```
//!
//! along every solution. [`dissipation_check`] samples that inequality on
//! random trajectories. [`pointwise_supply_check`] is a sufficient condition
//! based on the matrix
//!
//! ```text
//!     W = [ Q' + A* Q + Q A   Q B − C*    ]
//!         [ B* Q − C          −(D + D*)   ]
//! ```
//!
//! and [`kernel_condition_check`] tests the necessary condition
//! `ker Q ⊆ ker(Q A + Q') ∩ ker C`. [`storage_regularity_audit`] runs the
//! necessary conditions in sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::grid::matches_point;
use crate::linalg::{hermitian_residual, max_eigenvalue, min_eigenvalue, spectral_norm};
use crate::loewner::{
    auc_check, check_weak_decrease, q_along_flow, JumpVerdict, Side, StorageCandidate, Witness,
};
use crate::matfun::MatrixFunction;
use crate::nsd::{kernel_abs, rank_profile};
use crate::odeflow::{solve_inhomogeneous, FundamentalSolution, LtvSystem, PiecewiseConstantInput};
use crate::{CMat, CVec, Error, Interval, Result, TimeGrid, Tolerances, C64};

/// Seed used by [`TrialSpec::default`].
pub const DEFAULT_SEED: u64 = 20_240_611;

/// Process exit code for each verdict class.
pub mod exit_code {
    pub const PASS: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const NECESSARY_CONDITION_FAILED: i32 = 2;
    pub const DISSIPATION_VIOLATED: i32 = 3;
    pub const INCONCLUSIVE: i32 = 4;
}

/// How random trials are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialSpec {
    pub trials: usize,
    pub seed: u64,
    /// Number of input cells per trial window.
    pub input_cells: usize,
    /// Largest modulus of an input entry.
    pub amplitude: f64,
    /// Probability that a window is forced to straddle a breakpoint.
    pub breakpoint_probability: f64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        TrialSpec {
            trials: 200,
            seed: DEFAULT_SEED,
            input_cells: 8,
            amplitude: 1.0,
            breakpoint_probability: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

/// One trajectory test of the dissipation inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub id: usize,
    pub t0: f64,
    pub t1: f64,
    /// `V(t1, x(t1)) − V(t0, x(t0))`.
    pub lhs: f64,
    /// `∫ Re(y* u) dt`.
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    pub tolerance: f64,
    pub crosses_breakpoint: bool,
    pub violated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationReport {
    pub verdict: Verdict,
    pub trials: Vec<TrialRecord>,
    pub worst_slack: f64,
    /// Id of the trial with the smallest slack.
    pub worst_trial: Option<usize>,
    pub violations: usize,
    pub failed_trials: usize,
    /// `V(t, 0) = 0` at every grid node.
    pub zero_state_ok: bool,
    /// Smallest eigenvalue of `Q` on the grid.
    pub min_q_eigenvalue: f64,
    pub nonnegative: bool,
    pub spec: TrialSpec,
}

/// Random vector in the closed unit ball of `ℂⁿ`.
pub fn random_unit_ball<R: Rng>(rng: &mut R, n: usize) -> CVec {
    let v = CVec::from_fn(n, |_, _| C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0));
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    let radius = rng.gen::<f64>().powf(1.0 / (2 * n.max(1)) as f64);
    v * C64::new(radius / norm, 0.0)
}

/// Evaluates the dissipation inequality on one trajectory.
pub fn dissipation_trial(
    sys: &LtvSystem,
    q: &StorageCandidate,
    t0: f64,
    t1: f64,
    x0: &CVec,
    u: &PiecewiseConstantInput,
    tol: &Tolerances,
) -> Result<TrialRecord> {
    let span = Interval::new(t0, t1)?;
    let traj = solve_inhomogeneous(sys, t0, x0, u, span, tol)?;
    let k1 = traj.grid.len() - 1;
    let lhs = q.value(t1, &traj.x[k1])? - q.value(t0, &traj.x[0])?;
    let rhs = traj.exact_supply(0, k1);
    let slack = rhs - lhs;
    let tolerance = tol.diss(rhs);
    let bps = sys.breakpoints().into_iter().chain(q.breakpoints());
    let crosses_breakpoint = bps.into_iter().any(|b| b > t0 && b < t1);
    Ok(TrialRecord {
        id: 0,
        t0,
        t1,
        lhs,
        rhs,
        slack,
        tolerance,
        crosses_breakpoint,
        violated: slack < -tolerance,
        error: None,
    })
}

fn random_window<R: Rng>(rng: &mut R, domain: Interval, bps: &[f64], p_bp: f64) -> (f64, f64) {
    let len = domain.length();
    let min_len = 1e-3 * len;
    if !bps.is_empty() && rng.gen_bool(p_bp.clamp(0.0, 1.0)) {
        let b = bps[rng.gen_range(0..bps.len())];
        let lo = (b - 0.5 * len).max(domain.start);
        let hi = (b + 0.5 * len).min(domain.end);
        let t0 = lo + (b - lo) * rng.gen::<f64>();
        let t1 = b + (hi - b) * rng.gen::<f64>().max(1e-3);
        return (t0.min(b - 1e-6 * len).max(domain.start), t1.max(b + 1e-6 * len).min(domain.end));
    }
    loop {
        let a = domain.start + len * rng.gen::<f64>();
        let b = domain.start + len * rng.gen::<f64>();
        let (t0, t1) = if a < b { (a, b) } else { (b, a) };
        if t1 - t0 >= min_len {
            return (t0, t1);
        }
    }
}

/// Randomized test of the dissipation inequality. Trial `k` draws from a
/// generator seeded with `spec.seed + k`, so results do not depend on the
/// thread schedule.
pub fn dissipation_check(
    sys: &LtvSystem,
    q: &StorageCandidate,
    spec: &TrialSpec,
    grid: &TimeGrid,
    tol: &Tolerances,
) -> Result<DissipationReport> {
    check_shapes(sys, q)?;
    let domain = sys.interval().intersect(&q.domain())?;
    let bps: Vec<f64> = sys
        .breakpoints()
        .into_iter()
        .chain(q.breakpoints())
        .filter(|t| domain.is_interior(*t))
        .collect();
    let (n, m) = (sys.n(), sys.m());
    let trials: Vec<TrialRecord> = (0..spec.trials)
        .into_par_iter()
        .map(|id| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(id as u64));
            let (t0, t1) = random_window(&mut rng, domain, &bps, spec.breakpoint_probability);
            let x0 = random_unit_ball(&mut rng, n);
            let u = PiecewiseConstantInput::random(&mut rng, m, Interval { start: t0, end: t1 }, spec.input_cells, spec.amplitude);
            match dissipation_trial(sys, q, t0, t1, &x0, &u, tol) {
                Ok(mut r) => {
                    r.id = id;
                    r
                }
                Err(e) => TrialRecord {
                    id,
                    t0,
                    t1,
                    lhs: f64::NAN,
                    rhs: f64::NAN,
                    slack: f64::NAN,
                    tolerance: f64::NAN,
                    crosses_breakpoint: false,
                    violated: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let violations = trials.iter().filter(|r| r.violated).count();
    let failed_trials = trials.iter().filter(|r| r.error.is_some()).count();
    let (worst_trial, worst_slack) = trials
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| (r.id, r.slack))
        .fold((None, f64::INFINITY), |acc, (id, s)| if s < acc.1 { (Some(id), s) } else { acc });

    let zero = CVec::zeros(n);
    let mut zero_state_ok = true;
    let mut min_q_eigenvalue = f64::INFINITY;
    let mut max_norm: f64 = 0.0;
    for &t in grid.with_points(&bps).nodes() {
        if !domain.contains(t) {
            continue;
        }
        zero_state_ok &= q.value(t, &zero)? == 0.0;
        let qt = q.eval(t)?;
        min_q_eigenvalue = min_q_eigenvalue.min(min_eigenvalue(&qt));
        max_norm = max_norm.max(spectral_norm(&qt));
    }
    let nonnegative = min_q_eigenvalue >= -tol.psd(max_norm);

    let verdict = if violations > 0 {
        Verdict::Violated
    } else if failed_trials > 0 || spec.trials == 0 {
        Verdict::Inconclusive
    } else {
        Verdict::Holds
    };
    Ok(DissipationReport {
        verdict,
        trials,
        worst_slack,
        worst_trial,
        violations,
        failed_trials,
        zero_state_ok,
        min_q_eigenvalue,
        nonnegative,
        spec: spec.clone(),
    })
}

fn check_shapes(sys: &LtvSystem, q: &StorageCandidate) -> Result<()> {
    if q.dim() != sys.n() {
        return Err(Error::ShapeMismatch(format!(
            "candidate is {0}×{0}, system state dimension is {1}",
            q.dim(),
            sys.n()
        )));
    }
    Ok(())
}

/// Coefficients and `Q` with `Q'` at one instant and side.
struct Snapshot {
    a: CMat,
    b: CMat,
    c: CMat,
    d: CMat,
    q: CMat,
    dq: CMat,
}

fn snapshot(sys: &LtvSystem, q: &dyn MatrixFunction, t: f64, side: Side) -> Result<Snapshot> {
    let val = |f: &dyn MatrixFunction| -> Result<CMat> {
        match side {
            Side::Left => f.left_limit(t),
            Side::Point => f.eval(t),
            Side::Right => f.right_limit(t),
        }
    };
    let dq = match side {
        Side::Left => q.left_derivative(t)?,
        _ if t >= q.domain().end => q.left_derivative(t)?,
        _ => q.right_derivative(t)?,
    };
    Ok(Snapshot {
        a: val(&sys.a)?,
        b: val(&sys.b)?,
        c: val(&sys.c)?,
        d: val(&sys.d)?,
        q: val(q)?,
        dq,
    })
}

/// Nodes of `grid ∪ breakpoints` inside `domain`, with both sides at
/// interior breakpoints.
fn sided_nodes(grid: &TimeGrid, bps: &[f64], domain: Interval) -> Vec<(f64, Side)> {
    let mut out = Vec::new();
    for &t in grid.with_points(bps).nodes() {
        if !domain.contains(t) {
            continue;
        }
        if matches_point(bps, t) && domain.is_interior(t) {
            out.push((t, Side::Left));
            out.push((t, Side::Right));
        } else {
            out.push((t, Side::Point));
        }
    }
    out
}

fn system_breakpoints(sys: &LtvSystem, q: &StorageCandidate, domain: Interval) -> Vec<f64> {
    let mut bps: Vec<f64> = sys
        .breakpoints()
        .into_iter()
        .chain(q.breakpoints())
        .filter(|t| domain.is_interior(*t))
        .collect();
    bps.sort_by(|a, b| a.total_cmp(b));
    bps.dedup_by(|x, y| matches_point(&[*y], *x));
    bps
}

/// Assembles `W(t)`; `½ [x; u]* W [x; u]` is `dV/dt − Re(y* u)`.
pub fn supply_matrix(a: &CMat, b: &CMat, c: &CMat, d: &CMat, q: &CMat, dq: &CMat) -> CMat {
    let n = a.nrows();
    let m = b.ncols();
    let mut w = CMat::zeros(n + m, n + m);
    w.view_mut((0, 0), (n, n)).copy_from(&(dq + a.adjoint() * q + q * a));
    let off = q * b - c.adjoint();
    w.view_mut((0, n), (n, m)).copy_from(&off);
    w.view_mut((n, 0), (m, n)).copy_from(&off.adjoint());
    w.view_mut((n, n), (m, m)).copy_from(&(-(d + d.adjoint())));
    w
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupplyWitness {
    pub t: f64,
    pub side: Side,
    pub max_eig: f64,
}

/// Result of the pointwise test `W(t) ⪯ 0` plus decreasing jumps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointwiseSupplyReport {
    pub verdict: Verdict,
    /// Always `true`: a pass certifies the dissipation inequality, a failure
    /// does not refute it.
    pub sufficient_only: bool,
    pub note: String,
    pub max_eig: f64,
    pub witnesses: Vec<SupplyWitness>,
    pub jump_verdicts: Vec<JumpVerdict>,
    pub tolerance: f64,
    pub nodes: usize,
}

/// Sufficient pointwise certificate: `λ_max(W(t)) ≤ τ` at every node
/// (both sides at breakpoints) and every jump of `Q` is decreasing.
pub fn pointwise_supply_check(
    sys: &LtvSystem,
    q: &StorageCandidate,
    grid: &TimeGrid,
    tol: &Tolerances,
) -> Result<PointwiseSupplyReport> {
    check_shapes(sys, q)?;
    let domain = sys.interval().intersect(&q.domain())?;
    let bps = system_breakpoints(sys, q, domain);
    let nodes = sided_nodes(grid, &bps, domain);
    let f = q.function().as_ref();
    let acc = f.accuracy();
    let evals: Vec<Result<(f64, Side, f64, f64)>> = nodes
        .par_iter()
        .map(|&(t, side)| {
            let s = snapshot(sys, f, t, side)?;
            let qn = spectral_norm(&s.q);
            let res = hermitian_residual(&s.q);
            if res > tol.herm(qn).max(acc * qn) {
                return Err(Error::NotHermitian { t, residual: res });
            }
            let w = supply_matrix(&s.a, &s.b, &s.c, &s.d, &s.q, &s.dq);
            let wn = spectral_norm(&w);
            let lam = max_eigenvalue(&crate::linalg::hermitian_part(&w));
            Ok((t, side, lam, wn))
        })
        .collect();
    let mut max_eig = f64::NEG_INFINITY;
    let mut max_norm: f64 = 0.0;
    let mut values = Vec::with_capacity(evals.len());
    for e in evals {
        let (t, side, lam, wn) = e?;
        max_eig = max_eig.max(lam);
        max_norm = max_norm.max(wn);
        values.push((t, side, lam));
    }
    let tolerance = tol.psd(max_norm).max(acc * (1.0 + max_norm));
    let witnesses: Vec<SupplyWitness> = values
        .into_iter()
        .filter(|v| v.2 > tolerance)
        .map(|(t, side, max_eig)| SupplyWitness { t, side, max_eig })
        .collect();
    let jump_verdicts: Vec<JumpVerdict> = q
        .jump_table()
        .iter()
        .map(|j| {
            let l = max_eigenvalue(&j.left_jump());
            let r = max_eigenvalue(&j.right_jump());
            JumpVerdict {
                time: j.time,
                left_max_eig: l,
                right_max_eig: r,
                decreasing: l <= tolerance && r <= tolerance,
            }
        })
        .collect();
    let holds = witnesses.is_empty() && jump_verdicts.iter().all(|j| j.decreasing);
    Ok(PointwiseSupplyReport {
        verdict: if holds { Verdict::Holds } else { Verdict::Inconclusive },
        sufficient_only: true,
        note: if holds {
            "W(t) ⪯ 0 at all nodes and all jumps decrease: sufficient for the dissipation inequality".into()
        } else {
            "W(t) ⪯ 0 fails somewhere: the sufficient test is inconclusive, not a refutation".into()
        },
        max_eig,
        witnesses,
        jump_verdicts,
        tolerance,
        nodes: nodes.len(),
    })
}

/// One kernel vector that leaves `ker(Q A + Q') ∩ ker C`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelWitness {
    pub t: f64,
    pub side: Side,
    pub v_re: Vec<f64>,
    pub v_im: Vec<f64>,
    /// `‖(Q A + Q') v‖`.
    pub flow_residual: f64,
    /// `‖C v‖`.
    pub output_residual: f64,
}

impl KernelWitness {
    pub fn vector(&self) -> CVec {
        CVec::from_iterator(
            self.v_re.len(),
            self.v_re.iter().zip(&self.v_im).map(|(&r, &i)| C64::new(r, i)),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelNodeRecord {
    pub t: f64,
    pub side: Side,
    pub kernel_dim: usize,
    pub max_flow_residual: f64,
    pub max_output_residual: f64,
    /// `tol · scale` at this node.
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelConditionReport {
    pub passed: bool,
    pub records: Vec<KernelNodeRecord>,
    pub witnesses: Vec<KernelWitness>,
    pub rank_threshold: f64,
    pub message: String,
}

/// Tests `ker Q(t) ⊆ ker(Q(t) A(t) + Q'(t)) ∩ ker C(t)` at every node, with
/// one-sided data on both sides of every breakpoint.
pub fn kernel_condition_check(
    sys: &LtvSystem,
    q: &StorageCandidate,
    grid: &TimeGrid,
    tol: &Tolerances,
) -> Result<KernelConditionReport> {
    check_shapes(sys, q)?;
    let domain = sys.interval().intersect(&q.domain())?;
    let bps = system_breakpoints(sys, q, domain);
    let nodes = sided_nodes(grid, &bps, domain);
    let f = q.function().as_ref();
    let snaps: Vec<Result<Snapshot>> = nodes.par_iter().map(|&(t, side)| snapshot(sys, f, t, side)).collect();
    let snaps: Vec<Snapshot> = snaps.into_iter().collect::<Result<_>>()?;
    let q_scale = snaps.iter().map(|s| spectral_norm(&s.q)).fold(0.0, f64::max);
    let rel = tol.rank(q.dim(), f.accuracy());
    let thr = rel * q_scale;

    let mut records = Vec::with_capacity(nodes.len());
    let mut witnesses = Vec::new();
    for (&(t, side), s) in nodes.iter().zip(&snaps) {
        let ker = if q_scale == 0.0 {
            crate::linalg::identity(q.dim())
        } else {
            kernel_abs(&s.q, thr)
        };
        let flow_op = &s.q * &s.a + &s.dq;
        let scale = 1.0
            + spectral_norm(&s.q) * spectral_norm(&s.a)
            + spectral_norm(&s.dq)
            + spectral_norm(&s.c);
        let tolerance = tol.ker_rel.max(f.accuracy()) * scale;
        let mut rec = KernelNodeRecord {
            t,
            side,
            kernel_dim: ker.ncols(),
            max_flow_residual: 0.0,
            max_output_residual: 0.0,
            tolerance,
            passed: true,
        };
        for v in ker.column_iter() {
            let fr = (&flow_op * v).norm();
            let or = (&s.c * v).norm();
            rec.max_flow_residual = rec.max_flow_residual.max(fr);
            rec.max_output_residual = rec.max_output_residual.max(or);
            if fr > tolerance || or > tolerance {
                rec.passed = false;
                witnesses.push(KernelWitness {
                    t,
                    side,
                    v_re: v.iter().map(|z| z.re).collect(),
                    v_im: v.iter().map(|z| z.im).collect(),
                    flow_residual: fr,
                    output_residual: or,
                });
            }
        }
        records.push(rec);
    }
    let passed = witnesses.is_empty();
    let message = if passed {
        "kernel condition holds at all nodes".to_string()
    } else {
        let w = &witnesses[0];
        format!(
            "kernel condition fails at t = {} ({:?}): ‖(QA + Q')v‖ = {:e}, ‖Cv‖ = {:e}; Q cannot define a storage function",
            w.t, w.side, w.flow_residual, w.output_residual
        )
    };
    Ok(KernelConditionReport {
        passed,
        records,
        witnesses,
        rank_threshold: thr,
        message,
    })
}

/// Outcome of the adversarial construction for a kernel witness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdversarialReport {
    pub found: bool,
    /// `true` when the λ scan reached its cap without a violation.
    pub inconclusive: bool,
    pub lambda: f64,
    pub trial: Option<TrialRecord>,
    pub attempts: usize,
}

/// Searches for a violation of the dissipation inequality starting from a
/// kernel vector `v` of `Q(t)` that fails the kernel condition: the initial
/// state `λ v − (Q A + Q') v` with a constant input `u ≡ C v`, on a short
/// window after `t`, for `λ = −10^k`, `k = 0, …, max_power`.
pub fn adversarial_kernel_trial(
    sys: &LtvSystem,
    q: &StorageCandidate,
    witness: &KernelWitness,
    max_power: u32,
    tol: &Tolerances,
) -> Result<AdversarialReport> {
    let domain = sys.interval().intersect(&q.domain())?;
    let bps = system_breakpoints(sys, q, domain);
    let t0 = witness.t;
    if t0 >= domain.end {
        return Err(Error::InvalidArgument("adversarial window needs room after the witness time".into()));
    }
    let next = bps.iter().copied().find(|&b| b > t0 && !matches_point(&[b], t0)).unwrap_or(domain.end);
    let h = (1e-3 * domain.length()).min(0.5 * (next - t0));
    let t1 = t0 + h;
    let s = snapshot(sys, q.function().as_ref(), t0, Side::Right)?;
    let v = witness.vector();
    let w = (&s.q * &s.a + &s.dq) * &v;
    let u0 = &s.c * &v;
    let u = PiecewiseConstantInput::constant(Interval::new(t0, t1)?, u0);
    let mut attempts = 0;
    for k in 0..=max_power {
        let lambda = -(10f64.powi(k as i32));
        let x0 = &v * C64::new(lambda, 0.0) - &w;
        attempts += 1;
        let r = dissipation_trial(sys, q, t0, t1, &x0, &u, tol)?;
        if r.violated {
            return Ok(AdversarialReport {
                found: true,
                inconclusive: false,
                lambda,
                trial: Some(r),
                attempts,
            });
        }
    }
    Ok(AdversarialReport {
        found: false,
        inconclusive: true,
        lambda: -(10f64.powi(max_power as i32)),
        trial: None,
        attempts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditStep {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Battery of necessary conditions for `Q` to define a storage function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityAudit {
    pub passed: bool,
    pub first_failure: Option<String>,
    pub steps: Vec<AuditStep>,
    pub transport_witnesses: Vec<Witness>,
    pub kernel: Option<KernelConditionReport>,
}

/// Runs (a) the AUC test, (b) weak decrease of `Qˣ = X* Q X`, (c) the
/// kernel condition and (d) rank monotonicity of `Qˣ`, stopping at the
/// first failure.
pub fn storage_regularity_audit(
    q: &StorageCandidate,
    sys: &LtvSystem,
    grid: &TimeGrid,
    tol: &Tolerances,
) -> Result<RegularityAudit> {
    check_shapes(sys, q)?;
    let domain = sys.interval().intersect(&q.domain())?;
    let grid = grid.with_points(&system_breakpoints(sys, q, domain));
    let mut audit = RegularityAudit {
        passed: false,
        first_failure: None,
        steps: Vec::new(),
        transport_witnesses: Vec::new(),
        kernel: None,
    };
    let fail = |audit: &mut RegularityAudit, name: &str| {
        audit.first_failure = Some(name.to_string());
    };

    let tau = q.psd_tolerance(&grid, tol)?;
    let auc = auc_check(q, &grid, tau)?;
    audit.steps.push(AuditStep {
        name: "auc".into(),
        passed: auc.is_auc,
        detail: format!(
            "max integral defect {:e}, {} jump(s), tolerance {:e}",
            auc.max_integral_defect,
            auc.jump_verdicts.len(),
            auc.tolerance
        ),
    });
    if !auc.is_auc {
        fail(&mut audit, "auc");
        return Ok(audit);
    }

    let x = FundamentalSolution::compute(&sys.a, domain.start, domain, tol)?;
    let qx = q_along_flow(q, &x)?;
    let mono = check_weak_decrease(&qx, &grid, qx.psd_tolerance(&grid, tol)?)?;
    audit.steps.push(AuditStep {
        name: "transported-decrease".into(),
        passed: mono.is_decreasing(),
        detail: format!(
            "{} witness(es), max derivative eigenvalue {:e}, tolerance {:e}",
            mono.witnesses.len(),
            mono.max_derivative_eig,
            mono.tolerance
        ),
    });
    if !mono.is_decreasing() {
        audit.transport_witnesses = mono.witnesses;
        fail(&mut audit, "transported-decrease");
        return Ok(audit);
    }

    let ker = kernel_condition_check(sys, q, &grid, tol)?;
    audit.steps.push(AuditStep {
        name: "kernel-condition".into(),
        passed: ker.passed,
        detail: ker.message.clone(),
    });
    let ker_ok = ker.passed;
    audit.kernel = Some(ker);
    if !ker_ok {
        fail(&mut audit, "kernel-condition");
        return Ok(audit);
    }

    let rel = tol.rank(q.dim(), qx.function().accuracy());
    let (ok, detail) = match rank_profile(&qx, &grid, rel) {
        Ok(p) => (true, format!("rank sequence {:?}, drops at {:?}", p.sequence, p.drop_times)),
        Err(e @ Error::NonMonotoneRank { .. }) => (false, e.to_string()),
        Err(e) => return Err(e),
    };
    audit.steps.push(AuditStep {
        name: "rank-monotonicity".into(),
        passed: ok,
        detail,
    });
    if !ok {
        fail(&mut audit, "rank-monotonicity");
        return Ok(audit);
    }
    audit.passed = true;
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real, identity, vec_real};
    use crate::matfun::{PiecewiseMatrixFunction, Segment};

    fn msd(c: [&str; 2]) -> (LtvSystem, StorageCandidate) {
        let dom = [(-1.0, 0.0, "1"), (0.0, 1.0, "1 - 2/3*t"), (1.0, 3.0, "0")];
        let pw = |f: &dyn Fn(&str) -> Vec<String>, r: usize, cc: usize| {
            PiecewiseMatrixFunction::new(
                dom.iter()
                    .map(|&(a, b, k)| {
                        let e = f(k);
                        let refs: Vec<&str> = e.iter().map(|s| s.as_str()).collect();
                        Segment::expressions(a, b, r, cc, &refs).unwrap()
                    })
                    .collect(),
                vec![],
            )
            .unwrap()
        };
        let a = pw(&|k| vec!["0".into(), "1".into(), format!("-({k})"), "-1".into()], 2, 2);
        let q = pw(&|k| vec![k.into(), "0".into(), "0".into(), "1".into()], 2, 2);
        let i = Interval::new(-1.0, 3.0).unwrap();
        let sys = LtvSystem::new(
            a,
            PiecewiseMatrixFunction::constant(&from_real(2, 1, &[0.0, 1.0]), i),
            PiecewiseMatrixFunction::constant(&from_real(1, 2, &[c[0].parse().unwrap(), c[1].parse().unwrap()]), i),
            PiecewiseMatrixFunction::constant(&CMat::zeros(1, 1), i),
        )
        .unwrap();
        (sys, StorageCandidate::from_piecewise(q).unwrap())
    }

    #[test]
    fn lti_w_matrix() {
        let i = Interval::new(0.0, 1.0).unwrap();
        let sys = LtvSystem::constant(&(-identity(2)), &identity(2), &identity(2), &CMat::zeros(2, 2), i).unwrap();
        let q = StorageCandidate::from_piecewise(PiecewiseMatrixFunction::constant(&identity(2), i)).unwrap();
        let s = snapshot(&sys, q.function().as_ref(), 0.5, Side::Point).unwrap();
        let w = supply_matrix(&s.a, &s.b, &s.c, &s.d, &s.q, &s.dq);
        let mut expected = CMat::zeros(4, 4);
        expected.view_mut((0, 0), (2, 2)).copy_from(&diag_real(&[-2.0, -2.0]));
        assert_eq!(w, expected);
        let r = pointwise_supply_check(&sys, &q, &TimeGrid::uniform(i, 4), &Tolerances::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!(r.sufficient_only);
    }

    #[test]
    fn msd_pointwise_and_kernel() {
        let (sys, q) = msd(["0", "1"]);
        let g = TimeGrid::uniform(sys.interval(), 40);
        let tol = Tolerances::default();
        assert_eq!(pointwise_supply_check(&sys, &q, &g, &tol).unwrap().verdict, Verdict::Holds);
        let k = kernel_condition_check(&sys, &q, &g, &tol).unwrap();
        assert!(k.passed, "{}", k.message);
        assert!(k.records.iter().any(|r| r.t > 1.0 && r.kernel_dim == 1));
    }

    #[test]
    fn position_output_fails_kernel_condition() {
        let (sys, q) = msd(["1", "0"]);
        let g = TimeGrid::uniform(sys.interval(), 40);
        let tol = Tolerances::default();
        let k = kernel_condition_check(&sys, &q, &g, &tol).unwrap();
        assert!(!k.passed);
        let w = k.witnesses.iter().find(|w| w.t > 1.0).unwrap();
        assert!(w.output_residual > 0.9);
        let adv = adversarial_kernel_trial(&sys, &q, w, 12, &tol).unwrap();
        assert!(adv.found);
        let audit = storage_regularity_audit(&q, &sys, &g, &tol).unwrap();
        assert_eq!(audit.first_failure.as_deref(), Some("kernel-condition"));
    }

    #[test]
    fn zero_trajectory_has_zero_slack() {
        let (sys, q) = msd(["0", "1"]);
        let u = PiecewiseConstantInput::zero(1, Interval::new(-0.5, 2.0).unwrap());
        let r = dissipation_trial(&sys, &q, -0.5, 2.0, &vec_real(&[0.0, 0.0]), &u, &Tolerances::default()).unwrap();
        assert_eq!(r.slack, 0.0);
    }

    #[test]
    fn msd_dissipation_holds() {
        let (sys, q) = msd(["0", "1"]);
        let spec = TrialSpec { trials: 24, ..TrialSpec::default() };
        let r = dissipation_check(&sys, &q, &spec, &TimeGrid::uniform(sys.interval(), 8), &Tolerances::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds, "worst slack {}", r.worst_slack);
        assert!(r.zero_state_ok && r.nonnegative);
        assert!(r.trials.iter().any(|t| t.crosses_breakpoint));
    }

    #[test]
    fn msd_audit_passes() {
        let (sys, q) = msd(["0", "1"]);
        let a = storage_regularity_audit(&q, &sys, &TimeGrid::uniform(sys.interval(), 40), &Tolerances::default()).unwrap();
        assert!(a.passed, "{:?}", a.steps);
        assert_eq!(a.steps.len(), 4);
    }
}
