//! Loewner-order tools for quadratic storage candidates.
//!
//! A [`StorageCandidate`] wraps a pointwise Hermitian positive semidefinite
//! matrix function `Q`. Its singular part `Q_s` is the running sum of the
//! jumps at the breakpoints and its absolutely continuous part is
//! `Q_a = Q − Q_s`. Monotonicity is certified on grids: adjacent pairs
//! (including the one-sided limits at every breakpoint) are compared and
//! transitivity of the Loewner order covers the remaining pairs.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::matches_point;
use crate::linalg::{
    hermitian_residual, integrate_matrix, max_eigenvalue, min_eigenvalue, spectral_norm,
};
use crate::matfun::{JumpRecord, MatrixFunction, PiecewiseMatrixFunction};
use crate::odeflow::FundamentalSolution;
use crate::{CMat, CVec, Error, Interval, Result, TimeGrid, Tolerances};

/// Which value at a time instant is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Point,
    Right,
}

/// A pair `r ≤ s` with `λ_min(Q(r) − Q(s)) < −tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub r: f64,
    pub r_side: Side,
    pub s: f64,
    pub s_side: Side,
    pub min_eig: f64,
}

/// Classification of the jumps at one breakpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpVerdict {
    pub time: f64,
    /// `λ_max(Q(t) − Q(t⁻))`.
    pub left_max_eig: f64,
    /// `λ_max(Q(t⁺) − Q(t))`.
    pub right_max_eig: f64,
    pub decreasing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonotonicityVerdict {
    WeaklyDecreasing,
    Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub verdict: MonotonicityVerdict,
    pub witnesses: Vec<Witness>,
    pub jump_verdicts: Vec<JumpVerdict>,
    /// Largest `λ_max(Q̇)` over the cell midpoints.
    pub max_derivative_eig: f64,
    /// Midpoints where `λ_max(Q̇) > tol`.
    pub derivative_witnesses: Vec<f64>,
    pub tolerance: f64,
    pub grid_nodes: usize,
    pub max_spacing: f64,
}

impl MonotonicityReport {
    pub fn is_decreasing(&self) -> bool {
        self.verdict == MonotonicityVerdict::WeaklyDecreasing
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub is_auc: bool,
    pub jump_verdicts: Vec<JumpVerdict>,
    /// Adjacent pairs with `λ_max(Q(s⁻) − Q(r⁺) − ∫ Q̇) > tol`.
    pub integral_witnesses: Vec<Witness>,
    pub max_integral_defect: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub max_hermitian_residual: f64,
    pub min_eigenvalue: f64,
    pub max_norm: f64,
    pub nodes: usize,
}

/// Pointwise Hermitian PSD matrix function defining `V(t, x) = ½ x* Q(t) x`.
#[derive(Clone, Debug)]
pub struct StorageCandidate {
    q: Arc<dyn MatrixFunction>,
    piecewise: Option<PiecewiseMatrixFunction>,
    jumps: Vec<JumpRecord>,
}

impl StorageCandidate {
    pub fn new(q: Arc<dyn MatrixFunction>) -> Result<Self> {
        let (r, c) = q.shape();
        if r != c {
            return Err(Error::ShapeMismatch(format!("storage matrix is {r}×{c}")));
        }
        let jumps = q.jump_table()?;
        Ok(StorageCandidate {
            q,
            piecewise: None,
            jumps,
        })
    }

    pub fn from_piecewise(q: PiecewiseMatrixFunction) -> Result<Self> {
        let mut c = Self::new(Arc::new(q.clone()))?;
        c.piecewise = Some(q);
        Ok(c)
    }

    pub fn function(&self) -> &Arc<dyn MatrixFunction> {
        &self.q
    }

    /// The closed-form description, when the candidate has one.
    pub fn piecewise(&self) -> Option<&PiecewiseMatrixFunction> {
        self.piecewise.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.q.shape().0
    }

    pub fn domain(&self) -> Interval {
        self.q.domain()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.q.breakpoints()
    }

    pub fn eval(&self, t: f64) -> Result<CMat> {
        self.q.eval(t)
    }

    pub fn jump_table(&self) -> &[JumpRecord] {
        &self.jumps
    }

    /// `½ x* Q(t) x`.
    pub fn value(&self, t: f64, x: &CVec) -> Result<f64> {
        let q = self.q.eval(t)?;
        Ok(0.5 * x.dotc(&(q * x)).re)
    }

    /// The jump accumulation function `Q_s`.
    pub fn singular_part(&self) -> JumpPart {
        JumpPart {
            jumps: self.jumps.clone(),
            domain: self.domain(),
            n: self.dim(),
        }
    }

    /// `Q_a = Q − Q_s`.
    pub fn ac_part(&self) -> AcPart {
        AcPart {
            q: self.q.clone(),
            singular: self.singular_part(),
        }
    }

    /// Checks the Hermitian and PSD invariants at the grid nodes and at the
    /// one-sided limits of every breakpoint.
    pub fn validate(&self, grid: &TimeGrid, tol: &Tolerances) -> Result<ValidationSummary> {
        let chain = sample_chain(self.q.as_ref(), grid)?;
        let acc = self.q.accuracy();
        let mut summary = ValidationSummary {
            max_hermitian_residual: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_norm: 0.0,
            nodes: chain.len(),
        };
        for s in &chain {
            let norm = spectral_norm(&s.value);
            let res = hermitian_residual(&s.value);
            if res > tol.herm(norm).max(acc * norm) {
                return Err(Error::NotHermitian { t: s.t, residual: res });
            }
            let lam = min_eigenvalue(&s.value);
            if lam < -tol.psd(norm).max(acc * (1.0 + norm)) {
                return Err(Error::NotPsd { t: s.t, min_eig: lam });
            }
            summary.max_hermitian_residual = summary.max_hermitian_residual.max(res);
            summary.min_eigenvalue = summary.min_eigenvalue.min(lam);
            summary.max_norm = summary.max_norm.max(norm);
        }
        Ok(summary)
    }

    /// Absolute PSD tolerance `τ_psd` for this candidate, using the largest
    /// norm on the grid and the evaluation accuracy of `Q`.
    pub fn psd_tolerance(&self, grid: &TimeGrid, tol: &Tolerances) -> Result<f64> {
        let chain = sample_chain(self.q.as_ref(), grid)?;
        let norm = chain
            .iter()
            .map(|s| spectral_norm(&s.value))
            .fold(0.0, f64::max);
        Ok(tol.psd(norm).max(self.q.accuracy() * (1.0 + norm)))
    }
}

/// One sample of a matrix function along a grid.
#[derive(Clone, Debug)]
pub(crate) struct ChainSample {
    pub t: f64,
    pub side: Side,
    pub value: CMat,
}

/// Samples `f` on `grid ∪ breakpoints`, visiting left limit, point value and
/// right limit at every interior breakpoint.
pub(crate) fn sample_chain(f: &dyn MatrixFunction, grid: &TimeGrid) -> Result<Vec<ChainSample>> {
    let domain = f.domain();
    let bps = f.breakpoints();
    let g = grid.with_points(&bps);
    let nodes: Vec<f64> = g.nodes().iter().copied().filter(|t| domain.contains(*t)).collect();
    let per_node: Vec<Result<Vec<ChainSample>>> = nodes
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut out = Vec::with_capacity(3);
            if matches_point(&bps, t) && domain.is_interior(t) {
                if k > 0 {
                    out.push(ChainSample { t, side: Side::Left, value: f.left_limit(t)? });
                }
                out.push(ChainSample { t, side: Side::Point, value: f.eval(t)? });
                if k + 1 < nodes.len() {
                    out.push(ChainSample { t, side: Side::Right, value: f.right_limit(t)? });
                }
            } else {
                out.push(ChainSample { t, side: Side::Point, value: f.eval(t)? });
            }
            Ok(out)
        })
        .collect();
    let mut chain = Vec::new();
    for r in per_node {
        chain.extend(r?);
    }
    Ok(chain)
}

fn jump_verdicts(jumps: &[JumpRecord], tol: f64) -> Vec<JumpVerdict> {
    jumps
        .iter()
        .map(|j| {
            let l = max_eigenvalue(&j.left_jump());
            let r = max_eigenvalue(&j.right_jump());
            JumpVerdict {
                time: j.time,
                left_max_eig: l,
                right_max_eig: r,
                decreasing: l <= tol && r <= tol,
            }
        })
        .collect()
}

fn check_hermitian(chain: &[ChainSample], tol: &Tolerances, acc: f64) -> Result<()> {
    for s in chain {
        let norm = spectral_norm(&s.value);
        let res = hermitian_residual(&s.value);
        if res > tol.herm(norm).max(acc * norm) {
            return Err(Error::NotHermitian { t: s.t, residual: res });
        }
    }
    Ok(())
}

/// Weak decrease on `grid`: adjacent pairs of the sampled chain (including
/// the one-sided limits at breakpoints), the differential test
/// `λ_max(Q̇) ≤ tol` at cell midpoints, and the jump test.
///
/// `tol` is an absolute tolerance; it is raised to the evaluation accuracy
/// of `Q` when that is coarser.
pub fn check_weak_decrease(q: &StorageCandidate, grid: &TimeGrid, tol: f64) -> Result<MonotonicityReport> {
    let f = q.function().as_ref();
    let chain = sample_chain(f, grid)?;
    let norm = chain.iter().map(|s| spectral_norm(&s.value)).fold(0.0, f64::max);
    let tol = tol.max(f.accuracy() * (1.0 + norm));
    check_hermitian(&chain, &Tolerances::default(), f.accuracy())?;

    let witnesses: Vec<Witness> = chain
        .par_windows(2)
        .filter_map(|w| {
            let lam = min_eigenvalue(&(&w[0].value - &w[1].value));
            (lam < -tol).then(|| Witness {
                r: w[0].t,
                r_side: w[0].side,
                s: w[1].t,
                s_side: w[1].side,
                min_eig: lam,
            })
        })
        .collect();

    let bps = f.breakpoints();
    let g = grid.with_points(&bps);
    let mids: Vec<f64> = g
        .nodes()
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .filter(|t| !matches_point(&bps, *t))
        .collect();
    let derivs: Vec<Result<f64>> = mids
        .par_iter()
        .map(|&t| Ok(max_eigenvalue(&f.right_derivative(t)?)))
        .collect();
    let mut max_derivative_eig = f64::NEG_INFINITY;
    let mut derivative_witnesses = Vec::new();
    for (t, d) in mids.iter().zip(derivs) {
        let d = d?;
        max_derivative_eig = max_derivative_eig.max(d);
        if d > tol {
            derivative_witnesses.push(*t);
        }
    }
    let jump_verdicts = jump_verdicts(q.jump_table(), tol);
    let ok = witnesses.is_empty()
        && derivative_witnesses.is_empty()
        && jump_verdicts.iter().all(|j| j.decreasing);
    Ok(MonotonicityReport {
        verdict: if ok {
            MonotonicityVerdict::WeaklyDecreasing
        } else {
            MonotonicityVerdict::Violated
        },
        witnesses,
        jump_verdicts,
        max_derivative_eig,
        derivative_witnesses,
        tolerance: tol,
        grid_nodes: g.len(),
        max_spacing: g.max_spacing(),
    })
}

/// AUC test: every jump is decreasing and on every cell `[r, s]` of the
/// grid `Q(s⁻) − Q(r⁺) ⪯ ∫_r^s Q̇ dt + tol·I` (Gauss–Legendre quadrature).
pub fn auc_check(q: &StorageCandidate, grid: &TimeGrid, tol: f64) -> Result<AucReport> {
    let f = q.function().as_ref();
    let bps = f.breakpoints();
    let domain = f.domain();
    let g = grid.with_points(&bps);
    let nodes: Vec<f64> = g.nodes().iter().copied().filter(|t| domain.contains(*t)).collect();
    let chain = sample_chain(f, grid)?;
    let norm = chain.iter().map(|s| spectral_norm(&s.value)).fold(0.0, f64::max);
    let tol = tol.max(f.accuracy() * (1.0 + norm));
    check_hermitian(&chain, &Tolerances::default(), f.accuracy())?;

    let cells: Vec<Result<(f64, f64, f64)>> = nodes
        .par_windows(2)
        .map(|w| {
            let (r, s) = (w[0], w[1]);
            let integral = integrate_matrix(r, s, |t| f.right_derivative(t))?;
            let defect = max_eigenvalue(&(f.left_limit(s)? - f.right_limit(r)? - integral));
            Ok((r, s, defect))
        })
        .collect();
    let mut integral_witnesses = Vec::new();
    let mut max_integral_defect = f64::NEG_INFINITY;
    for c in cells {
        let (r, s, defect) = c?;
        max_integral_defect = max_integral_defect.max(defect);
        if defect > tol {
            integral_witnesses.push(Witness {
                r,
                r_side: Side::Right,
                s,
                s_side: Side::Left,
                min_eig: -defect,
            });
        }
    }
    let jump_verdicts = jump_verdicts(q.jump_table(), tol);
    Ok(AucReport {
        is_auc: integral_witnesses.is_empty() && jump_verdicts.iter().all(|j| j.decreasing),
        jump_verdicts,
        integral_witnesses,
        max_integral_defect,
        tolerance: tol,
    })
}

/// `V* Q V` with the product-rule derivative.
#[derive(Clone, Debug)]
pub struct Congruence {
    q: Arc<dyn MatrixFunction>,
    v: Arc<dyn MatrixFunction>,
    domain: Interval,
}

impl Congruence {
    pub fn new(q: Arc<dyn MatrixFunction>, v: Arc<dyn MatrixFunction>) -> Result<Self> {
        let n = q.shape().0;
        if v.shape().0 != n {
            return Err(Error::ShapeMismatch(format!(
                "congruence factor is {}×{}, storage matrix is {n}×{n}",
                v.shape().0,
                v.shape().1
            )));
        }
        let domain = q.domain().intersect(&v.domain())?;
        Ok(Congruence { q, v, domain })
    }

    fn product_derivative(&self, v: CMat, dv: CMat, q: CMat, dq: CMat) -> CMat {
        let vh = v.adjoint();
        dv.adjoint() * &q * &v + &vh * dq * &v + vh * q * dv
    }
}

impl MatrixFunction for Congruence {
    fn shape(&self) -> (usize, usize) {
        let m = self.v.shape().1;
        (m, m)
    }

    fn domain(&self) -> Interval {
        self.domain
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .q
            .breakpoints()
            .into_iter()
            .chain(self.v.breakpoints())
            .filter(|t| self.domain.is_interior(*t))
            .collect();
        b.sort_by(|x, y| x.total_cmp(y));
        b.dedup_by(|x, y| matches_point(&[*y], *x));
        b
    }

    fn eval(&self, t: f64) -> Result<CMat> {
        self.domain.check(t)?;
        let v = self.v.eval(t)?;
        Ok(v.adjoint() * self.q.eval(t)? * v)
    }

    fn left_limit(&self, t: f64) -> Result<CMat> {
        self.domain.check(t)?;
        let v = self.v.left_limit(t)?;
        Ok(v.adjoint() * self.q.left_limit(t)? * v)
    }

    fn right_limit(&self, t: f64) -> Result<CMat> {
        self.domain.check(t)?;
        let v = self.v.right_limit(t)?;
        Ok(v.adjoint() * self.q.right_limit(t)? * v)
    }

    fn left_derivative(&self, t: f64) -> Result<CMat> {
        self.domain.check(t)?;
        Ok(self.product_derivative(
            self.v.left_limit(t)?,
            self.v.left_derivative(t)?,
            self.q.left_limit(t)?,
            self.q.left_derivative(t)?,
        ))
    }

    fn right_derivative(&self, t: f64) -> Result<CMat> {
        self.domain.check(t)?;
        Ok(self.product_derivative(
            self.v.right_limit(t)?,
            self.v.right_derivative(t)?,
            self.q.right_limit(t)?,
            self.q.right_derivative(t)?,
        ))
    }

    fn accuracy(&self) -> f64 {
        self.q.accuracy().max(self.v.accuracy())
    }
}

/// `V* Q V` as a new candidate with its own jump table.
pub fn congruence(q: &StorageCandidate, v: Arc<dyn MatrixFunction>) -> Result<StorageCandidate> {
    StorageCandidate::new(Arc::new(Congruence::new(q.function().clone(), v)?))
}

/// `Qˣ = X* Q X` on the span of the flow.
pub fn q_along_flow(q: &StorageCandidate, x: &FundamentalSolution) -> Result<StorageCandidate> {
    if x.dim() != q.dim() {
        return Err(Error::ShapeMismatch(format!(
            "flow has dimension {}, candidate {}",
            x.dim(),
            q.dim()
        )));
    }
    congruence(q, Arc::new(x.clone()))
}

/// `Q` with every breakpoint value replaced by the right limit.
#[derive(Clone, Debug)]
pub struct RightContinuous {
    inner: Arc<dyn MatrixFunction>,
}

impl MatrixFunction for RightContinuous {
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }
    fn domain(&self) -> Interval {
        self.inner.domain()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints()
    }
    fn eval(&self, t: f64) -> Result<CMat> {
        if self.inner.is_breakpoint(t) && self.domain().is_interior(t) {
            self.inner.right_limit(t)
        } else {
            self.inner.eval(t)
        }
    }
    fn left_limit(&self, t: f64) -> Result<CMat> {
        self.inner.left_limit(t)
    }
    fn right_limit(&self, t: f64) -> Result<CMat> {
        self.inner.right_limit(t)
    }
    fn left_derivative(&self, t: f64) -> Result<CMat> {
        self.inner.left_derivative(t)
    }
    fn right_derivative(&self, t: f64) -> Result<CMat> {
        self.inner.right_derivative(t)
    }
    fn accuracy(&self) -> f64 {
        self.inner.accuracy()
    }
}

/// Right-continuous representative of an AUC candidate. Fails with
/// [`Error::NotAuc`] if some jump increases beyond `tol`.
pub fn right_continuous_representative(q: &StorageCandidate, tol: f64) -> Result<StorageCandidate> {
    for j in jump_verdicts(q.jump_table(), tol) {
        if !j.decreasing {
            return Err(Error::NotAuc(format!(
                "jump at t = {} increases (λ_max {:e} / {:e})",
                j.time, j.left_max_eig, j.right_max_eig
            )));
        }
    }
    match q.piecewise() {
        Some(p) => StorageCandidate::from_piecewise(p.without_overrides()),
        None => StorageCandidate::new(Arc::new(RightContinuous { inner: q.function().clone() })),
    }
}

/// The singular part `Q_s`: piecewise constant, jumping exactly where `Q`
/// does, zero before the first breakpoint.
#[derive(Clone, Debug)]
pub struct JumpPart {
    jumps: Vec<JumpRecord>,
    domain: Interval,
    n: usize,
}

impl JumpPart {
    fn sum_before(&self, t: f64) -> CMat {
        let mut acc = CMat::zeros(self.n, self.n);
        for j in &self.jumps {
            if j.time < t && !matches_point(&[j.time], t) {
                acc += j.total_jump();
            }
        }
        acc
    }

    fn at(&self, t: f64) -> Option<&JumpRecord> {
        self.jumps.iter().find(|j| matches_point(&[j.time], t))
    }
}

impl MatrixFunction for JumpPart {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.n)
    }
    fn domain(&self) -> Interval {
        self.domain
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.time).collect()
    }
    fn eval(&self, t: f64) -> Result<CMat> {
        self.domain.check(t)?;
        let mut s = self.sum_before(t);
        if let Some(j) = self.at(t) {
            s += j.left_jump();
        }
        Ok(s)
    }
    fn left_limit(&self, t: f64) -> Result<CMat> {
        self.domain.check(t)?;
        Ok(self.sum_before(t))
    }
    fn right_limit(&self, t: f64) -> Result<CMat> {
        self.domain.check(t)?;
        let mut s = self.sum_before(t);
        if let Some(j) = self.at(t) {
            s += j.total_jump();
        }
        Ok(s)
    }
    fn left_derivative(&self, t: f64) -> Result<CMat> {
        self.domain.check(t)?;
        Ok(CMat::zeros(self.n, self.n))
    }
    fn right_derivative(&self, t: f64) -> Result<CMat> {
        self.left_derivative(t)
    }
}

/// The absolutely continuous part `Q_a = Q − Q_s`.
#[derive(Clone, Debug)]
pub struct AcPart {
    q: Arc<dyn MatrixFunction>,
    singular: JumpPart,
}

impl MatrixFunction for AcPart {
    fn shape(&self) -> (usize, usize) {
        self.q.shape()
    }
    fn domain(&self) -> Interval {
        self.q.domain()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.q.breakpoints()
    }
    fn eval(&self, t: f64) -> Result<CMat> {
        Ok(self.q.eval(t)? - self.singular.eval(t)?)
    }
    fn left_limit(&self, t: f64) -> Result<CMat> {
        Ok(self.q.left_limit(t)? - self.singular.left_limit(t)?)
    }
    fn right_limit(&self, t: f64) -> Result<CMat> {
        Ok(self.q.right_limit(t)? - self.singular.right_limit(t)?)
    }
    fn left_derivative(&self, t: f64) -> Result<CMat> {
        self.q.left_derivative(t)
    }
    fn right_derivative(&self, t: f64) -> Result<CMat> {
        self.q.right_derivative(t)
    }
    fn accuracy(&self) -> f64 {
        self.q.accuracy()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real};
    use crate::matfun::Segment;

    fn scalar_pw(segs: &[(f64, f64, &str)]) -> PiecewiseMatrixFunction {
        PiecewiseMatrixFunction::new(
            segs.iter()
                .map(|(a, b, e)| Segment::expressions(*a, *b, 1, 1, &[e]).unwrap())
                .collect(),
            vec![],
        )
        .unwrap()
    }

    fn stiffness_candidate() -> StorageCandidate {
        let q = PiecewiseMatrixFunction::new(
            vec![
                Segment::expressions(-1.0, 0.0, 2, 2, &["1", "0", "0", "1"]).unwrap(),
                Segment::expressions(0.0, 1.0, 2, 2, &["1 - 2/3*t", "0", "0", "1"]).unwrap(),
                Segment::expressions(1.0, 3.0, 2, 2, &["0", "0", "0", "1"]).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        StorageCandidate::from_piecewise(q).unwrap()
    }

    #[test]
    fn decreasing_piecewise_passes() {
        let q = StorageCandidate::from_piecewise(scalar_pw(&[(-1.0, 0.0, "1 + t^2"), (0.0, 5.0, "1/(1 + t^2)")])).unwrap();
        let g = TimeGrid::uniform(q.domain(), 120);
        let r = check_weak_decrease(&q, &g, 1e-9).unwrap();
        assert!(r.is_decreasing(), "{r:?}");
    }

    #[test]
    fn increasing_diagonal_entry_is_caught() {
        let q = PiecewiseMatrixFunction::expressions(Interval::new(0.0, 1.0).unwrap(), 2, 2, &["1", "0", "0", "t"]).unwrap();
        let q = StorageCandidate::from_piecewise(q).unwrap();
        let r = check_weak_decrease(&q, &TimeGrid::uniform(q.domain(), 10), 1e-9).unwrap();
        assert_eq!(r.verdict, MonotonicityVerdict::Violated);
        assert_eq!(r.witnesses.len(), 10);
        let w = &r.witnesses[0];
        assert!(w.r < w.s && (w.min_eig + 0.1).abs() < 1e-12);
    }

    #[test]
    fn stiffness_is_auc_and_decreasing() {
        let q = stiffness_candidate();
        let g = TimeGrid::uniform(q.domain(), 40);
        assert!(auc_check(&q, &g, 1e-9).unwrap().is_auc);
        assert!(check_weak_decrease(&q, &g, 1e-9).unwrap().is_decreasing());
        let j = &q.jump_table()[..];
        assert_eq!(j.len(), 2);
        let jump = j[1].left_jump()[(0, 0)].re;
        assert!((jump + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn increasing_jump_is_not_auc() {
        let q = StorageCandidate::from_piecewise(scalar_pw(&[(-1.0, 0.0, "0"), (0.0, 1.0, "1")])).unwrap();
        let g = TimeGrid::uniform(q.domain(), 8);
        let r = auc_check(&q, &g, 1e-9).unwrap();
        assert!(!r.is_auc);
        assert!(matches!(right_continuous_representative(&q, 1e-9), Err(Error::NotAuc(_))));
    }

    #[test]
    fn split_reproduces_candidate() {
        let q = stiffness_candidate();
        let (qa, qs) = (q.ac_part(), q.singular_part());
        for k in 0..=80 {
            let t = -1.0 + 4.0 * k as f64 / 80.0;
            let sum = qa.eval(t).unwrap() + qs.eval(t).unwrap();
            assert!((sum - q.eval(t).unwrap()).norm() <= 4.0 * f64::EPSILON);
        }
        for j in qa.jump_table().unwrap() {
            assert!(j.total_jump().norm() < 1e-15 && j.left_jump().norm() < 1e-15);
        }
        assert!((qs.eval(2.0).unwrap()[(0, 0)].re + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn representative_replaces_point_values() {
        let base = stiffness_candidate();
        let k = base.piecewise().unwrap().with_override(1.0, diag_real(&[1.0 / 3.0, 1.0])).unwrap();
        let q = StorageCandidate::from_piecewise(k).unwrap();
        let r = right_continuous_representative(&q, 1e-9).unwrap();
        assert_eq!(r.eval(1.0).unwrap(), diag_real(&[0.0, 1.0]));
        let unchanged = right_continuous_representative(&base, 1e-9).unwrap();
        assert_eq!(unchanged.eval(1.0).unwrap(), base.eval(1.0).unwrap());
    }

    #[test]
    fn constant_congruence() {
        let q = stiffness_candidate();
        let swap = PiecewiseMatrixFunction::constant(&from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]), q.domain());
        let c = congruence(&q, Arc::new(swap)).unwrap();
        assert!((c.eval(0.5).unwrap() - diag_real(&[1.0, 2.0 / 3.0])).norm() < 1e-15);
        assert_eq!(c.jump_table().len(), 2);
    }
}
