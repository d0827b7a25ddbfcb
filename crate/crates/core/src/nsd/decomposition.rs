use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::grid::matches_point;
use crate::linalg::{identity, min_eigenvalue, spectral_norm};
use crate::loewner::{check_weak_decrease, congruence, q_along_flow, sample_chain, MonotonicityReport, Side, StorageCandidate};
use crate::matfun::{MatrixFunction, PiecewiseMatrixFunction};
use crate::odeflow::{FlowDiagnostics, FundamentalSolution};
use crate::{CMat, Error, Interval, Result, TimeGrid, Tolerances};

use super::{kernel_chain, rank_profile, reversed_basis, ql_factorization, KernelChain, RankProfile};

/// `V(t) = X(t) V0`.
#[derive(Clone, Debug)]
pub struct FlowTransform {
    x: Arc<FundamentalSolution>,
    v0: CMat,
}

impl FlowTransform {
    pub fn new(x: Arc<FundamentalSolution>, v0: CMat) -> Result<Self> {
        if v0.nrows() != x.dim() {
            return Err(Error::ShapeMismatch(format!("V0 has {} rows, flow dimension is {}", v0.nrows(), x.dim())));
        }
        Ok(FlowTransform { x, v0 })
    }

    pub fn flow(&self) -> &FundamentalSolution {
        &self.x
    }
}

impl MatrixFunction for FlowTransform {
    fn shape(&self) -> (usize, usize) {
        (self.v0.nrows(), self.v0.ncols())
    }
    fn domain(&self) -> Interval {
        self.x.domain()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.x.breakpoints()
    }
    fn eval(&self, t: f64) -> Result<CMat> {
        Ok(self.x.eval(t)? * &self.v0)
    }
    fn left_limit(&self, t: f64) -> Result<CMat> {
        Ok(self.x.left_limit(t)? * &self.v0)
    }
    fn right_limit(&self, t: f64) -> Result<CMat> {
        Ok(self.x.right_limit(t)? * &self.v0)
    }
    fn left_derivative(&self, t: f64) -> Result<CMat> {
        Ok(self.x.left_derivative(t)? * &self.v0)
    }
    fn right_derivative(&self, t: f64) -> Result<CMat> {
        Ok(self.x.right_derivative(t)? * &self.v0)
    }
    fn accuracy(&self) -> f64 {
        self.x.accuracy()
    }
}

/// Which decomposition produced an [`NsdResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NsdKind {
    Constant,
    Flow,
    Unitary,
    Certified,
}

/// One validation node of a decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct NsdSample {
    pub t: f64,
    pub side: Side,
    pub rank: usize,
    /// The transformed matrix `Q̃ = V* Q V` (or `Q̂ = U* Q U`).
    #[serde(with = "crate::report::cmat")]
    pub transformed: CMat,
    /// Largest entry of the trailing `n − rank` rows and columns.
    pub zero_block_residual: f64,
    /// Smallest eigenvalue of the leading `rank × rank` block.
    pub leading_min_eig: f64,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_cmat")]
    pub u: Option<CMat>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_cmat")]
    pub l: Option<CMat>,
}

mod opt_cmat {
    use serde::Serializer;

    use crate::report::MatrixJson;
    use crate::CMat;

    pub fn serialize<S: Serializer>(m: &Option<CMat>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(m) => s.serialize_some(&MatrixJson::from(m)),
            None => s.serialize_none(),
        }
    }
}

impl NsdSample {
    pub fn leading_block(&self) -> CMat {
        self.transformed.view((0, 0), (self.rank, self.rank)).into_owned()
    }
}

/// Zero-block structure of a transformed candidate on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionCheck {
    pub samples: Vec<NsdSample>,
    pub max_zero_block: f64,
    pub zero_block_tolerance: f64,
    pub min_leading_eig: f64,
    pub definiteness_tolerance: f64,
    pub zero_block_ok: bool,
    pub leading_block_definite: bool,
}

/// Null space decomposition with its validation data.
#[derive(Clone, Debug, Serialize)]
pub struct NsdResult {
    pub kind: NsdKind,
    pub dim: usize,
    pub anchor: Option<f64>,
    #[serde(with = "crate::report::cmat")]
    pub v0: CMat,
    pub rank_profile: RankProfile,
    pub chain: KernelChain,
    pub check: DecompositionCheck,
    /// Weak-decrease report of `Q̃ = V* Q V`.
    pub qtilde_report: MonotonicityReport,
    /// Weak-decrease report of `Q̂ = U* Q U` (unitary variant only).
    pub qhat_report: Option<MonotonicityReport>,
    /// `max ‖U* U − I‖₂` over the samples (unitary variant only).
    pub max_unitarity_residual: Option<f64>,
    /// Smallest diagonal entry of `L` over the samples (unitary variant only).
    pub min_l_diagonal: Option<f64>,
    pub flow: Option<FlowDiagnostics>,
    pub tolerances: Tolerances,
}

impl NsdResult {
    pub fn drop_times(&self) -> &[f64] {
        &self.rank_profile.drop_times
    }

    /// `true` when the structural checks and the decrease of `Q̃` hold.
    pub fn is_valid(&self) -> bool {
        self.check.zero_block_ok
            && self.check.leading_block_definite
            && self.qtilde_report.is_decreasing()
            && self.max_unitarity_residual.is_none_or(|r| r <= 1e-10)
            && self.min_l_diagonal.is_none_or(|d| d > 0.0)
    }

    /// `false` exactly when the unitary variant produced a `Q̂` that is not
    /// weakly decreasing; `None` for the other variants.
    pub fn qhat_decreasing(&self) -> Option<bool> {
        self.qhat_report.as_ref().map(|r| r.is_decreasing())
    }
}

fn rank_for(profile: &RankProfile, t: f64, side: Side) -> usize {
    for d in &profile.drops {
        if matches_point(&[d.time], t) {
            return match side {
                Side::Left => d.left_rank,
                Side::Point => d.point_rank,
                Side::Right => d.right_rank,
            };
        }
    }
    profile.rank_at(t)
}

fn trailing_residual(m: &CMat, r: usize) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i >= r || j >= r {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// Checks that the transformed candidate has a trailing zero block of size
/// `n − r(t)` and a positive definite leading block at every node of `grid`
/// and at the one-sided limits of every breakpoint.
pub fn validate_decomposition(transformed: &StorageCandidate, profile: &RankProfile, grid: &TimeGrid) -> Result<DecompositionCheck> {
    let chain = sample_chain(transformed.function().as_ref(), grid)?;
    let thr = profile.threshold.max(f64::MIN_POSITIVE);
    let samples: Vec<NsdSample> = chain
        .into_par_iter()
        .map(|s| {
            let rank = rank_for(profile, s.t, s.side);
            let zero_block_residual = trailing_residual(&s.value, rank);
            let leading_min_eig = if rank == 0 {
                f64::INFINITY
            } else {
                min_eigenvalue(&s.value.view((0, 0), (rank, rank)).into_owned())
            };
            NsdSample {
                t: s.t,
                side: s.side,
                rank,
                transformed: s.value,
                zero_block_residual,
                leading_min_eig,
                u: None,
                l: None,
            }
        })
        .collect();
    let max_zero_block = samples.iter().map(|s| s.zero_block_residual).fold(0.0, f64::max);
    let min_leading_eig = samples.iter().map(|s| s.leading_min_eig).fold(f64::INFINITY, f64::min);
    Ok(DecompositionCheck {
        zero_block_ok: max_zero_block <= thr,
        leading_block_definite: min_leading_eig > thr,
        samples,
        max_zero_block,
        zero_block_tolerance: thr,
        min_leading_eig,
        definiteness_tolerance: thr,
    })
}

fn decrease_report(q: &StorageCandidate, grid: &TimeGrid, tol: &Tolerances) -> Result<MonotonicityReport> {
    check_weak_decrease(q, grid, q.psd_tolerance(grid, tol)?)
}

/// Constant decomposition `V0` of a weakly decreasing candidate.
pub fn nsd_constant(q: &StorageCandidate, grid: &TimeGrid, tol: &Tolerances) -> Result<NsdResult> {
    let n = q.dim();
    let rel = tol.rank(n, q.function().accuracy());
    let profile = rank_profile(q, grid, rel)?;
    let chain = kernel_chain(q, &profile, rel)?;
    let v0 = reversed_basis(&chain);
    let qt = congruence(q, Arc::new(PiecewiseMatrixFunction::constant(&v0, q.domain())))?;
    let check = validate_decomposition(&qt, &profile, grid)?;
    let qtilde_report = decrease_report(&qt, grid, tol)?;
    Ok(NsdResult {
        kind: NsdKind::Constant,
        dim: n,
        anchor: None,
        v0,
        rank_profile: profile,
        chain,
        check,
        qtilde_report,
        qhat_report: None,
        max_unitarity_residual: None,
        min_l_diagonal: None,
        flow: None,
        tolerances: tol.clone(),
    })
}

struct FlowParts {
    result: NsdResult,
    v: Arc<FlowTransform>,
}

fn flow_parts(a: &PiecewiseMatrixFunction, q: &StorageCandidate, t0: f64, grid: &TimeGrid, tol: &Tolerances) -> Result<FlowParts> {
    let n = q.dim();
    if a.shape() != (n, n) {
        return Err(Error::ShapeMismatch(format!("A is {}×{}, Q is {n}×{n}", a.shape().0, a.shape().1)));
    }
    let x = Arc::new(FundamentalSolution::compute(a, t0, q.domain(), tol)?);
    let grid = grid.with_points(&a.breakpoints());
    let qx = q_along_flow(q, &x)?;
    let report = decrease_report(&qx, &grid, tol)?;
    if !report.is_decreasing() {
        let mut witnesses = report.witnesses.clone();
        if witnesses.is_empty() {
            witnesses.extend(report.derivative_witnesses.iter().map(|&t| crate::loewner::Witness {
                r: t,
                r_side: Side::Point,
                s: t,
                s_side: Side::Point,
                min_eig: -report.max_derivative_eig,
            }));
        }
        return Err(Error::NotStorage { witnesses });
    }
    let rel = tol.rank(n, qx.function().accuracy());
    let profile = rank_profile(&qx, &grid, rel)?;
    let chain = kernel_chain(&qx, &profile, rel)?;
    let v0 = reversed_basis(&chain);
    let v = Arc::new(FlowTransform::new(x.clone(), v0.clone())?);
    let qt = congruence(q, v.clone())?;
    let check = validate_decomposition(&qt, &profile, &grid)?;
    let qtilde_report = decrease_report(&qt, &grid, tol)?;
    let result = NsdResult {
        kind: NsdKind::Flow,
        dim: n,
        anchor: Some(t0),
        v0,
        rank_profile: profile,
        chain,
        check,
        qtilde_report,
        qhat_report: None,
        max_unitarity_residual: None,
        min_l_diagonal: None,
        flow: Some(x.diagnostics().clone()),
        tolerances: tol.clone(),
    };
    Ok(FlowParts { result, v })
}

/// Flow-based decomposition `V = X V0` with `V0` from the kernel chain of
/// `Qˣ = X* Q X`. Fails with [`Error::NotStorage`] when `Qˣ` is not weakly
/// decreasing.
pub fn nsd_flow(a: &PiecewiseMatrixFunction, q: &StorageCandidate, t0: f64, grid: &TimeGrid, tol: &Tolerances) -> Result<NsdResult> {
    Ok(flow_parts(a, q, t0, grid, tol)?.result)
}

/// Pointwise unitary decomposition: `U` from the QL factorization of
/// `V = X V0`, and `Q̂ = U* Q U` with its zero block validated. The decrease
/// of `Q̂` is reported but not required.
pub fn nsd_unitary(a: &PiecewiseMatrixFunction, q: &StorageCandidate, t0: f64, grid: &TimeGrid, tol: &Tolerances) -> Result<NsdResult> {
    let FlowParts { mut result, v } = flow_parts(a, q, t0, grid, tol)?;
    let grid = grid.with_points(&a.breakpoints());
    let ql = ql_factorization(v, tol.inv)?;
    let u = Arc::new(ql.unitary());
    let l = ql.lower();
    let qh = congruence(q, u.clone())?;
    let mut check = validate_decomposition(&qh, &result.rank_profile, &grid)?;
    let n = q.dim();
    let id = identity(n);
    let factors: Vec<Result<(CMat, CMat)>> = check
        .samples
        .par_iter()
        .map(|s| {
            let (uf, lf) = match s.side {
                Side::Left => (u.left_limit(s.t)?, l.left_limit(s.t)?),
                Side::Right => (u.right_limit(s.t)?, l.right_limit(s.t)?),
                Side::Point => (u.eval(s.t)?, l.eval(s.t)?),
            };
            Ok((uf, lf))
        })
        .collect();
    let mut max_res: f64 = 0.0;
    let mut min_diag = f64::INFINITY;
    for (s, f) in check.samples.iter_mut().zip(factors) {
        let (uf, lf) = f?;
        max_res = max_res.max(spectral_norm(&(uf.adjoint() * &uf - &id)));
        for i in 0..n {
            min_diag = min_diag.min(lf[(i, i)].re);
        }
        s.u = Some(uf);
        s.l = Some(lf);
    }
    let qhat_report = decrease_report(&qh, &grid, tol)?;
    result.kind = NsdKind::Unitary;
    result.check = check;
    result.qhat_report = Some(qhat_report);
    result.max_unitarity_residual = Some(max_res);
    result.min_l_diagonal = Some(min_diag);
    Ok(result)
}

/// Certifies a user-supplied transformation `W(t)`: the rank profile of
/// `Q` itself fixes the block sizes, and `W* Q W` must show the zero-block
/// structure.
pub fn certify_transform(q: &StorageCandidate, w: Arc<dyn MatrixFunction>, grid: &TimeGrid, tol: &Tolerances) -> Result<DecompositionCheck> {
    let rel = tol.rank(q.dim(), q.function().accuracy());
    let profile = rank_profile(q, grid, rel)?;
    let qw = congruence(q, w)?;
    validate_decomposition(&qw, &profile, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real, max_abs};
    use crate::matfun::Segment;

    fn msd() -> (PiecewiseMatrixFunction, StorageCandidate) {
        let seg = |a: f64, b: f64, k: &str| {
            (
                Segment::expressions(a, b, 2, 2, &["0", "1", &format!("-({k})"), "-1"]).unwrap(),
                Segment::expressions(a, b, 2, 2, &[k, "0", "0", "1"]).unwrap(),
            )
        };
        let parts = [seg(-1.0, 0.0, "1"), seg(0.0, 1.0, "1 - 2/3*t"), seg(1.0, 3.0, "0")];
        let a = PiecewiseMatrixFunction::new(parts.iter().map(|p| p.0.clone()).collect(), vec![]).unwrap();
        let q = PiecewiseMatrixFunction::new(parts.iter().map(|p| p.1.clone()).collect(), vec![]).unwrap();
        (a, StorageCandidate::from_piecewise(q).unwrap())
    }

    #[test]
    fn constant_decomposition_moves_kernel_last() {
        let q = PiecewiseMatrixFunction::new(
            vec![
                Segment::expressions(0.0, 1.0, 2, 2, &["1 - t", "0", "0", "1"]).unwrap(),
                Segment::expressions(1.0, 2.0, 2, 2, &["0", "0", "0", "1"]).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        let q = StorageCandidate::from_piecewise(q).unwrap();
        let r = nsd_constant(&q, &TimeGrid::uniform(q.domain(), 20), &Tolerances::default()).unwrap();
        assert_eq!(r.drop_times(), &[1.0]);
        assert!(r.is_valid(), "{:?} {} {:?}", r.check.max_zero_block, r.check.min_leading_eig, r.qtilde_report.verdict);
        assert!((r.v0[(0, 1)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn definite_candidate_has_no_zero_block() {
        let q = PiecewiseMatrixFunction::constant(&diag_real(&[2.0, 1.0]), Interval::new(0.0, 1.0).unwrap());
        let q = StorageCandidate::from_piecewise(q).unwrap();
        let r = nsd_constant(&q, &TimeGrid::uniform(q.domain(), 4), &Tolerances::default()).unwrap();
        assert!(r.drop_times().is_empty());
        assert_eq!(r.chain.kernel_size, 0);
        assert!(r.is_valid());
    }

    #[test]
    fn zero_generator_reduces_to_constant() {
        let q = PiecewiseMatrixFunction::new(
            vec![
                Segment::expressions(0.0, 1.0, 2, 2, &["2 - t", "0", "0", "1"]).unwrap(),
                Segment::expressions(1.0, 2.0, 2, 2, &["0", "0", "0", "1"]).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        let q = StorageCandidate::from_piecewise(q).unwrap();
        let a = PiecewiseMatrixFunction::constant(&CMat::zeros(2, 2), q.domain());
        let g = TimeGrid::uniform(q.domain(), 16);
        let tol = Tolerances::default();
        let f = nsd_flow(&a, &q, 0.0, &g, &tol).unwrap();
        let c = nsd_constant(&q, &g, &tol).unwrap();
        assert!(max_abs(&(f.v0.clone() - &c.v0)) < 1e-12);
        assert!(f.is_valid());
    }

    #[test]
    fn msd_flow_and_unitary() {
        let (a, q) = msd();
        let g = TimeGrid::uniform(q.domain(), 64);
        let tol = Tolerances::default();
        let r = nsd_flow(&a, &q, 1.0, &g, &tol).unwrap();
        assert_eq!(r.drop_times(), &[1.0]);
        assert!(r.is_valid());
        let u = nsd_unitary(&a, &q, 1.0, &g, &tol).unwrap();
        assert!(u.check.zero_block_ok && u.check.leading_block_definite);
        assert!(u.max_unitarity_residual.unwrap() <= 1e-10);
        assert!(u.min_l_diagonal.unwrap() > 0.0);

        let swap = from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = certify_transform(&q, Arc::new(PiecewiseMatrixFunction::constant(&swap, q.domain())), &g, &tol).unwrap();
        assert!(c.zero_block_ok && c.leading_block_definite);
    }

    #[test]
    fn scalar_example_qhat_is_flagged() {
        let a = PiecewiseMatrixFunction::new(
            vec![
                Segment::expressions(-1.0, 0.0, 1, 1, &["0"]).unwrap(),
                Segment::expressions(0.0, 4.0, 1, 1, &["-2*t/(1 + t^2)"]).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        let q = PiecewiseMatrixFunction::new(
            vec![
                Segment::expressions(-1.0, 0.0, 1, 1, &["1"]).unwrap(),
                Segment::expressions(0.0, 4.0, 1, 1, &["1 + t^2"]).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        let q = StorageCandidate::from_piecewise(q).unwrap();
        let g = TimeGrid::uniform(q.domain(), 50);
        let r = nsd_unitary(&a, &q, 0.0, &g, &Tolerances::default()).unwrap();
        assert!(r.qtilde_report.is_decreasing());
        assert_eq!(r.qhat_decreasing(), Some(false));
    }

    #[test]
    fn increasing_flow_candidate_is_not_storage() {
        let q = PiecewiseMatrixFunction::expressions(Interval::new(0.0, 1.0).unwrap(), 1, 1, &["1 + t"]).unwrap();
        let q = StorageCandidate::from_piecewise(q).unwrap();
        let a = PiecewiseMatrixFunction::constant(&CMat::zeros(1, 1), q.domain());
        let r = nsd_flow(&a, &q, 0.0, &TimeGrid::uniform(q.domain(), 8), &Tolerances::default());
        assert!(matches!(r, Err(Error::NotStorage { .. })));
    }
}
