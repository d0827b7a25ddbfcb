//! Rank profiles, kernel chains and null space decompositions.
//!
//! For a weakly decreasing `Q` the kernels grow along the time axis:
//! `ker Q(r) ⊆ ker Q(s)` for `r ≤ s`, including one-sided limits at the
//! drop times. Collecting kernel bases stage by stage, extending each by
//! orthonormal null vectors, and reversing the resulting basis gives a
//! constant `V0` such that `V0* Q(t) V0` has a trailing zero block of size
//! `n − rank Q(t)` at every `t`.

mod decomposition;
mod export;
mod ql;

pub use decomposition::{
    certify_transform, nsd_constant, nsd_flow, nsd_unitary, validate_decomposition, DecompositionCheck, FlowTransform, NsdKind,
    NsdResult, NsdSample,
};
pub use export::NsdManifest;
pub use ql::{ql_factor, ql_factorization, QlFactorization, QlLower, QlUnitary};

use serde::{Deserialize, Serialize};

use crate::linalg::{extend_orthonormal, kernel_basis, orthogonal_complement, singular_values, spectral_norm};
use crate::loewner::{sample_chain, ChainSample, Side, StorageCandidate};
use crate::matfun::MatrixFunction;
use crate::{CMat, Error, Result, TimeGrid};

/// Number of singular values above the absolute threshold `thr`.
pub fn rank_abs(m: &CMat, thr: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > thr).count()
}

/// Orthonormal basis of the numerical kernel with absolute threshold `thr`.
pub fn kernel_abs(m: &CMat, thr: f64) -> CMat {
    let smax = spectral_norm(m);
    if smax <= thr {
        return crate::linalg::identity(m.ncols());
    }
    kernel_basis(m, thr / smax)
}

/// A rank change, located either at a breakpoint (through the one-sided
/// limits) or by bisection between two grid nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropEvent {
    pub time: f64,
    pub left_rank: usize,
    pub point_rank: usize,
    pub right_rank: usize,
    pub at_breakpoint: bool,
    /// Bracket `[lo, hi]` of the bisection; `lo = hi = time` at breakpoints.
    pub bracket: (f64, f64),
}

/// Piecewise-constant rank function `r(t)` with its drop times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub drop_times: Vec<f64>,
    pub drops: Vec<DropEvent>,
    /// Rank on each open interval between consecutive drops.
    pub interval_ranks: Vec<usize>,
    /// `r₀, r(t₁⁻), r(t₁), r(t₁⁺), r₁, …`
    pub sequence: Vec<usize>,
    /// Relative SVD threshold.
    pub threshold_rel: f64,
    /// Absolute threshold `threshold_rel · scale`.
    pub threshold: f64,
    /// Largest spectral norm of `Q` on the sampled chain.
    pub scale: f64,
    pub time_resolution: f64,
    pub method: String,
}

impl RankProfile {
    pub fn rank_at(&self, t: f64) -> usize {
        let k = self.drop_times.partition_point(|&d| d <= t);
        if k > 0 && crate::grid::matches_point(&[self.drop_times[k - 1]], t) {
            return self.drops[k - 1].point_rank;
        }
        self.interval_ranks[k]
    }

    pub fn is_weakly_decreasing(&self) -> bool {
        self.sequence.windows(2).all(|w| w[0] >= w[1])
    }
}

fn chain_scale(chain: &[ChainSample]) -> f64 {
    chain.iter().map(|s| spectral_norm(&s.value)).fold(0.0, f64::max)
}

/// Rank profile of `Q` on `grid` with relative threshold `rel` (scaled by
/// the largest norm of `Q` on the grid). Drops between nodes are localized by
/// bisection to `1e-6 · |I|`.
pub fn rank_profile(q: &StorageCandidate, grid: &TimeGrid, rel: f64) -> Result<RankProfile> {
    let f = q.function().as_ref();
    let domain = f.domain();
    let chain = sample_chain(f, grid)?;
    let scale = chain_scale(&chain);
    let thr = rel * scale;
    let delta = 1e-6 * domain.length();
    let ranks: Vec<usize> = chain.iter().map(|s| rank_abs(&s.value, thr)).collect();

    let mut drops: Vec<DropEvent> = Vec::new();
    let mut interval_ranks = vec![ranks[0]];
    let mut sequence = vec![ranks[0]];
    let push_seq = |seq: &mut Vec<usize>, r: usize, t: f64| -> Result<()> {
        if let Some(&last) = seq.last() {
            if r > last {
                return Err(Error::NonMonotoneRank { t, before: last, after: r });
            }
        }
        seq.push(r);
        Ok(())
    };

    let mut i = 0;
    while i < chain.len() {
        let s = &chain[i];
        if s.side == Side::Left {
            let (l, p, r) = (ranks[i], ranks[i + 1], ranks.get(i + 2).copied().unwrap_or(ranks[i + 1]));
            let current = *interval_ranks.last().unwrap();
            if l > current {
                return Err(Error::NonMonotoneRank { t: s.t, before: current, after: l });
            }
            let mut at_left_limit = false;
            if l < current {
                // continuous drop inside the preceding cell
                locate(f, chain[i - 1].t, s.t, current, l, thr, delta, &mut drops, &mut interval_ranks, &mut sequence)?;
                if drops.last().is_some_and(|d| d.time == s.t) {
                    // the rank is lost only in the left limit itself
                    drops.pop();
                    interval_ranks.pop();
                    sequence.truncate(sequence.len() - 4);
                    at_left_limit = true;
                }
            }
            if at_left_limit || l != p || p != r {
                push_seq(&mut sequence, l, s.t)?;
                push_seq(&mut sequence, p, s.t)?;
                push_seq(&mut sequence, r, s.t)?;
                drops.push(DropEvent {
                    time: s.t,
                    left_rank: l,
                    point_rank: p,
                    right_rank: r,
                    at_breakpoint: true,
                    bracket: (s.t, s.t),
                });
                interval_ranks.push(r);
                push_seq(&mut sequence, r, s.t)?;
            }
            i += 3;
            continue;
        }
        if i > 0 {
            let current = *interval_ranks.last().unwrap();
            let r = ranks[i];
            if r > current {
                return Err(Error::NonMonotoneRank { t: s.t, before: current, after: r });
            }
            if r < current && chain[i - 1].t < s.t {
                locate(f, chain[i - 1].t, s.t, current, r, thr, delta, &mut drops, &mut interval_ranks, &mut sequence)?;
            }
        }
        i += 1;
    }
    Ok(RankProfile {
        drop_times: drops.iter().map(|d| d.time).collect(),
        drops,
        interval_ranks,
        sequence,
        threshold_rel: rel,
        threshold: thr,
        scale,
        time_resolution: delta,
        method: format!("SVD, σ > {rel:e} · {scale:e}"),
    })
}

/// Bisection for every rank change between `lo` (rank `r_lo`) and `hi`
/// (rank `r_hi`), both inside one smooth piece.
#[allow(clippy::too_many_arguments)]
fn locate(
    f: &dyn MatrixFunction,
    mut lo: f64,
    hi: f64,
    mut r_lo: usize,
    r_hi: usize,
    thr: f64,
    delta: f64,
    drops: &mut Vec<DropEvent>,
    interval_ranks: &mut Vec<usize>,
    sequence: &mut Vec<usize>,
) -> Result<()> {
    let rank = |t: f64| -> Result<usize> { Ok(rank_abs(&f.eval(t)?, thr)) };
    while r_lo > r_hi {
        let (mut a, mut b) = (lo, hi);
        let mut r_b = r_hi;
        while b - a > delta {
            let mid = 0.5 * (a + b);
            let r = rank(mid)?;
            if r > r_lo {
                return Err(Error::NonMonotoneRank { t: mid, before: r_lo, after: r });
            }
            if r == r_lo {
                a = mid;
            } else {
                b = mid;
                r_b = r;
            }
        }
        if r_b < r_hi {
            return Err(Error::NonMonotoneRank { t: b, before: r_b, after: r_hi });
        }
        drops.push(DropEvent {
            time: b,
            left_rank: r_lo,
            point_rank: r_b,
            right_rank: r_b,
            at_breakpoint: false,
            bracket: (a, b),
        });
        sequence.extend([r_lo, r_b, r_b, r_b]);
        interval_ranks.push(r_b);
        lo = b;
        r_lo = r_b;
    }
    Ok(())
}

/// One stage of the kernel chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelStage {
    pub time: f64,
    pub side: Side,
    /// Dimension of the accumulated span after this stage.
    pub size: usize,
    /// Largest `‖Q v‖` over the previously collected vectors at this stage.
    pub max_residual: f64,
}

/// Nested orthonormal kernel bases `ℬ₀ ⊆ ℬ₁⁻ ⊆ ℬ₁ ⊆ ℬ₁⁺ ⊆ …` and their
/// completion to a basis of `ℂⁿ`, stored as the columns of `basis` in
/// collection order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelChain {
    pub stages: Vec<KernelStage>,
    #[serde(with = "crate::report::cmat")]
    pub basis: CMat,
    /// Size of the largest kernel; the remaining columns are the completion.
    pub kernel_size: usize,
    pub max_residual: f64,
}

impl KernelChain {
    /// Distinct accumulated sizes, ending with the completion size `n`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.stages.iter().map(|s| s.size).collect();
        v.dedup();
        if v.last() != Some(&self.basis.ncols()) {
            v.push(self.basis.ncols());
        }
        v
    }
}

/// Builds the kernel chain at the representative times of `profile`.
/// Fails with [`Error::ChainViolation`] when a collected vector leaves a
/// later kernel by more than `rel · scale`.
pub fn kernel_chain(q: &StorageCandidate, profile: &RankProfile, rel: f64) -> Result<KernelChain> {
    let f = q.function().as_ref();
    let domain = f.domain();
    let n = q.dim();
    let thr = rel * profile.scale;
    let mut edges = vec![domain.start];
    edges.extend(profile.drop_times.iter().copied());
    edges.push(domain.end);

    let mut stages_at: Vec<(f64, Side, CMat)> = Vec::new();
    for k in 0..edges.len() - 1 {
        if k > 0 {
            let t = edges[k];
            stages_at.push((t, Side::Left, f.left_limit(t)?));
            stages_at.push((t, Side::Point, f.eval(t)?));
            stages_at.push((t, Side::Right, f.right_limit(t)?));
        }
        let mid = 0.5 * (edges[k] + edges[k + 1]);
        stages_at.push((mid, Side::Point, f.eval(mid)?));
    }
    let last = *edges.last().unwrap();
    stages_at.push((last, Side::Point, f.eval(last)?));

    let mut basis = CMat::zeros(n, 0);
    let mut stages = Vec::with_capacity(stages_at.len());
    let mut worst: f64 = 0.0;
    for (t, side, m) in stages_at {
        let mut res: f64 = 0.0;
        for c in basis.column_iter() {
            res = res.max((&m * c).norm());
        }
        if res > thr.max(f64::MIN_POSITIVE) {
            return Err(Error::ChainViolation { t, residual: res });
        }
        worst = worst.max(res);
        let ker = kernel_abs(&m, thr);
        basis = extend_orthonormal(&basis, &ker, 1e-8);
        stages.push(KernelStage {
            time: t,
            side,
            size: basis.ncols(),
            max_residual: res,
        });
    }
    let kernel_size = basis.ncols();
    let comp = orthogonal_complement(&basis, n);
    let full = if kernel_size == 0 {
        comp
    } else {
        let cols: Vec<_> = basis
            .column_iter()
            .chain(comp.column_iter())
            .map(|c| c.into_owned())
            .collect();
        CMat::from_columns(&cols)
    };
    Ok(KernelChain {
        stages,
        basis: full,
        kernel_size,
        max_residual: worst,
    })
}

/// `V0 = [v_n, …, v_1]` from the chain basis `[v_1, …, v_n]`.
pub fn reversed_basis(chain: &KernelChain) -> CMat {
    let n = chain.basis.ncols();
    let cols: Vec<_> = (0..n).rev().map(|k| chain.basis.column(k).into_owned()).collect();
    if cols.is_empty() {
        CMat::zeros(0, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real;
    use crate::matfun::{PiecewiseMatrixFunction, Segment};
    use crate::Interval;

    fn three_drop() -> StorageCandidate {
        let q = PiecewiseMatrixFunction::new(
            vec![
                Segment::expressions(0.0, 1.0, 3, 3, &["1", "0", "0", "0", "1 - t", "0", "0", "0", "2 - t"]).unwrap(),
                Segment::expressions(1.0, 2.0, 3, 3, &["1", "0", "0", "0", "0", "0", "0", "0", "2 - t"]).unwrap(),
                Segment::expressions(2.0, 3.0, 3, 3, &["1", "0", "0", "0", "0", "0", "0", "0", "0"]).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        StorageCandidate::from_piecewise(q).unwrap()
    }

    #[test]
    fn three_drop_profile_and_chain() {
        let q = three_drop();
        let g = TimeGrid::uniform(q.domain(), 30);
        let p = rank_profile(&q, &g, 1e-12).unwrap();
        assert_eq!(p.drop_times, vec![1.0, 2.0]);
        assert_eq!(p.interval_ranks, vec![3, 2, 1]);
        assert!(p.is_weakly_decreasing());
        let c = kernel_chain(&q, &p, 1e-12).unwrap();
        assert_eq!(c.sizes(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn zero_candidate_has_rank_zero() {
        let q = PiecewiseMatrixFunction::constant(&CMat::zeros(2, 2), Interval::new(0.0, 1.0).unwrap());
        let q = StorageCandidate::from_piecewise(q).unwrap();
        let p = rank_profile(&q, &TimeGrid::uniform(q.domain(), 8), 1e-12).unwrap();
        assert!(p.drop_times.is_empty());
        assert_eq!(p.interval_ranks, vec![0]);
    }

    #[test]
    fn continuous_drop_is_bisected() {
        let times = vec![0.0, 0.5, 1.0, 2.0];
        let values = [1.0, 0.5, 0.0, 0.0]
            .iter()
            .map(|&v| from_real(2, 2, &[1.0, 0.0, 0.0, v]))
            .collect();
        let s = Segment::sampled(0.0, 2.0, times, values).unwrap();
        let q = StorageCandidate::from_piecewise(PiecewiseMatrixFunction::new(vec![s], vec![]).unwrap()).unwrap();
        let g = TimeGrid::uniform(q.domain(), 7);
        let p = rank_profile(&q, &g, 1e-12).unwrap();
        assert_eq!(p.drops.len(), 1);
        assert!((p.drop_times[0] - 1.0).abs() <= 2e-6);
        assert!(!p.drops[0].at_breakpoint);
        assert_eq!(p.interval_ranks, vec![2, 1]);
    }

    #[test]
    fn increasing_rank_is_rejected() {
        let q = PiecewiseMatrixFunction::new(
            vec![
                Segment::expressions(0.0, 1.0, 1, 1, &["0"]).unwrap(),
                Segment::expressions(1.0, 2.0, 1, 1, &["1"]).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        let q = StorageCandidate::from_piecewise(q).unwrap();
        let r = rank_profile(&q, &TimeGrid::uniform(q.domain(), 4), 1e-12);
        assert!(matches!(r, Err(Error::NonMonotoneRank { .. })));
    }
}
