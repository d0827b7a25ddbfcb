//! Seeded instance generators and property checks shared by the acceptance
//! run and the proptest suite.

#![allow(dead_code)]

use std::sync::Arc;

use ltvpass::linalg::{identity, max_abs, min_eigenvalue, spectral_norm};
use ltvpass::loewner::{congruence, StorageCandidate};
use ltvpass::matfun::{MatrixFunction, PiecewiseMatrixFunction, Segment};
use ltvpass::nsd::{kernel_chain, nsd_constant, ql_factor, rank_profile};
use ltvpass::odeflow::{solve_inhomogeneous, verify_variation_of_constants};
use ltvpass::storage::{
    adversarial_kernel_trial, dissipation_check, kernel_condition_check, pointwise_supply_check, TrialSpec, Verdict,
};
use ltvpass::{CMat, FundamentalSolution, Interval, LtvSystem, PiecewiseConstantInput, TimeGrid, Tolerances, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Haar-ish unitary from the QL factor of a random matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    loop {
        if let Ok((u, _)) = ql_factor(&random_complex(rng, n, n), 1e-6) {
            return u;
        }
    }
}

fn hermitian(m: CMat) -> CMat {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn lit(z: C64) -> String {
    format!("({:?} + {:?}i)", z.re, z.im)
}

/// Segment whose entries are `α_ij + β_ij·t`.
fn affine_segment(start: f64, end: f64, alpha: &CMat, beta: &CMat) -> Segment {
    let (r, c) = alpha.shape();
    let src: Vec<String> = (0..r * c)
        .map(|k| {
            let (i, j) = (k / c, k % c);
            format!("{} + {}*t", lit(alpha[(i, j)]), lit(beta[(i, j)]))
        })
        .collect();
    let refs: Vec<&str> = src.iter().map(String::as_str).collect();
    Segment::expressions(start, end, r, c, &refs).expect("affine segment")
}

/// Segment whose entries are `α_ij · (p + s·t)^k`.
fn scaled_segment(start: f64, end: f64, alpha: &CMat, p: f64, s: f64, k: i32) -> Segment {
    let (r, c) = alpha.shape();
    let src: Vec<String> = (0..r * c)
        .map(|idx| format!("{} * ({:?} + {:?}*t)^{k}", lit(alpha[(idx / c, idx % c)]), p, s))
        .collect();
    let refs: Vec<&str> = src.iter().map(String::as_str).collect();
    Segment::expressions(start, end, r, c, &refs).expect("scaled segment")
}

/// Weakly decreasing `Q = S diag(d(t)) S*` on `[0, 3]` with unitary `S`.
/// Each `d_k` is affine and nonincreasing, and either stays positive, falls
/// linearly to zero, or jumps to zero.
pub struct DecreasingInstance {
    pub q: StorageCandidate,
    pub n: usize,
    pub expected_final_rank: usize,
}

pub fn decreasing_candidate(seed: u64) -> DecreasingInstance {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=4);
    let domain = Interval::new(0.0, 3.0).unwrap();
    let s = random_unitary(&mut rng, n);
    // (value at 0, slope, drop time, continuous?)
    let mut kinds = Vec::new();
    for _ in 0..n {
        let c = rng.gen_range(0.5..2.0);
        match rng.gen_range(0..3) {
            0 => kinds.push((c, -rng.gen_range(0.0..0.1), None, false)),
            1 => {
                let tau = rng.gen_range(0.3..2.7_f64);
                let tau = (tau * 64.0).round() / 64.0;
                kinds.push((c, -c / tau, Some(tau), true));
            }
            _ => {
                let tau = (rng.gen_range(0.3..2.7_f64) * 64.0).round() / 64.0;
                kinds.push((c, -rng.gen_range(0.0..0.1), Some(tau), false));
            }
        }
    }
    let mut bps: Vec<f64> = kinds.iter().filter_map(|k| k.2).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let mut edges = vec![domain.start];
    edges.extend(bps.iter().copied());
    edges.push(domain.end);
    let segments: Vec<Segment> = edges
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
            for (k, &(c, slope, tau, _)) in kinds.iter().enumerate() {
                if tau.is_none_or(|tau| mid < tau) {
                    a[k] = c;
                    b[k] = slope;
                }
            }
            let da = CMat::from_diagonal(&ltvpass::CVec::from_iterator(n, a.iter().map(|&v| C64::new(v, 0.0))));
            let db = CMat::from_diagonal(&ltvpass::CVec::from_iterator(n, b.iter().map(|&v| C64::new(v, 0.0))));
            affine_segment(w[0], w[1], &hermitian(&s * da * s.adjoint()), &hermitian(&s * db * s.adjoint()))
        })
        .collect();
    let q = PiecewiseMatrixFunction::new(segments, vec![]).unwrap();
    let expected_final_rank = kinds.iter().filter(|k| k.2.is_none()).count();
    DecreasingInstance {
        q: StorageCandidate::from_piecewise(q).unwrap(),
        n,
        expected_final_rank,
    }
}

fn rank_rel(q: &StorageCandidate, tol: &Tolerances) -> f64 {
    tol.rank(q.dim(), q.function().accuracy()).max(1e-10)
}

/// Kernel-chain nesting residuals stay below the rank threshold.
pub fn prop_kernel_chain(seed: u64) -> Check {
    let inst = decreasing_candidate(seed);
    let tol = Tolerances::default();
    let grid = TimeGrid::uniform(inst.q.domain(), 48);
    let rel = rank_rel(&inst.q, &tol);
    let p = rank_profile(&inst.q, &grid, rel).map_err(|e| e.to_string())?;
    let c = kernel_chain(&inst.q, &p, rel).map_err(|e| e.to_string())?;
    if c.max_residual > p.threshold {
        return Err(format!("seed {seed}: chain residual {:e} > {:e}", c.max_residual, p.threshold));
    }
    Ok(format!("residual {:e}", c.max_residual))
}

/// Interleaved rank sequence is weakly decreasing and ends at the number of
/// entries that never vanish.
pub fn prop_rank_sequence(seed: u64) -> Check {
    let inst = decreasing_candidate(seed);
    let tol = Tolerances::default();
    let grid = TimeGrid::uniform(inst.q.domain(), 48);
    let p = rank_profile(&inst.q, &grid, rank_rel(&inst.q, &tol)).map_err(|e| e.to_string())?;
    if !p.sequence.windows(2).all(|w| w[1] <= w[0]) {
        return Err(format!("seed {seed}: sequence {:?}", p.sequence));
    }
    if *p.interval_ranks.last().unwrap() != inst.expected_final_rank {
        return Err(format!(
            "seed {seed}: final rank {} expected {}",
            p.interval_ranks.last().unwrap(),
            inst.expected_final_rank
        ));
    }
    Ok(format!("{:?}", p.sequence))
}

/// Trailing block of `V0* Q V0` vanishes to the rank threshold.
pub fn prop_zero_block(seed: u64) -> Check {
    let inst = decreasing_candidate(seed);
    let tol = Tolerances::default();
    let grid = TimeGrid::uniform(inst.q.domain(), 48);
    let r = nsd_constant(&inst.q, &grid, &tol).map_err(|e| e.to_string())?;
    let bound = r.check.zero_block_tolerance;
    if r.check.max_zero_block > bound || !r.check.zero_block_ok {
        return Err(format!("seed {seed}: zero block {:e} > {:e}", r.check.max_zero_block, bound));
    }
    if !r.check.leading_block_definite {
        return Err(format!("seed {seed}: leading block not definite ({:e})", r.check.min_leading_eig));
    }
    Ok(format!("{:e}", r.check.max_zero_block))
}

/// `U L = V`, `U* U = I` to 1e-10, `L` lower triangular with positive
/// diagonal.
pub fn prop_ql(seed: u64) -> Check {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=4);
    let v = random_complex(&mut rng, n, n) + identity(n) * C64::new(0.5, 0.0);
    let (u, l) = ql_factor(&v, 1e-12).map_err(|e| e.to_string())?;
    let rec = max_abs(&(&u * &l - &v)) / spectral_norm(&v);
    let uni = max_abs(&(u.adjoint() * &u - identity(n)));
    let lower = (0..n).all(|i| l[(i, i)].re > 0.0 && l[(i, i)].im == 0.0 && (i + 1..n).all(|j| l[(i, j)] == C64::new(0.0, 0.0)));
    if rec > 1e-10 || uni > 1e-10 || !lower {
        return Err(format!("seed {seed}: reassembly {rec:e}, unitarity {uni:e}, lower {lower}"));
    }
    Ok(format!("{rec:e} {uni:e}"))
}

/// Random system on `[0, 2]` with affine entries and a breakpoint at 1.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LtvSystem {
    let pw = |rng: &mut ChaCha8Rng, r: usize, c: usize| {
        let segs = [(0.0, 1.0), (1.0, 2.0)]
            .iter()
            .map(|&(a, b)| affine_segment(a, b, &random_complex(rng, r, c), &(random_complex(rng, r, c) * C64::new(0.5, 0.0))))
            .collect();
        PiecewiseMatrixFunction::new(segs, vec![]).unwrap()
    };
    let a = pw(rng, n, n);
    let b = pw(rng, n, m);
    let c = pw(rng, m, n);
    let d = pw(rng, m, m);
    LtvSystem::new(a, b, c, d).unwrap()
}

/// Direct integration agrees with variation of constants to 1e-7.
pub fn prop_voc(seed: u64) -> Check {
    let mut rng = rng(seed);
    let (n, m) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
    let sys = random_system(&mut rng, n, m);
    let dom = sys.interval();
    let tol = Tolerances::default();
    let t0 = rng.gen_range(0.0..0.5);
    let span = Interval::new(t0, dom.end).unwrap();
    let u = PiecewiseConstantInput::random(&mut rng, m, span, 6, 1.0);
    let x0 = random_complex(&mut rng, n, 1).column(0).into_owned();
    let traj = solve_inhomogeneous(&sys, t0, &x0, &u, span, &tol).map_err(|e| e.to_string())?;
    let anchor = rng.gen_range(0.0..2.0);
    let flow = FundamentalSolution::compute(&sys.a, anchor, dom, &tol).map_err(|e| e.to_string())?;
    let r = verify_variation_of_constants(&sys, &flow, &traj, t0, &tol).map_err(|e| e.to_string())?;
    if r.max_deviation > 1e-7 {
        return Err(format!("seed {seed}: deviation {:e}", r.max_deviation));
    }
    Ok(format!("{:e}", r.max_deviation))
}

/// `V* Q V` stays PSD for PSD `Q` and arbitrary `V`.
pub fn prop_congruence(seed: u64) -> Check {
    let inst = decreasing_candidate(seed);
    let mut rng = rng(seed ^ 0x5eed);
    let n = inst.n;
    let dom = inst.q.domain();
    let v = PiecewiseMatrixFunction::new(
        vec![affine_segment(dom.start, dom.end, &random_complex(&mut rng, n, n), &random_complex(&mut rng, n, n))],
        vec![],
    )
    .unwrap();
    let c = congruence(&inst.q, Arc::new(v)).map_err(|e| e.to_string())?;
    let mut worst = f64::INFINITY;
    for k in 0..=60 {
        let t = dom.start + dom.length() * k as f64 / 60.0;
        for m in [c.function().left_limit(t), c.function().eval(t), c.function().right_limit(t)] {
            let m = m.map_err(|e| e.to_string())?;
            let e = min_eigenvalue(&m) / (1.0 + spectral_norm(&m));
            worst = worst.min(e);
        }
    }
    if worst < -1e-12 {
        return Err(format!("seed {seed}: min eigenvalue {worst:e}"));
    }
    Ok(format!("{worst:e}"))
}

/// `Q_ac + Q_s = Q` at nodes and one-sided limits.
pub fn prop_ac_split(seed: u64) -> Check {
    let inst = decreasing_candidate(seed);
    let q = &inst.q;
    let (ac, sg) = (q.ac_part(), q.singular_part());
    let dom = q.domain();
    let mut ts: Vec<f64> = (0..=50).map(|k| dom.start + dom.length() * k as f64 / 50.0).collect();
    ts.extend(q.breakpoints());
    let mut worst: f64 = 0.0;
    for t in ts {
        let pairs = [
            (ac.eval(t), sg.eval(t), q.eval(t)),
            (ac.left_limit(t), sg.left_limit(t), q.function().left_limit(t)),
            (ac.right_limit(t), sg.right_limit(t), q.function().right_limit(t)),
        ];
        for (a, s, full) in pairs {
            let (a, s, full) = (a.map_err(|e| e.to_string())?, s.map_err(|e| e.to_string())?, full.map_err(|e| e.to_string())?);
            worst = worst.max(max_abs(&(a + s - &full)) / (1.0 + spectral_norm(&full)));
        }
    }
    if worst > 1e-14 {
        return Err(format!("seed {seed}: split defect {worst:e}"));
    }
    Ok(format!("{worst:e}"))
}

/// Port-Hamiltonian system `A = P⁻¹(J − R)/φ`, `C = φ B* P`, `Q = φ P` with
/// `φ` positive and decreasing, `J` skew-Hermitian, `R ⪰ 0`, `D + D* ⪰ 0`.
/// With `perturb`, `C` receives a random perturbation.
pub fn port_hamiltonian(seed: u64, perturb: bool) -> (LtvSystem, StorageCandidate) {
    let mut rng = rng(seed);
    let (n, m) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
    let s = random_unitary(&mut rng, n);
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let p = &s * CMat::from_diagonal(&ltvpass::CVec::from_iterator(n, d.iter().map(|&v| C64::new(v, 0.0)))) * s.adjoint();
    let pinv = p.clone().try_inverse().unwrap();
    let g = random_complex(&mut rng, n, n);
    let j = (&g - g.adjoint()) * C64::new(0.5, 0.0);
    let h = random_complex(&mut rng, n, n) * C64::new(0.5, 0.0);
    let r = &h * h.adjoint();
    let b = random_complex(&mut rng, n, m);
    let f = random_complex(&mut rng, m, m) * C64::new(0.5, 0.0);
    let k = random_complex(&mut rng, m, m);
    let dmat = &f * f.adjoint() + (&k - k.adjoint()) * C64::new(0.5, 0.0);
    let slope = -rng.gen_range(0.0..0.2);
    // φ = 1 + slope·t on [0, τ), 0.8 (1 + slope·t) on [τ, 2]
    let tau = 1.0;
    let dom = Interval::new(0.0, 2.0).unwrap();
    let phis = [(0.0, tau, 1.0), (tau, 2.0, 0.8)];
    let a_core = &pinv * (&j - &r);
    let c_core = b.adjoint() * &p;
    let noise = if perturb { random_complex(&mut rng, m, n) } else { CMat::zeros(m, n) };
    let a = PiecewiseMatrixFunction::new(
        phis.iter().map(|&(lo, hi, sc)| scaled_segment(lo, hi, &(&a_core / C64::new(sc, 0.0)), 1.0, slope, -1)).collect(),
        vec![],
    )
    .unwrap();
    let c_segs: Vec<Segment> = phis
        .iter()
        .map(|&(lo, hi, sc)| {
            let base = scaled_segment(lo, hi, &(&c_core * C64::new(sc, 0.0)), 1.0, slope, 1);
            if perturb {
                let src: Vec<String> = (0..m * n)
                    .map(|idx| {
                        let (i, jj) = (idx / n, idx % n);
                        format!("{} * (1.0 + {:?}*t) + {}", lit(c_core[(i, jj)] * sc), slope, lit(noise[(i, jj)]))
                    })
                    .collect();
                let refs: Vec<&str> = src.iter().map(String::as_str).collect();
                Segment::expressions(lo, hi, m, n, &refs).unwrap()
            } else {
                base
            }
        })
        .collect();
    let c = PiecewiseMatrixFunction::new(c_segs, vec![]).unwrap();
    let q = PiecewiseMatrixFunction::new(
        phis.iter().map(|&(lo, hi, sc)| scaled_segment(lo, hi, &(&p * C64::new(sc, 0.0)), 1.0, slope, 1)).collect(),
        vec![],
    )
    .unwrap();
    let sys = LtvSystem::new(
        a,
        PiecewiseMatrixFunction::constant(&b, dom),
        c,
        PiecewiseMatrixFunction::constant(&dmat, dom),
    )
    .unwrap();
    (sys, StorageCandidate::from_piecewise(q).unwrap())
}

/// Outcome of the soundness coupling on one instance: `None` if the
/// pointwise certificate does not hold, otherwise whether the dissipation
/// trials agree.
pub fn soundness(seed: u64, trials: usize) -> Result<Option<bool>, String> {
    let (sys, q) = port_hamiltonian(seed, seed % 4 == 3);
    let tol = Tolerances::default();
    let grid = TimeGrid::uniform(sys.interval(), 40);
    let pw = pointwise_supply_check(&sys, &q, &grid, &tol).map_err(|e| e.to_string())?;
    if pw.verdict != Verdict::Holds {
        return Ok(None);
    }
    let spec = TrialSpec {
        trials,
        seed,
        ..TrialSpec::default()
    };
    let d = dissipation_check(&sys, &q, &spec, &grid, &tol).map_err(|e| e.to_string())?;
    Ok(Some(d.verdict == Verdict::Holds))
}

/// System on `[0, 2]` with `Q = diag(P, 0)` and a kernel direction `e_n`
/// that violates `ker Q ⊆ ker(QA + Q') ∩ ker C`. Odd seeds keep `C e_n = 0`
/// and fail only through `A`.
pub fn kernel_failure(seed: u64) -> (LtvSystem, StorageCandidate) {
    let mut rng = rng(seed);
    let n = rng.gen_range(2..=3);
    let m = rng.gen_range(1..=2);
    let dom = Interval::new(0.0, 2.0).unwrap();
    let mut a = random_complex(&mut rng, n, n);
    let mut c = random_complex(&mut rng, m, n);
    if seed % 2 == 1 {
        for i in 0..m {
            c[(i, n - 1)] = C64::new(0.0, 0.0);
        }
        a[(0, n - 1)] += C64::new(1.0, 0.0);
    }
    let b = random_complex(&mut rng, n, m);
    let d = random_complex(&mut rng, m, m);
    let mut qm = CMat::zeros(n, n);
    let s = random_unitary(&mut rng, n - 1);
    let dd: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.5..2.0)).collect();
    let p = &s * CMat::from_diagonal(&ltvpass::CVec::from_iterator(n - 1, dd.iter().map(|&v| C64::new(v, 0.0)))) * s.adjoint();
    qm.view_mut((0, 0), (n - 1, n - 1)).copy_from(&p);
    let sys = LtvSystem::constant(&a, &b, &c, &d, dom).unwrap();
    (sys, StorageCandidate::from_piecewise(PiecewiseMatrixFunction::constant(&qm, dom)).unwrap())
}

/// Kernel condition fails and the adversarial construction finds a
/// violation.
pub fn necessity(seed: u64) -> Check {
    let (sys, q) = kernel_failure(seed);
    let tol = Tolerances::default();
    let grid = TimeGrid::uniform(sys.interval(), 20);
    let k = kernel_condition_check(&sys, &q, &grid, &tol).map_err(|e| e.to_string())?;
    if k.passed || k.witnesses.is_empty() {
        return Err(format!("seed {seed}: kernel condition unexpectedly passed"));
    }
    let adv = adversarial_kernel_trial(&sys, &q, &k.witnesses[0], 12, &tol).map_err(|e| e.to_string())?;
    if !adv.found {
        return Err(format!("seed {seed}: no violation within the λ scan ({} attempts)", adv.attempts));
    }
    Ok(format!("λ = {:e}", adv.lambda))
}
