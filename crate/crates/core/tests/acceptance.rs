//! End-to-end acceptance run. Prints one line per criterion and exits with
//! a nonzero status if any of them fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use ltvpass::avstor::{
    available_storage, polarization_recover, quadratic_identity_audit, AvstorSampler, HorizonPolicy,
};
use ltvpass::corpus;
use ltvpass::loewner::{check_weak_decrease, q_along_flow};
use ltvpass::matfun::MatrixFunction;
use ltvpass::nsd::{nsd_unitary, rank_profile};
use ltvpass::storage::{dissipation_check, kernel_condition_check, TrialSpec, Verdict};
use ltvpass::{CVec, FundamentalSolution, TimeGrid, Tolerances, C64};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, secs: u64) -> Result<(), String> {
    ensure(elapsed <= Duration::from_secs(secs), || format!("took {:.1} s, budget {secs} s", elapsed.as_secs_f64()))
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn scalar_example() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let sys = corpus::system("scalar-example").map_err(e)?.system;
    let q = corpus::storage("scalar-example").map_err(e)?.candidate().map_err(e)?;
    let dom = sys.interval();
    let x = FundamentalSolution::compute(&sys.a, 0.0, dom, &tol).map_err(e)?;
    let mut worst: f64 = 0.0;
    for k in 1..=500 {
        let t = 5.0 * k as f64 / 500.0;
        let exact = 1.0 / (1.0 + t * t);
        let got = x.eval(t).map_err(e)?[(0, 0)];
        worst = worst.max((got - C64::new(exact, 0.0)).norm() / exact);
    }
    ensure(worst <= 1e-6, || format!("fundamental solution relative error {worst:e}"))?;

    let grid = TimeGrid::uniform(dom, 200);
    let qx = q_along_flow(&q, &x).map_err(e)?;
    let ptol = qx.psd_tolerance(&grid, &tol).map_err(e)?;
    let rep = check_weak_decrease(&qx, &grid, ptol).map_err(e)?;
    ensure(rep.is_decreasing(), || "X*QX is not weakly decreasing".into())?;

    let u = nsd_unitary(&sys.a, &q, 0.0, &grid, &tol).map_err(e)?;
    ensure(u.qhat_decreasing() == Some(false), || format!("unitary factor Q̂ decreasing = {:?}", u.qhat_decreasing()))?;
    within_budget(start.elapsed(), 5)?;
    Ok(format!("max rel err {worst:.2e}, Q̂ flagged, {:.2} s", start.elapsed().as_secs_f64()))
}

fn mass_spring_damper() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let sys = corpus::system("msd").map_err(e)?.system;
    let q = corpus::storage("msd").map_err(e)?.candidate().map_err(e)?;
    let grid = TimeGrid::uniform(sys.interval(), 200);

    let rel = tol.rank(q.dim(), q.function().accuracy());
    let p = rank_profile(&q, &grid, rel).map_err(e)?;
    ensure(p.drop_times.len() == 1 && (p.drop_times[0] - 1.0).abs() <= 1e-5, || {
        format!("drop times {:?}", p.drop_times)
    })?;
    ensure(p.interval_ranks == [2, 1], || format!("ranks {:?}", p.interval_ranks))?;

    let k = kernel_condition_check(&sys, &q, &grid, &tol).map_err(e)?;
    let worst_res = k
        .records
        .iter()
        .map(|r| r.max_flow_residual.max(r.max_output_residual))
        .fold(0.0, f64::max);
    ensure(k.passed && worst_res <= 1e-8, || format!("kernel condition {}, residual {worst_res:e}", k.passed))?;

    let jump = q
        .jump_table()
        .iter()
        .find(|j| j.time == 1.0)
        .map(|j| j.total_jump()[(0, 0)])
        .ok_or("no jump at t = 1")?;
    ensure(jump == C64::new(-1.0 / 3.0, 0.0), || format!("jump of k at 1 is {jump}"))?;

    let spec = TrialSpec::default();
    let d = dissipation_check(&sys, &q, &spec, &grid, &tol).map_err(e)?;
    let straddling = d.trials.iter().filter(|t| t.t0 < 1.0 && t.t1 > 1.0).count();
    ensure(d.trials.len() == 200 && d.verdict == Verdict::Holds, || format!("verdict {:?} over {}", d.verdict, d.trials.len()))?;
    ensure(d.worst_slack >= -1e-6, || format!("worst slack {:e}", d.worst_slack))?;
    ensure(straddling > 0, || "no trial window straddles t = 1".into())?;
    within_budget(start.elapsed(), 60)?;
    Ok(format!(
        "drop at {:.7}, jump −1/3, worst slack {:.2e}, {straddling} straddling, {:.2} s",
        p.drop_times[0],
        d.worst_slack,
        start.elapsed().as_secs_f64()
    ))
}

fn available_storage_lti() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let sys = corpus::system("scalar-lti").map_err(e)?.system;
    let policy = HorizonPolicy::default();
    ensure(policy.max_horizon == 16.0 && policy.max_cells == 256, || "unexpected policy caps".into())?;
    let x0 = CVec::from_element(1, C64::new(1.0, 0.0));
    let est = available_storage(&sys, 0.0, &x0, &policy, &tol).map_err(e)?;
    let v = est.value().ok_or("estimate reported unbounded")?;
    ensure((v - 0.5).abs() <= 0.02 * 0.5, || format!("V_a = {v}"))?;

    let sampler = AvstorSampler::new(&sys, 0.0, policy, tol);
    let pol = polarization_recover(&sampler, 0.05).map_err(e)?;
    let qa = pol.q[(0, 0)];
    ensure((qa - C64::new(1.0, 0.0)).norm() <= 0.02, || format!("Q_a = {qa}"))?;
    let audit = quadratic_identity_audit(&sampler, 4, 0.05, ltvpass::storage::DEFAULT_SEED).map_err(e)?;
    ensure(audit.passed, || format!("identity audit defects {:e} / {:e}", audit.max_scaling_defect, audit.max_parallelogram_defect))?;
    within_budget(start.elapsed(), 120)?;
    Ok(format!(
        "V_a = {v:.5} ({:?}), Q_a = {:.5}, identity ok, {:.2} s",
        est.stop_reason,
        qa.re,
        start.elapsed().as_secs_f64()
    ))
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let suites: [(&str, fn(u64) -> common::Check); 7] = [
        ("kernel chain", common::prop_kernel_chain),
        ("rank sequence", common::prop_rank_sequence),
        ("zero block", common::prop_zero_block),
        ("QL", common::prop_ql),
        ("variation of constants", common::prop_voc),
        ("congruence", common::prop_congruence),
        ("AC split", common::prop_ac_split),
    ];
    let mut failures = Vec::new();
    for (name, f) in suites {
        for seed in 0..20 {
            if let Err(msg) = f(seed) {
                failures.push(format!("{name}: {msg}"));
            }
        }
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("7 suites × 20 seeds, {:.2} s", start.elapsed().as_secs_f64()))
}

fn soundness_necessity() -> Outcome {
    let start = Instant::now();
    let (mut certified, mut failures) = (0, Vec::new());
    for seed in 0..24 {
        match common::soundness(seed, 40)? {
            Some(true) => certified += 1,
            Some(false) => failures.push(format!("seed {seed}: certified but trials violated")),
            None => {}
        }
    }
    ensure(certified >= 10, || format!("only {certified} instances certified pointwise"))?;
    let mut found = 0;
    for seed in 0..12 {
        match common::necessity(seed) {
            Ok(_) => found += 1,
            Err(msg) => failures.push(msg),
        }
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!(
        "{certified} certified systems hold, {found}/12 kernel failures violated, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn run_cli(args: &[&str], out: &Path) -> Result<(i32, Vec<u8>), String> {
    let mut full = vec!["ltvpass", "--out-dir", out.to_str().unwrap()];
    full.extend_from_slice(args);
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = ltvpass::cli::run(full, &mut stdout, &mut stderr);
    if code == 1 {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&stderr)));
    }
    Ok((code, stdout))
}

fn dir_contents(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map_err(e)?
        .map(|entry| {
            let p = entry.map_err(e)?.path();
            Ok((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).map_err(e)?))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let commands: [&[&str]; 4] = [
        &["--system", "corpus:msd", "audit", "--trials", "60"],
        &["--system", "corpus:three-drop", "nsd"],
        &["--system", "corpus:scalar-lti", "avstor", "--max-horizon", "4", "--max-cells", "64", "--polarize"],
        &["--system", "corpus:msd-position", "audit", "--trials", "20"],
    ];
    let mut compared = 0;
    for args in commands {
        let (a, b) = (tempfile::tempdir().map_err(e)?, tempfile::tempdir().map_err(e)?);
        let first = run_cli(args, a.path())?;
        let second = run_cli(args, b.path())?;
        ensure(first == second, || format!("{args:?}: stdout or exit code differs"))?;
        let (fa, fb) = (dir_contents(a.path())?, dir_contents(b.path())?);
        ensure(!fa.is_empty() && fa == fb, || format!("{args:?}: output files differ"))?;
        compared += fa.len();
    }
    Ok(format!("4 commands, {compared} files byte-identical, {:.2} s", start.elapsed().as_secs_f64()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("scalar example", scalar_example),
        ("mass-spring-damper", mass_spring_damper),
        ("available storage", available_storage_lti),
        ("property suites", property_suites),
        ("soundness and necessity", soundness_necessity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
