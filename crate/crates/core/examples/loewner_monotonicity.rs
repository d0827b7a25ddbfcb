//! Loewner-order monotonicity and jump bookkeeping of a storage candidate.

use ltvpass::corpus;
use ltvpass::loewner::{auc_check, check_weak_decrease, q_along_flow};
use ltvpass::{FundamentalSolution, TimeGrid, Tolerances};

fn main() -> ltvpass::Result<()> {
    let tol = Tolerances::default();

    // Spring stiffness decreasing to zero with a jump at t = 1.
    let q = corpus::storage("msd")?.candidate()?;
    let grid = TimeGrid::uniform(q.domain(), 200);
    let ptol = q.psd_tolerance(&grid, &tol)?;
    let rep = check_weak_decrease(&q, &grid, ptol)?;
    println!("msd energy weakly decreasing: {}", rep.is_decreasing());
    for j in q.jump_table() {
        println!("  jump at t = {}: Δk = {}", j.time, j.total_jump()[(0, 0)].re);
    }
    println!("  AUC: {}", auc_check(&q, &grid, ptol)?.is_auc);

    // 1 + t² grows, yet it is transported into a decreasing function by
    // the flow of A(t) = −2t/(1+t²).
    let sys = corpus::system("scalar-example")?.system;
    let q = corpus::storage("scalar-example")?.candidate()?;
    let grid = TimeGrid::uniform(q.domain(), 200);
    let plain = check_weak_decrease(&q, &grid, q.psd_tolerance(&grid, &tol)?)?;
    let x = FundamentalSolution::compute(&sys.a, 0.0, sys.interval(), &tol)?;
    let qx = q_along_flow(&q, &x)?;
    let along = check_weak_decrease(&qx, &grid, qx.psd_tolerance(&grid, &tol)?)?;
    println!("1 + t² decreasing: {}  (first witness {:?})", plain.is_decreasing(), plain.derivative_witnesses.first());
    println!("X* (1 + t²) X decreasing: {}", along.is_decreasing());
    Ok(())
}
