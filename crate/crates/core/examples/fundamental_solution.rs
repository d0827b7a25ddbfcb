//! Fundamental solution of `ẋ = −2t/(1+t²) x` and a forced trajectory.
//!
//! Run with `cargo run --example fundamental_solution`.

use ltvpass::corpus;
use ltvpass::odeflow::{solve_inhomogeneous, verify_variation_of_constants};
use ltvpass::{CVec, FundamentalSolution, Interval, MatrixFunction, PiecewiseConstantInput, Tolerances, C64};

fn main() -> ltvpass::Result<()> {
    let tol = Tolerances::default();
    let sys = corpus::system("scalar-example")?.system;
    let x = FundamentalSolution::compute(&sys.a, 0.0, sys.interval(), &tol)?;

    println!("{:>6} {:>14} {:>14} {:>10}", "t", "X(t)", "1/(1+t²)", "rel err");
    for t in [0.5, 1.0, 2.0, 3.0, 5.0] {
        let got = x.eval(t)?[(0, 0)].re;
        let exact = 1.0 / (1.0 + t * t);
        println!("{t:>6.2} {got:>14.10} {exact:>14.10} {:>10.2e}", (got - exact).abs() / exact);
    }
    let d = x.diagnostics();
    println!("{} accepted steps, max ‖X X⁻¹ − I‖ = {:.1e}", d.stats.accepted, d.max_inverse_residual);

    // Forced response from t = 0 with a staircase input, checked against
    // the variation of constants formula.
    let span = Interval::new(0.0, 5.0)?;
    let steps: Vec<CVec> = (0..20).map(|k| CVec::from_element(1, C64::new((k as f64 * 0.7).sin(), 0.0))).collect();
    let u = PiecewiseConstantInput::uniform(span, steps)?;
    let traj = solve_inhomogeneous(&sys, 0.0, &CVec::from_element(1, C64::new(1.0, 0.0)), &u, span, &tol)?;
    let voc = verify_variation_of_constants(&sys, &x, &traj, 0.0, &tol)?;
    println!("variation of constants: max deviation {:.2e} over {} nodes", voc.max_deviation, voc.nodes);
    Ok(())
}
