//! Dissipation audit of the mass-spring-damper storage candidate, and the
//! violation constructed when the kernel condition fails.

use ltvpass::corpus;
use ltvpass::storage::{
    adversarial_kernel_trial, dissipation_check, pointwise_supply_check, storage_regularity_audit, TrialSpec,
};
use ltvpass::{TimeGrid, Tolerances};

fn main() -> ltvpass::Result<()> {
    let tol = Tolerances::default();

    let sys = corpus::system("msd")?.system;
    let q = corpus::storage("msd")?.candidate()?;
    let grid = TimeGrid::uniform(sys.interval(), 200);
    let audit = storage_regularity_audit(&q, &sys, &grid, &tol)?;
    for step in &audit.steps {
        println!("{:<28} {}  {}", step.name, if step.passed { "ok  " } else { "FAIL" }, step.detail);
    }
    let d = dissipation_check(&sys, &q, &TrialSpec::default(), &grid, &tol)?;
    println!(
        "dissipation: {:?} over {} trials, worst slack {:.3e}",
        d.verdict,
        d.trials.len(),
        d.worst_slack
    );
    let pw = pointwise_supply_check(&sys, &q, &grid, &tol)?;
    println!("pointwise certificate: {:?} (max eigenvalue {:.3e})", pw.verdict, pw.max_eig);

    // Measuring position instead of velocity breaks the kernel condition
    // once the spring has vanished.
    let sys = corpus::system("msd-position")?.system;
    let audit = storage_regularity_audit(&q, &sys, &grid, &tol)?;
    println!("\nposition output: first failure {:?}", audit.first_failure);
    if let Some(w) = audit.kernel.as_ref().and_then(|k| k.witnesses.first()) {
        let adv = adversarial_kernel_trial(&sys, &q, w, 12, &tol)?;
        if let Some(t) = &adv.trial {
            println!(
                "constructed violation with λ = {:e}: lhs {:.4e} > rhs {:.4e} on [{:.3}, {:.3}]",
                adv.lambda, t.lhs, t.rhs, t.t0, t.t1
            );
        }
    }
    Ok(())
}
