//! Available storage of `ẋ = −x + u`, `y = x` by growing horizons and
//! input resolutions, and the matrix recovered by polarization.

use ltvpass::avstor::{available_storage, polarization_recover, AvstorSampler, HorizonPolicy};
use ltvpass::{corpus, CVec, Tolerances, C64};

fn main() -> ltvpass::Result<()> {
    let tol = Tolerances::default();
    let sys = corpus::system("scalar-lti")?.system;
    let policy = HorizonPolicy::default();

    let x0 = CVec::from_element(1, C64::new(1.0, 0.0));
    let est = available_storage(&sys, 0.0, &x0, &policy, &tol)?;
    println!("{:>8} {:>6} {:>6} {:>12}", "action", "T", "cells", "value");
    for s in &est.stages {
        println!("{:>8?} {:>6} {:>6} {:>12.6}", s.action, s.horizon, s.cells, s.value.unwrap_or(f64::NAN));
    }
    println!("stop: {:?}, estimate {:.6} (exact ½)", est.stop_reason, est.value().unwrap_or(f64::NAN));

    let pol = polarization_recover(&AvstorSampler::new(&sys, 0.0, policy.clone(), tol.clone()), 0.05)?;
    println!("Q_a ≈ {:.5}", pol.q[(0, 0)].re);

    let anti = corpus::system("anti-passive")?.system;
    let est = available_storage(&anti, 0.0, &x0, &policy, &tol)?;
    println!("y = −u: unbounded {}", est.unbounded);
    Ok(())
}
