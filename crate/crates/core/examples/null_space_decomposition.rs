//! Rank profiles and null space decompositions.

use ltvpass::corpus;
use ltvpass::nsd::{nsd_constant, nsd_flow, nsd_unitary};
use ltvpass::{TimeGrid, Tolerances};

fn main() -> ltvpass::Result<()> {
    let tol = Tolerances::default();

    let sys = corpus::system("three-drop")?.system;
    let q = corpus::storage("three-drop")?.candidate()?;
    let grid = TimeGrid::uniform(q.domain(), 120);

    let c = nsd_constant(&q, &grid, &tol)?;
    println!("drops {:?}, ranks {:?}", c.drop_times(), c.rank_profile.interval_ranks);
    println!("kernel chain sizes {:?}", c.chain.sizes());
    println!("V0 =\n{:.3}", c.v0);
    println!("largest trailing block entry {:.2e}", c.check.max_zero_block);

    let f = nsd_flow(&sys.a, &q, 0.0, &grid, &tol)?;
    println!("flow variant: drops {:?}, valid {}", f.drop_times(), f.is_valid());

    // The QL factor of X V0 is unitary, but U* Q U need not decrease.
    let sys = corpus::system("scalar-example")?.system;
    let q = corpus::storage("scalar-example")?.candidate()?;
    let grid = TimeGrid::uniform(q.domain(), 200);
    let u = nsd_unitary(&sys.a, &q, 0.0, &grid, &tol)?;
    println!(
        "scalar example: Q̃ decreasing {}, Q̂ decreasing {:?}",
        u.qtilde_report.is_decreasing(),
        u.qhat_decreasing()
    );
    Ok(())
}
