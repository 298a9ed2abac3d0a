//! Empirical front speed at two resolutions next to the closed-form bounds.

use treefront::front::*;
use treefront::pde::*;
use treefront::{logistic, RegularTree};

fn main() -> treefront::Result<()> {
    let tree = RegularTree::homogeneous(2, 1.0)?;
    let f = logistic(1.0)?;
    let sim = SimParams {
        generations: 160,
        cells_per_edge: 8,
        bc: BoundaryCondition::Dirichlet0,
        solve: SolveParams {
            t_final: 60.0,
            dt: 0.02,
            theta: 1.0,
            snapshot_every: 0.5,
        },
    };
    let u0 = InitialData::Indicator {
        radius: 1.0,
        amplitude: 1.0,
    };
    let rep = speed_vs_bounds(&tree, &f, &u0, &sim, DEFAULT_LEVEL)?;
    println!(
        "c_emp coarse = {:.4} ± {:.1e}",
        rep.coarse.c_emp, rep.coarse.stderr
    );
    println!(
        "c_emp fine   = {:.4} ± {:.1e}",
        rep.fine.c_emp, rep.fine.stderr
    );
    println!(
        "spread {:.2}%, agree: {}",
        100.0 * rep.resolution_spread,
        rep.resolutions_agree
    );
    println!("č = {:?}, ĉ = {:.4}", rep.c_check, rep.c_hat);
    println!(
        "above 0.9·č: {:?}, below 1.1·ĉ: {}",
        rep.above_lower, rep.below_upper
    );
    if let Some(note) = &rep.note {
        println!("note: {note}");
    }
    Ok(())
}
