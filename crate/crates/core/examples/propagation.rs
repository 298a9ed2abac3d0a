//! Above E0 a small bump invades the tree and the root value tends to 1.

use treefront::front::*;
use treefront::pde::*;
use treefront::{logistic, RegularTree};

fn main() -> treefront::Result<()> {
    let tree = RegularTree::homogeneous(2, 1.0)?;
    let f = logistic(0.5)?;
    let sim = SimParams {
        generations: 200,
        cells_per_edge: 8,
        bc: BoundaryCondition::Dirichlet0,
        solve: SolveParams {
            t_final: 120.0,
            dt: 0.05,
            theta: 1.0,
            snapshot_every: 10.0,
        },
    };
    let u0 = InitialData::Indicator {
        radius: 1.0,
        amplitude: 0.1,
    };
    let (grid, traj) = simulate(&tree, &f, &u0, &sim)?;
    for s in &traj.snapshots {
        let front = level_position(grid.centers(), &s.values, 0.5);
        println!(
            "t = {:>4.0}  u(0) = {:.6}  front at {:?}",
            s.t, s.values[0], front
        );
    }
    println!(
        "verdict {:?}",
        classify(&traj, DEFAULT_EPS_EXT, DEFAULT_EPS_PROP).verdict
    );
    Ok(())
}
