//! Extinction below E0 and propagation above it, one run per reaction rate.

use treefront::front::*;
use treefront::pde::*;
use treefront::spectral::e0_homogeneous;
use treefront::RegularTree;

fn main() -> treefront::Result<()> {
    let tree = RegularTree::homogeneous(2, 1.0)?;
    let e0 = e0_homogeneous(2, 1.0)?;
    let ratios = [0.6, 0.8, 1.2, 1.5];
    let a: Vec<f64> = ratios.iter().map(|x| x * e0).collect();
    let sim = SimParams {
        generations: 960,
        cells_per_edge: 8,
        bc: BoundaryCondition::Dirichlet0,
        solve: SolveParams {
            t_final: 1600.0,
            dt: 0.2,
            theta: 1.0,
            snapshot_every: 20.0,
        },
    };
    let u0 = InitialData::Indicator {
        radius: 1.0,
        amplitude: 0.1,
    };
    let (_, rows) = threshold_scan(&tree, &a, &u0, &sim)?;
    for row in rows {
        println!(
            "a/E0 = {:.1}  {:?}  decay rate {:?}",
            row.a_over_e0, row.verdict, row.decay_rate
        );
    }
    Ok(())
}
