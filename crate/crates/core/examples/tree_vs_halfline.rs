//! The explicit tree and its radial reduction give the same radial solution.

use treefront::pde::*;
use treefront::{logistic, RegularTree};

fn main() -> treefront::Result<()> {
    let tree = RegularTree::homogeneous(2, 1.0)?;
    let f = logistic(0.5)?;
    let (gens, cpe) = (8, 16);
    let bc = BoundaryCondition::Neumann;
    let params = SolveParams {
        t_final: 10.0,
        dt: 0.01,
        theta: 1.0,
        snapshot_every: 1.0,
    };
    let u0 = InitialData::Indicator {
        radius: 2.0,
        amplitude: 0.3,
    };

    let exp = tree.expand(gens, 1 << 20)?;
    let full = make_grid_full_tree(&exp, cpe, bc)?;
    let half = make_grid_half_line(&tree, gens, cpe, bc)?;
    let on_tree = solve(&full, &u0.sample(&full, &tree, &f)?, &f, &params)?;
    let radial = solve(&half, &u0.sample(&half, &tree, &f)?, &f, &params)?;
    let (sym, asym) = symmetrize(&full, &on_tree, &half)?;

    println!(
        "{} edges, {} tree cells, {} radial cells",
        exp.edges.len(),
        full.n_cells(),
        half.n_cells()
    );
    for (a, b) in sym.snapshots.iter().zip(&radial.snapshots) {
        let d = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        println!("t = {:>4.1}  max |tree − radial| = {d:.2e}", a.t);
    }
    println!("largest spread within a generation: {asym:.2e}");
    Ok(())
}
