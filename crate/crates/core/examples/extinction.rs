//! Small data die out below E0: simulation against the exponential envelope.

use treefront::barriers::*;
use treefront::front::*;
use treefront::pde::*;
use treefront::{logistic, RegularTree};

fn main() -> treefront::Result<()> {
    let tree = RegularTree::homogeneous(2, 1.0)?;
    let f = logistic(0.05)?;
    let g = build_g(2, 1.0, 0.08, None)?;
    let env = build_extinction_envelope_kpp(&g, &f)?;
    let sim = SimParams {
        generations: 120,
        cells_per_edge: 16,
        bc: BoundaryCondition::Dirichlet0,
        solve: SolveParams {
            t_final: 200.0,
            dt: 0.05,
            theta: 1.0,
            snapshot_every: 20.0,
        },
    };
    let u0 = InitialData::Barrier {
        barrier: BarrierSpec::G {
            lambda: 0.08,
            alpha: None,
        },
        scale: 1.0,
    };
    let (_, traj) = simulate(&tree, &f, &u0, &sim)?;
    for s in &traj.snapshots {
        println!(
            "t = {:>5.0}  ‖u‖∞ = {:.3e}  envelope bound {:.3e}",
            s.t,
            s.sup_norm(),
            env.sup_bound(s.t)
        );
    }
    let c = classify(&traj, DEFAULT_EPS_EXT, DEFAULT_EPS_PROP);
    println!("verdict {:?}, decay rate {:?}", c.verdict, c.decay_rate);
    Ok(())
}
