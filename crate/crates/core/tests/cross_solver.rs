//! The explicit-tree solver, the radial solver and the eigen solver must agree.

use treefront::front::{log_sup_slope, simulate, SimParams};
use treefront::pde::*;
use treefront::spectral::principal_eigenvalue_truncated;
use treefront::{logistic, Nonlinearity, RegularTree};

fn params(t_final: f64, dt: f64) -> SolveParams {
    SolveParams {
        t_final,
        dt,
        theta: 1.0,
        snapshot_every: 0.5,
    }
}

fn max_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .flat_map(|(x, y)| x.values.iter().zip(&y.values).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn irregular_tree_reduces_to_half_line() {
    let tree = RegularTree::new(vec![1, 2, 3, 3, 4], vec![0.0, 0.8, 1.5, 2.1, 2.6]).unwrap();
    let f = logistic(0.8).unwrap();
    let u0 = InitialData::Samples {
        rho: vec![0.0, 1.0, 2.0],
        values: vec![0.6, 0.3, 0.0],
    };
    for bc in [BoundaryCondition::Dirichlet0, BoundaryCondition::Neumann] {
        let exp = tree.expand(4, 1 << 12).unwrap();
        let full = make_grid_full_tree(&exp, 8, bc).unwrap();
        let half = make_grid_half_line(&tree, 4, 8, bc).unwrap();
        let p = params(5.0, 0.02);
        let tf = solve(&full, &u0.sample(&full, &tree, &f).unwrap(), &f, &p).unwrap();
        let th = solve(&half, &u0.sample(&half, &tree, &f).unwrap(), &f, &p).unwrap();
        let (sym, asym) = symmetrize(&full, &tf, &half).unwrap();
        assert!(asym < 1e-12, "radial data stayed radial: {asym}");
        let d = max_diff(&sym, &th);
        assert!(d < 1e-10, "{bc:?}: {d}");
    }
}

#[test]
fn crank_nicolson_also_reduces() {
    let tree = RegularTree::homogeneous(3, 1.0).unwrap();
    let f = Nonlinearity::zero();
    let u0 = InitialData::Indicator {
        radius: 1.5,
        amplitude: 0.5,
    };
    let exp = tree.expand(4, 1 << 12).unwrap();
    let full = make_grid_full_tree(&exp, 6, BoundaryCondition::Neumann).unwrap();
    let half = make_grid_half_line(&tree, 4, 6, BoundaryCondition::Neumann).unwrap();
    let mut p = params(2.0, 0.001);
    p.theta = 0.5;
    let tf = solve(&full, &u0.sample(&full, &tree, &f).unwrap(), &f, &p).unwrap();
    let th = solve(&half, &u0.sample(&half, &tree, &f).unwrap(), &f, &p).unwrap();
    let (sym, _) = symmetrize(&full, &tf, &half).unwrap();
    assert!(max_diff(&sym, &th) < 1e-10);
}

#[test]
fn heat_flow_decays_at_the_truncated_eigenvalue() {
    let tree = RegularTree::homogeneous(2, 1.0).unwrap();
    let (n, cpe) = (6, 16);
    let ev = principal_eigenvalue_truncated(&tree, n, cpe).unwrap();
    let sim = SimParams {
        generations: n,
        cells_per_edge: cpe,
        bc: BoundaryCondition::Dirichlet0,
        solve: params(80.0, 0.01),
    };
    let u0 = InitialData::Indicator {
        radius: 1.0,
        amplitude: 1.0,
    };
    let (_, traj) = simulate(&tree, &Nonlinearity::zero(), &u0, &sim).unwrap();
    let slope = log_sup_slope(&traj, 40.0, 80.0).unwrap();
    // backward Euler damps e^{−λt} to (1 + λ dt)^{−t/dt}
    let want = -(1.0 + ev.lambda * 0.01).ln() / 0.01;
    assert!(
        (slope - want).abs() < 1e-4 * want.abs(),
        "{slope} vs {want}"
    );
}

#[test]
fn eigenvector_is_a_discrete_steady_mode() {
    let tree = RegularTree::homogeneous(3, 0.7).unwrap();
    let ev = principal_eigenvalue_truncated(&tree, 5, 12).unwrap();
    let grid = make_grid_half_line(&tree, 5, 12, BoundaryCondition::Dirichlet0).unwrap();
    let ku = grid.stiffness_apply(&ev.vector);
    for ((k, m), v) in ku.iter().zip(grid.mass()).zip(&ev.vector) {
        assert!((k - ev.lambda * m * v).abs() < 1e-9 * m.max(1.0));
    }
}
