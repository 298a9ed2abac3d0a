//! Invariants checked on random inputs.

use proptest::prelude::*;

use treefront::barriers::{build_g, build_h_tilde, h_tilde_k_max, verify_barrier};
use treefront::front::level_position;
use treefront::output::fmt_g17;
use treefront::pde::{make_grid_full_tree, make_grid_half_line, BoundaryCondition, Stepper};
use treefront::spectral::{e0_homogeneous, speed_bounds};
use treefront::{logistic, Nonlinearity, RegularTree};

fn random_tree() -> impl Strategy<Value = RegularTree> {
    (
        prop::collection::vec(2u32..4, 4),
        prop::collection::vec(0.3f64..1.5, 5),
    )
        .prop_map(|(bs, gaps)| {
            let mut b = vec![1];
            b.extend(bs);
            let mut rho = vec![0.0];
            for g in gaps {
                rho.push(rho.last().unwrap() + g);
            }
            RegularTree::new(b, rho).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn expansion_counts(tree in random_tree(), g in 1usize..5) {
        let exp = tree.expand(g, 1 << 16).unwrap();
        let want: f64 = (0..g).map(|n| tree.product(n).unwrap()).sum();
        prop_assert_eq!(exp.edges.len() as f64, want);
        prop_assert_eq!(exp.vertices.len(), exp.edges.len() + 1);
        for v in &exp.vertices {
            if v.generation > 0 && v.generation < g {
                prop_assert_eq!(exp.out_degree(v.id) as u32, tree.b(v.generation).unwrap());
                prop_assert_eq!(exp.in_degree(v.id), 1);
            }
        }
        for e in &exp.edges {
            let want = tree.gap(e.generation).unwrap();
            prop_assert!((e.length - want).abs() < 1e-12);
        }
    }

    #[test]
    fn solver_preserves_order_on_any_tree(
        tree in random_tree(),
        a in 0.05f64..3.0,
        dt_frac in 0.01f64..1.0,
        seeds in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 16),
        full in any::<bool>(),
    ) {
        let f = logistic(a).unwrap();
        let grid = if full {
            make_grid_full_tree(&tree.expand(3, 1 << 12).unwrap(), 4, BoundaryCondition::Dirichlet0).unwrap()
        } else {
            make_grid_half_line(&tree, 5, 4, BoundaryCondition::Neumann).unwrap()
        };
        let n = grid.n_cells();
        let (mut u, mut v): (Vec<f64>, Vec<f64>) =
            (0..n).map(|i| { let (x, y) = seeds[i % seeds.len()]; (x.min(y), x.max(y)) }).unzip();
        let dt = dt_frac / treefront::reaction::lipschitz_bound(&f);
        let stepper = Stepper::new(&grid, &f, dt, 1.0).unwrap();
        for _ in 0..5 {
            u = stepper.step(&u).unwrap();
            v = stepper.step(&v).unwrap();
            prop_assert!(u.iter().zip(&v).all(|(x, y)| x <= y));
            prop_assert!(u.iter().chain(&v).all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn neumann_heat_flow_conserves_weighted_mass(
        tree in random_tree(),
        seeds in prop::collection::vec(0.0f64..1.0, 12),
    ) {
        let grid = make_grid_half_line(&tree, 5, 4, BoundaryCondition::Neumann).unwrap();
        let zero = Nonlinearity::zero();
        let mut u: Vec<f64> = (0..grid.n_cells()).map(|i| seeds[i % seeds.len()]).collect();
        let before = grid.weighted_mass(&u);
        let stepper = Stepper::new(&grid, &zero, 0.1, 1.0).unwrap();
        for _ in 0..20 {
            u = stepper.step(&u).unwrap();
        }
        prop_assert!((grid.weighted_mass(&u) - before).abs() <= 1e-12 * before.max(1.0));
    }

    #[test]
    fn level_position_is_monotone_in_the_profile(
        xs in prop::collection::vec(0.0f64..1.0, 40),
        lift in prop::collection::vec(0.0f64..0.3, 40),
        level in 0.1f64..0.9,
    ) {
        // nonincreasing profiles u ≤ v
        let mut u = xs.clone();
        u.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let v: Vec<f64> = u.iter().zip(&lift).map(|(x, l)| (x + l).min(1.0)).collect();
        let mut v_sorted = v.clone();
        v_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let centers: Vec<f64> = (0..40).map(|i| 0.5 + i as f64).collect();
        if let (Some(pu), Some(pv)) = (level_position(&centers, &u, level), level_position(&centers, &v_sorted, level)) {
            prop_assert!(pu <= pv + 1e-12, "{pu} > {pv}");
        }
    }

    #[test]
    fn g17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = fmt_g17(x);
        prop_assert_eq!(s.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn e0_and_c_check_scale_with_edge_length(b in 2u32..8, r in 0.2f64..3.0, a in 1.0f64..4.0) {
        let e = e0_homogeneous(b, r).unwrap();
        let e2 = e0_homogeneous(b, 2.0 * r).unwrap();
        prop_assert!((e2 - e / 4.0).abs() <= 1e-14 * e);
        let c = speed_bounds(&RegularTree::homogeneous(b, r).unwrap(), &logistic(a).unwrap(), None).unwrap();
        let c2 = speed_bounds(&RegularTree::homogeneous(b, 2.0 * r).unwrap(), &logistic(a / 4.0).unwrap(), None).unwrap();
        if let (Some(x), Some(y)) = (c.c_check, c2.c_check) {
            prop_assert!((y - x / 2.0).abs() <= 1e-12 * x);
        }
    }

    #[test]
    fn g_and_h_tilde_identities_hold(b in 2u32..6, r in 0.3f64..2.0, frac in 0.05f64..0.95, kf in 0.05f64..0.95) {
        let e0 = e0_homogeneous(b, r).unwrap();
        let g = build_g(b, r, frac * e0, None).unwrap();
        let rep = verify_barrier(&g, None, None, 16).unwrap();
        prop_assert!(rep.passed());
        let ht = build_h_tilde(b, r, 0.5, 1.5, kf * h_tilde_k_max(b, 0.5, 1.5)).unwrap();
        prop_assert!(verify_barrier(&ht, None, None, 16).unwrap().passed());
    }
}
