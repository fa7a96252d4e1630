use bconvex_core::bconvex::{
    b_transform_u, b_transform_v, bconvex_envelope, BAffinePiece, BConvexFunction, GridFunction,
};
use bconvex_core::benefit::{fuzz_b3, fuzz_loeper, BenefitFunction};
use bconvex_core::domain::{Ball, Grid, Placement, Region};
use bconvex_core::transforms::{verify_lemma2, TildeChart};
use proptest::prelude::*;
use std::sync::Arc;

fn boxes(dim: usize) -> (Region, Region) {
    let x = Region::new(vec![-1.0; dim], vec![1.0; dim], None).unwrap();
    let y = Region::new(vec![-1.5; dim], vec![1.5; dim], None).unwrap();
    (x, y)
}

fn families(dim: usize) -> Vec<Arc<BenefitFunction>> {
    let (x, y) = boxes(dim);
    vec![
        Arc::new(BenefitFunction::bilinear(x.clone(), y.clone()).unwrap()),
        Arc::new(BenefitFunction::quadratic_distance(x, y).unwrap()),
    ]
}

fn y_lattice(dim: usize, per_axis: usize) -> Vec<f64> {
    let (_, y) = boxes(dim);
    Grid::new(y, vec![per_axis; dim], Placement::Vertex)
        .unwrap()
        .coords()
        .to_vec()
}

fn menu_strategy(dim: usize) -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    prop::collection::vec((prop::collection::vec(-1.4f64..1.4, dim), -1.0f64..1.0), 1..12)
}

fn menu(b: &Arc<BenefitFunction>, raw: &[(Vec<f64>, f64)]) -> BConvexFunction {
    let dim = b.dim();
    let mut pieces = vec![BAffinePiece::null(vec![0.0; dim], 0.0)];
    pieces.extend(raw.iter().map(|(y, a)| BAffinePiece::new(y.clone(), *a)));
    BConvexFunction::new(b.clone(), pieces).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn envelope_is_idempotent_and_below(vals in prop::collection::vec(-1.0f64..1.0, 33), fam in 0usize..2) {
        let b = &families(1)[fam];
        let g = Grid::new(b.x_domain().clone(), vec![33], Placement::Vertex).unwrap();
        let u = GridFunction::from_grid(&g, vals);
        let ys = y_lattice(1, 121);
        let e = bconvex_envelope(b, &u, &ys);
        let twice = bconvex_envelope(b, &e, &ys);
        for k in 0..g.len() {
            prop_assert!(e.values()[k] <= u.values()[k] + 1e-14);
            prop_assert!((twice.values()[k] - e.values()[k]).abs() <= 1e-14 * (1.0 + e.values()[k].abs()));
        }
    }

    #[test]
    fn transforms_are_non_expansive(
        a in prop::collection::vec(-1.0f64..1.0, 81),
        d in prop::collection::vec(-0.3f64..0.3, 81),
        fam in 0usize..2,
    ) {
        let b = &families(2)[fam];
        let g = Grid::new(b.x_domain().clone(), vec![9, 9], Placement::Vertex).unwrap();
        let u1 = GridFunction::from_grid(&g, a.clone());
        let u2 = GridFunction::from_grid(&g, a.iter().zip(&d).map(|(x, y)| x + y).collect());
        let sup = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ys = y_lattice(2, 11);
        let (v1, v2) = (b_transform_v(b, &u1, &ys), b_transform_v(b, &u2, &ys));
        for j in 0..v1.len() {
            prop_assert!((v1.values()[j] - v2.values()[j]).abs() <= sup + 1e-12);
        }
        let (w1, w2) = (b_transform_u(b, &v1, g.coords()), b_transform_u(b, &v2, g.coords()));
        for k in 0..g.len() {
            prop_assert!((w1.values()[k] - w2.values()[k]).abs() <= sup + 1e-12);
            prop_assert!(w1.values()[k] <= u1.values()[k] + 1e-12);
        }
    }

    #[test]
    fn sampled_menus_are_envelope_fixed_points(raw in menu_strategy(2), fam in 0usize..2) {
        let b = &families(2)[fam];
        let u = menu(b, &raw);
        let g = Grid::new(b.x_domain().clone(), vec![12, 12], Placement::CellCentered).unwrap();
        let s = u.sample(&g);
        let ys: Vec<f64> = u.pieces().iter().flat_map(|p| p.y.clone()).collect();
        let e = bconvex_envelope(b, &s, &ys);
        for k in 0..g.len() {
            prop_assert!((e.values()[k] - s.values()[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn tilde_u_is_midpoint_convex(raw in menu_strategy(2), fam in 0usize..2, seed in 0u64..1000, x0 in prop::collection::vec(-0.9f64..0.9, 2)) {
        let b = &families(2)[fam];
        let u = menu(b, &raw);
        let chart = TildeChart::at_support(&u, &x0).unwrap();
        let r = verify_lemma2(&chart, &u, 200, seed);
        prop_assert_eq!(r.probes, 200);
        prop_assert!(r.min_midpoint_defect >= -1e-8, "{}", r.min_midpoint_defect);
        prop_assert!(r.section_defect <= 1e-8);
    }
}

#[test]
fn b3_and_loeper_on_1000_tuples() {
    for dim in [1, 2] {
        for b in families(dim) {
            let r = fuzz_b3(&b, 1000, 11);
            assert_eq!(r.failures, 0);
            assert!(r.worst_value.abs() <= 1e-6, "{:?} {}", b.family(), r.worst_value);
            let (r, sd) = fuzz_loeper(&b, 1000, 11);
            assert_eq!(r.failures, 0);
            assert!(r.worst_value <= 1e-8, "{:?} {}", b.family(), r.worst_value);
            assert!(sd >= -1e-8);
        }
    }
}

#[test]
fn masked_grid_keeps_quadrature_inside_ball() {
    let x = Region::new(
        vec![-1.0; 2],
        vec![1.0; 2],
        Some(Ball {
            center: vec![0.0; 2],
            radius: 1.0,
        }),
    )
    .unwrap();
    let g = Grid::new(x, vec![64, 64], Placement::CellCentered).unwrap();
    let area = g.len() as f64 * g.cell_volume();
    assert!((area - std::f64::consts::PI).abs() < 0.02, "{area}");
}
