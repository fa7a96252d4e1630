use bconvex_core::bconvex::{BAffinePiece, BConvexFunction};
use bconvex_core::benefit::BenefitFunction;
use bconvex_core::domain::{Grid, Placement, Region};
use bconvex_core::expr::{Expr, Scope};
use bconvex_core::regularity::{c11_scan, kink_scan};
use bconvex_core::solver::{perturbation_audit, price_menu, solve, Method, ProblemSpec, SolverOptions};
use std::sync::Arc;

fn closed_form(x: f64) -> f64 {
    if x >= 0.5 {
        x * x - x + 0.25
    } else {
        0.0
    }
}

fn spec(nodes: usize, opts: SolverOptions) -> ProblemSpec {
    let x = Region::unit_box(1);
    let y = Region::new(vec![-0.25], vec![1.25], None).unwrap();
    let b = Arc::new(BenefitFunction::bilinear(x.clone(), y).unwrap());
    let grid = Grid::new(x, vec![nodes], Placement::CellCentered).unwrap();
    ProblemSpec::new(
        b,
        grid,
        Expr::parse("1", 1, Scope::X).unwrap(),
        1.0,
        Expr::parse("y1^2/2", 1, Scope::Y).unwrap(),
        BAffinePiece::null(vec![0.0], 0.0),
        opts,
    )
    .unwrap()
}

#[test]
fn convex_solver_on_256_nodes() {
    let spec = spec(256, SolverOptions::new(1));
    let sol = solve(&spec).unwrap();
    assert!(sol.converged);
    assert!((sol.L_value + 1.0 / 12.0).abs() <= 1e-3, "{}", sol.L_value);
    let err = (0..spec.grid().len())
        .map(|k| (sol.u_values[k] - closed_form(spec.grid().point(k)[0])).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-2, "{err}");
    for w in sol.iterate_log.windows(2) {
        assert!(w[1].l <= w[0].l);
    }
    assert!(sol.iterate_log[0].l >= sol.L_value);

    let kink = kink_scan(&sol.u, spec.grid()).unwrap();
    assert!((kink.boundary - 0.5).abs() <= 2.0 / 256.0, "{:?}", kink.boundary);

    let audit = perturbation_audit(&spec, &sol, 200, 3);
    assert!(audit.worst_margin >= -1e-4, "{}", audit.worst_margin);

    let pm = price_menu(&spec, &sol).unwrap();
    assert!(pm.null_defect.abs() < 1e-9);
    assert!(pm.active_defect < 1e-9);
}

#[test]
fn solver_is_deterministic_and_menu_round_trips() {
    let s = spec(128, SolverOptions::new(1));
    let a = solve(&s).unwrap();
    let b = solve(&s).unwrap();
    assert_eq!(a.L_value.to_bits(), b.L_value.to_bits());
    assert_eq!(a.assignment, b.assignment);
    let text = a.u.to_json().to_string();
    let back = BConvexFunction::from_json(s.benefit().clone(), &text).unwrap();
    assert_eq!(s.evaluate_L(&back).to_bits(), a.L_value.to_bits());
}

#[test]
fn capped_and_descent_methods_agree_roughly() {
    let mut o = SolverOptions::new(1);
    o.max_pieces = Some(32);
    o.menu_size = 32;
    let capped = solve(&spec(128, o.clone())).unwrap();
    assert!(capped.u.len() <= 33);
    assert!((capped.L_value + 1.0 / 12.0).abs() <= 5e-3, "{}", capped.L_value);

    o.method = Method::Descent;
    o.multi_start = 1;
    o.tolerances.max_outer_iters = 60;
    let d = solve(&spec(128, o)).unwrap();
    assert!((d.L_value + 1.0 / 12.0).abs() <= 1e-2, "{}", d.L_value);
}

#[test]
fn optimum_has_bounded_curvature_ratio() {
    let s = spec(512, SolverOptions::new(1));
    let sol = solve(&s).unwrap();
    let x0s: Vec<Vec<f64>> = (1..10).map(|i| vec![i as f64 / 10.0]).collect();
    let c = c11_scan(&sol.u, &x0s, &[0.02, 0.04]).unwrap();
    assert!(c.max_ratio > 0.9 && c.max_ratio < 1.25, "{}", c.max_ratio);
}
