//! The principal's problem: minimize the quadrature loss
//! `L[u] = sum_k [c(Yu(x_k)) - b(x_k, Yu(x_k)) + u(x_k)] f(x_k) |cell|`
//! over finite menus that keep the frozen null piece.

pub mod convex;
pub mod descent;
pub mod ipm;
pub mod polish;
pub mod skyline;

use crate::bconvex::{b_transform_v, BAffinePiece, BConvexFunction, GridFunction};
use crate::benefit::{sample_inset, BenefitFunction};
use crate::domain::{Grid, Placement, Region};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::numeric::pairwise_sum;
use polish::MenuState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Node-wise convex program, then exact intercept sweeps.
    Convex,
    /// Block coordinate descent over piece parameters with restarts.
    Descent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rel_decrease_tol: f64,
    pub max_outer_iters: usize,
    /// Pattern step floor for descent, relative to the diameter of X.
    pub fd_param_step: f64,
    pub audit_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel_decrease_tol: 1e-9,
            max_outer_iters: 200,
            fd_param_step: 1e-5,
            audit_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Size of the initial menu; also the cardinality target of descent.
    pub menu_size: usize,
    /// Cap on non-null pieces after the convex stage; `None` keeps up to one
    /// piece per node.
    pub max_pieces: Option<usize>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub method: Method,
    pub multi_start: usize,
    /// Vertex lattice on Y for the reported price menu.
    pub price_grid: Vec<usize>,
}

impl SolverOptions {
    pub fn new(dim: usize) -> Self {
        SolverOptions {
            menu_size: 64,
            max_pieces: None,
            seed: 0,
            tolerances: Tolerances::default(),
            method: Method::Convex,
            multi_start: 4,
            price_grid: vec![if dim == 1 { 257 } else { 65 }; dim],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    benefit: Arc<BenefitFunction>,
    grid: Grid,
    density: Expr,
    lambda: f64,
    cost: Expr,
    null_piece: BAffinePiece,
    options: SolverOptions,
    weights: Vec<f64>,
    mass: f64,
    gate: f64,
}

impl ProblemSpec {
    pub fn new(
        benefit: Arc<BenefitFunction>,
        grid: Grid,
        density: Expr,
        lambda: f64,
        cost: Expr,
        null_piece: BAffinePiece,
        options: SolverOptions,
    ) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if grid.dim() != benefit.dim() {
            return Err(Error::Config("grid and benefit dimensions differ".into()));
        }
        for k in 0..grid.len() {
            benefit.x_domain().check("X", grid.point(k))?;
        }
        if null_piece.y.len() != benefit.dim() || !null_piece.a.is_finite() {
            return Err(Error::Config("null_product has the wrong dimension".into()));
        }
        benefit.y_domain().check("Y", &null_piece.y)?;
        let null_piece = BAffinePiece {
            frozen: true,
            ..null_piece
        };
        if options.price_grid.len() != benefit.dim() {
            return Err(Error::Config("price_grid needs one count per axis".into()));
        }
        let vol = grid.cell_volume();
        let mut weights = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let f = density.eval(grid.point(k), &[]);
            if !f.is_finite() || f < lambda {
                return Err(Error::Config(format!(
                    "density f = {f} at {:?} falls below lambda = {lambda}",
                    grid.point(k)
                )));
            }
            weights.push(f * vol);
        }
        let mass = pairwise_sum(&weights);
        let mut spec = ProblemSpec {
            benefit,
            grid,
            density,
            lambda,
            cost,
            null_piece,
            options,
            weights,
            mass,
            gate: 0.0,
        };
        spec.gate = spec.admissibility()?;
        if !(spec.gate > 0.0) {
            return Err(Error::Admissibility(format!(
                "cost is not uniformly b*-convex: c(Y(x,p)) - b(x,Y(x,p)) has p-Hessian eigenvalue {:.6e} <= 0",
                spec.gate
            )));
        }
        Ok(spec)
    }

    // Sampled minimum eigenvalue of the p-Hessian of c(Y(x,p)) - b(x,Y(x,p)).
    fn admissibility(&self) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let stride = (self.grid.len() / 16).max(1);
        let xs: Vec<Vec<f64>> = (0..self.grid.len())
            .step_by(stride)
            .map(|k| self.grid.point(k).to_vec())
            .collect();
        let mut worst = f64::INFINITY;
        for x in &xs {
            let ps: Vec<Vec<f64>> = (0..4)
                .map(|_| {
                    self.benefit
                        .bx(x, &sample_inset(self.benefit.y_domain(), 0.1, &mut rng))
                })
                .collect();
            let c = |y: &[f64]| self.cost_of(y);
            let v = self
                .benefit
                .check_uniform_bstar_convexity(&c, std::slice::from_ref(x), &ps)?;
            worst = worst.min(v);
        }
        Ok(worst)
    }

    /// Same problem with different solver options.
    pub fn with_options(&self, options: SolverOptions) -> Result<Self> {
        if options.price_grid.len() != self.benefit.dim() {
            return Err(Error::Config("price_grid needs one count per axis".into()));
        }
        Ok(ProblemSpec {
            options,
            ..self.clone()
        })
    }

    pub fn benefit(&self) -> &Arc<BenefitFunction> {
        &self.benefit
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn density(&self) -> &Expr {
        &self.density
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cost(&self) -> &Expr {
        &self.cost
    }

    pub fn null_piece(&self) -> &BAffinePiece {
        &self.null_piece
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.options.tolerances
    }

    /// Quadrature weights `f(x_k) |cell|`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Minimum sampled eigenvalue from the b*-convexity gate.
    pub fn admissibility_margin(&self) -> f64 {
        self.gate
    }

    #[inline]
    pub fn cost_of(&self, y: &[f64]) -> f64 {
        self.cost.eval(&[], y)
    }

    pub fn null_menu(&self) -> BConvexFunction {
        BConvexFunction::null_only(self.benefit.clone(), self.null_piece.clone()).unwrap()
    }

    /// Per-node integrand `c(y_w) + a_w`, which equals
    /// `c(Yu) - b(x, Yu) + u` at every node.
    pub fn integrand(&self, u: &BConvexFunction, winners: &[usize]) -> Vec<f64> {
        let ca: Vec<f64> = u.pieces().iter().map(|p| self.cost_of(&p.y) + p.a).collect();
        winners.iter().map(|&w| ca[w]).collect()
    }

    #[allow(non_snake_case)]
    pub fn evaluate_L(&self, u: &BConvexFunction) -> f64 {
        let (_, winners) = u.on_grid(&self.grid);
        self.loss_from_winners(u, &winners)
    }

    fn loss_from_winners(&self, u: &BConvexFunction, winners: &[usize]) -> f64 {
        let terms: Vec<f64> = self
            .integrand(u, winners)
            .iter()
            .zip(&self.weights)
            .map(|(g, w)| g * w)
            .collect();
        pairwise_sum(&terms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    pub iter: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub pieces: usize,
}

#[derive(Debug, Clone)]
#[allow(non_snake_case)]
pub struct Solution {
    pub u: BConvexFunction,
    pub u_values: Vec<f64>,
    pub assignment: Vec<usize>,
    pub L_value: f64,
    pub profit: f64,
    pub iterate_log: Vec<IterateRecord>,
    pub converged: bool,
    pub iterations: usize,
}

impl Solution {
    pub fn from_menu(spec: &ProblemSpec, u: BConvexFunction, iterate_log: Vec<IterateRecord>, converged: bool) -> Self {
        let (u_values, assignment) = u.on_grid(spec.grid());
        let l = spec.loss_from_winners(&u, &assignment);
        let iterations = iterate_log.len().saturating_sub(1);
        Solution {
            u,
            u_values,
            assignment,
            L_value: l,
            profit: -l,
            iterate_log,
            converged,
            iterations,
        }
    }

    /// Quadrature mass assigned to each piece.
    pub fn piece_mass(&self, spec: &ProblemSpec) -> Vec<f64> {
        let mut m = vec![0.0; self.u.len()];
        for (k, &w) in self.assignment.iter().enumerate() {
            m[w] += spec.weights()[k];
        }
        m
    }
}

/// Null piece plus `n` products on a Halton sequence over the product box,
/// each priced at `v0(y) = max_x b(x, y) - u_null(x)` so that the initial
/// utility equals the null utility.
pub fn initial_menu(spec: &ProblemSpec, n: usize, seed: u64) -> Result<BConvexFunction> {
    let b = spec.benefit();
    let ydom = b.y_domain();
    let null = spec.null_menu();
    let u0 = null.sample(spec.grid());
    let mut ys = Vec::with_capacity(n);
    let mut i = 1 + seed.wrapping_mul(7919) % 100_003;
    while ys.len() < n {
        let h = crate::numeric::halton(i, b.dim());
        let y: Vec<f64> = (0..b.dim()).map(|d| ydom.lo()[d] + h[d] * ydom.width(d)).collect();
        if ydom.contains(&y) {
            ys.push(y);
        }
        i += 1;
    }
    let flat: Vec<f64> = ys.iter().flatten().cloned().collect();
    let v0 = b_transform_v(b, &u0, &flat);
    let mut pieces = vec![spec.null_piece().clone()];
    for (y, v) in ys.into_iter().zip(v0.values()) {
        pieces.push(BAffinePiece::new(y, -v));
    }
    BConvexFunction::new(b.clone(), pieces)
}

pub fn solve(spec: &ProblemSpec) -> Result<Solution> {
    match spec.options.method {
        Method::Convex => solve_convex(spec),
        Method::Descent => descent::solve_descent(spec),
    }
}

/// Relative intercept window for settling ties after the convex stage.
const TIE_WINDOW: f64 = 1e-7;

fn solve_convex(spec: &ProblemSpec) -> Result<Solution> {
    let tol = spec.tolerances();
    let init = initial_menu(spec, spec.options.menu_size, spec.options.seed)?;
    let mut log = vec![IterateRecord {
        iter: 0,
        l: spec.evaluate_L(&init),
        pieces: init.len(),
    }];

    let nodes = convex::solve_nodewise(spec)?;
    let mut menu = convex::menu_from_nodes(spec, &nodes)?;
    let capped = match spec.options.max_pieces {
        Some(cap) if menu.len() > cap + 1 => {
            menu = cap_menu(spec, &menu, cap)?;
            true
        }
        _ => false,
    };
    let mut l = spec.evaluate_L(&menu);
    if l > log[0].l {
        // never report a worse iterate than the start
        menu = init;
        l = log[0].l;
    }
    log.push(IterateRecord {
        iter: 1,
        l,
        pieces: menu.len(),
    });

    // The node-wise optimum leaves many incentive constraints tight, so the
    // menu is full of near-ties; intercept moves inside a tiny window hand
    // each tie to the cheaper piece, then every intercept drops to the least
    // value that keeps the nodes it wins. A capped menu instead gets full
    // intercept sweeps and pattern moves on its products.
    let ydom = spec.benefit().y_domain();
    let ywidth = (0..ydom.dim()).map(|d| ydom.width(d)).fold(f64::INFINITY, f64::min);
    let min_step = tol.fd_param_step * spec.grid().region().diam();
    let mut step = (0.02 * ywidth).max(min_step);
    let mut converged = false;
    let mut state = MenuState::new(spec, &menu);
    for it in 2..=tol.max_outer_iters.max(2) {
        let before = state.loss();
        if capped {
            state.intercept_sweep();
            descent::pattern_pass(&mut state, step);
        } else {
            state.tie_sweep(TIE_WINDOW);
            state.tighten();
        }
        let after = state.loss();
        let candidate = state.to_menu();
        let lc = spec.evaluate_L(&candidate);
        if lc <= l {
            menu = candidate;
            l = lc;
        }
        log.push(IterateRecord {
            iter: it,
            l,
            pieces: menu.len(),
        });
        if before - after <= tol.rel_decrease_tol * after.abs().max(f64::MIN_POSITIVE) {
            if step <= min_step || !capped {
                converged = true;
                break;
            }
            step = (0.5 * step).max(min_step);
        }
    }
    Ok(Solution::from_menu(spec, menu, log, converged))
}

/// Keeps the null piece and `cap` products spread over the product range:
/// farthest-point selection among pieces that win some mass, seeded with the
/// heaviest one. Intercepts are left for the polish sweeps to re-balance.
fn cap_menu(spec: &ProblemSpec, u: &BConvexFunction, cap: usize) -> Result<BConvexFunction> {
    if u.len() <= cap + 1 {
        return Ok(u.clone());
    }
    let (_, winners) = u.on_grid(spec.grid());
    let mut mass = vec![0.0; u.len()];
    for (k, &w) in winners.iter().enumerate() {
        mass[w] += spec.weights()[k];
    }
    let cand: Vec<usize> = (1..u.len()).filter(|&i| mass[i] > 0.0).collect();
    let ys = |i: usize| &u.pieces()[i].y;
    let mut keep: Vec<usize> = vec![];
    let mut gap = vec![f64::INFINITY; cand.len()];
    // distance to the null product counts as already covered
    for (c, &i) in cand.iter().enumerate() {
        gap[c] = crate::domain::dist(ys(i), &u.pieces()[0].y);
    }
    while keep.len() < cap.min(cand.len()) {
        let pick = if keep.is_empty() {
            (0..cand.len()).max_by(|&a, &b| mass[cand[a]].total_cmp(&mass[cand[b]]).then(b.cmp(&a)))
        } else {
            (0..cand.len()).max_by(|&a, &b| gap[a].total_cmp(&gap[b]).then(b.cmp(&a)))
        };
        let Some(c) = pick else { break };
        if gap[c] == 0.0 && !keep.is_empty() {
            break;
        }
        keep.push(cand[c]);
        for (o, &j) in cand.iter().enumerate() {
            gap[o] = gap[o].min(crate::domain::dist(ys(j), ys(cand[c])));
        }
    }
    keep.sort_unstable();
    let mut pieces = vec![u.pieces()[0].clone()];
    pieces.extend(keep.into_iter().map(|i| u.pieces()[i].clone()));
    BConvexFunction::new(u.benefit().clone(), pieces)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub trials: usize,
    pub worst_margin: f64,
    pub worst_y: Vec<f64>,
    pub worst_a: f64,
    pub h_max: f64,
}

/// Appends random b-affine pieces whose largest excess over `u` on the grid
/// lies in `(0, h_max]` and records `L[max(u, p)] - L[u]`.
pub fn perturbation_audit(spec: &ProblemSpec, sol: &Solution, trials: usize, seed: u64) -> AuditReport {
    let b = spec.benefit();
    let grid = spec.grid();
    let u = &sol.u_values;
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let osc = hi - lo;
    let h_max = if osc > 0.0 { 0.1 * osc } else { 0.1 * (1.0 + hi.abs()) };
    let current = spec.integrand(&sol.u, &sol.assignment);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(Vec<f64>, f64)> = (0..trials)
        .map(|_| (b.y_domain().sample(&mut rng), h_max * (1.0 - rng.random::<f64>())))
        .collect();
    let results: Vec<(f64, f64)> = draws
        .par_iter()
        .map(|(y, h)| {
            let gap = (0..grid.len())
                .map(|k| b.eval(grid.point(k), y) - u[k])
                .fold(f64::NEG_INFINITY, f64::max);
            let a = h - gap;
            let ca = spec.cost_of(y) + a;
            let mut delta = 0.0;
            for k in 0..grid.len() {
                if b.eval(grid.point(k), y) + a > u[k] {
                    delta += spec.weights()[k] * (ca - current[k]);
                }
            }
            (delta, a)
        })
        .collect();
    let mut rep = AuditReport {
        trials,
        worst_margin: f64::INFINITY,
        worst_y: vec![],
        worst_a: 0.0,
        h_max,
    };
    for ((y, _), (m, a)) in draws.iter().zip(results) {
        if m < rep.worst_margin {
            rep.worst_margin = m;
            rep.worst_y = y.clone();
            rep.worst_a = a;
        }
    }
    if trials == 0 {
        rep.worst_margin = 0.0;
    }
    rep
}

#[derive(Debug, Clone)]
pub struct PriceMenu {
    /// `v(y) = max_x b(x, y) - u(x)` on the vertex lattice over Y.
    pub v: GridFunction,
    /// `v(y_null) + a_null`; zero when some agent takes the null product.
    pub null_defect: f64,
    /// max over pieces with positive mass of `|v(y_i) + a_i|`
    pub active_defect: f64,
}

pub fn price_menu(spec: &ProblemSpec, sol: &Solution) -> Result<PriceMenu> {
    let b = spec.benefit();
    let ygrid = Grid::new(
        Region::new(
            b.y_domain().lo().to_vec(),
            b.y_domain().hi().to_vec(),
            b.y_domain().ball().cloned(),
        )?,
        spec.options.price_grid.clone(),
        Placement::Vertex,
    )?;
    let ug = GridFunction::from_grid(spec.grid(), sol.u_values.clone());
    let v = b_transform_v(b, &ug, ygrid.coords());
    let mass = sol.piece_mass(spec);
    let ys: Vec<f64> = sol.u.pieces().iter().flat_map(|p| p.y.clone()).collect();
    let vp = b_transform_v(b, &ug, &ys);
    let null_defect = vp.values()[0] + sol.u.pieces()[0].a;
    let mut active_defect = 0.0f64;
    for (i, p) in sol.u.pieces().iter().enumerate() {
        if mass[i] > 0.0 {
            active_defect = active_defect.max((vp.values()[i] + p.a).abs());
        }
    }
    Ok(PriceMenu {
        v,
        null_defect,
        active_defect,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::expr::Scope;

    pub fn rc1d(nodes: usize) -> ProblemSpec {
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
            SolverOptions::new(1),
        )
        .unwrap()
    }

    pub fn closed_form(x: f64) -> f64 {
        if x >= 0.5 {
            x * x - x + 0.25
        } else {
            0.0
        }
    }

    // tangents of the closed form at n + 1 equispaced points of [1/2, 1]
    pub fn tangent_menu(spec: &ProblemSpec, n: usize) -> BConvexFunction {
        let mut pieces = vec![spec.null_piece().clone()];
        for j in 0..=n {
            let x0 = 0.5 + 0.5 * j as f64 / n as f64;
            let y0 = 2.0 * x0 - 1.0;
            pieces.push(BAffinePiece::new(vec![y0], closed_form(x0) - x0 * y0));
        }
        BConvexFunction::new(spec.benefit().clone(), pieces).unwrap()
    }

    #[test]
    fn evaluate_l_examples() {
        let spec = rc1d(1024);
        assert_eq!(spec.evaluate_L(&spec.null_menu()), 0.0);
        // fine tangent menu reproduces the closed-form loss
        let l = spec.evaluate_L(&tangent_menu(&spec, 4096));
        assert!((l + 1.0 / 12.0).abs() < 1e-5, "{l}");
    }

    #[test]
    fn null_menu_loss_is_cost_plus_intercept_times_mass() {
        let x = Region::unit_box(1);
        let y = Region::new(vec![-0.25], vec![1.25], None).unwrap();
        let b = Arc::new(BenefitFunction::bilinear(x.clone(), y).unwrap());
        let grid = Grid::new(x, vec![100], Placement::CellCentered).unwrap();
        let spec = ProblemSpec::new(
            b,
            grid,
            Expr::parse("1 + x1", 1, Scope::X).unwrap(),
            1.0,
            Expr::parse("y1^2/2", 1, Scope::Y).unwrap(),
            BAffinePiece::null(vec![0.5], -0.3),
            SolverOptions::new(1),
        )
        .unwrap();
        let l = spec.evaluate_L(&spec.null_menu());
        assert!((l - (0.125 - 0.3) * 1.5).abs() < 1e-12, "{l}");
    }

    #[test]
    fn gate_and_lambda_are_enforced() {
        let x = Region::unit_box(1);
        let y = Region::new(vec![-0.25], vec![1.25], None).unwrap();
        let b = Arc::new(BenefitFunction::bilinear(x.clone(), y).unwrap());
        let grid = Grid::new(x, vec![16], Placement::CellCentered).unwrap();
        let mk = |lambda: f64, cost: &str| {
            ProblemSpec::new(
                b.clone(),
                grid.clone(),
                Expr::parse("1", 1, Scope::X).unwrap(),
                lambda,
                Expr::parse(cost, 1, Scope::Y).unwrap(),
                BAffinePiece::null(vec![0.0], 0.0),
                SolverOptions::new(1),
            )
        };
        let e = mk(0.0, "y1^2/2").unwrap_err();
        assert!(e.to_string().contains("lambda must be positive"));
        assert!(matches!(mk(1.0, "-y1^2"), Err(Error::Admissibility(_))));
        assert!(matches!(mk(2.0, "y1^2"), Err(Error::Config(_))));
        assert!((mk(1.0, "y1^2").unwrap().admissibility_margin() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn convex_solver_reproduces_closed_form_on_coarse_grid() {
        let spec = rc1d(128);
        let sol = solve(&spec).unwrap();
        assert!((sol.L_value + 1.0 / 12.0).abs() < 2e-3, "{}", sol.L_value);
        for w in sol.iterate_log.windows(2) {
            assert!(w[1].l <= w[0].l);
        }
        let g = spec.grid();
        for k in 0..g.len() {
            assert!((sol.u_values[k] - closed_form(g.point(k)[0])).abs() < 1e-2);
        }
        let audit = perturbation_audit(&spec, &sol, 200, 1);
        assert!(audit.worst_margin >= -1e-10, "{audit:?}");
    }

    #[test]
    fn audit_of_null_menu_finds_improvement() {
        let spec = rc1d(256);
        let sol = Solution::from_menu(&spec, spec.null_menu(), vec![], true);
        let audit = perturbation_audit(&spec, &sol, 500, 2);
        assert!(audit.worst_margin < 0.0);
    }

    #[test]
    fn price_menu_of_closed_form() {
        let spec = rc1d(1024);
        let sol = Solution::from_menu(&spec, tangent_menu(&spec, 512), vec![], true);
        let pm = price_menu(&spec, &sol).unwrap();
        // v(y) = 0 for y <= 0, y^2/4 + y/2 on [0, 1], y - 1/4 beyond
        for k in 0..pm.v.len() {
            let y = pm.v.point(k)[0];
            let exact = if y <= 0.0 {
                0.0
            } else if y <= 1.0 {
                y * y / 4.0 + y / 2.0
            } else {
                y - 0.25
            };
            assert!((pm.v.values()[k] - exact).abs() < 1e-3, "{y}");
        }
        assert!(pm.null_defect.abs() <= 1e-12);
        assert!(pm.active_defect <= 1e-8);
    }
}
