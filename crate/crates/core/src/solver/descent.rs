//! Coordinate descent over piece parameters: exact intercept sweeps plus
//! pattern moves on the products, with step halving, pruning of idle pieces,
//! periodic splitting and several seeded restarts.

use super::polish::MenuState;
use super::{initial_menu, IterateRecord, ProblemSpec, Solution};
use crate::error::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRUNE_AFTER: usize = 5;
const SPLIT_EVERY: usize = 10;

fn clamp_into(spec: &ProblemSpec, y: &mut [f64]) {
    let r = spec.benefit().y_domain();
    for (d, v) in y.iter_mut().enumerate() {
        *v = v.clamp(r.lo()[d], r.hi()[d]);
    }
}

// Tries +-step along every axis for every free piece; returns the number of
// accepted moves.
pub(crate) fn pattern_pass(st: &mut MenuState, step: f64) -> usize {
    let mut moves = 0;
    let spec_y = st.ys.first().map(|y| y.len()).unwrap_or(0);
    for i in 0..st.len() {
        if st.frozen[i] || !st.alive(i) {
            continue;
        }
        for d in 0..spec_y {
            for sgn in [1.0, -1.0] {
                let mut y = st.ys[i].clone();
                y[d] += sgn * step;
                if !st_in_y(st, &mut y) {
                    continue;
                }
                let c = st.best_intercept(i, &y);
                if c.loss < c.current_loss - 1e-13 * (1.0 + c.current_loss.abs()) {
                    st.set_piece(i, y, c.a);
                    moves += 1;
                    break;
                }
            }
        }
    }
    moves
}

fn st_in_y(st: &MenuState, y: &mut [f64]) -> bool {
    let spec = st.spec();
    clamp_into(spec, y);
    spec.benefit().y_domain().contains(y)
}

fn run(spec: &ProblemSpec, seed: u64) -> Result<(Solution, usize)> {
    let tol = spec.tolerances().clone();
    let init = initial_menu(spec, spec.options().menu_size, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1ce);
    let yr = spec.benefit().y_domain();
    let ywidth = (0..yr.dim()).map(|d| yr.width(d)).fold(f64::INFINITY, f64::min);
    let min_step = tol.fd_param_step * spec.grid().region().diam();
    let mut step = 0.125 * ywidth;
    let mut st = MenuState::new(spec, &init);
    let mut log = vec![IterateRecord {
        iter: 0,
        l: spec.evaluate_L(&init),
        pieces: init.len(),
    }];
    let mut idle = vec![0usize; st.len()];
    let mut converged = false;
    let mut it = 0;
    while it < tol.max_outer_iters {
        it += 1;
        let before = st.loss();
        st.intercept_sweep();
        let moved = pattern_pass(&mut st, step);
        let after = st.loss();

        let wins = st.wins();
        idle.resize(st.len(), 0);
        for i in 0..st.len() {
            idle[i] = if wins[i] > 0 { 0 } else { idle[i] + 1 };
            if !st.frozen[i] && st.alive(i) && idle[i] >= PRUNE_AFTER {
                let y = st.ys[i].clone();
                st.set_piece(i, y, None);
            }
        }
        if it % SPLIT_EVERY == 0 {
            let alive = (0..st.len()).filter(|&i| st.alive(i) && !st.frozen[i]).count();
            if alive < spec.options().menu_size {
                split_busiest(&mut st, step, &mut rng);
            }
        }

        let menu = st.to_menu();
        log.push(IterateRecord {
            iter: it,
            l: spec.evaluate_L(&menu),
            pieces: menu.len(),
        });
        let decrease = before - after;
        if moved == 0 || decrease <= tol.rel_decrease_tol * after.abs().max(f64::MIN_POSITIVE) {
            if step <= min_step {
                converged = decrease <= tol.rel_decrease_tol * after.abs().max(f64::MIN_POSITIVE);
                if converged {
                    break;
                }
            }
            step = (0.5 * step).max(min_step);
        }
    }
    let menu = st.to_menu();
    Ok((Solution::from_menu(spec, menu, log, converged), it))
}

fn split_busiest(st: &mut MenuState, step: f64, rng: &mut ChaCha8Rng) {
    let wins = st.wins();
    let Some(i) = (0..st.len())
        .filter(|&i| !st.frozen[i] && st.alive(i))
        .max_by(|&i, &j| wins[i].cmp(&wins[j]).then(j.cmp(&i)))
    else {
        return;
    };
    let mut y = st.ys[i].clone();
    for v in y.iter_mut() {
        *v += step * (2.0 * rng.random::<f64>() - 1.0);
    }
    if !st_in_y(st, &mut y) {
        return;
    }
    let j = st.push_dead(y.clone());
    let c = st.best_intercept(j, &y);
    if c.a.is_some() {
        st.set_piece(j, y, c.a);
    }
}

pub fn solve_descent(spec: &ProblemSpec) -> Result<Solution> {
    let starts = spec.options().multi_start.max(1);
    let mut best: Option<Solution> = None;
    for s in 0..starts {
        let seed = spec.options().seed.wrapping_add(s as u64);
        let (sol, _) = run(spec, seed)?;
        let better = match &best {
            None => true,
            Some(b) => sol.L_value < b.L_value,
        };
        if better {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one start"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::tests::rc1d;
    use crate::solver::{Method, SolverOptions};

    #[test]
    fn descent_improves_on_null_menu() {
        let base = rc1d(64);
        let mut opts = SolverOptions::new(1);
        opts.method = Method::Descent;
        opts.menu_size = 16;
        opts.multi_start = 2;
        opts.tolerances.max_outer_iters = 80;
        let spec = base.with_options(opts).unwrap();
        let sol = solve_descent(&spec).unwrap();
        assert!(sol.L_value < -0.07, "{}", sol.L_value);
        for w in sol.iterate_log.windows(2) {
            assert!(w[1].l <= w[0].l + 1e-15);
        }
    }
}
