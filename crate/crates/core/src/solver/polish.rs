//! Exact coordinate moves on a menu under node quadrature.
//!
//! With every other piece fixed, the quadrature loss as a function of one
//! intercept is piecewise linear and increasing between the thresholds at
//! which the piece starts winning a node, so its minimum sits just above one
//! of those thresholds (or at minus infinity, which removes the piece). A
//! sorted sweep over the thresholds finds it exactly.

use super::ProblemSpec;
use crate::bconvex::{BAffinePiece, BConvexFunction};
use rayon::prelude::*;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    idx: usize,
}

const EMPTY: Entry = Entry {
    score: f64::NEG_INFINITY,
    idx: NONE,
};

// lowest index wins ties
#[inline]
fn beats(a: Entry, b: Entry) -> bool {
    a.score > b.score || (a.score == b.score && a.idx < b.idx)
}

#[derive(Debug, Clone)]
pub struct MenuState<'a> {
    spec: &'a ProblemSpec,
    pub ys: Vec<Vec<f64>>,
    pub a: Vec<f64>,
    pub frozen: Vec<bool>,
    cost: Vec<f64>,
    omega: Vec<f64>,
    top: Vec<[Entry; 2]>,
}

/// Result of the best-intercept search for one piece.
#[derive(Debug, Clone, Copy)]
pub struct InterceptChoice {
    /// `None` means the piece is better removed.
    pub a: Option<f64>,
    pub loss: f64,
    pub current_loss: f64,
}

impl<'a> MenuState<'a> {
    pub fn new(spec: &'a ProblemSpec, u: &BConvexFunction) -> Self {
        let ys: Vec<Vec<f64>> = u.pieces().iter().map(|p| p.y.clone()).collect();
        let a: Vec<f64> = u.pieces().iter().map(|p| p.a).collect();
        let frozen = u.pieces().iter().map(|p| p.frozen).collect();
        let cost = ys.iter().map(|y| spec.cost_of(y)).collect();
        let mean = spec.mass() / spec.grid().len() as f64;
        let omega = spec.weights().iter().map(|w| w / mean).collect();
        let mut st = MenuState {
            spec,
            ys,
            a,
            frozen,
            cost,
            omega,
            top: vec![],
        };
        st.top = (0..spec.grid().len()).into_par_iter().map(|k| st.full_top(k)).collect();
        st
    }

    #[inline]
    fn base(&self, i: usize, k: usize) -> f64 {
        self.spec.benefit().eval(self.spec.grid().point(k), &self.ys[i])
    }

    fn full_top(&self, k: usize) -> [Entry; 2] {
        let mut t = [EMPTY, EMPTY];
        for i in 0..self.ys.len() {
            if self.a[i] == f64::NEG_INFINITY {
                continue;
            }
            let e = Entry {
                score: self.base(i, k) + self.a[i],
                idx: i,
            };
            if beats(e, t[0]) {
                t[1] = t[0];
                t[0] = e;
            } else if beats(e, t[1]) {
                t[1] = e;
            }
        }
        t
    }

    pub fn spec(&self) -> &'a ProblemSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    /// Appends a removed piece at `y`; revive it with [`MenuState::set_piece`].
    pub fn push_dead(&mut self, y: Vec<f64>) -> usize {
        self.cost.push(self.spec.cost_of(&y));
        self.ys.push(y);
        self.a.push(f64::NEG_INFINITY);
        self.frozen.push(false);
        self.ys.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn alive(&self, i: usize) -> bool {
        self.a[i] != f64::NEG_INFINITY
    }

    pub fn winner(&self, k: usize) -> usize {
        self.top[k][0].idx
    }

    /// Normalized quadrature loss (weights averaging one).
    pub fn loss(&self) -> f64 {
        let mut s = 0.0;
        for (k, t) in self.top.iter().enumerate() {
            let w = t[0].idx;
            s += self.omega[k] * (self.cost[w] + self.a[w]);
        }
        s
    }

    /// Best intercept for piece `i` placed at product `y`, all other pieces
    /// held fixed.
    pub fn best_intercept(&self, i: usize, y: &[f64]) -> InterceptChoice {
        self.best_intercept_in(i, y, None)
    }

    /// As [`MenuState::best_intercept`], restricted to `a` in `[lo, hi]` when
    /// a window is given (removal is then not an option).
    pub fn best_intercept_in(&self, i: usize, y: &[f64], window: Option<(f64, f64)>) -> InterceptChoice {
        let b = self.spec.benefit();
        let grid = self.spec.grid();
        let ci = self.spec.cost_of(y);
        let k_n = grid.len();
        // (threshold, omega, alternative integrand, tolerance)
        let mut th: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(k_n);
        let mut g_total = 0.0;
        let mut current = 0.0;
        for k in 0..k_n {
            let t = self.top[k];
            let other = if t[0].idx == i { t[1] } else { t[0] };
            let w = self.omega[k];
            let bik = b.eval(grid.point(k), y);
            if other.idx == NONE {
                th.push((f64::NEG_INFINITY, w, 0.0, 0.0));
                continue;
            }
            let g = self.cost[other.idx] + self.a[other.idx];
            g_total += w * g;
            current += w * (self.cost[t[0].idx] + self.a[t[0].idx]);
            let tk = other.score - bik;
            let tol = 1e-12 * (1.0 + tk.abs() + other.score.abs() + bik.abs());
            th.push((tk, w, g, tol));
        }
        th.sort_by(|p, q| p.0.total_cmp(&q.0));

        let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let mut best = InterceptChoice {
            a: None,
            loss: if window.is_none() { g_total } else { f64::INFINITY },
            current_loss: current,
        };
        let (mut wsum, mut gsum) = (0.0, 0.0);
        let mut lo_done = window.is_none();
        for m in 0..th.len() {
            let (tm, w, g, tol) = th[m];
            if !lo_done && tm >= lo {
                // left end of the window: wins exactly the nodes counted so far
                let loss = wsum * (ci + lo) + (g_total - gsum);
                if loss < best.loss {
                    best.loss = loss;
                    best.a = Some(lo);
                }
                lo_done = true;
            }
            wsum += w;
            gsum += w * g;
            if tm == f64::NEG_INFINITY {
                continue;
            }
            let a = tm + tol;
            if a < lo || a > hi {
                continue;
            }
            if m + 1 < th.len() && th[m + 1].0 <= a + th[m + 1].3 {
                continue;
            }
            let loss = wsum * (ci + a) + (g_total - gsum);
            if loss < best.loss {
                best.loss = loss;
                best.a = Some(a);
            }
        }
        if !lo_done {
            let loss = wsum * (ci + lo) + (g_total - gsum);
            if loss < best.loss {
                best.loss = loss;
                best.a = Some(lo);
            }
        }
        best
    }

    /// Installs `(y, a)` as piece `i` (or removes it for `a = None`) and
    /// refreshes the per-node top-two lists.
    pub fn set_piece(&mut self, i: usize, y: Vec<f64>, a: Option<f64>) {
        self.cost[i] = self.spec.cost_of(&y);
        self.ys[i] = y;
        self.a[i] = a.unwrap_or(f64::NEG_INFINITY);
        let this = &*self;
        let updates: Vec<(usize, [Entry; 2])> = (0..this.top.len())
            .into_par_iter()
            .filter_map(|k| {
                let t = this.top[k];
                if t[0].idx == i || t[1].idx == i {
                    return Some((k, this.full_top(k)));
                }
                if !this.alive(i) {
                    return None;
                }
                let e = Entry {
                    score: this.base(i, k) + this.a[i],
                    idx: i,
                };
                if beats(e, t[0]) {
                    Some((k, [e, t[0]]))
                } else if beats(e, t[1]) {
                    Some((k, [t[0], e]))
                } else {
                    None
                }
            })
            .collect();
        for (k, t) in updates {
            self.top[k] = t;
        }
    }

    /// One pass of exact intercept moves over all free pieces. Returns the
    /// decrease of the normalized loss.
    pub fn intercept_sweep(&mut self) -> f64 {
        self.sweep(None)
    }

    /// Intercept moves limited to `|da| <= delta (1 + |a|)`: settles near-ties
    /// in favour of the cheaper piece without moving the menu.
    pub fn tie_sweep(&mut self, delta: f64) -> f64 {
        self.sweep(Some(delta))
    }

    fn sweep(&mut self, delta: Option<f64>) -> f64 {
        let start = self.loss();
        for i in 0..self.len() {
            if self.frozen[i] || !self.alive(i) {
                continue;
            }
            let window = delta.map(|d| {
                let r = d * (1.0 + self.a[i].abs());
                (self.a[i] - r, self.a[i] + r)
            });
            let choice = self.best_intercept_in(i, &self.ys[i].clone(), window);
            let gain = choice.current_loss - choice.loss;
            if gain > 1e-13 * (1.0 + choice.current_loss.abs()) && choice.a != Some(self.a[i]) {
                let y = self.ys[i].clone();
                self.set_piece(i, y, choice.a);
            }
        }
        start - self.loss()
    }

    /// Lowers every intercept to the least value at which the piece still
    /// wins all of its nodes. Winners never change, since every score only
    /// drops and each winner keeps its margin over the old runner-up.
    pub fn tighten(&mut self) -> f64 {
        let start = self.loss();
        let grid = self.spec.grid();
        let b = self.spec.benefit();
        let mut floor = vec![f64::NEG_INFINITY; self.len()];
        for (k, t) in self.top.iter().enumerate() {
            let w = t[0].idx;
            if t[1].idx == NONE {
                floor[w] = f64::INFINITY;
                continue;
            }
            let bw = b.eval(grid.point(k), &self.ys[w]);
            let tk = t[1].score - bw;
            let tol = 1e-12 * (1.0 + tk.abs() + t[1].score.abs() + bw.abs());
            floor[w] = floor[w].max(tk + tol);
        }
        let mut changed = false;
        for i in 0..self.len() {
            if self.frozen[i] || !self.alive(i) || !floor[i].is_finite() {
                continue;
            }
            if floor[i] < self.a[i] {
                self.a[i] = floor[i];
                changed = true;
            }
        }
        if changed {
            let this = &*self;
            let top: Vec<[Entry; 2]> = (0..grid.len()).into_par_iter().map(|k| this.full_top(k)).collect();
            self.top = top;
        }
        start - self.loss()
    }

    /// Per-piece count of nodes won.
    pub fn wins(&self) -> Vec<usize> {
        let mut c = vec![0; self.len()];
        for t in &self.top {
            c[t[0].idx] += 1;
        }
        c
    }

    /// Menu with dead and never-winning pieces dropped.
    pub fn to_menu(&self) -> BConvexFunction {
        let wins = self.wins();
        let pieces = (0..self.len())
            .filter(|&i| self.frozen[i] || (self.alive(i) && wins[i] > 0))
            .map(|i| BAffinePiece {
                y: self.ys[i].clone(),
                a: self.a[i],
                frozen: self.frozen[i],
            })
            .collect();
        BConvexFunction::new(self.spec.benefit().clone(), pieces).expect("menu keeps its null piece")
    }
}
