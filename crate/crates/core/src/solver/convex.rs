//! Node-wise convex reformulation of the discrete principal problem.
//!
//! Each grid node `x_k` gets a utility level `u_k` and a momentum `p_k`; its
//! product is `Y(x_k, p_k)`. The quadrature loss becomes
//! `sum_k w_k [G_k(p_k) + u_k]` with `G_k(p) = c(Y(x_k,p)) - b(x_k,Y(x_k,p))`,
//! uniformly convex when the cost passes the admissibility gate. Incentive
//! compatibility reads `u_j >= u_k + phi_kj(p_k)` with
//! `phi_kj(p) = b(x_j, Y(x_k,p)) - b(x_k, Y(x_k,p))`, convex in `p` for
//! benefits obeying the Loeper maximum principle, and participation reads
//! `u_k >= b(x_k, y_null) + a_null`. The problem is solved by sequential
//! quadratic programming (exact in one step for bilinear benefits with
//! quadratic costs), with incentive constraints generated lazily: a lattice
//! stencil first, then every violated pair found by a full scan.

use super::ipm::{IpmOptions, QBlock, Qp, SparseRows};
use super::ProblemSpec;
use crate::bconvex::{BAffinePiece, BConvexFunction};
use crate::benefit::{fd_hessian, Family};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct NodeSolution {
    pub u: Vec<f64>,
    /// flat, `dim` entries per node
    pub p: Vec<f64>,
    pub sqp_iterations: usize,
    pub cut_rounds: usize,
    pub ipm_iterations: usize,
    pub constraints: usize,
    pub converged: bool,
}

const MAX_SQP: usize = 30;
const MAX_CUT_ROUNDS: usize = 40;
const CUTS_PER_NODE: usize = 8;
const CUT_TOL: f64 = 1e-10;

struct Model {
    grad: Vec<f64>,
    hess: Vec<f64>,
}

fn g_model(spec: &ProblemSpec, k: usize, p: &[f64]) -> Result<Model> {
    let b = spec.benefit();
    let x = spec.grid().point(k);
    let d = p.len();
    let g = |q: &[f64]| -> Result<f64> {
        let y = b.invert_Y(x, q)?;
        Ok(spec.cost_of(&y) - b.eval(x, &y))
    };
    let yw = (0..d).map(|i| b.y_domain().width(i)).fold(f64::INFINITY, f64::min);
    let h1 = 1e-5 * yw;
    let mut grad = vec![0.0; d];
    let mut q = p.to_vec();
    for i in 0..d {
        q[i] = p[i] + h1;
        let gp = g(&q);
        q[i] = p[i] - h1;
        let gm = g(&q);
        q[i] = p[i];
        // one-sided near the edge of the momentum range
        grad[i] = match (gp, gm) {
            (Ok(a), Ok(c)) => (a - c) / (2.0 * h1),
            (Ok(a), Err(_)) => (a - g(p)?) / h1,
            (Err(_), Ok(c)) => (g(p)? - c) / h1,
            (Err(e), Err(_)) => return Err(e),
        };
    }
    let hm = match fd_hessian(&g, p, 1e-3 * yw) {
        Ok(h) => h,
        Err(_) => {
            // step inward for the curvature estimate
            let c = b.bx(x, &b.y_domain().center());
            let inner: Vec<f64> = p.iter().zip(&c).map(|(a, c)| a + 0.01 * (c - a)).collect();
            fd_hessian(&g, &inner, 1e-3 * yw)?
        }
    };
    let eig = SymmetricEigen::new(hm);
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let floor = 1e-8 * top.max(1.0);
    let clamped = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(floor)));
    let h = &eig.eigenvectors * clamped * eig.eigenvectors.transpose();
    Ok(Model {
        grad,
        hess: h.iter().cloned().collect(),
    })
}

/// Jacobian of `Y(x, .)` at `p`: the inverse of the mixed Hessian.
fn dy(spec: &ProblemSpec, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
    let b = spec.benefit();
    match b.family() {
        Family::Bilinear | Family::QuadraticDistance => Ok(DMatrix::identity(x.len(), x.len())),
        Family::UserDefined => b.bxy(x, y).try_inverse().ok_or_else(|| Error::NoPreimage {
            x: x.to_vec(),
            p: vec![],
            reason: "singular mixed Hessian".into(),
        }),
    }
}

fn stencil(dim: usize) -> Vec<Vec<isize>> {
    let mut out = vec![];
    let total = 3usize.pow(dim as u32);
    for code in 0..total {
        let mut c = code;
        let off: Vec<isize> = (0..dim)
            .map(|_| {
                let v = (c % 3) as isize - 1;
                c /= 3;
                v
            })
            .collect();
        if off.iter().any(|&v| v != 0) {
            out.push(off);
        }
    }
    out
}

pub fn solve_nodewise(spec: &ProblemSpec) -> Result<NodeSolution> {
    let grid = spec.grid();
    let b = spec.benefit();
    let kn = grid.len();
    let d = grid.dim();
    let nv = d + 1;
    let ydom = b.y_domain();
    let mean_w = spec.mass() / kn as f64;
    let omega: Vec<f64> = spec.weights().iter().map(|w| w / mean_w).collect();
    let null = spec.null_piece();
    let nu: Vec<f64> = (0..kn).map(|k| b.eval(grid.point(k), &null.y) + null.a).collect();
    let user = b.family() == Family::UserDefined;

    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for k in 0..kn {
        for off in stencil(d) {
            if let Some(j) = grid.neighbor(k, &off) {
                pairs.insert((k, j));
            }
        }
    }

    let mut pbar: Vec<f64> = (0..kn).flat_map(|k| b.bx(grid.point(k), &null.y)).collect();
    let mut ubar = nu.clone();
    let mut radius = 0.25 * (0..d).map(|i| ydom.width(i)).fold(f64::INFINITY, f64::min);
    let mut out = NodeSolution {
        u: vec![],
        p: vec![],
        sqp_iterations: 0,
        cut_rounds: 0,
        ipm_iterations: 0,
        constraints: 0,
        converged: false,
    };
    let opts = IpmOptions::default();

    for sqp in 0..MAX_SQP {
        out.sqp_iterations = sqp + 1;
        let models: Vec<Model> = (0..kn)
            .into_par_iter()
            .map(|k| g_model(spec, k, &pbar[k * d..(k + 1) * d]))
            .collect::<Result<_>>()?;
        let ybar: Vec<Vec<f64>> = (0..kn)
            .into_par_iter()
            .map(|k| b.invert_Y(grid.point(k), &pbar[k * d..(k + 1) * d]))
            .collect::<Result<_>>()?;
        let dys: Vec<DMatrix<f64>> = (0..kn)
            .map(|k| dy(spec, grid.point(k), &ybar[k]))
            .collect::<Result<_>>()?;

        let mut qblocks = Vec::with_capacity(kn);
        let mut c = vec![0.0; kn * nv];
        for k in 0..kn {
            let m = &models[k];
            let pk = &pbar[k * d..(k + 1) * d];
            c[k * nv] = omega[k];
            for i in 0..d {
                // gradient of the quadratic model at p = 0 in absolute coordinates
                let mut hp = 0.0;
                for j in 0..d {
                    hp += m.hess[i * d + j] * pk[j];
                }
                c[k * nv + 1 + i] = omega[k] * (m.grad[i] - hp);
            }
            qblocks.push(QBlock {
                start: k * nv + 1,
                size: d,
                data: m.hess.iter().map(|h| omega[k] * h).collect(),
            });
        }

        // rows that do not depend on the incentive pairs
        let mut base = SparseRows::new();
        for k in 0..kn {
            base.push(&[(k * nv, 1.0)], nu[k]);
            let j = &dys[k];
            let pk = &pbar[k * d..(k + 1) * d];
            for i in 0..d {
                let mut ent: Vec<(usize, f64)> = (0..d).map(|l| (k * nv + 1 + l, j[(i, l)])).collect();
                let jp: f64 = (0..d).map(|l| j[(i, l)] * pk[l]).sum();
                base.push(&ent, ydom.lo()[i] - ybar[k][i] + jp);
                ent.iter_mut().for_each(|e| e.1 = -e.1);
                base.push(&ent, ybar[k][i] - jp - ydom.hi()[i]);
                if user {
                    base.push(&[(k * nv + 1 + i, 1.0)], pk[i] - radius);
                    base.push(&[(k * nv + 1 + i, -1.0)], -pk[i] - radius);
                }
            }
        }

        let mut z0 = vec![0.0; kn * nv];
        for k in 0..kn {
            z0[k * nv] = ubar[k];
            z0[k * nv + 1..(k + 1) * nv].copy_from_slice(&pbar[k * d..(k + 1) * d]);
        }

        let mut sol;
        let mut rounds = 0;
        loop {
            let mut rows = base.clone();
            for &(k, j) in &pairs {
                let (xk, xj) = (grid.point(k), grid.point(j));
                let yk = &ybar[k];
                let phi = b.eval(xj, yk) - b.eval(xk, yk);
                let by_diff: Vec<f64> = b.by(xj, yk).iter().zip(b.by(xk, yk)).map(|(a, c)| a - c).collect();
                let gamma = dys[k].transpose() * DVector::from_vec(by_diff);
                let mut ent = vec![(j * nv, 1.0), (k * nv, -1.0)];
                let mut rhs = phi;
                for i in 0..d {
                    ent.push((k * nv + 1 + i, -gamma[i]));
                    rhs -= gamma[i] * pbar[k * d + i];
                }
                rows.push(&ent, rhs);
            }
            let qp = Qp {
                n: kn * nv,
                q: qblocks.clone(),
                c: c.clone(),
                rows,
            };
            sol = qp.solve(&z0, opts);
            out.ipm_iterations += sol.iterations;
            out.constraints = qp.rows.len();
            rounds += 1;
            out.cut_rounds += 1;

            // full scan of incentive constraints with the true benefit
            let z = &sol.z;
            let ys: Vec<Option<Vec<f64>>> = (0..kn)
                .into_par_iter()
                .map(|k| b.invert_Y(grid.point(k), &z[k * nv + 1..(k + 1) * nv]).ok())
                .collect();
            let new_pairs: Vec<Vec<(usize, usize)>> = (0..kn)
                .into_par_iter()
                .map(|j| {
                    let xj = grid.point(j);
                    let uj = z[j * nv];
                    let mut viol: Vec<(f64, usize)> = vec![];
                    for k in 0..kn {
                        if k == j {
                            continue;
                        }
                        let Some(yk) = &ys[k] else { continue };
                        let v = z[k * nv] + b.eval(xj, yk) - b.eval(grid.point(k), yk) - uj;
                        if v > CUT_TOL * (1.0 + uj.abs()) && !pairs.contains(&(k, j)) {
                            viol.push((v, k));
                        }
                    }
                    viol.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)));
                    viol.iter().take(CUTS_PER_NODE).map(|&(_, k)| (k, j)).collect()
                })
                .collect();
            let added: usize = new_pairs.iter().map(|v| v.len()).sum();
            for v in new_pairs {
                pairs.extend(v);
            }
            if added == 0 || rounds >= MAX_CUT_ROUNDS {
                break;
            }
            z0 = sol.z.clone();
        }

        let z = &sol.z;
        let mut step = 0.0f64;
        for k in 0..kn {
            for i in 0..d {
                step = step.max((z[k * nv + 1 + i] - pbar[k * d + i]).abs());
            }
        }
        for k in 0..kn {
            ubar[k] = z[k * nv];
            pbar[k * d..(k + 1) * d].copy_from_slice(&z[k * nv + 1..(k + 1) * nv]);
        }
        out.converged = sol.converged;
        if user && step >= 0.99 * radius {
            radius *= 2.0;
        } else if user {
            radius = (0.5 * radius).max(step * 2.0).max(1e-6);
        }

        // Model check: a linear phi and a quadratic G make one step exact.
        let exact = match b.family() {
            Family::Bilinear => {
                let mismatch = (0..kn)
                    .into_par_iter()
                    .map(|k| {
                        let pk = &pbar[k * d..(k + 1) * d];
                        g_model(spec, k, pk)
                            .map(|m| {
                                // gradient of the model used in this step, at its solution
                                let old = &models[k];
                                let mut worst = 0.0f64;
                                for i in 0..d {
                                    let mut model_grad = c[k * nv + 1 + i] / omega[k];
                                    for j in 0..d {
                                        model_grad += old.hess[i * d + j] * pk[j];
                                    }
                                    worst = worst.max((m.grad[i] - model_grad).abs());
                                }
                                worst
                            })
                            .unwrap_or(f64::INFINITY)
                    })
                    .reduce(|| 0.0, f64::max);
                mismatch <= 1e-8
            }
            _ => false,
        };
        let ywidth = (0..d).map(|i| ydom.width(i)).fold(f64::INFINITY, f64::min);
        if exact || step <= 1e-9 * ywidth {
            break;
        }
    }
    out.u = ubar;
    out.p = pbar;
    Ok(out)
}

/// One piece per node, `y_k = Y(x_k, p_k)` and `a_k = u_k - b(x_k, y_k)`,
/// dropping copies of the null piece and of earlier pieces.
pub fn menu_from_nodes(spec: &ProblemSpec, sol: &NodeSolution) -> Result<BConvexFunction> {
    let grid = spec.grid();
    let b = spec.benefit();
    let d = grid.dim();
    let null = spec.null_piece().clone();
    let mut pieces = vec![null.clone()];
    // equal up to the accuracy of the interior-point solution
    let ywidth = (0..d).map(|i| b.y_domain().width(i)).fold(f64::INFINITY, f64::min);
    let same = |p: &BAffinePiece, y: &[f64], a: f64| {
        (p.a - a).abs() <= 1e-9 * (1.0 + a.abs()) && p.y.iter().zip(y).all(|(s, t)| (s - t).abs() <= 1e-8 * ywidth)
    };
    for k in 0..grid.len() {
        let x = grid.point(k);
        let p = &sol.p[k * d..(k + 1) * d];
        let y = match b.invert_Y(x, p) {
            Ok(y) => y,
            Err(_) => continue,
        };
        let a = sol.u[k] - b.eval(x, &y);
        // nodes sitting on the participation bound keep the null product
        let nu = b.eval(x, &null.y) + null.a;
        if sol.u[k] - nu <= 1e-9 * (1.0 + nu.abs())
            || same(&null, &y, a)
            || pieces.last().is_some_and(|q| same(q, &y, a))
        {
            continue;
        }
        pieces.push(BAffinePiece::new(y, a));
    }
    BConvexFunction::new(b.clone(), pieces)
}
