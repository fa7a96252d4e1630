//! Tilde coordinates anchored at a support `(x0, y0)`: the chart in which the
//! support becomes zero and the mixed Hessian at the anchor becomes identity.

use crate::bconvex::BConvexFunction;
use crate::benefit::{BenefitFunction, Family, NEWTON_MAX_ITER, NEWTON_TOL};
use crate::domain::{dot, norm, Region};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct TildeChart {
    x0: Vec<f64>,
    y0: Vec<f64>,
    /// Inverse of `b_xy(x0, y0)`, applied on the product side.
    normalizer: DMatrix<f64>,
    bxy0: DMatrix<f64>,
    benefit: Arc<BenefitFunction>,
    bx00: Vec<f64>,
    by00: Vec<f64>,
    b00: f64,
}

impl TildeChart {
    pub fn new(benefit: Arc<BenefitFunction>, x0: &[f64], y0: &[f64]) -> Result<Self> {
        benefit.x_domain().check("X", x0)?;
        benefit.y_domain().check("Y", y0)?;
        let bxy0 = benefit.bxy(x0, y0);
        let normalizer = bxy0.clone().try_inverse().ok_or_else(|| Error::NoPreimage {
            x: x0.to_vec(),
            p: vec![],
            reason: "mixed Hessian is singular at the chart anchor".into(),
        })?;
        Ok(TildeChart {
            x0: x0.to_vec(),
            y0: y0.to_vec(),
            normalizer,
            bxy0,
            bx00: benefit.bx(x0, y0),
            by00: benefit.by(x0, y0),
            b00: benefit.eval(x0, y0),
            benefit,
        })
    }

    /// Chart anchored at the support of `u` at `x0`.
    pub fn at_support(u: &BConvexFunction, x0: &[f64]) -> Result<Self> {
        let y0 = u.Yu_map(x0)?;
        Self::new(u.benefit().clone(), x0, &y0)
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn normalizer(&self) -> &DMatrix<f64> {
        &self.normalizer
    }

    pub fn benefit(&self) -> &Arc<BenefitFunction> {
        &self.benefit
    }

    pub fn to_tilde_x(&self, x: &[f64]) -> Vec<f64> {
        let by = self.benefit.by(x, &self.y0);
        by.iter().zip(&self.by00).map(|(a, b)| a - b).collect()
    }

    pub fn to_tilde_y(&self, y: &[f64]) -> Vec<f64> {
        let bx = self.benefit.bx(&self.x0, y);
        let d = DVector::from_iterator(bx.len(), bx.iter().zip(&self.bx00).map(|(a, b)| a - b));
        (&self.normalizer * d).iter().cloned().collect()
    }

    pub fn from_tilde_x(&self, xt: &[f64]) -> Result<Vec<f64>> {
        let x: Vec<f64> = match self.benefit.family() {
            Family::Bilinear | Family::QuadraticDistance => self.x0.iter().zip(xt).map(|(a, b)| a + b).collect(),
            Family::UserDefined => return self.newton_x(xt),
        };
        if self.benefit.x_domain().contains(&x) {
            Ok(x)
        } else {
            Err(Error::NoPreimage {
                x: self.x0.clone(),
                p: xt.to_vec(),
                reason: "tilde point has no preimage in X".into(),
            })
        }
    }

    fn newton_x(&self, xt: &[f64]) -> Result<Vec<f64>> {
        let n = xt.len();
        let dom: &Region = self.benefit.x_domain();
        let resid = |x: &[f64]| -> Vec<f64> {
            let t = self.to_tilde_x(x);
            t.iter().zip(xt).map(|(a, b)| a - b).collect()
        };
        let inf = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut x = self.x0.clone();
        let mut r = resid(&x);
        let mut polished = false;
        for _ in 0..NEWTON_MAX_ITER {
            let rn = inf(&r);
            if rn <= NEWTON_TOL && polished {
                return Ok(x);
            }
            let was_converged = rn <= NEWTON_TOL;
            let jac = self.benefit.bxy(&x, &self.y0).transpose();
            let step = jac
                .lu()
                .solve(&DVector::from_column_slice(&r))
                .ok_or_else(|| Error::NoPreimage {
                    x: self.x0.clone(),
                    p: xt.to_vec(),
                    reason: "singular mixed Hessian".into(),
                })?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = (0..n).map(|i| x[i] - t * step[i]).collect();
                if dom.contains(&trial) {
                    let rt = resid(&trial);
                    let tn = inf(&rt);
                    if tn < rn || (was_converged && tn <= 2.0 * rn + 1e-15) {
                        x = trial;
                        r = rt;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if was_converged {
                polished = true;
            } else if !accepted {
                break;
            }
        }
        if inf(&r) <= NEWTON_TOL {
            Ok(x)
        } else {
            Err(Error::NoPreimage {
                x: self.x0.clone(),
                p: xt.to_vec(),
                reason: "tilde point has no preimage in X".into(),
            })
        }
    }

    pub fn from_tilde_y(&self, yt: &[f64]) -> Result<Vec<f64>> {
        let d = &self.bxy0 * DVector::from_column_slice(yt);
        let p: Vec<f64> = d.iter().zip(&self.bx00).map(|(a, b)| a + b).collect();
        self.benefit.invert_Y(&self.x0, &p)
    }

    /// `u(x) - [u(x0) + b(x, y0) - b(x0, y0)]` at the preimage of `xt`.
    pub fn tilde_u(&self, u: &BConvexFunction, xt: &[f64]) -> Result<f64> {
        let x = self.from_tilde_x(xt)?;
        Ok(self.tilde_u_at(u, &x))
    }

    fn tilde_u_at(&self, u: &BConvexFunction, x: &[f64]) -> f64 {
        let u0 = u.eval_unchecked(&self.x0).0;
        u.eval_unchecked(x).0 - (u0 + self.benefit.eval(x, &self.y0) - self.b00)
    }

    pub fn tilde_b(&self, xt: &[f64], yt: &[f64]) -> Result<f64> {
        let x = self.from_tilde_x(xt)?;
        let y = self.from_tilde_y(yt)?;
        Ok(self.tilde_b_at(&x, &y))
    }

    fn tilde_b_at(&self, x: &[f64], y: &[f64]) -> f64 {
        let b = &self.benefit;
        b.eval(x, y) - (b.eval(&self.x0, y) + b.eval(x, &self.y0) - self.b00)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Report {
    /// min over segments of `(u~(p) + u~(q)) / 2 - u~((p + q) / 2)`
    pub min_midpoint_defect: f64,
    /// max over probes of `|b~(x~, y~) - x~.y~| / (|x~|^2 |y~|^2)`
    pub max_expansion_ratio: f64,
    /// max over segments of `u~(m) - max(u~(p), u~(q))`, floored at zero
    pub section_defect: f64,
    /// smallest `u~` seen; zero or above for a chart anchored at a support
    pub min_tilde_u: f64,
    pub probes: usize,
}

fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let l = norm(&v);
        if l > 1e-3 && l <= 1.0 {
            return v.iter().map(|a| a / l).collect();
        }
    }
}

/// Sampled checks of tilde-geometry: midpoint convexity of `u~`, convexity of
/// its sublevel sets, and the size of the fourth-order remainder of `b~`.
pub fn verify_lemma2(chart: &TildeChart, u: &BConvexFunction, probes: usize, seed: u64) -> Lemma2Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = chart.benefit();
    let xdom = b.x_domain();
    let n = b.dim();
    let mut rep = Lemma2Report {
        min_midpoint_defect: f64::INFINITY,
        max_expansion_ratio: 0.0,
        section_defect: 0.0,
        min_tilde_u: f64::INFINITY,
        probes: 0,
    };
    let mut attempts = 0;
    while rep.probes < probes && attempts < 50 * probes.max(1) {
        attempts += 1;
        let xp = xdom.sample(&mut rng);
        let xq = xdom.sample(&mut rng);
        let (tp, tq) = (chart.to_tilde_x(&xp), chart.to_tilde_x(&xq));
        let tm: Vec<f64> = tp.iter().zip(&tq).map(|(a, c)| 0.5 * (a + c)).collect();
        let Ok(xm) = chart.from_tilde_x(&tm) else { continue };
        let (up, uq, um) = (
            chart.tilde_u_at(u, &xp),
            chart.tilde_u_at(u, &xq),
            chart.tilde_u_at(u, &xm),
        );
        rep.min_midpoint_defect = rep.min_midpoint_defect.min(0.5 * (up + uq) - um);
        rep.section_defect = rep.section_defect.max(um - up.max(uq));
        rep.min_tilde_u = rep.min_tilde_u.min(up.min(uq).min(um));
        rep.probes += 1;
    }

    let rx = 0.2 * xdom.diam();
    let ry = 0.2 * b.y_domain().diam();
    let mut hits = 0;
    attempts = 0;
    while hits < probes && attempts < 50 * probes.max(1) {
        attempts += 1;
        let sx = rng.random_range(0.25..=1.0) * rx;
        let sy = rng.random_range(0.25..=1.0) * ry;
        let xt: Vec<f64> = random_unit(n, &mut rng).iter().map(|v| v * sx).collect();
        let yt: Vec<f64> = random_unit(n, &mut rng).iter().map(|v| v * sy).collect();
        let (Ok(x), Ok(y)) = (chart.from_tilde_x(&xt), chart.from_tilde_y(&yt)) else {
            continue;
        };
        // use the chart images of the recovered points so round-off in the
        // inverses does not leak into the ratio
        let (xt, yt) = (chart.to_tilde_x(&x), chart.to_tilde_y(&y));
        let denom = dot(&xt, &xt) * dot(&yt, &yt);
        if denom <= 0.0 {
            continue;
        }
        let ratio = (chart.tilde_b_at(&x, &y) - dot(&xt, &yt)).abs() / denom;
        rep.max_expansion_ratio = rep.max_expansion_ratio.max(ratio);
        hits += 1;
    }
    if rep.probes == 0 {
        rep.min_midpoint_defect = 0.0;
        rep.min_tilde_u = 0.0;
    }
    rep
}
