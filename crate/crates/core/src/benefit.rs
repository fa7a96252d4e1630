//! Benefit functions b(x, y), their derivatives, the inverse momentum map
//! Y(x, p), b*-segments, and sampled checks of the structural conditions.

use crate::domain::{norm, Region};
use crate::error::{Error, Result};
use crate::expr::{Expr, Scope};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_FD_STEP: f64 = 1e-4;
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 100;
/// Relative step for the momentum differences in the B3 form.
pub const B3_STEP: f64 = 1e-2;
/// Relative step for the p-Hessian in the b*-convexity gate.
pub const BSTAR_HESS_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Bilinear,
    QuadraticDistance,
    UserDefined,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::Bilinear => "Bilinear",
            Family::QuadraticDistance => "QuadraticDistance",
            Family::UserDefined => "UserDefined",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct BenefitFunction {
    family: Family,
    expr: Option<Expr>,
    x_domain: Region,
    y_domain: Region,
    fd_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BStarSegment {
    pub x0: Vec<f64>,
    pub y_start: Vec<f64>,
    pub y_end: Vec<f64>,
    /// `(t, y_t)` for `t = j / k`, `j = 0..=k`.
    pub samples: Vec<(f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoeperReport {
    /// max over samples of `g(t) - max(g(0), g(1))`
    pub excess: f64,
    /// min over samples of the second difference of `t -> g(t)`
    pub min_second_diff: f64,
    pub worst_x: Vec<f64>,
    pub worst_t: f64,
}

impl BenefitFunction {
    fn build(family: Family, expr: Option<Expr>, x: Region, y: Region) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::Config(format!(
                "x and y domains have dimensions {} and {}",
                x.dim(),
                y.dim()
            )));
        }
        Ok(BenefitFunction {
            family,
            expr,
            x_domain: x,
            y_domain: y,
            fd_step: DEFAULT_FD_STEP,
        })
    }

    pub fn bilinear(x_domain: Region, y_domain: Region) -> Result<Self> {
        Self::build(Family::Bilinear, None, x_domain, y_domain)
    }

    pub fn quadratic_distance(x_domain: Region, y_domain: Region) -> Result<Self> {
        Self::build(Family::QuadraticDistance, None, x_domain, y_domain)
    }

    pub fn user_defined(src: &str, x_domain: Region, y_domain: Region) -> Result<Self> {
        let e = Expr::parse(src, x_domain.dim(), Scope::XY)?;
        let b = Self::build(Family::UserDefined, Some(e), x_domain, y_domain)?;
        b.check_finite()?;
        Ok(b)
    }

    pub fn with_fd_step(mut self, fd_step: f64) -> Result<Self> {
        if !(fd_step > 0.0) {
            return Err(Error::Config("fd_step must be positive".into()));
        }
        self.fd_step = fd_step;
        Ok(self)
    }

    // Corners and center of the product box.
    fn check_finite(&self) -> Result<()> {
        let n = self.dim();
        let mut xs = vec![self.x_domain.center()];
        let mut ys = vec![self.y_domain.center()];
        for mask in 0..(1usize << n.min(4)) {
            let pick = |r: &Region| -> Vec<f64> {
                (0..n)
                    .map(|i| {
                        if mask >> i.min(3) & 1 == 1 {
                            r.hi()[i]
                        } else {
                            r.lo()[i]
                        }
                    })
                    .collect()
            };
            xs.push(pick(&self.x_domain));
            ys.push(pick(&self.y_domain));
        }
        for x in &xs {
            for y in &ys {
                let v = self.eval(x, y);
                if !v.is_finite() {
                    return Err(Error::Config(format!("benefit is not finite at x = {x:?}, y = {y:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn expr(&self) -> Option<&Expr> {
        self.expr.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.x_domain.dim()
    }

    pub fn x_domain(&self) -> &Region {
        &self.x_domain
    }

    pub fn y_domain(&self) -> &Region {
        &self.y_domain
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            Family::Bilinear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            Family::QuadraticDistance => -0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            Family::UserDefined => self.expr.as_ref().unwrap().eval(x, y),
        }
    }

    fn hx(&self, i: usize) -> f64 {
        self.fd_step * self.x_domain.width(i)
    }

    fn hy(&self, j: usize) -> f64 {
        self.fd_step * self.y_domain.width(j)
    }

    /// `b_x(x, y)` without domain checks.
    pub fn bx_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self.family {
            Family::Bilinear => out.copy_from_slice(y),
            Family::QuadraticDistance => {
                for i in 0..x.len() {
                    out[i] = y[i] - x[i];
                }
            }
            Family::UserDefined => {
                let mut xp = x.to_vec();
                for i in 0..x.len() {
                    let h = self.hx(i);
                    xp[i] = x[i] + h;
                    let fp = self.eval(&xp, y);
                    xp[i] = x[i] - h;
                    let fm = self.eval(&xp, y);
                    xp[i] = x[i];
                    out[i] = (fp - fm) / (2.0 * h);
                }
            }
        }
    }

    pub fn bx(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.bx_into(x, y, &mut out);
        out
    }

    /// `b_y(x, y)` without domain checks.
    pub fn by(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match self.family {
            Family::Bilinear => x.to_vec(),
            Family::QuadraticDistance => x.iter().zip(y).map(|(a, b)| a - b).collect(),
            Family::UserDefined => {
                let mut yp = y.to_vec();
                (0..y.len())
                    .map(|j| {
                        let h = self.hy(j);
                        yp[j] = y[j] + h;
                        let fp = self.eval(x, &yp);
                        yp[j] = y[j] - h;
                        let fm = self.eval(x, &yp);
                        yp[j] = y[j];
                        (fp - fm) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }

    /// Mixed Hessian, entry `(i, j)` is the derivative in `x_i` and `y_j`.
    pub fn bxy(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        match self.family {
            Family::Bilinear | Family::QuadraticDistance => DMatrix::identity(n, n),
            Family::UserDefined => {
                let mut m = DMatrix::zeros(n, n);
                let mut yp = y.to_vec();
                let mut gp = vec![0.0; n];
                let mut gm = vec![0.0; n];
                for j in 0..n {
                    let h = self.hy(j);
                    yp[j] = y[j] + h;
                    self.bx_into(x, &yp, &mut gp);
                    yp[j] = y[j] - h;
                    self.bx_into(x, &yp, &mut gm);
                    yp[j] = y[j];
                    for i in 0..n {
                        m[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
                    }
                }
                m
            }
        }
    }

    /// `xi^T b_xx(x, y) xi`; `tau` is the difference step for user families.
    fn bxx_form(&self, x: &[f64], y: &[f64], xi: &[f64], tau: f64) -> f64 {
        match self.family {
            Family::Bilinear => 0.0,
            Family::QuadraticDistance => -xi.iter().map(|v| v * v).sum::<f64>(),
            Family::UserDefined => {
                let xp: Vec<f64> = x.iter().zip(xi).map(|(a, b)| a + tau * b).collect();
                let xm: Vec<f64> = x.iter().zip(xi).map(|(a, b)| a - tau * b).collect();
                (self.eval(&xp, y) - 2.0 * self.eval(x, y) + self.eval(&xm, y)) / (tau * tau)
            }
        }
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.x_domain.check("X", x)?;
        self.y_domain.check("Y", y)?;
        Ok(self.bx(x, y))
    }

    /// Solve `b_x(x, y) = p` for `y` in the closed product domain.
    #[allow(non_snake_case)]
    pub fn invert_Y(&self, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        let no = |reason: &str| Error::NoPreimage {
            x: x.to_vec(),
            p: p.to_vec(),
            reason: reason.to_string(),
        };
        let y = match self.family {
            Family::Bilinear => p.to_vec(),
            Family::QuadraticDistance => x.iter().zip(p).map(|(a, b)| a + b).collect(),
            Family::UserDefined => return self.newton_y(x, p),
        };
        if self.y_domain.contains(&y) {
            Ok(y)
        } else {
            Err(no("preimage outside the product domain"))
        }
    }

    fn newton_y(&self, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        let no = |reason: String| Error::NoPreimage {
            x: x.to_vec(),
            p: p.to_vec(),
            reason,
        };
        let n = x.len();
        let mut y = self.y_domain.center();
        let mut r = vec![0.0; n];
        let resid = |y: &[f64], r: &mut [f64]| -> f64 {
            self.bx_into(x, y, r);
            for i in 0..n {
                r[i] -= p[i];
            }
            r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let mut rn = resid(&y, &mut r);
        let mut polished = false;
        for _ in 0..NEWTON_MAX_ITER {
            if rn <= NEWTON_TOL && polished {
                return Ok(y);
            }
            // one extra step past the tolerance sharpens y for difference quotients
            let was_converged = rn <= NEWTON_TOL;
            let j = self.bxy(x, &y);
            let step = match j.lu().solve(&DVector::from_column_slice(&r)) {
                Some(s) => s,
                None => return Err(no("singular mixed Hessian".into())),
            };
            let mut t = 1.0;
            let mut accepted = false;
            let mut trial = vec![0.0; n];
            let mut rt = vec![0.0; n];
            for _ in 0..40 {
                for i in 0..n {
                    trial[i] = y[i] - t * step[i];
                }
                if self.y_domain.contains(&trial) {
                    let tn = resid(&trial, &mut rt);
                    if tn < rn || (was_converged && tn <= 2.0 * rn + 1e-15) {
                        y.copy_from_slice(&trial);
                        r.copy_from_slice(&rt);
                        rn = tn;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if was_converged {
                polished = true;
            } else if !accepted {
                return Err(no("Newton iterate cannot stay inside the product domain".into()));
            }
        }
        if rn <= NEWTON_TOL {
            Ok(y)
        } else {
            Err(no(format!(
                "no convergence in {NEWTON_MAX_ITER} steps (residual {rn:e})"
            )))
        }
    }

    /// Products whose momenta at `x0` interpolate linearly between those of
    /// `y0` and `y1`, sampled at `k + 1` equispaced parameters.
    pub fn bstar_segment(&self, x0: &[f64], y0: &[f64], y1: &[f64], k: usize) -> Result<BStarSegment> {
        let k = k.max(1);
        let q0 = self.bx(x0, y0);
        let q1 = self.bx(x0, y1);
        let mut samples = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let t = j as f64 / k as f64;
            let y = if j == 0 {
                y0.to_vec()
            } else if j == k {
                y1.to_vec()
            } else {
                let q: Vec<f64> = q0.iter().zip(&q1).map(|(a, b)| (1.0 - t) * a + t * b).collect();
                self.invert_Y(x0, &q)?
            };
            samples.push((t, y));
        }
        Ok(BStarSegment {
            x0: x0.to_vec(),
            y_start: y0.to_vec(),
            y_end: y1.to_vec(),
            samples,
        })
    }

    /// The quartic form `D_pp [xi^T b_xx(x, Y(x, p)) xi]` contracted with `eta`,
    /// by second differences in `p`.
    #[allow(non_snake_case)]
    pub fn check_B3(&self, x: &[f64], p: &[f64], xi: &[f64], eta: &[f64]) -> Result<f64> {
        let n = x.len();
        let min_w = |r: &Region| (0..n).map(|i| r.width(i)).fold(f64::INFINITY, f64::min);
        let tau = B3_STEP * min_w(&self.x_domain);
        let delta = B3_STEP * min_w(&self.y_domain);
        let mut f = [0.0; 3];
        for (s, slot) in [-1.0, 0.0, 1.0].iter().zip(f.iter_mut()) {
            let ps: Vec<f64> = p.iter().zip(eta).map(|(a, b)| a + s * delta * b).collect();
            let y = self.invert_Y(x, &ps)?;
            *slot = self.bxx_form(x, &y, xi, tau);
        }
        Ok((f[0] - 2.0 * f[1] + f[2]) / (delta * delta))
    }

    /// Loeper maximum-principle witness along the b*-segment from `y0` to `y1`
    /// with respect to `x0`.
    pub fn check_loeper(
        &self,
        x0: &[f64],
        y0: &[f64],
        y1: &[f64],
        x_samples: &[Vec<f64>],
        t_samples: usize,
    ) -> Result<LoeperReport> {
        let seg = self.bstar_segment(x0, y0, y1, t_samples)?;
        let mut rep = LoeperReport {
            excess: f64::NEG_INFINITY,
            min_second_diff: f64::INFINITY,
            worst_x: x0.to_vec(),
            worst_t: 0.0,
        };
        let mut g = vec![0.0; seg.samples.len()];
        for x in x_samples {
            for (j, (_, y)) in seg.samples.iter().enumerate() {
                g[j] = self.eval(x, y) - self.eval(x0, y);
            }
            let ends = g[0].max(g[g.len() - 1]);
            for (j, gj) in g.iter().enumerate() {
                if gj - ends > rep.excess {
                    rep.excess = gj - ends;
                    rep.worst_x = x.clone();
                    rep.worst_t = seg.samples[j].0;
                }
            }
            for w in g.windows(3) {
                rep.min_second_diff = rep.min_second_diff.min(w[0] - 2.0 * w[1] + w[2]);
            }
        }
        if rep.min_second_diff == f64::INFINITY {
            rep.min_second_diff = 0.0;
        }
        if rep.excess == f64::NEG_INFINITY {
            rep.excess = 0.0;
        }
        Ok(rep)
    }

    /// Minimum eigenvalue of the p-Hessian of `c(Y(x,p)) - b(x, Y(x,p))` over
    /// all sample pairs.
    pub fn check_uniform_bstar_convexity(
        &self,
        cost: &dyn Fn(&[f64]) -> f64,
        x_samples: &[Vec<f64>],
        p_samples: &[Vec<f64>],
    ) -> Result<f64> {
        let n = self.dim();
        let d = BSTAR_HESS_STEP * (0..n).map(|i| self.y_domain.width(i)).fold(f64::INFINITY, f64::min);
        let mut worst = f64::INFINITY;
        for x in x_samples {
            let g = |p: &[f64]| -> Result<f64> {
                let y = self.invert_Y(x, p)?;
                Ok(cost(&y) - self.eval(x, &y))
            };
            for p in p_samples {
                let h = fd_hessian(&g, p, d)?;
                let ev = SymmetricEigen::new(h).eigenvalues;
                worst = worst.min(ev.iter().cloned().fold(f64::INFINITY, f64::min));
            }
        }
        Ok(worst)
    }

    /// Momenta that are safely inside the range of `b_x(x, .)`: images of
    /// products drawn from the product box inset by `inset` of its width.
    pub fn sample_momentum<R: Rng + ?Sized>(&self, x: &[f64], inset: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let y = sample_inset(&self.y_domain, inset, rng);
        (self.bx(x, &y), y)
    }
}

pub(crate) fn sample_inset<R: Rng + ?Sized>(r: &Region, inset: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let y: Vec<f64> = (0..r.dim())
            .map(|i| {
                let pad = inset * r.width(i);
                rng.random_range(r.lo()[i] + pad..=r.hi()[i] - pad)
            })
            .collect();
        let ok = match r.ball() {
            Some(b) => crate::domain::dist(&y, &b.center) <= b.radius * (1.0 - inset),
            None => true,
        };
        if ok {
            return y;
        }
    }
}

pub(crate) fn fd_hessian(g: &dyn Fn(&[f64]) -> Result<f64>, p: &[f64], d: f64) -> Result<DMatrix<f64>> {
    let n = p.len();
    let mut h = DMatrix::zeros(n, n);
    let g0 = g(p)?;
    let mut q = p.to_vec();
    for i in 0..n {
        q[i] = p[i] + d;
        let gp = g(&q)?;
        q[i] = p[i] - d;
        let gm = g(&q)?;
        q[i] = p[i];
        h[(i, i)] = (gp - 2.0 * g0 + gm) / (d * d);
        for j in 0..i {
            let mut s = 0.0;
            for (si, sj, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                q[i] = p[i] + si * d;
                q[j] = p[j] + sj * d;
                s += w * g(&q)?;
            }
            q[i] = p[i];
            q[j] = p[j];
            h[(i, j)] = s / (4.0 * d * d);
            h[(j, i)] = h[(i, j)];
        }
    }
    Ok(h)
}

fn unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let l = norm(&v);
        if l > 1e-3 && l <= 1.0 {
            return v.iter().map(|a| a / l).collect();
        }
    }
}

/// Worst case of a fuzzing harness: the extreme value and where it occurred.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzReport {
    pub samples: usize,
    pub worst_value: f64,
    pub worst_tuple: Vec<Vec<f64>>,
    pub failures: usize,
}

/// B3 form at random `(x, p, xi, eta)`; reports the most negative value.
pub fn fuzz_b3(b: &BenefitFunction, samples: usize, seed: u64) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = b.dim();
    let mut rep = FuzzReport {
        samples,
        worst_value: f64::INFINITY,
        worst_tuple: vec![],
        failures: 0,
    };
    for _ in 0..samples {
        let x = b.x_domain().sample(&mut rng);
        let (p, _) = b.sample_momentum(&x, 0.1, &mut rng);
        let xi = unit(n, &mut rng);
        let eta = unit(n, &mut rng);
        match b.check_B3(&x, &p, &xi, &eta) {
            Ok(v) if v < rep.worst_value => {
                rep.worst_value = v;
                rep.worst_tuple = vec![x, p, xi, eta];
            }
            Ok(_) => {}
            Err(_) => rep.failures += 1,
        }
    }
    rep
}

/// Loeper excess over random `(x0, y0, y1, x)` tuples; reports the largest
/// excess together with the smallest second difference seen.
pub fn fuzz_loeper(b: &BenefitFunction, samples: usize, seed: u64) -> (FuzzReport, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = FuzzReport {
        samples,
        worst_value: f64::NEG_INFINITY,
        worst_tuple: vec![],
        failures: 0,
    };
    let mut min_sd = f64::INFINITY;
    for _ in 0..samples {
        let x0 = b.x_domain().sample(&mut rng);
        let y0 = sample_inset(b.y_domain(), 0.0, &mut rng);
        let y1 = sample_inset(b.y_domain(), 0.0, &mut rng);
        let x = b.x_domain().sample(&mut rng);
        match b.check_loeper(&x0, &y0, &y1, std::slice::from_ref(&x), 16) {
            Ok(r) => {
                min_sd = min_sd.min(r.min_second_diff);
                if r.excess > rep.worst_value {
                    rep.worst_value = r.excess;
                    rep.worst_tuple = vec![x0, y0, y1, x];
                }
            }
            Err(_) => rep.failures += 1,
        }
    }
    (rep, min_sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Region;

    fn sym(n: usize, a: f64) -> Region {
        Region::new(vec![-a; n], vec![a; n], None).unwrap()
    }

    fn bil(n: usize) -> BenefitFunction {
        BenefitFunction::bilinear(sym(n, 1.0), sym(n, 2.0)).unwrap()
    }

    fn qd(n: usize) -> BenefitFunction {
        BenefitFunction::quadratic_distance(sym(n, 1.0), sym(n, 2.0)).unwrap()
    }

    #[test]
    fn grad_x_closed_forms() {
        assert_eq!(bil(2).grad_x(&[0.3, 0.7], &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(qd(2).grad_x(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(bil(2).grad_x(&[0.9, -0.2], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(bil(2).grad_x(&[3.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn quadratic_distance_gradient_matches_differences() {
        let b = qd(2);
        let (x, y) = ([0.0, 0.0], [1.0, 1.0]);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (b.eval(&xp, &y) - b.eval(&xm, &y)) / (2.0 * h);
            assert!((fd - b.bx(&x, &y)[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn invert_closed_forms() {
        assert_eq!(bil(2).invert_Y(&[0.5, 0.5], &[0.4, -0.1]).unwrap(), vec![0.4, -0.1]);
        let y = qd(2).invert_Y(&[0.2, 0.2], &[0.1, 0.0]).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-15 && (y[1] - 0.2).abs() < 1e-15);
        assert!(matches!(
            bil(2).invert_Y(&[0.0, 0.0], &[2.5, 0.0]),
            Err(Error::NoPreimage { .. })
        ));
    }

    #[test]
    fn user_defined_matches_builtin_derivatives() {
        let u = BenefitFunction::user_defined("x1*y1 + x2*y2", sym(2, 1.0), sym(2, 2.0)).unwrap();
        let b = bil(2);
        let (x, y) = ([0.3, -0.4], [0.7, 1.1]);
        let h = u.fd_step();
        for (a, e) in u.bx(&x, &y).iter().zip(b.bx(&x, &y)) {
            assert!((a - e).abs() <= 10.0 * h * h);
        }
        for (a, e) in u.by(&x, &y).iter().zip(b.by(&x, &y)) {
            assert!((a - e).abs() <= 10.0 * h * h);
        }
        let m = u.bxy(&x, &y);
        assert!((m - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-6);
        let y2 = u.invert_Y(&x, &[0.4, -0.1]).unwrap();
        assert!((y2[0] - 0.4).abs() < 1e-9 && (y2[1] + 0.1).abs() < 1e-9);
    }

    #[test]
    fn newton_inverts_nonlinear_family() {
        let b = BenefitFunction::user_defined("x1*y1 + 0.1*x1^2*y1^2", sym(1, 1.0), sym(1, 1.0)).unwrap();
        let x = [0.5];
        for &y in &[-0.9, -0.3, 0.0, 0.4, 0.95] {
            let p = b.bx(&x, &[y]);
            let back = b.invert_Y(&x, &p).unwrap();
            assert!((back[0] - y).abs() < 1e-9, "{y} -> {back:?}");
        }
        assert!(b.invert_Y(&x, &[5.0]).is_err());
    }

    #[test]
    fn bstar_segment_examples() {
        let s = qd(2).bstar_segment(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], 2).unwrap();
        assert_eq!(s.samples[1].1, vec![0.5, 0.0]);
        assert_eq!(s.samples[0].1, vec![0.0, 0.0]);
        let s = bil(1).bstar_segment(&[0.3], &[-1.0], &[1.0], 4).unwrap();
        for (t, y) in &s.samples {
            assert!((y[0] - (2.0 * t - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn b3_vanishes_for_builtins() {
        for b in [bil(2), qd(2)] {
            let v = b.check_B3(&[0.1, 0.2], &[0.3, -0.2], &[1.0, 0.0], &[0.6, 0.8]).unwrap();
            assert!(v.abs() <= 1e-8);
        }
    }

    #[test]
    fn b3_detects_manufactured_violation() {
        // b = x y - c x^2 y^2: at x = 0, Y(0, p) = p, and the form is -4 c xi^2 eta^2
        let c = 0.2;
        let b = BenefitFunction::user_defined("x1*y1 - 0.2*x1^2*y1^2", sym(1, 1.0), sym(1, 1.0)).unwrap();
        let v = b.check_B3(&[0.0], &[0.3], &[1.0], &[1.0]).unwrap();
        assert!((v + 4.0 * c).abs() < 1e-3, "{v}");

        // Away from x = 0, differentiate the closed-form inverse independently.
        let x = 0.4f64;
        let yinv = |p: f64| (1.0 - (1.0 - 8.0 * c * x * p).sqrt()) / (4.0 * c * x);
        let f = |p: f64| -2.0 * c * yinv(p).powi(2);
        let (p, d) = (0.2, 1e-3);
        let oracle =
            (-f(p + 2.0 * d) + 16.0 * f(p + d) - 30.0 * f(p) + 16.0 * f(p - d) - f(p - 2.0 * d)) / (12.0 * d * d);
        let v = b.check_B3(&[x], &[p], &[1.0], &[1.0]).unwrap();
        assert!(v < 0.0);
        assert!((v - oracle).abs() < 1e-2 * oracle.abs(), "{v} vs {oracle}");
    }

    #[test]
    fn loeper_examples() {
        let b = bil(2);
        let xs = vec![vec![0.5, -0.5], vec![-0.3, 0.9]];
        let r = b.check_loeper(&[0.0, 0.0], &[-1.0, 0.5], &[1.0, 1.0], &xs, 10).unwrap();
        assert!(r.excess <= 1e-15);
        let r = b
            .check_loeper(&[0.2, 0.2], &[-1.0, 0.5], &[1.0, 1.0], &[vec![0.2, 0.2]], 10)
            .unwrap();
        assert_eq!(r.excess, 0.0);
    }

    #[test]
    fn bstar_convexity_gate_values() {
        let xs = vec![vec![0.0, 0.0], vec![0.5, -0.5]];
        let ps = vec![vec![0.1, 0.2], vec![-0.4, 0.3]];
        let half = |y: &[f64]| 0.5 * (y[0] * y[0] + y[1] * y[1]);
        let full = |y: &[f64]| y[0] * y[0] + y[1] * y[1];
        let v = bil(2).check_uniform_bstar_convexity(&half, &xs, &ps).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        let v = bil(2).check_uniform_bstar_convexity(&full, &xs, &ps).unwrap();
        assert!((v - 2.0).abs() < 1e-6);
        // c(x + p) - b(x, x + p) = |x + p|^2 + |p|^2 / 2, Hessian 3 I
        let v = qd(2).check_uniform_bstar_convexity(&full, &xs, &ps).unwrap();
        assert!((v - 3.0).abs() < 1e-6);
    }

    #[test]
    fn fuzzers_are_quiet_on_builtins() {
        for b in [bil(2), qd(2)] {
            let r = fuzz_b3(&b, 200, 7);
            assert_eq!(r.failures, 0);
            assert!(r.worst_value.abs() <= 1e-6);
            let (r, sd) = fuzz_loeper(&b, 200, 7);
            assert!(r.worst_value <= 1e-8 && sd >= -1e-8);
        }
    }
}
