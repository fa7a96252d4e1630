//! Mehrotra predictor-corrector interior-point method for convex quadratic
//! programs `min 1/2 z'Qz + c'z  s.t.  A z >= b` with block-diagonal `Q` and
//! sparse rows. Newton systems go through the normal equations
//! `(Q + A' diag(lambda/s) A) dz = rhs`, factored in skyline storage.

use super::skyline::Skyline;

#[derive(Debug, Clone, Default)]
pub struct SparseRows {
    ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    rhs: Vec<f64>,
}

impl SparseRows {
    pub fn new() -> Self {
        SparseRows {
            ptr: vec![0],
            ..Default::default()
        }
    }

    pub fn push(&mut self, entries: &[(usize, f64)], rhs: f64) {
        for &(c, v) in entries {
            self.cols.push(c);
            self.vals.push(v);
        }
        self.ptr.push(self.cols.len());
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.ptr[r], self.ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    fn mul(&self, z: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let (c, v) = self.row(r);
            *o = c.iter().zip(v).map(|(&c, v)| v * z[c]).sum();
        }
    }

    fn mul_t(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            let (c, v) = self.row(r);
            for (&c, v) in c.iter().zip(v) {
                out[c] += v * yr;
            }
        }
    }
}

/// Dense symmetric block of `Q` occupying variables `start..start + size`.
#[derive(Debug, Clone)]
pub struct QBlock {
    pub start: usize,
    pub size: usize,
    /// row-major `size x size`
    pub data: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Qp {
    pub n: usize,
    pub q: Vec<QBlock>,
    pub c: Vec<f64>,
    pub rows: SparseRows,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step_frac: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            tol: 1e-10,
            max_iter: 200,
            step_frac: 0.99,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub slack: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub primal_res: f64,
    pub dual_res: f64,
    pub gap: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl Qp {
    fn q_mul(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for b in &self.q {
            for i in 0..b.size {
                let mut s = 0.0;
                for j in 0..b.size {
                    s += b.data[i * b.size + j] * z[b.start + j];
                }
                out[b.start + i] += s;
            }
        }
    }

    fn profile(&self) -> Vec<usize> {
        let mut first: Vec<usize> = (0..self.n).collect();
        for b in &self.q {
            for i in b.start..b.start + b.size {
                first[i] = first[i].min(b.start);
            }
        }
        for r in 0..self.rows.len() {
            let (c, _) = self.rows.row(r);
            if let Some(&m) = c.iter().min() {
                for &ci in c {
                    first[ci] = first[ci].min(m);
                }
            }
        }
        first
    }

    fn assemble(&self, h: &mut Skyline, d: &[f64]) {
        h.clear();
        for b in &self.q {
            for i in 0..b.size {
                for j in 0..=i {
                    h.add(b.start + i, b.start + j, b.data[i * b.size + j]);
                }
            }
        }
        for (r, &dr) in d.iter().enumerate() {
            let (c, v) = self.rows.row(r);
            for a in 0..c.len() {
                for bb in 0..c.len() {
                    if c[a] >= c[bb] {
                        h.add(c[a], c[bb], dr * v[a] * v[bb]);
                    }
                }
            }
        }
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let mut qz = vec![0.0; self.n];
        self.q_mul(z, &mut qz);
        z.iter().zip(&qz).map(|(a, b)| 0.5 * a * b).sum::<f64>()
            + z.iter().zip(&self.c).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn solve(&self, z0: &[f64], opts: IpmOptions) -> IpmResult {
        let n = self.n;
        let m = self.rows.len();
        let b = self.rows.rhs();
        let mut z = z0.to_vec();
        let mut az = vec![0.0; m];
        self.rows.mul(&z, &mut az);
        let mut s: Vec<f64> = az.iter().zip(b).map(|(a, b)| (a - b).max(0.0) + 1.0).collect();
        let mut lam = vec![1.0; m];

        let mut h = Skyline::new(self.profile());
        let bnorm = inf_norm(b);
        let cnorm = inf_norm(&self.c);
        let (mut rd, mut rp) = (vec![0.0; n], vec![0.0; m]);
        let mut tmp_n = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut d = vec![0.0; m];
        let mut rc = vec![0.0; m];
        let mut w = vec![0.0; m];
        let (mut ds, mut dl) = (vec![0.0; m], vec![0.0; m]);
        let mut res = IpmResult {
            z: vec![],
            lambda: vec![],
            slack: vec![],
            iterations: 0,
            converged: false,
            primal_res: f64::INFINITY,
            dual_res: f64::INFINITY,
            gap: f64::INFINITY,
        };

        let mut best = (
            f64::INFINITY,
            z.clone(),
            lam.clone(),
            s.clone(),
            f64::INFINITY,
            f64::INFINITY,
            f64::INFINITY,
        );
        let mut stall = 0;
        for it in 0..opts.max_iter {
            res.iterations = it;
            // residuals
            self.q_mul(&z, &mut rd);
            self.rows.mul_t(&lam, &mut tmp_n);
            for i in 0..n {
                rd[i] += self.c[i] - tmp_n[i];
            }
            self.rows.mul(&z, &mut az);
            for r in 0..m {
                rp[r] = az[r] - s[r] - b[r];
            }
            let sl: f64 = s.iter().zip(&lam).map(|(a, b)| a * b).sum();
            let mu = if m > 0 { sl / m as f64 } else { 0.0 };
            let pobj = self.objective(&z);
            res.primal_res = inf_norm(&rp) / (1.0 + bnorm);
            res.dual_res = inf_norm(&rd) / (1.0 + cnorm);
            res.gap = sl / (1.0 + pobj.abs());
            let merit = res.primal_res.max(res.dual_res).max(res.gap);
            if !merit.is_finite() {
                break;
            }
            if merit < best.0 {
                best = (
                    merit,
                    z.clone(),
                    lam.clone(),
                    s.clone(),
                    res.primal_res,
                    res.dual_res,
                    res.gap,
                );
                stall = 0;
            } else {
                stall += 1;
            }
            if merit <= opts.tol {
                break;
            }
            // the dual residual can floor out just above tol on badly scaled
            // normal equations; stop once nothing improves
            if stall >= 5 || (res.gap <= opts.tol * 1e-3 && res.primal_res <= opts.tol) {
                break;
            }

            for r in 0..m {
                d[r] = lam[r] / s[r];
            }
            self.assemble(&mut h, &d);
            h.factor(1e-14);

            // Newton direction for a given complementarity residual rc
            let direction =
                |rc: &[f64], dz: &mut Vec<f64>, ds: &mut [f64], dl: &mut [f64], w: &mut [f64], tmp: &mut Vec<f64>| {
                    for r in 0..m {
                        w[r] = (rc[r] + lam[r] * rp[r]) / s[r];
                    }
                    self.rows.mul_t(w, tmp);
                    for i in 0..n {
                        dz[i] = -rd[i] - tmp[i];
                    }
                    h.solve(dz);
                    self.rows.mul(dz, ds);
                    for r in 0..m {
                        ds[r] += rp[r];
                        dl[r] = -(rc[r] + lam[r] * ds[r]) / s[r];
                    }
                };
            let max_step = |v: &[f64], dv: &[f64]| -> f64 {
                let mut a = 1.0f64;
                for (x, dx) in v.iter().zip(dv) {
                    if *dx < 0.0 {
                        a = a.min(-x / dx);
                    }
                }
                a
            };

            // predictor
            for r in 0..m {
                rc[r] = s[r] * lam[r];
            }
            direction(&rc, &mut rhs, &mut ds, &mut dl, &mut w, &mut tmp_n);
            let ap = max_step(&s, &ds);
            let ad = max_step(&lam, &dl);
            let mu_aff: f64 =
                (0..m).map(|r| (s[r] + ap * ds[r]) * (lam[r] + ad * dl[r])).sum::<f64>() / m.max(1) as f64;
            let sigma = if mu > 0.0 {
                (mu_aff / mu).clamp(0.0, 1.0).powi(3)
            } else {
                0.0
            };

            // corrector
            for r in 0..m {
                rc[r] = s[r] * lam[r] + ds[r] * dl[r] - sigma * mu;
            }
            direction(&rc, &mut rhs, &mut ds, &mut dl, &mut w, &mut tmp_n);
            let alpha = (opts.step_frac * max_step(&s, &ds).min(max_step(&lam, &dl))).min(1.0);
            for i in 0..n {
                z[i] += alpha * rhs[i];
            }
            for r in 0..m {
                s[r] = (s[r] + alpha * ds[r]).max(1e-300);
                lam[r] = (lam[r] + alpha * dl[r]).max(1e-300);
            }
            res.iterations = it + 1;
        }
        let (merit, z, lam, s, pr, dr, gap) = best;
        res.converged = merit <= opts.tol;
        res.z = z;
        res.lambda = lam;
        res.slack = s;
        res.primal_res = pr;
        res.dual_res = dr;
        res.gap = gap;
        res
    }
}
