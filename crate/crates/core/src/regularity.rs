//! Measured C^{1,1} phenomenology of solved utilities: support gaps over
//! spheres, curvature ratios `h / r^2`, the trial b-affine function built from
//! a gap, the bilinear cap `max(u, sigma_h)`, and second-difference jumps
//! across the nonparticipation boundary.

use crate::bconvex::{BAffinePiece, BConvexFunction};
use crate::benefit::Family;
use crate::domain::{dot, norm, Grid};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::solver::ProblemSpec;
use crate::transforms::TildeChart;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

/// Unit directions probed on a sphere: both ends in 1D, 64 equispaced angles
/// in 2D, axes and diagonals beyond.
pub fn sphere_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        n => {
            let mut out = vec![];
            for i in 0..n {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; n];
                    v[i] = s;
                    out.push(v);
                }
            }
            let c = 1.0 / (n as f64).sqrt();
            for code in 0..(1usize << n) {
                out.push((0..n).map(|i| if code >> i & 1 == 1 { -c } else { c }).collect());
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportGap {
    pub h: f64,
    pub direction: Vec<f64>,
    /// the sphere point attaining `h`
    pub at: Vec<f64>,
    /// support `b(., y0) + a0` of `u` at `x0`
    pub support: BAffinePiece,
}

/// Largest excess of `u` over its b-support at `x0` on the sphere of radius
/// `r`. Ties go to the first lattice direction.
pub fn support_gap(u: &BConvexFunction, x0: &[f64], r: f64) -> Result<SupportGap> {
    let b = u.benefit();
    if !(r > 0.0) || !b.x_domain().contains_ball(x0, r) {
        return Err(Error::Domain {
            which: "X",
            point: x0.to_vec(),
        });
    }
    let (u0, i0) = u.eval_u(x0)?;
    let y0 = u.pieces()[i0].y.clone();
    let a0 = u0 - b.eval(x0, &y0);
    let mut best = SupportGap {
        h: f64::NEG_INFINITY,
        direction: vec![],
        at: vec![],
        support: BAffinePiece {
            y: y0.clone(),
            a: a0,
            frozen: false,
        },
    };
    for d in sphere_directions(x0.len()) {
        let x: Vec<f64> = x0.iter().zip(&d).map(|(a, v)| a + r * v).collect();
        let gap = u.eval_unchecked(&x).0 - b.eval(&x, &y0) - a0;
        if gap > best.h {
            best.h = gap;
            best.direction = d;
            best.at = x;
        }
    }
    // the support touches at x0, so negative values are rounding
    best.h = best.h.max(0.0);
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C11Row {
    pub x0: Vec<f64>,
    pub r: f64,
    pub h: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C11Scan {
    pub rows: Vec<C11Row>,
    pub max_ratio: f64,
}

pub fn c11_scan(u: &BConvexFunction, x0s: &[Vec<f64>], radii: &[f64]) -> Result<C11Scan> {
    let jobs: Vec<(usize, usize)> = (0..x0s.len())
        .flat_map(|i| (0..radii.len()).map(move |j| (i, j)))
        .collect();
    let rows: Vec<C11Row> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let r = radii[j];
            let g = support_gap(u, &x0s[i], r)?;
            Ok(C11Row {
                x0: x0s[i].clone(),
                r,
                h: g.h,
                ratio: g.h / (r * r),
            })
        })
        .collect::<Result<_>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(C11Scan { rows, max_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub x0: Vec<f64>,
    pub r: f64,
    pub h: f64,
    pub ratio: f64,
    /// derivative of the chart utility along the gap direction at the gap
    /// point, in momentum units
    pub kappa: f64,
    pub y_star: Vec<f64>,
    pub slab_width_over_r: f64,
    pub height_defect: f64,
    pub energy_lhs: f64,
    pub energy_margin: f64,
    pub section_mass: f64,
    pub section_nodes: usize,
}

/// A solved utility tabulated on the quadrature grid.
#[derive(Debug, Clone)]
pub struct Tabulated<'a> {
    spec: &'a ProblemSpec,
    u: &'a BConvexFunction,
    values: Vec<f64>,
    integrand: Vec<f64>,
}

impl<'a> Tabulated<'a> {
    pub fn new(spec: &'a ProblemSpec, u: &'a BConvexFunction) -> Self {
        let (values, winners) = u.on_grid(spec.grid());
        let integrand = spec.integrand(u, &winners);
        Tabulated {
            spec,
            u,
            values,
            integrand,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn u(&self) -> &BConvexFunction {
        self.u
    }

    /// Change of the quadrature loss when `piece` joins the menu; it wins
    /// exactly where it strictly exceeds `u`.
    pub fn energy_change(&self, piece: &BAffinePiece) -> (f64, Vec<usize>) {
        let b = self.u.benefit();
        let grid = self.spec.grid();
        let ca = self.spec.cost_of(&piece.y) + piece.a;
        let section: Vec<usize> = (0..grid.len())
            .filter(|&k| b.eval(grid.point(k), &piece.y) + piece.a > self.values[k])
            .collect();
        let terms: Vec<f64> = section
            .iter()
            .map(|&k| self.spec.weights()[k] * (ca - self.integrand[k]))
            .collect();
        (pairwise_sum(&terms), section)
    }

    /// Trial b-affine function from the gap at `(x0, r)`: in the chart at the
    /// support, its momentum at the gap point is `h / (2 r)` along the gap
    /// direction and it matches `u` there.
    pub fn trial_function(&self, x0: &[f64], r: f64) -> Result<(BAffinePiece, RegularityReport)> {
        let b = self.u.benefit();
        let grid = self.spec.grid();
        let gap = support_gap(self.u, x0, r)?;
        if !(gap.h > 0.0) {
            return Err(Error::HNonPositive {
                x0: x0.to_vec(),
                r,
                h: gap.h,
            });
        }
        let h = gap.h;
        let y0 = &gap.support.y;
        let chart = TildeChart::new(b.clone(), x0, y0)?;
        let xr = &gap.at;
        let xt = chart.to_tilde_x(xr);
        let rt = norm(&xt);
        let e: Vec<f64> = xt.iter().map(|v| v / rt).collect();

        // d x_tilde / d x at the gap point is b_xy(x_r, y0)^T
        let jt = b.bxy(xr, y0);
        let ev = DVector::from_column_slice(&e);
        let shift = &jt * (ev * (h / (2.0 * rt)));
        let q: Vec<f64> = b.bx(xr, y0).iter().zip(shift.iter()).map(|(a, s)| a + s).collect();
        let y_star = b.invert_Y(xr, &q)?;
        let (ur, iw) = self.u.eval_unchecked(xr);
        let piece = BAffinePiece::new(y_star.clone(), ur - b.eval(xr, &y_star));

        let kappa = {
            let du: Vec<f64> = b
                .bx(xr, &self.u.pieces()[iw].y)
                .iter()
                .zip(b.bx(xr, y0))
                .map(|(a, c)| a - c)
                .collect();
            let tm = jt.clone().try_inverse().map(|m| m * DVector::from_vec(du));
            tm.map(|v| dot(v.as_slice(), &e)).unwrap_or(f64::NAN)
        };

        let (energy_margin, section) = self.energy_change(&piece);
        let vol = grid.cell_volume();
        let section_mass = section.len() as f64 * vol;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut worst = f64::NEG_INFINITY;
        let cs = self.spec.cost_of(&y_star);
        let mut lhs_terms = Vec::with_capacity(section.len());
        for &k in &section {
            let x = grid.point(k);
            let s = dot(&chart.to_tilde_x(x), &e);
            lo = lo.min(s);
            hi = hi.max(s);
            let pv = b.eval(x, &y_star) + piece.a;
            worst = worst.max(pv - self.values[k]);
            let yw = &self.u.eval_unchecked(x);
            let yu = &self.u.pieces()[yw.1].y;
            let g_star = cs - b.eval(x, &y_star);
            let g_u = self.spec.cost_of(yu) - b.eval(x, yu);
            lhs_terms.push((g_star - g_u) * self.spec.weights()[k]);
        }
        let report = RegularityReport {
            x0: x0.to_vec(),
            r,
            h,
            ratio: h / (r * r),
            kappa,
            y_star,
            slab_width_over_r: if section.is_empty() { 0.0 } else { (hi - lo) / rt },
            height_defect: if section.is_empty() { -h } else { worst - h },
            energy_lhs: if section.is_empty() {
                0.0
            } else {
                pairwise_sum(&lhs_terms) / section_mass
            },
            energy_margin,
            section_mass,
            section_nodes: section.len(),
        };
        Ok((piece, report))
    }

    /// The bilinear cap `sigma_h = l + h/(2r) ((x - x0).d + r)` over the
    /// support `l`, with slab and Jensen diagnostics on the grid.
    pub fn bilinear_trial(&self, x0: &[f64], r: f64) -> Result<BilinearTrialReport> {
        let b = self.u.benefit();
        if b.family() != Family::Bilinear {
            return Err(Error::Family {
                expected: Family::Bilinear.to_string(),
                got: b.family().to_string(),
            });
        }
        let gap = support_gap(self.u, x0, r)?;
        if !(gap.h > 0.0) {
            return Err(Error::HNonPositive {
                x0: x0.to_vec(),
                r,
                h: gap.h,
            });
        }
        Ok(bilinear_cap(
            self.spec.grid(),
            &self.values,
            x0,
            r,
            gap.h,
            &gap.direction,
            &gap.support,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BilinearTrialReport {
    pub x0: Vec<f64>,
    pub r: f64,
    pub h: f64,
    pub direction: Vec<f64>,
    /// `max |(x - x0).d|` over the section minus `r`
    pub containment_defect: f64,
    /// `sum |Du - D sigma|^2 |cell|` over section nodes off the grid edge
    pub jensen_lhs: f64,
    /// `(h / r)^2 |S|`
    pub jensen_scale: f64,
    pub jensen_ratio: f64,
    /// `(n + 1) sum (sigma - u) |cell|` over the section
    pub upper_proxy: f64,
    pub section_mass: f64,
}

/// Grid-level cap diagnostics for a bilinear benefit and tabulated `u`.
pub fn bilinear_cap(
    grid: &Grid,
    values: &[f64],
    x0: &[f64],
    r: f64,
    h: f64,
    dir: &[f64],
    support: &BAffinePiece,
) -> BilinearTrialReport {
    let n = grid.dim();
    let s = h / (2.0 * r);
    let ys: Vec<f64> = support.y.iter().zip(dir).map(|(y, d)| y + s * d).collect();
    let a = support.a + s * (r - dot(x0, dir));
    let sigma = |x: &[f64]| dot(x, &ys) + a;
    let inside: Vec<bool> = (0..grid.len()).map(|k| sigma(grid.point(k)) > values[k]).collect();
    let vol = grid.cell_volume();
    let mut width = f64::NEG_INFINITY;
    let mut count = 0usize;
    let mut up = vec![];
    let mut jl = vec![];
    let hs = grid.spacing();
    for k in 0..grid.len() {
        if !inside[k] {
            continue;
        }
        count += 1;
        let x = grid.point(k);
        let rel: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
        width = width.max(dot(&rel, dir).abs());
        up.push((sigma(x) - values[k]) * vol);
        // central differences at section nodes away from the grid edge
        let mut sq = 0.0;
        let mut interior = true;
        for i in 0..n {
            let mut off = vec![0isize; n];
            off[i] = 1;
            let p = grid.neighbor(k, &off);
            off[i] = -1;
            let m = grid.neighbor(k, &off);
            match (p, m) {
                (Some(p), Some(m)) => {
                    let g = (values[p] - values[m]) / (2.0 * hs[i]);
                    sq += (g - ys[i]).powi(2);
                }
                _ => {
                    interior = false;
                    break;
                }
            }
        }
        if interior {
            jl.push(sq * vol);
        }
    }
    let section_mass = count as f64 * vol;
    let jensen_lhs = pairwise_sum(&jl);
    let jensen_scale = (h / r).powi(2) * section_mass;
    BilinearTrialReport {
        x0: x0.to_vec(),
        r,
        h,
        direction: dir.to_vec(),
        containment_defect: if count == 0 { -r } else { width - r },
        jensen_lhs,
        jensen_scale,
        jensen_ratio: if jensen_scale > 0.0 {
            jensen_lhs / jensen_scale
        } else {
            0.0
        },
        upper_proxy: (n as f64 + 1.0) * pairwise_sum(&up),
        section_mass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinkReport {
    /// 1D: boundary abscissa. 2D: mean boundary radius over rays.
    pub boundary: f64,
    pub boundary_min: f64,
    pub boundary_max: f64,
    pub left_second_diff: f64,
    pub right_second_diff: f64,
    pub jump: f64,
    pub rays: usize,
    pub stencil: f64,
}

// One-sided second difference with stencil m, walking away from the boundary.
fn wide_second_diff(f: &dyn Fn(f64) -> f64, t0: f64, step: f64) -> f64 {
    (f(t0) - 2.0 * f(t0 + step) + f(t0 + 2.0 * step)) / (step * step)
}

/// Locates where the winner first leaves the null piece, scanning nodes left
/// to right in 1D and rays from the centre of X in 2D, and compares one-sided
/// second differences two grid cells off the boundary on either side. The
/// stencil spans a sixteenth of the scan, wide enough to average out the
/// facets of a finite menu.
pub fn kink_scan(u: &BConvexFunction, grid: &Grid) -> Result<KinkReport> {
    if u.len() == 1 {
        return Err(Error::NoBoundary("menu holds only the null piece".into()));
    }
    let region = grid.region();
    let (rays, origin): (Vec<Vec<f64>>, Vec<f64>) = match grid.dim() {
        1 => (vec![vec![1.0]], region.lo().to_vec()),
        2 => (sphere_directions(2), region.center()),
        _ => return Err(Error::NoBoundary("kink scans cover one and two dimensions".into())),
    };
    let hmin = grid.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    let mut bounds = vec![];
    let (mut left, mut right) = (vec![], vec![]);
    let mut stencil = 0.0;
    for d in &rays {
        let at = |t: f64| -> Vec<f64> { origin.iter().zip(d).map(|(o, v)| o + t * v).collect() };
        // ray nodes: grid nodes in 1D, spacing-h samples in 2D
        let ts: Vec<f64> = if grid.dim() == 1 {
            (0..grid.len()).map(|k| grid.point(k)[0] - origin[0]).collect()
        } else {
            (0..)
                .map(|i| (i as f64 + 0.5) * hmin)
                .take_while(|&t| region.contains(&at(t)))
                .collect()
        };
        let winners: Vec<usize> = ts.iter().map(|&t| u.eval_unchecked(&at(t)).1).collect();
        let Some(kb) = winners.iter().position(|&w| w != 0) else {
            continue;
        };
        if kb == 0 {
            continue;
        }
        let m = (ts.len() / 16).max(1);
        let f = |t: f64| u.eval_unchecked(&at(t)).0;
        let step = m as f64 * hmin;
        let tb = ts[kb];
        let tl = ts[kb - 1];
        if tl - 2.0 * hmin - 2.0 * step < ts[0] - 1e-12 || tb + 2.0 * hmin + 2.0 * step > ts[ts.len() - 1] + 1e-12 {
            continue;
        }
        bounds.push(tb);
        left.push(wide_second_diff(&f, tl - 2.0 * hmin, -step));
        right.push(wide_second_diff(&f, tb + 2.0 * hmin, step));
        stencil = step;
    }
    if bounds.is_empty() {
        return Err(Error::NoBoundary(
            "no transition away from the null piece was found".into(),
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (l, rr) = (mean(&left), mean(&right));
    let origin_shift = if grid.dim() == 1 { origin[0] } else { 0.0 };
    Ok(KinkReport {
        boundary: mean(&bounds) + origin_shift,
        boundary_min: bounds.iter().cloned().fold(f64::INFINITY, f64::min) + origin_shift,
        boundary_max: bounds.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + origin_shift,
        left_second_diff: l,
        right_second_diff: rr,
        jump: rr - l,
        rays: bounds.len(),
        stencil,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub x0: Vec<f64>,
    pub r: f64,
    pub h: f64,
    pub ratio: f64,
    /// `None` when `h = 0` or the trial momentum has no preimage
    pub trial: Option<RegularityReport>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub max_ratio: f64,
    pub worst_height_defect: f64,
    pub worst_energy_margin: f64,
    pub max_slab_width_over_r: f64,
    pub trials: usize,
}

/// Gap and trial diagnostics for every `(x0, r)` pair.
pub fn regularity_scan(
    spec: &ProblemSpec,
    u: &BConvexFunction,
    x0s: &[Vec<f64>],
    radii: &[f64],
) -> Result<(Vec<ScanRow>, ScanSummary)> {
    let tab = Tabulated::new(spec, u);
    let jobs: Vec<(usize, usize)> = (0..x0s.len())
        .flat_map(|i| (0..radii.len()).map(move |j| (i, j)))
        .collect();
    let rows: Vec<ScanRow> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (x0, r) = (&x0s[i], radii[j]);
            let g = support_gap(u, x0, r)?;
            let (trial, note) = if g.h > 0.0 {
                match tab.trial_function(x0, r) {
                    Ok((_, rep)) => (Some(rep), None),
                    Err(e @ Error::NoPreimage { .. }) => (None, Some(e.to_string())),
                    Err(e) => return Err(e),
                }
            } else {
                (None, None)
            };
            Ok(ScanRow {
                x0: x0.clone(),
                r,
                h: g.h,
                ratio: g.h / (r * r),
                trial,
                note,
            })
        })
        .collect::<Result<_>>()?;
    let trials: Vec<&RegularityReport> = rows.iter().filter_map(|r| r.trial.as_ref()).collect();
    let summary = ScanSummary {
        max_ratio: rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
        worst_height_defect: trials.iter().map(|t| t.height_defect).fold(f64::NEG_INFINITY, f64::max),
        worst_energy_margin: trials.iter().map(|t| t.energy_margin).fold(f64::INFINITY, f64::min),
        max_slab_width_over_r: trials.iter().map(|t| t.slab_width_over_r).fold(0.0, f64::max),
        trials: trials.len(),
    };
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benefit::BenefitFunction;
    use crate::domain::{Placement, Region};
    use crate::solver::tests::{rc1d, tangent_menu};
    use std::sync::Arc;

    #[test]
    fn gap_examples_on_closed_form() {
        let spec = rc1d(1024);
        let u = tangent_menu(&spec, 2048);
        let g = support_gap(&u, &[0.75], 0.05).unwrap();
        assert!((g.h - 0.0025).abs() < 1e-6, "{}", g.h);
        assert!(support_gap(&u, &[0.25], 0.05).unwrap().h.abs() < 1e-15);
        let null = spec.null_menu();
        assert_eq!(support_gap(&null, &[0.6], 0.1).unwrap().h, 0.0);
        assert!(matches!(support_gap(&u, &[0.02], 0.05), Err(Error::Domain { .. })));
    }

    #[test]
    fn c11_ratios() {
        let spec = rc1d(1024);
        let u = tangent_menu(&spec, 2048);
        let x0s: Vec<Vec<f64>> = (1..10).map(|i| vec![i as f64 / 10.0]).collect();
        let radii = [0.01, 0.02, 0.03, 0.04, 0.05];
        let s = c11_scan(&u, &x0s, &radii).unwrap();
        // the support at x0 is the nearest tangent, off by a menu spacing
        assert!((s.max_ratio - 1.0).abs() < 0.03, "{}", s.max_ratio);
        assert_eq!(c11_scan(&spec.null_menu(), &x0s, &radii).unwrap().max_ratio, 0.0);
        // h grows with r
        for i in 0..x0s.len() {
            let hs: Vec<f64> = s.rows.iter().filter(|r| r.x0 == x0s[i]).map(|r| r.h).collect();
            assert!(hs.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn trial_function_on_closed_form() {
        let spec = rc1d(1024);
        let u = tangent_menu(&spec, 4096);
        let tab = Tabulated::new(&spec, &u);
        let (p, rep) = tab.trial_function(&[0.75], 0.03).unwrap();
        // gap point 0.78 (ties go to +1), slope u'(0.78) - u'(0.75) = 0.06
        assert!((rep.h - 9e-4).abs() < 1e-7);
        assert!((rep.kappa - 0.06).abs() < 1e-3, "{}", rep.kappa);
        assert!((p.y[0] - (0.5 + rep.h / 0.06)).abs() < 1e-12);
        assert!(rep.height_defect <= 1e-8);
        assert!(rep.slab_width_over_r <= 4.0);
        assert!(rep.section_mass > 0.0);
        assert!(rep.energy_margin >= -1e-6, "{}", rep.energy_margin);
        let null = spec.null_menu();
        let t0 = Tabulated::new(&spec, &null);
        assert!(matches!(
            t0.trial_function(&[0.5], 0.1),
            Err(Error::HNonPositive { .. })
        ));
    }

    #[test]
    fn bilinear_trial_contains_section_in_slab() {
        let spec = rc1d(1024);
        let u = tangent_menu(&spec, 4096);
        let tab = Tabulated::new(&spec, &u);
        let rep = tab.bilinear_trial(&[0.75], 0.03).unwrap();
        assert!(rep.containment_defect <= spec.grid().spacing()[0], "{rep:?}");
    }

    // u = |x|^2 / 2 at the origin: S is the ball of radius 3r/4 about
    // (r/4) e1 and the Jensen ratio is 9n / (4 (n + 2)).
    #[test]
    fn jensen_constant_of_quadratic() {
        for (n, counts, expect) in [(1usize, vec![4000usize], 0.75), (2, vec![400, 400], 1.125)] {
            let region = Region::new(vec![-1.0; n], vec![1.0; n], None).unwrap();
            let grid = Grid::new(region, counts, Placement::CellCentered).unwrap();
            let values: Vec<f64> = (0..grid.len())
                .map(|k| 0.5 * dot(grid.point(k), grid.point(k)))
                .collect();
            let r = 0.4;
            let mut dir = vec![0.0; n];
            dir[0] = 1.0;
            let support = BAffinePiece::new(vec![0.0; n], 0.0);
            let rep = bilinear_cap(&grid, &values, &vec![0.0; n], r, r * r / 2.0, &dir, &support);
            let exact_mass = if n == 1 {
                1.5 * r
            } else {
                std::f64::consts::PI * (0.75 * r).powi(2)
            };
            assert!((rep.section_mass - exact_mass).abs() < 0.02 * exact_mass, "{rep:?}");
            assert!((rep.jensen_ratio - expect).abs() < 0.03, "{n}: {}", rep.jensen_ratio);
            assert!(rep.containment_defect <= 0.0);
        }
    }

    #[test]
    fn bilinear_trial_rejects_other_families() {
        let x = Region::unit_box(1);
        let y = Region::new(vec![-0.25], vec![1.25], None).unwrap();
        let b = Arc::new(BenefitFunction::quadratic_distance(x, y).unwrap());
        let spec = rc1d(64);
        let u = BConvexFunction::new(b, vec![BAffinePiece::null(vec![0.0], 0.0)]).unwrap();
        let tab = Tabulated::new(&spec, &u);
        assert!(matches!(tab.bilinear_trial(&[0.5], 0.1), Err(Error::Family { .. })));
    }

    #[test]
    fn kink_of_closed_form() {
        let spec = rc1d(1024);
        let u = tangent_menu(&spec, 2048);
        let k = kink_scan(&u, spec.grid()).unwrap();
        assert!((k.boundary - 0.5).abs() <= 2.0 / 1024.0, "{k:?}");
        assert!(
            k.left_second_diff.abs() < 0.05 && (k.right_second_diff - 2.0).abs() < 0.05,
            "{k:?}"
        );
        assert!(matches!(
            kink_scan(&spec.null_menu(), spec.grid()),
            Err(Error::NoBoundary(_))
        ));
    }
}
