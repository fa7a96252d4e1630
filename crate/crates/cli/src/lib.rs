//! Subcommands of `bconvex-lab`. Each returns the process exit code; errors
//! bubble up as `anyhow::Error` and map to exit code 1 in `main`.

use anyhow::{bail, Context, Result};
use bconvex_core::bconvex::{BAffinePiece, BConvexFunction};
use bconvex_core::benefit::{fuzz_b3, fuzz_loeper, BenefitFunction};
use bconvex_core::config::Config;
use bconvex_core::domain::Region;
use bconvex_core::expr::{Expr, Scope};
use bconvex_core::json::{fmt_f64, to_string_precise};
use bconvex_core::numeric::halton;
use bconvex_core::regularity::{c11_scan, kink_scan, regularity_scan, KinkReport, ScanRow};
use bconvex_core::solver::{perturbation_audit, price_menu, solve, AuditReport, IterateRecord, ProblemSpec};
use bconvex_core::transforms::{verify_lemma2, TildeChart};
use serde::Serialize;
use serde_json::json;
use std::fs;
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

pub const AUDIT_TRIALS: usize = 500;
pub const B3_TOL: f64 = 1e-6;
pub const LOEPER_TOL: f64 = 1e-8;
pub const LEMMA2_TOL: f64 = 1e-8;
pub const HEIGHT_TOL: f64 = 1e-8;
pub const ROUND_TRIP_TOL: f64 = 1e-12;

const LEMMA2_CHARTS: usize = 8;
const LEMMA2_PIECES: usize = 16;

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn csv_text(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner().context("flushing csv")?)?)
}

fn axis_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn floats(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| fmt_f64(x)).collect()
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub schema_version: u32,
    #[serde(rename = "L")]
    pub l: f64,
    pub profit: f64,
    pub converged: bool,
    pub iterations: usize,
    pub pieces: usize,
    pub active_pieces: usize,
    pub participation_mass: f64,
    pub admissibility_margin: f64,
    pub audit: AuditReport,
    pub price_null_defect: f64,
    pub price_active_defect: f64,
    pub iterate_log: Vec<IterateRecord>,
}

/// `solve <config> -o <dir>`
pub fn cmd_solve(config: &Path, out: &Path) -> Result<i32> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = Config::from_json(&text)?;
    let spec = cfg.problem()?;
    let sol = solve(&spec)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let n = spec.grid().dim();
    let audit = perturbation_audit(&spec, &sol, AUDIT_TRIALS, cfg.check.seed);
    let pm = price_menu(&spec, &sol)?;
    let mass = sol.piece_mass(&spec);
    let report = SolveReport {
        schema_version: bconvex_core::config::SCHEMA_VERSION,
        l: sol.L_value,
        profit: sol.profit,
        converged: sol.converged,
        iterations: sol.iterations,
        pieces: sol.u.len(),
        active_pieces: mass.iter().filter(|&&m| m > 0.0).count(),
        participation_mass: mass.iter().skip(1).sum(),
        admissibility_margin: spec.admissibility_margin(),
        audit,
        price_null_defect: pm.null_defect,
        price_active_defect: pm.active_defect,
        iterate_log: sol.iterate_log.clone(),
    };

    write(&out.join("config.json"), &text)?;
    write(&out.join("menu.json"), &to_string_precise(&sol.u.to_json())?)?;
    let g = spec.grid();
    let mut h = axis_names("x", n);
    h.push("u".into());
    write(
        &out.join("u_grid.csv"),
        &csv_text(
            &h,
            (0..g.len()).map(|k| {
                let mut r = floats(g.point(k));
                r.push(fmt_f64(sol.u_values[k]));
                r
            }),
        )?,
    )?;
    let mut h = axis_names("x", n);
    h.push("piece".into());
    h.extend(axis_names("y", n));
    h.push("a".into());
    write(
        &out.join("assignment.csv"),
        &csv_text(
            &h,
            (0..g.len()).map(|k| {
                let w = sol.assignment[k];
                let p = &sol.u.pieces()[w];
                let mut r = floats(g.point(k));
                r.push(w.to_string());
                r.extend(floats(&p.y));
                r.push(fmt_f64(p.a));
                r
            }),
        )?,
    )?;
    let mut h = axis_names("y", n);
    h.push("v".into());
    write(
        &out.join("v_grid.csv"),
        &csv_text(
            &h,
            (0..pm.v.len()).map(|j| {
                let mut r = floats(pm.v.point(j));
                r.push(fmt_f64(pm.v.values()[j]));
                r
            }),
        )?,
    )?;
    write(&out.join("report.json"), &to_string_precise(&report)?)?;

    eprintln!(
        "L = {}  pieces = {}  iterations = {}  converged = {}",
        fmt_f64(sol.L_value),
        sol.u.len(),
        sol.iterations,
        sol.converged
    );
    Ok(if sol.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    B3,
    Loeper,
    #[value(name = "bstar-convexity")]
    BstarConvexity,
    Lemma2,
}

// Quasi-random point of `r` (rejecting points outside a ball mask).
fn qmc_point(r: &Region, index: &mut u64, offset: usize) -> Vec<f64> {
    let n = r.dim();
    loop {
        *index += 1;
        let h = halton(*index, offset + n);
        let p: Vec<f64> = (0..n).map(|i| r.lo()[i] + h[offset + i] * r.width(i)).collect();
        if r.contains(&p) {
            return p;
        }
    }
}

fn random_menu(b: &std::sync::Arc<BenefitFunction>, null: BAffinePiece, seed: u64) -> Result<BConvexFunction> {
    let mut idx = seed.wrapping_mul(1 << 16);
    let mut pieces = vec![null];
    for _ in 0..LEMMA2_PIECES {
        let y = qmc_point(b.y_domain(), &mut idx, 0);
        let a = halton(idx, b.dim() + 1)[b.dim()] - 0.5;
        pieces.push(BAffinePiece::new(y, a));
    }
    Ok(BConvexFunction::new(b.clone(), pieces)?)
}

/// `check <config> --which ...`; prints a JSON report on stdout.
pub fn cmd_check(config: &Path, which: Which, samples: Option<usize>, seed: Option<u64>) -> Result<(i32, String)> {
    let cfg = Config::load(config)?;
    let samples = samples.unwrap_or(cfg.check.samples);
    let seed = seed.unwrap_or(cfg.check.seed);
    let b = cfg.benefit()?;
    let (violated, report) = match which {
        Which::B3 => {
            let r = fuzz_b3(&b, samples, seed);
            let bad = r.worst_value < -B3_TOL;
            (
                bad,
                json!({"check": "b3", "tolerance": B3_TOL, "violated": bad, "report": r}),
            )
        }
        Which::Loeper => {
            let (r, sd) = fuzz_loeper(&b, samples, seed);
            let bad = r.worst_value > LOEPER_TOL || sd < -LOEPER_TOL;
            (
                bad,
                json!({"check": "loeper", "tolerance": LOEPER_TOL, "violated": bad, "report": r, "min_second_diff": sd}),
            )
        }
        Which::BstarConvexity => {
            let cost = Expr::parse(&cfg.cost, b.dim(), Scope::Y)?;
            let mut idx = seed.wrapping_mul(1 << 20);
            let m = (samples as f64).sqrt().ceil().max(1.0) as usize;
            let xs: Vec<Vec<f64>> = (0..m).map(|_| qmc_point(b.x_domain(), &mut idx, 0)).collect();
            // keep momenta off the edge of the range so difference steps stay inside
            let yd = b.y_domain();
            let inset = 0.1 * (0..yd.dim()).map(|i| yd.width(i)).fold(f64::INFINITY, f64::min);
            let yin = yd.shrink(inset)?;
            let mut worst = f64::INFINITY;
            let mut worst_x = vec![];
            for x in &xs {
                let ps: Vec<Vec<f64>> = (0..m).map(|_| b.bx(x, &qmc_point(&yin, &mut idx, 0))).collect();
                let c = |y: &[f64]| cost.eval(&[], y);
                let ev = b.check_uniform_bstar_convexity(&c, std::slice::from_ref(x), &ps)?;
                if ev < worst {
                    worst = ev;
                    worst_x = x.clone();
                }
            }
            let bad = worst.is_nan() || worst <= 0.0;
            (
                bad,
                json!({"check": "bstar-convexity", "violated": bad, "min_eigenvalue": worst, "worst_x": worst_x, "pairs": m * m}),
            )
        }
        Which::Lemma2 => {
            let null = BAffinePiece::null(cfg.null_product.y.clone(), cfg.null_product.a);
            let u = random_menu(&b, null, seed)?;
            let mut idx = seed.wrapping_mul(1 << 24);
            let mut charts = vec![];
            let mut bad = false;
            for c in 0..LEMMA2_CHARTS {
                let x0 = qmc_point(b.x_domain(), &mut idx, 0);
                let chart = TildeChart::at_support(&u, &x0)?;
                let r = verify_lemma2(&chart, &u, samples, seed.wrapping_add(c as u64));
                bad |= r.min_midpoint_defect < -LEMMA2_TOL || r.section_defect > LEMMA2_TOL;
                charts.push(json!({"x0": x0, "report": r}));
            }
            (
                bad,
                json!({"check": "lemma2", "tolerance": LEMMA2_TOL, "violated": bad, "charts": charts}),
            )
        }
    };
    let text = to_string_precise(&report)?;
    Ok((if violated { EXIT_VIOLATION } else { EXIT_OK }, text))
}

pub struct Loaded {
    pub config: Config,
    pub spec: ProblemSpec,
    pub u: BConvexFunction,
    pub reported_l: f64,
}

/// Reads solve artifacts back and checks that they reproduce the reported L.
pub fn load_solution(dir: &Path) -> Result<Loaded> {
    for f in ["config.json", "menu.json", "u_grid.csv", "report.json"] {
        if !dir.join(f).is_file() {
            bail!("{} is missing", dir.join(f).display());
        }
    }
    let config = Config::load(&dir.join("config.json"))?;
    let spec = config.problem()?;
    let menu_text = fs::read_to_string(dir.join("menu.json"))?;
    let u = BConvexFunction::from_json(spec.benefit().clone(), &menu_text)?;
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?).context("report.json")?;
    let reported_l = report["L"].as_f64().context("report.json: L")?;

    let mut rd = csv::Reader::from_path(dir.join("u_grid.csv"))?;
    let (values, _) = u.on_grid(spec.grid());
    let mut rows = 0;
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let v: f64 = rec.get(rec.len() - 1).context("u_grid.csv: empty row")?.parse()?;
        if k >= values.len() || (v - values[k]).abs() > ROUND_TRIP_TOL * (1.0 + v.abs()) {
            bail!("u_grid.csv row {k} does not match menu.json");
        }
        rows += 1;
    }
    if rows != values.len() {
        bail!("u_grid.csv has {rows} rows, expected {}", values.len());
    }
    Ok(Loaded {
        config,
        spec,
        u,
        reported_l,
    })
}

/// Scan centres: evenly spaced in 1D, quasi-random in higher dimension; only
/// centres whose largest ball stays inside X are kept.
pub fn scan_points(x: &Region, points: usize, r_max: f64, seed: u64) -> Vec<Vec<f64>> {
    if x.dim() == 1 {
        return (1..=points)
            .map(|i| vec![x.lo()[0] + x.width(0) * i as f64 / (points + 1) as f64])
            .filter(|p| x.contains_ball(p, r_max))
            .collect();
    }
    let mut idx = seed.wrapping_mul(1 << 20);
    let mut out = vec![];
    let mut tries = 0;
    while out.len() < points && tries < 1000 * points {
        tries += 1;
        let p = qmc_point(x, &mut idx, 0);
        if x.contains_ball(&p, r_max) {
            out.push(p);
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct ScanReport {
    pub schema_version: u32,
    pub round_trip_error: f64,
    pub radii: Vec<f64>,
    pub points: usize,
    pub max_ratio: f64,
    pub max_ratio_halved: f64,
    pub ratio_change: f64,
    pub worst_height_defect: f64,
    pub worst_energy_margin: f64,
    pub max_slab_width_over_r: f64,
    pub trials: usize,
    pub kink: Option<KinkReport>,
    pub kink_note: Option<String>,
    pub pass: bool,
}

/// `scan <dir> --radii ... --points k`; writes scan.csv and scan_summary.json
/// into the solution directory.
pub fn cmd_scan(dir: &Path, radii: Option<Vec<f64>>, points: Option<usize>) -> Result<(i32, ScanReport)> {
    let Loaded {
        config,
        spec,
        u,
        reported_l,
    } = load_solution(dir)?;
    let l = spec.evaluate_L(&u);
    let err = (l - reported_l).abs();
    if err > ROUND_TRIP_TOL {
        bail!(
            "menu.json reproduces L = {} but report.json says {}",
            fmt_f64(l),
            fmt_f64(reported_l)
        );
    }
    let radii = radii.unwrap_or_else(|| config.scan.radii.clone());
    let points = points.unwrap_or(config.scan.points);
    if radii.is_empty() || radii.iter().any(|&r| r.is_nan() || r <= 0.0) {
        bail!("scan radii must be positive");
    }
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let x0s = scan_points(spec.grid().region(), points, r_max, config.check.seed);
    if x0s.is_empty() {
        bail!("no scan centre admits a ball of radius {r_max} inside X");
    }
    let (rows, sum) = regularity_scan(&spec, &u, &x0s, &radii)?;
    let halved: Vec<f64> = radii.iter().map(|r| 0.5 * r).collect();
    let c2 = c11_scan(&u, &x0s, &halved)?;
    let (kink, kink_note) = match kink_scan(&u, spec.grid()) {
        Ok(k) => (Some(k), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let audit_tol = spec.tolerances().audit_tol;
    let pass = sum.worst_height_defect <= HEIGHT_TOL && sum.worst_energy_margin >= -audit_tol;
    let rep = ScanReport {
        schema_version: bconvex_core::config::SCHEMA_VERSION,
        round_trip_error: err,
        radii,
        points: x0s.len(),
        max_ratio: sum.max_ratio,
        max_ratio_halved: c2.max_ratio,
        ratio_change: if sum.max_ratio > 0.0 {
            (c2.max_ratio - sum.max_ratio).abs() / sum.max_ratio
        } else {
            0.0
        },
        worst_height_defect: sum.worst_height_defect,
        worst_energy_margin: sum.worst_energy_margin,
        max_slab_width_over_r: sum.max_slab_width_over_r,
        trials: sum.trials,
        kink,
        kink_note,
        pass,
    };
    write(&dir.join("scan.csv"), &scan_csv(spec.grid().dim(), &rows)?)?;
    write(&dir.join("scan_summary.json"), &to_string_precise(&rep)?)?;
    Ok((if pass { EXIT_OK } else { EXIT_VIOLATION }, rep))
}

fn scan_csv(n: usize, rows: &[ScanRow]) -> Result<String> {
    let mut h = axis_names("x0_", n);
    for c in [
        "r",
        "h",
        "ratio",
        "kappa",
        "height_defect",
        "energy_margin",
        "slab_width_over_r",
        "section_mass",
        "note",
    ] {
        h.push(c.into());
    }
    csv_text(
        &h,
        rows.iter().map(|row| {
            let mut r = floats(&row.x0);
            r.extend(floats(&[row.r, row.h, row.ratio]));
            match &row.trial {
                Some(t) => r.extend(floats(&[
                    t.kappa,
                    t.height_defect,
                    t.energy_margin,
                    t.slab_width_over_r,
                    t.section_mass,
                ])),
                None => r.extend(std::iter::repeat_n(String::new(), 5)),
            }
            r.push(row.note.clone().unwrap_or_default());
            r
        }),
    )
}
