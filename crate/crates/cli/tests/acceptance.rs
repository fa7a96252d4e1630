//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Run with
//! `cargo test -p bconvex-lab --test acceptance`.

use bconvex_core::bconvex::{
    b_transform_u, b_transform_v, bconvex_envelope, BAffinePiece, BConvexFunction, GridFunction,
};
use bconvex_core::benefit::{fuzz_b3, fuzz_loeper, BenefitFunction};
use bconvex_core::domain::{Grid, Placement, Region};
use bconvex_core::error::Error;
use bconvex_core::regularity::{c11_scan, kink_scan, support_gap, Tabulated};
use bconvex_core::solver::{perturbation_audit, ProblemSpec, Solution};
use bconvex_core::transforms::{verify_lemma2, TildeChart};
use bconvex_lab::{load_solution, Loaded};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

struct Line {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn solve_cli(config: &Path, out: &Path, threads: Option<usize>) -> (Option<i32>, Duration, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bconvex-lab"));
    cmd.args(["solve", config.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    match threads {
        Some(n) => cmd.env("BCONVEX_THREADS", n.to_string()),
        None => cmd.env_remove("BCONVEX_THREADS"),
    };
    let t = Instant::now();
    let o = cmd.output().expect("binary runs");
    (
        o.status.code(),
        t.elapsed(),
        String::from_utf8_lossy(&o.stderr).trim().to_string(),
    )
}

fn closed_form(x: f64) -> f64 {
    if x >= 0.5 {
        x * x - x + 0.25
    } else {
        0.0
    }
}

fn solution(l: &Loaded) -> Solution {
    Solution::from_menu(&l.spec, l.u.clone(), vec![], true)
}

struct TrialStats {
    accepted: usize,
    skipped: usize,
    worst_height: f64,
    worst_margin: f64,
    max_slab: f64,
}

// Random (x0, r) with the ball inside X and a positive support gap, until
// `want` trial functions have been built.
fn random_trials(spec: &ProblemSpec, u: &BConvexFunction, radii: (f64, f64), want: usize, seed: u64) -> TrialStats {
    let tab = Tabulated::new(spec, u);
    let x = spec.grid().region();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = TrialStats {
        accepted: 0,
        skipped: 0,
        worst_height: f64::NEG_INFINITY,
        worst_margin: f64::INFINITY,
        max_slab: 0.0,
    };
    let mut draws = 0;
    while s.accepted < want && draws < 100_000 {
        draws += 1;
        let x0 = x.sample(&mut rng);
        let r = rng.random_range(radii.0..=radii.1);
        if !x.contains_ball(&x0, r) || support_gap(u, &x0, r).map(|g| g.h <= 0.0).unwrap_or(true) {
            continue;
        }
        match tab.trial_function(&x0, r) {
            Ok((_, rep)) => {
                s.accepted += 1;
                s.worst_height = s.worst_height.max(rep.height_defect);
                s.worst_margin = s.worst_margin.min(rep.energy_margin);
                s.max_slab = s.max_slab.max(rep.slab_width_over_r);
            }
            Err(Error::NoPreimage { .. }) => s.skipped += 1,
            Err(e) => panic!("trial function failed: {e}"),
        }
    }
    s
}

fn trials_pass(s: &TrialStats, want: usize) -> bool {
    s.accepted == want && s.worst_height <= 1e-8 && s.worst_margin >= -1e-4 && s.max_slab <= 4.0
}

fn trials_detail(s: &TrialStats) -> String {
    format!(
        "trials={} (no preimage: {}) worst height_defect={:.3e} worst energy_margin={:.3e} max slab/r={:.3}",
        s.accepted, s.skipped, s.worst_height, s.worst_margin, s.max_slab
    )
}

fn families(dim: usize) -> Vec<Arc<BenefitFunction>> {
    let x = Region::new(vec![-1.0; dim], vec![1.0; dim], None).unwrap();
    let y = Region::new(vec![-1.5; dim], vec![1.5; dim], None).unwrap();
    vec![
        Arc::new(BenefitFunction::bilinear(x.clone(), y.clone()).unwrap()),
        Arc::new(BenefitFunction::quadratic_distance(x, y).unwrap()),
    ]
}

fn random_menu(b: &Arc<BenefitFunction>, pieces: usize, rng: &mut ChaCha8Rng) -> BConvexFunction {
    let dim = b.dim();
    let mut ps = vec![BAffinePiece::null(vec![0.0; dim], 0.0)];
    for _ in 0..pieces {
        ps.push(BAffinePiece::new(b.y_domain().sample(rng), rng.random_range(-1.0..1.0)));
    }
    BConvexFunction::new(b.clone(), ps).unwrap()
}

// Property suite over both built-in families plus the two shipped solutions.
fn property_suite(solved: &[&BConvexFunction]) -> (bool, String) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut idem: f64 = 0.0;
    let mut above: f64 = f64::NEG_INFINITY;
    let mut expand: f64 = f64::NEG_INFINITY;
    let mut loeper: f64 = f64::NEG_INFINITY;
    let mut loeper_sd: f64 = f64::INFINITY;
    let mut b3: f64 = 0.0;
    let mut fails = 0;
    let mut midpoint: f64 = f64::INFINITY;
    let mut charts = 0;
    for dim in [1usize, 2] {
        for b in families(dim) {
            let counts = if dim == 1 { vec![65] } else { vec![13, 13] };
            let g = Grid::new(b.x_domain().clone(), counts.clone(), Placement::Vertex).unwrap();
            let yc = Grid::new(
                b.y_domain().clone(),
                if dim == 1 { vec![201] } else { vec![21, 21] },
                Placement::Vertex,
            )
            .unwrap()
            .coords()
            .to_vec();
            for _ in 0..10 {
                let vals: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let u = GridFunction::from_grid(&g, vals.clone());
                let e = bconvex_envelope(&b, &u, &yc);
                let e2 = bconvex_envelope(&b, &e, &yc);
                let d: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-0.2..0.2)).collect();
                let sup = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let u2 = GridFunction::from_grid(&g, vals.iter().zip(&d).map(|(a, c)| a + c).collect());
                let w1 = b_transform_u(&b, &b_transform_v(&b, &u, &yc), g.coords());
                let w2 = b_transform_u(&b, &b_transform_v(&b, &u2, &yc), g.coords());
                for k in 0..g.len() {
                    idem = idem.max((e2.values()[k] - e.values()[k]).abs());
                    above = above.max(e.values()[k] - u.values()[k]);
                    expand = expand.max((w1.values()[k] - w2.values()[k]).abs() - sup);
                }
            }
            let r = fuzz_b3(&b, 1000, 17);
            b3 = b3.max(r.worst_value.abs());
            fails += r.failures;
            let (r, sd) = fuzz_loeper(&b, 1000, 17);
            loeper = loeper.max(r.worst_value);
            loeper_sd = loeper_sd.min(sd);
            fails += r.failures;
            for _ in 0..5 {
                let u = random_menu(&b, 12, &mut rng);
                let x0 = b.x_domain().shrink(0.05).unwrap().sample(&mut rng);
                let chart = TildeChart::at_support(&u, &x0).unwrap();
                let rep = verify_lemma2(&chart, &u, 200, rng.random());
                midpoint = midpoint.min(rep.min_midpoint_defect);
                charts += 1;
            }
        }
    }
    for u in solved {
        let x = u.benefit().x_domain().clone();
        for _ in 0..5 {
            let x0 = x.sample(&mut rng);
            let chart = TildeChart::at_support(u, &x0).unwrap();
            let rep = verify_lemma2(&chart, u, 200, rng.random());
            midpoint = midpoint.min(rep.min_midpoint_defect);
            charts += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    // idempotence is exact up to the rounding of b(x, y) - v(y)
    let pass = idem <= 1e-14
        && above <= 1e-14
        && expand <= 1e-12
        && b3 <= 1e-6
        && loeper <= 1e-8
        && loeper_sd >= -1e-8
        && fails == 0
        && midpoint >= -1e-8
        && secs <= 120.0;
    let detail = format!(
        "envelope idempotence {idem:.1e}, E[u]-u {above:.1e}, non-expansion excess {expand:.1e}, |B3| {b3:.1e}, \
         Loeper excess {loeper:.1e} (min 2nd diff {loeper_sd:.1e}), harness failures {fails}, \
         min midpoint defect {midpoint:.1e} over {charts} charts x 200, {secs:.1}s"
    );
    (pass, detail)
}

fn main() {
    let work = tempfile::tempdir().unwrap();
    let mut lines = vec![];

    // 1. 1D reproduction, single-threaded
    let rc_dir = work.path().join("rc1d");
    let (code, dt, log) = solve_cli(&example("rc1d.json"), &rc_dir, Some(1));
    let rc = load_solution(&rc_dir).expect("rc1d artifacts");
    let g = rc.spec.grid();
    let (uv, _) = rc.u.on_grid(g);
    let sup = (0..g.len())
        .map(|k| (uv[k] - closed_form(g.point(k)[0])).abs())
        .fold(0.0, f64::max);
    let l = rc.spec.evaluate_L(&rc.u);
    lines.push(Line {
        id: 1,
        title: "1D closed-form reproduction",
        pass: code == Some(0) && sup <= 1e-2 && (l + 1.0 / 12.0).abs() <= 1e-3 && dt.as_secs_f64() <= 60.0,
        detail: format!(
            "exit={code:?} L={l:.9} |L+1/12|={:.2e} sup err={sup:.2e} time={:.1}s (1 thread) pieces={} from initial menu of 64",
            (l + 1.0 / 12.0).abs(),
            dt.as_secs_f64(),
            rc.u.len()
        ),
    });
    if code != Some(0) {
        eprintln!("{log}");
    }

    // 2. kink
    let cell = g.spacing()[0];
    let (pass, detail) = match kink_scan(&rc.u, g) {
        Ok(k) => (
            (k.boundary - 0.5).abs() <= 2.0 * cell
                && k.left_second_diff.abs() <= 0.2
                && (k.right_second_diff - 2.0).abs() <= 0.2,
            format!(
                "boundary={:.5} ({:.2} cells off) second differences {:.4} / {:.4}",
                k.boundary,
                (k.boundary - 0.5).abs() / cell,
                k.left_second_diff,
                k.right_second_diff
            ),
        ),
        Err(e) => (false, e.to_string()),
    };
    lines.push(Line {
        id: 2,
        title: "nonparticipation kink",
        pass,
        detail,
    });

    // 3. curvature ratio
    let x0s: Vec<Vec<f64>> = (1..10).map(|i| vec![i as f64 / 10.0]).collect();
    let radii = [0.01, 0.02, 0.03, 0.04, 0.05];
    let halved: Vec<f64> = radii.iter().map(|r| r / 2.0).collect();
    let c = c11_scan(&rc.u, &x0s, &radii).unwrap();
    let c2 = c11_scan(&rc.u, &x0s, &halved).unwrap();
    let change = (c2.max_ratio - c.max_ratio).abs() / c.max_ratio;
    lines.push(Line {
        id: 3,
        title: "curvature ratio h/r^2",
        pass: (0.9..=1.1).contains(&c.max_ratio) && change <= 0.2,
        detail: format!(
            "max ratio {:.4}, halved radii {:.4} (change {:.1}%)",
            c.max_ratio,
            c2.max_ratio,
            100.0 * change
        ),
    });

    // 7 (run early): 2D disc
    let disc_dir = work.path().join("disc2d");
    let (dcode, ddt, dlog) = solve_cli(&example("disc2d.json"), &disc_dir, None);
    let disc = load_solution(&disc_dir).expect("disc2d artifacts");
    if dcode != Some(0) {
        eprintln!("{dlog}");
    }

    // 4. trial functions on both solutions
    let t1 = random_trials(&rc.spec, &rc.u, (0.01, 0.05), 20, 41);
    let t2 = random_trials(&disc.spec, &disc.u, (0.05, 0.2), 20, 43);
    lines.push(Line {
        id: 4,
        title: "trial-function diagnostics",
        pass: trials_pass(&t1, 20) && trials_pass(&t2, 20),
        detail: format!("1D: {} | disc: {}", trials_detail(&t1), trials_detail(&t2)),
    });

    // 5. property suite
    let (pass, detail) = property_suite(&[&rc.u, &disc.u]);
    lines.push(Line {
        id: 5,
        title: "generalized-convexity properties",
        pass,
        detail,
    });

    // 6. audit on both shipped solutions
    let a1 = perturbation_audit(&rc.spec, &solution(&rc), 500, 99);
    let a2 = perturbation_audit(&disc.spec, &solution(&disc), 500, 99);
    lines.push(Line {
        id: 6,
        title: "minimality audit",
        pass: a1.worst_margin >= -1e-4 && a2.worst_margin >= -1e-4,
        detail: format!(
            "500 perturbations each: 1D worst margin {:.3e}, disc worst margin {:.3e}",
            a1.worst_margin, a2.worst_margin
        ),
    });

    // 7. disc run
    let dsol = solution(&disc);
    let dg = disc.spec.grid();
    let origin = dg.nearest(&[0.0, 0.0]);
    let null_mass = dsol.piece_mass(&disc.spec)[0];
    let kink = kink_scan(&disc.u, dg).ok();
    lines.push(Line {
        id: 7,
        title: "2D disc run",
        pass: dcode == Some(0)
            && ddt.as_secs_f64() <= 600.0
            && dsol.assignment[origin] == 0
            && null_mass > 0.0
            && trials_pass(&t2, 20)
            && a2.worst_margin >= -1e-4,
        detail: format!(
            "exit={dcode:?} L={:.6} time={:.1}s pieces={} nonparticipation mass {:.4} (contains origin: {}) boundary radius {}",
            disc.spec.evaluate_L(&disc.u),
            ddt.as_secs_f64(),
            disc.u.len(),
            null_mass,
            dsol.assignment[origin] == 0,
            kink.map(|k| format!("{:.3} [{:.3}, {:.3}]", k.boundary, k.boundary_min, k.boundary_max))
                .unwrap_or_else(|| "n/a".into())
        ),
    });

    // 8. determinism: rerun criterion 1 with the default thread count
    let rc2_dir = work.path().join("rc1d_again");
    let (code2, _, _) = solve_cli(&example("rc1d.json"), &rc2_dir, None);
    let a = std::fs::read(rc_dir.join("report.json")).unwrap();
    let b = std::fs::read(rc2_dir.join("report.json")).unwrap();
    lines.push(Line {
        id: 8,
        title: "determinism",
        pass: code2 == Some(0) && a == b,
        detail: format!("report.json {} bytes, identical: {}", a.len(), a == b),
    });

    // Not a criterion: the same 1D problem with the menu held at 64 pieces.
    let mut opts = rc.spec.options().clone();
    opts.max_pieces = Some(64);
    let capped_spec = rc.spec.with_options(opts).unwrap();
    let capped = bconvex_core::solver::solve(&capped_spec).unwrap();
    let csup = (0..g.len())
        .map(|k| (capped.u_values[k] - closed_form(g.point(k)[0])).abs())
        .fold(0.0, f64::max);
    let cc = c11_scan(&capped.u, &x0s, &radii).unwrap();
    let info = format!(
        "INFO capped at 64 pieces: L={:.9} sup err={csup:.2e} max ratio {:.4} converged={}",
        capped.L_value, cc.max_ratio, capped.converged
    );

    lines.sort_by_key(|l| l.id);
    let mut failed = 0;
    for l in &lines {
        println!(
            "{} [{}] {}: {}",
            if l.pass { "PASS" } else { "FAIL" },
            l.id,
            l.title,
            l.detail
        );
        failed += usize::from(!l.pass);
    }
    println!("{info}");
    println!("acceptance: {} passed, {} failed", lines.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
