//! End-to-end acceptance checks; prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use thinstrip::analysis::{
    check_location, default_delta, sweep_convergence, ConvergenceReport, LocationOptions,
    Observable, SweepOptions,
};
use thinstrip::config::GeometryConfig;
use thinstrip::eigen::{resolvent_gap, solve_smallest, EigenPair};
use thinstrip::fit::fit_loglog;
use thinstrip::geometry::{c_epsilon, solve_jacobi, CurvatureProfile, GaussField, StripGeometry};
use thinstrip::operator::{assemble_eps, assemble_flat, longitudinal_eigenvalue, sample_psi0};
use thinstrip::GridSpec;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

const PI: f64 = std::f64::consts::PI;
const SWEEP: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn preset(name: &str, eps: f64) -> StripGeometry {
    GeometryConfig::preset(name).unwrap().build(eps).unwrap()
}

/// Constant-curvature Jacobi field `cos(sqrt(K) x) - kappa/sqrt(K) sin(sqrt(K) x)`, `x = eps t`.
fn jacobi_closed_form(kappa: f64, gauss: f64, x: f64) -> f64 {
    if gauss > 0.0 {
        let r = gauss.sqrt();
        (r * x).cos() - kappa / r * (r * x).sin()
    } else {
        let r = (-gauss).sqrt();
        (r * x).cosh() - kappa / r * (r * x).sinh()
    }
}

fn jacobi_oracle() -> Verdict {
    let eps = 0.1;
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for gauss in [1.0, -1.0] {
        for kappa in [0.0, 1.0] {
            let geom = StripGeometry::new(
                PI,
                CurvatureProfile::Constant(kappa),
                GaussField::Constant(gauss),
                eps,
            )
            .map_err(|e| e.to_string())?;
            let start = Instant::now();
            let metric = solve_jacobi(&geom, 256, 17).map_err(|e| e.to_string())?;
            slowest = slowest.max(start.elapsed());
            let grid = metric.grid();
            for (k, &f) in metric.f().iter().enumerate() {
                let (_, j) = grid.coords(k);
                worst = worst.max((f - jacobi_closed_form(kappa, gauss, eps * grid.t(j))).abs());
            }
        }
    }
    ensure(
        worst <= 1e-8 && slowest < Duration::from_secs(1),
        format!(
            "max node error {worst:.2e} (<= 1e-8), slowest solve {:.1} ms (< 1 s)",
            ms(slowest)
        ),
    )
}

fn jacobian_bound() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    for name in ["flat-arc", "sphere-circle"] {
        let geom = preset(name, 0.1);
        let c = c_epsilon(&geom).map_err(|e| e.to_string())?;
        for (n_s, n_t) in [(257, 9), (129, 33)] {
            let metric = solve_jacobi(&geom, n_s, n_t).map_err(|e| e.to_string())?;
            ok &= metric
                .f()
                .iter()
                .all(|&f| f >= 1.0 - c - 1e-12 && f <= 1.0 + c + 1e-12);
            if n_t == 9 {
                details.push(format!(
                    "{name}: C = {c:.4}, f in [{:.4}, {:.4}]",
                    metric.min_f(),
                    metric.max_f()
                ));
            }
        }
    }
    ensure(ok, details.join("; "))
}

fn flat_spectrum() -> Verdict {
    let start = Instant::now();
    let exact = [0.0, 1.0, 4.0, 9.0];
    let mut h = Vec::new();
    let mut errors = Vec::new();
    let mut finest = Vec::new();
    for n_s in [64, 128, 256] {
        let grid = GridSpec::new(PI, n_s, 9).map_err(|e| e.to_string())?;
        let forms = assemble_flat(&grid, 0.1).map_err(|e| e.to_string())?;
        let pairs = solve_smallest(&forms, 4, 1e-10).map_err(|e| e.to_string())?;
        let values: Vec<f64> = pairs.iter().map(|p| p.value).collect();
        let err = values
            .iter()
            .zip(exact)
            .map(|(v, e)| (v - e).abs())
            .fold(0.0, f64::max);
        h.push(grid.h_s());
        errors.push(err);
        finest = values;
    }
    let order = fit_loglog(&h, &errors).map(|f| f.slope).unwrap_or(f64::NAN);
    let elapsed = start.elapsed();
    let within = errors[2] <= 5e-3;
    ensure(
        within && order >= 1.8 && elapsed < Duration::from_secs(30),
        format!(
            "256x9 values [{}], max error {:.2e} (<= 5e-3), h-order {order:.3} (>= 1.8), {:.0} ms (< 30 s)",
            finest.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", "),
            errors[2],
            ms(elapsed)
        ),
    )
}

fn sweep(observable: Observable, refine: usize) -> Result<ConvergenceReport, String> {
    let geom = preset("flat-arc", SWEEP[0]);
    let opts = SweepOptions {
        refine,
        ..SweepOptions::default()
    };
    sweep_convergence(&geom, &SWEEP, 2, observable, &opts).map_err(|e| e.to_string())
}

fn slope_of(report: &ConvergenceReport) -> Result<f64, String> {
    report.slope().ok_or_else(|| {
        format!(
            "{} sweep was not fitted: {:?}",
            report.observable.name(),
            report.fit
        )
    })
}

fn eigenvalue_rate() -> Verdict {
    let start = Instant::now();
    let coarse = slope_of(&sweep(Observable::EigenvalueError, 1)?)?;
    let fine = slope_of(&sweep(Observable::EigenvalueError, 2)?)?;
    let elapsed = start.elapsed();
    ensure(
        coarse >= 0.9 && (coarse - fine).abs() <= 0.05 && elapsed < Duration::from_secs(300),
        format!(
            "slope {coarse:.4} (>= 0.9), refined-grid slope {fine:.4} (|diff| {:.4} <= 0.05), {:.0} ms (< 5 min)",
            (coarse - fine).abs(),
            ms(elapsed)
        ),
    )
}

fn eigenfunction_rates() -> Verdict {
    let l2 = slope_of(&sweep(Observable::L2Error, 1)?)?;
    let sup = slope_of(&sweep(Observable::SupError, 1)?)?;
    ensure(
        l2 >= 0.9 && sup >= 0.9,
        format!("L2 slope {l2:.4} (>= 0.9), sup slope {sup:.4} (>= 0.9)"),
    )
}

fn resolvent_rate() -> Verdict {
    let slope = slope_of(&sweep(Observable::ResolventGap, 1)?)?;
    let geom = preset("flat-line", 0.05);
    let metric = solve_jacobi(&geom, 257, 9).map_err(|e| e.to_string())?;
    let forms = assemble_eps(&metric).map_err(|e| e.to_string())?;
    let flat = assemble_flat(metric.grid(), 0.05).map_err(|e| e.to_string())?;
    let gap = resolvent_gap(&forms, &flat, &metric, 1e-8)
        .map_err(|e| e.to_string())?
        .norm_estimate;
    ensure(
        slope >= 0.9 && gap <= 1e-12,
        format!("slope {slope:.4} (>= 0.9), flat-line estimate {gap:.1e} (<= 1e-12)"),
    )
}

const HOTSPOT_PRESETS: [&str; 3] = ["flat-arc", "sphere-geodesic", "flat-sine"];

fn hot_spots() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    let mut ok = true;
    for name in HOTSPOT_PRESETS {
        let config = tmp.path().join(format!("{name}.json"));
        let out = tmp.path().join(name);
        let text =
            format!(r#"{{"geometry": {{"preset": "{name}"}}, "epsilon": 0.025, "max_mode": 2}}"#);
        std::fs::write(&config, text).map_err(|e| e.to_string())?;
        let status = Command::new(env!("CARGO_BIN_EXE_thinstrip"))
            .args(["hotspots", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        let code = status.status.code();
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out.join("hotspots_n2.json")).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let max_at_start = report["max_nodes"]
            .as_array()
            .is_some_and(|v| v.iter().all(|n| n["i"] == 0));
        let n_s = 257;
        let min_at_end = report["min_nodes"]
            .as_array()
            .is_some_and(|v| v.iter().all(|n| n["i"] == n_s - 1));
        let pass =
            code == Some(0) && max_at_start && min_at_end && report["boundary_verdict"] == true;
        ok &= pass;
        details.push(format!(
            "{name}: exit {code:?}, {} max nodes at s=0, {} min nodes at s=L",
            report["max_nodes"].as_array().map_or(0, Vec::len),
            report["min_nodes"].as_array().map_or(0, Vec::len)
        ));
    }
    ensure(ok, details.join("; "))
}

fn localization() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    for name in HOTSPOT_PRESETS {
        let start = Instant::now();
        let geom = preset(name, 0.025);
        let metric = solve_jacobi(&geom, 257, 9).map_err(|e| e.to_string())?;
        let forms = assemble_eps(&metric).map_err(|e| e.to_string())?;
        let pairs = solve_smallest(&forms, 4, 1e-9).map_err(|e| e.to_string())?;
        let mut line = Vec::new();
        for n in [3, 4] {
            let delta = default_delta(n, geom.length());
            let report =
                check_location(&pairs[n - 1], n, delta, &forms, &LocationOptions::default())
                    .map_err(|e| e.to_string())?;
            ok &= report.verdict_max
                && report.verdict_min
                && report.stationary_outside.is_empty()
                && report.forbidden_extrema.is_empty();
            line.push(format!(
                "n={n} max {} min {} stray {} forbidden {}",
                report.verdict_max,
                report.verdict_min,
                report.stationary_outside.len(),
                report.forbidden_extrema.len()
            ));
        }
        let elapsed = start.elapsed();
        ok &= elapsed < Duration::from_secs(120);
        details.push(format!(
            "{name}: {} ({:.0} ms)",
            line.join(", "),
            ms(elapsed)
        ));
    }
    ensure(ok, details.join("; "))
}

fn pure_geometry() -> Verdict {
    let start = Instant::now();
    let max_mode = 6;
    let grid = GridSpec::new(PI, 301, 9).map_err(|e| e.to_string())?;
    let forms = assemble_flat(&grid, 0.05).map_err(|e| e.to_string())?;
    let window = PI / (4.0 * (max_mode - 1) as f64);
    let mut checked = 0;
    let mut failures = Vec::new();
    for n in 2..=max_mode {
        let pair = EigenPair {
            value: longitudinal_eigenvalue(n, PI),
            vector: sample_psi0(n, &grid).map_err(|e| e.to_string())?,
            residual: 0.0,
            degenerate: false,
        };
        for k in 1..=5 {
            let delta = window * k as f64 / 6.0;
            let report = check_location(&pair, n, delta, &forms, &LocationOptions::default())
                .map_err(|e| e.to_string())?;
            checked += 1;
            if !report.passed() {
                failures.push(format!("n={n} delta={delta:.4}"));
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(
        failures.is_empty() && elapsed < Duration::from_secs(1),
        format!(
            "{checked} (n, delta) cases, {} failed {:?}, {:.1} ms (< 1 s)",
            failures.len(),
            failures,
            ms(elapsed)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("jacobi oracle", jacobi_oracle),
        ("jacobian bound", jacobian_bound),
        ("flat spectrum", flat_spectrum),
        ("eigenvalue rate", eigenvalue_rate),
        ("eigenfunction rates", eigenfunction_rates),
        ("resolvent rate", resolvent_rate),
        ("hot spots", hot_spots),
        ("localization", localization),
        ("pure geometry", pure_geometry),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
