//! Acceptance criteria, one line each. Exits non-zero when any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use modrop::opalg::Engine;
use modrop::rop::{yb0_residual, Grid};
use modrop::specfun::GammaEvaluator;
use modrop::verify::{convergence_series, run_suite, RelationReport, RunConfig, Suite};

struct Verdict {
    pass: bool,
    detail: String,
}

fn config(ids: &[&str]) -> RunConfig {
    RunConfig { relations: Some(ids.iter().map(|s| s.to_string()).collect()), ..RunConfig::default() }
}

fn describe(r: &RelationReport) -> String {
    match r.residual {
        Some(x) => format!("{}={x:.2e}{}", r.relation_id, if r.pass { "" } else { "(!)" }),
        None => format!("{}: {:?}", r.relation_id, r.outcome),
    }
}

/// Runs the relations and requires every one to pass within `budget`.
fn relations(ids: &[&str], budget: Duration) -> (Verdict, Vec<RelationReport>) {
    let start = Instant::now();
    let reports = match run_suite(&config(ids)) {
        Ok(r) => r,
        Err(e) => return (Verdict { pass: false, detail: format!("run failed: {e}") }, Vec::new()),
    };
    let elapsed = start.elapsed();
    let pass = reports.iter().all(|r| r.pass) && reports.len() == ids.len() && elapsed < budget;
    let mut detail: Vec<String> = reports.iter().map(describe).collect();
    detail.push(format!("{:.1}s of {}s", elapsed.as_secs_f64(), budget.as_secs()));
    (Verdict { pass, detail: detail.join(" ") }, reports)
}

fn series(id: &str, resolutions: &[f64]) -> Verdict {
    match convergence_series(&RunConfig::default(), id, resolutions) {
        Ok(t) => {
            let rows: Vec<String> =
                t.rows.iter().map(|r| format!("{}={}:{:.2e}", t.parameter, r.resolution, r.residual)).collect();
            Verdict { pass: t.non_increasing, detail: format!("{id} series {}", rows.join(" ")) }
        }
        Err(e) => Verdict { pass: false, detail: format!("{id} series failed: {e}") },
    }
}

/// YB0 on a finer grid with a wider box, where it does reach the tolerance.
fn yb0_refined() -> String {
    let cfg = RunConfig::default();
    let sp = &cfg.spins;
    let grid = Grid::new(4.5, 128);
    let residual = cfg
        .params()
        .and_then(|p| GammaEvaluator::new(p, cfg.numerics()))
        .and_then(|ev| yb0_residual(&Engine::new(Arc::new(ev)), [sp.s1, sp.s2, sp.s3], grid));
    match residual {
        Ok(r) => format!("YB0 at L={} N={}: {r:.2e}", grid.l, grid.points),
        Err(e) => format!("YB0 at N={} failed: {e}", grid.points),
    }
}

fn both(a: Verdict, b: Verdict) -> Verdict {
    Verdict { pass: a.pass && b.pass, detail: format!("{}; {}", a.detail, b.detail) }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn determinism() -> Verdict {
    let cfg = RunConfig { suite: Suite::Full, ..RunConfig::default() };
    let bits = |cfg: &RunConfig| -> Result<Vec<(String, Option<u64>)>, String> {
        let reports = run_suite(cfg).map_err(|e| e.to_string())?;
        Ok(reports.into_iter().map(|r| (r.relation_id, r.residual.map(f64::to_bits))).collect())
    };
    match (bits(&cfg), bits(&cfg)) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<&str> =
                a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
            let pass = a.len() == b.len() && differing.is_empty();
            let detail = if pass {
                format!("{} residuals bit-identical across two full-suite runs", a.len())
            } else {
                format!("differing: {}", differing.join(", "))
            };
            Verdict { pass, detail }
        }
        (Err(e), _) | (_, Err(e)) => Verdict { pass: false, detail: e },
    }
}

type Criterion = (&'static str, Box<dyn Fn() -> Verdict>);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("gamma identities", Box::new(|| relations(&["gamma-diff", "refl", "gamma-swap"], secs(10)).0)),
        ("D identities", Box::new(|| relations(&["Dev", "FunEq"], secs(5)).0)),
        (
            "Fourier formula",
            Box::new(|| both(relations(&["FourierD"], secs(30)).0, series("FourierD", &[10.0, 20.0, 40.0]))),
        ),
        ("integral star-triangle", Box::new(|| relations(&["str-trg"], secs(60)).0)),
        ("operator star-triangle", Box::new(|| relations(&["star-triang", "WSW1", "WSW2"], secs(120)).0)),
        ("modular double algebra", Box::new(|| relations(&["qsl2", "qsl2-tilde", "cross", "Casimirs"], secs(60)).0)),
        ("intertwiner", Box::new(|| relations(&["intw1", "W-backends"], secs(60)).0)),
        (
            "L-level",
            Box::new(|| relations(&["LBT07Fact", "NM", "WL2", "intwL+L-", "L+toL-", "reductions"], secs(180)).0),
        ),
        ("S2 and Coxeter words", Box::new(|| relations(&["SLL", "def1", "def3"], secs(180)).0)),
        (
            "RLL",
            Box::new(|| relations(&["RLL1", "RLL2", "R-trivial", "R-forms", "R-forms-lattice"], secs(300)).0),
        ),
        ("Yang-Baxter", Box::new(|| relations(&["YB1-coarse", "YB1"], secs(600)).0)),
        (
            "reductions",
            Box::new(|| {
                let main = relations(&["red", "r-translation", "YB0", "rlL", "rLl"], secs(300)).0;
                Verdict { pass: main.pass, detail: format!("{}; for reference {}", main.detail, yb0_refined()) }
            }),
        ),
        (
            "SL(2,C) oracle",
            Box::new(|| {
                let ids = ["sl2c-L", "f1", "f2", "L-L+", "L+L-", "sl2c-L+toL-", "L-L+L-L+", "sl2c-RLL", "R-word"];
                let (v, reports) = relations(&ids, secs(30));
                let exact = reports.iter().all(|r| r.residual == Some(0.0));
                Verdict { pass: v.pass && exact, detail: v.detail }
            }),
        ),
        ("determinism", Box::new(determinism)),
    ];

    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, k + 1, v.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
