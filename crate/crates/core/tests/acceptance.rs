//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! the assertion comes last so every line is printed.

use std::time::Instant;

use gexp_core::verify::{reports_to_json, run_suite, SuiteConfig, VerificationReport};

struct Outcome {
    n: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn suite(ids: &[&str]) -> Vec<VerificationReport> {
    let cfg = SuiteConfig { only: Some(ids.iter().map(|s| s.to_string()).collect()), ..SuiteConfig::default() };
    run_suite(&cfg).expect("suite runs")
}

fn all_expected(reports: &[VerificationReport]) -> Result<(), String> {
    if reports.is_empty() {
        return Err("no reports".into());
    }
    match reports.iter().find(|r| !r.as_expected()) {
        Some(r) => Err(format!("{} lhs={} rhs={} tol={} pass={}", r.id, r.lhs, r.rhs, r.tol, r.pass)),
        None => Ok(()),
    }
}

fn find<'a>(reports: &'a [VerificationReport], id: &str) -> &'a VerificationReport {
    reports.iter().find(|r| r.id == id).unwrap_or_else(|| panic!("missing report {id}"))
}

fn criterion(
    out: &mut Vec<Outcome>,
    n: usize,
    name: &'static str,
    budget_s: f64,
    body: impl FnOnce() -> Result<(), String>,
) {
    let start = Instant::now();
    let res = body();
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match res {
        Ok(()) if secs < budget_s => (true, format!("{secs:.2}s")),
        Ok(()) => (false, format!("{secs:.2}s exceeds {budget_s}s")),
        Err(e) => (false, format!("{secs:.2}s: {e}")),
    };
    println!("criterion {n:>2} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    out.push(Outcome { n, name, pass, detail });
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

#[test]
fn acceptance() {
    let mut out = Vec::new();

    criterion(&mut out, 1, "g-normal moments", 5.0, || {
        let reports = suite(&["gnormal-moments"]);
        all_expected(&reports)?;
        let upper = find(&reports, "gnormal-moments:lattice:upper");
        let lower = find(&reports, "gnormal-moments:lattice:lower");
        ensure(upper.n_steps == 200, || format!("lattice used {} steps", upper.n_steps))?;
        ensure((upper.lhs - 1.0).abs() <= 1e-10 && (lower.lhs - 0.25).abs() <= 1e-10, || {
            format!("lattice moments {} {}", upper.lhs, lower.lhs)
        })?;
        let pu = find(&reports, "gnormal-moments:pde:upper");
        let pl = find(&reports, "gnormal-moments:pde:lower");
        ensure((pu.lhs - 1.0).abs() <= 2e-3 && (pl.lhs - 0.25).abs() <= 2e-3, || format!("pde moments {} {}", pu.lhs, pl.lhs))
    });

    criterion(&mut out, 2, "cross-backend agreement", 30.0, || {
        let reports = suite(&["cross-backend"]);
        ensure(reports.len() == 6, || format!("{} payoffs", reports.len()))?;
        all_expected(&reports)?;
        ensure(reports.iter().all(|r| (r.lhs - r.rhs).abs() <= 1e-2), || "difference above 1e-2".into())
    });

    criterion(&mut out, 3, "conditional-expectation algebra", 30.0, || {
        let reports = suite(&["conditional-algebra"]);
        all_expected(&reports)?;
        let r = &reports[0];
        ensure(r.n_steps == 50 && r.parts["corpus_size"] == 10.0 && r.lhs <= 1e-10, || format!("{r:?}"))
    });

    criterion(&mut out, 4, "quadratic-variation identity", 10.0, || {
        let reports = suite(&["qv-identity"]);
        all_expected(&reports)?;
        ensure(reports.iter().all(|r| r.n_paths >= Some(10_000) && r.tol <= 1e-12), || "sampling or tolerance off".into())
    });

    criterion(&mut out, 5, "quasi-sure qv band", 5.0, || {
        let reports = suite(&["qv-band"]);
        all_expected(&reports)?;
        ensure(reports.iter().all(|r| r.lhs == 0.0), || "band violated on some path".into())
    });

    criterion(&mut out, 6, "ito isometry", 60.0, || {
        let reports = suite(&["isometry"]);
        ensure(reports.len() == 8, || format!("{} cases", reports.len()))?;
        all_expected(&reports)?;
        ensure(reports.iter().all(|r| r.n_steps == 100 && r.tol <= 1e-8), || "isometry ran below 100 steps".into())
    });

    criterion(&mut out, 7, "doob inequality", 60.0, || {
        let reports = suite(&["doob"]);
        ensure(reports.len() == 6, || format!("{} cases", reports.len()))?;
        all_expected(&reports)?;
        ensure(reports.iter().all(|r| r.parts["constant"] == 4.0), || "constant is not 4".into())?;
        let b = reports.iter().filter(|r| r.id.starts_with("doob:B:"));
        ensure(b.clone().count() == 3 && b.into_iter().all(|r| r.n_paths >= Some(100_000)), || "B not sampled at 1e5 paths".into())
    });

    criterion(&mut out, 8, "downcrossing inequality", 60.0, || {
        let reports = suite(&["downcrossing"]);
        ensure(reports.len() == 4, || format!("{} supermartingales", reports.len()))?;
        all_expected(&reports)
    });

    criterion(&mut out, 9, "bdg inequalities", 60.0, || {
        let reports = suite(&["bdg-a", "bdg-two-sided"]);
        all_expected(&reports)?;
        let first_order = reports.iter().filter(|r| r.id.ends_with("q=1") || r.id.ends_with("p=1"));
        ensure(first_order.clone().count() > 0, || "no first-order cases".into())?;
        for r in first_order {
            let ok = if r.id.starts_with("bdg-a") {
                r.parts["constant"] == 4.0
            } else {
                r.parts["lower_constant"] == 0.25 && r.parts["upper_constant"] == 4.0
            };
            ensure(ok, || format!("{} constants {:?}", r.id, r.parts))?;
        }
        Ok(())
    });

    criterion(&mut out, 10, "representation round trip", 60.0, || {
        let mut reports = suite(&["representation", "gbm-characterization"]);
        all_expected(&reports)?;
        let two_b = find(&reports, "gbm-characterization:2B");
        ensure(!two_b.pass && two_b.parts["ii_square_minus_time"] > 1e-8, || "2B passes condition (ii)".into())?;
        ensure(two_b.parts["slope_gap"] >= 2.0, || format!("slope gap {}", two_b.parts["slope_gap"]))?;
        reports.retain(|r| r.id.starts_with("representation"));
        ensure(reports.len() == 12, || format!("{} representation reports", reports.len()))?;
        for r in &reports {
            let tol = if r.id.ends_with(":recovery") { 1e-12 } else { 1e-8 };
            ensure(r.pass && r.tol <= tol, || format!("{} tol {}", r.id, r.tol))?;
        }
        Ok(())
    });

    criterion(&mut out, 11, "g-compensator monotonicity", 30.0, || {
        let reports = suite(&["compensator"]);
        ensure(reports.len() == 6, || format!("{} reports", reports.len()))?;
        all_expected(&reports)?;
        ensure(reports.iter().filter(|r| r.id.ends_with(":martingale")).all(|r| r.tol <= 1e-8), || "tolerance off".into())
    });

    criterion(&mut out, 12, "determinism", 600.0, || {
        let cfg = SuiteConfig::default();
        let a = reports_to_json(&run_suite(&cfg).map_err(|e| e.to_string())?);
        let b = reports_to_json(&run_suite(&cfg).map_err(|e| e.to_string())?);
        ensure(a == b, || "reports differ between runs".into())
    });

    let failed: Vec<String> = out.iter().filter(|o| !o.pass).map(|o| format!("{} {} ({})", o.n, o.name, o.detail)).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
