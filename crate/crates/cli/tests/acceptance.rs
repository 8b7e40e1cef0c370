//! One PASS/FAIL line per numbered criterion on a pinned configuration,
//! followed by the seeded random properties and a determinism check of the
//! whole report. Tolerances live in `dpwkit_cli::suite::tol`.

use std::io::Write;

use dpwkit::grid::RectGrid;
use dpwkit_cli::config::RunConfig;
use dpwkit_cli::suite::{self, Check, Context};

/// Truncation of the acceptance run. At N = 12 the negative-mode mass of W₊
/// is a truncation artifact of about 1e-9; at N = 14 it is below 1e-11.
const ACCEPTANCE_N: usize = 14;
const ACCEPTANCE_HALF_WIDTH: f64 = 0.5;
const ACCEPTANCE_POINTS: usize = 21;

/// Checks that fail for a known reason and are expected to stay red.
///
/// For `F₁ = hF₀k₀h⁻¹` with `h = F₀(z₁, 1)`, `F₁(z₁) = h·F₀(z₁)·k₀·h⁻¹` is the
/// identity only if `k₀ = F₀(z₁)⁻¹`. For `z₁ ≠ z₀` that loop depends on `λ`,
/// so no constant gauge `k₀` makes the frame relation `F₁,₋ = hF₀,₋h⁻¹` and
/// `F₁(z₁) = I` hold together.
const KNOWN_RED: &[&str] = &["c5.frame_identity_at_target"];

fn acceptance_config() -> RunConfig {
    RunConfig {
        truncation: ACCEPTANCE_N,
        grid: RectGrid::square(ACCEPTANCE_HALF_WIDTH, ACCEPTANCE_POINTS).unwrap(),
        ..RunConfig::default()
    }
}

/// Writes to the stderr handle directly, which the test harness does not
/// capture, so the lines show up without `--nocapture`.
fn emit(text: String) {
    std::io::stderr().lock().write_all(text.as_bytes()).unwrap();
}

fn line(label: &str, checks: &[Check]) {
    let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
    let mut s = format!("{}  {label}\n", if pass { "PASS" } else { "FAIL" });
    for c in checks {
        s.push_str(&format!(
            "        {} {:<44} {:.3e} (threshold {:.1e})\n",
            if c.pass { "ok  " } else { "FAIL" },
            c.id,
            c.value,
            c.threshold
        ));
    }
    emit(s);
}

#[test]
fn acceptance_criteria() {
    emit("\n".into());
    let cfg = acceptance_config();
    let ctx = Context::new((&cfg).into());
    let mut failed = Vec::new();
    for k in suite::CRITERIA {
        let checks = suite::criterion(k, &ctx);
        line(&format!("criterion {k}"), &checks);
        failed.extend(checks.into_iter().filter(|c| !c.pass).map(|c| c.id));
    }
    let props = suite::random_checks(&ctx.cfg).expect("random instances");
    line("random-instance properties", &props);
    failed.extend(props.into_iter().filter(|c| !c.pass).map(|c| c.id));
    for w in ctx.warnings() {
        emit(format!("WARN  {w}\n"));
    }
    for id in KNOWN_RED {
        if !failed.iter().any(|f| f == id) {
            emit(format!("NOTE  known-red check {id} now passes\n"));
        }
    }
    let unexpected: Vec<_> = failed.iter().filter(|f| !KNOWN_RED.contains(&f.as_str())).collect();
    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:?}");
}

#[test]
fn acceptance_report_is_reproducible() {
    emit("\n".into());
    let cfg = RunConfig {
        truncation: 6,
        grid: RectGrid::square(0.25, 9).unwrap(),
        seed: 7,
        ..RunConfig::default()
    };
    let a = serde_json::to_string(&suite::run(&cfg)).unwrap();
    let b = serde_json::to_string(&suite::run(&cfg)).unwrap();
    let same = a == b;
    emit(format!(
        "{}  criterion 11: identical reports for identical config and seed\n",
        if same { "PASS" } else { "FAIL" }
    ));
    assert!(same);
}
