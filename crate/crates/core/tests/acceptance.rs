//! Desk-scale acceptance checks. Each test writes one `PASS` / `FAIL` line
//! straight to stderr (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use vlasov_renorm::cli::config::ExperimentConfig;
use vlasov_renorm::cli::experiments::{commutator_ladder, mollification_ladder, run_endpoint, run_simulate, Outcome};
use vlasov_renorm::cli::report::ReportWriter;
use vlasov_renorm::cli::verify::{identity_residuals, lemma_rows, oracle_gap, IDENTITY_CHECKS};
use vlasov_renorm::diagnostics::geometric_levels;
use vlasov_renorm::fields::{Axis, AxisKind};
use vlasov_renorm::norms::{Exponent, Rational, RegularityClass};

fn line(name: &str, pass: bool, elapsed: Duration, limit_s: u64, detail: &str) -> bool {
    let within = elapsed.as_secs_f64() <= limit_s as f64;
    let ok = pass && within;
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "acceptance {} {name}: {detail}; {:.1} s (limit {limit_s} s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn reg(theta: (i64, i64), kappa: (i64, i64)) -> RegularityClass {
    RegularityClass::exact(Rational::new(theta.0, theta.1).unwrap(), Exponent::Finite(2.0))
        .unwrap()
        .with_field_exact(Rational::new(kappa.0, kappa.1).unwrap(), Exponent::Finite(2.0))
        .unwrap()
}

fn assertion<'a>(o: &'a Outcome, name: &str) -> &'a vlasov_renorm::cli::report::Assertion {
    o.assertions.iter().find(|a| a.name.starts_with(name)).expect("assertion present")
}

#[test]
fn exact_identities() {
    let t = Instant::now();
    let mut worst = [0.0f64; 4];
    for seed in 0..32 {
        let r = identity_residuals(128, 64, seed).unwrap();
        for (w, v) in worst.iter_mut().zip(r) {
            *w = w.max(v);
        }
    }
    let pass = worst.iter().all(|w| *w <= 1e-8);
    let detail = IDENTITY_CHECKS
        .iter()
        .zip(worst)
        .map(|(n, w)| format!("{n} {w:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    assert!(line("exact identities, 32 seeds, 128x64^2, residual <= 1e-8", pass, t.elapsed(), 120, &detail));
}

#[test]
fn lemma_inequalities() {
    let t = Instant::now();
    let rows = lemma_rows(&[0, 1, 2, 3], 250_000, 1e-10).unwrap();
    let mut detail = Vec::new();
    let mut pass = true;
    for name in ["velocity_increment", "velocity_mollification", "velocity_jacobian", "contraction_lp", "contraction_wtp", "domination"] {
        let mine: Vec<_> = rows.iter().filter(|r| r.check == name).collect();
        let checks: usize = mine.iter().map(|r| r.checks).sum();
        let violations: usize = mine.iter().map(|r| r.violations).sum();
        pass &= checks >= 1_000_000 && violations == 0;
        detail.push(format!("{name} {violations}/{checks}"));
    }
    assert!(line("lemma inequalities, zero violations beyond 1e-10", pass, t.elapsed(), 60, &detail.join(", ")));
}

#[test]
fn mollification_rates() {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (theta, p) in [((3, 10), Exponent::Finite(2.0)), ((1, 2), Exponent::Finite(2.0)), ((7, 10), Exponent::Infinity)] {
        let class = RegularityClass::exact(Rational::new(theta.0, theta.1).unwrap(), p).unwrap();
        let (diff, grad) = mollification_ladder(&class, 1 << 14, 1.0 / 32.0, 5, 0).unwrap();
        let th = class.theta();
        pass &= (diff.slope - th).abs() <= 0.1 && (grad.slope - (th - 1.0)).abs() <= 0.1;
        detail.push(format!("theta {th} p {}: {:.3} / {:.3}", p.label(), diff.slope, grad.slope));
    }
    assert!(line("mollification rates within 0.1 of theta and theta-1", pass, t.elapsed(), 300, &detail.join(", ")));
}

#[test]
fn commutator_rates() {
    let t = Instant::now();
    let r = reg((1, 2), (1, 2));
    let axes = vec![
        Axis::periodic(AxisKind::X1, 1.0, 256).unwrap(),
        Axis::centered(AxisKind::S1, 1.5, 128).unwrap(),
        Axis::centered(AxisKind::S2, 1.5, 128).unwrap(),
    ];
    let eps = geometric_levels(1.0 / 16.0, 2.0, 4);
    let lad = commutator_ladder(&r, axes, &eps, 0).unwrap();
    let predicted = r.predicted_exponent().unwrap();
    let (fs, te) = (lad.free_streaming.slope, lad.electric.slope);
    let pass = (fs - predicted).abs() <= 0.15 && (te - predicted).abs() <= 0.15;
    let detail = format!("free-streaming {fs:.3}, electric {te:.3}, target {predicted} +- 0.15");
    assert!(line("commutator rates on 256x128^2", pass, t.elapsed(), 1200, &detail));
}

#[test]
fn endpoint() {
    let t = Instant::now();
    let crit = reg((1, 5), (1, 3)).criticality().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut out = ReportWriter::create(dir.path()).unwrap();
    let o = run_endpoint(&ExperimentConfig::default(), &mut out).unwrap();
    let slope = assertion(&o, "combined commutator slope");
    let residual = assertion(&o, "renormalization residual");
    let pass = crit.is_zero() && slope.pass && slope.value >= -0.05 && residual.pass && residual.value <= 1.05;
    let detail = format!(
        "criticality {crit}, combined slope {:.4}, worst residual ratio {:.4}",
        slope.value, residual.value
    );
    assert!(line("endpoint boundedness and monotone residual", pass, t.elapsed(), 1200, &detail));
}

#[test]
fn conservation() {
    let t = Instant::now();
    let mut cfg = ExperimentConfig::default();
    let mut detail = Vec::new();
    let mut pass = true;
    for (label, dim, ns, b0, wave) in [("1D1V 128x128", 1, 128, 0.0, 0.0), ("1D2V 128x64^2", 2, 64, 0.5, 0.01)] {
        cfg.simulate.momentum_dim = dim;
        cfg.simulate.ns = ns;
        cfg.simulate.b0 = b0;
        cfg.simulate.wave = wave;
        let dir = tempfile::tempdir().unwrap();
        let mut out = ReportWriter::create(dir.path()).unwrap();
        let o = run_simulate(&cfg, &mut out).unwrap();
        let (m, e, g) = (assertion(&o, "mass"), assertion(&o, "entropy"), assertion(&o, "Gauss"));
        pass &= m.value <= 1e-8 && e.value <= 1e-3 && g.value <= 1e-8;
        detail.push(format!("{label}: mass {:.1e}, entropy {:.1e}, Gauss {:.1e}", m.value, e.value, g.value));
    }
    assert!(line("conservation budgets on [0, 1]", pass, t.elapsed(), 600, &detail.join("; ")));
}

#[test]
fn annular_oracle() {
    let t = Instant::now();
    let worst = (0..16).map(|s| oracle_gap(s).unwrap()).fold(0.0, f64::max);
    let detail = format!("largest relative gap {worst:.1e} over 16 seeds, 1024 points");
    assert!(line("banded annulus equals the double sum to 1e-12", worst <= 1e-12, t.elapsed(), 60, &detail));
}

#[test]
fn verify_is_reproducible() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    let mut codes = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_vlasov-renorm"))
            .args(["verify", "--seed", "5", "--out", out.to_str().unwrap()])
            .env_remove("VLASOV_RENORM_OUT")
            .output()
            .unwrap()
            .status;
        codes.push(status.code());
        bytes.push(std::fs::read(out.join("verify_matrix_seed5.csv")).unwrap());
    }
    let same = bytes[0] == bytes[1];
    let detail = format!("exit codes {codes:?}, {} CSV bytes, identical {same}", bytes[0].len());
    assert!(line("verify reruns give byte-identical CSV", same, t.elapsed(), 300, &detail));
}
