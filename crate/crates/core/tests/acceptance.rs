//! Fifteen acceptance criteria, one PASS/FAIL line each. Runs without the
//! libtest harness so the lines always reach the output; exits non-zero if
//! any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use fracbec::asymptotics::{concentration_report, fit_power_law, tail_window, SweepOutcome};
use fracbec::config::RunConfig;
use fracbec::ground_state::GroundStateReference;
use fracbec::verification::{
    decoupling, eigen_limit, gagliardo_nirenberg, oracle_equivalence, reference_for, standard_sweep,
    sqrt_potential, symmetry_breaking, two_oracle_a_star, two_zero_potential, uniqueness, CriterionOutcome,
};

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u8, title: &str, passed: bool, detail: String) {
        if !passed {
            self.failures += 1;
        }
        println!("{} criterion {id:>2} {title}: {detail}", if passed { "PASS" } else { "FAIL" });
    }

    /// A criterion evaluated by the library; the measured values it reports
    /// are re-checked here against the stated bounds.
    fn library(&mut self, o: CriterionOutcome, bounds: &[(&str, fn(f64) -> bool)]) {
        let mut passed = o.passed;
        for (key, ok) in bounds {
            match o.measured.get(*key) {
                Some(v) => passed &= ok(*v),
                None => passed = false,
            }
        }
        self.line(o.id, &o.title, passed, o.detail);
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_1(r: &mut Report, reference: &GroundStateReference) {
    let ex = &reference.extrapolation;
    let (s, m, h) = (ex.seminorm, ex.a_star, 0.5 * ex.q4);
    let worst = rel(s, m).max(rel(h, m)).max(rel(s, h));
    r.line(
        1,
        "Pohozaev identity",
        worst <= 1e-5,
        format!(
            "seminorm {s:.10}, mass {m:.10}, q4/2 {h:.10}: worst pair {worst:.3e} (raw on L={}: {:.3e})",
            reference.base.grid().length(),
            (ex.base.pohozaev_seminorm_over_mass - 1.0).abs()
        ),
    );
}

fn criterion_4(r: &mut Report, reference: &GroundStateReference) {
    match fracbec::ground_state::tail_exponent(reference.q()) {
        Ok(fit) => r.line(
            4,
            "tail decay",
            (-2.3..=-1.7).contains(&fit.slope),
            format!("slope {:.4} (r2 {:.5})", fit.slope, fit.r_squared),
        ),
        Err(e) => r.line(4, "tail decay", false, e.to_string()),
    }
}

fn criterion_7(r: &mut Report, sweeps: &[&SweepOutcome]) {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for s in sweeps {
        for rec in &s.records {
            let lower = rec.single_energies[0] + rec.single_energies[1] - rec.energy;
            let upper = rec.energy - rec.trial_upper;
            worst = worst.max(lower).max(upper);
            count += 1;
        }
    }
    r.line(
        7,
        "energy sandwich",
        count > 0 && worst <= 1e-6,
        format!("{count} records, largest violation {worst:.3e}"),
    );
}

fn criterion_8(r: &mut Report, sweep: &SweepOutcome, seconds: f64) {
    let window = tail_window(sweep.records.len(), 5);
    match fit_power_law(&sweep.gaps(), &sweep.energies(), window) {
        Ok(fit) => r.line(
            8,
            "energy-scaling exponent",
            sweep.records.len() == 8 && rel(fit.slope, 1.0 / 3.0) <= 0.05 && fit.r_squared > 0.99 && seconds <= 600.0,
            format!(
                "slope {:.4} (1/3 +- 5%), r2 {:.6}, {} records in {seconds:.1} s",
                fit.slope,
                fit.r_squared,
                sweep.records.len()
            ),
        ),
        Err(e) => r.line(8, "energy-scaling exponent", false, e.to_string()),
    }
}

fn criterion_9(r: &mut Report, sweep: &SweepOutcome) {
    let window = tail_window(sweep.records.len(), 5);
    let mut passed = true;
    let mut detail = String::new();
    for i in 0..2 {
        match fit_power_law(&sweep.gaps(), &sweep.l4(i), window.clone()) {
            Ok(fit) => {
                passed &= rel(fit.slope, -2.0 / 3.0) <= 0.05;
                detail.push_str(&format!("slope u{} {:.4}; ", i + 1, fit.slope));
            }
            Err(e) => {
                passed = false;
                detail.push_str(&format!("{e}; "));
            }
        }
    }
    let last = sweep.records.last().expect("records");
    let ratio = last.l4[0] / last.l4[1];
    passed &= (ratio - 1.0).abs() <= 0.1;
    detail.push_str(&format!("final L4 ratio {ratio:.6}"));
    r.line(9, "L4-scaling exponent", passed, detail);
}

fn criterion_10(r: &mut Report, sweep: &SweepOutcome) {
    let first = sweep.records.first().expect("records");
    let last = sweep.records.last().expect("records");
    let passed = (0..2).all(|i| last.profile_distance[i].l2 < 5e-2 && last.profile_distance[i].l2 < first.profile_distance[i].l2);
    r.line(
        10,
        "profile convergence",
        passed,
        format!(
            "L2 distance u1 {:.3e} -> {:.3e}, u2 {:.3e} -> {:.3e} (lambda {:.6})",
            first.profile_distance[0].l2,
            last.profile_distance[0].l2,
            first.profile_distance[1].l2,
            last.profile_distance[1].l2,
            sweep.lambda
        ),
    );
}

fn criterion_11(r: &mut Report, sweep: &SweepOutcome) {
    let last = sweep.records.last().expect("records");
    let report = concentration_report(&sweep.records, &sweep.flatness).expect("at least 3 records");
    let near_plus = last.max_points.iter().all(|x| (x - 1.0).abs() <= last.eps);
    let ratios: Vec<[f64; 2]> = sweep
        .records
        .iter()
        .map(|rec| [(rec.max_points[0] - 1.0).abs() / rec.eps, (rec.max_points[1] - 1.0).abs() / rec.eps])
        .collect();
    let tail = &ratios[ratios.len() - 3..];
    let decreasing = (0..2).all(|i| tail.windows(2).all(|w| w[1][i] < w[0][i]));
    let small = tail[2].iter().all(|v| *v < 0.1);
    r.line(
        11,
        "flattest-site selection",
        near_plus && decreasing && small && report.site == 1.0,
        format!(
            "final max points {:.6}, {:.6} at eps {:.3e}; ratios over last 3: {:.2e}, {:.2e}, {:.2e}",
            last.max_points[0], last.max_points[1], last.eps, tail[0][0], tail[1][0], tail[2][0]
        ),
    );
}

fn criterion_12(r: &mut Report, sweep: &SweepOutcome) {
    let last = sweep.records.last().expect("records");
    let scaled = [last.eps * last.mu[0], last.eps * last.mu[1]];
    r.line(
        12,
        "multiplier scaling",
        scaled.iter().all(|v| rel(*v, -sweep.lambda) <= 0.1),
        format!("eps*mu = {:.5}, {:.5} against -lambda = {:.5}", scaled[0], scaled[1], -sweep.lambda),
    );
}

fn main() -> ExitCode {
    let config = RunConfig::default();
    let mut r = Report { failures: 0 };
    let reference = match reference_for(&config) {
        Ok(reference) => reference,
        Err(e) => {
            println!("FAIL ground state unavailable: {e}");
            return ExitCode::FAILURE;
        }
    };
    let a_star = reference.a_star();

    criterion_1(&mut r, &reference);
    r.library(gagliardo_nirenberg(&reference, 100, config.verify.seed), &[
        ("max quotient over random fields", |v| v <= 1.0 + 1e-6),
        ("quotient at Q", |v| (v - 1.0).abs() <= 1e-5),
    ]);
    r.library(two_oracle_a_star(&reference, &config), &[
        ("Petviashvili vs gradient flow", |v| v <= 1e-4),
        ("(L, N) doubled", |v| v <= 1e-4),
    ]);
    criterion_4(&mut r, &reference);
    r.library(eigen_limit(), &[
        ("|E - (lambda1 + lambda2)|", |v| v <= 1e-6),
        ("|dense lambda1 (N=512) - spectral (N=8192)|", |v| v <= 1e-3),
        ("|dense lambda2 (N=512) - spectral (N=8192)|", |v| v <= 1e-3),
    ]);
    r.library(decoupling(a_star), &[("|e(d,d) - 2 e1(d)|", |v| v < 2e-6)]);

    let start = Instant::now();
    let sqrt_sweep = standard_sweep(sqrt_potential(), &reference);
    let sqrt_seconds = start.elapsed().as_secs_f64();
    let two_zero_sweep = standard_sweep(two_zero_potential(), &reference);
    match (&sqrt_sweep, &two_zero_sweep) {
        (Ok(sqrt_sweep), Ok(two_zero_sweep)) => {
            criterion_7(&mut r, &[sqrt_sweep, two_zero_sweep]);
            criterion_8(&mut r, sqrt_sweep, sqrt_seconds);
            criterion_9(&mut r, sqrt_sweep);
            criterion_10(&mut r, sqrt_sweep);
            criterion_11(&mut r, two_zero_sweep);
            criterion_12(&mut r, sqrt_sweep);
        }
        _ => {
            for (id, title) in [
                (7, "energy sandwich"),
                (8, "energy-scaling exponent"),
                (9, "L4-scaling exponent"),
                (10, "profile convergence"),
                (11, "flattest-site selection"),
                (12, "multiplier scaling"),
            ] {
                r.line(id, title, false, format!("sweeps failed: {:?} / {:?}", sqrt_sweep.as_ref().err(), two_zero_sweep.as_ref().err()));
            }
        }
    }

    r.library(uniqueness(a_star, 8, config.verify.seed, 0.05), &[("max pairwise distance", |v| v < 1e-6)]);
    r.library(symmetry_breaking(&reference, config.verify.symmetry_starts, config.verify.seed), &[
        ("asymmetry far from critical", |v| v < 0.1),
        ("min asymmetry at tightest eps", |v| v > 0.8),
    ]);
    r.library(oracle_equivalence(config.verify.seed), &[
        ("operator mismatch", |v| v <= 1e-8),
        ("single energy mismatch", |v| v <= 1e-6),
    ]);

    println!("{} of 15 criteria failed", r.failures);
    if r.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
