//! The invariant suite behind the `verify` command: fifteen numbered checks
//! on the ground state, the minimizer and the near-critical sweeps, each at
//! a fixed tolerance.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    concentration_report, fit_power_law, run_sweep, symmetry_breaking_probe, tail_window, uniqueness_probe,
    InitialGuess, LadderSpec, SweepConfig, SweepOutcome,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ground_state::{
    gn_quotient, ground_state_reference, solve_q_gnf, solve_q_petviashvili, tail_exponent, GroundStateReference,
};
use crate::minimizer::{
    first_eigenpair, minimize, minimize_single, CoupledParams, CoupledState, SolverOptions,
};
use crate::oracle::{dense_apply, dense_first_eigenpair, descent_minimize_single};
use crate::potentials::PotentialSpec;
use crate::spectral::{fractional_apply, mass_normalize, Field, MultiplierPower, SpectralGrid};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail
        )
    }
}

struct Check {
    passed: bool,
    measured: BTreeMap<String, f64>,
    detail: String,
}

impl Check {
    fn new() -> Self {
        Self {
            passed: true,
            measured: BTreeMap::new(),
            detail: String::new(),
        }
    }

    /// Records `value` and folds `ok` into the verdict.
    fn expect(&mut self, name: &str, value: f64, ok: bool, bound: &str) {
        self.measured.insert(name.to_string(), value);
        self.passed &= ok && value.is_finite();
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&format!("{name} = {value:.6e} ({bound})"));
    }

    fn note(&mut self, name: &str, value: f64) {
        self.measured.insert(name.to_string(), value);
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&format!("{name} = {value:.6e}"));
    }
}

fn outcome(id: u8, title: &str, body: impl FnOnce() -> Result<Check>) -> CriterionOutcome {
    match body() {
        Ok(c) => CriterionOutcome {
            id,
            title: title.to_string(),
            passed: c.passed,
            measured: c.measured,
            detail: c.detail,
        },
        Err(e) => CriterionOutcome {
            id,
            title: title.to_string(),
            passed: false,
            measured: BTreeMap::new(),
            detail: format!("error: {e}"),
        },
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn tight_solver() -> SolverOptions {
    SolverOptions {
        tolerance: 1e-10,
        ..SolverOptions::default()
    }
}

/// `|x|^{1/2}`.
pub fn sqrt_potential() -> PotentialSpec {
    PotentialSpec::power(0.0, 0.5).expect("valid potential")
}

/// `|x+1|^{1/2}|x-1|^{3/4}`: two zeros, the flatter one at `+1`.
pub fn two_zero_potential() -> PotentialSpec {
    PotentialSpec::product(&[(-1.0, 0.5), (1.0, 0.75)]).expect("valid potential")
}

/// `|x+1|^{1/2}|x-1|^{1/2}`: two mirror zeros.
pub fn symmetric_potential() -> PotentialSpec {
    PotentialSpec::product(&[(-1.0, 0.5), (1.0, 0.5)]).expect("valid potential")
}

pub fn reference_for(config: &RunConfig) -> Result<GroundStateReference> {
    ground_state_reference(
        config.grid.length,
        config.grid.n_points,
        config.ground_state.tolerance,
        config.ground_state.max_iter,
    )
}

/// Equal potentials `v`, `β = a*/2`, default geometric ladder.
pub fn standard_sweep(v: PotentialSpec, reference: &GroundStateReference) -> Result<SweepOutcome> {
    let a_star = reference.a_star();
    let p0 = crate::potentials::flatness_analysis(&v, &v)?.p0;
    let ladder = LadderSpec::default().build(a_star, p0)?;
    let mut config = SweepConfig::new(0.5 * a_star, ladder, v.clone(), v);
    config.compare_cold_start = true;
    run_sweep(&config, reference)
}

pub fn pohozaev(reference: &GroundStateReference) -> CriterionOutcome {
    outcome(1, "Pohozaev identity", || {
        let mut c = Check::new();
        let ex = &reference.extrapolation;
        c.expect("extrapolated deviation", ex.pohozaev_deviation(), ex.pohozaev_deviation() <= 1e-5, "<= 1e-5");
        c.note("raw seminorm/mass - 1", ex.base.pohozaev_seminorm_over_mass - 1.0);
        c.note("raw (q4/2)/mass - 1", ex.base.pohozaev_half_q4_over_mass - 1.0);
        Ok(c)
    })
}

/// Random smooth fields: sums of one to four Gaussians or sech bumps of
/// either sign.
pub fn random_test_field(grid: &Arc<SpectralGrid>, rng: &mut ChaCha8Rng) -> Result<Field> {
    let l = grid.length();
    let count = rng.gen_range(1..=4);
    let bumps: Vec<(f64, f64, f64, bool)> = (0..count)
        .map(|_| {
            (
                rng.gen_range(-l / 16.0..l / 16.0),
                rng.gen_range(0.2..6.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_bool(0.5),
            )
        })
        .collect();
    Field::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|&(c, w, a, gaussian)| {
                let y = (x - c) / w;
                if gaussian {
                    a * (-y * y).exp()
                } else {
                    a / y.cosh()
                }
            })
            .sum()
    })
}

pub fn gagliardo_nirenberg(reference: &GroundStateReference, n_fields: usize, seed: u64) -> CriterionOutcome {
    outcome(2, "Gagliardo-Nirenberg sharpness", || {
        let mut c = Check::new();
        let a_star = reference.a_star();
        let grid = reference.q().grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..n_fields {
            let u = random_test_field(grid, &mut rng)?;
            worst = worst.max(gn_quotient(&u, a_star));
        }
        c.expect("max quotient over random fields", worst, worst <= 1.0 + 1e-6, "<= 1 + 1e-6");
        let at_q = reference.extrapolation.gn_quotient_at_q();
        c.expect("quotient at Q", at_q, (at_q - 1.0).abs() <= 1e-5, "1 +- 1e-5");
        Ok(c)
    })
}

pub fn two_oracle_a_star(reference: &GroundStateReference, config: &RunConfig) -> CriterionOutcome {
    outcome(3, "two-oracle critical mass", || {
        let mut c = Check::new();
        let base = &reference.base;
        let gs = &config.ground_state;
        let flow = solve_q_gnf(base.grid(), gs.tolerance.max(1e-11), gs.flow_step, gs.flow_max_iter)?;
        let d = rel(flow.a_star, base.a_star);
        c.expect("Petviashvili vs gradient flow", d, d <= 1e-4, "<= 1e-4");
        let d = rel(reference.doubled.a_star, base.a_star);
        c.expect("(L, N) doubled", d, d <= 1e-4, "<= 1e-4");
        let fine = solve_q_petviashvili(
            &SpectralGrid::new(base.grid().length(), 2 * base.grid().n_points())?,
            gs.tolerance,
            gs.max_iter,
        )?;
        let d = rel(fine.a_star, base.a_star);
        c.expect("N doubled", d, d <= 1e-4, "<= 1e-4");
        c.note("a* (extrapolated)", reference.a_star());
        Ok(c)
    })
}

pub fn tail_decay(reference: &GroundStateReference) -> CriterionOutcome {
    outcome(4, "tail decay", || {
        let mut c = Check::new();
        let fit = tail_exponent(reference.q())?;
        c.expect("tail slope", fit.slope, (-2.3..=-1.7).contains(&fit.slope), "in [-2.3, -1.7]");
        c.note("r2", fit.r_squared);
        Ok(c)
    })
}

pub fn eigen_limit() -> CriterionOutcome {
    outcome(5, "eigen-limit", || {
        let mut c = Check::new();
        let (v1, v2) = (sqrt_potential(), two_zero_potential());
        let grid = SpectralGrid::new(8.0, 1024)?;
        let e1 = first_eigenpair(&v1, &grid, 1e-11)?;
        let e2 = first_eigenpair(&v2, &grid, 1e-11)?;
        let zero = CoupledParams::new(0.0, 0.0, 0.0)?;
        let init = CoupledState::gaussian(&grid, 0.0, 1.0)?;
        let r = minimize(&zero, &v1, &v2, &init, &tight_solver(), f64::INFINITY)?;
        let d = (r.energy - (e1.value + e2.value)).abs();
        c.expect("|E - (lambda1 + lambda2)|", d, d <= 1e-6, "<= 1e-6");
        // the |x|^p kink limits grid convergence to O(h^{1+p})
        let coarse = SpectralGrid::new(8.0, 512)?;
        let fine = SpectralGrid::new(8.0, 8192)?;
        for (name, v) in [("lambda1", &v1), ("lambda2", &v2)] {
            let (dense, _) = dense_first_eigenpair(&coarse, &v.sample(&coarse))?;
            let converged = first_eigenpair(v, &fine, 1e-11)?.value;
            let d = (dense - converged).abs();
            c.expect(&format!("|dense {name} (N=512) - spectral (N=8192)|"), d, d <= 1e-3, "<= 1e-3");
        }
        Ok(c)
    })
}

pub fn decoupling(a_star: f64) -> CriterionOutcome {
    outcome(6, "decoupling at beta = 0", || {
        let mut c = Check::new();
        let v = sqrt_potential();
        let d = 0.9 * a_star;
        let grid = SpectralGrid::new(16.0, 2048)?;
        let opts = tight_solver();
        let init = CoupledState::gaussian(&grid, 0.0, 0.5)?;
        let coupled = minimize(&CoupledParams::new(d, d, 0.0)?, &v, &v, &init, &opts, a_star)?;
        let single = minimize_single(d, &v, &init.u1, &opts)?;
        let gap = (coupled.energy - 2.0 * single.energy).abs();
        c.expect("|e(d,d) - 2 e1(d)|", gap, gap < 2e-6, "< 2e-6");
        Ok(c)
    })
}

pub fn sandwich(sweeps: &[&SweepOutcome]) -> CriterionOutcome {
    outcome(7, "energy sandwich", || {
        let mut c = Check::new();
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for s in sweeps {
            for r in &s.records {
                worst = worst.max(r.sandwich_violation());
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::SweepFailed);
        }
        c.expect("largest violation", worst, worst <= 1e-6, "<= 1e-6");
        c.note("records", count as f64);
        Ok(c)
    })
}

fn check_complete(sweep: &SweepOutcome, c: &mut Check) {
    c.expect(
        "failed ladder points",
        sweep.failures.len() as f64,
        sweep.failures.is_empty(),
        "= 0",
    );
}

pub fn energy_scaling(sweep: &SweepOutcome, window: usize) -> CriterionOutcome {
    outcome(8, "energy-scaling exponent", || {
        let mut c = Check::new();
        check_complete(sweep, &mut c);
        let p0 = sweep.flatness.p0;
        let expected = p0 / (p0 + 1.0);
        let fit = fit_power_law(&sweep.gaps(), &sweep.energies(), tail_window(sweep.records.len(), window))?;
        c.expect("slope", fit.slope, rel(fit.slope, expected) <= 0.05, &format!("{expected:.6} +- 5%"));
        c.expect("r2", fit.r_squared, fit.r_squared > 0.99, "> 0.99");
        Ok(c)
    })
}

pub fn l4_scaling(sweep: &SweepOutcome, window: usize) -> CriterionOutcome {
    outcome(9, "L4-scaling exponent", || {
        let mut c = Check::new();
        check_complete(sweep, &mut c);
        let p0 = sweep.flatness.p0;
        let expected = -1.0 / (p0 + 1.0);
        let range = tail_window(sweep.records.len(), window);
        for i in 0..2 {
            let fit = fit_power_law(&sweep.gaps(), &sweep.l4(i), range.clone())?;
            c.expect(
                &format!("slope u{}", i + 1),
                fit.slope,
                rel(fit.slope, expected) <= 0.05,
                &format!("{expected:.6} +- 5%"),
            );
        }
        let last = sweep.records.last().ok_or(Error::SweepFailed)?;
        let ratio = last.l4[0] / last.l4[1];
        c.expect("final L4 ratio", ratio, (ratio - 1.0).abs() <= 0.1, "1 +- 10%");
        Ok(c)
    })
}

pub fn profile_convergence(sweep: &SweepOutcome) -> CriterionOutcome {
    outcome(10, "profile convergence", || {
        let mut c = Check::new();
        let first = sweep.records.first().ok_or(Error::SweepFailed)?;
        let last = sweep.records.last().ok_or(Error::SweepFailed)?;
        for i in 0..2 {
            let d = last.profile_distance[i].l2;
            c.expect(&format!("final L2 distance u{}", i + 1), d, d < 5e-2, "< 5e-2");
            let d0 = first.profile_distance[i].l2;
            c.expect(&format!("first L2 distance u{}", i + 1), d0, d < d0, "> final");
        }
        let n = sweep.records.len();
        let tail = &sweep.records[n.saturating_sub(3)..];
        let monotone = n >= 3
            && (0..2).all(|i| tail.windows(2).all(|w| w[1].profile_distance[i].l2 < w[0].profile_distance[i].l2));
        c.expect("decreasing over last 3", f64::from(u8::from(monotone)), monotone, "= 1");
        c.note("lambda", sweep.lambda);
        Ok(c)
    })
}

pub fn flattest_site(sweep: &SweepOutcome) -> CriterionOutcome {
    outcome(11, "flattest-site selection", || {
        let mut c = Check::new();
        check_complete(sweep, &mut c);
        let last = sweep.records.last().ok_or(Error::SweepFailed)?;
        let report = concentration_report(&sweep.records, &sweep.flatness)?;
        c.expect("selected site", report.site, (report.site - 1.0).abs() < 1e-12, "= +1");
        for i in 0..2 {
            let off = (last.max_points[i] - 1.0).abs();
            c.expect(&format!("|x{} - 1|/eps", i + 1), off / last.eps, off <= last.eps && report.final_ratio[i] < 0.1, "< 0.1");
        }
        c.expect(
            "ratios decreasing over last 3",
            f64::from(u8::from(report.decreasing)),
            report.decreasing,
            "= 1",
        );
        Ok(c)
    })
}

pub fn multiplier_scaling(sweep: &SweepOutcome) -> CriterionOutcome {
    outcome(12, "multiplier scaling", || {
        let mut c = Check::new();
        let last = sweep.records.last().ok_or(Error::SweepFailed)?;
        for i in 0..2 {
            let scaled = last.eps * last.mu[i];
            c.expect(
                &format!("eps*mu{}", i + 1),
                scaled,
                rel(scaled, -sweep.lambda) <= 0.1,
                &format!("{:.6} +- 10%", -sweep.lambda),
            );
        }
        Ok(c)
    })
}

pub fn uniqueness(a_star: f64, starts: usize, seed: u64, small_ball_fraction: f64) -> CriterionOutcome {
    outcome(13, "uniqueness probe", || {
        let mut c = Check::new();
        let (v1, v2) = (sqrt_potential(), two_zero_potential());
        let grid = SpectralGrid::new(16.0, 1024)?;
        let s = small_ball_fraction * a_star;
        let params = CoupledParams::new(s, s, s)?;
        let report = uniqueness_probe(&params, &v1, &v2, &grid, starts, seed, &tight_solver(), a_star)?;
        c.expect(
            "max pairwise distance",
            report.max_distance,
            report.max_distance < 1e-6 && report.failed == 0,
            "< 1e-6",
        );
        c.note("converged starts", report.converged as f64);
        Ok(c)
    })
}

pub fn symmetry_breaking(reference: &GroundStateReference, starts: usize, seed: u64) -> CriterionOutcome {
    outcome(14, "symmetry-breaking probe", || {
        let mut c = Check::new();
        let v = symmetric_potential();
        let a_star = reference.a_star();
        // far from critical: d_i = a*/10
        let beta = a_star / 20.0;
        let eps_far = (0.9 * a_star).powf(1.0 / 1.5);
        let far = SweepConfig::new(beta, vec![eps_far], v.clone(), v.clone());
        let report = symmetry_breaking_probe(&far, reference, &[InitialGuess::Bump { center: Some(0.0) }])?;
        c.expect("asymmetry far from critical", report.max, report.max < 0.1, "< 0.1");
        let ladder = LadderSpec::default().build(a_star, 0.5)?;
        let near = SweepConfig::new(0.5 * a_star, ladder, v.clone(), v);
        let guesses: Vec<InitialGuess> = (0..starts as u64)
            .map(|k| InitialGuess::Random {
                seed: seed.wrapping_add(k),
                mirrored: false,
            })
            .collect();
        let report = symmetry_breaking_probe(&near, reference, &guesses)?;
        c.expect("min asymmetry at tightest eps", report.min, report.min > 0.8, "> 0.8");
        c.note("starts at +1", report.sites.iter().filter(|x| **x > 0.0).count() as f64);
        c.note("starts at -1", report.sites.iter().filter(|x| **x < 0.0).count() as f64);
        Ok(c)
    })
}

pub fn oracle_equivalence(seed: u64) -> CriterionOutcome {
    outcome(15, "oracle equivalence", || {
        let mut c = Check::new();
        let grid = SpectralGrid::new(16.0, 256)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let u = random_test_field(&grid, &mut rng)?;
            for power in [MultiplierPower::Half, MultiplierPower::One] {
                let a = fractional_apply(&u, power)?;
                let b = dense_apply(&u, power)?;
                let scale = a.max_abs().max(1.0);
                let err = a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                worst = worst.max(err / scale);
            }
        }
        c.expect("operator mismatch", worst, worst <= 1e-8, "<= 1e-8");
        let v = sqrt_potential();
        let (dense, _) = dense_first_eigenpair(&grid, &v.sample(&grid))?;
        let spectral = first_eigenpair(&v, &grid, 1e-12)?.value;
        let d = (dense - spectral).abs();
        c.expect("eigenvalue mismatch", d, d <= 1e-8, "<= 1e-8");
        let grid = SpectralGrid::new(16.0, 128)?;
        let init = mass_normalize(&Field::from_fn(&grid, |x| (-x * x).exp())?)?;
        let mut worst: f64 = 0.0;
        for d in [0.0, 1.0, 2.0] {
            let spectral = minimize_single(d, &v, &init, &tight_solver())?;
            let descent = descent_minimize_single(&grid, &v.sample(&grid), d, &init, 1e-7, 200_000)?;
            worst = worst.max((spectral.energy - descent.energy).abs());
        }
        c.expect("single energy mismatch", worst, worst <= 1e-6, "<= 1e-6");
        Ok(c)
    })
}

/// Everything `verify` needs that is expensive to build.
pub struct Fixtures {
    pub reference: GroundStateReference,
    pub sqrt_sweep: Result<SweepOutcome>,
    pub two_zero_sweep: Result<SweepOutcome>,
}

impl Fixtures {
    pub fn build(config: &RunConfig) -> Result<Self> {
        let reference = reference_for(config)?;
        let sqrt_sweep = standard_sweep(sqrt_potential(), &reference);
        let two_zero_sweep = standard_sweep(two_zero_potential(), &reference);
        Ok(Self {
            reference,
            sqrt_sweep,
            two_zero_sweep,
        })
    }
}

fn with_sweep(id: u8, title: &str, sweep: &Result<SweepOutcome>, f: impl FnOnce(&SweepOutcome) -> CriterionOutcome) -> CriterionOutcome {
    match sweep {
        Ok(s) => f(s),
        Err(e) => outcome(id, title, || Err(Error::Verification(format!("sweep unavailable: {e}")))),
    }
}

/// Runs all fifteen checks in order.
pub fn run_all(config: &RunConfig, fixtures: &Fixtures) -> Vec<CriterionOutcome> {
    let r = &fixtures.reference;
    let a_star = r.a_star();
    let vc = &config.verify;
    let window = config.sweep.fit_window;
    let mut out = vec![
        pohozaev(r),
        gagliardo_nirenberg(r, vc.random_fields, vc.seed),
        two_oracle_a_star(r, config),
        tail_decay(r),
        eigen_limit(),
        decoupling(a_star),
    ];
    let sweeps: Vec<&SweepOutcome> = [&fixtures.sqrt_sweep, &fixtures.two_zero_sweep]
        .into_iter()
        .filter_map(|s| s.as_ref().ok())
        .collect();
    out.push(if sweeps.len() == 2 {
        sandwich(&sweeps)
    } else {
        outcome(7, "energy sandwich", || Err(Error::SweepFailed))
    });
    out.push(with_sweep(8, "energy-scaling exponent", &fixtures.sqrt_sweep, |s| energy_scaling(s, window)));
    out.push(with_sweep(9, "L4-scaling exponent", &fixtures.sqrt_sweep, |s| l4_scaling(s, window)));
    out.push(with_sweep(10, "profile convergence", &fixtures.sqrt_sweep, profile_convergence));
    out.push(with_sweep(11, "flattest-site selection", &fixtures.two_zero_sweep, flattest_site));
    out.push(with_sweep(12, "multiplier scaling", &fixtures.sqrt_sweep, multiplier_scaling));
    out.push(uniqueness(a_star, vc.uniqueness_starts, vc.seed, vc.small_ball_fraction));
    out.push(symmetry_breaking(r, vc.symmetry_starts, vc.seed));
    out.push(oracle_equivalence(vc.seed));
    out
}
