//! Near-critical sweeps and the experiments built on them: scaling fits,
//! concentration of the maximum points, convergence of the rescaled
//! profiles, and the uniqueness and symmetry-breaking probes.
//!
//! Along a sweep both intraspecies strengths equal `a* - β - ε^{p₀+1}`, so
//! that `a* - (d₁ + d₂)/2 = ε^{p₀+1}`.

use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::{linear_fit, GroundStateReference};
use crate::minimizer::{
    energy_breakdown, minimize, minimize_single, trial_energy, CoupledParams, CoupledState,
    SolverOptions,
};
use crate::potentials::{flatness_analysis, predicted_lambda, FlatnessReport, PotentialSpec};
use crate::spectral::{integrate_power, mass_normalize, spectral_rescale, Field, SpectralGrid};

/// Minimum number of grid spacings across the `ε`-wide core.
pub const DEFAULT_RESOLUTION_NODES: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridPolicy {
    /// One grid for the whole ladder.
    Fixed { length: f64, n_points: usize },
    /// Fixed window; the point count is the smallest power of two giving
    /// `nodes_per_eps` spacings across `ε`, and at least `min_points`.
    Adaptive {
        length: f64,
        nodes_per_eps: f64,
        min_points: usize,
    },
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Adaptive {
            length: 8.0,
            nodes_per_eps: 64.0,
            min_points: 1024,
        }
    }
}

impl GridPolicy {
    pub fn length(&self) -> f64 {
        match *self {
            GridPolicy::Fixed { length, .. } | GridPolicy::Adaptive { length, .. } => length,
        }
    }

    pub fn n_points_for(&self, eps: f64) -> usize {
        match *self {
            GridPolicy::Fixed { n_points, .. } => n_points,
            GridPolicy::Adaptive {
                length,
                nodes_per_eps,
                min_points,
            } => ((nodes_per_eps * length / eps).ceil() as usize).next_power_of_two().max(min_points),
        }
    }

    pub fn grid_for(&self, eps: f64) -> Result<Arc<SpectralGrid>> {
        SpectralGrid::new(self.length(), self.n_points_for(eps))
    }

    /// Refuses a ladder with any point having fewer than `nodes` spacings
    /// across `ε`; the error names the worst point.
    pub fn check_resolution(&self, ladder: &[f64], nodes: f64) -> Result<()> {
        let worst = ladder
            .iter()
            .map(|&eps| (eps, self.length() / self.n_points_for(eps) as f64))
            .min_by(|a, b| (a.0 / a.1).total_cmp(&(b.0 / b.1)));
        match worst {
            Some((eps, spacing)) if eps < nodes * spacing => Err(Error::Resolution {
                eps,
                spacing,
                nodes,
                suggested_n_points: ((nodes * self.length() / eps).ceil() as usize).next_power_of_two(),
            }),
            _ => Ok(()),
        }
    }
}

/// Geometric ladder in `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSpec {
    pub points: usize,
    pub ratio: f64,
    /// `a* - (d₁+d₂)/2` at the first point, as a fraction of `a*`.
    pub start_gap_fraction: f64,
}

impl Default for LadderSpec {
    fn default() -> Self {
        Self {
            points: 8,
            ratio: 0.5,
            start_gap_fraction: 0.2,
        }
    }
}

impl LadderSpec {
    pub fn build(&self, a_star: f64, p0: f64) -> Result<Vec<f64>> {
        if self.points == 0 || !(self.ratio > 0.0 && self.ratio < 1.0) || !(self.start_gap_fraction > 0.0) {
            return Err(Error::InvalidInput(format!("invalid ladder {self:?}")));
        }
        let first = (self.start_gap_fraction * a_star).powf(1.0 / (p0 + 1.0));
        Ok((0..self.points).map(|k| first * self.ratio.powi(k as i32)).collect())
    }
}

/// Starting state for the first ladder point (and after a failed point).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialGuess {
    /// Unit-mass Gaussian of width `ε/λ`; the centre defaults to the first
    /// member of the flattest set.
    Bump { center: Option<f64> },
    /// Random positive sums of Gaussian bumps, reproducible from the seed;
    /// `mirrored` reflects the draw through the origin.
    Random {
        seed: u64,
        #[serde(default)]
        mirrored: bool,
    },
}

impl Default for InitialGuess {
    fn default() -> Self {
        InitialGuess::Bump { center: None }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub beta: f64,
    /// Decreasing values of `ε`.
    pub ladder: Vec<f64>,
    pub v1: PotentialSpec,
    pub v2: PotentialSpec,
    pub grid: GridPolicy,
    pub resolution_nodes: f64,
    pub warm_start: bool,
    pub initial: InitialGuess,
    pub solver: SolverOptions,
    /// Single-component energies, trial upper bound and profile distances.
    pub diagnostics: bool,
    /// Re-solve the last point from a cold start to measure the warm-start gain.
    pub compare_cold_start: bool,
    pub profile_length: f64,
    pub profile_points: usize,
}

impl SweepConfig {
    pub fn new(beta: f64, ladder: Vec<f64>, v1: PotentialSpec, v2: PotentialSpec) -> Self {
        Self {
            beta,
            ladder,
            v1,
            v2,
            grid: GridPolicy::default(),
            resolution_nodes: DEFAULT_RESOLUTION_NODES,
            warm_start: true,
            initial: InitialGuess::default(),
            solver: SolverOptions::default(),
            diagnostics: true,
            compare_cold_start: false,
            profile_length: 32.0,
            profile_points: 2048,
        }
    }

    pub fn params_at(&self, eps: f64, a_star: f64, p0: f64) -> Result<CoupledParams> {
        let a = a_star - self.beta - eps.powf(p0 + 1.0);
        CoupledParams::new(a, a, self.beta)
    }

    fn validate(&self, a_star: f64, p0: f64) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::InvalidInput("empty ladder".into()));
        }
        if !(self.beta > 0.0 && self.beta < a_star) {
            return Err(Error::InvalidInput(format!("beta must lie in (0, a*), got {}", self.beta)));
        }
        if self.ladder.iter().any(|e| !(e.is_finite() && *e > 0.0)) || self.ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("ladder must be positive and strictly decreasing".into()));
        }
        for &eps in &self.ladder {
            if !self.params_at(eps, a_star, p0)?.in_existence_regime(a_star) {
                return Err(Error::InvalidInput(format!(
                    "ladder point eps = {eps} leaves the existence regime (a_i = {})",
                    a_star - self.beta - eps.powf(p0 + 1.0)
                )));
            }
        }
        self.grid.check_resolution(&self.ladder, self.resolution_nodes)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistance {
    pub l2: f64,
    /// `(∫|(-Δ)^{1/4}(w - P)|² + ∫(w - P)²)^{1/2}`.
    pub h_half: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    /// `a* - (d₁+d₂)/2`.
    pub gap: f64,
    pub a: f64,
    pub length: f64,
    pub n_points: usize,
    pub energy: f64,
    pub l4: [f64; 2],
    pub mu: [f64; 2],
    pub max_points: [f64; 2],
    pub max_offset_ratio: [f64; 2],
    pub profile_distance: [ProfileDistance; 2],
    pub trial_upper: f64,
    /// `e₁(d₁)` and `e₂(d₂)`.
    pub single_energies: [f64; 2],
    /// `(β/2)∫(u₁² - u₂²)²` at the minimizer.
    pub coupling: f64,
    pub residual: f64,
    pub iterations: usize,
    pub warm_started: bool,
    pub asymmetry: [f64; 2],
}

impl SweepRecord {
    /// `max(0, e₁ + e₂ + coupling - e, e - trial)`.
    pub fn sandwich_violation(&self) -> f64 {
        let lower = self.single_energies[0] + self.single_energies[1] + self.coupling - self.energy;
        let upper = self.energy - self.trial_upper;
        lower.max(upper).max(0.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepFailure {
    pub eps: f64,
    pub message: String,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ColdStartComparison {
    pub eps: f64,
    pub warm_iterations: usize,
    pub cold_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
    pub flatness: FlatnessReport,
    pub a_star: f64,
    pub lambda: f64,
    /// Member of the flattest set nearest the final maximum point.
    pub site: f64,
    pub cold_start: Option<ColdStartComparison>,
    pub final_state: Option<CoupledState>,
}

impl SweepOutcome {
    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gap).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    pub fn l4(&self, component: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.l4[component]).collect()
    }
}

/// `|∫_{x>0} u² - ∫_{x<0} u²|`; the node at the origin is split evenly.
pub fn asymmetry(u: &Field) -> f64 {
    let g = u.grid();
    let mut diff = 0.0;
    for (&x, &v) in g.nodes().iter().zip(u.values()) {
        if x > 0.0 {
            diff += v * v;
        } else if x < 0.0 {
            diff -= v * v;
        }
    }
    (g.spacing() * diff).abs()
}

/// Random non-negative unit-mass field: one to three Gaussian bumps with
/// centres in the middle half of the window.
pub fn random_bumps(grid: &Arc<SpectralGrid>, rng: &mut ChaCha8Rng, mirrored: bool) -> Result<Field> {
    let l = grid.length();
    let count = rng.gen_range(1..=3);
    let bumps: Vec<(f64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.gen_range(-0.25 * l..0.25 * l),
                rng.gen_range(0.05 * l..0.2 * l),
                rng.gen_range(0.2..1.0),
            )
        })
        .collect();
    let sign = if mirrored { -1.0 } else { 1.0 };
    let raw = Field::from_fn(grid, |x| {
        let x = sign * x;
        bumps
            .iter()
            .map(|&(c, w, a)| a * (-((x - c) / w).powi(2)).exp())
            .sum::<f64>()
    })?;
    mass_normalize(&raw)
}

pub fn random_state(grid: &Arc<SpectralGrid>, seed: u64, mirrored: bool) -> Result<CoupledState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u1 = random_bumps(grid, &mut rng, mirrored)?;
    let u2 = random_bumps(grid, &mut rng, mirrored)?;
    CoupledState::new(u1, u2)
}

/// `w(x) = ε^{1/2} u(εx + x_max)` against `P(x) = λ^{1/2} Q(λx)/‖Q‖₂` on `profile_grid`.
pub fn profile_distance(
    u: &Field,
    eps: f64,
    max_point: f64,
    q: &Field,
    lambda: f64,
    profile_grid: &Arc<SpectralGrid>,
) -> Result<ProfileDistance> {
    let w = spectral_rescale(u, eps, max_point, profile_grid)?.field;
    let predicted = predicted_profile(q, lambda, profile_grid)?;
    let diff: Vec<f64> = w.values().iter().zip(predicted.values()).map(|(a, b)| a - b).collect();
    let l2sq = profile_grid.integrate_power(&diff, 2);
    Ok(ProfileDistance {
        l2: l2sq.sqrt(),
        h_half: (l2sq + profile_grid.seminorm(&diff)).sqrt(),
    })
}

/// `λ^{1/2} Q(λx)/‖Q‖₂` sampled on `grid`.
pub fn predicted_profile(q: &Field, lambda: f64, grid: &Arc<SpectralGrid>) -> Result<Field> {
    let norm = integrate_power(q, 2).sqrt();
    spectral_rescale(q, lambda, 0.0, grid)?.field.map(|v| v / norm)
}

struct SweepContext<'a> {
    config: &'a SweepConfig,
    reference: &'a GroundStateReference,
    flatness: FlatnessReport,
    lambda: f64,
    a_star: f64,
    profile_grid: Arc<SpectralGrid>,
}

impl SweepContext<'_> {
    fn initial_state(&self, grid: &Arc<SpectralGrid>, eps: f64) -> Result<CoupledState> {
        match self.config.initial {
            InitialGuess::Bump { center } => {
                let c = center.unwrap_or(self.flatness.flattest[0]);
                CoupledState::gaussian(grid, c, eps / self.lambda)
            }
            InitialGuess::Random { seed, mirrored } => random_state(grid, seed, mirrored),
        }
    }

    fn warm_state(&self, prev: &CoupledState, prev_eps: f64, centers: [f64; 2], grid: &Arc<SpectralGrid>, eps: f64) -> Result<CoupledState> {
        let s = eps / prev_eps;
        let mut out = Vec::with_capacity(2);
        for (u, c) in [&prev.u1, &prev.u2].into_iter().zip(centers) {
            // w(x) = s^{-1/2} u((x - c)/s + c)
            let w = spectral_rescale(u, 1.0 / s, c - c / s, grid)?.field;
            out.push(mass_normalize(&w.map(|v| v.max(0.0))?)?);
        }
        let u2 = out.pop().expect("two components");
        let u1 = out.pop().expect("two components");
        CoupledState::new(u1, u2)
    }

    fn solve_point(&self, eps: f64, init: &CoupledState, warm_started: bool) -> Result<(SweepRecord, CoupledState)> {
        let cfg = self.config;
        let p0 = self.flatness.p0;
        let params = cfg.params_at(eps, self.a_star, p0)?;
        let grid = init.grid().clone();
        let r = minimize(&params, &cfg.v1, &cfg.v2, init, &cfg.solver, self.a_star)?;
        let breakdown = energy_breakdown(&r.state, &params, &cfg.v1, &cfg.v2)?;
        let max_points = [r.max_points[0].refined, r.max_points[1].refined];
        let mut record = SweepRecord {
            eps,
            gap: params.mean_gap(self.a_star),
            a: params.a1,
            length: grid.length(),
            n_points: grid.n_points(),
            energy: r.energy,
            l4: r.l4_norms,
            mu: r.mu,
            max_points,
            max_offset_ratio: [f64::NAN; 2],
            profile_distance: [ProfileDistance::default(); 2],
            trial_upper: f64::NAN,
            single_energies: [f64::NAN; 2],
            coupling: 0.5 * params.beta * breakdown.spread,
            residual: r.residual,
            iterations: r.iterations,
            warm_started,
            asymmetry: [asymmetry(&r.state.u1), asymmetry(&r.state.u2)],
        };
        if cfg.diagnostics {
            let q = self.reference.q();
            for (i, u) in [&r.state.u1, &r.state.u2].into_iter().enumerate() {
                record.profile_distance[i] = profile_distance(u, eps, max_points[i], q, self.lambda, &self.profile_grid)?;
            }
            record.single_energies = self.single_energies(&params, &r.state)?;
            let site = self.flatness.nearest_flattest(max_points[0]);
            let tau = 1.0 / record.gap.powf(1.0 / (p0 + 1.0));
            let half = 0.5 * grid.length();
            let q_half = 0.5 * q.grid().length();
            let radius = ((half - site.abs()) / 2.5).min(0.45 * q_half / tau);
            record.trial_upper = trial_energy(site, tau, radius, &params, &cfg.v1, &cfg.v2, &grid, q)?;
        }
        Ok((record, r.state))
    }

    fn single_energies(&self, params: &CoupledParams, state: &CoupledState) -> Result<[f64; 2]> {
        let cfg = self.config;
        let g = state.grid();
        let e1 = minimize_single(params.d1(), &cfg.v1, &state.u1, &cfg.solver)?.energy;
        let same = params.d1() == params.d2() && cfg.v1.sample(g) == cfg.v2.sample(g);
        let e2 = if same {
            e1
        } else {
            minimize_single(params.d2(), &cfg.v2, &state.u2, &cfg.solver)?.energy
        };
        Ok([e1, e2])
    }
}

/// Runs the ladder in order, warm-starting each point from the previous
/// minimizer rescaled about its maximum by the ratio of consecutive `ε`.
/// Points that fail are recorded and the next point starts cold.
pub fn run_sweep(config: &SweepConfig, reference: &GroundStateReference) -> Result<SweepOutcome> {
    let flatness = flatness_analysis(&config.v1, &config.v2)?;
    let a_star = reference.a_star();
    config.validate(a_star, flatness.p0)?;
    if !(config.v1.theorem_regime() && config.v2.theorem_regime()) {
        log::warn!("sweep potentials have exponents >= 1, outside the hypotheses of the concentration theorem");
    }
    let lambda = predicted_lambda(&flatness, reference.moment(flatness.p0)?)?;
    let ctx = SweepContext {
        config,
        reference,
        lambda,
        a_star,
        profile_grid: SpectralGrid::new(config.profile_length, config.profile_points)?,
        flatness,
    };
    let mut records: Vec<SweepRecord> = Vec::new();
    let mut failures = Vec::new();
    let mut prev: Option<(CoupledState, f64, [f64; 2])> = None;
    let mut final_state = None;
    for &eps in &config.ladder {
        let grid = config.grid.grid_for(eps)?;
        let (init, warm) = match (&prev, config.warm_start) {
            (Some((state, pe, centers)), true) => (ctx.warm_state(state, *pe, *centers, &grid, eps)?, true),
            _ => (ctx.initial_state(&grid, eps)?, false),
        };
        match ctx.solve_point(eps, &init, warm) {
            Ok((record, state)) => {
                log::info!(
                    "sweep eps={eps:.4e} N={} energy={:.10e} iterations={} residual={:.2e}",
                    record.n_points,
                    record.energy,
                    record.iterations,
                    record.residual
                );
                prev = Some((state.clone(), eps, record.max_points));
                final_state = Some(state);
                records.push(record);
            }
            Err(e @ (Error::NonConvergence { .. } | Error::Stagnation { .. } | Error::DegenerateIteration(_))) => {
                log::warn!("sweep point eps={eps:.4e} failed: {e}");
                failures.push(SweepFailure {
                    eps,
                    message: e.to_string(),
                });
                prev = None;
            }
            Err(e) => return Err(e),
        }
    }
    if records.is_empty() {
        return Err(Error::SweepFailed);
    }
    let last = records.last().expect("non-empty");
    let site = ctx.flatness.nearest_flattest(last.max_points[0]);
    for r in &mut records {
        r.max_offset_ratio = [
            (r.max_points[0] - site).abs() / r.eps,
            (r.max_points[1] - site).abs() / r.eps,
        ];
    }
    let cold_start = if config.compare_cold_start {
        let last = records.last().expect("non-empty");
        if last.warm_started {
            let grid = config.grid.grid_for(last.eps)?;
            let init = ctx.initial_state(&grid, last.eps)?;
            let params = config.params_at(last.eps, a_star, ctx.flatness.p0)?;
            let cold = minimize(&params, &config.v1, &config.v2, &init, &config.solver, a_star)?;
            Some(ColdStartComparison {
                eps: last.eps,
                warm_iterations: last.iterations,
                cold_iterations: cold.iterations,
            })
        } else {
            None
        }
    } else {
        None
    };
    Ok(SweepOutcome {
        records,
        failures,
        flatness: ctx.flatness,
        a_star,
        lambda,
        site,
        cold_start,
        final_state,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: Range<usize>,
}

/// Least squares of `log y` against `log x` over `window`.
pub fn fit_power_law(xs: &[f64], ys: &[f64], window: Range<usize>) -> Result<FitReport> {
    if xs.len() != ys.len() || window.end > xs.len() || window.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "power-law fit needs at least 3 points in window {window:?} of {} samples",
            xs.len().min(ys.len())
        )));
    }
    let mut pts = Vec::with_capacity(window.len());
    for j in window.clone() {
        let (x, y) = (xs[j], ys[j]);
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::InvalidInput(format!("non-positive sample ({x}, {y}) at index {j}")));
        }
        pts.push((x.ln(), y.ln()));
    }
    let (slope, intercept, r_squared) =
        linear_fit(&pts).ok_or_else(|| Error::InvalidInput("degenerate abscissae in power-law fit".into()))?;
    Ok(FitReport {
        slope,
        intercept,
        r_squared,
        window,
    })
}

/// The last `n` indices of a series of length `len`.
pub fn tail_window(len: usize, n: usize) -> Range<usize> {
    len.saturating_sub(n)..len
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub site: f64,
    pub ratios: Vec<[f64; 2]>,
    pub final_ratio: [f64; 2],
    /// Final ratio below 0.1 for both components.
    pub final_below: bool,
    /// Ratios strictly decreasing over the last three points, both components.
    pub decreasing: bool,
    /// Final maximum points within `ε` of each other.
    pub components_within_eps: bool,
    /// Final maximum points within `ε` of the site.
    pub within_eps_of_site: bool,
}

pub const CONCENTRATION_RATIO_BOUND: f64 = 0.1;

pub fn concentration_report(records: &[SweepRecord], flatness: &FlatnessReport) -> Result<ConcentrationReport> {
    if records.len() < 3 {
        return Err(Error::InvalidInput("concentration report needs at least 3 records".into()));
    }
    let last = records.last().expect("non-empty");
    let site = flatness.nearest_flattest(last.max_points[0]);
    let ratios: Vec<[f64; 2]> = records
        .iter()
        .map(|r| [(r.max_points[0] - site).abs() / r.eps, (r.max_points[1] - site).abs() / r.eps])
        .collect();
    let final_ratio = *ratios.last().expect("non-empty");
    let tail = &ratios[ratios.len() - 3..];
    let decreasing = (0..2).all(|i| tail.windows(2).all(|w| w[1][i] < w[0][i]));
    Ok(ConcentrationReport {
        site,
        final_below: final_ratio.iter().all(|r| *r < CONCENTRATION_RATIO_BOUND),
        decreasing,
        components_within_eps: (last.max_points[0] - last.max_points[1]).abs() <= last.eps,
        within_eps_of_site: last.max_points.iter().all(|x| (x - site).abs() <= last.eps),
        ratios,
        final_ratio,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub max_distance: f64,
    pub converged: usize,
    pub failed: usize,
    pub energies: Vec<f64>,
    pub small_ball_radius: f64,
    pub in_small_ball: bool,
}

/// Default radius of the small ball: each of `a₁, a₂, β` at most `a*/20`.
pub fn default_small_ball(a_star: f64) -> f64 {
    a_star / 20.0
}

/// Minimizes from `n_starts` random positive states and reports the largest
/// component-wise L² distance between converged minimizers.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_probe(
    params: &CoupledParams,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    grid: &Arc<SpectralGrid>,
    n_starts: usize,
    seed: u64,
    opts: &SolverOptions,
    a_star: f64,
) -> Result<UniquenessReport> {
    let radius = default_small_ball(a_star);
    let in_small_ball = [params.a1, params.a2, params.beta].iter().all(|v| v.abs() <= radius);
    if !in_small_ball {
        log::warn!("uniqueness probe outside the small ball |a_i|, |beta| <= {radius:.4}");
    }
    let mut states = Vec::new();
    let mut energies = Vec::new();
    let mut failed = 0;
    for k in 0..n_starts {
        let init = random_state(grid, seed.wrapping_add(k as u64), false)?;
        match minimize(params, v1, v2, &init, opts, a_star) {
            Ok(r) => {
                energies.push(r.energy);
                states.push(r.state);
            }
            Err(e) => {
                log::warn!("uniqueness probe start {k} failed: {e}");
                failed += 1;
            }
        }
    }
    if states.is_empty() {
        return Err(Error::SweepFailed);
    }
    let mut max_distance: f64 = 0.0;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let d = states[i].u1.l2_distance(&states[j].u1).max(states[i].u2.l2_distance(&states[j].u2));
            max_distance = max_distance.max(d);
        }
    }
    Ok(UniquenessReport {
        max_distance,
        converged: states.len(),
        failed,
        energies,
        small_ball_radius: radius,
        in_small_ball,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub eps: f64,
    /// Asymmetry of the first component at the final point, per start.
    pub asymmetries: Vec<f64>,
    /// Side of the final maximum point, per start.
    pub sites: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

/// Asymmetry of near-critical minimizers for a potential with two mirror
/// zeros. Each start runs the warm-started `ladder` (ending at the probed
/// `ε`) from its own initial guess.
pub fn symmetry_breaking_probe(
    config: &SweepConfig,
    reference: &GroundStateReference,
    starts: &[InitialGuess],
) -> Result<SymmetryReport> {
    let probe = SweepConfig {
        diagnostics: false,
        compare_cold_start: false,
        ..config.clone()
    };
    let mut asymmetries = Vec::new();
    let mut sites = Vec::new();
    for &initial in starts {
        let run = run_sweep(
            &SweepConfig {
                initial,
                ..probe.clone()
            },
            reference,
        )?;
        let last = run.records.last().expect("non-empty");
        asymmetries.push(last.asymmetry[0]);
        sites.push(last.max_points[0]);
    }
    let min = asymmetries.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = asymmetries.iter().cloned().fold(0.0, f64::max);
    Ok(SymmetryReport {
        eps: *config.ladder.last().ok_or_else(|| Error::InvalidInput("empty ladder".into()))?,
        asymmetries,
        sites,
        min,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::minimizer::gaussian_bump;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn fit_exact_power() {
        let xs: Vec<f64> = (1..=6).map(|k| 2f64.powi(-k)).collect();
        let f = fit_power_law(&xs, &xs, 0..6).unwrap();
        assert_relative_eq!(f.slope, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit_power_law(&xs, &xs, 0..2).is_err());
        let mut bad = xs.clone();
        bad[3] = -1.0;
        assert!(fit_power_law(&xs, &bad, 0..6).is_err());
    }

    proptest! {
        #[test]
        fn fit_noisy_cube_root(seed in 0u64..1000, c in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k)).collect();
            let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(1.0 / 3.0) * (1.0 + rng.gen_range(-0.01..0.01))).collect();
            let f = fit_power_law(&xs, &ys, 0..8).unwrap();
            prop_assert!((f.slope - 1.0 / 3.0).abs() < 0.02);
            prop_assert!((0.0..=1.0).contains(&f.r_squared));
        }
    }

    #[test]
    fn ladder_and_guard() {
        let ladder = LadderSpec::default().build(2.0, 0.5).unwrap();
        assert_eq!(ladder.len(), 8);
        assert_relative_eq!(ladder[0].powf(1.5), 0.4, max_relative = 1e-12);
        assert_relative_eq!(ladder[7] / ladder[6], 0.5);
        let fixed = GridPolicy::Fixed {
            length: 8.0,
            n_points: 1024,
        };
        match fixed.check_resolution(&ladder, 40.0) {
            Err(Error::Resolution { suggested_n_points, .. }) => {
                assert!(suggested_n_points.is_power_of_two());
                assert!(8.0 / suggested_n_points as f64 * 40.0 <= ladder[7]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(GridPolicy::default().check_resolution(&ladder, 40.0).is_ok());
    }

    #[test]
    fn asymmetry_examples() {
        let g = SpectralGrid::new(8.0, 256).unwrap();
        let even = gaussian_bump(&g, 0.0, 0.5).unwrap();
        assert!(asymmetry(&even) < 1e-12);
        let right = gaussian_bump(&g, 1.0, 0.2).unwrap();
        assert!(asymmetry(&right) > 0.999);
        let left = gaussian_bump(&g, -1.0, 0.2).unwrap();
        assert_relative_eq!(asymmetry(&left), asymmetry(&right), max_relative = 1e-12);
    }

    #[test]
    fn random_fields_reproducible() {
        let g = SpectralGrid::new(8.0, 256).unwrap();
        let a = random_state(&g, 7, false).unwrap();
        let b = random_state(&g, 7, false).unwrap();
        assert_eq!(a.u1.values(), b.u1.values());
        let c = random_state(&g, 8, false).unwrap();
        assert_ne!(a.u1.values(), c.u1.values());
    }

    #[test]
    fn profile_round_trip() {
        let qg = SpectralGrid::new(128.0, 4096).unwrap();
        let q = crate::ground_state::solve_q_petviashvili(&qg, 1e-11, 500).unwrap().q;
        let lambda = 0.8;
        let eps = 0.05;
        let x0 = 0.3;
        let sweep_grid = SpectralGrid::new(8.0, 8192).unwrap();
        let pg = SpectralGrid::new(32.0, 1024).unwrap();
        // u(x) = ε^{-1/2} P((x - x0)/ε)
        let p_fine = predicted_profile(&q, lambda, &SpectralGrid::new(160.0, 16384).unwrap()).unwrap();
        let u = spectral_rescale(&p_fine, 1.0 / eps, -x0 / eps, &sweep_grid).unwrap().field;
        let d = profile_distance(&u, eps, x0, &q, lambda, &pg).unwrap();
        assert!(d.l2 < 1e-6, "{d:?}");
        assert!(d.h_half < 1e-5, "{d:?}");
    }
}
