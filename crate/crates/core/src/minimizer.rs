//! Mass-constrained minimization of the coupled energy
//!
//! ```text
//! E(u₁, u₂) = Σᵢ [ ∫|(-Δ)^{1/4}uᵢ|² + ∫Vᵢuᵢ² - (dᵢ/2)∫uᵢ⁴ ] + (β/2)∫(u₁² - u₂²)²,
//! ```
//!
//! with `dᵢ = aᵢ + β`, over pairs of unit-mass functions, together with the
//! single-component problems, the first eigenpairs of `√(-Δ) + V` and the
//! cut-off trial state that bounds the minimum from above.
//!
//! Two descent engines share the same stopping rule. The semi-implicit
//! normalized gradient flow treats `√(-Δ) + shift` implicitly through its
//! diagonal Fourier resolvent. The default engine is a preconditioned
//! nonlinear conjugate gradient on the product of spheres, with the exact
//! minimizer of the energy along each search curve; it is much faster close
//! to the critical mass, where the energy landscape is very flat along the
//! dilation of the concentrating profile.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;
use crate::spectral::{refined_maximum, spectral_rescale, Field, SpectralGrid};

/// Tolerance on `∫uᵢ² = 1` accepted by [`energy`] and friends.
pub const MASS_TOLERANCE: f64 = 1e-8;
/// Nodes within this factor of the maximum are recorded as ties.
pub const TIE_FACTOR: f64 = 1.0 - 1e-9;

const REFRESH_INTERVAL: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledParams {
    pub a1: f64,
    pub a2: f64,
    pub beta: f64,
}

impl CoupledParams {
    pub fn new(a1: f64, a2: f64, beta: f64) -> Result<Self> {
        if !(a1.is_finite() && a2.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "interaction strengths must be finite, got a1={a1}, a2={a2}, beta={beta}"
            )));
        }
        Ok(Self { a1, a2, beta })
    }

    pub fn d1(&self) -> f64 {
        self.a1 + self.beta
    }

    pub fn d2(&self) -> f64 {
        self.a2 + self.beta
    }

    /// `a* - (d₁ + d₂)/2`.
    pub fn mean_gap(&self, a_star: f64) -> f64 {
        a_star - 0.5 * (self.d1() + self.d2())
    }

    /// `0 < a₁, a₂ < a*` and `0 < β < √((a* - a₁)(a* - a₂))`, where a
    /// minimizer is known to exist.
    pub fn in_existence_regime(&self, a_star: f64) -> bool {
        let inside = |a: f64| a > 0.0 && a < a_star;
        inside(self.a1)
            && inside(self.a2)
            && self.beta > 0.0
            && self.beta < ((a_star - self.a1) * (a_star - self.a2)).sqrt()
    }
}

/// A pair of non-negative unit-mass fields on one grid.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub u1: Field,
    pub u2: Field,
}

impl CoupledState {
    pub fn new(u1: Field, u2: Field) -> Result<Self> {
        if u1.grid() != u2.grid() {
            return Err(Error::InvalidInput("components live on different grids".into()));
        }
        for (component, u) in [(1, &u1), (2, &u2)] {
            let mass = crate::spectral::integrate_power(u, 2);
            if (mass - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::Constraint { component, mass });
            }
            if let Some(v) = u.values().iter().find(|v| **v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "component {component} takes the negative value {v}"
                )));
            }
        }
        Ok(Self { u1, u2 })
    }

    /// Both components equal to the same unit-mass Gaussian bump.
    pub fn gaussian(grid: &Arc<SpectralGrid>, center: f64, width: f64) -> Result<Self> {
        let bump = gaussian_bump(grid, center, width)?;
        Self::new(bump.clone(), bump)
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        self.u1.grid()
    }

    fn components(&self) -> [&Field; 2] {
        [&self.u1, &self.u2]
    }
}

/// Unit-mass `exp(-((x - center)/width)²)`.
pub fn gaussian_bump(grid: &Arc<SpectralGrid>, center: f64, width: f64) -> Result<Field> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidInput(format!("bump width must be positive, got {width}")));
    }
    let l = grid.length();
    let raw = Field::from_fn(grid, |x| {
        let r = (x - center + 0.5 * l).rem_euclid(l) - 0.5 * l;
        (-(r / width).powi(2)).exp()
    })?;
    crate::spectral::mass_normalize(&raw)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ConjugateGradient,
    GradientFlow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub scheme: Scheme,
    /// Bound on the relative Euler–Lagrange defect.
    pub tolerance: f64,
    /// Bound on the relative energy change across `energy_window` steps.
    pub energy_tolerance: f64,
    pub energy_window: usize,
    pub max_iter: usize,
    /// Initial pseudo-time step of the gradient flow.
    pub step: f64,
    /// Shift added to the implicit operator (gradient flow) or the
    /// preconditioner (conjugate gradient); `None` picks it from the iterate.
    pub shift: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::ConjugateGradient,
            tolerance: 1e-6,
            energy_tolerance: 1e-10,
            energy_window: 20,
            max_iter: 100_000,
            step: 0.5,
            shift: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.tolerance) || !positive(self.energy_tolerance) || !positive(self.step) {
            return Err(Error::InvalidInput(format!(
                "solver tolerances and step must be positive: {self:?}"
            )));
        }
        if self.energy_window == 0 || self.max_iter == 0 {
            return Err(Error::InvalidInput("energy_window and max_iter must be at least 1".into()));
        }
        if let Some(s) = self.shift {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidInput(format!("shift must be non-negative, got {s}")));
            }
        }
        Ok(())
    }
}

/// Location of the largest value of a component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxPoint {
    /// Leftmost node attaining the maximum.
    pub location: f64,
    /// Vertex of the parabola through the maximizing node and its neighbours.
    pub refined: f64,
    pub value: f64,
    /// Every node within [`TIE_FACTOR`] of the maximum, the reported one included.
    pub ties: Vec<f64>,
}

impl MaxPoint {
    pub fn of(u: &Field) -> Self {
        let g = u.grid();
        let (idx, refined) = refined_maximum(g, u.values());
        let value = u.values()[idx];
        let ties = g
            .nodes()
            .iter()
            .zip(u.values())
            .filter(|(_, &v)| v >= TIE_FACTOR * value)
            .map(|(&x, _)| x)
            .collect();
        Self {
            location: g.nodes()[idx],
            refined,
            value,
            ties,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimizerResult {
    pub state: CoupledState,
    pub energy: f64,
    pub mu: [f64; 2],
    pub l4_norms: [f64; 2],
    pub max_points: [MaxPoint; 2],
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Energies of the accepted iterates, starting with the initial state.
    pub energy_trace: Vec<f64>,
    pub shift: f64,
    pub scheme: Scheme,
    pub in_existence_regime: bool,
}

#[derive(Clone, Debug)]
pub struct SingleResult {
    pub field: Field,
    pub energy: f64,
    pub mu: f64,
    pub l4_norm: f64,
    pub max_point: MaxPoint,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy_trace: Vec<f64>,
    pub shift: f64,
    pub scheme: Scheme,
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Field,
    /// `sup |√(-Δ)Ψ + VΨ - λΨ|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Both algebraic forms of the energy and the integrals they are built from.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub seminorms: [f64; 2],
    pub potential: [f64; 2],
    pub l4_norms: [f64; 2],
    /// `∫u₁²u₂²`.
    pub overlap: f64,
    /// `∫(u₁² - u₂²)²`.
    pub spread: f64,
    /// `Σᵢ[sᵢ + ∫Vᵢuᵢ² - (aᵢ/2)∫uᵢ⁴] - β∫u₁²u₂²`.
    pub original: f64,
    /// `Σᵢ[sᵢ + ∫Vᵢuᵢ² - (dᵢ/2)∫uᵢ⁴] + (β/2)∫(u₁² - u₂²)²`.
    pub rewritten: f64,
}

pub fn energy_breakdown(
    state: &CoupledState,
    params: &CoupledParams,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
) -> Result<EnergyBreakdown> {
    let g = state.grid();
    check_masses(&state.components())?;
    let pots = [v1.sample(g), v2.sample(g)];
    let mut seminorms = [0.0; 2];
    let mut potential = [0.0; 2];
    let mut l4_norms = [0.0; 2];
    for (i, u) in state.components().into_iter().enumerate() {
        let v = u.values();
        seminorms[i] = g.seminorm(v);
        potential[i] = g.spacing() * v.iter().zip(&pots[i]).map(|(a, p)| p * a * a).sum::<f64>();
        l4_norms[i] = g.integrate_power(v, 4);
    }
    let (a, b) = (state.u1.values(), state.u2.values());
    let overlap = g.spacing() * a.iter().zip(b).map(|(x, y)| x * x * y * y).sum::<f64>();
    let spread = g.spacing() * a.iter().zip(b).map(|(x, y)| (x * x - y * y).powi(2)).sum::<f64>();
    let strengths = [params.a1, params.a2];
    let ds = [params.d1(), params.d2()];
    let mut original = -params.beta * overlap;
    let mut rewritten = 0.5 * params.beta * spread;
    for i in 0..2 {
        original += seminorms[i] + potential[i] - 0.5 * strengths[i] * l4_norms[i];
        rewritten += seminorms[i] + potential[i] - 0.5 * ds[i] * l4_norms[i];
    }
    Ok(EnergyBreakdown {
        seminorms,
        potential,
        l4_norms,
        overlap,
        spread,
        original,
        rewritten,
    })
}

/// The coupled energy in its rewritten form.
pub fn energy(state: &CoupledState, params: &CoupledParams, v1: &PotentialSpec, v2: &PotentialSpec) -> Result<f64> {
    Ok(energy_breakdown(state, params, v1, v2)?.rewritten)
}

/// `E_d(u) = ∫|(-Δ)^{1/4}u|² + ∫Vu² - (d/2)∫u⁴`.
pub fn single_energy(u: &Field, d: f64, v: &PotentialSpec) -> Result<f64> {
    check_masses(&[u])?;
    let g = u.grid();
    let problem = Problem::single(g, v.sample(g), d);
    let ku = g.apply_symbol(u.values(), |xi| xi)?;
    Ok(problem.energy(&[u.values().to_vec()], &[ku]))
}

/// `μᵢ = E^i_{dᵢ}(uᵢ) - (dᵢ/2)∫uᵢ⁴ - β∫(-1)^i(u₁² - u₂²)uᵢ²`.
pub fn lagrange_multipliers(
    state: &CoupledState,
    params: &CoupledParams,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
) -> Result<(f64, f64)> {
    let b = energy_breakdown(state, params, v1, v2)?;
    let g = state.grid();
    let (a, c) = (state.u1.values(), state.u2.values());
    let weighted = |w: &[f64]| g.spacing() * a.iter().zip(c).zip(w).map(|((x, y), z)| (x * x - y * y) * z * z).sum::<f64>();
    let ds = [params.d1(), params.d2()];
    let single = |i: usize| b.seminorms[i] + b.potential[i] - 0.5 * ds[i] * b.l4_norms[i];
    let mu1 = single(0) - 0.5 * ds[0] * b.l4_norms[0] + params.beta * weighted(a);
    let mu2 = single(1) - 0.5 * ds[1] * b.l4_norms[1] - params.beta * weighted(c);
    Ok((mu1, mu2))
}

/// Sup-norm of the Euler–Lagrange defect `(√(-Δ) + Vᵢ)uᵢ - dᵢuᵢ³ + β(uᵢ² - uⱼ²)uᵢ - μᵢuᵢ`
/// of each component for the given multipliers.
pub fn euler_lagrange_defect(
    state: &CoupledState,
    params: &CoupledParams,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    mu: (f64, f64),
) -> Result<[f64; 2]> {
    let g = state.grid();
    let problem = Problem::coupled(g, [v1.sample(g), v2.sample(g)], params);
    let us = [state.u1.values().to_vec(), state.u2.values().to_vec()];
    let kus = [
        g.apply_symbol(&us[0], |xi| xi)?,
        g.apply_symbol(&us[1], |xi| xi)?,
    ];
    let grads = problem.gradients(&us, &kus);
    let mus = [mu.0, mu.1];
    let mut out = [0.0; 2];
    for i in 0..2 {
        out[i] = grads[i]
            .iter()
            .zip(&us[i])
            .map(|(gr, u)| (gr - mus[i] * u).abs())
            .fold(0.0, f64::max);
    }
    Ok(out)
}

fn check_masses(us: &[&Field]) -> Result<()> {
    for (i, u) in us.iter().enumerate() {
        let mass = crate::spectral::integrate_power(u, 2);
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Constraint { component: i + 1, mass });
        }
    }
    Ok(())
}

/// Minimizes the coupled energy from `init`.
pub fn minimize(
    params: &CoupledParams,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    init: &CoupledState,
    opts: &SolverOptions,
    a_star: f64,
) -> Result<MinimizerResult> {
    let g = init.grid();
    let problem = Problem::coupled(g, [v1.sample(g), v2.sample(g)], params);
    let start = vec![init.u1.values().to_vec(), init.u2.values().to_vec()];
    let run = problem.solve(start, opts)?;
    let mut fields = run
        .us
        .into_iter()
        .map(|v| Field::new(g.clone(), v))
        .collect::<Result<Vec<_>>>()?;
    let u2 = fields.pop().expect("two components");
    let u1 = fields.pop().expect("two components");
    let state = CoupledState::new(u1, u2)?;
    let max_points = [MaxPoint::of(&state.u1), MaxPoint::of(&state.u2)];
    Ok(MinimizerResult {
        energy: run.energy,
        mu: [run.mu[0], run.mu[1]],
        l4_norms: [g.integrate_power(state.u1.values(), 4), g.integrate_power(state.u2.values(), 4)],
        max_points,
        residual: run.residual,
        iterations: run.iterations,
        converged: true,
        energy_trace: run.trace,
        shift: run.shift,
        scheme: opts.scheme,
        in_existence_regime: params.in_existence_regime(a_star),
        state,
    })
}

/// Minimizes `E_d(u) = ∫|(-Δ)^{1/4}u|² + ∫Vu² - (d/2)∫u⁴` over unit-mass `u`.
pub fn minimize_single(d: f64, v: &PotentialSpec, init: &Field, opts: &SolverOptions) -> Result<SingleResult> {
    let g = init.grid();
    minimize_single_sampled(d, v.sample(g), init, opts)
}

pub fn minimize_single_sampled(d: f64, potential: Vec<f64>, init: &Field, opts: &SolverOptions) -> Result<SingleResult> {
    let g = init.grid();
    if potential.len() != g.n_points() || potential.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPotential("sampled potential must be finite on every node".into()));
    }
    let problem = Problem::single(g, potential, d);
    let mut run = problem.solve(vec![init.values().to_vec()], opts)?;
    let field = Field::new(g.clone(), run.us.pop().expect("one component"))?;
    Ok(SingleResult {
        energy: run.energy,
        mu: run.mu[0],
        l4_norm: g.integrate_power(field.values(), 4),
        max_point: MaxPoint::of(&field),
        residual: run.residual,
        iterations: run.iterations,
        converged: true,
        energy_trace: run.trace,
        shift: run.shift,
        scheme: opts.scheme,
        field,
    })
}

/// Ground state of `√(-Δ) + V`, the minimizer of the quadratic form on the unit sphere.
pub fn first_eigenpair(v: &PotentialSpec, grid: &Arc<SpectralGrid>, tol: f64) -> Result<Eigenpair> {
    first_eigenpair_sampled(grid, v.sample(grid), tol)
}

pub fn first_eigenpair_sampled(grid: &Arc<SpectralGrid>, potential: Vec<f64>, tol: f64) -> Result<Eigenpair> {
    let bottom = potential
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
    let init = gaussian_bump(grid, grid.nodes()[bottom.0], 1.0)?;
    let opts = SolverOptions {
        tolerance: tol,
        ..SolverOptions::default()
    };
    let r = minimize_single_sampled(0.0, potential.clone(), &init, &opts)?;
    let kv = grid.apply_symbol(r.field.values(), |xi| xi)?;
    let residual = kv
        .iter()
        .zip(r.field.values())
        .zip(&potential)
        .map(|((k, u), p)| (k + p * u - r.mu * u).abs())
        .fold(0.0, f64::max);
    if r.field.values().iter().any(|&u| u <= 0.0) {
        return Err(Error::NonConvergence {
            method: "first eigenpair (eigenvector not strictly positive)",
            iterations: r.iterations,
            residual,
        });
    }
    Ok(Eigenpair {
        value: r.mu,
        vector: r.field,
        residual,
        iterations: r.iterations,
    })
}

/// `η`: smooth, equal to one on `|y| ≤ 1`, zero for `|y| ≥ 2`.
pub fn cutoff(y: f64) -> f64 {
    let r = y.abs();
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let bump = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = bump(2.0 - r);
    a / (a + bump(r - 1.0))
}

/// `φ(x) = A (τ^{1/2}/‖Q‖₂) η((x - x₀)/R) Q(τ(x - x₀))` with `A` fixing `∫φ² = 1`.
pub fn trial_function(x0: f64, tau: f64, radius: f64, grid: &Arc<SpectralGrid>, q: &Field) -> Result<Field> {
    if !(tau > 0.0 && tau.is_finite() && radius > 0.0 && radius.is_finite() && x0.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "trial state needs finite x0 and positive tau, radius; got x0={x0}, tau={tau}, R={radius}"
        )));
    }
    let half = 0.5 * grid.length();
    if x0 - 2.0 * radius < -half || x0 + 2.0 * radius >= half {
        return Err(Error::InvalidInput(format!(
            "cut-off support [{}, {}] escapes the domain [{}, {})",
            x0 - 2.0 * radius,
            x0 + 2.0 * radius,
            -half,
            half
        )));
    }
    let profile = spectral_rescale(q, tau, -tau * x0, grid)?.field;
    let q_norm = crate::spectral::integrate_power(q, 2).sqrt();
    let raw: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(profile.values())
        .map(|(&x, &p)| (cutoff((x - x0) / radius) * p / q_norm).max(0.0))
        .collect();
    let raw = Field::new(grid.clone(), raw)?;
    crate::spectral::mass_normalize(&raw)
}

/// Energy of the trial pair `(φ, φ)`: an upper bound for the constrained minimum.
#[allow(clippy::too_many_arguments)]
pub fn trial_energy(
    x0: f64,
    tau: f64,
    radius: f64,
    params: &CoupledParams,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    grid: &Arc<SpectralGrid>,
    q: &Field,
) -> Result<f64> {
    let phi = trial_function(x0, tau, radius, grid, q)?;
    let state = CoupledState::new(phi.clone(), phi)?;
    energy(&state, params, v1, v2)
}

struct Component {
    potential: Vec<f64>,
    strength: f64,
}

/// The energy functional on sampled potentials: one or two components, the
/// latter coupled through `(β/2)∫(u₁² - u₂²)²`.
struct Problem {
    grid: Arc<SpectralGrid>,
    components: Vec<Component>,
    beta: f64,
}

struct Run {
    us: Vec<Vec<f64>>,
    energy: f64,
    mu: Vec<f64>,
    residual: f64,
    iterations: usize,
    trace: Vec<f64>,
    shift: f64,
}

/// Per-component iterate of the conjugate-gradient engine.
struct Iterate {
    u: Vec<f64>,
    u_hat: Vec<Complex64>,
    ku: Vec<f64>,
}

fn re_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl Problem {
    fn single(grid: &Arc<SpectralGrid>, potential: Vec<f64>, d: f64) -> Self {
        Self {
            grid: grid.clone(),
            components: vec![Component { potential, strength: d }],
            beta: 0.0,
        }
    }

    fn coupled(grid: &Arc<SpectralGrid>, potentials: [Vec<f64>; 2], params: &CoupledParams) -> Self {
        let [p1, p2] = potentials;
        Self {
            grid: grid.clone(),
            components: vec![
                Component {
                    potential: p1,
                    strength: params.d1(),
                },
                Component {
                    potential: p2,
                    strength: params.d2(),
                },
            ],
            beta: params.beta,
        }
    }

    fn h(&self) -> f64 {
        self.grid.spacing()
    }

    fn coupling(&self) -> bool {
        self.components.len() == 2 && self.beta != 0.0
    }

    /// Rewritten-form energy from samples and `√(-Δ)u`.
    fn energy(&self, us: &[Vec<f64>], kus: &[Vec<f64>]) -> f64 {
        let h = self.h();
        let mut total = 0.0;
        for ((c, u), ku) in self.components.iter().zip(us).zip(kus) {
            let mut acc = 0.0;
            for ((&x, &k), &p) in u.iter().zip(ku).zip(&c.potential) {
                let x2 = x * x;
                acc += x * k + p * x2 - 0.5 * c.strength * x2 * x2;
            }
            total += h * acc;
        }
        if self.coupling() {
            let spread: f64 = us[0].iter().zip(&us[1]).map(|(a, b)| (a * a - b * b).powi(2)).sum();
            total += 0.5 * self.beta * h * spread;
        }
        total
    }

    /// Positive parts of the energy, used as the scale for relative tests.
    fn energy_scale(&self, us: &[Vec<f64>], kus: &[Vec<f64>]) -> f64 {
        let h = self.h();
        self.components
            .iter()
            .zip(us)
            .zip(kus)
            .map(|((c, u), ku)| {
                h * u
                    .iter()
                    .zip(ku)
                    .zip(&c.potential)
                    .map(|((x, k), p)| x * k + p * x * x + 0.5 * c.strength.abs() * x.powi(4))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Half-gradients `Gᵢ = (√(-Δ) + Vᵢ)uᵢ - dᵢuᵢ³ + β(uᵢ² - uⱼ²)uᵢ`.
    fn gradients(&self, us: &[Vec<f64>], kus: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = us.len();
        (0..n)
            .map(|i| {
                let c = &self.components[i];
                let u = &us[i];
                let mut g: Vec<f64> = u
                    .iter()
                    .zip(&kus[i])
                    .zip(&c.potential)
                    .map(|((&x, &k), &p)| k + p * x - c.strength * x * x * x)
                    .collect();
                if self.coupling() {
                    let other = &us[1 - i];
                    for ((gj, &x), &y) in g.iter_mut().zip(u).zip(other) {
                        *gj += self.beta * (x * x - y * y) * x;
                    }
                }
                g
            })
            .collect()
    }

    /// Multipliers `μᵢ = ⟨Gᵢ, uᵢ⟩`, tangent gradients `Gᵢ - μᵢuᵢ` and the
    /// relative defect `max_i ‖Gᵢ - μᵢuᵢ‖∞ / max(1, ‖μᵢuᵢ‖∞)`.
    fn tangent(&self, us: &[Vec<f64>], kus: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
        let grads = self.gradients(us, kus);
        let mut mus = Vec::with_capacity(us.len());
        let mut residual: f64 = 0.0;
        let mut tangents = Vec::with_capacity(us.len());
        for (g, u) in grads.into_iter().zip(us) {
            let mu = self.grid.dot(&g, u) / self.grid.dot(u, u);
            let t: Vec<f64> = g.iter().zip(u).map(|(a, b)| a - mu * b).collect();
            let scale = (mu.abs() * sup_norm(u)).max(1.0);
            residual = residual.max(sup_norm(&t) / scale);
            mus.push(mu);
            tangents.push(t);
        }
        (tangents, mus, residual)
    }

    fn solve(&self, start: Vec<Vec<f64>>, opts: &SolverOptions) -> Result<Run> {
        opts.validate()?;
        let mut us = start;
        for (i, u) in us.iter_mut().enumerate() {
            if u.len() != self.grid.n_points() || u.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidField(format!("initial component {} is malformed", i + 1)));
            }
            for v in u.iter_mut() {
                *v = v.abs();
            }
            let mass = self.grid.integrate_power(u, 2);
            if !(mass > 0.0) {
                return Err(Error::Constraint { component: i + 1, mass });
            }
            let inv = mass.sqrt().recip();
            u.iter_mut().for_each(|v| *v *= inv);
        }
        match opts.scheme {
            Scheme::ConjugateGradient => self.conjugate_gradient(us, opts),
            Scheme::GradientFlow => self.gradient_flow(us, opts),
        }
    }

    fn fresh(&self, u: Vec<f64>) -> Result<Iterate> {
        let u_hat = self.grid.transform(&u);
        let coeffs: Vec<Complex64> = u_hat
            .iter()
            .zip(self.grid.frequencies())
            .map(|(c, xi)| c * xi.abs())
            .collect();
        let ku = self.grid.inverse_real(coeffs, 0.0)?;
        Ok(Iterate { u, u_hat, ku })
    }

    fn window_settled(trace: &[f64], window: usize, tol: f64, scale: f64) -> bool {
        if trace.len() <= window {
            return false;
        }
        let last = trace[trace.len() - 1];
        let then = trace[trace.len() - 1 - window];
        (then - last).abs() <= tol * last.abs().max(1e-12 * scale)
    }

    fn conjugate_gradient(&self, start: Vec<Vec<f64>>, opts: &SolverOptions) -> Result<Run> {
        const NAME: &str = "preconditioned conjugate gradient";
        let g = &self.grid;
        let h = g.spacing();
        let xi: Vec<f64> = g.frequencies().iter().map(|x| x.abs()).collect();
        let n_comp = start.len();
        let mut its: Vec<Iterate> = start.into_iter().map(|u| self.fresh(u)).collect::<Result<_>>()?;
        let split = |its: &[Iterate]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
            (
                its.iter().map(|i| i.u.clone()).collect(),
                its.iter().map(|i| i.ku.clone()).collect(),
            )
        };
        let (us, kus) = split(&its);
        let mut energy = self.energy(&us, &kus);
        let mut trace = vec![energy];
        let mut sigmas: Vec<f64> = vec![0.0; n_comp];
        let mut prev: Option<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>, f64)> = None; // (z_hat, dir_hat, <g,z>)
        let mut step_guess = 1.0;
        let mut iterations = 0;
        loop {
            let us: Vec<Vec<f64>> = its.iter().map(|i| i.u.clone()).collect();
            let kus: Vec<Vec<f64>> = its.iter().map(|i| i.ku.clone()).collect();
            let (tangents, mus, residual) = self.tangent(&us, &kus);
            let scale = self.energy_scale(&us, &kus);
            if residual < opts.tolerance && Self::window_settled(&trace, opts.energy_window, opts.energy_tolerance, scale) {
                let energy = self.energy(&us, &kus);
                return Ok(Run {
                    us,
                    energy,
                    mu: mus,
                    residual,
                    iterations,
                    trace,
                    shift: sigmas.iter().cloned().fold(0.0, f64::max),
                });
            }
            if iterations >= opts.max_iter {
                return Err(Error::NonConvergence {
                    method: NAME,
                    iterations,
                    residual,
                });
            }
            iterations += 1;

            // preconditioner (|ξ| + σᵢ)⁻¹, refreshed when the multiplier drifts
            let mut reset = prev.is_none();
            for (i, &mu) in mus.iter().enumerate() {
                let target = opts.shift.unwrap_or(1.0) + (-mu).max(0.0);
                if sigmas[i] == 0.0 || (target / sigmas[i] - 1.0).abs() > 0.25 {
                    sigmas[i] = target;
                    reset = true;
                }
            }

            let mut g_hats = Vec::with_capacity(n_comp);
            let mut z_hats = Vec::with_capacity(n_comp);
            let mut gz = 0.0;
            for i in 0..n_comp {
                let g_hat = g.transform(&tangents[i]);
                let s = sigmas[i];
                let pg: Vec<Complex64> = g_hat.iter().zip(&xi).map(|(c, k)| c / (k + s)).collect();
                let pu: Vec<Complex64> = its[i].u_hat.iter().zip(&xi).map(|(c, k)| c / (k + s)).collect();
                let coef = re_dot(&its[i].u_hat, &pg) / re_dot(&its[i].u_hat, &pu);
                let z: Vec<Complex64> = pg.iter().zip(&pu).map(|(a, b)| a - b * coef).collect();
                gz += re_dot(&g_hat, &z);
                g_hats.push(g_hat);
                z_hats.push(z);
            }
            if !(gz > 0.0) {
                // exact critical point of the discrete problem
                trace.push(energy);
                prev = None;
                continue;
            }

            let mut dirs: Vec<Vec<Complex64>> = z_hats.iter().map(|z| z.iter().map(|c| -c).collect()).collect();
            if let (false, Some((z_old, d_old, gz_old))) = (reset, prev.as_ref()) {
                let num: f64 = gz - (0..n_comp).map(|i| re_dot(&g_hats[i], &z_old[i])).sum::<f64>();
                let beta_cg = (num / gz_old).max(0.0);
                if beta_cg > 0.0 {
                    for i in 0..n_comp {
                        let uu = re_dot(&its[i].u_hat, &its[i].u_hat);
                        let proj = re_dot(&d_old[i], &its[i].u_hat) / uu;
                        for ((d, o), u) in dirs[i].iter_mut().zip(&d_old[i]).zip(&its[i].u_hat) {
                            *d += (o - u * proj) * beta_cg;
                        }
                    }
                    let slope: f64 = (0..n_comp).map(|i| re_dot(&g_hats[i], &dirs[i])).sum();
                    if !(slope < 0.0) {
                        dirs = z_hats.iter().map(|z| z.iter().map(|c| -c).collect()).collect();
                    }
                }
            }

            let mut d_phys = Vec::with_capacity(n_comp);
            let mut kd_phys = Vec::with_capacity(n_comp);
            for dir in &dirs {
                d_phys.push(g.inverse_real(dir.clone(), 0.0)?);
                let kd: Vec<Complex64> = dir.iter().zip(&xi).map(|(c, k)| c * *k).collect();
                kd_phys.push(g.inverse_real(kd, 0.0)?);
            }

            let model = LineModel::build(self, &its, &d_phys, &kd_phys);
            let t = model.minimize(step_guess);
            let decrease = model.delta(t);
            let accepted = t > 0.0 && decrease < 0.0;

            let mut next: Vec<Iterate> = Vec::with_capacity(n_comp);
            let mut flipped = false;
            if accepted {
                for i in 0..n_comp {
                    let it = &its[i];
                    let mut u: Vec<f64> = it.u.iter().zip(&d_phys[i]).map(|(a, b)| a + t * b).collect();
                    let mut ku: Vec<f64> = it.ku.iter().zip(&kd_phys[i]).map(|(a, b)| a + t * b).collect();
                    let mut u_hat: Vec<Complex64> = it.u_hat.iter().zip(&dirs[i]).map(|(a, b)| a + b * t).collect();
                    if u.iter().any(|&v| v < 0.0) {
                        flipped = true;
                        u.iter_mut().for_each(|v| *v = v.abs());
                    }
                    let inv = (h * u.iter().map(|v| v * v).sum::<f64>()).sqrt().recip();
                    u.iter_mut().for_each(|v| *v *= inv);
                    ku.iter_mut().for_each(|v| *v *= inv);
                    u_hat.iter_mut().for_each(|v| *v *= inv);
                    next.push(Iterate { u, u_hat, ku });
                }
                if flipped || iterations % REFRESH_INTERVAL == 0 {
                    next = next.into_iter().map(|it| self.fresh(it.u)).collect::<Result<_>>()?;
                }
                if flipped {
                    // the modulus moved the iterate off the search curve
                    let (nu, nku) = split(&next);
                    let e_new = self.energy(&nu, &nku);
                    if e_new <= energy {
                        its = next;
                        energy = e_new;
                        trace.push(energy);
                        prev = None;
                        continue;
                    }
                } else {
                    its = next;
                    energy += decrease;
                    trace.push(energy);
                    step_guess = t;
                    prev = Some((z_hats, dirs, gz));
                    continue;
                }
            }
            // no decrease along the search curve
            if prev.is_some() && !reset {
                prev = None;
                sigmas.iter_mut().for_each(|s| *s = 0.0);
                continue;
            }
            if residual < opts.tolerance {
                // energy is flat to rounding; count the step toward the window
                trace.push(energy);
                continue;
            }
            return Err(Error::Stagnation {
                iteration: iterations,
                step: t,
                energy,
                residual,
            });
        }
    }

    fn gradient_flow(&self, start: Vec<Vec<f64>>, opts: &SolverOptions) -> Result<Run> {
        const NAME: &str = "normalized gradient flow";
        const MIN_STEP: f64 = 1e-14;
        const MAX_STEP: f64 = 1e4;
        let g = &self.grid;
        let h = g.spacing();
        let n_comp = start.len();
        let kinetic = |us: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
            us.iter().map(|u| g.apply_symbol(u, |xi| xi)).collect()
        };
        let mut us = start;
        let mut kus = kinetic(&us)?;
        let mut energy = self.energy(&us, &kus);
        let mut trace = vec![energy];
        let shift = opts.shift.unwrap_or_else(|| {
            let vmax = self
                .components
                .iter()
                .flat_map(|c| c.potential.iter())
                .fold(0.0f64, |m, v| m.max(*v));
            vmax.max(1.0)
        });
        let mut tau = opts.step;
        let mut iterations = 0;
        loop {
            let (_, mus, residual) = self.tangent(&us, &kus);
            let scale = self.energy_scale(&us, &kus);
            if residual < opts.tolerance && Self::window_settled(&trace, opts.energy_window, opts.energy_tolerance, scale) {
                return Ok(Run {
                    us,
                    energy,
                    mu: mus,
                    residual,
                    iterations,
                    trace,
                    shift,
                });
            }
            if iterations >= opts.max_iter {
                return Err(Error::NonConvergence {
                    method: NAME,
                    iterations,
                    residual,
                });
            }
            iterations += 1;
            let forces = {
                // dᵢuᵢ³ - β(uᵢ² - uⱼ²)uᵢ - Vᵢuᵢ + (shift + μᵢ)uᵢ; the explicit
                // multiplier makes every fixed point an exact critical point
                let zero = vec![0.0; g.n_points()];
                let grads = self.gradients(&us, &vec![zero; n_comp]);
                grads
                    .into_iter()
                    .zip(&us)
                    .zip(&mus)
                    .map(|((gr, u), mu)| gr.iter().zip(u).map(|(a, b)| (shift + mu) * b - a).collect::<Vec<f64>>())
                    .collect::<Vec<_>>()
            };
            loop {
                let mut trial = Vec::with_capacity(n_comp);
                for (u, f) in us.iter().zip(&forces) {
                    let rhs: Vec<f64> = u.iter().zip(f).map(|(a, b)| a + tau * b).collect();
                    let mut next = g.apply_symbol(&rhs, |xi| 1.0 / (1.0 + tau * (xi + shift)))?;
                    next.iter_mut().for_each(|v| *v = v.abs());
                    let inv = (h * next.iter().map(|v| v * v).sum::<f64>()).sqrt().recip();
                    next.iter_mut().for_each(|v| *v *= inv);
                    trial.push(next);
                }
                let ktrial = kinetic(&trial)?;
                let e_new = self.energy(&trial, &ktrial);
                if e_new <= energy {
                    us = trial;
                    kus = ktrial;
                    energy = e_new;
                    trace.push(energy);
                    tau = (1.2 * tau).min(MAX_STEP);
                    break;
                }
                tau *= 0.5;
                if tau < MIN_STEP {
                    if residual < opts.tolerance {
                        trace.push(energy);
                        tau = opts.step;
                        break;
                    }
                    return Err(Error::Stagnation {
                        iteration: iterations,
                        step: tau,
                        energy,
                        residual,
                    });
                }
            }
        }
    }
}

/// The energy restricted to the curve `uᵢ(t) = (uᵢ + t Dᵢ)/‖uᵢ + t Dᵢ‖₂`,
/// an explicit rational function of `t`.
struct LineModel {
    /// Per component: `⟨u+tD, (√(-Δ)+V)(u+tD)⟩` as `[a0, a1, a2]` (with `2t a1`).
    quad: Vec<[f64; 3]>,
    /// `‖u+tD‖²` as `[m0, m1, m2]` (with `2t m1`).
    mass: Vec<[f64; 3]>,
    /// `∫(u+tD)⁴`, coefficients of `t^k`.
    quartic: Vec<[f64; 5]>,
    /// `∫(u₁+tD₁)²(u₂+tD₂)²`, coefficients of `t^k`.
    cross: Option<[f64; 5]>,
    strengths: Vec<f64>,
    beta: f64,
}

fn poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn dpoly(c: &[f64], t: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &a)| acc * t + k as f64 * a)
}

impl LineModel {
    fn build(problem: &Problem, its: &[Iterate], dirs: &[Vec<f64>], kdirs: &[Vec<f64>]) -> Self {
        let h = problem.h();
        let mut quad = Vec::new();
        let mut mass = Vec::new();
        let mut quartic = Vec::new();
        for (i, it) in its.iter().enumerate() {
            let pot = &problem.components[i].potential;
            let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            let mut q = [0.0; 5];
            for j in 0..it.u.len() {
                let (u, d, p) = (it.u[j], dirs[i][j], pot[j]);
                let lu = it.ku[j] + p * u;
                let ld = kdirs[i][j] + p * d;
                a0 += u * lu;
                a1 += d * lu;
                a2 += d * ld;
                m0 += u * u;
                m1 += u * d;
                m2 += d * d;
                let (u2, d2) = (u * u, d * d);
                q[0] += u2 * u2;
                q[1] += 4.0 * u2 * u * d;
                q[2] += 6.0 * u2 * d2;
                q[3] += 4.0 * u * d2 * d;
                q[4] += d2 * d2;
            }
            quad.push([h * a0, h * a1, h * a2]);
            mass.push([h * m0, h * m1, h * m2]);
            quartic.push(q.map(|c| h * c));
        }
        let cross = problem.coupling().then(|| {
            let mut x = [0.0; 5];
            let (u1, u2, d1, d2) = (&its[0].u, &its[1].u, &dirs[0], &dirs[1]);
            for j in 0..u1.len() {
                // (u₁² + 2t u₁d₁ + t²d₁²)(u₂² + 2t u₂d₂ + t²d₂²)
                let p = [u1[j] * u1[j], 2.0 * u1[j] * d1[j], d1[j] * d1[j]];
                let r = [u2[j] * u2[j], 2.0 * u2[j] * d2[j], d2[j] * d2[j]];
                x[0] += p[0] * r[0];
                x[1] += p[0] * r[1] + p[1] * r[0];
                x[2] += p[0] * r[2] + p[1] * r[1] + p[2] * r[0];
                x[3] += p[1] * r[2] + p[2] * r[1];
                x[4] += p[2] * r[2];
            }
            x.map(|c| h * c)
        });
        Self {
            quad,
            mass,
            quartic,
            cross,
            strengths: problem.components.iter().map(|c| c.strength).collect(),
            beta: problem.beta,
        }
    }

    fn quad_poly(c: &[f64; 3]) -> [f64; 3] {
        [c[0], 2.0 * c[1], c[2]]
    }

    fn value(&self, t: f64) -> f64 {
        let mut total = 0.0;
        let mut norms = Vec::with_capacity(self.quad.len());
        let mut fourth = Vec::with_capacity(self.quad.len());
        for i in 0..self.quad.len() {
            let n = poly(&Self::quad_poly(&self.mass[i]), t);
            let p = poly(&Self::quad_poly(&self.quad[i]), t);
            let q = poly(&self.quartic[i], t) / (n * n);
            total += p / n - 0.5 * self.strengths[i] * q;
            norms.push(n);
            fourth.push(q);
        }
        if let Some(x) = &self.cross {
            total += 0.5 * self.beta * (fourth[0] + fourth[1] - 2.0 * poly(x, t) / (norms[0] * norms[1]));
        }
        total
    }

    /// `E(t) - E(0)`, assembled from the increments of each polynomial so
    /// that small decreases are not lost to cancellation.
    fn delta(&self, t: f64) -> f64 {
        let incr = |c: &[f64]| c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (_, &a)| (acc + a) * t);
        let mut total = 0.0;
        let mut n0s = Vec::new();
        let mut dns = Vec::new();
        let mut fourth_delta = Vec::new();
        for i in 0..self.quad.len() {
            let mp = Self::quad_poly(&self.mass[i]);
            let pp = Self::quad_poly(&self.quad[i]);
            let (n0, dn) = (mp[0], incr(&mp));
            let (p0, dp) = (pp[0], incr(&pp));
            let (q0, dq) = (self.quartic[i][0], incr(&self.quartic[i]));
            let n = n0 + dn;
            let d_quad = (dp * n0 - p0 * dn) / (n * n0);
            let d_fourth = (dq * n0 * n0 - q0 * dn * (2.0 * n0 + dn)) / (n * n * n0 * n0);
            total += d_quad - 0.5 * self.strengths[i] * d_fourth;
            n0s.push(n0);
            dns.push(dn);
            fourth_delta.push(d_fourth);
        }
        if let Some(x) = &self.cross {
            let base = n0s[0] * n0s[1];
            let grow = dns[0] * n0s[1] + n0s[0] * dns[1] + dns[0] * dns[1];
            let d_cross = (incr(x) * base - x[0] * grow) / ((base + grow) * base);
            total += 0.5 * self.beta * (fourth_delta[0] + fourth_delta[1] - 2.0 * d_cross);
        }
        total
    }

    fn derivative(&self, t: f64) -> f64 {
        let mut total = 0.0;
        let mut ns = Vec::with_capacity(self.quad.len());
        let mut dns = Vec::with_capacity(self.quad.len());
        let mut dfourth = Vec::with_capacity(self.quad.len());
        for i in 0..self.quad.len() {
            let mp = Self::quad_poly(&self.mass[i]);
            let pp = Self::quad_poly(&self.quad[i]);
            let (n, dn) = (poly(&mp, t), dpoly(&mp, t));
            let (p, dp) = (poly(&pp, t), dpoly(&pp, t));
            let (q, dq) = (poly(&self.quartic[i], t), dpoly(&self.quartic[i], t));
            let d_quad = (dp * n - p * dn) / (n * n);
            let d_fourth = (dq * n - 2.0 * q * dn) / (n * n * n);
            total += d_quad - 0.5 * self.strengths[i] * d_fourth;
            ns.push(n);
            dns.push(dn);
            dfourth.push(d_fourth);
        }
        if let Some(x) = &self.cross {
            let nn = ns[0] * ns[1];
            let dnn = dns[0] * ns[1] + ns[0] * dns[1];
            let d_cross = dpoly(x, t) / nn - poly(x, t) * dnn / (nn * nn);
            total += 0.5 * self.beta * (dfourth[0] + dfourth[1] - 2.0 * d_cross);
        }
        total
    }

    /// First local minimizer of the model on `t > 0`, or zero when the curve
    /// does not descend.
    fn minimize(&self, guess: f64) -> f64 {
        if !(self.derivative(0.0) < 0.0) {
            return 0.0;
        }
        let mut lo = 0.0;
        let mut hi = guess.max(1e-12);
        let mut expansions = 0;
        while self.derivative(hi) < 0.0 {
            lo = hi;
            hi *= 4.0;
            expansions += 1;
            if expansions > 60 || !hi.is_finite() {
                return lo;
            }
        }
        // safeguarded regula falsi on the derivative
        let (mut flo, mut fhi) = (self.derivative(lo), self.derivative(hi));
        let mut side = 0;
        for _ in 0..200 {
            let mut t = (lo * fhi - hi * flo) / (fhi - flo);
            if !(t > lo && t < hi) {
                t = 0.5 * (lo + hi);
            }
            let ft = self.derivative(t);
            if ft < 0.0 {
                lo = t;
                flo = ft;
                if side == -1 {
                    fhi *= 0.5;
                }
                side = -1;
            } else {
                hi = t;
                fhi = ft;
                if side == 1 {
                    flo *= 0.5;
                }
                side = 1;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        let t = 0.5 * (lo + hi);
        if self.value(t) <= self.value(lo) {
            t
        } else {
            lo
        }
    }
}
