//! Uniform periodic grids, Fourier multipliers and quadrature.
//!
//! The domain is `[-L/2, L/2)` sampled at `N` equispaced nodes. Transforms use
//! the unitary DFT convention
//!
//! ```text
//! û_k = N^{-1/2} Σ_j u_j exp(-i ξ_k (x_j - x_0)),    ξ_k = 2π k / L,
//! ```
//!
//! with `k` in `{-N/2, …, N/2 - 1}` stored in FFT order. Under this convention
//! Parseval reads `∫ u² dx ≈ h Σ_j u_j² = h Σ_k |û_k|²`, so every
//! Parseval-based quantity below carries the quadrature weight `h = L/N`.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative bound on the imaginary residue left by an inverse transform of a
/// real-even multiplier applied to real data.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-12;

/// Largest oversampled grid built for trigonometric interpolation.
const MAX_OVERSAMPLED_POINTS: usize = 1 << 22;
const MAX_OVERSAMPLING: usize = 16;
const STENCIL: usize = 8;

pub struct SpectralGrid {
    n_points: usize,
    length: f64,
    spacing: f64,
    nodes: Vec<f64>,
    frequencies: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n_points", &self.n_points)
            .field("length", &self.length)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_points == other.n_points && self.length == other.length
    }
}

impl SpectralGrid {
    /// Builds a grid of `n_points` nodes (a power of two) on `[-length/2, length/2)`.
    pub fn new(length: f64, n_points: usize) -> Result<Arc<Self>> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 2, got {n_points}"
            )));
        }
        let spacing = length / n_points as f64;
        let nodes = (0..n_points)
            .map(|j| -0.5 * length + j as f64 * spacing)
            .collect();
        let half = n_points / 2;
        let frequencies = (0..n_points)
            .map(|k| {
                let signed = if k < half { k as f64 } else { k as f64 - n_points as f64 };
                2.0 * std::f64::consts::PI * signed / length
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            n_points,
            length,
            spacing,
            nodes,
            frequencies,
            forward: planner.plan_fft_forward(n_points),
            inverse: planner.plan_fft_inverse(n_points),
        }))
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Fourier frequencies `ξ_k` in FFT storage order.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Index of the node at `x = 0`.
    pub fn center_index(&self) -> usize {
        self.n_points / 2
    }

    /// Largest `|ξ|` on the grid (the Nyquist frequency).
    pub fn max_frequency(&self) -> f64 {
        std::f64::consts::PI / self.spacing
    }

    /// Unitary forward transform of real samples.
    pub fn transform(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n_points);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let norm = 1.0 / (self.n_points as f64).sqrt();
        buf.iter_mut().for_each(|c| *c *= norm);
        buf
    }

    /// Unitary inverse transform whose result must be real. `reference` is a
    /// scale below which imaginary residue is attributed to roundoff.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>, reference: f64) -> Result<Vec<f64>> {
        debug_assert_eq!(spectrum.len(), self.n_points);
        self.inverse.process(&mut spectrum);
        let norm = 1.0 / (self.n_points as f64).sqrt();
        let mut re_sq = 0.0;
        let mut im_sq = 0.0;
        let out: Vec<f64> = spectrum
            .iter()
            .map(|c| {
                let z = c * norm;
                re_sq += z.re * z.re;
                im_sq += z.im * z.im;
                z.re
            })
            .collect();
        let denom = re_sq.sqrt().max(reference);
        if denom > 0.0 {
            let residue = im_sq.sqrt() / denom;
            if residue > IMAGINARY_RESIDUE_TOL {
                return Err(Error::ImaginaryResidue { residue });
            }
        }
        Ok(out)
    }

    /// Applies the real, even Fourier symbol `symbol(|ξ|)` to real samples.
    pub fn apply_symbol<F>(&self, values: &[f64], symbol: F) -> Result<Vec<f64>>
    where
        F: Fn(f64) -> f64,
    {
        let mut coeffs = self.transform(values);
        let mut sym_max: f64 = 0.0;
        for (c, &xi) in coeffs.iter_mut().zip(&self.frequencies) {
            let s = symbol(xi.abs());
            sym_max = sym_max.max(s.abs());
            *c *= s;
        }
        let reference = 1e-2 * sym_max * l2_norm(values);
        self.inverse_real(coeffs, reference)
    }

    /// `h Σ u_j v_j`, the trapezoidal approximation of `∫ u v dx`.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.spacing * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    /// `h Σ u_j^p`.
    pub fn integrate_power(&self, values: &[f64], p: u32) -> f64 {
        self.spacing * values.iter().map(|v| v.powi(p as i32)).sum::<f64>()
    }

    /// `h Σ_k |ξ_k| |û_k|²`, the discrete `∫ |(-Δ)^{1/4} u|² dx`.
    pub fn seminorm(&self, values: &[f64]) -> f64 {
        let coeffs = self.transform(values);
        self.spacing
            * coeffs
                .iter()
                .zip(&self.frequencies)
                .map(|(c, xi)| xi.abs() * c.norm_sqr())
                .sum::<f64>()
    }

    /// `h Σ_k |û_k|²`; equals `integrate_power(values, 2)` by Plancherel.
    pub fn spectral_mass(&self, values: &[f64]) -> f64 {
        self.spacing * self.transform(values).iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Index of the node nearest to `x` (periodically wrapped).
    pub fn nearest_index(&self, x: f64) -> usize {
        let s = ((x + 0.5 * self.length) / self.spacing).round() as i64;
        s.rem_euclid(self.n_points as i64) as usize
    }
}

/// Location of the largest sample: the leftmost maximizing node and the
/// sub-grid abscissa from a quadratic fit through it and its two neighbours.
pub fn refined_maximum(grid: &SpectralGrid, values: &[f64]) -> (usize, f64) {
    let n = values.len();
    let mut best = 0;
    for (j, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = j;
        }
    }
    let (l, c, r) = (values[(best + n - 1) % n], values[best], values[(best + 1) % n]);
    let denom = l - 2.0 * c + r;
    let offset = if denom < 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    (best, grid.nodes()[best] + offset * grid.spacing())
}

/// Translates periodic samples by `shift` (`out(x) = u(x - shift)`) through a
/// Fourier phase; the Nyquist mode is shifted by its real part only.
pub fn spectral_shift(grid: &SpectralGrid, values: &[f64], shift: f64) -> Result<Vec<f64>> {
    let mut coeffs = grid.transform(values);
    let nyq = grid.n_points() / 2;
    for (k, (c, &xi)) in coeffs.iter_mut().zip(grid.frequencies()).enumerate() {
        let phase = -xi * shift;
        if k == nyq {
            *c *= phase.cos();
        } else {
            *c *= Complex64::new(phase.cos(), phase.sin());
        }
    }
    let reference = l2_norm(values);
    grid.inverse_real(coeffs, reference)
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Samples of a real function on a [`SpectralGrid`].
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<SpectralGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<SpectralGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite sample at node {j}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Arc<SpectralGrid>, f: F) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.n_points()],
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// `∫ u v dx` by the trapezoidal rule.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.dot(&self.values, &other.values)
    }

    /// `‖u - v‖₂`.
    pub fn l2_distance(&self, other: &Field) -> f64 {
        let h = self.grid.spacing();
        (h * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>())
        .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(j) => Err(Error::InvalidField(format!("non-finite sample at node {j}"))),
            None => Ok(()),
        }
    }
}

/// Power of `|ξ|` applied by [`fractional_apply`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultiplierPower {
    /// `|ξ|^{1/2}`, i.e. `(-Δ)^{1/4}`.
    Half,
    /// `|ξ|`, i.e. `√(-Δ)`.
    One,
}

impl MultiplierPower {
    pub fn exponent(self) -> f64 {
        match self {
            MultiplierPower::Half => 0.5,
            MultiplierPower::One => 1.0,
        }
    }
}

/// Applies the multiplier `|ξ|^power`; the zero mode maps to zero.
pub fn fractional_apply(u: &Field, power: MultiplierPower) -> Result<Field> {
    u.check_finite()?;
    let values = match power {
        MultiplierPower::One => u.grid.apply_symbol(&u.values, |xi| xi)?,
        MultiplierPower::Half => u.grid.apply_symbol(&u.values, f64::sqrt)?,
    };
    Field::new(u.grid.clone(), values)
}

/// `∫ |(-Δ)^{1/4} u|² dx` through Parseval.
pub fn seminorm_h_half(u: &Field) -> Result<f64> {
    u.check_finite()?;
    Ok(u.grid.seminorm(&u.values))
}

/// `∫ u^p dx` by the trapezoidal rule.
pub fn integrate_power(u: &Field, p: u32) -> f64 {
    u.grid.integrate_power(&u.values, p)
}

/// Rescales `u` to unit `L²` mass.
pub fn mass_normalize(u: &Field) -> Result<Field> {
    u.check_finite()?;
    let mass = integrate_power(u, 2);
    if !(mass > 0.0) {
        return Err(Error::DegenerateNormalization);
    }
    let inv = 1.0 / mass.sqrt();
    u.map(|v| v * inv)
}

/// Result of [`spectral_rescale`].
#[derive(Clone, Debug)]
pub struct Rescaled {
    pub field: Field,
    /// Target nodes whose source point fell outside the source domain and
    /// were read as zero.
    pub truncated: usize,
}

/// Builds `w(x) = scale^{1/2} u(scale·x + center)` on `target` by evaluating
/// the trigonometric interpolant of `u`.
pub fn spectral_rescale(
    u: &Field,
    scale: f64,
    center: f64,
    target: &Arc<SpectralGrid>,
) -> Result<Rescaled> {
    if !(scale.is_finite() && scale > 0.0 && center.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "rescale needs positive finite scale and finite center, got scale={scale}, center={center}"
        )));
    }
    u.check_finite()?;
    let interp = TrigInterpolant::new(u);
    let amp = scale.sqrt();
    let mut truncated = 0;
    let values: Vec<f64> = target
        .nodes()
        .iter()
        .map(|&x| match interp.eval(scale * x + center) {
            Some(v) => amp * v,
            None => {
                truncated += 1;
                0.0
            }
        })
        .collect();
    if truncated == target.n_points() {
        return Err(Error::DomainCoverage);
    }
    if truncated > 0 {
        log::debug!(
            "spectral_rescale: {truncated} of {} target nodes fall outside the source domain; read as zero",
            target.n_points()
        );
    }
    Ok(Rescaled {
        field: Field::new(target.clone(), values)?,
        truncated,
    })
}

/// Trigonometric interpolant of a periodic field, evaluated through an
/// oversampled (zero-padded) copy and a local barycentric Lagrange stencil.
pub struct TrigInterpolant {
    origin: f64,
    length: f64,
    fine_spacing: f64,
    fine: Vec<f64>,
}

impl TrigInterpolant {
    pub fn new(u: &Field) -> Self {
        let grid = &u.grid;
        let n = grid.n_points();
        let factor = (MAX_OVERSAMPLED_POINTS / n).clamp(1, MAX_OVERSAMPLING);
        let m = n * factor;
        let mut coeffs: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.forward.process(&mut coeffs);
        let mut padded = vec![Complex64::new(0.0, 0.0); m];
        let half = n / 2;
        for k in 0..half {
            padded[k] = coeffs[k];
        }
        for k in half + 1..n {
            padded[m - (n - k)] = coeffs[k];
        }
        // Nyquist coefficient split evenly between ±N/2 keeps the interpolant real.
        if factor > 1 {
            padded[half] = coeffs[half] * 0.5;
            padded[m - half] = coeffs[half] * 0.5;
        } else {
            padded[half] = coeffs[half];
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(m).process(&mut padded);
        let scale = 1.0 / n as f64;
        Self {
            origin: grid.nodes()[0],
            length: grid.length(),
            fine_spacing: grid.spacing() / factor as f64,
            fine: padded.iter().map(|c| c.re * scale).collect(),
        }
    }

    /// Value at `x`, or `None` when `x` lies outside `[-L/2, L/2]`.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let half = 0.5 * self.length;
        if !(x >= -half - 1e-12 * self.length && x <= half + 1e-12 * self.length) {
            return None;
        }
        let m = self.fine.len() as i64;
        let s = (x - self.origin) / self.fine_spacing;
        let base = s.floor();
        let frac = s - base;
        let base = base as i64;
        if frac == 0.0 {
            return Some(self.fine[base.rem_euclid(m) as usize]);
        }
        let lo = base - (STENCIL as i64 / 2 - 1);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut binom = 1.0;
        for j in 0..STENCIL {
            // barycentric weights (-1)^j C(S-1, j) for equispaced nodes
            let w = if j % 2 == 0 { binom } else { -binom };
            binom = binom * (STENCIL - 1 - j) as f64 / (j + 1) as f64;
            let node = lo + j as i64;
            let t = w / (s - node as f64);
            num += t * self.fine[node.rem_euclid(m) as usize];
            den += t;
        }
        Some(num / den)
    }
}
