//! Dense-matrix reference implementations for small grids.
//!
//! The Fourier multipliers are assembled entrywise as real symmetric
//! matrices and the single-component problem is minimized by plain projected
//! gradient descent with backtracking, with no transforms and no
//! preconditioning. Everything here is `O(N²)` or worse and is meant for
//! `N ≤ 512`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spectral::{Field, MultiplierPower, SpectralGrid};

pub const MAX_DENSE_POINTS: usize = 512;

fn check_size(grid: &SpectralGrid) -> Result<()> {
    if grid.n_points() > MAX_DENSE_POINTS {
        return Err(Error::InvalidGrid(format!(
            "dense oracle limited to {MAX_DENSE_POINTS} points, grid has {}",
            grid.n_points()
        )));
    }
    Ok(())
}

/// `M_{jl} = N⁻¹ Σ_k |ξ_k|^s cos(ξ_k (x_j - x_l))`, the matrix of the multiplier `|ξ|^s`.
pub fn dense_multiplier(grid: &SpectralGrid, power: MultiplierPower) -> Result<DMatrix<f64>> {
    check_size(grid)?;
    let n = grid.n_points();
    let s = power.exponent();
    let h = grid.spacing();
    // the matrix is circulant: one column of the kernel suffices
    let kernel: Vec<f64> = (0..n)
        .map(|m| {
            let offset = m as f64 * h;
            grid.frequencies()
                .iter()
                .map(|xi| xi.abs().powf(s) * (xi * offset).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect();
    Ok(DMatrix::from_fn(n, n, |j, l| kernel[(j + n - l) % n]))
}

pub fn dense_apply(u: &Field, power: MultiplierPower) -> Result<Field> {
    let m = dense_multiplier(u.grid(), power)?;
    let v = &m * DVector::from_column_slice(u.values());
    Field::new(u.grid().clone(), v.as_slice().to_vec())
}

/// Smallest eigenpair of `√(-Δ) + diag(V)`, eigenvector scaled to unit
/// discrete mass and made positive.
pub fn dense_first_eigenpair(grid: &Arc<SpectralGrid>, potential: &[f64]) -> Result<(f64, Field)> {
    let mut m = dense_multiplier(grid, MultiplierPower::One)?;
    for (j, v) in potential.iter().enumerate() {
        m[(j, j)] += v;
    }
    let eig = SymmetricEigen::new(m);
    let (idx, value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
    let col = eig.eigenvectors.column(idx);
    let sign = if col.sum() < 0.0 { -1.0 } else { 1.0 };
    let scale = sign / (grid.spacing() * col.norm_squared()).sqrt();
    let values: Vec<f64> = col.iter().map(|v| v * scale).collect();
    Ok((value, Field::new(grid.clone(), values)?))
}

#[derive(Clone, Debug)]
pub struct DescentResult {
    pub field: Field,
    pub energy: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Minimizes `h uᵀKu + h Σ Vu² - (d/2) h Σ u⁴` on the sphere `h Σ u² = 1`
/// by projected steepest descent with Armijo backtracking.
pub fn descent_minimize_single(
    grid: &Arc<SpectralGrid>,
    potential: &[f64],
    d: f64,
    init: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<DescentResult> {
    const NAME: &str = "dense projected descent";
    let k = dense_multiplier(grid, MultiplierPower::One)?;
    let h = grid.spacing();
    let n = grid.n_points();
    let pot = DVector::from_column_slice(potential);
    let normalize = |u: DVector<f64>| -> DVector<f64> {
        let mass = h * u.norm_squared();
        u / mass.sqrt()
    };
    let energy = |u: &DVector<f64>| -> f64 {
        let ku = &k * u;
        h * (u.dot(&ku) + u.iter().zip(pot.iter()).map(|(x, v)| v * x * x - 0.5 * d * x.powi(4)).sum::<f64>())
    };
    // gradient of the energy with respect to the samples, divided by 2h
    let gradient = |u: &DVector<f64>| -> DVector<f64> {
        let ku = &k * u;
        DVector::from_fn(n, |j, _| ku[j] + pot[j] * u[j] - d * u[j].powi(3))
    };
    let mut u = normalize(DVector::from_column_slice(init.values()));
    let mut e = energy(&u);
    let mut step = 0.1;
    let mut gnorm = f64::INFINITY;
    for it in 0..max_iter {
        let g = gradient(&u);
        let mu = u.dot(&g) / u.norm_squared();
        let t = &g - &u * mu;
        gnorm = t.amax();
        if gnorm < tol {
            let values = u.iter().map(|v| v.abs()).collect();
            return Ok(DescentResult {
                field: Field::new(grid.clone(), values)?,
                energy: e,
                iterations: it,
                gradient_norm: gnorm,
            });
        }
        let slope = h * t.norm_squared();
        step *= 2.0;
        loop {
            let trial = normalize(&u - &t * step);
            let et = energy(&trial);
            if et <= e - 1e-4 * step * slope {
                u = trial;
                e = et;
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                return Err(Error::Stagnation {
                    iteration: it,
                    step,
                    energy: e,
                    residual: gnorm,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        method: NAME,
        iterations: max_iter,
        residual: gnorm,
    })
}
