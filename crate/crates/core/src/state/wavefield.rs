use num_complex::Complex64;

use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Amplitude threshold at the grid edges above which a state counts as truncated.
pub const BOUNDARY_AMPLITUDE_LIMIT: f64 = 1e-8;

/// Default tolerance on `∫|ψ|² dx = 1`.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Complex amplitude sampled on a grid at a sequence of times.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub psi: Vec<Vec<Complex64>>,
}

impl WaveField {
    pub fn new(grid: GridSpec, times: Vec<f64>, psi: Vec<Vec<Complex64>>) -> Result<Self> {
        if times.is_empty() || times.len() != psi.len() {
            return Err(Error::invalid("times and psi slices must be non-empty and equal in number"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("time stamps must be strictly increasing"));
        }
        if psi.iter().any(|s| s.len() != grid.n_points) {
            return Err(Error::invalid("psi slice length does not match the grid"));
        }
        Ok(WaveField { grid, times, psi })
    }

    pub fn single(grid: GridSpec, t: f64, psi: Vec<Complex64>) -> Result<Self> {
        Self::new(grid, vec![t], vec![psi])
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn density(&self, k: usize) -> Vec<f64> {
        self.psi[k].iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn norm(&self, k: usize) -> f64 {
        self.grid.integrate(&self.density(k))
    }

    /// Checks every stored slice integrates to 1 within `tol`.
    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        for k in 0..self.n_times() {
            let n = self.norm(k);
            if (n - 1.0).abs() > tol {
                return Err(Error::NotNormalized(n));
            }
        }
        Ok(())
    }

    /// Largest `|ψ|` at either grid edge over all slices.
    pub fn boundary_amplitude(&self) -> f64 {
        self.psi
            .iter()
            .map(|s| s[0].norm().max(s[s.len() - 1].norm()))
            .fold(0.0, f64::max)
    }

    /// Mean and variance of `|ψ|²` in slice `k`.
    pub fn position_moments(&self, k: usize) -> (f64, f64) {
        let rho = self.density(k);
        let xs = self.grid.points();
        let w = self.grid.integrate(&rho);
        let m1: Vec<f64> = rho.iter().zip(&xs).map(|(r, x)| r * x).collect();
        let mean = self.grid.integrate(&m1) / w;
        let m2: Vec<f64> = rho
            .iter()
            .zip(&xs)
            .map(|(r, x)| r * (x - mean) * (x - mean))
            .collect();
        (mean, self.grid.integrate(&m2) / w)
    }
}

pub(crate) fn check_truncation(psi: &[Complex64]) -> Result<()> {
    let amp = psi[0].norm().max(psi[psi.len() - 1].norm());
    if amp > BOUNDARY_AMPLITUDE_LIMIT {
        return Err(Error::GridTruncation {
            amplitude: amp,
            threshold: BOUNDARY_AMPLITUDE_LIMIT,
        });
    }
    Ok(())
}

/// Gaussian packet `(2πσ²)^(−1/4) exp(−(x−x₀)²/4σ² + i k₀ x)`.
pub fn gaussian_packet(grid: &GridSpec, x0: f64, k0: f64, sigma: f64) -> Result<Vec<Complex64>> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("packet width must be > 0"));
    }
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
    let psi: Vec<Complex64> = grid
        .points()
        .into_iter()
        .map(|x| {
            let d = x - x0;
            Complex64::from_polar(norm * (-d * d / (4.0 * sigma * sigma)).exp(), k0 * x)
        })
        .collect();
    check_truncation(&psi)?;
    Ok(psi)
}
