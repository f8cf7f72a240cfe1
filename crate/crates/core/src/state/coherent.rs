use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{GridSpec, PhysicalParams};
use super::wavefield::check_truncation;
use crate::error::{Error, Result};

/// Coherent state of the harmonic oscillator with mean excitation `n_mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentStateSpec {
    pub omega: f64,
    pub n_mean: f64,
    pub params: PhysicalParams,
}

impl CoherentStateSpec {
    pub fn new(omega: f64, n_mean: f64, params: PhysicalParams) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::invalid(format!("omega must be > 0, got {omega}")));
        }
        if !(n_mean >= 0.0) || !n_mean.is_finite() {
            return Err(Error::invalid(format!("n_mean must be ≥ 0, got {n_mean}")));
        }
        Ok(CoherentStateSpec {
            omega,
            n_mean,
            params,
        })
    }

    pub fn ground(omega: f64, params: PhysicalParams) -> Result<Self> {
        Self::new(omega, 0.0, params)
    }

    /// `√(ħ / 2mω)`.
    pub fn x_zpf(&self) -> f64 {
        (self.params.hbar / (2.0 * self.params.mass * self.omega)).sqrt()
    }

    /// `√(ħ m ω / 2)`.
    pub fn p_zpf(&self) -> f64 {
        (self.params.hbar * self.params.mass * self.omega / 2.0).sqrt()
    }

    /// Classical phase-space point `(x_cl(t), p_cl(t))`.
    pub fn classical_trajectory(&self, t: f64) -> (f64, f64) {
        let a = 2.0 * self.n_mean.sqrt();
        let (s, c) = (self.omega * t).sin_cos();
        (a * self.x_zpf() * s, a * self.p_zpf() * c)
    }

    /// `⟨n⟩ ħ ω`.
    pub fn classical_energy(&self) -> f64 {
        self.n_mean * self.params.hbar * self.omega
    }

    /// Mean energy of the state: zero-point part plus the classical motion.
    pub fn mean_energy(&self) -> f64 {
        0.5 * self.params.hbar * self.omega + self.classical_energy()
    }

    /// Closed-form amplitude at time `t` on `grid`.
    pub fn wavefunction(&self, t: f64, grid: &GridSpec) -> Result<Vec<Complex64>> {
        let xz2 = self.x_zpf().powi(2);
        let hbar = self.params.hbar;
        let (xc, pc) = self.classical_trajectory(t);
        let norm = (2.0 * std::f64::consts::PI * xz2).powf(-0.25);
        let psi: Vec<Complex64> = grid
            .points()
            .into_iter()
            .map(|x| {
                let d = x - xc;
                let amp = norm * (-d * d / (4.0 * xz2)).exp();
                let phase = (x * pc - 0.5 * xc * pc) / hbar - 0.5 * self.omega * t;
                Complex64::from_polar(amp, phase)
            })
            .collect();
        check_truncation(&psi)?;
        Ok(psi)
    }

    pub fn velocity_fields(&self, t: f64) -> CoherentVelocity {
        let (x_cl, p_cl) = self.classical_trajectory(t);
        CoherentVelocity {
            drift: p_cl / self.params.mass,
            x_cl,
            omega: self.omega,
        }
    }

    pub fn harmonic_potential(&self) -> super::potential::PotentialSpec {
        super::potential::PotentialSpec::harmonic(self.params.mass, self.omega)
    }
}

/// Closed-form drift and osmotic velocities of a coherent state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentVelocity {
    pub drift: f64,
    pub x_cl: f64,
    pub omega: f64,
}

impl CoherentVelocity {
    #[inline]
    pub fn v(&self, _x: f64) -> f64 {
        self.drift
    }

    #[inline]
    pub fn u(&self, x: f64) -> f64 {
        -self.omega * (x - self.x_cl)
    }
}

/// Harmonic-oscillator eigenstate `level ∈ {0, 1}` at time `t` (phase `e^{−iE t/ħ}`).
pub fn harmonic_eigenstate(
    level: u32,
    omega: f64,
    params: PhysicalParams,
    t: f64,
    grid: &GridSpec,
) -> Result<Vec<Complex64>> {
    if level > 1 {
        return Err(Error::invalid("only levels 0 and 1 are provided in closed form"));
    }
    let spec = CoherentStateSpec::ground(omega, params)?;
    let xz = spec.x_zpf();
    let norm = (2.0 * std::f64::consts::PI * xz * xz).powf(-0.25);
    let energy = (level as f64 + 0.5) * params.hbar * omega;
    let phase = Complex64::from_polar(1.0, -energy * t / params.hbar);
    let psi: Vec<Complex64> = grid
        .points()
        .into_iter()
        .map(|x| {
            let g = norm * (-x * x / (4.0 * xz * xz)).exp();
            let a = match level {
                0 => g,
                1 => g * x / xz,
                _ => unreachable!(),
            };
            phase * a
        })
        .collect();
    check_truncation(&psi)?;
    Ok(psi)
}
