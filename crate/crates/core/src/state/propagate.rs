//! Crank–Nicolson integration of `iħ ∂ₜψ = (−ħ²/2m ∂ₓ² + V) ψ` with
//! homogeneous Dirichlet edges.
//!
//! The system `(1 + i dt H / 2ħ) ψⁿ⁺¹ = (1 − i dt H / 2ħ) ψⁿ` is tridiagonal
//! over the interior nodes. The LU factors of the left-hand matrix are
//! computed once and reused for every step.

use num_complex::Complex64;

use super::grid::{GridSpec, PhysicalParams};
use super::potential::PotentialSpec;
use super::wavefield::{WaveField, BOUNDARY_AMPLITUDE_LIMIT, NORM_TOLERANCE};
use crate::error::{Error, Result};

/// Density at the first/last interior node that counts as leakage.
pub const LEAKAGE_DENSITY: f64 = 1e-6;

pub struct CrankNicolson {
    grid: GridSpec,
    /// Off-diagonal of `i dt H / 2ħ`.
    off: Complex64,
    /// Diagonal of `i dt H / 2ħ` on interior nodes.
    diag: Vec<Complex64>,
    /// Modified super-diagonal of the Thomas factorization.
    c_prime: Vec<Complex64>,
    /// Reciprocal pivots of the Thomas factorization.
    inv_pivot: Vec<Complex64>,
}

impl CrankNicolson {
    pub fn new(grid: &GridSpec, potential: &PotentialSpec, params: PhysicalParams) -> Result<Self> {
        potential.validate()?;
        let limit = grid.dx * grid.dx * params.mass / params.hbar;
        if grid.dt_pde > limit {
            return Err(Error::StabilityGuard {
                dt: grid.dt_pde,
                limit,
            });
        }
        let dt = grid.dt_pde;
        let kin = params.hbar * params.hbar / (2.0 * params.mass * grid.dx * grid.dx);
        let scale = Complex64::new(0.0, dt / (2.0 * params.hbar));
        let off = scale * (-kin);
        let n_in = grid.n_points - 2;
        let diag: Vec<Complex64> = (1..=n_in)
            .map(|i| scale * (2.0 * kin + potential.value(grid.x(i))))
            .collect();

        let mut c_prime = vec![Complex64::new(0.0, 0.0); n_in];
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); n_in];
        let one = Complex64::new(1.0, 0.0);
        for i in 0..n_in {
            let pivot = if i == 0 {
                one + diag[0]
            } else {
                one + diag[i] - off * c_prime[i - 1]
            };
            inv_pivot[i] = pivot.inv();
            c_prime[i] = off * inv_pivot[i];
        }
        Ok(CrankNicolson {
            grid: grid.clone(),
            off,
            diag,
            c_prime,
            inv_pivot,
        })
    }

    /// One step in place; edge nodes are held at zero.
    pub fn step(&self, psi: &mut [Complex64], rhs: &mut [Complex64]) {
        let n = psi.len();
        let n_in = n - 2;
        let one = Complex64::new(1.0, 0.0);
        // rhs = (1 - iHdt/2ħ) ψ on interior nodes
        for j in 0..n_in {
            let i = j + 1;
            rhs[j] = (one - self.diag[j]) * psi[i] - self.off * (psi[i - 1] + psi[i + 1]);
        }
        // forward sweep
        rhs[0] *= self.inv_pivot[0];
        for j in 1..n_in {
            rhs[j] = (rhs[j] - self.off * rhs[j - 1]) * self.inv_pivot[j];
        }
        // back substitution
        for j in (0..n_in - 1).rev() {
            let next = rhs[j + 1];
            rhs[j] -= self.c_prime[j] * next;
        }
        psi[0] = Complex64::new(0.0, 0.0);
        psi[n - 1] = Complex64::new(0.0, 0.0);
        psi[1..n - 1].copy_from_slice(&rhs[..n_in]);
    }

    /// Propagates `psi0` from `t0` for `n_steps`, storing every `save_every`-th
    /// slice (the initial and final slices are always stored).
    pub fn propagate(
        &self,
        psi0: &[Complex64],
        t0: f64,
        n_steps: usize,
        save_every: usize,
    ) -> Result<WaveField> {
        let grid = &self.grid;
        if psi0.len() != grid.n_points {
            return Err(Error::invalid("initial state does not match the grid"));
        }
        if save_every == 0 {
            return Err(Error::invalid("save_every must be ≥ 1"));
        }
        let edge = psi0[0].norm().max(psi0[grid.n_points - 1].norm());
        if edge > BOUNDARY_AMPLITUDE_LIMIT {
            return Err(Error::GridTruncation {
                amplitude: edge,
                threshold: BOUNDARY_AMPLITUDE_LIMIT,
            });
        }
        let rho0: Vec<f64> = psi0.iter().map(|c| c.norm_sqr()).collect();
        let norm0 = grid.integrate(&rho0);
        if (norm0 - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm0));
        }

        let mut psi = psi0.to_vec();
        let n = psi.len();
        psi[0] = Complex64::new(0.0, 0.0);
        psi[n - 1] = Complex64::new(0.0, 0.0);
        let mut rhs = vec![Complex64::new(0.0, 0.0); n - 2];
        let mut times = vec![t0];
        let mut slices = vec![psi.clone()];
        for s in 1..=n_steps {
            self.step(&mut psi, &mut rhs);
            let t = t0 + s as f64 * grid.dt_pde;
            let edge = psi[1].norm_sqr().max(psi[n - 2].norm_sqr());
            if edge > LEAKAGE_DENSITY {
                return Err(Error::BoundaryLeakage {
                    time: t,
                    density: edge,
                });
            }
            if s % save_every == 0 || s == n_steps {
                times.push(t);
                slices.push(psi.clone());
            }
        }
        WaveField::new(grid.clone(), times, slices)
    }
}

/// Convenience wrapper: propagate the last slice of `initial` for `n_steps`.
pub fn propagate_crank_nicolson(
    initial: &WaveField,
    potential: &PotentialSpec,
    params: PhysicalParams,
    n_steps: usize,
    save_every: usize,
) -> Result<WaveField> {
    let cn = CrankNicolson::new(&initial.grid, potential, params)?;
    let k = initial.n_times() - 1;
    cn.propagate(&initial.psi[k], initial.times[k], n_steps, save_every)
}
