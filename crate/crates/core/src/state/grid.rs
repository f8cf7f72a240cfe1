use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform 1D grid over configuration space plus the PDE time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dx: f64,
    pub dt_pde: f64,
}

pub const MIN_GRID_POINTS: usize = 16;

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_points: usize, dt_pde: f64) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::invalid("grid bounds must be finite"));
        }
        if x_max <= x_min {
            return Err(Error::InvertedBounds { x_min, x_max });
        }
        if n_points < MIN_GRID_POINTS {
            return Err(Error::invalid(format!(
                "n_points = {n_points} is below the minimum of {MIN_GRID_POINTS}"
            )));
        }
        if !(dt_pde > 0.0) || !dt_pde.is_finite() {
            return Err(Error::invalid(format!("dt_pde = {dt_pde} must be positive")));
        }
        let dx = (x_max - x_min) / (n_points - 1) as f64;
        Ok(GridSpec {
            x_min,
            x_max,
            n_points,
            dx,
            dt_pde,
        })
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Cell index `i` with `x_i <= x < x_{i+1}` and fractional offset in [0, 1].
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let mut s = ((x - self.x_min) / self.dx).max(0.0);
        // positions produced by `x(i)` land back on node `i`
        let r = s.round();
        if (s - r).abs() < 1e-9 {
            s = r;
        }
        let i = (s.floor() as usize).min(self.n_points - 2);
        (i, (s - i as f64).min(1.0))
    }

    /// Piecewise-linear interpolation of nodal values, clamped to the grid.
    pub fn interpolate(&self, f: &[f64], x: f64) -> f64 {
        let (i, a) = self.locate(x.clamp(self.x_min, self.x_max));
        if a == 0.0 {
            f[i]
        } else if a == 1.0 {
            f[i + 1]
        } else {
            f[i] + a * (f[i + 1] - f[i])
        }
    }

    /// Trapezoid rule over the whole grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n_points);
        let n = f.len();
        let inner: f64 = crate::numerics::sum(&f[1..n - 1]);
        self.dx * (inner + 0.5 * (f[0] + f[n - 1]))
    }

    /// Cumulative trapezoid integral, starting at 0.
    pub fn cumulative(&self, f: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(f.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in f.windows(2) {
            acc += 0.5 * self.dx * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    /// Central first derivative; second-order one-sided stencils at the ends.
    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let h = self.dx;
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
        }
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
        d
    }

    /// Refined grid with half the spacing over the same interval (coarse nodes are kept).
    /// Same nodes with a different PDE time step.
    pub fn with_dt_pde(&self, dt_pde: f64) -> Result<Self> {
        GridSpec::new(self.x_min, self.x_max, self.n_points, dt_pde)
    }

    pub fn refined(&self, dt_pde: f64) -> Result<Self> {
        GridSpec::new(self.x_min, self.x_max, 2 * self.n_points - 1, dt_pde)
    }
}

/// Mass and reduced Planck constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub hbar: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            mass: 1.0,
            hbar: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn new(mass: f64, hbar: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid(format!("mass must be > 0, got {mass}")));
        }
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::invalid(format!("hbar must be > 0, got {hbar}")));
        }
        Ok(PhysicalParams { mass, hbar })
    }

    /// Variance rate ħ/m of the Wiener term.
    #[inline]
    pub fn diffusion(&self) -> f64 {
        self.hbar / self.mass
    }

    #[inline]
    pub fn noise_amplitude(&self) -> f64 {
        self.diffusion().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_matches_arithmetic() {
        let g = GridSpec::new(-10.0, 10.0, 2001, 1e-3).unwrap();
        assert!((g.dx - 0.01).abs() < 1e-15);
        let g = GridSpec::new(0.0, 1.0, 16, 1e-4).unwrap();
        assert!((g.dx - 1.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            GridSpec::new(5.0, -5.0, 100, 1e-3),
            Err(Error::InvertedBounds { .. })
        ));
        assert!(GridSpec::new(f64::NAN, 1.0, 100, 1e-3).is_err());
        assert!(GridSpec::new(0.0, f64::INFINITY, 100, 1e-3).is_err());
        assert!(GridSpec::new(0.0, 1.0, 15, 1e-3).is_err());
        assert!(GridSpec::new(0.0, 1.0, 16, 0.0).is_err());
        assert!(GridSpec::new(0.0, 1.0, 16, -1.0).is_err());
    }

    #[test]
    fn locate_and_integrate() {
        let g = GridSpec::new(0.0, 1.0, 101, 1e-3).unwrap();
        let (i, f) = g.locate(0.255);
        assert_eq!(i, 25);
        assert!((f - 0.5).abs() < 1e-9);
        assert_eq!(g.locate(1.0).0, 99);
        let ones = vec![1.0; 101];
        assert!((g.integrate(&ones) - 1.0).abs() < 1e-14);
        let c = g.cumulative(&ones);
        assert!((c[100] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn physical_params_validate() {
        assert!(PhysicalParams::new(0.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, -1.0).is_err());
        let p = PhysicalParams::new(2.0, 1.0).unwrap();
        assert_eq!(p.diffusion(), 0.5);
    }
}
