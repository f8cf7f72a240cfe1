use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// External potential with an analytic force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `m ω² x² / 2`.
    Harmonic { mass: f64, omega: f64 },
    /// `a (x² − b²)²`, minima at `±b`, barrier height `a b⁴`.
    DoubleWell { a: f64, b: f64 },
    /// Eckart-type barrier `V₀ / cosh²((x − x_b)/w)`.
    Barrier { height: f64, width: f64, center: f64 },
    Free,
    /// `Σ c_k x^k`.
    Polynomial { coeffs: Vec<f64> },
}

impl PotentialSpec {
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        PotentialSpec::Harmonic { mass, omega }
    }

    /// `x⁴/4`-type quartic oscillator `c x⁴`.
    pub fn quartic(c: f64) -> Self {
        PotentialSpec::Polynomial {
            coeffs: vec![0.0, 0.0, 0.0, 0.0, c],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("potential parameter {name} is not finite")))
            }
        };
        match self {
            PotentialSpec::Harmonic { mass, omega } => {
                if !(*mass > 0.0) || !(*omega > 0.0) {
                    return Err(Error::invalid("harmonic potential needs mass > 0 and omega > 0"));
                }
                finite(*mass, "mass")?;
                finite(*omega, "omega")
            }
            PotentialSpec::DoubleWell { a, b } => {
                finite(*a, "a")?;
                finite(*b, "b")
            }
            PotentialSpec::Barrier {
                height,
                width,
                center,
            } => {
                finite(*height, "height")?;
                finite(*center, "center")?;
                if !(*width > 0.0) || !width.is_finite() {
                    return Err(Error::invalid("barrier width must be > 0"));
                }
                Ok(())
            }
            PotentialSpec::Free => Ok(()),
            PotentialSpec::Polynomial { coeffs } => {
                for (k, c) in coeffs.iter().enumerate() {
                    finite(*c, &format!("c{k}"))?;
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Harmonic { mass, omega } => 0.5 * mass * omega * omega * x * x,
            PotentialSpec::DoubleWell { a, b } => {
                let d = x * x - b * b;
                a * d * d
            }
            PotentialSpec::Barrier {
                height,
                width,
                center,
            } => {
                let c = ((x - center) / width).cosh();
                height / (c * c)
            }
            PotentialSpec::Free => 0.0,
            PotentialSpec::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
        }
    }

    /// `F(x) = −dV/dx`.
    pub fn force(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Harmonic { mass, omega } => -mass * omega * omega * x,
            PotentialSpec::DoubleWell { a, b } => -4.0 * a * x * (x * x - b * b),
            PotentialSpec::Barrier {
                height,
                width,
                center,
            } => {
                let s = (x - center) / width;
                let c = s.cosh();
                2.0 * height * s.tanh() / (width * c * c)
            }
            PotentialSpec::Free => 0.0,
            PotentialSpec::Polynomial { coeffs } => {
                let mut d = 0.0;
                for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
                    d = d * x + k as f64 * c;
                }
                -d
            }
        }
    }

    pub fn sample(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.value(x)).collect()
    }

    /// Position of the minimum of V over a sampled set of points (first on ties).
    pub fn argmin_on(&self, xs: &[f64]) -> usize {
        let mut best = 0;
        let mut vmin = f64::INFINITY;
        for (i, &x) in xs.iter().enumerate() {
            let v = self.value(x);
            if v < vmin {
                vmin = v;
                best = i;
            }
        }
        best
    }
}
