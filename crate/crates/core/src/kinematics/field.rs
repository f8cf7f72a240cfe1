//! Velocity fields `(v, u)` that drive the Nelson diffusions.

use crate::error::{Error, Result};
use crate::state::{CoherentStateSpec, GridSpec, MadelungFields};

/// Drift (current) velocity `v` and osmotic velocity `u` as functions of `(x, t)`.
///
/// `velocities` is only called with `x` inside `grid()` and `t` inside
/// `time_range()`; range checks happen in [`interpolate_velocity`] and in the
/// samplers.
pub trait VelocityField: Sync {
    fn grid(&self) -> &GridSpec;
    fn time_range(&self) -> (f64, f64);
    fn velocities(&self, x: f64, t: f64) -> (f64, f64);
}

/// Range-checked evaluation of a velocity field.
pub fn interpolate_velocity<F: VelocityField + ?Sized>(field: &F, x: f64, t: f64) -> Result<(f64, f64)> {
    let (t_min, t_max) = field.time_range();
    if !(t >= t_min && t <= t_max) {
        return Err(Error::TimeOutOfRange { t, t_min, t_max });
    }
    if !field.grid().contains(x) {
        return Err(Error::invalid(format!("x = {x} outside the field grid")));
    }
    Ok(field.velocities(x, t))
}

/// Locates `t` among sorted `times`: slice index `k` and weight of slice `k + 1`.
#[inline]
pub(crate) fn locate_time(times: &[f64], t: f64) -> (usize, f64) {
    if times.len() == 1 {
        return (0, 0.0);
    }
    let k = times.partition_point(|&s| s <= t).saturating_sub(1).min(times.len() - 2);
    let w = ((t - times[k]) / (times[k + 1] - times[k])).clamp(0.0, 1.0);
    (k, w)
}

/// Linear interpolation that returns the end values exactly at `w = 0` and `w = 1`.
#[inline]
pub(crate) fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 1.0 {
        b
    } else {
        a + w * (b - a)
    }
}

impl VelocityField for MadelungFields {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn time_range(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    /// Bilinear: linear in `x` within the grid cell, linear in `t` between slices.
    fn velocities(&self, x: f64, t: f64) -> (f64, f64) {
        let (i, a) = self.grid.locate(x);
        let (k, w) = locate_time(&self.times, t);
        let lerp_x = |row: &[f64]| lerp(row[i], row[i + 1], a);
        if w == 0.0 || w == 1.0 {
            let k = if w == 0.0 { k } else { k + 1 };
            return (lerp_x(&self.drift[k]), lerp_x(&self.osmotic[k]));
        }
        let v = lerp(lerp_x(&self.drift[k]), lerp_x(&self.drift[k + 1]), w);
        let u = lerp(lerp_x(&self.osmotic[k]), lerp_x(&self.osmotic[k + 1]), w);
        (v, u)
    }
}

/// Closed-form coherent-state velocities on a bounded domain.
#[derive(Debug, Clone)]
pub struct CoherentField {
    pub spec: CoherentStateSpec,
    pub grid: GridSpec,
    pub t_range: (f64, f64),
}

impl VelocityField for CoherentField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn time_range(&self) -> (f64, f64) {
        self.t_range
    }

    fn velocities(&self, x: f64, t: f64) -> (f64, f64) {
        let c = self.spec.velocity_fields(t);
        (c.v(x), c.u(x))
    }
}

/// Time-independent field with `v ≡ 0` and a tabulated osmotic velocity.
#[derive(Debug, Clone)]
pub struct StationaryField {
    pub grid: GridSpec,
    pub osmotic: Vec<f64>,
}

impl StationaryField {
    pub fn new(grid: GridSpec, osmotic: Vec<f64>) -> Result<Self> {
        if osmotic.len() != grid.n_points {
            return Err(Error::invalid("osmotic profile length does not match the grid"));
        }
        if osmotic.iter().any(|u| !u.is_finite()) {
            return Err(Error::invalid("osmotic profile must be finite"));
        }
        Ok(StationaryField { grid, osmotic })
    }
}

impl VelocityField for StationaryField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn time_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn velocities(&self, x: f64, _t: f64) -> (f64, f64) {
        let (i, a) = self.grid.locate(x);
        let u = lerp(self.osmotic[i], self.osmotic[i + 1], a);
        (0.0, u)
    }
}

/// Spatially uniform `(v, u)`, valid for all times.
#[derive(Debug, Clone)]
pub struct UniformField {
    pub grid: GridSpec,
    pub v: f64,
    pub u: f64,
}

impl VelocityField for UniformField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn time_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn velocities(&self, _x: f64, _t: f64) -> (f64, f64) {
        (self.v, self.u)
    }
}

/// Which velocity a perturbation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityComponent {
    Drift,
    Osmotic,
}

/// `base + amplitude · shape(x)` added to one velocity component.
pub struct PerturbedField<'a, F: VelocityField + ?Sized, S: Fn(f64) -> f64 + Sync> {
    pub base: &'a F,
    pub target: VelocityComponent,
    pub shape: S,
    pub amplitude: f64,
}

impl<F: VelocityField + ?Sized, S: Fn(f64) -> f64 + Sync> VelocityField for PerturbedField<'_, F, S> {
    fn grid(&self) -> &GridSpec {
        self.base.grid()
    }

    fn time_range(&self) -> (f64, f64) {
        self.base.time_range()
    }

    fn velocities(&self, x: f64, t: f64) -> (f64, f64) {
        let (v, u) = self.base.velocities(x, t);
        let d = self.amplitude * (self.shape)(x);
        match self.target {
            VelocityComponent::Drift => (v + d, u),
            VelocityComponent::Osmotic => (v, u + d),
        }
    }
}
