//! The one-degree-of-freedom driver: regime, period and Poincaré section.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{SystemId, SystemSpec};

/// Internal step of the driver reference integration.
const DRIVER_DT: f64 = 1e-3;
/// Longest period searched for before giving up.
const MAX_PERIOD: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DriverRegime {
    /// Closed level set: `z` swings between two turning points.
    Oscillating,
    /// `ż` never vanishes and `z` advances by `2π` per period.
    Rotating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverOrbit {
    pub z0: f64,
    pub zdot0: f64,
    pub energy: f64,
    pub regime: DriverRegime,
    pub period: f64,
}

impl DriverOrbit {
    /// `ω = 1/T`.
    pub fn frequency(&self) -> f64 {
        1.0 / self.period
    }
}

fn free_driver(spec: &SystemSpec) -> bool {
    matches!(spec.id(), SystemId::KnifeEdge | SystemId::VerticalDisk)
}

pub fn classify_driver(spec: &SystemSpec, z0: f64, zdot0: f64) -> Result<DriverRegime> {
    if !(z0.is_finite() && zdot0.is_finite()) {
        return Err(Error::InvalidArgument(format!("driver state ({z0}, {zdot0}) is not finite")));
    }
    if free_driver(spec) {
        return if zdot0 != 0.0 {
            Ok(DriverRegime::Rotating)
        } else {
            Err(Error::NonPeriodicDriver("free driver at rest".into()))
        };
    }
    if zdot0 == 0.0 && spec.driver_potential_dz(z0).abs() < 1e-14 {
        return Err(Error::NonPeriodicDriver(format!("driver at equilibrium z = {z0}")));
    }
    let energy = 0.5 * zdot0 * zdot0 + spec.driver_potential(z0);
    match spec.max_driver_potential() {
        None => Ok(DriverRegime::Oscillating),
        Some(max) => {
            if (energy - max).abs() <= 1e-9 * (1.0 + energy.abs()) {
                Err(Error::Separatrix { energy, max_potential: max })
            } else if energy > max {
                Ok(DriverRegime::Rotating)
            } else {
                Ok(DriverRegime::Oscillating)
            }
        }
    }
}

/// Section through the initial driver state.
///
/// Oscillating drivers use the line through `(z₀, ż₀)` normal to the driver
/// vector field, crossed in the direction of motion; rotating drivers use
/// `z = z₀ + 2πk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverSection {
    regime: DriverRegime,
    z0: f64,
    zdot0: f64,
    normal: (f64, f64),
    direction: f64,
}

impl DriverSection {
    pub fn new(spec: &SystemSpec, z0: f64, zdot0: f64) -> Result<Self> {
        let regime = classify_driver(spec, z0, zdot0)?;
        let normal = (zdot0, -spec.driver_potential_dz(z0));
        Ok(DriverSection { regime, z0, zdot0, normal, direction: zdot0.signum() })
    }

    pub fn regime(&self) -> DriverRegime {
        self.regime
    }

    /// Signed section coordinate. For rotating drivers this is the phase
    /// `(z − z₀)·sign ż₀`, crossed at every multiple of `2π`.
    pub fn coordinate(&self, z: f64, zdot: f64) -> f64 {
        match self.regime {
            DriverRegime::Oscillating => self.normal.0 * (z - self.z0) + self.normal.1 * (zdot - self.zdot0),
            DriverRegime::Rotating => (z - self.z0) * self.direction,
        }
    }

    pub fn tracker(&self) -> SectionTracker {
        SectionTracker { section: *self, crossings: 0 }
    }
}

/// Counts successive crossings of a [`DriverSection`].
#[derive(Debug, Clone, Copy)]
pub struct SectionTracker {
    section: DriverSection,
    crossings: usize,
}

impl SectionTracker {
    pub fn crossings(&self) -> usize {
        self.crossings
    }

    /// Section coordinate shifted so that the next crossing is at zero.
    pub fn level(&self, z: f64, zdot: f64) -> f64 {
        let g = self.section.coordinate(z, zdot);
        match self.section.regime {
            DriverRegime::Oscillating => g,
            DriverRegime::Rotating => g - 2.0 * PI * (self.crossings + 1) as f64,
        }
    }

    /// Whether the segment from `a` to `b` crosses the section; records the
    /// crossing and returns the linear interpolation fraction.
    pub fn advance(&mut self, a: (f64, f64), b: (f64, f64)) -> Option<f64> {
        let ga = self.level(a.0, a.1);
        let gb = self.level(b.0, b.1);
        if ga < 0.0 && gb >= 0.0 {
            self.crossings += 1;
            Some(ga / (ga - gb))
        } else {
            None
        }
    }
}

fn driver_rk4(spec: &SystemSpec, z: f64, zdot: f64, dt: f64) -> (f64, f64) {
    let f = |z: f64, w: f64| (w, -spec.driver_potential_dz(z));
    let k1 = f(z, zdot);
    let k2 = f(z + 0.5 * dt * k1.0, zdot + 0.5 * dt * k1.1);
    let k3 = f(z + 0.5 * dt * k2.0, zdot + 0.5 * dt * k2.1);
    let k4 = f(z + dt * k3.0, zdot + dt * k3.1);
    (z + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0), zdot + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1))
}

/// Integrate the driver alone with `steps` RK4 steps of size `dt`, returning
/// every state including the initial one.
pub fn driver_samples(spec: &SystemSpec, z0: f64, zdot0: f64, dt: f64, steps: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = (z0, zdot0);
    out.push(s);
    for _ in 0..steps {
        s = driver_rk4(spec, s.0, s.1, dt);
        out.push(s);
    }
    out
}

/// Cubic Hermite interpolation of the driver on `[0, dt]`, evaluated at `s·dt`.
fn hermite(spec: &SystemSpec, a: (f64, f64), b: (f64, f64), dt: f64, s: f64) -> (f64, f64) {
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    let (da, db) = (-spec.driver_potential_dz(a.0), -spec.driver_potential_dz(b.0));
    (h00 * a.0 + h10 * dt * a.1 + h01 * b.0 + h11 * dt * b.1, h00 * a.1 + h10 * dt * da + h01 * b.1 + h11 * dt * db)
}

/// Find the root of `g` on the Hermite segment by bisection.
fn refine<G: Fn((f64, f64)) -> f64>(spec: &SystemSpec, a: (f64, f64), b: (f64, f64), dt: f64, g: G) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    let g_lo = g(a);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let gm = g(hermite(spec, a, b, dt, mid));
        if (gm < 0.0) == (g_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn driver_orbit(spec: &SystemSpec, z0: f64, zdot0: f64) -> Result<DriverOrbit> {
    let regime = classify_driver(spec, z0, zdot0)?;
    let energy = 0.5 * zdot0 * zdot0 + spec.driver_potential(z0);
    if free_driver(spec) {
        return Ok(DriverOrbit { z0, zdot0, energy, regime, period: 2.0 * PI / zdot0.abs() });
    }
    let section = DriverSection::new(spec, z0, zdot0)?;
    let mut tracker = section.tracker();
    let mut state = (z0, zdot0);
    let mut t = 0.0;
    while t < MAX_PERIOD {
        let next = driver_rk4(spec, state.0, state.1, DRIVER_DT);
        let probe = tracker;
        if tracker.advance(state, next).is_some() {
            let s = refine(spec, state, next, DRIVER_DT, |p| probe.level(p.0, p.1));
            return Ok(DriverOrbit { z0, zdot0, energy, regime, period: t + s * DRIVER_DT });
        }
        state = next;
        t += DRIVER_DT;
    }
    Err(Error::NonPeriodicDriver(format!("no return to the section within t = {MAX_PERIOD}")))
}

pub fn driver_period(spec: &SystemSpec, z0: f64, zdot0: f64) -> Result<f64> {
    Ok(driver_orbit(spec, z0, zdot0)?.period)
}

/// First time `ż` changes sign along an oscillating driver, with the state
/// there; `(0, z₀)` when `ż₀ = 0`.
pub fn turning_point(spec: &SystemSpec, z0: f64, zdot0: f64) -> Result<(f64, f64)> {
    if zdot0 == 0.0 {
        return Ok((0.0, z0));
    }
    let sign = zdot0.signum();
    let mut state = (z0, zdot0);
    let mut t = 0.0;
    while t < MAX_PERIOD {
        let next = driver_rk4(spec, state.0, state.1, DRIVER_DT);
        if next.1 * sign <= 0.0 {
            let s = refine(spec, state, next, DRIVER_DT, |p| p.1 * sign);
            let p = hermite(spec, state, next, DRIVER_DT, s);
            return Ok((t + s * DRIVER_DT, p.0));
        }
        state = next;
        t += DRIVER_DT;
    }
    Err(Error::NonPeriodicDriver("driver velocity never vanishes".into()))
}
