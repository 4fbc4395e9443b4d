use log::warn;

use super::driver::DriverSection;
use super::Trajectory;
use crate::dynamics::{project_reduced, reduced_rhs, ReducedDerivative, ReducedState};
use crate::error::Result;
use crate::model::SystemSpec;

/// A reduced state interpolated at a driver-section crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSample {
    pub t: f64,
    pub state: ReducedState,
}

/// Reduced states at the successive returns of the driver to the section
/// through the trajectory's initial driver state. The initial state itself is
/// not included.
///
/// Between two stored states the reduced state is a cubic Hermite
/// interpolant built from the reduced vector field at both ends, and the
/// crossing time is located on that cubic.
pub fn poincare_sections(traj: &Trajectory, spec: &SystemSpec) -> Result<Vec<SectionSample>> {
    let states = traj.states();
    let Some(first) = states.first() else {
        return Ok(Vec::new());
    };
    let section = DriverSection::new(spec, first.z, first.zdot)?;
    let mut tracker = section.tracker();
    let mut out = Vec::new();
    let mut prev = project_reduced(spec, first)?;
    let mut prev_rate = reduced_rhs(spec, &prev)?;
    for (i, w) in states.windows(2).enumerate() {
        let next = project_reduced(spec, &w[1])?;
        let next_rate = reduced_rhs(spec, &next)?;
        let before = tracker;
        if tracker.advance((w[0].z, w[0].zdot), (w[1].z, w[1].zdot)).is_some() {
            let (ta, tb) = (traj.times()[i], traj.times()[i + 1]);
            let seg = Segment { a: &prev, da: &prev_rate, b: &next, db: &next_rate, dt: tb - ta };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let p = seg.at(mid);
                if before.level(p.z, p.zdot) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(SectionSample { t: ta + hi * (tb - ta), state: seg.at(hi) });
        }
        prev = next;
        prev_rate = next_rate;
    }
    if out.len() < 2 {
        warn!("only {} section crossing(s) in a trajectory of length {}", out.len(), states.len());
    }
    Ok(out)
}

struct Segment<'a> {
    a: &'a ReducedState,
    da: &'a ReducedDerivative,
    b: &'a ReducedState,
    db: &'a ReducedDerivative,
    dt: f64,
}

impl Segment<'_> {
    fn at(&self, s: f64) -> ReducedState {
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = (s3 - 2.0 * s2 + s) * self.dt;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = (s3 - s2) * self.dt;
        let mix = |a: f64, da: f64, b: f64, db: f64| h00 * a + h10 * da + h01 * b + h11 * db;
        ReducedState {
            y: &self.a.y * h00 + &self.da.dy * h10 + &self.b.y * h01 + &self.db.dy * h11,
            v: mix(self.a.v, self.da.dv, self.b.v, self.db.dv),
            z: mix(self.a.z, self.da.dz, self.b.z, self.db.dz),
            zdot: mix(self.a.zdot, self.da.dzdot, self.b.zdot, self.db.dzdot),
            eps_coord: mix(self.a.eps_coord, self.da.deps, self.b.eps_coord, self.db.deps),
        }
    }
}
