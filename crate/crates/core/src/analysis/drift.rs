use std::fmt;

use crate::error::{Error, Result};

/// Constants of the bounded/drift rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftThresholds {
    /// Required ratio of the fitted growth to the early error level.
    pub factor: f64,
    /// Relative floor below which growth is never called drift.
    pub floor: f64,
    /// Fraction of the samples forming the early window.
    pub early_fraction: f64,
}

impl Default for DriftThresholds {
    fn default() -> Self {
        DriftThresholds { factor: 1.0, floor: 1e-8, early_fraction: 0.1 }
    }
}

impl DriftThresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.factor >= 0.0
            && self.factor.is_finite()
            && self.floor >= 0.0
            && self.floor.is_finite()
            && self.early_fraction > 0.0
            && self.early_fraction <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid drift thresholds {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DriftClass {
    Bounded,
    Drift,
}

impl DriftClass {
    /// `●` for bounded, `○` for drift.
    pub fn symbol(self) -> char {
        match self {
            DriftClass::Bounded => '●',
            DriftClass::Drift => '○',
        }
    }
}

impl fmt::Display for DriftClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            DriftClass::Bounded => "bounded",
            DriftClass::Drift => "drift",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub name: String,
    pub times: Vec<f64>,
    /// `|I(t) − I(0)|`.
    pub errors: Vec<f64>,
    pub initial: f64,
    pub slope: f64,
    pub early_max: f64,
    pub t_end: f64,
    pub classification: DriftClass,
    pub thresholds: DriftThresholds,
}

impl DriftReport {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Least-squares slope of `e` against `t`.
pub fn least_squares_slope(t: &[f64], e: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let em = e.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (ti, ei) in t.iter().zip(e) {
        num += (ti - tm) * (ei - em);
        den += (ti - tm) * (ti - tm);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Classify the error of an invariant: drift iff the fitted growth over the
/// run exceeds `factor` times the largest error in the early window and
/// `floor·(1 + |I(0)|)`.
pub fn drift_report(name: &str, times: &[f64], values: &[f64], thresholds: DriftThresholds) -> Result<DriftReport> {
    thresholds.validate()?;
    if times.len() != values.len() {
        return Err(Error::InvalidArgument(format!("{} times but {} values", times.len(), values.len())));
    }
    if times.len() < 10 {
        return Err(Error::InvalidArgument(format!("drift report needs at least 10 samples, got {}", times.len())));
    }
    let initial = values[0];
    let errors: Vec<f64> = values.iter().map(|v| (v - initial).abs()).collect();
    Ok(classify(name, times.to_vec(), errors, initial, thresholds))
}

/// As [`drift_report`] for an error series that is already `|I(t) − I(0)|`.
pub fn drift_report_from_errors(
    name: &str,
    times: &[f64],
    errors: &[f64],
    initial: f64,
    thresholds: DriftThresholds,
) -> Result<DriftReport> {
    thresholds.validate()?;
    if times.len() != errors.len() || times.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "drift report needs at least 10 matching samples, got {} times and {} errors",
            times.len(),
            errors.len()
        )));
    }
    Ok(classify(name, times.to_vec(), errors.to_vec(), initial, thresholds))
}

fn classify(name: &str, times: Vec<f64>, errors: Vec<f64>, initial: f64, thresholds: DriftThresholds) -> DriftReport {
    let slope = least_squares_slope(&times, &errors);
    let early = ((errors.len() as f64 * thresholds.early_fraction).floor() as usize).clamp(1, errors.len());
    let early_max = errors[..early].iter().copied().fold(0.0, f64::max);
    let t_end = times[times.len() - 1] - times[0];
    let growth = slope * t_end;
    let drift = growth > thresholds.factor * early_max && growth > thresholds.floor * (1.0 + initial.abs());
    DriftReport {
        name: name.to_string(),
        times,
        errors,
        initial,
        slope,
        early_max,
        t_end,
        classification: if drift { DriftClass::Drift } else { DriftClass::Bounded },
        thresholds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t_end: f64) -> Vec<f64> {
        (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn constant_series_is_bounded() {
        let t = grid(100, 10.0);
        let r = drift_report("H", &t, &[3.0; 100], DriftThresholds::default()).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.classification, DriftClass::Bounded);
    }

    #[test]
    fn linear_growth_is_drift() {
        let t = grid(3001, 3000.0);
        let v: Vec<f64> = t.iter().map(|t| 1.0 + 1e-3 * t).collect();
        let r = drift_report("H", &t, &v, DriftThresholds::default()).unwrap();
        assert!((r.slope - 1e-3).abs() < 1e-12);
        assert_eq!(r.classification, DriftClass::Drift);
    }

    #[test]
    fn too_few_samples() {
        assert!(drift_report("H", &[0.0; 9], &[0.0; 9], DriftThresholds::default()).is_err());
        assert!(drift_report("H", &[0.0; 10], &[0.0; 11], DriftThresholds::default()).is_err());
    }

    #[test]
    fn zero_factor_turns_growth_into_drift() {
        let t = grid(100, 10.0);
        let v: Vec<f64> = t.iter().map(|t| (t * 0.3).sin() * 1e-3 + 1e-4 * t).collect();
        let th = DriftThresholds { factor: 0.0, ..Default::default() };
        assert_eq!(drift_report("h", &t, &v, th).unwrap().classification, DriftClass::Drift);
    }
}
