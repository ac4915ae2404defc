//! Step-size schedules.

use crate::error::{Error, Result};

/// Step size as a function of the round index. Every emitted value is
/// strictly positive; constructors reject parameters that could violate
/// that.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// alpha_k = alpha.
    Constant { alpha: f64 },
    /// alpha_k = scale / (k + offset), the classic diminishing schedule.
    Harmonic { scale: f64, offset: u64 },
}

impl StepSchedule {
    pub fn constant(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "constant step size must be positive and finite, got {alpha}"
            )));
        }
        Ok(StepSchedule::Constant { alpha })
    }

    pub fn harmonic(scale: f64, offset: u64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "harmonic scale must be positive and finite, got {scale}"
            )));
        }
        if offset == 0 {
            return Err(Error::InvalidParameter(
                "harmonic offset must be at least 1 so that alpha_0 is finite".into(),
            ));
        }
        Ok(StepSchedule::Harmonic { scale, offset })
    }

    pub fn at(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::Harmonic { scale, offset } => scale / (k + offset) as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_schedule_is_flat() {
        let s = StepSchedule::constant(0.05).unwrap();
        assert_eq!(s.at(0), 0.05);
        assert_eq!(s.at(1_000_000), 0.05);
    }

    #[test]
    fn harmonic_schedule_decays_as_one_over_k() {
        let s = StepSchedule::harmonic(2.0, 1).unwrap();
        assert_eq!(s.at(0), 2.0);
        assert_eq!(s.at(1), 1.0);
        assert_eq!(s.at(19), 0.1);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(StepSchedule::constant(0.0).is_err());
        assert!(StepSchedule::constant(-1.0).is_err());
        assert!(StepSchedule::constant(f64::NAN).is_err());
        assert!(StepSchedule::harmonic(1.0, 0).is_err());
        assert!(StepSchedule::harmonic(-1.0, 1).is_err());
    }

    #[test]
    fn emitted_steps_stay_positive() {
        let schedules = [
            StepSchedule::constant(1e-8).unwrap(),
            StepSchedule::harmonic(5.0, 3).unwrap(),
        ];
        for s in schedules {
            for k in (0..10_000_000).step_by(99_991) {
                assert!(s.at(k) > 0.0);
            }
        }
    }
}
