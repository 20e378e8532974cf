//! Triangular cyclical learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Oscillates linearly between `base_lr` and `max_lr` with period
/// `2 * step_size` iterations, starting at `base_lr`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClrSchedule {
    pub base_lr: f64,
    pub max_lr: f64,
    pub step_size: u64,
}

impl ClrSchedule {
    pub fn new(base_lr: f64, max_lr: f64, step_size: u64) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr <= max_lr) {
            return Err(Error::InvalidConfig(format!(
                "require 0 < base_lr <= max_lr, got base {base_lr}, max {max_lr}"
            )));
        }
        if step_size == 0 {
            return Err(Error::InvalidConfig("step_size must be >= 1".into()));
        }
        Ok(ClrSchedule {
            base_lr,
            max_lr,
            step_size,
        })
    }

    /// Learning rate at a 0-based iteration index.
    pub fn rate(&self, iteration: u64) -> f64 {
        let step = self.step_size as f64;
        let pos = iteration as f64 / step;
        let cycle = (iteration / (2 * self.step_size)) as f64;
        // Distance from the peak of the current triangle, in [0, 1].
        let x = (pos - 2.0 * cycle - 1.0).abs();
        self.base_lr + (self.max_lr - self.base_lr) * (1.0 - x).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper_schedule() -> ClrSchedule {
        ClrSchedule::new(0.001, 0.005, 5500).unwrap()
    }

    #[test]
    fn starts_at_base_rate() {
        assert_eq!(paper_schedule().rate(0), 0.001);
    }

    #[test]
    fn peaks_at_one_step() {
        assert_eq!(paper_schedule().rate(5500), 0.005);
    }

    #[test]
    fn midpoint_is_halfway() {
        assert_relative_eq!(paper_schedule().rate(2750), 0.003, epsilon = 1e-15);
    }

    #[test]
    fn periodic_and_bounded() {
        let s = ClrSchedule::new(0.01, 0.05, 7).unwrap();
        for i in 0..100u64 {
            let lr = s.rate(i);
            assert!(lr >= s.base_lr && lr <= s.max_lr);
            assert_relative_eq!(lr, s.rate(i + 14), epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ClrSchedule::new(0.0, 0.1, 5).is_err());
        assert!(ClrSchedule::new(0.2, 0.1, 5).is_err());
        assert!(ClrSchedule::new(0.1, 0.2, 0).is_err());
    }
}
