//! Ambient temperature profiles driving the sheets.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ThermalProfile {
    /// Starts at `t_min`, ramps to `t_max` and back at `|dT/dt| = rate`.
    Triangle {
        t_min: f64,
        t_max: f64,
        rate: f64,
        phase: f64,
    },
    /// `mid − amp·cos(2π(t + phase)/period)`, so it also starts at `t_min`.
    Sine {
        t_min: f64,
        t_max: f64,
        period: f64,
        phase: f64,
    },
    /// Piecewise-linear replay of `(time s, temperature °C)` samples.
    Table { samples: Vec<(f64, f64)> },
}

impl Default for ThermalProfile {
    fn default() -> Self {
        ThermalProfile::Triangle {
            t_min: 40.0,
            t_max: 50.0,
            rate: 0.1,
            phase: 0.0,
        }
    }
}

impl ThermalProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            ThermalProfile::Triangle {
                t_min,
                t_max,
                rate,
                phase,
            } => {
                check_band(*t_min, *t_max)?;
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(Error::invalid("triangle rate must be > 0"));
                }
                check_phase(*phase)
            }
            ThermalProfile::Sine {
                t_min,
                t_max,
                period,
                phase,
            } => {
                check_band(*t_min, *t_max)?;
                if !(*period > 0.0) || !period.is_finite() {
                    return Err(Error::invalid("sine period must be > 0"));
                }
                check_phase(*phase)
            }
            ThermalProfile::Table { samples } => {
                if samples.len() < 2 {
                    return Err(Error::invalid("temperature table needs at least 2 samples"));
                }
                if samples.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(Error::invalid("temperature table has non-finite samples"));
                }
                if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::invalid("temperature table times must be strictly increasing"));
                }
                Ok(())
            }
        }
    }

    /// Repetition period in s; for a table, its time span.
    pub fn period(&self) -> f64 {
        match self {
            ThermalProfile::Triangle {
                t_min, t_max, rate, ..
            } => 2.0 * (t_max - t_min) / rate,
            ThermalProfile::Sine { period, .. } => *period,
            ThermalProfile::Table { samples } => samples[samples.len() - 1].0 - samples[0].0,
        }
    }

    /// `(min, max)` temperature reached by the profile.
    pub fn band(&self) -> (f64, f64) {
        match self {
            ThermalProfile::Triangle { t_min, t_max, .. } | ThermalProfile::Sine { t_min, t_max, .. } => {
                (*t_min, *t_max)
            }
            ThermalProfile::Table { samples } => samples.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)),
            ),
        }
    }

    pub fn temperature_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("time {t} s must be finite and >= 0")));
        }
        match self {
            ThermalProfile::Triangle {
                t_min,
                t_max,
                rate,
                phase,
            } => {
                let half = (t_max - t_min) / rate;
                let tau = (t + phase) % (2.0 * half);
                let v = if tau <= half {
                    t_min + rate * tau
                } else {
                    t_max - rate * (tau - half)
                };
                Ok(v.clamp(*t_min, *t_max))
            }
            ThermalProfile::Sine {
                t_min,
                t_max,
                period,
                phase,
            } => {
                let mid = 0.5 * (t_min + t_max);
                let amp = 0.5 * (t_max - t_min);
                let tau = (t + phase) % period;
                let v = mid - amp * libm::cos(2.0 * core::f64::consts::PI * tau / period);
                Ok(v.clamp(*t_min, *t_max))
            }
            ThermalProfile::Table { samples } => {
                let n = samples.len();
                if t < samples[0].0 || t > samples[n - 1].0 {
                    return Err(Error::domain(format!(
                        "time {t} s outside table range [{}, {}]",
                        samples[0].0,
                        samples[n - 1].0
                    )));
                }
                let hi = samples.partition_point(|s| s.0 <= t).min(n - 1).max(1);
                let (t0, v0) = samples[hi - 1];
                let (t1, v1) = samples[hi];
                let w = (t - t0) / (t1 - t0);
                Ok((1.0 - w) * v0 + w * v1)
            }
        }
    }
}

fn check_band(t_min: f64, t_max: f64) -> Result<()> {
    if !(t_min < t_max) || !t_min.is_finite() || !t_max.is_finite() {
        return Err(Error::invalid("profile needs finite t_min < t_max"));
    }
    Ok(())
}

fn check_phase(phase: f64) -> Result<()> {
    if !(phase >= 0.0) || !phase.is_finite() {
        return Err(Error::invalid("profile phase must be finite and >= 0"));
    }
    Ok(())
}

/// Free-function form of [`ThermalProfile::temperature_at`].
pub fn temperature_at(profile: &ThermalProfile, t: f64) -> Result<f64> {
    profile.temperature_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triangle_examples() {
        let p = ThermalProfile::default();
        assert_eq!(p.temperature_at(0.0).unwrap(), 40.0);
        assert!((p.temperature_at(50.0).unwrap() - 45.0).abs() < 1e-12);
        assert!((p.temperature_at(100.0).unwrap() - 50.0).abs() < 1e-12);
        assert!((p.temperature_at(150.0).unwrap() - 45.0).abs() < 1e-12);
        assert_eq!(p.period(), 200.0);
    }

    #[test]
    fn triangle_slope_off_kinks() {
        let p = ThermalProfile::default();
        let h = 1e-3;
        for i in 1..400 {
            let t = i as f64 * 1.37;
            let tau = t % 200.0;
            if tau < 2.0 * h || (tau - 100.0).abs() < 2.0 * h || 200.0 - tau < 2.0 * h {
                continue;
            }
            let s = (p.temperature_at(t + h).unwrap() - p.temperature_at(t - h).unwrap()) / (2.0 * h);
            assert!((s.abs() - 0.1).abs() < 1e-9, "t={t} slope={s}");
        }
    }

    #[test]
    fn sine_starts_at_minimum() {
        let p = ThermalProfile::Sine {
            t_min: 40.0,
            t_max: 50.0,
            period: 200.0,
            phase: 0.0,
        };
        assert!((p.temperature_at(0.0).unwrap() - 40.0).abs() < 1e-12);
        assert!((p.temperature_at(100.0).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn table_interpolates_and_rejects_outside() {
        let p = ThermalProfile::Table {
            samples: alloc::vec![(0.0, 20.0), (10.0, 30.0), (20.0, 25.0)],
        };
        p.validate().unwrap();
        assert_eq!(p.temperature_at(5.0).unwrap(), 25.0);
        assert_eq!(p.temperature_at(20.0).unwrap(), 25.0);
        assert_eq!(p.temperature_at(10.0).unwrap(), 30.0);
        assert!(matches!(p.temperature_at(20.5), Err(Error::OutOfDomain(_))));
        let bad = ThermalProfile::Table {
            samples: alloc::vec![(0.0, 20.0), (0.0, 30.0)],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn invalid_profiles_rejected() {
        let p = ThermalProfile::Triangle {
            t_min: 50.0,
            t_max: 40.0,
            rate: 0.1,
            phase: 0.0,
        };
        assert!(p.validate().is_err());
        let p = ThermalProfile::Triangle {
            t_min: 40.0,
            t_max: 50.0,
            rate: 0.0,
            phase: 0.0,
        };
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn periodic_and_bounded(t in 0.0f64..5000.0, which in 0usize..2, phase in 0.0f64..300.0) {
            let p = if which == 0 {
                ThermalProfile::Triangle { t_min: 40.0, t_max: 50.0, rate: 0.1, phase }
            } else {
                ThermalProfile::Sine { t_min: 40.0, t_max: 50.0, period: 200.0, phase }
            };
            let a = p.temperature_at(t).unwrap();
            let b = p.temperature_at(t + p.period()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * 50.0);
            prop_assert!((40.0..=50.0).contains(&a));
        }
    }
}
