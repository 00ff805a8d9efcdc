//! Free-running SPAD: efficiency, window-gated noise, non-paralyzable dead
//! time and a phenomenological afterpulse term.

use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};
use crate::units::{C_M_S, PLANCK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpadParams {
    pub efficiency: f64,
    /// Dark count rate before window gating, counts/s.
    pub dark_rate: f64,
    /// Dead time after each registered count, s.
    pub dead_time: f64,
    /// Fraction of time accepted by the time-tag discriminator around each slot.
    pub window_accept: f64,
    /// Probability that a count registered while the detector is still
    /// recovering is replaced by an uncorrelated one, scaled by the dead-time
    /// occupancy.
    pub afterpulse_frac: f64,
}

impl SpadParams {
    pub fn ideal(efficiency: f64) -> SpadParams {
        SpadParams {
            efficiency,
            dark_rate: 0.0,
            dead_time: 0.0,
            window_accept: 1.0,
            afterpulse_frac: 0.0,
        }
    }

    pub fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        let p = |f: &str| format!("{prefix}{f}");
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            errors.push(FieldError::new(p("efficiency"), "must be in (0, 1]"));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            errors.push(FieldError::new(p("dark_rate"), "must be >= 0"));
        }
        if !(self.dead_time >= 0.0 && self.dead_time.is_finite()) {
            errors.push(FieldError::new(p("dead_time"), "must be >= 0"));
        }
        if !(self.window_accept > 0.0 && self.window_accept <= 1.0) {
            errors.push(FieldError::new(p("window_accept"), "must be in (0, 1]"));
        }
        if !(self.afterpulse_frac >= 0.0 && self.afterpulse_frac < 1.0) {
            errors.push(FieldError::new(p("afterpulse_frac"), "must be in [0, 1)"));
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.check("spad.", &mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Validation(errors))
        }
    }

    /// Fraction of time the detector is blind at a pre-dead-time rate `raw`.
    pub fn busy_fraction(&self, raw: f64) -> f64 {
        let x = raw * self.dead_time;
        x / (1.0 + x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CountReport {
    /// Registered signal counts/s.
    pub signal: f64,
    /// Registered noise counts/s: Raman, dark and afterpulse.
    pub noise: f64,
    /// Part of `noise` that was reissued by afterpulsing.
    pub afterpulse: f64,
    /// Detected rate before dead time.
    pub raw_total: f64,
    pub total_registered: f64,
}

pub fn photon_energy(nm: f64) -> f64 {
    PLANCK * C_M_S / (nm * 1e-9)
}

pub fn optical_power_to_photon_rate(watts: f64, nm: f64) -> f64 {
    watts / photon_energy(nm)
}

/// Registers incident signal and noise photon rates.
pub fn register_counts(incident_signal: f64, incident_noise: f64, p: &SpadParams) -> CountReport {
    let s = incident_signal * p.efficiency;
    let n = (incident_noise * p.efficiency + p.dark_rate) * p.window_accept;
    let raw = s + n;
    if raw <= 0.0 {
        return CountReport::default();
    }
    let total = raw / (1.0 + raw * p.dead_time);
    let k = total / raw;
    let u = p.afterpulse_frac * p.busy_fraction(raw);
    let afterpulse = u * total;
    CountReport {
        signal: s * k * (1.0 - u),
        noise: n * k * (1.0 - u) + afterpulse,
        afterpulse,
        raw_total: raw,
        total_registered: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn photon_rate_of_one_photon_per_second() {
        assert_eq!(optical_power_to_photon_rate(0.0, 1550.0), 0.0);
        assert_relative_eq!(photon_energy(1550.0), 1.2816e-19, max_relative = 1e-4);
        let e = photon_energy(1550.0);
        assert_relative_eq!(optical_power_to_photon_rate(e, 1550.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(optical_power_to_photon_rate(2.0 * e, 1550.0), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_input_zero_report() {
        let p = SpadParams { dark_rate: 0.0, ..SpadParams::ideal(0.1) };
        assert_eq!(register_counts(0.0, 0.0, &p), CountReport::default());
    }

    #[test]
    fn ideal_detector_is_linear() {
        let p = SpadParams::ideal(0.1);
        let r = register_counts(1e5, 3e4, &p);
        assert_eq!(r.signal, 1e4);
        assert_eq!(r.noise, 3e3);
        assert_eq!(r.total_registered, 1.3e4);
    }

    #[test]
    fn half_registered_at_inverse_dead_time() {
        let p = SpadParams { dead_time: 1e-5, ..SpadParams::ideal(1.0) };
        let r = register_counts(1e5, 0.0, &p);
        assert_relative_eq!(r.total_registered, 0.5e5, max_relative = 1e-12);
    }

    #[test]
    fn afterpulse_moves_counts_to_noise_without_adding() {
        let base = SpadParams {
            efficiency: 0.1,
            dark_rate: 500.0,
            dead_time: 60e-6,
            window_accept: 0.2,
            afterpulse_frac: 0.0,
        };
        let a = register_counts(2e5, 1e4, &base);
        let b = register_counts(2e5, 1e4, &SpadParams { afterpulse_frac: 0.05, ..base.clone() });
        assert_relative_eq!(a.total_registered, b.total_registered, max_relative = 1e-15);
        assert!(b.noise > a.noise && b.signal < a.signal);
        let u = 0.05 * base.busy_fraction(a.raw_total);
        assert_relative_eq!(b.afterpulse, u * a.total_registered, max_relative = 1e-12);
    }
}
