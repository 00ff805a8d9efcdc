//! DPS-QKD link model: raw rate and QBER from the detector model, secure key
//! fraction, and composition of the full lit-PON evaluation.

mod mc;

pub use mc::{monte_carlo_run, monte_carlo_run_blocks, wilson_interval, MonteCarloReport, DEFAULT_BLOCK_PULSES};

use serde::{Deserialize, Serialize};

use crate::detector::{optical_power_to_photon_rate, register_counts, CountReport, SpadParams};
use crate::error::{domain, FieldError, Result};
use crate::odn::{density_by_segment, effective_sources, path_loss, Path, PonTopology};
use crate::raman::RamanProfile;
use crate::spectral::{filter_transmission, integrate_inband, ChannelPlan, FilterSpec};
use crate::units::{db_to_transmission, transmission_to_db};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpsLinkParams {
    pub symbol_rate: f64,
    pub mu: f64,
    pub intrinsic_error: f64,
    /// Extra error from a directly modulated laser transmitter.
    #[serde(default)]
    pub dml_penalty: f64,
    /// Receiver loss between the filter and the SPAD (interferometer, couplers), dB.
    pub receiver_insertion_loss_db: f64,
    /// Fraction of the interferometer output reaching the detector.
    pub port_fraction: f64,
    /// Error-correction inefficiency, >= 1.
    pub ec_efficiency: f64,
}

impl DpsLinkParams {
    pub fn effective_error(&self) -> f64 {
        self.intrinsic_error + self.dml_penalty
    }

    pub fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        let p = |f: &str| format!("{prefix}{f}");
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite()) {
            errors.push(FieldError::new(p("symbol_rate"), "must be positive"));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            errors.push(FieldError::new(p("mu"), "must be in (0, 1)"));
        }
        if !(self.intrinsic_error >= 0.0 && self.intrinsic_error < 0.5) {
            errors.push(FieldError::new(p("intrinsic_error"), "must be in [0, 0.5)"));
        }
        if !(self.dml_penalty >= 0.0 && self.effective_error() < 0.5) {
            errors.push(FieldError::new(p("dml_penalty"), "must be >= 0 and keep the error below 0.5"));
        }
        if !(self.receiver_insertion_loss_db >= 0.0 && self.receiver_insertion_loss_db.is_finite()) {
            errors.push(FieldError::new(p("receiver_insertion_loss_db"), "must be >= 0"));
        }
        if !(self.port_fraction > 0.0 && self.port_fraction <= 1.0) {
            errors.push(FieldError::new(p("port_fraction"), "must be in (0, 1]"));
        }
        if !(self.ec_efficiency >= 1.0 && self.ec_efficiency.is_finite()) {
            errors.push(FieldError::new(p("ec_efficiency"), "must be >= 1"));
        }
    }

    /// Detected counts/s per photon/s arriving at the receiver input.
    pub fn detection_gain(&self, spad: &SpadParams) -> f64 {
        db_to_transmission(self.receiver_insertion_loss_db) * self.port_fraction * spad.efficiency
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateQber {
    pub raw_rate: f64,
    pub qber: f64,
    pub counts: CountReport,
}

/// Raw key rate and QBER at a loss budget (dB ahead of the receiver) with
/// `noise_counts` of detected noise (efficiency applied, before window gating).
pub fn raw_rate_and_qber(link: &DpsLinkParams, budget_db: f64, noise_counts: f64, spad: &SpadParams) -> Result<RateQber> {
    if !(budget_db >= 0.0) {
        return Err(domain(format!("loss budget {budget_db} dB")));
    }
    if !(noise_counts >= 0.0) || noise_counts.is_infinite() {
        return Err(domain(format!("noise rate {noise_counts}")));
    }
    let signal_photons = link.symbol_rate
        * link.mu
        * db_to_transmission(budget_db + link.receiver_insertion_loss_db)
        * link.port_fraction;
    let counts = register_counts(signal_photons, noise_counts / spad.efficiency, spad);
    let qber = if counts.total_registered > 0.0 {
        (0.5 * counts.noise + link.effective_error() * counts.signal) / counts.total_registered
    } else {
        0.5
    };
    Ok(RateQber {
        raw_rate: counts.total_registered,
        qber,
        counts,
    })
}

pub fn binary_entropy(e: f64) -> f64 {
    if e <= 0.0 || e >= 1.0 {
        0.0
    } else {
        -e * e.log2() - (1.0 - e) * (1.0 - e).log2()
    }
}

/// Secure bits per sifted bit for DPS under individual attacks. Signed.
///
/// The collision bound bottoms out at e = 1/6 and would turn back up (and
/// leave the log domain near 0.38); past that point it is held at its floor.
pub fn secure_key_fraction(e: f64, mu: f64, f: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&e) {
        return Err(domain(format!("qber {e} outside [0, 0.5)")));
    }
    let ec = e.min(1.0 / 6.0);
    let collision = 1.0 - ec * ec - 0.5 * (1.0 - 6.0 * ec).powi(2);
    let tau = -collision.log2();
    Ok((1.0 - 2.0 * mu) * tau - f * binary_entropy(e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkReport {
    /// Loss ahead of the receiver: distribution network plus receive filter, dB.
    pub budget_db: f64,
    pub raw_rate: f64,
    pub qber: f64,
    /// Detected Raman counts/s (efficiency applied, before window gating).
    pub raman_counts: f64,
    pub raman_counts_drop: f64,
    pub raman_counts_feeder: f64,
    pub secure_fraction: f64,
    pub secure_rate: f64,
    pub secure_bits_per_pulse: f64,
    pub counts: CountReport,
}

/// Detected Raman counts/s passed by `filter`, split (drop, feeder).
pub fn raman_counts(
    link: &DpsLinkParams,
    topology: &PonTopology,
    plan: &ChannelPlan,
    filter: &FilterSpec,
    spad: &SpadParams,
    profile: &RamanProfile,
) -> Result<(f64, f64)> {
    topology.validate()?;
    let sources = effective_sources(plan)?;
    if sources.is_empty() {
        return Ok((0.0, 0.0));
    }
    let gain = link.detection_gain(spad);
    let failure = std::cell::RefCell::new(None);
    let part = |drop: bool| {
        integrate_inband(
            |nm| match density_by_segment(topology, profile, &sources, nm) {
                Ok((d, f)) => optical_power_to_photon_rate(if drop { d } else { f }, nm),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            filter,
        )
    };
    let drop = part(true)?;
    let feeder = part(false)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((drop * gain, feeder * gain))
}

/// Fills a report from a loss budget and detected Raman counts.
pub fn report_from_budget(
    link: &DpsLinkParams,
    budget_db: f64,
    raman: (f64, f64),
    spad: &SpadParams,
) -> Result<LinkReport> {
    let total = raman.0 + raman.1;
    let rq = raw_rate_and_qber(link, budget_db, total, spad)?;
    let secure_fraction = secure_key_fraction(rq.qber.min(0.5 - 1e-15), link.mu, link.ec_efficiency)?;
    let secure_rate = secure_fraction.max(0.0) * rq.raw_rate;
    Ok(LinkReport {
        budget_db,
        raw_rate: rq.raw_rate,
        qber: rq.qber,
        raman_counts: total,
        raman_counts_drop: raman.0,
        raman_counts_feeder: raman.1,
        secure_fraction,
        secure_rate,
        secure_bits_per_pulse: secure_rate / link.symbol_rate,
        counts: rq.counts,
    })
}

/// Loss of the receive filter at the quantum wavelength, dB.
pub fn filter_loss_db(filter: &FilterSpec, nm: f64) -> f64 {
    transmission_to_db(filter_transmission(filter, nm))
}

/// Quantum channel from an ONU through the lit tree to the CO receiver.
pub fn evaluate_link(
    link: &DpsLinkParams,
    topology: &PonTopology,
    plan: &ChannelPlan,
    filter: &FilterSpec,
    spad: &SpadParams,
    profile: &RamanProfile,
) -> Result<LinkReport> {
    let q = plan.quantum_wavelength.nm();
    let offset_ghz = (plan.quantum_wavelength.thz() - filter.center.thz()).abs() * 1e3;
    if offset_ghz > 0.5 * filter.bandwidth_ghz {
        return Err(crate::Error::Config(format!(
            "quantum wavelength {q} nm lies outside the receive filter passband"
        )));
    }
    plan.check_clearance(filter)?;
    let raman = raman_counts(link, topology, plan, filter, spad, profile)?;
    let budget = path_loss(topology, Path::OnuToCo, q) + filter_loss_db(filter, q);
    report_from_budget(link, budget, raman, spad)
}

/// Dark back-to-back link: an attenuator of `attenuation_db` followed by the
/// receive filter.
pub fn evaluate_back_to_back(
    link: &DpsLinkParams,
    attenuation_db: f64,
    filter: &FilterSpec,
    spad: &SpadParams,
) -> Result<LinkReport> {
    let budget = attenuation_db + filter_loss_db(filter, filter.center.nm());
    report_from_budget(link, budget, (0.0, 0.0), spad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn link() -> DpsLinkParams {
        DpsLinkParams {
            symbol_rate: 1e9,
            mu: 0.1,
            intrinsic_error: 0.01,
            dml_penalty: 0.0,
            receiver_insertion_loss_db: 10.0,
            port_fraction: 0.5,
            ec_efficiency: 1.16,
        }
    }

    #[test]
    fn key_fraction_limits() {
        assert_relative_eq!(secure_key_fraction(0.0, 0.1, 1.16).unwrap(), 0.8, max_relative = 1e-12);
        assert!(secure_key_fraction(0.5, 0.1, 1.16).is_err());
        assert!(secure_key_fraction(-0.01, 0.1, 1.16).is_err());
    }

    #[test]
    fn noise_only_limit() {
        let spad = SpadParams {
            efficiency: 0.1,
            dark_rate: 1000.0,
            dead_time: 60e-6,
            window_accept: 0.12,
            afterpulse_frac: 0.0,
        };
        let r = raw_rate_and_qber(&link(), f64::INFINITY, 0.0, &spad).unwrap();
        assert_relative_eq!(r.raw_rate, 120.0 / (1.0 + 120.0 * 60e-6), max_relative = 1e-12);
        assert_eq!(r.qber, 0.5);
    }

    #[test]
    fn signal_only_qber_is_intrinsic() {
        let r = raw_rate_and_qber(&link(), 10.0, 0.0, &SpadParams::ideal(0.1)).unwrap();
        assert_relative_eq!(r.qber, 0.01, max_relative = 1e-12);
        // 1e9 * 0.1 * 1e-2 * 0.5 * 0.1
        assert_relative_eq!(r.raw_rate, 5e4, max_relative = 1e-12);
    }

    #[test]
    fn negative_budget_rejected() {
        assert!(raw_rate_and_qber(&link(), -1.0, 0.0, &SpadParams::ideal(0.1)).is_err());
    }
}
