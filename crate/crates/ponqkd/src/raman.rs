//! Spontaneous Raman scattering in fiber spans.
//!
//! Efficiencies are in 1/(km·nm): scattered power per watt of pump, per km of
//! fiber, per nm of probe bandwidth.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::table::Curve;
use crate::units::{BOLTZMANN, C_NM_THZ, PLANCK};

const SILICA_PROFILE: &str = include_str!("../data/raman_silica.dat");
const SMF_ATTENUATION: &str = include_str!("../data/smf_attenuation.dat");

pub const MAX_SHIFT_THZ: f64 = 40.0;
pub const DEFAULT_TEMPERATURE_K: f64 = 293.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RamanProfile {
    table: Arc<Curve>,
    peak_shift_thz: f64,
    /// Absolute efficiency at the peak shift.
    pub scale: f64,
}

impl RamanProfile {
    pub fn new(table: Curve, scale: f64) -> Result<RamanProfile> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!("raman scale {scale} must be positive")));
        }
        if table.points().any(|(_, y)| !(0.0..=1.0).contains(&y)) {
            return Err(Error::Config("normalized raman gain outside [0, 1]".into()));
        }
        let (peak_shift_thz, peak) = table.max_y();
        if (peak - 1.0).abs() > 1e-12 {
            return Err(Error::Config("raman table must peak at 1.0".into()));
        }
        if table.x_min() > 0.0 || table.x_max() < MAX_SHIFT_THZ {
            return Err(Error::Config(format!(
                "raman table must cover 0-{MAX_SHIFT_THZ} THz"
            )));
        }
        Ok(RamanProfile {
            table: Arc::new(table),
            peak_shift_thz,
            scale,
        })
    }

    /// Bundled silica gain shape with the given absolute scale.
    pub fn silica(scale: f64) -> Result<RamanProfile> {
        RamanProfile::new(silica_table(), scale)
    }

    pub fn peak_shift_thz(&self) -> f64 {
        self.peak_shift_thz
    }

    pub fn normalized(&self, shift_thz: f64) -> f64 {
        self.table.eval(shift_thz.abs()).unwrap_or(0.0)
    }

    pub fn table(&self) -> &Curve {
        &self.table
    }
}

pub fn silica_table() -> Curve {
    Curve::parse(SILICA_PROFILE).expect("bundled raman table is valid")
}

pub fn smf_attenuation() -> Curve {
    Curve::parse(SMF_ATTENUATION).expect("bundled attenuation table is valid")
}

/// Raman efficiency from a pump at `pump_nm` into a probe at `probe_nm`.
/// Probes on the short-wavelength side are anti-Stokes and carry the
/// Boltzmann factor of the phonon population.
pub fn raman_efficiency(profile: &RamanProfile, pump_nm: f64, probe_nm: f64, temperature_k: f64) -> f64 {
    let shift = C_NM_THZ / pump_nm - C_NM_THZ / probe_nm;
    let a = shift.abs();
    if a == 0.0 || a > MAX_SHIFT_THZ {
        return 0.0;
    }
    let rho = profile.scale * profile.normalized(a);
    if shift < 0.0 {
        rho * (-PLANCK * a * 1e12 / (BOLTZMANN * temperature_k)).exp()
    } else {
        rho
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpan {
    pub length_km: f64,
    attenuation: Arc<Curve>,
    pub temperature_k: f64,
    /// Lumped loss at the span end, dB.
    pub connector_loss_db: f64,
}

impl FiberSpan {
    pub fn new(length_km: f64) -> Result<FiberSpan> {
        FiberSpan::with_attenuation(length_km, Arc::new(smf_attenuation()))
    }

    pub fn with_attenuation(length_km: f64, attenuation: Arc<Curve>) -> Result<FiberSpan> {
        if !(length_km >= 0.0) || !length_km.is_finite() {
            return Err(domain(format!("span length {length_km} km")));
        }
        if attenuation.points().any(|(_, a)| !(a > 0.0)) {
            return Err(Error::Config("fiber attenuation must be positive".into()));
        }
        Ok(FiberSpan {
            length_km,
            attenuation,
            temperature_k: DEFAULT_TEMPERATURE_K,
            connector_loss_db: 0.0,
        })
    }

    pub fn with_length(&self, length_km: f64) -> Result<FiberSpan> {
        let mut s = FiberSpan::with_attenuation(length_km, self.attenuation.clone())?;
        s.temperature_k = self.temperature_k;
        s.connector_loss_db = self.connector_loss_db;
        Ok(s)
    }

    /// Attenuation coefficient in dB/km.
    pub fn alpha(&self, nm: f64) -> f64 {
        match self.attenuation.eval(nm) {
            Some(a) => a,
            None if nm < self.attenuation.x_min() => self.attenuation.points().next().unwrap().1,
            None => self.attenuation.points().last().unwrap().1,
        }
    }

    pub fn loss_db(&self, nm: f64) -> f64 {
        self.alpha(nm) * self.length_km + self.connector_loss_db
    }

    pub fn transmission(&self, nm: f64) -> f64 {
        10f64.powf(-self.loss_db(nm) / 10.0)
    }
}

fn check_inputs(p0: f64, length_km: f64, alpha_p: f64, alpha_s: f64, rho: f64, dl: f64) -> Result<()> {
    for (name, v) in [
        ("pump power", p0),
        ("length", length_km),
        ("pump attenuation", alpha_p),
        ("probe attenuation", alpha_s),
        ("efficiency", rho),
        ("bandwidth", dl),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(domain(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    Ok(())
}

const DB_TO_NEPER: f64 = std::f64::consts::LN_10 / 10.0;

/// Co-propagating Raman power at the span output, W.
/// Attenuations in dB/km, `rho` in 1/(km·nm), `dl` in nm.
pub fn forward_raman_power(p0: f64, length_km: f64, alpha_p: f64, alpha_s: f64, rho: f64, dl: f64) -> Result<f64> {
    check_inputs(p0, length_km, alpha_p, alpha_s, rho, dl)?;
    if length_km == 0.0 {
        return Ok(0.0);
    }
    let d = (alpha_s - alpha_p) * DB_TO_NEPER;
    let l_int = if (d * length_km).abs() < 1e-12 {
        length_km
    } else {
        (d * length_km).exp_m1() / d
    };
    Ok(p0 * rho * dl * l_int * 10f64.powf(-alpha_s * length_km / 10.0))
}

/// Counter-propagating Raman power leaving the pump input end, W.
pub fn backward_raman_power(p0: f64, length_km: f64, alpha_p: f64, alpha_s: f64, rho: f64, dl: f64) -> Result<f64> {
    check_inputs(p0, length_km, alpha_p, alpha_s, rho, dl)?;
    if length_km == 0.0 {
        return Ok(0.0);
    }
    let k = (alpha_p + alpha_s) * DB_TO_NEPER;
    if k == 0.0 {
        return Ok(p0 * rho * dl * length_km);
    }
    Ok(p0 * rho * dl * (-(-k * length_km).exp_m1()) / k)
}

/// L -> infinity limit of [`backward_raman_power`].
pub fn backward_raman_saturation(p0: f64, alpha_p: f64, alpha_s: f64, rho: f64, dl: f64) -> f64 {
    p0 * rho * dl / ((alpha_p + alpha_s) * DB_TO_NEPER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Noise travels with the pump and is collected at the span output.
    Co,
    /// Noise travels against the pump and is collected at the pump input.
    Counter,
}

/// Raman spectral density (W/nm) at `probe_nm` generated in `span` by
/// `pump_w` launched at `pump_nm`.
pub fn raman_density_at(
    profile: &RamanProfile,
    probe_nm: f64,
    pump_nm: f64,
    pump_w: f64,
    span: &FiberSpan,
    geometry: Geometry,
) -> Result<f64> {
    if pump_w == 0.0 || span.length_km == 0.0 {
        return Ok(0.0);
    }
    let rho = raman_efficiency(profile, pump_nm, probe_nm, span.temperature_k);
    if rho == 0.0 {
        return Ok(0.0);
    }
    let (ap, as_) = (span.alpha(pump_nm), span.alpha(probe_nm));
    let conn = 10f64.powf(-span.connector_loss_db / 10.0);
    match geometry {
        Geometry::Co => Ok(forward_raman_power(pump_w, span.length_km, ap, as_, rho, 1.0)? * conn),
        Geometry::Counter => backward_raman_power(pump_w, span.length_km, ap, as_, rho, 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bundled_table_shape() {
        let p = RamanProfile::silica(1.0).unwrap();
        assert_eq!(p.peak_shift_thz(), 13.2);
        assert_eq!(p.table().points().count(), 25);
        assert_eq!(p.normalized(0.0), 0.0);
        assert_eq!(p.normalized(45.0), 0.0);
    }

    #[test]
    fn zero_shift_scatters_nothing() {
        let p = RamanProfile::silica(1.0).unwrap();
        assert_eq!(raman_efficiency(&p, 1550.0, 1550.0, 293.0), 0.0);
    }

    #[test]
    fn stokes_lookup_interpolates() {
        let p = RamanProfile::silica(2.0).unwrap();
        let shift = C_NM_THZ / 1489.0 - C_NM_THZ / 1550.12;
        // between the 7 THz (0.46) and 8 THz (0.55) rows
        let expected = 2.0 * (0.46 + (shift - 7.0) * 0.09);
        assert_relative_eq!(raman_efficiency(&p, 1489.0, 1550.12, 293.0), expected, max_relative = 1e-12);
    }

    #[test]
    fn anti_stokes_boltzmann_factor_at_peak() {
        let p = RamanProfile::silica(1.0).unwrap();
        let f_pump = 200.0;
        let pump = C_NM_THZ / f_pump;
        let stokes = raman_efficiency(&p, pump, C_NM_THZ / (f_pump - 13.2), 293.0);
        let anti = raman_efficiency(&p, pump, C_NM_THZ / (f_pump + 13.2), 293.0);
        let x = PLANCK * 13.2e12 / (BOLTZMANN * 293.0);
        assert_relative_eq!(x, 2.16, epsilon = 0.01);
        assert_relative_eq!(anti / stokes, (-x).exp(), max_relative = 1e-9);
        assert_relative_eq!(anti / stokes, 0.115, epsilon = 0.001);
    }

    #[test]
    fn zero_length_and_zero_pump() {
        assert_eq!(forward_raman_power(1e-3, 0.0, 0.39, 0.21, 3e-9, 1.0).unwrap(), 0.0);
        assert_eq!(backward_raman_power(1e-3, 0.0, 0.39, 0.21, 3e-9, 1.0).unwrap(), 0.0);
        let p = RamanProfile::silica(1e-9).unwrap();
        let span = FiberSpan::new(10.0).unwrap();
        assert_eq!(raman_density_at(&p, 1550.0, 1310.0, 0.0, &span, Geometry::Co).unwrap(), 0.0);
    }

    #[test]
    fn equal_attenuation_limit() {
        let (p0, l, a, rho) = (2e-3, 7.0, 0.3, 1e-9);
        let got = forward_raman_power(p0, l, a, a, rho, 0.5).unwrap();
        assert_relative_eq!(got, p0 * rho * 0.5 * l * 10f64.powf(-a * l / 10.0), max_relative = 1e-12);
    }

    #[test]
    fn backward_saturates() {
        let sat = backward_raman_saturation(1e-3, 0.39, 0.21, 3e-9, 1.0);
        let far = backward_raman_power(1e-3, 500.0, 0.39, 0.21, 3e-9, 1.0).unwrap();
        assert_relative_eq!(far, sat, max_relative = 1e-12);
        assert_relative_eq!(sat, 1e-3 * 3e-9 * 10.0 / (0.60 * std::f64::consts::LN_10), max_relative = 1e-12);
    }

    #[test]
    fn negative_input_rejected() {
        assert!(forward_raman_power(-1.0, 1.0, 0.2, 0.2, 1.0, 1.0).is_err());
        assert!(backward_raman_power(1.0, -1.0, 0.2, 0.2, 1.0, 1.0).is_err());
    }

    #[test]
    fn co_and_counter_differ_by_integral_ratio() {
        let p = RamanProfile::silica(1e-9).unwrap();
        let span = FiberSpan::new(13.2).unwrap();
        let co = raman_density_at(&p, 1310.55, 1533.0, 1e-3, &span, Geometry::Co).unwrap();
        let counter = raman_density_at(&p, 1310.55, 1533.0, 1e-3, &span, Geometry::Counter).unwrap();
        let (ap, as_) = (span.alpha(1533.0), span.alpha(1310.55));
        let rho = raman_efficiency(&p, 1533.0, 1310.55, 293.0);
        let ratio = forward_raman_power(1.0, 13.2, ap, as_, rho, 1.0).unwrap()
            / backward_raman_power(1.0, 13.2, ap, as_, rho, 1.0).unwrap();
        assert_relative_eq!(co / counter, ratio, max_relative = 1e-12);
    }

    #[test]
    fn attenuation_anchors() {
        let span = FiberSpan::new(1.0).unwrap();
        assert_eq!(span.alpha(1550.0), 0.21);
        assert_eq!(span.alpha(1310.0), 0.39);
    }
}
