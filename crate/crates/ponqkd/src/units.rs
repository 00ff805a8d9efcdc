//! Physical constants and unit conversions.

/// Speed of light in nm·THz.
pub const C_NM_THZ: f64 = 299_792.458;
/// Speed of light in m/s.
pub const C_M_S: f64 = 299_792_458.0;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}

/// Linear power transmission of a loss given in dB.
pub fn db_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn transmission_to_db(t: f64) -> f64 {
    -10.0 * t.log10()
}

/// Width in nm of a frequency interval `bw_ghz` centered at `lambda_nm`.
pub fn ghz_to_nm(bw_ghz: f64, lambda_nm: f64) -> f64 {
    lambda_nm * lambda_nm * (bw_ghz * 1e-3) / C_NM_THZ
}
