//! The calibration block shared by every scenario, and the fit that produces
//! it from a handful of measured operating points.
//!
//! The frozen values live in `scenarios/calibration.toml`; `ponqkd calibrate`
//! reruns the fit and prints a fresh block.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dps::filter_loss_db;
use crate::error::{Error, FieldError, Result};
use crate::scenario::{load_preset, preset_text, Axis, ScenarioConfig};
use crate::units::db_to_transmission;

pub const CALIBRATION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub version: u32,
    /// Raman efficiency at the gain peak, 1/(km nm).
    pub raman_scale: f64,
    /// Loss between receive filter and SPAD, dB.
    pub receiver_insertion_loss_db: f64,
    pub dead_time_s: f64,
    /// Time-window acceptance w.
    pub window_accept: f64,
    /// Dark count rate before window gating, counts/s.
    pub dark_rate_cps: f64,
    pub intrinsic_error: f64,
    pub dml_penalty: f64,
    pub afterpulse_frac: f64,
    /// Central-office multiplexer loss seen by the quantum channel and the
    /// upstream noise, per standard, dB.
    pub co_mux_loss_ngpon2_db: f64,
    pub co_mux_loss_gpon_db: f64,
}

#[derive(Deserialize)]
struct CalibrationFile {
    calibration: Calibration,
}

impl Calibration {
    /// The frozen calibration shipped with the crate.
    pub fn frozen() -> &'static Calibration {
        static FROZEN: OnceLock<Calibration> = OnceLock::new();
        FROZEN.get_or_init(|| {
            let text = preset_text("calibration").expect("bundled calibration");
            let file: CalibrationFile = toml::from_str(text).expect("bundled calibration parses");
            file.calibration
        })
    }

    /// Checks the fields not already covered by the SPAD and link checks.
    pub fn check(&self, errors: &mut Vec<FieldError>) {
        if self.version != CALIBRATION_VERSION {
            errors.push(FieldError::new(
                "calibration.version",
                format!("unsupported version {}, expected {CALIBRATION_VERSION}", self.version),
            ));
        }
        if !(self.raman_scale > 0.0 && self.raman_scale.is_finite()) {
            errors.push(FieldError::new("calibration.raman_scale", "must be positive"));
        }
        for (k, v) in [
            ("calibration.co_mux_loss_ngpon2_db", self.co_mux_loss_ngpon2_db),
            ("calibration.co_mux_loss_gpon_db", self.co_mux_loss_gpon_db),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                errors.push(FieldError::new(k, "must be >= 0"));
            }
        }
    }

    /// `[calibration]` block in scenario-file form.
    pub fn to_toml(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            calibration: &'a Calibration,
        }
        toml::to_string(&Out { calibration: self }).map_err(|e| Error::Config(format!("serializing calibration: {e}")))
    }

    /// w times the dark rate: dark counts that survive the time window.
    pub fn windowed_dark_cps(&self) -> f64 {
        self.window_accept * self.dark_rate_cps
    }
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration::frozen().clone()
    }
}

/// Measured operating points the fit reproduces.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchors {
    /// Back-to-back (attenuation dB, registered counts/s) pairs.
    pub back_to_back: [(f64, f64); 2],
    /// Attenuation at which the dark QBER is minimal, and that minimum.
    pub qber_min_attenuation_db: f64,
    pub qber_min: f64,
    /// Windowed dark counts/s. Held fixed; the data do not separate it from
    /// the dead time.
    pub windowed_dark_cps: f64,
    /// Registered counts/s, lit NG-PON2 with the FBG.
    pub ngpon2_fbg_raw: f64,
    /// Registered counts/s, lit GPON.
    pub gpon_raw: f64,
    /// Detected Raman counts/s, lit NG-PON2 with the LAN-WDM filter.
    pub ngpon2_lan_raman: f64,
    /// QBER of that same scenario.
    pub ngpon2_lan_qber: f64,
}

impl Default for Anchors {
    fn default() -> Self {
        Anchors {
            back_to_back: [(12.0, 10_100.0), (20.0, 3_400.0)],
            qber_min_attenuation_db: 12.0,
            qber_min: 0.0182,
            windowed_dark_cps: 120.0,
            ngpon2_fbg_raw: 2_500.0,
            gpon_raw: 2_120.0,
            ngpon2_lan_raman: 1_730.0,
            ngpon2_lan_qber: 0.0755,
        }
    }
}

pub const BACK_TO_BACK_PRESET: &str = "fig3c_dark_ngpon2";
pub const NGPON2_FBG_PRESET: &str = "fig4b_lit_ngpon2_fbg";
pub const NGPON2_LAN_PRESET: &str = "fig4b_lit_ngpon2_lanwdm";
pub const GPON_PRESET: &str = "fig4a_lit_gpon";

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorCheck {
    pub name: &'static str,
    pub target: f64,
    pub achieved: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub calibration: Calibration,
    pub checks: Vec<AnchorCheck>,
    pub iterations: usize,
}

fn with_cal(cfg: &ScenarioConfig, cal: &Calibration) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.calibration = cal.clone();
    c
}

/// Root of `f` on [lo, hi] by bisection; `f(lo)` and `f(hi)` must differ in sign.
fn bisect(mut lo: f64, mut hi: f64, what: &str, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo.signum() == fhi.signum() {
        return Err(Error::Config(format!(
            "calibration: {what} not bracketed on [{lo}, {hi}] ({flo:.4e}, {fhi:.4e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * hi.abs().max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Receiver loss and dead time through two back-to-back points.
///
/// With N windowed dark counts and detected signal g_i·X (X the receiver
/// transmission), registered counts obey 1/D_i = 1/(g_i X + N) + τ. Equating
/// τ between the points leaves a quadratic in X.
fn fit_receiver(b2b: &ScenarioConfig, anchors: &Anchors, cal: &mut Calibration) -> Result<()> {
    let link = b2b.link_params();
    let spad = b2b.spad_params();
    let filter = b2b.filter_spec()?;
    let fil = filter_loss_db(&filter, b2b.quantum_wavelength()?.nm());
    let n = anchors.windowed_dark_cps;
    let [(a1, d1), (a2, d2)] = anchors.back_to_back;
    let g = |a: f64| link.symbol_rate * link.mu * link.port_fraction * spad.efficiency * db_to_transmission(a + fil);
    let (g1, g2) = (g(a1), g(a2));
    let dd = 1.0 / d1 - 1.0 / d2;
    let qa = dd * g1 * g2;
    let qb = dd * n * (g1 + g2) - (g2 - g1);
    let qc = dd * n * n;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 || qa == 0.0 {
        return Err(Error::Config("calibration: back-to-back points admit no receiver loss".into()));
    }
    let roots = [(-qb + disc.sqrt()) / (2.0 * qa), (-qb - disc.sqrt()) / (2.0 * qa)];
    let (x, tau) = roots
        .iter()
        .map(|&x| (x, 1.0 / d1 - 1.0 / (g1 * x + n)))
        .find(|&(x, tau)| x > 0.0 && x <= 1.0 && tau >= 0.0)
        .ok_or_else(|| Error::Config("calibration: back-to-back fit gives no physical root".into()))?;
    cal.receiver_insertion_loss_db = -10.0 * x.log10();
    cal.dead_time_s = tau;
    Ok(())
}

fn b2b_qber(b2b: &ScenarioConfig, cal: &Calibration, attenuation: f64) -> Result<f64> {
    Ok(with_cal(b2b, cal).with_axis(Axis::BudgetDb, attenuation)?.evaluate()?.qber)
}

/// Total error such that the dark QBER hits `qber_min` at the anchor,
/// for the current afterpulse fraction. QBER is affine in the error.
fn solve_error(b2b: &ScenarioConfig, anchors: &Anchors, cal: &Calibration) -> Result<f64> {
    let at = |e: f64| {
        let mut c = cal.clone();
        c.intrinsic_error = e - c.dml_penalty;
        b2b_qber(b2b, &c, anchors.qber_min_attenuation_db)
    };
    let (e0, e1) = (cal.dml_penalty, cal.dml_penalty + 0.05);
    let (q0, q1) = (at(e0)?, at(e1)?);
    Ok(e0 + (anchors.qber_min - q0) * (e1 - e0) / (q1 - q0))
}

/// Error and afterpulse fraction: QBER = anchor with zero slope there.
fn fit_error_and_afterpulse(b2b: &ScenarioConfig, anchors: &Anchors, cal: &mut Calibration) -> Result<()> {
    let h = 0.01;
    let slope = |a: f64| -> Result<f64> {
        let mut c = cal.clone();
        c.afterpulse_frac = a;
        let e = solve_error(b2b, anchors, &c)?;
        c.intrinsic_error = e - c.dml_penalty;
        let b = anchors.qber_min_attenuation_db;
        Ok((b2b_qber(b2b, &c, b + h)? - b2b_qber(b2b, &c, b - h)?) / (2.0 * h))
    };
    let a = bisect(0.0, 0.5, "afterpulse fraction", slope)?;
    cal.afterpulse_frac = a;
    let e = solve_error(b2b, anchors, cal)?;
    cal.intrinsic_error = e - cal.dml_penalty;
    if cal.intrinsic_error < 0.0 {
        return Err(Error::Config(format!(
            "calibration: fitted error {e} is below the DML penalty {}",
            cal.dml_penalty
        )));
    }
    Ok(())
}

/// Fits every calibrated constant, starting from `start` (its DML penalty
/// is kept as given).
pub fn calibrate(anchors: &Anchors, start: &Calibration) -> Result<FitReport> {
    let b2b = load_preset(BACK_TO_BACK_PRESET)?;
    let ng_fbg = load_preset(NGPON2_FBG_PRESET)?;
    let ng_lan = load_preset(NGPON2_LAN_PRESET)?;
    let gpon = load_preset(GPON_PRESET)?;

    let mut cal = start.clone();
    cal.version = CALIBRATION_VERSION;
    let set_window = |c: &mut Calibration, w: f64| {
        c.window_accept = w;
        c.dark_rate_cps = anchors.windowed_dark_cps / w;
    };
    let w0 = cal.window_accept;
    set_window(&mut cal, w0);

    fit_receiver(&b2b, anchors, &mut cal)?;
    fit_error_and_afterpulse(&b2b, anchors, &mut cal)?;

    let mut iterations = 0;
    for i in 1..=100 {
        iterations = i;
        let prev = cal.clone();

        let raman = with_cal(&ng_lan, &cal).evaluate()?.raman_counts;
        cal.raman_scale *= anchors.ngpon2_lan_raman / raman;

        let c0 = cal.clone();
        cal.co_mux_loss_ngpon2_db = bisect(0.0, 30.0, "NG-PON2 multiplexer loss", |m| {
            let mut c = c0.clone();
            c.co_mux_loss_ngpon2_db = m;
            Ok(with_cal(&ng_fbg, &c).evaluate()?.raw_rate - anchors.ngpon2_fbg_raw)
        })?;
        let c0 = cal.clone();
        cal.co_mux_loss_gpon_db = bisect(0.0, 30.0, "GPON multiplexer loss", |m| {
            let mut c = c0.clone();
            c.co_mux_loss_gpon_db = m;
            Ok(with_cal(&gpon, &c).evaluate()?.raw_rate - anchors.gpon_raw)
        })?;
        let c0 = cal.clone();
        let w = bisect(1e-3, 1.0, "window acceptance", |w| {
            let mut c = c0.clone();
            set_window(&mut c, w);
            Ok(with_cal(&ng_lan, &c).evaluate()?.qber - anchors.ngpon2_lan_qber)
        })?;
        set_window(&mut cal, w);

        let rel = |a: f64, b: f64| ((a - b) / b.abs().max(1e-300)).abs();
        let moved = [
            rel(cal.raman_scale, prev.raman_scale),
            rel(cal.co_mux_loss_ngpon2_db, prev.co_mux_loss_ngpon2_db),
            rel(cal.co_mux_loss_gpon_db, prev.co_mux_loss_gpon_db),
            rel(cal.window_accept, prev.window_accept),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if moved < 1e-12 {
            break;
        }
    }

    let checks = anchor_checks(anchors, &cal)?;
    Ok(FitReport {
        calibration: cal,
        checks,
        iterations,
    })
}

/// What `cal` gives at each anchor.
pub fn anchor_checks(anchors: &Anchors, cal: &Calibration) -> Result<Vec<AnchorCheck>> {
    let b2b = with_cal(&load_preset(BACK_TO_BACK_PRESET)?, cal);
    let at = |a: f64| -> Result<crate::dps::LinkReport> { b2b.with_axis(Axis::BudgetDb, a)?.evaluate() };
    let [(a1, d1), (a2, d2)] = anchors.back_to_back;
    let ng_fbg = with_cal(&load_preset(NGPON2_FBG_PRESET)?, cal).evaluate()?;
    let ng_lan = with_cal(&load_preset(NGPON2_LAN_PRESET)?, cal).evaluate()?;
    let gpon = with_cal(&load_preset(GPON_PRESET)?, cal).evaluate()?;
    Ok(vec![
        AnchorCheck { name: "back-to-back raw, first point", target: d1, achieved: at(a1)?.raw_rate },
        AnchorCheck { name: "back-to-back raw, second point", target: d2, achieved: at(a2)?.raw_rate },
        AnchorCheck {
            name: "dark QBER at its minimum",
            target: anchors.qber_min,
            achieved: at(anchors.qber_min_attenuation_db)?.qber,
        },
        AnchorCheck { name: "NG-PON2 FBG raw", target: anchors.ngpon2_fbg_raw, achieved: ng_fbg.raw_rate },
        AnchorCheck { name: "GPON raw", target: anchors.gpon_raw, achieved: gpon.raw_rate },
        AnchorCheck {
            name: "NG-PON2 LAN-WDM Raman counts",
            target: anchors.ngpon2_lan_raman,
            achieved: ng_lan.raman_counts,
        },
        AnchorCheck { name: "NG-PON2 LAN-WDM QBER", target: anchors.ngpon2_lan_qber, achieved: ng_lan.qber },
    ])
}
