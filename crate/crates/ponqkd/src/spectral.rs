//! Wavelengths, bands, classical channel plans and receive filters.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::table::Curve;
use crate::units::{ghz_to_nm, C_NM_THZ};

pub const WINDOW_MIN_NM: f64 = 1200.0;
pub const WINDOW_MAX_NM: f64 = 1700.0;
pub const MAX_LAUNCH_DBM: f64 = 15.0;

/// Vacuum wavelength in nm, restricted to the validated window.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Wavelength(f64);

impl Wavelength {
    pub fn new(nm: f64) -> Result<Wavelength> {
        if nm.is_finite() && (WINDOW_MIN_NM..=WINDOW_MAX_NM).contains(&nm) {
            Ok(Wavelength(nm))
        } else {
            Err(domain(format!(
                "wavelength {nm} nm outside {WINDOW_MIN_NM}-{WINDOW_MAX_NM} nm"
            )))
        }
    }

    pub fn from_thz(thz: f64) -> Result<Wavelength> {
        if !(thz > 0.0) {
            return Err(domain(format!("frequency {thz} THz")));
        }
        Wavelength::new(C_NM_THZ / thz)
    }

    pub fn nm(self) -> f64 {
        self.0
    }

    pub fn thz(self) -> f64 {
        C_NM_THZ / self.0
    }
}

impl TryFrom<f64> for Wavelength {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Wavelength::new(v)
    }
}

impl From<Wavelength> for f64 {
    fn from(w: Wavelength) -> f64 {
        w.0
    }
}

/// Optical frequency in THz of a wavelength given in nm.
pub fn wavelength_to_frequency(nm: f64) -> Result<f64> {
    Ok(Wavelength::new(nm)?.thz())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    O,
    E,
    S,
    C,
    L,
}

impl Band {
    pub const ALL: [Band; 5] = [Band::O, Band::E, Band::S, Band::C, Band::L];

    /// Band edges in nm. Each band is half-open except L, which includes 1625.
    pub fn range(self) -> (f64, f64) {
        match self {
            Band::O => (1260.0, 1360.0),
            Band::E => (1360.0, 1460.0),
            Band::S => (1460.0, 1530.0),
            Band::C => (1530.0, 1565.0),
            Band::L => (1565.0, 1625.0),
        }
    }

    pub fn contains(self, nm: f64) -> bool {
        let (lo, hi) = self.range();
        if self == Band::L {
            nm >= lo && nm <= hi
        } else {
            nm >= lo && nm < hi
        }
    }

    pub fn of(nm: f64) -> Option<Band> {
        Band::ALL.into_iter().find(|b| b.contains(nm))
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Band::O => "O",
            Band::E => "E",
            Band::S => "S",
            Band::C => "C",
            Band::L => "L",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Downstream,
    Upstream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Continuous,
    Tdma,
}

/// Role of a channel inside its standard's plan; used to load subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelGroup {
    Downstream,
    Fronthaul,
    Upstream,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalChannel {
    pub wavelength: Wavelength,
    /// Launch power at the injection point, dBm. `-inf` means switched off.
    pub launch_power_dbm: f64,
    pub direction: Direction,
    pub mode: Mode,
    pub group: ChannelGroup,
}

impl ClassicalChannel {
    pub fn new(
        wavelength: Wavelength,
        launch_power_dbm: f64,
        direction: Direction,
        mode: Mode,
        group: ChannelGroup,
    ) -> Result<ClassicalChannel> {
        if launch_power_dbm.is_nan() || launch_power_dbm > MAX_LAUNCH_DBM {
            return Err(Error::Config(format!(
                "launch power {launch_power_dbm} dBm above {MAX_LAUNCH_DBM} dBm"
            )));
        }
        if mode == Mode::Tdma && direction != Direction::Upstream {
            return Err(Error::Config("tdma mode is upstream only".into()));
        }
        Ok(ClassicalChannel {
            wavelength,
            launch_power_dbm,
            direction,
            mode,
            group,
        })
    }

    pub fn power_w(&self) -> f64 {
        crate::units::dbm_to_watt(self.launch_power_dbm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standard {
    Gpon,
    Ngpon2,
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    pub standard: Standard,
    pub channels: Vec<ClassicalChannel>,
    pub quantum_wavelength: Wavelength,
}

/// Minimum spacing between the quantum channel and any classical channel
/// accepted when a plan is built. The receive filter imposes its own,
/// usually wider, clearance in [`ChannelPlan::check_clearance`].
pub const MIN_PLAN_SEPARATION_NM: f64 = 1.0;

impl ChannelPlan {
    pub fn new(
        standard: Standard,
        channels: Vec<ClassicalChannel>,
        quantum_wavelength: Wavelength,
    ) -> Result<ChannelPlan> {
        let plan = ChannelPlan {
            standard,
            channels,
            quantum_wavelength,
        };
        plan.check_separation(MIN_PLAN_SEPARATION_NM)?;
        Ok(plan)
    }

    fn check_separation(&self, min_nm: f64) -> Result<()> {
        let q = self.quantum_wavelength.nm();
        for ch in &self.channels {
            let d = (ch.wavelength.nm() - q).abs();
            if d < min_nm {
                return Err(Error::Config(format!(
                    "quantum wavelength {q} nm is {d:.3} nm from classical channel at {} nm (minimum {min_nm:.3} nm)",
                    ch.wavelength.nm()
                )));
            }
        }
        Ok(())
    }

    /// Every classical channel must sit at least one filter bandwidth away
    /// from the quantum wavelength.
    pub fn check_clearance(&self, filter: &FilterSpec) -> Result<()> {
        let bw = ghz_to_nm(filter.bandwidth_ghz, self.quantum_wavelength.nm());
        self.check_separation(bw.max(MIN_PLAN_SEPARATION_NM))
    }

    /// Same plan with only the listed groups kept.
    pub fn with_groups(&self, groups: &[ChannelGroup]) -> ChannelPlan {
        ChannelPlan {
            standard: self.standard,
            channels: self
                .channels
                .iter()
                .filter(|c| groups.contains(&c.group))
                .cloned()
                .collect(),
            quantum_wavelength: self.quantum_wavelength,
        }
    }
}

/// NG-PON2 channel grid. Channels in a group start at the given wavelength
/// and step toward lower frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NgPon2Grid {
    pub spacing_ghz: f64,
    pub downstream_start_nm: f64,
    pub downstream_count: usize,
    pub fronthaul_start_nm: f64,
    pub fronthaul_count: usize,
    pub upstream_start_nm: f64,
    pub upstream_count: usize,
}

impl Default for NgPon2Grid {
    fn default() -> Self {
        NgPon2Grid {
            spacing_ghz: 100.0,
            downstream_start_nm: 1596.0,
            downstream_count: 4,
            fronthaul_start_nm: 1550.0,
            fronthaul_count: 11,
            upstream_start_nm: 1532.0,
            upstream_count: 4,
        }
    }
}

/// Launch-power overrides and channel loading applied on top of a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanOverrides {
    /// Groups that carry light. Missing groups are dark.
    pub load: Vec<ChannelGroup>,
    pub downstream_dbm: Option<f64>,
    pub fronthaul_dbm: Option<f64>,
    pub upstream_dbm: Option<f64>,
    pub ngpon2_grid: NgPon2Grid,
}

impl Default for PlanOverrides {
    fn default() -> Self {
        PlanOverrides {
            load: vec![
                ChannelGroup::Downstream,
                ChannelGroup::Fronthaul,
                ChannelGroup::Upstream,
            ],
            downstream_dbm: None,
            fronthaul_dbm: None,
            upstream_dbm: None,
            ngpon2_grid: NgPon2Grid::default(),
        }
    }
}

pub const GPON_DOWNSTREAM_NM: f64 = 1489.0;
pub const GPON_UPSTREAM_NM: f64 = 1310.0;
pub const GPON_DOWNSTREAM_DBM: f64 = 2.2;
pub const GPON_UPSTREAM_DBM: f64 = 0.3;
/// Per-channel NG-PON2 launch power used when no override is given.
pub const NGPON2_CHANNEL_DBM: f64 = 9.0;

/// Builds the preset plan of a standard, applying overrides.
pub fn build_channel_plan(
    standard: Standard,
    quantum: Wavelength,
    overrides: &PlanOverrides,
) -> Result<ChannelPlan> {
    let loaded = |g| overrides.load.contains(&g);
    let mut channels = Vec::new();
    match standard {
        Standard::Gpon => {
            if loaded(ChannelGroup::Downstream) {
                channels.push(ClassicalChannel::new(
                    Wavelength::new(GPON_DOWNSTREAM_NM)?,
                    overrides.downstream_dbm.unwrap_or(GPON_DOWNSTREAM_DBM),
                    Direction::Downstream,
                    Mode::Continuous,
                    ChannelGroup::Downstream,
                )?);
            }
            if loaded(ChannelGroup::Upstream) {
                channels.push(ClassicalChannel::new(
                    Wavelength::new(GPON_UPSTREAM_NM)?,
                    overrides.upstream_dbm.unwrap_or(GPON_UPSTREAM_DBM),
                    Direction::Upstream,
                    Mode::Tdma,
                    ChannelGroup::Upstream,
                )?);
            }
        }
        Standard::Ngpon2 => {
            let g = &overrides.ngpon2_grid;
            if !(g.spacing_ghz > 0.0) {
                return Err(Error::Config("grid spacing must be positive".into()));
            }
            let groups = [
                (
                    ChannelGroup::Downstream,
                    g.downstream_start_nm,
                    g.downstream_count,
                    overrides.downstream_dbm,
                    Direction::Downstream,
                    Mode::Continuous,
                ),
                (
                    ChannelGroup::Fronthaul,
                    g.fronthaul_start_nm,
                    g.fronthaul_count,
                    overrides.fronthaul_dbm,
                    Direction::Downstream,
                    Mode::Continuous,
                ),
                (
                    ChannelGroup::Upstream,
                    g.upstream_start_nm,
                    g.upstream_count,
                    overrides.upstream_dbm,
                    Direction::Upstream,
                    Mode::Tdma,
                ),
            ];
            for (group, start, count, dbm, dir, mode) in groups {
                if !loaded(group) {
                    continue;
                }
                let f0 = Wavelength::new(start)?.thz();
                for i in 0..count {
                    let f = f0 - i as f64 * g.spacing_ghz * 1e-3;
                    channels.push(ClassicalChannel::new(
                        Wavelength::from_thz(f)?,
                        dbm.unwrap_or(NGPON2_CHANNEL_DBM),
                        dir,
                        mode,
                        group,
                    )?);
                }
            }
        }
        Standard::Mixed => {
            return Err(Error::Config(
                "mixed trees are assembled by the planner, not from a preset".into(),
            ))
        }
    }
    ChannelPlan::new(standard, channels, quantum)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterShape {
    Rectangular,
    SuperGaussian { order: u32 },
    /// Relative transmission in dB (0 at the peak) against wavelength in nm.
    Tabulated(Curve),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub center: Wavelength,
    pub bandwidth_ghz: f64,
    pub shape: FilterShape,
    pub insertion_loss_db: f64,
    pub stopband_rejection_db: f64,
}

impl FilterSpec {
    pub fn new(
        center: Wavelength,
        bandwidth_ghz: f64,
        shape: FilterShape,
        insertion_loss_db: f64,
        stopband_rejection_db: f64,
    ) -> Result<FilterSpec> {
        if !(bandwidth_ghz > 0.0) || !bandwidth_ghz.is_finite() {
            return Err(Error::Config("filter bandwidth must be positive".into()));
        }
        if !(insertion_loss_db >= 0.0) || !(stopband_rejection_db > 0.0) {
            return Err(Error::Config(
                "filter losses must be non-negative and rejection positive".into(),
            ));
        }
        match &shape {
            FilterShape::SuperGaussian { order } if *order == 0 => {
                return Err(Error::Config("super-Gaussian order must be >= 1".into()))
            }
            FilterShape::Tabulated(curve) => check_tabulated(curve)?,
            _ => {}
        }
        Ok(FilterSpec {
            center,
            bandwidth_ghz,
            shape,
            insertion_loss_db,
            stopband_rejection_db,
        })
    }

    /// 800 GHz O-band LAN-WDM demultiplexer port.
    pub fn lan_wdm(center: Wavelength) -> FilterSpec {
        FilterSpec {
            center,
            bandwidth_ghz: 800.0,
            shape: FilterShape::SuperGaussian { order: 4 },
            insertion_loss_db: 1.5,
            stopband_rejection_db: 30.0,
        }
    }

    /// 100 GHz C-band DWDM add/drop port.
    pub fn dwdm(center: Wavelength) -> FilterSpec {
        FilterSpec {
            center,
            bandwidth_ghz: 100.0,
            shape: FilterShape::SuperGaussian { order: 4 },
            insertion_loss_db: 1.0,
            stopband_rejection_db: 30.0,
        }
    }

    /// 14.6 GHz fiber Bragg grating.
    pub fn fbg(center: Wavelength) -> FilterSpec {
        FilterSpec {
            center,
            bandwidth_ghz: 14.6,
            shape: FilterShape::SuperGaussian { order: 2 },
            insertion_loss_db: 0.5,
            stopband_rejection_db: 30.0,
        }
    }

    fn floor(&self) -> f64 {
        10f64.powf(-self.stopband_rejection_db / 10.0)
    }

    /// Relative passband shape in [0, 1], before insertion loss.
    pub fn shape_at(&self, nm: f64) -> f64 {
        let half_bw = 0.5 * self.bandwidth_ghz * 1e-3;
        let dnu = (C_NM_THZ / nm - self.center.thz()).abs();
        match &self.shape {
            FilterShape::Rectangular => {
                if dnu <= half_bw {
                    1.0
                } else {
                    0.0
                }
            }
            FilterShape::SuperGaussian { order } => {
                let x = dnu / half_bw;
                (-std::f64::consts::LN_2 * x.powi(2 * *order as i32)).exp()
            }
            FilterShape::Tabulated(curve) => match curve.eval(nm) {
                Some(db) => 10f64.powf((db - curve.max_y().1) / 10.0),
                None => 0.0,
            },
        }
    }

    /// Wavelength interval (nm) outside which the shape is below the
    /// stopband floor. Integration is truncated to it.
    pub fn support(&self) -> (f64, f64) {
        let f0 = self.center.thz();
        let half_bw = 0.5 * self.bandwidth_ghz * 1e-3;
        let half = match &self.shape {
            FilterShape::Rectangular => half_bw,
            FilterShape::SuperGaussian { order } => {
                let x = ((1.0 / self.floor()).ln() / std::f64::consts::LN_2)
                    .powf(1.0 / (2.0 * *order as f64));
                x * half_bw
            }
            FilterShape::Tabulated(curve) => return (curve.x_min(), curve.x_max()),
        };
        (C_NM_THZ / (f0 + half), C_NM_THZ / (f0 - half))
    }
}

fn check_tabulated(curve: &Curve) -> Result<()> {
    let (peak_x, _) = curve.max_y();
    let pts: Vec<(f64, f64)> = curve.points().collect();
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let rising_ok = x1 <= peak_x && y1 >= y0;
        let falling_ok = x0 >= peak_x && y1 <= y0;
        if !(rising_ok || falling_ok) {
            return Err(Error::Config(format!(
                "tabulated filter is not monotone toward the stopband between {x0} and {x1} nm"
            )));
        }
    }
    Ok(())
}

/// Linear power transmission of the filter at `nm`.
pub fn filter_transmission(f: &FilterSpec, nm: f64) -> f64 {
    10f64.powf(-f.insertion_loss_db / 10.0) * f.shape_at(nm)
}

/// Integrates a spectral rate density (per nm) against the filter response.
pub fn integrate_inband(density: impl Fn(f64) -> f64, f: &FilterSpec) -> Result<f64> {
    integrate_inband_tol(density, f, 1e-6)
}

pub fn integrate_inband_tol(
    density: impl Fn(f64) -> f64,
    f: &FilterSpec,
    rel_tol: f64,
) -> Result<f64> {
    let (lo, hi) = f.support();
    if lo < WINDOW_MIN_NM || hi > WINDOW_MAX_NM {
        return Err(domain(format!(
            "filter support {lo:.2}-{hi:.2} nm leaves the validated window"
        )));
    }
    let bad = std::cell::Cell::new(None);
    let v = adaptive_simpson(
        |x| {
            let d = density(x);
            if !(d.is_finite() && d >= 0.0) && bad.get().is_none() {
                bad.set(Some((x, d)));
            }
            d * filter_transmission(f, x)
        },
        lo,
        hi,
        rel_tol,
    );
    if let Some((x, d)) = bad.get() {
        return Err(domain(format!("density undefined at {x} nm (value {d})")));
    }
    Ok(v.max(0.0))
}

const SIMPSON_PANELS: usize = 32;
const SIMPSON_MAX_DEPTH: u32 = 30;

/// Adaptive Simpson quadrature with a relative tolerance on the total.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / SIMPSON_PANELS as f64;
    let mut panels = Vec::with_capacity(SIMPSON_PANELS);
    let mut rough = 0.0;
    let mut fa = f(a);
    for i in 0..SIMPSON_PANELS {
        let x0 = a + i as f64 * h;
        let x1 = if i + 1 == SIMPSON_PANELS { b } else { x0 + h };
        let xm = 0.5 * (x0 + x1);
        let (fm, fb) = (f(xm), f(x1));
        let s = (x1 - x0) / 6.0 * (fa + 4.0 * fm + fb);
        rough += s.abs();
        panels.push((x0, x1, fa, fm, fb, s));
        fa = fb;
    }
    if !rough.is_finite() {
        return rough;
    }
    if rough == 0.0 {
        return 0.0;
    }
    let eps = rel_tol * rough / SIMPSON_PANELS as f64;
    panels
        .into_iter()
        .map(|(x0, x1, fa, fm, fb, s)| simpson_step(&f, x0, x1, fa, fm, fb, s, eps, SIMPSON_MAX_DEPTH))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || !delta.is_finite() || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}
