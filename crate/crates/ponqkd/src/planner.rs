//! Quantum wavelength planning on a tree shared by GPON and NG-PON2
//! subscribers.
//!
//! A take-rate `t` moves a fraction of the upstream ONU population from GPON
//! to NG-PON2: GPON upstream power scales with `1 - t`, NG-PON2 upstream with
//! `t`. Downstream and fronthaul channels are shared by everyone on the tree,
//! so they are either fully on (standard present) or off.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::optical_power_to_photon_rate;
use crate::error::{Error, Result};
use crate::odn::{density_by_segment, effective_sources, scaled_power_dbm, PonTopology};
use crate::raman::RamanProfile;
use crate::spectral::{Band, ChannelPlan, ClassicalChannel, Direction, Wavelength};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presence {
    Always,
    /// Active while any GPON subscriber remains (take-rate below 1).
    Gpon,
    /// Active once NG-PON2 is deployed (take-rate above 0).
    Ngpon2,
}

/// A wavelength range the quantum channel must avoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservedZone {
    pub low_nm: f64,
    pub high_nm: f64,
    pub when: Presence,
}

impl ReservedZone {
    /// NG-PON2 TWDM upstream band, kept clear even where the current plan has
    /// no channel.
    pub fn ngpon2_twdm_upstream() -> ReservedZone {
        ReservedZone {
            low_nm: 1532.0,
            high_nm: 1540.0,
            when: Presence::Ngpon2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub step_nm: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            start_nm: 1260.0,
            stop_nm: 1625.0,
            step_nm: 0.5,
        }
    }
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step_nm > 0.0) || !(self.stop_nm >= self.start_nm) {
            return Err(Error::Config("grid needs a positive step and stop >= start".into()));
        }
        Wavelength::new(self.start_nm)?;
        Wavelength::new(self.stop_nm)?;
        let n = ((self.stop_nm - self.start_nm) / self.step_nm + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.start_nm + i as f64 * self.step_nm).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedTreeConfig {
    pub topology: PonTopology,
    pub gpon_plan: ChannelPlan,
    pub ngpon2_plan: ChannelPlan,
    pub take_rate: f64,
    pub candidate_bands: Vec<Band>,
    /// Half-width of the exclusion zone around each classical channel, nm.
    pub guard_nm: f64,
    pub reserved: Vec<ReservedZone>,
    pub profile: RamanProfile,
    /// Detected counts/s per photon/s at the receiver input, including the
    /// time-tag window.
    pub detection_gain: f64,
    pub grid: Grid,
}

impl MixedTreeConfig {
    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.take_rate) {
            return Err(Error::Config(format!("take-rate {} outside [0, 1]", self.take_rate)));
        }
        if !(self.guard_nm >= 0.0) || !(self.detection_gain >= 0.0) {
            return Err(Error::Config("guard and detection gain must be >= 0".into()));
        }
        self.topology.validate()
    }

    pub fn gpon_present(&self) -> bool {
        self.take_rate < 1.0
    }

    pub fn ngpon2_present(&self) -> bool {
        self.take_rate > 0.0
    }

    fn present(&self, when: Presence) -> bool {
        match when {
            Presence::Always => true,
            Presence::Gpon => self.gpon_present(),
            Presence::Ngpon2 => self.ngpon2_present(),
        }
    }

    /// Classical sources lit at this take-rate, with upstream powers scaled.
    pub fn active_channels(&self) -> Vec<ClassicalChannel> {
        let mut out = Vec::new();
        let mut add = |plan: &ChannelPlan, share: f64, present: bool| {
            for ch in &plan.channels {
                let factor = match ch.direction {
                    Direction::Upstream => share,
                    Direction::Downstream => f64::from(u8::from(present)),
                };
                if factor > 0.0 {
                    let mut c = ch.clone();
                    c.launch_power_dbm = scaled_power_dbm(ch.launch_power_dbm, factor);
                    out.push(c);
                }
            }
        };
        add(&self.gpon_plan, 1.0 - self.take_rate, self.gpon_present());
        add(&self.ngpon2_plan, self.take_rate, self.ngpon2_present());
        out
    }

    /// Wavelength ranges closed to the quantum channel at this take-rate.
    pub fn exclusion_zones(&self) -> Vec<(f64, f64)> {
        let mut zones: Vec<(f64, f64)> = self
            .active_channels()
            .iter()
            .map(|c| (c.wavelength.nm() - self.guard_nm, c.wavelength.nm() + self.guard_nm))
            .collect();
        for r in &self.reserved {
            if self.present(r.when) {
                zones.push((r.low_nm - self.guard_nm, r.high_nm + self.guard_nm));
            }
        }
        zones
    }

    pub fn feasible(&self, nm: f64) -> bool {
        self.candidate_bands.iter().any(|b| b.contains(nm))
            && !self.exclusion_zones().iter().any(|&(lo, hi)| nm >= lo && nm <= hi)
    }
}

/// Detected noise density (counts/s/nm) at each grid wavelength for an
/// explicit source list.
pub fn spectrum_for_sources(
    topology: &PonTopology,
    profile: &RamanProfile,
    sources: &[ClassicalChannel],
    detection_gain: f64,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    grid.par_iter()
        .map(|&nm| {
            Wavelength::new(nm)?;
            let (d, f) = density_by_segment(topology, profile, sources, nm)?;
            Ok((nm, optical_power_to_photon_rate(d + f, nm) * detection_gain))
        })
        .collect()
}

pub fn noise_spectrum(cfg: &MixedTreeConfig, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    cfg.check()?;
    let plan = ChannelPlan {
        standard: crate::spectral::Standard::Mixed,
        channels: cfg.active_channels(),
        quantum_wavelength: cfg.ngpon2_plan.quantum_wavelength,
    };
    let sources = effective_sources(&plan)?;
    spectrum_for_sources(&cfg.topology, &cfg.profile, &sources, cfg.detection_gain, grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub take_rate: f64,
    pub lambda_opt: Wavelength,
    pub band: Band,
    /// Detected counts/s/nm at `lambda_opt`.
    pub noise_at_opt: f64,
    pub curve: Vec<(f64, f64)>,
}

/// Minimum-noise feasible grid point; ties go to the longer wavelength.
pub fn optimal_lambda(cfg: &MixedTreeConfig) -> Result<PlanResult> {
    let grid = cfg.grid.points()?;
    let curve = noise_spectrum(cfg, &grid)?;
    let zones = cfg.exclusion_zones();
    let mut best: Option<(f64, f64)> = None;
    for &(nm, v) in &curve {
        let open = cfg.candidate_bands.iter().any(|b| b.contains(nm))
            && !zones.iter().any(|&(lo, hi)| nm >= lo && nm <= hi);
        if !open {
            continue;
        }
        best = match best {
            Some((bnm, bv)) if v > bv || (v == bv && nm < bnm) => Some((bnm, bv)),
            _ => Some((nm, v)),
        };
    }
    let (nm, v) = best.ok_or_else(|| Error::Planning(format!("no feasible wavelength at take-rate {}", cfg.take_rate)))?;
    Ok(PlanResult {
        take_rate: cfg.take_rate,
        lambda_opt: Wavelength::new(nm)?,
        band: Band::of(nm).expect("candidate bands lie inside the band plan"),
        noise_at_opt: v,
        curve,
    })
}
