//! Optical distribution network: losses along the quantum path and routing of
//! every classical pump to the Raman noise it delivers at the CO receiver.
//!
//! Layout: downstream light leaves the CO on `feeder_ds`, upstream light
//! (quantum channel included) returns on `feeder_us`. Both feeders meet a
//! 2:N splitter; `drop` connects each splitter port to an ONU. Light crossing
//! from one feeder port to the other is suppressed by the splitter
//! directivity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raman::{raman_density_at, FiberSpan, Geometry, RamanProfile};
use crate::spectral::{ChannelGroup, ChannelPlan, ClassicalChannel, Direction, Mode, Wavelength};
use crate::units::{db_to_transmission, dbm_to_watt, watt_to_dbm};

#[derive(Debug, Clone, PartialEq)]
pub struct PonTopology {
    pub feeder_ds: FiberSpan,
    pub feeder_us: FiberSpan,
    pub drop: FiberSpan,
    pub split_m: u32,
    pub split_n: u32,
    pub n_onus_active: u32,
    pub splitter_excess_db: f64,
    /// Port-to-port isolation between the two feeder ports of the splitter.
    pub directivity_db: f64,
    /// Loss of the CO multiplexer and demultiplexer chain on the quantum path.
    pub co_mux_loss_db: f64,
    /// The quantum channel is multiplexed behind the first-stage 1:M split.
    pub quantum_bypasses_first_stage: bool,
}

impl PonTopology {
    pub fn validate(&self) -> Result<()> {
        if self.split_m < 1 || self.split_n < 1 {
            return Err(Error::Config("split ratios must be >= 1".into()));
        }
        if self.n_onus_active < 1 || self.n_onus_active > self.split_n {
            return Err(Error::Config(format!(
                "n_onus_active {} must lie in 1..={}",
                self.n_onus_active, self.split_n
            )));
        }
        for (name, v) in [
            ("splitter_excess_db", self.splitter_excess_db),
            ("directivity_db", self.directivity_db),
            ("co_mux_loss_db", self.co_mux_loss_db),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Loss of one pass through the N-way tree splitter.
    pub fn tree_split_db(&self) -> f64 {
        10.0 * (self.split_n as f64).log10() + self.splitter_excess_db
    }

    /// Loss of the first-stage 1:M split on the quantum path (zero when bypassed).
    pub fn first_stage_db(&self) -> f64 {
        if self.quantum_bypasses_first_stage || self.split_m == 1 {
            0.0
        } else {
            10.0 * (self.split_m as f64).log10() + self.splitter_excess_db
        }
    }

    /// Loss from the splitter's upstream feeder port to the receiver input.
    fn co_side_db(&self) -> f64 {
        self.first_stage_db() + self.co_mux_loss_db
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Path {
    OnuToCo,
    CoToOnu,
}

/// Passive loss (dB) between the ONU and the CO receiver input at `nm`.
pub fn path_loss(t: &PonTopology, path: Path, nm: f64) -> f64 {
    let feeder = match path {
        Path::OnuToCo => &t.feeder_us,
        Path::CoToOnu => &t.feeder_ds,
    };
    t.drop.loss_db(nm) + t.tree_split_db() + feeder.loss_db(nm) + t.co_side_db()
}

/// Replaces time-shared upstream bursts by one continuous source per
/// wavelength. ONUs take turns, so the equivalent source has the average of
/// the burst powers, not their sum.
pub fn fold_tdma_upstream(channels: &[ClassicalChannel]) -> Result<Vec<ClassicalChannel>> {
    let mut groups: BTreeMap<u64, Vec<&ClassicalChannel>> = BTreeMap::new();
    for ch in channels {
        if ch.mode != Mode::Tdma || ch.direction != Direction::Upstream {
            return Err(Error::Contract(format!(
                "channel at {} nm is not an upstream TDMA burst",
                ch.wavelength.nm()
            )));
        }
        groups.entry(ch.wavelength.nm().to_bits()).or_default().push(ch);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (_, members) in groups {
        let mean_w = members.iter().map(|c| c.power_w()).sum::<f64>() / members.len() as f64;
        let first = members[0];
        out.push(ClassicalChannel {
            wavelength: first.wavelength,
            launch_power_dbm: watt_to_dbm(mean_w),
            direction: Direction::Upstream,
            mode: Mode::Continuous,
            group: first.group,
        });
    }
    Ok(out)
}

/// Plan channels with TDMA bursts folded; continuous channels pass through.
pub fn effective_sources(plan: &ChannelPlan) -> Result<Vec<ClassicalChannel>> {
    let (tdma, mut rest): (Vec<_>, Vec<_>) = plan
        .channels
        .iter()
        .cloned()
        .partition(|c| c.mode == Mode::Tdma);
    rest.extend(fold_tdma_upstream(&tdma)?);
    Ok(rest)
}

/// Where the Raman light was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Feeder,
    Drop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEntry {
    /// Index of the source in the effective (folded) source list.
    pub source: usize,
    pub pump: Wavelength,
    pub pump_group: ChannelGroup,
    pub direction: Direction,
    pub segment: Segment,
    pub geometry: Geometry,
    /// W/nm at the receiver input.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseBudget {
    pub per_source: Vec<NoiseEntry>,
    /// W/nm at the receiver input, before the receive filter.
    pub total_density: f64,
}

impl NoiseBudget {
    pub fn segment_density(&self, segment: Segment) -> f64 {
        self.per_source
            .iter()
            .filter(|e| e.segment == segment)
            .map(|e| e.density)
            .sum()
    }
}

/// Visits every Raman contribution of one source at the probe wavelength.
/// Callback receives (segment, geometry, W/nm at the receiver input).
fn route(
    t: &PonTopology,
    profile: &RamanProfile,
    ch: &ClassicalChannel,
    probe_nm: f64,
    mut emit: impl FnMut(Segment, Geometry, f64) -> Result<()>,
) -> Result<()> {
    let p0 = ch.power_w();
    if p0 == 0.0 {
        return Ok(());
    }
    let pump_nm = ch.wavelength.nm();
    let split = db_to_transmission(t.tree_split_db());
    let co_side = db_to_transmission(t.co_side_db());
    let feeder_us_q = t.feeder_us.transmission(probe_nm);
    match ch.direction {
        Direction::Upstream => {
            // Generated along the drop, then through the splitter and up the feeder.
            let drop = raman_density_at(profile, probe_nm, pump_nm, p0, &t.drop, Geometry::Co)?;
            emit(Segment::Drop, Geometry::Co, drop * split * feeder_us_q * co_side)?;
            let pump_in_feeder = p0 * t.drop.transmission(pump_nm) * split;
            let feeder =
                raman_density_at(profile, probe_nm, pump_nm, pump_in_feeder, &t.feeder_us, Geometry::Co)?;
            emit(Segment::Feeder, Geometry::Co, feeder * co_side)?;
        }
        Direction::Downstream => {
            let isolation = db_to_transmission(t.directivity_db);
            // Forward noise from the downstream feeder leaking into the upstream one.
            let fwd = raman_density_at(profile, probe_nm, pump_nm, p0, &t.feeder_ds, Geometry::Co)?;
            emit(Segment::Feeder, Geometry::Co, fwd * isolation * feeder_us_q * co_side)?;
            // Pump leaking into the upstream feeder, scattering toward the CO.
            let leak = p0 * t.feeder_ds.transmission(pump_nm) * isolation;
            let us = raman_density_at(profile, probe_nm, pump_nm, leak, &t.feeder_us, Geometry::Co)?;
            emit(Segment::Feeder, Geometry::Co, us * co_side)?;
            // Backscatter from every lit drop, back through the splitter.
            let pump_in_drop = p0 * t.feeder_ds.transmission(pump_nm) * split;
            let back = raman_density_at(profile, probe_nm, pump_nm, pump_in_drop, &t.drop, Geometry::Counter)?;
            emit(
                Segment::Drop,
                Geometry::Counter,
                back * split * t.n_onus_active as f64 * feeder_us_q * co_side,
            )?;
        }
    }
    Ok(())
}

/// Raman density (W/nm) at the receiver input at `probe_nm`, split into
/// (drop, feeder) parts, for already folded sources.
pub fn density_by_segment(
    t: &PonTopology,
    profile: &RamanProfile,
    sources: &[ClassicalChannel],
    probe_nm: f64,
) -> Result<(f64, f64)> {
    let (mut drop, mut feeder) = (0.0, 0.0);
    for ch in sources {
        route(t, profile, ch, probe_nm, |seg, _, d| {
            match seg {
                Segment::Drop => drop += d,
                Segment::Feeder => feeder += d,
            }
            Ok(())
        })?;
    }
    Ok((drop, feeder))
}

pub fn aggregate_raman_noise(
    t: &PonTopology,
    plan: &ChannelPlan,
    profile: &RamanProfile,
    probe: Wavelength,
) -> Result<NoiseBudget> {
    t.validate()?;
    let sources = effective_sources(plan)?;
    let mut budget = NoiseBudget::default();
    for (i, ch) in sources.iter().enumerate() {
        route(t, profile, ch, probe.nm(), |segment, geometry, density| {
            budget.per_source.push(NoiseEntry {
                source: i,
                pump: ch.wavelength,
                pump_group: ch.group,
                direction: ch.direction,
                segment,
                geometry,
                density,
            });
            Ok(())
        })?;
    }
    budget.total_density = budget.per_source.iter().map(|e| e.density).sum();
    Ok(budget)
}

/// Scales a dBm launch power by a linear factor; a factor of zero switches it off.
pub fn scaled_power_dbm(dbm: f64, factor: f64) -> f64 {
    if factor <= 0.0 {
        f64::NEG_INFINITY
    } else {
        watt_to_dbm(dbm_to_watt(dbm) * factor)
    }
}
