//! Scenario files: schema, loading with includes, validation, and the run /
//! sweep drivers that turn a scenario into a [`RunArtifact`].
//!
//! Scenarios are TOML. A top-level `include = "file.toml"` pulls in another
//! file first (typically the shared `[calibration]` block); keys in the
//! including file win.

mod artifact;
mod presets;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use artifact::{LinkRow, McRow, Provenance, RunArtifact, Rows};
pub use presets::{preset_names, preset_text, scenario_dir, SCENARIO_DIR_ENV};

use crate::calibration::Calibration;
use crate::detector::SpadParams;
use crate::dps::{self, DpsLinkParams, LinkReport};
use crate::error::{Error, FieldError, Result};
use crate::odn::PonTopology;
use crate::planner::{self, Grid, MixedTreeConfig, PlanResult, ReservedZone};
use crate::raman::{smf_attenuation, FiberSpan, RamanProfile};
use crate::spectral::{
    build_channel_plan, Band, ChannelGroup, ChannelPlan, FilterShape, FilterSpec, NgPon2Grid, PlanOverrides, Standard,
    Wavelength,
};
use crate::table::Curve;

const MAX_INCLUDE_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Analytic,
    MonteCarlo,
    Sweep,
    Plan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    BudgetDb,
    FiberLength,
    SplitN,
    TakeRate,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::BudgetDb => "budget_db",
            Axis::FiberLength => "fiber_length",
            Axis::SplitN => "split_n",
            Axis::TakeRate => "take_rate",
        }
    }

    /// CSV header of the axis value column.
    pub fn header(self) -> &'static str {
        match self {
            Axis::BudgetDb => "attenuation_dB",
            Axis::FiberLength => "fiber_length_km",
            Axis::SplitN => "split_n",
            Axis::TakeRate => "take_rate",
        }
    }

    pub fn parse(s: &str) -> Result<Axis> {
        match s {
            "budget_db" => Ok(Axis::BudgetDb),
            "fiber_length" => Ok(Axis::FiberLength),
            "split_n" => Ok(Axis::SplitN),
            "take_rate" => Ok(Axis::TakeRate),
            other => Err(Error::Config(format!(
                "unknown sweep axis {other:?} (budget_db, fiber_length, split_n, take_rate)"
            ))),
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_load() -> Vec<ChannelGroup> {
    vec![ChannelGroup::Downstream, ChannelGroup::Fronthaul, ChannelGroup::Upstream]
}

fn is_default_load(v: &[ChannelGroup]) -> bool {
    v == default_load().as_slice()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSection {
    pub standard: Standard,
    pub quantum_wavelength_nm: f64,
    #[serde(default = "default_load", skip_serializing_if = "is_default_load")]
    pub load: Vec<ChannelGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downstream_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fronthaul_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upstream_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ngpon2_grid: Option<NgPon2Grid>,
}

impl PlanSection {
    fn overrides(&self) -> PlanOverrides {
        PlanOverrides {
            load: self.load.clone(),
            downstream_dbm: self.downstream_dbm,
            fronthaul_dbm: self.fronthaul_dbm,
            upstream_dbm: self.upstream_dbm,
            ngpon2_grid: self.ngpon2_grid.clone().unwrap_or_default(),
        }
    }
}

fn d_feeder_ds() -> f64 {
    15.2
}
fn d_feeder_us() -> f64 {
    13.2
}
fn d_drop() -> f64 {
    0.256
}
fn d_split_m() -> u32 {
    2
}
fn d_split_n() -> u32 {
    16
}
fn d_one() -> u32 {
    1
}
fn d_excess() -> f64 {
    1.5
}
fn d_directivity() -> f64 {
    55.0
}
fn d_true() -> bool {
    true
}
fn d_temperature() -> f64 {
    crate::raman::DEFAULT_TEMPERATURE_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySection {
    #[serde(default = "d_feeder_ds")]
    pub feeder_ds_km: f64,
    #[serde(default = "d_feeder_us")]
    pub feeder_us_km: f64,
    #[serde(default = "d_drop")]
    pub drop_km: f64,
    #[serde(default = "d_split_m")]
    pub split_m: u32,
    #[serde(default = "d_split_n")]
    pub split_n: u32,
    #[serde(default = "d_one")]
    pub n_onus_active: u32,
    #[serde(default = "d_excess")]
    pub splitter_excess_db: f64,
    #[serde(default = "d_directivity")]
    pub directivity_db: f64,
    /// Defaults to the calibrated value for the plan's standard.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub co_mux_loss_db: Option<f64>,
    #[serde(default = "d_true")]
    pub quantum_bypasses_first_stage: bool,
    #[serde(default = "d_temperature")]
    pub temperature_k: f64,
    #[serde(default)]
    pub feeder_ds_connector_db: f64,
    #[serde(default)]
    pub feeder_us_connector_db: f64,
    #[serde(default)]
    pub drop_connector_db: f64,
    /// Two-column (nm, dB/km) file replacing the bundled attenuation curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation_table: Option<String>,
    /// Two-column (THz, normalized gain) file replacing the bundled Raman shape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raman_table: Option<String>,
}

impl Default for TopologySection {
    fn default() -> Self {
        TopologySection {
            feeder_ds_km: d_feeder_ds(),
            feeder_us_km: d_feeder_us(),
            drop_km: d_drop(),
            split_m: d_split_m(),
            split_n: d_split_n(),
            n_onus_active: 1,
            splitter_excess_db: d_excess(),
            directivity_db: d_directivity(),
            co_mux_loss_db: None,
            quantum_bypasses_first_stage: true,
            temperature_k: d_temperature(),
            feeder_ds_connector_db: 0.0,
            feeder_us_connector_db: 0.0,
            drop_connector_db: 0.0,
            attenuation_table: None,
            raman_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackToBackSection {
    /// Attenuator setting between transmitter and receive filter, dB.
    pub attenuation_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterPreset {
    LanWdm,
    Dwdm,
    Fbg,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rectangular,
    Supergaussian,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSection {
    pub preset: FilterPreset,
    /// Defaults to the quantum wavelength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insertion_loss_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopband_rejection_db: Option<f64>,
    /// Two-column (nm, relative dB) file for the tabulated shape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

fn d_symbol_rate() -> f64 {
    1e9
}
fn d_mu() -> f64 {
    0.1
}
fn d_port() -> f64 {
    0.5
}
fn d_ec() -> f64 {
    1.16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpsSection {
    #[serde(default = "d_symbol_rate")]
    pub symbol_rate: f64,
    #[serde(default = "d_mu")]
    pub mu: f64,
    #[serde(default = "d_port")]
    pub port_fraction: f64,
    #[serde(default = "d_ec")]
    pub ec_efficiency: f64,
    /// Transmitter is a directly modulated laser: adds the calibrated DML error.
    #[serde(default = "d_true")]
    pub dml_transmitter: bool,
}

impl Default for DpsSection {
    fn default() -> Self {
        DpsSection {
            symbol_rate: d_symbol_rate(),
            mu: d_mu(),
            port_fraction: d_port(),
            ec_efficiency: d_ec(),
            dml_transmitter: true,
        }
    }
}

fn d_efficiency() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpadSection {
    #[serde(default = "d_efficiency")]
    pub efficiency: f64,
}

impl Default for SpadSection {
    fn default() -> Self {
        SpadSection { efficiency: d_efficiency() }
    }
}

fn d_pulses() -> u64 {
    10_000_000
}
fn d_block() -> u64 {
    dps::DEFAULT_BLOCK_PULSES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSection {
    #[serde(default = "d_pulses")]
    pub n_pulses: u64,
    #[serde(default = "d_block")]
    pub block_pulses: u64,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            n_pulses: d_pulses(),
            block_pulses: d_block(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub axis: Axis,
    pub values: Vec<f64>,
}

fn d_take_rates() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}
fn d_guard() -> f64 {
    5.0
}
fn d_bands() -> Vec<Band> {
    vec![Band::E, Band::S, Band::C]
}
fn d_reserved() -> Vec<ReservedZone> {
    vec![ReservedZone::ngpon2_twdm_upstream()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerSection {
    #[serde(default = "d_take_rates")]
    pub take_rates: Vec<f64>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "d_guard")]
    pub guard_nm: f64,
    #[serde(default = "d_bands")]
    pub candidate_bands: Vec<Band>,
    #[serde(default = "d_reserved")]
    pub reserved: Vec<ReservedZone>,
}

impl Default for PlannerSection {
    fn default() -> Self {
        PlannerSection {
            take_rates: d_take_rates(),
            grid: Grid::default(),
            guard_nm: d_guard(),
            candidate_bands: d_bands(),
            reserved: d_reserved(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Consumed while loading; a loaded config never carries it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include: Option<String>,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub mode: RunMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub plan: PlanSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back_to_back: Option<BackToBackSection>,
    pub filter: FilterSection,
    #[serde(default)]
    pub dps: DpsSection,
    #[serde(default)]
    pub spad: SpadSection,
    pub calibration: Calibration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerSection>,
}

fn parse_table(text: &str, origin: &Path) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Where a scenario text came from; decides how includes and table paths
/// are resolved.
#[derive(Debug, Clone)]
enum Origin {
    File(PathBuf),
    Preset(String),
}

impl Origin {
    fn label(&self) -> PathBuf {
        match self {
            Origin::File(p) => p.clone(),
            Origin::Preset(n) => PathBuf::from(format!("<preset {n}>")),
        }
    }

    fn dir(&self) -> Option<PathBuf> {
        match self {
            Origin::File(p) => p.parent().map(Path::to_path_buf),
            Origin::Preset(_) => None,
        }
    }
}

fn read_origin(origin: &Origin) -> Result<String> {
    match origin {
        Origin::File(p) => std::fs::read_to_string(p).map_err(|source| Error::Io {
            path: p.clone(),
            source,
        }),
        Origin::Preset(n) => preset_text(n)
            .map(str::to_string)
            .ok_or_else(|| Error::Config(format!("no preset named {n:?}"))),
    }
}

fn resolve_include(name: &str, from: &Origin) -> Result<Origin> {
    if let Some(dir) = from.dir() {
        let p = dir.join(name);
        if p.exists() {
            return Ok(Origin::File(p));
        }
    }
    let stem = name.strip_suffix(".toml").unwrap_or(name);
    if preset_text(stem).is_some() {
        return Ok(Origin::Preset(stem.to_string()));
    }
    Err(Error::Config(format!(
        "include {name:?} not found next to {}",
        from.label().display()
    )))
}

fn load_table(origin: &Origin, depth: usize) -> Result<toml::Table> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(Error::Config("include nesting too deep".into()));
    }
    let text = read_origin(origin)?;
    let mut table = parse_table(&text, &origin.label())?;
    let include = match table.remove("include") {
        None => return Ok(table),
        Some(toml::Value::String(s)) => s,
        Some(_) => {
            return Err(Error::Validation(vec![FieldError::new("include", "must be a file name")]));
        }
    };
    let mut base = load_table(&resolve_include(&include, origin)?, depth + 1)?;
    merge(&mut base, table);
    Ok(base)
}

fn absolutize(path: &mut Option<String>, dir: Option<&Path>) {
    if let (Some(p), Some(dir)) = (path.as_mut(), dir) {
        let pb = Path::new(p.as_str());
        if pb.is_relative() {
            *p = dir.join(pb).to_string_lossy().into_owned();
        }
    }
}

fn from_table(table: toml::Table, origin: &Origin) -> Result<ScenarioConfig> {
    let mut unknown = Vec::new();
    let mut on_unknown = |path: serde_ignored::Path<'_>| {
        unknown.push(FieldError::new(path.to_string().replace("?.", ""), "unknown key"));
    };
    let de = serde_ignored::Deserializer::new(toml::Value::Table(table), &mut on_unknown);
    let parsed: std::result::Result<ScenarioConfig, _> = serde_path_to_error::deserialize(de);
    let mut cfg = match parsed {
        Ok(cfg) => cfg,
        Err(e) => {
            let path = e.path().to_string().replace("?.", "");
            unknown.push(FieldError::new(path, e.into_inner().to_string()));
            return Err(Error::Validation(unknown));
        }
    };
    let dir = origin.dir();
    if let Some(t) = cfg.topology.as_mut() {
        absolutize(&mut t.attenuation_table, dir.as_deref());
        absolutize(&mut t.raman_table, dir.as_deref());
    }
    absolutize(&mut cfg.filter.table, dir.as_deref());
    let mut errors = unknown;
    errors.extend(cfg.check());
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Validation(errors))
    }
}

/// Loads and validates a scenario file, resolving its include chain.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let origin = Origin::File(path.to_path_buf());
    from_table(load_table(&origin, 0)?, &origin)
}

/// Loads a bundled preset by name, e.g. `fig4b_lit_ngpon2_fbg`.
pub fn load_preset(name: &str) -> Result<ScenarioConfig> {
    let origin = Origin::Preset(name.to_string());
    from_table(load_table(&origin, 0)?, &origin)
}

/// Parses scenario text; includes resolve against `base_dir`, then presets.
pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<ScenarioConfig> {
    let label = base_dir
        .map(|d| d.join("<inline>"))
        .unwrap_or_else(|| PathBuf::from("<inline>"));
    let origin = Origin::File(label);
    let mut table = parse_table(text, &origin.label())?;
    if let Some(inc) = table.remove("include") {
        let name = inc
            .as_str()
            .ok_or_else(|| Error::Validation(vec![FieldError::new("include", "must be a file name")]))?;
        let mut base = load_table(&resolve_include(name, &origin)?, 1)?;
        merge(&mut base, table);
        table = base;
    }
    from_table(table, &origin)
}

/// Resolves a CLI argument: an existing file path, or a scenario name looked
/// up in the default scenario directory and then among the bundled presets.
pub fn resolve(arg: &str) -> Result<ScenarioConfig> {
    resolve_in(arg, &scenario_dir())
}

/// [`resolve`] with an explicit scenario directory.
pub fn resolve_in(arg: &str, dir: &Path) -> Result<ScenarioConfig> {
    let p = Path::new(arg);
    if p.is_file() {
        return load_scenario(p);
    }
    let stem = arg.strip_suffix(".toml").unwrap_or(arg);
    let candidate = dir.join(format!("{stem}.toml"));
    if candidate.is_file() {
        return load_scenario(&candidate);
    }
    if preset_text(stem).is_some() {
        return load_preset(stem);
    }
    Err(Error::Config(format!(
        "scenario {arg:?} is neither a file nor a preset (looked in {})",
        dir.display()
    )))
}

fn check_num(errors: &mut Vec<FieldError>, path: &str, v: f64, ok: bool, msg: &str) {
    if !v.is_finite() || !ok {
        errors.push(FieldError::new(path, format!("{msg}, got {v}")));
    }
}

impl ScenarioConfig {
    /// All range and consistency violations; empty when valid.
    pub fn check(&self) -> Vec<FieldError> {
        let mut e = Vec::new();
        if self.name.trim().is_empty() {
            e.push(FieldError::new("name", "must not be empty"));
        }
        let q = self.plan.quantum_wavelength_nm;
        if Wavelength::new(q).is_err() {
            e.push(FieldError::new("plan.quantum_wavelength_nm", format!("{q} nm outside 1200-1700 nm")));
        }
        for (k, v) in [
            ("plan.downstream_dbm", self.plan.downstream_dbm),
            ("plan.fronthaul_dbm", self.plan.fronthaul_dbm),
            ("plan.upstream_dbm", self.plan.upstream_dbm),
        ] {
            if let Some(v) = v {
                if v.is_nan() || v > crate::spectral::MAX_LAUNCH_DBM {
                    e.push(FieldError::new(k, format!("launch power {v} dBm above 15 dBm")));
                }
            }
        }
        match (&self.topology, &self.back_to_back) {
            (None, None) => e.push(FieldError::new("topology", "either [topology] or [back_to_back] is required")),
            (Some(_), Some(_)) => e.push(FieldError::new("back_to_back", "cannot be combined with [topology]")),
            _ => {}
        }
        if let Some(t) = &self.topology {
            for (k, v) in [
                ("topology.feeder_ds_km", t.feeder_ds_km),
                ("topology.feeder_us_km", t.feeder_us_km),
                ("topology.drop_km", t.drop_km),
                ("topology.splitter_excess_db", t.splitter_excess_db),
                ("topology.directivity_db", t.directivity_db),
                ("topology.feeder_ds_connector_db", t.feeder_ds_connector_db),
                ("topology.feeder_us_connector_db", t.feeder_us_connector_db),
                ("topology.drop_connector_db", t.drop_connector_db),
            ] {
                check_num(&mut e, k, v, v >= 0.0, "must be >= 0");
            }
            if let Some(m) = t.co_mux_loss_db {
                check_num(&mut e, "topology.co_mux_loss_db", m, m >= 0.0, "must be >= 0");
            }
            check_num(&mut e, "topology.temperature_k", t.temperature_k, t.temperature_k > 0.0, "must be > 0");
            if t.split_m < 1 {
                e.push(FieldError::new("topology.split_m", "must be >= 1"));
            }
            if t.split_n < 1 {
                e.push(FieldError::new("topology.split_n", "must be >= 1"));
            }
            if t.n_onus_active < 1 || t.n_onus_active > t.split_n {
                e.push(FieldError::new("topology.n_onus_active", "must lie in 1..=split_n"));
            }
        }
        if let Some(b) = &self.back_to_back {
            check_num(&mut e, "back_to_back.attenuation_db", b.attenuation_db, b.attenuation_db >= 0.0, "must be >= 0");
        }
        let f = &self.filter;
        if f.preset == FilterPreset::Custom && (f.bandwidth_ghz.is_none() || f.shape.is_none()) {
            e.push(FieldError::new("filter", "custom filters need bandwidth_ghz and shape"));
        }
        if let Some(bw) = f.bandwidth_ghz {
            check_num(&mut e, "filter.bandwidth_ghz", bw, bw > 0.0, "must be > 0");
        }
        if let Some(c) = f.center_nm {
            if Wavelength::new(c).is_err() {
                e.push(FieldError::new("filter.center_nm", format!("{c} nm outside 1200-1700 nm")));
            }
        }
        if f.shape == Some(ShapeKind::Tabulated) && f.table.is_none() {
            e.push(FieldError::new("filter.table", "required for a tabulated shape"));
        }
        if f.order == Some(0) {
            e.push(FieldError::new("filter.order", "must be >= 1"));
        }
        if let Some(il) = f.insertion_loss_db {
            check_num(&mut e, "filter.insertion_loss_db", il, il >= 0.0, "must be >= 0");
        }
        if let Some(r) = f.stopband_rejection_db {
            check_num(&mut e, "filter.stopband_rejection_db", r, r > 0.0, "must be > 0");
        }
        self.link_params().check("dps.", &mut e);
        // dps.check reports calibration-derived fields under dps.; re-home them.
        for fe in e.iter_mut() {
            for (from, to) in [
                ("dps.intrinsic_error", "calibration.intrinsic_error"),
                ("dps.dml_penalty", "calibration.dml_penalty"),
                ("dps.receiver_insertion_loss_db", "calibration.receiver_insertion_loss_db"),
            ] {
                if fe.path == from {
                    fe.path = to.to_string();
                }
            }
        }
        let mut spad_errors = Vec::new();
        self.spad_params().check("", &mut spad_errors);
        for mut fe in spad_errors {
            fe.path = match fe.path.as_str() {
                "efficiency" => "spad.efficiency".into(),
                "dark_rate" => "calibration.dark_rate_cps".into(),
                "dead_time" => "calibration.dead_time_s".into(),
                "window_accept" => "calibration.window_accept".into(),
                "afterpulse_frac" => "calibration.afterpulse_frac".into(),
                other => other.into(),
            };
            e.push(fe);
        }
        self.calibration.check(&mut e);
        if let Some(mc) = &self.monte_carlo {
            if mc.n_pulses == 0 {
                e.push(FieldError::new("monte_carlo.n_pulses", "must be >= 1"));
            }
            if mc.block_pulses == 0 {
                e.push(FieldError::new("monte_carlo.block_pulses", "must be >= 1"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                e.push(FieldError::new("sweep.values", "must not be empty"));
            }
            if let Err(err) = self.axis_allowed(s.axis) {
                e.push(FieldError::new("sweep.axis", err.to_string()));
            }
        }
        match self.mode {
            RunMode::Sweep if self.sweep.is_none() => e.push(FieldError::new("sweep", "required in sweep mode")),
            RunMode::Plan => {
                if self.topology.is_none() {
                    e.push(FieldError::new("topology", "required in plan mode"));
                }
                if self.plan.standard != Standard::Mixed {
                    e.push(FieldError::new("plan.standard", "plan mode works on a mixed tree"));
                }
            }
            _ => {
                if self.plan.standard == Standard::Mixed {
                    e.push(FieldError::new("plan.standard", "mixed trees are only evaluated in plan mode"));
                }
            }
        }
        if let Some(p) = &self.planner {
            for (i, t) in p.take_rates.iter().enumerate() {
                check_num(&mut e, &format!("planner.take_rates[{i}]"), *t, (0.0..=1.0).contains(t), "must be in [0, 1]");
            }
            check_num(&mut e, "planner.guard_nm", p.guard_nm, p.guard_nm >= 0.0, "must be >= 0");
            check_num(&mut e, "planner.grid.step_nm", p.grid.step_nm, p.grid.step_nm > 0.0, "must be > 0");
            if p.candidate_bands.is_empty() {
                e.push(FieldError::new("planner.candidate_bands", "must not be empty"));
            }
        }
        e
    }

    fn axis_allowed(&self, axis: Axis) -> Result<()> {
        let ok = match axis {
            Axis::BudgetDb => self.back_to_back.is_some(),
            Axis::FiberLength | Axis::SplitN => self.topology.is_some() && self.mode != RunMode::Plan,
            Axis::TakeRate => self.mode == RunMode::Plan,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "axis {} does not apply to this scenario (budget_db needs [back_to_back], fiber_length/split_n need [topology], take_rate needs plan mode)",
                axis.name()
            )))
        }
    }

    pub fn link_params(&self) -> DpsLinkParams {
        DpsLinkParams {
            symbol_rate: self.dps.symbol_rate,
            mu: self.dps.mu,
            intrinsic_error: self.calibration.intrinsic_error,
            dml_penalty: if self.dps.dml_transmitter { self.calibration.dml_penalty } else { 0.0 },
            receiver_insertion_loss_db: self.calibration.receiver_insertion_loss_db,
            port_fraction: self.dps.port_fraction,
            ec_efficiency: self.dps.ec_efficiency,
        }
    }

    pub fn spad_params(&self) -> SpadParams {
        SpadParams {
            efficiency: self.spad.efficiency,
            dark_rate: self.calibration.dark_rate_cps,
            dead_time: self.calibration.dead_time_s,
            window_accept: self.calibration.window_accept,
            afterpulse_frac: self.calibration.afterpulse_frac,
        }
    }

    pub fn quantum_wavelength(&self) -> Result<Wavelength> {
        Wavelength::new(self.plan.quantum_wavelength_nm)
    }

    pub fn raman_profile(&self) -> Result<RamanProfile> {
        let table = match self.topology.as_ref().and_then(|t| t.raman_table.as_ref()) {
            Some(p) => Curve::load(Path::new(p))?,
            None => crate::raman::silica_table(),
        };
        RamanProfile::new(table, self.calibration.raman_scale)
    }

    pub fn channel_plan(&self) -> Result<ChannelPlan> {
        build_channel_plan(self.plan.standard, self.quantum_wavelength()?, &self.plan.overrides())
    }

    pub fn filter_spec(&self) -> Result<FilterSpec> {
        let f = &self.filter;
        let center = Wavelength::new(f.center_nm.unwrap_or(self.plan.quantum_wavelength_nm))?;
        let mut spec = match f.preset {
            FilterPreset::LanWdm => FilterSpec::lan_wdm(center),
            FilterPreset::Dwdm => FilterSpec::dwdm(center),
            FilterPreset::Fbg | FilterPreset::Custom => FilterSpec::fbg(center),
        };
        if let Some(bw) = f.bandwidth_ghz {
            spec.bandwidth_ghz = bw;
        }
        if let Some(il) = f.insertion_loss_db {
            spec.insertion_loss_db = il;
        }
        if let Some(r) = f.stopband_rejection_db {
            spec.stopband_rejection_db = r;
        }
        let order = f.order.or(match spec.shape {
            FilterShape::SuperGaussian { order } => Some(order),
            _ => None,
        });
        match f.shape {
            None => {
                if let (Some(o), FilterShape::SuperGaussian { .. }) = (f.order, &spec.shape) {
                    spec.shape = FilterShape::SuperGaussian { order: o };
                }
            }
            Some(ShapeKind::Rectangular) => spec.shape = FilterShape::Rectangular,
            Some(ShapeKind::Supergaussian) => spec.shape = FilterShape::SuperGaussian { order: order.unwrap_or(4) },
            Some(ShapeKind::Tabulated) => {
                let path = f
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::Config("tabulated filter without table".into()))?;
                spec.shape = FilterShape::Tabulated(Curve::load(Path::new(path))?);
            }
        }
        FilterSpec::new(center, spec.bandwidth_ghz, spec.shape, spec.insertion_loss_db, spec.stopband_rejection_db)
    }

    pub fn pon_topology(&self) -> Result<Option<PonTopology>> {
        let Some(t) = &self.topology else {
            return Ok(None);
        };
        let attenuation = Arc::new(match &t.attenuation_table {
            Some(p) => Curve::load(Path::new(p))?,
            None => smf_attenuation(),
        });
        let span = |km: f64, conn: f64| -> Result<FiberSpan> {
            let mut s = FiberSpan::with_attenuation(km, attenuation.clone())?;
            s.temperature_k = t.temperature_k;
            s.connector_loss_db = conn;
            Ok(s)
        };
        let mux = t.co_mux_loss_db.unwrap_or(match self.plan.standard {
            Standard::Gpon => self.calibration.co_mux_loss_gpon_db,
            Standard::Ngpon2 | Standard::Mixed => self.calibration.co_mux_loss_ngpon2_db,
        });
        let topo = PonTopology {
            feeder_ds: span(t.feeder_ds_km, t.feeder_ds_connector_db)?,
            feeder_us: span(t.feeder_us_km, t.feeder_us_connector_db)?,
            drop: span(t.drop_km, t.drop_connector_db)?,
            split_m: t.split_m,
            split_n: t.split_n,
            n_onus_active: t.n_onus_active,
            splitter_excess_db: t.splitter_excess_db,
            directivity_db: t.directivity_db,
            co_mux_loss_db: mux,
            quantum_bypasses_first_stage: t.quantum_bypasses_first_stage,
        };
        topo.validate()?;
        Ok(Some(topo))
    }

    /// Copy of this config with one sweep axis set to `value`.
    pub fn with_axis(&self, axis: Axis, value: f64) -> Result<ScenarioConfig> {
        self.axis_allowed(axis)?;
        if !value.is_finite() {
            return Err(Error::Domain(format!("{} value {value}", axis.name())));
        }
        let mut c = self.clone();
        match axis {
            Axis::BudgetDb => {
                if value < 0.0 {
                    return Err(Error::Domain(format!("attenuation {value} dB")));
                }
                c.back_to_back = Some(BackToBackSection { attenuation_db: value });
            }
            Axis::FiberLength => {
                let t = c.topology.as_mut().expect("checked by axis_allowed");
                if value < t.drop_km {
                    return Err(Error::Domain(format!(
                        "fiber length {value} km shorter than the {} km drop",
                        t.drop_km
                    )));
                }
                t.feeder_us_km = value - t.drop_km;
                t.feeder_ds_km = value - t.drop_km;
            }
            Axis::SplitN => {
                let t = c.topology.as_mut().expect("checked by axis_allowed");
                if value < 1.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                    return Err(Error::Domain(format!("split ratio {value}")));
                }
                t.split_n = value as u32;
                t.n_onus_active = t.n_onus_active.min(t.split_n);
            }
            Axis::TakeRate => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::Domain(format!("take-rate {value}")));
                }
                c.planner.get_or_insert_with(PlannerSection::default).take_rates = vec![value];
            }
        }
        Ok(c)
    }

    /// Analytic evaluation of the configured link.
    pub fn evaluate(&self) -> Result<LinkReport> {
        let link = self.link_params();
        let spad = self.spad_params();
        let filter = self.filter_spec()?;
        match self.pon_topology()? {
            Some(topo) => {
                let plan = self.channel_plan()?;
                dps::evaluate_link(&link, &topo, &plan, &filter, &spad, &self.raman_profile()?)
            }
            None => {
                let b = self.back_to_back.as_ref().expect("validated");
                dps::evaluate_back_to_back(&link, b.attenuation_db, &filter, &spad)
            }
        }
    }

    /// Monte Carlo run at the configured operating point, next to the
    /// analytic prediction.
    pub fn monte_carlo(&self) -> Result<McRow> {
        let analytic = self.evaluate()?;
        let mc = self.monte_carlo.clone().unwrap_or_default();
        let report = dps::monte_carlo_run_blocks(
            &self.link_params(),
            analytic.budget_db,
            analytic.raman_counts,
            &self.spad_params(),
            mc.n_pulses,
            self.seed,
            mc.block_pulses,
        )?;
        Ok(McRow { analytic, report })
    }

    pub fn mixed_tree(&self, take_rate: f64) -> Result<MixedTreeConfig> {
        let topology = self
            .pon_topology()?
            .ok_or_else(|| Error::Config("plan mode needs [topology]".into()))?;
        let q = self.quantum_wavelength()?;
        let overrides = self.plan.overrides();
        let gpon = PlanOverrides {
            downstream_dbm: None,
            fronthaul_dbm: None,
            upstream_dbm: None,
            ..overrides.clone()
        };
        let p = self.planner.clone().unwrap_or_default();
        let link = self.link_params();
        let spad = self.spad_params();
        Ok(MixedTreeConfig {
            topology,
            gpon_plan: build_channel_plan(Standard::Gpon, q, &gpon)?,
            ngpon2_plan: build_channel_plan(Standard::Ngpon2, q, &overrides)?,
            take_rate,
            candidate_bands: p.candidate_bands,
            guard_nm: p.guard_nm,
            reserved: p.reserved,
            profile: self.raman_profile()?,
            detection_gain: link.detection_gain(&spad) * spad.window_accept,
            grid: p.grid,
        })
    }

    pub fn plan_at(&self, take_rate: f64) -> Result<PlanResult> {
        planner::optimal_lambda(&self.mixed_tree(take_rate)?)
    }

    pub fn provenance(&self) -> Result<Provenance> {
        Provenance::of(self)
    }
}

/// Runs a scenario in its configured mode.
pub fn run(config: &ScenarioConfig) -> Result<RunArtifact> {
    let errors = config.check();
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    match (config.mode, &config.sweep) {
        (RunMode::Sweep, Some(s)) => sweep(config, s.axis, &s.values),
        (RunMode::Sweep, None) => Err(Error::Config("sweep mode without [sweep]".into())),
        (RunMode::Analytic, _) => {
            let report = config.evaluate()?;
            RunArtifact::new(config, Rows::Links { axis: None, rows: vec![LinkRow { axis_value: 0.0, report }] })
        }
        (RunMode::MonteCarlo, Some(s)) => sweep(config, s.axis, &s.values),
        (RunMode::MonteCarlo, None) => {
            let row = config.monte_carlo()?;
            RunArtifact::new(config, Rows::MonteCarlo { axis: None, rows: vec![(0.0, row)] })
        }
        (RunMode::Plan, _) => {
            let rates = config.planner.clone().unwrap_or_default().take_rates;
            sweep(config, Axis::TakeRate, &rates)
        }
    }
}

/// Evaluates the scenario once per axis value. Points run concurrently and
/// rows come back in the order of `values`. If a point fails, the rows before
/// it are returned inside [`Error::SweepAborted`].
pub fn sweep(config: &ScenarioConfig, axis: Axis, values: &[f64]) -> Result<RunArtifact> {
    use rayon::prelude::*;

    if values.is_empty() {
        return Err(Error::Domain("sweep needs at least one value".into()));
    }
    config.axis_allowed(axis)?;
    let mut cfg = config.clone();
    cfg.sweep = Some(SweepSection { axis, values: values.to_vec() });
    if cfg.mode == RunMode::Analytic {
        cfg.mode = RunMode::Sweep;
    }
    let cfg = cfg;

    enum Point {
        Link(LinkReport),
        Mc(McRow),
        Plan(PlanResult),
    }
    let results: Vec<Result<Point>> = values
        .par_iter()
        .map(|&v| {
            let c = cfg.with_axis(axis, v)?;
            match cfg.mode {
                RunMode::Plan => Ok(Point::Plan(c.plan_at(v)?)),
                RunMode::MonteCarlo => Ok(Point::Mc(c.monte_carlo()?)),
                _ => Ok(Point::Link(c.evaluate()?)),
            }
        })
        .collect();

    let mut links = Vec::new();
    let mut mcs = Vec::new();
    let mut plans = Vec::new();
    let mut failure = None;
    for (&v, r) in values.iter().zip(results) {
        match r {
            Ok(Point::Link(report)) => links.push(LinkRow { axis_value: v, report }),
            Ok(Point::Mc(row)) => mcs.push((v, row)),
            Ok(Point::Plan(p)) => plans.push(p),
            Err(e) => {
                failure = Some((v, e));
                break;
            }
        }
    }
    let rows = match cfg.mode {
        RunMode::Plan => Rows::Plans(plans),
        RunMode::MonteCarlo => Rows::MonteCarlo { axis: Some(axis), rows: mcs },
        _ => Rows::Links { axis: Some(axis), rows: links },
    };
    let artifact = RunArtifact::new(&cfg, rows)?;
    match failure {
        None => Ok(artifact),
        Some((value, source)) => Err(Error::SweepAborted {
            axis: axis.name().to_string(),
            value,
            completed: Box::new(artifact),
            source: Box::new(source),
        }),
    }
}
