//! Run results and their CSV / text renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{Axis, RunMode, ScenarioConfig};
use crate::dps::{LinkReport, MonteCarloReport};
use crate::error::{Error, Result};
use crate::planner::PlanResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    /// SHA-256 of the fully resolved scenario, serialized as TOML.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn of(config: &ScenarioConfig) -> Result<Provenance> {
        let canonical = toml::to_string(config).map_err(|e| Error::Config(format!("serializing scenario: {e}")))?;
        Ok(Provenance {
            config_hash: hex::encode(Sha256::digest(canonical.as_bytes())),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRow {
    pub axis_value: f64,
    pub report: LinkReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub analytic: LinkReport,
    pub report: MonteCarloReport,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rows {
    Links { axis: Option<Axis>, rows: Vec<LinkRow> },
    MonteCarlo { axis: Option<Axis>, rows: Vec<(f64, McRow)> },
    Plans(Vec<PlanResult>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub name: String,
    pub mode: RunMode,
    pub rows: Rows,
    pub provenance: Provenance,
}

pub const LINK_HEADER: [&str; 13] = [
    "axis",
    "axis_value",
    "budget (dB)",
    "raw_rate (bit/s)",
    "qber",
    "raman_counts (1/s)",
    "raman_drop_counts (1/s)",
    "raman_feeder_counts (1/s)",
    "signal_registered (1/s)",
    "noise_registered (1/s)",
    "secure_fraction",
    "secure_rate (bit/s)",
    "secure_bits_per_pulse",
];

pub const MC_HEADER: [&str; 15] = [
    "axis",
    "axis_value",
    "n_pulses",
    "seed",
    "registered",
    "errors",
    "raw_rate (bit/s)",
    "raw_rate_sigma (bit/s)",
    "qber",
    "qber_sigma",
    "qber_ci95_low",
    "qber_ci95_high",
    "busy_fraction",
    "analytic_raw_rate (bit/s)",
    "analytic_qber",
];

pub const PLAN_HEADER: [&str; 4] = ["take_rate", "lambda_opt (nm)", "band", "noise_at_opt (1/s/nm)"];
pub const SPECTRUM_HEADER: [&str; 3] = ["take_rate", "wavelength (nm)", "noise (1/s/nm)"];

fn axis_name(axis: Option<Axis>) -> &'static str {
    axis.map(Axis::name).unwrap_or("none")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl RunArtifact {
    pub fn new(config: &ScenarioConfig, rows: Rows) -> Result<RunArtifact> {
        Ok(RunArtifact {
            name: config.name.clone(),
            mode: config.mode,
            rows,
            provenance: Provenance::of(config)?,
        })
    }

    pub fn row_count(&self) -> usize {
        match &self.rows {
            Rows::Links { rows, .. } => rows.len(),
            Rows::MonteCarlo { rows, .. } => rows.len(),
            Rows::Plans(p) => p.len(),
        }
    }

    /// Main result table.
    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.rows {
            Rows::Links { axis, rows } => {
                w.write_record(LINK_HEADER)?;
                for r in rows {
                    let p = &r.report;
                    w.write_record([
                        axis_name(*axis).to_string(),
                        r.axis_value.to_string(),
                        p.budget_db.to_string(),
                        p.raw_rate.to_string(),
                        p.qber.to_string(),
                        p.raman_counts.to_string(),
                        p.raman_counts_drop.to_string(),
                        p.raman_counts_feeder.to_string(),
                        p.counts.signal.to_string(),
                        p.counts.noise.to_string(),
                        p.secure_fraction.to_string(),
                        p.secure_rate.to_string(),
                        p.secure_bits_per_pulse.to_string(),
                    ])?;
                }
            }
            Rows::MonteCarlo { axis, rows } => {
                w.write_record(MC_HEADER)?;
                for (v, r) in rows {
                    let m = &r.report;
                    w.write_record([
                        axis_name(*axis).to_string(),
                        v.to_string(),
                        m.n_pulses.to_string(),
                        m.seed.to_string(),
                        m.registered.to_string(),
                        m.errors.to_string(),
                        m.raw_rate.to_string(),
                        m.raw_rate_sigma.to_string(),
                        m.qber.to_string(),
                        m.qber_sigma.to_string(),
                        m.qber_ci_low.to_string(),
                        m.qber_ci_high.to_string(),
                        m.busy_fraction.to_string(),
                        r.analytic.raw_rate.to_string(),
                        r.analytic.qber.to_string(),
                    ])?;
                }
            }
            Rows::Plans(plans) => {
                w.write_record(PLAN_HEADER)?;
                for p in plans {
                    w.write_record([
                        p.take_rate.to_string(),
                        p.lambda_opt.nm().to_string(),
                        p.band.to_string(),
                        p.noise_at_opt.to_string(),
                    ])?;
                }
            }
        }
        finish(w)
    }

    /// Full noise curves of a plan run.
    pub fn spectrum_csv(&self) -> Result<Option<String>> {
        let Rows::Plans(plans) = &self.rows else {
            return Ok(None);
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SPECTRUM_HEADER)?;
        for p in plans {
            for (nm, v) in &p.curve {
                w.write_record([p.take_rate.to_string(), nm.to_string(), v.to_string()])?;
            }
        }
        finish(w).map(Some)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario   {}", self.name);
        let _ = writeln!(s, "mode       {:?}", self.mode);
        let _ = writeln!(s, "config     sha256:{}", self.provenance.config_hash);
        let _ = writeln!(s, "seed       {}", self.provenance.seed);
        let _ = writeln!(s, "version    {}", self.provenance.version);
        let _ = writeln!(s);
        match &self.rows {
            Rows::Links { axis, rows } => {
                let _ = writeln!(
                    s,
                    "{:>12} {:>9} {:>10} {:>8} {:>10} {:>10} {:>11}",
                    axis_name(*axis),
                    "budget_dB",
                    "raw_bit/s",
                    "qber_%",
                    "raman_1/s",
                    "secure_b/s",
                    "bits/pulse"
                );
                for r in rows {
                    let p = &r.report;
                    let _ = writeln!(
                        s,
                        "{:>12.4} {:>9.2} {:>10.1} {:>8.3} {:>10.2} {:>10.1} {:>11.3e}",
                        r.axis_value,
                        p.budget_db,
                        p.raw_rate,
                        100.0 * p.qber,
                        p.raman_counts,
                        p.secure_rate,
                        p.secure_bits_per_pulse
                    );
                }
            }
            Rows::MonteCarlo { axis, rows } => {
                let _ = writeln!(
                    s,
                    "{:>12} {:>12} {:>16} {:>18} {:>14}",
                    axis_name(*axis),
                    "pulses",
                    "raw_bit/s",
                    "qber_%",
                    "analytic"
                );
                for (v, r) in rows {
                    let m = &r.report;
                    let _ = writeln!(
                        s,
                        "{:>12.4} {:>12} {:>8.1} ± {:<5.1} {:>8.3} ± {:<6.3} {:>6.1} {:>6.3}%",
                        v,
                        m.n_pulses,
                        m.raw_rate,
                        m.raw_rate_sigma,
                        100.0 * m.qber,
                        100.0 * m.qber_sigma,
                        r.analytic.raw_rate,
                        100.0 * r.analytic.qber
                    );
                }
            }
            Rows::Plans(plans) => {
                let _ = writeln!(s, "{:>9} {:>12} {:>5} {:>14}", "take_rate", "lambda_nm", "band", "noise_1/s/nm");
                for p in plans {
                    let _ = writeln!(
                        s,
                        "{:>9.3} {:>12.2} {:>5} {:>14.2}",
                        p.take_rate,
                        p.lambda_opt.nm(),
                        p.band,
                        p.noise_at_opt
                    );
                }
            }
        }
        s
    }

    /// Writes `<name>.csv`, `<name>.summary.txt` and, for plan runs,
    /// `<name>.spectrum.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut files = vec![
            (dir.join(format!("{}.csv", self.name)), self.csv()?),
            (dir.join(format!("{}.summary.txt", self.name)), self.summary()),
        ];
        if let Some(spec) = self.spectrum_csv()? {
            files.push((dir.join(format!("{}.spectrum.csv", self.name)), spec));
        }
        for (path, text) in &files {
            std::fs::write(path, text).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}
