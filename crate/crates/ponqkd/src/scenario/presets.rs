//! Scenario files shipped with the crate. They mirror `scenarios/` at the
//! workspace root so presets resolve without a checkout on disk.

use std::path::PathBuf;

/// Environment variable naming the default scenario directory.
pub const SCENARIO_DIR_ENV: &str = "PONQKD_SCENARIO_DIR";

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../../../scenarios/", $name, ".toml"))),)*
        ];
    };
}

presets!(
    "calibration",
    "fig2d_raman_spectra",
    "fig3a_length_lanwdm",
    "fig3b_split_lanwdm",
    "fig3c_dark_ngpon2",
    "fig3c_dark_ngpon2_mc",
    "fig3d_take_rate",
    "fig4a_lit_gpon",
    "fig4a_unloaded_gpon",
    "fig4b_lit_ngpon2_fbg",
    "fig4b_unloaded_ngpon2_fbg",
    "fig4b_lit_ngpon2_lanwdm",
    "fig4b_unloaded_ngpon2_lanwdm",
    "fig4b_dsfh_ngpon2_lanwdm",
);

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Names of runnable presets (the shared calibration block is excluded).
pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n).filter(|n| *n != "calibration")
}

pub fn scenario_dir() -> PathBuf {
    std::env::var_os(SCENARIO_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("scenarios"))
}
