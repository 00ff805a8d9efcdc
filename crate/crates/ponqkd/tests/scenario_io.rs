use std::fs;

use ponqkd::scenario::{
    load_preset, load_scenario, parse_scenario, preset_names, run, sweep, Axis, RunMode, Rows,
};
use ponqkd::spectral::FilterShape;
use ponqkd::Error;

fn field_paths(e: &Error) -> Vec<String> {
    match e {
        Error::Validation(v) => v.iter().map(|f| f.path.clone()).collect(),
        other => panic!("expected validation error, got {other}"),
    }
}

const MINIMAL: &str = r#"
include = "calibration.toml"
name = "t"
mode = "analytic"
[plan]
standard = "ngpon2"
quantum_wavelength_nm = 1310.55
[topology]
[filter]
preset = "fbg"
"#;

#[test]
fn every_preset_round_trips() {
    let mut n = 0;
    for name in preset_names() {
        let cfg = load_preset(name).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back = parse_scenario(&text, None).unwrap();
        assert_eq!(cfg, back, "{name}");
        n += 1;
    }
    assert_eq!(n, 13);
}

#[test]
fn shipped_files_match_bundled_presets() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");
    for name in preset_names() {
        let from_file = load_scenario(&std::path::Path::new(dir).join(format!("{name}.toml"))).unwrap();
        assert_eq!(from_file, load_preset(name).unwrap(), "{name}");
    }
}

#[test]
fn dark_preset_shape() {
    let cfg = load_preset("fig3c_dark_ngpon2").unwrap();
    assert_eq!(cfg.plan.quantum_wavelength_nm, 1310.55);
    assert!(cfg.channel_plan().unwrap().channels.is_empty());
    let s = cfg.sweep.as_ref().unwrap();
    assert_eq!(s.axis, Axis::BudgetDb);
    assert_eq!(s.values.first(), Some(&6.0));
    assert_eq!(s.values.last(), Some(&22.0));
}

#[test]
fn lit_fbg_preset_shape() {
    let cfg = load_preset("fig4b_lit_ngpon2_fbg").unwrap();
    assert_eq!(cfg.channel_plan().unwrap().channels.len(), 19);
    let f = cfg.filter_spec().unwrap();
    assert_eq!(f.bandwidth_ghz, 14.6);
    assert!(matches!(f.shape, FilterShape::SuperGaussian { .. }));
}

#[test]
fn negative_mu_names_the_field() {
    let text = MINIMAL.replace("[filter]", "[dps]\nmu = -0.1\n[filter]");
    let err = parse_scenario(&text, None).unwrap_err();
    assert!(field_paths(&err).contains(&"dps.mu".to_string()));
}

#[test]
fn all_violations_reported_together() {
    let text = MINIMAL
        .replace("[filter]", "[dps]\nmu = 2.0\nport_fraction = 0.0\n[spad]\nefficiency = 3.0\n[filter]")
        .replace("[topology]", "[topology]\nsplit_n = 0\nbogus = 1");
    let err = parse_scenario(&text, None).unwrap_err();
    let paths = field_paths(&err);
    for want in ["topology.bogus", "dps.mu", "dps.port_fraction", "spad.efficiency", "topology.split_n"] {
        assert!(paths.iter().any(|p| p == want), "missing {want} in {paths:?}");
    }
}

#[test]
fn unknown_top_level_key_rejected() {
    let err = parse_scenario(&format!("colour = 3\n{MINIMAL}"), None).unwrap_err();
    assert_eq!(field_paths(&err), vec!["colour".to_string()]);
}

#[test]
fn type_error_carries_path() {
    let text = MINIMAL.replace("[filter]", "[dps]\nmu = \"lots\"\n[filter]");
    let paths = field_paths(&parse_scenario(&text, None).unwrap_err());
    assert_eq!(paths, vec!["dps.mu".to_string()]);
}

#[test]
fn parse_error_reports_line() {
    let err = parse_scenario("name = \"x\"\nmode = \n", None).unwrap_err();
    let Error::Parse { message, .. } = &err else { panic!("{err}") };
    assert!(message.contains("line 2"), "{message}");
}

#[test]
fn unsupported_calibration_version() {
    let text = format!("{MINIMAL}\n[calibration]\nversion = 7\n");
    assert!(field_paths(&parse_scenario(&text, None).unwrap_err()).contains(&"calibration.version".to_string()));
}

#[test]
fn include_resolves_next_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut local = ponqkd::calibration::Calibration::frozen().clone();
    local.dark_rate_cps = 1.0;
    fs::write(dir.path().join("my_cal.toml"), local.to_toml().unwrap()).unwrap();
    let text = MINIMAL.replace("calibration.toml", "my_cal.toml");
    fs::write(dir.path().join("s.toml"), &text).unwrap();
    let cfg = load_scenario(&dir.path().join("s.toml")).unwrap();
    assert_eq!(cfg.calibration.dark_rate_cps, 1.0);
    // keys in the including file win
    let over = format!("{text}\n[calibration]\ndark_rate_cps = 2.0\n");
    fs::write(dir.path().join("o.toml"), over).unwrap();
    assert_eq!(load_scenario(&dir.path().join("o.toml")).unwrap().calibration.dark_rate_cps, 2.0);
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_scenario(std::path::Path::new("/nonexistent/x.toml")), Err(Error::Io { .. })));
}

#[test]
fn same_seed_same_bytes() {
    for name in ["fig4b_lit_ngpon2_fbg", "fig3c_dark_ngpon2_mc"] {
        let mut cfg = load_preset(name).unwrap();
        if let Some(mc) = cfg.monte_carlo.as_mut() {
            mc.n_pulses = 2_000_000;
        }
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.csv().unwrap(), b.csv().unwrap());
        assert_eq!(a.provenance, b.provenance);
        assert_eq!(a.provenance.config_hash.len(), 64);
    }
}

#[test]
fn seed_changes_provenance_and_monte_carlo() {
    let mut cfg = load_preset("fig3c_dark_ngpon2_mc").unwrap();
    cfg.monte_carlo.as_mut().unwrap().n_pulses = 50_000_000;
    let a = run(&cfg).unwrap();
    cfg.seed += 1;
    let b = run(&cfg).unwrap();
    assert_ne!(a.provenance.config_hash, b.provenance.config_hash);
    assert_ne!(a.csv().unwrap(), b.csv().unwrap());
}

#[test]
fn plan_run_has_eleven_rows() {
    let art = run(&load_preset("fig3d_take_rate").unwrap()).unwrap();
    assert_eq!(art.mode, RunMode::Plan);
    let csv = art.csv().unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert_eq!(csv.lines().next().unwrap(), "take_rate,lambda_opt (nm),band,noise_at_opt (1/s/nm)");
    let spectrum = art.spectrum_csv().unwrap().unwrap();
    assert_eq!(spectrum.lines().count(), 1 + 11 * 731);
}

#[test]
fn link_columns_stable_across_modes() {
    let analytic = run(&load_preset("fig4a_lit_gpon").unwrap()).unwrap().csv().unwrap();
    let swept = run(&load_preset("fig3b_split_lanwdm").unwrap()).unwrap().csv().unwrap();
    let header = |s: &str| s.lines().next().unwrap().to_string();
    assert_eq!(header(&analytic), header(&swept));
    assert!(header(&analytic).contains("raw_rate (bit/s)"));
    assert_eq!(analytic.lines().count(), 2);
    assert!(analytic.lines().nth(1).unwrap().starts_with("none,0,"));
    assert!(swept.lines().nth(1).unwrap().starts_with("split_n,2,"));
}

#[test]
fn empty_sweep_is_domain_error() {
    let cfg = load_preset("fig3c_dark_ngpon2").unwrap();
    assert!(matches!(sweep(&cfg, Axis::BudgetDb, &[]), Err(Error::Domain(_))));
}

#[test]
fn axis_must_fit_scenario() {
    let cfg = load_preset("fig3c_dark_ngpon2").unwrap();
    assert!(sweep(&cfg, Axis::SplitN, &[2.0]).is_err());
}

#[test]
fn aborted_sweep_keeps_completed_rows() {
    let cfg = load_preset("fig3a_length_lanwdm").unwrap();
    let err = sweep(&cfg, Axis::FiberLength, &[5.0, 10.0, 0.1, 20.0]).unwrap_err();
    let Error::SweepAborted { value, completed, .. } = err else { panic!("{err}") };
    assert_eq!(value, 0.1);
    let Rows::Links { rows, .. } = &completed.rows else { panic!() };
    let got: Vec<f64> = rows.iter().map(|r| r.axis_value).collect();
    assert_eq!(got, vec![5.0, 10.0]);
}

#[test]
fn fiber_length_sets_both_feeders() {
    let cfg = load_preset("fig3a_length_lanwdm").unwrap();
    let c = cfg.with_axis(Axis::FiberLength, 10.0).unwrap();
    let t = c.topology.unwrap();
    assert!((t.feeder_us_km + t.drop_km - 10.0).abs() < 1e-12);
    assert_eq!(t.feeder_ds_km, t.feeder_us_km);
}

#[test]
fn type_error_inside_optional_section() {
    let text = MINIMAL.replace("[topology]", "[topology]\nsplit_n = \"many\"");
    let paths = field_paths(&parse_scenario(&text, None).unwrap_err());
    assert_eq!(paths, vec!["topology.split_n".to_string()]);
}
