use std::ffi::{CStr, CString};
use std::ptr;

use sfplan_ffi::*;

fn scenario(distance: f64, speed: f64) -> SfplanScenario {
    SfplanScenario {
        distance,
        speed,
        payload_bytes: 20,
        packets_per_hour: 60.0,
        required_throughput: -1.0,
        environment: SFPLAN_ENV_CONFIG,
    }
}

fn last_error() -> String {
    let p = sfplan_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn time_on_air_matches_reference() {
    let config = sfplan_config_new_default();
    let mut toa = 0.0;
    unsafe {
        assert_eq!(
            sfplan_time_on_air(config, 7, 20, &mut toa),
            SfplanStatus::Ok
        );
        assert!((toa - 0.056576).abs() < 1e-9);
        assert_eq!(
            sfplan_time_on_air(config, 12, 20, &mut toa),
            SfplanStatus::Ok
        );
        assert!((toa - 1.318912).abs() < 1e-9);
        assert_eq!(
            sfplan_time_on_air(config, 13, 20, &mut toa),
            SfplanStatus::InvalidArgument
        );
        assert!(last_error().contains("13"));
        assert_eq!(
            sfplan_time_on_air(config, 7, 0, &mut toa),
            SfplanStatus::InvalidArgument
        );
        sfplan_config_free(config);
    }
}

#[test]
fn select_round_trip() {
    let config = sfplan_config_new_default();
    let s = scenario(1000.0, 7.5);
    let mut sel = ptr::null_mut();
    unsafe {
        assert_eq!(sfplan_select(config, &s, &mut sel), SfplanStatus::Ok);
        let mut sf = 0;
        assert_eq!(sfplan_selection_chosen(sel, &mut sf), SfplanStatus::Ok);
        assert_eq!(sf, 9);
        let mut score = 0.0;
        assert_eq!(sfplan_selection_score(sel, 9, &mut score), SfplanStatus::Ok);
        assert!(score > 0.0 && score <= 1.0);
        let mut excluded = false;
        assert_eq!(
            sfplan_selection_is_excluded(sel, 7, &mut excluded),
            SfplanStatus::Ok
        );
        assert!(excluded);
        assert_eq!(
            sfplan_selection_score(sel, 7, &mut score),
            SfplanStatus::InvalidArgument
        );

        let mut json = ptr::null_mut();
        assert_eq!(sfplan_selection_to_json(sel, &mut json), SfplanStatus::Ok);
        let v: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["chosen"], 9);
        sfplan_string_free(json);
        sfplan_selection_free(sel);
        sfplan_config_free(config);
    }
}

#[test]
fn infeasible_selection_reports_status() {
    let config = sfplan_config_new_default();
    let s = scenario(50_000.0, 0.0);
    let mut sel = ptr::null_mut();
    unsafe {
        assert_eq!(
            sfplan_select(config, &s, &mut sel),
            SfplanStatus::NoFeasibleSf
        );
        assert!(sel.is_null());
        assert!(last_error().contains("distance: 6"));
        sfplan_config_free(config);
    }
}

#[test]
fn null_pointers_are_rejected() {
    let mut toa = 0.0;
    let mut sf = 0;
    unsafe {
        assert_eq!(
            sfplan_time_on_air(ptr::null(), 7, 20, &mut toa),
            SfplanStatus::NullPointer
        );
        assert_eq!(
            sfplan_selection_chosen(ptr::null(), &mut sf),
            SfplanStatus::NullPointer
        );
        let config = sfplan_config_new_default();
        assert_eq!(
            sfplan_time_on_air(config, 7, 20, ptr::null_mut()),
            SfplanStatus::NullPointer
        );
        let mut out = ptr::null_mut();
        assert_eq!(
            sfplan_config_from_file(ptr::null(), &mut out),
            SfplanStatus::NullPointer
        );
        sfplan_config_free(config);
        sfplan_config_free(ptr::null_mut());
        sfplan_selection_free(ptr::null_mut());
        sfplan_string_free(ptr::null_mut());
    }
}

#[test]
fn unknown_environment_code() {
    let config = sfplan_config_new_default();
    let mut s = scenario(500.0, 0.0);
    s.environment = 99;
    let mut sel = ptr::null_mut();
    unsafe {
        assert_eq!(
            sfplan_select(config, &s, &mut sel),
            SfplanStatus::InvalidArgument
        );
        s.environment = SFPLAN_ENV_OBSTRUCTED_LOS;
        assert_eq!(sfplan_select(config, &s, &mut sel), SfplanStatus::Ok);
        sfplan_selection_free(sel);
        sfplan_config_free(config);
    }
}

#[test]
fn simulation_entry_points() {
    let config = sfplan_config_new_default();
    let s = scenario(100.0, 0.0);
    let mut o = SfplanSimOutcome::default();
    let mut all = [SfplanSimOutcome::default(); 6];
    let mut best = 0;
    unsafe {
        assert_eq!(
            sfplan_simulate_link(config, &s, 7, 3, 500, &mut o),
            SfplanStatus::Ok
        );
        assert_eq!(o.packets_sent, 500);
        assert!(o.pdr > 0.99);
        assert_eq!(
            sfplan_brute_force_best_sf(config, &s, 3, 500, &mut best, all.as_mut_ptr()),
            SfplanStatus::Ok
        );
        assert_eq!(best, 7);
        assert_eq!(all.map(|x| x.sf), [7, 8, 9, 10, 11, 12]);
        assert_eq!(all[0].packets_delivered, o.packets_delivered);
        assert_eq!(
            sfplan_brute_force_best_sf(config, &s, 3, 10, &mut best, ptr::null_mut()),
            SfplanStatus::Ok
        );
        assert_eq!(
            sfplan_simulate_link(config, &s, 7, 3, 0, &mut o),
            SfplanStatus::InvalidConfig
        );
        sfplan_config_free(config);
    }
}

#[test]
fn config_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("c.toml");
    std::fs::write(&good, "[radio]\ntx_power = 7.0\n").unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[radio]\ntx_power = \"loud\"\n").unwrap();
    let mut config = ptr::null_mut();
    unsafe {
        let p = CString::new(good.to_str().unwrap()).unwrap();
        assert_eq!(
            sfplan_config_from_file(p.as_ptr(), &mut config),
            SfplanStatus::Ok
        );
        assert!(!config.is_null());
        sfplan_config_free(config);

        let p = CString::new(bad.to_str().unwrap()).unwrap();
        assert_eq!(
            sfplan_config_from_file(p.as_ptr(), &mut config),
            SfplanStatus::Parse
        );
        assert!(config.is_null());

        let p = CString::new(dir.path().join("missing.toml").to_str().unwrap()).unwrap();
        assert_eq!(
            sfplan_config_from_file(p.as_ptr(), &mut config),
            SfplanStatus::InvalidConfig
        );
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sfplan_version()) }
        .to_str()
        .unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
