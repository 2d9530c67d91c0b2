//! C interface to the `sfplan` planner.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Every function returns an
//! [`SfplanStatus`]; on failure [`sfplan_last_error_message`] describes the
//! cause for the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sfplan::config::AppConfig;
use sfplan::linksim::{self, Schedule, SimOutcome};
use sfplan::phy::{self, EnvironmentClass, EnvironmentModel, SpreadingFactor};
use sfplan::selector::{self, ScenarioSpec, SelectionResult};
use sfplan::trace::MobilityTrace;
use sfplan::Error;

/// Use the configuration's environment.
pub const SFPLAN_ENV_CONFIG: u32 = 0;
pub const SFPLAN_ENV_OPEN_LOS: u32 = 1;
pub const SFPLAN_ENV_SEMI_RURAL_LOS: u32 = 2;
pub const SFPLAN_ENV_COASTAL_LOS: u32 = 3;
pub const SFPLAN_ENV_OBSTRUCTED_LOS: u32 = 4;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfplanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    NoFeasibleSf = 4,
    Io = 5,
    Parse = 6,
    Panic = 7,
}

/// Planner configuration.
pub struct SfplanConfig {
    inner: AppConfig,
}

/// Result of [`sfplan_select`].
pub struct SfplanSelection {
    inner: SelectionResult,
}

/// One planning case. A negative `required_throughput` means none.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SfplanScenario {
    /// m
    pub distance: f64,
    /// m/s
    pub speed: f64,
    pub payload_bytes: u32,
    pub packets_per_hour: f64,
    /// bits/s
    pub required_throughput: f64,
    /// One of the `SFPLAN_ENV_*` constants.
    pub environment: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SfplanSimOutcome {
    pub sf: u8,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub pdr: f64,
    /// s
    pub airtime_used: f64,
    pub seed: u64,
}

impl From<&SimOutcome> for SfplanSimOutcome {
    fn from(o: &SimOutcome) -> Self {
        Self {
            sf: o.sf.value(),
            packets_sent: o.packets_sent as u64,
            packets_delivered: o.packets_delivered as u64,
            pdr: o.pdr,
            airtime_used: o.airtime_used,
            seed: o.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> SfplanStatus {
    match e {
        Error::NoFeasibleSf(_) => SfplanStatus::NoFeasibleSf,
        Error::Io(_) => SfplanStatus::Io,
        Error::Parse { .. } | Error::Csv(_) | Error::Json(_) | Error::Toml(_) => {
            SfplanStatus::Parse
        }
        Error::InvalidConfig(_) => SfplanStatus::InvalidConfig,
        _ => SfplanStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Argument(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SfplanStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfplanStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("`{name}` is null"));
            SfplanStatus::NullPointer
        }
        Ok(Err(Failure::Argument(message))) => {
            set_error(message);
            SfplanStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            SfplanStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

fn sf(value: u8) -> Result<SpreadingFactor, Failure> {
    SpreadingFactor::new(value).map_err(|e| Failure::Argument(e.to_string()))
}

fn scenario(config: &AppConfig, s: &SfplanScenario) -> Result<ScenarioSpec, Failure> {
    let environment = match s.environment {
        SFPLAN_ENV_CONFIG => config.environment.clone(),
        code @ SFPLAN_ENV_OPEN_LOS..=SFPLAN_ENV_OBSTRUCTED_LOS => {
            EnvironmentModel::preset(EnvironmentClass::ALL[(code - 1) as usize])
        }
        other => {
            return Err(Error::InvalidScenario(format!("unknown environment code {other}")).into());
        }
    };
    let mut spec = ScenarioSpec::new(
        "ffi",
        s.distance,
        s.speed,
        s.payload_bytes as usize,
        s.packets_per_hour,
        environment,
    );
    spec.region = config.region.clone();
    spec.required_throughput = (s.required_throughput >= 0.0).then_some(s.required_throughput);
    spec.validate()?;
    Ok(spec)
}

/// Default configuration. Never null.
#[no_mangle]
pub extern "C" fn sfplan_config_new_default() -> *mut SfplanConfig {
    Box::into_raw(Box::new(SfplanConfig {
        inner: AppConfig::default(),
    }))
}

/// Loads a TOML (or `.json`) configuration file.
#[no_mangle]
pub unsafe extern "C" fn sfplan_config_from_file(
    path: *const c_char,
    out_config: *mut *mut SfplanConfig,
) -> SfplanStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        *slot = ptr::null_mut();
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::InvalidConfig("path is not valid UTF-8".into()))?;
        let inner = AppConfig::load(path)?;
        *slot = Box::into_raw(Box::new(SfplanConfig { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sfplan_config_free(config: *mut SfplanConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Packet duration in seconds.
#[no_mangle]
pub unsafe extern "C" fn sfplan_time_on_air(
    config: *const SfplanConfig,
    sf_value: u8,
    payload_bytes: u32,
    out_seconds: *mut f64,
) -> SfplanStatus {
    guard(|| {
        let config = deref(config, "config")?;
        let slot = out(out_seconds, "out_seconds")?;
        *slot = phy::time_on_air(sf(sf_value)?, &config.inner.radio, payload_bytes as usize)?;
        Ok(())
    })
}

/// Runs the selector. On success `*out_selection` owns a new handle.
#[no_mangle]
pub unsafe extern "C" fn sfplan_select(
    config: *const SfplanConfig,
    scenario_in: *const SfplanScenario,
    out_selection: *mut *mut SfplanSelection,
) -> SfplanStatus {
    guard(|| {
        let slot = out(out_selection, "out_selection")?;
        *slot = ptr::null_mut();
        let config = &deref(config, "config")?.inner;
        let spec = scenario(config, deref(scenario_in, "scenario")?)?;
        let inner = selector::select_sf(&spec, &config.radio, &config.weights, &config.selector)?;
        *slot = Box::into_raw(Box::new(SfplanSelection { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sfplan_selection_chosen(
    selection: *const SfplanSelection,
    out_sf: *mut u8,
) -> SfplanStatus {
    guard(|| {
        let s = deref(selection, "selection")?;
        *out(out_sf, "out_sf")? = s.inner.chosen.value();
        Ok(())
    })
}

/// Total score of `sf`; `InvalidArgument` when `sf` was excluded.
#[no_mangle]
pub unsafe extern "C" fn sfplan_selection_score(
    selection: *const SfplanSelection,
    sf_value: u8,
    out_score: *mut f64,
) -> SfplanStatus {
    guard(|| {
        let s = deref(selection, "selection")?;
        let slot = out(out_score, "out_score")?;
        let sf = sf(sf_value)?;
        let score =
            s.inner.scores.get(&sf).ok_or_else(|| {
                Error::InvalidScenario(format!("{sf} was excluded and has no score"))
            })?;
        *slot = score.total;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sfplan_selection_is_excluded(
    selection: *const SfplanSelection,
    sf_value: u8,
    out_excluded: *mut bool,
) -> SfplanStatus {
    guard(|| {
        let s = deref(selection, "selection")?;
        let slot = out(out_excluded, "out_excluded")?;
        let sf = sf(sf_value)?;
        *slot = s.inner.evaluation(sf).is_some_and(|e| e.excluded);
        Ok(())
    })
}

/// JSON form of the selection. Free with [`sfplan_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sfplan_selection_to_json(
    selection: *const SfplanSelection,
    out_json: *mut *mut c_char,
) -> SfplanStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = ptr::null_mut();
        let s = deref(selection, "selection")?;
        let text = serde_json::to_string(&s.inner).map_err(Error::from)?;
        *slot = CString::new(text)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sfplan_selection_free(selection: *mut SfplanSelection) {
    if !selection.is_null() {
        drop(Box::from_raw(selection));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sfplan_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn run_setup(
    config: &AppConfig,
    scenario_in: &SfplanScenario,
    n_packets: u32,
) -> Result<(ScenarioSpec, MobilityTrace), Failure> {
    let spec = config.simulator.apply(&scenario(config, scenario_in)?);
    let schedule = Schedule::for_scenario(&spec, n_packets as usize)?;
    let trace = linksim::scenario_trace(&spec, schedule.horizon())?;
    Ok((spec, trace))
}

/// Simulates `n_packets` at one SF along the scenario's default trace.
#[no_mangle]
pub unsafe extern "C" fn sfplan_simulate_link(
    config: *const SfplanConfig,
    scenario_in: *const SfplanScenario,
    sf_value: u8,
    seed: u64,
    n_packets: u32,
    out_outcome: *mut SfplanSimOutcome,
) -> SfplanStatus {
    guard(|| {
        let config = &deref(config, "config")?.inner;
        let slot = out(out_outcome, "out_outcome")?;
        let (spec, trace) = run_setup(config, deref(scenario_in, "scenario")?, n_packets)?;
        let o = linksim::simulate_link(
            &spec,
            sf(sf_value)?,
            &config.radio,
            &trace,
            seed,
            n_packets as usize,
        )?;
        *slot = (&o).into();
        Ok(())
    })
}

/// Simulates all six SFs. `out_outcomes` may be null or point to six
/// writable elements, SF7 first.
#[no_mangle]
pub unsafe extern "C" fn sfplan_brute_force_best_sf(
    config: *const SfplanConfig,
    scenario_in: *const SfplanScenario,
    seed: u64,
    n_packets: u32,
    out_best: *mut u8,
    out_outcomes: *mut SfplanSimOutcome,
) -> SfplanStatus {
    guard(|| {
        let config = &deref(config, "config")?.inner;
        let best = out(out_best, "out_best")?;
        let (spec, trace) = run_setup(config, deref(scenario_in, "scenario")?, n_packets)?;
        let r =
            linksim::brute_force_best_sf(&spec, &config.radio, &trace, seed, n_packets as usize)?;
        *best = r.best.value();
        if !out_outcomes.is_null() {
            let dst = std::slice::from_raw_parts_mut(out_outcomes, r.outcomes.len());
            for (d, o) in dst.iter_mut().zip(&r.outcomes) {
                *d = o.into();
            }
        }
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn sfplan_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn sfplan_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
