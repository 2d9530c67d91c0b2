#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Fixed spreading-factor planning for single-channel mobile LoRa gateways.
//!
//! [`selector::select_sf`] picks an SF from deterministic link-budget,
//! duty-cycle, data-rate and Doppler rules plus a weighted score;
//! [`linksim`] checks the choice by simulating every SF, and
//! [`evaluator`] runs both over a scenario grid.

pub mod config;
pub mod error;
pub mod evaluator;
pub mod linksim;
pub mod phy;
pub mod report;
pub mod scenarios;
pub mod selector;
pub mod trace;

pub use error::{Error, InfeasibleDiagnostics, Result};
pub use phy::{EnvironmentModel, RadioConfig, SpreadingFactor};
pub use selector::{select_sf, ScenarioSpec, ScoreWeights, SelectionResult, SelectorOptions};
