//! Beacon-driven dynamic SF adjustment, used as a comparison baseline.

use serde::{Deserialize, Serialize};

use super::{check_trace, data_stream, DutyCycleGate, Schedule, Shadowing, SimOutcome};
use crate::error::{Error, Result};
use crate::phy::{self, RadioConfig, SpreadingFactor};
use crate::selector::ScenarioSpec;
use crate::trace::MobilityTrace;

const CONTROL_STREAM: u64 = 0x100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicProtocolConfig {
    /// s between beacons while no link is established.
    pub beacon_interval: f64,
    /// dB; a delivered packet below this margin raises the SF.
    pub margin_low_threshold: f64,
    /// dB; a delivered packet above this margin lowers the SF.
    pub margin_high_threshold: f64,
    /// s of dead air after each SF change.
    pub sf_switch_dwell: f64,
    /// Beacon, response and control packet size. Zero makes them free.
    pub control_packet_bytes: usize,
    pub initial_sf: SpreadingFactor,
    /// Consecutive data losses that drop the link back to beaconing.
    pub loss_limit: u32,
}

impl Default for DynamicProtocolConfig {
    fn default() -> Self {
        Self {
            beacon_interval: 30.0,
            margin_low_threshold: 3.0,
            margin_high_threshold: 12.0,
            sf_switch_dwell: 2.0,
            control_packet_bytes: 12,
            initial_sf: SpreadingFactor::SF12,
            loss_limit: 3,
        }
    }
}

impl DynamicProtocolConfig {
    /// No dwell and free control traffic.
    pub fn overhead_free(&self) -> Self {
        Self {
            sf_switch_dwell: 0.0,
            control_packet_bytes: 0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin_high_threshold > self.margin_low_threshold) {
            return Err(Error::InvalidConfig(format!(
                "margin_high_threshold ({}) must exceed margin_low_threshold ({})",
                self.margin_high_threshold, self.margin_low_threshold
            )));
        }
        if !(self.sf_switch_dwell >= 0.0) || !self.sf_switch_dwell.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sf_switch_dwell must be >= 0, got {}",
                self.sf_switch_dwell
            )));
        }
        if !(self.beacon_interval > 0.0) || !self.beacon_interval.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "beacon_interval must be > 0, got {}",
                self.beacon_interval
            )));
        }
        if self.control_packet_bytes > phy::MAX_PAYLOAD_BYTES {
            return Err(Error::InvalidPayload(self.control_packet_bytes));
        }
        if self.loss_limit == 0 {
            return Err(Error::InvalidConfig("loss_limit must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Beaconing { next: f64 },
    Linked,
}

struct Link<'a> {
    scenario: &'a ScenarioSpec,
    config: &'a RadioConfig,
    trace: &'a MobilityTrace,
    control_bytes: usize,
}

impl Link<'_> {
    fn received(&self, sf: SpreadingFactor, t: f64, fade: f64) -> Result<(bool, f64)> {
        let b = phy::link_budget(
            sf,
            self.config,
            self.trace.distance_at(t),
            &self.scenario.environment,
        )?;
        let margin = b.link_margin + fade;
        Ok((margin >= 0.0, margin))
    }

    fn control_toa(&self, sf: SpreadingFactor) -> Result<f64> {
        if self.control_bytes == 0 {
            Ok(0.0)
        } else {
            phy::time_on_air(sf, self.config, self.control_bytes)
        }
    }
}

/// Simulates the adaptive protocol on the same schedule as
/// [`simulate_link`](super::simulate_link). Only data packets are counted.
pub fn simulate_dynamic_protocol(
    scenario: &ScenarioSpec,
    config: &RadioConfig,
    dyn_config: &DynamicProtocolConfig,
    trace: &MobilityTrace,
    seed: u64,
    n_packets: usize,
) -> Result<SimOutcome> {
    dyn_config.validate()?;
    config.validate()?;
    let schedule = Schedule::for_scenario(scenario, n_packets)?;
    check_trace(trace, &schedule)?;

    let link = Link {
        scenario,
        config,
        trace,
        control_bytes: dyn_config.control_packet_bytes,
    };
    let sigma = scenario.environment.shadowing_sigma;
    let mut data_fades = Shadowing::new(seed, data_stream(dyn_config.initial_sf), sigma)?;
    let mut control_fades = Shadowing::new(seed, CONTROL_STREAM, sigma)?;
    let mut gate = DutyCycleGate::new(scenario.region.duty_cycle_limit, schedule.horizon());

    let mut sf = dyn_config.initial_sf;
    let mut state = State::Beaconing { next: 0.0 };
    let mut dwell_until = f64::NEG_INFINITY;
    let mut losses = 0u32;
    let mut delivered = 0;

    for k in 0..n_packets {
        let t = schedule.send_time(k);
        let fade = data_fades.sample();

        while let State::Beaconing { next } = state {
            if next > t {
                break;
            }
            let toa = link.control_toa(sf)?;
            let Some(beacon) = gate.transmit(next, toa) else {
                state = State::Beaconing {
                    next: next + dyn_config.beacon_interval,
                };
                if next >= schedule.horizon() {
                    break;
                }
                continue;
            };
            let (heard, _) = link.received(sf, beacon, control_fades.sample())?;
            let answered = match heard
                .then(|| gate.transmit(gate.busy_until(), toa))
                .flatten()
            {
                Some(response) => link.received(sf, response, control_fades.sample())?.0,
                None => false,
            };
            if answered {
                state = State::Linked;
                losses = 0;
            } else {
                sf = sf.step_up();
                state = State::Beaconing {
                    next: beacon + dyn_config.beacon_interval,
                };
            }
        }

        if state != State::Linked || t < dwell_until {
            continue;
        }
        let Some(start) = gate.transmit(t, phy::time_on_air(sf, config, scenario.payload_bytes)?)
        else {
            continue;
        };
        let (ok, margin) = link.received(sf, start, fade)?;
        if ok {
            delivered += 1;
            losses = 0;
            let target = if margin < dyn_config.margin_low_threshold {
                sf.step_up()
            } else if margin > dyn_config.margin_high_threshold {
                sf.step_down()
            } else {
                sf
            };
            if target != sf {
                if let Some(ctrl) = gate.transmit(gate.busy_until(), link.control_toa(sf)?) {
                    sf = target;
                    dwell_until = gate.busy_until().max(ctrl) + dyn_config.sf_switch_dwell;
                    gate.block_until(dwell_until);
                }
            }
        } else {
            losses += 1;
            if losses >= dyn_config.loss_limit {
                sf = sf.step_up();
                state = State::Beaconing {
                    next: gate.busy_until(),
                };
            }
        }
    }

    Ok(SimOutcome::new(
        dyn_config.initial_sf,
        n_packets,
        delivered,
        gate.airtime_used(),
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linksim::{scenario_trace, simulate_link};
    use crate::phy::EnvironmentModel;

    fn setup(distance: f64, speed: f64) -> (ScenarioSpec, MobilityTrace) {
        let s = ScenarioSpec::new("d", distance, speed, 20, 60.0, EnvironmentModel::default());
        let t = scenario_trace(&s, 60_000.0).unwrap();
        (s, t)
    }

    #[test]
    fn validates_hysteresis() {
        let mut c = DynamicProtocolConfig::default();
        c.margin_high_threshold = c.margin_low_threshold;
        assert!(c.validate().is_err());
        c = DynamicProtocolConfig::default();
        c.sf_switch_dwell = -1.0;
        assert!(c.validate().is_err());
        assert!(DynamicProtocolConfig::default().validate().is_ok());
    }

    #[test]
    fn static_at_optimum_matches_fixed_sf() {
        let (s, t) = setup(400.0, 0.0);
        let config = RadioConfig::default();
        let dyn_config = DynamicProtocolConfig {
            initial_sf: SpreadingFactor::SF7,
            margin_low_threshold: -100.0,
            margin_high_threshold: 100.0,
            ..Default::default()
        };
        let d = simulate_dynamic_protocol(&s, &config, &dyn_config, &t, 11, 1000).unwrap();
        let f = simulate_link(&s, SpreadingFactor::SF7, &config, &t, 11, 1000).unwrap();
        assert!((d.pdr - f.pdr).abs() <= 0.002, "{} vs {}", d.pdr, f.pdr);
        assert!(d.airtime_used > f.airtime_used);
    }

    #[test]
    fn deterministic() {
        let (s, t) = setup(1200.0, 12.0);
        let c = DynamicProtocolConfig::default();
        let a = simulate_dynamic_protocol(&s, &RadioConfig::default(), &c, &t, 5, 500).unwrap();
        let b = simulate_dynamic_protocol(&s, &RadioConfig::default(), &c, &t, 5, 500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_control_bytes_cost_no_airtime() {
        let (s, t) = setup(300.0, 0.0);
        let c = DynamicProtocolConfig {
            initial_sf: SpreadingFactor::SF7,
            margin_low_threshold: -100.0,
            margin_high_threshold: 100.0,
            ..Default::default()
        }
        .overhead_free();
        let d = simulate_dynamic_protocol(&s, &RadioConfig::default(), &c, &t, 1, 100).unwrap();
        let f = simulate_link(
            &s,
            SpreadingFactor::SF7,
            &RadioConfig::default(),
            &t,
            1,
            100,
        )
        .unwrap();
        assert_eq!(d.airtime_used, f.airtime_used);
    }

    #[test]
    fn airtime_within_duty_cycle() {
        let (mut s, t) = setup(1500.0, 20.0);
        s.region.duty_cycle_limit = 0.01;
        let d = simulate_dynamic_protocol(
            &s,
            &RadioConfig::default(),
            &DynamicProtocolConfig::default(),
            &t,
            2,
            1000,
        )
        .unwrap();
        assert!(d.airtime_used <= 0.01 * 60_000.0 + 1e-9);
    }
}
