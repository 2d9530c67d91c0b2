//! Two-phase optimum spreading-factor selection.
//!
//! Phase 1 evaluates every SF against five exclusion rules (distance, link
//! margin, duty cycle, data rate, Doppler). Phase 2 min-max normalizes four
//! factors over the survivors and picks the highest weighted score.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, InfeasibleDiagnostics, Result};
use crate::phy::{self, EnvironmentModel, RadioConfig, SpreadingFactor};
use crate::trace::TraceKind;

/// Scores closer than this are treated as equal when picking the winner.
const SCORE_TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MobilityClass {
    Static,
    Low,
    Moderate,
    High,
}

impl MobilityClass {
    pub const ALL: [Self; 4] = [Self::Static, Self::Low, Self::Moderate, Self::High];

    /// static < 0.5 m/s, low < 5, moderate < 10, high otherwise.
    pub fn from_speed(speed: f64) -> Self {
        if speed < 0.5 {
            Self::Static
        } else if speed < 5.0 {
            Self::Low
        } else if speed < 10.0 {
            Self::Moderate
        } else {
            Self::High
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Low => "low",
            Self::Moderate => "moderate",
            Self::High => "high",
        }
    }
}

impl fmt::Display for MobilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for MobilityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s.trim())
            .ok_or_else(|| Error::InvalidScenario(format!("unknown mobility class `{s}`")))
    }
}

/// Regulatory limits of the operating band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionProfile {
    pub duty_cycle_limit: f64,
    /// dBm
    pub max_tx_power: f64,
    /// Hz, inclusive.
    pub allowed_band: (f64, f64),
}

impl Default for RegionProfile {
    /// 433 MHz short-range-device profile: 10 mW, 10 % duty cycle, channel
    /// anywhere in 430-440 MHz.
    fn default() -> Self {
        Self {
            duty_cycle_limit: 0.10,
            max_tx_power: 10.0,
            allowed_band: (430.0e6, 440.0e6),
        }
    }
}

impl RegionProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.duty_cycle_limit > 0.0 && self.duty_cycle_limit <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "duty_cycle_limit must be in (0, 1], got {}",
                self.duty_cycle_limit
            )));
        }
        if !(self.allowed_band.0 < self.allowed_band.1) {
            return Err(Error::InvalidConfig(
                "allowed_band must be (low, high) with low < high".into(),
            ));
        }
        Ok(())
    }

    /// Airtime allowance per rolling hour, seconds.
    pub fn hourly_airtime_budget(&self) -> f64 {
        self.duty_cycle_limit * 3600.0
    }

    /// Checks the radio against this region's power and band limits.
    pub fn check_radio(&self, radio: &RadioConfig) -> Result<()> {
        if radio.tx_power > self.max_tx_power {
            return Err(Error::InvalidConfig(format!(
                "tx_power {} dBm exceeds regional limit {} dBm",
                radio.tx_power, self.max_tx_power
            )));
        }
        let (lo, hi) = self.allowed_band;
        let half_bw = radio.bandwidth / 2.0;
        if radio.carrier_frequency - half_bw < lo || radio.carrier_frequency + half_bw > hi {
            return Err(Error::InvalidConfig(format!(
                "channel {} Hz ± {} Hz falls outside allowed band {lo}-{hi} Hz",
                radio.carrier_frequency, half_bw
            )));
        }
        Ok(())
    }
}

/// One planning case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    /// Planning distance, m. For mobile scenarios this is the farthest point
    /// of the trace.
    pub distance: f64,
    /// Peak gateway speed, m/s.
    pub speed: f64,
    pub payload_bytes: usize,
    pub packets_per_hour: f64,
    /// bits/s
    pub required_throughput: Option<f64>,
    pub environment: EnvironmentModel,
    pub region: RegionProfile,
    pub trace: TraceKind,
    /// Position along the mobility pattern at t = 0, fraction of one period.
    pub trace_phase: f64,
}

impl ScenarioSpec {
    /// A scenario in the given environment, default region and trace derived
    /// from the speed.
    pub fn new(
        id: impl Into<String>,
        distance: f64,
        speed: f64,
        payload_bytes: usize,
        packets_per_hour: f64,
        environment: EnvironmentModel,
    ) -> Self {
        Self {
            id: id.into(),
            distance,
            speed,
            payload_bytes,
            packets_per_hour,
            required_throughput: None,
            environment,
            region: RegionProfile::default(),
            trace: TraceKind::for_speed(speed),
            trace_phase: 0.0,
        }
    }

    pub fn mobility_class(&self) -> MobilityClass {
        MobilityClass::from_speed(self.speed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0) || !self.distance.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "{}: distance must be > 0, got {}",
                self.id, self.distance
            )));
        }
        if !(self.speed >= 0.0) || !self.speed.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "{}: speed must be >= 0, got {}",
                self.id, self.speed
            )));
        }
        if !(self.packets_per_hour >= 1.0) {
            return Err(Error::InvalidScenario(format!(
                "{}: packets_per_hour must be >= 1, got {}",
                self.id, self.packets_per_hour
            )));
        }
        if self.payload_bytes == 0 || self.payload_bytes > phy::MAX_PAYLOAD_BYTES {
            return Err(Error::InvalidPayload(self.payload_bytes));
        }
        if let Some(t) = self.required_throughput {
            if !(t >= 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "{}: required_throughput must be >= 0, got {t}",
                    self.id
                )));
            }
        }
        if !(0.0..1.0).contains(&self.trace_phase) {
            return Err(Error::InvalidScenario(format!(
                "{}: trace_phase must be in [0, 1), got {}",
                self.id, self.trace_phase
            )));
        }
        self.environment.validate()?;
        self.region.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    Distance,
    LinkMargin,
    DutyCycle,
    DataRate,
    Doppler,
}

impl ExclusionReason {
    pub fn label(self) -> &'static str {
        match self {
            Self::Distance => "distance",
            Self::LinkMargin => "link-margin",
            Self::DutyCycle => "duty-cycle",
            Self::DataRate => "data-rate",
            Self::Doppler => "doppler",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Phase-1 metrics and verdict for one SF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfEvaluation {
    pub sf: SpreadingFactor,
    /// s
    pub toa: f64,
    /// bits/s
    pub data_rate: f64,
    /// J/hour
    pub energy: f64,
    /// dB
    pub link_margin: f64,
    /// s/hour
    pub hourly_airtime: f64,
    pub excluded: bool,
    pub exclusion_reasons: Vec<ExclusionReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    pub w_toa: f64,
    pub w_energy: f64,
    pub w_data_rate: f64,
    pub w_link_margin: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            w_toa: 0.3,
            w_energy: 0.3,
            w_data_rate: 0.2,
            w_link_margin: 0.2,
        }
    }
}

impl ScoreWeights {
    pub fn new(w_toa: f64, w_energy: f64, w_data_rate: f64, w_link_margin: f64) -> Result<Self> {
        Self {
            w_toa,
            w_energy,
            w_data_rate,
            w_link_margin,
        }
        .normalized()
    }

    fn as_array(&self) -> [f64; 4] {
        [
            self.w_toa,
            self.w_energy,
            self.w_data_rate,
            self.w_link_margin,
        ]
    }

    /// Rescaled to sum 1; rejects negative or all-zero weights.
    pub fn normalized(&self) -> Result<Self> {
        let w = self.as_array();
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weights must be finite and >= 0, got {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidConfig("weights must not all be zero".into()));
        }
        Ok(Self {
            w_toa: self.w_toa / sum,
            w_energy: self.w_energy / sum,
            w_data_rate: self.w_data_rate / sum,
            w_link_margin: self.w_link_margin / sum,
        })
    }
}

/// Normalized sub-scores, each in [0, 1], and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub total: f64,
    pub toa: f64,
    pub energy: f64,
    pub data_rate: f64,
    pub link_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: SpreadingFactor,
    pub scores: BTreeMap<SpreadingFactor, ScoreBreakdown>,
    pub evaluations: Vec<SfEvaluation>,
    pub decision_trace: Vec<String>,
}

impl SelectionResult {
    pub fn evaluation(&self, sf: SpreadingFactor) -> Option<&SfEvaluation> {
        self.evaluations.iter().find(|e| e.sf == sf)
    }
}

/// Knobs of the selector that are not part of the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorOptions {
    /// Required link margin, dB.
    pub fade_margin: f64,
    /// On infeasibility, fall back to the max-link-margin SF among those that
    /// pass the duty-cycle and Doppler rules.
    pub relaxed: bool,
}

impl Default for SelectorOptions {
    fn default() -> Self {
        Self {
            fade_margin: 10.0,
            relaxed: false,
        }
    }
}

impl SelectorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.fade_margin >= 0.0) || !self.fade_margin.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "fade_margin must be >= 0, got {}",
                self.fade_margin
            )));
        }
        Ok(())
    }
}

/// Phase 1: metrics and exclusion rules for all six SFs.
pub fn evaluate_candidates(
    scenario: &ScenarioSpec,
    config: &RadioConfig,
    options: &SelectorOptions,
) -> Result<Vec<SfEvaluation>> {
    scenario.validate()?;
    config.validate()?;
    options.validate()?;
    let env = &scenario.environment;
    let budget = scenario.region.hourly_airtime_budget();

    SpreadingFactor::ALL
        .iter()
        .map(|&sf| {
            let toa = phy::time_on_air(sf, config, scenario.payload_bytes)?;
            let data_rate = phy::effective_data_rate(sf, config, scenario.payload_bytes)?;
            let energy = phy::energy_per_hour(
                sf,
                config,
                scenario.payload_bytes,
                scenario.packets_per_hour,
            )?
            .joules;
            let link_margin = phy::link_budget(sf, config, scenario.distance, env)?.link_margin;
            let range = phy::max_reliable_range(sf, config, env, options.fade_margin)?;
            let hourly_airtime = toa * scenario.packets_per_hour;

            let mut reasons = Vec::new();
            if scenario.distance > range {
                reasons.push(ExclusionReason::Distance);
            }
            if link_margin < options.fade_margin {
                reasons.push(ExclusionReason::LinkMargin);
            }
            if hourly_airtime > budget {
                reasons.push(ExclusionReason::DutyCycle);
            }
            if let Some(required) = scenario.required_throughput {
                if data_rate < required {
                    reasons.push(ExclusionReason::DataRate);
                }
            }
            if phy::doppler_exclusion_check(sf, config, scenario.speed) {
                reasons.push(ExclusionReason::Doppler);
            }

            Ok(SfEvaluation {
                sf,
                toa,
                data_rate,
                energy,
                link_margin,
                hourly_airtime,
                excluded: !reasons.is_empty(),
                exclusion_reasons: reasons,
            })
        })
        .collect()
}

fn diagnostics(evaluations: &[SfEvaluation]) -> InfeasibleDiagnostics {
    let mut d = InfeasibleDiagnostics::default();
    for reason in evaluations.iter().flat_map(|e| &e.exclusion_reasons) {
        match reason {
            ExclusionReason::Distance => d.distance += 1,
            ExclusionReason::LinkMargin => d.link_margin += 1,
            ExclusionReason::DutyCycle => d.duty_cycle += 1,
            ExclusionReason::DataRate => d.data_rate += 1,
            ExclusionReason::Doppler => d.doppler += 1,
        }
    }
    d
}

/// Min-max normalization over `values`; a constant factor maps to 1.
fn normalize(values: &[f64], lower_is_better: bool) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    values
        .iter()
        .map(|&v| {
            if !(span > 0.0) {
                1.0
            } else if lower_is_better {
                (max - v) / span
            } else {
                (v - min) / span
            }
        })
        .collect()
}

/// Phase 2: weighted score for every non-excluded SF.
pub fn phase2_score(
    evaluations: &[SfEvaluation],
    weights: &ScoreWeights,
) -> Result<BTreeMap<SpreadingFactor, ScoreBreakdown>> {
    let w = weights.normalized()?;
    let survivors: Vec<&SfEvaluation> = evaluations.iter().filter(|e| !e.excluded).collect();
    if survivors.is_empty() {
        return Err(Error::NoFeasibleSf(diagnostics(evaluations)));
    }
    let column = |f: fn(&SfEvaluation) -> f64| survivors.iter().map(|e| f(e)).collect::<Vec<_>>();
    let toa = normalize(&column(|e| e.toa), true);
    let energy = normalize(&column(|e| e.energy), true);
    let rate = normalize(&column(|e| e.data_rate), false);
    let margin = normalize(&column(|e| e.link_margin), false);

    Ok(survivors
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let breakdown = if survivors.len() == 1 {
                ScoreBreakdown {
                    total: 1.0,
                    toa: 1.0,
                    energy: 1.0,
                    data_rate: 1.0,
                    link_margin: 1.0,
                }
            } else {
                ScoreBreakdown {
                    total: w.w_toa * toa[i]
                        + w.w_energy * energy[i]
                        + w.w_data_rate * rate[i]
                        + w.w_link_margin * margin[i],
                    toa: toa[i],
                    energy: energy[i],
                    data_rate: rate[i],
                    link_margin: margin[i],
                }
            };
            (e.sf, breakdown)
        })
        .collect())
}

/// Highest total; on ties the lowest SF.
pub fn argmax_score(scores: &BTreeMap<SpreadingFactor, ScoreBreakdown>) -> Option<SpreadingFactor> {
    let mut best: Option<(SpreadingFactor, f64)> = None;
    // BTreeMap iterates in ascending SF order, so a later SF must win outright.
    for (&sf, s) in scores {
        match best {
            Some((_, top)) if s.total <= top + SCORE_TIE_EPSILON => {}
            _ => best = Some((sf, s.total)),
        }
    }
    best.map(|(sf, _)| sf)
}

fn describe_evaluation(e: &SfEvaluation) -> String {
    let verdict = if e.excluded {
        let reasons: Vec<&str> = e.exclusion_reasons.iter().map(|r| r.label()).collect();
        format!("excluded [{}]", reasons.join(", "))
    } else {
        "candidate".to_string()
    };
    format!(
        "phase1 {}: toa={:.3} ms rate={:.1} bps energy={:.4} J/h margin={:.2} dB airtime={:.2} s/h -> {}",
        e.sf,
        e.toa * 1e3,
        e.data_rate,
        e.energy,
        e.link_margin,
        e.hourly_airtime,
        verdict
    )
}

/// Full two-phase selection.
pub fn select_sf(
    scenario: &ScenarioSpec,
    config: &RadioConfig,
    weights: &ScoreWeights,
    options: &SelectorOptions,
) -> Result<SelectionResult> {
    let evaluations = evaluate_candidates(scenario, config, options)?;
    let mut decision_trace = vec![format!(
        "scenario {}: distance={} m speed={} m/s ({}) payload={} B rate={} pkt/h fade_margin={} dB duty_cycle={}",
        scenario.id,
        scenario.distance,
        scenario.speed,
        scenario.mobility_class(),
        scenario.payload_bytes,
        scenario.packets_per_hour,
        options.fade_margin,
        scenario.region.duty_cycle_limit
    )];
    decision_trace.extend(evaluations.iter().map(describe_evaluation));

    let scores = match phase2_score(&evaluations, weights) {
        Ok(scores) => scores,
        Err(Error::NoFeasibleSf(diag)) if options.relaxed => {
            let fallback = evaluations
                .iter()
                .filter(|e| {
                    !e.exclusion_reasons
                        .iter()
                        .any(|r| matches!(r, ExclusionReason::DutyCycle | ExclusionReason::Doppler))
                })
                .max_by(|a, b| a.link_margin.total_cmp(&b.link_margin))
                .ok_or_else(|| Error::NoFeasibleSf(diag.clone()))?;
            decision_trace.push(format!(
                "relaxed: no feasible SF ({diag}); choosing max-link-margin {} ignoring distance, link-margin and data-rate rules",
                fallback.sf
            ));
            return Ok(SelectionResult {
                chosen: fallback.sf,
                scores: BTreeMap::new(),
                evaluations,
                decision_trace,
            });
        }
        Err(e) => return Err(e),
    };

    for (sf, s) in &scores {
        decision_trace.push(format!(
            "phase2 {sf}: toa={:.4} energy={:.4} data_rate={:.4} link_margin={:.4} total={:.4}",
            s.toa, s.energy, s.data_rate, s.link_margin, s.total
        ));
    }
    let chosen = argmax_score(&scores).expect("phase2_score returns at least one candidate");
    decision_trace.push(format!(
        "chosen {chosen} (score {:.4})",
        scores[&chosen].total
    ));

    Ok(SelectionResult {
        chosen,
        scores,
        evaluations,
        decision_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::EnvironmentClass;

    fn scenario(distance: f64, speed: f64) -> ScenarioSpec {
        ScenarioSpec::new(
            "t",
            distance,
            speed,
            20,
            60.0,
            EnvironmentModel::preset(EnvironmentClass::OpenLos),
        )
    }

    fn eval(sf: u8, toa: f64, energy: f64, rate: f64, margin: f64, excluded: bool) -> SfEvaluation {
        SfEvaluation {
            sf: SpreadingFactor::new(sf).unwrap(),
            toa,
            data_rate: rate,
            energy,
            link_margin: margin,
            hourly_airtime: toa * 60.0,
            excluded,
            exclusion_reasons: if excluded {
                vec![ExclusionReason::Distance]
            } else {
                vec![]
            },
        }
    }

    fn run(distance: f64, speed: f64) -> SelectionResult {
        select_sf(
            &scenario(distance, speed),
            &RadioConfig::default(),
            &ScoreWeights::default(),
            &SelectorOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn always_six_evaluations() {
        let e = evaluate_candidates(
            &scenario(500.0, 0.0),
            &RadioConfig::default(),
            &SelectorOptions::default(),
        )
        .unwrap();
        assert_eq!(e.len(), 6);
        for x in &e {
            assert_eq!(x.excluded, !x.exclusion_reasons.is_empty());
        }
    }

    #[test]
    fn far_scenario_excludes_sf7_on_distance() {
        let e = evaluate_candidates(
            &scenario(1800.0, 0.0),
            &RadioConfig::default(),
            &SelectorOptions::default(),
        )
        .unwrap();
        assert!(e[0].exclusion_reasons.contains(&ExclusionReason::Distance));
        assert!(e[0]
            .exclusion_reasons
            .contains(&ExclusionReason::LinkMargin));
    }

    #[test]
    fn fast_gateway_excludes_sf12_on_doppler() {
        let e = evaluate_candidates(
            &scenario(300.0, 13.9),
            &RadioConfig::default(),
            &SelectorOptions::default(),
        )
        .unwrap();
        assert!(e[5].exclusion_reasons.contains(&ExclusionReason::Doppler));
        assert!(e[..5]
            .iter()
            .all(|x| !x.exclusion_reasons.contains(&ExclusionReason::Doppler)));
    }

    #[test]
    fn heavy_traffic_excludes_sf12_on_duty_cycle() {
        let mut s = scenario(300.0, 0.0);
        s.packets_per_hour = 3600.0;
        s.region.duty_cycle_limit = 0.01;
        let e =
            evaluate_candidates(&s, &RadioConfig::default(), &SelectorOptions::default()).unwrap();
        assert!(e[5].hourly_airtime > 36.0 * 100.0);
        assert!(e[5].exclusion_reasons.contains(&ExclusionReason::DutyCycle));
        // Same traffic still trips the 10 % default budget.
        s.region = RegionProfile::default();
        let e =
            evaluate_candidates(&s, &RadioConfig::default(), &SelectorOptions::default()).unwrap();
        assert!(e[5].exclusion_reasons.contains(&ExclusionReason::DutyCycle));
    }

    #[test]
    fn throughput_requirement_excludes_slow_sfs() {
        let mut s = scenario(100.0, 0.0);
        s.required_throughput = Some(1000.0);
        let e =
            evaluate_candidates(&s, &RadioConfig::default(), &SelectorOptions::default()).unwrap();
        let by_rate: Vec<bool> = e
            .iter()
            .map(|x| x.exclusion_reasons.contains(&ExclusionReason::DataRate))
            .collect();
        assert_eq!(by_rate, [false, false, true, true, true, true]);
    }

    #[test]
    fn single_survivor_scores_one() {
        let evals = vec![
            eval(7, 0.05, 1.0, 3000.0, 5.0, true),
            eval(8, 0.1, 2.0, 1500.0, 8.0, false),
        ];
        let s = phase2_score(&evals, &ScoreWeights::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[&SpreadingFactor::SF8].total, 1.0);
    }

    #[test]
    fn toa_only_weights_hit_endpoints() {
        let evals = vec![
            eval(7, 0.05, 1.0, 3000.0, 5.0, false),
            eval(8, 0.1, 2.0, 1500.0, 8.0, false),
        ];
        let w = ScoreWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let s = phase2_score(&evals, &w).unwrap();
        assert_eq!(s[&SpreadingFactor::SF7].total, 1.0);
        assert_eq!(s[&SpreadingFactor::SF8].total, 0.0);
    }

    #[test]
    fn constant_factor_contributes_full_weight() {
        let evals = vec![
            eval(7, 0.05, 1.0, 3000.0, 5.0, false),
            eval(8, 0.1, 1.0, 1500.0, 8.0, false),
        ];
        let w = ScoreWeights::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let s = phase2_score(&evals, &w).unwrap();
        assert_eq!(s[&SpreadingFactor::SF7].total, 1.0);
        assert_eq!(s[&SpreadingFactor::SF8].total, 1.0);
        // Exact tie: lowest SF wins.
        assert_eq!(argmax_score(&s), Some(SpreadingFactor::SF7));
    }

    #[test]
    fn empty_candidate_set_reports_rule_counts() {
        let evals = vec![eval(7, 0.05, 1.0, 3000.0, 5.0, true)];
        match phase2_score(&evals, &ScoreWeights::default()) {
            Err(Error::NoFeasibleSf(d)) => assert_eq!(d.distance, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn weight_validation() {
        assert!(ScoreWeights::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(ScoreWeights::new(-1.0, 1.0, 0.0, 0.0).is_err());
        let w = ScoreWeights::new(3.0, 3.0, 2.0, 2.0).unwrap();
        assert!((w.w_toa - 0.3).abs() < 1e-15);
    }

    #[test]
    fn table_one_reference_scenarios() {
        assert_eq!(run(100.0, 7.5).chosen, SpreadingFactor::SF7);
        assert_eq!(run(500.0, 7.5).chosen, SpreadingFactor::SF8);
        assert_eq!(run(1000.0, 7.5).chosen, SpreadingFactor::SF9);
        let s4 = run(1500.0, 7.5).chosen;
        assert!(s4 == SpreadingFactor::SF10 || s4 == SpreadingFactor::SF11);
        assert_eq!(run(1800.0, 7.5).chosen, SpreadingFactor::SF11);
    }

    #[test]
    fn trace_mentions_every_sf() {
        let r = run(100.0, 0.0);
        for sf in SpreadingFactor::ALL {
            let tag = format!("phase1 {sf}:");
            assert!(r.decision_trace.iter().any(|l| l.starts_with(&tag)), "{sf}");
        }
    }

    #[test]
    fn infeasible_is_an_error_and_relaxed_falls_back() {
        let s = scenario(20_000.0, 0.0);
        let strict = select_sf(
            &s,
            &RadioConfig::default(),
            &ScoreWeights::default(),
            &SelectorOptions::default(),
        );
        assert!(matches!(strict, Err(Error::NoFeasibleSf(_))));
        let opts = SelectorOptions {
            relaxed: true,
            ..Default::default()
        };
        let r = select_sf(&s, &RadioConfig::default(), &ScoreWeights::default(), &opts).unwrap();
        assert_eq!(r.chosen, SpreadingFactor::SF12);
        assert!(r.decision_trace.iter().any(|l| l.starts_with("relaxed")));
    }

    #[test]
    fn mobility_thresholds() {
        assert_eq!(MobilityClass::from_speed(0.0), MobilityClass::Static);
        assert_eq!(MobilityClass::from_speed(0.49), MobilityClass::Static);
        assert_eq!(MobilityClass::from_speed(0.5), MobilityClass::Low);
        assert_eq!(MobilityClass::from_speed(5.0), MobilityClass::Moderate);
        assert_eq!(MobilityClass::from_speed(9.99), MobilityClass::Moderate);
        assert_eq!(MobilityClass::from_speed(10.0), MobilityClass::High);
    }

    #[test]
    fn scenario_validation() {
        let mut s = scenario(100.0, 0.0);
        s.distance = -5.0;
        assert!(s.validate().is_err());
        let mut s = scenario(100.0, 0.0);
        s.packets_per_hour = 0.0;
        assert!(s.validate().is_err());
        let mut s = scenario(100.0, 0.0);
        s.payload_bytes = 300;
        assert!(matches!(s.validate(), Err(Error::InvalidPayload(300))));
    }

    #[test]
    fn region_checks_radio() {
        let r = RegionProfile::default();
        assert!(r.check_radio(&RadioConfig::default()).is_ok());
        let hot = RadioConfig {
            tx_power: 20.0,
            ..RadioConfig::default()
        };
        assert!(r.check_radio(&hot).is_err());
        let off_band = RadioConfig {
            carrier_frequency: 868.1e6,
            ..RadioConfig::default()
        };
        assert!(r.check_radio(&off_band).is_err());
    }

    #[test]
    fn json_shape() {
        let r = run(1000.0, 0.0);
        let v = serde_json::to_value(&r).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<&String> = obj.keys().collect();
        keys.sort();
        assert_eq!(keys, ["chosen", "decision_trace", "evaluations", "scores"]);
        assert_eq!(v["chosen"], 9);
        assert!(v["scores"]["9"]["total"].is_number());
        assert_eq!(v["evaluations"][0]["exclusion_reasons"][0], "distance");
        let back: SelectionResult = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
