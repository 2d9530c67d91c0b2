//! Predicted-vs-simulated accuracy and the static-vs-dynamic comparison.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linksim::{self, DynamicProtocolConfig, Schedule, SimulatorConfig};
use crate::phy::{RadioConfig, SpreadingFactor};
use crate::selector::{self, MobilityClass, ScenarioSpec, ScoreWeights, SelectorOptions};

/// Rows are predicted SF, columns actual best SF, both SF7 first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 6]; 6],
}

impl ConfusionMatrix {
    pub fn add(&mut self, predicted: SpreadingFactor, actual: SpreadingFactor) {
        self.counts[predicted.index()][actual.index()] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal(&self) -> usize {
        (0..6).map(|i| self.counts[i][i]).sum()
    }

    pub fn within_one(&self) -> usize {
        (0..6)
            .flat_map(|i: usize| (0..6usize).map(move |j| (i, j)))
            .filter(|&(i, j)| i.abs_diff(j) <= 1)
            .map(|(i, j)| self.counts[i][j])
            .sum()
    }

    pub fn exact_match_rate(&self) -> f64 {
        ratio(self.diagonal(), self.total())
    }

    pub fn within_one_sf_rate(&self) -> f64 {
        ratio(self.within_one(), self.total())
    }

    pub fn predicted_histogram(&self) -> [usize; 6] {
        self.counts.map(|row| row.iter().sum())
    }

    pub fn actual_histogram(&self) -> [usize; 6] {
        std::array::from_fn(|j| self.counts.iter().map(|row| row[j]).sum())
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Builds a matrix from raw (predicted, actual) SF numbers.
pub fn confusion_matrix(pairs: &[(u8, u8)]) -> Result<ConfusionMatrix> {
    if pairs.is_empty() {
        return Err(Error::InvalidPair("no pairs given".into()));
    }
    let mut m = ConfusionMatrix::default();
    for &(p, a) in pairs {
        let sf = |v: u8| {
            SpreadingFactor::new(v)
                .map_err(|_| Error::InvalidPair(format!("({p}, {a}): SF{v} is outside 7..12")))
        };
        m.add(sf(p)?, sf(a)?);
    }
    Ok(m)
}

/// Inputs shared by every scenario of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct EvaluationSettings {
    pub radio: RadioConfig,
    pub weights: ScoreWeights,
    pub selector: SelectorOptions,
    pub simulator: SimulatorConfig,
}

impl EvaluationSettings {
    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.selector.validate()?;
        self.simulator.validate()?;
        self.weights.normalized()?;
        Ok(())
    }
}

/// Seed of one scenario's simulations, derived from the run seed and the id.
pub fn scenario_seed(seed: u64, id: &str) -> u64 {
    // FNV-1a, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRecord {
    pub scenario_id: String,
    pub mobility_class: MobilityClass,
    /// `None` when no SF passed the exclusion rules.
    pub predicted: Option<SpreadingFactor>,
    /// Best simulated SF; equals `predicted` whenever the prediction ties
    /// with the best PDR.
    pub actual: SpreadingFactor,
    pub pdr_at_predicted: Option<f64>,
    pub pdr_at_actual: f64,
    /// All SFs delivered nothing.
    pub degenerate: bool,
    pub note: Option<String>,
}

impl ScenarioRecord {
    pub fn is_exact(&self) -> bool {
        self.predicted == Some(self.actual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub total_scenarios: usize,
    pub exact_match_rate: f64,
    pub within_one_sf_rate: f64,
    pub confusion: ConfusionMatrix,
    pub infeasible_count: usize,
    pub infeasible_ids: Vec<String>,
    pub seed: u64,
    pub rows: Vec<ScenarioRecord>,
}

fn validate_one(
    spec: &ScenarioSpec,
    settings: &EvaluationSettings,
    seed: u64,
) -> Result<ScenarioRecord> {
    let seed = scenario_seed(seed, &spec.id);
    let sim_spec = settings.simulator.apply(spec);
    let n_packets = settings.simulator.packets_for(spec);
    let schedule = Schedule::for_scenario(&sim_spec, n_packets)?;
    let trace = linksim::scenario_trace(&sim_spec, schedule.horizon())?;
    let brute = linksim::brute_force_best_sf(&sim_spec, &settings.radio, &trace, seed, n_packets)?;
    let (predicted, note) =
        match selector::select_sf(spec, &settings.radio, &settings.weights, &settings.selector) {
            Ok(r) => (Some(r.chosen), None),
            Err(Error::NoFeasibleSf(d)) => (None, Some(d.to_string())),
            Err(e) => return Err(e),
        };
    let actual = match predicted {
        Some(p) if brute.is_tied_best(p) => p,
        _ => brute.best,
    };
    Ok(ScenarioRecord {
        scenario_id: spec.id.clone(),
        mobility_class: spec.mobility_class(),
        predicted,
        actual,
        pdr_at_predicted: predicted.map(|p| brute.pdr(p)),
        pdr_at_actual: brute.pdr(actual),
        degenerate: brute.degenerate,
        note,
    })
}

/// Runs selection and brute-force simulation for every scenario. Scenarios
/// run in parallel; rows come back sorted by id.
pub fn validate(
    specs: &[ScenarioSpec],
    settings: &EvaluationSettings,
    seed: u64,
) -> Result<ValidationReport> {
    if specs.is_empty() {
        return Err(Error::InvalidScenario("no scenarios to validate".into()));
    }
    settings.validate()?;
    let weights = settings.weights.normalized()?;
    let settings = EvaluationSettings {
        weights,
        ..settings.clone()
    };
    let mut rows = specs
        .par_iter()
        .map(|s| validate_one(s, &settings, seed))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));

    let mut confusion = ConfusionMatrix::default();
    let mut infeasible_ids = Vec::new();
    for r in &rows {
        match r.predicted {
            Some(p) => confusion.add(p, r.actual),
            None => infeasible_ids.push(r.scenario_id.clone()),
        }
    }
    Ok(ValidationReport {
        total_scenarios: rows.len(),
        exact_match_rate: confusion.exact_match_rate(),
        within_one_sf_rate: confusion.within_one_sf_rate(),
        infeasible_count: infeasible_ids.len(),
        infeasible_ids,
        confusion,
        seed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub scenario_id: String,
    pub mobility_class: MobilityClass,
    pub static_sf: SpreadingFactor,
    pub pdr_static: f64,
    pub pdr_dynamic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub count: usize,
    pub mean_pdr_static: f64,
    pub mean_pdr_dynamic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub by_class: BTreeMap<MobilityClass, ClassSummary>,
    /// Scenarios skipped because selection was infeasible.
    pub skipped: Vec<String>,
    pub notice: Option<String>,
}

impl ComparisonTable {
    /// Summary over classes at or above `min`.
    pub fn summary_from(&self, min: MobilityClass) -> Option<ClassSummary> {
        summarize(self.rows.iter().filter(|r| r.mobility_class >= min))
    }
}

fn summarize<'a>(rows: impl Iterator<Item = &'a ComparisonRow>) -> Option<ClassSummary> {
    let (mut n, mut s, mut d) = (0, 0.0, 0.0);
    for r in rows {
        n += 1;
        s += r.pdr_static;
        d += r.pdr_dynamic;
    }
    (n > 0).then(|| ClassSummary {
        count: n,
        mean_pdr_static: s / n as f64,
        mean_pdr_dynamic: d / n as f64,
    })
}

/// PDR of the planned fixed SF against the adaptive protocol for every
/// mobile scenario (speed > 0).
pub fn compare_static_vs_dynamic(
    specs: &[ScenarioSpec],
    settings: &EvaluationSettings,
    dyn_config: &DynamicProtocolConfig,
    seed: u64,
) -> Result<ComparisonTable> {
    dyn_config.validate()?;
    settings.validate()?;
    let weights = settings.weights.normalized()?;
    let mobile: Vec<&ScenarioSpec> = specs.iter().filter(|s| s.speed > 0.0).collect();
    if mobile.is_empty() {
        return Ok(ComparisonTable {
            rows: Vec::new(),
            by_class: BTreeMap::new(),
            skipped: Vec::new(),
            notice: Some("no mobile scenarios (speed > 0) in input; nothing to compare".into()),
        });
    }
    let results = mobile
        .par_iter()
        .map(
            |spec| -> Result<std::result::Result<ComparisonRow, String>> {
                let chosen = match selector::select_sf(
                    spec,
                    &settings.radio,
                    &weights,
                    &settings.selector,
                ) {
                    Ok(r) => r.chosen,
                    Err(Error::NoFeasibleSf(_)) => return Ok(Err(spec.id.clone())),
                    Err(e) => return Err(e),
                };
                let seed = scenario_seed(seed, &spec.id);
                let sim_spec = settings.simulator.apply(spec);
                let n_packets = settings.simulator.packets_for(spec);
                let schedule = Schedule::for_scenario(&sim_spec, n_packets)?;
                let trace = linksim::scenario_trace(&sim_spec, schedule.horizon())?;
                let fixed = linksim::simulate_link(
                    &sim_spec,
                    chosen,
                    &settings.radio,
                    &trace,
                    seed,
                    n_packets,
                )?;
                let dynamic = linksim::simulate_dynamic_protocol(
                    &sim_spec,
                    &settings.radio,
                    dyn_config,
                    &trace,
                    seed,
                    n_packets,
                )?;
                Ok(Ok(ComparisonRow {
                    scenario_id: spec.id.clone(),
                    mobility_class: spec.mobility_class(),
                    static_sf: chosen,
                    pdr_static: fixed.pdr,
                    pdr_dynamic: dynamic.pdr,
                }))
            },
        )
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(id) => skipped.push(id),
        }
    }
    rows.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    skipped.sort();
    let by_class = MobilityClass::ALL
        .into_iter()
        .filter_map(|c| summarize(rows.iter().filter(|r| r.mobility_class == c)).map(|s| (c, s)))
        .collect();
    Ok(ComparisonTable {
        notice: rows
            .is_empty()
            .then(|| "every mobile scenario was infeasible; nothing to compare".into()),
        rows,
        by_class,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::EnvironmentModel;

    #[test]
    fn diagonal_only() {
        let m = confusion_matrix(&[(9, 9); 5]).unwrap();
        assert_eq!(m.counts[2][2], 5);
        assert_eq!(m.total(), 5);
        assert_eq!(m.exact_match_rate(), 1.0);
    }

    #[test]
    fn adjacent_misses() {
        let m = confusion_matrix(&[(7, 8), (8, 7)]).unwrap();
        assert_eq!(m.within_one_sf_rate(), 1.0);
        assert_eq!(m.exact_match_rate(), 0.0);
    }

    #[test]
    fn out_of_range_pair() {
        assert!(matches!(
            confusion_matrix(&[(6, 7)]),
            Err(Error::InvalidPair(_))
        ));
        assert!(matches!(
            confusion_matrix(&[(7, 13)]),
            Err(Error::InvalidPair(_))
        ));
        assert!(confusion_matrix(&[]).is_err());
    }

    #[test]
    fn marginals() {
        let m = confusion_matrix(&[(7, 7), (7, 9), (12, 11), (10, 10)]).unwrap();
        assert_eq!(m.predicted_histogram(), [2, 0, 0, 1, 0, 1]);
        assert_eq!(m.actual_histogram(), [1, 0, 1, 1, 1, 0]);
    }

    #[test]
    fn seeds_differ_by_id() {
        assert_ne!(scenario_seed(1, "S0000"), scenario_seed(1, "S0001"));
        assert_eq!(scenario_seed(1, "S0000"), scenario_seed(1, "S0000"));
        assert_ne!(scenario_seed(1, "S0000"), scenario_seed(2, "S0000"));
    }

    fn small_set() -> Vec<ScenarioSpec> {
        [100.0, 600.0, 1300.0]
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                ScenarioSpec::new(
                    format!("X{i}"),
                    d,
                    0.0,
                    20,
                    60.0,
                    EnvironmentModel::default(),
                )
            })
            .collect()
    }

    #[test]
    fn report_invariants() {
        let settings = EvaluationSettings {
            simulator: SimulatorConfig::with_packets(200),
            ..Default::default()
        };
        let r = validate(&small_set(), &settings, 3).unwrap();
        assert_eq!(r.confusion.total() + r.infeasible_count, r.total_scenarios);
        assert_eq!(
            r.exact_match_rate,
            r.confusion.diagonal() as f64 / r.confusion.total() as f64
        );
        assert!(r.exact_match_rate <= r.within_one_sf_rate);
        assert_eq!(
            r.rows
                .iter()
                .map(|x| x.scenario_id.as_str())
                .collect::<Vec<_>>(),
            ["X0", "X1", "X2"]
        );
    }

    #[test]
    fn infeasible_scenarios_are_listed() {
        let mut specs = small_set();
        specs[1].distance = 50_000.0;
        let settings = EvaluationSettings {
            simulator: SimulatorConfig::with_packets(100),
            ..Default::default()
        };
        let r = validate(&specs, &settings, 3).unwrap();
        assert_eq!(r.infeasible_ids, ["X1"]);
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows[1].note.is_some());
    }

    #[test]
    fn empty_mobile_subset() {
        let t = compare_static_vs_dynamic(
            &small_set(),
            &EvaluationSettings::default(),
            &DynamicProtocolConfig::default(),
            1,
        )
        .unwrap();
        assert!(t.rows.is_empty());
        assert!(t.notice.is_some());
    }
}
