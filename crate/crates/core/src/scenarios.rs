//! Validation grid generation and scenario persistence.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{EnvironmentClass, EnvironmentModel};
use crate::selector::{RegionProfile, ScenarioSpec};
use crate::trace::TraceKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    pub payload_bytes: usize,
    pub packets_per_hour: f64,
    /// bits/s
    pub required_throughput: Option<f64>,
}

impl TrafficProfile {
    pub const fn new(payload_bytes: usize, packets_per_hour: f64) -> Self {
        Self {
            payload_bytes,
            packets_per_hour,
            required_throughput: None,
        }
    }
}

/// Axes of the scenario grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioGrid {
    pub distances: Vec<f64>,
    pub speeds: Vec<f64>,
    pub environments: Vec<EnvironmentModel>,
    pub traffic_profiles: Vec<TrafficProfile>,
    #[serde(skip)]
    pub region: RegionProfile,
}

impl Default for ScenarioGrid {
    /// 14 distances over 100-1800 m, 4 speeds, 4 environments, 3 traffic
    /// profiles: 672 scenarios.
    fn default() -> Self {
        let distances = (0..14).map(|i| 100.0 + 1700.0 * i as f64 / 13.0).collect();
        Self {
            distances,
            speeds: vec![0.0, 5.0, 10.0, 20.0],
            environments: EnvironmentClass::ALL
                .into_iter()
                .map(EnvironmentModel::preset)
                .collect(),
            traffic_profiles: vec![
                TrafficProfile::new(20, 60.0),
                TrafficProfile::new(10, 12.0),
                TrafficProfile::new(51, 120.0),
            ],
            region: RegionProfile::default(),
        }
    }
}

impl ScenarioGrid {
    pub fn len(&self) -> usize {
        self.distances.len()
            * self.speeds.len()
            * self.environments.len()
            * self.traffic_profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Enumerates the grid in (distance, speed, environment, traffic) order.
/// Ids are `S` plus a zero-padded index; trace phases come from `seed`.
pub fn generate_grid(grid: &ScenarioGrid, seed: u64) -> Result<Vec<ScenarioSpec>> {
    for (name, len) in [
        ("distances", grid.distances.len()),
        ("speeds", grid.speeds.len()),
        ("environments", grid.environments.len()),
        ("traffic_profiles", grid.traffic_profiles.len()),
    ] {
        if len == 0 {
            return Err(Error::InvalidGrid(format!("axis `{name}` is empty")));
        }
    }
    let width = grid.len().saturating_sub(1).to_string().len().max(4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::with_capacity(grid.len());
    for &distance in &grid.distances {
        for &speed in &grid.speeds {
            for env in &grid.environments {
                for traffic in &grid.traffic_profiles {
                    let phase: f64 = rng.random();
                    let spec = ScenarioSpec {
                        id: format!("S{:0width$}", specs.len()),
                        distance,
                        speed,
                        payload_bytes: traffic.payload_bytes,
                        packets_per_hour: traffic.packets_per_hour,
                        required_throughput: traffic.required_throughput,
                        environment: env.clone(),
                        region: grid.region.clone(),
                        trace: TraceKind::for_speed(speed),
                        trace_phase: if speed > 0.0 { phase } else { 0.0 },
                    };
                    spec.validate()
                        .map_err(|e| Error::InvalidGrid(format!("{}: {e}", spec.id)))?;
                    specs.push(spec);
                }
            }
        }
    }
    Ok(specs)
}

pub const CSV_COLUMNS: [&str; 16] = [
    "id",
    "distance",
    "speed",
    "payload_bytes",
    "packets_per_hour",
    "required_throughput",
    "environment",
    "path_loss_exponent",
    "reference_loss_1m",
    "shadowing_sigma",
    "duty_cycle_limit",
    "max_tx_power",
    "band_low",
    "band_high",
    "trace",
    "trace_phase",
];

pub fn write_scenarios<W: io::Write>(writer: W, specs: &[ScenarioSpec]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for s in specs {
        w.write_record([
            s.id.clone(),
            s.distance.to_string(),
            s.speed.to_string(),
            s.payload_bytes.to_string(),
            s.packets_per_hour.to_string(),
            s.required_throughput
                .map(|t| t.to_string())
                .unwrap_or_default(),
            s.environment.class_label.to_string(),
            s.environment.path_loss_exponent.to_string(),
            s.environment.reference_loss_1m.to_string(),
            s.environment.shadowing_sigma.to_string(),
            s.region.duty_cycle_limit.to_string(),
            s.region.max_tx_power.to_string(),
            s.region.allowed_band.0.to_string(),
            s.region.allowed_band.1.to_string(),
            s.trace.to_string(),
            s.trace_phase.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_scenarios(specs: &[ScenarioSpec], path: impl AsRef<Path>) -> Result<()> {
    write_scenarios(fs::File::create(path)?, specs)
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    index: [usize; CSV_COLUMNS.len()],
    row: usize,
}

impl Row<'_> {
    fn raw(&self, column: usize) -> &str {
        self.record.get(self.index[column]).unwrap_or("").trim()
    }

    fn parse<T: std::str::FromStr>(&self, column: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(column);
        raw.parse()
            .map_err(|e| Error::parse(self.row, CSV_COLUMNS[column], format!("`{raw}`: {e}")))
    }

    fn positive(&self, column: usize) -> Result<f64> {
        let v: f64 = self.parse(column)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::parse(
                self.row,
                CSV_COLUMNS[column],
                format!("must be > 0, got {v}"),
            ))
        }
    }

    fn spec(&self) -> Result<ScenarioSpec> {
        let throughput = match self.raw(5) {
            "" => None,
            _ => Some(self.parse(5)?),
        };
        let speed: f64 = self.parse(2)?;
        if !(speed >= 0.0) {
            return Err(Error::parse(
                self.row,
                "speed",
                format!("must be >= 0, got {speed}"),
            ));
        }
        let spec = ScenarioSpec {
            id: self.raw(0).to_string(),
            distance: self.positive(1)?,
            speed,
            payload_bytes: self.parse(3)?,
            packets_per_hour: self.positive(4)?,
            required_throughput: throughput,
            environment: EnvironmentModel {
                class_label: self.parse(6)?,
                path_loss_exponent: self.parse(7)?,
                reference_loss_1m: self.parse(8)?,
                shadowing_sigma: self.parse(9)?,
            },
            region: RegionProfile {
                duty_cycle_limit: self.parse(10)?,
                max_tx_power: self.parse(11)?,
                allowed_band: (self.parse(12)?, self.parse(13)?),
            },
            trace: self.parse(14)?,
            trace_phase: self.parse(15)?,
        };
        spec.validate()
            .map_err(|e| Error::parse(self.row, "scenario", e.to_string()))?;
        Ok(spec)
    }
}

/// Reads the CSV written by [`write_scenarios`]. Rows are numbered from 1,
/// excluding the header.
pub fn read_scenarios<R: io::Read>(reader: R) -> Result<Vec<ScenarioSpec>> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = r.headers()?.clone();
    let mut index = [0; CSV_COLUMNS.len()];
    for (slot, name) in index.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::parse(0, name, "missing column"))?;
    }
    let mut specs = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        specs.push(
            Row {
                record: &record,
                index,
                row: i + 1,
            }
            .spec()?,
        );
    }
    Ok(specs)
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<ScenarioSpec>> {
    read_scenarios(fs::File::open(path)?)
}

/// Single-scenario key-value file (TOML).
///
/// ```toml
/// distance = 1000
/// speed = 7.5
/// environment = "open-los"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub id: String,
    pub distance: f64,
    pub speed: f64,
    pub payload_bytes: usize,
    pub packets_per_hour: f64,
    pub required_throughput: Option<f64>,
    pub environment: EnvironmentClass,
    pub path_loss_exponent: Option<f64>,
    pub reference_loss_1m: Option<f64>,
    pub shadowing_sigma: Option<f64>,
    pub region: Option<RegionProfile>,
    pub trace: Option<TraceKind>,
    pub trace_phase: f64,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            id: "scenario".into(),
            distance: 0.0,
            speed: 0.0,
            payload_bytes: 20,
            packets_per_hour: 60.0,
            required_throughput: None,
            environment: EnvironmentClass::OpenLos,
            path_loss_exponent: None,
            reference_loss_1m: None,
            shadowing_sigma: None,
            region: None,
            trace: None,
            trace_phase: 0.0,
        }
    }
}

impl ScenarioFile {
    /// Resolves against `environment` and `region` defaults for unset keys.
    pub fn into_spec(self, region: &RegionProfile) -> Result<ScenarioSpec> {
        let mut environment = EnvironmentModel::preset(self.environment);
        if let Some(n) = self.path_loss_exponent {
            environment.path_loss_exponent = n;
        }
        if let Some(pl0) = self.reference_loss_1m {
            environment.reference_loss_1m = pl0;
        }
        if let Some(sigma) = self.shadowing_sigma {
            environment.shadowing_sigma = sigma;
        }
        let spec = ScenarioSpec {
            trace: self.trace.unwrap_or(TraceKind::for_speed(self.speed)),
            id: self.id,
            distance: self.distance,
            speed: self.speed,
            payload_bytes: self.payload_bytes,
            packets_per_hour: self.packets_per_hour,
            required_throughput: self.required_throughput,
            environment,
            region: self.region.unwrap_or_else(|| region.clone()),
            trace_phase: self.trace_phase,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn parse_scenario_file(text: &str, region: &RegionProfile) -> Result<ScenarioSpec> {
    let file: ScenarioFile = toml::from_str(text)?;
    file.into_spec(region)
}

pub fn load_scenario_file(path: impl AsRef<Path>, region: &RegionProfile) -> Result<ScenarioSpec> {
    parse_scenario_file(&fs::read_to_string(path)?, region)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_672_specs() {
        let specs = generate_grid(&ScenarioGrid::default(), 1).unwrap();
        assert_eq!(specs.len(), 672);
        assert_eq!(specs[0].id, "S0000");
        assert_eq!(specs[671].id, "S0671");
        assert_eq!(specs[0].distance, 100.0);
        assert!((specs[671].distance - 1800.0).abs() < 1e-9);
        assert!(specs
            .iter()
            .all(|s| (s.speed == 0.0) == (s.trace == TraceKind::Fixed)));
    }

    #[test]
    fn lexicographic_order() {
        let grid = ScenarioGrid::default();
        let specs = generate_grid(&grid, 1).unwrap();
        // Traffic varies fastest, distance slowest.
        assert_eq!(
            specs[1].payload_bytes,
            grid.traffic_profiles[1].payload_bytes
        );
        assert_eq!(specs[3].environment, grid.environments[1]);
        assert_eq!(specs[12].speed, grid.speeds[1]);
        assert_eq!(specs[48].distance, grid.distances[1]);
    }

    #[test]
    fn single_value_axes() {
        let grid = ScenarioGrid {
            distances: vec![500.0],
            speeds: vec![0.0],
            environments: vec![EnvironmentModel::default()],
            traffic_profiles: vec![TrafficProfile::new(20, 60.0)],
            region: RegionProfile::default(),
        };
        assert_eq!(generate_grid(&grid, 0).unwrap().len(), 1);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let grid = ScenarioGrid {
            speeds: vec![],
            ..Default::default()
        };
        assert!(matches!(
            generate_grid(&grid, 0),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_grid(&ScenarioGrid::default(), 9).unwrap();
        let b = generate_grid(&ScenarioGrid::default(), 9).unwrap();
        assert_eq!(a, b);
        let c = generate_grid(&ScenarioGrid::default(), 10).unwrap();
        assert_ne!(a, c);
        assert!(a
            .iter()
            .zip(&c)
            .all(|(x, y)| x.id == y.id && x.distance == y.distance));
    }

    #[test]
    fn csv_round_trip() {
        let mut specs = generate_grid(&ScenarioGrid::default(), 4).unwrap();
        specs[5].required_throughput = Some(1234.5);
        let mut buf = Vec::new();
        write_scenarios(&mut buf, &specs).unwrap();
        assert_eq!(read_scenarios(buf.as_slice()).unwrap(), specs);
    }

    #[test]
    fn negative_distance_names_column() {
        let specs = generate_grid(&ScenarioGrid::default(), 4).unwrap();
        let mut buf = Vec::new();
        write_scenarios(&mut buf, &specs[..3]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = lines[2].replacen(",100,", ",-5,", 1);
        let err = read_scenarios(lines.join("\n").as_bytes()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "distance");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unparsable_field_names_column() {
        let text = format!(
            "{}\nS0,100,0,20,sixty,,open-los,1.8,74.6,3,0.1,10,430000000,440000000,fixed,0\n",
            CSV_COLUMNS.join(",")
        );
        let err = read_scenarios(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("packets_per_hour"), "{err}");
    }

    #[test]
    fn scenario_file_defaults() {
        let s = parse_scenario_file("distance = 1000\nspeed = 7.5\n", &RegionProfile::default())
            .unwrap();
        assert_eq!(s.payload_bytes, 20);
        assert_eq!(s.packets_per_hour, 60.0);
        assert_eq!(s.trace, TraceKind::LinearPass);
        assert_eq!(s.environment, EnvironmentModel::default());
        let s = parse_scenario_file(
            "distance = 300\nenvironment = \"coastal-los\"\nshadowing_sigma = 0\n",
            &RegionProfile::default(),
        )
        .unwrap();
        assert_eq!(s.environment.class_label, EnvironmentClass::CoastalLos);
        assert_eq!(s.environment.shadowing_sigma, 0.0);
    }

    #[test]
    fn scenario_file_rejects_bad_input() {
        assert!(parse_scenario_file("speed = 1\n", &RegionProfile::default()).is_err());
        assert!(
            parse_scenario_file("distance = 1\nbogus = 2\n", &RegionProfile::default()).is_err()
        );
    }
}
