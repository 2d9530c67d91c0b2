//! Gateway-to-node distance over time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closest approach of a linear pass, as a fraction of the farthest distance.
pub const PASS_CLOSEST_RATIO: f64 = 0.5;

/// Samples emitted per period of a periodic generator.
const SAMPLES_PER_PERIOD: usize = 32;

/// Mobility pattern attached to a scenario; concrete geometry comes from the
/// scenario's distance and speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Fixed,
    LinearPass,
    OutAndBack,
}

impl TraceKind {
    pub fn for_speed(speed: f64) -> Self {
        if speed > 0.0 {
            Self::LinearPass
        } else {
            Self::Fixed
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::LinearPass => "linear-pass",
            Self::OutAndBack => "out-and-back",
        }
    }

    /// Generator whose farthest point equals `distance`.
    pub fn generator(self, distance: f64, speed: f64, phase: f64) -> TraceGenerator {
        match self {
            _ if speed <= 0.0 => TraceGenerator::Fixed { distance },
            Self::Fixed => TraceGenerator::Fixed { distance },
            Self::LinearPass => TraceGenerator::LinearPass {
                closest: distance * PASS_CLOSEST_RATIO,
                farthest: distance,
                speed,
                phase,
            },
            Self::OutAndBack => TraceGenerator::OutAndBack {
                near: distance * PASS_CLOSEST_RATIO,
                far: distance,
                speed,
                phase,
            },
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Fixed, Self::LinearPass, Self::OutAndBack]
            .into_iter()
            .find(|k| k.label() == s.trim())
            .ok_or_else(|| Error::InvalidTrace(format!("unknown trace kind `{s}`")))
    }
}

/// Parametric mobility models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceGenerator {
    Fixed {
        distance: f64,
    },
    /// Repeated straight drive-by: the road passes the node at `closest`
    /// and each pass starts and ends at `farthest`.
    LinearPass {
        closest: f64,
        farthest: f64,
        speed: f64,
        phase: f64,
    },
    /// Radial shuttle between `near` and `far`.
    OutAndBack {
        near: f64,
        far: f64,
        speed: f64,
        phase: f64,
    },
    /// Externally supplied samples.
    Custom,
}

impl TraceGenerator {
    /// Length of one repetition, seconds; `None` for non-periodic traces.
    pub fn period(&self) -> Option<f64> {
        match *self {
            Self::LinearPass {
                closest,
                farthest,
                speed,
                ..
            } => Some(2.0 * (farthest * farthest - closest * closest).sqrt() / speed),
            Self::OutAndBack {
                near, far, speed, ..
            } => Some(2.0 * (far - near) / speed),
            Self::Fixed { .. } | Self::Custom => None,
        }
    }

    /// Closed-form distance at time `t`.
    pub fn distance_at(&self, t: f64) -> f64 {
        match *self {
            Self::Fixed { distance } => distance,
            Self::LinearPass {
                closest,
                farthest,
                phase,
                ..
            } => {
                let half = (farthest * farthest - closest * closest).sqrt();
                let u = fractional(t / self.period().unwrap_or(f64::INFINITY) + phase);
                let x = -half + 2.0 * half * u;
                (closest * closest + x * x).sqrt()
            }
            Self::OutAndBack {
                near, far, phase, ..
            } => {
                let u = fractional(t / self.period().unwrap_or(f64::INFINITY) + phase);
                let tri = if u < 0.5 { 2.0 * u } else { 2.0 - 2.0 * u };
                far - (far - near) * tri
            }
            Self::Custom => f64::NAN,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidTrace(format!("{name} must be > 0, got {v}")))
            }
        };
        match *self {
            Self::Fixed { distance } => positive(distance, "distance"),
            Self::LinearPass {
                closest,
                farthest,
                speed,
                ..
            } => {
                positive(closest, "closest")?;
                positive(speed, "speed")?;
                if farthest <= closest {
                    return Err(Error::InvalidTrace("farthest must exceed closest".into()));
                }
                Ok(())
            }
            Self::OutAndBack {
                near, far, speed, ..
            } => {
                positive(near, "near")?;
                positive(speed, "speed")?;
                if far <= near {
                    return Err(Error::InvalidTrace("far must exceed near".into()));
                }
                Ok(())
            }
            Self::Custom => Ok(()),
        }
    }
}

fn fractional(x: f64) -> f64 {
    x - x.floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub time: f64,
    pub distance: f64,
}

/// Piecewise-linear distance profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityTrace {
    samples: Vec<TraceSample>,
    generator: TraceGenerator,
}

impl MobilityTrace {
    /// Builds a trace from explicit samples.
    pub fn from_samples(samples: Vec<TraceSample>) -> Result<Self> {
        Self::checked(samples, TraceGenerator::Custom)
    }

    fn checked(samples: Vec<TraceSample>, generator: TraceGenerator) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidTrace("trace has no samples".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.distance > 0.0) || !s.distance.is_finite() {
                return Err(Error::InvalidTrace(format!(
                    "sample {i}: distance must be > 0, got {}",
                    s.distance
                )));
            }
            if !s.time.is_finite() {
                return Err(Error::InvalidTrace(format!(
                    "sample {i}: time is not finite"
                )));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].time <= w[0].time) {
            return Err(Error::InvalidTrace(format!(
                "sample times must be strictly increasing (sample {})",
                i + 1
            )));
        }
        Ok(Self { samples, generator })
    }

    /// Samples `generator` over `[0, horizon]`.
    pub fn generate(generator: TraceGenerator, horizon: f64) -> Result<Self> {
        generator.validate()?;
        if matches!(generator, TraceGenerator::Custom) {
            return Err(Error::InvalidTrace(
                "custom traces are built from samples".into(),
            ));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidTrace(format!(
                "horizon must be > 0, got {horizon}"
            )));
        }
        let samples = match generator.period() {
            None => vec![
                TraceSample {
                    time: 0.0,
                    distance: generator.distance_at(0.0),
                },
                TraceSample {
                    time: horizon,
                    distance: generator.distance_at(horizon),
                },
            ],
            Some(period) => {
                let step = period / SAMPLES_PER_PERIOD as f64;
                let n = (horizon / step).ceil() as usize;
                (0..=n)
                    .map(|k| {
                        let time = (k as f64 * step).min(horizon);
                        TraceSample {
                            time,
                            distance: generator.distance_at(time),
                        }
                    })
                    .fold(Vec::with_capacity(n + 1), |mut acc, s| {
                        if acc.last().is_none_or(|l: &TraceSample| s.time > l.time) {
                            acc.push(s);
                        }
                        acc
                    })
            }
        };
        Self::checked(samples, generator)
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn generator(&self) -> &TraceGenerator {
        &self.generator
    }

    pub fn start(&self) -> f64 {
        self.samples[0].time
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].time
    }

    pub fn covers(&self, from: f64, to: f64) -> bool {
        self.start() <= from && self.end() >= to
    }

    pub fn max_distance(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.distance)
            .fold(f64::MIN, f64::max)
    }

    /// Linear interpolation between neighbouring samples; clamps outside the
    /// sampled span.
    pub fn distance_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if t <= s[0].time {
            return s[0].distance;
        }
        if t >= s[s.len() - 1].time {
            return s[s.len() - 1].distance;
        }
        let hi = s.partition_point(|p| p.time <= t);
        let (a, b) = (s[hi - 1], s[hi]);
        let w = (t - a.time) / (b.time - a.time);
        a.distance + (b.distance - a.distance) * w
    }

    /// Range rate at `t` from the sample segment containing it, m/s.
    pub fn radial_speed_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if s.len() < 2 {
            return 0.0;
        }
        let hi = s.partition_point(|p| p.time <= t).clamp(1, s.len() - 1);
        let (a, b) = (s[hi - 1], s[hi]);
        (b.distance - a.distance) / (b.time - a.time)
    }
}
