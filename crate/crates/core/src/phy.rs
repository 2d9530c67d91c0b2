//! LoRa physical-layer arithmetic.
//!
//! Everything here is a pure function of its inputs: chirp timing, packet
//! duration (Semtech SX127x formula), receiver sensitivity, log-distance path
//! loss, link budget, transmit energy and the Doppler tolerance rule.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Symbol duration above which low-data-rate optimization is mandatory.
pub const LDRO_SYMBOL_THRESHOLD_S: f64 = 0.016;

pub const MAX_PAYLOAD_BYTES: usize = 255;

/// LoRa spreading factor, SF7 through SF12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SpreadingFactor(u8);

impl SpreadingFactor {
    pub const SF7: Self = Self(7);
    pub const SF8: Self = Self(8);
    pub const SF9: Self = Self(9);
    pub const SF10: Self = Self(10);
    pub const SF11: Self = Self(11);
    pub const SF12: Self = Self(12);

    pub const ALL: [Self; 6] = [
        Self::SF7,
        Self::SF8,
        Self::SF9,
        Self::SF10,
        Self::SF11,
        Self::SF12,
    ];

    pub fn new(value: u8) -> Result<Self> {
        if (7..=12).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidConfig(format!(
                "spreading factor {value} outside 7..=12"
            )))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based position in [`SpreadingFactor::ALL`].
    pub fn index(self) -> usize {
        usize::from(self.0 - 7)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// One step up, saturating at SF12.
    pub fn step_up(self) -> Self {
        Self(self.0.saturating_add(1).min(12))
    }

    /// One step down, saturating at SF7.
    pub fn step_down(self) -> Self {
        Self(self.0.saturating_sub(1).max(7))
    }

    /// Chips per symbol, `2^sf`.
    pub fn chips(self) -> f64 {
        f64::from(1u32 << self.0)
    }
}

impl TryFrom<u8> for SpreadingFactor {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SpreadingFactor> for u8 {
    fn from(sf: SpreadingFactor) -> u8 {
        sf.0
    }
}

impl fmt::Display for SpreadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SF{}", self.0)
    }
}

impl std::str::FromStr for SpreadingFactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_start_matches("SF").trim_start_matches("sf");
        let value: u8 = digits
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("cannot parse spreading factor `{s}`")))?;
        Self::new(value)
    }
}

/// Transceiver and framing parameters.
///
/// Units: frequencies in Hz, powers in dBm, gains in dBi, voltage in V,
/// currents in mA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub carrier_frequency: f64,
    pub bandwidth: f64,
    /// Coding-rate denominator: 5..=8 means 4/5..4/8.
    pub coding_rate: u8,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_enabled: bool,
    pub tx_power: f64,
    pub tx_antenna_gain: f64,
    pub rx_antenna_gain: f64,
    pub supply_voltage: f64,
    /// `(dBm, mA)` pairs, sorted by power on validation.
    pub tx_current_by_power: Vec<(f64, f64)>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            carrier_frequency: 433.0e6,
            bandwidth: 125_000.0,
            coding_rate: 5,
            preamble_symbols: 8,
            explicit_header: true,
            crc_enabled: true,
            tx_power: 10.0,
            tx_antenna_gain: 0.0,
            rx_antenna_gain: 0.0,
            supply_voltage: 3.3,
            // SX1276/78 typical supply current: RFO path up to +13 dBm,
            // PA_BOOST above.
            tx_current_by_power: vec![
                (7.0, 20.0),
                (10.0, 24.0),
                (13.0, 29.0),
                (17.0, 90.0),
                (20.0, 120.0),
            ],
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if !(self.carrier_frequency > 0.0) || !self.carrier_frequency.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "carrier_frequency must be positive, got {}",
                self.carrier_frequency
            )));
        }
        if !(5..=8).contains(&self.coding_rate) {
            return Err(Error::InvalidConfig(format!(
                "coding_rate must be in 5..=8 (4/5..4/8), got {}",
                self.coding_rate
            )));
        }
        if !(self.supply_voltage > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "supply_voltage must be positive, got {}",
                self.supply_voltage
            )));
        }
        if self.tx_current_by_power.is_empty() {
            return Err(Error::InvalidConfig(
                "tx_current_by_power must have at least one entry".into(),
            ));
        }
        if self
            .tx_current_by_power
            .iter()
            .any(|&(p, i)| !p.is_finite() || !(i >= 0.0))
        {
            return Err(Error::InvalidConfig(
                "tx_current_by_power entries must be finite with non-negative current".into(),
            ));
        }
        for v in [self.tx_power, self.tx_antenna_gain, self.rx_antenna_gain] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(
                    "power and gain values must be finite".into(),
                ));
            }
        }
        Ok(())
    }

    /// Transmitter output plus both antenna gains.
    pub fn system_gain(&self) -> f64 {
        self.tx_power + self.tx_antenna_gain + self.rx_antenna_gain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentClass {
    OpenLos,
    SemiRuralLos,
    CoastalLos,
    ObstructedLos,
}

impl EnvironmentClass {
    pub const ALL: [Self; 4] = [
        Self::OpenLos,
        Self::SemiRuralLos,
        Self::CoastalLos,
        Self::ObstructedLos,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::OpenLos => "open-los",
            Self::SemiRuralLos => "semi-rural-los",
            Self::CoastalLos => "coastal-los",
            Self::ObstructedLos => "obstructed-los",
        }
    }
}

impl fmt::Display for EnvironmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for EnvironmentClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown environment class `{s}`")))
    }
}

/// Free-space path loss at 1 m, dB.
pub fn free_space_loss_1m(carrier_frequency: f64) -> f64 {
    let wavelength = SPEED_OF_LIGHT / carrier_frequency;
    20.0 * (4.0 * std::f64::consts::PI / wavelength).log10()
}

/// Lowest path-loss exponent accepted by [`EnvironmentModel::validate`].
pub const MIN_PATH_LOSS_EXPONENT: f64 = 1.5;

/// Log-distance propagation model with log-normal shadowing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentModel {
    pub path_loss_exponent: f64,
    /// Intercept of the log-distance fit at 1 m, dB.
    pub reference_loss_1m: f64,
    pub shadowing_sigma: f64,
    pub class_label: EnvironmentClass,
}

impl EnvironmentModel {
    /// Calibrated ground-level line-of-sight presets at 433 MHz.
    ///
    /// The intercepts sit roughly 49-51 dB above free space at 1 m, which
    /// absorbs antenna height, ground and body losses of low-cost modules.
    pub fn preset(class: EnvironmentClass) -> Self {
        let (path_loss_exponent, reference_loss_1m, shadowing_sigma) = match class {
            EnvironmentClass::OpenLos => (1.8, 74.6, 3.0),
            EnvironmentClass::SemiRuralLos => (1.9, 74.2, 3.5),
            EnvironmentClass::CoastalLos => (1.75, 74.8, 3.0),
            EnvironmentClass::ObstructedLos => (2.0, 73.5, 4.0),
        };
        Self {
            path_loss_exponent,
            reference_loss_1m,
            shadowing_sigma,
            class_label: class,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss_exponent >= MIN_PATH_LOSS_EXPONENT)
            || !self.path_loss_exponent.is_finite()
        {
            return Err(Error::InvalidConfig(format!(
                "path_loss_exponent must be >= {MIN_PATH_LOSS_EXPONENT}, got {}",
                self.path_loss_exponent
            )));
        }
        if !(self.shadowing_sigma >= 0.0) || !self.shadowing_sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "shadowing_sigma must be >= 0, got {}",
                self.shadowing_sigma
            )));
        }
        if !self.reference_loss_1m.is_finite() {
            return Err(Error::InvalidConfig(
                "reference_loss_1m must be finite".into(),
            ));
        }
        Ok(())
    }
}

impl Default for EnvironmentModel {
    fn default() -> Self {
        Self::preset(EnvironmentClass::OpenLos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub expected_rssi: f64,
    pub sensitivity: f64,
    pub link_margin: f64,
    pub path_loss: f64,
}

/// Path loss with a flag raised when the input distance was below 1 m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub loss: f64,
    pub clamped: bool,
}

/// Transmit energy with a flag raised when the configured power was not an
/// exact entry of the current table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    pub joules: f64,
    pub current_interpolated: bool,
}

pub fn symbol_duration(sf: SpreadingFactor, bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    Ok(sf.chips() / bandwidth)
}

pub fn low_data_rate_optimize(sf: SpreadingFactor, bandwidth: f64) -> Result<bool> {
    Ok(symbol_duration(sf, bandwidth)? > LDRO_SYMBOL_THRESHOLD_S)
}

/// Number of payload symbols (header, payload and CRC), Semtech formula.
pub fn payload_symbols(
    sf: SpreadingFactor,
    config: &RadioConfig,
    payload_bytes: usize,
) -> Result<u32> {
    if payload_bytes == 0 || payload_bytes > MAX_PAYLOAD_BYTES {
        return Err(Error::InvalidPayload(payload_bytes));
    }
    config.validate()?;
    let sf_i = i64::from(sf.value());
    let de = i64::from(low_data_rate_optimize(sf, config.bandwidth)?);
    let ih = i64::from(!config.explicit_header);
    let crc = i64::from(config.crc_enabled);
    let cr = i64::from(config.coding_rate - 4);
    let numerator = 8 * payload_bytes as i64 - 4 * sf_i + 28 + 16 * crc - 20 * ih;
    let denominator = 4 * (sf_i - 2 * de);
    // ceil for positive numerator; negative numerators clamp to zero below.
    let blocks = if numerator > 0 {
        (numerator + denominator - 1) / denominator
    } else {
        0
    };
    Ok((8 + blocks * (cr + 4)) as u32)
}

/// Packet duration in seconds: preamble plus payload symbols.
pub fn time_on_air(sf: SpreadingFactor, config: &RadioConfig, payload_bytes: usize) -> Result<f64> {
    let symbols = payload_symbols(sf, config, payload_bytes)?;
    let t_sym = symbol_duration(sf, config.bandwidth)?;
    let preamble = (f64::from(config.preamble_symbols) + 4.25) * t_sym;
    Ok(preamble + f64::from(symbols) * t_sym)
}

/// Application bits per second of channel occupancy.
pub fn effective_data_rate(
    sf: SpreadingFactor,
    config: &RadioConfig,
    payload_bytes: usize,
) -> Result<f64> {
    let toa = time_on_air(sf, config, payload_bytes)?;
    Ok(payload_bytes as f64 * 8.0 / toa)
}

/// Receiver sensitivity in dBm (SX1276 datasheet, RFI_HF input).
pub fn sensitivity(sf: SpreadingFactor, bandwidth: f64) -> Result<f64> {
    let table: [f64; 6] = if bandwidth == 125_000.0 {
        [-123.0, -126.0, -129.0, -132.0, -134.5, -137.0]
    } else if bandwidth == 250_000.0 {
        [-120.0, -123.0, -125.0, -128.0, -130.0, -133.0]
    } else if bandwidth == 500_000.0 {
        [-116.0, -119.0, -122.0, -125.0, -128.0, -130.0]
    } else {
        return Err(Error::InvalidConfig(format!(
            "no sensitivity table for bandwidth {bandwidth} Hz (supported: 125000, 250000, 500000)"
        )));
    };
    Ok(table[sf.index()])
}

/// `reference_loss_1m + 10·n·log10(d)`, with `d` clamped to at least 1 m.
pub fn path_loss(distance: f64, env: &EnvironmentModel) -> PathLoss {
    let clamped = !(distance >= 1.0);
    let d = if clamped { 1.0 } else { distance };
    PathLoss {
        loss: env.reference_loss_1m + 10.0 * env.path_loss_exponent * d.log10(),
        clamped,
    }
}

pub fn link_budget(
    sf: SpreadingFactor,
    config: &RadioConfig,
    distance: f64,
    env: &EnvironmentModel,
) -> Result<LinkBudget> {
    let sensitivity = sensitivity(sf, config.bandwidth)?;
    let path_loss = path_loss(distance, env).loss;
    let expected_rssi = config.system_gain() - path_loss;
    Ok(LinkBudget {
        expected_rssi,
        sensitivity,
        link_margin: expected_rssi - sensitivity,
        path_loss,
    })
}

/// Largest distance whose link margin is at least `fade_margin`.
///
/// Returns 0 when even the 1 m margin falls short, since the path-loss model
/// is flat below 1 m.
pub fn max_reliable_range(
    sf: SpreadingFactor,
    config: &RadioConfig,
    env: &EnvironmentModel,
    fade_margin: f64,
) -> Result<f64> {
    let allowed_loss = config.system_gain() - sensitivity(sf, config.bandwidth)? - fade_margin;
    let excess = allowed_loss - env.reference_loss_1m;
    if excess < 0.0 {
        return Ok(0.0);
    }
    Ok(10f64.powf(excess / (10.0 * env.path_loss_exponent)))
}

/// Supply current at the configured power, mA.
///
/// Linear interpolation between table entries; outside the table the nearest
/// entry is used. The flag reports whether the power was absent from the table.
pub fn tx_current(config: &RadioConfig) -> (f64, bool) {
    let mut table = config.tx_current_by_power.clone();
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    let p = config.tx_power;
    if let Some(&(_, i)) = table.iter().find(|&&(tp, _)| tp == p) {
        return (i, false);
    }
    let first = table[0];
    let last = table[table.len() - 1];
    if p <= first.0 {
        return (first.1, true);
    }
    if p >= last.0 {
        return (last.1, true);
    }
    let upper = table
        .iter()
        .position(|&(tp, _)| tp > p)
        .unwrap_or(table.len() - 1);
    let (p0, i0) = table[upper - 1];
    let (p1, i1) = table[upper];
    (i0 + (i1 - i0) * (p - p0) / (p1 - p0), true)
}

/// Transmit-only energy per hour, joules.
pub fn energy_per_hour(
    sf: SpreadingFactor,
    config: &RadioConfig,
    payload_bytes: usize,
    packets_per_hour: f64,
) -> Result<EnergyEstimate> {
    if !(packets_per_hour >= 0.0) {
        return Err(Error::InvalidScenario(format!(
            "packets_per_hour must be >= 0, got {packets_per_hour}"
        )));
    }
    let toa = time_on_air(sf, config, payload_bytes)?;
    let (current_ma, current_interpolated) = tx_current(config);
    if current_interpolated {
        log::warn!(
            "tx power {} dBm not in current table; using interpolated {:.1} mA",
            config.tx_power,
            current_ma
        );
    }
    Ok(EnergyEstimate {
        joules: config.supply_voltage * current_ma * 1e-3 * toa * packets_per_hour,
        current_interpolated,
    })
}

/// Carrier offset seen by a receiver closing at `speed`, Hz.
pub fn doppler_shift(carrier_frequency: f64, speed: f64) -> f64 {
    speed.abs() * carrier_frequency / SPEED_OF_LIGHT
}

/// Largest tolerated carrier offset, `BW / 2^(sf+1)` Hz.
pub fn doppler_tolerance(sf: SpreadingFactor, bandwidth: f64) -> f64 {
    bandwidth / (2.0 * sf.chips())
}

/// True when the Doppler shift at `speed` exceeds the SF's tolerance.
pub fn doppler_exclusion_check(sf: SpreadingFactor, config: &RadioConfig, speed: f64) -> bool {
    doppler_shift(config.carrier_frequency, speed) > doppler_tolerance(sf, config.bandwidth)
}
