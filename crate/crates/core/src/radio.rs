//! LoRa time-on-air and transmit energy, following the modem-datasheet
//! formula used by Semtech's airtime calculator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issues, Result};

pub const BANDWIDTHS_HZ: [u32; 3] = [125_000, 250_000, 500_000];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub spreading_factor: u8,
    pub bandwidth_hz: u32,
    /// Coding rate 4/x; holds x.
    pub coding_rate_denominator: u8,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_on: bool,
    pub low_data_rate_optimize: bool,
    pub payload_bytes: u16,
    pub tx_power_w: f64,
}

impl RadioConfig {
    /// Defaults matching the calculator: 8-symbol preamble, explicit header,
    /// CRC on, CR 4/5, low-data-rate optimisation only for SF11/12 at 125 kHz.
    pub fn new(spreading_factor: u8, bandwidth_hz: u32, payload_bytes: u16, tx_power_w: f64) -> Self {
        Self {
            spreading_factor,
            bandwidth_hz,
            coding_rate_denominator: 5,
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
            low_data_rate_optimize: default_ldro(spreading_factor, bandwidth_hz),
            payload_bytes,
            tx_power_w,
        }
    }

    pub fn validate_into(&self, prefix: &str, issues: &mut Issues) {
        if !(7..=12).contains(&self.spreading_factor) {
            issues.push(format!("{prefix}.spreading_factor"), "must lie in 7..=12");
        }
        if !BANDWIDTHS_HZ.contains(&self.bandwidth_hz) {
            issues.push(format!("{prefix}.bandwidth_hz"), "must be 125000, 250000 or 500000");
        }
        if !(5..=8).contains(&self.coding_rate_denominator) {
            issues.push(format!("{prefix}.coding_rate_denominator"), "must lie in 5..=8");
        }
        if self.payload_bytes < 1 {
            issues.push(format!("{prefix}.payload_bytes"), "must be >= 1");
        }
        if !(self.tx_power_w > 0.0 && self.tx_power_w.is_finite()) {
            issues.push(format!("{prefix}.tx_power_w"), "must be > 0");
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        self.validate_into("radio", &mut issues);
        issues.into_result()
    }
}

pub fn default_ldro(spreading_factor: u8, bandwidth_hz: u32) -> bool {
    spreading_factor >= 11 && bandwidth_hz == 125_000
}

/// Seconds per chirp symbol, `2^SF / BW`.
pub fn symbol_duration(config: &RadioConfig) -> f64 {
    f64::from(1u32 << config.spreading_factor) / f64::from(config.bandwidth_hz)
}

/// Payload symbol count including the 8 fixed header symbols.
pub fn payload_symbols(config: &RadioConfig) -> Result<u32> {
    let sf = i64::from(config.spreading_factor);
    let de = i64::from(config.low_data_rate_optimize);
    let denom = 4 * (sf - 2 * de);
    if denom <= 0 {
        return Err(Error::config(format!(
            "spreading factor {sf} too small for low-data-rate optimisation"
        )));
    }
    let crc = i64::from(config.crc_on);
    let ih = i64::from(!config.explicit_header);
    let numer = 8 * i64::from(config.payload_bytes) - 4 * sf + 28 + 16 * crc - 20 * ih;
    let blocks = if numer > 0 { (numer + denom - 1) / denom } else { 0 };
    Ok(8 + (blocks * i64::from(config.coding_rate_denominator)) as u32)
}

/// Packet time on air, s.
pub fn time_on_air(config: &RadioConfig) -> Result<f64> {
    let n = payload_symbols(config)?;
    let preamble = f64::from(config.preamble_symbols) + 4.25;
    Ok((preamble + f64::from(n)) * symbol_duration(config))
}

/// Energy of one transmission, J.
pub fn tx_energy(config: &RadioConfig) -> Result<f64> {
    Ok(time_on_air(config)? * config.tx_power_w)
}
