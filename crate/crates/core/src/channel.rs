//! AWGN channel calibrated per symbol or per data bit.
//!
//! Noise is added to time-domain samples. Because the OFDM transforms are
//! unitary, white noise of variance `sigma^2` per time sample appears with the
//! same variance on every subcarrier, so the SNR set here is the SNR seen by
//! the constellation detector.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Generator used for every random draw in a simulation.
pub type SimRng = ChaCha8Rng;

/// Independent stream for shard `shard` of SNR point `point`.
///
/// The result depends only on its arguments, never on which worker runs the
/// shard.
pub fn child_rng(master_seed: u64, point: u32, shard: u32) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((point as u64) << 32) | shard as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SnrMode {
    /// SNR per constellation symbol.
    Symbol,
    /// SNR per information-bearing data bit; address bits are not counted.
    DataBit,
}

impl SnrMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SnrMode::Symbol => "symbol",
            SnrMode::DataBit => "databit",
        }
    }
}

impl fmt::Display for SnrMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SnrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symbol" => Ok(SnrMode::Symbol),
            "databit" => Ok(SnrMode::DataBit),
            other => Err(Error::Snr(format!(
                "unknown SNR mode `{other}` (expected `symbol` or `databit`)"
            ))),
        }
    }
}

/// Requested SNR. `value_db = +inf` is the noiseless sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSpec {
    pub mode: SnrMode,
    pub value_db: f64,
    /// Data bits per symbol, needed in [`SnrMode::DataBit`].
    pub data_bits: Option<u32>,
}

impl SnrSpec {
    pub fn per_symbol(value_db: f64) -> Self {
        Self {
            mode: SnrMode::Symbol,
            value_db,
            data_bits: None,
        }
    }

    pub fn per_data_bit(value_db: f64, data_bits: u32) -> Self {
        Self {
            mode: SnrMode::DataBit,
            value_db,
            data_bits: Some(data_bits),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Linear SNR per symbol: `10^(dB/10)`, times `B` in per-data-bit mode.
pub fn resolve_symbol_snr(spec: &SnrSpec) -> Result<f64> {
    if spec.value_db.is_nan() || spec.value_db == f64::NEG_INFINITY {
        return Err(Error::Snr(format!(
            "SNR {} dB is not usable",
            spec.value_db
        )));
    }
    let linear = db_to_linear(spec.value_db);
    match spec.mode {
        SnrMode::Symbol => Ok(linear),
        SnrMode::DataBit => match spec.data_bits {
            Some(b) if b >= 1 => Ok(linear * b as f64),
            Some(b) => Err(Error::Snr(format!("data width {b} in per-data-bit mode"))),
            None => Err(Error::Snr("per-data-bit SNR needs the data width".into())),
        },
    }
}

/// Adds circularly-symmetric Gaussian noise of total variance
/// `reference_power / symbol_snr` to every sample, in place.
///
/// An infinite SNR leaves the samples untouched and draws nothing.
pub fn add_awgn_in_place<R: Rng + ?Sized>(
    samples: &mut [Complex64],
    symbol_snr: f64,
    reference_power: f64,
    rng: &mut R,
) -> Result<()> {
    if symbol_snr.is_nan() || symbol_snr <= 0.0 {
        return Err(Error::Snr(format!(
            "SNR must be positive, got {symbol_snr}"
        )));
    }
    if reference_power.is_nan() || reference_power <= 0.0 || reference_power.is_infinite() {
        return Err(Error::Snr(format!(
            "reference power must be positive, got {reference_power}"
        )));
    }
    if symbol_snr.is_infinite() {
        return Ok(());
    }
    let sigma = (reference_power / symbol_snr / 2.0).sqrt();
    for s in samples {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Complex64::new(sigma * re, sigma * im);
    }
    Ok(())
}

/// Copying variant of [`add_awgn_in_place`].
pub fn add_awgn<R: Rng + ?Sized>(
    samples: &[Complex64],
    symbol_snr: f64,
    reference_power: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let mut out = samples.to_vec();
    add_awgn_in_place(&mut out, symbol_snr, reference_power, rng)?;
    Ok(out)
}
