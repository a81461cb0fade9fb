//! Closed-form error rates for square M-QAM under AWGN.

use std::fmt;
use std::str::FromStr;

use crate::channel::db_to_linear;
use crate::constellation::validate_order;
use crate::error::{Error, Result};

/// Gaussian tail probability `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn check_snr(symbol_snr: f64) -> Result<()> {
    if symbol_snr.is_nan() || symbol_snr < 0.0 {
        return Err(Error::Snr(format!(
            "SNR must be non-negative, got {symbol_snr}"
        )));
    }
    Ok(())
}

/// Symbol error probability of Gray-labelled square M-QAM with minimum
/// distance detection:
/// `1 - (1 - 2(1 - 1/sqrt M) Q(sqrt(3 snr / (M - 1))))^2`.
pub fn ser_mqam(order: u64, symbol_snr: f64) -> Result<f64> {
    validate_order(order)?;
    check_snr(symbol_snr)?;
    let m = order as f64;
    let per_axis = 2.0 * (1.0 - 1.0 / m.sqrt()) * q_function((3.0 * symbol_snr / (m - 1.0)).sqrt());
    Ok(1.0 - (1.0 - per_axis).powi(2))
}

/// Symbol error probability of a dedicated `2^B`-QAM modulator.
pub fn ser_data_width(data_bits: u32, symbol_snr: f64) -> Result<f64> {
    if data_bits == 0 || !data_bits.is_multiple_of(2) || data_bits > 12 {
        return Err(Error::InvalidOrder(
            1u64.checked_shl(data_bits).unwrap_or(0),
        ));
    }
    ser_mqam(1 << data_bits, symbol_snr)
}

/// Symbol error probability once `A` address bits widen the alphabet to
/// `2^(B+A)` points.
pub fn ser_shared(data_bits: u32, address_bits: u32, symbol_snr: f64) -> Result<f64> {
    if data_bits < 1 || address_bits < 1 {
        return Err(Error::InvalidWidth(format!(
            "shared SER needs B >= 1 and A >= 1, got B={data_bits} A={address_bits}"
        )));
    }
    let width = data_bits + address_bits;
    if !width.is_multiple_of(2) || width > 12 {
        return Err(Error::InvalidOrder(1u64.checked_shl(width).unwrap_or(0)));
    }
    ser_mqam(1 << width, symbol_snr)
}

/// Gray-labelling approximation `BER ~ SER / log2 M`.
pub fn ber_gray_approx(order: u64, symbol_snr: f64) -> Result<f64> {
    let d = validate_order(order)?;
    Ok(ser_mqam(order, symbol_snr)? / d as f64)
}

/// Which closed form a curve evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    /// SER of M-QAM.
    Eq3 { order: u64 },
    /// SER of a dedicated `2^B`-QAM modulator.
    Eq4 { data_bits: u32 },
    /// SER of `2^(B+A)`-QAM shared by `2^A` users.
    Eq5 { data_bits: u32, address_bits: u32 },
    /// Gray-approximation BER of M-QAM.
    BerApprox { order: u64 },
}

impl Formula {
    pub fn evaluate(&self, symbol_snr: f64) -> Result<f64> {
        match *self {
            Formula::Eq3 { order } => ser_mqam(order, symbol_snr),
            Formula::Eq4 { data_bits } => ser_data_width(data_bits, symbol_snr),
            Formula::Eq5 {
                data_bits,
                address_bits,
            } => ser_shared(data_bits, address_bits, symbol_snr),
            Formula::BerApprox { order } => ber_gray_approx(order, symbol_snr),
        }
    }

    /// Builds a formula from its name and whichever parameters it needs.
    pub fn from_parts(
        id: FormulaId,
        order: Option<u64>,
        data_bits: Option<u32>,
        address_bits: Option<u32>,
    ) -> Result<Self> {
        let need = |what: &str| Error::Config(format!("formula needs `{what}`"));
        Ok(match id {
            FormulaId::Eq3 => Formula::Eq3 {
                order: order.ok_or_else(|| need("order"))?,
            },
            FormulaId::Eq4 => Formula::Eq4 {
                data_bits: data_bits.ok_or_else(|| need("data bits"))?,
            },
            FormulaId::Eq5 => Formula::Eq5 {
                data_bits: data_bits.ok_or_else(|| need("data bits"))?,
                address_bits: address_bits.ok_or_else(|| need("address bits"))?,
            },
            FormulaId::BerApprox => Formula::BerApprox {
                order: order.ok_or_else(|| need("order"))?,
            },
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            Formula::Eq3 { .. } => "eq3",
            Formula::Eq4 { .. } => "eq4",
            Formula::Eq5 { .. } => "eq5",
            Formula::BerApprox { .. } => "ber-approx",
        }
    }
}

/// Names accepted by [`Formula::from_parts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulaId {
    Eq3,
    Eq4,
    Eq5,
    BerApprox,
}

impl FromStr for FormulaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq3" => Ok(FormulaId::Eq3),
            "eq4" => Ok(FormulaId::Eq4),
            "eq5" => Ok(FormulaId::Eq5),
            "ber-approx" => Ok(FormulaId::BerApprox),
            other => Err(Error::Config(format!(
                "unknown formula `{other}` (expected eq3, eq4, eq5 or ber-approx)"
            ))),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Error probability sampled along a per-symbol SNR axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurve {
    pub formula: Formula,
    pub snr_axis: Vec<f64>,
    pub values: Vec<f64>,
}

impl TheoryCurve {
    pub fn new(formula: Formula, snr_axis_db: &[f64]) -> Result<Self> {
        let values = snr_axis_db
            .iter()
            .map(|&db| formula.evaluate(db_to_linear(db)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            formula,
            snr_axis: snr_axis_db.to_vec(),
            values,
        })
    }

    /// `snr_db,ps` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db,ps\n");
        for (snr, p) in self.snr_axis.iter().zip(&self.values) {
            out.push_str(&format!("{snr},{p:.12e}\n"));
        }
        out
    }
}

/// Evenly spaced sweep `start, start+step, ...` up to `stop` inclusive.
pub fn snr_axis(start_db: f64, stop_db: f64, step_db: f64) -> Result<Vec<f64>> {
    if !(start_db.is_finite() && stop_db.is_finite() && step_db.is_finite()) {
        return Err(Error::Config("SNR sweep bounds must be finite".into()));
    }
    if step_db <= 0.0 || start_db > stop_db {
        return Err(Error::Config(format!(
            "invalid SNR sweep {start_db}..{stop_db} step {step_db}"
        )));
    }
    let count = ((stop_db - start_db) / step_db + 1e-9).floor() as usize + 1;
    // round away representation noise like 0.30000000000000004
    Ok((0..count)
        .map(|i| ((start_db + i as f64 * step_db) * 1e9).round() / 1e9)
        .collect())
}

/// SNR in dB at which a decreasing error curve crosses `target`, found by
/// bisection on `[lo_db, hi_db]`.
pub fn required_snr_db<F>(curve: F, target: f64, lo_db: f64, hi_db: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (lo_db, hi_db);
    if curve(lo) < target || curve(hi) > target {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if curve(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
