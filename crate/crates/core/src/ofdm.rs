//! CP-OFDM modulation of a resource-block label grid.
//!
//! Both transform directions use the unitary scaling `1/sqrt(N)`, so noise
//! and signal energy per subcarrier carry over unchanged between the
//! constellation and time domains.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::framing::{LabelGrid, RbGeometry};

/// Baseband samples of consecutive CP-OFDM symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainSignal {
    samples: Vec<Complex64>,
    samples_per_symbol: usize,
    symbol_count: usize,
}

impl TimeDomainSignal {
    pub fn new(samples: Vec<Complex64>, samples_per_symbol: usize) -> Result<Self> {
        if samples_per_symbol == 0 || !samples.len().is_multiple_of(samples_per_symbol) {
            return Err(Error::Geometry(format!(
                "{} samples is not a whole number of {samples_per_symbol}-sample symbols",
                samples.len()
            )));
        }
        let symbol_count = samples.len() / samples_per_symbol;
        Ok(Self {
            samples,
            samples_per_symbol,
            symbol_count,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn symbol_count(&self) -> usize {
        self.symbol_count
    }

    pub fn symbol(&self, k: usize) -> &[Complex64] {
        &self.samples[k * self.samples_per_symbol..(k + 1) * self.samples_per_symbol]
    }

    /// Debug dump as `index,real,imag` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,real,imag\n");
        for (i, s) in self.samples.iter().enumerate() {
            out.push_str(&format!("{i},{:.12e},{:.12e}\n", s.re, s.im));
        }
        out
    }
}

/// Detected point indices, row-major by OFDM symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointGrid {
    pub symbols: usize,
    pub subcarriers: usize,
    pub points: Vec<usize>,
}

/// Modulator/demodulator for one geometry, holding the planned transforms.
#[derive(Clone)]
pub struct OfdmEngine {
    geometry: RbGeometry,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    norm: f64,
}

impl std::fmt::Debug for OfdmEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmEngine")
            .field("geometry", &self.geometry)
            .finish_non_exhaustive()
    }
}

impl OfdmEngine {
    pub fn new(geometry: RbGeometry) -> Result<Self> {
        geometry.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            geometry,
            forward: planner.plan_fft_forward(geometry.fft_size),
            inverse: planner.plan_fft_inverse(geometry.fft_size),
            norm: 1.0 / (geometry.fft_size as f64).sqrt(),
        })
    }

    pub fn geometry(&self) -> &RbGeometry {
        &self.geometry
    }

    /// Modulates already-mapped subcarrier values, `subcarriers` per symbol.
    pub fn modulate_cells(&self, cells: &[Complex64]) -> Result<TimeDomainSignal> {
        let g = &self.geometry;
        if !cells.len().is_multiple_of(g.subcarriers) {
            return Err(Error::Geometry(format!(
                "{} cells do not fill whole symbols of {} subcarriers",
                cells.len(),
                g.subcarriers
            )));
        }
        let n = g.fft_size;
        let sps = g.samples_per_symbol();
        let symbols = cells.len() / g.subcarriers;
        let mut samples = vec![Complex64::new(0.0, 0.0); symbols * sps];
        for (k, row) in cells.chunks_exact(g.subcarriers).enumerate() {
            let out = &mut samples[k * sps..(k + 1) * sps];
            let body = &mut out[g.cp_length..];
            body[g.subcarrier_offset..g.subcarrier_offset + g.subcarriers].copy_from_slice(row);
            self.inverse.process(body);
            for s in body.iter_mut() {
                *s *= self.norm;
            }
            let (cp, body) = out.split_at_mut(g.cp_length);
            cp.copy_from_slice(&body[n - g.cp_length..]);
        }
        TimeDomainSignal::new(samples, sps)
    }

    pub fn modulate(
        &self,
        grid: &LabelGrid,
        constellation: &Constellation,
    ) -> Result<TimeDomainSignal> {
        if grid.subcarriers() != self.geometry.subcarriers {
            return Err(Error::Geometry(format!(
                "grid has {} subcarriers, geometry {}",
                grid.subcarriers(),
                self.geometry.subcarriers
            )));
        }
        if let Some(&bad) = grid.labels().iter().find(|&&l| l >= constellation.order()) {
            return Err(Error::Geometry(format!(
                "label {bad} outside {}-QAM",
                constellation.order()
            )));
        }
        let cells: Vec<Complex64> = grid
            .labels()
            .iter()
            .map(|&l| constellation.modulate(l))
            .collect();
        self.modulate_cells(&cells)
    }

    /// Removes the prefix, transforms and returns the occupied bins.
    pub fn demodulate_cells(&self, signal: &TimeDomainSignal) -> Result<Vec<Complex64>> {
        let g = &self.geometry;
        if signal.samples_per_symbol() != g.samples_per_symbol() {
            return Err(Error::Geometry(format!(
                "signal uses {}-sample symbols, geometry {}",
                signal.samples_per_symbol(),
                g.samples_per_symbol()
            )));
        }
        let mut cells = Vec::with_capacity(signal.symbol_count() * g.subcarriers);
        let mut buf = vec![Complex64::new(0.0, 0.0); g.fft_size];
        for k in 0..signal.symbol_count() {
            buf.copy_from_slice(&signal.symbol(k)[g.cp_length..]);
            self.forward.process(&mut buf);
            cells.extend(
                buf[g.subcarrier_offset..g.subcarrier_offset + g.subcarriers]
                    .iter()
                    .map(|c| c * self.norm),
            );
        }
        Ok(cells)
    }

    pub fn demodulate(
        &self,
        signal: &TimeDomainSignal,
        constellation: &Constellation,
    ) -> Result<PointGrid> {
        let cells = self.demodulate_cells(signal)?;
        Ok(PointGrid {
            symbols: signal.symbol_count(),
            subcarriers: self.geometry.subcarriers,
            points: cells
                .iter()
                .map(|&c| constellation.nearest_point(c))
                .collect(),
        })
    }
}

pub fn ofdm_modulate(
    grid: &LabelGrid,
    constellation: &Constellation,
    geometry: &RbGeometry,
) -> Result<TimeDomainSignal> {
    if grid.symbols() != geometry.symbols_per_slot {
        return Err(Error::Geometry(format!(
            "grid has {} symbols, slot {}",
            grid.symbols(),
            geometry.symbols_per_slot
        )));
    }
    OfdmEngine::new(*geometry)?.modulate(grid, constellation)
}

/// Demodulates a signal whose length must be exactly one slot.
pub fn ofdm_demodulate(
    signal: &TimeDomainSignal,
    constellation: &Constellation,
    geometry: &RbGeometry,
) -> Result<PointGrid> {
    let expected = geometry.symbols_per_slot * geometry.samples_per_symbol();
    if signal.samples().len() != expected {
        return Err(Error::Geometry(format!(
            "signal holds {} samples, a slot needs {expected}",
            signal.samples().len()
        )));
    }
    OfdmEngine::new(*geometry)?.demodulate(signal, constellation)
}
