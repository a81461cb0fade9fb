//! Seeded Monte Carlo link simulation.
//!
//! Each SNR point is simulated slot by slot. Slot `t` of point `p` draws every
//! random value (payload and noise) from its own stream
//! `child_rng(seed, p, t)`, and per-slot counters are merged by integer
//! addition, so a report depends on the configuration and seed only. Slots are
//! run in batches whose sizes do not depend on the worker count, and the stop
//! rule is checked between batches.

use std::ops::AddAssign;

use rand::Rng;
use rayon::prelude::*;

use crate::analytics::{ber_gray_approx, ser_mqam, snr_axis};
use crate::channel::{add_awgn_in_place, child_rng, resolve_symbol_snr, SnrMode, SnrSpec};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::framing::{
    frame_user_data, round_robin_schedule, weighted_schedule, RbGeometry, SlotSchedule,
};
use crate::mapping::{
    build_address_bit_plan, build_lookup_plan, build_qos_plan, build_single_user_plan,
    AddressBitLayout, AllocationPlan, LookupRow, SchemeKind,
};
use crate::ofdm::OfdmEngine;
use crate::report::{BerReport, SnrPointReport, UserTally};

/// Smallest accepted `min_symbols`.
pub const MIN_SYMBOLS_FLOOR: u64 = 10_000;

/// How the allocation plan is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanSpec {
    /// One user owning the whole alphabet.
    Single,
    /// Address field at the given label bit positions.
    AddressBit { positions: Vec<u32> },
    /// Explicit table; `source` names where it came from.
    Lookup {
        source: String,
        rows: Vec<LookupRow>,
    },
    /// Non-uniform widths, one per user.
    Qos { bits: Vec<u32> },
}

impl PlanSpec {
    pub fn build(&self, order: u32) -> Result<AllocationPlan> {
        match self {
            PlanSpec::Single => build_single_user_plan(order),
            PlanSpec::AddressBit { positions } => {
                build_address_bit_plan(&AddressBitLayout::new(order, positions)?)
            }
            PlanSpec::Lookup { rows, .. } => build_lookup_plan(order, rows),
            PlanSpec::Qos { bits } => build_qos_plan(order, bits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleSpec {
    RoundRobin,
    /// One weight per plan user, in plan order.
    Weighted(Vec<u32>),
}

impl ScheduleSpec {
    /// Schedule of the first slot.
    pub fn build(&self, plan: &AllocationPlan, symbols_per_slot: usize) -> Result<SlotSchedule> {
        match self {
            ScheduleSpec::RoundRobin => round_robin_schedule(&plan.user_ids(), symbols_per_slot),
            ScheduleSpec::Weighted(w) => weighted_schedule(&plan.user_ids(), w, symbols_per_slot),
        }
    }

    /// Schedules of consecutive slots, repeating with the returned period.
    ///
    /// Round robin carries on across slot boundaries (slot `t` starts with
    /// user `t * S mod n`), so every user gets the same share of symbols over
    /// a full period even when `S` is not a multiple of `n`. Weighted
    /// schedules repeat every slot.
    pub fn build_cycle(
        &self,
        plan: &AllocationPlan,
        symbols_per_slot: usize,
    ) -> Result<Vec<SlotSchedule>> {
        match self {
            ScheduleSpec::RoundRobin => {
                let users = plan.user_ids();
                let n = users.len();
                let period = n / gcd(n, symbols_per_slot.max(1));
                (0..period)
                    .map(|t| {
                        let mut rotated = users.clone();
                        rotated.rotate_left(t * symbols_per_slot % n.max(1));
                        round_robin_schedule(&rotated, symbols_per_slot)
                    })
                    .collect()
            }
            ScheduleSpec::Weighted(_) => Ok(vec![self.build(plan, symbols_per_slot)?]),
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSweep {
    pub mode: SnrMode,
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SnrSweep {
    pub fn points(&self) -> Result<Vec<f64>> {
        snr_axis(self.start_db, self.stop_db, self.step_db)
    }
}

/// Per-point stopping rule: run until `min_symbols` are sent and either
/// `min_errors` symbol errors were seen or `max_symbols` were sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_symbols: u64,
    pub min_errors: u64,
    pub max_symbols: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_symbols: 200_000,
            min_errors: 200,
            max_symbols: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub order: u32,
    pub plan: PlanSpec,
    pub geometry: RbGeometry,
    pub schedule: ScheduleSpec,
    pub sweep: SnrSweep,
    /// Replace the sweep by a single noise-free point.
    pub noiseless: bool,
    pub stop: StopRule,
    pub seed: u64,
    /// Parallel modulator groups sharing the carrier; recorded, not simulated.
    pub modulator_groups: u32,
    /// Worker threads; 0 uses every core. Does not affect results.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            order: 16,
            plan: PlanSpec::Single,
            geometry: RbGeometry::default(),
            schedule: ScheduleSpec::RoundRobin,
            sweep: SnrSweep {
                mode: SnrMode::Symbol,
                start_db: 0.0,
                stop_db: 20.0,
                step_db: 2.0,
            },
            noiseless: false,
            stop: StopRule::default(),
            seed: 1,
            modulator_groups: 1,
            workers: 0,
        }
    }
}

/// A validated configuration with its derived objects.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub constellation: Constellation,
    pub plan: AllocationPlan,
    /// Schedule of slot 0.
    pub schedule: SlotSchedule,
    /// Slot `t` uses `schedule_cycle[t % len]`.
    pub schedule_cycle: Vec<SlotSchedule>,
    pub snr_points_db: Vec<f64>,
}

impl ExperimentConfig {
    pub fn prepare(&self) -> Result<PreparedExperiment> {
        let constellation = Constellation::qam(self.order)?;
        self.geometry.validate()?;
        let plan = self.plan.build(self.order)?;
        let schedule = self.schedule.build(&plan, self.geometry.symbols_per_slot)?;
        schedule.validate(&plan, &self.geometry)?;
        let schedule_cycle = self
            .schedule
            .build_cycle(&plan, self.geometry.symbols_per_slot)?;
        for s in &schedule_cycle {
            s.validate(&plan, &self.geometry)?;
        }

        if self.stop.min_symbols < MIN_SYMBOLS_FLOOR {
            return Err(Error::Config(format!(
                "min_symbols must be at least {MIN_SYMBOLS_FLOOR}, got {}",
                self.stop.min_symbols
            )));
        }
        if self.stop.max_symbols < self.stop.min_symbols {
            return Err(Error::Config(format!(
                "max_symbols {} below min_symbols {}",
                self.stop.max_symbols, self.stop.min_symbols
            )));
        }
        if self.stop.max_symbols / self.geometry.cells_per_slot() as u64 >= u32::MAX as u64 {
            return Err(Error::Config("max_symbols too large".into()));
        }
        if self.modulator_groups < 1 {
            return Err(Error::Config("modulator_groups must be at least 1".into()));
        }
        if self.sweep.mode == SnrMode::DataBit && plan.uniform_data_bits().is_none() {
            return Err(Error::Config(
                "per-data-bit SNR needs every user to carry the same number of data bits".into(),
            ));
        }
        let snr_points_db = if self.noiseless {
            vec![f64::INFINITY]
        } else {
            self.sweep.points()?
        };

        Ok(PreparedExperiment {
            config: self.clone(),
            constellation,
            plan,
            schedule,
            schedule_cycle,
            snr_points_db,
        })
    }
}

/// Error counters of one user.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub symbols_sent: u64,
    pub symbol_errors: u64,
    pub data_bits_sent: u64,
    pub data_bit_errors: u64,
    /// Symbol errors whose decoded label belongs to another user or to nobody.
    pub user_confusions: u64,
}

impl AddAssign for Tally {
    fn add_assign(&mut self, o: Self) {
        self.symbols_sent += o.symbols_sent;
        self.symbol_errors += o.symbol_errors;
        self.data_bits_sent += o.data_bits_sent;
        self.data_bit_errors += o.data_bit_errors;
        self.user_confusions += o.user_confusions;
    }
}

impl Tally {
    pub fn ser(&self) -> f64 {
        ratio(self.symbol_errors, self.symbols_sent)
    }

    pub fn ber(&self) -> f64 {
        ratio(self.data_bit_errors, self.data_bits_sent)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Everything one slot simulation needs, shared read-only by the workers.
struct SlotSimulator<'a> {
    exp: &'a PreparedExperiment,
    engine: OfdmEngine,
    /// Data words each user sends, per entry of the schedule cycle.
    words_per_slot: Vec<Vec<usize>>,
}

impl SlotSimulator<'_> {
    fn run(&self, point: u32, shard: u32, symbol_snr: f64) -> Result<Vec<Tally>> {
        let exp = self.exp;
        let plan = &exp.plan;
        let mut rng = child_rng(exp.config.seed, point, shard);
        let phase = shard as usize % exp.schedule_cycle.len();
        let schedule = &exp.schedule_cycle[phase];

        let streams: Vec<Vec<u32>> = plan
            .users()
            .iter()
            .zip(&self.words_per_slot[phase])
            .map(|(u, &n)| {
                let range = 1u32 << u.data_bits();
                (0..n).map(|_| rng.random_range(0..range)).collect()
            })
            .collect();
        let refs: Vec<&[u32]> = streams.iter().map(Vec::as_slice).collect();
        let grid = frame_user_data(plan, schedule, &exp.config.geometry, &refs)?;

        let mut signal = self.engine.modulate(&grid, &exp.constellation)?;
        add_awgn_in_place(signal.samples_mut(), symbol_snr, 1.0, &mut rng)?;
        let cells = self.engine.demodulate_cells(&signal)?;

        let subcarriers = exp.config.geometry.subcarriers;
        let mut tallies = vec![Tally::default(); plan.users().len()];
        for (j, (&sent, cell)) in grid.labels().iter().zip(&cells).enumerate() {
            let (user, word) = plan.owner_of(sent).expect("framed labels are allocated");
            debug_assert_eq!(plan.users()[user].user_id(), grid.owners()[j / subcarriers]);
            let width = plan.users()[user].data_bits();
            let t = &mut tallies[user];
            t.symbols_sent += 1;
            t.data_bits_sent += width as u64;

            let decoded = exp.constellation.detect(*cell);
            if decoded == sent {
                continue;
            }
            t.symbol_errors += 1;
            t.data_bit_errors += match plan.owner_of(decoded) {
                Some((u, w)) if u == user => (w ^ word).count_ones() as u64,
                owner => {
                    t.user_confusions += 1;
                    match (plan.scheme(), owner) {
                        // the data field is still readable at its fixed positions
                        (SchemeKind::AddressBit(layout), Some(_)) => {
                            (layout.data_of(decoded) ^ word).count_ones() as u64
                        }
                        _ => width as u64,
                    }
                }
            };
        }
        Ok(tallies)
    }
}

/// Runs the full chain at every SNR point of the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<BerReport> {
    let exp = config.prepare()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| simulate(&exp))
}

fn simulate(exp: &PreparedExperiment) -> Result<BerReport> {
    let config = &exp.config;
    let geometry = &config.geometry;
    let words_per_slot = exp
        .schedule_cycle
        .iter()
        .map(|s| {
            exp.plan
                .user_ids()
                .iter()
                .map(|&u| s.count(u) * geometry.subcarriers)
                .collect()
        })
        .collect();
    let sim = SlotSimulator {
        exp,
        engine: OfdmEngine::new(*geometry)?,
        words_per_slot,
    };

    let cells = geometry.cells_per_slot() as u64;
    let first_batch = config.stop.min_symbols.div_ceil(cells);
    let batch = first_batch.max(64);
    let uniform_bits = exp.plan.uniform_data_bits();

    let mut points = Vec::with_capacity(exp.snr_points_db.len());
    for (p, &snr_db) in exp.snr_points_db.iter().enumerate() {
        let spec = SnrSpec {
            mode: config.sweep.mode,
            value_db: snr_db,
            data_bits: uniform_bits,
        };
        let symbol_snr = resolve_symbol_snr(&spec)?;

        let mut totals = vec![Tally::default(); exp.plan.users().len()];
        let mut next_slot = 0u64;
        loop {
            let sent: u64 = totals.iter().map(|t| t.symbols_sent).sum();
            let errors: u64 = totals.iter().map(|t| t.symbol_errors).sum();
            let enough = sent >= config.stop.min_symbols
                && (errors >= config.stop.min_errors || sent >= config.stop.max_symbols);
            if enough {
                break;
            }
            let size = if next_slot == 0 {
                first_batch
            } else {
                batch
                    .min((config.stop.max_symbols - sent).div_ceil(cells))
                    .max(1)
            };
            let shards: Vec<Vec<Tally>> = (next_slot..next_slot + size)
                .into_par_iter()
                .map(|t| sim.run(p as u32, t as u32, symbol_snr))
                .collect::<Result<_>>()?;
            for shard in shards {
                for (total, t) in totals.iter_mut().zip(shard) {
                    *total += t;
                }
            }
            next_slot += size;
        }

        let (theory_ser, theory_ber) = if symbol_snr.is_infinite() {
            (0.0, 0.0)
        } else {
            (
                ser_mqam(config.order as u64, symbol_snr)?,
                ber_gray_approx(config.order as u64, symbol_snr)?,
            )
        };
        let users: Vec<UserTally> = exp
            .plan
            .user_ids()
            .into_iter()
            .zip(totals)
            .map(|(user_id, tally)| UserTally { user_id, tally })
            .collect();
        points.push(SnrPointReport::new(
            snr_db,
            config.sweep.mode,
            symbol_snr,
            users,
            theory_ser,
            theory_ber,
        ));
    }

    Ok(BerReport {
        name: config.name.clone(),
        order: config.order,
        points,
    })
}

/// Address layout with the field in the middle of the label, as in the
/// centre-bits example (`B3 B2 A1 A0 B1 B0` for two bits of 64-QAM).
pub fn centred_address_positions(bits_per_symbol: u32, address_bits: u32) -> Vec<u32> {
    let low = (bits_per_symbol - address_bits) / 2;
    (low..low + address_bits).rev().collect()
}

/// Runs the template once per user count, all users sending
/// `log2 M - log2 count` data bits; a count of 1 uses the whole alphabet.
pub fn compare_user_scaling(
    template: &ExperimentConfig,
    user_counts: &[u32],
) -> Result<Vec<BerReport>> {
    let d = crate::constellation::validate_order(template.order as u64)?;
    user_counts
        .iter()
        .map(|&count| {
            if !count.is_power_of_two() || count.trailing_zeros() >= d {
                return Err(Error::Config(format!(
                    "{count} users cannot share {}-QAM evenly",
                    template.order
                )));
            }
            let address_bits = count.trailing_zeros();
            let plan = if address_bits == 0 {
                PlanSpec::Single
            } else {
                PlanSpec::AddressBit {
                    positions: centred_address_positions(d, address_bits),
                }
            };
            let config = ExperimentConfig {
                name: format!("users-{count}"),
                plan,
                schedule: ScheduleSpec::RoundRobin,
                ..template.clone()
            };
            run_experiment(&config)
        })
        .collect()
}
