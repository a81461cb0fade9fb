//! Constellation-shared multiple access (CSMA) link simulator.
//!
//! Several users share one OFDM resource block by splitting a square QAM
//! alphabet among themselves: each user owns a disjoint subset of constellation
//! labels and is told apart at the receiver by where its points fall after an
//! ordinary hard-decision QAM demodulator.
//!
//! The crate covers the whole downlink chain (payload, constellation
//! partitioning, resource-block framing, CP-OFDM, AWGN, detection, demapping),
//! the closed-form capacity, throughput and symbol-error expressions, and a
//! seeded, worker-count independent Monte Carlo harness.

pub mod analytics;
pub mod channel;
pub mod config;
pub mod constellation;
pub mod error;
pub mod framing;
pub mod harness;
pub mod mapping;
pub mod ofdm;
pub mod report;

pub use constellation::{Constellation, Label, MinDistanceReport};
pub use error::{Error, Result};
pub use framing::{LabelGrid, RbGeometry, SlotSchedule};
pub use harness::{compare_user_scaling, run_experiment, ExperimentConfig, Tally};
pub use mapping::{AddressBitLayout, AllocationPlan, Demapped, UserId};
pub use report::BerReport;
