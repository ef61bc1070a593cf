//! Equilibrium and socially optimal balking in an M/M/1 queue with a
//! constant retrial rate, multiple vacations and an N-policy.
//!
//! The crate covers two information levels. When arrivals observe the
//! server phase and orbit length they follow threshold strategies
//! ([`sojourn`], [`observable`]); otherwise they join with a fixed
//! probability and the chain is a quasi-birth-death process ([`unobservable`]).
//! [`pso`] searches threshold pairs and [`des`] is a discrete-event
//! simulator used to cross-check the analytic results.

#![allow(clippy::needless_range_loop)]

pub mod des;
pub mod distribution;
pub mod error;
pub mod generator;
pub mod model;
pub mod numeric;
pub mod observable;
pub mod pso;
pub mod sojourn;
pub mod unobservable;

pub use distribution::StationaryDistribution;
pub use error::{Error, Result};
pub use generator::{build_generator, Regime, TruncatedGenerator};
pub use model::{ModelParams, PartialParams, ServerPhase, SystemState};
pub use sojourn::{equilibrium_thresholds, sojourn_time, CaseTag, SojournTable, ThresholdStrategy};
