//! Controllable listener-behavior prediction for conversational agents.
//!
//! At every word boundary of an incoming transcript the engine decides whether
//! the listening agent should backchannel, claim the turn, or stay silent. Two
//! dials, backchannel intensity (`c_bc`) and turn-claim aggressiveness
//! (`c_tc`), condition the classifier through a FiLM layer.
//!
//! The crate is organised along the data flow:
//!
//! - [`corpus`]: transcript parsing, frame timelines, boundary labels,
//!   dual-perspective windows and a synthetic corpus generator.
//! - [`balance`]: bin-stratified balanced downsampling and 18:1:1 splits.
//! - [`control`]: per-participant control ratios and the quantile map.
//! - [`model`]: reference encoder, FiLM layer, classifier, training.
//! - [`engine`]: streaming sessions with sliding windows and emission policy.
//! - [`eval`]: metrics, per-word traces and dial sweeps.
//! - [`service`]: newline-delimited JSON wire protocol and TCP server.

pub mod balance;
pub mod control;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod eval;
pub mod label;
pub mod model;
pub mod service;

pub use error::{Error, Result};
pub use label::{Label, Subtype};
