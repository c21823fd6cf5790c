//! Disruption (CD index) measurement over family-deduplicated patent
//! citation networks observed through two citation sources.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`] ingests patent and citation tables, collapses patents to
//!   families and builds one immutable [`corpus::CitationNetwork`] per source.
//! - [`cd_engine`] counts focal-only, combined and predecessor-only citers in
//!   a forward window and evaluates the CD index.
//! - [`bias`] compares the restricted and extended measurements per focal
//!   family (transition tallies, ΔCD) and aggregates them per country.
//! - [`coverage`] assigns backward-citation coverage rates through each
//!   family's home office and aggregates them to country-year cohorts.
//! - [`regress`] stacks family-country-source observations and fits the
//!   fixed-effects model with two-way clustered errors.
//! - [`synth`] generates two-source corpora with known truncation and tilt
//!   parameters.
//! - [`cli`] wires everything into the `disruptr` command.

pub mod bias;
pub mod cd_engine;
pub mod cli;
pub mod corpus;
pub mod coverage;
pub mod numeric;
pub mod pipeline;
pub mod regress;
pub mod synth;

mod error;

pub use error::{Error, Result};
