//! Batch experiment harness over the `fairsub` schedulers.

pub mod config;
pub mod harness;
pub mod output;
