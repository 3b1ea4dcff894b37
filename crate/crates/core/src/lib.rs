//! Leader-follower pair identification for heterogeneous traffic with weak
//! lane discipline.
//!
//! The pipeline runs: trajectory ingestion ([`trajmodel`]), base pairing on
//! proximity rules ([`pairing`]), speed-gap screening and approach/diverge
//! rejection ([`filters`]), wavelet speed correlation ([`wavecorr`]), and an
//! acceleration-response regression harness to measure the effect
//! ([`evalmod`]). [`synthgen`] produces labeled synthetic scenes and [`app`]
//! wires everything to configuration files and on-disk artifacts.

pub mod app;
pub mod evalmod;
pub mod fdgap;
pub mod filters;
pub mod fmt;
pub mod pairing;
pub mod stats;
pub mod synthgen;
pub mod trajmodel;
pub mod wavecorr;
