//! Fake-news detection from a handful of gold labels plus weak social supervision.
//!
//! The crate is organised around the data flow of a run:
//!
//! * [`corpus`] loads and validates the social-news record files and turns them
//!   into the matrix view ([`corpus::InteractionNetworks`]) every learner consumes.
//! * [`weaksup`] derives weak labels from users, publishers and posts and
//!   aggregates them into per-article label distributions.
//! * [`trifn`] is the constrained nonnegative factorization detector over the
//!   publisher / news / user tri-relationship.
//! * [`coattend`] is the sentence/comment co-attention detector whose attention
//!   weights double as explanations.
//! * [`synthgen`] generates seeded corpora with planted structure.
//! * [`harness`] holds metrics, baselines and the experiment drivers behind the CLI.

pub mod coattend;
pub mod config;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod synthgen;
pub mod trifn;
pub mod weaksup;

pub use error::{Error, Result};
