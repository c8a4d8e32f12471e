//! Bin picking for entangled wire harnesses.
//!
//! The crate is organised around the picking loop: a cluttered bin is
//! simulated ([`scene`]), observed as a top-down depth image ([`depth`]),
//! grasp candidates are found by template graspability ([`grasp`]), each
//! (grasp, action) pair is scored by a learned success predictor ([`asp`]),
//! and the cheapest action expected to succeed is chosen ([`inference`]) and
//! turned into a trajectory ([`motion`]). [`active`] trains the predictor from
//! weakly labelled attempts and [`sim`] evaluates whole policies in closed
//! loop. [`pipeline`] glues the stages together behind reproducible files.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise. Results are
//! identical either way.

pub mod active;
pub mod asp;
pub mod depth;
pub mod error;
pub mod grasp;
pub mod inference;
pub mod motion;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod sim;

pub use error::{Error, Result};
