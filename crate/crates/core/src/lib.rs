//! Coded caching for users who want the same files at different qualities.
//!
//! Files are successively refinable: layer `l` has normalized size
//! `f_l = r_l - r_{l-1}` and user `k` needs layers `1..=k`. The crate designs
//! cache placement and XOR delivery by linear programming, evaluates the
//! closed-form optimum for a total memory budget, computes cut-set lower
//! bounds, runs separation-based baselines, and checks schemes bit by bit.

pub mod baselines;
pub mod bounds;
pub mod cli;
pub mod closed_form;
pub mod error;
pub mod lp;
pub mod model;
pub mod scheme;
pub mod simulator;
pub mod subset;

pub use error::{Error, Result};
