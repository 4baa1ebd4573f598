//! Evasion attacks on fixed policies in finite MDPs.
//!
//! The crate covers exact policy evaluation and control, admissible
//! perturbation sets, the four heuristic attacks, exact optimal adversaries
//! (via the policy perturbation MDP, the director/actor construction and brute
//! force), tabular Q-learning attackers, and a harness that checks the
//! structural claims about them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod error;
pub mod heuristic;
pub mod mdp;
pub mod optimal;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
