//! Simulation library for detecting impaired nodes in cooperative networks.
//!
//! The crate covers three experiment families sharing one adapt-then-combine
//! skeleton:
//!
//! * random-graph path-count analytics ([`graph`]),
//! * diffusion LMS over a network with a high-noise estimator ([`lms`]),
//! * multi-agent tabular Q-learning with a broken agent ([`marl`]).
//!
//! [`detect`] holds the generic detection loop and the distance-based
//! combination weights used by both instantiations. [`config`], [`runner`] and
//! [`report`] provide the experiment CLI plumbing.

pub mod config;
pub mod detect;
pub mod graph;
pub mod lms;
pub mod marl;
pub mod report;
pub mod runner;
pub mod seed;
