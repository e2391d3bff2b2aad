//! Pairwise-comparison matrices with coefficients in a group.
pub mod cli;
pub mod distance;
pub mod format;
pub mod group;
pub mod holonomy;
pub mod inconsistency;
pub mod matrix;
pub mod service;
pub mod session;
