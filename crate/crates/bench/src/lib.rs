//! Baseline controllers, the episode runner and the ID-vs-OOD benchmark.

pub mod benchmark;
pub mod cli;
pub mod policy;
pub mod runner;
