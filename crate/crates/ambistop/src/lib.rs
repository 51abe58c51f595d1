//! Monte Carlo verification, JSON problem specs, run reports and the
//! command-line front end on top of `ambistop-core`.

pub mod cli;
pub mod mc;
pub mod report;
pub mod spec;
