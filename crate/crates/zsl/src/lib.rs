//! File formats, the synthetic benchmark, run reports and the `zsl` command
//! line on top of `zsl-core`.

pub mod cli;
pub mod data;
pub mod report;
