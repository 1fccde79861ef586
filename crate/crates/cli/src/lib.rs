//! Standard-library companion to `kcoddp-core`: configuration, dataset and
//! archive file formats, the W126 ozone metric, cross-validation, posterior
//! predictive summaries, the correlation sweep, and the `kcoddp` CLI.

pub mod archive_io;
pub mod commands;
pub mod config;
pub mod corr_sweep;
pub mod dataset;
pub mod fitting;
pub mod loo;
pub mod predictive;
pub mod w126;
