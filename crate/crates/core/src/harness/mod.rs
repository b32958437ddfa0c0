//! Sweeps, fits, experiments, file output and the acceptance suite.

pub mod acceptance;
pub mod experiment;
pub mod fit;
pub mod io;
pub mod oracle;
pub mod sweep;
