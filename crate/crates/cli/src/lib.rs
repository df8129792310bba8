//! File formats and experiment drivers behind the `nilab` command.

pub mod experiments;
pub mod io;
