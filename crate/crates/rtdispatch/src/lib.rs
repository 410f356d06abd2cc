//! File formats, a thread pool executor and the command-line front end
//! around `rtdispatch-core`.

pub mod case_io;
pub mod cli;
pub mod error;
pub mod exec;
pub mod export;
pub mod timeseries;

pub use error::Error;
