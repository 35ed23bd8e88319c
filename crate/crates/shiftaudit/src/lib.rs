//! File formats, command line and HTTP service around `shiftaudit-core`.

pub mod cli;
pub mod io;
pub mod server;
