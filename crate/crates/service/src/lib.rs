//! HTTP session service and command-line front end for `mvpart`.

pub mod cli;
pub mod http;
pub mod palette;
pub mod session;
