//! Command-line verbs and the local HTTP API over `decomp-core`.

pub mod bench;
pub mod report;
pub mod server;
pub mod session;
