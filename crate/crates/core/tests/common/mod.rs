//! Checks shared by the dedicated test targets and the acceptance suite.
#![allow(dead_code)]

pub mod golden;
pub mod props;
pub mod replay;
