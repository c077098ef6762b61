//! Independent oracles shared by the suites here and the acceptance run.
#![allow(dead_code)]

pub mod duality;
pub mod ltlf;
pub mod transcription;
