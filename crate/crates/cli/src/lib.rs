//! Batch entry points shared by the `goalscope` binary and its tests.

pub mod replay;
pub mod report;
pub mod task;
pub mod transcript;
