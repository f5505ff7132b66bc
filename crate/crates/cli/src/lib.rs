//! Command implementations behind the `diinn` binary.

use std::fmt;

pub mod commands;
pub mod config;
pub mod report;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A check ran to completion and did not pass.
#[derive(Debug)]
pub struct VerificationFailed(pub String);

impl fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

/// Process exit code for a command result.
pub fn exit_code(result: &anyhow::Result<()>) -> i32 {
    match result {
        Ok(()) => EXIT_OK,
        Err(e) if e.downcast_ref::<VerificationFailed>().is_some() => EXIT_VERIFICATION,
        Err(_) => EXIT_USAGE,
    }
}
