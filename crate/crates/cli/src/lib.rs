//! Command-line front end for `bec-design`.
//!
//! Exit codes: 0 when the requested computation succeeded (an `Optimal`
//! design, a passing verification), 1 on solver or verification failure, 2 on
//! usage errors.

pub mod commands;
pub mod config;
pub mod polyspec;
pub mod presets;
pub mod report;
pub mod table;

use std::fmt;

pub use commands::run;
pub use config::RunConfig;
pub use polyspec::parse_poly_spec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A configuration problem the user can fix; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        EXIT_USAGE
    } else {
        EXIT_FAILURE
    }
}
