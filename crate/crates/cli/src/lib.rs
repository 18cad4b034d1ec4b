//! Command-line front end for `ehrenfest-core`: scenario files, run
//! directories and the subcommands behind the `ehrenfest` binary.

pub mod commands;
pub mod config;
pub mod output;

use ehrenfest_core::Error as CoreError;

/// Exit code for an error: 1 for usage and configuration problems, 2 for
/// numerical failures.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<config::ConfigError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::Config(_) | CoreError::Usage(_) | CoreError::Domain(_) => 1,
                _ => 2,
            };
        }
    }
    1
}
