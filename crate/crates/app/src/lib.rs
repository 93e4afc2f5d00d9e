//! Configuration, output writers and subcommands of the `chdbc` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod tables;
pub mod validate;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "CHDBC_NUM_THREADS";

/// Size the global rayon pool from [`THREADS_ENV`], if set.
pub fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
