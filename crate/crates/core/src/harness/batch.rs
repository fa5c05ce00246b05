//! Independent runs and sweeps, spread over a thread pool when the
//! `parallel` feature is on.

use super::runner::{HarnessError, RunConfig, RunOutcome, Runner};
use crate::plant::level_from_intensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Falls back to sequential without the `parallel` feature.
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

fn map<T: Send, R: Send>(items: Vec<T>, mode: ExecMode, f: impl Fn(T) -> R + Sync + Send) -> Vec<R> {
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
        _ => items.into_iter().map(f).collect(),
    }
}

/// Runs each configuration to completion. Results keep input order, and
/// each run is independent, so the mode never changes the outcome.
pub fn run_batch(jobs: Vec<RunConfig>, mode: ExecMode) -> Vec<Result<RunOutcome, HarnessError>> {
    map(jobs, mode, |cfg| Runner::new(cfg)?.run())
}

/// Level for `n` evenly spaced intensities over `[min, max]`.
pub fn level_sweep(n: usize, min: f64, max: f64, mode: ExecMode) -> Vec<u8> {
    let step = if n > 1 { (max - min) / (n - 1) as f64 } else { 0.0 };
    map((0..n).collect(), mode, |k| {
        let i = if k + 1 == n { max } else { min + k as f64 * step };
        level_from_intensity(i, min, max)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_on_sweep() {
        let a = level_sweep(1001, 0.0, 8000.0, ExecMode::Sequential);
        let b = level_sweep(1001, 0.0, 8000.0, ExecMode::Parallel);
        assert_eq!(a, b);
        assert_eq!((a[0], a[1000]), (0, 8));
    }
}
