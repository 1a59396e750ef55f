//! Runs the Monte Carlo oracle grid and collects a versioned report.

use compcov_core::derive_seed;
use compcov_core::oracle::{Check, MomentCheckReport, ShardExecutor};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_MOMENT_TRIALS: usize = 100_000;
pub const DEFAULT_ESTIMATOR_TRIALS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub version: u32,
    pub seed: u64,
    pub passed: bool,
    pub checks_failed: usize,
    pub entries_checked: usize,
    /// Union bound on at least one false failure across the grid.
    pub false_failure_bound: f64,
    pub checks: Vec<MomentCheckReport>,
}

/// Trials for `check`: the override if given, otherwise the defaults.
pub fn trials_for(check: &Check, trials: Option<usize>) -> Result<usize> {
    let t = trials.unwrap_or(match check {
        Check::Estimator { .. } => DEFAULT_ESTIMATOR_TRIALS,
        _ => DEFAULT_MOMENT_TRIALS,
    });
    if t < check.min_trials() {
        return Err(Error::Usage(format!(
            "--trials {t} is below the minimum of {} for this check",
            check.min_trials()
        )));
    }
    Ok(t)
}

/// Check `i` uses master seed `derive_seed(seed, i)`, recorded in its report.
pub fn run_verify<E: ShardExecutor>(
    grid: &[Check],
    trials: Option<usize>,
    seed: u64,
    executor: &E,
) -> Result<VerifyReport> {
    let plan = grid
        .iter()
        .map(|c| trials_for(c, trials))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::with_capacity(grid.len());
    for (i, (check, &t)) in grid.iter().zip(&plan).enumerate() {
        let report = check.run(t, derive_seed(seed, i as u64), executor)?;
        log::info!(
            "{}: {} (worst {:.2} se)",
            report.label,
            if report.passed { "pass" } else { "FAIL" },
            report.worst_sigmas
        );
        checks.push(report);
    }
    let checks_failed = checks.iter().filter(|c| !c.passed).count();
    let entries_checked = checks.iter().map(|c| c.entries_checked).sum();
    Ok(VerifyReport {
        version: 1,
        seed,
        passed: checks_failed == 0,
        checks_failed,
        entries_checked,
        false_failure_bound: checks.iter().map(|c| c.false_failure_bound).sum(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use compcov_core::oracle::{default_grid, Sequential};
    use compcov_core::Distribution;

    #[test]
    fn low_trial_counts_are_rejected() {
        let err = run_verify(&default_grid(), Some(100), 1, &Sequential).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("below the minimum"));
    }

    #[test]
    fn seeds_are_recorded() {
        let grid = [Check::MomentMatrix {
            dist: Distribution::SparseSign { s: 2.0 },
            m: 2,
            p: 3,
            k: 0,
            l: 1,
        }];
        let report = run_verify(&grid, Some(10_000), 5, &Sequential).unwrap();
        assert_eq!(report.version, 1);
        assert_eq!(report.seed, 5);
        assert_eq!(report.checks[0].seed, derive_seed(5, 0));
        assert_eq!(report.checks[0].trials, 10_000);
    }
}
