//! Autocorrelation times, posterior summaries and efficiency tables over several
//! runs of the same sampler.
//!
//! Autocovariances are estimated per run around the grand mean of all runs and then
//! averaged across runs; the autocorrelation time is `1 + 2 sum_{k=1}^{K} rho_k`
//! truncated where the autocorrelations have died away.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamVec;

/// Drops the leading `floor(fraction * n)` samples.
pub fn burn_in<T>(trace: &[T], fraction: f64) -> &[T] {
    let skip = (fraction * trace.len() as f64).floor() as usize;
    &trace[skip.min(trace.len())..]
}

fn check_runs(runs: &[&[f64]]) -> usize {
    assert!(!runs.is_empty(), "no runs");
    let n = runs[0].len();
    assert!(
        runs.iter().all(|r| r.len() == n),
        "runs must have equal length"
    );
    n
}

pub fn grand_mean(runs: &[&[f64]]) -> f64 {
    let n: usize = runs.iter().map(|r| r.len()).sum();
    runs.iter().flat_map(|r| r.iter()).sum::<f64>() / n as f64
}

fn autocov_around(runs: &[&[f64]], mean: f64, lag: usize) -> f64 {
    let n = runs[0].len();
    let total: f64 = runs
        .iter()
        .map(|r| {
            r.iter()
                .zip(&r[lag..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / n as f64
        })
        .sum();
    total / runs.len() as f64
}

/// Lag-`lag` autocovariance averaged over runs, each estimated around the grand mean
/// with divisor `n`.
///
/// # Panics
///
/// Panics if the runs differ in length or `lag >= n`.
pub fn pooled_autocovariance(runs: &[&[f64]], lag: usize) -> f64 {
    let n = check_runs(runs);
    assert!(lag < n, "lag {lag} not below trace length {n}");
    autocov_around(runs, grand_mean(runs), lag)
}

/// Where to truncate the autocorrelation sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRule {
    /// Autocorrelations below this count as nearly zero.
    pub threshold: f64,
    /// Number of consecutive nearly-zero lags that end the sum.
    pub consecutive: usize,
    /// The sum never runs past `n * max_lag_fraction`.
    pub max_lag_fraction: f64,
}

impl Default for TruncationRule {
    fn default() -> Self {
        Self {
            threshold: 0.01,
            consecutive: 2,
            max_lag_fraction: 1.0 / 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActEstimate {
    pub tau: f64,
    /// Last lag included in the sum (`K`).
    pub truncation_lag: usize,
    /// Set when the estimate is below 1, i.e. dominated by negative autocorrelation.
    pub antithetic: bool,
}

/// Autocorrelation time of one scalar quantity from several equal-length runs.
///
/// The sum runs over lags `1..=K` where `K + 1` is the first lag starting
/// `rule.consecutive` lags with autocorrelation below `rule.threshold`. A constant
/// input has no defined autocorrelation time and yields `NaN`.
pub fn act(runs: &[&[f64]], rule: &TruncationRule) -> ActEstimate {
    let n = check_runs(runs);
    let mean = grand_mean(runs);
    let gamma0 = autocov_around(runs, mean, 0);
    if gamma0 <= 0.0 || n < 2 {
        return ActEstimate {
            tau: f64::NAN,
            truncation_lag: 0,
            antithetic: false,
        };
    }
    let cap = ((n as f64 * rule.max_lag_fraction).floor() as usize).clamp(1, n - 1);
    let mut rho = Vec::with_capacity(64);
    let mut small_run = 0;
    let mut k_end = cap;
    for lag in 1..=cap {
        let r = autocov_around(runs, mean, lag) / gamma0;
        rho.push(r);
        if r < rule.threshold {
            small_run += 1;
            if small_run >= rule.consecutive {
                k_end = lag - rule.consecutive;
                break;
            }
        } else {
            small_run = 0;
        }
    }
    let tau = 1.0 + 2.0 * rho[..k_end].iter().sum::<f64>();
    ActEstimate {
        tau,
        truncation_lag: k_end,
        antithetic: tau < 1.0,
    }
}

/// Posterior means and their standard errors on the natural scale `(r, sigma, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: [f64; 3],
    pub std_error: [f64; 3],
    pub runs: usize,
}

/// Grand mean of per-run means, with standard error `sd(run means) / sqrt(R)`.
pub fn posterior_summary(runs: &[&[ParamVec]]) -> PosteriorSummary {
    assert!(!runs.is_empty(), "no runs");
    let r = runs.len() as f64;
    let run_means: Vec<[f64; 3]> = runs
        .iter()
        .map(|run| {
            let mut acc = [0.0; 3];
            for p in run.iter() {
                for (a, v) in acc.iter_mut().zip(p.natural()) {
                    *a += v;
                }
            }
            acc.map(|a| a / run.len() as f64)
        })
        .collect();
    let mut mean = [0.0; 3];
    let mut std_error = [0.0; 3];
    for k in 0..3 {
        let m = run_means.iter().map(|v| v[k]).sum::<f64>() / r;
        let var = if runs.len() > 1 {
            run_means.iter().map(|v| (v[k] - m).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        mean[k] = m;
        std_error[k] = (var / r).sqrt();
    }
    PosteriorSummary {
        mean,
        std_error,
        runs: runs.len(),
    }
}

/// Equal-tailed credible interval of one natural-scale parameter from the pooled
/// samples of all runs.
pub fn credible_interval(runs: &[&[ParamVec]], param: usize, level: f64) -> (f64, f64) {
    let mut v: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.iter().map(|p| p.natural()[param]))
        .collect();
    assert!(!v.is_empty(), "no samples");
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    let tail = (1.0 - level) / 2.0;
    (q(tail), q(1.0 - tail))
}

/// One row of an efficiency comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub sampler: String,
    pub pool_size: usize,
    pub scaling: f64,
    /// Acceptance rate(s) as displayed, e.g. `14%` or `25, 29%`.
    pub acceptance: String,
    pub iterations: usize,
    pub time_per_iteration: f64,
    pub act: [f64; 3],
}

impl EfficiencyRow {
    pub fn act_times_time(&self) -> [f64; 3] {
        self.act.map(|a| a * self.time_per_iteration)
    }
}

pub const EFFICIENCY_COLUMNS: [&str; 13] = [
    "sampler",
    "pool_size",
    "scaling",
    "acceptance",
    "iterations",
    "time_per_iteration_s",
    "act_r",
    "act_sigma",
    "act_phi",
    "act_x_time_r",
    "act_x_time_sigma",
    "act_x_time_phi",
    "act_x_time_unit",
];

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyTable {
    pub rows: Vec<EfficiencyRow>,
}

/// Validates rows and builds a table of ACT and ACT x time-per-iteration.
pub fn efficiency_table(rows: Vec<EfficiencyRow>) -> Result<EfficiencyTable> {
    for r in &rows {
        if !(r.time_per_iteration > 0.0 && r.time_per_iteration.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "time per iteration must be positive for {} L={}, got {}",
                r.sampler, r.pool_size, r.time_per_iteration
            )));
        }
    }
    Ok(EfficiencyTable { rows })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl EfficiencyTable {
    /// Machine-readable CSV with the [`EFFICIENCY_COLUMNS`] header. ACT x time is in
    /// seconds.
    pub fn to_csv(&self) -> String {
        let mut out = EFFICIENCY_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let at = r.act_times_time();
            let fields = [
                csv_field(&r.sampler),
                r.pool_size.to_string(),
                r.scaling.to_string(),
                csv_field(&r.acceptance),
                r.iterations.to_string(),
                r.time_per_iteration.to_string(),
                r.act[0].to_string(),
                r.act[1].to_string(),
                r.act[2].to_string(),
                at[0].to_string(),
                at[1].to_string(),
                at[2].to_string(),
                "s".to_string(),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Aligned text table; time per iteration and ACT x time in milliseconds.
    pub fn to_text(&self) -> String {
        let header = [
            "Method",
            "Pool",
            "Scaling",
            "Acc.",
            "Iter",
            "ms/iter",
            "ACT r",
            "ACT sigma",
            "ACT phi",
            "xT r",
            "xT sigma",
            "xT phi",
        ];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            let at = r.act_times_time();
            let mut row = vec![
                r.sampler.clone(),
                r.pool_size.to_string(),
                format!("{}", r.scaling),
                r.acceptance.clone(),
                r.iterations.to_string(),
                format!("{:.4}", r.time_per_iteration * 1e3),
            ];
            row.extend(r.act.iter().map(|a| format!("{a:.1}")));
            row.extend(at.iter().map(|a| format!("{:.2}", a * 1e3)));
            cells.push(row);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in cells.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| {
                    if c == 0 {
                        format!("{s:<w$}")
                    } else {
                        format!("{s:>w$}")
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        out
    }
}
