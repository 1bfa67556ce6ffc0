//! ACT and posterior summaries of a set of chains, and the combined comparison table
//! over a directory of runs.
//!
//! `act` writes `act.csv` (columns [`ehmm_core::diagnostics::EFFICIENCY_COLUMNS`]), `act.txt` and
//! `posterior.csv` (columns [`POSTERIOR_COLUMNS`]). `report` writes `report.csv`,
//! `report.txt` and the long-format `report_long.csv` (columns [`LONG_COLUMNS`]).

use std::fs;
use std::path::{Path, PathBuf};

use ehmm_core::diagnostics::{
    act, burn_in, credible_interval, efficiency_table, posterior_summary, ActEstimate,
    EfficiencyRow, EfficiencyTable, PosteriorSummary, TruncationRule,
};
use ehmm_core::{Counters, ParamVec, SamplerKind};

use crate::trace::{read_trace, TraceFile};
use crate::{io_error, CliError};

pub const POSTERIOR_COLUMNS: [&str; 7] = [
    "parameter",
    "mean",
    "std_error",
    "ci_low",
    "ci_high",
    "act_log",
    "act_natural",
];
pub const LONG_COLUMNS: [&str; 7] = [
    "sampler",
    "pool_size",
    "scaling",
    "parameter",
    "scale",
    "act",
    "act_x_time_s",
];
pub const PARAMETERS: [&str; 3] = ["r", "sigma", "phi"];
pub const CI_LEVEL: f64 = 0.95;

/// Everything derived from one set of chains of a single setting.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub kind: SamplerKind,
    pub row: EfficiencyRow,
    /// Per parameter, on log scale (as in `row.act`) and on natural scale.
    pub act_log: [ActEstimate; 3],
    pub act_natural: [ActEstimate; 3],
    pub posterior: PosteriorSummary,
    pub intervals: [(f64, f64); 3],
    pub counters: Counters,
}

/// Acceptance as displayed: `14%`, or `stage 1, stage 2%` for the staged sampler.
pub fn acceptance_label(kind: SamplerKind, c: &Counters) -> String {
    let pct = |x: f64| {
        if x.is_nan() {
            "-".to_string()
        } else {
            format!("{:.0}", 100.0 * x)
        }
    };
    match kind {
        SamplerKind::Staged => format!(
            "{}, {}%",
            pct(c.stage1_acceptance()),
            pct(c.stage2_acceptance())
        ),
        _ => format!("{}%", pct(c.param_acceptance())),
    }
}

pub fn sum_counters<'a>(all: impl IntoIterator<Item = &'a Counters>) -> Counters {
    let mut t = Counters::default();
    for c in all {
        t.full_passes += c.full_passes;
        t.pool_builds += c.pool_builds;
        t.seq_updates += c.seq_updates;
        t.param_proposals += c.param_proposals;
        t.param_accepts += c.param_accepts;
        t.off_support += c.off_support;
        t.stage1_proposals += c.stage1_proposals;
        t.stage1_accepts += c.stage1_accepts;
        t.stage2_proposals += c.stage2_proposals;
        t.stage2_accepts += c.stage2_accepts;
        t.site_proposals += c.site_proposals;
        t.site_accepts += c.site_accepts;
    }
    t
}

/// Analyses at least two complete chains of one setting, after burn-in.
pub fn analyse(traces: &[TraceFile]) -> Result<Analysis, CliError> {
    let invalid = |m: String| Err(CliError::Validation(m));
    if traces.len() < 2 {
        return invalid(format!("need at least 2 traces, got {}", traces.len()));
    }
    let first = &traces[0].meta;
    for t in traces {
        let m = &t.meta;
        if !m.complete {
            return invalid(format!("chain {} is incomplete", m.chain));
        }
        if t.rows.len() != traces[0].rows.len() {
            return invalid(format!(
                "trace lengths differ: {} and {}",
                traces[0].rows.len(),
                t.rows.len()
            ));
        }
        let c = &m.config;
        if (c.sampler, c.pool_size, c.scaling)
            != (
                first.config.sampler,
                first.config.pool_size,
                first.config.scaling,
            )
        {
            return invalid("traces come from different sampler settings".into());
        }
    }
    let kept: Vec<Vec<ParamVec>> = traces
        .iter()
        .map(|t| burn_in(&t.samples(), first.config.burn_in).to_vec())
        .collect();
    if kept[0].len() < 2 {
        return invalid(format!(
            "only {} samples per trace after burn-in",
            kept[0].len()
        ));
    }
    let runs: Vec<&[ParamVec]> = kept.iter().map(Vec::as_slice).collect();
    let rule = TruncationRule::default();
    let series = |f: &dyn Fn(&ParamVec) -> [f64; 3], k: usize| -> ActEstimate {
        let v: Vec<Vec<f64>> = kept
            .iter()
            .map(|r| r.iter().map(|p| f(p)[k]).collect())
            .collect();
        let refs: Vec<&[f64]> = v.iter().map(Vec::as_slice).collect();
        act(&refs, &rule)
    };
    let act_log = [0, 1, 2].map(|k| series(&|p| p.to_array(), k));
    let act_natural = [0, 1, 2].map(|k| series(&|p| p.natural(), k));
    let counters = sum_counters(traces.iter().map(|t| &t.meta.counters));
    let time = traces
        .iter()
        .map(|t| t.meta.time_per_iteration)
        .sum::<f64>()
        / traces.len() as f64;
    let row = EfficiencyRow {
        sampler: first.config.sampler.name().to_string(),
        pool_size: first.config.pool_size,
        scaling: first.config.scaling,
        acceptance: acceptance_label(first.config.sampler, &counters),
        iterations: traces[0].rows.len(),
        time_per_iteration: time,
        act: act_log.map(|a| a.tau),
    };
    Ok(Analysis {
        kind: first.config.sampler,
        row,
        act_log,
        act_natural,
        posterior: posterior_summary(&runs),
        intervals: [0, 1, 2].map(|k| credible_interval(&runs, k, CI_LEVEL)),
        counters,
    })
}

fn table(rows: Vec<EfficiencyRow>) -> Result<EfficiencyTable, CliError> {
    efficiency_table(rows).map_err(|e| CliError::Validation(e.to_string()))
}

pub fn posterior_csv(a: &Analysis) -> String {
    let mut out = POSTERIOR_COLUMNS.join(",") + "\n";
    for (k, name) in PARAMETERS.iter().enumerate() {
        out += &format!(
            "{name},{},{},{},{},{},{}\n",
            a.posterior.mean[k],
            a.posterior.std_error[k],
            a.intervals[k].0,
            a.intervals[k].1,
            a.act_log[k].tau,
            a.act_natural[k].tau
        );
    }
    out
}

fn act_text(a: &Analysis, t: &EfficiencyTable) -> String {
    let mut out = t.to_text();
    out += &format!(
        "\nPosterior over {} runs ({:.0}% intervals):\n",
        a.posterior.runs,
        100.0 * CI_LEVEL
    );
    for (k, name) in PARAMETERS.iter().enumerate() {
        let flag = |e: &ActEstimate| if e.antithetic { " (antithetic)" } else { "" };
        out += &format!(
            "  {name:<6} mean {:.5} se {:.5}  [{:.5}, {:.5}]  ACT log {:.1}{} natural {:.1}{}\n",
            a.posterior.mean[k],
            a.posterior.std_error[k],
            a.intervals[k].0,
            a.intervals[k].1,
            a.act_log[k].tau,
            flag(&a.act_log[k]),
            a.act_natural[k].tau,
            flag(&a.act_natural[k]),
        );
    }
    out
}

pub struct ActOutputs {
    pub act_csv: PathBuf,
    pub act_txt: PathBuf,
    pub posterior_csv: PathBuf,
    pub analysis: Analysis,
}

/// Reads the given traces and writes the ACT and posterior reports into `out`.
pub fn cmd_act(paths: &[PathBuf], out: &Path) -> Result<ActOutputs, CliError> {
    let traces = paths
        .iter()
        .map(|p| read_trace(p))
        .collect::<Result<Vec<_>, _>>()?;
    let analysis = analyse(&traces)?;
    let t = table(vec![analysis.row.clone()])?;
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let outputs = ActOutputs {
        act_csv: out.join("act.csv"),
        act_txt: out.join("act.txt"),
        posterior_csv: out.join("posterior.csv"),
        analysis,
    };
    crate::data::write(&outputs.act_csv, &t.to_csv())?;
    crate::data::write(&outputs.act_txt, &act_text(&outputs.analysis, &t))?;
    crate::data::write(&outputs.posterior_csv, &posterior_csv(&outputs.analysis))?;
    Ok(outputs)
}

/// Chain trace files of a run directory, in chain order.
pub fn chain_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        let chain = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("chain-"))
            .and_then(|n| n.strip_suffix(".json"))
            .and_then(|n| n.parse().ok());
        if let Some(c) = chain {
            found.push((c, path.with_extension("csv")));
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// A run directory that could not contribute a row.
#[derive(Debug, Clone, PartialEq)]
pub struct Gap {
    pub run: String,
    pub reason: String,
}

pub struct Report {
    pub rows: Vec<Analysis>,
    pub gaps: Vec<Gap>,
}

/// Analyses every run directory under `dir/runs` (or `dir` itself when it has no
/// `runs` subdirectory). Incomplete or unreadable runs become gaps.
pub fn collect_report(dir: &Path) -> Result<Report, CliError> {
    let runs_dir = if dir.join("runs").is_dir() {
        dir.join("runs")
    } else {
        dir.to_path_buf()
    };
    let mut subdirs: Vec<PathBuf> = fs::read_dir(&runs_dir)
        .map_err(|e| io_error(&runs_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut report = Report {
        rows: Vec::new(),
        gaps: Vec::new(),
    };
    for sub in subdirs {
        let run = sub
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let result = chain_files(&sub).and_then(|files| {
            if files.is_empty() {
                return Err(CliError::Validation("no chain traces".into()));
            }
            let traces = files
                .iter()
                .map(|p| read_trace(p))
                .collect::<Result<Vec<_>, _>>()?;
            analyse(&traces)
        });
        match result {
            Ok(a) if a.row.time_per_iteration > 0.0 => report.rows.push(a),
            Ok(_) => report.gaps.push(Gap {
                run,
                reason: "no recorded iterations".into(),
            }),
            Err(e) => report.gaps.push(Gap {
                run,
                reason: e.to_string(),
            }),
        }
    }
    report.rows.sort_by(|a, b| {
        (a.kind, a.row.pool_size)
            .cmp(&(b.kind, b.row.pool_size))
            .then(a.row.scaling.total_cmp(&b.row.scaling))
    });
    Ok(report)
}

pub fn long_csv(rows: &[Analysis]) -> String {
    let mut out = LONG_COLUMNS.join(",") + "\n";
    for a in rows {
        for (scale, acts) in [("log", &a.act_log), ("natural", &a.act_natural)] {
            for (k, name) in PARAMETERS.iter().enumerate() {
                out += &format!(
                    "{},{},{},{name},{scale},{},{}\n",
                    a.row.sampler,
                    a.row.pool_size,
                    a.row.scaling,
                    acts[k].tau,
                    acts[k].tau * a.row.time_per_iteration
                );
            }
        }
    }
    out
}

pub struct ReportOutputs {
    pub csv: PathBuf,
    pub text: PathBuf,
    pub long_csv: PathBuf,
    pub report: Report,
}

/// Writes the combined comparison over the runs of an experiment directory.
pub fn cmd_report(dir: &Path) -> Result<ReportOutputs, CliError> {
    let report = collect_report(dir)?;
    let t = table(report.rows.iter().map(|a| a.row.clone()).collect())?;
    let mut text = t.to_text();
    if !report.gaps.is_empty() {
        text += "\nGaps:\n";
        for g in &report.gaps {
            text += &format!("  {}: {}\n", g.run, g.reason);
        }
    }
    let out = ReportOutputs {
        csv: dir.join("report.csv"),
        text: dir.join("report.txt"),
        long_csv: dir.join("report_long.csv"),
        report,
    };
    crate::data::write(&out.csv, &t.to_csv())?;
    crate::data::write(&out.text, &text)?;
    crate::data::write(&out.long_csv, &long_csv(&out.report.rows))?;
    Ok(out)
}
