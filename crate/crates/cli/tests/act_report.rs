use std::fs;
use std::path::{Path, PathBuf};

use ehmm_cli::config::RunConfig;
use ehmm_cli::report::{cmd_act, cmd_report, LONG_COLUMNS, POSTERIOR_COLUMNS};
use ehmm_cli::trace::{csv_path, write_trace, TraceFile, TraceMeta, TraceRow};
use ehmm_cli::{CliError, VERSION};
use ehmm_core::diagnostics::{burn_in, posterior_summary, EFFICIENCY_COLUMNS};
use ehmm_core::{Counters, ParamVec, SamplerKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn config(kind: SamplerKind, pool_size: usize, scaling: f64) -> RunConfig {
    let mut c = RunConfig::defaults(kind);
    c.pool_size = pool_size;
    c.scaling = scaling;
    c
}

/// Parameters with independent Gaussian noise around `centre` on log scale.
fn noise(n: usize, seed: u64, centre: [f64; 3], sd: f64) -> Vec<ParamVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let e: [f64; 3] = [(); 3].map(|_| StandardNormal.sample(&mut rng));
            ParamVec::new(
                centre[0] + sd * e[0],
                centre[1] + sd * e[1],
                centre[2] + sd * e[2],
            )
        })
        .collect()
}

/// AR(1) on every log-scale component.
fn ar1(n: usize, seed: u64, a: f64) -> Vec<ParamVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = [3.8, -1.9, 0.7];
    (0..n)
        .map(|_| {
            for (k, c) in [3.8, -1.9, 0.7].iter().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                x[k] = c + a * (x[k] - c) + 0.05 * e;
            }
            ParamVec::new(x[0], x[1], x[2])
        })
        .collect()
}

fn write_chain(
    dir: &Path,
    chain: usize,
    config: &RunConfig,
    samples: Vec<ParamVec>,
    time: f64,
    complete: bool,
) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let staged = config.sampler == SamplerKind::Staged;
    let n = samples.len();
    let rows: Vec<TraceRow> = samples
        .into_iter()
        .enumerate()
        .map(|(i, theta)| TraceRow {
            theta,
            accepted: i % 7 == 0,
            stage1: staged.then_some(i % 4 == 0),
        })
        .collect();
    let counters = Counters {
        param_proposals: n as u64,
        param_accepts: (n as u64).div_ceil(7),
        stage1_proposals: if staged { n as u64 } else { 0 },
        stage1_accepts: if staged { (n as u64).div_ceil(4) } else { 0 },
        stage2_proposals: if staged { (n as u64).div_ceil(4) } else { 0 },
        stage2_accepts: if staged { (n as u64).div_ceil(7) } else { 0 },
        full_passes: 1.2 * n as f64,
        ..Default::default()
    };
    let meta = TraceMeta {
        version: VERSION.to_string(),
        config: config.clone(),
        chain,
        seed: config.chain_seeds()[chain],
        data: PathBuf::from("observations.csv"),
        initial_theta: rows
            .first()
            .map(|r| r.theta)
            .unwrap_or(ParamVec::new(5.0, -1.15, 3.9)),
        iterations: n,
        elapsed_seconds: time * n as f64,
        time_per_iteration: time,
        counters,
        complete,
    };
    let path = csv_path(dir, chain);
    write_trace(&path, &TraceFile { meta, rows }).unwrap();
    path
}

fn write_run(root: &Path, config: &RunConfig, n: usize, time: f64) -> Vec<PathBuf> {
    let dir = root.join("runs").join(config.run_name());
    (0..config.chains)
        .map(|c| {
            write_chain(
                &dir,
                c,
                config,
                ar1(n, 100 * c as u64 + config.pool_size as u64, 0.8),
                time,
                true,
            )
        })
        .collect()
}

#[test]
fn act_csv_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(SamplerKind::Ensemble, 120, 1.4);
    let paths: Vec<PathBuf> = (0..3)
        .map(|k| write_chain(dir.path(), k, &c, ar1(500, k as u64, 0.6), 0.004, true))
        .collect();
    let out = cmd_act(&paths, dir.path()).unwrap();
    let got = fs::read_to_string(&out.act_csv).unwrap();
    let want = include_str!("golden/act.csv");
    assert_eq!(got, want);
    assert_eq!(got.lines().next().unwrap(), EFFICIENCY_COLUMNS.join(","));
    let posterior = fs::read_to_string(&out.posterior_csv).unwrap();
    assert_eq!(
        posterior.lines().next().unwrap(),
        POSTERIOR_COLUMNS.join(",")
    );
}

#[test]
fn identical_white_noise_traces_have_unit_act() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(SamplerKind::SingleSeq, 40, 0.25);
    let samples = noise(20_000, 9, [3.8, -1.9, 0.7], 0.1);
    let paths: Vec<PathBuf> = (0..5)
        .map(|k| write_chain(dir.path(), k, &c, samples.clone(), 0.001, true))
        .collect();
    let a = cmd_act(&paths, dir.path()).unwrap().analysis;
    for k in 0..3 {
        assert!(
            (a.act_log[k].tau - 1.0).abs() < 0.1,
            "{k}: {:?}",
            a.act_log[k]
        );
        assert!(
            (a.act_natural[k].tau - 1.0).abs() < 0.1,
            "{k}: {:?}",
            a.act_natural[k]
        );
    }
}

#[test]
fn posterior_block_delegates_to_summary() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(SamplerKind::Staged, 120, 1.8);
    let runs: Vec<Vec<ParamVec>> = (0..4).map(|k| ar1(1_000, 50 + k, 0.7)).collect();
    let paths: Vec<PathBuf> = runs
        .iter()
        .enumerate()
        .map(|(k, r)| write_chain(dir.path(), k, &c, r.clone(), 0.002, true))
        .collect();
    let out = cmd_act(&paths, dir.path()).unwrap();
    let kept: Vec<&[ParamVec]> = runs.iter().map(|r| burn_in(r, c.burn_in)).collect();
    let want = posterior_summary(&kept);
    assert_eq!(out.analysis.posterior, want);

    let text = fs::read_to_string(&out.posterior_csv).unwrap();
    for (k, line) in text.lines().skip(1).enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1].parse::<f64>().unwrap(), want.mean[k]);
        assert_eq!(f[2].parse::<f64>().unwrap(), want.std_error[k]);
    }
    assert_eq!(out.analysis.row.acceptance, "25, 57%");
}

#[test]
fn mismatched_lengths_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(SamplerKind::Ensemble, 120, 1.4);
    let a = write_chain(dir.path(), 0, &c, ar1(300, 1, 0.5), 0.001, true);
    let b = write_chain(dir.path(), 1, &c, ar1(301, 2, 0.5), 0.001, true);
    assert!(matches!(
        cmd_act(&[a.clone(), b], dir.path()),
        Err(CliError::Validation(_))
    ));
    assert!(matches!(
        cmd_act(&[a], dir.path()),
        Err(CliError::Validation(_))
    ));
}

#[test]
fn single_run_gives_single_row() {
    let dir = tempfile::tempdir().unwrap();
    write_run(
        dir.path(),
        &config(SamplerKind::Ensemble, 120, 1.4),
        700,
        0.004,
    );
    let out = cmd_report(dir.path()).unwrap();
    assert_eq!(out.report.rows.len(), 1);
    assert!(out.report.gaps.is_empty());
    let csv = fs::read_to_string(&out.csv).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("ensemble,120,1.4,14%,700,0.004,"));
    let long = fs::read_to_string(&out.long_csv).unwrap();
    assert_eq!(long.lines().next().unwrap(), LONG_COLUMNS.join(","));
    assert_eq!(long.lines().count(), 1 + 6);
}

#[test]
fn rows_sort_by_sampler_then_pool_size() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, l, s) in [
        (SamplerKind::Staged, 120, 1.8),
        (SamplerKind::Ensemble, 120, 1.4),
        (SamplerKind::SingleSeq, 40, 0.25),
        (SamplerKind::Ensemble, 40, 0.6),
        (SamplerKind::SingleSeq, 10, 0.1),
    ] {
        write_run(dir.path(), &config(kind, l, s), 300, 0.001 * l as f64);
    }
    // an interrupted run shows up as a gap
    let broken = config(SamplerKind::Ensemble, 80, 1.0);
    let bdir = dir.path().join("runs").join(broken.run_name());
    write_chain(&bdir, 0, &broken, ar1(100, 3, 0.5), 0.01, true);
    write_chain(&bdir, 1, &broken, ar1(50, 4, 0.5), 0.01, false);
    fs::create_dir_all(dir.path().join("runs/empty")).unwrap();

    let out = cmd_report(dir.path()).unwrap();
    let order: Vec<(String, usize)> = out
        .report
        .rows
        .iter()
        .map(|a| (a.row.sampler.clone(), a.row.pool_size))
        .collect();
    let want = [
        ("single-seq", 10),
        ("single-seq", 40),
        ("ensemble", 40),
        ("ensemble", 120),
        ("staged", 120),
    ];
    assert_eq!(order, want.map(|(s, l)| (s.to_string(), l)));
    let gaps: Vec<&str> = out.report.gaps.iter().map(|g| g.run.as_str()).collect();
    assert_eq!(gaps, ["empty", "ensemble-L80-s1"]);
    assert!(fs::read_to_string(&out.text).unwrap().contains("Gaps:"));
}

#[test]
fn act_times_time_matches_printed_columns() {
    let dir = tempfile::tempdir().unwrap();
    write_run(
        dir.path(),
        &config(SamplerKind::Ensemble, 120, 1.4),
        2_000,
        0.0037,
    );
    write_run(
        dir.path(),
        &config(SamplerKind::SingleSeq, 40, 0.25),
        2_000,
        0.0011,
    );
    let out = cmd_report(dir.path()).unwrap();

    let csv = fs::read_to_string(&out.csv).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line
            .split(',')
            .skip(5)
            .take(7)
            .map(|v| v.parse().unwrap())
            .collect();
        for k in 0..3 {
            assert!(
                (f[1 + k] * f[0] - f[4 + k]).abs() <= 1e-12 * f[4 + k].abs(),
                "{line}"
            );
        }
    }

    // the text table (header, rule, rows) prints ACT x time in ms with two decimals
    let text = fs::read_to_string(&out.text).unwrap();
    for (line, a) in text.lines().skip(2).zip(&out.report.rows) {
        let cells: Vec<&str> = line.split_whitespace().collect();
        let printed: Vec<f64> = cells[cells.len() - 3..]
            .iter()
            .map(|v| v.parse().unwrap())
            .collect();
        for (p, act) in printed.iter().zip(a.row.act) {
            let exact = act * a.row.time_per_iteration * 1e3;
            assert!((p - exact).abs() <= 0.5 * 0.01 + 1e-12, "{line}: {exact}");
        }
    }
}
