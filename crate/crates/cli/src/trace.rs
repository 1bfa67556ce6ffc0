//! Per-chain trace files: `chain-<c>.csv` with one row per recorded iteration and a
//! `chain-<c>.json` metadata sidecar.
//!
//! The CSV columns are `iteration,log_r,log_sigma,log_phi,accepted,stage1`, where
//! `accepted` is 0/1 and `stage1` is 0/1 for staged runs and empty otherwise. The
//! sidecar is rewritten after every checkpoint and carries `complete: false` until
//! the chain finishes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ehmm_core::samplers::run_chain;
use ehmm_core::{
    ChainState, ChainTrace, Counters, GammaPool, ObservedSeries, ParamVec, Ricker, SamplerConfig,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{io_error, CliError, VERSION};

pub const TRACE_COLUMNS: [&str; 6] = [
    "iteration",
    "log_r",
    "log_sigma",
    "log_phi",
    "accepted",
    "stage1",
];

/// Recorded iterations between checkpoints, before rounding up to whole pools.
const CHECKPOINT_ITERATIONS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub version: String,
    pub config: RunConfig,
    pub chain: usize,
    pub seed: u64,
    pub data: PathBuf,
    pub initial_theta: ParamVec,
    pub iterations: usize,
    pub elapsed_seconds: f64,
    /// Wall-clock seconds per recorded iteration; 0 before any iteration.
    pub time_per_iteration: f64,
    pub counters: Counters,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub theta: ParamVec,
    pub accepted: bool,
    pub stage1: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

impl TraceFile {
    pub fn samples(&self) -> Vec<ParamVec> {
        self.rows.iter().map(|r| r.theta).collect()
    }
}

pub fn csv_path(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("chain-{chain}.csv"))
}

pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn write_meta(path: &Path, meta: &TraceMeta) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(meta).expect("metadata serialises") + "\n";
    crate::data::write(path, &text)
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Recorded iterations per checkpoint: a multiple of whole pool blocks, so that
/// running in checkpoints draws exactly the same chain as one uninterrupted run.
fn checkpoint_len(cfg: &SamplerConfig) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let unit = cfg.updates_per_pool / gcd(cfg.updates_per_pool, cfg.thinning);
    CHECKPOINT_ITERATIONS.div_ceil(unit) * unit
}

/// Runs one chain, writing its trace into `dir` as it goes.
pub fn run_chain_to_files(
    config: &RunConfig,
    chain: usize,
    z: &ObservedSeries,
    data: &Path,
    dir: &Path,
) -> Result<TraceMeta, CliError> {
    let seed = config.chain_seeds()[chain];
    let cfg = config.sampler_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ChainState::initial(&cfg.pool, z, &mut rng);

    let csv = csv_path(dir, chain);
    let meta_file = meta_path(&csv);
    let mut meta = TraceMeta {
        version: VERSION.to_string(),
        config: config.clone(),
        chain,
        seed,
        data: data.to_path_buf(),
        initial_theta: state.theta,
        iterations: 0,
        elapsed_seconds: 0.0,
        time_per_iteration: 0.0,
        counters: Counters::default(),
        complete: false,
    };
    write_meta(&meta_file, &meta)?;
    let mut out = BufWriter::new(File::create(&csv).map_err(|e| io_error(&csv, e))?);
    writeln!(out, "{}", TRACE_COLUMNS.join(",")).map_err(|e| io_error(&csv, e))?;

    let step = checkpoint_len(&cfg);
    while meta.iterations < config.iterations {
        let len = step.min(config.iterations - meta.iterations);
        let start = Instant::now();
        let (trace, next) = run_chain(&Ricker, &GammaPool(cfg.pool), state, z, &cfg, len, &mut rng)
            .map_err(|e| CliError::Runtime(format!("chain {chain}: {e}")))?;
        meta.elapsed_seconds += start.elapsed().as_secs_f64();
        state = next;
        append_rows(&mut out, &trace, meta.iterations).map_err(|e| io_error(&csv, e))?;
        out.flush().map_err(|e| io_error(&csv, e))?;
        meta.iterations += trace.len();
        meta.counters = trace.counters;
        meta.time_per_iteration = meta.elapsed_seconds / meta.iterations as f64;
        write_meta(&meta_file, &meta)?;
    }
    meta.complete = true;
    write_meta(&meta_file, &meta)?;
    Ok(meta)
}

fn write_row(out: &mut impl Write, iteration: usize, row: &TraceRow) -> std::io::Result<()> {
    let t = &row.theta;
    writeln!(
        out,
        "{iteration},{},{},{},{},{}",
        t.log_r,
        t.log_sigma,
        t.log_phi,
        flag(row.accepted),
        row.stage1.map(flag).unwrap_or("")
    )
}

fn append_rows(out: &mut impl Write, trace: &ChainTrace, offset: usize) -> std::io::Result<()> {
    for (k, ((&theta, &accepted), &stage1)) in trace
        .samples
        .iter()
        .zip(&trace.accepted)
        .zip(&trace.stage1)
        .enumerate()
    {
        write_row(
            out,
            offset + k + 1,
            &TraceRow {
                theta,
                accepted,
                stage1,
            },
        )?;
    }
    Ok(())
}

/// Writes a complete trace file and its sidecar, e.g. for traces produced elsewhere.
pub fn write_trace(csv: &Path, file: &TraceFile) -> Result<(), CliError> {
    let mut out = Vec::new();
    writeln!(out, "{}", TRACE_COLUMNS.join(",")).expect("in-memory write");
    for (k, row) in file.rows.iter().enumerate() {
        write_row(&mut out, k + 1, row).expect("in-memory write");
    }
    fs::write(csv, out).map_err(|e| io_error(csv, e))?;
    write_meta(&meta_path(csv), &file.meta)
}

/// Reads a trace from its CSV (or JSON sidecar) path.
pub fn read_trace(path: &Path) -> Result<TraceFile, CliError> {
    let csv = path.with_extension("csv");
    let meta_file = meta_path(&csv);
    let invalid = |p: &Path, msg: String| CliError::Validation(format!("{}: {msg}", p.display()));
    let text = fs::read_to_string(&meta_file).map_err(|e| invalid(&meta_file, e.to_string()))?;
    let meta: TraceMeta =
        serde_json::from_str(&text).map_err(|e| invalid(&meta_file, e.to_string()))?;

    let mut reader = csv::Reader::from_path(&csv).map_err(|e| invalid(&csv, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| invalid(&csv, e.to_string()))?
        .clone();
    if headers.iter().ne(TRACE_COLUMNS) {
        return Err(invalid(&csv, "unexpected trace header".into()));
    }
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| invalid(&csv, e.to_string()))?;
        let field = |i: usize| rec[i].trim();
        let num = |i: usize| -> Result<f64, CliError> {
            field(i)
                .parse()
                .map_err(|e| invalid(&csv, format!("row {}: {}: {e}", k + 1, TRACE_COLUMNS[i])))
        };
        let bit = |i: usize| -> Result<bool, CliError> {
            match field(i) {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(invalid(
                    &csv,
                    format!("row {}: {}: '{other}'", k + 1, TRACE_COLUMNS[i]),
                )),
            }
        };
        if field(0) != (k + 1).to_string() {
            return Err(invalid(
                &csv,
                format!("row {} has iteration {}", k + 1, field(0)),
            ));
        }
        rows.push(TraceRow {
            theta: ParamVec::new(num(1)?, num(2)?, num(3)?),
            accepted: bit(4)?,
            stage1: if field(5).is_empty() {
                None
            } else {
                Some(bit(5)?)
            },
        });
    }
    if meta.complete && rows.len() != meta.iterations {
        return Err(invalid(
            &csv,
            format!(
                "{} rows but metadata records {} iterations",
                rows.len(),
                meta.iterations
            ),
        ));
    }
    Ok(TraceFile { meta, rows })
}
