//! Simulated data files: `observations.csv` (`time,count`, count empty where
//! unobserved), `latent.csv` (`time,log_population`) and an `observations.json`
//! sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use ehmm_core::{LatentSequence, ObservedSeries, Ricker};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{io_error, CliError, VERSION};

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const LATENT_FILE: &str = "latent.csv";
pub const DATA_META_FILE: &str = "observations.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMeta {
    pub version: String,
    pub seed: u64,
    /// `(r, sigma, phi)`.
    pub theta_true: [f64; 3],
    pub n: usize,
    pub obs_start: usize,
}

pub struct SimulatedPaths {
    pub observations: PathBuf,
    pub latent: PathBuf,
    pub meta: PathBuf,
}

pub fn simulate(config: &RunConfig) -> Result<(LatentSequence, ObservedSeries), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ricker::simulate(&config.theta_true(), config.n, config.obs_start, &mut rng)
        .map_err(|e| CliError::Validation(e.to_string()))
}

pub fn observations_csv(z: &ObservedSeries) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "count"]).expect("in-memory write");
    for (i, y) in z.y.iter().enumerate() {
        let count = y.map(|c| c.to_string()).unwrap_or_default();
        w.write_record([(i + 1).to_string(), count])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii")
}

pub fn latent_csv(x: &LatentSequence) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "log_population"])
        .expect("in-memory write");
    for (i, m) in x.m.iter().enumerate() {
        w.write_record([(i + 1).to_string(), m.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii")
}

/// Simulates from `config` and writes the three data files into `dir`.
pub fn write_simulation(config: &RunConfig, dir: &Path) -> Result<SimulatedPaths, CliError> {
    let (x, z) = simulate(config)?;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let paths = SimulatedPaths {
        observations: dir.join(OBSERVATIONS_FILE),
        latent: dir.join(LATENT_FILE),
        meta: dir.join(DATA_META_FILE),
    };
    let meta = DataMeta {
        version: VERSION.to_string(),
        seed: config.seed,
        theta_true: config.theta_true,
        n: config.n,
        obs_start: config.obs_start,
    };
    write(&paths.observations, &observations_csv(&z))?;
    write(&paths.latent, &latent_csv(&x))?;
    write(
        &paths.meta,
        &(serde_json::to_string_pretty(&meta).expect("serialises") + "\n"),
    )?;
    Ok(paths)
}

pub(crate) fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Reads an observations file written by [`write_simulation`] (or by hand).
pub fn read_observations(path: &Path) -> Result<ObservedSeries, CliError> {
    let invalid = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| invalid(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| invalid(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["time", "count"] {
        return Err(invalid(format!(
            "expected header time,count, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut y = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| invalid(e.to_string()))?;
        let time: usize = rec[0]
            .trim()
            .parse()
            .map_err(|e| invalid(format!("row {}: time: {e}", row + 1)))?;
        if time != row + 1 {
            return Err(invalid(format!(
                "row {} has time {time}; times must be 1, 2, ...",
                row + 1
            )));
        }
        let count = rec[1].trim();
        y.push(if count.is_empty() {
            None
        } else {
            Some(
                count
                    .parse()
                    .map_err(|e| invalid(format!("row {}: count: {e}", row + 1)))?,
            )
        });
    }
    if y.is_empty() {
        return Err(invalid("no observations".into()));
    }
    Ok(ObservedSeries::new(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_observes_second_half() {
        let c = RunConfig::defaults(ehmm_core::SamplerKind::Ensemble);
        let (x, z) = simulate(&c).unwrap();
        assert_eq!(x.len(), 100);
        assert!(z.y[..50].iter().all(Option::is_none));
        assert!(z.y[50..].iter().all(Option::is_some));
    }

    #[test]
    fn observations_round_trip() {
        let z = ObservedSeries::new(vec![None, None, Some(0), Some(17)]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("obs.csv");
        fs::write(&p, observations_csv(&z)).unwrap();
        assert_eq!(read_observations(&p).unwrap(), z);
        assert!(observations_csv(&z).starts_with("time,count\n1,\n2,\n3,0\n4,17\n"));
    }

    #[test]
    fn malformed_observations_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("obs.csv");
        for text in [
            "time,count\n",
            "t,c\n1,2\n",
            "time,count\n2,1\n",
            "time,count\n1,x\n",
        ] {
            fs::write(&p, text).unwrap();
            assert!(
                matches!(read_observations(&p), Err(CliError::Validation(_))),
                "{text:?}"
            );
        }
    }
}
