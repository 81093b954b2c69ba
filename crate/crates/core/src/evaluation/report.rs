//! Result files: `summary.csv`, `per_time.csv` and `manifest.json`.
//!
//! Both CSV files open with a `# config_hash=<hex>` comment line, and the
//! manifest records the same hash, so outputs from different configs cannot
//! be mixed up silently.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::harness::{ExperimentResult, FitRecord};
use super::metrics::Summary;
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, LabelTable};
use crate::rng::RNG_ALGORITHM;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const PER_TIME_FILE: &str = "per_time.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of `text`, hex encoded.
pub fn content_hash(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

/// SHA-256 over the snapshots (dimensions, CSC arrays, value bits) and the
/// label table.
pub fn dataset_fingerprint(graph: &DynamicGraph, labels: &LabelTable) -> String {
    let mut h = Sha256::new();
    let word = |h: &mut Sha256, v: u64| h.update(v.to_le_bytes());
    word(&mut h, graph.n() as u64);
    word(&mut h, graph.num_times() as u64);
    word(&mut h, u64::from(graph.is_directed()) | u64::from(graph.is_weighted()) << 1);
    for s in graph.snapshots() {
        for &p in s.indptr() {
            word(&mut h, p as u64);
        }
        for &i in s.indices() {
            word(&mut h, i as u64);
        }
        for &v in s.values() {
            word(&mut h, v.to_bits());
        }
    }
    for name in labels.class_names() {
        h.update(name.as_bytes());
        h.update([0]);
    }
    for (pair, y) in labels.labeled_pairs() {
        word(&mut h, pair.node as u64);
        word(&mut h, pair.time as u64);
        word(&mut h, y as u64);
    }
    hex(&h.finalize())
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.6}")
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Summary table: `method,regime,metric,mean,sd`.
pub fn write_summary(path: &Path, results: &[&ExperimentResult], config_hash: &str) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# config_hash={config_hash}").map_err(io)?;
    writeln!(w, "method,regime,metric,mean,sd").map_err(io)?;
    for r in results {
        let rep = &r.report;
        for (metric, s) in rep.rows() {
            writeln!(w, "{},{},{metric},{},{}", rep.method, rep.regime, fmt(s.mean), fmt(s.sd)).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Per-window series: `method,regime,time,metric,mean,sd,test_points`.
/// Windows without test points are omitted.
pub fn write_per_time(path: &Path, results: &[&ExperimentResult], config_hash: &str) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# config_hash={config_hash}").map_err(io)?;
    writeln!(w, "method,regime,time,metric,mean,sd,test_points").map_err(io)?;
    for r in results {
        let rep = &r.report;
        for tp in &rep.per_time {
            for (metric, s) in [("accuracy", tp.accuracy), ("coverage", tp.coverage), ("set_size", tp.set_size)] {
                if let Some(s) = s {
                    writeln!(
                        w,
                        "{},{},{},{metric},{},{},{}",
                        rep.method,
                        rep.regime,
                        tp.time,
                        fmt(s.mean),
                        fmt(s.sd),
                        tp.test_points
                    )
                    .map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceSeed {
    pub fit: usize,
    pub permutation: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub method: String,
    pub regime: String,
    pub instances: usize,
    pub skipped: usize,
    pub coverage_across_fits: Summary,
    pub fits: Vec<FitRecord>,
    pub instance_seeds: Vec<InstanceSeed>,
}

impl RunRecord {
    pub fn of(result: &ExperimentResult) -> Self {
        Self {
            method: result.report.method.clone(),
            regime: result.report.regime.clone(),
            instances: result.report.instances,
            skipped: result.report.skipped,
            coverage_across_fits: result.report.coverage_across_fits,
            fits: result.fits.clone(),
            instance_seeds: result
                .instances
                .iter()
                .map(|i| InstanceSeed {
                    fit: i.fit,
                    permutation: i.permutation,
                    seed: i.seed,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub config: serde_json::Value,
    pub dataset: String,
    pub dataset_fingerprint: String,
    pub rng_algorithm: &'static str,
    pub crate_version: &'static str,
    pub runs: Vec<RunRecord>,
}

impl RunManifest {
    pub fn new(
        config: serde_json::Value,
        config_hash: &str,
        dataset: &str,
        dataset_fingerprint: String,
        results: &[&ExperimentResult],
    ) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            config,
            dataset: dataset.to_string(),
            dataset_fingerprint,
            rng_algorithm: RNG_ALGORITHM,
            crate_version: env!("CARGO_PKG_VERSION"),
            runs: results.iter().map(|r| RunRecord::of(r)).collect(),
        }
    }
}

/// Writes all three files into `dir` and returns their paths.
pub fn write_outputs(dir: &Path, manifest: &RunManifest, results: &[&ExperimentResult]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = dir.join(SUMMARY_FILE);
    let per_time = dir.join(PER_TIME_FILE);
    let man = dir.join(MANIFEST_FILE);
    write_summary(&summary, results, &manifest.config_hash)?;
    write_per_time(&per_time, results, &manifest.config_hash)?;
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&man, json).map_err(|e| Error::io(&man, e))?;
    Ok(vec![summary, per_time, man])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            content_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
