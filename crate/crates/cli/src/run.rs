use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use siglab::metrics::{
    aggregate, selection_frequencies, write_long_csv, write_selection_csv, GroupKey, MetricsRecord,
    SummaryRow,
};
use siglab::scenarios::{run_experiment, ReplicaFailure, ScenarioConfig};

use crate::config::ExperimentConfig;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SELECTION_FILE: &str = "selection_frequency.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct Outputs {
    pub metrics: PathBuf,
    pub selection_frequency: PathBuf,
    pub summary: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub master_seed: Option<u64>,
    pub config_path: PathBuf,
    pub started_at: String,
    pub finished_at: String,
    pub workers: usize,
    pub scenarios: Vec<ScenarioConfig>,
    pub outputs: Outputs,
    pub replicas_total: usize,
    /// True when every replica of every scenario failed.
    pub total_failure: bool,
    pub failures: Vec<ReplicaFailure>,
    pub warnings: Vec<String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes through a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let file = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        let mut w = BufWriter::new(file);
        fill(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming {} into place", tmp.display()))
}

/// `scenario,n,p,beta,strategy,metric,mean,sd,count,nulls`
fn write_summary(rows: &[SummaryRow], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario", "n", "p", "beta", "strategy", "metric", "mean", "sd", "count", "nulls",
    ])?;
    let na = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| v.to_string());
    for r in rows {
        let mut rec: Vec<String> = r.group.iter().map(|k| k.to_string()).collect();
        rec.extend([
            r.metric.to_string(),
            na(r.mean),
            na(r.sd),
            r.count.to_string(),
            r.nulls.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_run(
    cfg: &ExperimentConfig,
    config_path: &Path,
    out_dir: &Path,
    workers: usize,
) -> Result<RunManifest> {
    let started_at = now();
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let mut records: Vec<MetricsRecord> = Vec::new();
    let mut failures = Vec::new();
    let mut replicas_total = 0;
    for s in &cfg.scenarios {
        log::info!(
            "running {} (n = {}, beta = {}, {} replicas)",
            s.label(),
            s.n,
            s.effective_beta(),
            s.replicas
        );
        let out = run_experiment(s, workers)?;
        replicas_total += s.replicas;
        records.extend(out.records);
        failures.extend(out.failures);
    }

    let outputs = Outputs {
        metrics: out_dir.join(METRICS_FILE),
        selection_frequency: out_dir.join(SELECTION_FILE),
        summary: out_dir.join(SUMMARY_FILE),
    };
    write_atomic(&outputs.metrics, |w| Ok(write_long_csv(&records, w)?))?;
    write_atomic(&outputs.selection_frequency, |w| {
        Ok(write_selection_csv(&selection_frequencies(&records), w)?)
    })?;
    let keys = [
        GroupKey::Scenario,
        GroupKey::N,
        GroupKey::P,
        GroupKey::Beta,
        GroupKey::Strategy,
    ];
    write_atomic(&outputs.summary, |w| {
        write_summary(&aggregate(&records, &keys), w)
    })?;

    let mut warnings = cfg.warnings.clone();
    if !failures.is_empty() {
        warnings.push(format!(
            "{} of {replicas_total} replicas failed",
            failures.len()
        ));
    }
    let manifest = RunManifest {
        tool: "siglab",
        version: env!("CARGO_PKG_VERSION"),
        master_seed: cfg.master_seed,
        config_path: config_path.to_path_buf(),
        started_at,
        finished_at: now(),
        workers,
        scenarios: cfg.scenarios.clone(),
        outputs,
        total_failure: replicas_total > 0 && failures.len() == replicas_total,
        replicas_total,
        failures,
        warnings,
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_atomic(&manifest_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)?;
        Ok(())
    })?;
    Ok(manifest)
}
