//! Per-replica evaluation of a signature against the graph oracles, and
//! aggregation across replicas.
//!
//! Sensitivity is measured against the asymptotic screening set S_s and
//! specificity against the observed non-descendants of E. Undefined ratios
//! (empty denominators) are `None` and written as `NA`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use crate::graph::{CausalGraph, NodeId, OracleSets};
use crate::pipeline::{score_signature, PipelineError, SignatureModel, Strategy};
use crate::sem::Dataset;

/// Identifies the run a record belongs to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunContext {
    pub scenario: String,
    pub replica: usize,
    pub n: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub scenario: String,
    pub replica: usize,
    pub n: usize,
    /// Number of observed features.
    pub p: usize,
    pub beta: f64,
    pub strategy: Strategy,
    pub cardinality: usize,
    pub correlation: f64,
    /// The signature was empty or constant on the test set; correlation set to 0.
    pub correlation_degenerate: bool,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    /// Fraction of observed children of E that were selected.
    pub children_recovery: Option<f64>,
    pub exact_match_s: bool,
    pub exact_match_nos: bool,
    /// Size of the screening-stage retained set (screening only).
    pub retained: Option<usize>,
    /// Selection indicator per observed feature, in graph order.
    pub selected: Vec<(String, bool)>,
}

/// Metric names in output order.
pub const METRICS: [&str; 8] = [
    "cardinality",
    "correlation",
    "sensitivity",
    "specificity",
    "exact_match_s",
    "exact_match_nos",
    "children_recovery",
    "retained",
];

impl MetricsRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        match name {
            "cardinality" => Some(self.cardinality as f64),
            "correlation" => Some(self.correlation),
            "sensitivity" => self.sensitivity,
            "specificity" => self.specificity,
            "exact_match_s" => Some(flag(self.exact_match_s)),
            "exact_match_nos" => Some(flag(self.exact_match_nos)),
            "children_recovery" => self.children_recovery,
            "retained" => self.retained.map(|r| r as f64),
            _ => None,
        }
    }
}

/// Pearson correlation; None when either vector is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn evaluate(
    model: &SignatureModel,
    g: &CausalGraph,
    oracle: &OracleSets,
    test: &Dataset,
    ctx: &RunContext,
) -> Result<MetricsRecord, PipelineError> {
    let selected: BTreeSet<NodeId> = model.selected.iter().copied().collect();
    let observed = g.observed_features();

    let scores = score_signature(model, test)?;
    let exposure = test.column(g.exposure()).ok_or(PipelineError::NoExposure)?;
    let corr = if selected.is_empty() {
        None
    } else {
        pearson(&scores, exposure)
    };

    let non_desc: Vec<NodeId> = observed
        .iter()
        .copied()
        .filter(|m| !oracle.descendants.contains(m))
        .collect();
    let excluded = non_desc.iter().filter(|m| !selected.contains(m)).count();
    let hits = oracle.screening.intersection(&selected).count();
    let child_hits = oracle.observed_children.intersection(&selected).count();

    Ok(MetricsRecord {
        scenario: ctx.scenario.clone(),
        replica: ctx.replica,
        n: ctx.n,
        p: observed.len(),
        beta: ctx.beta,
        strategy: model.strategy,
        cardinality: selected.len(),
        correlation: corr.unwrap_or(0.0),
        correlation_degenerate: corr.is_none(),
        sensitivity: ratio(hits, oracle.screening.len()),
        specificity: ratio(excluded, non_desc.len()),
        children_recovery: ratio(child_hits, oracle.observed_children.len()),
        exact_match_s: selected == oracle.screening,
        exact_match_nos: selected == oracle.noscreening,
        retained: model.retained().map(|r| r.len()),
        selected: observed
            .iter()
            .map(|&m| (g.label(m).to_string(), selected.contains(&m)))
            .collect(),
    })
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".into(),
    }
}

/// Long format: `scenario,replica,n,p,beta,strategy,metric,value`.
pub fn write_long_csv<W: Write>(records: &[MetricsRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario", "replica", "n", "p", "beta", "strategy", "metric", "value",
    ])?;
    for r in records {
        for m in METRICS {
            if m == "retained" && r.strategy == Strategy::NoScreening {
                continue;
            }
            w.write_record([
                r.scenario.clone(),
                r.replica.to_string(),
                r.n.to_string(),
                r.p.to_string(),
                r.beta.to_string(),
                r.strategy.to_string(),
                m.to_string(),
                fmt_value(r.metric(m)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionFrequency {
    pub scenario: String,
    pub n: usize,
    pub beta: f64,
    pub strategy: Strategy,
    pub feature: String,
    pub selection_frequency: f64,
}

/// Fraction of replicas selecting each feature, per (scenario, n, beta,
/// strategy), features in graph order.
pub fn selection_frequencies(records: &[MetricsRecord]) -> Vec<SelectionFrequency> {
    type Key = (String, usize, u64, Strategy);
    /// Per-feature hit counts, replica count, beta.
    type Tally = (Vec<(String, usize)>, usize, f64);
    let mut groups: BTreeMap<Key, Tally> = BTreeMap::new();
    for r in records {
        let key = (r.scenario.clone(), r.n, r.beta.to_bits(), r.strategy);
        let entry = groups.entry(key).or_insert_with(|| {
            let names = r.selected.iter().map(|(l, _)| (l.clone(), 0)).collect();
            (names, 0, r.beta)
        });
        entry.1 += 1;
        for (slot, (_, sel)) in entry.0.iter_mut().zip(&r.selected) {
            slot.1 += usize::from(*sel);
        }
    }
    let mut out = Vec::new();
    for ((scenario, n, _, strategy), (counts, total, beta)) in groups {
        for (feature, c) in counts {
            out.push(SelectionFrequency {
                scenario: scenario.clone(),
                n,
                beta,
                strategy,
                feature,
                selection_frequency: c as f64 / total as f64,
            });
        }
    }
    out
}

/// `scenario,n,beta,strategy,feature,selection_frequency`
pub fn write_selection_csv<W: Write>(rows: &[SelectionFrequency], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "n",
        "beta",
        "strategy",
        "feature",
        "selection_frequency",
    ])?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.n.to_string(),
            r.beta.to_string(),
            r.strategy.to_string(),
            r.feature.clone(),
            r.selection_frequency.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Scenario,
    N,
    P,
    Beta,
    Strategy,
}

#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize)]
#[serde(untagged)]
pub enum KeyValue {
    Text(String),
    Count(usize),
    Real(f64),
}

impl std::fmt::Display for KeyValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KeyValue::Text(s) => f.write_str(s),
            KeyValue::Count(c) => write!(f, "{c}"),
            KeyValue::Real(x) => write!(f, "{x}"),
        }
    }
}

fn key_value(r: &MetricsRecord, key: GroupKey) -> KeyValue {
    match key {
        GroupKey::Scenario => KeyValue::Text(r.scenario.clone()),
        GroupKey::N => KeyValue::Count(r.n),
        GroupKey::P => KeyValue::Count(r.p),
        GroupKey::Beta => KeyValue::Real(r.beta),
        GroupKey::Strategy => KeyValue::Text(r.strategy.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub group: Vec<KeyValue>,
    pub metric: &'static str,
    pub mean: Option<f64>,
    /// Sample standard deviation (divisor count - 1); None below two values.
    pub sd: Option<f64>,
    pub count: usize,
    pub nulls: usize,
}

/// Mean, standard deviation and count of every metric per group. Null
/// metric values are excluded from the statistics and counted separately.
pub fn aggregate(records: &[MetricsRecord], keys: &[GroupKey]) -> Vec<SummaryRow> {
    let mut groups: Vec<(Vec<KeyValue>, Vec<&MetricsRecord>)> = Vec::new();
    for r in records {
        let k: Vec<KeyValue> = keys.iter().map(|&key| key_value(r, key)).collect();
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, members)) => members.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut rows = Vec::new();
    for (group, members) in groups {
        for metric in METRICS {
            let values: Vec<f64> = members.iter().filter_map(|r| r.metric(metric)).collect();
            let count = values.len();
            let mean = (count > 0).then(|| values.iter().sum::<f64>() / count as f64);
            let sd = mean.filter(|_| count > 1).map(|m| {
                (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (count - 1) as f64).sqrt()
            });
            rows.push(SummaryRow {
                group: group.clone(),
                metric,
                mean,
                sd,
                count,
                nulls: members.len() - count,
            });
        }
    }
    rows
}
