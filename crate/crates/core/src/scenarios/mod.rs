//! Scenario definitions and the replication harness.
//!
//! Every replica derives its random streams from the master seed with
//! [`split_seed`], so results do not depend on the number of workers or the
//! order in which replicas finish.

mod graphs;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CausalGraph, GraphError, OracleSets};
use crate::lasso::LassoConfig;
use crate::metrics::{evaluate, MetricsRecord, RunContext};
use crate::pipeline::{build_signature, PipelineConfig, Strategy};
use crate::screen::CorrectionMethod;
use crate::sem::sample;

pub use graphs::{
    build_graph, build_scenario1, build_scenario2, build_scenario3, build_time_expanded, build_toy,
    step_brother_mother,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{required} structured features do not fit in p = {p}")]
    ConfigTooLarge { required: usize, p: usize },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Toy,
    S1,
    S2,
    S3,
}

impl ScenarioKind {
    fn code(self) -> u64 {
        match self {
            ScenarioKind::Toy => 0,
            ScenarioKind::S1 => 1,
            ScenarioKind::S2 => 2,
            ScenarioKind::S3 => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Toy => "toy",
            ScenarioKind::S1 => "s1",
            ScenarioKind::S2 => "s2",
            ScenarioKind::S3 => "s3",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exposure-to-child weight of the toy graph.
pub const TOY_BETA: f64 = 0.5;

/// One point of a simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Label written to every output row; defaults to the kind.
    pub name: String,
    pub kind: ScenarioKind,
    pub n: usize,
    pub n_test: usize,
    pub replicas: usize,
    /// Exposure-to-child weight (s1, s2) or confounder-to-exposure weight
    /// (s3). The toy graph fixes it at 1/2.
    pub beta: f64,
    /// Feature count for s1 and s2.
    pub p: usize,
    pub p_child: usize,
    /// Latent mothers per child (s2).
    pub mothers: usize,
    /// Step-brothers per mother (s2).
    pub step_brothers: usize,
    pub delta: f64,
    pub delta_g: f64,
    /// Copies of the toy feature block (s3).
    pub blocks: usize,
    pub master_seed: u64,
    pub method: CorrectionMethod,
    pub level: f64,
    pub folds: usize,
    pub lasso: LassoConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: String::new(),
            kind: ScenarioKind::Toy,
            n: 500,
            n_test: 10_000,
            replicas: 100,
            beta: 0.3,
            p: 1000,
            p_child: 25,
            mothers: 5,
            step_brothers: 5,
            delta: 0.5,
            delta_g: 0.0,
            blocks: 55,
            master_seed: 1,
            method: CorrectionMethod::Bh,
            level: 0.05,
            folds: 10,
            lasso: LassoConfig::default(),
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    pub fn label(&self) -> String {
        if self.name.is_empty() {
            self.kind.to_string()
        } else {
            self.name.clone()
        }
    }

    /// The beta actually used by the graph.
    pub fn effective_beta(&self) -> f64 {
        match self.kind {
            ScenarioKind::Toy => TOY_BETA,
            _ => self.beta,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            method: self.method,
            level: self.level,
            folds: self.folds,
            lasso: self.lasso.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.replicas == 0 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        if self.folds < 2 {
            return Err(invalid("folds", "must be at least 2"));
        }
        if self.n < 2 * self.folds || self.n < 4 {
            return Err(invalid(
                "n",
                format!(
                    "must be at least max(4, 2 * folds) = {}",
                    (2 * self.folds).max(4)
                ),
            ));
        }
        if self.n_test < 2 {
            return Err(invalid("n_test", "must be at least 2"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("level", "must lie in (0, 1)"));
        }
        for (field, v) in [
            ("beta", self.beta),
            ("delta", self.delta),
            ("delta_g", self.delta_g),
        ] {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if self.lasso.tol.is_nan()
            || self.lasso.tol <= 0.0
            || self.lasso.max_iter == 0
            || self.lasso.n_lambda == 0
        {
            return Err(invalid(
                "lasso",
                "tol, max_iter and n_lambda must be positive",
            ));
        }
        if let Some(r) = self.lasso.lambda_ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(invalid("lasso.lambda_ratio", "must lie in (0, 1)"));
            }
        }
        match self.kind {
            ScenarioKind::Toy => {}
            ScenarioKind::S1 => {
                if self.p_child == 0 {
                    return Err(invalid("p_child", "must be at least 1"));
                }
                if 2 * self.p_child > self.p {
                    return Err(ScenarioError::ConfigTooLarge {
                        required: 2 * self.p_child,
                        p: self.p,
                    });
                }
            }
            ScenarioKind::S2 => {
                for (field, v) in [
                    ("p_child", self.p_child),
                    ("mothers", self.mothers),
                    ("step_brothers", self.step_brothers),
                ] {
                    if v == 0 {
                        return Err(invalid(field, "must be at least 1"));
                    }
                }
                let required = self.p_child * (1 + self.mothers * self.step_brothers);
                if required > self.p {
                    return Err(ScenarioError::ConfigTooLarge {
                        required,
                        p: self.p,
                    });
                }
            }
            ScenarioKind::S3 => {
                if self.blocks == 0 {
                    return Err(invalid("blocks", "must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

/// Independent random streams of one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Graph = 1,
    Train = 2,
    Test = 3,
    Folds = 4,
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Keyed 64-bit seed for one stream: SplitMix64 finalizers chained over
/// master seed, scenario kind, replica index and purpose.
pub fn split_seed(master: u64, kind: ScenarioKind, replica: u64, purpose: StreamPurpose) -> u64 {
    let mut h = splitmix(master.wrapping_add(GOLDEN_GAMMA));
    for word in [kind.code(), replica, purpose as u64] {
        h = splitmix(h ^ word.wrapping_add(GOLDEN_GAMMA).wrapping_mul(GOLDEN_GAMMA));
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaFailure {
    pub scenario: String,
    pub replica: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    /// Sorted by replica, then strategy.
    pub records: Vec<MetricsRecord>,
    pub failures: Vec<ReplicaFailure>,
}

type Shared = Option<Arc<(CausalGraph, OracleSets)>>;

fn run_replica(
    cfg: &ScenarioConfig,
    shared: &Shared,
    replica: usize,
) -> Result<Vec<MetricsRecord>, String> {
    let r = replica as u64;
    let seed = |purpose| split_seed(cfg.master_seed, cfg.kind, r, purpose);
    let owned;
    let (g, oracle) = match shared {
        Some(pair) => (&pair.0, &pair.1),
        None => {
            let g = build_graph(cfg, seed(StreamPurpose::Graph)).map_err(|e| e.to_string())?;
            let o = g.oracle_sets();
            owned = (g, o);
            (&owned.0, &owned.1)
        }
    };
    let train = sample(g, cfg.n, seed(StreamPurpose::Train), false).map_err(|e| e.to_string())?;
    let test =
        sample(g, cfg.n_test, seed(StreamPurpose::Test), false).map_err(|e| e.to_string())?;
    let pipeline = cfg.pipeline();
    let ctx = RunContext {
        scenario: cfg.label(),
        replica,
        n: cfg.n,
        beta: cfg.effective_beta(),
    };
    Strategy::ALL
        .iter()
        .map(|&strategy| {
            let model = build_signature(&train, strategy, &pipeline, seed(StreamPurpose::Folds))
                .map_err(|e| format!("{strategy}: {e}"))?;
            evaluate(&model, g, oracle, &test, &ctx).map_err(|e| format!("{strategy}: {e}"))
        })
        .collect()
}

/// Runs every replica of `cfg` on a pool of `workers` threads (0 uses the
/// rayon default). Replica failures are collected rather than aborting.
pub fn run_experiment(
    cfg: &ScenarioConfig,
    workers: usize,
) -> Result<ExperimentOutput, ScenarioError> {
    cfg.validate()?;
    let shared: Shared = match cfg.kind {
        ScenarioKind::S1 => None,
        _ => {
            let g = build_graph(cfg, 0)?;
            let o = g.oracle_sets();
            Some(Arc::new((g, o)))
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ScenarioError::Pool(e.to_string()))?;
    let results: Vec<Result<Vec<MetricsRecord>, String>> = pool.install(|| {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|r| run_replica(cfg, &shared, r))
            .collect()
    });

    let mut out = ExperimentOutput::default();
    for (replica, res) in results.into_iter().enumerate() {
        match res {
            Ok(records) => out.records.extend(records),
            Err(error) => {
                log::warn!("{} replica {replica} failed: {error}", cfg.label());
                out.failures.push(ReplicaFailure {
                    scenario: cfg.label(),
                    replica,
                    error,
                });
            }
        }
    }
    Ok(out)
}
