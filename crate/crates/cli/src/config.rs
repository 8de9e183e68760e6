//! Experiment files.
//!
//! ```toml
//! master_seed = 7          # default for every [[scenario]] lacking its own
//!
//! [[scenario]]
//! name = "toy"
//! kind = "toy"
//! n = [2500, 12500, 62500] # lists in `n` or `beta` expand into a grid
//! replicas = 50
//!
//! [scenario.lasso]
//! tol = 1e-7
//! ```
//!
//! Unknown keys are reported with the closest known key and then ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::Serialize;
use siglab::lasso::LassoConfig;
use siglab::scenarios::ScenarioConfig;
use toml::{Table, Value};

/// Keys whose value may be an array of grid points.
const GRID_KEYS: [&str; 2] = ["n", "beta"];
const TOP_LEVEL_KEYS: [&str; 2] = ["master_seed", "scenario"];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub master_seed: Option<u64>,
    /// Fully expanded grid points in file order.
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| err(e.to_string()))?;
        let mut warnings = Vec::new();
        let top_known: BTreeSet<String> = TOP_LEVEL_KEYS.iter().map(|s| s.to_string()).collect();
        for key in table.keys() {
            if !top_known.contains(key) {
                warnings.push(unknown_key_message("top level", key, &top_known));
            }
        }

        let master_seed = match table.get("master_seed") {
            None => None,
            Some(v) => {
                Some(as_seed(v).ok_or_else(|| err("master_seed must be a non-negative integer"))?)
            }
        };
        let entries = match table.get("scenario") {
            Some(Value::Array(items)) => items.clone(),
            Some(_) => return Err(err("`scenario` must be an array of tables ([[scenario]])")),
            None => return Err(err("no [[scenario]] entries")),
        };

        let (known, known_lasso) = known_keys();
        let mut scenarios = Vec::new();
        for (i, entry) in entries.into_iter().enumerate() {
            let Value::Table(mut entry) = entry else {
                return Err(err(format!("scenario #{} is not a table", i + 1)));
            };
            let place = format!("scenario #{}", i + 1);
            strip_unknown(&mut entry, &known, &place, &mut warnings);
            if let Some(Value::Table(lasso)) = entry.get_mut("lasso") {
                strip_unknown(
                    lasso,
                    &known_lasso,
                    &format!("{place}.lasso"),
                    &mut warnings,
                );
            }
            if !entry.contains_key("master_seed") {
                if let Some(seed) = master_seed {
                    entry.insert("master_seed".into(), Value::Integer(seed as i64));
                }
            }
            for point in expand(entry, &place)? {
                let cfg: ScenarioConfig = Value::Table(point)
                    .try_into()
                    .map_err(|e: toml::de::Error| err(format!("{place}: {}", e.message())))?;
                scenarios.push(cfg);
            }
        }
        Ok(ExperimentConfig {
            master_seed,
            scenarios,
            warnings,
        })
    }

    /// Checks every grid point; messages name the scenario and field.
    pub fn validate(&self) -> Vec<String> {
        let mut problems: Vec<String> = self
            .scenarios
            .iter()
            .filter_map(|s| {
                s.validate()
                    .err()
                    .map(|e| format!("{} (n = {}, beta = {}): {e}", s.label(), s.n, s.beta))
            })
            .collect();
        let mut seen = BTreeSet::new();
        for s in &self.scenarios {
            if !seen.insert((s.label(), s.n, s.beta.to_bits())) {
                problems.push(format!(
                    "{} (n = {}, beta = {}) appears twice; give the entries distinct names",
                    s.label(),
                    s.n,
                    s.beta
                ));
            }
        }
        problems
    }

    /// Keeps the scenarios whose label or kind equals `filter`.
    pub fn retain_scenario(&mut self, filter: &str) {
        self.scenarios
            .retain(|s| s.label() == filter || s.kind.as_str() == filter);
    }

    pub fn override_seed(&mut self, seed: u64) {
        self.master_seed = Some(seed);
        for s in &mut self.scenarios {
            s.master_seed = seed;
        }
    }
}

fn as_seed(v: &Value) -> Option<u64> {
    v.as_integer().and_then(|i| u64::try_from(i).ok())
}

/// Top-level and `lasso` keys, read off a fully populated default.
fn known_keys() -> (BTreeSet<String>, BTreeSet<String>) {
    let probe = ScenarioConfig {
        lasso: LassoConfig {
            lambda_ratio: Some(0.5),
            ..LassoConfig::default()
        },
        ..ScenarioConfig::default()
    };
    let table = Table::try_from(&probe).expect("scenario config serializes");
    let lasso = match table.get("lasso") {
        Some(Value::Table(t)) => t.keys().cloned().collect(),
        _ => BTreeSet::new(),
    };
    (table.keys().cloned().collect(), lasso)
}

fn unknown_key_message(place: &str, key: &str, known: &BTreeSet<String>) -> String {
    let nearest = known
        .iter()
        .map(|k| (strsim::jaro_winkler(key, k), k))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match nearest {
        Some((_, k)) => format!("{place}: unknown key `{key}` ignored (did you mean `{k}`?)"),
        None => format!("{place}: unknown key `{key}` ignored"),
    }
}

fn strip_unknown(
    table: &mut Table,
    known: &BTreeSet<String>,
    place: &str,
    warnings: &mut Vec<String>,
) {
    let unknown: Vec<String> = table
        .keys()
        .filter(|k| !known.contains(*k))
        .cloned()
        .collect();
    for key in unknown {
        warnings.push(unknown_key_message(place, &key, known));
        table.remove(&key);
    }
}

/// Cartesian product over the grid keys, `n` varying slowest.
fn expand(entry: Table, place: &str) -> Result<Vec<Table>, ConfigError> {
    let mut points = vec![entry];
    for key in GRID_KEYS {
        let mut next = Vec::new();
        for point in points {
            match point.get(key) {
                Some(Value::Array(values)) => {
                    if values.is_empty() {
                        return Err(err(format!("{place}: `{key}` grid is empty")));
                    }
                    for v in values {
                        let mut p = point.clone();
                        p.insert(key.into(), v.clone());
                        next.push(p);
                    }
                }
                _ => next.push(point),
            }
        }
        points = next;
    }
    Ok(points)
}
