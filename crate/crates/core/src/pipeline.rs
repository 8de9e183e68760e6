//! The two signature strategies, end to end.
//!
//! * No-screening: cross-validated lasso of E on every observed feature, with
//!   the confounders unpenalized.
//! * Screening: univariate confounder-adjusted tests first, then the same
//!   lasso restricted to the rejected features.
//!
//! A signature is the linear score `sum_j alpha_j M_j` over the selected
//! features; intercept and confounder terms are kept for audit only.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::lasso::{cv_select, LassoConfig, LassoError};
use crate::screen::{screen, CorrectionMethod, ScreenError, ScreenResult};
use crate::sem::Dataset;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset has no exposure column")]
    NoExposure,
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("test data has no column for selected feature {0}")]
    MissingColumn(String),
    #[error(transparent)]
    Screen(#[from] ScreenError),
    #[error(transparent)]
    Lasso(#[from] LassoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Screening,
    NoScreening,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Screening, Strategy::NoScreening];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Screening => "screening",
            Strategy::NoScreening => "noscreening",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub method: CorrectionMethod,
    pub level: f64,
    pub folds: usize,
    pub lasso: LassoConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: CorrectionMethod::Bh,
            level: 0.05,
            folds: 10,
            lasso: LassoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureFlag {
    /// Screening rejected nothing, so no lasso was fitted.
    EmptyRetainedSet,
    /// Every candidate feature had zero variance.
    NoUsableFeatures,
    /// Coordinate descent stopped at max_iter somewhere along the path.
    NoConvergence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub feature: NodeId,
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignatureModel {
    pub strategy: Strategy,
    /// Features with a nonzero coefficient at the chosen lambda, in column order.
    pub selected: Vec<NodeId>,
    pub selected_labels: Vec<String>,
    pub coefficients: Vec<Coefficient>,
    pub intercept: f64,
    pub confounder_coefficients: Vec<Coefficient>,
    pub lambda: Option<f64>,
    /// Number of features handed to the lasso.
    pub input_features: usize,
    pub flags: Vec<SignatureFlag>,
    #[serde(skip)]
    pub screen: Option<ScreenResult>,
}

impl SignatureModel {
    /// Screening-stage retained set, if this model ran the screening stage.
    pub fn retained(&self) -> Option<Vec<NodeId>> {
        self.screen.as_ref().map(ScreenResult::retained)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("signature model serializes")
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn empty_model(
    strategy: Strategy,
    y: &[f64],
    input_features: usize,
    flag: SignatureFlag,
    screen: Option<ScreenResult>,
) -> SignatureModel {
    SignatureModel {
        strategy,
        selected: Vec::new(),
        selected_labels: Vec::new(),
        coefficients: Vec::new(),
        intercept: mean(y),
        confounder_coefficients: Vec::new(),
        lambda: None,
        input_features,
        flags: vec![flag],
        screen,
    }
}

/// Fits one strategy on `train`. `seed` fixes the CV fold assignment.
pub fn build_signature(
    train: &Dataset,
    strategy: Strategy,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<SignatureModel, PipelineError> {
    let exposure = train.exposure().ok_or(PipelineError::NoExposure)?;
    let y = train.column(exposure).expect("exposure column exists");
    let confounders = train.confounders();
    let all_features = train.features();
    if all_features.is_empty() {
        return Err(PipelineError::NoFeatures);
    }

    let (inputs, screen_result) = match strategy {
        Strategy::NoScreening => (all_features, None),
        Strategy::Screening => {
            let r = screen(train, exposure, &confounders, cfg.method, cfg.level)?;
            (r.retained(), Some(r))
        }
    };
    if inputs.is_empty() {
        return Ok(empty_model(
            strategy,
            y,
            0,
            SignatureFlag::EmptyRetainedSet,
            screen_result,
        ));
    }

    let col = |id: NodeId| train.column(id).expect("listed by dataset");
    let xs: Vec<&[f64]> = inputs.iter().map(|&id| col(id)).collect();
    let ws: Vec<&[f64]> = confounders.iter().map(|&id| col(id)).collect();
    let fit = match cv_select(y, &xs, &ws, cfg.folds, seed, &cfg.lasso) {
        Ok(fit) => fit,
        Err(LassoError::NoUsableFeatures) => {
            return Ok(empty_model(
                strategy,
                y,
                inputs.len(),
                SignatureFlag::NoUsableFeatures,
                screen_result,
            ))
        }
        Err(e) => return Err(e.into()),
    };

    let k = fit.chosen.expect("cv_select chooses a lambda");
    let label = |id: NodeId| train.label(id).unwrap_or_default().to_string();
    let coefficients: Vec<Coefficient> = inputs
        .iter()
        .zip(&fit.coefficients[k])
        .filter(|(_, &v)| v != 0.0)
        .map(|(&id, &value)| Coefficient {
            feature: id,
            label: label(id),
            value,
        })
        .collect();
    let confounder_coefficients = confounders
        .iter()
        .zip(&fit.confounder_coefficients[k])
        .map(|(&id, &value)| Coefficient {
            feature: id,
            label: label(id),
            value,
        })
        .collect();
    let mut flags = Vec::new();
    if !fit.converged {
        flags.push(SignatureFlag::NoConvergence);
    }
    Ok(SignatureModel {
        strategy,
        selected: coefficients.iter().map(|c| c.feature).collect(),
        selected_labels: coefficients.iter().map(|c| c.label.clone()).collect(),
        coefficients,
        intercept: fit.intercepts[k],
        confounder_coefficients,
        lambda: Some(fit.lambdas[k]),
        input_features: inputs.len(),
        flags,
        screen: screen_result,
    })
}

/// Signature values `sum_j alpha_j M_j` for every row of `test`.
pub fn score_signature(model: &SignatureModel, test: &Dataset) -> Result<Vec<f64>, PipelineError> {
    let mut scores = vec![0.0; test.n()];
    for c in &model.coefficients {
        let col = test
            .column(c.feature)
            .ok_or_else(|| PipelineError::MissingColumn(c.label.clone()))?;
        for (s, x) in scores.iter_mut().zip(col) {
            *s += c.value * x;
        }
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRole;
    use crate::sem::Column;

    fn data(values: Vec<Vec<f64>>) -> Dataset {
        let mut cols = vec![Column {
            id: NodeId(0),
            role: NodeRole::Exposure,
            label: "E".into(),
        }];
        for j in 1..values.len() {
            cols.push(Column {
                id: NodeId(j),
                role: NodeRole::Feature,
                label: format!("M{j}"),
            });
        }
        Dataset::new(cols, values).unwrap()
    }

    fn model(coefs: &[(usize, f64)]) -> SignatureModel {
        let coefficients: Vec<Coefficient> = coefs
            .iter()
            .map(|&(j, value)| Coefficient {
                feature: NodeId(j),
                label: format!("M{j}"),
                value,
            })
            .collect();
        SignatureModel {
            strategy: Strategy::NoScreening,
            selected: coefficients.iter().map(|c| c.feature).collect(),
            selected_labels: coefficients.iter().map(|c| c.label.clone()).collect(),
            coefficients,
            intercept: 0.0,
            confounder_coefficients: Vec::new(),
            lambda: None,
            input_features: 2,
            flags: Vec::new(),
            screen: None,
        }
    }

    #[test]
    fn empty_signature_scores_zero() {
        let d = data(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(score_signature(&model(&[]), &d).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn unit_coefficient_copies_the_column() {
        let d = data(vec![vec![1.0, 2.0], vec![3.0, -4.5]]);
        assert_eq!(
            score_signature(&model(&[(1, 1.0)]), &d).unwrap(),
            vec![3.0, -4.5]
        );
    }

    #[test]
    fn missing_column_is_reported() {
        let d = data(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(matches!(
            score_signature(&model(&[(5, 1.0)]), &d),
            Err(PipelineError::MissingColumn(l)) if l == "M5"
        ));
    }

    #[test]
    fn strategy_names() {
        assert_eq!(Strategy::NoScreening.to_string(), "noscreening");
        assert_eq!(
            serde_json::to_string(&Strategy::Screening).unwrap(),
            "\"screening\""
        );
    }

    #[test]
    fn json_lists_labels_and_flags() {
        let mut m = model(&[(1, 0.25)]);
        m.flags.push(SignatureFlag::NoConvergence);
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["strategy"], "noscreening");
        assert_eq!(v["selected_labels"][0], "M1");
        assert_eq!(v["flags"][0], "no_convergence");
    }
}
