//! Univariate, confounder-adjusted screening of features against the exposure.
//!
//! Each observed feature `M_j` gets its own regression `E ~ 1 + M_j + W`; the
//! Wald p value of the `M_j` coefficient (df = n - d_W - 2) enters a
//! multiplicity correction, and the rejected hypotheses form the retained set.

mod multiplicity;
mod ols;
mod tdist;

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::graph::NodeId;
use crate::sem::Dataset;

pub use multiplicity::{multiplicity_correct, CorrectionMethod};
pub use ols::{ols_fit, OlsFit, RANK_TOL};
pub use tdist::{beta_inc_reg, wald_pvalue};

#[derive(Debug, Error)]
pub enum ScreenError {
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("{n} observations cannot support {k} regression columns")]
    TooFewObservations { n: usize, k: usize },
    #[error("dataset has no column for node {0}")]
    MissingColumn(NodeId),
    #[error("dataset has no feature columns to screen")]
    NoFeatures,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Outcome of one feature's regression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureTest {
    pub feature: NodeId,
    pub label: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub rejected: bool,
    /// The fit was rank deficient; recorded with p = 1.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenResult {
    pub tests: Vec<FeatureTest>,
    pub method: CorrectionMethod,
    pub level: f64,
    pub df: usize,
}

impl ScreenResult {
    /// Rejected features in dataset column order.
    pub fn retained(&self) -> Vec<NodeId> {
        self.tests
            .iter()
            .filter(|t| t.rejected)
            .map(|t| t.feature)
            .collect()
    }

    /// `feature,coef,se,t,p,rejected`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ScreenError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "coef", "se", "t", "p", "rejected"])?;
        for t in &self.tests {
            w.write_record([
                t.label.clone(),
                format!("{:.16e}", t.coef),
                format!("{:.16e}", t.se),
                format!("{:.16e}", t.t),
                format!("{:.16e}", t.p),
                t.rejected.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Screens every feature column of `data`.
pub fn screen(
    data: &Dataset,
    exposure: NodeId,
    confounders: &[NodeId],
    method: CorrectionMethod,
    level: f64,
) -> Result<ScreenResult, ScreenError> {
    let y = data
        .column(exposure)
        .ok_or(ScreenError::MissingColumn(exposure))?;
    let features: Vec<NodeId> = data
        .features()
        .into_iter()
        .filter(|&f| f != exposure)
        .collect();
    if features.is_empty() {
        return Err(ScreenError::NoFeatures);
    }
    let n = data.n();
    let k = confounders.len() + 2;
    if n <= k {
        return Err(ScreenError::TooFewObservations { n, k });
    }

    let mut design = DMatrix::<f64>::from_element(n, k, 1.0);
    for (c, &w) in confounders.iter().enumerate() {
        let col = data.column(w).ok_or(ScreenError::MissingColumn(w))?;
        design.column_mut(c + 2).copy_from_slice(col);
    }

    let mut tests = Vec::with_capacity(features.len());
    for &f in &features {
        design
            .column_mut(1)
            .copy_from_slice(data.column(f).expect("feature listed by dataset"));
        let label = data.label(f).unwrap_or_default().to_string();
        let test = match ols_fit(y, &design) {
            Ok(fit) => {
                let (coef, se) = (fit.coefficients[1], fit.std_errors[1]);
                let t = coef / se;
                FeatureTest {
                    feature: f,
                    label,
                    coef,
                    se,
                    t,
                    p: wald_pvalue(t, fit.df as f64),
                    rejected: false,
                    degenerate: false,
                }
            }
            Err(ScreenError::RankDeficient) => {
                log::warn!("screening fit for {label} is rank deficient; not rejected");
                FeatureTest {
                    feature: f,
                    label,
                    coef: 0.0,
                    se: f64::NAN,
                    t: f64::NAN,
                    p: 1.0,
                    rejected: false,
                    degenerate: true,
                }
            }
            Err(e) => return Err(e),
        };
        tests.push(test);
    }

    let pvalues: Vec<f64> = tests.iter().map(|t| t.p).collect();
    for j in multiplicity_correct(&pvalues, method, level) {
        tests[j].rejected = !tests[j].degenerate;
    }
    Ok(ScreenResult {
        tests,
        method,
        level,
        df: n - k,
    })
}
