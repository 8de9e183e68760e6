//! Lasso regression of the exposure on molecular features with unpenalized
//! confounders.
//!
//! The objective is `(1/2n) ||y - a0 - X alpha - W theta||^2 + lambda sum_j pf_j |b_j|`
//! where `b_j = alpha_j * sd(x_j)` is the coefficient of the standardized
//! feature (standard deviation with divisor n). Confounders carry penalty
//! factor 0. Coefficients are reported on the original scale.
//!
//! Cross-validation deals shuffled rows round-robin into K folds, reuses the
//! full-data lambda sequence in every fold and picks the largest lambda whose
//! CV error is within one standard error (taken at the minimizer) of the
//! minimum.

mod solver;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use solver::{Problem, Solver, View};

pub use solver::soft_threshold;

#[derive(Debug, Error)]
pub enum LassoError {
    #[error("input contains NaN or infinite values")]
    NonFinite,
    #[error("column lengths differ from the response length {0}")]
    DimensionMismatch(usize),
    #[error("penalty factors must be finite and non-negative, one per feature")]
    InvalidPenaltyFactors,
    #[error("lambdas must be finite, non-negative and strictly decreasing")]
    InvalidLambdas,
    #[error("{folds} folds need at least {} observations, got {n}", 2 * folds)]
    InvalidFolds { folds: usize, n: usize },
    #[error("no feature with nonzero variance")]
    NoUsableFeatures,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    /// Convergence threshold on the largest standardized coefficient update.
    pub tol: f64,
    /// Maximum coordinate-descent cycles per lambda.
    pub max_iter: usize,
    pub n_lambda: usize,
    /// lambda_min / lambda_max; None picks 1e-3 when n > p and 1e-2 otherwise.
    pub lambda_ratio: Option<f64>,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            tol: 1e-7,
            max_iter: 100_000,
            n_lambda: 100,
            lambda_ratio: None,
        }
    }
}

/// A regularization path, optionally with cross-validation results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoFit {
    pub lambdas: Vec<f64>,
    /// Feature coefficients per lambda, original scale, one entry per input feature.
    pub coefficients: Vec<Vec<f64>>,
    pub confounder_coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    /// Mean held-out MSE per lambda (empty without CV).
    pub cv_mean: Vec<f64>,
    /// Standard error of `cv_mean` (sd across folds / sqrt K).
    pub cv_se: Vec<f64>,
    pub chosen: Option<usize>,
    /// Standard deviations (divisor n) of the features; 0 for dropped ones.
    pub feature_scales: Vec<f64>,
    /// Indices of zero-variance features excluded from the fit.
    pub dropped: Vec<usize>,
    pub converged: bool,
}

impl LassoFit {
    /// Indices of nonzero feature coefficients at path position `k`.
    pub fn support(&self, k: usize) -> Vec<usize> {
        (0..self.coefficients[k].len())
            .filter(|&j| self.coefficients[k][j] != 0.0)
            .collect()
    }

    pub fn nnz(&self, k: usize) -> usize {
        self.coefficients[k].iter().filter(|c| **c != 0.0).count()
    }

    /// `lambda,cvm,cvse,nnz`
    pub fn write_diagnostics<W: Write>(&self, out: W) -> Result<(), LassoError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "cvm", "cvse", "nnz"])?;
        for k in 0..self.lambdas.len() {
            let opt = |v: &[f64]| v.get(k).map(|x| format!("{x:.16e}")).unwrap_or_default();
            w.write_record([
                format!("{:.16e}", self.lambdas[k]),
                opt(&self.cv_mean),
                opt(&self.cv_se),
                self.nnz(k).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Inputs after validation: constant features removed, columns globally
/// centered and rows laid out fold by fold.
struct Prepared {
    problem: Problem,
    /// Input feature index of each kept feature.
    kept: Vec<usize>,
    n_features: usize,
    n_confounders: usize,
    pf: Vec<f64>,
    mean_x: Vec<f64>,
    mean_y: f64,
}

fn is_constant(col: &[f64]) -> bool {
    col.iter().all(|&v| v == col[0])
}

fn prepare(
    y: &[f64],
    features: &[&[f64]],
    confounders: &[&[f64]],
    penalty_factors: Option<&[f64]>,
    row_order: &[usize],
    bounds: Vec<(usize, usize)>,
) -> Result<Prepared, LassoError> {
    let n = y.len();
    if features.iter().chain(confounders).any(|c| c.len() != n) {
        return Err(LassoError::DimensionMismatch(n));
    }
    if y.iter()
        .chain(features.iter().flat_map(|c| c.iter()))
        .chain(confounders.iter().flat_map(|c| c.iter()))
        .any(|v| !v.is_finite())
    {
        return Err(LassoError::NonFinite);
    }
    if let Some(pf) = penalty_factors {
        if pf.len() != features.len() || pf.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(LassoError::InvalidPenaltyFactors);
        }
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (j, col) in features.iter().enumerate() {
        if n > 0 && is_constant(col) {
            dropped.push(j);
        } else {
            kept.push(j);
        }
    }
    if !dropped.is_empty() {
        log::warn!("dropping {} zero-variance feature column(s)", dropped.len());
    }
    if kept.is_empty() {
        return Err(LassoError::NoUsableFeatures);
    }

    let mut pf: Vec<f64> = kept
        .iter()
        .map(|&j| penalty_factors.map_or(1.0, |p| p[j]))
        .collect();
    pf.extend(std::iter::repeat_n(0.0, confounders.len()));

    let columns: Vec<&[f64]> = kept
        .iter()
        .map(|&j| features[j])
        .chain(confounders.iter().copied())
        .collect();
    let center = |col: &[f64]| -> (Vec<f64>, f64) {
        let m = col.iter().sum::<f64>() / n as f64;
        (row_order.iter().map(|&i| col[i] - m).collect(), m)
    };
    let (x, mean_x): (Vec<Vec<f64>>, Vec<f64>) = columns.iter().map(|c| center(c)).unzip();
    let (yw, mean_y) = center(y);

    Ok(Prepared {
        problem: Problem::new(x, &yw, bounds),
        kept,
        n_features: features.len(),
        n_confounders: confounders.len(),
        pf,
        mean_x,
        mean_y,
    })
}

fn validate_lambdas(lambdas: &[f64]) -> Result<(), LassoError> {
    let ok = !lambdas.is_empty()
        && lambdas.iter().all(|l| l.is_finite() && *l >= 0.0)
        && lambdas.windows(2).all(|w| w[0] > w[1]);
    if ok {
        Ok(())
    } else {
        Err(LassoError::InvalidLambdas)
    }
}

fn log_grid(lambda_max: f64, ratio: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lambda_max];
    }
    let step = ratio.ln() / (count - 1) as f64;
    (0..count)
        .map(|k| lambda_max * (step * k as f64).exp())
        .collect()
}

struct PathRun {
    lambdas: Vec<f64>,
    /// Standardized coefficients per lambda.
    b: Vec<Vec<f64>>,
    converged: bool,
}

/// Fits a view along `lambdas`, or along the default grid when None.
fn run_path(
    prep: &mut Prepared,
    view: &View,
    lambdas: Option<&[f64]>,
    cfg: &LassoConfig,
) -> PathRun {
    let pf = prep.pf.clone();
    let mut solver = Solver::new(view, &pf);
    let mut converged = solver.fit_unpenalized(&mut prep.problem, cfg.tol, cfg.max_iter);
    let lambdas = match lambdas {
        Some(l) => l.to_vec(),
        None => {
            let lambda_max = solver.lambda_max().max(f64::EPSILON);
            let p = prep.kept.len();
            let ratio = cfg
                .lambda_ratio
                .unwrap_or(if view.n as usize > p { 1e-3 } else { 1e-2 });
            log_grid(lambda_max, ratio, cfg.n_lambda)
        }
    };
    let mut b = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        converged &= solver.solve(&mut prep.problem, lambda, cfg.tol, cfg.max_iter);
        b.push(solver.b.clone());
    }
    if !converged {
        log::warn!(
            "coordinate descent hit max_iter = {} before converging",
            cfg.max_iter
        );
    }
    PathRun {
        lambdas,
        b,
        converged,
    }
}

fn assemble(prep: &Prepared, view: &View, run: PathRun) -> LassoFit {
    let nk = prep.kept.len();
    let mut coefficients = Vec::with_capacity(run.b.len());
    let mut confounder_coefficients = Vec::with_capacity(run.b.len());
    let mut intercepts = Vec::with_capacity(run.b.len());
    for b in &run.b {
        let (coef, a0) = view.unstandardize(b);
        let mut alpha = vec![0.0; prep.n_features];
        for (k, &j) in prep.kept.iter().enumerate() {
            alpha[j] = coef[k];
        }
        let shift: f64 = coef.iter().zip(&prep.mean_x).map(|(a, m)| a * m).sum();
        intercepts.push(prep.mean_y + a0 - shift);
        coefficients.push(alpha);
        confounder_coefficients.push(coef[nk..].to_vec());
    }
    let mut feature_scales = vec![0.0; prep.n_features];
    for (k, &j) in prep.kept.iter().enumerate() {
        feature_scales[j] = view.scale[k];
    }
    let dropped = (0..prep.n_features)
        .filter(|j| !prep.kept.contains(j))
        .collect();
    debug_assert_eq!(confounder_coefficients[0].len(), prep.n_confounders);
    LassoFit {
        lambdas: run.lambdas,
        coefficients,
        confounder_coefficients,
        intercepts,
        cv_mean: Vec::new(),
        cv_se: Vec::new(),
        chosen: None,
        feature_scales,
        dropped,
        converged: run.converged,
    }
}

/// Regularization path on the full data. `penalty_factors` defaults to 1 for
/// every feature; `lambdas` defaults to the log-spaced grid from lambda_max.
pub fn fit_path(
    y: &[f64],
    features: &[&[f64]],
    confounders: &[&[f64]],
    penalty_factors: Option<&[f64]>,
    lambdas: Option<&[f64]>,
    cfg: &LassoConfig,
) -> Result<LassoFit, LassoError> {
    if let Some(l) = lambdas {
        validate_lambdas(l)?;
    }
    let n = y.len();
    let order: Vec<usize> = (0..n).collect();
    let mut prep = prepare(
        y,
        features,
        confounders,
        penalty_factors,
        &order,
        vec![(0, n)],
    )?;
    let view = View::new(&prep.problem, vec![0]);
    let run = run_path(&mut prep, &view, lambdas, cfg);
    Ok(assemble(&prep, &view, run))
}

/// Fold label of every row: shuffle 0..n with the seed, deal round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

fn sample_sd(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt()
}

/// Index chosen by the one-standard-error rule.
pub fn one_se_index(cv_mean: &[f64], cv_se: &[f64]) -> usize {
    let best = (0..cv_mean.len())
        .min_by(|&a, &b| cv_mean[a].total_cmp(&cv_mean[b]).then(a.cmp(&b)))
        .expect("nonempty path");
    let bound = cv_mean[best] + cv_se[best];
    (0..=best)
        .find(|&k| cv_mean[k] <= bound)
        .expect("the minimizer satisfies its own bound")
}

/// K-fold cross-validated path with the one-standard-error choice. The
/// returned path and coefficients are the full-data fit.
pub fn cv_select(
    y: &[f64],
    features: &[&[f64]],
    confounders: &[&[f64]],
    folds: usize,
    seed: u64,
    cfg: &LassoConfig,
) -> Result<LassoFit, LassoError> {
    let n = y.len();
    if folds < 2 || n < 2 * folds {
        return Err(LassoError::InvalidFolds { folds, n });
    }
    let fold = fold_assignment(n, folds, seed);
    let mut order = Vec::with_capacity(n);
    let mut bounds = Vec::with_capacity(folds);
    for k in 0..folds {
        let start = order.len();
        order.extend((0..n).filter(|&i| fold[i] == k));
        bounds.push((start, order.len()));
    }
    let mut prep = prepare(y, features, confounders, None, &order, bounds)?;

    let full_view = View::new(&prep.problem, (0..folds).collect());
    let full = run_path(&mut prep, &full_view, None, cfg);
    let lambdas = full.lambdas.clone();

    let mut mse = vec![vec![0.0; folds]; lambdas.len()];
    let mut converged = full.converged;
    for k in 0..folds {
        let train: Vec<usize> = (0..folds).filter(|&b| b != k).collect();
        let view = View::new(&prep.problem, train);
        let run = run_path(&mut prep, &view, Some(&lambdas), cfg);
        converged &= run.converged;
        let held = prep.problem.block_len(k) as f64;
        for (row, b) in mse.iter_mut().zip(&run.b) {
            let (coef, a0) = view.unstandardize(b);
            row[k] = prep.problem.block_rss(k, a0, &coef) / held;
        }
    }

    let cv_mean: Vec<f64> = mse
        .iter()
        .map(|row| row.iter().sum::<f64>() / folds as f64)
        .collect();
    let cv_se: Vec<f64> = mse
        .iter()
        .map(|row| sample_sd(row) / (folds as f64).sqrt())
        .collect();
    let chosen = one_se_index(&cv_mean, &cv_se);

    let mut fit = assemble(&prep, &full_view, full);
    fit.cv_mean = cv_mean;
    fit.cv_se = cv_se;
    fit.chosen = Some(chosen);
    fit.converged = converged;
    Ok(fit)
}
