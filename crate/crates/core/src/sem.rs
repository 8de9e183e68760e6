//! Linear-Gaussian structural equation model implied by a [`CausalGraph`].
//!
//! Every node equals the weighted sum of its parents plus independent
//! Gaussian noise whose *variance* is the node's `noise_variance`.
//!
//! Sampling uses one ChaCha8 stream per dataset, seeded from a 64-bit seed.
//! Nodes are generated column by column in topological order, each column
//! consuming `n` standard-normal draws, so a dataset is bit-reproducible
//! across platforms for a fixed (graph, n, seed).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::graph::{CausalGraph, GraphError, NodeId, NodeRole};

#[derive(Debug, Error)]
pub enum SemError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("regression needs at least one target")]
    EmptyTargets,
    #[error("target set contains the exposure or a duplicate node")]
    InvalidTargets,
    #[error("covariance of the targets is singular (condition number {condition:.3e})")]
    SingularCovariance { condition: f64 },
    #[error("dataset column {0} has length different from n")]
    RaggedColumn(usize),
    #[error("dataset column {0} contains NaN or infinite values")]
    NonFinite(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Column metadata of a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub id: NodeId,
    pub role: NodeRole,
    pub label: String,
}

/// Column-major numeric table with node roles attached to each column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    columns: Vec<Column>,
    values: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, values: Vec<Vec<f64>>) -> Result<Self, SemError> {
        assert_eq!(columns.len(), values.len(), "one value vector per column");
        let n = values.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(SemError::EmptySample);
        }
        for (j, col) in values.iter().enumerate() {
            if col.len() != n {
                return Err(SemError::RaggedColumn(j));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(SemError::NonFinite(j));
            }
        }
        Ok(Dataset { n, columns, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn values(&self, position: usize) -> &[f64] {
        &self.values[position]
    }

    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.columns.iter().position(|c| c.id == id)
    }

    pub fn column(&self, id: NodeId) -> Option<&[f64]> {
        self.position(id).map(|j| self.values[j].as_slice())
    }

    fn ids_with_role(&self, role: NodeRole) -> Vec<NodeId> {
        self.columns
            .iter()
            .filter(|c| c.role == role)
            .map(|c| c.id)
            .collect()
    }

    pub fn exposure(&self) -> Option<NodeId> {
        self.columns
            .iter()
            .find(|c| c.role == NodeRole::Exposure)
            .map(|c| c.id)
    }

    pub fn features(&self) -> Vec<NodeId> {
        self.ids_with_role(NodeRole::Feature)
    }

    pub fn confounders(&self) -> Vec<NodeId> {
        self.ids_with_role(NodeRole::Confounder)
    }

    pub fn label(&self, id: NodeId) -> Option<&str> {
        self.columns
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.label.as_str())
    }

    /// Applies `f` to every value of one column.
    pub fn map_column(&mut self, id: NodeId, f: impl Fn(f64) -> f64) {
        if let Some(j) = self.position(id) {
            for v in &mut self.values[j] {
                *v = f(*v);
            }
        }
    }

    /// CSV with a header of node labels and one row per observation. Values
    /// use exponent notation with 17 significant digits, independent of locale.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SemError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.label.as_str()))?;
        let mut row = Vec::with_capacity(self.columns.len());
        for i in 0..self.n {
            row.clear();
            row.extend(self.values.iter().map(|col| format!("{:.16e}", col[i])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `n` observations from the SEM of `g`.
///
/// Columns follow node-id order and are restricted to observed nodes unless
/// `include_unobserved` is set.
pub fn sample(
    g: &CausalGraph,
    n: usize,
    seed: u64,
    include_unobserved: bool,
) -> Result<Dataset, SemError> {
    if n == 0 {
        return Err(SemError::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); g.len()];
    for &id in g.topological_order() {
        let sd = g.node(id).noise_variance.sqrt();
        let mut col: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        for &(parent, weight) in g.weighted_parents(id) {
            let pv = &values[parent.index()];
            for (x, &p) in col.iter_mut().zip(pv) {
                *x += weight * p;
            }
        }
        values[id.index()] = col;
    }

    let mut columns = Vec::new();
    let mut kept = Vec::new();
    for (node, col) in g.nodes().iter().zip(values) {
        if include_unobserved || node.observed {
            columns.push(Column {
                id: node.id,
                role: node.role,
                label: node.label.clone(),
            });
            kept.push(col);
        }
    }
    Dataset::new(columns, kept)
}

/// Exact covariance of every node in the SEM, in node-id order.
#[derive(Debug, Clone)]
pub struct PopulationMoments {
    pub sigma: DMatrix<f64>,
    pub node_order: Vec<NodeId>,
}

/// Sigma = (I - B)^-1 Psi (I - B)^-T, evaluated by propagating covariances in
/// topological order: Cov(X_i, X_j) = sum_p w_ip Cov(X_p, X_j) for every
/// already-processed j, then Var(X_i) = sum_p w_ip Cov(X_p, X_i) + psi_i.
pub fn implied_covariance(g: &CausalGraph) -> PopulationMoments {
    let m = g.len();
    let mut sigma = DMatrix::<f64>::zeros(m, m);
    let mut done: Vec<usize> = Vec::with_capacity(m);
    for &id in g.topological_order() {
        let i = id.index();
        let parents = g.weighted_parents(id);
        for &j in &done {
            let cov: f64 = parents
                .iter()
                .map(|&(p, w)| w * sigma[(p.index(), j)])
                .sum();
            sigma[(i, j)] = cov;
            sigma[(j, i)] = cov;
        }
        let var: f64 = parents
            .iter()
            .map(|&(p, w)| w * sigma[(p.index(), i)])
            .sum::<f64>()
            + g.node(id).noise_variance;
        sigma[(i, i)] = var;
        done.push(i);
    }
    PopulationMoments {
        sigma,
        node_order: (0..m).map(NodeId).collect(),
    }
}

/// Condition numbers above this make a target covariance singular.
pub const MAX_CONDITION: f64 = 1e12;

impl PopulationMoments {
    pub fn covariance(&self, a: NodeId, b: NodeId) -> f64 {
        self.sigma[(a.index(), b.index())]
    }

    /// Population coefficients of the regression of `response` on `targets`
    /// (all variables are centered, so no intercept): Sigma_S^-1 sigma_{S,response}.
    pub fn regression(&self, response: NodeId, targets: &[NodeId]) -> Result<Vec<f64>, SemError> {
        if targets.is_empty() {
            return Err(SemError::EmptyTargets);
        }
        let mut seen = vec![false; self.sigma.nrows()];
        seen[response.index()] = true;
        for t in targets {
            if t.index() >= seen.len() {
                return Err(GraphError::UnknownNode(t.index()).into());
            }
            if std::mem::replace(&mut seen[t.index()], true) {
                return Err(SemError::InvalidTargets);
            }
        }
        let k = targets.len();
        let sub = DMatrix::from_fn(k, k, |a, b| {
            self.sigma[(targets[a].index(), targets[b].index())]
        });
        let rhs = DVector::from_fn(k, |a, _| self.sigma[(targets[a].index(), response.index())]);

        let eig = sub.clone().symmetric_eigenvalues();
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(SemError::SingularCovariance { condition });
        }
        let chol = sub
            .cholesky()
            .ok_or(SemError::SingularCovariance { condition })?;
        Ok(chol.solve(&rhs).iter().copied().collect())
    }
}

/// Population regression of the exposure on `targets`.
pub fn population_regression(g: &CausalGraph, targets: &[NodeId]) -> Result<Vec<f64>, SemError> {
    implied_covariance(g).regression(g.exposure(), targets)
}
