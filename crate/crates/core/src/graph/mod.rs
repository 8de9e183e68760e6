//! Causal DAG over the exposure, molecular features, observed confounders and
//! latent causes. The same value doubles as a linear-Gaussian structural
//! equation model: every edge carries a weight and every node a noise variance.

mod dag;
mod io;
mod oracle;
pub mod random;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dag::{Dag, Reachability};
pub use io::GraphFile;
pub use oracle::{OracleSets, ScreeningOracle};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("directed cycle through nodes {nodes:?}")]
    CycleDetected { nodes: Vec<usize> },
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("node ids must be dense 0..{expected}, found id {found} at position {position}")]
    NonDenseIds {
        expected: usize,
        found: usize,
        position: usize,
    },
    #[error("duplicate edge")]
    DuplicateEdge,
    #[error("graph must contain exactly one exposure node, found {0}")]
    ExposureCount(usize),
    #[error("only confounders may point into the exposure, found edge from `{0}`")]
    IllegalExposureParent(String),
    #[error("node `{label}` ({role}) must have observed = {expected}")]
    ObservationMismatch {
        label: String,
        role: NodeRole,
        expected: bool,
    },
    #[error("node `{label}` has non-positive or non-finite noise variance {value}")]
    NoiseVariance { label: String, value: f64 },
    #[error("edge {from} -> {to} has non-finite weight")]
    EdgeWeight { from: usize, to: usize },
    #[error("invalid d-separation query: {0}")]
    InvalidQuery(String),
    #[error("graph file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense index of a node inside its graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Exposure,
    Feature,
    Confounder,
    #[serde(rename = "latent")]
    LatentCause,
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeRole::Exposure => "exposure",
            NodeRole::Feature => "feature",
            NodeRole::Confounder => "confounder",
            NodeRole::LatentCause => "latent",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
    pub role: NodeRole,
    pub observed: bool,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
}

/// Children and descendants of a source node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CausalSets {
    pub children: BTreeSet<NodeId>,
    pub descendants: BTreeSet<NodeId>,
    /// Children that are observed features.
    pub observed_children: BTreeSet<NodeId>,
    /// Descendants that are observed features.
    pub observed_descendants: BTreeSet<NodeId>,
}

/// A validated causal DAG. Construction checks every structural invariant,
/// so all query methods can assume a well-formed graph.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    dag: Dag,
    /// (parent, weight) per node, sorted by parent id.
    weighted_parents: Vec<Vec<(NodeId, f64)>>,
    topo: Vec<NodeId>,
    exposure: NodeId,
}

impl CausalGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let n = nodes.len();
        for (position, node) in nodes.iter().enumerate() {
            if node.id.0 != position {
                return Err(GraphError::NonDenseIds {
                    expected: n,
                    found: node.id.0,
                    position,
                });
            }
            if !(node.noise_variance.is_finite() && node.noise_variance > 0.0) {
                return Err(GraphError::NoiseVariance {
                    label: node.label.clone(),
                    value: node.noise_variance,
                });
            }
            let expected = match node.role {
                NodeRole::Exposure | NodeRole::Confounder => Some(true),
                NodeRole::LatentCause => Some(false),
                NodeRole::Feature => None,
            };
            if let Some(expected) = expected {
                if node.observed != expected {
                    return Err(GraphError::ObservationMismatch {
                        label: node.label.clone(),
                        role: node.role,
                        expected,
                    });
                }
            }
        }

        let exposures: Vec<NodeId> = nodes
            .iter()
            .filter(|v| v.role == NodeRole::Exposure)
            .map(|v| v.id)
            .collect();
        if exposures.len() != 1 {
            return Err(GraphError::ExposureCount(exposures.len()));
        }
        let exposure = exposures[0];

        let mut pairs = Vec::with_capacity(edges.len());
        for e in &edges {
            if e.from.0 >= n {
                return Err(GraphError::UnknownNode(e.from.0));
            }
            if e.to.0 >= n {
                return Err(GraphError::UnknownNode(e.to.0));
            }
            if !e.weight.is_finite() {
                return Err(GraphError::EdgeWeight {
                    from: e.from.0,
                    to: e.to.0,
                });
            }
            if e.to == exposure && nodes[e.from.0].role != NodeRole::Confounder {
                return Err(GraphError::IllegalExposureParent(
                    nodes[e.from.0].label.clone(),
                ));
            }
            pairs.push((e.from.0, e.to.0));
        }
        let dag = Dag::new(n, &pairs)?;
        let topo = dag.topological_order()?.into_iter().map(NodeId).collect();

        let mut weighted_parents = vec![Vec::new(); n];
        for e in &edges {
            weighted_parents[e.to.0].push((e.from, e.weight));
        }
        for list in &mut weighted_parents {
            list.sort_by_key(|&(p, _)| p);
        }

        Ok(CausalGraph {
            nodes,
            edges,
            dag,
            weighted_parents,
            topo,
            exposure,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn exposure(&self) -> NodeId {
        self.exposure
    }

    pub fn weighted_parents(&self, id: NodeId) -> &[(NodeId, f64)] {
        &self.weighted_parents[id.0]
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.dag.children(id.0).iter().map(|&c| NodeId(c))
    }

    pub fn check(&self, id: NodeId) -> Result<(), GraphError> {
        if id.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(id.0))
        }
    }

    /// Parent-before-child order, ties broken by ascending id.
    pub fn topological_order(&self) -> &[NodeId] {
        &self.topo
    }

    pub fn find(&self, label: &str) -> Option<NodeId> {
        self.nodes.iter().find(|v| v.label == label).map(|v| v.id)
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.nodes[id.0].label
    }

    pub fn ids_with_role(&self, role: NodeRole) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|v| v.role == role)
            .map(|v| v.id)
            .collect()
    }

    pub fn observed_features(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|v| v.role == NodeRole::Feature && v.observed)
            .map(|v| v.id)
            .collect()
    }

    pub fn confounders(&self) -> Vec<NodeId> {
        self.ids_with_role(NodeRole::Confounder)
    }

    fn is_observed_feature(&self, id: NodeId) -> bool {
        let v = &self.nodes[id.0];
        v.role == NodeRole::Feature && v.observed
    }

    pub fn causal_sets(&self, source: NodeId) -> Result<CausalSets, GraphError> {
        self.check(source)?;
        let desc = self.dag.descendants(source.0);
        let mut sets = CausalSets::default();
        for c in self.children(source) {
            sets.children.insert(c);
            if self.is_observed_feature(c) {
                sets.observed_children.insert(c);
            }
        }
        for (i, _) in desc.iter().enumerate().filter(|(_, &d)| d) {
            let id = NodeId(i);
            sets.descendants.insert(id);
            if self.is_observed_feature(id) {
                sets.observed_descendants.insert(id);
            }
        }
        Ok(sets)
    }

    fn cond_mask(&self, cond: &[NodeId]) -> Result<Vec<bool>, GraphError> {
        let mut mask = vec![false; self.len()];
        for &c in cond {
            self.check(c)?;
            mask[c.0] = true;
        }
        Ok(mask)
    }

    /// Whether `a` and `b` are d-separated given `cond`.
    pub fn d_separated(&self, a: NodeId, b: NodeId, cond: &[NodeId]) -> Result<bool, GraphError> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(GraphError::InvalidQuery(format!(
                "endpoints coincide ({a})"
            )));
        }
        let mask = self.cond_mask(cond)?;
        if mask[a.0] || mask[b.0] {
            return Err(GraphError::InvalidQuery(
                "an endpoint is in the conditioning set".into(),
            ));
        }
        Ok(self.dag.d_separated(a.0, b.0, &mask))
    }

    /// Single-source d-connection search given `cond`.
    pub fn d_connected_from(
        &self,
        source: NodeId,
        cond: &[NodeId],
    ) -> Result<Reachability, GraphError> {
        self.check(source)?;
        let mask = self.cond_mask(cond)?;
        if mask[source.0] {
            return Err(GraphError::InvalidQuery(
                "source is in the conditioning set".into(),
            ));
        }
        Ok(self.dag.d_connected(source.0, &mask))
    }
}

/// Incremental construction helper used by the scenario builders and tests.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(
        &mut self,
        label: impl Into<String>,
        role: NodeRole,
        observed: bool,
        noise_variance: f64,
    ) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            id,
            label: label.into(),
            role,
            observed,
            noise_variance,
        });
        id
    }

    pub fn edge(&mut self, from: NodeId, to: NodeId, weight: f64) -> &mut Self {
        self.edges.push(Edge { from, to, weight });
        self
    }

    pub fn set_noise_variance(&mut self, id: NodeId, value: f64) {
        self.nodes[id.0].noise_variance = value;
    }

    pub fn build(self) -> Result<CausalGraph, GraphError> {
        CausalGraph::new(self.nodes, self.edges)
    }
}
