//! JSON graph files:
//! `{"nodes":[{"id":0,"label":"E","role":"exposure","observed":true,"noise_variance":0.5}, ...],
//!   "edges":[{"from":3,"to":0,"weight":0.5}, ...]}`

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CausalGraph, Edge, GraphError, Node};

/// On-disk layout of a graph; validated on conversion into [`CausalGraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl CausalGraph {
    pub fn from_json_str(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text)?;
        CausalGraph::new(file.nodes, file.edges)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            nodes: self.nodes().to_vec(),
            edges: self.edges().to_vec(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("graph serializes")
    }
}
