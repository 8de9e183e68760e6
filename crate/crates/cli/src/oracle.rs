use std::collections::BTreeSet;

use serde::Serialize;
use siglab::graph::{CausalGraph, NodeId};

/// Oracle sets of one graph, by node label.
#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub exposure: String,
    pub nodes: usize,
    pub edges: usize,
    pub children: Vec<String>,
    pub descendants: Vec<String>,
    pub observed_children: Vec<String>,
    pub observed_descendants: Vec<String>,
    /// Features kept by the univariate screening stage in the limit.
    pub screening_retained: Vec<String>,
    pub screening: Vec<String>,
    pub noscreening: Vec<String>,
}

pub fn oracle_report(g: &CausalGraph) -> OracleReport {
    let labels = |set: &BTreeSet<NodeId>| set.iter().map(|&id| g.label(id).to_string()).collect();
    let sets = g.oracle_sets();
    let screening = g.asymptotic_screening();
    OracleReport {
        exposure: g.label(g.exposure()).to_string(),
        nodes: g.len(),
        edges: g.edges().len(),
        children: labels(&sets.children),
        descendants: labels(&sets.descendants),
        observed_children: labels(&sets.observed_children),
        observed_descendants: labels(&sets.observed_descendants),
        screening_retained: labels(&screening.retained),
        screening: labels(&screening.selected),
        noscreening: labels(&sets.noscreening),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use siglab::scenarios::build_toy;

    #[test]
    fn toy_report_lists_labels() {
        let r = oracle_report(&build_toy());
        assert_eq!(r.exposure, "E");
        assert_eq!(r.screening, ["M1", "M3", "M6", "M11", "M18"]);
        assert_eq!(r.noscreening.len(), 11);
    }

    #[test]
    fn edgeless_graph_has_empty_sets() {
        let text = r#"{"nodes":[
            {"id":0,"label":"E","role":"exposure","observed":true,"noise_variance":1.0},
            {"id":1,"label":"M1","role":"feature","observed":true,"noise_variance":1.0}],
          "edges":[]}"#;
        let r = oracle_report(&CausalGraph::from_json_str(text).unwrap());
        assert!(r.descendants.is_empty());
        assert!(r.screening.is_empty());
        assert!(r.noscreening.is_empty());
    }
}
