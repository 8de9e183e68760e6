//! Large-sample selected sets of both signature strategies, read off the graph.
//!
//! Under the Markov and faithfulness assumptions a population regression
//! coefficient is nonzero exactly when the feature stays d-connected to the
//! exposure given the other regressors, so a variable-selection-consistent
//! estimator converges to the sets computed here.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{CausalGraph, NodeId};

/// Both stages of the screening strategy in the infinite-sample limit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScreeningOracle {
    /// Features kept by the univariate confounder-adjusted tests.
    pub retained: BTreeSet<NodeId>,
    /// Features kept by the multivariate model fitted on `retained`.
    pub selected: BTreeSet<NodeId>,
}

/// Everything the evaluation needs from the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleSets {
    pub children: BTreeSet<NodeId>,
    pub descendants: BTreeSet<NodeId>,
    pub observed_children: BTreeSet<NodeId>,
    pub observed_descendants: BTreeSet<NodeId>,
    pub screening: BTreeSet<NodeId>,
    pub noscreening: BTreeSet<NodeId>,
}

impl CausalGraph {
    /// Members of `candidates` that stay d-connected to the exposure given
    /// `base`; a candidate is dropped from `base` for its own query.
    fn connected_given(&self, candidates: &BTreeSet<NodeId>, base: &[NodeId]) -> BTreeSet<NodeId> {
        let exposure = self.exposure().index();
        let mut mask = vec![false; self.len()];
        for id in base {
            mask[id.index()] = true;
        }
        let mut out = BTreeSet::new();
        for &m in candidates {
            let was = mask[m.index()];
            mask[m.index()] = false;
            if !self.dag().d_separated(exposure, m.index(), &mask) {
                out.insert(m);
            }
            mask[m.index()] = was;
        }
        out
    }

    pub fn asymptotic_screening(&self) -> ScreeningOracle {
        let exposure = self.exposure();
        let confounders = self.confounders();

        let mut mask = vec![false; self.len()];
        for w in &confounders {
            mask[w.index()] = true;
        }
        let reach = self.dag().d_connected(exposure.index(), &mask);
        let retained: BTreeSet<NodeId> = self
            .observed_features()
            .into_iter()
            .filter(|m| reach.reached(m.index()))
            .collect();

        // marginal dependence given W holds exactly for the descendants
        let descendants = self
            .causal_sets(exposure)
            .expect("exposure id is valid")
            .observed_descendants;
        assert_eq!(
            retained, descendants,
            "stage-1 retained set must equal the observed descendants of the exposure"
        );

        let base: Vec<NodeId> = retained.iter().copied().chain(confounders).collect();
        let selected = self.connected_given(&retained, &base);
        ScreeningOracle { retained, selected }
    }

    /// Asymptotic selected set of the screening strategy.
    pub fn asymptotic_screening_set(&self) -> BTreeSet<NodeId> {
        self.asymptotic_screening().selected
    }

    /// Asymptotic selected set of the no-screening strategy: the support of the
    /// population regression of the exposure on all observed features and W.
    pub fn asymptotic_noscreening_set(&self) -> BTreeSet<NodeId> {
        let features: BTreeSet<NodeId> = self.observed_features().into_iter().collect();
        let base: Vec<NodeId> = features.iter().copied().chain(self.confounders()).collect();
        self.connected_given(&features, &base)
    }

    pub fn oracle_sets(&self) -> OracleSets {
        let sets = self
            .causal_sets(self.exposure())
            .expect("exposure id is valid");
        OracleSets {
            children: sets.children,
            descendants: sets.descendants,
            observed_children: sets.observed_children,
            observed_descendants: sets.observed_descendants,
            screening: self.asymptotic_screening_set(),
            noscreening: self.asymptotic_noscreening_set(),
        }
    }
}
