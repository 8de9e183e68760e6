mod common;

use common::covariance_by_inversion;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use siglab::graph::random::random_causal_graph;
use siglab::graph::{CausalGraph, NodeId};
use siglab::scenarios::{
    build_scenario2, build_toy, step_brother_mother, ScenarioConfig, ScenarioKind,
};
use siglab::sem::{implied_covariance, population_regression, sample};

#[test]
fn implied_covariance_matches_matrix_inversion() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut graphs: Vec<CausalGraph> = (0..200)
        .map(|i| random_causal_graph(3 + i % 10, &mut rng))
        .collect();
    graphs.push(build_toy());
    for g in graphs {
        let fast = implied_covariance(&g).sigma;
        let slow = covariance_by_inversion(&g);
        let err = (&fast - &slow).abs().max();
        assert!(err < 1e-10, "max error {err}");
        assert_eq!(fast, fast.transpose());
        let min_eig = fast.symmetric_eigen().eigenvalues.min();
        assert!(min_eig >= -1e-10, "smallest eigenvalue {min_eig}");
    }
}

#[test]
fn sample_covariance_converges_on_toy() {
    let g = build_toy();
    let sigma = implied_covariance(&g).sigma;
    let n = 40_000;
    for seed in [1, 2, 3] {
        let data = sample(&g, n, seed, true).unwrap();
        let m = data.columns().len();
        assert_eq!(m, g.len());
        let cols: Vec<Vec<f64>> = (0..m).map(|k| data.values(k).to_vec()).collect();
        let means: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().sum::<f64>() / n as f64)
            .collect();
        let mut worst: f64 = 0.0;
        for a in 0..m {
            for b in a..m {
                let cov = cols[a]
                    .iter()
                    .zip(&cols[b])
                    .map(|(x, y)| (x - means[a]) * (y - means[b]))
                    .sum::<f64>()
                    / (n - 1) as f64;
                let ia = data.columns()[a].id.index();
                let ib = data.columns()[b].id.index();
                worst = worst.max((cov - sigma[(ia, ib)]).abs());
            }
        }
        assert!(worst <= 5.0 / (n as f64).sqrt(), "seed {seed}: {worst}");
    }
}

#[test]
fn same_seed_same_sample() {
    let g = build_toy();
    let a = sample(&g, 100, 9, false).unwrap();
    let b = sample(&g, 100, 9, false).unwrap();
    let c = sample(&g, 100, 10, false).unwrap();
    assert_eq!(a.values(0), b.values(0));
    assert_ne!(a.values(0), c.values(0));
}

#[test]
fn population_support_is_the_noscreening_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut graphs: Vec<CausalGraph> = (0..300)
        .map(|i| random_causal_graph(4 + i % 9, &mut rng))
        .collect();
    graphs.push(build_toy());
    let mut checked = 0;
    for g in graphs {
        let features = g.observed_features();
        if features.is_empty() {
            continue;
        }
        let targets: Vec<NodeId> = features.iter().copied().chain(g.confounders()).collect();
        let Ok(coef) = population_regression(&g, &targets) else {
            continue;
        };
        let support = g.asymptotic_noscreening_set();
        for (k, m) in features.iter().enumerate() {
            if support.contains(m) {
                assert!(
                    coef[k].abs() > 1e-10,
                    "{} should be in the support",
                    g.label(*m)
                );
            } else {
                assert!(coef[k].abs() <= 1e-10, "{} = {}", g.label(*m), coef[k]);
            }
        }
        checked += 1;
    }
    assert!(checked > 250);
}

fn amplification_graph(sd_reading: bool) -> CausalGraph {
    let cfg = ScenarioConfig {
        kind: ScenarioKind::S2,
        p_child: 5,
        mothers: 7,
        step_brothers: 25,
        beta: 0.2,
        delta_g: 0.0,
        ..ScenarioConfig::default()
    };
    let g = build_scenario2(&cfg).unwrap();
    if !sd_reading {
        return g;
    }
    // read the 0.25 noise parameter as a standard deviation
    let mut file = g.to_file();
    for node in &mut file.nodes {
        if node.noise_variance == 0.25 {
            node.noise_variance = 0.0625;
        }
    }
    CausalGraph::new(file.nodes, file.edges).unwrap()
}

/// Children only; children plus the first step-brother through each child's
/// first mother; every feature.
fn nested_targets(g: &CausalGraph) -> [Vec<NodeId>; 3] {
    let m = |k: usize| g.find(&format!("M{k}")).unwrap();
    let (pc, mothers, d) = (5, 7, 25);
    let children: Vec<NodeId> = (1..=pc).map(m).collect();
    let mut with_brothers = children.clone();
    for i in 1..=pc {
        let j = pc + (i - 1) * mothers * d + 1;
        assert_eq!(step_brother_mother(j, pc, d), (i - 1) * mothers + 1);
        with_brothers.push(m(j));
    }
    let all: Vec<NodeId> = (1..=1000).map(m).collect();
    [children, with_brothers, all]
}

/// Coefficient of the first target, solved directly from the
/// inverted-matrix covariance.
fn oracle_first_coefficient(g: &CausalGraph, targets: &[NodeId]) -> f64 {
    let sigma = covariance_by_inversion(g);
    let k = targets.len();
    let a = DMatrix::from_fn(k, k, |r, c| sigma[(targets[r].index(), targets[c].index())]);
    let b = DVector::from_fn(k, |r, _| sigma[(targets[r].index(), g.exposure().index())]);
    a.lu().solve(&b).unwrap()[0]
}

/// Child coefficients with 0.25 read as a variance, then as a standard deviation.
const AMPLIFICATION_GOLDEN: [[f64; 3]; 2] = [
    [
        0.090_909_090_909_090_9,
        0.096_385_542_168_674_7,
        0.386_617_100_371_744,
    ],
    [
        0.099_378_881_987_577_6,
        0.110_344_827_586_206_9,
        0.714_727_996_461_726,
    ],
];

#[test]
fn amplification_across_nested_target_sets() {
    for (reading, sd_reading) in [false, true].into_iter().enumerate() {
        let g = amplification_graph(sd_reading);
        let sets = nested_targets(&g);
        let ours: Vec<f64> = sets
            .iter()
            .map(|t| population_regression(&g, t).unwrap()[0])
            .collect();
        let oracle: Vec<f64> = sets
            .iter()
            .map(|t| oracle_first_coefficient(&g, t))
            .collect();
        for ((a, b), golden) in ours.iter().zip(&oracle).zip(AMPLIFICATION_GOLDEN[reading]) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            assert!((a - golden).abs() < 1e-9, "{a} vs golden {golden}");
        }
        assert!(ours[0].abs() < ours[1].abs() && ours[1].abs() < ours[2].abs());
    }
}
