//! Graph builders for the toy example and the three high-dimensional scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{CausalGraph, GraphBuilder, NodeId, NodeRole};

use super::{ScenarioConfig, ScenarioError, ScenarioKind};

/// Edges of the 19-feature toy block, as (parent, child) labels local to the
/// block. `E` and `W1` are shared when blocks are repeated.
const TOY_EDGES: [(&str, &str); 23] = [
    ("E", "M1"),
    ("E", "M6"),
    ("E", "M11"),
    ("E", "M17"),
    ("M1", "M3"),
    ("M3", "M4"),
    ("M6", "M8"),
    ("M11", "M12"),
    ("M12", "M13"),
    ("M17", "M18"),
    ("M3", "M6"),
    ("M2", "M1"),
    ("M7", "M6"),
    ("M19", "M17"),
    ("nu1", "M6"),
    ("nu1", "M9"),
    ("nu2", "M11"),
    ("nu2", "M14"),
    ("M15", "M14"),
    ("M9", "M10"),
    ("M5", "M4"),
    ("W1", "M16"),
    ("W1", "M11"),
];

/// Features inside a toy block that are never observed.
const TOY_UNOBSERVED: [usize; 1] = [17];

const TOY_WEIGHT: f64 = 0.5;
const TOY_PARENTED_NOISE: f64 = 0.5;

/// Adds one toy block to `b`, wiring it to the shared exposure and confounder.
/// Returns the feature ids of the block in M1..M19 order.
fn add_toy_block(
    b: &mut GraphBuilder,
    exposure: NodeId,
    confounder: NodeId,
    feature_offset: usize,
    latent_suffix: &str,
) -> Vec<NodeId> {
    let features: Vec<NodeId> = (1..=19)
        .map(|k| {
            let observed = !TOY_UNOBSERVED.contains(&k);
            b.node(
                format!("M{}", feature_offset + k),
                NodeRole::Feature,
                observed,
                1.0,
            )
        })
        .collect();
    let nu1 = b.node(
        format!("nu1{latent_suffix}"),
        NodeRole::LatentCause,
        false,
        1.0,
    );
    let nu2 = b.node(
        format!("nu2{latent_suffix}"),
        NodeRole::LatentCause,
        false,
        1.0,
    );

    let resolve = |label: &str| -> NodeId {
        match label {
            "E" => exposure,
            "W1" => confounder,
            "nu1" => nu1,
            "nu2" => nu2,
            m => features[m[1..].parse::<usize>().expect("feature label") - 1],
        }
    };
    let mut parented = Vec::new();
    for (from, to) in TOY_EDGES {
        let t = resolve(to);
        b.edge(resolve(from), t, TOY_WEIGHT);
        parented.push(t);
    }
    for id in parented {
        b.set_noise_variance(id, TOY_PARENTED_NOISE);
    }
    features
}

/// The 23-node toy DAG. Ids: E, W1, M1..M19, nu1, nu2.
///
/// Parentless nodes have unit noise variance; every edge has weight 1/2 and
/// every node with parents has noise variance 1/2. nu1, nu2 and M17 are
/// unobserved.
pub fn build_toy() -> CausalGraph {
    let mut b = GraphBuilder::new();
    let e = b.node("E", NodeRole::Exposure, true, TOY_PARENTED_NOISE);
    let w1 = b.node("W1", NodeRole::Confounder, true, 1.0);
    b.edge(w1, e, TOY_WEIGHT);
    add_toy_block(&mut b, e, w1, 0, "");
    b.build().expect("toy graph is valid")
}

/// Time-expanded DAG for two features that influence each other: E, the
/// unobserved time-0 features M1_t0..M3_t0 and the observed M1_t1..M3_t1.
pub fn build_time_expanded() -> CausalGraph {
    let mut b = GraphBuilder::new();
    let e = b.node("E", NodeRole::Exposure, true, 1.0);
    let m01 = b.node("M1_t0", NodeRole::Feature, false, 1.0);
    let m02 = b.node("M2_t0", NodeRole::Feature, false, 1.0);
    let m03 = b.node("M3_t0", NodeRole::Feature, false, 1.0);
    let m11 = b.node("M1_t1", NodeRole::Feature, true, 1.0);
    let m12 = b.node("M2_t1", NodeRole::Feature, true, 1.0);
    let m13 = b.node("M3_t1", NodeRole::Feature, true, 1.0);
    for (from, to) in [
        (e, m01),
        (m01, m11),
        (m03, m01),
        (m01, m02),
        (m01, m12),
        (m13, m11),
        (m02, m11),
        (m02, m12),
        (m11, m12),
    ] {
        b.edge(from, to, 0.5);
    }
    b.build().expect("time-expanded graph is valid")
}

/// Scenario (i): E -> M1..M_pc (weight beta), every child -> each of
/// M_{pc+1}..M_{2pc} with weights drawn from U[0.005, 0.01], remaining
/// features independent noise. All noise variances are 1; no confounders.
pub fn build_scenario1(
    cfg: &ScenarioConfig,
    graph_seed: u64,
) -> Result<CausalGraph, ScenarioError> {
    cfg.validate()?;
    let pc = cfg.p_child;
    let mut rng = ChaCha8Rng::seed_from_u64(graph_seed);
    let mut b = GraphBuilder::new();
    let e = b.node("E", NodeRole::Exposure, true, 1.0);
    let features: Vec<NodeId> = (1..=cfg.p)
        .map(|j| b.node(format!("M{j}"), NodeRole::Feature, true, 1.0))
        .collect();
    for &child in &features[..pc] {
        b.edge(e, child, cfg.beta);
    }
    for &second in &features[pc..2 * pc] {
        for &child in &features[..pc] {
            b.edge(child, second, rng.random_range(0.005..=0.01));
        }
    }
    Ok(b.build()?)
}

/// Index (1-based) of the mother shared by step-brother `j` (1-based feature
/// index, `p_child < j <= p_child * (1 + D d)`).
pub fn step_brother_mother(j: usize, p_child: usize, step_brothers: usize) -> usize {
    (j - p_child - 1) / step_brothers + 1
}

/// Scenario (ii): children share latent "mothers" with their step-brothers.
///
/// Node ids: E, M1..M_p, nu0..nu_{D pc}. Child j receives beta from E,
/// delta_g from nu0 and delta from its D mothers nu_{(j-1)D+1..jD}; step-brother
/// j receives delta from mother k_j. Structured features have noise variance
/// 0.25, the rest 1. Zero-weight edges are omitted so the DAG stays faithful.
pub fn build_scenario2(cfg: &ScenarioConfig) -> Result<CausalGraph, ScenarioError> {
    cfg.validate()?;
    let pc = cfg.p_child;
    let (mothers, d) = (cfg.mothers, cfg.step_brothers);
    let structured = pc * (1 + mothers * d);

    let mut b = GraphBuilder::new();
    let e = b.node("E", NodeRole::Exposure, true, 1.0);
    let features: Vec<NodeId> = (1..=cfg.p)
        .map(|j| {
            let noise = if j <= structured { 0.25 } else { 1.0 };
            b.node(format!("M{j}"), NodeRole::Feature, true, noise)
        })
        .collect();
    let latents: Vec<NodeId> = (0..=mothers * pc)
        .map(|k| b.node(format!("nu{k}"), NodeRole::LatentCause, false, 1.0))
        .collect();

    for j in 1..=pc {
        let child = features[j - 1];
        b.edge(e, child, cfg.beta);
        if cfg.delta_g != 0.0 {
            b.edge(latents[0], child, cfg.delta_g);
        }
        for &mother in &latents[((j - 1) * mothers + 1)..=(j * mothers)] {
            b.edge(mother, child, cfg.delta);
        }
    }
    for j in (pc + 1)..=structured {
        let k = step_brother_mother(j, pc, d);
        b.edge(latents[k], features[j - 1], cfg.delta);
    }
    Ok(b.build()?)
}

/// Scenario (iii): `blocks` copies of the toy feature block sharing E and W1.
///
/// Node ids: E, W1, then per block the 19 features M_{19(b-1)+1..19b}
/// followed by that block's two latent causes. W1 -> E has weight beta and E
/// has noise variance 1/2; within blocks everything follows the toy graph.
pub fn build_scenario3(cfg: &ScenarioConfig) -> Result<CausalGraph, ScenarioError> {
    cfg.validate()?;
    let mut b = GraphBuilder::new();
    let e = b.node("E", NodeRole::Exposure, true, 0.5);
    let w1 = b.node("W1", NodeRole::Confounder, true, 1.0);
    b.edge(w1, e, cfg.beta);
    for block in 1..=cfg.blocks {
        add_toy_block(&mut b, e, w1, 19 * (block - 1), &format!("_b{block}"));
    }
    Ok(b.build()?)
}

/// Builds the graph for one replica. Only scenario (i) consumes the seed.
pub fn build_graph(cfg: &ScenarioConfig, graph_seed: u64) -> Result<CausalGraph, ScenarioError> {
    match cfg.kind {
        ScenarioKind::Toy => Ok(build_toy()),
        ScenarioKind::S1 => build_scenario1(cfg, graph_seed),
        ScenarioKind::S2 => build_scenario2(cfg),
        ScenarioKind::S3 => build_scenario3(cfg),
    }
}
