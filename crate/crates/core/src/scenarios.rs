//! Ready-made scenarios for tests, sweeps and the acceptance suite.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{ExperimentParams, NodeSpec, Position, ProtocolConfig, ProtocolKind, Role, Scenario};
use crate::simkit::run_rng;

pub fn config(n: u32) -> ProtocolConfig {
    ProtocolConfig { n, ..ProtocolConfig::default() }
}

/// Verifier 1 at the origin, prover 2 at `(distance, 0)`.
pub fn one_way(distance: f64, cfg: ProtocolConfig, seed: u64) -> Scenario {
    Scenario {
        nodes: vec![
            NodeSpec::new(1, Position::new(0.0, 0.0), Role::ActiveVerifier),
            NodeSpec::new(2, Position::new(distance, 0.0), Role::Prover),
        ],
        protocol: ProtocolKind::OneWayDb,
        config: cfg,
        experiment: ExperimentParams::default(),
        rng_seed: seed,
    }
}

/// Peers with ids 1.. at the given positions.
pub fn peers(protocol: ProtocolKind, positions: &[Position], cfg: ProtocolConfig, seed: u64) -> Scenario {
    Scenario {
        nodes: positions.iter().enumerate().map(|(i, &p)| NodeSpec::new(i as u32 + 1, p, Role::Peer)).collect(),
        protocol,
        config: cfg,
        experiment: ExperimentParams::default(),
        rng_seed: seed,
    }
}

/// `count` distinct points in a `side`-meter square, drawn from the seed.
pub fn random_positions(count: usize, side: f64, seed: u64) -> Vec<Position> {
    let mut rng = run_rng(seed, "placement");
    random_positions_with(count, side, &mut rng)
}

pub fn random_positions_with(count: usize, side: f64, rng: &mut ChaCha8Rng) -> Vec<Position> {
    let mut out: Vec<Position> = Vec::with_capacity(count);
    while out.len() < count {
        let p = Position::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
        if out.iter().all(|q| q.distance(&p) > 1.0) {
            out.push(p);
        }
    }
    out
}

/// Square of side 100 m, corners in counter-clockwise order.
pub fn square4() -> Vec<Position> {
    vec![Position::new(0.0, 0.0), Position::new(100.0, 0.0), Position::new(100.0, 100.0), Position::new(0.0, 100.0)]
}

/// `n_verifiers` verifiers (ids 1..=N) on a line at y=0 and `n_provers`
/// provers (ids N+1..) on a line at y=`gap`, spaced 10 m apart.
pub fn mpnv(
    n_verifiers: usize,
    n_provers: usize,
    cfg: ProtocolConfig,
    experiment: ExperimentParams,
    seed: u64,
) -> Scenario {
    let mut nodes = Vec::new();
    for i in 0..n_verifiers {
        nodes.push(NodeSpec::new(i as u32 + 1, Position::new(10.0 * i as f64, 0.0), Role::ActiveVerifier));
    }
    for j in 0..n_provers {
        let id = (n_verifiers + j) as u32 + 1;
        nodes.push(NodeSpec::new(id, Position::new(10.0 * j as f64 + 5.0, 150.0), Role::Prover));
    }
    Scenario { nodes, protocol: ProtocolKind::Mpnv, config: cfg, experiment, rng_seed: seed }
}

/// Two groups of peers: ids 1..=N at y=0 and N+1.. at y=150.
pub fn ntom(
    protocol: ProtocolKind,
    n: usize,
    m: usize,
    cfg: ProtocolConfig,
    mut experiment: ExperimentParams,
    seed: u64,
) -> Scenario {
    let mut nodes = Vec::new();
    for i in 0..n {
        nodes.push(NodeSpec::new(i as u32 + 1, Position::new(10.0 * i as f64, 0.0), Role::Peer));
    }
    for j in 0..m {
        nodes.push(NodeSpec::new((n + j) as u32 + 1, Position::new(10.0 * j as f64 + 5.0, 150.0), Role::Peer));
    }
    experiment.big_n = Some(n as u32);
    experiment.big_m = Some(m as u32);
    Scenario { nodes, protocol, config: cfg, experiment, rng_seed: seed }
}

/// Verifier 1 at `v`, honest prover 2 at `p`, and relay 3 at `a` posing as 2.
pub fn relay(v: Position, p: Position, a: Position, cfg: ProtocolConfig, seed: u64) -> Scenario {
    Scenario {
        nodes: vec![
            NodeSpec::new(1, v, Role::ActiveVerifier),
            NodeSpec::new(2, p, Role::Prover),
            NodeSpec::new(3, a, Role::Prover)
                .with_policy(crate::threat::AdversaryPolicy::Relay { victim: crate::model::NodeId(2) }),
        ],
        protocol: ProtocolKind::OneWayDb,
        config: cfg,
        experiment: ExperimentParams::default(),
        rng_seed: seed,
    }
}

/// Active verifier 1 at `va`, prover 2 at `p`, passive verifier 3 at `vp`.
pub fn passive(va: Position, vp: Position, p: Position, cfg: ProtocolConfig, seed: u64) -> Scenario {
    Scenario {
        nodes: vec![
            NodeSpec::new(1, va, Role::ActiveVerifier),
            NodeSpec::new(2, p, Role::Prover),
            NodeSpec::new(3, vp, Role::PassiveVerifier),
        ],
        protocol: ProtocolKind::OneWayDb,
        config: cfg,
        experiment: ExperimentParams::default(),
        rng_seed: seed,
    }
}
