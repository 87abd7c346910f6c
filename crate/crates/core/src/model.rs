//! Scenario model: node identities, roles, protocol selection, run parameters
//! and their validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::scalar::SPEED_OF_LIGHT;
use crate::threat::AdversaryPolicy;

pub type Position = Point<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Prover,
    ActiveVerifier,
    PassiveVerifier,
    Peer,
}

impl Role {
    pub fn is_verifier(self) -> bool {
        matches!(self, Role::ActiveVerifier | Role::PassiveVerifier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "OneWayDB")]
    OneWayDb,
    MutualInterleaved,
    OneToMany,
    MultiPartyRing,
    #[serde(rename = "MPNV")]
    Mpnv,
    #[serde(rename = "NtoM-passive")]
    NtoMPassive,
    #[serde(rename = "NtoM-multiparty")]
    NtoMMultiparty,
    #[serde(rename = "NtoM-onetomany")]
    NtoMOneToMany,
    /// Sequential one-way DB between every verifier and every prover.
    #[serde(rename = "MPNV-base")]
    MpnvBaseline,
    /// Two one-way DBs per unordered peer pair, one after the other.
    SequentialPairwise,
    /// One interleaved mutual DB per unordered peer pair.
    SequentialInterleaved,
}

impl ProtocolKind {
    pub fn is_one_way(self) -> bool {
        matches!(self, Self::OneWayDb | Self::Mpnv | Self::MpnvBaseline)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::OneWayDb => "OneWayDB",
            Self::MutualInterleaved => "MutualInterleaved",
            Self::OneToMany => "OneToMany",
            Self::MultiPartyRing => "MultiPartyRing",
            Self::Mpnv => "MPNV",
            Self::NtoMPassive => "NtoM-passive",
            Self::NtoMMultiparty => "NtoM-multiparty",
            Self::NtoMOneToMany => "NtoM-onetomany",
            Self::MpnvBaseline => "MPNV-base",
            Self::SequentialPairwise => "SequentialPairwise",
            Self::SequentialInterleaved => "SequentialInterleaved",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Rapid-exchange rounds per DB exchange.
    pub n: u32,
    /// Bits per nonce string.
    pub bit_len: u32,
    /// Per-node processing time, seconds.
    pub alpha: f64,
    /// Propagation speed, m/s.
    pub c: f64,
    /// Pre/post-phase messages contributed by each party of a session.
    pub pre_post_msgs: u32,
    pub auth_enabled: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { n: 10, bit_len: 1, alpha: 0.0, c: SPEED_OF_LIGHT, pre_post_msgs: 2, auth_enabled: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_a: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_p: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_a1: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_a2: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_p1: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_p2: Option<u32>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub big_n: Option<u32>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<u32>,
}

/// Number of active verifiers for a fraction `d_a` of `n` verifiers:
/// rounded to nearest, at least one.
pub fn active_count(d_a: f64, n: usize) -> usize {
    ((d_a * n as f64).round() as usize).clamp(1, n.max(1))
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    pub pos: Position,
    pub role: Role,
    #[serde(default)]
    pub policy: AdversaryPolicy,
    #[serde(default = "default_true")]
    pub has_cert: bool,
}

impl NodeSpec {
    pub fn new(id: u32, pos: Position, role: Role) -> Self {
        Self { id: NodeId(id), pos, role, policy: AdversaryPolicy::Honest, has_cert: true }
    }

    pub fn with_policy(mut self, policy: AdversaryPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Whether the node's key is in the trusted registry.
    pub fn certified(&self) -> bool {
        self.has_cert && !matches!(self.policy, AdversaryPolicy::NodeInsertion)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub nodes: Vec<NodeSpec>,
    pub protocol: ProtocolKind,
    pub config: ProtocolConfig,
    #[serde(default)]
    pub experiment: ExperimentParams,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("nodes: duplicate node id {0}")]
    DuplicateNodeId(NodeId),
    #[error("{}role: {reason}", node.map(|n| format!("nodes[{n}].")).unwrap_or_default())]
    RoleMismatch { node: Option<NodeId>, reason: String },
    #[error("{field}: {reason} (got {value})")]
    ParamOutOfRange { field: String, value: String, reason: String },
    #[error("nodes[{node}].policy: {policy} is not applicable: {reason}")]
    PolicyInapplicable { node: NodeId, policy: String, reason: String },
}

fn out_of_range(field: &str, value: impl fmt::Display, reason: &str) -> ValidationError {
    ValidationError::ParamOutOfRange { field: field.into(), value: value.to_string(), reason: reason.into() }
}

fn role_mismatch(node: Option<NodeId>, reason: impl Into<String>) -> ValidationError {
    ValidationError::RoleMismatch { node, reason: reason.into() }
}

/// A scenario that passed [`validate_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidScenario(Scenario);

impl std::ops::Deref for ValidScenario {
    type Target = Scenario;
    fn deref(&self) -> &Scenario {
        &self.0
    }
}

impl ValidScenario {
    pub fn into_inner(self) -> Scenario {
        self.0
    }
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(self) -> Result<ValidScenario, Vec<ValidationError>> {
        validate_scenario(self)
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Node ids with `role`, ascending.
    pub fn ids_with(&self, role: Role) -> Vec<NodeId> {
        let mut v: Vec<_> = self.nodes.iter().filter(|n| n.role == role).map(|n| n.id).collect();
        v.sort();
        v
    }

    pub fn sorted_ids(&self) -> Vec<NodeId> {
        let mut v: Vec<_> = self.nodes.iter().map(|n| n.id).collect();
        v.sort();
        v
    }

    /// Verifiers of a one-way protocol, ascending id.
    pub fn verifiers(&self) -> Vec<NodeId> {
        let mut v: Vec<_> = self.nodes.iter().filter(|n| n.role.is_verifier()).map(|n| n.id).collect();
        v.sort();
        v
    }

    /// Honest-behaving provers (relay attackers excluded), ascending id.
    pub fn provers(&self) -> Vec<NodeId> {
        let mut v: Vec<_> = self
            .nodes
            .iter()
            .filter(|n| n.role == Role::Prover && !matches!(n.policy, AdversaryPolicy::Relay { .. }))
            .map(|n| n.id)
            .collect();
        v.sort();
        v
    }

    pub fn n_a(&self) -> u32 {
        self.experiment.n_a.unwrap_or(self.config.n)
    }

    pub fn d_a(&self) -> f64 {
        self.experiment.d_a.unwrap_or(1.0)
    }

    /// The two NtoM groups: the first `N` node ids ascending, then the remaining `M`.
    pub fn groups(&self) -> (Vec<NodeId>, Vec<NodeId>) {
        let ids = self.sorted_ids();
        let n = (self.experiment.big_n.unwrap_or(0) as usize).min(ids.len());
        (ids[..n].to_vec(), ids[n..].to_vec())
    }
}

/// Checks every scenario invariant and returns all violations found.
pub fn validate_scenario(s: Scenario) -> Result<ValidScenario, Vec<ValidationError>> {
    let mut errs = Vec::new();
    check_config(&s.config, &mut errs);
    check_nodes(&s, &mut errs);
    check_roles(&s, &mut errs);
    check_experiment(&s, &mut errs);
    check_policies(&s, &mut errs);
    if errs.is_empty() {
        Ok(ValidScenario(s))
    } else {
        Err(errs)
    }
}

fn check_config(c: &ProtocolConfig, errs: &mut Vec<ValidationError>) {
    if c.n < 1 {
        errs.push(out_of_range("config.n", c.n, "n must be ≥ 1"));
    }
    if c.bit_len < 1 {
        errs.push(out_of_range("config.bit_len", c.bit_len, "bit_len must be ≥ 1"));
    }
    if !(c.alpha.is_finite() && c.alpha >= 0.0) {
        errs.push(out_of_range("config.alpha", c.alpha, "alpha must be finite and ≥ 0"));
    }
    if !(c.c.is_finite() && c.c > 0.0) {
        errs.push(out_of_range("config.c", c.c, "c must be finite and > 0"));
    }
    if c.pre_post_msgs < 2 {
        errs.push(out_of_range("config.pre_post_msgs", c.pre_post_msgs, "pre_post_msgs must be ≥ 2 (commit and open)"));
    }
}

fn check_nodes(s: &Scenario, errs: &mut Vec<ValidationError>) {
    let mut seen = BTreeSet::new();
    for n in &s.nodes {
        if !seen.insert(n.id) {
            errs.push(ValidationError::DuplicateNodeId(n.id));
        }
        if !n.pos.is_finite() {
            errs.push(out_of_range(
                &format!("nodes[{}].pos", n.id),
                format!("{:?}", n.pos),
                "coordinates must be finite",
            ));
        }
    }
    for (i, a) in s.nodes.iter().enumerate() {
        for b in &s.nodes[i + 1..] {
            if a.pos == b.pos && a.id != b.id {
                errs.push(out_of_range(
                    &format!("nodes[{}].pos", b.id),
                    format!("[{}, {}]", b.pos.x, b.pos.y),
                    &format!("positions must be pairwise distinct (same as node {})", a.id),
                ));
            }
        }
    }
}

fn count(s: &Scenario, role: Role) -> usize {
    s.nodes.iter().filter(|n| n.role == role).count()
}

fn check_roles(s: &Scenario, errs: &mut Vec<ValidationError>) {
    use ProtocolKind::*;
    let peers = count(s, Role::Peer);
    let total = s.nodes.len();
    let proto = s.protocol;
    let peer_only = |errs: &mut Vec<ValidationError>| {
        for n in s.nodes.iter().filter(|n| n.role != Role::Peer) {
            errs.push(role_mismatch(Some(n.id), format!("{proto} accepts only Peer nodes, found {:?}", n.role)));
        }
    };
    match proto {
        OneWayDb | Mpnv | MpnvBaseline => {
            for n in s.nodes.iter().filter(|n| n.role == Role::Peer) {
                errs.push(role_mismatch(Some(n.id), format!("{proto} is one-way and cannot contain Peer nodes")));
            }
            let provers = s.provers().len();
            let verifiers = s.verifiers().len();
            if proto == OneWayDb {
                if provers != 1 {
                    errs.push(role_mismatch(None, format!("OneWayDB needs exactly one Prover, found {provers}")));
                }
                let active = count(s, Role::ActiveVerifier);
                if active != 1 {
                    errs.push(role_mismatch(
                        None,
                        format!("OneWayDB needs exactly one ActiveVerifier, found {active}"),
                    ));
                }
            } else {
                if provers == 0 {
                    errs.push(role_mismatch(None, format!("{proto} needs at least one Prover")));
                }
                if verifiers == 0 {
                    errs.push(role_mismatch(None, format!("{proto} needs at least one verifier")));
                }
            }
        }
        MutualInterleaved => {
            peer_only(errs);
            if peers != 2 || total != 2 {
                errs.push(role_mismatch(None, format!("MutualInterleaved needs exactly 2 Peers, found {total} nodes")));
            }
        }
        OneToMany | SequentialPairwise | SequentialInterleaved => {
            peer_only(errs);
            if total < 2 {
                errs.push(role_mismatch(None, format!("{proto} needs at least 2 Peers")));
            }
        }
        MultiPartyRing => {
            peer_only(errs);
            if total < 4 {
                errs.push(out_of_range("N", total, "N must be ≥ 4 for MultiPartyRing"));
            }
        }
        NtoMPassive | NtoMMultiparty | NtoMOneToMany => peer_only(errs),
    }
}

fn check_fraction(field: &str, v: Option<f64>, errs: &mut Vec<ValidationError>) {
    if let Some(v) = v {
        if !(0.0..=1.0).contains(&v) {
            errs.push(out_of_range(field, v, "fraction must lie in [0, 1]"));
        }
    }
}

fn check_experiment(s: &Scenario, errs: &mut Vec<ValidationError>) {
    use ProtocolKind::*;
    let e = &s.experiment;
    let n = s.config.n;
    for (field, v) in [("experiment.n_a", e.n_a), ("experiment.n_a1", e.n_a1), ("experiment.n_a2", e.n_a2)] {
        if let Some(v) = v {
            if v > n {
                errs.push(out_of_range(field, v, "active rounds must satisfy 0 ≤ n_a ≤ n"));
            }
        }
    }
    for (field, p, a) in
        [("experiment.n_p", e.n_p, e.n_a), ("experiment.n_p1", e.n_p1, e.n_a1), ("experiment.n_p2", e.n_p2, e.n_a2)]
    {
        if let Some(p) = p {
            let a = a.unwrap_or(n);
            if a <= n && p != n - a {
                errs.push(out_of_range(field, p, &format!("passive rounds must equal n - n_a = {}", n - a)));
            }
        }
    }
    check_fraction("experiment.d_a", e.d_a, errs);
    check_fraction("experiment.d_1", e.d_1, errs);
    check_fraction("experiment.d_2", e.d_2, errs);

    match s.protocol {
        Mpnv | MpnvBaseline => {
            if s.protocol == Mpnv && s.n_a() == 0 {
                errs.push(out_of_range("experiment.n_a", 0, "MPNV active verifiers need n_a ≥ 1"));
            }
            if let Some(big_n) = e.big_n {
                let v = s.verifiers().len();
                if big_n as usize != v {
                    errs.push(out_of_range("experiment.N", big_n, &format!("N must equal the verifier count {v}")));
                }
            }
            if let Some(big_m) = e.big_m {
                let p = s.provers().len();
                if big_m as usize != p {
                    errs.push(out_of_range("experiment.M", big_m, &format!("M must equal the prover count {p}")));
                }
            }
            // Explicit labelling: when both verifier roles appear, the labels choose the active set.
            let active = count(s, Role::ActiveVerifier);
            let passive = count(s, Role::PassiveVerifier);
            if s.protocol == Mpnv && active > 0 && passive > 0 {
                let want = active_count(s.d_a(), active + passive);
                if want != active {
                    errs.push(out_of_range(
                        "experiment.d_a",
                        s.d_a(),
                        &format!("labelled {active} ActiveVerifier nodes but d_a·N rounds to {want}"),
                    ));
                }
            }
            if s.protocol == Mpnv && active == 0 && passive > 0 {
                errs.push(role_mismatch(None, "MPNV with explicit labels needs at least one ActiveVerifier"));
            }
        }
        NtoMPassive | NtoMMultiparty | NtoMOneToMany => match (e.big_n, e.big_m) {
            (Some(big_n), Some(big_m)) => {
                if (big_n + big_m) as usize != s.nodes.len() {
                    errs.push(out_of_range(
                        "experiment.N",
                        big_n,
                        &format!("N + M must equal the node count {}", s.nodes.len()),
                    ));
                }
                if big_n == 0 || big_m == 0 {
                    errs.push(out_of_range("experiment.N", big_n, "both groups must be non-empty"));
                }
                if s.protocol == NtoMMultiparty && big_n + big_m < 4 {
                    errs.push(out_of_range("N", big_n + big_m, "N must be ≥ 4 for the multi-party ring"));
                }
                if s.protocol == NtoMPassive {
                    for (field, v) in [("experiment.n_a1", e.n_a1), ("experiment.n_a2", e.n_a2)] {
                        if v == Some(0) {
                            errs.push(out_of_range(field, 0, "active rounds must be ≥ 1"));
                        }
                    }
                }
            }
            _ => errs.push(out_of_range("experiment.N", "missing", "NtoM protocols need both N and M")),
        },
        _ => {}
    }
}

fn check_policies(s: &Scenario, errs: &mut Vec<ValidationError>) {
    use crate::threat::AdversaryPolicy as P;
    let ids: BTreeMap<NodeId, &NodeSpec> = s.nodes.iter().map(|n| (n.id, n)).collect();
    for n in &s.nodes {
        let mut bad = |reason: &str| {
            errs.push(ValidationError::PolicyInapplicable {
                node: n.id,
                policy: n.policy.kind_name().into(),
                reason: reason.into(),
            })
        };
        if let Err(reason) = n.policy.check_params() {
            bad(&reason);
            continue;
        }
        match &n.policy {
            P::Honest | P::NodeInsertion | P::SelectiveDelay { .. } => {}
            P::GuessAhead { .. } => {
                if n.role.is_verifier() {
                    bad("only provers can guess challenges ahead");
                } else if !matches!(
                    s.protocol,
                    ProtocolKind::OneWayDb
                        | ProtocolKind::Mpnv
                        | ProtocolKind::MpnvBaseline
                        | ProtocolKind::NtoMPassive
                ) {
                    bad("guess-ahead applies to one-way challenge/response sessions");
                }
            }
            P::Relay { victim } => {
                if s.protocol != ProtocolKind::OneWayDb || n.role != Role::Prover {
                    bad("relay attackers are Prover-role nodes in a OneWayDB scenario");
                } else if !ids.get(victim).is_some_and(|v| v.role == Role::Prover && v.id != n.id) {
                    bad("relay victim must be another Prover");
                }
            }
            P::FakeLocationReport { .. } | P::EarlyChallenge { .. } => {
                let verifier_protocol = matches!(s.protocol, ProtocolKind::OneWayDb | ProtocolKind::Mpnv);
                let verifier_role =
                    n.role.is_verifier() || (s.protocol == ProtocolKind::NtoMPassive && n.role == Role::Peer);
                if !(verifier_role && (verifier_protocol || s.protocol == ProtocolKind::NtoMPassive)) {
                    bad("only active verifiers of passive-DB protocols can apply this policy");
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: u32) -> Scenario {
        Scenario {
            nodes: (0..n).map(|i| NodeSpec::new(i, Point::new(10.0 * i as f64, (i * i) as f64), Role::Peer)).collect(),
            protocol: ProtocolKind::MultiPartyRing,
            config: ProtocolConfig { n: 1, ..Default::default() },
            experiment: ExperimentParams::default(),
            rng_seed: 1,
        }
    }

    #[test]
    fn four_peers_ring_ok() {
        assert!(ring(4).validate().is_ok());
    }

    #[test]
    fn provers_in_ring_rejected() {
        let mut s = ring(4);
        s.nodes[0].role = Role::Prover;
        s.nodes[1].role = Role::Prover;
        let errs = s.validate().unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().all(|e| matches!(e, ValidationError::RoleMismatch { .. })));
    }

    #[test]
    fn fraction_out_of_range() {
        let mut s = ring(4);
        s.experiment.d_a = Some(1.5);
        let errs = s.validate().unwrap_err();
        assert!(matches!(&errs[0], ValidationError::ParamOutOfRange { field, .. } if field == "experiment.d_a"));
    }

    #[test]
    fn three_node_ring_rejected() {
        let errs = ring(3).validate().unwrap_err();
        assert!(errs[0].to_string().contains("N must be ≥ 4"));
    }

    #[test]
    fn duplicate_ids_and_positions() {
        let mut s = ring(4);
        s.nodes[1].id = NodeId(0);
        s.nodes[3].pos = s.nodes[2].pos;
        let errs = s.validate().unwrap_err();
        assert!(errs.contains(&ValidationError::DuplicateNodeId(NodeId(0))));
        assert!(errs.iter().any(|e| e.to_string().contains("pairwise distinct")));
    }

    #[test]
    fn active_count_rounding() {
        assert_eq!(active_count(0.8, 30), 24);
        assert_eq!(active_count(0.6, 30), 18);
        assert_eq!(active_count(0.1, 10), 1);
        assert_eq!(active_count(0.0, 10), 1);
        assert_eq!(active_count(1.0 / 30.0, 30), 1);
        assert_eq!(active_count(0.3, 10), 3);
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let good = r#"{"nodes":[{"id":0,"pos":[0.0,0.0],"role":"ActiveVerifier","policy":{"kind":"Honest"},"has_cert":true}],
            "protocol":"MPNV","config":{"n":10,"bit_len":1,"alpha":0.0,"c":299792458.0,"pre_post_msgs":2,"auth_enabled":false},
            "experiment":{"n_a":8,"d_a":0.8,"N":30,"M":30},"rng_seed":42}"#;
        let s = Scenario::from_json(good).unwrap();
        assert_eq!(s.protocol, ProtocolKind::Mpnv);
        assert_eq!(s.experiment.big_n, Some(30));
        let bad = good.replace("\"rng_seed\"", "\"colour\":1,\"rng_seed\"");
        assert!(Scenario::from_json(&bad).is_err());
        let bad_cfg = good.replace("\"auth_enabled\"", "\"speed\":1,\"auth_enabled\"");
        assert!(Scenario::from_json(&bad_cfg).is_err());
    }
}
