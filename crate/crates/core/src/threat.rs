//! Adversary policies and the end-of-protocol cross-check detector.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Digest;
use crate::model::{NodeId, Position, Role};
use crate::scalar::EPS_DETECT;

/// One delay rule of a [`AdversaryPolicy::SelectiveDelay`] node. Every filter that
/// is present must match for the delay to apply; matching rules add up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayRule {
    /// 1-based position of the emission inside its rapid-phase cycle
    /// (a ring cycle is 2N messages, a one-way round is challenge then response).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<u32>,
    /// 1-based rapid round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    /// The node whose message the delayed emission answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<NodeId>,
    pub delay_s: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum AdversaryPolicy {
    #[default]
    Honest,
    /// Answers `lead_s` before the challenge arrives, guessing its bits.
    GuessAhead {
        lead_s: f64,
        #[serde(default = "one")]
        fraction: f64,
    },
    SelectiveDelay {
        delays: Vec<DelayRule>,
    },
    /// Man in the middle posing as `victim` towards the verifier.
    Relay {
        victim: NodeId,
    },
    /// Advertises `claimed_pos` instead of its real position.
    FakeLocationReport {
        claimed_pos: Position,
    },
    /// Leaks each challenge `advance_s` ahead of its broadcast in a `pr_ch`
    /// fraction of rounds, then holds back its next emission by the same amount.
    EarlyChallenge {
        advance_s: f64,
        pr_ch: f64,
    },
    /// Participates without a registry certificate.
    NodeInsertion,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThreatError {
    #[error("{policy} is not applicable to a {role:?} emission")]
    PolicyInapplicable { policy: &'static str, role: Role },
}

/// What the acting node is about to send.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PendingKind {
    /// A verifier-side rapid emission whose answer is timed.
    Challenge,
    /// A rapid emission that answers the previous one.
    Response,
    /// A location advertisement.
    Location,
    /// Anything outside the rapid phase.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pending {
    pub role: Role,
    pub kind: PendingKind,
    pub responds_to: Option<NodeId>,
    /// 1-based rapid round.
    pub round: u32,
    /// 1-based index within the rapid cycle.
    pub cycle_index: u32,
    pub true_pos: Position,
}

/// How a policy alters one pending emission.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Behavior {
    /// Extra hold time before emitting.
    pub delay_s: f64,
    /// Responder side: emit this long before the challenge arrives, with guessed bits.
    pub guess_lead_s: Option<f64>,
    /// Challenger side: the responder learns the challenge this long before it arrives.
    pub leak_s: Option<f64>,
    pub advertised_pos: Option<Position>,
}

impl AdversaryPolicy {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Honest => "Honest",
            Self::GuessAhead { .. } => "GuessAhead",
            Self::SelectiveDelay { .. } => "SelectiveDelay",
            Self::Relay { .. } => "Relay",
            Self::FakeLocationReport { .. } => "FakeLocationReport",
            Self::EarlyChallenge { .. } => "EarlyChallenge",
            Self::NodeInsertion => "NodeInsertion",
        }
    }

    pub fn is_honest(&self) -> bool {
        matches!(self, Self::Honest)
    }

    /// Checks the parameter ranges of the policy itself.
    pub fn check_params(&self) -> Result<(), String> {
        let nonneg = |v: f64, name: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be finite and ≥ 0 (got {v})"))
            }
        };
        let unit = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} must lie in [0, 1] (got {v})"))
            }
        };
        match self {
            Self::Honest | Self::Relay { .. } | Self::NodeInsertion => Ok(()),
            Self::GuessAhead { lead_s, fraction } => {
                nonneg(*lead_s, "lead_s")?;
                unit(*fraction, "fraction")
            }
            Self::SelectiveDelay { delays } => delays.iter().try_for_each(|d| nonneg(d.delay_s, "delay_s")),
            Self::FakeLocationReport { claimed_pos } => {
                if claimed_pos.is_finite() {
                    Ok(())
                } else {
                    Err("claimed_pos must be finite".into())
                }
            }
            Self::EarlyChallenge { advance_s, pr_ch } => {
                nonneg(*advance_s, "advance_s")?;
                unit(*pr_ch, "pr_ch")
            }
        }
    }
}

fn rule_matches(rule: &DelayRule, p: &Pending) -> bool {
    rule.message.is_none_or(|m| m == p.cycle_index)
        && rule.round.is_none_or(|r| r == p.round)
        && rule.target.is_none_or(|t| Some(t) == p.responds_to)
}

/// Decides how `policy` alters a pending emission. Random decisions draw from
/// `rng`, which should be a stream dedicated to the node's policy so that a
/// policy that never fires leaves every other stream untouched.
pub fn apply_policy<R: Rng + ?Sized>(
    policy: &AdversaryPolicy,
    pending: &Pending,
    rng: &mut R,
) -> Result<Behavior, ThreatError> {
    use AdversaryPolicy as P;
    let inapplicable = || ThreatError::PolicyInapplicable { policy: policy.kind_name(), role: pending.role };
    let mut b = Behavior::default();
    match policy {
        P::Honest | P::NodeInsertion | P::Relay { .. } => {}
        P::SelectiveDelay { delays } => {
            if matches!(pending.kind, PendingKind::Challenge | PendingKind::Response) {
                b.delay_s = delays.iter().filter(|r| rule_matches(r, pending)).map(|r| r.delay_s).sum();
            }
        }
        P::GuessAhead { lead_s, fraction } => {
            if pending.role.is_verifier() {
                return Err(inapplicable());
            }
            if pending.kind == PendingKind::Response && *fraction > 0.0 && rng.gen_bool(fraction.min(1.0)) {
                b.guess_lead_s = Some(*lead_s);
            }
        }
        P::FakeLocationReport { claimed_pos } => {
            if !pending.role.is_verifier() && pending.role != Role::Peer {
                return Err(inapplicable());
            }
            if pending.kind == PendingKind::Location {
                b.advertised_pos = Some(*claimed_pos);
            }
        }
        P::EarlyChallenge { advance_s, pr_ch } => {
            if !pending.role.is_verifier() && pending.role != Role::Peer {
                return Err(inapplicable());
            }
            if pending.kind == PendingKind::Challenge && *pr_ch > 0.0 && rng.gen_bool(pr_ch.min(1.0)) {
                b.leak_s = Some(*advance_s);
            }
        }
    }
    Ok(b)
}

/// A node's end-of-protocol broadcast: its own bounds and its transcript digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub node: NodeId,
    /// Bound in metres from `node` to each peer.
    pub bounds: BTreeMap<NodeId, f64>,
    pub transcript: Digest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub pair: (NodeId, NodeId),
    /// The first node's bound to the second.
    pub bound_a: f64,
    /// The second node's bound to the first.
    pub bound_b: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Clear,
    /// Endpoint of a pair whose two bounds disagree.
    Implicated,
    /// Reported a transcript digest that differs from the majority.
    Dissent,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub accused: BTreeSet<NodeId>,
    pub evidence: Vec<Evidence>,
    pub dissenters: Vec<NodeId>,
    pub verdicts: BTreeMap<NodeId, Verdict>,
}

impl DetectionReport {
    pub fn is_empty(&self) -> bool {
        self.evidence.is_empty() && self.dissenters.is_empty()
    }

    pub fn flags_pair(&self, a: NodeId, b: NodeId) -> bool {
        let key = (a.min(b), a.max(b));
        self.evidence.iter().any(|e| e.pair == key)
    }
}

/// Compares every pair's two reported bounds and every transcript digest.
/// `eps_detect` defaults to [`EPS_DETECT`] when `None`.
pub fn cross_check_detect(reports: &[NodeReport], eps_detect: Option<f64>) -> DetectionReport {
    let eps = eps_detect.unwrap_or(EPS_DETECT);
    let by_node: BTreeMap<NodeId, &NodeReport> = reports.iter().map(|r| (r.node, r)).collect();
    let mut out = DetectionReport::default();

    for (&a, ra) in &by_node {
        for (&b, &bound_a) in &ra.bounds {
            if b <= a {
                continue;
            }
            let Some(bound_b) = by_node.get(&b).and_then(|rb| rb.bounds.get(&a)).copied() else {
                continue;
            };
            let discrepancy = (bound_a - bound_b).abs();
            // NaN from a failed solve counts as a disagreement.
            if discrepancy > eps || discrepancy.is_nan() {
                out.evidence.push(Evidence { pair: (a, b), bound_a, bound_b, discrepancy });
                out.accused.insert(a);
                out.accused.insert(b);
            }
        }
    }

    let mut tally: BTreeMap<Digest, usize> = BTreeMap::new();
    for r in reports {
        *tally.entry(r.transcript).or_default() += 1;
    }
    // Majority digest; ties go to the smallest digest so every checker agrees.
    if let Some((&majority, _)) = tally.iter().max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0))) {
        for r in reports {
            if r.transcript != majority {
                out.dissenters.push(r.node);
                out.accused.insert(r.node);
            }
        }
    }
    out.dissenters.sort();

    for &n in by_node.keys() {
        let v = if out.dissenters.contains(&n) {
            Verdict::Dissent
        } else if out.accused.contains(&n) {
            Verdict::Implicated
        } else {
            Verdict::Clear
        };
        out.verdicts.insert(n, v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::hash;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn report(node: u32, bounds: &[(u32, f64)], transcript: &[u8]) -> NodeReport {
        NodeReport {
            node: NodeId(node),
            bounds: bounds.iter().map(|&(k, v)| (NodeId(k), v)).collect(),
            transcript: hash(transcript),
        }
    }

    #[test]
    fn agreement_is_empty() {
        let reports = vec![report(1, &[(2, 10.0)], b"t"), report(2, &[(1, 10.0)], b"t")];
        let d = cross_check_detect(&reports, None);
        assert!(d.is_empty());
        assert!(d.accused.is_empty());
        assert_eq!(d.verdicts[&NodeId(1)], Verdict::Clear);
    }

    #[test]
    fn discrepancy_and_dissent() {
        let reports = vec![
            report(1, &[(2, 10.0), (3, 5.0)], b"t"),
            report(2, &[(1, 10.5), (3, 7.0)], b"t"),
            report(3, &[(1, 5.0), (2, 7.0)], b"other"),
        ];
        let d = cross_check_detect(&reports, None);
        assert_eq!(d.evidence.len(), 1);
        assert!(d.flags_pair(NodeId(2), NodeId(1)));
        assert!((d.evidence[0].discrepancy - 0.5).abs() < 1e-12);
        assert_eq!(d.dissenters, vec![NodeId(3)]);
        assert_eq!(d.verdicts[&NodeId(3)], Verdict::Dissent);
        assert_eq!(d.verdicts[&NodeId(1)], Verdict::Implicated);
    }

    #[test]
    fn below_threshold_ignored() {
        let reports = vec![report(1, &[(2, 10.0)], b"t"), report(2, &[(1, 10.0 + 2e-6)], b"t")];
        assert!(cross_check_detect(&reports, None).is_empty());
    }

    fn pending(kind: PendingKind, role: Role) -> Pending {
        Pending {
            role,
            kind,
            responds_to: Some(NodeId(2)),
            round: 1,
            cycle_index: 3,
            true_pos: Position::new(0.0, 0.0),
        }
    }

    #[test]
    fn selective_delay_rules_add() {
        let p = AdversaryPolicy::SelectiveDelay {
            delays: vec![
                DelayRule { message: Some(3), round: None, target: None, delay_s: 5e-9 },
                DelayRule { message: None, round: None, target: Some(NodeId(2)), delay_s: 1e-9 },
                DelayRule { message: Some(7), round: None, target: None, delay_s: 9e-9 },
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = apply_policy(&p, &pending(PendingKind::Response, Role::Peer), &mut rng).unwrap();
        assert!((b.delay_s - 6e-9).abs() < 1e-21);
        let b = apply_policy(&p, &pending(PendingKind::Other, Role::Peer), &mut rng).unwrap();
        assert_eq!(b.delay_s, 0.0);
    }

    #[test]
    fn early_challenge_on_prover_inapplicable() {
        let p = AdversaryPolicy::EarlyChallenge { advance_s: 1e-9, pr_ch: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = apply_policy(&p, &pending(PendingKind::Response, Role::Prover), &mut rng).unwrap_err();
        assert!(matches!(err, ThreatError::PolicyInapplicable { policy: "EarlyChallenge", .. }));
    }

    #[test]
    fn zero_probability_never_draws() {
        let p = AdversaryPolicy::EarlyChallenge { advance_s: 1e-9, pr_ch: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let before = rng.clone();
        let b = apply_policy(&p, &pending(PendingKind::Challenge, Role::ActiveVerifier), &mut rng).unwrap();
        assert_eq!(b, Behavior::default());
        assert_eq!(rng, before);
    }

    #[test]
    fn policy_json_shapes() {
        let p: AdversaryPolicy =
            serde_json::from_str(r#"{"kind":"SelectiveDelay","delays":[{"message":3,"delay_s":5e-8}]}"#).unwrap();
        assert_eq!(p.kind_name(), "SelectiveDelay");
        let g: AdversaryPolicy = serde_json::from_str(r#"{"kind":"GuessAhead","lead_s":1e-6}"#).unwrap();
        assert_eq!(g, AdversaryPolicy::GuessAhead { lead_s: 1e-6, fraction: 1.0 });
        assert!(serde_json::from_str::<AdversaryPolicy>(r#"{"kind":"GuessAhead","lead_s":1e-6,"x":1}"#).is_err());
        assert!(AdversaryPolicy::EarlyChallenge { advance_s: 1e-9, pr_ch: 1.5 }.check_params().is_err());
    }
}
