//! Per-node estimation. A node works only from its own log, its own position
//! and the public protocol plan.

use std::collections::{BTreeMap, HashMap};

use crate::crypto::{open, Bits, CryptoError, Digest, KeyRegistry, PublicKey, Signature};
use crate::estimate::{build_tof_system, passive_bound_direct, solve_tof, PassiveObservation};
use crate::model::{NodeId, Position, Scenario};
use crate::simkit::LogEntry;

use super::message::{report_message, transcript_digest, Body, Message, Phase};
use super::plan::{Action, Plan, Session, SessionKind};
use super::{ring_order, DbEstimate, Method, ProtoError, RoundRecord, SessionFailure};

/// A node's log indexed by plan step.
pub struct NodeView<'a> {
    pub node: NodeId,
    by_step: HashMap<u32, &'a LogEntry<Message>>,
}

impl<'a> NodeView<'a> {
    pub fn new(node: NodeId, log: &'a [LogEntry<Message>]) -> Self {
        Self { node, by_step: log.iter().map(|e| (e.payload.step, e)).collect() }
    }

    pub fn entry(&self, step: usize) -> Result<&'a LogEntry<Message>, ProtoError> {
        self.by_step.get(&(step as u32)).copied().ok_or(ProtoError::MissingMessage(step))
    }

    pub fn time(&self, step: usize) -> Result<f64, ProtoError> {
        Ok(self.entry(step)?.local_time)
    }

    pub fn msg(&self, step: usize) -> Result<&'a Message, ProtoError> {
        Ok(&self.entry(step)?.payload)
    }

    pub fn bits(&self, step: usize) -> Result<&'a Bits, ProtoError> {
        self.msg(step)?.bits().ok_or(ProtoError::MissingMessage(step))
    }
}

fn find_step(plan: &Plan, session: u32, actor: NodeId, phase: Phase) -> Option<usize> {
    plan.find_step(session, actor, phase)
}

/// Digest of a session's rapid exchange as recorded in `view`.
pub fn view_transcript(session: &Session, view: &NodeView) -> Result<Digest, ProtoError> {
    let mut items = Vec::with_capacity(session.rapid_steps.len());
    for &k in &session.rapid_steps {
        let e = view.entry(k)?;
        items.push((k as u32, e.sender, e.payload.bits().ok_or(ProtoError::MissingMessage(k))?));
    }
    Ok(transcript_digest(session.id, items))
}

fn check_signature(
    registry: &KeyRegistry,
    owner: NodeId,
    public: &PublicKey,
    signature: &Option<Signature>,
    message: &[u8],
) -> Result<(), ProtoError> {
    let sig = signature.as_ref().ok_or_else(|| ProtoError::AuthFailure("missing signature".into()))?;
    match registry.verify(public, message, sig) {
        Err(CryptoError::UnknownKey(_)) => Err(ProtoError::AuthFailure(format!("node {owner} holds no certificate"))),
        Err(e) => Err(ProtoError::AuthFailure(e.to_string())),
        Ok(false) => Err(ProtoError::AuthFailure(format!("signature of node {owner} does not verify"))),
        Ok(true) => {
            if registry.certificate(public).map(|c| c.node) == Some(owner) {
                Ok(())
            } else {
                Err(ProtoError::AuthFailure(format!("certificate does not belong to node {owner}")))
            }
        }
    }
}

/// Opens `owner`'s commitment for the session and re-derives each of its rapid
/// messages. Returns whether a signature was checked.
fn verify_party(
    s: &Scenario,
    plan: &Plan,
    registry: &KeyRegistry,
    session: &Session,
    owner: NodeId,
    view: &NodeView,
) -> Result<bool, ProtoError> {
    let sid = session.id;
    let commit_step = find_step(plan, sid, owner, Phase::Commit).ok_or(ProtoError::MissingCommitment(owner))?;
    let open_step = find_step(plan, sid, owner, Phase::Open).ok_or(ProtoError::MissingCommitment(owner))?;
    let Body::Commit { commitment } = &view.msg(commit_step)?.body else {
        return Err(ProtoError::MissingMessage(commit_step));
    };
    let Body::Open { opening, public, signature } = &view.msg(open_step)?.body else {
        return Err(ProtoError::MissingMessage(open_step));
    };
    let bits = open(commitment, opening).map_err(|_| ProtoError::CommitMismatch(owner))?;
    let count = plan.secrets.get(&(sid, owner)).map_or(0, |x| x.nonces.len());
    let bit_len = s.config.bit_len as usize;
    if bits.len() != count * bit_len {
        return Err(ProtoError::CommitMismatch(owner));
    }
    let nonces = bits.chunks(bit_len);
    for &k in &session.rapid_steps {
        let step = &plan.steps[k];
        if step.actor != owner {
            continue;
        }
        if let Action::Rapid { use_prev, nonces: idx, .. } = &step.action {
            let mut expected = if *use_prev { view.bits(k - 1)?.clone() } else { Bits::zeros(bit_len) };
            for &i in idx {
                expected = expected.xor(&nonces[i]).ok_or(ProtoError::LengthMismatch)?;
            }
            if *view.bits(k)? != expected {
                return Err(ProtoError::ResponseMismatch { round: step.round });
            }
        }
    }
    if s.config.auth_enabled {
        let transcript = view_transcript(session, view)?;
        check_signature(registry, owner, public, signature, &transcript.0)?;
        return Ok(true);
    }
    Ok(false)
}

/// Positions advertised by active verifiers, as received.
fn advertised(plan: &Plan, view: &NodeView) -> BTreeMap<NodeId, Position> {
    plan.sessions
        .iter()
        .filter(|x| x.kind == SessionKind::Location)
        .filter_map(|x| {
            let node = x.parties[0];
            let k = find_step(plan, x.id, node, Phase::Location)?;
            match view.msg(k).ok()?.body {
                Body::Location { pos } => Some((node, pos)),
                _ => None,
            }
        })
        .collect()
}

#[derive(Default)]
struct Acc {
    active: Vec<RoundRecord>,
    passive: Vec<PassiveObservation<f64>>,
    bounds: Vec<f64>,
    multi: usize,
    auth_checked: bool,
    failed: bool,
}

/// One ring member's per-cycle bounds to every other member, plus the largest
/// residual across cycles.
pub struct RingResult {
    pub bounds: BTreeMap<NodeId, Vec<f64>>,
    pub residual: f64,
}

/// Solves every complete cycle in the view.
pub fn ring_solve(s: &Scenario, session: &Session, view: &NodeView) -> Result<RingResult, ProtoError> {
    let order = session.ring.as_ref().expect("ring session has an order");
    let n = order.len();
    let mut out = RingResult { bounds: BTreeMap::new(), residual: 0.0 };
    for cycle in session.rapid_steps.chunks(2 * n) {
        let times = cycle.iter().map(|&k| view.time(k)).collect::<Result<Vec<_>, _>>()?;
        let sys = build_tof_system(view.node, order, &times, s.config.alpha)
            .map_err(|e| ProtoError::SolveFailure(e.to_string()))?;
        let sol = solve_tof(&sys).map_err(|e| ProtoError::SolveFailure(e.to_string()))?;
        out.residual = out.residual.max(sol.residual);
        for &y in &order.0 {
            if y != view.node {
                let t = sol.tof(view.node, y).expect("observer pairs are unknowns");
                out.bounds.entry(y).or_default().push(s.config.c * t);
            }
        }
    }
    Ok(out)
}

/// The bound vector and transcript digest a ring member broadcasts.
pub fn ring_report(s: &Scenario, session: &Session, view: &NodeView) -> (Vec<(NodeId, f64)>, Digest) {
    let bounds = match ring_solve(s, session, view) {
        Ok(r) => r.bounds.into_iter().map(|(y, v)| (y, v.into_iter().fold(f64::NEG_INFINITY, f64::max))).collect(),
        Err(_) => Vec::new(),
    };
    let transcript = view_transcript(session, view).unwrap_or(Digest([0; 32]));
    (bounds, transcript)
}

pub struct NodeOutcome {
    pub estimates: Vec<DbEstimate>,
    pub failures: Vec<SessionFailure>,
    pub residual: Option<f64>,
}

fn fail(
    failures: &mut Vec<SessionFailure>,
    acc: &mut Acc,
    measurer: NodeId,
    target: NodeId,
    session: u32,
    e: ProtoError,
) {
    acc.failed = true;
    failures.push(SessionFailure { measurer, target, session, error: e });
}

/// Every estimate `node` derives from its log once the run is over.
pub fn node_outcome(s: &Scenario, plan: &Plan, registry: &KeyRegistry, node: NodeId, view: &NodeView) -> NodeOutcome {
    let me = s.node(node).expect("node exists");
    let mut accs: BTreeMap<NodeId, Acc> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut residual = None;
    let c = s.config.c;
    let alpha = s.config.alpha;
    let adverts = advertised(plan, view);

    for session in &plan.sessions {
        match session.kind {
            SessionKind::Location => {}
            SessionKind::OneWay | SessionKind::Mutual | SessionKind::OneToMany => {
                let mine: Vec<_> = session.probes.iter().filter(|p| p.measurer == node).collect();
                let observing = session.observers.contains(&node);
                let mut targets: Vec<NodeId> = mine.iter().map(|p| p.target).collect();
                if observing {
                    targets.extend(session.passive.iter().map(|r| r.prover));
                }
                targets.sort();
                targets.dedup();
                for &t in &targets {
                    let acc = accs.entry(t).or_default();
                    match verify_party(s, plan, registry, session, t, view) {
                        Ok(signed) => acc.auth_checked |= signed,
                        Err(e) => fail(&mut failures, acc, node, t, session.id, e),
                    }
                }
                for p in mine {
                    let acc = accs.entry(p.target).or_default();
                    let rec = (|| {
                        let t_send = view.time(p.probe)?;
                        let t_recv = view.time(p.reply)?;
                        Ok::<_, ProtoError>(RoundRecord {
                            round: p.round,
                            challenge: view.bits(p.probe)?.clone(),
                            response: view.bits(p.reply)?.clone(),
                            t_send,
                            t_recv,
                        })
                    })();
                    match rec {
                        Ok(r) => {
                            acc.bounds.push(r.bound(alpha, c));
                            acc.active.push(r);
                        }
                        Err(e) => fail(&mut failures, acc, node, p.target, session.id, e),
                    }
                }
                if observing {
                    for r in &session.passive {
                        let acc = accs.entry(r.prover).or_default();
                        let obs = (|| {
                            let va = *adverts.get(&r.active).ok_or(ProtoError::MissingLocation(r.active))?;
                            Ok::<_, ProtoError>(PassiveObservation {
                                t1: view.time(r.challenge)?,
                                t2: view.time(r.response)?,
                                t3: view.time(r.next)?,
                                alpha_p: alpha,
                                alpha_va: alpha,
                                d_va_vp: va.distance(&me.pos),
                                c,
                                va: Some(va),
                                vp: Some(me.pos),
                            })
                        })();
                        match obs.and_then(|o| passive_bound_direct(&o).map(|b| (o, b)).map_err(ProtoError::from)) {
                            Ok((o, b)) => {
                                acc.bounds.push(b);
                                acc.passive.push(o);
                            }
                            Err(e) => fail(&mut failures, acc, node, r.prover, session.id, e),
                        }
                    }
                }
            }
            SessionKind::Ring => {
                if !session.parties.contains(&node) {
                    continue;
                }
                let others: Vec<NodeId> = session.parties.iter().copied().filter(|&y| y != node).collect();
                // Every member re-derives the ring from the broadcast commitments.
                let commitments = session
                    .parties
                    .iter()
                    .filter_map(|&p| {
                        let k = find_step(plan, session.id, p, Phase::Commit)?;
                        match &view.msg(k).ok()?.body {
                            Body::Commit { commitment } => Some((p, *commitment)),
                            _ => None,
                        }
                    })
                    .collect();
                match ring_order(&session.parties, &commitments) {
                    Ok(order) if Some(&order) == session.ring.as_ref() => {}
                    Ok(_) => {
                        for &y in &others {
                            let acc = accs.entry(y).or_default();
                            fail(&mut failures, acc, node, y, session.id, ProtoError::RingMismatch);
                        }
                        continue;
                    }
                    Err(e) => {
                        for &y in &others {
                            let acc = accs.entry(y).or_default();
                            fail(&mut failures, acc, node, y, session.id, e.clone());
                        }
                        continue;
                    }
                }
                for &y in &others {
                    let acc = accs.entry(y).or_default();
                    if let Err(e) = verify_party(s, plan, registry, session, y, view) {
                        // The opening signature is not used in the ring; reports carry it.
                        if !matches!(e, ProtoError::AuthFailure(_)) {
                            fail(&mut failures, acc, node, y, session.id, e);
                        }
                    }
                    if s.config.auth_enabled {
                        let checked = find_step(plan, session.id, y, Phase::Report)
                            .ok_or(ProtoError::MissingMessage(0))
                            .and_then(|k| view.msg(k))
                            .and_then(|m| match &m.body {
                                Body::Report { bounds, transcript, public, signature } => {
                                    check_signature(registry, y, public, signature, &report_message(transcript, bounds))
                                }
                                _ => Err(ProtoError::MissingMessage(m.step as usize)),
                            });
                        match checked {
                            Ok(()) => acc.auth_checked = true,
                            Err(e) => fail(&mut failures, acc, node, y, session.id, e),
                        }
                    }
                }
                match ring_solve(s, session, view) {
                    Ok(r) => {
                        residual = Some(residual.unwrap_or(0.0f64).max(r.residual));
                        for (y, v) in r.bounds {
                            let acc = accs.entry(y).or_default();
                            acc.multi += v.len();
                            acc.bounds.extend(v);
                        }
                    }
                    Err(e) => {
                        for &y in &others {
                            let acc = accs.entry(y).or_default();
                            fail(&mut failures, acc, node, y, session.id, e.clone());
                        }
                    }
                }
            }
        }
    }

    let estimates = accs
        .into_iter()
        .filter(|(_, a)| !a.failed && !a.bounds.is_empty())
        .map(|(target, a)| {
            let method = if !a.active.is_empty() {
                Method::Active
            } else if a.multi > 0 {
                Method::MultiParty
            } else {
                Method::Passive
            };
            DbEstimate {
                measurer: node,
                target,
                bound: a.bounds.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0),
                method,
                rounds_used: a.bounds.len(),
                verified_auth: s.config.auth_enabled && a.auth_checked,
                surplus: plan.surplus.contains(&(node, target)),
                rounds: a.active,
                passive: a.passive,
            }
        })
        .collect();
    NodeOutcome { estimates, failures, residual }
}
