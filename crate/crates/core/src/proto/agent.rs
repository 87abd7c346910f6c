//! Drives a plan through the simulator: every node acts on its own log, its
//! own secrets and its own policy.

use std::collections::{BTreeMap, HashMap};

use rand_chacha::ChaCha8Rng;

use crate::crypto::{sign, Bits, KeyPair, KeyRegistry};
use crate::model::{NodeId, Scenario};
use crate::simkit::{node_rng, Event, LogEntry, Simulator, Trace};
use crate::threat::{apply_policy, Behavior, Pending, PendingKind};

use super::measure::{ring_report, NodeView};
use super::message::{report_message, transcript_digest, Body, Message, Phase};
use super::plan::{Action, Plan};
use super::RunError;

pub struct Keys {
    pub pairs: BTreeMap<NodeId, KeyPair>,
    pub registry: KeyRegistry,
}

/// Key pairs for every node; only certified nodes enter the registry.
pub fn make_keys(s: &Scenario) -> Keys {
    let mut registry = KeyRegistry::new();
    let mut pairs = BTreeMap::new();
    for n in &s.nodes {
        let kp = KeyPair::generate(&mut node_rng(s.rng_seed, n.id, "keys"));
        if n.certified() {
            registry.register(n.id, &kp);
        }
        pairs.insert(n.id, kp);
    }
    Keys { pairs, registry }
}

pub struct Execution {
    pub trace: Trace<Message>,
    pub logs: BTreeMap<NodeId, Vec<LogEntry<Message>>>,
    /// Emission sequence number of every plan step.
    pub step_seq: Vec<u64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Early {
    None,
    Guessed,
    Leaked,
}

struct Driver<'a> {
    s: &'a Scenario,
    plan: &'a Plan,
    keys: &'a Keys,
    sim: Simulator<Message>,
    policy_rngs: BTreeMap<NodeId, ChaCha8Rng>,
    guess_rngs: BTreeMap<NodeId, ChaCha8Rng>,
    behavior: Vec<Behavior>,
    early: Vec<Early>,
    step_seq: Vec<Option<u64>>,
    awaiting: HashMap<(u64, NodeId), usize>,
    wake: HashMap<u64, usize>,
    hold: BTreeMap<NodeId, f64>,
}

fn pending_kind(action: &Action) -> PendingKind {
    match action {
        Action::Rapid { kind, .. } => *kind,
        Action::Forward => PendingKind::Response,
        Action::Advertise => PendingKind::Location,
        _ => PendingKind::Other,
    }
}

impl<'a> Driver<'a> {
    fn decide(&mut self, k: usize) -> Result<(), RunError> {
        let step = &self.plan.steps[k];
        let node = self.s.node(step.actor).expect("plan actors exist");
        let pending = Pending {
            role: node.role,
            kind: pending_kind(&step.action),
            responds_to: step.responds_to,
            round: step.round,
            cycle_index: step.cycle_index,
            true_pos: node.pos,
        };
        let rng = self.policy_rngs.get_mut(&step.actor).expect("policy rng");
        self.behavior[k] = apply_policy(&node.policy, &pending, rng)?;
        Ok(())
    }

    fn schedule(&mut self, k: usize, trigger: f64) -> Result<(), RunError> {
        let actor = self.plan.steps[k].actor;
        let hold = self.hold.remove(&actor).unwrap_or(0.0);
        let t = trigger + self.s.config.alpha + self.behavior[k].delay_s + hold;
        let token = self.sim.schedule_wakeup(actor, t)?;
        self.wake.insert(token, k);
        Ok(())
    }

    fn prev_bits(&self, k: usize) -> Bits {
        let seq = self.step_seq[k - 1].expect("previous step emitted");
        self.sim.emissions()[seq as usize].payload.bits().cloned().expect("previous step carries bits")
    }

    fn session_transcript(&self, session: u32) -> crate::crypto::Digest {
        let steps = &self.plan.sessions[session as usize].rapid_steps;
        let em = self.sim.emissions();
        transcript_digest(
            session,
            steps.iter().filter_map(|&k| {
                let seq = self.step_seq[k]?;
                let e = &em[seq as usize];
                Some((k as u32, e.sender, e.payload.bits()?))
            }),
        )
    }

    fn payload(&mut self, k: usize) -> Message {
        let step = &self.plan.steps[k];
        let secret = self.plan.secrets.get(&(step.session, step.actor));
        let bit_len = self.s.config.bit_len as usize;
        let body = match &step.action {
            Action::Pad => Body::Pad,
            Action::Advertise => {
                let node = self.s.node(step.actor).expect("actor exists");
                Body::Location { pos: self.behavior[k].advertised_pos.unwrap_or(node.pos) }
            }
            Action::Commit => {
                Body::Commit { commitment: secret.and_then(|s| s.committed.as_ref()).expect("committed secret").0 }
            }
            Action::Rapid { use_prev, nonces, .. } => {
                let mut bits = if !use_prev {
                    Bits::zeros(bit_len)
                } else if self.early[k] == Early::Guessed {
                    Bits::random(bit_len, self.guess_rngs.get_mut(&step.actor).expect("guess rng"))
                } else {
                    self.prev_bits(k)
                };
                let secret = secret.expect("rapid actor has nonces");
                for &i in nonces {
                    bits = bits.xor(&secret.nonces[i]).expect("equal nonce lengths");
                }
                Body::Rapid { round: step.round, bits }
            }
            Action::Close { nonce } => Body::Close { bits: secret.expect("closing nonce").nonces[*nonce].clone() },
            Action::Forward => Body::Rapid { round: step.round, bits: self.prev_bits(k) },
            Action::Open => {
                let opening = secret.and_then(|s| s.committed.as_ref()).expect("committed secret").1.clone();
                let kp = &self.keys.pairs[&step.actor];
                let signature =
                    self.s.config.auth_enabled.then(|| sign(&kp.secret, &self.session_transcript(step.session).0));
                Body::Open { opening, public: kp.public, signature }
            }
            Action::Report => {
                let view = NodeView::new(step.actor, self.sim.log(step.actor));
                let session = &self.plan.sessions[step.session as usize];
                let (bounds, transcript) = ring_report(self.s, session, &view);
                let kp = &self.keys.pairs[&step.actor];
                let signature =
                    self.s.config.auth_enabled.then(|| sign(&kp.secret, &report_message(&transcript, &bounds)));
                Body::Report { bounds, transcript, public: kp.public, signature }
            }
        };
        Message { session: step.session, step: k as u32, body }
    }

    fn emit(&mut self, k: usize) -> Result<(), RunError> {
        let now = self.sim.now();
        let actor = self.plan.steps[k].actor;
        let msg = self.payload(k);
        let seq = self.sim.schedule_broadcast(actor, msg, now, self.early[k] != Early::None)?;
        self.step_seq[k] = Some(seq);
        let Some(next) = self.plan.steps.get(k + 1) else { return Ok(()) };
        let next_actor = next.actor;
        let next_is_response = next.phase == Phase::Rapid && pending_kind(&next.action) == PendingKind::Response;
        self.decide(k + 1)?;
        if next_actor == actor {
            return self.schedule(k + 1, now);
        }
        let lead = match (self.behavior[k].leak_s, self.behavior[k + 1].guess_lead_s) {
            (Some(tau), _) if next_is_response => {
                self.early[k + 1] = Early::Leaked;
                // The challenger holds back its next emission by the same amount.
                *self.hold.entry(actor).or_default() += tau;
                Some(tau)
            }
            (_, Some(lead)) if next_is_response => {
                self.early[k + 1] = Early::Guessed;
                Some(lead)
            }
            _ => None,
        };
        match lead {
            Some(lead) => {
                let arrive = now + self.sim.flight_time(actor, next_actor)?;
                self.schedule(k + 1, (arrive - lead).max(now))
            }
            None => {
                self.awaiting.insert((seq, next_actor), k + 1);
                Ok(())
            }
        }
    }
}

pub fn execute(s: &Scenario, plan: &Plan, keys: &Keys) -> Result<Execution, RunError> {
    let positions = s.nodes.iter().map(|n| (n.id, n.pos)).collect();
    let ids = s.sorted_ids();
    let n_steps = plan.steps.len();
    let mut d = Driver {
        s,
        plan,
        keys,
        sim: Simulator::new(positions, s.config.c, s.rng_seed),
        policy_rngs: ids.iter().map(|&id| (id, node_rng(s.rng_seed, id, "policy"))).collect(),
        guess_rngs: ids.iter().map(|&id| (id, node_rng(s.rng_seed, id, "guess"))).collect(),
        behavior: vec![Behavior::default(); n_steps],
        early: vec![Early::None; n_steps],
        step_seq: vec![None; n_steps],
        awaiting: HashMap::new(),
        wake: HashMap::new(),
        hold: BTreeMap::new(),
    };
    if n_steps > 0 {
        d.decide(0)?;
        d.schedule(0, 0.0)?;
    }
    while let Some(ev) = d.sim.next_event() {
        match ev {
            Event::Arrival { seq, receiver, t, .. } => {
                if let Some(k) = d.awaiting.remove(&(seq, receiver)) {
                    d.schedule(k, t)?;
                }
            }
            Event::Wakeup { token, .. } => {
                let k = d.wake.remove(&token).expect("every wake-up belongs to a step");
                d.emit(k)?;
            }
        }
    }
    if let Some(k) = d.step_seq.iter().position(Option::is_none) {
        let st = &plan.steps[k];
        return Err(RunError::Sim(crate::simkit::SimError::ProtocolStall(format!(
            "step {k} ({:?} by node {}) never triggered",
            st.phase, st.actor
        ))));
    }
    let step_seq = d.step_seq.into_iter().map(|s| s.expect("checked above")).collect();
    let (trace, logs) = d.sim.into_parts();
    Ok(Execution { trace, logs, step_seq })
}
