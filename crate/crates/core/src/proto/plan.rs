//! Compiles a scenario into one causal chain of steps. Each step is taken by
//! its actor once the previous step's message reaches it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;

use crate::crypto::{commit, Bits, Commitment, CryptoError, Opening};
use crate::estimate::RingOrder;
use crate::model::{active_count, NodeId, ProtocolKind, Role, Scenario};
use crate::simkit::{node_rng, run_rng};
use crate::threat::{AdversaryPolicy, PendingKind};

use super::message::Phase;
use super::ring_order;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SessionKind {
    Location,
    OneWay,
    Mutual,
    OneToMany,
    Ring,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Pad,
    Advertise,
    Commit,
    /// Bits = (previous step's bits if `use_prev`) ⊕ the listed own nonces.
    Rapid {
        use_prev: bool,
        nonces: Vec<usize>,
        kind: PendingKind,
    },
    /// A fresh uncommitted nonce after the last response, closing the final round for observers.
    Close {
        nonce: usize,
    },
    /// Re-broadcast of the previous step's bits (relay attacker).
    Forward,
    Open,
    Report,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub actor: NodeId,
    pub session: u32,
    pub phase: Phase,
    pub action: Action,
    /// 1-based rapid round, 0 outside the rapid phase.
    pub round: u32,
    /// 1-based index inside the rapid cycle, 0 outside the rapid phase.
    pub cycle_index: u32,
    pub responds_to: Option<NodeId>,
}

/// A round-trip measurement: `measurer` times its `probe` step against the `reply`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub measurer: NodeId,
    pub target: NodeId,
    pub round: u32,
    pub probe: usize,
    pub reply: usize,
}

/// Three consecutive messages of a one-way exchange, as seen by observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassiveRound {
    pub active: NodeId,
    pub prover: NodeId,
    pub round: u32,
    pub challenge: usize,
    pub response: usize,
    pub next: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: u32,
    pub kind: SessionKind,
    pub parties: Vec<NodeId>,
    pub committers: Vec<NodeId>,
    pub probes: Vec<Probe>,
    pub passive: Vec<PassiveRound>,
    pub observers: Vec<NodeId>,
    pub rapid_steps: Vec<usize>,
    pub rounds: u32,
    pub ring: Option<RingOrder>,
}

/// Nonces a node uses in one session, with the commitment when they are committed.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSecret {
    pub nonces: Vec<Bits>,
    pub committed: Option<(Commitment, Opening)>,
}

#[derive(Debug, Clone, Default)]
pub struct Plan {
    pub steps: Vec<Step>,
    pub sessions: Vec<Session>,
    pub secrets: BTreeMap<(u32, NodeId), SessionSecret>,
    pub active_verifiers: Vec<NodeId>,
    /// Node pairs whose bounds the protocol does not need (intra-group in NtoM).
    pub surplus: BTreeSet<(NodeId, NodeId)>,
    index: HashMap<(u32, NodeId, Phase), usize>,
}

impl Plan {
    /// First step of `actor` in `phase` of `session`.
    pub fn find_step(&self, session: u32, actor: NodeId, phase: Phase) -> Option<usize> {
        self.index.get(&(session, actor, phase)).copied()
    }

    fn reindex(&mut self) {
        self.index.clear();
        for (k, s) in self.steps.iter().enumerate() {
            self.index.entry((s.session, s.actor, s.phase)).or_insert(k);
        }
    }
}

struct Builder<'a> {
    s: &'a Scenario,
    plan: Plan,
    nonce_rngs: BTreeMap<NodeId, rand_chacha::ChaCha8Rng>,
    commit_rngs: BTreeMap<NodeId, rand_chacha::ChaCha8Rng>,
}

impl<'a> Builder<'a> {
    fn new(s: &'a Scenario) -> Self {
        let ids = s.sorted_ids();
        Self {
            s,
            plan: Plan::default(),
            nonce_rngs: ids.iter().map(|&id| (id, node_rng(s.rng_seed, id, "nonce"))).collect(),
            commit_rngs: ids.iter().map(|&id| (id, node_rng(s.rng_seed, id, "blinding"))).collect(),
        }
    }

    fn bit_len(&self) -> usize {
        self.s.config.bit_len as usize
    }

    fn push(&mut self, actor: NodeId, session: u32, phase: Phase, action: Action) -> usize {
        self.plan.steps.push(Step { actor, session, phase, action, round: 0, cycle_index: 0, responds_to: None });
        self.plan.steps.len() - 1
    }

    fn rapid(&mut self, actor: NodeId, session: u32, action: Action, round: u32, cycle_index: u32) -> usize {
        let responds_to = self.plan.steps.last().filter(|p| p.phase.is_rapid()).map(|p| p.actor);
        let phase = if matches!(action, Action::Close { .. }) { Phase::Close } else { Phase::Rapid };
        self.plan.steps.push(Step { actor, session, phase, action, round, cycle_index, responds_to });
        let i = self.plan.steps.len() - 1;
        self.plan.sessions.last_mut().expect("open session").rapid_steps.push(i);
        i
    }

    fn secret(&mut self, session: u32, node: NodeId, count: usize, committed: bool) -> Result<(), CryptoError> {
        let len = self.bit_len();
        let rng = self.nonce_rngs.get_mut(&node).expect("node rng");
        let nonces: Vec<Bits> = (0..count).map(|_| Bits::random(len, rng)).collect();
        let committed = if committed {
            let rng = self.commit_rngs.get_mut(&node).expect("node rng");
            Some(commit(&Bits::concat(&nonces), rng)?)
        } else {
            None
        };
        self.plan.secrets.insert((session, node), SessionSecret { nonces, committed });
        Ok(())
    }

    fn open_session(&mut self, kind: SessionKind, parties: Vec<NodeId>, committers: Vec<NodeId>, rounds: u32) -> u32 {
        let id = self.plan.sessions.len() as u32;
        self.plan.sessions.push(Session {
            id,
            kind,
            parties,
            committers,
            probes: Vec::new(),
            passive: Vec::new(),
            observers: Vec::new(),
            rapid_steps: Vec::new(),
            rounds,
            ring: None,
        });
        id
    }

    fn session(&mut self) -> &mut Session {
        self.plan.sessions.last_mut().expect("open session")
    }

    fn pads(&mut self, node: NodeId, session: u32) {
        for _ in 2..self.s.config.pre_post_msgs {
            self.push(node, session, Phase::Setup, Action::Pad);
        }
    }

    fn advertise(&mut self, nodes: &[NodeId]) {
        for &v in nodes {
            let sid = self.open_session(SessionKind::Location, vec![v], vec![], 0);
            self.push(v, sid, Phase::Location, Action::Advertise);
        }
    }

    /// Verifier `v` times prover `p` for `rounds` rounds. With `closing`, one
    /// extra verifier message ends the last round for observers. A relay node
    /// sits between them and forwards every rapid message.
    fn one_way(
        &mut self,
        v: NodeId,
        p: NodeId,
        rounds: u32,
        closing: bool,
        observers: Vec<NodeId>,
        relay: Option<NodeId>,
    ) -> Result<(), CryptoError> {
        let sid = self.open_session(SessionKind::OneWay, vec![v, p], vec![p], rounds);
        self.secret(sid, v, rounds as usize + closing as usize, false)?;
        self.secret(sid, p, rounds as usize, true)?;
        self.pads(p, sid);
        self.push(p, sid, Phase::Commit, Action::Commit);
        let mut passive = Vec::new();
        for r in 1..=rounds {
            let i = (r - 1) as usize;
            let ch = self.rapid(
                v,
                sid,
                Action::Rapid { use_prev: false, nonces: vec![i], kind: PendingKind::Challenge },
                r,
                1,
            );
            let mut idx = 2;
            if let Some(a) = relay {
                self.rapid(a, sid, Action::Forward, r, idx);
                idx += 1;
            }
            let resp = self.rapid(
                p,
                sid,
                Action::Rapid { use_prev: true, nonces: vec![i], kind: PendingKind::Response },
                r,
                idx,
            );
            let mut reply = resp;
            if let Some(a) = relay {
                reply = self.rapid(a, sid, Action::Forward, r, idx + 1);
            }
            self.session().probes.push(Probe { measurer: v, target: p, round: r, probe: ch, reply });
            passive.push((r, ch, resp));
        }
        if closing {
            self.rapid(v, sid, Action::Close { nonce: rounds as usize }, rounds + 1, 1);
        }
        if !observers.is_empty() {
            let steps = self.session().rapid_steps.clone();
            let challenges: Vec<usize> = steps.iter().copied().filter(|&k| self.plan.steps[k].actor == v).collect();
            for (j, &(round, challenge, response)) in passive.iter().enumerate() {
                if let Some(&next) = challenges.get(j + 1) {
                    self.session().passive.push(PassiveRound {
                        active: v,
                        prover: p,
                        round,
                        challenge,
                        response,
                        next,
                    });
                }
            }
            self.session().observers = observers;
        }
        self.push(p, sid, Phase::Open, Action::Open);
        Ok(())
    }

    /// Interleaved mutual exchange: a sends c1, then b and a alternate with
    /// c_i ⊕ s_i and c_{i+1} ⊕ s_i.
    fn mutual(&mut self, a: NodeId, b: NodeId, n: u32) -> Result<(), CryptoError> {
        let sid = self.open_session(SessionKind::Mutual, vec![a, b], vec![a, b], n);
        self.secret(sid, a, n as usize + 1, true)?;
        self.secret(sid, b, n as usize, true)?;
        self.pads(a, sid);
        self.pads(b, sid);
        self.push(a, sid, Phase::Commit, Action::Commit);
        self.push(b, sid, Phase::Commit, Action::Commit);
        let mut prev_a =
            self.rapid(a, sid, Action::Rapid { use_prev: false, nonces: vec![0], kind: PendingKind::Challenge }, 1, 1);
        for r in 1..=n {
            let i = (r - 1) as usize;
            let b_nonces = if i == 0 { vec![0] } else { vec![i - 1, i] };
            let mb = self.rapid(
                b,
                sid,
                Action::Rapid { use_prev: true, nonces: b_nonces, kind: PendingKind::Response },
                r,
                2,
            );
            let ma = self.rapid(
                a,
                sid,
                Action::Rapid { use_prev: true, nonces: vec![i, i + 1], kind: PendingKind::Response },
                r + 1,
                1,
            );
            self.session().probes.push(Probe { measurer: a, target: b, round: r, probe: prev_a, reply: mb });
            self.session().probes.push(Probe { measurer: b, target: a, round: r, probe: mb, reply: ma });
            prev_a = ma;
        }
        self.push(a, sid, Phase::Open, Action::Open);
        self.push(b, sid, Phase::Open, Action::Open);
        Ok(())
    }

    /// Per round: I, J1, I, J2, ..., JM, I, each message answering the previous one.
    fn one_to_many(&mut self, init: NodeId, others: &[NodeId], n: u32) -> Result<(), CryptoError> {
        let m = others.len();
        let mut parties = vec![init];
        parties.extend_from_slice(others);
        let sid = self.open_session(SessionKind::OneToMany, parties.clone(), parties.clone(), n);
        self.secret(sid, init, n as usize * (m + 1), true)?;
        for &j in others {
            self.secret(sid, j, n as usize, true)?;
        }
        for &p in &parties {
            self.pads(p, sid);
        }
        for &p in &parties {
            self.push(p, sid, Phase::Commit, Action::Commit);
        }
        let mut init_used = 0;
        for r in 1..=n {
            let first = self.rapid(
                init,
                sid,
                Action::Rapid { use_prev: false, nonces: vec![init_used], kind: PendingKind::Challenge },
                r,
                1,
            );
            init_used += 1;
            let mut last_init = first;
            for (k, &j) in others.iter().enumerate() {
                let cj = self.rapid(
                    j,
                    sid,
                    Action::Rapid { use_prev: true, nonces: vec![(r - 1) as usize], kind: PendingKind::Response },
                    r,
                    2 * k as u32 + 2,
                );
                let ci = self.rapid(
                    init,
                    sid,
                    Action::Rapid { use_prev: true, nonces: vec![init_used], kind: PendingKind::Response },
                    r,
                    2 * k as u32 + 3,
                );
                init_used += 1;
                self.session().probes.push(Probe { measurer: init, target: j, round: r, probe: last_init, reply: cj });
                self.session().probes.push(Probe { measurer: j, target: init, round: r, probe: cj, reply: ci });
                last_init = ci;
            }
        }
        for &p in &parties {
            self.push(p, sid, Phase::Open, Action::Open);
        }
        Ok(())
    }

    /// Mutual multi-party exchange over the ring agreed from the commitments.
    fn ring(&mut self, members: &[NodeId], n: u32) -> Result<(), CryptoError> {
        let sid = self.open_session(SessionKind::Ring, members.to_vec(), members.to_vec(), n);
        let mut commitments = BTreeMap::new();
        for &p in members {
            self.secret(sid, p, 2 * n as usize, true)?;
            let c = self.plan.secrets[&(sid, p)].committed.as_ref().expect("ring nonces are committed").0;
            commitments.insert(p, c);
        }
        let order = ring_order(members, &commitments).expect("every member committed");
        self.session().ring = Some(order.clone());
        for &p in members {
            self.pads(p, sid);
        }
        for &p in members {
            self.push(p, sid, Phase::Commit, Action::Commit);
        }
        let senders = crate::estimate::cycle_senders(&order);
        let mut used: BTreeMap<NodeId, usize> = BTreeMap::new();
        for r in 1..=n {
            for (j, &s) in senders.iter().enumerate() {
                let k = used.entry(s).or_default();
                let first = r == 1 && j == 0;
                let kind = if first { PendingKind::Challenge } else { PendingKind::Response };
                let action = Action::Rapid { use_prev: !first, nonces: vec![*k], kind };
                *k += 1;
                self.rapid(s, sid, action, r, j as u32 + 1);
            }
        }
        for &p in &order.0 {
            self.push(p, sid, Phase::Open, Action::Open);
        }
        for &p in &order.0 {
            self.push(p, sid, Phase::Report, Action::Report);
        }
        Ok(())
    }
}

/// Picks `k` of `candidates` with the run seed; result sorted by id.
pub fn select_active(seed: u64, candidates: &[NodeId], k: usize, purpose: &str) -> Vec<NodeId> {
    let mut v = candidates.to_vec();
    v.shuffle(&mut run_rng(seed, purpose));
    v.truncate(k);
    v.sort();
    v
}

fn pairs(ids: &[NodeId]) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

/// Active verifiers of an MPNV scenario: the labels when both verifier labels
/// are present, otherwise a seeded random choice of round(d_a·N).
pub fn mpnv_active(s: &Scenario) -> Vec<NodeId> {
    let verifiers = s.verifiers();
    let labelled_active = s.ids_with(Role::ActiveVerifier);
    if !labelled_active.is_empty() && !s.ids_with(Role::PassiveVerifier).is_empty() {
        return labelled_active;
    }
    select_active(s.rng_seed, &verifiers, active_count(s.d_a(), verifiers.len()), "active-verifiers")
}

pub fn build_plan(s: &Scenario) -> Result<Plan, CryptoError> {
    use ProtocolKind::*;
    let mut b = Builder::new(s);
    let n = s.config.n;
    match s.protocol {
        OneWayDb => {
            let v = s.ids_with(Role::ActiveVerifier)[0];
            let p = s.provers()[0];
            let observers = s.ids_with(Role::PassiveVerifier);
            let relay = s
                .nodes
                .iter()
                .find(|x| matches!(x.policy, AdversaryPolicy::Relay { victim } if victim == p))
                .map(|x| x.id);
            if !observers.is_empty() {
                b.advertise(&[v]);
            }
            let closing = !observers.is_empty();
            b.plan.active_verifiers = vec![v];
            b.one_way(v, p, n, closing, observers, relay)?;
        }
        MutualInterleaved => {
            let ids = s.sorted_ids();
            b.mutual(ids[0], ids[1], n)?;
        }
        OneToMany => {
            let ids = s.sorted_ids();
            b.one_to_many(ids[0], &ids[1..], n)?;
        }
        MultiPartyRing => b.ring(&s.sorted_ids(), n)?,
        Mpnv => {
            let active = mpnv_active(s);
            let verifiers = s.verifiers();
            b.advertise(&active);
            for &v in &active {
                for p in s.provers() {
                    let observers = verifiers.iter().copied().filter(|&x| x != v).collect();
                    b.one_way(v, p, s.n_a(), true, observers, None)?;
                }
            }
            b.plan.active_verifiers = active;
        }
        MpnvBaseline => {
            let verifiers = s.verifiers();
            for &v in &verifiers {
                for p in s.provers() {
                    b.one_way(v, p, n, false, vec![], None)?;
                }
            }
            b.plan.active_verifiers = verifiers;
        }
        NtoMPassive => {
            let (g1, g2) = s.groups();
            let e = &s.experiment;
            let a1 = select_active(s.rng_seed, &g1, active_count(e.d_1.unwrap_or(1.0), g1.len()), "active-g1");
            let a2 = select_active(s.rng_seed, &g2, active_count(e.d_2.unwrap_or(1.0), g2.len()), "active-g2");
            let mut adverts = a1.clone();
            adverts.extend(&a2);
            b.advertise(&adverts);
            for (active, group, targets, rounds) in
                [(&a1, &g1, &g2, e.n_a1.unwrap_or(n)), (&a2, &g2, &g1, e.n_a2.unwrap_or(n))]
            {
                for &v in active {
                    for &p in targets {
                        let observers = group.iter().copied().filter(|&x| x != v).collect();
                        b.one_way(v, p, rounds, true, observers, None)?;
                    }
                }
            }
            b.plan.active_verifiers = adverts;
        }
        NtoMMultiparty => {
            let (g1, g2) = s.groups();
            b.ring(&s.sorted_ids(), n)?;
            for g in [&g1, &g2] {
                for (x, y) in pairs(g) {
                    b.plan.surplus.insert((x, y));
                    b.plan.surplus.insert((y, x));
                }
            }
        }
        NtoMOneToMany => {
            let (g1, g2) = s.groups();
            for &i in &g1 {
                b.one_to_many(i, &g2, n)?;
            }
        }
        SequentialPairwise => {
            for (x, y) in pairs(&s.sorted_ids()) {
                b.one_way(x, y, n, false, vec![], None)?;
                b.one_way(y, x, n, false, vec![], None)?;
            }
        }
        SequentialInterleaved => {
            for (x, y) in pairs(&s.sorted_ids()) {
                b.mutual(x, y, n)?;
            }
        }
    }
    b.plan.reindex();
    Ok(b.plan)
}
