//! Distance bounding protocols: one-way, interleaved mutual, one-to-many, the
//! multi-party ring, and the group constructions built from them.

pub mod agent;
pub mod measure;
pub mod message;
pub mod plan;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hash, Bits, Commitment, CryptoError, Digest, Signature};
use crate::estimate::{PassiveError, PassiveObservation, RingOrder};
use crate::model::{NodeId, ProtocolKind, Role, Scenario, ValidScenario, ValidationError};
use crate::simkit::{SimError, Trace};
use crate::threat::{cross_check_detect, DetectionReport, NodeReport, ThreatError};

pub use message::{Body, Message, Phase};
pub use plan::{build_plan, Plan};

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum ProtoError {
    #[error("response mismatch in round {round}")]
    ResponseMismatch { round: u32 },
    #[error("commitment of node {0} does not open to the bits it used")]
    CommitMismatch(NodeId),
    #[error("authentication failure: {0}")]
    AuthFailure(String),
    #[error("solve failure: {0}")]
    SolveFailure(String),
    #[error("message of step {0} was never received")]
    MissingMessage(usize),
    #[error("no location advertised by node {0}")]
    MissingLocation(NodeId),
    #[error("no active verifier selected")]
    NoActiveVerifier,
    #[error("bit strings differ in length")]
    LengthMismatch,
    #[error("node {0} sent no commitment")]
    MissingCommitment(NodeId),
    #[error("ring order differs from the agreed one")]
    RingMismatch,
    #[error("passive estimate: {0}")]
    Passive(String),
}

impl From<PassiveError> for ProtoError {
    fn from(e: PassiveError) -> Self {
        ProtoError::Passive(e.to_string())
    }
}

/// f(c, r): the response to challenge `challenge` under nonce `responder_nonce`.
pub fn response_bits(challenge: &Bits, responder_nonce: &Bits) -> Result<Bits, ProtoError> {
    challenge.xor(responder_nonce).ok_or(ProtoError::LengthMismatch)
}

/// Sorts `members` by the hash of their commitment digests, ties by id.
pub fn ring_order(members: &[NodeId], commitments: &BTreeMap<NodeId, Commitment>) -> Result<RingOrder, ProtoError> {
    let mut keyed = members
        .iter()
        .map(|&m| {
            let c = commitments.get(&m).ok_or(ProtoError::MissingCommitment(m))?;
            Ok((hash(&c.0 .0), m))
        })
        .collect::<Result<Vec<(Digest, NodeId)>, ProtoError>>()?;
    keyed.sort();
    Ok(RingOrder(keyed.into_iter().map(|(_, m)| m).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    Active,
    Passive,
    MultiParty,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Active => "Active",
            Method::Passive => "Passive",
            Method::MultiParty => "MultiParty",
        }
    }
}

/// One timed round, on the challenger's clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub challenge: Bits,
    pub response: Bits,
    pub t_send: f64,
    pub t_recv: f64,
}

impl RoundRecord {
    /// c·(t_recv − t_send − α)/2.
    pub fn bound(&self, alpha: f64, c: f64) -> f64 {
        c * (self.t_recv - self.t_send - alpha) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbEstimate {
    pub measurer: NodeId,
    pub target: NodeId,
    /// Meters.
    pub bound: f64,
    pub method: Method,
    pub rounds_used: usize,
    pub verified_auth: bool,
    /// Bound the protocol produced but does not need.
    pub surplus: bool,
    pub rounds: Vec<RoundRecord>,
    pub passive: Vec<PassiveObservation<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFailure {
    pub measurer: NodeId,
    pub target: NodeId,
    pub session: u32,
    pub error: ProtoError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingReport {
    pub node: NodeId,
    pub bounds: Vec<(NodeId, f64)>,
    pub transcript: Digest,
    pub signature: Option<Signature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPartyTranscript {
    pub commitments: BTreeMap<NodeId, Commitment>,
    pub ring: RingOrder,
    /// Rapid-phase emissions in order.
    pub rapid: Vec<(NodeId, Bits)>,
    pub reports: Vec<RingReport>,
    /// Largest solver residual per node, seconds.
    pub residuals: BTreeMap<NodeId, f64>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid scenario: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<ValidationError>),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Threat(#[from] ThreatError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Protocol(#[from] ProtoError),
}

pub struct RunOutcome {
    pub trace: Trace<Message>,
    /// Sorted by (measurer, target).
    pub estimates: Vec<DbEstimate>,
    pub failures: Vec<SessionFailure>,
    pub transcript: Option<MultiPartyTranscript>,
    pub detection: Option<DetectionReport>,
    pub active_verifiers: Vec<NodeId>,
    pub plan: Plan,
}

impl RunOutcome {
    pub fn estimate(&self, measurer: NodeId, target: NodeId) -> Option<&DbEstimate> {
        self.estimates.iter().find(|e| e.measurer == measurer && e.target == target)
    }

    /// Emissions in the timed phase, the quantity the message-count formulas give.
    pub fn rapid_count(&self) -> usize {
        rapid_count(&self.trace)
    }

    pub fn total_count(&self) -> usize {
        self.trace.emission_count()
    }

    /// Stops at the first failed session.
    pub fn into_result(self) -> Result<Self, RunError> {
        match self.failures.first() {
            Some(f) => Err(RunError::Protocol(f.error.clone())),
            None => Ok(self),
        }
    }
}

pub fn rapid_count(trace: &Trace<Message>) -> usize {
    trace.count_where(|m| m.phase().is_rapid())
}

fn ring_transcript(
    plan: &Plan,
    exec: &agent::Execution,
    residuals: BTreeMap<NodeId, f64>,
) -> Option<MultiPartyTranscript> {
    let session = plan.sessions.iter().find(|x| x.kind == plan::SessionKind::Ring)?;
    let em = &exec.trace.emissions;
    let mut commitments = BTreeMap::new();
    let mut reports = Vec::new();
    for (k, step) in plan.steps.iter().enumerate() {
        if step.session != session.id {
            continue;
        }
        match &em[exec.step_seq[k] as usize].payload.body {
            Body::Commit { commitment } => {
                commitments.insert(step.actor, *commitment);
            }
            Body::Report { bounds, transcript, signature, .. } => reports.push(RingReport {
                node: step.actor,
                bounds: bounds.clone(),
                transcript: *transcript,
                signature: *signature,
            }),
            _ => {}
        }
    }
    let rapid = session
        .rapid_steps
        .iter()
        .map(|&k| {
            let e = &em[exec.step_seq[k] as usize];
            (e.sender, e.payload.bits().cloned().expect("rapid steps carry bits"))
        })
        .collect();
    Some(MultiPartyTranscript { commitments, ring: session.ring.clone()?, rapid, reports, residuals })
}

/// Runs a validated scenario end to end. Session-level failures are reported
/// in the outcome; only simulator or policy faults are errors.
pub fn run(vs: &ValidScenario) -> Result<RunOutcome, RunError> {
    let s: &Scenario = vs;
    let plan = build_plan(s)?;
    if matches!(s.protocol, ProtocolKind::Mpnv | ProtocolKind::NtoMPassive) && plan.active_verifiers.is_empty() {
        return Err(ProtoError::NoActiveVerifier.into());
    }
    let keys = agent::make_keys(s);
    let exec = agent::execute(s, &plan, &keys)?;
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    let mut residuals = BTreeMap::new();
    for id in s.sorted_ids() {
        let view = measure::NodeView::new(id, exec.logs.get(&id).map_or(&[][..], Vec::as_slice));
        let out = measure::node_outcome(s, &plan, &keys.registry, id, &view);
        estimates.extend(out.estimates);
        failures.extend(out.failures);
        if let Some(r) = out.residual {
            residuals.insert(id, r);
        }
    }
    estimates.sort_by_key(|e| (e.measurer, e.target));
    let transcript = ring_transcript(&plan, &exec, residuals);
    let detection = transcript.as_ref().map(|t| {
        let reports: Vec<NodeReport> = t
            .reports
            .iter()
            .map(|r| NodeReport { node: r.node, bounds: r.bounds.iter().copied().collect(), transcript: r.transcript })
            .collect();
        cross_check_detect(&reports, None)
    });
    Ok(RunOutcome {
        trace: exec.trace,
        estimates,
        failures,
        transcript,
        detection,
        active_verifiers: plan.active_verifiers.clone(),
        plan,
    })
}

fn validated(s: Scenario) -> Result<ValidScenario, RunError> {
    s.validate().map_err(RunError::Validation)
}

fn with_protocol(mut s: Scenario, protocol: ProtocolKind) -> Scenario {
    s.protocol = protocol;
    s
}

fn pick(out: &RunOutcome, a: NodeId, b: NodeId) -> Result<DbEstimate, RunError> {
    out.estimate(a, b).cloned().ok_or(RunError::Protocol(ProtoError::MissingMessage(0)))
}

/// One-way DB of the scenario's active verifier on its prover.
pub fn run_one_way_db(s: Scenario) -> Result<DbEstimate, RunError> {
    let vs = validated(with_protocol(s, ProtocolKind::OneWayDb))?;
    let v = vs.ids_with(Role::ActiveVerifier)[0];
    let p = vs.provers()[0];
    let out = run(&vs)?.into_result()?;
    pick(&out, v, p)
}

/// Both directions of the interleaved mutual DB between the two nodes.
pub fn run_mutual_db_interleaved(s: Scenario) -> Result<(DbEstimate, DbEstimate), RunError> {
    let vs = validated(with_protocol(s, ProtocolKind::MutualInterleaved))?;
    let ids = vs.sorted_ids();
    let out = run(&vs)?.into_result()?;
    Ok((pick(&out, ids[0], ids[1])?, pick(&out, ids[1], ids[0])?))
}

/// Lowest id initiates; the 2M bounds between it and every participant.
pub fn run_one_to_many(s: Scenario) -> Result<Vec<DbEstimate>, RunError> {
    let vs = validated(with_protocol(s, ProtocolKind::OneToMany))?;
    Ok(run(&vs)?.into_result()?.estimates)
}

pub fn run_multiparty_gdb(s: Scenario) -> Result<(MultiPartyTranscript, Vec<DbEstimate>), RunError> {
    let vs = validated(with_protocol(s, ProtocolKind::MultiPartyRing))?;
    let out = run(&vs)?.into_result()?;
    let t = out.transcript.clone().expect("ring runs carry a transcript");
    Ok((t, out.estimates))
}

pub fn run_mpnv(s: Scenario) -> Result<Vec<DbEstimate>, RunError> {
    let vs = validated(with_protocol(s, ProtocolKind::Mpnv))?;
    Ok(run(&vs)?.into_result()?.estimates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NtoMVariant {
    Passive,
    Multiparty,
    OneToMany,
}

pub fn run_ntom(s: Scenario, variant: NtoMVariant) -> Result<Vec<DbEstimate>, RunError> {
    let protocol = match variant {
        NtoMVariant::Passive => ProtocolKind::NtoMPassive,
        NtoMVariant::Multiparty => ProtocolKind::NtoMMultiparty,
        NtoMVariant::OneToMany => ProtocolKind::NtoMOneToMany,
    };
    let vs = validated(with_protocol(s, protocol))?;
    Ok(run(&vs)?.into_result()?.estimates)
}
