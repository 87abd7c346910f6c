//! Wire messages. Every message names its session and its step in the plan,
//! standing in for the sequence numbers a real radio frame would carry.

use serde::{Deserialize, Serialize};

use crate::crypto::{hash_parts, Bits, Commitment, Digest, Opening, PublicKey, Signature};
use crate::model::{NodeId, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Setup,
    Location,
    Commit,
    Rapid,
    Close,
    Open,
    Report,
}

impl Phase {
    /// Rapid-phase emissions as counted by the message-count formulas.
    pub fn is_rapid(self) -> bool {
        matches!(self, Phase::Rapid | Phase::Close)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Body {
    Pad,
    Location { pos: Position },
    Commit { commitment: Commitment },
    Rapid { round: u32, bits: Bits },
    Close { bits: Bits },
    Open { opening: Opening, public: PublicKey, signature: Option<Signature> },
    Report { bounds: Vec<(NodeId, f64)>, transcript: Digest, public: PublicKey, signature: Option<Signature> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub session: u32,
    pub step: u32,
    pub body: Body,
}

impl Message {
    pub fn phase(&self) -> Phase {
        match self.body {
            Body::Pad => Phase::Setup,
            Body::Location { .. } => Phase::Location,
            Body::Commit { .. } => Phase::Commit,
            Body::Rapid { .. } => Phase::Rapid,
            Body::Close { .. } => Phase::Close,
            Body::Open { .. } => Phase::Open,
            Body::Report { .. } => Phase::Report,
        }
    }

    pub fn bits(&self) -> Option<&Bits> {
        match &self.body {
            Body::Rapid { bits, .. } | Body::Close { bits } => Some(bits),
            _ => None,
        }
    }
}

/// Digest over an ordered challenge/response sequence of one session.
pub fn transcript_digest<'a>(session: u32, rapid: impl IntoIterator<Item = (u32, NodeId, &'a Bits)>) -> Digest {
    let mut parts: Vec<Vec<u8>> = vec![b"transcript".to_vec(), session.to_le_bytes().to_vec()];
    for (step, sender, bits) in rapid {
        parts.push(step.to_le_bytes().to_vec());
        parts.push(sender.0.to_le_bytes().to_vec());
        parts.push(bits.to_string().into_bytes());
    }
    hash_parts(parts.iter().map(Vec::as_slice))
}

/// Bytes covered by a report signature.
pub fn report_message(transcript: &Digest, bounds: &[(NodeId, f64)]) -> Vec<u8> {
    let mut out = transcript.0.to_vec();
    for (id, b) in bounds {
        out.extend_from_slice(&id.0.to_le_bytes());
        out.extend_from_slice(&b.to_le_bytes());
    }
    out
}
