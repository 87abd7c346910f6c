//! The time-of-flight system each ring member builds from one cycle of 2N
//! overheard messages.
//!
//! Message j of a cycle is sent by `cycle_senders(ring)[j]`. Each sender answers
//! the previous message, so its send time is t0 plus the hop flight times and
//! processing delays along the chain. An observer records its own send times
//! and the arrival times of everyone else's messages, which adds one final hop.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::linalg::{independent_rows, solve_square, LinalgError};
use crate::model::NodeId;
use crate::scalar::Scalar;

pub const PIVOT_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TofError {
    #[error("incomplete cycle: expected {expected} timings, got {got}")]
    IncompleteCycle { expected: usize, got: usize },
    #[error("observer {0} is not in the ring")]
    NotInRing(NodeId),
    #[error("ring needs at least 4 members, got {0}")]
    RingTooSmall(usize),
    #[error("solve failure: {0}")]
    SolveFailure(#[from] LinalgError),
    #[error("solve failure: rank {rank} below {unknowns} unknowns")]
    RankDeficient { rank: usize, unknowns: usize },
}

/// Ring order agreed from the commitments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingOrder(pub Vec<NodeId>);

impl RingOrder {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.0.iter().position(|&x| x == id)
    }

    pub fn are_neighbors(&self, a: NodeId, b: NodeId) -> bool {
        let n = self.0.len();
        match (self.position(a), self.position(b)) {
            (Some(i), Some(j)) => (i + 1) % n == j || (j + 1) % n == i,
            _ => false,
        }
    }
}

/// Senders of one cycle: clockwise from the head, back to the head, then counter-clockwise.
pub fn cycle_senders(ring: &RingOrder) -> Vec<NodeId> {
    let r = &ring.0;
    let mut out = r.clone();
    out.push(r[0]);
    out.extend(r[1..].iter().rev());
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unknown {
    Start,
    /// Flight time between two nodes, lower id first.
    Tof(NodeId, NodeId),
}

fn pair(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TofSystem<S: Scalar> {
    pub observer: NodeId,
    pub ring: RingOrder,
    pub unknowns: Vec<Unknown>,
    /// One row per message of the cycle, in cycle order.
    pub rows: Vec<Vec<S>>,
    /// Times relative to the observer's reading of message 1.
    pub rhs: Vec<S>,
    /// Observer-clock time of message 1, added back to t0.
    pub origin: S,
}

/// Builds the system from the observer's 2N readings of one cycle, in cycle
/// order. `alpha` is the per-hop processing delay.
pub fn build_tof_system<S: Scalar>(
    observer: NodeId,
    ring: &RingOrder,
    local_times: &[S],
    alpha: S,
) -> Result<TofSystem<S>, TofError> {
    let n = ring.len();
    if n < 4 {
        return Err(TofError::RingTooSmall(n));
    }
    if local_times.len() != 2 * n {
        return Err(TofError::IncompleteCycle { expected: 2 * n, got: local_times.len() });
    }
    let me = ring.position(observer).ok_or(TofError::NotInRing(observer))?;

    let mut unknowns = vec![Unknown::Start];
    for i in 0..n {
        let (a, b) = pair(ring.0[i], ring.0[(i + 1) % n]);
        unknowns.push(Unknown::Tof(a, b));
    }
    for k in 2..n - 1 {
        let (a, b) = pair(observer, ring.0[(me + k) % n]);
        unknowns.push(Unknown::Tof(a, b));
    }
    let col: BTreeMap<Unknown, usize> = unknowns.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let tof_col = |a: NodeId, b: NodeId| {
        let (x, y) = pair(a, b);
        col[&Unknown::Tof(x, y)]
    };

    let senders = cycle_senders(ring);
    let mut rows = Vec::with_capacity(2 * n);
    let mut rhs = Vec::with_capacity(2 * n);
    let mut path = vec![S::zero(); unknowns.len()];
    path[0] = S::one();
    let origin = local_times[0];
    for (j, &s) in senders.iter().enumerate() {
        if j > 0 {
            path[tof_col(senders[j - 1], s)] += S::one();
        }
        let mut row = path.clone();
        if s != observer {
            row[tof_col(s, observer)] += S::one();
        }
        rows.push(row);
        rhs.push(local_times[j] - origin - S::lit(j as f64) * alpha);
    }
    Ok(TofSystem { observer, ring: ring.clone(), unknowns, rows, rhs, origin })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TofSolution<S: Scalar> {
    pub t0: S,
    pub tofs: BTreeMap<(NodeId, NodeId), S>,
    /// Largest |row · x − rhs| over every row, including the unused ones.
    pub residual: S,
    /// Cycle rows (0-based) used for the square solve.
    pub used_rows: Vec<usize>,
}

impl<S: Scalar> TofSolution<S> {
    pub fn tof(&self, a: NodeId, b: NodeId) -> Option<S> {
        self.tofs.get(&pair(a, b)).copied()
    }

    pub fn is_consistent(&self) -> bool {
        self.residual < S::lit(RESIDUAL_TOL)
    }
}

/// Solves with the first independent rows in message order and reports the
/// residual over all rows.
pub fn solve_tof<S: Scalar>(sys: &TofSystem<S>) -> Result<TofSolution<S>, TofError> {
    let k = sys.unknowns.len();
    let used = independent_rows(&sys.rows, k, S::lit(PIVOT_TOL));
    if used.len() < k {
        return Err(TofError::RankDeficient { rank: used.len(), unknowns: k });
    }
    let a = used.iter().map(|&i| sys.rows[i].clone()).collect();
    let b = used.iter().map(|&i| sys.rhs[i]).collect();
    let x = solve_square(a, b, S::lit(PIVOT_TOL))?;
    let mut residual = S::zero();
    for (row, &r) in sys.rows.iter().zip(&sys.rhs) {
        let v = row.iter().zip(&x).fold(S::zero(), |acc, (a, b)| acc + *a * *b);
        residual = residual.max((v - r).abs());
    }
    let mut tofs = BTreeMap::new();
    let mut t0 = S::zero();
    for (u, v) in sys.unknowns.iter().zip(&x) {
        match *u {
            Unknown::Start => t0 = *v + sys.origin,
            Unknown::Tof(a, b) => {
                tofs.insert((a, b), *v);
            }
        }
    }
    Ok(TofSolution { t0, tofs, residual, used_rows: used })
}
