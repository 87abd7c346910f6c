//! Passive distance bounding: what an overhearing verifier V_p learns from the
//! challenge, response and next challenge of an exchange between V_a and P.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{distance, Point};
use crate::scalar::{Scalar, EPS_DISTANCE, EPS_TIME};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PassiveError {
    #[error("negative time of flight between active verifier and prover ({0} s)")]
    NegativeTimeOfFlight(f64),
    #[error("negative passive bound: gamma {gamma} m is below the active distance {active} m")]
    NegativeBound { gamma: f64, active: f64 },
    #[error("locus and circle do not intersect")]
    NoIntersection,
}

/// Timings at V_p, all read off V_p's own clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar + Serialize", deserialize = "S: Scalar + Deserialize<'de>"))]
pub struct PassiveObservation<S: Scalar> {
    /// Arrival of V_a's challenge.
    pub t1: S,
    /// Arrival of P's response.
    pub t2: S,
    /// Arrival of V_a's next message.
    pub t3: S,
    pub alpha_p: S,
    pub alpha_va: S,
    /// Distance between the two verifiers, metres.
    pub d_va_vp: S,
    pub c: S,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub va: Option<Point<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vp: Option<Point<S>>,
}

impl<S: Scalar> PassiveObservation<S> {
    /// The observation an ideal channel produces for the given placement.
    pub fn from_geometry(va: Point<S>, vp: Point<S>, p: Point<S>, t0: S, alpha_p: S, alpha_va: S, c: S) -> Self {
        let t = |a: Point<S>, b: Point<S>| distance(a, b) / c;
        let two = S::lit(2.0);
        Self {
            t1: t0 + t(va, vp),
            t2: t0 + t(va, p) + alpha_p + t(p, vp),
            t3: t0 + two * t(va, p) + alpha_p + alpha_va + t(va, vp),
            alpha_p,
            alpha_va,
            d_va_vp: distance(va, vp),
            c,
            va: Some(va),
            vp: Some(vp),
        }
    }

    /// δ1 = T2 − T1.
    pub fn delta1(&self) -> S {
        self.t2 - self.t1
    }
}

/// d(V_a, P) = c · ((T3 − T1) − α_P − α_Va) / 2.
pub fn active_distance_from_t1_t3<S: Scalar>(obs: &PassiveObservation<S>) -> Result<S, PassiveError> {
    let tof = ((obs.t3 - obs.t1) - obs.alpha_p - obs.alpha_va) / S::lit(2.0);
    if tof < -S::lit(EPS_TIME) {
        return Err(PassiveError::NegativeTimeOfFlight(tof.to_f64_lossy()));
    }
    Ok(obs.c * tof.max(S::zero()))
}

/// Γ = c · (δ1 − α_P) + d(V_a, V_p), the distance sum d(V_a, P) + d(V_p, P).
pub fn gamma<S: Scalar>(obs: &PassiveObservation<S>) -> S {
    obs.c * (obs.delta1() - obs.alpha_p) + obs.d_va_vp
}

/// d(V_p, P) = Γ − d(V_a, P). Needs only the verifier separation.
pub fn passive_bound_direct<S: Scalar>(obs: &PassiveObservation<S>) -> Result<S, PassiveError> {
    let active = active_distance_from_t1_t3(obs)?;
    let g = gamma(obs);
    let bound = g - active;
    if bound < -S::lit(EPS_DISTANCE) {
        return Err(PassiveError::NegativeBound { gamma: g.to_f64_lossy(), active: active.to_f64_lossy() });
    }
    Ok(bound.max(S::zero()))
}

/// Bound with distance-only knowledge of V_a: the point of the distance-sum
/// locus furthest from V_p, at (Γ + d(V_a, V_p)) / 2.
pub fn passive_bound_annulus<S: Scalar>(obs: &PassiveObservation<S>) -> Result<S, PassiveError> {
    passive_bound_direct(obs)?;
    Ok((gamma(obs) + obs.d_va_vp) / S::lit(2.0))
}

/// Points whose distances to the two foci sum to `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar + Serialize", deserialize = "S: Scalar + Deserialize<'de>"))]
pub struct SumLocus<S: Scalar> {
    /// (V_a, V_p).
    pub foci: (Point<S>, Point<S>),
    pub gamma: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar + Serialize", deserialize = "S: Scalar + Deserialize<'de>"))]
pub struct CircleLocus<S: Scalar> {
    pub center: Point<S>,
    pub radius: S,
}

/// Both loci of an observation when both verifier positions are known.
pub fn loci<S: Scalar>(obs: &PassiveObservation<S>) -> Result<Option<(SumLocus<S>, CircleLocus<S>)>, PassiveError> {
    let (Some(va), Some(vp)) = (obs.va, obs.vp) else { return Ok(None) };
    let radius = active_distance_from_t1_t3(obs)?;
    Ok(Some((SumLocus { foci: (va, vp), gamma: gamma(obs) }, CircleLocus { center: va, radius })))
}

/// Intersects the distance-sum locus with the circle around V_a, which is the
/// same as intersecting circle(V_a, r) with circle(V_p, Γ − r). Two points come
/// back in the order left then right of the V_a → V_p direction.
pub fn intersect_locus_circle<S: Scalar>(l: &SumLocus<S>, c: &CircleLocus<S>) -> Result<Vec<Point<S>>, PassiveError> {
    let (va, vp) = l.foci;
    let r1 = c.radius;
    let r2 = l.gamma - c.radius;
    if r1 < S::zero() || r2 < S::zero() {
        return Err(PassiveError::NoIntersection);
    }
    let d = distance(va, vp);
    if d == S::zero() {
        return Err(PassiveError::NoIntersection);
    }
    let two = S::lit(2.0);
    let ux = (vp.x - va.x) / d;
    let uy = (vp.y - va.y) / d;
    let a = (r1 * r1 - r2 * r2 + d * d) / (two * d);
    let h2 = r1 * r1 - a * a;
    let tol = S::lit(64.0) * S::epsilon() * (r1 * r1 + r2 * r2 + d * d);
    if h2 < -tol {
        return Err(PassiveError::NoIntersection);
    }
    let base = Point::new(va.x + a * ux, va.y + a * uy);
    if h2 <= tol {
        return Ok(vec![base]);
    }
    let h = h2.sqrt();
    Ok(vec![Point::new(base.x - h * uy, base.y + h * ux), Point::new(base.x + h * uy, base.y - h * ux)])
}
