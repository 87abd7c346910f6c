//! Total time of the group settings, base case and ours, from pairwise
//! times of flight.
//!
//! Node indices by setting: MPNV verifiers `0..N`, provers `N..N+M`; 1PNV
//! verifiers `0..N`, prover `N`; MP1V verifier `0`, provers `1..=M`; 1toM
//! initiator `0`, participants `1..=M`; NtoM group one `0..N`, group two
//! `N..N+M`.

use std::collections::BTreeMap;

use super::counts::{active, Setting, Which};
use super::AnalysisError;
use crate::scalar::Scalar;

/// Symmetric table of pairwise times of flight, seconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TofTable<S: Scalar> {
    entries: BTreeMap<(usize, usize), S>,
}

impl<S: Scalar> TofTable<S> {
    pub fn new() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn set(&mut self, a: usize, b: usize, t: S) {
        self.entries.insert((a.min(b), a.max(b)), t);
    }

    pub fn get(&self, a: usize, b: usize) -> Result<S, AnalysisError> {
        self.entries.get(&(a.min(b), a.max(b))).copied().ok_or(AnalysisError::MissingToF(a, b))
    }

    /// Table of all pairs from point coordinates.
    pub fn from_points(points: &[crate::geometry::Point<S>], c: S) -> Self {
        let mut t = Self::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                t.set(i, j, points[i].distance(&points[j]) / c);
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeParams {
    pub n: u32,
    pub n_a: u32,
    pub d_a: f64,
    pub big_n: usize,
    pub big_m: usize,
    /// Active verifier indices; the first round(d_a·N) when absent.
    pub active: Option<Vec<usize>>,
}

fn sum<S: Scalar>(it: impl IntoIterator<Item = Result<S, AnalysisError>>) -> Result<S, AnalysisError> {
    it.into_iter().try_fold(S::zero(), |acc, t| Ok(acc + t?))
}

fn max<S: Scalar>(it: impl IntoIterator<Item = Result<S, AnalysisError>>) -> Result<S, AnalysisError> {
    it.into_iter().try_fold(S::zero(), |acc, t| Ok(acc.max(t?)))
}

pub fn time_bound<S: Scalar>(
    setting: Setting,
    which: Which,
    tofs: &TofTable<S>,
    p: &TimeParams,
) -> Result<S, AnalysisError> {
    let n = S::lit(p.n as f64);
    let two = S::lit(2.0);
    let ours_factor = S::lit((2 * p.n_a + 1) as f64);
    let (big_n, big_m) = (p.big_n, p.big_m);
    let actives = || p.active.clone().unwrap_or_else(|| (0..active(p.d_a, big_n as u64) as usize).collect::<Vec<_>>());
    match (setting, which) {
        (Setting::Mpnv, Which::Base) => {
            Ok(two * n * sum((0..big_n).flat_map(|i| (0..big_m).map(move |j| tofs.get(i, big_n + j))))?)
        }
        (Setting::Mpnv, Which::Ours) => {
            let a = actives();
            Ok(ours_factor * sum(a.iter().flat_map(|&i| (0..big_m).map(move |j| tofs.get(i, big_n + j))))?)
        }
        (Setting::OnePnv, Which::Base) => Ok(two * n * sum((0..big_n).map(|i| tofs.get(i, big_n)))?),
        (Setting::OnePnv, Which::Ours) => Ok(ours_factor * sum(actives().iter().map(|&i| tofs.get(i, big_n)))?),
        (Setting::Mp1v, Which::Base) => Ok(two * n * sum((1..=big_m).map(|j| tofs.get(0, j)))?),
        (Setting::Mp1v, Which::Ours) => {
            let longest = max((1..=big_m).map(|j| tofs.get(0, j)))?;
            Ok(n * longest + sum((1..big_m).map(|j| tofs.get(0, j)))?)
        }
        (Setting::OneToM, Which::Base) => Ok(S::lit(4.0) * n * sum((1..=big_m).map(|j| tofs.get(0, j)))?),
        (Setting::OneToM, Which::Ours) => {
            let k = big_m + 1;
            Ok(two * n * sum((0..k).map(|j| tofs.get(j, (j + 1) % k)))?)
        }
        (Setting::NtoM, Which::Base) => {
            Ok(S::lit(4.0) * n * sum((0..big_n).flat_map(|i| (0..big_m).map(move |j| tofs.get(i, big_n + j))))?)
        }
        (Setting::NtoM, Which::Ours) => {
            let all = big_n + big_m;
            let longest = max((0..all).flat_map(|i| (i + 1..all).map(move |j| tofs.get(i, j))))?;
            Ok(two * n * S::lit(all as f64) * longest)
        }
    }
}
