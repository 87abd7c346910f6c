//! Message counts of the group settings, base case and ours.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::model::active_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "MPNV")]
    Mpnv,
    #[serde(rename = "1PNV")]
    OnePnv,
    #[serde(rename = "MP1V")]
    Mp1v,
    #[serde(rename = "1toM")]
    OneToM,
    #[serde(rename = "NtoM")]
    NtoM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    Base,
    Ours,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CountFormulaInput {
    pub n: Option<u64>,
    pub n_a: Option<u64>,
    pub d_a: Option<f64>,
    pub big_n: Option<u64>,
    pub big_m: Option<u64>,
}

fn need<T>(v: Option<T>, name: &'static str) -> Result<T, AnalysisError> {
    v.ok_or(AnalysisError::MissingField(name))
}

/// Verifiers active at fraction `d_a` of `n`: nearest integer, at least one.
pub fn active(d_a: f64, n: u64) -> u64 {
    active_count(d_a, n as usize) as u64
}

pub fn msg_count(setting: Setting, input: &CountFormulaInput, which: Which) -> Result<u64, AnalysisError> {
    let n = || need(input.n, "n");
    let n_a = || need(input.n_a, "n_a");
    let d_a = || need(input.d_a, "d_a");
    let big_n = || need(input.big_n, "N");
    let big_m = || need(input.big_m, "M");
    Ok(match (setting, which) {
        (Setting::Mpnv, Which::Base) => 2 * n()? * big_n()? * big_m()?,
        (Setting::Mpnv, Which::Ours) => (2 * n_a()? + 1) * active(d_a()?, big_n()?) * big_m()?,
        (Setting::OnePnv, Which::Base) => (2 * n()? + 1) * big_n()?,
        (Setting::OnePnv, Which::Ours) => (2 * n_a()? + 1) * active(d_a()?, big_n()?),
        (Setting::Mp1v, Which::Base) => (2 * n()? + 1) * big_m()?,
        (Setting::Mp1v, Which::Ours) => {
            let (n, m) = (n()? as i64, big_m()? as i64);
            let tail: i64 = (1..m).map(|j| (j + 1) * (n - ((m - 1) - j))).sum();
            (2 * n + tail).max(0) as u64
        }
        (Setting::OneToM, Which::Base) => 4 * n()? * big_m()?,
        (Setting::OneToM, Which::Ours) => n()? * (2 * big_m()? + 1),
        (Setting::NtoM, Which::Base) => 4 * n()? * big_n()? * big_m()?,
        (Setting::NtoM, Which::Ours) => 2 * n()? * (big_n()? + big_m()?),
    })
}

/// 1 − ours/base.
pub fn saving(base: u64, ours: u64) -> f64 {
    1.0 - ours as f64 / base as f64
}
