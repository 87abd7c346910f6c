//! Grids behind the four correctness and message-count panels.

use std::fmt;
use std::str::FromStr;

use super::counts::{active, msg_count, saving, CountFormulaInput, Setting, Which};
use super::dbc::{dbc_ap, dbc_avg};
use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// DBC_avg over cheating fraction × Pr_ch, N=10, n=10.
    F6a,
    /// DBC_a/p over passive opportunities × Pr_ch, n_a=2, N=10.
    F6b,
    /// MPNV messages over d_a × n_a, N=M=10, n=10.
    F6c,
    /// MPNV messages over N=M × f with n_a=round(f·n), d_a=f.
    F6d,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::F6a, Figure::F6b, Figure::F6c, Figure::F6d];

    pub fn name(self) -> &'static str {
        match self {
            Figure::F6a => "6a",
            Figure::F6b => "6b",
            Figure::F6c => "6c",
            Figure::F6d => "6d",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| AnalysisError::UnknownFigure(s.to_string()))
    }
}

fn tenths() -> impl Iterator<Item = f64> {
    (0..=10).map(|i| i as f64 / 10.0)
}

fn csv_of(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for r in rows {
        w.write_record(&r).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

/// DBC_avg with round(fraction·N) verifiers cheating at `pr` and the rest honest.
pub fn fig6a_value(fraction: f64, pr: f64) -> f64 {
    let big_n = 10usize;
    let cheaters = (fraction * big_n as f64).round() as usize;
    let pr_list: Vec<f64> = (0..big_n).map(|i| if i < cheaters { pr } else { 0.0 }).collect();
    dbc_avg(&[10; 10], &pr_list).expect("equal lengths")
}

fn mpnv_counts(n: u64, n_a: u64, d_a: f64, nm: u64) -> (u64, u64) {
    let i = CountFormulaInput { n: Some(n), n_a: Some(n_a), d_a: Some(d_a), big_n: Some(nm), big_m: Some(nm) };
    (
        msg_count(Setting::Mpnv, &i, Which::Base).expect("complete input"),
        msg_count(Setting::Mpnv, &i, Which::Ours).expect("complete input"),
    )
}

/// CSV grid for one panel; rows in lexicographic parameter order.
pub fn emit_figure_data(which: &str) -> Result<String, AnalysisError> {
    Ok(figure_csv(which.parse()?))
}

pub fn figure_csv(fig: Figure) -> String {
    match fig {
        Figure::F6a => {
            let mut rows = Vec::new();
            for f in tenths() {
                for pr in tenths() {
                    rows.push(vec![f.to_string(), pr.to_string(), fig6a_value(f, pr).to_string()]);
                }
            }
            csv_of(&["fraction_cheating", "pr_ch", "value"], rows)
        }
        Figure::F6b => {
            let mut rows = Vec::new();
            for n_p in 0..=10u32 {
                for pr in tenths() {
                    let v: f64 = dbc_ap(2, &[n_p; 10], &[pr; 10]).expect("equal lengths");
                    rows.push(vec![n_p.to_string(), pr.to_string(), v.to_string()]);
                }
            }
            csv_of(&["n_p", "pr_ch", "value"], rows)
        }
        Figure::F6c => {
            let mut rows = Vec::new();
            for d_a in (1..=10).map(|i| i as f64 / 10.0) {
                for n_a in 1..=10u64 {
                    let (base, ours) = mpnv_counts(10, n_a, d_a, 10);
                    rows.push(vec![
                        d_a.to_string(),
                        n_a.to_string(),
                        base.to_string(),
                        ours.to_string(),
                        saving(base, ours).to_string(),
                    ]);
                }
            }
            csv_of(&["d_a", "n_a", "base", "value", "saving"], rows)
        }
        Figure::F6d => {
            let mut rows = Vec::new();
            for nm in (5..=50u64).step_by(5) {
                for f in (1..=10).map(|i| i as f64 / 10.0) {
                    let n_a = active(f, 10);
                    let (base, ours) = mpnv_counts(10, n_a, f, nm);
                    rows.push(vec![
                        nm.to_string(),
                        f.to_string(),
                        n_a.to_string(),
                        base.to_string(),
                        ours.to_string(),
                        saving(base, ours).to_string(),
                    ]);
                }
            }
            csv_of(&["N", "fraction", "n_a", "base", "value", "saving"], rows)
        }
    }
}
