//! Closed-form emission counts per protocol, checked against a trace.

use serde::Serialize;

use super::counts::{msg_count, CountFormulaInput, Setting, Which};
use crate::model::{active_count, ProtocolKind, Role, Scenario};
use crate::proto::{rapid_count, Message};
use crate::simkit::Trace;

/// Expected emissions of a scenario: the timed phase and everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClosedForm {
    pub rapid: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconcileReport {
    pub expected: ClosedForm,
    pub simulated: ClosedForm,
    pub mismatches: Vec<String>,
}

impl ReconcileReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn pairs(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// Active verifiers a one-way group scenario will use.
fn mpnv_active(s: &Scenario) -> u64 {
    let active = s.ids_with(Role::ActiveVerifier).len();
    if active > 0 && !s.ids_with(Role::PassiveVerifier).is_empty() {
        active as u64
    } else {
        active_count(s.d_a(), s.verifiers().len()) as u64
    }
}

pub fn closed_form(s: &Scenario) -> ClosedForm {
    use ProtocolKind::*;
    let n = s.config.n as u64;
    let c = s.config.pre_post_msgs as u64;
    let total_nodes = s.nodes.len() as u64;
    let one_way = |rounds: u64, closing: bool| 2 * rounds + closing as u64;
    match s.protocol {
        OneWayDb => {
            let observed = !s.ids_with(Role::PassiveVerifier).is_empty();
            let relay = s.nodes.iter().any(|x| x.policy.kind_name() == "Relay");
            let rapid = if relay { 4 * n } else { one_way(n, observed) };
            ClosedForm { rapid, total: rapid + c + observed as u64 }
        }
        MutualInterleaved => ClosedForm { rapid: 2 * n + 1, total: 2 * n + 2 * c + 1 },
        OneToMany => {
            let m = total_nodes - 1;
            let input = CountFormulaInput { n: Some(n), big_m: Some(m), ..Default::default() };
            let rapid = msg_count(Setting::OneToM, &input, Which::Ours).expect("complete input");
            ClosedForm { rapid, total: rapid + c * (m + 1) }
        }
        MultiPartyRing => {
            let rapid = 2 * n * total_nodes;
            ClosedForm { rapid, total: rapid + (c + 1) * total_nodes }
        }
        Mpnv => {
            let k = mpnv_active(s);
            let m = s.provers().len() as u64;
            let rapid = (2 * s.n_a() as u64 + 1) * k * m;
            ClosedForm { rapid, total: rapid + k * m * c + k }
        }
        MpnvBaseline => {
            let v = s.verifiers().len() as u64;
            let m = s.provers().len() as u64;
            let input = CountFormulaInput { n: Some(n), big_n: Some(v), big_m: Some(m), ..Default::default() };
            let rapid = msg_count(Setting::Mpnv, &input, Which::Base).expect("complete input");
            ClosedForm { rapid, total: rapid + v * m * c }
        }
        NtoMPassive => {
            let (g1, g2) = s.groups();
            let (gn, gm) = (g1.len() as u64, g2.len() as u64);
            let e = &s.experiment;
            let k1 = active_count(e.d_1.unwrap_or(1.0), g1.len()) as u64;
            let k2 = active_count(e.d_2.unwrap_or(1.0), g2.len()) as u64;
            let n1 = e.n_a1.map_or(n, u64::from);
            let n2 = e.n_a2.map_or(n, u64::from);
            let rapid = (2 * n1 + 1) * k1 * gm + (2 * n2 + 1) * k2 * gn;
            ClosedForm { rapid, total: rapid + (k1 * gm + k2 * gn) * c + k1 + k2 }
        }
        NtoMMultiparty => {
            let (g1, g2) = s.groups();
            let input = CountFormulaInput {
                n: Some(n),
                big_n: Some(g1.len() as u64),
                big_m: Some(g2.len() as u64),
                ..Default::default()
            };
            let rapid = msg_count(Setting::NtoM, &input, Which::Ours).expect("complete input");
            ClosedForm { rapid, total: rapid + (c + 1) * total_nodes }
        }
        NtoMOneToMany => {
            let (g1, g2) = s.groups();
            let (gn, gm) = (g1.len() as u64, g2.len() as u64);
            let rapid = n * gn * (2 * gm + 1);
            ClosedForm { rapid, total: rapid + gn * c * (gm + 1) }
        }
        SequentialPairwise => {
            let p = pairs(total_nodes);
            ClosedForm { rapid: 4 * n * p, total: p * (4 * n + 2 * c) }
        }
        SequentialInterleaved => {
            let p = pairs(total_nodes);
            ClosedForm { rapid: (2 * n + 1) * p, total: p * (2 * n + 1 + 2 * c) }
        }
    }
}

pub fn reconcile(trace: &Trace<Message>, expected: &ClosedForm) -> ReconcileReport {
    let simulated = ClosedForm { rapid: rapid_count(trace) as u64, total: trace.emission_count() as u64 };
    let mut mismatches = Vec::new();
    if simulated.rapid != expected.rapid {
        mismatches
            .push(format!("rapid-phase emissions: simulated {} vs closed form {}", simulated.rapid, expected.rapid));
    }
    if simulated.total != expected.total {
        mismatches.push(format!("total emissions: simulated {} vs closed form {}", simulated.total, expected.total));
    }
    ReconcileReport { expected: *expected, simulated, mismatches }
}
