use gdb_core::crypto::Bits;
use gdb_core::model::{ExperimentParams, NodeId, NodeSpec, Position, ProtocolConfig, ProtocolKind, Role, Scenario};
use gdb_core::proto::{
    build_plan, run, run_mpnv, run_multiparty_gdb, run_mutual_db_interleaved, run_ntom, run_one_to_many,
    run_one_way_db, Body, Method, NtoMVariant, ProtoError, RunError,
};
use gdb_core::scenarios;
use gdb_core::threat::{AdversaryPolicy, DelayRule};
use gdb_core::{EPS_DISTANCE, SPEED_OF_LIGHT};

fn dist(s: &Scenario, a: u32, b: u32) -> f64 {
    let pa = s.node(NodeId(a)).unwrap().pos;
    let pb = s.node(NodeId(b)).unwrap().pos;
    ((pa.x - pb.x).powi(2) + (pa.y - pb.y).powi(2)).sqrt()
}

#[test]
fn one_way_honest_300m() {
    let e = run_one_way_db(scenarios::one_way(300.0, scenarios::config(10), 1)).unwrap();
    assert!((e.bound - 300.0).abs() <= EPS_DISTANCE);
    assert_eq!(e.method, Method::Active);
    assert_eq!(e.rounds.len(), 10);
    for r in &e.rounds {
        assert!(r.t_recv > r.t_send);
        assert!(((r.t_recv - r.t_send) - 600.0 / SPEED_OF_LIGHT).abs() < 1e-12);
    }
}

#[test]
fn one_way_counts() {
    let s = scenarios::one_way(300.0, scenarios::config(10), 1);
    let out = run(&s.validate().unwrap()).unwrap();
    assert_eq!(out.rapid_count(), 20);
    assert_eq!(out.total_count(), 22);
}

#[test]
fn processing_time_is_subtracted() {
    let alpha = 1e-6;
    let cfg = ProtocolConfig { alpha, ..scenarios::config(4) };
    let e = run_one_way_db(scenarios::one_way(300.0, cfg, 2)).unwrap();
    assert!((e.bound - 300.0).abs() <= EPS_DISTANCE);
    // Charging the whole round trip to processing leaves nothing.
    for r in &e.rounds {
        assert!(r.bound(r.t_recv - r.t_send, SPEED_OF_LIGHT).abs() <= EPS_DISTANCE);
    }
}

#[test]
fn delayed_responses_lengthen_by_half_c_delta() {
    let delta = 40e-9;
    let mut s = scenarios::one_way(300.0, scenarios::config(6), 3);
    s.nodes[1].policy = AdversaryPolicy::SelectiveDelay {
        delays: vec![DelayRule { message: None, round: None, target: None, delay_s: delta }],
    };
    let e = run_one_way_db(s).unwrap();
    assert!((e.bound - (300.0 + SPEED_OF_LIGHT * delta / 2.0)).abs() <= EPS_DISTANCE);
}

#[test]
fn mutual_counts_and_symmetry() {
    let pts = [Position::new(0.0, 0.0), Position::new(120.0, 50.0)];
    let s = scenarios::peers(ProtocolKind::MutualInterleaved, &pts, scenarios::config(10), 4);
    let out = run(&s.clone().validate().unwrap()).unwrap();
    assert_eq!(out.total_count(), 25);
    assert_eq!(out.rapid_count(), 21);
    let (a, b) = run_mutual_db_interleaved(s).unwrap();
    assert!((a.bound - 130.0).abs() <= EPS_DISTANCE);
    assert!((b.bound - 130.0).abs() <= EPS_DISTANCE);
}

#[test]
fn mutual_single_round_message_pattern() {
    let pts = [Position::new(0.0, 0.0), Position::new(30.0, 40.0)];
    let s = scenarios::peers(ProtocolKind::MutualInterleaved, &pts, scenarios::config(1), 5);
    let vs = s.validate().unwrap();
    let out = run(&vs).unwrap();
    let rapid: Vec<_> = out.trace.emissions.iter().filter(|e| e.payload.phase().is_rapid()).collect();
    assert_eq!(rapid.len(), 3);
    // c1, c1 ⊕ s1, c2 ⊕ s1 with c from node 1 and s from node 2.
    let secret = |node| &out.plan.secrets[&(0, NodeId(node))].nonces;
    let (c, sb) = (secret(1), secret(2));
    let bits = |i: usize| rapid[i].payload.bits().unwrap().clone();
    assert_eq!(bits(0), c[0]);
    assert_eq!(bits(1), c[0].xor(&sb[0]).unwrap());
    assert_eq!(bits(2), c[1].xor(&sb[0]).unwrap());
    assert_eq!([rapid[0].sender, rapid[1].sender, rapid[2].sender], [NodeId(1), NodeId(2), NodeId(1)]);
}

#[test]
fn one_to_many_counts_and_bounds() {
    let pts = scenarios::random_positions(4, 500.0, 6);
    let s = scenarios::peers(ProtocolKind::OneToMany, &pts, scenarios::config(10), 6);
    let out = run(&s.clone().validate().unwrap()).unwrap();
    assert_eq!(out.rapid_count(), 70);
    let est = run_one_to_many(s.clone()).unwrap();
    assert_eq!(est.len(), 6);
    for e in &est {
        assert!((e.bound - dist(&s, e.measurer.0, e.target.0)).abs() <= EPS_DISTANCE);
    }
}

#[test]
fn one_to_many_single_participant_is_mutual_pattern() {
    let pts = [Position::new(0.0, 0.0), Position::new(80.0, 60.0)];
    let cfg = scenarios::config(3);
    let one = run(&scenarios::peers(ProtocolKind::OneToMany, &pts, cfg.clone(), 7).validate().unwrap()).unwrap();
    let senders: Vec<_> =
        one.trace.emissions.iter().filter(|e| e.payload.phase().is_rapid()).map(|e| e.sender).collect();
    assert_eq!(senders.len(), 3 * 3);
    for round in senders.chunks(3) {
        assert_eq!(round, [NodeId(1), NodeId(2), NodeId(1)]);
    }
}

#[test]
fn ring_four_nodes_one_round() {
    let s = scenarios::peers(ProtocolKind::MultiPartyRing, &scenarios::square4(), scenarios::config(1), 8);
    let (t, est) = run_multiparty_gdb(s.clone()).unwrap();
    assert_eq!(t.rapid.len(), 8);
    for id in &t.ring.0 {
        assert_eq!(t.rapid.iter().filter(|(x, _)| x == id).count(), 2);
    }
    assert_eq!(est.len(), 12);
    for e in &est {
        assert_eq!(e.method, Method::MultiParty);
        assert!((e.bound - dist(&s, e.measurer.0, e.target.0)).abs() <= EPS_DISTANCE);
    }
    assert_eq!(t.reports.len(), 4);
}

#[test]
fn ring_first_node_round_trips() {
    // Messages 2 and 6 reach the first ring node exactly one round trip after
    // it sent messages 1 and 5.
    let s = scenarios::peers(ProtocolKind::MultiPartyRing, &scenarios::square4(), scenarios::config(1), 9);
    let out = run(&s.clone().validate().unwrap()).unwrap();
    let ring = out.transcript.as_ref().unwrap().ring.clone();
    let p1 = ring.0[0];
    let readings = gdb_core::acceptance::ring_readings(&out, p1);
    let tof = |a: NodeId, b: NodeId| dist(&s, a.0, b.0) / SPEED_OF_LIGHT;
    assert!(((readings[1] - readings[0]) - 2.0 * tof(p1, ring.0[1])).abs() < 1e-12);
    assert!(((readings[5] - readings[4]) - 2.0 * tof(p1, ring.0[3])).abs() < 1e-12);
}

#[test]
fn ring_six_nodes_two_rounds() {
    let pts = scenarios::random_positions(6, 1000.0, 10);
    let s = scenarios::peers(ProtocolKind::MultiPartyRing, &pts, scenarios::config(2), 10);
    let (t, est) = run_multiparty_gdb(s.clone()).unwrap();
    assert_eq!(t.rapid.len(), 2 * 2 * 6);
    assert_eq!(est.len(), 30);
    for e in &est {
        assert!((e.bound - dist(&s, e.measurer.0, e.target.0)).abs() <= EPS_DISTANCE);
    }
}

#[test]
fn ring_order_agrees_with_every_member() {
    let s = scenarios::peers(ProtocolKind::MultiPartyRing, &scenarios::square4(), scenarios::config(1), 11);
    let out = run(&s.validate().unwrap()).unwrap();
    let t = out.transcript.unwrap();
    let recomputed =
        gdb_core::proto::ring_order(&[NodeId(4), NodeId(2), NodeId(3), NodeId(1)], &t.commitments).unwrap();
    assert_eq!(recomputed, t.ring);
    assert!(out.failures.is_empty());
}

#[test]
fn ring_of_three_is_rejected() {
    let pts = scenarios::random_positions(3, 100.0, 12);
    let s = scenarios::peers(ProtocolKind::MultiPartyRing, &pts, scenarios::config(1), 12);
    let err = run_multiparty_gdb(s).unwrap_err();
    assert!(err.to_string().contains("N must be ≥ 4"), "{err}");
}

#[test]
fn honest_ring_detection_is_empty() {
    let s = scenarios::peers(ProtocolKind::MultiPartyRing, &scenarios::square4(), scenarios::config(2), 13);
    let out = run(&s.validate().unwrap()).unwrap();
    assert!(out.detection.unwrap().is_empty());
}

#[test]
fn mpnv_full_activity_has_no_passive_rounds() {
    let e = ExperimentParams { n_a: Some(3), d_a: Some(1.0), ..Default::default() };
    let s = scenarios::mpnv(3, 2, scenarios::config(3), e, 14);
    let est = run_mpnv(s.clone()).unwrap();
    assert_eq!(est.len(), 6);
    for x in &est {
        assert_eq!(x.method, Method::Active);
        assert!(x.passive.is_empty() || x.rounds.len() == 3);
        assert!((x.bound - dist(&s, x.measurer.0, x.target.0)).abs() <= EPS_DISTANCE);
    }
}

#[test]
fn mpnv_passive_verifiers_bound_every_prover() {
    let e = ExperimentParams { n_a: Some(4), d_a: Some(0.4), ..Default::default() };
    let s = scenarios::mpnv(5, 3, scenarios::config(6), e, 15);
    let out = run(&s.clone().validate().unwrap()).unwrap();
    assert_eq!(out.active_verifiers.len(), 2);
    assert_eq!(out.rapid_count(), 9 * 2 * 3);
    assert_eq!(out.estimates.len(), 15);
    for x in &out.estimates {
        let want = if out.active_verifiers.contains(&x.measurer) { Method::Active } else { Method::Passive };
        assert_eq!(x.method, want);
        assert!((x.bound - dist(&s, x.measurer.0, x.target.0)).abs() <= EPS_DISTANCE);
    }
}

#[test]
fn mpnv_labelled_roles_fix_the_active_set() {
    let e = ExperimentParams { d_a: Some(0.5), ..Default::default() };
    let mut s = scenarios::mpnv(4, 1, scenarios::config(2), e, 16);
    s.nodes[0].role = Role::PassiveVerifier;
    s.nodes[2].role = Role::PassiveVerifier;
    let out = run(&s.validate().unwrap()).unwrap();
    assert_eq!(out.active_verifiers, vec![NodeId(2), NodeId(4)]);
}

#[test]
fn ntom_multiparty_counts_and_surplus() {
    let s = scenarios::ntom(ProtocolKind::NtoMMultiparty, 5, 5, scenarios::config(10), ExperimentParams::default(), 17);
    let out = run(&s.clone().validate().unwrap()).unwrap();
    assert_eq!(out.rapid_count(), 200);
    let est = run_ntom(s, NtoMVariant::Multiparty).unwrap();
    assert_eq!(est.len(), 90);
    let cross = est.iter().filter(|e| !e.surplus).count();
    assert_eq!(cross, 2 * 5 * 5);
    assert!(est.iter().filter(|e| e.surplus).all(|e| (e.measurer.0 <= 5) == (e.target.0 <= 5)));
}

#[test]
fn ntom_one_to_many_single_initiator() {
    let s = scenarios::ntom(ProtocolKind::NtoMOneToMany, 1, 4, scenarios::config(5), ExperimentParams::default(), 18);
    let out = run(&s.clone().validate().unwrap()).unwrap();
    assert_eq!(out.rapid_count(), 5 * (2 * 4 + 1));
    let est = run_ntom(s, NtoMVariant::OneToMany).unwrap();
    assert_eq!(est.len(), 8);
}

#[test]
fn ntom_passive_covers_all_cross_pairs() {
    let e = ExperimentParams { d_1: Some(0.5), d_2: Some(0.5), n_a1: Some(2), n_a2: Some(3), ..Default::default() };
    let s = scenarios::ntom(ProtocolKind::NtoMPassive, 4, 4, scenarios::config(3), e, 19);
    let est = run_ntom(s.clone(), NtoMVariant::Passive).unwrap();
    assert_eq!(est.len(), 2 * 4 * 4);
    for x in &est {
        assert!((x.bound - dist(&s, x.measurer.0, x.target.0)).abs() <= EPS_DISTANCE);
    }
}

#[test]
fn inserted_node_fails_authentication() {
    let cfg = ProtocolConfig { auth_enabled: true, ..scenarios::config(3) };
    let mut s = scenarios::one_way(100.0, cfg.clone(), 20);
    s.nodes[1].policy = AdversaryPolicy::NodeInsertion;
    let err = run_one_way_db(s).unwrap_err();
    assert!(matches!(err, RunError::Protocol(ProtoError::AuthFailure(_))), "{err}");

    let mut ring = scenarios::peers(ProtocolKind::MultiPartyRing, &scenarios::square4(), cfg.clone(), 20);
    ring.nodes[2].has_cert = false;
    let out = run(&ring.validate().unwrap()).unwrap();
    assert!(!out.failures.is_empty());
    assert!(out.failures.iter().all(|f| f.target == NodeId(3) && matches!(f.error, ProtoError::AuthFailure(_))));

    let honest = run_one_way_db(scenarios::one_way(100.0, cfg, 20)).unwrap();
    assert!(honest.verified_auth);
}

#[test]
fn authenticated_ring_reports_are_signed() {
    let cfg = ProtocolConfig { auth_enabled: true, ..scenarios::config(1) };
    let s = scenarios::peers(ProtocolKind::MultiPartyRing, &scenarios::square4(), cfg, 21);
    let (t, est) = run_multiparty_gdb(s).unwrap();
    assert!(t.reports.iter().all(|r| r.signature.is_some()));
    assert!(est.iter().all(|e| e.verified_auth));
}

#[test]
fn tampered_response_is_caught() {
    // A guessing prover that always guesses is caught unless every guess hits.
    let mut s = scenarios::one_way(300.0, scenarios::config(8), 22);
    s.nodes[1].policy = AdversaryPolicy::GuessAhead { lead_s: 1e-6, fraction: 1.0 };
    match run_one_way_db(s) {
        Err(RunError::Protocol(ProtoError::ResponseMismatch { round })) => assert!((1..=8).contains(&round)),
        other => panic!("expected a response mismatch, got {other:?}"),
    }
}

#[test]
fn early_challenge_without_probability_matches_honest_trace() {
    let pts = [Position::new(0.0, 0.0), Position::new(0.0, 10.0), Position::new(-7.0, -7.0)];
    let honest = scenarios::passive(pts[0], pts[1], pts[2], scenarios::config(5), 23);
    let mut early = honest.clone();
    early.nodes[0].policy = AdversaryPolicy::EarlyChallenge { advance_s: 5e-9, pr_ch: 0.0 };
    let a = run(&honest.validate().unwrap()).unwrap();
    let b = run(&early.validate().unwrap()).unwrap();
    assert_eq!(a.trace.to_jsonl(), b.trace.to_jsonl());
}

#[test]
fn early_challenges_shorten_the_passive_bound() {
    let tau = 10e-9;
    let pts = [Position::new(0.0, 0.0), Position::new(0.0, 10.0), Position::new(-70.0, -70.0)];
    let honest = scenarios::passive(pts[0], pts[1], pts[2], scenarios::config(4), 24);
    let mut early = honest.clone();
    early.nodes[0].policy = AdversaryPolicy::EarlyChallenge { advance_s: tau, pr_ch: 1.0 };
    let a = run(&honest.validate().unwrap()).unwrap();
    let b = run(&early.validate().unwrap()).unwrap();
    let pa = a.estimate(NodeId(3), NodeId(2)).unwrap().bound;
    let pb = b.estimate(NodeId(3), NodeId(2)).unwrap().bound;
    assert!((pa - pb - SPEED_OF_LIGHT * tau).abs() <= 1e-5, "{pa} vs {pb}");
}

#[test]
fn fake_location_misleads_passive_verifier() {
    let pts = [Position::new(0.0, 0.0), Position::new(0.0, 10.0), Position::new(-7.0, -7.0)];
    let mut s = scenarios::passive(pts[0], pts[1], pts[2], scenarios::config(3), 25);
    s.nodes[0].policy = AdversaryPolicy::FakeLocationReport { claimed_pos: Position::new(0.0, 5.0) };
    let out = run(&s.validate().unwrap()).unwrap();
    let advertised = out.trace.emissions.iter().find_map(|e| match e.payload.body {
        Body::Location { pos } => Some(pos),
        _ => None,
    });
    assert_eq!(advertised, Some(Position::new(0.0, 5.0)));
    let passive = out.estimate(NodeId(3), NodeId(2)).unwrap().bound;
    assert!((passive - 7.0f64.hypot(17.0)).abs() > 1.0);
}

#[test]
fn relay_adds_the_detour() {
    let v = Position::new(0.0, 0.0);
    let p = Position::new(300.0, 0.0);
    let a = Position::new(100.0, 100.0);
    let e = run_one_way_db(scenarios::relay(v, p, a, scenarios::config(3), 26)).unwrap();
    let detour = v.distance(&a) + a.distance(&p);
    assert!((e.bound - detour).abs() <= EPS_DISTANCE);
}

#[test]
fn single_delayed_ring_message_is_detected() {
    let (_, ring, out) = gdb_core::acceptance::ring_attack(&[(2, &[(3, 30e-9)])], 27);
    let d = out.detection.unwrap();
    assert!(!d.is_empty());
    assert!(d.accused.contains(&ring.0[2]) || !d.evidence.is_empty());
}

#[test]
fn uniform_self_delay_reads_as_longer_distance() {
    let delta = 50e-9;
    let (s, ring, out) = gdb_core::acceptance::ring_attack(&[(2, &[(3, delta), (7, delta)])], 28);
    let p3 = ring.0[2];
    assert!(out.detection.unwrap().is_empty());
    for e in &out.estimates {
        let extra = if e.measurer == p3 || e.target == p3 { SPEED_OF_LIGHT * delta / 2.0 } else { 0.0 };
        assert!((e.bound - dist(&s, e.measurer.0, e.target.0) - extra).abs() <= EPS_DISTANCE);
    }
}

#[test]
fn plans_are_deterministic() {
    let pts = scenarios::random_positions(5, 300.0, 29);
    let s = scenarios::peers(ProtocolKind::MultiPartyRing, &pts, scenarios::config(2), 29);
    let a = run(&s.clone().validate().unwrap()).unwrap();
    let b = run(&s.validate().unwrap()).unwrap();
    assert_eq!(a.trace.to_jsonl(), b.trace.to_jsonl());
    assert_eq!(a.estimates, b.estimates);
}

#[test]
fn mpnv_without_provers_is_invalid() {
    let s = Scenario {
        nodes: vec![NodeSpec::new(1, Position::new(0.0, 0.0), Role::ActiveVerifier)],
        protocol: ProtocolKind::Mpnv,
        config: scenarios::config(2),
        experiment: ExperimentParams::default(),
        rng_seed: 0,
    };
    assert!(matches!(run_mpnv(s), Err(RunError::Validation(_))));
}

#[test]
fn plan_nonces_are_bit_strings_of_configured_length() {
    let cfg = ProtocolConfig { bit_len: 4, ..scenarios::config(3) };
    let s = scenarios::one_way(100.0, cfg, 30);
    let plan = build_plan(&s).unwrap();
    for secret in plan.secrets.values() {
        assert!(secret.nonces.iter().all(|b: &Bits| b.len() == 4));
    }
    assert!(run_one_way_db(s).is_ok());
}
