// SPDX-License-Identifier: Apache-2.0

//! Property tests against the reference oracles.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use paramon::engine::{Algorithm, EngineConfig, Session};
use paramon::report::{parse_machine, render_machine, Report, SpecStats, Summary, ViolationRecord};
use paramon::slicing::{slice_trace, ObjectId, ParameterInstance, ParametricEvent};
use paramon::trace::{read_trace_str, write_trace, Scalar, TraceRecord};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_inst() -> impl Strategy<Value = Inst> {
    proptest::collection::btree_map(
        prop_oneof![Just("a".to_string()), Just("b".to_string()), Just("c".to_string())],
        (0..3u8).prop_map(|o| format!("T#o{o}")),
        0..=3,
    )
}

fn to_instance(i: &Inst) -> ParameterInstance {
    ParameterInstance::from_pairs(i.iter().map(|(k, v)| (k.as_str(), ObjectId::parse(v).unwrap())))
}

fn arb_trace() -> impl Strategy<Value = Vec<(String, Inst)>> {
    proptest::collection::vec(((0..3u8).prop_map(|e| format!("e{e}")), arb_inst()), 0..30)
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn lattice_operations_match_maps(a in arb_inst(), b in arb_inst(), c in arb_inst()) {
        let (pa, pb, pc) = (to_instance(&a), to_instance(&b), to_instance(&c));
        prop_assert_eq!(pa.compatible(&pb), compatible(&a, &b));
        prop_assert_eq!(pa.compatible(&pb), pb.compatible(&pa));
        prop_assert_eq!(pa.less_informative(&pb), le(&a, &b));
        prop_assert!(pa.less_informative(&pa));
        if pa.less_informative(&pb) && pb.less_informative(&pa) {
            prop_assert_eq!(&pa, &pb);
        }
        if pa.less_informative(&pb) && pb.less_informative(&pc) {
            prop_assert!(pa.less_informative(&pc));
        }
        match pa.combine(&pb) {
            Ok(j) => {
                prop_assert!(compatible(&a, &b));
                prop_assert_eq!(&j, &to_instance(&join(&a, &b)));
                prop_assert_eq!(&j, &pb.combine(&pa).unwrap());
                prop_assert!(pa.less_informative(&j) && pb.less_informative(&j));
                prop_assert_eq!(pa.less_informative(&pb), j == pb);
            }
            Err(_) => prop_assert!(!compatible(&a, &b)),
        }
        prop_assert_eq!(pa.combine(&pa).unwrap(), pa.clone());
        prop_assert_eq!(pa.combine(&ParameterInstance::bottom()).unwrap(), pa);
    }

    #[test]
    fn instance_literals_round_trip(a in arb_inst()) {
        let p = to_instance(&a);
        prop_assert_eq!(p.to_string().parse::<ParameterInstance>().unwrap(), p);
    }

    #[test]
    fn slicing_matches_the_recursive_definition(trace in arb_trace(), theta in arb_inst()) {
        let parametric: Vec<ParametricEvent> = trace.iter().map(|(e, i)| ParametricEvent::new(e.as_str(), to_instance(i))).collect();
        let got: Vec<String> = slice_trace(&parametric, &to_instance(&theta)).into_iter().map(String::from).collect();
        prop_assert_eq!(got, recursive_slice(&trace, &theta));
    }
}

proptest! {
    #![proptest_config(cfg(96))]

    #[test]
    fn algorithms_agree_with_the_oracles(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rs = random_spec(&mut rng, false);
        let spec = compile_json(&rs.json);
        let trace = random_trace(&mut rng, &rs, 40, 2, 0.0);
        let all = oracle_hits(&spec, &trace, false);
        let aware = oracle_hits(&spec, &trace, true);
        for algo in [Algorithm::A, Algorithm::B, Algorithm::C] {
            prop_assert_eq!(&hit_keys(&run(&spec, algo, false, &trace)), &all, "{} on {}", algo, rs.json);
        }
        for algo in [Algorithm::CPlus, Algorithm::D] {
            prop_assert_eq!(&hit_keys(&run(&spec, algo, false, &trace)), &aware, "{} on {}", algo, rs.json);
        }
        if rs.all_creation {
            prop_assert_eq!(&all, &aware);
        }
    }

    #[test]
    fn mgc_is_transparent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rs = random_spec(&mut rng, false);
        let spec = compile_json(&rs.json);
        let trace = random_trace(&mut rng, &rs, 40, 2, 0.2);
        for algo in [Algorithm::B, Algorithm::C, Algorithm::CPlus, Algorithm::D] {
            let off = run(&spec, algo, false, &trace);
            let on = run(&spec, algo, true, &trace);
            prop_assert_eq!(hit_keys(&off), hit_keys(&on), "{} on {}", algo, rs.json);
            prop_assert!(on.summary.specs[0].peak_live <= off.summary.specs[0].peak_live);
        }
    }

    #[test]
    fn scanning_instance_set_only_grows(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rs = random_spec(&mut rng, false);
        let spec = compile_json(&rs.json);
        let trace = random_trace(&mut rng, &rs, 40, 2, 0.1);
        let mut s = Session::new(vec![spec], EngineConfig { algorithm: Algorithm::B, mgc: true, slice_cap: None });
        let mut last = s.online(0).unwrap().len();
        for r in &trace {
            s.process(r);
            let m = s.online(0).unwrap();
            prop_assert!(m.len() >= last);
            if let TraceRecord::Event(_) = r {
                prop_assert_eq!(m.last_counters().scanned as usize, last);
            }
            last = m.len();
        }
    }

    #[test]
    fn indexed_visits_are_exactly_the_instances_above(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rs = random_spec(&mut rng, false);
        let spec = compile_json(&rs.json);
        let trace = random_trace(&mut rng, &rs, 40, 2, 0.0);
        for algo in [Algorithm::C, Algorithm::CPlus, Algorithm::D] {
            let mut s = Session::new(vec![spec.clone()], EngineConfig { algorithm: algo, mgc: false, slice_cap: None });
            for r in &trace {
                let TraceRecord::Event(e) = r else { continue };
                let theta = s.binding_for(0, e).unwrap();
                let above = s.online(0).unwrap().instances().filter(|(b, _)| theta.le(b)).count();
                s.process(r);
                prop_assert_eq!(s.online(0).unwrap().last_counters().visits as usize, above);
            }
        }
    }

    #[test]
    fn traces_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rs = random_spec(&mut rng, false);
        let mut trace = random_trace(&mut rng, &rs, 30, 3, 0.2);
        if let Some(TraceRecord::Event(e)) = trace.first_mut() {
            *e = e.clone()
                .field("n", Scalar::Int(seed as i64 >> 3))
                .field("flag", Scalar::Bool(seed % 2 == 0))
                .field("s", Scalar::Str("x y".into()))
                .at("m.py", 7);
        }
        let (back, malformed) = read_trace_str(&write_trace(&trace, "props")).unwrap();
        prop_assert!(malformed.is_empty());
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn machine_reports_round_trip(records in proptest::collection::vec((0..3u8, 1..50u64, any::<bool>()), 0..12)) {
        let records: Vec<ViolationRecord> = records
            .into_iter()
            .map(|(o, seq, src)| ViolationRecord {
                spec: "S".into(),
                category: "Violation".into(),
                state: "s3".into(),
                theta: format!("{{f=File#{o}}}"),
                event: "use".into(),
                seq,
                src: src.then(|| ("a.py".to_string(), seq as u32)),
                message: format!("object \"{o}\""),
            })
            .collect();
        let report = Report {
            records,
            summary: Summary {
                algorithm: "D".into(),
                events: 9,
                specs: vec![SpecStats { spec: "S".into(), records: 3, ..Default::default() }],
                ..Default::default()
            },
        };
        let (collapsed, summary) = parse_machine(&render_machine(&report)).unwrap();
        prop_assert_eq!(collapsed.iter().map(|c| c.count).sum::<u64>() as usize, report.records.len());
        prop_assert_eq!(collapsed, report.collapsed());
        prop_assert_eq!(summary, report.summary);
    }
}

#[test]
fn event_instances_cover_the_lattice() {
    // every instance over two objects per parameter is reachable by the enumerator
    let objects: BTreeMap<String, BTreeSet<String>> = [("a", ["x", "y"]), ("b", ["z", "w"])]
        .into_iter()
        .map(|(p, os)| (p.to_string(), os.iter().map(|o| o.to_string()).collect()))
        .collect();
    assert_eq!(all_instances(&objects).len(), 9);
}
