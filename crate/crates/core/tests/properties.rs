use proptest::prelude::*;

use sfverify::chart::{parse_chart, ChartDef};
use sfverify::expr::Value;
use sfverify::ir::{generate_reference, parse_impl, print_impl, ImplProgram};
use sfverify::refine::guard::Domain;
use sfverify::refine::*;
use sfverify::retrieve::{synthesize, RetrieveRelation};
use sfverify::sem::StepInput;

const CORPUS: &[&str] = &["absolute_value", "parallel", "hierarchy", "history", "broadcast"];

fn load(name: &str) -> (ChartDef, ImplProgram, RetrieveRelation) {
    let src = std::fs::read_to_string(format!("{}/corpus/{name}.sfc", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let c = parse_chart(&src).unwrap();
    let p = generate_reference(&c).unwrap();
    let r = synthesize(&c, &p).unwrap();
    (c, p, r)
}

fn wrong_sign() -> ImplProgram {
    let src = std::fs::read_to_string(format!("{}/corpus/absolute_value_wrong_sign.sfi", env!("CARGO_MANIFEST_DIR"))).unwrap();
    parse_impl(&src).unwrap()
}

fn trace_for(c: &ChartDef) -> impl Strategy<Value = Vec<StepInput>> {
    let inputs: Vec<String> = c.vars_of(sfverify::chart::DataKind::Input).map(|d| d.name.clone()).collect();
    let events: Vec<String> = c.input_events().map(|e| e.name.clone()).collect();
    let step = (prop::collection::vec(-12i64..=12, inputs.len()), prop::collection::vec(any::<bool>(), events.len()))
        .prop_map(move |(vs, es)| StepInput {
            events: events.iter().zip(&es).filter(|(_, on)| **on).map(|(e, _)| e.clone()).collect(),
            inputs: inputs.iter().cloned().zip(vs.into_iter().map(Value::Int)).collect(),
        });
    prop::collection::vec(step, 0..40)
}

#[test]
fn reference_programs_round_trip_through_text() {
    for name in CORPUS {
        let (_, p, _) = load(name);
        assert_eq!(parse_impl(&print_impl(&p)).unwrap(), p, "{name}");
    }
}

#[test]
fn canonical_form_is_a_fixpoint() {
    for name in CORPUS {
        let (c, p, r) = load(name);
        let d = Domain::new(&r, &p);
        let s = simplify(&derive_step(&c, &r).unwrap(), &r, &p).step_body;
        let once = canonicalize(&d, &s);
        assert_eq!(canonicalize(&d, &once), once, "{name}");
        let (again, _) = simplify_stmt(&d, &s);
        assert_eq!(again, s, "{name}: simplification is not idempotent");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn references_stay_in_lockstep(
        (which, trace) in (0..CORPUS.len()).prop_flat_map(|i| (Just(i), trace_for(&load(CORPUS[i]).0)))
    ) {
        let (c, p, r) = load(CORPUS[which]);
        prop_assert_eq!(check_trace(&c, &p, &r, &trace, 64), Ok(()));
    }

    #[test]
    fn traces_are_a_function_of_seed_and_index(seed in any::<u64>(), index in 0usize..10_000, lo in -20i64..0, span in 0i64..40) {
        let (c, _, _) = load("hierarchy");
        let cfg = CosimConfig { seed, max_len: 30, lo, hi: lo + span, ..CosimConfig::default() };
        let t = generate_trace(&c, &cfg, index);
        prop_assert_eq!(&t, &generate_trace(&c, &cfg, index));
        prop_assert!(t.len() <= 30);
        for s in &t {
            let u = s.inputs["u"].as_i64();
            prop_assert!((cfg.lo..=cfg.hi).contains(&u));
            prop_assert!(s.events.iter().all(|e| e == "tick"));
        }
    }

    #[test]
    fn shrunk_traces_still_fail_and_are_no_longer(seed in any::<u64>(), index in 0usize..1000) {
        let (c, _, r) = load("absolute_value");
        let m = wrong_sign();
        let cfg = CosimConfig { seed, ..CosimConfig::default() };
        let t = generate_trace(&c, &cfg, index);
        if let Err((n, _)) = check_trace(&c, &m, &r, &t, 64) {
            let s = shrink(&c, &m, &r, &t, 64);
            prop_assert!(s.len() <= n);
            prop_assert!(check_trace(&c, &m, &r, &s, 64).is_err());
            prop_assert!(s.len() <= 5);
        }
    }

    #[test]
    fn reports_do_not_depend_on_workers(seed in any::<u64>(), workers in 1usize..5) {
        let (c, _, _) = load("absolute_value");
        let m = wrong_sign();
        let mut cfg = VerifyConfig::default();
        cfg.cosim.seed = seed;
        cfg.cosim.traces = 40;
        let a = render_json(&verify(&c, &m, &cfg));
        cfg.cosim.workers = workers;
        prop_assert_eq!(a, render_json(&verify(&c, &m, &cfg)));
    }
}
