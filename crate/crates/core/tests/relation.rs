use sfverify::chart::{parse_chart, ChartDef};
use sfverify::ir::{generate_reference, print_stmt, ImplProgram, Stmt};
use sfverify::refine::*;
use sfverify::retrieve::*;

fn chart(name: &str) -> ChartDef {
    parse_chart(&std::fs::read_to_string(format!("{}/corpus/{name}.sfc", env!("CARGO_MANIFEST_DIR"))).unwrap()).unwrap()
}

fn setup(c: &ChartDef) -> (ImplProgram, RetrieveRelation) {
    let p = generate_reference(c).unwrap();
    let r = synthesize(c, &p).unwrap();
    (p, r)
}

#[test]
fn relation_check_counts() {
    let c = chart("absolute_value");
    let (p, r) = setup(&c);
    let rep = check_functional_total_surjective(&r, &c, &p, &[-1, 0, 1]);
    assert!(rep.total && rep.functional && rep.surjective);
    // is_active_c1 × is_c1 = 2 × 3 control states, 9 data points
    assert_eq!((rep.control_states, rep.data_points, rep.checks), (6, 9, 54));
}

#[test]
fn two_formulas_for_one_state_break_functionality() {
    let c = chart("absolute_value");
    let (p, mut r) = setup(&c);
    r.status_formulas.push(StatusEntry {
        state: "s_P".into(),
        formula: StatusFormula::SubstateCode { field: "is_c1".into(), constant: "IN_N".into() },
    });
    let rep = check_functional_total_surjective(&r, &c, &p, &[0]);
    assert!(!rep.functional);
    assert!(rep.counterexamples.iter().any(|x| x.contains("s_P")), "{:?}", rep.counterexamples);
}

#[test]
fn weakened_invariant_breaks_totality_only() {
    let c = chart("absolute_value");
    let (p, mut r) = setup(&c);
    r.concrete_invariant[0].values.push(3);
    let rep = check_functional_total_surjective(&r, &c, &p, &[-1, 0, 1]);
    assert!(!rep.total && rep.surjective);
    assert!(rep.counterexamples.iter().any(|x| x.contains("is_c1") && x.contains('3')), "{:?}", rep.counterexamples);
}

#[test]
fn parallel_children_are_activity_flags() {
    let c = chart("parallel");
    let (_, r) = setup(&c);
    for s in ["s_Heater", "s_Fan"] {
        assert!(matches!(r.formula(s), Some(StatusFormula::ActiveFlag { .. })), "{s}");
    }
    assert!(matches!(r.formula("s_On"), Some(StatusFormula::SubstateCode { .. })));
}

#[test]
fn simplification_splits_and_prunes_by_the_invariant() {
    let c = chart("absolute_value");
    let (p, r) = setup(&c);
    let d = derive_step(&c, &r).unwrap();
    assert!(print_stmt(&d.step_body, 0).contains("status("));
    let s = simplify(&d, &r, &p);
    assert!(!print_stmt(&s.step_body, 0).contains("status("));
    let notes: Vec<&str> = s.phase_log.iter().filter(|e| e.phase == 4).map(|e| e.transformation.as_str()).collect();
    assert!(notes.contains(&"split guard `!status(s_N)` into 2 arm(s)"), "{notes:?}");
    assert!(notes.contains(&"eliminated infeasible arm `status(s_P)`"), "{notes:?}");
}

#[test]
fn degenerate_chart_derives_the_minimal_step() {
    let c = parse_chart("chart One { state S { during { y := 1; } } output y: int; transition d { target S; } }").unwrap();
    let (p, r) = setup(&c);
    let s = simplify(&derive_step(&c, &r).unwrap(), &r, &p);
    let text = print_stmt(&s.step_body, 0);
    assert!(text.starts_with("if DWork.is_active_c1 == 0 {"), "{text}");
    assert!(text.contains("DWork.is_c1 := IN_S;") && text.contains("B.y := 1;") && text.ends_with("Y.y := B.y;\n"), "{text}");
}

#[test]
fn broadcasts_are_inlined() {
    let c = chart("broadcast");
    let (_, r) = setup(&c);
    let d = derive_step(&c, &r).unwrap();
    assert!(d.phase_log.iter().any(|e| e.phase == 3 && e.transformation == "inlined broadcast of fire from s_Armed"));
}

fn edit_step(p: &ImplProgram, f: impl Fn(&Stmt) -> Option<Stmt>) -> ImplProgram {
    fn go(s: &Stmt, f: &dyn Fn(&Stmt) -> Option<Stmt>, done: &mut bool) -> Stmt {
        if !*done {
            if let Some(t) = f(s) {
                *done = true;
                return t;
            }
        }
        match s {
            Stmt::Seq(v) => Stmt::Seq(v.iter().map(|x| go(x, f, done)).collect()),
            Stmt::If { arms, els } => Stmt::If {
                arms: arms.iter().map(|(g, b)| (g.clone(), go(b, f, done))).collect(),
                els: els.as_ref().map(|e| Box::new(go(e, f, done))),
            },
            other => other.clone(),
        }
    }
    let mut q = p.clone();
    let name = p.output_fn().unwrap().name.clone();
    let mut done = false;
    let body = go(&p.functions[&name].body, &f, &mut done);
    assert!(done);
    q.functions.get_mut(&name).unwrap().body = body;
    q
}

#[test]
fn swapped_codes_diverge_at_the_guard() {
    let c = chart("absolute_value");
    let (p, _) = setup(&c);
    // the N and P branches trade guards
    let q = edit_step(&p, |s| match s {
        Stmt::If { arms, els } if arms.len() == 2 && arms[0].0.to_string() == "DWork.is_c1 == IN_N" => {
            let mut arms = arms.clone();
            let g = arms[0].0.clone();
            arms[0].0 = std::mem::replace(&mut arms[1].0, g);
            Some(Stmt::If { arms, els: els.clone() })
        }
        _ => None,
    });
    let mut cfg = VerifyConfig::default();
    cfg.mode = MatchMode::Exact;
    cfg.cosim.traces = 200;
    let v = verify(&c, &q, &cfg);
    assert_eq!(v.outcome, Outcome::Fail);
    let d = v.first_divergence.unwrap();
    assert!(d.derived.starts_with("if DWork.is_c1 == IN_N") && d.implementation.starts_with("if DWork.is_c1 == IN_P"), "{d:?}");
    assert!(!v.cosim.unwrap().clean());
}

#[test]
fn dropping_the_transient_deactivation_is_unobservable() {
    let c = chart("absolute_value");
    let (p, r) = setup(&c);
    let m = mutants(&p, &r).into_iter().find(|m| m.description.starts_with("drop `DWork.is_c1 := 0`")).unwrap();
    let rep = cosimulate(&c, &m.program, &r, &CosimConfig { traces: 500, ..CosimConfig::default() });
    assert!(rep.clean());
    assert!(is_equivalent(&c, &p, &m.program, &[-2, -1, 0, 1, 2], 10_000));
    assert_eq!(verify(&c, &m.program, &VerifyConfig::default()).outcome, Outcome::Fail);
    assert!(check_trace(&c, &p, &r, &[], 64).is_ok());
}
