use sfverify::chart::{parse_chart, ChartDef};
use sfverify::expr::{BinOp, Expr};
use sfverify::ir::{generate_reference, parse_impl, print_stmt, read_c_subset, IExpr, ImplProgram, Ref, Stmt};
use sfverify::refine::*;
use sfverify::retrieve::synthesize;

const CORPUS: &[&str] = &["absolute_value", "parallel", "hierarchy", "history", "broadcast"];

fn corpus(name: &str) -> String {
    std::fs::read_to_string(format!("{}/corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn chart(name: &str) -> ChartDef {
    parse_chart(&corpus(&format!("{name}.sfc"))).unwrap()
}

fn quick() -> VerifyConfig {
    let mut cfg = VerifyConfig::default();
    cfg.cosim.traces = 200;
    cfg
}

fn code_test(g: &IExpr) -> Option<(String, String)> {
    match g {
        Expr::Binary(BinOp::Eq, a, b) => match (&**a, &**b) {
            (Expr::Var(Ref::Field(_, f)), Expr::Var(Ref::Const(k))) => Some((f.clone(), k.clone())),
            (Expr::Var(Ref::Field(_, f)), Expr::Int(v)) => Some((f.clone(), v.to_string())),
            _ => None,
        },
        _ => None,
    }
}

fn only_if(s: &Stmt) -> (&Vec<(IExpr, Stmt)>, Option<&Stmt>) {
    let s = match s {
        Stmt::Seq(v) => &v[0],
        s => s,
    };
    match s {
        Stmt::If { arms, els } => (arms, els.as_deref()),
        other => panic!("expected a conditional, found\n{}", print_stmt(other, 0)),
    }
}

#[test]
fn worked_example_shape() {
    let c = chart("absolute_value");
    let p = generate_reference(&c).unwrap();
    let r = synthesize(&c, &p).unwrap();
    let d = simplify(&derive_step(&c, &r).unwrap(), &r, &p);

    let (top, els) = only_if(&d.step_body);
    assert_eq!(top.len(), 1);
    assert_eq!(code_test(&top[0].0), Some(("is_active_c1".into(), "0".into())));
    let (dispatch, rest) = only_if(els.expect("an else for the active chart"));
    assert!(rest.is_none());
    let codes: Vec<_> = dispatch.iter().map(|(g, _)| code_test(g).unwrap()).collect();
    let want = [("is_c1", "IN_N"), ("is_c1", "IN_P"), ("is_c1", "0")];
    assert_eq!(codes, want.map(|(f, k)| (f.to_string(), k.to_string())));
    assert!(dispatch[2].1.is_skip());
    let (inner, _) = only_if(&dispatch[1].1);
    assert_eq!(inner[0].0.to_string(), "(U.u < 0) != 0");
    let (inner, _) = only_if(&dispatch[0].1);
    assert_eq!(inner[0].0.to_string(), "(U.u >= 0) != 0");
}

#[test]
fn every_corpus_chart_verifies_against_its_reference() {
    for name in CORPUS {
        let c = chart(name);
        let p = generate_reference(&c).unwrap();
        for mode in [MatchMode::Normalized, MatchMode::Exact] {
            let mut cfg = quick();
            cfg.mode = mode;
            let v = verify(&c, &p, &cfg);
            assert_eq!(v.outcome, Outcome::Pass, "{name} {mode:?}\n{}", render_text(&v));
            assert!(v.reorders.is_empty());
        }
    }
}

#[test]
fn phase_soundness_on_every_corpus_chart() {
    for name in CORPUS {
        let rep = check_phase_soundness(&chart(name), &[-6, -1, 0, 1, 3, 4, 6]).unwrap();
        assert!(rep.clean(), "{rep:?}");
        assert!(rep.legal_cases > 0 && rep.cases <= 12_000, "{rep:?}");
    }
}

#[test]
fn reordered_helper_edit_passes_only_modulo_normalization() {
    let c = chart("absolute_value");
    let p = parse_impl(&corpus("absolute_value_edited.sfi")).unwrap();
    let v = verify(&c, &p, &quick());
    assert_eq!(v.outcome, Outcome::Pass, "{}", render_text(&v));
    assert_eq!(v.reorders.len(), 1);
    assert!(v.matched_functions["follow_u"].ends_with("(inlined)"));
    assert!(v.phase_log.iter().any(|e| e.phase == 5 && e.transformation.contains("reordered")));

    let mut cfg = quick();
    cfg.mode = MatchMode::Exact;
    let v = verify(&c, &p, &cfg);
    assert_eq!(v.outcome, Outcome::Fail);
    assert!(v.cosim.unwrap().clean());
}

#[test]
fn generated_style_c_passes() {
    let c = chart("absolute_value");
    let (p, _) = read_c_subset(&corpus("absolute_value.c")).unwrap();
    let v = verify(&c, &p, &quick());
    assert_eq!(v.outcome, Outcome::Pass, "{}", render_text(&v));
}

#[test]
fn wrong_sign_fails_inside_the_during_subtree() {
    let c = chart("absolute_value");
    let p = parse_impl(&corpus("absolute_value_wrong_sign.sfi")).unwrap();
    let v = verify(&c, &p, &quick());
    assert_eq!(v.outcome, Outcome::Fail);
    let d = v.first_divergence.as_ref().unwrap();
    // the P arm of the dispatch, then the else of its transition test
    assert_eq!(d.path[..2], [0, 1]);
    assert!(d.path.len() > 3);
    assert!(d.derived.contains("B.y := U.u") && d.implementation.contains("B.y := -U.u"), "{d:?}");
    let cx = v.cosim.unwrap().counterexample.unwrap();
    assert!(cx.trace.len() <= 5);
}

#[test]
fn nonconforming_programs_are_reported_not_matched() {
    let c = chart("absolute_value");
    let mut p = generate_reference(&c).unwrap();
    let out = p.output_fn().unwrap().name.clone();
    let body = p.functions[&out].body.clone();
    p.functions.get_mut(&out).unwrap().body = Stmt::Seq(vec![Stmt::Call { func: out.clone(), args: vec![] }, body]);
    let v = verify(&c, &p, &quick());
    assert_eq!(v.outcome, Outcome::Nonconformant);
    assert!(v.cosim.is_none());
}

fn kill_check(name: &str, traces: usize) -> (usize, usize) {
    let c = chart(name);
    let p: ImplProgram = generate_reference(&c).unwrap();
    let r = synthesize(&c, &p).unwrap();
    let mut cfg = VerifyConfig::default();
    cfg.cosim.traces = traces;
    let ms = mutants(&p, &r);
    let mut passed = 0;
    for m in &ms {
        let v = verify(&c, &m.program, &cfg);
        if v.outcome == Outcome::Pass {
            passed += 1;
            assert!(is_equivalent(&c, &p, &m.program, &[-6, -1, 0, 1, 3, 6], 20_000), "{name}: {}", m.description);
        }
    }
    (ms.len(), passed)
}

#[test]
fn only_equivalent_mutants_pass() {
    assert_eq!(kill_check("absolute_value", 300), (34, 0));
    for name in ["parallel", "history", "broadcast"] {
        let (n, _) = kill_check(name, 100);
        assert!(n >= 20);
    }
}
