//! Reference implementation in the generated-code pattern.

use super::{FieldDecl, FunctionDef, ImplProgram, Record, Stmt};
use crate::chart::{ChartDef, DataKind, Decomposition};
use crate::expr::Sort;
use crate::lower::{init_body, LowerError, Lowerer, Style};
use crate::retrieve::{encoding, event_constant, synthesize};
use crate::sem::DEFAULT_BROADCAST_LIMIT;

/// Emits the program a code generator following the standard encoding
/// would produce for `c`: one DWork byte per control field, `IN_<State>`
/// codes, `event_<E>` constants, an `initialize` function and an
/// `<Name>_output(tid)` step function.
pub fn generate_reference(c: &ChartDef) -> Result<ImplProgram, LowerError> {
    for s in c.states.values() {
        if s.has_history && c.decomposition_of(&s.parent) == Decomposition::Parallel {
            return Err(LowerError::Unsupported(format!(
                "history state {} directly inside parallel composite {}",
                s.id, s.parent
            )));
        }
    }
    let enc = encoding(c);
    let mut p = ImplProgram::new(&c.name);
    p.dwork = enc.dwork.iter().map(|f| FieldDecl { name: f.clone(), sort: Sort::Byte }).collect();
    for d in &c.data {
        let decl = FieldDecl { name: d.name.clone(), sort: d.sort };
        match d.kind {
            DataKind::Input => p.u.push(decl),
            DataKind::Output => {
                p.b.push(decl.clone());
                p.y.push(decl);
            }
            DataKind::Local => p.b.push(decl),
        }
    }
    p.constants.extend(enc.codes.iter().cloned());
    for (i, e) in c.input_events().enumerate() {
        p.constants.insert(event_constant(&e.name), i as i64 + 1);
    }
    let r = synthesize(c, &p).map_err(|e| LowerError::Unsupported(e.to_string()))?;

    let mut init = init_body(c, &r);
    // inputs belong to the environment; initialization leaves them alone
    if let Stmt::Seq(v) = &mut init {
        v.retain(|s| !matches!(s, Stmt::Assign { record: Record::U, .. }));
    }
    let body = Lowerer::new(c, &r, Style::Generated, DEFAULT_BROADCAST_LIMIT).output_body()?;
    let init_name = "initialize".to_string();
    let out_name = format!("{}_output", c.name);
    p.functions.insert(init_name.clone(), FunctionDef { name: init_name, params: vec![], body: init });
    p.functions.insert(out_name.clone(), FunctionDef { name: out_name, params: vec!["tid".into()], body });
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::parse_chart;
    use crate::expr::Value;
    use crate::ir::{parse_impl, print_impl, run_impl};
    use crate::sem::{run_trace, StepInput};

    const ABS: &str = include_str!("../../corpus/absolute_value.sfc");

    fn inputs(us: &[i64]) -> Vec<StepInput> {
        us.iter().map(|u| StepInput::with_inputs([("u", Value::Int(*u))])).collect()
    }

    #[test]
    fn absolute_value_reference_runs() {
        let c = parse_chart(ABS).unwrap();
        let p = generate_reference(&c).unwrap();
        let ys: Vec<i64> = run_impl(&p, &inputs(&[5, 5, -3, -3])).unwrap().iter().map(|y| y["y"].as_i64()).collect();
        assert_eq!(ys, vec![0, 5, 3, 3]);
    }

    #[test]
    fn reference_agrees_with_chart_semantics() {
        let c = parse_chart(ABS).unwrap();
        let p = generate_reference(&c).unwrap();
        let t = inputs(&[0, -1, -7, 4, 0, 0, -2, 9]);
        let impl_ys: Vec<Value> = run_impl(&p, &t).unwrap().iter().map(|y| y["y"]).collect();
        let chart_ys: Vec<Value> = run_trace(&c, &t).unwrap().iter().map(|o| o.outputs["y"]).collect();
        assert_eq!(impl_ys, chart_ys);
    }

    #[test]
    fn printed_reference_parses_back() {
        let c = parse_chart(ABS).unwrap();
        let p = generate_reference(&c).unwrap();
        let text = print_impl(&p);
        assert_eq!(parse_impl(&text).unwrap().normalized(), p.normalized(), "{text}");
    }
}
