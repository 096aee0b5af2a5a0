//! Single-site mutants of an implementation's step function, and a bounded
//! exhaustive equivalence check to set aside mutants no test can kill.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::chart::{ChartDef, DataKind};
use crate::expr::{Expr, Value};
use crate::ir::{init_impl, step_impl, IExpr, ImplProgram, ImplState, Ref, Stmt};
use crate::retrieve::RetrieveRelation;
use crate::sem::StepInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    ConstantSwap,
    GuardFlip,
    DroppedAssignment,
    DroppedBranch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mutant {
    pub id: String,
    pub kind: MutationKind,
    pub description: String,
    pub program: ImplProgram,
}

/// Codes that may replace constant `c`: the other codes of the field it
/// belongs to.
fn swaps(r: &RetrieveRelation, c: &str) -> Vec<String> {
    for f in r.control_fields() {
        let codes = r.codes_of(&f);
        if codes.iter().any(|(_, n)| *n == c) {
            return codes.iter().filter(|(_, n)| *n != c).map(|(_, n)| n.to_string()).collect();
        }
    }
    Vec::new()
}

fn flip(g: &IExpr) -> IExpr {
    match g {
        Expr::Binary(op, a, b) if op.negated().is_some() => Expr::Binary(op.negated().unwrap(), a.clone(), b.clone()),
        other => Expr::not(other.clone()),
    }
}

fn replace_const(e: &IExpr, from: &str, to: &str) -> IExpr {
    e.map_vars(&mut |r: &Ref| -> Result<IExpr, ()> {
        Ok(Expr::Var(match r {
            Ref::Const(c) if c == from => Ref::Const(to.to_string()),
            other => other.clone(),
        }))
    })
    .expect("infallible")
}

fn consts_in(e: &IExpr) -> Vec<String> {
    let mut out = Vec::new();
    e.visit_vars(&mut |r| {
        if let Ref::Const(c) = r {
            out.push(c.clone());
        }
    });
    out
}

/// Every single-site variant of `s`, with a description of the edit.
fn variants(s: &Stmt, r: &RetrieveRelation, at: &str, out: &mut Vec<(MutationKind, String, Stmt)>) {
    match s {
        Stmt::Seq(v) => {
            for (i, x) in v.iter().enumerate() {
                let mut sub = Vec::new();
                variants(x, r, &format!("{at}.{i}"), &mut sub);
                for (k, d, y) in sub {
                    let mut w = v.clone();
                    w[i] = y;
                    out.push((k, d, Stmt::Seq(w)));
                }
            }
        }
        Stmt::Assign { record, field, value } => {
            out.push((MutationKind::DroppedAssignment, format!("drop `{}.{field} := {value}` at {at}", record.name()), Stmt::skip()));
            for c in consts_in(value) {
                for to in swaps(r, &c) {
                    let value = replace_const(value, &c, &to);
                    out.push((
                        MutationKind::ConstantSwap,
                        format!("`{}.{field} := {c}` becomes `{to}` at {at}", record.name()),
                        Stmt::Assign { record: *record, field: field.clone(), value },
                    ));
                }
            }
        }
        Stmt::Call { .. } => {
            out.push((MutationKind::DroppedAssignment, format!("drop call at {at}"), Stmt::skip()));
        }
        Stmt::If { arms, els } => {
            for (k, (g, b)) in arms.iter().enumerate() {
                let with_guard = |g2: IExpr| {
                    let mut a = arms.clone();
                    a[k].0 = g2;
                    Stmt::If { arms: a, els: els.clone() }
                };
                out.push((MutationKind::GuardFlip, format!("flip guard `{g}` at {at}:{k}"), with_guard(flip(g))));
                for c in consts_in(g) {
                    for to in swaps(r, &c) {
                        out.push((
                            MutationKind::ConstantSwap,
                            format!("guard `{g}` uses `{to}` for `{c}` at {at}:{k}"),
                            with_guard(replace_const(g, &c, &to)),
                        ));
                    }
                }
                let mut dropped = arms.clone();
                dropped.remove(k);
                let s2 = if dropped.is_empty() {
                    els.as_deref().cloned().unwrap_or_else(Stmt::skip)
                } else {
                    Stmt::If { arms: dropped, els: els.clone() }
                };
                out.push((MutationKind::DroppedBranch, format!("drop branch `{g}` at {at}:{k}"), s2));
                let mut sub = Vec::new();
                variants(b, r, &format!("{at}:{k}"), &mut sub);
                for (kind, d, y) in sub {
                    let mut a = arms.clone();
                    a[k].1 = y;
                    out.push((kind, d, Stmt::If { arms: a, els: els.clone() }));
                }
            }
            if let Some(e) = els {
                out.push((
                    MutationKind::DroppedBranch,
                    format!("drop else at {at}"),
                    Stmt::If { arms: arms.clone(), els: None },
                ));
                let mut sub = Vec::new();
                variants(e, r, &format!("{at}:else"), &mut sub);
                for (kind, d, y) in sub {
                    out.push((kind, d, Stmt::If { arms: arms.clone(), els: Some(Box::new(y)) }));
                }
            }
        }
    }
}

/// All single-site mutants of the step function of `p`.
pub fn mutants(p: &ImplProgram, r: &RetrieveRelation) -> Vec<Mutant> {
    let Some(f) = p.output_fn() else { return Vec::new() };
    let mut vs = Vec::new();
    variants(&f.body, r, "body", &mut vs);
    vs.into_iter()
        .enumerate()
        .map(|(i, (kind, description, body))| {
            let mut q = p.clone();
            q.functions.get_mut(&f.name).expect("present").body = body;
            Mutant { id: format!("m{i:03}"), kind, description, program: q }
        })
        .collect()
}

fn key(st: &ImplState) -> String {
    format!("{:?}", (&st.dwork, &st.b, &st.y))
}

fn step(p: &ImplProgram, st: &ImplState, input: &StepInput) -> Option<ImplState> {
    let mut s = st.clone();
    step_impl(p, &mut s, input, None).ok()?;
    Some(s)
}

/// Bounded exhaustive check that `m` behaves exactly like `p`: the same
/// initial state, and from every state `p` reaches (breadth-first over the
/// small input domain, at most `max_states`) the same successor for every
/// input.
pub fn is_equivalent(c: &ChartDef, p: &ImplProgram, m: &ImplProgram, values: &[i64], max_states: usize) -> bool {
    let (Ok(a), Ok(b)) = (init_impl(p, None), init_impl(m, None)) else { return false };
    if a != b {
        return false;
    }
    let inputs: Vec<String> = c.vars_of(DataKind::Input).map(|d| d.name.clone()).collect();
    let events: Vec<String> = c.input_events().map(|e| e.name.clone()).collect();
    let mut steps: Vec<StepInput> = vec![StepInput::default()];
    for name in &inputs {
        steps = steps
            .iter()
            .flat_map(|s| {
                values.iter().map(move |v| {
                    let mut t = s.clone();
                    t.inputs.insert(name.clone(), Value::Int(*v));
                    t
                })
            })
            .collect();
    }
    for e in &events {
        let with: Vec<StepInput> = steps
            .iter()
            .map(|s| {
                let mut t = s.clone();
                t.events.push(e.clone());
                t
            })
            .collect();
        steps.extend(with);
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([a]);
    seen.insert(key(&queue[0]));
    while let Some(s) = queue.pop_front() {
        for inp in &steps {
            let (x, y) = (step(p, &s, inp), step(m, &s, inp));
            match (x, y) {
                (Some(x), Some(y)) if x == y => {
                    if seen.len() < max_states && seen.insert(key(&x)) {
                        queue.push_back(x);
                    }
                }
                _ => return false,
            }
        }
    }
    true
}
