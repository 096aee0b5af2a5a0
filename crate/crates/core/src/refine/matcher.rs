//! Phase 5: structuring. The implementation's helper calls are replaced by
//! their bodies (copy rule), the result is simplified under the same
//! relation as the derived program, and the two trees are compared after
//! canonicalization.
//!
//! Canonicalization flattens sequences and else-if chains, strips
//! `(b) != 0` around 0/1-valued `b`, drops empty `else` branches, drops
//! empty arms of mutually exclusive chains without an `else`, and removes
//! conditionals that do nothing. In normalized mode the arms of two
//! exclusive chains over the same guards may be matched out of order;
//! every such reorder is logged.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::derive::{stmt_digest, DerivedProgram};
use super::guard::Domain;
use super::simplify::Simplifier;
use crate::expr::{BinOp, Expr, UnOp, Value};
use crate::ir::{exec, init_impl, print_stmt, IExpr, ImplProgram, ImplState, Record, Ref, Stmt};
use crate::retrieve::RetrieveRelation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    #[default]
    Normalized,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub function: String,
    pub path: Vec<usize>,
    pub derived: String,
    pub implementation: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchReport {
    /// Pattern violations; non-empty means the program is outside the
    /// architecture the pipeline handles.
    pub conformance: Vec<String>,
    pub matched_functions: BTreeMap<String, String>,
    pub divergence: Option<Divergence>,
    pub reorders: Vec<String>,
    pub log: Vec<String>,
}

fn calls_of(s: &Stmt) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    s.visit_stmts(&mut |x| {
        if let Stmt::Call { func, args } = x {
            out.push((func.as_str(), args.len()));
        }
    });
    out
}

/// Checks the architectural pattern: entry points present, no recursion,
/// no symbolic status lookups, and DWork written only with in-range
/// constants.
pub fn conformance(p: &ImplProgram, r: &RetrieveRelation, d: &Domain) -> Vec<String> {
    let mut out = Vec::new();
    if p.init_fn().is_none() {
        out.push(format!("no initialization function `{0}_initialize` or `initialize`", p.name));
    }
    match p.output_fn() {
        None => out.push(format!("no step function `{0}_output` or `output`", p.name)),
        Some(f) if f.params.len() > 1 => {
            out.push(format!("step function `{}` takes {} parameters; at most one (the event) is allowed", f.name, f.params.len()))
        }
        _ => {}
    }
    for f in p.functions.values() {
        for (callee, n) in calls_of(&f.body) {
            match p.functions.get(callee) {
                None => out.push(format!("`{}` calls undefined function `{callee}`", f.name)),
                Some(g) if g.params.len() != n => {
                    out.push(format!("`{}` calls `{callee}` with {n} arguments, expected {}", f.name, g.params.len()))
                }
                _ => {}
            }
        }
        f.body.visit_exprs(&mut |e| {
            e.visit_vars(&mut |v| {
                if let Ref::Status(s) = v {
                    out.push(format!("`{}` uses a symbolic status lookup status({s})", f.name));
                }
            })
        });
        f.body.visit_stmts(&mut |s| {
            if let Stmt::Assign { record: Record::DWork, field, value } = s {
                let allowed = r.control_domain(field);
                match d.const_value(value) {
                    None => out.push(format!("`{}` writes non-constant `{value}` to DWork.{field}", f.name)),
                    Some(v) if !allowed.is_empty() && !allowed.contains(&v) => {
                        out.push(format!("`{}` writes {v} to DWork.{field}, outside its range {allowed:?}", f.name))
                    }
                    _ => {}
                }
            }
        });
    }
    // recursion: depth-first search for a back edge
    fn visit<'a>(
        p: &'a ImplProgram,
        f: &'a str,
        stack: &mut Vec<&'a str>,
        done: &mut BTreeSet<&'a str>,
        out: &mut Vec<String>,
    ) {
        if done.contains(f) {
            return;
        }
        if let Some(i) = stack.iter().position(|g| *g == f) {
            let mut cyc: Vec<&str> = stack[i..].to_vec();
            cyc.push(f);
            out.push(format!("recursion {}", cyc.join(" → ")));
            return;
        }
        let Some(def) = p.functions.get(f) else { return };
        stack.push(f);
        for (g, _) in calls_of(&def.body) {
            visit(p, g, stack, done, out);
        }
        stack.pop();
        done.insert(f);
    }
    let mut done = BTreeSet::new();
    for f in p.functions.keys() {
        visit(p, f, &mut Vec::new(), &mut done, &mut out);
    }
    out
}

fn subst(e: &IExpr, env: &BTreeMap<String, IExpr>) -> IExpr {
    e.map_vars(&mut |r: &Ref| -> Result<IExpr, ()> {
        Ok(match r {
            Ref::Param(x) => env.get(x).cloned().unwrap_or_else(|| Expr::Var(r.clone())),
            other => Expr::Var(other.clone()),
        })
    })
    .expect("infallible")
}

/// Copy rule: every call replaced by the callee's body with arguments
/// substituted for parameters. Requires a call graph without cycles.
pub fn expand(p: &ImplProgram, s: &Stmt, env: &BTreeMap<String, IExpr>) -> Stmt {
    match s {
        Stmt::Assign { record, field, value } => {
            Stmt::Assign { record: *record, field: field.clone(), value: subst(value, env) }
        }
        Stmt::If { arms, els } => Stmt::If {
            arms: arms.iter().map(|(g, b)| (subst(g, env), expand(p, b, env))).collect(),
            els: els.as_ref().map(|e| Box::new(expand(p, e, env))),
        },
        Stmt::Seq(v) => Stmt::Seq(v.iter().map(|x| expand(p, x, env)).collect()),
        Stmt::Call { func, args } => match p.functions.get(func) {
            Some(f) => {
                let inner: BTreeMap<String, IExpr> =
                    f.params.iter().cloned().zip(args.iter().map(|a| subst(a, env))).collect();
                expand(p, &f.body, &inner)
            }
            None => s.clone(),
        },
    }
}

fn canon_expr(e: &IExpr) -> IExpr {
    match e {
        Expr::Binary(BinOp::Ne, a, b) if a.is_boolean() && **b == Expr::Int(0) => canon_expr(a),
        Expr::Unary(UnOp::Not, x) => match &**x {
            Expr::Unary(UnOp::Not, y) => canon_expr(y),
            _ => Expr::not(canon_expr(x)),
        },
        Expr::Unary(op, x) => Expr::Unary(*op, Box::new(canon_expr(x))),
        Expr::Binary(op, a, b) => Expr::bin(*op, canon_expr(a), canon_expr(b)),
        other => other.clone(),
    }
}

/// `place == constant` guards over one control place with distinct values.
fn exclusive_place(d: &Domain, arms: &[(IExpr, Stmt)]) -> Option<(Ref, Vec<i64>)> {
    let mut place: Option<&Ref> = None;
    let mut vals = Vec::new();
    for (g, _) in arms {
        let Expr::Binary(BinOp::Eq, a, b) = g else { return None };
        let Expr::Var(p) = &**a else { return None };
        if !d.is_control(p) || place.is_some_and(|q| q != p) {
            return None;
        }
        let v = d.const_value(b)?;
        if vals.contains(&v) {
            return None;
        }
        vals.push(v);
        place = Some(p);
    }
    place.map(|p| (p.clone(), vals))
}

fn is_empty(s: &Stmt) -> bool {
    s.is_skip()
}

pub fn canonicalize(d: &Domain, s: &Stmt) -> Stmt {
    fn go(d: &Domain, s: &Stmt, out: &mut Vec<Stmt>) {
        match s {
            Stmt::Seq(v) => v.iter().for_each(|x| go(d, x, out)),
            Stmt::Assign { record, field, value } => {
                out.push(Stmt::Assign { record: *record, field: field.clone(), value: canon_expr(value) })
            }
            Stmt::Call { func, args } => {
                out.push(Stmt::Call { func: func.clone(), args: args.iter().map(canon_expr).collect() })
            }
            Stmt::If { arms, els } => {
                let mut arms: Vec<(IExpr, Stmt)> = arms.iter().map(|(g, b)| (canon_expr(g), block(d, b))).collect();
                let mut els = els.as_ref().map(|e| block(d, e));
                // else { if … } continues the chain
                loop {
                    let inner = match els.as_ref() {
                        Some(Stmt::Seq(v)) => match v.as_slice() {
                            [Stmt::If { arms, els }] => Some((arms.clone(), els.clone())),
                            _ => None,
                        },
                        _ => None,
                    };
                    let Some((more, rest)) = inner else { break };
                    arms.extend(more);
                    els = rest.map(|e| *e);
                }
                if els.is_none() {
                    if let Some((Expr::Int(v), _)) = arms.last() {
                        if *v != 0 {
                            els = arms.pop().map(|(_, b)| b);
                        }
                    }
                }
                if els.as_ref().is_some_and(is_empty) {
                    els = None;
                }
                if els.is_none() && exclusive_place(d, &arms).is_some() {
                    arms.retain(|(_, b)| !is_empty(b));
                }
                if arms.is_empty() {
                    if let Some(e) = els {
                        go(d, &e, out);
                    }
                    return;
                }
                if els.is_none() && arms.iter().all(|(_, b)| is_empty(b)) {
                    return;
                }
                out.push(Stmt::If { arms, els: els.map(Box::new) });
            }
        }
    }
    fn block(d: &Domain, s: &Stmt) -> Stmt {
        let mut v = Vec::new();
        go(d, s, &mut v);
        Stmt::Seq(v)
    }
    block(d, s)
}

const SNIPPET_LINES: usize = 14;

fn snippet(s: Option<&Stmt>) -> String {
    let Some(s) = s else { return "<nothing>".into() };
    let text = print_stmt(s, 0);
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() > SNIPPET_LINES {
        format!("{}\n  …", lines[..SNIPPET_LINES].join("\n"))
    } else {
        text.trim_end().to_string()
    }
}

struct Cmp<'d> {
    d: &'d Domain,
    mode: MatchMode,
    function: String,
    reorders: Vec<String>,
}

/// `place == constant` on a control place.
fn eq_atom(d: &Domain, g: &IExpr) -> Option<(Ref, i64)> {
    let Expr::Binary(BinOp::Eq, a, b) = g else { return None };
    let Expr::Var(p) = &**a else { return None };
    if !d.is_control(p) {
        return None;
    }
    Some((p.clone(), d.const_value(b)?))
}

impl Cmp<'_> {
    /// Within a chain, a run of arms testing distinct constants of one
    /// place has pairwise disjoint guards once the earlier arms failed, so
    /// the implementation's run may be permuted into the derived order.
    fn reorder_runs(&mut self, da: &[(IExpr, Stmt)], ia: &mut [(IExpr, Stmt)], path: &[usize]) {
        let mut j = 0;
        while j < da.len() {
            let Some((place, _)) = eq_atom(self.d, &da[j].0) else {
                j += 1;
                continue;
            };
            let mut k = j;
            let (mut dv, mut iv) = (Vec::new(), Vec::new());
            while k < da.len() {
                match (eq_atom(self.d, &da[k].0), eq_atom(self.d, &ia[k].0)) {
                    (Some((p, x)), Some((q, y))) if p == place && q == place && !dv.contains(&x) && !iv.contains(&y) => {
                        dv.push(x);
                        iv.push(y);
                        k += 1;
                    }
                    _ => break,
                }
            }
            if k == j {
                j += 1;
                continue;
            }
            let same: BTreeSet<i64> = dv.iter().copied().collect();
            if dv != iv && same == iv.iter().copied().collect() {
                ia[j..k].sort_by_key(|(g, _)| {
                    let v = eq_atom(self.d, g).map(|(_, v)| v);
                    dv.iter().position(|x| Some(*x) == v)
                });
                self.reorders.push(format!(
                    "{}: reordered {} exclusive arms on {place} at path {path:?}",
                    self.function,
                    k - j
                ));
            }
            j = k;
        }
    }

    fn diverge(&self, path: &[usize], d: Option<&Stmt>, i: Option<&Stmt>) -> Divergence {
        Divergence { function: self.function.clone(), path: path.to_vec(), derived: snippet(d), implementation: snippet(i) }
    }

    fn seq(&mut self, d: &Stmt, i: &Stmt, path: &mut Vec<usize>) -> Result<(), Divergence> {
        let as_vec = |s: &Stmt| -> Vec<Stmt> {
            match s {
                Stmt::Seq(v) => v.clone(),
                other => vec![other.clone()],
            }
        };
        let (dv, iv) = (as_vec(d), as_vec(i));
        for k in 0..dv.len().max(iv.len()) {
            path.push(k);
            match (dv.get(k), iv.get(k)) {
                (Some(a), Some(b)) => self.stmt(a, b, path)?,
                (a, b) => return Err(self.diverge(path, a, b)),
            }
            path.pop();
        }
        Ok(())
    }

    fn stmt(&mut self, d: &Stmt, i: &Stmt, path: &mut Vec<usize>) -> Result<(), Divergence> {
        match (d, i) {
            (Stmt::If { arms: da, els: de }, Stmt::If { arms: ia, els: ie }) => {
                let mut ia = ia.clone();
                if self.mode == MatchMode::Normalized && da.len() == ia.len() {
                    self.reorder_runs(da, &mut ia, path);
                }
                if da.len() != ia.len() || de.is_some() != ie.is_some() {
                    return Err(self.diverge(path, Some(d), Some(i)));
                }
                for (k, ((dg, db), (ig, ib))) in da.iter().zip(&ia).enumerate() {
                    path.push(k);
                    if dg != ig {
                        let show = |g: &IExpr, b: &Stmt| Stmt::If { arms: vec![(g.clone(), b.clone())], els: None };
                        return Err(self.diverge(path, Some(&show(dg, db)), Some(&show(ig, ib))));
                    }
                    self.seq(db, ib, path)?;
                    path.pop();
                }
                if let (Some(a), Some(b)) = (de, ie) {
                    path.push(da.len());
                    self.seq(a, b, path)?;
                    path.pop();
                }
                Ok(())
            }
            (a, b) if a == b => Ok(()),
            (a, b) => Err(self.diverge(path, Some(a), Some(b))),
        }
    }
}

/// Final values of an initialization, every field zero unless written.
fn init_values(p: &ImplProgram, s: &Stmt) -> Result<BTreeMap<(Record, String), Value>, String> {
    let mut st = ImplState::zeroed(p);
    exec(p, &mut st, &BTreeMap::new(), s, None).map_err(|e| e.to_string())?;
    Ok(flatten(&st))
}

fn flatten(st: &ImplState) -> BTreeMap<(Record, String), Value> {
    let mut out = BTreeMap::new();
    for r in [Record::DWork, Record::B, Record::Y] {
        for (f, v) in st.record(r) {
            out.insert((r, f.clone()), *v);
        }
    }
    out
}

fn compare_init(
    d: &DerivedProgram,
    p: &ImplProgram,
    init_name: &str,
) -> Result<(), Divergence> {
    let diverge = |a: String, b: String| Divergence { function: init_name.into(), path: vec![], derived: a, implementation: b };
    let want = init_values(p, &d.init).map_err(|e| diverge(e, String::new()))?;
    let got = init_impl(p, None).map(|s| flatten(&s)).map_err(|e| diverge(String::new(), e.to_string()))?;
    let keys: BTreeSet<&(Record, String)> = want.keys().chain(got.keys()).collect();
    for k in keys {
        let a = want.get(k).map_or(0.0, |v| v.as_f64());
        let b = got.get(k).map_or(0.0, |v| v.as_f64());
        if a != b {
            let name = format!("{}.{}", k.0.name(), k.1);
            return Err(diverge(format!("{name} = {a}"), format!("{name} = {b}")));
        }
    }
    Ok(())
}

/// The implementation's step function expanded, simplified and
/// canonicalized, with the simplification log.
pub fn implementation_step(p: &ImplProgram, d: &Domain) -> Option<(Stmt, Vec<String>)> {
    let f = p.output_fn()?;
    let env: BTreeMap<String, IExpr> =
        f.params.iter().take(1).map(|x| (x.clone(), Expr::Var(Ref::Param("tid".into())))).collect();
    let expanded = expand(p, &f.body, &env);
    let mut sm = Simplifier::new(d);
    let simplified = sm.run(&expanded);
    Some((canonicalize(d, &simplified), sm.log))
}

/// Matches a simplified derived program against an implementation.
pub fn structure_match(
    derived: &DerivedProgram,
    p: &ImplProgram,
    r: &RetrieveRelation,
    mode: MatchMode,
) -> MatchReport {
    let d = Domain::new(r, p);
    let mut rep = MatchReport { conformance: conformance(p, r, &d), ..Default::default() };
    if !rep.conformance.is_empty() {
        return rep;
    }
    let out_fn = p.output_fn().expect("checked by conformance");
    let init_fn = p.init_fn().expect("checked by conformance");
    let (imp, log) = implementation_step(p, &d).expect("output function present");
    rep.log = log;
    let der = canonicalize(&d, &derived.step_body);
    let mut cmp = Cmp { d: &d, mode, function: out_fn.name.clone(), reorders: Vec::new() };
    let res = cmp.seq(&der, &imp, &mut Vec::new());
    rep.reorders = cmp.reorders;
    if let Err(div) = res {
        rep.divergence = Some(div);
        return rep;
    }
    if let Err(div) = compare_init(derived, p, &init_fn.name) {
        rep.divergence = Some(div);
        return rep;
    }
    rep.matched_functions.insert(out_fn.name.clone(), stmt_digest(&der));
    rep.matched_functions.insert(init_fn.name.clone(), stmt_digest(&derived.init));
    // helpers were matched in place of their call sites
    let mut helpers = BTreeSet::new();
    let mut todo: Vec<&str> = vec![out_fn.name.as_str(), init_fn.name.as_str()];
    while let Some(f) = todo.pop() {
        for (g, _) in calls_of(&p.functions[f].body) {
            if helpers.insert(g.to_string()) {
                todo.push(&p.functions[g].name);
            }
        }
    }
    for h in helpers {
        let body = canonicalize(&d, &p.functions[&h].body);
        rep.matched_functions.insert(h, format!("{} (inlined)", stmt_digest(&body)));
    }
    rep
}
