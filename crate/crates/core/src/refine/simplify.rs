//! Expression simplification and branch elimination.
//!
//! Arms are visited in order, each under the negation of the arms before
//! it. An arm refuted by the path knowledge is dropped; an arm that must
//! hold ends the chain (becoming the `else`, or the whole conditional when
//! it is first). A guard on a control field whose feasible values are few
//! is split into one arm per value, so binary status tests regroup into
//! n-ary chains. Control guards are rendered from the feasible value set;
//! data guards keep their syntax.

use super::guard::{join_opt, Domain, Know, ISet, G};
use crate::expr::{BinOp, Expr};
use crate::ir::{IExpr, Ref, Stmt};

/// Most values a guard is split into.
pub const SPLIT_LIMIT: usize = 16;

pub struct Simplifier<'d> {
    d: &'d Domain,
    pub log: Vec<String>,
}

impl<'d> Simplifier<'d> {
    pub fn new(d: &'d Domain) -> Self {
        Simplifier { d, log: Vec::new() }
    }

    pub fn run(&mut self, s: &Stmt) -> Stmt {
        let (out, _) = self.stmt(s, self.d.initial());
        Stmt::Seq(out).normalize()
    }

    fn stmt(&mut self, s: &Stmt, k: Know) -> (Vec<Stmt>, Option<Know>) {
        match s {
            Stmt::Seq(v) => {
                let mut out = Vec::new();
                let mut k = Some(k);
                for x in v {
                    let Some(cur) = k else { break };
                    let (o, k2) = self.stmt(x, cur);
                    out.extend(o);
                    k = k2;
                }
                (out, k)
            }
            Stmt::Assign { record, field, value } => {
                let value = self.d.resolve(value);
                let mut k = k;
                k.write(self.d, &Ref::Field(*record, field.clone()), &value);
                (vec![Stmt::Assign { record: *record, field: field.clone(), value }], Some(k))
            }
            Stmt::Call { func, args } => {
                let mut k = k;
                k.havoc(self.d);
                let args = args.iter().map(|a| self.d.resolve(a)).collect();
                (vec![Stmt::Call { func: func.clone(), args }], Some(k))
            }
            Stmt::If { arms, els } => self.cond(arms, els.as_deref(), k),
        }
    }

    fn body(&mut self, s: &Stmt, k: Know) -> (Stmt, Option<Know>) {
        let (v, k) = self.stmt(s, k);
        (Stmt::Seq(v), k)
    }

    /// A single control atom and its feasible values, when few.
    fn split_values(&self, g: &G, k: &Know) -> Option<(Ref, Vec<i64>)> {
        match g {
            G::Atom(p, s) if self.d.is_control(p) => {
                let vals = k.range(p).intersect(s).values(SPLIT_LIMIT)?;
                let mut vals = vals;
                vals.reverse();
                Some((p.clone(), vals))
            }
            _ => None,
        }
    }

    fn eq_guard(&self, p: &Ref, v: i64) -> IExpr {
        Expr::bin(BinOp::Eq, Expr::Var(p.clone()), self.d.value_name(p, v))
    }

    /// Renders a guard under the knowledge it is evaluated in.
    fn render(&self, g: &G, original: &IExpr, k: &Know) -> IExpr {
        let G::Atom(p, s) = g else { return original.clone() };
        if !self.d.is_control(p) {
            return original.clone();
        }
        let dom = k.range(p);
        let eff = dom.intersect(s);
        if let Some([v]) = eff.values(1).as_deref() {
            return self.eq_guard(p, *v);
        }
        if let Some([v]) = dom.intersect(&eff.complement()).values(1).as_deref() {
            return Expr::bin(BinOp::Ne, Expr::Var(p.clone()), self.d.value_name(p, *v));
        }
        let x = || Expr::Var(p.clone());
        let (lo, hi) = (dom.intervals().first().map(|i| i.0), dom.intervals().last().map(|i| i.1));
        let parts: Vec<IExpr> = eff
            .intervals()
            .iter()
            .map(|&(a, b)| {
                if a == b {
                    self.eq_guard(p, a)
                } else if Some(a) == lo {
                    Expr::bin(BinOp::Le, x(), Expr::Int(b))
                } else if Some(b) == hi {
                    Expr::bin(BinOp::Ge, x(), Expr::Int(a))
                } else {
                    Expr::bin(BinOp::And, Expr::bin(BinOp::Ge, x(), Expr::Int(a)), Expr::bin(BinOp::Le, x(), Expr::Int(b)))
                }
            })
            .collect();
        parts.into_iter().reduce(|a, b| Expr::bin(BinOp::Or, a, b)).unwrap_or(Expr::Int(0))
    }

    fn split_arms(
        &mut self,
        p: &Ref,
        vals: &[i64],
        body: &Stmt,
        k: &Know,
        arms: &mut Vec<(IExpr, Stmt)>,
        outs: &mut Option<Know>,
    ) {
        for v in vals {
            let kv = k.assume(&G::Atom(p.clone(), ISet::point(*v))).expect("feasible value");
            let (b, o) = self.body(body, kv);
            arms.push((self.eq_guard(p, *v), b));
            *outs = join_opt(outs.take(), o);
        }
    }

    fn cond(&mut self, arms: &[(IExpr, Stmt)], els: Option<&Stmt>, k: Know) -> (Vec<Stmt>, Option<Know>) {
        let mut out_arms: Vec<(IExpr, Stmt)> = Vec::new();
        let mut out_else: Option<Stmt> = None;
        let mut outs: Option<Know> = None;
        let mut cur = Some(k);
        // the place every arm so far tests for a single value, if any
        let mut chain_place: Option<Option<Ref>> = None;
        let mut note_place = |g: &G, split: bool| {
            let p = match g {
                G::Atom(p, _) if split => Some(p.clone()),
                _ => None,
            };
            chain_place = Some(match chain_place.take() {
                None => p,
                Some(q) if q == p => q,
                Some(_) => None,
            });
        };
        for (g, body) in arms {
            let Some(c) = cur.clone() else { break };
            let resolved = self.d.resolve(g);
            let gn = self.d.normalize(&resolved);
            match c.eval(&gn) {
                Some(false) => {
                    self.log.push(format!("eliminated infeasible arm `{g}`"));
                }
                Some(true) => {
                    if out_arms.is_empty() {
                        return self.stmt(body, c);
                    }
                    match self.split_values(&gn, &c) {
                        Some((p, vals)) => {
                            self.log.push(format!("split guard `{g}` into {} arm(s)", vals.len()));
                            note_place(&gn, true);
                            self.split_arms(&p, &vals, body, &c, &mut out_arms, &mut outs);
                        }
                        None => {
                            let (b, o) = self.body(body, c);
                            out_else = Some(b);
                            outs = join_opt(outs, o);
                        }
                    }
                    cur = None;
                }
                None => {
                    let Some(kt) = c.assume(&gn) else {
                        self.log.push(format!("eliminated infeasible arm `{g}`"));
                        continue;
                    };
                    match self.split_values(&gn, &c) {
                        Some((p, vals)) if vals.len() > 1 => {
                            self.log.push(format!("split guard `{g}` into {} arm(s)", vals.len()));
                            note_place(&gn, true);
                            self.split_arms(&p, &vals, body, &c, &mut out_arms, &mut outs);
                        }
                        split => {
                            note_place(&gn, split.is_some());
                            let rendered = self.render(&gn, &resolved, &c);
                            let (b, o) = self.body(body, kt);
                            out_arms.push((rendered, b));
                            outs = join_opt(outs, o);
                        }
                    }
                    cur = c.assume(&gn.clone().negate());
                }
            }
        }
        if let Some(c) = cur {
            match els {
                Some(e) => {
                    let explicit = match &chain_place {
                        Some(Some(p)) if !out_arms.is_empty() => c.range(p).values(SPLIT_LIMIT).map(|mut v| {
                            v.reverse();
                            (p.clone(), v)
                        }),
                        _ => None,
                    };
                    match explicit {
                        Some((p, vals)) => {
                            self.log.push(format!("made else explicit over {} value(s) of {p}", vals.len()));
                            self.split_arms(&p, &vals, e, &c, &mut out_arms, &mut outs);
                        }
                        None => {
                            let (b, o) = self.body(e, c);
                            out_else = Some(b);
                            outs = join_opt(outs, o);
                        }
                    }
                }
                None => outs = join_opt(outs, Some(c)),
            }
        }
        if out_arms.is_empty() {
            return match out_else {
                Some(Stmt::Seq(v)) => (v, outs),
                Some(s) => (vec![s], outs),
                None => (Vec::new(), outs),
            };
        }
        (vec![Stmt::If { arms: out_arms, els: out_else.map(Box::new) }], outs)
    }
}

/// Phase 4 over one statement.
pub fn simplify_stmt(d: &Domain, s: &Stmt) -> (Stmt, Vec<String>) {
    let mut sm = Simplifier::new(d);
    let out = sm.run(s);
    (out, sm.log)
}
