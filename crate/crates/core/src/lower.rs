//! Symbolic inlining of chart execution into the implementation statement
//! language.
//!
//! One walker serves two clients. [`Style::Derived`] keeps status lookups
//! symbolic (`status(s_P)`), writes each conditional as a complementary
//! pair `g` / `!g`, dispatches over substates innermost-first, and compares
//! data guards against zero the way generated C does. [`Style::Generated`]
//! emits the concrete if/else-if code a generator produces.
//!
//! Early return after a local broadcast is expressed with holes: a block
//! marked `split` continues at each of its `Hole`s instead of at its end,
//! and `Exit` jumps to the end of the enclosing chart execution.
//!
//! The walker tracks which constants the DWork fields are known to hold
//! along the current path (from its own guards and writes); a status lookup
//! decided by that knowledge is folded instead of emitted. Besides keeping
//! the output small, this is what makes broadcast inlining finite.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::chart::{Action, ChartDef, DataKind, Decomposition, NodeRef, TransitionDef};
use crate::expr::{BinOp, Expr};
use crate::ir::{IExpr, Record, Ref, Stmt};
use crate::retrieve::{code_name, event_constant, history_field, RetrieveRelation, StatusFormula};

const MAX_NODES: usize = 400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Derived,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LowerError {
    #[error("junction cycle through {0}")]
    JunctionCycle(String),
    #[error("broadcast of {event} nests deeper than {limit}")]
    BroadcastDepth { event: String, limit: usize },
    #[error("inlined program exceeds {0} nodes")]
    TooLarge(usize),
    #[error("variable {0} has no concrete counterpart")]
    UnmappedVariable(String),
    #[error("state {0} has no status formula")]
    NoFormula(String),
    #[error("constant {0} is undefined")]
    UnknownConstant(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

type R = Result<Block, LowerError>;

/// Constants the DWork fields are known to hold (or not hold) on a path.
#[derive(Debug, Clone, Default, PartialEq)]
struct Known {
    eq: BTreeMap<String, i64>,
    ne: BTreeMap<String, BTreeSet<i64>>,
}

impl Known {
    fn is(&self, f: &str, v: i64) -> Option<bool> {
        if let Some(x) = self.eq.get(f) {
            return Some(*x == v);
        }
        self.ne.get(f).is_some_and(|s| s.contains(&v)).then_some(false)
    }

    fn with_eq(&self, f: &str, v: i64) -> Option<Known> {
        match self.is(f, v) {
            Some(false) => None,
            _ => {
                let mut k = self.clone();
                k.write(f, v);
                Some(k)
            }
        }
    }

    fn with_ne(&self, f: &str, v: i64) -> Option<Known> {
        match self.is(f, v) {
            Some(true) => None,
            Some(false) => Some(self.clone()),
            None => {
                let mut k = self.clone();
                k.ne.entry(f.to_string()).or_default().insert(v);
                Some(k)
            }
        }
    }

    fn write(&mut self, f: &str, v: i64) {
        self.ne.remove(f);
        self.eq.insert(f.to_string(), v);
    }

    fn join(a: &Known, b: &Known) -> Known {
        let mut out = Known::default();
        let fields: BTreeSet<&String> = a.eq.keys().chain(a.ne.keys()).chain(b.eq.keys()).chain(b.ne.keys()).collect();
        let empty = BTreeSet::new();
        for f in fields {
            let (ae, be) = (a.eq.get(f), b.eq.get(f));
            let (an, bn) = (a.ne.get(f).unwrap_or(&empty), b.ne.get(f).unwrap_or(&empty));
            let ne: BTreeSet<i64> = match (ae, be) {
                (Some(x), Some(y)) if x == y => {
                    out.eq.insert(f.clone(), *x);
                    continue;
                }
                (Some(_), Some(_)) => BTreeSet::new(),
                (Some(x), None) => bn.iter().copied().filter(|v| v != x).collect(),
                (None, Some(y)) => an.iter().copied().filter(|v| v != y).collect(),
                (None, None) => an.intersection(bn).copied().collect(),
            };
            if !ne.is_empty() {
                out.ne.insert(f.clone(), ne);
            }
        }
        out
    }
}

fn join(a: Option<Known>, b: Option<Known>) -> Option<Known> {
    match (a, b) {
        (Some(a), Some(b)) => Some(Known::join(&a, &b)),
        (a, None) => a,
        (None, b) => b,
    }
}

#[derive(Debug, Clone)]
enum Code {
    S(Stmt),
    If(Vec<(IExpr, Vec<Code>)>, Option<Vec<Code>>),
    Hole,
    Exit,
}

struct Block {
    code: Vec<Code>,
    split: bool,
    /// Knowledge at normal completion; `None` when it cannot complete.
    out: Option<Known>,
    /// Knowledge at the `Exit`s, if any.
    exits: Option<Known>,
}

impl Block {
    fn empty(k: Known) -> Block {
        Block { code: Vec::new(), split: false, out: Some(k), exits: None }
    }

    fn stmt(s: Stmt, k: Known) -> Block {
        Block { code: vec![Code::S(s)], split: false, out: Some(k), exits: None }
    }

    fn hole(k: Known) -> Block {
        Block { code: vec![Code::Hole], split: true, out: Some(k), exits: None }
    }

    fn exit(k: Known) -> Block {
        Block { code: vec![Code::Exit], split: true, out: None, exits: Some(k) }
    }

    fn is_empty(&self) -> bool {
        self.code.is_empty() && !self.split
    }
}

fn fill(code: Vec<Code>, rep: &[Code]) -> Vec<Code> {
    let mut out = Vec::with_capacity(code.len());
    for c in code {
        match c {
            Code::Hole => out.extend(rep.iter().cloned()),
            Code::If(arms, els) => out.push(Code::If(
                arms.into_iter().map(|(g, b)| (g, fill(b, rep))).collect(),
                els.map(|e| fill(e, rep)),
            )),
            other => out.push(other),
        }
    }
    out
}

fn seq(a: Block, b: Block) -> Block {
    let exits = join(a.exits, b.exits);
    if !a.split {
        let mut code = a.code;
        code.extend(b.code);
        return Block { code, split: b.split, out: b.out, exits };
    }
    let mut rep = b.code;
    if !b.split {
        rep.push(Code::Hole);
    }
    Block { code: fill(a.code, &rep), split: true, out: b.out, exits }
}

fn map_exits(code: Vec<Code>) -> Vec<Code> {
    code.into_iter()
        .map(|c| match c {
            Code::Exit => Code::Hole,
            Code::If(arms, els) => {
                Code::If(arms.into_iter().map(|(g, b)| (g, map_exits(b))).collect(), els.map(map_exits))
            }
            other => other,
        })
        .collect()
}

/// Ends a chart execution: early returns continue after it.
fn close_frame(b: Block) -> Block {
    if b.exits.is_none() {
        return b;
    }
    Block { code: map_exits(b.code), split: true, out: join(b.out, b.exits), exits: None }
}

fn to_stmts(code: Vec<Code>) -> Vec<Stmt> {
    let mut out = Vec::new();
    for c in code {
        match c {
            Code::S(s) => out.push(s),
            Code::If(arms, els) => out.push(Stmt::If {
                arms: arms.into_iter().map(|(g, b)| (g, Stmt::Seq(to_stmts(b)))).collect(),
                els: els.map(|e| Box::new(Stmt::Seq(to_stmts(e)))),
            }),
            Code::Hole | Code::Exit => {}
        }
    }
    out
}

fn count(code: &[Code]) -> usize {
    code.iter()
        .map(|c| match c {
            Code::If(arms, els) => 1 + arms.iter().map(|(_, b)| count(b)).sum::<usize>() + els.as_ref().map_or(0, |e| count(e)),
            _ => 1,
        })
        .sum()
}

fn if_(arms: Vec<(IExpr, Block)>, els: Option<Block>, fall: Option<Known>) -> Block {
    let els = els.filter(|e| !e.is_empty() || fall.is_none());
    let fall = if els.is_some() { None } else { fall };
    let split = arms.iter().any(|(_, b)| b.split) || els.as_ref().is_some_and(|e| e.split);
    let mut out = fall.clone();
    let mut exits = None;
    let mut code_arms = Vec::new();
    for (g, b) in arms {
        out = join(out, b.out);
        exits = join(exits, b.exits);
        let mut code = b.code;
        if split && !b.split {
            code.push(Code::Hole);
        }
        code_arms.push((g, code));
    }
    let code_els = match els {
        Some(e) => {
            out = join(out, e.out);
            exits = join(exits, e.exits);
            let mut code = e.code;
            if split && !e.split {
                code.push(Code::Hole);
            }
            Some(code)
        }
        None if split && fall.is_some() => Some(vec![Code::Hole]),
        None => None,
    };
    Block { code: vec![Code::If(code_arms, code_els)], split, out, exits }
}

#[derive(Debug, Clone)]
enum Test {
    Status(String),
    Code { field: String, constant: String },
    Tid(String),
}

fn dwork(f: &str) -> IExpr {
    Expr::Var(Ref::field(Record::DWork, f))
}

fn konst(c: &str) -> IExpr {
    Expr::Var(Ref::Const(c.to_string()))
}

pub struct Lowerer<'a> {
    c: &'a ChartDef,
    r: &'a RetrieveRelation,
    style: Style,
    limit: usize,
    events: Vec<Option<String>>,
    pub log: Vec<String>,
}

impl<'a> Lowerer<'a> {
    pub fn new(c: &'a ChartDef, r: &'a RetrieveRelation, style: Style, broadcast_limit: usize) -> Self {
        Lowerer { c, r, style, limit: broadcast_limit, events: Vec::new(), log: Vec::new() }
    }

    fn event(&self) -> Option<&str> {
        self.events.last().and_then(|e| e.as_deref())
    }

    fn formula(&self, x: &str) -> Result<&'a StatusFormula, LowerError> {
        self.r.formula(x).ok_or_else(|| LowerError::NoFormula(x.to_string()))
    }

    fn value(&self, constant: &str) -> Result<i64, LowerError> {
        self.r.constant(constant).ok_or_else(|| LowerError::UnknownConstant(constant.to_string()))
    }

    fn map_expr(&self, e: &Expr<String>) -> Result<IExpr, LowerError> {
        e.map_vars(&mut |v: &String| {
            self.r
                .var_field(v)
                .map(|fr| Expr::Var(Ref::Field(fr.record, fr.field.clone())))
                .ok_or_else(|| LowerError::UnmappedVariable(v.clone()))
        })
    }

    fn known(&self, t: &Test, k: &Known) -> Result<Option<bool>, LowerError> {
        Ok(match t {
            Test::Status(x) => match self.formula(x)? {
                StatusFormula::ActiveFlag { field } => k.is(field, 0).map(|z| !z),
                StatusFormula::SubstateCode { field, constant } => k.is(field, self.value(constant)?),
            },
            Test::Code { field, constant } => k.is(field, self.value(constant)?),
            Test::Tid(_) => None,
        })
    }

    fn assume(&self, t: &Test, k: &Known, holds: bool) -> Result<Option<Known>, LowerError> {
        let eq = |f: &str, v: i64| if holds { k.with_eq(f, v) } else { k.with_ne(f, v) };
        Ok(match t {
            Test::Status(x) => match self.formula(x)? {
                StatusFormula::ActiveFlag { field } => {
                    if holds {
                        k.with_ne(field, 0)
                    } else {
                        k.with_eq(field, 0)
                    }
                }
                StatusFormula::SubstateCode { field, constant } => eq(field, self.value(constant)?),
            },
            Test::Code { field, constant } => eq(field, self.value(constant)?),
            Test::Tid(_) => Some(k.clone()),
        })
    }

    fn test_expr(&self, t: &Test, positive: bool) -> Result<IExpr, LowerError> {
        let (pos, neg) = match (self.style, t) {
            (Style::Derived, Test::Status(x)) => {
                let e = Expr::Var(Ref::Status(x.clone()));
                (e.clone(), Expr::not(e))
            }
            (Style::Generated, Test::Status(x)) => match self.formula(x)? {
                StatusFormula::ActiveFlag { field } => (
                    Expr::bin(BinOp::Ne, dwork(field), Expr::Int(0)),
                    Expr::bin(BinOp::Eq, dwork(field), Expr::Int(0)),
                ),
                StatusFormula::SubstateCode { field, constant } => (
                    Expr::bin(BinOp::Eq, dwork(field), konst(constant)),
                    Expr::bin(BinOp::Ne, dwork(field), konst(constant)),
                ),
            },
            (style, Test::Code { field, constant }) => {
                let e = Expr::bin(BinOp::Eq, dwork(field), konst(constant));
                let n = match style {
                    Style::Derived => Expr::not(e.clone()),
                    Style::Generated => Expr::bin(BinOp::Ne, dwork(field), konst(constant)),
                };
                (e, n)
            }
            (style, Test::Tid(c)) => {
                let tid = Expr::Var(Ref::Param("tid".into()));
                let e = Expr::bin(BinOp::Eq, tid.clone(), konst(c));
                let n = match style {
                    Style::Derived => Expr::not(e.clone()),
                    Style::Generated => Expr::bin(BinOp::Ne, tid, konst(c)),
                };
                (e, n)
            }
        };
        Ok(if positive { pos } else { neg })
    }

    fn then(&mut self, a: Block, f: impl FnOnce(&mut Self, Known) -> R) -> R {
        match a.out.clone() {
            None => Ok(a),
            Some(k) => {
                let b = f(self, k)?;
                Ok(seq(a, b))
            }
        }
    }

    /// Two-way branch on a test; `neg_first` puts the failing case first.
    fn branch(
        &mut self,
        t: Test,
        k: Known,
        neg_first: bool,
        on_true: &dyn Fn(&mut Self, Known) -> R,
        on_false: &dyn Fn(&mut Self, Known) -> R,
    ) -> R {
        match self.known(&t, &k)? {
            Some(true) => return on_true(self, k),
            Some(false) => return on_false(self, k),
            None => {}
        }
        let kt = self.assume(&t, &k, true)?.expect("undecided test is satisfiable");
        let kf = self.assume(&t, &k, false)?.expect("undecided test is refutable");
        let a = on_true(self, kt)?;
        let b = on_false(self, kf)?;
        let (pos, neg) = (self.test_expr(&t, true)?, self.test_expr(&t, false)?);
        Ok(match (self.style, neg_first) {
            (Style::Derived, false) => if_(vec![(pos, a), (neg, b)], None, None),
            (Style::Derived, true) => if_(vec![(neg, b), (pos, a)], None, None),
            (Style::Generated, false) => {
                let fall = b.out.clone();
                if_(vec![(pos, a)], Some(b), fall)
            }
            (Style::Generated, true) => {
                let fall = a.out.clone();
                if_(vec![(neg, b)], Some(a), fall)
            }
        })
    }

    fn data_branch(
        &mut self,
        cond: IExpr,
        k: Known,
        on_true: &dyn Fn(&mut Self, Known) -> R,
        on_false: &dyn Fn(&mut Self, Known) -> R,
    ) -> R {
        let a = on_true(self, k.clone())?;
        let b = on_false(self, k)?;
        Ok(match self.style {
            Style::Derived => {
                let g = Expr::bin(BinOp::Ne, cond, Expr::Int(0));
                if_(vec![(g.clone(), a), (Expr::not(g), b)], None, None)
            }
            Style::Generated => {
                let fall = b.out.clone();
                if_(vec![(cond, a)], Some(b), fall)
            }
        })
    }

    /// Multi-way dispatch. Derived style nests complementary pairs (the
    /// last item outermost when `last_outermost`); generated style is an
    /// else-if chain in the same order ending in `default`.
    fn chain(
        &mut self,
        items: &[(Test, String)],
        last_outermost: bool,
        k: Known,
        body: &dyn Fn(&mut Self, &str, Known) -> R,
        default: &dyn Fn(&mut Self, Known) -> R,
    ) -> R {
        match self.style {
            Style::Derived => {
                let Some(((t, x), rest)) = (if last_outermost { items.split_last() } else { items.split_first() }) else {
                    return default(self, k);
                };
                match self.known(t, &k)? {
                    Some(true) => return body(self, x, k),
                    Some(false) => return self.chain(rest, last_outermost, k, body, default),
                    None => {}
                }
                let kt = self.assume(t, &k, true)?.expect("undecided test is satisfiable");
                let kf = self.assume(t, &k, false)?.expect("undecided test is refutable");
                let a = body(self, x, kt)?;
                let b = self.chain(rest, last_outermost, kf, body, default)?;
                Ok(if_(vec![(self.test_expr(t, true)?, a), (self.test_expr(t, false)?, b)], None, None))
            }
            Style::Generated => {
                let mut arms = Vec::new();
                let mut cur = k;
                let mut els = None;
                // same priority order as the derived nesting
                let ordered: Vec<&(Test, String)> =
                    if last_outermost { items.iter().rev().collect() } else { items.iter().collect() };
                for (t, x) in ordered {
                    match self.known(t, &cur)? {
                        Some(false) => continue,
                        Some(true) => {
                            let b = body(self, x, cur.clone())?;
                            if arms.is_empty() {
                                return Ok(b);
                            }
                            els = Some(b);
                            break;
                        }
                        None => {
                            let kt = self.assume(t, &cur, true)?.expect("undecided test is satisfiable");
                            arms.push((self.test_expr(t, true)?, body(self, x, kt)?));
                            cur = self.assume(t, &cur, false)?.expect("undecided test is refutable");
                        }
                    }
                }
                let els = match els {
                    Some(e) => e,
                    None => default(self, cur)?,
                };
                if arms.is_empty() {
                    return Ok(els);
                }
                let fall = els.out.clone();
                Ok(if_(arms, Some(els), fall))
            }
        }
    }

    fn activate(&mut self, x: &str, mut k: Known) -> R {
        let (field, value, v) = match self.formula(x)? {
            StatusFormula::ActiveFlag { field } => (field, Expr::Int(1), 1),
            StatusFormula::SubstateCode { field, constant } => (field, konst(constant), self.value(constant)?),
        };
        k.write(field, v);
        Ok(Block::stmt(Stmt::assign(Record::DWork, field, value), k))
    }

    fn deactivate(&mut self, x: &str, mut k: Known) -> R {
        let field = self.formula(x)?.field();
        k.write(field, 0);
        Ok(Block::stmt(Stmt::assign(Record::DWork, field, Expr::Int(0)), k))
    }

    fn record_history(&mut self, x: &str, mut k: Known) -> R {
        let parent = &self.c.states[x].parent;
        if !self.c.has_history(parent) {
            return Ok(Block::empty(k));
        }
        let field = history_field(self.c, parent);
        let constant = code_name(self.c, x);
        k.write(&field, self.value(&constant)?);
        Ok(Block::stmt(Stmt::assign(Record::DWork, &field, konst(&constant)), k))
    }

    fn actions(&mut self, acts: &[Action], ctx: &str, k: Known) -> R {
        let mut blk = Block::empty(k);
        for a in acts {
            blk = self.then(blk, |s, k| s.action(a, ctx, k))?;
        }
        Ok(blk)
    }

    fn action(&mut self, a: &Action, ctx: &str, k: Known) -> R {
        match a {
            Action::Assign(v, e) => {
                let fr = self.r.var_field(v).ok_or_else(|| LowerError::UnmappedVariable(v.clone()))?.clone();
                let value = self.map_expr(e)?;
                Ok(Block::stmt(Stmt::Assign { record: fr.record, field: fr.field, value }, k))
            }
            Action::Send(ev) => self.broadcast(ev, ctx, k),
        }
    }

    fn broadcast(&mut self, ev: &str, ctx: &str, k: Known) -> R {
        if self.events.len() > self.limit {
            return Err(LowerError::BroadcastDepth { event: ev.to_string(), limit: self.limit });
        }
        if self.events.len() == 1 {
            self.log.push(format!("inlined broadcast of {ev} from {ctx}"));
        }
        let f = self.frame(Some(ev.to_string()), k)?;
        self.then(f, |s, k| s.early_return(ctx, k))
    }

    fn early_return(&mut self, ctx: &str, k: Known) -> R {
        let t = Test::Status(ctx.to_string());
        match self.known(&t, &k)? {
            Some(true) => return Ok(Block::empty(k)),
            Some(false) => return Ok(Block::exit(k)),
            None => {}
        }
        let kt = self.assume(&t, &k, true)?.expect("undecided");
        let kf = self.assume(&t, &k, false)?.expect("undecided");
        let (pos, neg) = (self.test_expr(&t, true)?, self.test_expr(&t, false)?);
        Ok(match self.style {
            Style::Derived => if_(vec![(pos, Block::hole(kt)), (neg, Block::exit(kf))], None, None),
            Style::Generated => if_(vec![(pos, Block::hole(kt))], Some(Block::exit(kf)), None),
        })
    }

    /// One execution of the chart under `ev`.
    fn frame(&mut self, ev: Option<String>, k: Known) -> R {
        self.events.push(ev);
        let root = self.c.identifier.clone();
        let r = self.branch(
            Test::Status(root.clone()),
            k,
            true,
            &|s, k| s.execute_children(&root, k),
            &|s, k| {
                let a = s.activate(&root, k)?;
                s.then(a, |s, k| s.enter_children(&root, k))
            },
        );
        self.events.pop();
        let b = close_frame(r?);
        let n = count(&b.code);
        if n > MAX_NODES {
            return Err(LowerError::TooLarge(MAX_NODES));
        }
        Ok(b)
    }

    fn enter_state(&mut self, x: &str, k: Known) -> R {
        let c = self.c;
        let a = self.activate(x, k)?;
        let a = self.then(a, |s, k| s.record_history(x, k))?;
        let a = self.then(a, |s, k| s.actions(&c.states[x].entry, x, k))?;
        self.then(a, |s, k| s.enter_children(x, k))
    }

    fn status_items(&self, kids: &[String]) -> Vec<(Test, String)> {
        kids.iter().map(|k| (Test::Status(k.clone()), k.clone())).collect()
    }

    fn enter_children(&mut self, x: &str, k: Known) -> R {
        let c = self.c;
        let kids = c.children_of(x);
        if kids.is_empty() {
            return Ok(Block::empty(k));
        }
        match c.decomposition_of(x) {
            Decomposition::Parallel => {
                let mut b = Block::empty(k);
                for kid in kids {
                    b = self.then(b, |s, k| s.enter_state(kid, k))?;
                }
                Ok(b)
            }
            Decomposition::Sequential if c.has_history(x) => {
                let field = history_field(c, x);
                let items: Vec<(Test, String)> = kids
                    .iter()
                    .map(|kid| (Test::Code { field: field.clone(), constant: code_name(c, kid) }, kid.clone()))
                    .collect();
                self.chain(&items, true, k, &|s, kid, k| s.enter_state(kid, k), &|s, k| s.default_entry(x, k))
            }
            Decomposition::Sequential => self.default_entry(x, k),
        }
    }

    fn default_entry(&mut self, x: &str, k: Known) -> R {
        let c = self.c;
        let cands = c.defaults_in(x);
        self.search(
            &cands,
            0,
            x,
            &[],
            &[],
            k,
            &|s, path, k| {
                let a = s.path_actions(path, x, k)?;
                let target = path_target(path);
                s.then(a, |s, k| s.enter_state(&target, k))
            },
            &|_, k| Ok(Block::empty(k)),
        )
    }

    fn path_actions(&mut self, path: &[&TransitionDef], ctx: &str, k: Known) -> R {
        let acts: Vec<Action> = path.iter().flat_map(|t| t.transition_action.iter().cloned()).collect();
        self.actions(&acts, ctx, k)
    }

    fn exit_state(&mut self, x: &str, k: Known) -> R {
        let c = self.c;
        let a = self.exit_children(x, k)?;
        let a = self.then(a, |s, k| s.actions(&c.states[x].exit, x, k))?;
        self.then(a, |s, k| s.deactivate(x, k))
    }

    fn exit_children(&mut self, x: &str, k: Known) -> R {
        let c = self.c;
        let kids = c.children_of(x);
        if kids.is_empty() {
            return Ok(Block::empty(k));
        }
        match c.decomposition_of(x) {
            Decomposition::Sequential => {
                let items = self.status_items(kids);
                self.chain(&items, true, k, &|s, kid, k| s.exit_state(kid, k), &|_, k| Ok(Block::empty(k)))
            }
            Decomposition::Parallel => {
                let mut b = Block::empty(k);
                for kid in kids.iter().rev() {
                    b = self.then(b, |s, k| s.exit_state(kid, k))?;
                }
                Ok(b)
            }
        }
    }

    fn execute_children(&mut self, x: &str, k: Known) -> R {
        let c = self.c;
        let kids = c.children_of(x);
        if kids.is_empty() {
            return Ok(Block::empty(k));
        }
        match c.decomposition_of(x) {
            Decomposition::Sequential => {
                let items = self.status_items(kids);
                self.chain(&items, true, k, &|s, kid, k| s.execute_state(kid, k), &|_, k| Ok(Block::empty(k)))
            }
            Decomposition::Parallel => {
                let mut b = Block::empty(k);
                for kid in kids {
                    b = self.then(b, |s, k| s.execute_state(kid, k))?;
                }
                Ok(b)
            }
        }
    }

    fn execute_state(&mut self, x: &str, k: Known) -> R {
        let c = self.c;
        let (outer, inner): (Vec<&TransitionDef>, Vec<&TransitionDef>) =
            c.outgoing(&NodeRef::State(x.to_string())).into_iter().partition(|t| c.parent_of(&t.target) != x);
        let parent = c.states[x].parent.clone();
        self.search(
            &outer,
            0,
            x,
            &[],
            &[],
            k,
            &|s, path, k| {
                let target = path_target(path);
                let a = s.exit_state(x, k)?;
                let a = s.then(a, |s, k| s.path_actions(path, &parent, k))?;
                s.then(a, |s, k| s.enter_state(&target, k))
            },
            &|s, k| {
                s.search(
                    &inner,
                    0,
                    x,
                    &[],
                    &[],
                    k,
                    &|s, path, k| {
                        let target = path_target(path);
                        let a = s.exit_children(x, k)?;
                        let a = s.then(a, |s, k| s.path_actions(path, x, k))?;
                        s.then(a, |s, k| s.enter_state(&target, k))
                    },
                    &|s, k| s.during(x, k),
                )
            },
        )
    }

    fn during(&mut self, x: &str, k: Known) -> R {
        let st = &self.c.states[x];
        let mut a = self.actions(&st.during, x, k)?;
        let ev = self.event().map(str::to_string);
        for (e, acts) in &st.on_actions {
            if ev.as_deref() == Some(e.as_str()) {
                a = self.then(a, |s, k| s.actions(acts, x, k))?;
            }
        }
        self.then(a, |s, k| s.execute_children(x, k))
    }

    /// Depth-first path search from `cands[i..]`. Condition actions stay
    /// in place when a junction branch fails and the search moves on.
    #[allow(clippy::too_many_arguments)]
    fn search(
        &mut self,
        cands: &[&'a TransitionDef],
        i: usize,
        ctx: &str,
        on_path: &[String],
        acc: &[&'a TransitionDef],
        k: Known,
        found: &dyn Fn(&mut Self, &[&'a TransitionDef], Known) -> R,
        none: &dyn Fn(&mut Self, Known) -> R,
    ) -> R {
        let ev = self.event().map(str::to_string);
        let mut i = i;
        while i < cands.len() && cands[i].trigger.as_ref().is_some_and(|tr| ev.as_deref() != Some(tr.as_str())) {
            i += 1;
        }
        if i == cands.len() {
            return none(self, k);
        }
        let t = cands[i];
        let body = |s: &mut Self, k: Known| -> R {
            let a = s.actions(&t.condition_action, ctx, k)?;
            s.then(a, |s, k| {
                let mut acc2 = acc.to_vec();
                acc2.push(t);
                match &t.target {
                    NodeRef::State(_) => found(s, &acc2, k),
                    NodeRef::Junction(j) => {
                        if on_path.contains(j) {
                            return Err(LowerError::JunctionCycle(j.clone()));
                        }
                        let mut on2 = on_path.to_vec();
                        on2.push(j.clone());
                        let next = s.c.outgoing(&t.target);
                        s.search(&next, 0, ctx, &on2, &acc2, k, found, &|s, k| {
                            s.search(cands, i + 1, ctx, on_path, acc, k, found, none)
                        })
                    }
                }
            })
        };
        match &t.condition {
            None => body(self, k),
            Some(g) => {
                let g = self.map_expr(g)?;
                self.data_branch(g, k, &body, &|s, k| s.search(cands, i + 1, ctx, on_path, acc, k, found, none))
            }
        }
    }

    /// Body of the output function: event dispatch on `tid`, one chart
    /// execution per branch, then the copy of block outputs to `Y`.
    /// Broadcasts nest one Rust frame chain per level, so the lowering runs
    /// on a thread with room for the full depth limit.
    pub fn output_body(&mut self) -> Result<Stmt, LowerError> {
        std::thread::scope(|sc| {
            std::thread::Builder::new()
                .stack_size(LOWER_STACK)
                .spawn_scoped(sc, || self.output_body_here())
                .expect("spawn lowering thread")
                .join()
                .unwrap_or_else(|e| std::panic::resume_unwind(e))
        })
    }

    fn output_body_here(&mut self) -> Result<Stmt, LowerError> {
        let c = self.c;
        let events: Vec<(Test, String)> =
            c.input_events().map(|e| (Test::Tid(event_constant(&e.name)), e.name.clone())).collect();
        let k = Known::default();
        let blk = if events.is_empty() {
            self.frame(None, k)?
        } else {
            self.chain(&events, false, k, &|s, e, k| s.frame(Some(e.to_string()), k), &|s, k| s.frame(None, k))?
        };
        let mut stmts = to_stmts(blk.code);
        stmts.extend(output_copies(c, self.r));
        Ok(Stmt::Seq(stmts).normalize())
    }
}

const LOWER_STACK: usize = 512 << 20;

fn path_target(path: &[&TransitionDef]) -> String {
    path.last().expect("a completed path has a transition").target.id().to_string()
}

/// `Y.y := B.y` for every output the relation keeps in `B`.
pub fn output_copies(c: &ChartDef, r: &RetrieveRelation) -> Vec<Stmt> {
    c.vars_of(DataKind::Output)
        .filter_map(|d| {
            let fr = r.var_field(&d.name)?;
            (fr.record != Record::Y).then(|| {
                Stmt::assign(Record::Y, &d.name, Expr::Var(Ref::Field(fr.record, fr.field.clone())))
            })
        })
        .collect()
}

/// Initial state: every status false, no history, every variable zero.
pub fn init_body(c: &ChartDef, r: &RetrieveRelation) -> Stmt {
    let mut out: Vec<Stmt> =
        r.control_fields().iter().map(|f| Stmt::assign(Record::DWork, f, Expr::Int(0))).collect();
    for d in &c.data {
        if let Some(fr) = r.var_field(&d.name) {
            let zero = match d.sort.zero() {
                crate::expr::Value::Float(x) => Expr::Float(x),
                crate::expr::Value::Int(i) => Expr::Int(i),
            };
            out.push(Stmt::Assign { record: fr.record, field: fr.field.clone(), value: zero.clone() });
            if d.kind == DataKind::Output && fr.record != Record::Y {
                out.push(Stmt::assign(Record::Y, &d.name, zero));
            }
        }
    }
    Stmt::Seq(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_keeps_common_facts() {
        let mut a = Known::default();
        a.write("f", 1);
        let b = Known::default().with_ne("f", 2).unwrap();
        let j = Known::join(&a, &b);
        assert_eq!(j.is("f", 2), Some(false));
        assert_eq!(j.is("f", 1), None);
    }

    #[test]
    fn seq_fills_holes() {
        let k = Known::default();
        let split = if_(
            vec![(Expr::Int(1), Block::hole(k.clone()))],
            Some(Block::exit(k.clone())),
            None,
        );
        let tail = Block::stmt(Stmt::assign(Record::B, "y", Expr::Int(2)), k);
        let b = seq(split, tail);
        assert!(b.split);
        let Code::If(arms, Some(els)) = &b.code[0] else { panic!() };
        assert!(matches!(arms[0].1[..], [Code::S(_), Code::Hole]));
        assert!(matches!(els[..], [Code::Exit]));
    }
}
