//! Guard normal form and the path knowledge used to decide guards.
//!
//! A guard normalizes to atoms `place ∈ S` (S an interval set over i64),
//! opaque literals for anything not of that shape, and `and`/`or` over
//! those. Knowledge is a range per place plus a set of opaque facts; it is
//! seeded from the concrete invariant and refined by guards and writes.

use std::collections::BTreeMap;

use crate::expr::{BinOp, Expr, Sort, UnOp};
use crate::ir::{IExpr, ImplProgram, Record, Ref};
use crate::retrieve::RetrieveRelation;

/// Sorted, disjoint, non-adjacent inclusive intervals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ISet(Vec<(i64, i64)>);

impl ISet {
    pub fn full() -> ISet {
        ISet(vec![(i64::MIN, i64::MAX)])
    }

    pub fn empty() -> ISet {
        ISet(Vec::new())
    }

    pub fn point(v: i64) -> ISet {
        ISet(vec![(v, v)])
    }

    pub fn range(lo: i64, hi: i64) -> ISet {
        if lo > hi {
            ISet::empty()
        } else {
            ISet(vec![(lo, hi)])
        }
    }

    pub fn from_values(vs: impl IntoIterator<Item = i64>) -> ISet {
        vs.into_iter().fold(ISet::empty(), |acc, v| acc.union(&ISet::point(v)))
    }

    fn from_raw(mut v: Vec<(i64, i64)>) -> ISet {
        v.sort_unstable();
        let mut out: Vec<(i64, i64)> = Vec::new();
        for (a, b) in v {
            match out.last_mut() {
                Some((_, hi)) if a <= hi.saturating_add(1) => *hi = (*hi).max(b),
                _ => out.push((a, b)),
            }
        }
        ISet(out)
    }

    pub fn from_cmp(op: BinOp, v: i64) -> ISet {
        match op {
            BinOp::Eq => ISet::point(v),
            BinOp::Ne => ISet::point(v).complement(),
            BinOp::Lt => v.checked_sub(1).map_or(ISet::empty(), |x| ISet::range(i64::MIN, x)),
            BinOp::Le => ISet::range(i64::MIN, v),
            BinOp::Gt => v.checked_add(1).map_or(ISet::empty(), |x| ISet::range(x, i64::MAX)),
            BinOp::Ge => ISet::range(v, i64::MAX),
            _ => ISet::full(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: i64) -> bool {
        self.0.iter().any(|(a, b)| *a <= v && v <= *b)
    }

    pub fn union(&self, o: &ISet) -> ISet {
        ISet::from_raw(self.0.iter().chain(o.0.iter()).copied().collect())
    }

    pub fn intersect(&self, o: &ISet) -> ISet {
        let mut out = Vec::new();
        for (a, b) in &self.0 {
            for (c, d) in &o.0 {
                let (lo, hi) = ((*a).max(*c), (*b).min(*d));
                if lo <= hi {
                    out.push((lo, hi));
                }
            }
        }
        ISet::from_raw(out)
    }

    pub fn complement(&self) -> ISet {
        let mut out = Vec::new();
        let mut next = Some(i64::MIN);
        for (a, b) in &self.0 {
            if let Some(n) = next {
                if n < *a {
                    out.push((n, a - 1));
                }
            }
            next = b.checked_add(1);
        }
        if let Some(n) = next {
            out.push((n, i64::MAX));
        }
        ISet(out)
    }

    pub fn subset_of(&self, o: &ISet) -> bool {
        self.intersect(&o.complement()).is_empty()
    }

    /// The members, when there are at most `limit` of them.
    pub fn values(&self, limit: usize) -> Option<Vec<i64>> {
        let mut out = Vec::new();
        for (a, b) in &self.0 {
            let n = (*b as i128 - *a as i128 + 1) as u128;
            if out.len() as u128 + n > limit as u128 {
                return None;
            }
            out.extend(*a..=*b);
        }
        Some(out)
    }

    pub fn intervals(&self) -> &[(i64, i64)] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum G {
    Const(bool),
    Atom(Ref, ISet),
    /// A literal the decision procedure treats as an uninterpreted
    /// proposition; `bool` is its polarity.
    Opaque(IExpr, bool),
    And(Vec<G>),
    Or(Vec<G>),
}

impl G {
    pub fn negate(self) -> G {
        match self {
            G::Const(b) => G::Const(!b),
            G::Atom(p, s) => G::Atom(p, s.complement()),
            G::Opaque(e, pol) => G::Opaque(e, !pol),
            G::And(v) => G::Or(v.into_iter().map(G::negate).collect()),
            G::Or(v) => G::And(v.into_iter().map(G::negate).collect()),
        }
    }
}

/// Static facts about the fields of one program under one relation.
pub struct Domain {
    pub consts: BTreeMap<String, i64>,
    sorts: BTreeMap<Ref, Sort>,
    /// Range a place holds when nothing else is known.
    base: BTreeMap<Ref, ISet>,
    /// Status formulas, for resolving `status(s)`.
    pub formulas: BTreeMap<String, IExpr>,
    /// Names for the values of control places.
    names: BTreeMap<Ref, BTreeMap<i64, String>>,
}

fn sort_range(s: Sort) -> ISet {
    match s {
        Sort::Byte => ISet::range(0, 255),
        _ => ISet::full(),
    }
}

impl Domain {
    pub fn new(r: &RetrieveRelation, p: &ImplProgram) -> Domain {
        let mut d = Domain {
            consts: p.constants.clone(),
            sorts: BTreeMap::new(),
            base: BTreeMap::new(),
            formulas: r.status_formulas.iter().map(|e| (e.state.clone(), e.formula.to_expr())).collect(),
            names: BTreeMap::new(),
        };
        for (k, v) in &r.constants {
            d.consts.entry(k.clone()).or_insert(*v);
        }
        for rec in Record::ALL {
            for f in p.record(rec) {
                d.sorts.insert(Ref::field(rec, &f.name), f.sort);
            }
        }
        let tid = Ref::Param("tid".into());
        d.sorts.insert(tid.clone(), Sort::Int);
        let mut events: BTreeMap<i64, String> =
            p.constants.iter().filter(|(k, _)| k.starts_with("event_")).map(|(k, v)| (*v, k.clone())).collect();
        let n = events.keys().copied().max().unwrap_or(0);
        d.base.insert(tid.clone(), ISet::range(0, n));
        events.insert(0, "0".into());
        d.names.insert(tid, events);
        for f in r.control_fields() {
            let place = Ref::field(Record::DWork, &f);
            let mut names: BTreeMap<i64, String> =
                r.codes_of(&f).into_iter().map(|(v, c)| (v, c.to_string())).collect();
            if !names.is_empty() {
                names.insert(0, "0".into());
            }
            d.names.insert(place, names);
        }
        for c in &r.concrete_invariant {
            d.base.insert(Ref::field(Record::DWork, &c.field), ISet::from_values(c.values.iter().copied()));
        }
        d
    }

    pub fn sort(&self, p: &Ref) -> Option<Sort> {
        self.sorts.get(p).copied()
    }

    fn sort_range(&self, p: &Ref) -> ISet {
        self.sort(p).map_or(ISet::full(), sort_range)
    }

    /// Knowledge at the start of a step: the invariant plus sort ranges.
    pub fn initial(&self) -> Know {
        let mut k = Know::default();
        for (p, s) in &self.sorts {
            let r = self.base.get(p).cloned().unwrap_or_else(|| sort_range(*s));
            if r != ISet::full() {
                k.ranges.insert(p.clone(), r);
            }
        }
        k
    }

    /// DWork fields and the event parameter: compared against constants,
    /// rendered by name.
    pub fn is_control(&self, p: &Ref) -> bool {
        matches!(p, Ref::Field(Record::DWork, _) | Ref::Param(_))
    }

    pub fn value_name(&self, p: &Ref, v: i64) -> IExpr {
        match self.names.get(p).and_then(|m| m.get(&v)) {
            Some(n) if n != "0" => Expr::Var(Ref::Const(n.clone())),
            _ => Expr::Int(v),
        }
    }

    pub fn const_value(&self, e: &IExpr) -> Option<i64> {
        match e {
            Expr::Int(i) => Some(*i),
            Expr::Var(Ref::Const(c)) => self.consts.get(c).copied(),
            Expr::Unary(UnOp::Neg, x) => self.const_value(x).and_then(i64::checked_neg),
            _ => None,
        }
    }

    fn int_place<'e>(&self, e: &'e IExpr) -> Option<&'e Ref> {
        match e {
            Expr::Var(p @ (Ref::Field(..) | Ref::Param(_))) if self.sort(p).is_some_and(|s| s != Sort::Float) => {
                Some(p)
            }
            _ => None,
        }
    }

    /// Replaces every `status(s)` by its formula.
    pub fn resolve(&self, e: &IExpr) -> IExpr {
        e.map_vars(&mut |r: &Ref| -> Result<IExpr, ()> {
            Ok(match r {
                Ref::Status(s) => self.formulas.get(s).cloned().unwrap_or_else(|| Expr::Var(r.clone())),
                other => Expr::Var(other.clone()),
            })
        })
        .expect("infallible")
    }

    /// Normal form of a guard with statuses already resolved.
    pub fn normalize(&self, e: &IExpr) -> G {
        match e {
            Expr::Int(i) => G::Const(*i != 0),
            Expr::Float(x) => G::Const(*x != 0.0),
            Expr::Var(Ref::Const(_)) => G::Const(self.const_value(e).is_some_and(|v| v != 0)),
            Expr::Var(_) => match self.int_place(e) {
                Some(p) => G::Atom(p.clone(), ISet::point(0).complement()),
                None => G::Opaque(e.clone(), true),
            },
            Expr::Unary(UnOp::Not, x) => self.normalize(x).negate(),
            Expr::Binary(BinOp::And, a, b) => G::And(vec![self.normalize(a), self.normalize(b)]),
            Expr::Binary(BinOp::Or, a, b) => G::Or(vec![self.normalize(a), self.normalize(b)]),
            Expr::Binary(op, a, b) if op.is_comparison() => {
                let (ca, cb) = (self.const_value(a), self.const_value(b));
                if let (Some(x), Some(y)) = (ca, cb) {
                    return G::Const(ISet::from_cmp(*op, y).contains(x));
                }
                // a 0/1-valued operand compared with a constant
                if matches!(op, BinOp::Eq | BinOp::Ne) {
                    if let (true, Some(v)) = (a.is_boolean(), cb) {
                        let g = self.normalize(a);
                        return match (op, v) {
                            (BinOp::Ne, 0) | (BinOp::Eq, 1) => g,
                            (BinOp::Eq, 0) | (BinOp::Ne, 1) => g.negate(),
                            _ => G::Const(*op == BinOp::Ne),
                        };
                    }
                }
                if let (Some(p), Some(v)) = (self.int_place(a), cb) {
                    return G::Atom(p.clone(), ISet::from_cmp(*op, v));
                }
                if let (Some(v), Some(p)) = (ca, self.int_place(b)) {
                    return G::Atom(p.clone(), ISet::from_cmp(op.mirrored(), v));
                }
                G::Opaque(e.clone(), true)
            }
            _ => G::Opaque(e.clone(), true),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Know {
    /// Absent places are unconstrained.
    ranges: BTreeMap<Ref, ISet>,
    facts: Vec<(IExpr, bool)>,
}

fn mentions(e: &IExpr, p: &Ref) -> bool {
    let mut hit = false;
    e.visit_vars(&mut |r| hit |= r == p);
    hit
}

impl Know {
    pub fn range(&self, p: &Ref) -> ISet {
        self.ranges.get(p).cloned().unwrap_or_else(ISet::full)
    }

    fn set_range(&mut self, p: &Ref, s: ISet) {
        if s == ISet::full() {
            self.ranges.remove(p);
        } else {
            self.ranges.insert(p.clone(), s);
        }
    }

    pub fn eval(&self, g: &G) -> Option<bool> {
        match g {
            G::Const(b) => Some(*b),
            G::Atom(p, s) => {
                let r = self.range(p);
                if r.intersect(s).is_empty() {
                    Some(false)
                } else if r.subset_of(s) {
                    Some(true)
                } else {
                    None
                }
            }
            G::Opaque(e, pol) => self.facts.iter().find(|(f, _)| f == e).map(|(_, v)| v == pol),
            G::And(v) => {
                let rs: Vec<Option<bool>> = v.iter().map(|g| self.eval(g)).collect();
                if rs.contains(&Some(false)) {
                    Some(false)
                } else if rs.iter().all(|r| *r == Some(true)) {
                    Some(true)
                } else {
                    None
                }
            }
            G::Or(v) => {
                let rs: Vec<Option<bool>> = v.iter().map(|g| self.eval(g)).collect();
                if rs.contains(&Some(true)) {
                    Some(true)
                } else if rs.iter().all(|r| *r == Some(false)) {
                    Some(false)
                } else {
                    None
                }
            }
        }
    }

    /// Knowledge after `g` is known to hold; `None` if that is impossible.
    pub fn assume(&self, g: &G) -> Option<Know> {
        match g {
            G::Const(true) => Some(self.clone()),
            G::Const(false) => None,
            G::Atom(p, s) => {
                let r = self.range(p).intersect(s);
                if r.is_empty() {
                    return None;
                }
                let mut k = self.clone();
                k.set_range(p, r);
                Some(k)
            }
            G::Opaque(e, pol) => match self.facts.iter().find(|(f, _)| f == e) {
                Some((_, v)) if v != pol => None,
                Some(_) => Some(self.clone()),
                None => {
                    let mut k = self.clone();
                    k.facts.push((e.clone(), *pol));
                    Some(k)
                }
            },
            G::And(v) => v.iter().try_fold(self.clone(), |k, g| k.assume(g)),
            G::Or(v) => v.iter().filter_map(|g| self.assume(g)).reduce(|a, b| Know::join(&a, &b)),
        }
    }

    pub fn join(a: &Know, b: &Know) -> Know {
        let mut k = Know::default();
        for p in a.ranges.keys().filter(|p| b.ranges.contains_key(*p)) {
            k.set_range(p, a.range(p).union(&b.range(p)));
        }
        k.facts = a.facts.iter().filter(|f| b.facts.contains(f)).cloned().collect();
        k
    }

    /// Effect of `p := value`.
    pub fn write(&mut self, d: &Domain, p: &Ref, value: &IExpr) {
        let r = match d.const_value(value) {
            Some(v) => {
                let v = d.sort(p).map_or(v, |s| s.coerce(crate::expr::Value::Int(v)).as_i64());
                ISet::point(v)
            }
            None => d.sort_range(p),
        };
        self.set_range(p, r);
        self.facts.retain(|(e, _)| !mentions(e, p));
    }

    /// Effect of an opaque call: everything may have changed.
    pub fn havoc(&mut self, d: &Domain) {
        let ps: Vec<Ref> = self.ranges.keys().cloned().collect();
        for p in ps {
            self.set_range(&p, d.sort_range(&p));
        }
        self.facts.clear();
    }
}

pub fn join_opt(a: Option<Know>, b: Option<Know>) -> Option<Know> {
    match (a, b) {
        (Some(a), Some(b)) => Some(Know::join(&a, &b)),
        (a, None) => a,
        (None, b) => b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_set() -> impl Strategy<Value = Vec<i64>> {
        proptest::collection::vec(-6i64..6, 0..6)
    }

    proptest! {
        #[test]
        fn set_algebra_matches_membership(a in small_set(), b in small_set(), x in -8i64..8) {
            let (sa, sb) = (ISet::from_values(a.iter().copied()), ISet::from_values(b.iter().copied()));
            prop_assert_eq!(sa.union(&sb).contains(x), a.contains(&x) || b.contains(&x));
            prop_assert_eq!(sa.intersect(&sb).contains(x), a.contains(&x) && b.contains(&x));
            prop_assert_eq!(sa.complement().contains(x), !a.contains(&x));
            prop_assert_eq!(sa.complement().complement(), sa);
        }

        #[test]
        fn comparison_sets_agree_with_comparison(v in -5i64..5, x in -8i64..8) {
            for (op, f) in [
                (BinOp::Lt, x < v), (BinOp::Le, x <= v), (BinOp::Gt, x > v),
                (BinOp::Ge, x >= v), (BinOp::Eq, x == v), (BinOp::Ne, x != v),
            ] {
                prop_assert_eq!(ISet::from_cmp(op, v).contains(x), f);
            }
        }
    }

    #[test]
    fn extremes_do_not_overflow() {
        assert!(ISet::from_cmp(BinOp::Lt, i64::MIN).is_empty());
        assert!(ISet::from_cmp(BinOp::Gt, i64::MAX).is_empty());
        assert_eq!(ISet::full().complement(), ISet::empty());
        assert_eq!(ISet::range(0, 255).values(300).map(|v| v.len()), Some(256));
        assert_eq!(ISet::full().values(10), None);
    }

    #[test]
    fn assumption_refutes_sibling_code() {
        let p = Ref::field(Record::DWork, "is_c1");
        let mut k = Know::default();
        k.set_range(&p, ISet::from_values([0, 1, 2]));
        let k2 = k.assume(&G::Atom(p.clone(), ISet::point(2))).unwrap();
        assert_eq!(k2.eval(&G::Atom(p.clone(), ISet::point(1))), Some(false));
        let rest = k.assume(&G::Atom(p.clone(), ISet::point(2)).negate()).unwrap();
        assert_eq!(rest.range(&p).values(4), Some(vec![0, 1]));
    }
}
