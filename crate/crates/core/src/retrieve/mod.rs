//! The retrieve relation between implementation state and chart state.
//!
//! Generated code encodes the status of a chart state in one of two ways:
//! the chart itself and every child of a parallel composite carry an
//! activity flag `is_active_S`; every child of a sequential composite is
//! active iff its parent's substate field `is_P` holds the child's code
//! `IN_X`. History states additionally keep the last active child's code
//! in `was_S`. Chart variables map onto the `U` (inputs) and `B` (outputs,
//! locals) records.

pub(crate) mod check;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{ChartDef, DataKind, Decomposition};
use crate::expr::{BinOp, Expr, Value};
use crate::ir::{IExpr, ImplProgram, ImplState, Record, Ref};
use crate::sem::ChartDynState;

pub use check::{check_functional_total_surjective, RelationReport};

/// Name of the chart-level fields (`is_active_c1`, `is_c1`).
pub const ROOT_TAG: &str = "c1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatusFormula {
    /// Active iff `DWork.field > 0`.
    ActiveFlag { field: String },
    /// Active iff `DWork.field = constant`.
    SubstateCode { field: String, constant: String },
}

impl StatusFormula {
    pub fn field(&self) -> &str {
        match self {
            StatusFormula::ActiveFlag { field } | StatusFormula::SubstateCode { field, .. } => field,
        }
    }

    /// The formula as an implementation expression.
    pub fn to_expr(&self) -> IExpr {
        match self {
            StatusFormula::ActiveFlag { field } => {
                Expr::bin(BinOp::Gt, Expr::Var(Ref::field(Record::DWork, field)), Expr::Int(0))
            }
            StatusFormula::SubstateCode { field, constant } => Expr::bin(
                BinOp::Eq,
                Expr::Var(Ref::field(Record::DWork, field)),
                Expr::Var(Ref::Const(constant.clone())),
            ),
        }
    }
}

impl fmt::Display for StatusFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatusFormula::ActiveFlag { field } => write!(f, "DWork.{field} > 0"),
            StatusFormula::SubstateCode { field, constant } => write!(f, "DWork.{field} = {constant}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusEntry {
    pub state: String,
    pub formula: StatusFormula,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldRef {
    pub record: Record,
    pub field: String,
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.record.name(), self.field)
    }
}

/// `was_S` encoding of one history state: the field and the code of each child.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryField {
    pub field: String,
    pub children: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryMap {
    EmptySet,
    Fields(BTreeMap<String, HistoryField>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeConstraint {
    pub field: String,
    pub values: Vec<i64>,
}

impl fmt::Display for RangeConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vs: Vec<String> = self.values.iter().map(i64::to_string).collect();
        write!(f, "DWork.{} ∈ {{{}}}", self.field, vs.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrieveRelation {
    pub chart: String,
    pub status_formulas: Vec<StatusEntry>,
    pub var_map: BTreeMap<String, FieldRef>,
    pub history_map: HistoryMap,
    pub concrete_invariant: Vec<RangeConstraint>,
    /// Values of the constants the formulas mention.
    pub constants: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", failures.join("; "))]
pub struct RetrieveError {
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbstractError {
    #[error("{0} violates the concrete invariant")]
    Invariant(String),
    #[error("DWork.{field} = {value} encodes no state")]
    Partial { field: String, value: i64 },
    #[error("state {0} has conflicting status formulas")]
    NotFunctional(String),
    #[error("missing field {0}")]
    MissingField(String),
}

/// Encoding of a chart in the generated-code pattern, independent of any
/// particular program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub formulas: Vec<StatusEntry>,
    pub history: BTreeMap<String, HistoryField>,
    /// DWork fields in declaration order.
    pub dwork: Vec<String>,
    /// Substate codes, numbered `1..k` in child order per composite.
    pub codes: Vec<(String, i64)>,
    /// Composite owning each substate field, for diagnostics.
    pub owners: BTreeMap<String, String>,
}

pub fn substate_field(c: &ChartDef, id: &str) -> String {
    if c.is_root(id) {
        format!("is_{ROOT_TAG}")
    } else {
        format!("is_{}", c.name_of(id))
    }
}

pub fn active_field(c: &ChartDef, id: &str) -> String {
    if c.is_root(id) {
        format!("is_active_{ROOT_TAG}")
    } else {
        format!("is_active_{}", c.name_of(id))
    }
}

pub fn history_field(c: &ChartDef, id: &str) -> String {
    format!("was_{}", c.name_of(id))
}

pub fn code_name(c: &ChartDef, id: &str) -> String {
    format!("IN_{}", c.name_of(id))
}

pub fn event_constant(ev: &str) -> String {
    format!("event_{ev}")
}

pub fn encoding(c: &ChartDef) -> Encoding {
    let mut e = Encoding {
        formulas: Vec::new(),
        history: BTreeMap::new(),
        dwork: Vec::new(),
        codes: Vec::new(),
        owners: BTreeMap::new(),
    };
    let root = c.identifier.clone();
    let f = active_field(c, &root);
    e.dwork.push(f.clone());
    e.formulas.push(StatusEntry { state: root.clone(), formula: StatusFormula::ActiveFlag { field: f } });
    let mut scopes = vec![root];
    scopes.extend(c.states_preorder());
    for scope in &scopes {
        let kids = c.children_of(scope);
        if kids.is_empty() {
            continue;
        }
        match c.decomposition_of(scope) {
            Decomposition::Sequential => {
                let field = substate_field(c, scope);
                e.dwork.push(field.clone());
                e.owners.insert(field.clone(), scope.clone());
                for (i, k) in kids.iter().enumerate() {
                    let constant = code_name(c, k);
                    e.codes.push((constant.clone(), i as i64 + 1));
                    e.formulas.push(StatusEntry {
                        state: k.clone(),
                        formula: StatusFormula::SubstateCode { field: field.clone(), constant },
                    });
                }
                if c.has_history(scope) {
                    let hf = history_field(c, scope);
                    e.dwork.push(hf.clone());
                    e.owners.insert(hf.clone(), scope.clone());
                    let children = kids.iter().map(|k| (k.clone(), code_name(c, k))).collect();
                    e.history.insert(scope.clone(), HistoryField { field: hf, children });
                }
            }
            Decomposition::Parallel => {
                for k in kids {
                    let field = active_field(c, k);
                    e.dwork.push(field.clone());
                    e.formulas.push(StatusEntry { state: k.clone(), formula: StatusFormula::ActiveFlag { field } });
                }
            }
        }
    }
    // keep formulas in preorder so reports read top-down
    let order: BTreeMap<&String, usize> = scopes.iter().enumerate().map(|(i, s)| (s, i)).collect();
    e.formulas.sort_by_key(|f| order[&f.state]);
    e
}

/// Record field that holds chart variable `name` in the standard pattern.
fn standard_var_field(kind: DataKind) -> Record {
    match kind {
        DataKind::Input => Record::U,
        DataKind::Output | DataKind::Local => Record::B,
    }
}

/// Builds the relation for `c` against the fields and constants that `p`
/// actually declares.
pub fn synthesize(c: &ChartDef, p: &ImplProgram) -> Result<RetrieveRelation, RetrieveError> {
    let enc = encoding(c);
    let mut failures = Vec::new();
    let has_dwork = |f: &str| p.field_sort(Record::DWork, f).is_some();
    for f in &enc.dwork {
        if !has_dwork(f) {
            let owner = enc.owners.get(f).map(String::as_str).unwrap_or_else(|| {
                enc.formulas.iter().find(|e| e.formula.field() == f).map(|e| e.state.as_str()).unwrap_or("?")
            });
            failures.push(format!("no encoding field DWork.{f} for {owner}"));
        }
    }
    let mut constants = BTreeMap::new();
    for (name, _) in &enc.codes {
        match p.constants.get(name) {
            Some(v) => {
                constants.insert(name.clone(), *v);
            }
            None => failures.push(format!("no constant {name}")),
        }
    }
    // codes of one composite must be distinct and nonzero
    let mut by_field: BTreeMap<&str, Vec<(&str, i64)>> = BTreeMap::new();
    for e in &enc.formulas {
        if let StatusFormula::SubstateCode { field, constant } = &e.formula {
            if let Some(v) = constants.get(constant) {
                by_field.entry(field).or_default().push((constant, *v));
            }
        }
    }
    for (field, codes) in &by_field {
        let mut seen = BTreeSet::new();
        for (name, v) in codes {
            if *v == 0 {
                failures.push(format!("constant {name} of DWork.{field} is zero"));
            } else if !seen.insert(*v) {
                failures.push(format!("constant {name} of DWork.{field} duplicates value {v}"));
            }
        }
    }
    let known: BTreeSet<&String> = enc.dwork.iter().collect();
    for f in &p.dwork {
        if !known.contains(&f.name) {
            failures.push(format!("concrete field DWork.{} has no chart counterpart", f.name));
        }
    }
    let mut var_map = BTreeMap::new();
    let mut used: BTreeSet<FieldRef> = BTreeSet::new();
    for d in &c.data {
        let rec = standard_var_field(d.kind);
        let target = if p.field_sort(rec, &d.name).is_some() {
            Some(rec)
        } else if d.kind == DataKind::Output && p.field_sort(Record::Y, &d.name).is_some() {
            Some(Record::Y)
        } else {
            None
        };
        match target {
            Some(record) => {
                let fr = FieldRef { record, field: d.name.clone() };
                used.insert(fr.clone());
                var_map.insert(format!("v_{}", d.name), fr);
            }
            None => failures.push(format!("no field {}.{} for {} variable {}", rec.name(), d.name, d.kind.keyword(), d.name)),
        }
    }
    for rec in [Record::B, Record::U] {
        for f in p.record(rec) {
            if !used.contains(&FieldRef { record: rec, field: f.name.clone() }) {
                failures.push(format!("concrete field {}.{} has no chart counterpart", rec.name(), f.name));
            }
        }
    }
    for f in &p.y {
        if !c.vars_of(DataKind::Output).any(|d| d.name == f.name) {
            failures.push(format!("concrete field Y.{} is not a chart output", f.name));
        }
    }
    if !failures.is_empty() {
        return Err(RetrieveError { failures });
    }
    let history_map = if enc.history.is_empty() { HistoryMap::EmptySet } else { HistoryMap::Fields(enc.history.clone()) };
    let mut concrete_invariant = Vec::new();
    let mut fields_done = BTreeSet::new();
    for e in &enc.formulas {
        if let StatusFormula::SubstateCode { field, .. } = &e.formula {
            if fields_done.insert(field.clone()) {
                let mut values: Vec<i64> = by_field[field.as_str()].iter().map(|(_, v)| *v).collect();
                values.push(0);
                values.sort_unstable();
                concrete_invariant.push(RangeConstraint { field: field.clone(), values });
            }
        }
    }
    for h in enc.history.values() {
        let mut values: Vec<i64> = h.children.iter().map(|(_, k)| constants[k]).collect();
        values.push(0);
        values.sort_unstable();
        concrete_invariant.push(RangeConstraint { field: h.field.clone(), values });
    }
    Ok(RetrieveRelation {
        chart: c.identifier.clone(),
        status_formulas: enc.formulas,
        var_map,
        history_map,
        concrete_invariant,
        constants,
    })
}

impl RetrieveRelation {
    pub fn formula(&self, state: &str) -> Option<&StatusFormula> {
        self.status_formulas.iter().find(|e| e.state == state).map(|e| &e.formula)
    }

    pub fn constant(&self, name: &str) -> Option<i64> {
        self.constants.get(name).copied()
    }

    /// Field that holds abstract variable `name` (chart-side name, no `v_`).
    pub fn var_field(&self, name: &str) -> Option<&FieldRef> {
        self.var_map.get(&format!("v_{name}"))
    }

    pub fn history_fields(&self) -> Vec<(&String, &HistoryField)> {
        match &self.history_map {
            HistoryMap::EmptySet => Vec::new(),
            HistoryMap::Fields(m) => m.iter().collect(),
        }
    }

    /// Every DWork field the relation mentions, in first-mention order.
    pub fn control_fields(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.status_formulas {
            if !out.iter().any(|f| f == e.formula.field()) {
                out.push(e.formula.field().to_string());
            }
        }
        for (_, h) in self.history_fields() {
            out.push(h.field.clone());
        }
        out
    }

    /// Values a control field may take: its invariant range, or `{0,1}` for
    /// activity flags (which carry no invariant).
    pub fn control_domain(&self, field: &str) -> Vec<i64> {
        self.concrete_invariant.iter().find(|r| r.field == field).map(|r| r.values.clone()).unwrap_or_else(|| vec![0, 1])
    }

    /// Codes a substate or history field may hold, with the state each names.
    pub fn codes_of(&self, field: &str) -> Vec<(i64, &str)> {
        let mut out: Vec<(i64, &str)> = self
            .status_formulas
            .iter()
            .filter_map(|e| match &e.formula {
                StatusFormula::SubstateCode { field: f, constant } if f == field => {
                    Some((self.constants[constant], constant.as_str()))
                }
                _ => None,
            })
            .collect();
        if out.is_empty() {
            for (_, h) in self.history_fields() {
                if h.field == field {
                    out = h.children.iter().map(|(_, k)| (self.constants[k], k.as_str())).collect();
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn check_invariant(&self, cs: &ImplState) -> Result<(), AbstractError> {
        for r in &self.concrete_invariant {
            let v = dwork(cs, &r.field)?;
            if !r.values.contains(&v) {
                return Err(AbstractError::Invariant(format!("DWork.{} = {v} ({r})", r.field)));
            }
        }
        Ok(())
    }

    fn eval_formula(&self, f: &StatusFormula, cs: &ImplState) -> Result<bool, AbstractError> {
        match f {
            StatusFormula::ActiveFlag { field } => Ok(dwork(cs, field)? > 0),
            StatusFormula::SubstateCode { field, constant } => {
                let v = dwork(cs, field)?;
                if v != 0 && !self.codes_of(field).iter().any(|(c, _)| *c == v) {
                    return Err(AbstractError::Partial { field: field.clone(), value: v });
                }
                Ok(Some(v) == self.constants.get(constant).copied())
            }
        }
    }

    /// Status of one state under the concrete state.
    pub fn status(&self, state: &str, cs: &ImplState) -> Result<bool, AbstractError> {
        let mut out = None;
        for e in self.status_formulas.iter().filter(|e| e.state == state) {
            let b = self.eval_formula(&e.formula, cs)?;
            if out.is_some_and(|o| o != b) {
                return Err(AbstractError::NotFunctional(state.to_string()));
            }
            out = Some(b);
        }
        out.ok_or_else(|| AbstractError::MissingField(format!("status formula for {state}")))
    }
}

fn dwork(cs: &ImplState, field: &str) -> Result<i64, AbstractError> {
    cs.get(Record::DWork, field).map(Value::as_i64).ok_or_else(|| AbstractError::MissingField(format!("DWork.{field}")))
}

/// Evaluates the relation at a concrete state.
pub fn abstract_state(r: &RetrieveRelation, cs: &ImplState) -> Result<ChartDynState, AbstractError> {
    r.check_invariant(cs)?;
    let mut s = ChartDynState::default();
    for e in &r.status_formulas {
        if !s.status.contains_key(&e.state) {
            s.status.insert(e.state.clone(), r.status(&e.state, cs)?);
        }
    }
    for (state, h) in r.history_fields() {
        let v = dwork(cs, &h.field)?;
        if v == 0 {
            continue;
        }
        let child = h
            .children
            .iter()
            .find(|(_, k)| r.constants.get(k) == Some(&v))
            .ok_or(AbstractError::Partial { field: h.field.clone(), value: v })?;
        s.history.insert(state.clone(), child.0.clone());
    }
    for (v, fr) in &r.var_map {
        let val = cs.get(fr.record, &fr.field).ok_or_else(|| AbstractError::MissingField(fr.to_string()))?;
        s.vars.insert(v.trim_start_matches("v_").to_string(), val);
    }
    Ok(s)
}

/// Multi-line rendering laid out like a schema: status, history,
/// variables, then the concrete invariant.
pub fn render_relation(r: &RetrieveRelation) -> String {
    let mut out = String::new();
    writeln!(out, "RetrieveFunction ({})", r.chart).unwrap();
    out.push_str("  state_status =\n");
    for e in &r.status_formulas {
        writeln!(out, "    {} ↦ {}", e.state, e.formula).unwrap();
    }
    match &r.history_map {
        HistoryMap::EmptySet => out.push_str("  state_history = ∅\n"),
        HistoryMap::Fields(m) => {
            out.push_str("  state_history =\n");
            for (s, h) in m {
                let kids: Vec<String> = h.children.iter().map(|(k, c)| format!("{c} ↦ {k}")).collect();
                writeln!(out, "    {s} ↦ DWork.{} [{}]   (extrapolated encoding)", h.field, kids.join(", ")).unwrap();
            }
        }
    }
    for (v, f) in &r.var_map {
        writeln!(out, "  {v} = {f}").unwrap();
    }
    out.push_str("ConcreteInvariant\n");
    if r.concrete_invariant.is_empty() {
        out.push_str("  true\n");
    }
    for c in &r.concrete_invariant {
        writeln!(out, "  {c}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::parse_chart;
    use crate::ir::parse_impl;

    fn abs() -> ChartDef {
        parse_chart(include_str!("../../corpus/absolute_value.sfc")).unwrap()
    }

    const ABS_IMPL: &str = "program AbsoluteValue;
        record DWork { is_active_c1: byte; is_c1: byte; }
        record B { y: int; } record U { u: int; } record Y { y: int; }
        const IN_N = 2; const IN_P = 1;
        fn initialize() { }";

    #[test]
    fn missing_substate_field_names_the_composite() {
        let p = parse_impl(&ABS_IMPL.replace(" is_c1: byte;", "")).unwrap();
        let e = synthesize(&abs(), &p).unwrap_err();
        assert_eq!(e.failures, vec!["no encoding field DWork.is_c1 for c_AbsoluteValue".to_string()]);
    }

    #[test]
    fn abstraction_of_a_concrete_state() {
        let p = parse_impl(ABS_IMPL).unwrap();
        let r = synthesize(&abs(), &p).unwrap();
        let mut cs = ImplState::zeroed(&p);
        cs.dwork.insert("is_active_c1".into(), Value::Int(1));
        cs.dwork.insert("is_c1".into(), Value::Int(1));
        cs.u.insert("u".into(), Value::Int(5));
        cs.b.insert("y".into(), Value::Int(5));
        let a = abstract_state(&r, &cs).unwrap();
        assert!(a.status["c_AbsoluteValue"] && a.status["s_P"] && !a.status["s_N"]);
        assert_eq!(a.vars["u"], Value::Int(5));
        cs.dwork.insert("is_c1".into(), Value::Int(3));
        assert!(matches!(abstract_state(&r, &cs), Err(AbstractError::Invariant(_))));
    }

    #[test]
    fn parallel_children_get_activity_flags() {
        let c = parse_chart(
            "chart Q { decomposition parallel; state Q { decomposition parallel; state A {} state B {} } }",
        )
        .unwrap();
        let e = encoding(&c);
        let flags: Vec<(&str, &str)> = e
            .formulas
            .iter()
            .filter_map(|x| match &x.formula {
                StatusFormula::ActiveFlag { field } => Some((x.state.as_str(), field.as_str())),
                _ => None,
            })
            .collect();
        assert_eq!(
            flags,
            vec![("c_Q", "is_active_c1"), ("s_Q", "is_active_Q"), ("s_A", "is_active_A"), ("s_B", "is_active_B")]
        );
    }
}
