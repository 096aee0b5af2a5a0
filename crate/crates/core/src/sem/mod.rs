//! Operational interpreter for charts.
//!
//! One call to [`step`] is one discrete-time sample: the chart executes once
//! per active input event (in declaration order), or once with no event.
//! Each execution either activates the chart through its default paths or
//! walks the active configuration top-down.

mod trace;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{Action, ChartDef, DataKind, Decomposition, EventKind, NodeRef, TransitionDef};
use crate::expr::{Expr, Value};

pub use trace::{format_trace, parse_trace};

pub const DEFAULT_BROADCAST_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChartDynState {
    pub status: BTreeMap<String, bool>,
    pub history: BTreeMap<String, String>,
    pub vars: BTreeMap<String, Value>,
}

impl ChartDynState {
    pub fn is_active(&self, id: &str) -> bool {
        self.status.get(id).copied().unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepInput {
    pub events: Vec<String>,
    pub inputs: BTreeMap<String, Value>,
}

impl StepInput {
    pub fn with_inputs<I: IntoIterator<Item = (S, Value)>, S: Into<String>>(inputs: I) -> Self {
        StepInput { events: Vec::new(), inputs: inputs.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    Execute { event: Option<String> },
    Entered { state: String },
    Exited { state: String },
    Transition { id: String },
    Action { context: String, text: String },
    BroadcastBegin { event: String, depth: usize },
    BroadcastEnd { event: String },
    EarlyReturn { context: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub state: ChartDynState,
    pub outputs: BTreeMap<String, Value>,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemError {
    #[error("junction cycle through {0}")]
    JunctionCycle(String),
    #[error("broadcast divergence: event {event} exceeded the depth limit {limit}")]
    BroadcastDivergence { event: String, limit: usize },
    #[error("unknown input event {0}")]
    UnknownEvent(String),
    #[error("unknown input variable {0}")]
    UnknownInput(String),
    #[error("undeclared variable {0}")]
    UnknownVariable(String),
    #[error("step {index}: {source}")]
    AtStep { index: usize, source: Box<SemError> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathOutcome {
    Completed { target: String, transitions: Vec<String>, actions: Vec<Action> },
    NotCompleted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BroadcastOutcome {
    Normal,
    EarlyReturn,
}

/// All statuses false, no history, every variable zero.
pub fn init_state(c: &ChartDef) -> ChartDynState {
    let mut status = BTreeMap::new();
    status.insert(c.identifier.clone(), false);
    for s in c.states.keys() {
        status.insert(s.clone(), false);
    }
    let vars = c.data.iter().map(|d| (d.name.clone(), d.sort.zero())).collect();
    ChartDynState { status, history: BTreeMap::new(), vars }
}

pub fn step(c: &ChartDef, s: &ChartDynState, input: &StepInput) -> Result<StepResult, SemError> {
    step_with_limit(c, s, input, DEFAULT_BROADCAST_LIMIT)
}

pub fn step_with_limit(
    c: &ChartDef,
    s: &ChartDynState,
    input: &StepInput,
    limit: usize,
) -> Result<StepResult, SemError> {
    let mut m = Machine::new(c, s.clone(), limit);
    let events = ordered_events(c, &input.events)?;
    for (name, v) in &input.inputs {
        match c.data_decl(name) {
            Some(d) if d.kind == DataKind::Input => {
                m.state.vars.insert(name.clone(), d.sort.coerce(*v));
            }
            _ => return Err(SemError::UnknownInput(name.clone())),
        }
    }
    if events.is_empty() {
        m.execute_chart(None)?;
    } else {
        for ev in events {
            m.execute_chart(Some(ev))?;
        }
    }
    debug_assert_eq!(check_invariants(c, &m.state), Ok(()));
    let outputs = c.vars_of(DataKind::Output).map(|d| (d.name.clone(), m.state.vars[&d.name])).collect();
    Ok(StepResult { state: m.state, outputs, trace: m.trace })
}

/// Active input events in declaration order, duplicates removed.
pub fn ordered_events(c: &ChartDef, events: &[String]) -> Result<Vec<String>, SemError> {
    let wanted: BTreeSet<&str> = events.iter().map(String::as_str).collect();
    for e in &wanted {
        match c.event_decl(e) {
            Some(d) if d.kind == EventKind::Input => {}
            _ => return Err(SemError::UnknownEvent(e.to_string())),
        }
    }
    Ok(c.input_events().filter(|e| wanted.contains(e.name.as_str())).map(|e| e.name.clone()).collect())
}

pub fn run_trace(c: &ChartDef, trace: &[StepInput]) -> Result<Vec<StepResult>, SemError> {
    let mut s = init_state(c);
    let mut out = Vec::with_capacity(trace.len());
    for (index, input) in trace.iter().enumerate() {
        let r = step(c, &s, input).map_err(|e| SemError::AtStep { index, source: Box::new(e) })?;
        s = r.state.clone();
        out.push(r);
    }
    Ok(out)
}

/// Depth-first path search from a state or junction under the given event.
/// Condition actions run against `s` as the search proceeds.
pub fn resolve_path(
    c: &ChartDef,
    s: &mut ChartDynState,
    origin: &NodeRef,
    event: Option<&str>,
) -> Result<PathOutcome, SemError> {
    let mut m = Machine::new(c, s.clone(), DEFAULT_BROADCAST_LIMIT);
    m.events.push(event.map(str::to_string));
    let ctx = match origin {
        NodeRef::State(id) => id.clone(),
        NodeRef::Junction(_) => c.parent_of(origin).to_string(),
    };
    let cands = c.outgoing(origin);
    let mut on_path = Vec::new();
    if let NodeRef::Junction(j) = origin {
        on_path.push(j.clone());
    }
    let r = m.search(&cands, &ctx, &mut on_path);
    *s = m.state;
    match r {
        Ok(Some(p)) => Ok(PathOutcome::Completed { target: p.target, transitions: p.transitions, actions: p.actions }),
        Ok(None) | Err(Halt::Early) => Ok(PathOutcome::NotCompleted),
        Err(Halt::Fail(e)) => Err(e),
    }
}

/// Broadcasts a local event from an action executing in `context`.
pub fn broadcast(
    c: &ChartDef,
    s: &mut ChartDynState,
    event: &str,
    context: &str,
) -> Result<BroadcastOutcome, SemError> {
    let mut m = Machine::new(c, s.clone(), DEFAULT_BROADCAST_LIMIT);
    m.events.push(None);
    let r = m.broadcast(event, context);
    *s = m.state;
    match r {
        Ok(()) => Ok(BroadcastOutcome::Normal),
        Err(Halt::Early) => Ok(BroadcastOutcome::EarlyReturn),
        Err(Halt::Fail(e)) => Err(e),
    }
}

/// The dynamic-state invariants: exclusivity under sequential parents,
/// shared status under parallel parents, activity implies an active parent,
/// and history records only children of history states.
pub fn check_invariants(c: &ChartDef, s: &ChartDynState) -> Result<(), String> {
    let mut scopes = vec![c.identifier.clone()];
    scopes.extend(c.states.keys().cloned());
    for scope in &scopes {
        let active = s.is_active(scope);
        let kids = c.children_of(scope);
        let n = kids.iter().filter(|k| s.is_active(k)).count();
        if n > 0 && !active {
            return Err(format!("child of inactive {scope} is active"));
        }
        match c.decomposition_of(scope) {
            Decomposition::Sequential if n > 1 => return Err(format!("{n} active children under {scope}")),
            Decomposition::Parallel if active && n != kids.len() => {
                return Err(format!("parallel {scope} has inactive children"))
            }
            _ => {}
        }
    }
    for (k, v) in &s.history {
        if !c.has_history(k) || !c.children_of(k).contains(v) {
            return Err(format!("history entry {k} -> {v} is not a child of a history state"));
        }
    }
    Ok(())
}

enum Halt {
    Early,
    Fail(SemError),
}

impl From<SemError> for Halt {
    fn from(e: SemError) -> Self {
        Halt::Fail(e)
    }
}

struct Path {
    target: String,
    transitions: Vec<String>,
    actions: Vec<Action>,
}

struct Machine<'c> {
    c: &'c ChartDef,
    state: ChartDynState,
    trace: Vec<TraceEvent>,
    events: Vec<Option<String>>,
    limit: usize,
}

impl<'c> Machine<'c> {
    fn new(c: &'c ChartDef, state: ChartDynState, limit: usize) -> Self {
        Machine { c, state, trace: Vec::new(), events: Vec::new(), limit }
    }

    fn event(&self) -> Option<&str> {
        self.events.last().and_then(|e| e.as_deref())
    }

    fn set(&mut self, id: &str, v: bool) {
        self.state.status.insert(id.to_string(), v);
    }

    /// One execution of the chart; an early return ends it silently.
    fn execute_chart(&mut self, ev: Option<String>) -> Result<(), SemError> {
        self.trace.push(TraceEvent::Execute { event: ev.clone() });
        self.events.push(ev);
        let root = self.c.identifier.clone();
        let r = if !self.state.is_active(&root) {
            self.set(&root, true);
            self.trace.push(TraceEvent::Entered { state: root.clone() });
            self.enter_children(&root)
        } else {
            self.execute_children(&root)
        };
        self.events.pop();
        match r {
            Ok(()) | Err(Halt::Early) => Ok(()),
            Err(Halt::Fail(e)) => Err(e),
        }
    }

    fn enter_state(&mut self, x: &str) -> Result<(), Halt> {
        let parent = self.c.states[x].parent.clone();
        self.set(x, true);
        if self.c.has_history(&parent) {
            self.state.history.insert(parent, x.to_string());
        }
        self.trace.push(TraceEvent::Entered { state: x.to_string() });
        let entry = &self.c.states[x].entry;
        self.run_actions(entry, x)?;
        self.enter_children(x)
    }

    fn enter_children(&mut self, x: &str) -> Result<(), Halt> {
        let c = self.c;
        let kids = c.children_of(x);
        if kids.is_empty() {
            return Ok(());
        }
        match c.decomposition_of(x) {
            Decomposition::Parallel => {
                for k in kids {
                    self.enter_state(k)?;
                }
                Ok(())
            }
            Decomposition::Sequential => {
                if c.has_history(x) {
                    if let Some(h) = self.state.history.get(x).cloned() {
                        return self.enter_state(&h);
                    }
                }
                let defaults = c.defaults_in(x);
                if let Some(p) = self.search(&defaults, x, &mut Vec::new())? {
                    self.complete(&p, x)?;
                    self.enter_state(&p.target)?;
                }
                Ok(())
            }
        }
    }

    fn exit_state(&mut self, x: &str) -> Result<(), Halt> {
        self.exit_children(x)?;
        let exit = &self.c.states[x].exit;
        self.run_actions(exit, x)?;
        self.set(x, false);
        self.trace.push(TraceEvent::Exited { state: x.to_string() });
        Ok(())
    }

    fn exit_children(&mut self, x: &str) -> Result<(), Halt> {
        let c = self.c;
        let kids = c.children_of(x);
        match c.decomposition_of(x) {
            Decomposition::Sequential => {
                if let Some(k) = kids.iter().find(|k| self.state.is_active(k)) {
                    self.exit_state(k)?;
                }
            }
            Decomposition::Parallel => {
                for k in kids.iter().rev() {
                    if self.state.is_active(k) {
                        self.exit_state(k)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn execute_state(&mut self, x: &str) -> Result<(), Halt> {
        let c = self.c;
        let (outer, inner): (Vec<&TransitionDef>, Vec<&TransitionDef>) =
            c.outgoing(&NodeRef::State(x.to_string())).into_iter().partition(|t| c.parent_of(&t.target) != x);
        if let Some(p) = self.search(&outer, x, &mut Vec::new())? {
            let parent = c.states[x].parent.clone();
            self.exit_state(x)?;
            self.complete(&p, &parent)?;
            return self.enter_state(&p.target);
        }
        if let Some(p) = self.search(&inner, x, &mut Vec::new())? {
            self.exit_children(x)?;
            self.complete(&p, x)?;
            return self.enter_state(&p.target);
        }
        let s = &c.states[x];
        self.run_actions(&s.during, x)?;
        for (ev, acts) in &s.on_actions {
            if self.event() == Some(ev.as_str()) {
                self.run_actions(acts, x)?;
            }
        }
        self.execute_children(x)
    }

    fn execute_children(&mut self, x: &str) -> Result<(), Halt> {
        let c = self.c;
        let kids = c.children_of(x);
        match c.decomposition_of(x) {
            Decomposition::Sequential => {
                if let Some(k) = kids.iter().find(|k| self.state.is_active(k)) {
                    self.execute_state(k)?;
                }
            }
            Decomposition::Parallel => {
                for k in kids {
                    self.execute_state(k)?;
                }
            }
        }
        Ok(())
    }

    fn complete(&mut self, p: &Path, ctx: &str) -> Result<(), Halt> {
        for t in &p.transitions {
            self.trace.push(TraceEvent::Transition { id: t.clone() });
        }
        self.run_actions(&p.actions, ctx)
    }

    /// Tries candidate transitions in order; `on_path` holds the junctions of
    /// the current search branch.
    fn search(
        &mut self,
        cands: &[&TransitionDef],
        ctx: &str,
        on_path: &mut Vec<String>,
    ) -> Result<Option<Path>, Halt> {
        for t in cands {
            if let Some(tr) = &t.trigger {
                if self.event() != Some(tr.as_str()) {
                    continue;
                }
            }
            if let Some(g) = &t.condition {
                if !self.eval(g)?.truthy() {
                    continue;
                }
            }
            self.run_actions(&t.condition_action, ctx)?;
            match &t.target {
                NodeRef::State(s) => {
                    return Ok(Some(Path {
                        target: s.clone(),
                        transitions: vec![t.id.clone()],
                        actions: t.transition_action.clone(),
                    }))
                }
                NodeRef::Junction(j) => {
                    if on_path.contains(j) {
                        return Err(SemError::JunctionCycle(j.clone()).into());
                    }
                    on_path.push(j.clone());
                    let next = self.c.outgoing(&t.target);
                    let r = self.search(&next, ctx, on_path)?;
                    on_path.pop();
                    if let Some(mut p) = r {
                        p.transitions.insert(0, t.id.clone());
                        let mut acts = t.transition_action.clone();
                        acts.extend(p.actions);
                        p.actions = acts;
                        return Ok(Some(p));
                    }
                }
            }
        }
        Ok(None)
    }

    fn eval(&self, e: &Expr<String>) -> Result<Value, Halt> {
        e.eval(&mut |v: &String| {
            self.state.vars.get(v).copied().ok_or_else(|| Halt::Fail(SemError::UnknownVariable(v.clone())))
        })
    }

    fn run_actions(&mut self, acts: &[Action], ctx: &str) -> Result<(), Halt> {
        for a in acts {
            match a {
                Action::Assign(v, e) => {
                    let val = self.eval(e)?;
                    let sort = self.c.data_decl(v).ok_or_else(|| SemError::UnknownVariable(v.clone()))?.sort;
                    self.state.vars.insert(v.clone(), sort.coerce(val));
                    self.trace.push(TraceEvent::Action { context: ctx.to_string(), text: format!("{v} := {e}") });
                }
                Action::Send(ev) => {
                    self.trace.push(TraceEvent::Action { context: ctx.to_string(), text: format!("send {ev}") });
                    self.broadcast(ev, ctx)?;
                }
            }
        }
        Ok(())
    }

    fn broadcast(&mut self, ev: &str, ctx: &str) -> Result<(), Halt> {
        let depth = self.events.len();
        if depth > self.limit {
            return Err(SemError::BroadcastDivergence { event: ev.to_string(), limit: self.limit }.into());
        }
        self.trace.push(TraceEvent::BroadcastBegin { event: ev.to_string(), depth });
        self.execute_chart(Some(ev.to_string()))?;
        self.trace.push(TraceEvent::BroadcastEnd { event: ev.to_string() });
        if !self.state.is_active(ctx) {
            self.trace.push(TraceEvent::EarlyReturn { context: ctx.to_string() });
            return Err(Halt::Early);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::parse_chart;

    fn abs_chart() -> ChartDef {
        parse_chart(include_str!("../../corpus/absolute_value.sfc")).unwrap()
    }

    fn u(v: i64) -> StepInput {
        StepInput::with_inputs([("u", Value::Int(v))])
    }

    #[test]
    fn absolute_value_steps() {
        let c = abs_chart();
        let rs = run_trace(&c, &[u(5), u(5), u(-3), u(-3)]).unwrap();
        let ys: Vec<_> = rs.iter().map(|r| r.outputs["y"]).collect();
        assert_eq!(ys, vec![Value::Int(0), Value::Int(5), Value::Int(3), Value::Int(3)]);
        assert!(rs[0].state.is_active("s_P"));
        assert!(rs[2].state.is_active("s_N"));
    }

    #[test]
    fn init_state_is_all_inactive() {
        let s = init_state(&abs_chart());
        assert!(s.status.values().all(|b| !b));
        assert_eq!(s.status.len(), 3);
        assert!(s.history.is_empty());
        assert!(s.vars.values().all(|v| *v == Value::Int(0)));
    }

    #[test]
    fn default_junction_path_completes() {
        let c = abs_chart();
        let mut s = init_state(&c);
        s.vars.insert("u".into(), Value::Int(5));
        let r = resolve_path(&c, &mut s, &NodeRef::Junction("j5".into()), None).unwrap();
        assert!(matches!(r, PathOutcome::Completed { ref target, .. } if target == "s_P"));
    }

    #[test]
    fn junction_without_outgoing_transitions() {
        let c = parse_chart("chart J { state A {} junction k; transition d { target A; } }").unwrap();
        let mut s = init_state(&c);
        let r = resolve_path(&c, &mut s, &NodeRef::Junction("k".into()), None).unwrap();
        assert_eq!(r, PathOutcome::NotCompleted);
    }

    #[test]
    fn junction_cycle_is_an_error() {
        let c = parse_chart(
            "chart J { state A {} junction a; junction b; transition d { target a; }
             transition ab { source a; target b; } transition ba { source b; target a; } }",
        )
        .unwrap();
        let err = step(&c, &init_state(&c), &StepInput::default()).unwrap_err();
        assert!(matches!(err, SemError::JunctionCycle(_)), "{err}");
    }

    #[test]
    fn self_broadcast_diverges() {
        let c = parse_chart("chart B { local event E; state A { during { send E; } } transition d { target A; } }")
            .unwrap();
        let s = step(&c, &init_state(&c), &StepInput::default()).unwrap().state;
        let err = step(&c, &s, &StepInput::default()).unwrap_err();
        assert_eq!(err, SemError::BroadcastDivergence { event: "E".into(), limit: 64 });
    }
}
