//! Static chart structure: states, junctions, transitions, events and data.

mod parse;
mod print;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Sort};

pub use parse::parse_chart;
pub use print::print_chart;
pub use validate::validate_chart;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decomposition {
    Sequential,
    Parallel,
}

impl Decomposition {
    pub fn keyword(self) -> &'static str {
        match self {
            Decomposition::Sequential => "sequential",
            Decomposition::Parallel => "parallel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum NodeRef {
    State(String),
    Junction(String),
}

impl NodeRef {
    pub fn id(&self) -> &str {
        match self {
            NodeRef::State(s) | NodeRef::Junction(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Assign(String, Expr<String>),
    Send(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDef {
    pub id: String,
    pub name: String,
    pub parent: String,
    pub decomposition: Decomposition,
    pub child_order: Vec<String>,
    pub entry: Vec<Action>,
    pub during: Vec<Action>,
    pub exit: Vec<Action>,
    pub on_actions: Vec<(String, Vec<Action>)>,
    pub has_history: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionDef {
    pub id: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDef {
    pub id: String,
    pub source: Option<NodeRef>,
    pub target: NodeRef,
    pub trigger: Option<String>,
    pub condition: Option<Expr<String>>,
    pub condition_action: Vec<Action>,
    pub transition_action: Vec<Action>,
    pub order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Input,
    Local,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDecl {
    pub name: String,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Input,
    Output,
    Local,
}

impl DataKind {
    pub fn keyword(self) -> &'static str {
        match self {
            DataKind::Input => "input",
            DataKind::Output => "output",
            DataKind::Local => "local",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataDecl {
    pub name: String,
    pub kind: DataKind,
    pub sort: Sort,
}

/// A chart. The chart itself acts as the root of the state tree; its id
/// (`c_<Name>`) is the parent of every top-level state and junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDef {
    pub name: String,
    pub identifier: String,
    pub decomposition: Decomposition,
    pub child_order: Vec<String>,
    pub states: BTreeMap<String, StateDef>,
    pub transitions: BTreeMap<String, TransitionDef>,
    pub junctions: BTreeMap<String, JunctionDef>,
    pub events: Vec<EventDecl>,
    pub data: Vec<DataDecl>,
}

pub fn state_id(name: &str) -> String {
    format!("s_{name}")
}

pub fn chart_id(name: &str) -> String {
    format!("c_{name}")
}

impl ChartDef {
    pub fn is_root(&self, id: &str) -> bool {
        id == self.identifier
    }

    /// Decomposition of a state or of the chart root.
    pub fn decomposition_of(&self, id: &str) -> Decomposition {
        if self.is_root(id) {
            self.decomposition
        } else {
            self.states[id].decomposition
        }
    }

    pub fn children_of(&self, id: &str) -> &[String] {
        if self.is_root(id) {
            &self.child_order
        } else {
            &self.states[id].child_order
        }
    }

    pub fn parent_of(&self, node: &NodeRef) -> &str {
        match node {
            NodeRef::State(s) => &self.states[s].parent,
            NodeRef::Junction(j) => &self.junctions[j].parent,
        }
    }

    /// Display name of a state id, or the chart name for the root.
    pub fn name_of(&self, id: &str) -> &str {
        if self.is_root(id) {
            &self.name
        } else {
            &self.states[id].name
        }
    }

    pub fn has_history(&self, id: &str) -> bool {
        !self.is_root(id) && self.states[id].has_history
    }

    /// Outgoing transitions of a node in priority order.
    pub fn outgoing(&self, source: &NodeRef) -> Vec<&TransitionDef> {
        let mut out: Vec<&TransitionDef> = self
            .transitions
            .values()
            .filter(|t| t.source.as_ref() == Some(source))
            .collect();
        out.sort_by(|a, b| a.order.cmp(&b.order).then_with(|| a.id.cmp(&b.id)));
        out
    }

    /// Default transitions whose target lies directly inside `scope`.
    pub fn defaults_in(&self, scope: &str) -> Vec<&TransitionDef> {
        let mut out: Vec<&TransitionDef> = self
            .transitions
            .values()
            .filter(|t| t.source.is_none() && self.parent_of(&t.target) == scope)
            .collect();
        out.sort_by(|a, b| a.order.cmp(&b.order).then_with(|| a.id.cmp(&b.id)));
        out
    }

    pub fn data_decl(&self, name: &str) -> Option<&DataDecl> {
        self.data.iter().find(|d| d.name == name)
    }

    pub fn event_decl(&self, name: &str) -> Option<&EventDecl> {
        self.events.iter().find(|e| e.name == name)
    }

    pub fn input_events(&self) -> impl Iterator<Item = &EventDecl> {
        self.events.iter().filter(|e| e.kind == EventKind::Input)
    }

    pub fn vars_of(&self, kind: DataKind) -> impl Iterator<Item = &DataDecl> {
        self.data.iter().filter(move |d| d.kind == kind)
    }

    /// All state ids in depth-first child order (the root excluded).
    pub fn states_preorder(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack: Vec<&str> = self.child_order.iter().rev().map(String::as_str).collect();
        while let Some(s) = stack.pop() {
            out.push(s.to_string());
            stack.extend(self.states[s].child_order.iter().rev().map(String::as_str));
        }
        out
    }

    /// Ancestors of a state from its parent up to (and including) the root.
    pub fn ancestors(&self, id: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = id.to_string();
        while !self.is_root(&cur) {
            cur = self.states[&cur].parent.clone();
            out.push(cur.clone());
        }
        out
    }
}

/// Iterates over every action sequence of a chart together with a label.
pub fn action_lists(c: &ChartDef) -> Vec<(String, &Vec<Action>)> {
    let mut out = Vec::new();
    for s in c.states.values() {
        out.push((format!("{} entry", s.id), &s.entry));
        out.push((format!("{} during", s.id), &s.during));
        out.push((format!("{} exit", s.id), &s.exit));
        for (ev, acts) in &s.on_actions {
            out.push((format!("{} on {ev}", s.id), acts));
        }
    }
    for t in c.transitions.values() {
        out.push((format!("{} condition action", t.id), &t.condition_action));
        out.push((format!("{} transition action", t.id), &t.transition_action));
    }
    out
}
