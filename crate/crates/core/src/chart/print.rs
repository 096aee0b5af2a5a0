use std::fmt::Write;

use super::*;

/// Canonical DSL rendering. Transitions are printed in the scope of their
/// source (default transitions in the scope of their target) and always
/// carry an explicit `order`.
pub fn print_chart(c: &ChartDef) -> String {
    let mut out = String::new();
    writeln!(out, "chart {} {{", c.name).unwrap();
    if c.decomposition == Decomposition::Parallel {
        writeln!(out, "  decomposition parallel;").unwrap();
    }
    for d in &c.data {
        writeln!(out, "  {} {}: {};", d.kind.keyword(), d.name, d.sort.keyword()).unwrap();
    }
    for e in &c.events {
        let kw = match e.kind {
            EventKind::Input => "input",
            EventKind::Local => "local",
        };
        writeln!(out, "  {kw} event {};", e.name).unwrap();
    }
    print_scope(c, &c.identifier, 1, &mut out);
    out.push_str("}\n");
    out
}

fn scope_of(c: &ChartDef, t: &TransitionDef) -> String {
    match &t.source {
        Some(src) => c.parent_of(src).to_string(),
        None => c.parent_of(&t.target).to_string(),
    }
}

fn node_name<'a>(c: &'a ChartDef, n: &'a NodeRef) -> &'a str {
    match n {
        NodeRef::State(s) => &c.states[s].name,
        NodeRef::Junction(j) => j,
    }
}

fn print_scope(c: &ChartDef, scope: &str, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    for sid in c.children_of(scope) {
        let s = &c.states[sid];
        writeln!(out, "{pad}state {} {{", s.name).unwrap();
        let inner = "  ".repeat(depth + 1);
        if s.decomposition == Decomposition::Parallel {
            writeln!(out, "{inner}decomposition parallel;").unwrap();
        }
        if s.has_history {
            writeln!(out, "{inner}history;").unwrap();
        }
        for (kw, acts) in [("entry", &s.entry), ("during", &s.during), ("exit", &s.exit)] {
            if !acts.is_empty() {
                writeln!(out, "{inner}{kw} {}", actions(acts)).unwrap();
            }
        }
        for (ev, acts) in &s.on_actions {
            writeln!(out, "{inner}on {ev} {}", actions(acts)).unwrap();
        }
        print_scope(c, sid, depth + 1, out);
        writeln!(out, "{pad}}}").unwrap();
    }
    for j in c.junctions.values().filter(|j| j.parent == scope) {
        writeln!(out, "{pad}junction {};", j.id).unwrap();
    }
    for t in c.transitions.values().filter(|t| scope_of(c, t) == scope) {
        let mut line = format!("{pad}transition {} {{", t.id);
        if let Some(src) = &t.source {
            write!(line, " source {};", node_name(c, src)).unwrap();
        }
        write!(line, " target {};", node_name(c, &t.target)).unwrap();
        if let Some(ev) = &t.trigger {
            write!(line, " trigger {ev};").unwrap();
        }
        if let Some(g) = &t.condition {
            write!(line, " cond {g};").unwrap();
        }
        if !t.condition_action.is_empty() {
            write!(line, " cond_action {}", actions(&t.condition_action)).unwrap();
        }
        if !t.transition_action.is_empty() {
            write!(line, " action {}", actions(&t.transition_action)).unwrap();
        }
        write!(line, " order {}; }}", t.order).unwrap();
        writeln!(out, "{line}").unwrap();
    }
}

pub(crate) fn actions(acts: &[Action]) -> String {
    let mut s = String::from("{");
    for a in acts {
        match a {
            Action::Assign(v, e) => write!(s, " {v} := {e};").unwrap(),
            Action::Send(ev) => write!(s, " send {ev};").unwrap(),
        }
    }
    s.push_str(" }");
    s
}
