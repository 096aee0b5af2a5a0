use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::lexer::Diagnostic;

/// Static well-formedness. The result is empty iff the chart satisfies every
/// structural invariant; diagnostics come out in a fixed order.
pub fn validate_chart(c: &ChartDef) -> Vec<Diagnostic> {
    let mut out: Vec<String> = Vec::new();
    check_ids(c, &mut out);
    let tree_ok = check_tree(c, &mut out);
    if tree_ok {
        check_transitions(c, &mut out);
        check_defaults(c, &mut out);
    }
    check_actions(c, &mut out);
    out.into_iter().map(Diagnostic::global).collect()
}

fn check_ids(c: &ChartDef, out: &mut Vec<String>) {
    let mut seen = BTreeSet::new();
    let mut dup = |id: &str, out: &mut Vec<String>| {
        if !seen.insert(id.to_string()) {
            out.push(format!("duplicate identifier: {id}"));
        }
    };
    dup(&c.identifier, out);
    for (k, s) in &c.states {
        if *k != s.id {
            out.push(format!("state key {k} does not match its id {}", s.id));
        }
        dup(&s.id, out);
    }
    for (k, j) in &c.junctions {
        if *k != j.id {
            out.push(format!("junction key {k} does not match its id {}", j.id));
        }
        dup(&j.id, out);
    }
    for (k, t) in &c.transitions {
        if *k != t.id {
            out.push(format!("transition key {k} does not match its id {}", t.id));
        }
        dup(&t.id, out);
    }
    let mut names = BTreeSet::new();
    for n in c.events.iter().map(|e| &e.name).chain(c.data.iter().map(|d| &d.name)) {
        if !names.insert(n.clone()) || seen.contains(n) {
            out.push(format!("duplicate identifier: {n}"));
        }
    }
}

fn is_scope(c: &ChartDef, id: &str) -> bool {
    c.is_root(id) || c.states.contains_key(id)
}

fn check_tree(c: &ChartDef, out: &mut Vec<String>) -> bool {
    let before = out.len();
    for s in c.states.values() {
        if !is_scope(c, &s.parent) {
            out.push(format!("unknown parent {} of state {}", s.parent, s.id));
        }
        if s.has_history && s.decomposition == Decomposition::Parallel {
            out.push(format!("history on parallel state: {}", s.id));
        } else if s.has_history && s.child_order.is_empty() {
            out.push(format!("history on state without substates: {}", s.id));
        }
    }
    for j in c.junctions.values() {
        if !is_scope(c, &j.parent) {
            out.push(format!("unknown parent {} of junction {}", j.parent, j.id));
        }
    }
    if out.len() > before {
        return false;
    }
    // child_order must list exactly the states naming this scope as parent
    let mut kids: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for s in c.states.values() {
        kids.entry(s.parent.as_str()).or_default().insert(s.id.as_str());
    }
    let scopes: Vec<&str> =
        std::iter::once(c.identifier.as_str()).chain(c.states.keys().map(String::as_str)).collect();
    for scope in scopes {
        let listed = c.children_of(scope);
        let listed_set: BTreeSet<&str> = listed.iter().map(String::as_str).collect();
        let actual = kids.remove(scope).unwrap_or_default();
        if listed_set != actual || listed_set.len() != listed.len() {
            out.push(format!("child_order mismatch: {scope}"));
        }
    }
    // the parent relation must reach the root from every state
    for s in c.states.values() {
        let mut cur = s.id.as_str();
        let mut steps = 0;
        while !c.is_root(cur) {
            cur = &c.states[cur].parent;
            steps += 1;
            if steps > c.states.len() {
                out.push(format!("state hierarchy cycle through {}", s.id));
                break;
            }
        }
    }
    out.len() == before
}

fn node_exists(c: &ChartDef, n: &NodeRef) -> bool {
    match n {
        NodeRef::State(s) => c.states.contains_key(s),
        NodeRef::Junction(j) => c.junctions.contains_key(j),
    }
}

fn check_transitions(c: &ChartDef, out: &mut Vec<String>) {
    let mut orders: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    let mut dups = BTreeSet::new();
    for t in c.transitions.values() {
        if !node_exists(c, &t.target) {
            out.push(format!("unknown target {} of transition {}", t.target.id(), t.id));
            continue;
        }
        if let Some(src) = &t.source {
            if !node_exists(c, src) {
                out.push(format!("unknown source {} of transition {}", src.id(), t.id));
                continue;
            }
        }
        if let Some(ev) = &t.trigger {
            if c.event_decl(ev).is_none() {
                out.push(format!("undeclared event {ev} in transition {}", t.id));
            }
        }
        let tparent = c.parent_of(&t.target).to_string();
        let scope = match &t.source {
            None => tparent.clone(),
            Some(src @ NodeRef::Junction(_)) => {
                let p = c.parent_of(src).to_string();
                if p != tparent {
                    out.push(format!("transition {} crosses scope boundaries", t.id));
                }
                p
            }
            Some(src @ NodeRef::State(s)) => {
                let p = c.parent_of(src).to_string();
                if tparent == p {
                    p
                } else if tparent == *s {
                    s.clone()
                } else {
                    out.push(format!("transition {} crosses scope boundaries", t.id));
                    p
                }
            }
        };
        if t.source.is_some() && c.decomposition_of(&scope) == Decomposition::Parallel {
            out.push(format!("transition {} inside parallel composite {scope}", t.id));
        }
        let key = match &t.source {
            Some(src) => src.id().to_string(),
            None => format!("default transitions of {scope}"),
        };
        if !orders.entry(key.clone()).or_default().insert(t.order) {
            dups.insert(key);
        }
    }
    for d in dups {
        if d.starts_with("default transitions of ") {
            out.push(format!("duplicate priority among {d}"));
        } else {
            out.push(format!("duplicate priority at source {d}"));
        }
    }
}

fn check_defaults(c: &ChartDef, out: &mut Vec<String>) {
    let scopes: Vec<&str> =
        std::iter::once(c.identifier.as_str()).chain(c.states.keys().map(String::as_str)).collect();
    for scope in scopes {
        let n = c.defaults_in(scope).len();
        let has_children = !c.children_of(scope).is_empty();
        match c.decomposition_of(scope) {
            Decomposition::Sequential if has_children && n == 0 => {
                out.push(format!("missing default transition: {scope}"))
            }
            Decomposition::Parallel if n > 0 => {
                out.push(format!("default transition in parallel composite: {scope}"))
            }
            _ => {}
        }
    }
}

fn check_actions(c: &ChartDef, out: &mut Vec<String>) {
    let check_expr = |e: &Expr<String>, label: &str, out: &mut Vec<String>| {
        let mut bad = BTreeSet::new();
        e.visit_vars(&mut |v| {
            if c.data_decl(v).is_none() {
                bad.insert(v.clone());
            }
        });
        for v in bad {
            out.push(format!("undeclared variable {v} in {label}"));
        }
    };
    for (label, acts) in action_lists(c) {
        for a in acts {
            match a {
                Action::Assign(v, e) => {
                    match c.data_decl(v) {
                        None => out.push(format!("undeclared variable {v} in {label}")),
                        Some(d) if d.kind == DataKind::Input => {
                            out.push(format!("assignment to input variable {v} in {label}"))
                        }
                        Some(_) => {}
                    }
                    check_expr(e, &label, out);
                }
                Action::Send(ev) => match c.event_decl(ev) {
                    None => out.push(format!("undeclared event {ev} in {label}")),
                    Some(d) if d.kind != EventKind::Local => {
                        out.push(format!("broadcast of non-local event {ev} in {label}"))
                    }
                    Some(_) => {}
                },
            }
        }
    }
    for s in c.states.values() {
        for (ev, _) in &s.on_actions {
            if c.event_decl(ev).is_none() {
                out.push(format!("undeclared event {ev} in {} on action", s.id));
            }
        }
    }
    for t in c.transitions.values() {
        if let Some(g) = &t.condition {
            check_expr(g, &format!("{} condition", t.id), out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::parse_chart;

    fn msgs(src: &str) -> Vec<String> {
        validate_chart(&parse_chart(src).unwrap()).into_iter().map(|d| d.message).collect()
    }

    #[test]
    fn missing_default_transition() {
        assert_eq!(msgs("chart E { state A { state X {} } transition d { target A; } }"), vec![
            "missing default transition: s_A"
        ]);
    }

    #[test]
    fn duplicate_priority() {
        let m = msgs(
            "chart E { input u: int; state P {} state N {} transition d { target P; }
             transition a { source P; target N; order 1; } transition b { source P; target N; cond u > 0; order 1; } }",
        );
        assert_eq!(m, vec!["duplicate priority at source s_P"]);
    }

    #[test]
    fn parallel_rules() {
        let m = msgs(
            "chart E { decomposition parallel; state A { history; state X {} transition d { target X; } } state B {}
             transition bad { target A; } }",
        );
        assert_eq!(m, vec!["default transition in parallel composite: c_E"]);
        let m = msgs("chart E { state A { decomposition parallel; history; state X {} } transition d { target A; } }");
        assert_eq!(m, vec!["history on parallel state: s_A"]);
    }

    #[test]
    fn scope_and_data_rules() {
        let m = msgs(
            "chart E { input u: int; input event go; state A { state X {} transition d { target X; } } state B {}
             transition d0 { target A; } transition t { source X; target B; }
             state C { during { u := 1; send go; } } }",
        );
        assert!(m.contains(&"transition t crosses scope boundaries".to_string()), "{m:?}");
        assert!(m.contains(&"assignment to input variable u in s_C during".to_string()), "{m:?}");
        assert!(m.contains(&"broadcast of non-local event go in s_C during".to_string()), "{m:?}");
    }
}
