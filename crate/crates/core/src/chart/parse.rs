//! Chart DSL frontend.
//!
//! ```text
//! chart AbsoluteValue {
//!   input u: int;
//!   output y: int;
//!   state P { during { y := u; } }
//!   junction j5;
//!   transition t_0_5 { target j5; }
//!   transition t_5_P { source j5; target P; cond u >= 0; order 1; }
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::expr::parse_expr;
use crate::lexer::{tokenize, Cursor, Diagnostic, Pos, Tok};

struct RawTransition {
    id: String,
    pos: Pos,
    source: Option<(String, Pos)>,
    target: Option<(String, Pos)>,
    trigger: Option<(String, Pos)>,
    condition: Option<Expr<String>>,
    condition_action: Vec<Action>,
    transition_action: Vec<Action>,
    order: Option<u32>,
}

#[derive(Default)]
struct Builder {
    states: Vec<StateDef>,
    junctions: Vec<JunctionDef>,
    transitions: Vec<RawTransition>,
    events: Vec<EventDecl>,
    data: Vec<DataDecl>,
    names: BTreeMap<String, Pos>,
    /// Identifier uses that must resolve against declarations: (name, position, what).
    var_uses: Vec<(String, Pos)>,
    event_uses: Vec<(String, Pos)>,
    diags: Vec<Diagnostic>,
}

impl Builder {
    fn declare(&mut self, name: &str, pos: Pos) {
        if self.names.contains_key(name) {
            self.diags.push(Diagnostic::new(pos, format!("duplicate identifier `{name}`")));
        } else {
            self.names.insert(name.to_string(), pos);
        }
    }
}

/// Parses chart DSL text. On failure every diagnostic found is returned,
/// sorted by position.
pub fn parse_chart(src: &str) -> Result<ChartDef, Vec<Diagnostic>> {
    let toks = tokenize(src).map_err(|d| vec![d])?;
    let mut cur = Cursor::new(toks);
    let mut b = Builder::default();
    let (name, root_decomp, root_children) = parse_top(&mut cur, &mut b).map_err(|d| vec![d])?;
    let chart = resolve(name, root_decomp, root_children, b)?;
    Ok(chart)
}

fn parse_top(cur: &mut Cursor, b: &mut Builder) -> Result<(String, Decomposition, Vec<String>), Diagnostic> {
    cur.expect_keyword("chart")?;
    let (name, _) = cur.expect_ident()?;
    let root = chart_id(&name);
    cur.expect_punct("{")?;
    let (decomp, _, children) = parse_body(cur, b, &root, false)?;
    if !cur.at_eof() {
        return Err(cur.unexpected("end of input"));
    }
    Ok((name, decomp, children))
}

/// Parses the items of a chart or state body up to and including the closing brace.
fn parse_body(
    cur: &mut Cursor,
    b: &mut Builder,
    scope: &str,
    in_state: bool,
) -> Result<(Decomposition, StateParts, Vec<String>), Diagnostic> {
    let mut decomp = Decomposition::Sequential;
    let mut parts = StateParts::default();
    let mut children = Vec::new();
    loop {
        if cur.eat_punct("}") {
            return Ok((decomp, parts, children));
        }
        let pos = cur.pos();
        let Tok::Ident(kw) = cur.peek().clone() else {
            return Err(cur.unexpected("declaration or `}`"));
        };
        cur.bump();
        match kw.as_str() {
            "decomposition" => {
                let (d, dpos) = cur.expect_ident()?;
                decomp = match d.as_str() {
                    "sequential" => Decomposition::Sequential,
                    "parallel" => Decomposition::Parallel,
                    _ => return Err(Diagnostic::new(dpos, format!("unknown decomposition `{d}`"))),
                };
                cur.expect_punct(";")?;
            }
            "input" | "output" | "local" if !in_state => {
                let kind = match kw.as_str() {
                    "input" => DataKind::Input,
                    "output" => DataKind::Output,
                    _ => DataKind::Local,
                };
                if cur.eat_ident("event") {
                    if kind == DataKind::Output {
                        return Err(Diagnostic::new(pos, "output events are not supported"));
                    }
                    let (n, npos) = cur.expect_ident()?;
                    b.declare(&n, npos);
                    let kind = if kind == DataKind::Input { EventKind::Input } else { EventKind::Local };
                    b.events.push(EventDecl { name: n, kind });
                } else {
                    let (n, npos) = cur.expect_ident()?;
                    cur.expect_punct(":")?;
                    let (s, spos) = cur.expect_ident()?;
                    let sort = match s.as_str() {
                        "int" => Sort::Int,
                        "float" => Sort::Float,
                        _ => return Err(Diagnostic::new(spos, format!("unknown sort `{s}`"))),
                    };
                    b.declare(&n, npos);
                    b.data.push(DataDecl { name: n, kind, sort });
                }
                cur.expect_punct(";")?;
            }
            "state" => {
                let (n, npos) = cur.expect_ident()?;
                b.declare(&n, npos);
                let id = state_id(&n);
                cur.expect_punct("{")?;
                let (d, p, kids) = parse_body(cur, b, &id, true)?;
                children.push(id.clone());
                b.states.push(StateDef {
                    id,
                    name: n,
                    parent: scope.to_string(),
                    decomposition: d,
                    child_order: kids,
                    entry: p.entry,
                    during: p.during,
                    exit: p.exit,
                    on_actions: p.on_actions,
                    has_history: p.has_history,
                });
            }
            "junction" => {
                let (n, npos) = cur.expect_ident()?;
                b.declare(&n, npos);
                cur.expect_punct(";")?;
                b.junctions.push(JunctionDef { id: n, parent: scope.to_string() });
            }
            "transition" => {
                let (n, npos) = cur.expect_ident()?;
                b.declare(&n, npos);
                let t = parse_transition(cur, b, n, npos)?;
                b.transitions.push(t);
            }
            "history" if in_state => {
                cur.expect_punct(";")?;
                parts.has_history = true;
            }
            "entry" | "during" | "exit" if in_state => {
                let acts = parse_actions(cur, b)?;
                match kw.as_str() {
                    "entry" => parts.entry.extend(acts),
                    "during" => parts.during.extend(acts),
                    _ => parts.exit.extend(acts),
                }
            }
            "on" if in_state => {
                let (ev, epos) = cur.expect_ident()?;
                b.event_uses.push((ev.clone(), epos));
                let acts = parse_actions(cur, b)?;
                parts.on_actions.push((ev, acts));
            }
            "bind" => {
                return Err(Diagnostic::new(pos, "unsupported feature: binding actions"));
            }
            _ => return Err(Diagnostic::new(pos, format!("unexpected `{kw}`"))),
        }
    }
}

#[derive(Default)]
struct StateParts {
    entry: Vec<Action>,
    during: Vec<Action>,
    exit: Vec<Action>,
    on_actions: Vec<(String, Vec<Action>)>,
    has_history: bool,
}

fn parse_transition(cur: &mut Cursor, b: &mut Builder, id: String, pos: Pos) -> Result<RawTransition, Diagnostic> {
    let mut t = RawTransition {
        id,
        pos,
        source: None,
        target: None,
        trigger: None,
        condition: None,
        condition_action: Vec::new(),
        transition_action: Vec::new(),
        order: None,
    };
    cur.expect_punct("{")?;
    while !cur.eat_punct("}") {
        let (kw, kpos) = cur.expect_ident()?;
        match kw.as_str() {
            "source" => {
                t.source = Some(cur.expect_ident()?);
                cur.expect_punct(";")?;
            }
            "target" => {
                t.target = Some(cur.expect_ident()?);
                cur.expect_punct(";")?;
            }
            "trigger" => {
                let ev = cur.expect_ident()?;
                b.event_uses.push(ev.clone());
                t.trigger = Some(ev);
                cur.expect_punct(";")?;
            }
            "cond" => {
                t.condition = Some(parse_chart_expr(cur, b)?);
                cur.expect_punct(";")?;
            }
            "cond_action" => t.condition_action = parse_actions(cur, b)?,
            "action" => t.transition_action = parse_actions(cur, b)?,
            "order" => {
                let n = cur.expect_int()?;
                if n < 0 || n > u32::MAX as i64 {
                    return Err(Diagnostic::new(kpos, "order must be a natural number"));
                }
                t.order = Some(n as u32);
                cur.expect_punct(";")?;
            }
            "bind" => return Err(Diagnostic::new(kpos, "unsupported feature: binding actions")),
            _ => return Err(Diagnostic::new(kpos, format!("unexpected `{kw}` in transition"))),
        }
    }
    if t.target.is_none() {
        return Err(Diagnostic::new(pos, format!("transition `{}` has no target", t.id)));
    }
    Ok(t)
}

fn parse_actions(cur: &mut Cursor, b: &mut Builder) -> Result<Vec<Action>, Diagnostic> {
    cur.expect_punct("{")?;
    let mut out = Vec::new();
    while !cur.eat_punct("}") {
        if cur.is_ident("send") && matches!(cur.peek_at(1), Tok::Ident(_)) {
            cur.bump();
            let (ev, epos) = cur.expect_ident()?;
            b.event_uses.push((ev.clone(), epos));
            cur.expect_punct(";")?;
            out.push(Action::Send(ev));
            continue;
        }
        if cur.is_ident("bind") {
            return Err(Diagnostic::new(cur.pos(), "unsupported feature: binding actions"));
        }
        let (var, vpos) = cur.expect_ident()?;
        b.var_uses.push((var.clone(), vpos));
        cur.expect_punct(":=")?;
        let e = parse_chart_expr(cur, b)?;
        cur.expect_punct(";")?;
        out.push(Action::Assign(var, e));
    }
    Ok(out)
}

fn parse_chart_expr(cur: &mut Cursor, b: &mut Builder) -> Result<Expr<String>, Diagnostic> {
    let mut uses = Vec::new();
    let e = parse_expr(cur, &mut |c: &mut Cursor| {
        let (n, p) = c.expect_ident()?;
        uses.push((n.clone(), p));
        Ok(Expr::Var(n))
    })?;
    b.var_uses.extend(uses);
    Ok(e)
}

fn resolve(
    name: String,
    decomposition: Decomposition,
    child_order: Vec<String>,
    mut b: Builder,
) -> Result<ChartDef, Vec<Diagnostic>> {
    let state_names: BTreeMap<String, String> =
        b.states.iter().map(|s| (s.name.clone(), s.id.clone())).collect();
    let junction_names: BTreeSet<String> = b.junctions.iter().map(|j| j.id.clone()).collect();
    let data_names: BTreeSet<&str> = b.data.iter().map(|d| d.name.as_str()).collect();
    let event_names: BTreeSet<&str> = b.events.iter().map(|e| e.name.as_str()).collect();

    let mut diags = std::mem::take(&mut b.diags);
    for (v, p) in &b.var_uses {
        if !data_names.contains(v.as_str()) {
            diags.push(Diagnostic::new(*p, format!("undeclared variable `{v}`")));
        }
    }
    for (e, p) in &b.event_uses {
        if !event_names.contains(e.as_str()) {
            diags.push(Diagnostic::new(*p, format!("undeclared event `{e}`")));
        }
    }

    let node = |n: &str| -> Option<NodeRef> {
        if let Some(id) = state_names.get(n) {
            Some(NodeRef::State(id.clone()))
        } else if junction_names.contains(n) {
            Some(NodeRef::Junction(n.to_string()))
        } else {
            None
        }
    };

    let mut per_source: BTreeMap<Option<NodeRef>, u32> = BTreeMap::new();
    let mut transitions = BTreeMap::new();
    for t in b.transitions {
        let source = match &t.source {
            None => None,
            Some((n, p)) => match node(n) {
                Some(r) => Some(r),
                None => {
                    diags.push(Diagnostic::new(*p, format!("unknown source `{n}` in transition `{}`", t.id)));
                    continue;
                }
            },
        };
        let (tn, tp) = t.target.clone().expect("checked at parse time");
        let Some(target) = node(&tn) else {
            diags.push(Diagnostic::new(tp, format!("unknown target `{tn}` in transition `{}`", t.id)));
            continue;
        };
        let slot = per_source.entry(source.clone()).or_insert(0);
        *slot += 1;
        let order = t.order.unwrap_or(*slot);
        let _ = t.pos;
        transitions.insert(
            t.id.clone(),
            TransitionDef {
                id: t.id,
                source,
                target,
                trigger: t.trigger.map(|(e, _)| e),
                condition: t.condition,
                condition_action: t.condition_action,
                transition_action: t.transition_action,
                order,
            },
        );
    }

    if !diags.is_empty() {
        diags.sort();
        diags.dedup();
        return Err(diags);
    }
    Ok(ChartDef {
        identifier: chart_id(&name),
        name,
        decomposition,
        child_order,
        states: b.states.into_iter().map(|s| (s.id.clone(), s)).collect(),
        transitions,
        junctions: b.junctions.into_iter().map(|j| (j.id.clone(), j)).collect(),
        events: b.events,
        data: b.data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_chart_with_one_input() {
        let c = parse_chart("chart E { input u: int; }").unwrap();
        assert!(c.states.is_empty());
        assert_eq!(c.data.len(), 1);
        assert_eq!(c.identifier, "c_E");
    }

    #[test]
    fn unknown_target_is_reported_with_position() {
        let err = parse_chart("chart E {\n  state A {}\n  transition t { source A; target Q; }\n}").unwrap_err();
        assert_eq!(err.len(), 1);
        assert!(err[0].message.contains("unknown target"), "{}", err[0]);
        assert_eq!((err[0].line, err[0].col), (3, 35));
    }

    #[test]
    fn binding_actions_are_rejected() {
        let err = parse_chart("chart E { local x: int; state A { bind x; } }").unwrap_err();
        assert!(err[0].message.contains("unsupported feature: binding actions"));
    }

    #[test]
    fn duplicate_and_undeclared_names() {
        let err = parse_chart("chart E { input u: int; state u { during { z := 1; } } }").unwrap_err();
        let msgs: Vec<_> = err.iter().map(|d| d.message.as_str()).collect();
        assert!(msgs.contains(&"duplicate identifier `u`"), "{msgs:?}");
        assert!(msgs.contains(&"undeclared variable `z`"), "{msgs:?}");
    }

    #[test]
    fn implicit_order_follows_declaration() {
        let c = parse_chart(
            "chart E { input u: int; state A {} state B {} transition d { target A; }
             transition x { source A; target B; } transition y { source A; target B; cond u > 0; } }",
        )
        .unwrap();
        assert_eq!(c.transitions["x"].order, 1);
        assert_eq!(c.transitions["y"].order, 2);
        assert_eq!(c.transitions["d"].source, None);
    }
}
