//! Phases 1–3: data refinement, normalisation to init-then-step form, and
//! elimination of the simulator/chart parallelism by symbolic inlining.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chart::{action_lists, Action, ChartDef};
use crate::expr::Expr;
use crate::ir::{print_stmt, Stmt};
use crate::lower::{init_body, LowerError, Lowerer, Style};
use crate::retrieve::RetrieveRelation;
use crate::sem::DEFAULT_BROADCAST_LIMIT;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub phase: u8,
    pub transformation: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedProgram {
    pub init: Stmt,
    pub step_body: Stmt,
    pub phase_log: Vec<PhaseEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("phase {phase} ({name}): {source}")]
pub struct DeriveError {
    pub phase: u8,
    pub name: &'static str,
    pub source: LowerError,
}

pub const PHASE_NAMES: [&str; 5] =
    ["data refinement", "normalisation", "parallelism elimination", "simplification", "structuring"];

/// Short hex digest of a text.
pub fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn stmt_digest(s: &Stmt) -> String {
    digest(&print_stmt(s, 0))
}

fn actions_text(acts: &[Action]) -> String {
    acts.iter()
        .map(|a| match a {
            Action::Assign(v, e) => format!("{v} := {e};"),
            Action::Send(ev) => format!("send {ev};"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn phase1(c: &ChartDef, r: &RetrieveRelation, log: &mut Vec<PhaseEntry>) -> Result<(), DeriveError> {
    let err = |source| DeriveError { phase: 1, name: PHASE_NAMES[0], source };
    let map = |e: &Expr<String>| -> Result<String, DeriveError> {
        let m = e.map_vars(&mut |v: &String| {
            r.var_field(v).map(|fr| Expr::Var(fr.to_string())).ok_or_else(|| LowerError::UnmappedVariable(v.clone()))
        });
        m.map(|x| x.to_string()).map_err(err)
    };
    let rewrite = |acts: &[Action]| -> Result<String, DeriveError> {
        let parts = acts
            .iter()
            .map(|a| match a {
                Action::Assign(v, e) => {
                    let fr = r.var_field(v).ok_or_else(|| err(LowerError::UnmappedVariable(v.clone())))?;
                    Ok(format!("{fr} := {};", map(e)?))
                }
                Action::Send(ev) => Ok(format!("send {ev};")),
            })
            .collect::<Result<Vec<_>, DeriveError>>()?;
        Ok(parts.join(" "))
    };
    for (label, acts) in action_lists(c) {
        if acts.is_empty() {
            continue;
        }
        let after = rewrite(acts)?;
        log.push(PhaseEntry {
            phase: 1,
            transformation: format!("rewrote {label} over the concrete state"),
            before: digest(&actions_text(acts)),
            after: digest(&after),
        });
    }
    for t in c.transitions.values() {
        if let Some(g) = &t.condition {
            let after = map(g)?;
            log.push(PhaseEntry {
                phase: 1,
                transformation: format!("rewrote condition of {} to `{after}`", t.id),
                before: digest(&g.to_string()),
                after: digest(&after),
            });
        }
        for (what, acts) in [("condition action", &t.condition_action), ("transition action", &t.transition_action)] {
            if !acts.is_empty() {
                let after = rewrite(acts)?;
                log.push(PhaseEntry {
                    phase: 1,
                    transformation: format!("rewrote {what} of {} over the concrete state", t.id),
                    before: digest(&actions_text(acts)),
                    after: digest(&after),
                });
            }
        }
    }
    Ok(())
}

/// Derives the step program from the chart, with every state-status lookup
/// still symbolic.
pub fn derive_step(c: &ChartDef, r: &RetrieveRelation) -> Result<DerivedProgram, DeriveError> {
    derive_step_with_limit(c, r, DEFAULT_BROADCAST_LIMIT)
}

pub fn derive_step_with_limit(
    c: &ChartDef,
    r: &RetrieveRelation,
    broadcast_limit: usize,
) -> Result<DerivedProgram, DeriveError> {
    let mut log = Vec::new();
    phase1(c, r, &mut log)?;

    let init = init_body(c, r);
    let chart_digest = digest(&crate::chart::print_chart(c));
    log.push(PhaseEntry {
        phase: 2,
        transformation: "initial state ⟶ concrete initialization (every field zero)".into(),
        before: chart_digest.clone(),
        after: stmt_digest(&init),
    });
    log.push(PhaseEntry {
        phase: 2,
        transformation: "collapsed simulator ∥ chart into init ; μX • inputs ; step ; outputs ; end_cycle ; X".into(),
        before: chart_digest.clone(),
        after: digest("init ; loop { inputs ; step ; outputs }"),
    });

    let mut lw = Lowerer::new(c, r, Style::Derived, broadcast_limit);
    let step_body =
        lw.output_body().map_err(|source| DeriveError { phase: 3, name: PHASE_NAMES[2], source })?;
    let after = stmt_digest(&step_body);
    for note in lw.log {
        log.push(PhaseEntry { phase: 3, transformation: note, before: chart_digest.clone(), after: after.clone() });
    }
    log.push(PhaseEntry {
        phase: 3,
        transformation: format!("inlined every chart execution into one step body ({} statements)", step_body.size()),
        before: chart_digest,
        after,
    });
    Ok(DerivedProgram { init, step_body, phase_log: log })
}
