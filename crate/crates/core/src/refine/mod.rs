//! The verification pipeline: data refinement, normalisation, parallelism
//! elimination, simplification and structuring, with an independent
//! co-simulation alongside.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

mod cosim;
mod derive;
pub mod guard;
mod matcher;
mod mutate;
mod report;
mod simplify;
mod soundness;

pub use cosim::{check_trace, cosimulate, generate_trace, shrink, CosimConfig, CosimReport, Counterexample};
pub use derive::{derive_step, derive_step_with_limit, digest, stmt_digest, DeriveError, DerivedProgram, PhaseEntry, PHASE_NAMES};
pub use matcher::{canonicalize, conformance, expand, implementation_step, structure_match, Divergence, MatchMode, MatchReport};
pub use mutate::{is_equivalent, mutants, Mutant, MutationKind};
pub use report::{render_json, render_text, SCHEMA};
pub use simplify::{simplify_stmt, SPLIT_LIMIT};
pub use soundness::{check_phase_soundness, SoundnessReport};

use crate::chart::ChartDef;
use crate::ir::ImplProgram;
use crate::retrieve::{synthesize, RetrieveRelation};
use guard::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    Pass,
    Fail,
    Nonconformant,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Nonconformant => "NONCONFORMANT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub chart: String,
    pub implementation: String,
    pub match_mode: MatchMode,
    /// Phase that decided a non-PASS outcome.
    pub phase: Option<String>,
    pub diagnostics: Vec<String>,
    pub matched_functions: BTreeMap<String, String>,
    pub first_divergence: Option<Divergence>,
    pub reorders: Vec<String>,
    pub cosim: Option<CosimReport>,
    pub phase_log: Vec<PhaseEntry>,
}

impl Verdict {
    fn new(c: &ChartDef, implementation: &str, mode: MatchMode) -> Verdict {
        Verdict {
            outcome: Outcome::Pass,
            chart: c.name.clone(),
            implementation: implementation.to_string(),
            match_mode: mode,
            phase: None,
            diagnostics: Vec::new(),
            matched_functions: BTreeMap::new(),
            first_divergence: None,
            reorders: Vec::new(),
            cosim: None,
            phase_log: Vec::new(),
        }
    }

    /// The implementation could not even be read into the pattern.
    pub fn nonconformant(c: &ChartDef, implementation: &str, phase: &str, diagnostics: Vec<String>) -> Verdict {
        let mut v = Verdict::new(c, implementation, MatchMode::Normalized);
        v.outcome = Outcome::Nonconformant;
        v.phase = Some(phase.to_string());
        v.diagnostics = diagnostics;
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct VerifyConfig {
    pub cosim: CosimConfig,
    pub mode: MatchMode,
}

/// Phase 4 on a derived program.
pub fn simplify(d: &DerivedProgram, r: &RetrieveRelation, p: &ImplProgram) -> DerivedProgram {
    let dom = Domain::new(r, p);
    let (step_body, log) = simplify_stmt(&dom, &d.step_body);
    let mut phase_log = d.phase_log.clone();
    let before = stmt_digest(&d.step_body);
    let after = stmt_digest(&step_body);
    // identical notes are folded into one entry with a count
    let mut counts: Vec<(String, usize)> = Vec::new();
    for note in log {
        match counts.iter_mut().find(|(n, _)| *n == note) {
            Some((_, k)) => *k += 1,
            None => counts.push((note, 1)),
        }
    }
    for (note, k) in counts {
        let transformation = if k > 1 { format!("{note} (×{k})") } else { note };
        phase_log.push(PhaseEntry { phase: 4, transformation, before: before.clone(), after: after.clone() });
    }
    phase_log.push(PhaseEntry {
        phase: 4,
        transformation: format!(
            "resolved every status lookup; {} statements before, {} after",
            d.step_body.size(),
            step_body.size()
        ),
        before,
        after,
    });
    DerivedProgram { init: d.init.clone(), step_body, phase_log }
}

/// Runs every phase on `(c, p)` and co-simulates.
pub fn verify(c: &ChartDef, p: &ImplProgram, cfg: &VerifyConfig) -> Verdict {
    let mut v = Verdict::new(c, &p.name, cfg.mode);
    let r = match synthesize(c, p) {
        Ok(r) => r,
        Err(e) => {
            v.outcome = Outcome::Nonconformant;
            v.phase = Some(PHASE_NAMES[0].into());
            v.diagnostics = e.failures;
            return v;
        }
    };
    let derived = match derive_step_with_limit(c, &r, cfg.cosim.broadcast_limit) {
        Ok(d) => d,
        Err(e) => {
            v.outcome = Outcome::Nonconformant;
            v.phase = Some(e.name.into());
            v.diagnostics = vec![e.to_string()];
            return v;
        }
    };
    let simplified = simplify(&derived, &r, p);
    v.phase_log = simplified.phase_log.clone();
    let m = structure_match(&simplified, p, &r, cfg.mode);
    if !m.conformance.is_empty() {
        v.outcome = Outcome::Nonconformant;
        v.phase = Some(PHASE_NAMES[4].into());
        v.diagnostics = m.conformance.iter().map(|d| format!("{}: {d}", crate::ir::NONCONFORMANT_PREFIX)).collect();
        return v;
    }
    let after = m.matched_functions.values().next().cloned().unwrap_or_default();
    for note in &m.reorders {
        v.phase_log.push(PhaseEntry { phase: 5, transformation: note.clone(), before: String::new(), after: String::new() });
    }
    match &m.divergence {
        None => {
            for (f, d) in &m.matched_functions {
                v.phase_log.push(PhaseEntry {
                    phase: 5,
                    transformation: format!("copy rule: {f} matches the derived subtree"),
                    before: d.split(' ').next().unwrap_or_default().to_string(),
                    after: after.clone(),
                });
            }
        }
        Some(div) => {
            v.outcome = Outcome::Fail;
            v.phase = Some(PHASE_NAMES[4].into());
            v.diagnostics.push(format!("{} diverges from the derived program at path {:?}", div.function, div.path));
        }
    }
    v.matched_functions = m.matched_functions;
    v.first_divergence = m.divergence;
    v.reorders = m.reorders;
    let report = cosimulate(c, p, &r, &cfg.cosim);
    if !report.clean() {
        v.outcome = Outcome::Fail;
        if v.phase.is_none() {
            v.phase = Some("co-simulation".into());
        }
        if let Some(cx) = &report.counterexample {
            v.diagnostics.push(format!(
                "co-simulation: {} of {} traces violate the relation; trace {} shrunk to {} step(s): {}",
                report.violations,
                report.traces,
                cx.trace_index,
                cx.trace.len(),
                cx.reason
            ));
        }
    }
    v.cosim = Some(report);
    v
}
