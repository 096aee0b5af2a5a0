//! Verdict rendering: versioned JSON and a text report laid out by phase.

use std::fmt::Write;

use serde::Serialize;

use super::{Verdict, PHASE_NAMES};
use crate::sem::format_trace;

pub const SCHEMA: &str = "sfverify/1";

#[derive(Serialize)]
struct Envelope<'a> {
    schema: &'static str,
    #[serde(flatten)]
    verdict: &'a Verdict,
}

pub fn render_json(v: &Verdict) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope { schema: SCHEMA, verdict: v }).expect("verdicts serialize");
    s.push('\n');
    s
}

pub fn render_text(v: &Verdict) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "verify {} against {}: {}", v.chart, v.implementation, v.outcome.as_str());
    let _ = writeln!(w, "match mode: {:?}", v.match_mode);
    if let Some(p) = &v.phase {
        let _ = writeln!(w, "decided in: {p}");
    }
    for d in &v.diagnostics {
        let _ = writeln!(w, "  ! {d}");
    }
    for (i, name) in PHASE_NAMES.iter().enumerate() {
        let entries: Vec<_> = v.phase_log.iter().filter(|e| e.phase as usize == i + 1).collect();
        if entries.is_empty() {
            continue;
        }
        let _ = writeln!(w, "\n[{}] {name}", i + 1);
        for e in entries {
            if e.before.is_empty() {
                let _ = writeln!(w, "  - {}", e.transformation);
            } else {
                let _ = writeln!(w, "  - {}  ({} → {})", e.transformation, e.before, e.after);
            }
        }
    }
    if !v.matched_functions.is_empty() {
        let _ = writeln!(w, "\nmatched functions:");
        for (f, d) in &v.matched_functions {
            let _ = writeln!(w, "  {f} ↦ {d}");
        }
    }
    if let Some(d) = &v.first_divergence {
        let _ = writeln!(w, "\nfirst divergence in {} at path {:?}", d.function, d.path);
        let _ = writeln!(w, "  derived:");
        for l in d.derived.lines() {
            let _ = writeln!(w, "    {l}");
        }
        let _ = writeln!(w, "  implementation:");
        for l in d.implementation.lines() {
            let _ = writeln!(w, "    {l}");
        }
    }
    if let Some(c) = &v.cosim {
        let _ = writeln!(w, "\nco-simulation: {} traces, {} steps, {} violation(s)", c.traces, c.steps, c.violations);
        if let Some(cx) = &c.counterexample {
            let _ = writeln!(
                w,
                "  trace {} ({} steps) shrunk to {} step(s); fails after step {}: {}",
                cx.trace_index,
                cx.original_len,
                cx.trace.len(),
                cx.step,
                cx.reason
            );
            for l in format_trace(&cx.trace).lines() {
                let _ = writeln!(w, "    {l}");
            }
        }
    }
    out
}
