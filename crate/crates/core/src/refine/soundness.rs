//! Exhaustive small-domain checks that the derivation means what the chart
//! means and that simplification changes nothing.
//!
//! Every combination of control values allowed by the concrete invariant,
//! every data field over a small value set, and every event code is run
//! through the derived step (statuses resolved through the relation) and
//! through its simplified form; the final states must be identical. When
//! the abstracted start state is a legal chart state, the chart semantics
//! must also take it to the abstraction of the derived program's result,
//! with the same outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::derive::{derive_step, DeriveError};
use super::simplify;
use super::cosim::CosimConfig;
use crate::chart::ChartDef;
use crate::expr::{Sort, Value};
use crate::ir::{exec, generate_reference, ImplProgram, ImplState, Record};
use crate::lower::LowerError;
use crate::retrieve::{abstract_state, synthesize, RetrieveRelation};
use crate::retrieve::check::product;
use crate::sem::{check_invariants, step_with_limit, StepInput};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub chart: String,
    pub cases: usize,
    /// Cases whose abstraction is a legal chart state.
    pub legal_cases: usize,
    pub simplify_discrepancies: usize,
    pub semantics_discrepancies: usize,
    pub examples: Vec<String>,
}

impl SoundnessReport {
    pub fn clean(&self) -> bool {
        self.simplify_discrepancies == 0 && self.semantics_discrepancies == 0
    }
}

fn run(p: &ImplProgram, r: &RetrieveRelation, body: &crate::ir::Stmt, cs: &ImplState, tid: i64) -> Result<ImplState, String> {
    let mut st = cs.clone();
    let env = BTreeMap::from([("tid".to_string(), Value::Int(tid))]);
    let status = |s: &ImplState, x: &str| r.status(x, s).ok();
    exec(p, &mut st, &env, body, Some(&status)).map_err(|e| e.to_string())?;
    Ok(st)
}

/// Runs the checks for `c` against its reference program.
pub fn check_phase_soundness(c: &ChartDef, data_values: &[i64]) -> Result<SoundnessReport, DeriveError> {
    let lift = |source: LowerError| DeriveError { phase: 3, name: super::PHASE_NAMES[2], source };
    let p = generate_reference(c).map_err(lift)?;
    let r = synthesize(c, &p).map_err(|e| lift(LowerError::Unsupported(e.to_string())))?;
    let derived = derive_step(c, &r)?;
    let simplified = simplify(&derived, &r, &p);
    let limit = CosimConfig::default().broadcast_limit;

    let fields = r.control_fields();
    let control_axes: Vec<Vec<i64>> = fields.iter().map(|f| r.control_domain(f)).collect();
    let data: Vec<(Record, String, Sort)> = r
        .var_map
        .values()
        .map(|fr| (fr.record, fr.field.clone(), p.field_sort(fr.record, &fr.field).unwrap_or(Sort::Int)))
        .collect();
    let data_axes: Vec<Vec<i64>> = data.iter().map(|_| data_values.to_vec()).collect();
    let mut events: Vec<(i64, Option<String>)> = vec![(0, None)];
    for e in c.input_events() {
        events.push((p.constants[&crate::retrieve::event_constant(&e.name)], Some(e.name.clone())));
    }

    let mut rep = SoundnessReport {
        chart: c.name.clone(),
        cases: 0,
        legal_cases: 0,
        simplify_discrepancies: 0,
        semantics_discrepancies: 0,
        examples: Vec::new(),
    };
    let note = |rep: &mut SoundnessReport, msg: String| {
        if rep.examples.len() < 5 {
            rep.examples.push(msg);
        }
    };
    for ctl in product(&control_axes) {
        for pt in product(&data_axes) {
            let mut cs = ImplState::zeroed(&p);
            for (f, v) in fields.iter().zip(&ctl) {
                cs.dwork.insert(f.clone(), Value::Int(*v));
            }
            for ((rec, f, sort), v) in data.iter().zip(&pt) {
                cs.record_mut(*rec).insert(f.clone(), sort.coerce(Value::Int(*v)));
            }
            for (tid, ev) in &events {
                rep.cases += 1;
                let before = run(&p, &r, &derived.step_body, &cs, *tid);
                let after = run(&p, &r, &simplified.step_body, &cs, *tid);
                let where_ = || format!("{} tid={tid} control={ctl:?} data={pt:?}", c.name);
                if before != after {
                    rep.simplify_discrepancies += 1;
                    note(&mut rep, format!("simplify changed the result at {}", where_()));
                }
                let Ok(a) = abstract_state(&r, &cs) else { continue };
                if check_invariants(c, &a).is_err() {
                    continue;
                }
                rep.legal_cases += 1;
                let input = StepInput {
                    events: ev.iter().cloned().collect(),
                    inputs: cs.u.clone(),
                };
                let chart = step_with_limit(c, &a, &input, limit);
                let agree = match (&chart, &before) {
                    (Ok(res), Ok(st)) => {
                        let outs_agree = res.outputs.iter().all(|(o, v)| st.y.get(o) == Some(v));
                        abstract_state(&r, st).is_ok_and(|b| b == res.state) && outs_agree
                    }
                    (Err(_), Err(_)) => true,
                    _ => false,
                };
                if !agree {
                    rep.semantics_discrepancies += 1;
                    note(&mut rep, format!("derived step disagrees with the chart at {}", where_()));
                }
            }
        }
    }
    Ok(rep)
}
