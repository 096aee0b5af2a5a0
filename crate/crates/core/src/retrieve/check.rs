//! Exhaustive check that a relation is a total, functional and surjective
//! abstraction function over a finite slice of the concrete state space.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{abstract_state, AbstractError, RetrieveRelation};
use crate::chart::ChartDef;
use crate::expr::{Sort, Value};
use crate::ir::{ImplProgram, ImplState, Record};
use crate::sem::{check_invariants, ChartDynState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationReport {
    pub control_states: usize,
    pub data_points: usize,
    pub checks: usize,
    pub total: bool,
    pub functional: bool,
    pub surjective: bool,
    /// Abstract control configurations satisfying the chart invariants.
    pub abstract_configs: usize,
    pub counterexamples: Vec<String>,
}

type Control = (BTreeMap<String, bool>, BTreeMap<String, String>);

/// Cartesian product of per-coordinate value lists.
pub(crate) fn product<T: Clone>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for v in axis {
                let mut p = prefix.clone();
                p.push(v.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Every abstract control configuration (statuses plus history) that
/// satisfies the chart's own state invariants.
pub(crate) fn abstract_configs(c: &ChartDef) -> Vec<Control> {
    let mut ids = vec![c.identifier.clone()];
    ids.extend(c.states_preorder());
    let hist: Vec<(String, Vec<Option<String>>)> = c
        .states
        .values()
        .filter(|s| s.has_history)
        .map(|s| {
            let mut opts = vec![None];
            opts.extend(s.child_order.iter().cloned().map(Some));
            (s.id.clone(), opts)
        })
        .collect();
    let bools: Vec<Vec<bool>> = ids.iter().map(|_| vec![false, true]).collect();
    let hists: Vec<Vec<Option<String>>> = hist.iter().map(|(_, o)| o.clone()).collect();
    let mut out = Vec::new();
    for bs in product(&bools) {
        let status: BTreeMap<String, bool> = ids.iter().cloned().zip(bs).collect();
        for hs in product(&hists) {
            let history: BTreeMap<String, String> =
                hist.iter().zip(hs).filter_map(|((s, _), h)| h.map(|h| (s.clone(), h))).collect();
            let st = ChartDynState { status: status.clone(), history: history.clone(), vars: BTreeMap::new() };
            if check_invariants(c, &st).is_ok() {
                out.push((status.clone(), history));
            }
        }
    }
    out
}

pub fn check_functional_total_surjective(
    r: &RetrieveRelation,
    c: &ChartDef,
    p: &ImplProgram,
    data_domain: &[i64],
) -> RelationReport {
    let fields = r.control_fields();
    let control_axes: Vec<Vec<i64>> = fields.iter().map(|f| r.control_domain(f)).collect();
    let data: Vec<(Record, String, Sort)> = r
        .var_map
        .values()
        .map(|fr| (fr.record, fr.field.clone(), p.field_sort(fr.record, &fr.field).unwrap_or(Sort::Int)))
        .collect();
    let data_axes: Vec<Vec<i64>> = data.iter().map(|_| data_domain.to_vec()).collect();
    let controls = product(&control_axes);
    let points = product(&data_axes);
    let mut counterexamples = Vec::new();
    let (mut total, mut functional) = (true, true);
    let mut reached: BTreeSet<Control> = BTreeSet::new();
    let mut checks = 0;
    for ctl in &controls {
        for pt in &points {
            checks += 1;
            let mut cs = ImplState::zeroed(p);
            for (f, v) in fields.iter().zip(ctl) {
                cs.dwork.insert(f.clone(), Value::Int(*v));
            }
            for ((rec, f, sort), v) in data.iter().zip(pt) {
                cs.record_mut(*rec).insert(f.clone(), sort.coerce(Value::Int(*v)));
            }
            let witness = || {
                let parts: Vec<String> = fields.iter().zip(ctl).map(|(f, v)| format!("{f}={v}")).collect();
                parts.join(" ")
            };
            match (abstract_state(r, &cs), abstract_state(r, &cs)) {
                (Ok(a), Ok(b)) if a == b => {
                    reached.insert((a.status, a.history));
                }
                (Ok(_), _) | (Err(AbstractError::NotFunctional(_)), _) => {
                    if functional {
                        counterexamples.push(format!("not functional at {}", witness()));
                    }
                    functional = false;
                }
                (Err(e), _) => {
                    if total {
                        counterexamples.push(format!("not total at {}: {e}", witness()));
                    }
                    total = false;
                }
            }
        }
    }
    let configs = abstract_configs(c);
    let mut surjective = true;
    for (status, history) in &configs {
        if !reached.contains(&(status.clone(), history.clone())) {
            let on: Vec<&str> = status.iter().filter(|(_, b)| **b).map(|(s, _)| s.as_str()).collect();
            counterexamples.push(format!("no preimage for active set {{{}}}", on.join(",")));
            surjective = false;
        }
    }
    RelationReport {
        control_states: controls.len(),
        data_points: points.len(),
        checks,
        total,
        functional,
        surjective,
        abstract_configs: configs.len(),
        counterexamples,
    }
}
