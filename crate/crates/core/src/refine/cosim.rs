//! Lockstep co-simulation of chart semantics and implementation.
//!
//! Traces come from a seeded generator biased toward boundary values (the
//! guards in this domain are mostly sign tests). After initialization and
//! after every step the implementation state is abstracted through the
//! relation and compared with the chart state, and `Y` with the chart
//! outputs. A failing trace is shrunk: prefix truncation, step deletion,
//! then coordinate descent of every input toward zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{ChartDef, DataKind};
use crate::expr::{Sort, Value};
use crate::ir::{init_impl, step_impl, ImplProgram, ImplState};
use crate::retrieve::{abstract_state, RetrieveRelation};
use crate::sem::{format_trace, init_state, step_with_limit, ChartDynState, StepInput, DEFAULT_BROADCAST_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosimConfig {
    pub seed: u64,
    pub traces: usize,
    pub max_len: usize,
    pub lo: i64,
    pub hi: i64,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
    pub broadcast_limit: usize,
}

impl Default for CosimConfig {
    fn default() -> Self {
        CosimConfig { seed: 0, traces: 1000, max_len: 50, lo: -10, hi: 10, workers: 0, broadcast_limit: DEFAULT_BROADCAST_LIMIT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trace_index: usize,
    /// Number of steps taken when the violation showed (0: at initialization).
    pub step: usize,
    pub reason: String,
    pub original_len: usize,
    pub trace: Vec<StepInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosimReport {
    pub traces: usize,
    pub steps: usize,
    pub violations: usize,
    pub counterexample: Option<Counterexample>,
}

impl CosimReport {
    pub fn clean(&self) -> bool {
        self.violations == 0
    }

    pub fn counterexample_text(&self) -> Option<String> {
        self.counterexample.as_ref().map(|c| format_trace(&c.trace))
    }
}

fn pick(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
    let specials: Vec<i64> = [0, 1, -1, lo, hi].into_iter().filter(|v| (lo..=hi).contains(v)).collect();
    if !specials.is_empty() && rng.gen_bool(0.3) {
        specials[rng.gen_range(0..specials.len())]
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// The `index`-th trace of the suite; independent of every other index.
pub fn generate_trace(c: &ChartDef, cfg: &CosimConfig, index: usize) -> Vec<StepInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let len = rng.gen_range(0..=cfg.max_len);
    let events: Vec<&str> = c.input_events().map(|e| e.name.as_str()).collect();
    (0..len)
        .map(|_| {
            let mut step = StepInput::default();
            for d in c.vars_of(DataKind::Input) {
                let v = pick(&mut rng, cfg.lo, cfg.hi);
                let v = match d.sort {
                    Sort::Float if rng.gen_bool(0.25) && v < cfg.hi => Value::Float(v as f64 + 0.5),
                    Sort::Float => Value::Float(v as f64),
                    _ => Value::Int(v),
                };
                step.inputs.insert(d.name.clone(), v);
            }
            for e in &events {
                if rng.gen_bool(0.5) {
                    step.events.push(e.to_string());
                }
            }
            step
        })
        .collect()
}

fn describe(chart: &ChartDynState, got: &ChartDynState) -> String {
    for (s, b) in &chart.status {
        let g = got.status.get(s).copied().unwrap_or(false);
        if g != *b {
            return format!("status of {s}: chart {b}, implementation {g}");
        }
    }
    for s in chart.history.keys().chain(got.history.keys()) {
        if chart.history.get(s) != got.history.get(s) {
            return format!("history of {s}: chart {:?}, implementation {:?}", chart.history.get(s), got.history.get(s));
        }
    }
    for (v, x) in &chart.vars {
        match got.vars.get(v) {
            Some(y) if y == x => {}
            y => return format!("variable {v}: chart {x}, implementation {}", y.map_or("missing".into(), |y| y.to_string())),
        }
    }
    "states differ".into()
}

fn compare(r: &RetrieveRelation, chart: &ChartDynState, cs: &ImplState) -> Result<(), String> {
    let a = abstract_state(r, cs).map_err(|e| format!("abstraction failed: {e}"))?;
    if a.status == chart.status && a.history == chart.history && a.vars == chart.vars {
        Ok(())
    } else {
        Err(describe(chart, &a))
    }
}

/// Runs one trace in lockstep; on violation returns the number of steps
/// taken and a description.
pub fn check_trace(
    c: &ChartDef,
    p: &ImplProgram,
    r: &RetrieveRelation,
    trace: &[StepInput],
    limit: usize,
) -> Result<(), (usize, String)> {
    let mut s = init_state(c);
    let mut cs = init_impl(p, None).map_err(|e| (0, format!("implementation: {e}")))?;
    compare(r, &s, &cs).map_err(|m| (0, m))?;
    for (i, inp) in trace.iter().enumerate() {
        let n = i + 1;
        let res = step_with_limit(c, &s, inp, limit).map_err(|e| (n, format!("chart: {e}")))?;
        let y = step_impl(p, &mut cs, inp, None).map_err(|e| (n, format!("implementation: {e}")))?;
        s = res.state;
        compare(r, &s, &cs).map_err(|m| (n, m))?;
        for (o, v) in &res.outputs {
            match y.get(o) {
                Some(w) if w == v => {}
                w => {
                    let got = w.map_or("missing".to_string(), |w| w.to_string());
                    return Err((n, format!("output {o}: chart {v}, implementation {got}")));
                }
            }
        }
    }
    Ok(())
}

fn toward_zero(v: Value) -> Vec<Value> {
    match v {
        Value::Int(0) => vec![],
        Value::Int(i) => {
            let mut c = vec![Value::Int(0), Value::Int(i / 2), Value::Int(i - i.signum())];
            c.dedup();
            c
        }
        Value::Float(x) if x == 0.0 => vec![],
        Value::Float(x) => vec![Value::Float(0.0), Value::Float(x.trunc()), Value::Float((x / 2.0).trunc())]
            .into_iter()
            .filter(|y| *y != Value::Float(x))
            .collect(),
    }
}

/// Shrinks a failing trace while it keeps failing.
pub fn shrink(
    c: &ChartDef,
    p: &ImplProgram,
    r: &RetrieveRelation,
    trace: &[StepInput],
    limit: usize,
) -> Vec<StepInput> {
    let fails = |t: &[StepInput]| check_trace(c, p, r, t, limit).err().map(|(n, _)| n);
    let Some(n) = fails(trace) else { return trace.to_vec() };
    let mut cur: Vec<StepInput> = trace[..n].to_vec();
    let truncate = |t: &mut Vec<StepInput>| {
        if let Some(n) = fails(t) {
            t.truncate(n);
        }
    };
    // step deletion
    let mut i = 0;
    while i < cur.len() {
        let mut cand = cur.clone();
        cand.remove(i);
        if fails(&cand).is_some() {
            truncate(&mut cand);
            cur = cand;
        } else {
            i += 1;
        }
    }
    // coordinate descent; every accepted candidate may truncate `cur`
    for _round in 0..64 {
        let mut changed = false;
        let mut i = 0;
        while i < cur.len() {
            let names: Vec<String> = cur[i].inputs.keys().cloned().collect();
            for name in names {
                if i >= cur.len() {
                    break;
                }
                for v in toward_zero(cur[i].inputs[&name]) {
                    let mut cand = cur.clone();
                    cand[i].inputs.insert(name.clone(), v);
                    if fails(&cand).is_some() {
                        truncate(&mut cand);
                        cur = cand;
                        changed = true;
                        break;
                    }
                }
            }
            let mut k = cur.get(i).map_or(0, |s| s.events.len());
            while k > 0 && i < cur.len() {
                k -= 1;
                let mut cand = cur.clone();
                cand[i].events.remove(k);
                if fails(&cand).is_some() {
                    truncate(&mut cand);
                    cur = cand;
                    changed = true;
                    k = k.min(cur.get(i).map_or(0, |s| s.events.len()));
                }
            }
            i += 1;
        }
        if !changed {
            break;
        }
    }
    cur
}

/// Runs the whole suite. Traces are independent and may run on several
/// workers; results are merged by trace index, so the report does not
/// depend on scheduling.
pub fn cosimulate(c: &ChartDef, p: &ImplProgram, r: &RetrieveRelation, cfg: &CosimConfig) -> CosimReport {
    let run = || -> Vec<(usize, Option<(usize, String)>)> {
        (0..cfg.traces)
            .into_par_iter()
            .map(|i| {
                let t = generate_trace(c, cfg, i);
                (t.len(), check_trace(c, p, r, &t, cfg.broadcast_limit).err())
            })
            .collect()
    };
    let results = if cfg.workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    } else {
        run()
    };
    let steps = results.iter().map(|(n, _)| n).sum();
    let violations = results.iter().filter(|(_, e)| e.is_some()).count();
    let counterexample = results.iter().enumerate().find_map(|(i, (n, e))| {
        let (_, _) = e.as_ref()?;
        let t = generate_trace(c, cfg, i);
        let shrunk = shrink(c, p, r, &t, cfg.broadcast_limit);
        let (step, reason) = check_trace(c, p, r, &shrunk, cfg.broadcast_limit).err()?;
        Some(Counterexample { trace_index: i, step, reason, original_len: *n, trace: shrunk })
    });
    CosimReport { traces: cfg.traces, steps, violations, counterexample }
}
