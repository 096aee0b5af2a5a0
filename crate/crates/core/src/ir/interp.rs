//! Reference interpreter for implementation programs.
//!
//! A step writes the `U` record, calls the output function once per active
//! input event (argument `event_<E>`, ascending) or once with `0`, and
//! reads back `Y`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::*;
use crate::expr::Value;
use crate::sem::StepInput;

const MAX_CALL_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ImplState {
    pub dwork: BTreeMap<String, Value>,
    pub b: BTreeMap<String, Value>,
    pub u: BTreeMap<String, Value>,
    pub y: BTreeMap<String, Value>,
}

impl ImplState {
    pub fn record(&self, r: Record) -> &BTreeMap<String, Value> {
        match r {
            Record::DWork => &self.dwork,
            Record::B => &self.b,
            Record::U => &self.u,
            Record::Y => &self.y,
        }
    }

    pub fn record_mut(&mut self, r: Record) -> &mut BTreeMap<String, Value> {
        match r {
            Record::DWork => &mut self.dwork,
            Record::B => &mut self.b,
            Record::U => &mut self.u,
            Record::Y => &mut self.y,
        }
    }

    pub fn get(&self, r: Record, f: &str) -> Option<Value> {
        self.record(r).get(f).copied()
    }

    /// Every field zero, as after C static initialization.
    pub fn zeroed(p: &ImplProgram) -> ImplState {
        let mut st = ImplState::default();
        for r in Record::ALL {
            for f in p.record(r) {
                st.record_mut(r).insert(f.name.clone(), f.sort.zero());
            }
        }
        st
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImplError {
    #[error("missing entry function `{0}`")]
    MissingEntry(&'static str),
    #[error("call to undefined function `{0}`")]
    UndefinedFunction(String),
    #[error("`{func}` expects {expected} arguments, got {got}")]
    Arity { func: String, expected: usize, got: usize },
    #[error("undeclared field {0}")]
    UnknownField(String),
    #[error("undeclared constant `{0}`")]
    UnknownConst(String),
    #[error("unbound parameter `{0}`")]
    UnboundParam(String),
    #[error("unresolved state status `{0}`")]
    UnresolvedStatus(String),
    #[error("call depth exceeded {0}")]
    CallDepth(usize),
    #[error("no constant event_{0} for input event")]
    UnknownEvent(String),
    #[error("unknown input field U.{0}")]
    UnknownInput(String),
}

/// Resolves symbolic `status(s)` references against the current state.
pub type StatusFn<'a> = dyn Fn(&ImplState, &str) -> Option<bool> + 'a;

struct Ctx<'a> {
    p: &'a ImplProgram,
    status: Option<&'a StatusFn<'a>>,
}

impl Ctx<'_> {
    fn eval(&self, st: &ImplState, env: &BTreeMap<String, Value>, e: &IExpr) -> Result<Value, ImplError> {
        e.eval(&mut |r: &Ref| match r {
            Ref::Field(rec, f) => st.get(*rec, f).ok_or_else(|| ImplError::UnknownField(format!("{}.{f}", rec.name()))),
            Ref::Const(c) => self.p.constants.get(c).map(|v| Value::Int(*v)).ok_or_else(|| ImplError::UnknownConst(c.clone())),
            Ref::Param(x) => env.get(x).copied().ok_or_else(|| ImplError::UnboundParam(x.clone())),
            Ref::Status(s) => self
                .status
                .and_then(|f| f(st, s))
                .map(|b| Value::Int(b as i64))
                .ok_or_else(|| ImplError::UnresolvedStatus(s.clone())),
        })
    }

    fn exec(&self, st: &mut ImplState, env: &BTreeMap<String, Value>, s: &Stmt, depth: usize) -> Result<(), ImplError> {
        match s {
            Stmt::Assign { record, field, value } => {
                let v = self.eval(st, env, value)?;
                let sort = self
                    .p
                    .field_sort(*record, field)
                    .ok_or_else(|| ImplError::UnknownField(format!("{}.{field}", record.name())))?;
                st.record_mut(*record).insert(field.clone(), sort.coerce(v));
            }
            Stmt::If { arms, els } => {
                for (g, b) in arms {
                    if self.eval(st, env, g)?.truthy() {
                        return self.exec(st, env, b, depth);
                    }
                }
                if let Some(e) = els {
                    self.exec(st, env, e, depth)?;
                }
            }
            Stmt::Seq(v) => {
                for x in v {
                    self.exec(st, env, x, depth)?;
                }
            }
            Stmt::Call { func, args } => {
                let vals = args.iter().map(|a| self.eval(st, env, a)).collect::<Result<Vec<_>, _>>()?;
                self.call(st, func, &vals, depth + 1)?;
            }
        }
        Ok(())
    }

    fn call(&self, st: &mut ImplState, func: &str, args: &[Value], depth: usize) -> Result<(), ImplError> {
        if depth > MAX_CALL_DEPTH {
            return Err(ImplError::CallDepth(MAX_CALL_DEPTH));
        }
        let f = self.p.functions.get(func).ok_or_else(|| ImplError::UndefinedFunction(func.to_string()))?;
        if f.params.len() != args.len() {
            return Err(ImplError::Arity { func: func.to_string(), expected: f.params.len(), got: args.len() });
        }
        let env = f.params.iter().cloned().zip(args.iter().copied()).collect();
        self.exec(st, &env, &f.body, depth)
    }
}

/// Executes one statement with the given parameter bindings.
pub fn exec(
    p: &ImplProgram,
    st: &mut ImplState,
    env: &BTreeMap<String, Value>,
    s: &Stmt,
    status: Option<&StatusFn>,
) -> Result<(), ImplError> {
    Ctx { p, status }.exec(st, env, s, 0)
}

pub fn call_function(
    p: &ImplProgram,
    st: &mut ImplState,
    func: &str,
    args: &[Value],
    status: Option<&StatusFn>,
) -> Result<(), ImplError> {
    Ctx { p, status }.call(st, func, args, 0)
}

/// Zeroes every record, then runs the initialization function.
pub fn init_impl(p: &ImplProgram, status: Option<&StatusFn>) -> Result<ImplState, ImplError> {
    let mut st = ImplState::zeroed(p);
    let f = p.init_fn().ok_or(ImplError::MissingEntry("initialize"))?;
    Ctx { p, status }.call(&mut st, &f.name, &[], 0)?;
    Ok(st)
}

/// Event codes for the active events, ascending.
fn event_codes(p: &ImplProgram, events: &[String]) -> Result<Vec<i64>, ImplError> {
    let mut codes = events
        .iter()
        .map(|e| p.constants.get(&format!("event_{e}")).copied().ok_or_else(|| ImplError::UnknownEvent(e.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    codes.sort_unstable();
    codes.dedup();
    Ok(codes)
}

/// One sample: returns the `Y` record afterwards.
pub fn step_impl(
    p: &ImplProgram,
    st: &mut ImplState,
    input: &StepInput,
    status: Option<&StatusFn>,
) -> Result<BTreeMap<String, Value>, ImplError> {
    for (name, v) in &input.inputs {
        let sort = p.field_sort(Record::U, name).ok_or_else(|| ImplError::UnknownInput(name.clone()))?;
        st.u.insert(name.clone(), sort.coerce(*v));
    }
    let out = p.output_fn().ok_or(ImplError::MissingEntry("output"))?;
    let ctx = Ctx { p, status };
    let codes = event_codes(p, &input.events)?;
    if codes.is_empty() {
        ctx.call(st, &out.name, &vec![Value::Int(0); out.params.len()], 0)?;
    } else {
        for c in codes {
            let args: Vec<Value> = (0..out.params.len()).map(|_| Value::Int(c)).collect();
            ctx.call(st, &out.name, &args, 0)?;
        }
    }
    Ok(st.y.clone())
}

/// Initializes and runs a whole trace, returning `Y` after every step.
pub fn run_impl(p: &ImplProgram, trace: &[StepInput]) -> Result<Vec<BTreeMap<String, Value>>, ImplError> {
    let mut st = init_impl(p, None)?;
    trace.iter().map(|i| step_impl(p, &mut st, i, None)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABS: &str = "program A;
        record DWork { is_active_c1: byte; is_c1: byte; }
        record B { y: int; } record U { u: int; } record Y { y: int; }
        const IN_N = 2; const IN_P = 1;
        fn initialize() { DWork.is_active_c1 := 0; DWork.is_c1 := 0; }
        fn A_output(tid) {
          if DWork.is_active_c1 == 0 {
            DWork.is_active_c1 := 1;
            if U.u >= 0 { DWork.is_c1 := IN_P; } else { DWork.is_c1 := IN_N; }
          } else if DWork.is_c1 == IN_P {
            if U.u < 0 { DWork.is_c1 := IN_N; B.y := -U.u; } else { B.y := U.u; }
          } else {
            if U.u >= 0 { DWork.is_c1 := IN_P; B.y := U.u; } else { B.y := -U.u; }
          }
          Y.y := B.y;
        }";

    #[test]
    fn runs_absolute_value() {
        let p = parse_impl(ABS).unwrap();
        let trace: Vec<StepInput> =
            [5, 5, -3, -3].iter().map(|u| StepInput::with_inputs([("u", Value::Int(*u))])).collect();
        let ys: Vec<i64> = run_impl(&p, &trace).unwrap().iter().map(|y| y["y"].as_i64()).collect();
        assert_eq!(ys, vec![0, 5, 3, 3]);
    }

    #[test]
    fn byte_fields_saturate() {
        let p = parse_impl("program X; record DWork { c: byte; } fn initialize() { DWork.c := 300; }").unwrap();
        assert_eq!(init_impl(&p, None).unwrap().dwork["c"], Value::Int(255));
    }

    #[test]
    fn recursion_is_bounded() {
        let p = parse_impl("program X; fn initialize() { initialize(); }").unwrap();
        assert_eq!(init_impl(&p, None), Err(ImplError::CallDepth(MAX_CALL_DEPTH)));
    }
}
