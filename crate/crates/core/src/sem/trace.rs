//! Trace files: one step per line, e.g. `events=[go] u=5 v=-1.5`.
//! Blank lines and `#` comments are skipped; a line holding only
//! `events=[]` is a step that changes no input.

use std::fmt::Write;

use super::StepInput;
use crate::expr::Value;
use crate::lexer::Diagnostic;

pub fn parse_trace(src: &str) -> Result<Vec<StepInput>, Diagnostic> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |col: usize, msg: String| Diagnostic { line: i + 1, col, message: msg };
        let mut step = StepInput::default();
        let mut rest = line;
        while !rest.is_empty() {
            let col = raw.len() - raw.trim_start().len() + (line.len() - rest.len()) + 1;
            let (item, tail) = if rest.starts_with("events=[") {
                let close = rest.find(']').ok_or_else(|| at(col, "unterminated event list".into()))?;
                (&rest[..=close], &rest[close + 1..])
            } else {
                match rest.find(char::is_whitespace) {
                    Some(k) => (&rest[..k], &rest[k..]),
                    None => (rest, ""),
                }
            };
            rest = tail.trim_start();
            if let Some(list) = item.strip_prefix("events=[") {
                let list = &list[..list.len() - 1];
                step.events = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
                continue;
            }
            let (k, v) = item.split_once('=').ok_or_else(|| at(col, format!("expected name=value, found `{item}`")))?;
            let value = parse_value(v).ok_or_else(|| at(col, format!("malformed value `{v}` for {k}")))?;
            step.inputs.insert(k.to_string(), value);
        }
        out.push(step);
    }
    Ok(out)
}

fn parse_value(s: &str) -> Option<Value> {
    if let Ok(i) = s.parse::<i64>() {
        return Some(Value::Int(i));
    }
    s.parse::<f64>().ok().filter(|f| f.is_finite()).map(Value::Float)
}

pub fn format_trace(trace: &[StepInput]) -> String {
    let mut out = String::new();
    for step in trace {
        write!(out, "events=[{}]", step.events.join(",")).unwrap();
        for (k, v) in &step.inputs {
            write!(out, " {k}={v}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let src = "events=[go, stop] u=5 v=-1.5\n\n# comment\nu=-3\nevents=[]\n";
        let t = parse_trace(src).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].events, vec!["go", "stop"]);
        assert_eq!(t[0].inputs["v"], Value::Float(-1.5));
        assert_eq!(t[1].inputs["u"], Value::Int(-3));
        assert!(t[2].inputs.is_empty());
        assert_eq!(parse_trace(&format_trace(&t)).unwrap(), t);
    }

    #[test]
    fn malformed_value_has_position() {
        let e = parse_trace("u=5\n  u=x").unwrap_err();
        assert_eq!((e.line, e.col), (2, 3));
    }
}
