//! Reader for the restricted C pattern of generated chart code: typedef'd
//! record structs, `#define`d integer constants, one global instance per
//! record, and `void` functions made of field assignments, if/else chains
//! and calls. Anything else is reported as not conforming to the pattern.
//!
//! Generator naming is alpha-renamed on the way in: `<Name>_DWork.is_c1_<Name>`
//! becomes `DWork.is_c1`, `<Name>_IN_P` becomes `IN_P`, `<Name>_initialize`
//! becomes `initialize`. Every rename and normalization is logged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::*;
use crate::expr::{parse_expr, BinOp};
use crate::lexer::{tokenize, Cursor, Diagnostic, Pos, Tok, Token};

pub const NONCONFORMANT_PREFIX: &str = "does not conform to the architectural pattern";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CReadLog {
    pub entries: Vec<String>,
}

const BYTE_TYPES: &[&str] = &["uint8_T", "boolean_T", "uint8", "bool", "char"];
const INT_TYPES: &[&str] = &["int32_T", "int_T", "int", "int16_T", "int8_T", "uint16_T", "uint32_T", "uint_T", "long", "short", "unsigned", "signed"];
const FLOAT_TYPES: &[&str] = &["real_T", "double", "real32_T", "real64_T", "float"];

fn sort_of_type(t: &str) -> Option<Sort> {
    if BYTE_TYPES.contains(&t) {
        Some(Sort::Byte)
    } else if INT_TYPES.contains(&t) {
        Some(Sort::Int)
    } else if FLOAT_TYPES.contains(&t) {
        Some(Sort::Float)
    } else {
        None
    }
}

fn is_type(t: &str) -> bool {
    sort_of_type(t).is_some() || t == "void"
}

fn record_of_type(t: &str) -> Option<(Record, &str)> {
    const PREFIXES: &[(&str, Record)] = &[
        ("D_Work_", Record::DWork),
        ("DW_", Record::DWork),
        ("BlockIO_", Record::B),
        ("B_", Record::B),
        ("ExternalInputs_", Record::U),
        ("ExtU_", Record::U),
        ("ExternalOutputs_", Record::Y),
        ("ExtY_", Record::Y),
    ];
    PREFIXES.iter().find_map(|(p, r)| t.strip_prefix(p).map(|rest| (*r, rest)))
}

fn nonconforming(pos: Pos, construct: &str) -> Diagnostic {
    Diagnostic::new(pos, format!("{NONCONFORMANT_PREFIX}: {construct} at {}:{}", pos.line, pos.col))
}

/// Reads a C translation unit (a `.c`/`.h` pair may simply be concatenated).
pub fn read_c_subset(src: &str) -> Result<(ImplProgram, CReadLog), Vec<Diagnostic>> {
    let mut log = CReadLog::default();
    let (text, defines) = preprocess(src, &mut log).map_err(|d| vec![d])?;
    let toks = tokenize(&text).map_err(|d| vec![d])?;
    scan_forbidden(&toks).map_err(|d| vec![d])?;
    let toks = strip_casts(toks);
    let mut r = Reader { cur: Cursor::new(toks), log, defines, name: String::new(), instances: BTreeMap::new() };
    let p = r.unit().map_err(|d| vec![d])?;
    let p = check_uses(p)?;
    Ok((p, r.log))
}

struct Define {
    value: i64,
    pos: Pos,
}

fn preprocess(src: &str, log: &mut CReadLog) -> Result<(String, BTreeMap<String, Define>), Diagnostic> {
    let mut out = String::with_capacity(src.len());
    let mut defines = BTreeMap::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix('#') {
            let rest = rest.trim_start();
            let pos = Pos { line: i + 1, col: line.len() - t.len() + 1 };
            if let Some(def) = rest.strip_prefix("define") {
                let mut parts = def.trim().splitn(2, char::is_whitespace);
                let name = parts.next().unwrap_or("").to_string();
                let body = parts.next().unwrap_or("").trim();
                if name.contains('(') {
                    return Err(nonconforming(pos, &format!("function-like macro `{name}`")));
                }
                match macro_int(body) {
                    Some(v) => {
                        defines.insert(name, Define { value: v, pos });
                    }
                    None => log.entries.push(format!("ignored macro {name} at line {}", i + 1)),
                }
            } else {
                log.entries.push(format!("ignored directive `#{}` at line {}", rest.split_whitespace().next().unwrap_or(""), i + 1));
            }
            out.push('\n');
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    Ok((out, defines))
}

/// Integer value of a macro body such as `((uint8_T)2U)` or `(-1)`.
fn macro_int(body: &str) -> Option<i64> {
    let toks = tokenize(body).ok()?;
    let mut neg = false;
    let mut val = None;
    for t in toks {
        match t.tok {
            Tok::Punct("(") | Tok::Punct(")") | Tok::Eof => {}
            Tok::Ident(ref s) if is_type(s) => {}
            Tok::Punct("-") if val.is_none() => neg = !neg,
            Tok::Int(i) if val.is_none() => val = Some(i),
            _ => return None,
        }
    }
    val.map(|v| if neg { -v } else { v })
}

fn scan_forbidden(toks: &[Token]) -> Result<(), Diagnostic> {
    for (i, t) in toks.iter().enumerate() {
        let construct = match &t.tok {
            Tok::Ident(k) => match k.as_str() {
                "while" | "for" | "do" => Some(format!("loop `{k}`")),
                "switch" | "case" => Some(format!("`{k}` statement")),
                "goto" => Some("`goto`".to_string()),
                "return" => Some("`return` statement".to_string()),
                "break" | "continue" => Some(format!("`{k}` statement")),
                "struct" if !matches!(toks.get(i.wrapping_sub(1)).map(|t| &t.tok), Some(Tok::Ident(s)) if s == "typedef") => {
                    Some("struct outside a typedef".to_string())
                }
                _ => None,
            },
            Tok::Punct("->") => Some("pointer access `->`".to_string()),
            Tok::Punct("&") => Some("address-of or bitwise `&`".to_string()),
            Tok::Punct("[") => Some("array access".to_string()),
            Tok::Punct(p @ ("++" | "--" | "+=" | "-=" | "*=" | "/=")) => Some(format!("compound assignment `{p}`")),
            Tok::Punct(p @ ("/" | "%" | "?" | "<<" | ">>" | "|" | "^" | "~")) => Some(format!("operator `{p}`")),
            Tok::Str(_) => Some("string literal".to_string()),
            Tok::Punct("*") => {
                let prev = if i == 0 { None } else { Some(&toks[i - 1].tok) };
                let deref = match prev {
                    None => true,
                    Some(Tok::Ident(s)) => is_type(s) || record_of_type(s).is_some(),
                    Some(Tok::Punct(p)) => !matches!(*p, ")"),
                    _ => false,
                };
                deref.then(|| "pointer `*`".to_string())
            }
            _ => None,
        };
        if let Some(c) = construct {
            return Err(nonconforming(t.pos, &c));
        }
    }
    Ok(())
}

/// Drops `(type)` casts, which carry no meaning in the IR's value model.
fn strip_casts(toks: Vec<Token>) -> Vec<Token> {
    let mut out: Vec<Token> = Vec::with_capacity(toks.len());
    let mut i = 0;
    while i < toks.len() {
        if let (Tok::Punct("("), Some(Tok::Ident(t)), Some(Tok::Punct(")"))) =
            (&toks[i].tok, toks.get(i + 1).map(|t| &t.tok), toks.get(i + 2).map(|t| &t.tok))
        {
            // `f(void)` is a parameter list, not a cast
            let after_ident = matches!(out.last().map(|t| &t.tok), Some(Tok::Ident(_)));
            if is_type(t) && t != "void" && !after_ident {
                i += 3;
                continue;
            }
        }
        out.push(toks[i].clone());
        i += 1;
    }
    out
}

struct Reader {
    cur: Cursor,
    log: CReadLog,
    defines: BTreeMap<String, Define>,
    name: String,
    instances: BTreeMap<String, Record>,
}

impl Reader {
    fn unit(&mut self) -> Result<ImplProgram, Diagnostic> {
        let mut records: Vec<(Record, String, Vec<(String, Sort)>, Pos)> = Vec::new();
        let mut types: BTreeMap<String, Record> = BTreeMap::new();
        let mut functions: Vec<(String, Vec<String>, Vec<Token>, Pos)> = Vec::new();
        while !self.cur.at_eof() {
            let pos = self.cur.pos();
            while self.cur.eat_ident("static") || self.cur.eat_ident("extern") || self.cur.eat_ident("const") {}
            if self.cur.eat_ident("typedef") {
                self.cur.expect_keyword("struct")?;
                if matches!(self.cur.peek(), Tok::Ident(_)) {
                    self.cur.bump();
                }
                self.cur.expect_punct("{")?;
                let mut fields = Vec::new();
                while !self.cur.eat_punct("}") {
                    let (ty, tpos) = self.cur.expect_ident()?;
                    let sort = sort_of_type(&ty)
                        .ok_or_else(|| nonconforming(tpos, &format!("field of unsupported type `{ty}`")))?;
                    let (f, _) = self.cur.expect_ident()?;
                    self.cur.expect_punct(";")?;
                    fields.push((f, sort));
                }
                let (tname, tpos) = self.cur.expect_ident()?;
                self.cur.expect_punct(";")?;
                let (rec, suffix) = record_of_type(&tname)
                    .ok_or_else(|| nonconforming(tpos, &format!("unrecognized record type `{tname}`")))?;
                if self.name.is_empty() {
                    self.name = suffix.to_string();
                }
                types.insert(tname.clone(), rec);
                records.push((rec, tname, fields, tpos));
                continue;
            }
            let (ty, tpos) = self.cur.expect_ident()?;
            if let Some(rec) = types.get(&ty).copied() {
                let (inst, _) = self.cur.expect_ident()?;
                self.cur.expect_punct(";")?;
                self.instances.insert(inst, rec);
                continue;
            }
            let (fname, fpos) = self.cur.expect_ident()?;
            if !self.cur.is_punct("(") {
                return Err(nonconforming(pos, &format!("global variable `{fname}`")));
            }
            if ty != "void" {
                return Err(nonconforming(tpos, &format!("non-void function `{fname}`")));
            }
            self.cur.bump();
            let mut params = Vec::new();
            if !self.cur.eat_punct(")") {
                if self.cur.is_ident("void") && matches!(self.cur.peek_at(1), Tok::Punct(")")) {
                    self.cur.bump();
                    self.cur.bump();
                } else {
                    loop {
                        let (pty, ppos) = self.cur.expect_ident()?;
                        if sort_of_type(&pty) != Some(Sort::Int) && sort_of_type(&pty) != Some(Sort::Byte) {
                            return Err(nonconforming(ppos, &format!("parameter of type `{pty}`")));
                        }
                        params.push(self.cur.expect_ident()?.0);
                        if self.cur.eat_punct(")") {
                            break;
                        }
                        self.cur.expect_punct(",")?;
                    }
                }
            }
            if self.cur.eat_punct(";") {
                continue; // prototype
            }
            // bodies are parsed once every record and constant is known
            let body = self.grab_block()?;
            functions.push((fname, params, body, fpos));
        }
        if self.name.is_empty() {
            if let Some((f, ..)) = functions.iter().find(|(f, ..)| f.ends_with("_output")) {
                self.name = f.trim_end_matches("_output").to_string();
            }
        }
        let name = self.name.clone();
        let mut p = ImplProgram::new(&name);
        for (rec, tname, fields, tpos) in records {
            if !p.record(rec).is_empty() {
                return Err(nonconforming(tpos, &format!("second {} record `{tname}`", rec.name())));
            }
            for (f, sort) in fields {
                let short = self.strip_suffix(&f);
                p.record_mut(rec).push(FieldDecl { name: short, sort });
            }
        }
        for (d, def) in &self.defines {
            let short = match d.strip_prefix(&format!("{name}_")) {
                Some(s) => {
                    self.log.entries.push(format!("renamed constant {d} to {s}"));
                    s.to_string()
                }
                None => d.clone(),
            };
            let _ = def.pos;
            p.constants.insert(short, def.value);
        }
        let fnames: Vec<(String, String)> = functions.iter().map(|(f, ..)| (f.clone(), self.function_name(f))).collect();
        let fn_map: BTreeMap<String, String> = fnames.into_iter().collect();
        for (fname, params, body, fpos) in functions {
            let short = fn_map[&fname].clone();
            let mut sub = Cursor::new(body);
            let stmt = self.block(&mut sub, &params, &fn_map)?;
            if p.functions.contains_key(&short) {
                return Err(Diagnostic::new(fpos, format!("duplicate function `{fname}`")));
            }
            p.functions.insert(short.clone(), FunctionDef { name: short, params, body: stmt.normalize() });
        }
        Ok(p)
    }

    fn strip_suffix(&mut self, f: &str) -> String {
        match f.strip_suffix(&format!("_{}", self.name)) {
            Some(s) if !self.name.is_empty() => {
                self.log.entries.push(format!("renamed field {f} to {s}"));
                s.to_string()
            }
            _ => f.to_string(),
        }
    }

    fn function_name(&mut self, f: &str) -> String {
        if f == format!("{}_initialize", self.name) {
            self.log.entries.push(format!("renamed function {f} to initialize"));
            "initialize".to_string()
        } else {
            f.to_string()
        }
    }

    /// Collects the tokens of a brace-delimited block, braces included.
    fn grab_block(&mut self) -> Result<Vec<Token>, Diagnostic> {
        let start = self.cur.pos();
        if !self.cur.is_punct("{") {
            return Err(self.cur.unexpected("`{`"));
        }
        let mut depth = 0usize;
        let mut out = Vec::new();
        loop {
            if self.cur.at_eof() {
                return Err(Diagnostic::new(start, "unterminated function body"));
            }
            let t = self.cur.bump();
            match t.tok {
                Tok::Punct("{") => depth += 1,
                Tok::Punct("}") => depth -= 1,
                _ => {}
            }
            out.push(t);
            if depth == 0 {
                break;
            }
        }
        let eof = Token { tok: Tok::Eof, pos: self.cur.pos() };
        out.push(eof);
        Ok(out)
    }

    fn block(&mut self, c: &mut Cursor, params: &[String], fns: &BTreeMap<String, String>) -> Result<Stmt, Diagnostic> {
        c.expect_punct("{")?;
        let mut out = Vec::new();
        while !c.eat_punct("}") {
            out.push(self.stmt(c, params, fns)?);
        }
        Ok(Stmt::Seq(out))
    }

    fn stmt(&mut self, c: &mut Cursor, params: &[String], fns: &BTreeMap<String, String>) -> Result<Stmt, Diagnostic> {
        if c.is_punct("{") {
            return self.block(c, params, fns);
        }
        if c.eat_punct(";") {
            return Ok(Stmt::skip());
        }
        if c.eat_ident("if") {
            let mut arms = Vec::new();
            let mut els = None;
            c.expect_punct("(")?;
            let g = self.expr(c, params)?;
            c.expect_punct(")")?;
            arms.push((g, Stmt::Seq(vec![self.stmt(c, params, fns)?])));
            while c.eat_ident("else") {
                if c.eat_ident("if") {
                    c.expect_punct("(")?;
                    let g = self.expr(c, params)?;
                    c.expect_punct(")")?;
                    arms.push((g, Stmt::Seq(vec![self.stmt(c, params, fns)?])));
                } else {
                    els = Some(Box::new(Stmt::Seq(vec![self.stmt(c, params, fns)?])));
                    break;
                }
            }
            return Ok(Stmt::If { arms, els });
        }
        let pos = c.pos();
        let (head, _) = c.expect_ident()?;
        if is_type(&head) {
            return Err(nonconforming(pos, "local variable declaration"));
        }
        if let Some(rec) = self.instances.get(&head).copied() {
            c.expect_punct(".")?;
            let (f, _) = c.expect_ident()?;
            let f = self.strip_field(&f);
            c.expect_punct("=")?;
            let value = self.expr(c, params)?;
            c.expect_punct(";")?;
            return Ok(Stmt::Assign { record: rec, field: f, value });
        }
        if c.eat_punct("(") {
            let mut args = Vec::new();
            if !c.eat_punct(")") {
                loop {
                    args.push(self.expr(c, params)?);
                    if c.eat_punct(")") {
                        break;
                    }
                    c.expect_punct(",")?;
                }
            }
            c.expect_punct(";")?;
            let func = fns.get(&head).cloned().unwrap_or(head);
            return Ok(Stmt::Call { func, args });
        }
        if c.is_punct("=") {
            return Err(nonconforming(pos, &format!("assignment to non-record variable `{head}`")));
        }
        Err(Diagnostic::new(pos, format!("expected statement, found `{head}`")))
    }

    fn strip_field(&self, f: &str) -> String {
        match f.strip_suffix(&format!("_{}", self.name)) {
            Some(s) if !self.name.is_empty() => s.to_string(),
            _ => f.to_string(),
        }
    }

    fn expr(&mut self, c: &mut Cursor, params: &[String]) -> Result<IExpr, Diagnostic> {
        let start = c.pos();
        let name = self.name.clone();
        let instances = self.instances.clone();
        let defines: Vec<String> = self.defines.keys().cloned().collect();
        let e = parse_expr(c, &mut |c: &mut Cursor| {
            let (head, pos) = c.expect_ident()?;
            if let Some(rec) = instances.get(&head) {
                c.expect_punct(".")?;
                let (f, _) = c.expect_ident()?;
                let f = match f.strip_suffix(&format!("_{name}")) {
                    Some(s) if !name.is_empty() => s.to_string(),
                    _ => f,
                };
                return Ok(Expr::Var(Ref::Field(*rec, f)));
            }
            if params.contains(&head) {
                return Ok(Expr::Var(Ref::Param(head)));
            }
            if defines.contains(&head) {
                let short = head.strip_prefix(&format!("{name}_")).unwrap_or(&head).to_string();
                return Ok(Expr::Var(Ref::Const(short)));
            }
            if c.is_punct("(") {
                return Err(nonconforming(pos, &format!("function call `{head}` inside an expression")));
            }
            Err(Diagnostic::new(pos, format!("unknown identifier `{head}`")))
        })?;
        Ok(self.normalize_bool(e, start))
    }

    /// `(e) != 0` with a boolean `e` is the generator's idiom for `e`.
    fn normalize_bool(&mut self, e: IExpr, pos: Pos) -> IExpr {
        match e {
            Expr::Binary(BinOp::Ne, l, r) if l.is_boolean() && *r == Expr::Int(0) => {
                let inner = self.normalize_bool(*l, pos);
                self.log.entries.push(format!("normalized `({inner}) != 0` to `{inner}` at {}:{}", pos.line, pos.col));
                inner
            }
            Expr::Binary(op, l, r) => {
                Expr::Binary(op, Box::new(self.normalize_bool(*l, pos)), Box::new(self.normalize_bool(*r, pos)))
            }
            Expr::Unary(op, x) => Expr::Unary(op, Box::new(self.normalize_bool(*x, pos))),
            other => other,
        }
    }
}

fn check_uses(p: ImplProgram) -> Result<ImplProgram, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    for f in p.functions.values() {
        f.body.visit_stmts(&mut |s| match s {
            Stmt::Assign { record, field, .. } if p.field_sort(*record, field).is_none() => {
                diags.push(Diagnostic::global(format!("undeclared field {}.{field} in {}", record.name(), f.name)))
            }
            Stmt::Call { func, args } => match p.functions.get(func) {
                None => diags.push(Diagnostic::global(format!("call to undefined function `{func}` in {}", f.name))),
                Some(d) if d.params.len() != args.len() => {
                    diags.push(Diagnostic::global(format!("`{func}` called with {} arguments in {}", args.len(), f.name)))
                }
                _ => {}
            },
            _ => {}
        });
        f.body.visit_exprs(&mut |e| {
            e.visit_vars(&mut |r| {
                if let Ref::Field(rec, field) = r {
                    if p.field_sort(*rec, field).is_none() {
                        diags.push(Diagnostic::global(format!("undeclared field {}.{field} in {}", rec.name(), f.name)));
                    }
                }
            })
        });
    }
    if diags.is_empty() {
        Ok(p)
    } else {
        diags.sort();
        diags.dedup();
        Err(diags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
#include "rtwtypes.h"
typedef struct {
  uint8_T is_c1_AbsoluteValue;
  uint8_T is_active_c1_AbsoluteValue;
} D_Work_AbsoluteValue;
typedef struct { int32_T y; } BlockIO_AbsoluteValue;
typedef struct { int32_T u; } ExternalInputs_AbsoluteValue;
typedef struct { int32_T y; } ExternalOutputs_AbsoluteValue;
#define AbsoluteValue_IN_N ((uint8_T)2U)
#define AbsoluteValue_IN_P ((uint8_T)1U)
D_Work_AbsoluteValue AbsoluteValue_DWork;
BlockIO_AbsoluteValue AbsoluteValue_B;
ExternalInputs_AbsoluteValue AbsoluteValue_U;
ExternalOutputs_AbsoluteValue AbsoluteValue_Y;
void AbsoluteValue_output(int_T tid)
{
  if (AbsoluteValue_DWork.is_active_c1_AbsoluteValue == 0) {
    AbsoluteValue_DWork.is_active_c1_AbsoluteValue = 1U;
    if ((AbsoluteValue_U.u >= 0) != 0) {
      AbsoluteValue_DWork.is_c1_AbsoluteValue = AbsoluteValue_IN_P;
    } else {
      AbsoluteValue_DWork.is_c1_AbsoluteValue = (uint8_T)AbsoluteValue_IN_N;
    }
  }
  AbsoluteValue_Y.y = AbsoluteValue_B.y;
}
void AbsoluteValue_initialize(void)
{
  AbsoluteValue_DWork.is_active_c1_AbsoluteValue = 0U;
}
"#;

    #[test]
    fn reads_generated_pattern() {
        let (p, log) = read_c_subset(SAMPLE).unwrap();
        assert_eq!(p.name, "AbsoluteValue");
        assert_eq!(p.constants.get("IN_P"), Some(&1));
        assert_eq!(p.constants.get("IN_N"), Some(&2));
        assert!(p.functions.contains_key("initialize"));
        assert!(p.functions.contains_key("AbsoluteValue_output"));
        assert_eq!(p.dwork[0].name, "is_c1");
        assert!(log.entries.iter().any(|e| e.starts_with("normalized `(U.u >= 0) != 0`")), "{log:?}");
    }

    #[test]
    fn loops_and_pointers_are_rejected_with_location() {
        let src = SAMPLE.replace("  AbsoluteValue_Y.y = AbsoluteValue_B.y;", "  while (1) { }");
        let e = read_c_subset(&src).unwrap_err();
        assert!(e[0].message.starts_with(NONCONFORMANT_PREFIX), "{}", e[0]);
        assert!(e[0].message.contains("loop `while` at 26:3"), "{}", e[0]);
        let src = SAMPLE.replace("AbsoluteValue_Y.y = AbsoluteValue_B.y;", "(&AbsoluteValue_Y)->y = 1;");
        let e = read_c_subset(&src).unwrap_err();
        assert!(e[0].message.contains("`&`"), "{}", e[0]);
    }

    #[test]
    fn field_order_is_immaterial() {
        let (a, _) = read_c_subset(SAMPLE).unwrap();
        let swapped = SAMPLE.replace(
            "  uint8_T is_c1_AbsoluteValue;\n  uint8_T is_active_c1_AbsoluteValue;",
            "  uint8_T is_active_c1_AbsoluteValue;\n  uint8_T is_c1_AbsoluteValue;",
        );
        let (b, _) = read_c_subset(&swapped).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.with_sorted_fields(), b.with_sorted_fields());
    }
}
