//! `.sfi` text frontend.
//!
//! ```text
//! program AbsoluteValue;
//! record DWork { is_active_c1: byte; is_c1: byte; }
//! record U { u: int; }
//! const IN_P = 1;
//! fn AbsoluteValue_output(tid) {
//!   if DWork.is_active_c1 == 0 { DWork.is_active_c1 := 1; } else { }
//! }
//! ```

use std::collections::BTreeSet;

use super::*;
use crate::expr::parse_expr;
use crate::lexer::{tokenize, Cursor, Diagnostic, Pos, Tok};

#[derive(Default)]
struct Uses {
    fields: Vec<(Record, String, Pos)>,
    consts: Vec<(String, Pos)>,
    calls: Vec<(String, usize, Pos)>,
}

pub fn parse_impl(src: &str) -> Result<ImplProgram, Vec<Diagnostic>> {
    let toks = tokenize(src).map_err(|d| vec![d])?;
    let mut cur = Cursor::new(toks);
    let mut uses = Uses::default();
    let p = parse_program(&mut cur, &mut uses).map_err(|d| vec![d])?;
    let mut diags = Vec::new();
    for (r, f, pos) in &uses.fields {
        if p.field_sort(*r, f).is_none() {
            diags.push(Diagnostic::new(*pos, format!("undeclared field {}.{f}", r.name())));
        }
    }
    for (c, pos) in &uses.consts {
        if !p.constants.contains_key(c) {
            diags.push(Diagnostic::new(*pos, format!("undeclared name `{c}`")));
        }
    }
    for (f, n, pos) in &uses.calls {
        match p.functions.get(f) {
            None => diags.push(Diagnostic::new(*pos, format!("call to undefined function `{f}`"))),
            Some(def) if def.params.len() != *n => diags.push(Diagnostic::new(
                *pos,
                format!("`{f}` takes {} arguments, {n} given", def.params.len()),
            )),
            _ => {}
        }
    }
    if diags.is_empty() {
        Ok(p)
    } else {
        diags.sort();
        Err(diags)
    }
}

fn parse_program(cur: &mut Cursor, uses: &mut Uses) -> Result<ImplProgram, Diagnostic> {
    cur.expect_keyword("program")?;
    let (name, _) = cur.expect_ident()?;
    cur.expect_punct(";")?;
    let mut p = ImplProgram::new(&name);
    let mut seen_records = BTreeSet::new();
    while !cur.at_eof() {
        let pos = cur.pos();
        let (kw, _) = cur.expect_ident()?;
        match kw.as_str() {
            "record" => {
                let (rn, rpos) = cur.expect_ident()?;
                let r = Record::from_name(&rn)
                    .ok_or_else(|| Diagnostic::new(rpos, format!("unknown record `{rn}` (expected DWork, B, U or Y)")))?;
                if !seen_records.insert(r) {
                    return Err(Diagnostic::new(rpos, format!("record {rn} declared twice")));
                }
                cur.expect_punct("{")?;
                while !cur.eat_punct("}") {
                    let (f, fpos) = cur.expect_ident()?;
                    cur.expect_punct(":")?;
                    let (s, spos) = cur.expect_ident()?;
                    let sort = Sort::from_keyword(&s).ok_or_else(|| Diagnostic::new(spos, format!("unknown sort `{s}`")))?;
                    cur.expect_punct(";")?;
                    if p.field_sort(r, &f).is_some() {
                        return Err(Diagnostic::new(fpos, format!("duplicate field {rn}.{f}")));
                    }
                    p.record_mut(r).push(FieldDecl { name: f, sort });
                }
            }
            "const" => {
                let (c, cpos) = cur.expect_ident()?;
                cur.expect_punct("=")?;
                let neg = cur.eat_punct("-");
                let v = cur.expect_int()?;
                cur.expect_punct(";")?;
                if p.constants.insert(c.clone(), if neg { -v } else { v }).is_some() {
                    return Err(Diagnostic::new(cpos, format!("duplicate constant `{c}`")));
                }
            }
            "fn" => {
                let (fname, fpos) = cur.expect_ident()?;
                cur.expect_punct("(")?;
                let mut params = Vec::new();
                if !cur.eat_punct(")") {
                    loop {
                        params.push(cur.expect_ident()?.0);
                        if cur.eat_punct(")") {
                            break;
                        }
                        cur.expect_punct(",")?;
                    }
                }
                let body = parse_block(cur, &params, uses)?;
                if p.functions.contains_key(&fname) {
                    return Err(Diagnostic::new(fpos, format!("duplicate function `{fname}`")));
                }
                p.functions.insert(fname.clone(), FunctionDef { name: fname, params, body });
            }
            _ => return Err(Diagnostic::new(pos, format!("expected `record`, `const` or `fn`, found `{kw}`"))),
        }
    }
    Ok(p)
}

fn parse_block(cur: &mut Cursor, params: &[String], uses: &mut Uses) -> Result<Stmt, Diagnostic> {
    cur.expect_punct("{")?;
    let mut out = Vec::new();
    while !cur.eat_punct("}") {
        out.push(parse_stmt(cur, params, uses)?);
    }
    Ok(Stmt::Seq(out))
}

fn parse_stmt(cur: &mut Cursor, params: &[String], uses: &mut Uses) -> Result<Stmt, Diagnostic> {
    if cur.eat_ident("if") {
        let mut arms = Vec::new();
        let g = parse_iexpr(cur, params, uses)?;
        arms.push((g, parse_block(cur, params, uses)?));
        let mut els = None;
        while cur.eat_ident("else") {
            if cur.eat_ident("if") {
                let g = parse_iexpr(cur, params, uses)?;
                arms.push((g, parse_block(cur, params, uses)?));
            } else {
                els = Some(Box::new(parse_block(cur, params, uses)?));
                break;
            }
        }
        return Ok(Stmt::If { arms, els });
    }
    let pos = cur.pos();
    let (head, _) = cur.expect_ident()?;
    if let Some(r) = Record::from_name(&head) {
        if cur.eat_punct(".") {
            let (f, fpos) = cur.expect_ident()?;
            uses.fields.push((r, f.clone(), fpos));
            cur.expect_punct(":=")?;
            let value = parse_iexpr(cur, params, uses)?;
            cur.expect_punct(";")?;
            return Ok(Stmt::Assign { record: r, field: f, value });
        }
    }
    if cur.eat_punct("(") {
        let mut args = Vec::new();
        if !cur.eat_punct(")") {
            loop {
                args.push(parse_iexpr(cur, params, uses)?);
                if cur.eat_punct(")") {
                    break;
                }
                cur.expect_punct(",")?;
            }
        }
        cur.expect_punct(";")?;
        uses.calls.push((head.clone(), args.len(), pos));
        return Ok(Stmt::Call { func: head, args });
    }
    Err(Diagnostic::new(pos, format!("expected statement, found `{head}`")))
}

fn parse_iexpr(cur: &mut Cursor, params: &[String], uses: &mut Uses) -> Result<IExpr, Diagnostic> {
    parse_expr(cur, &mut |c: &mut Cursor| {
        let (head, pos) = c.expect_ident()?;
        if let Some(r) = Record::from_name(&head) {
            if c.eat_punct(".") {
                let (f, fpos) = c.expect_ident()?;
                uses.fields.push((r, f.clone(), fpos));
                return Ok(Expr::Var(Ref::Field(r, f)));
            }
        }
        if head == "status" && matches!(c.peek(), Tok::Punct("(")) {
            c.bump();
            let (s, _) = c.expect_ident()?;
            c.expect_punct(")")?;
            return Ok(Expr::Var(Ref::Status(s)));
        }
        if params.contains(&head) {
            return Ok(Expr::Var(Ref::Param(head)));
        }
        uses.consts.push((head.clone(), pos));
        Ok(Expr::Var(Ref::Const(head)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undeclared_field_is_reported() {
        let err = parse_impl("program X;\nrecord DWork { is_c1: byte; }\nfn f() { DWork.is_Q := 1; }").unwrap_err();
        assert_eq!(err[0].message, "undeclared field DWork.is_Q");
        assert_eq!(err[0].line, 3);
    }

    #[test]
    fn empty_function_is_a_no_op() {
        let p = parse_impl("program X; fn initialize() { }").unwrap();
        assert!(p.functions["initialize"].body.is_skip());
    }

    #[test]
    fn undefined_call() {
        let err = parse_impl("program X; fn f() { g(); }").unwrap_err();
        assert!(err[0].message.contains("undefined function `g`"));
    }

    #[test]
    fn else_if_chains_and_params() {
        let p = parse_impl(
            "program X; record U { u: int; } record B { y: int; } const IN_P = 1;
             fn out(tid) { if tid == IN_P { B.y := U.u; } else if U.u < 0 { B.y := -U.u; } else { } }",
        )
        .unwrap();
        let Stmt::Seq(body) = &p.functions["out"].body else { panic!() };
        let Stmt::If { arms, els } = &body[0] else { panic!() };
        assert_eq!(arms.len(), 2);
        assert!(els.is_some());
        assert_eq!(arms[0].0.to_string(), "tid == IN_P");
    }
}
