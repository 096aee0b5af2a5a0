use std::fmt::Write;

use super::*;

pub fn print_impl(p: &ImplProgram) -> String {
    let mut out = String::new();
    writeln!(out, "program {};", p.name).unwrap();
    for r in Record::ALL {
        let fields = p.record(r);
        if fields.is_empty() {
            continue;
        }
        writeln!(out, "\nrecord {} {{", r.name()).unwrap();
        for f in fields {
            writeln!(out, "  {}: {};", f.name, f.sort.keyword()).unwrap();
        }
        out.push_str("}\n");
    }
    if !p.constants.is_empty() {
        out.push('\n');
    }
    for (c, v) in &p.constants {
        writeln!(out, "const {c} = {v};").unwrap();
    }
    for f in p.functions.values() {
        writeln!(out, "\nfn {}({}) {{", f.name, f.params.join(", ")).unwrap();
        body(&f.body, 1, &mut out, &|e| e.to_string());
        out.push_str("}\n");
    }
    out
}

/// Renders one statement in `.sfi` syntax at the given indentation depth.
pub fn print_stmt(s: &Stmt, depth: usize) -> String {
    let mut out = String::new();
    stmt(s, depth, &mut out, &|e| e.to_string());
    out
}

type ExprFmt<'a> = dyn Fn(&IExpr) -> String + 'a;

fn body(s: &Stmt, depth: usize, out: &mut String, fe: &ExprFmt) {
    match s {
        Stmt::Seq(v) => v.iter().for_each(|x| body(x, depth, out, fe)),
        other => stmt(other, depth, out, fe),
    }
}

fn stmt(s: &Stmt, depth: usize, out: &mut String, fe: &ExprFmt) {
    let pad = "  ".repeat(depth);
    match s {
        Stmt::Assign { record, field, value } => {
            writeln!(out, "{pad}{}.{field} := {};", record.name(), fe(value)).unwrap()
        }
        Stmt::Call { func, args } => {
            let a: Vec<String> = args.iter().map(fe).collect();
            writeln!(out, "{pad}{func}({});", a.join(", ")).unwrap()
        }
        Stmt::Seq(v) => v.iter().for_each(|x| stmt(x, depth, out, fe)),
        Stmt::If { arms, els } => {
            for (i, (g, b)) in arms.iter().enumerate() {
                if i == 0 {
                    writeln!(out, "{pad}if {} {{", fe(g)).unwrap();
                } else {
                    writeln!(out, "{pad}}} else if {} {{", fe(g)).unwrap();
                }
                body(b, depth + 1, out, fe);
            }
            if let Some(e) = els {
                writeln!(out, "{pad}}} else {{").unwrap();
                body(e, depth + 1, out, fe);
            }
            writeln!(out, "{pad}}}").unwrap();
        }
    }
}

fn c_type(s: Sort) -> &'static str {
    match s {
        Sort::Byte => "uint8_T",
        Sort::Int => "int32_T",
        Sort::Float => "real_T",
    }
}

fn c_struct(r: Record, name: &str) -> String {
    match r {
        Record::DWork => format!("D_Work_{name}"),
        Record::B => format!("BlockIO_{name}"),
        Record::U => format!("ExternalInputs_{name}"),
        Record::Y => format!("ExternalOutputs_{name}"),
    }
}

fn c_function_name(p: &ImplProgram, f: &str) -> String {
    match f {
        "initialize" | "output" => format!("{}_{f}", p.name),
        other => other.to_string(),
    }
}

/// Renders the program in the C subset accepted by [`read_c_subset`]
/// (generated-code naming: `<Name>_DWork.is_c1_<Name>`, `<Name>_IN_P`, ...).
///
/// [`read_c_subset`]: super::read_c_subset
pub fn render_c(p: &ImplProgram) -> String {
    let name = &p.name;
    let mut out = String::new();
    writeln!(out, "/* {name}: generated-style C rendering */").unwrap();
    for r in Record::ALL {
        let fields = p.record(r);
        if fields.is_empty() {
            continue;
        }
        out.push_str("\ntypedef struct {\n");
        for f in fields {
            let fname = if r == Record::DWork { format!("{}_{name}", f.name) } else { f.name.clone() };
            writeln!(out, "  {} {fname};", c_type(f.sort)).unwrap();
        }
        writeln!(out, "}} {};", c_struct(r, name)).unwrap();
    }
    out.push('\n');
    for (c, v) in &p.constants {
        if c.starts_with("IN_") && *v >= 0 {
            writeln!(out, "#define {name}_{c} ((uint8_T){v}U)").unwrap();
        } else {
            writeln!(out, "#define {name}_{c} ({v})").unwrap();
        }
    }
    out.push('\n');
    for r in Record::ALL {
        if !p.record(r).is_empty() {
            writeln!(out, "{} {name}_{};", c_struct(r, name), r.name()).unwrap();
        }
    }
    let fe = |e: &IExpr| -> String {
        let mapped: Expr<String> = e
            .map_vars(&mut |r: &Ref| {
                Ok::<_, ()>(Expr::Var(match r {
                    Ref::Field(Record::DWork, f) => format!("{name}_DWork.{f}_{name}"),
                    Ref::Field(rec, f) => format!("{name}_{}.{f}", rec.name()),
                    Ref::Const(c) => format!("{name}_{c}"),
                    Ref::Param(x) => x.clone(),
                    Ref::Status(s) => format!("status_{s}"),
                }))
            })
            .expect("infallible");
        mapped.to_string()
    };
    for f in p.functions.values() {
        let params = if f.params.is_empty() {
            "void".to_string()
        } else {
            f.params.iter().map(|x| format!("int_T {x}")).collect::<Vec<_>>().join(", ")
        };
        writeln!(out, "\nvoid {}({params})\n{{", c_function_name(p, &f.name)).unwrap();
        c_body(&f.body, 1, &mut out, &fe, p);
        out.push_str("}\n");
    }
    out
}

fn c_body(s: &Stmt, depth: usize, out: &mut String, fe: &ExprFmt, p: &ImplProgram) {
    let pad = "  ".repeat(depth);
    let name = &p.name;
    match s {
        Stmt::Seq(v) => v.iter().for_each(|x| c_body(x, depth, out, fe, p)),
        Stmt::Assign { record, field, value } => {
            let lhs = if *record == Record::DWork {
                format!("{name}_DWork.{field}_{name}")
            } else {
                format!("{name}_{}.{field}", record.name())
            };
            writeln!(out, "{pad}{lhs} = {};", fe(value)).unwrap();
        }
        Stmt::Call { func, args } => {
            let a: Vec<String> = args.iter().map(fe).collect();
            writeln!(out, "{pad}{}({});", c_function_name(p, func), a.join(", ")).unwrap();
        }
        Stmt::If { arms, els } => {
            for (i, (g, b)) in arms.iter().enumerate() {
                if i == 0 {
                    writeln!(out, "{pad}if ({}) {{", fe(g)).unwrap();
                } else {
                    writeln!(out, "{pad}}} else if ({}) {{", fe(g)).unwrap();
                }
                c_body(b, depth + 1, out, fe, p);
            }
            if let Some(e) = els {
                writeln!(out, "{pad}}} else {{").unwrap();
                c_body(e, depth + 1, out, fe, p);
            }
            writeln!(out, "{pad}}}").unwrap();
        }
    }
}
