//! Imperative IR mirroring generated chart code: four records (`DWork`
//! execution state, `B` block signals, `U` inputs, `Y` outputs), named
//! integer constants and first-order procedures over a small statement
//! language.

mod creader;
mod generate;
mod interp;
mod parse;
mod print;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Sort};

pub use creader::{read_c_subset, CReadLog, NONCONFORMANT_PREFIX};
pub use interp::{call_function, exec, init_impl, run_impl, step_impl, ImplError, ImplState, StatusFn};
pub use generate::generate_reference;
pub use parse::parse_impl;
pub use print::{print_impl, print_stmt, render_c};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Record {
    DWork,
    B,
    U,
    Y,
}

impl Record {
    pub const ALL: [Record; 4] = [Record::DWork, Record::B, Record::U, Record::Y];

    pub fn name(self) -> &'static str {
        match self {
            Record::DWork => "DWork",
            Record::B => "B",
            Record::U => "U",
            Record::Y => "Y",
        }
    }

    pub fn from_name(s: &str) -> Option<Record> {
        Record::ALL.into_iter().find(|r| r.name() == s)
    }
}

/// Leaf of an implementation expression. `Status` is the symbolic
/// "is this chart state active" lookup that only derived programs carry
/// before simplification.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ref {
    Field(Record, String),
    Const(String),
    Param(String),
    Status(String),
}

impl Ref {
    pub fn field(r: Record, f: &str) -> Ref {
        Ref::Field(r, f.to_string())
    }
}

impl fmt::Display for Ref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ref::Field(r, n) => write!(f, "{}.{n}", r.name()),
            Ref::Const(c) | Ref::Param(c) => f.write_str(c),
            Ref::Status(s) => write!(f, "status({s})"),
        }
    }
}

pub type IExpr = Expr<Ref>;

pub fn field(r: Record, f: &str) -> IExpr {
    Expr::Var(Ref::field(r, f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stmt {
    Assign { record: Record, field: String, value: IExpr },
    If { arms: Vec<(IExpr, Stmt)>, els: Option<Box<Stmt>> },
    Seq(Vec<Stmt>),
    Call { func: String, args: Vec<IExpr> },
}

impl Stmt {
    pub fn skip() -> Stmt {
        Stmt::Seq(Vec::new())
    }

    pub fn assign(record: Record, field: &str, value: IExpr) -> Stmt {
        Stmt::Assign { record, field: field.to_string(), value }
    }

    pub fn is_skip(&self) -> bool {
        matches!(self, Stmt::Seq(v) if v.iter().all(Stmt::is_skip))
    }

    /// Canonical nesting: sequences never directly contain sequences, and
    /// every branch body is a sequence.
    pub fn normalize(self) -> Stmt {
        fn flat(s: Stmt, out: &mut Vec<Stmt>) {
            match s {
                Stmt::Seq(v) => v.into_iter().for_each(|x| flat(x, out)),
                Stmt::If { arms, els } => out.push(Stmt::If {
                    arms: arms.into_iter().map(|(g, b)| (g, b.normalize())).collect(),
                    els: els.map(|e| Box::new(e.normalize())),
                }),
                other => out.push(other),
            }
        }
        let mut out = Vec::new();
        flat(self, &mut out);
        Stmt::Seq(out)
    }

    /// Number of statement nodes, used in logs.
    pub fn size(&self) -> usize {
        match self {
            Stmt::Seq(v) => v.iter().map(Stmt::size).sum(),
            Stmt::If { arms, els } => {
                1 + arms.iter().map(|(_, b)| b.size()).sum::<usize>() + els.as_ref().map_or(0, |e| e.size())
            }
            _ => 1,
        }
    }

    pub fn visit_exprs<'a>(&'a self, f: &mut impl FnMut(&'a IExpr)) {
        match self {
            Stmt::Assign { value, .. } => f(value),
            Stmt::If { arms, els } => {
                for (g, b) in arms {
                    f(g);
                    b.visit_exprs(f);
                }
                if let Some(e) = els {
                    e.visit_exprs(f);
                }
            }
            Stmt::Seq(v) => v.iter().for_each(|s| s.visit_exprs(f)),
            Stmt::Call { args, .. } => args.iter().for_each(|a| f(a)),
        }
    }

    pub fn visit_stmts<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match self {
            Stmt::If { arms, els } => {
                for (_, b) in arms {
                    b.visit_stmts(f);
                }
                if let Some(e) = els {
                    e.visit_stmts(f);
                }
            }
            Stmt::Seq(v) => v.iter().for_each(|s| s.visit_stmts(f)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub sort: Sort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Stmt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplProgram {
    pub name: String,
    pub dwork: Vec<FieldDecl>,
    pub b: Vec<FieldDecl>,
    pub u: Vec<FieldDecl>,
    pub y: Vec<FieldDecl>,
    pub constants: BTreeMap<String, i64>,
    pub functions: BTreeMap<String, FunctionDef>,
}

impl ImplProgram {
    pub fn new(name: &str) -> Self {
        ImplProgram {
            name: name.to_string(),
            dwork: Vec::new(),
            b: Vec::new(),
            u: Vec::new(),
            y: Vec::new(),
            constants: BTreeMap::new(),
            functions: BTreeMap::new(),
        }
    }

    pub fn record(&self, r: Record) -> &Vec<FieldDecl> {
        match r {
            Record::DWork => &self.dwork,
            Record::B => &self.b,
            Record::U => &self.u,
            Record::Y => &self.y,
        }
    }

    pub fn record_mut(&mut self, r: Record) -> &mut Vec<FieldDecl> {
        match r {
            Record::DWork => &mut self.dwork,
            Record::B => &mut self.b,
            Record::U => &mut self.u,
            Record::Y => &mut self.y,
        }
    }

    pub fn field_sort(&self, r: Record, f: &str) -> Option<Sort> {
        self.record(r).iter().find(|d| d.name == f).map(|d| d.sort)
    }

    fn entry(&self, short: &str) -> Option<&FunctionDef> {
        self.functions.get(&format!("{}_{short}", self.name)).or_else(|| self.functions.get(short))
    }

    /// `<Name>_initialize` or `initialize`.
    pub fn init_fn(&self) -> Option<&FunctionDef> {
        self.entry("initialize")
    }

    /// `<Name>_output` or `output`.
    pub fn output_fn(&self) -> Option<&FunctionDef> {
        self.entry("output")
    }

    /// Copy with the records sorted by field name, for order-insensitive comparison.
    pub fn with_sorted_fields(&self) -> ImplProgram {
        let mut p = self.clone();
        for r in Record::ALL {
            p.record_mut(r).sort_by(|a, b| a.name.cmp(&b.name));
        }
        p
    }

    /// Normalizes every function body; see [`Stmt::normalize`].
    pub fn normalized(mut self) -> ImplProgram {
        for f in self.functions.values_mut() {
            f.body = std::mem::replace(&mut f.body, Stmt::skip()).normalize();
        }
        self
    }
}
