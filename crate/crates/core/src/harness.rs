//! Command implementations behind the `sfverify` binary. Each command
//! returns its exit code and both output streams, so the binary only
//! prints and exits, and tests can drive commands in-process.
//!
//! Exit codes: 0 success/PASS, 1 validation failure/FAIL, 2 unreadable or
//! unparsable input, 3 NONCONFORMANT.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chart::{parse_chart, validate_chart, ChartDef};
use crate::ir::{generate_reference, parse_impl, print_impl, read_c_subset, render_c, ImplProgram, NONCONFORMANT_PREFIX};
use crate::lexer::Diagnostic;
use crate::refine::{render_json, render_text, verify, CosimConfig, MatchMode, Outcome, Verdict, VerifyConfig, PHASE_NAMES};
use crate::retrieve::{check_functional_total_surjective, render_relation, synthesize};
use crate::sem::{init_state, parse_trace, step_with_limit, DEFAULT_BROADCAST_LIMIT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NONCONFORMANT: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ImplFormat {
    #[default]
    Ir,
    C,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub chart: PathBuf,
    pub implementation: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub trace_count: usize,
    pub trace_len_max: usize,
    pub domain_lo: i64,
    pub domain_hi: i64,
    pub broadcast_depth_limit: usize,
    pub match_mode: MatchMode,
    pub report_format: ReportFormat,
    pub emit: ImplFormat,
    /// Co-simulation workers; 0 lets the thread pool decide.
    pub workers: usize,
}

impl RunConfig {
    pub fn new(chart: impl Into<PathBuf>) -> RunConfig {
        let d = CosimConfig::default();
        RunConfig {
            chart: chart.into(),
            implementation: None,
            trace: None,
            output: None,
            seed: d.seed,
            trace_count: d.traces,
            trace_len_max: d.max_len,
            domain_lo: d.lo,
            domain_hi: d.hi,
            broadcast_depth_limit: DEFAULT_BROADCAST_LIMIT,
            match_mode: MatchMode::Normalized,
            report_format: ReportFormat::Text,
            emit: ImplFormat::Ir,
            workers: 0,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.domain_lo > self.domain_hi {
            return Err(format!("data domain bounds out of order: {} > {}", self.domain_lo, self.domain_hi));
        }
        Ok(())
    }

    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            cosim: CosimConfig {
                seed: self.seed,
                traces: self.trace_count,
                max_len: self.trace_len_max,
                lo: self.domain_lo,
                hi: self.domain_hi,
                workers: self.workers,
                broadcast_limit: self.broadcast_depth_limit,
            },
            mode: self.match_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CmdOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CmdOutput {
    fn fail(code: i32, stderr: impl Into<String>) -> CmdOutput {
        let mut stderr = stderr.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        CmdOutput { code, stdout: String::new(), stderr }
    }
}

fn read(path: &Path) -> Result<String, CmdOutput> {
    fs::read_to_string(path).map_err(|e| CmdOutput::fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn diags(path: &Path, ds: &[Diagnostic]) -> String {
    ds.iter().map(|d| format!("{}:{d}\n", path.display())).collect()
}

fn load_chart(path: &Path) -> Result<ChartDef, CmdOutput> {
    let src = read(path)?;
    parse_chart(&src).map_err(|ds| CmdOutput::fail(EXIT_IO, diags(path, &ds)))
}

fn valid_chart(path: &Path) -> Result<ChartDef, CmdOutput> {
    let c = load_chart(path)?;
    let ds = validate_chart(&c);
    if ds.is_empty() {
        Ok(c)
    } else {
        Err(CmdOutput::fail(EXIT_FAIL, diags(path, &ds)))
    }
}

/// Either a parsed program or the reasons it does not fit the pattern.
pub enum LoadedImpl {
    Program(ImplProgram),
    Nonconformant(Vec<String>),
}

/// `.c`/`.h` files go through the C reader; anything else is IR text.
pub fn load_implementation(path: &Path) -> Result<LoadedImpl, CmdOutput> {
    let src = read(path)?;
    let is_c = matches!(path.extension().and_then(|e| e.to_str()), Some("c" | "h"));
    if !is_c {
        return parse_impl(&src).map(LoadedImpl::Program).map_err(|ds| CmdOutput::fail(EXIT_IO, diags(path, &ds)));
    }
    match read_c_subset(&src) {
        Ok((p, _)) => Ok(LoadedImpl::Program(p)),
        Err(ds) if ds.iter().any(|d| d.message.starts_with(NONCONFORMANT_PREFIX)) => Ok(LoadedImpl::Nonconformant(
            ds.iter().map(|d| format!("{}:{}:{}: {}", path.display(), d.line, d.col, d.message)).collect(),
        )),
        Err(ds) => Err(CmdOutput::fail(EXIT_IO, diags(path, &ds))),
    }
}

fn emit(cfg: &RunConfig, text: String) -> CmdOutput {
    match &cfg.output {
        None => CmdOutput { code: EXIT_OK, stdout: text, stderr: String::new() },
        Some(p) => match fs::write(p, text) {
            Ok(()) => CmdOutput::default(),
            Err(e) => CmdOutput::fail(EXIT_IO, format!("{}: {e}", p.display())),
        },
    }
}

pub fn cmd_validate(cfg: &RunConfig) -> CmdOutput {
    match valid_chart(&cfg.chart) {
        Ok(_) => CmdOutput::default(),
        Err(o) => o,
    }
}

/// One JSON object per step: `{"step":n,"outputs":…,"state":…,"trace":…}`.
pub fn cmd_simulate(cfg: &RunConfig) -> CmdOutput {
    let run = || -> Result<CmdOutput, CmdOutput> {
        let c = valid_chart(&cfg.chart)?;
        let path = cfg.trace.as_deref().ok_or_else(|| CmdOutput::fail(EXIT_IO, "simulate needs a trace file"))?;
        let trace = parse_trace(&read(path)?).map_err(|d| CmdOutput::fail(EXIT_IO, diags(path, &[d])))?;
        let mut out = CmdOutput::default();
        let mut s = init_state(&c);
        for (i, input) in trace.iter().enumerate() {
            match step_with_limit(&c, &s, input, cfg.broadcast_depth_limit) {
                Ok(res) => {
                    #[derive(Serialize)]
                    struct Line<'a> {
                        step: usize,
                        outputs: &'a std::collections::BTreeMap<String, crate::expr::Value>,
                        state: &'a crate::sem::ChartDynState,
                        trace: &'a [crate::sem::TraceEvent],
                    }
                    let line = Line { step: i + 1, outputs: &res.outputs, state: &res.state, trace: &res.trace };
                    out.stdout.push_str(&serde_json::to_string(&line).expect("step results serialize"));
                    out.stdout.push('\n');
                    s = res.state;
                }
                Err(e) => {
                    out.code = EXIT_FAIL;
                    let _ = writeln!(out.stderr, "step {}: {e}", i + 1);
                    break;
                }
            }
        }
        Ok(out)
    };
    let out = run().unwrap_or_else(|o| o);
    match (&cfg.output, out.code) {
        (Some(_), _) => {
            let mut written = emit(cfg, out.stdout);
            if written.code == EXIT_OK {
                written.code = out.code;
                written.stderr = out.stderr;
            }
            written
        }
        _ => out,
    }
}

pub fn cmd_generate(cfg: &RunConfig) -> CmdOutput {
    let c = match valid_chart(&cfg.chart) {
        Ok(c) => c,
        Err(o) => return o,
    };
    match generate_reference(&c) {
        Ok(p) => emit(
            cfg,
            match cfg.emit {
                ImplFormat::Ir => print_impl(&p),
                ImplFormat::C => render_c(&p),
            },
        ),
        Err(e) => CmdOutput::fail(EXIT_FAIL, format!("{}: {e}", cfg.chart.display())),
    }
}

/// Dumps the synthesized relation and its functional/total/surjective
/// check over the configured data domain.
pub fn cmd_retrieve(cfg: &RunConfig) -> CmdOutput {
    let run = || -> Result<CmdOutput, CmdOutput> {
        let c = valid_chart(&cfg.chart)?;
        let p = match &cfg.implementation {
            Some(path) => match load_implementation(path)? {
                LoadedImpl::Program(p) => p,
                LoadedImpl::Nonconformant(ds) => return Err(CmdOutput::fail(EXIT_NONCONFORMANT, ds.join("\n"))),
            },
            None => generate_reference(&c).map_err(|e| CmdOutput::fail(EXIT_FAIL, e.to_string()))?,
        };
        let r = synthesize(&c, &p).map_err(|e| CmdOutput::fail(EXIT_NONCONFORMANT, e.failures.join("\n")))?;
        let domain: Vec<i64> = (cfg.domain_lo..=cfg.domain_hi).collect();
        let rep = check_functional_total_surjective(&r, &c, &p, &domain);
        let code = if rep.counterexamples.is_empty() { EXIT_OK } else { EXIT_FAIL };
        let text = match cfg.report_format {
            ReportFormat::Json => {
                let v = serde_json::json!({ "schema": crate::refine::SCHEMA, "relation": r, "check": rep });
                let mut s = serde_json::to_string_pretty(&v).expect("relations serialize");
                s.push('\n');
                s
            }
            ReportFormat::Text => {
                let mut s = render_relation(&r);
                let _ = writeln!(
                    s,
                    "\ncheck over data domain {}..={}: {} control states, {} checks; total={} functional={} surjective={}; {} counterexample(s)",
                    cfg.domain_lo,
                    cfg.domain_hi,
                    rep.control_states,
                    rep.checks,
                    rep.total,
                    rep.functional,
                    rep.surjective,
                    rep.counterexamples.len()
                );
                for cx in &rep.counterexamples {
                    let _ = writeln!(s, "  {cx}");
                }
                s
            }
        };
        let mut out = emit(cfg, text);
        if out.code == EXIT_OK {
            out.code = code;
        }
        Ok(out)
    };
    run().unwrap_or_else(|o| o)
}

pub fn verdict_code(v: &Verdict) -> i32 {
    match v.outcome {
        Outcome::Pass => EXIT_OK,
        Outcome::Fail => EXIT_FAIL,
        Outcome::Nonconformant => EXIT_NONCONFORMANT,
    }
}

pub fn render(v: &Verdict, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(v),
        ReportFormat::Json => render_json(v),
    }
}

/// Runs the verification for `cfg` and returns the verdict, or the output
/// of a command that could not get that far.
pub fn run_verify(cfg: &RunConfig) -> Result<Verdict, CmdOutput> {
    cfg.check().map_err(|m| CmdOutput::fail(EXIT_IO, m))?;
    let c = valid_chart(&cfg.chart)?;
    let path = cfg.implementation.as_deref().ok_or_else(|| CmdOutput::fail(EXIT_IO, "verify needs an implementation"))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("implementation").to_string();
    match load_implementation(path)? {
        LoadedImpl::Program(p) => Ok(verify(&c, &p, &cfg.verify_config())),
        LoadedImpl::Nonconformant(ds) => Ok(Verdict::nonconformant(&c, &name, PHASE_NAMES[4], ds)),
    }
}

pub fn cmd_verify(cfg: &RunConfig) -> CmdOutput {
    match run_verify(cfg) {
        Err(o) => o,
        Ok(v) => {
            let mut out = emit(cfg, render(&v, cfg.report_format));
            if out.code == EXIT_OK {
                out.code = verdict_code(&v);
                out.stderr = v.diagnostics.iter().map(|d| format!("{d}\n")).collect();
            }
            out
        }
    }
}
