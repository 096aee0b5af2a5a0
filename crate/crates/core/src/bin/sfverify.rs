use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sfverify::harness::{
    cmd_generate, cmd_retrieve, cmd_simulate, cmd_validate, cmd_verify, ImplFormat, ReportFormat, RunConfig,
};
use sfverify::refine::MatchMode;

/// Translation validation for charts and their generated code.
///
/// Exit codes: 0 success or PASS, 1 invalid chart or FAIL, 2 unreadable or
/// unparsable input, 3 implementation outside the generated-code pattern.
#[derive(Parser)]
#[command(name = "sfverify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a chart's well-formedness rules.
    Validate { chart: PathBuf },
    /// Run a trace file through the chart semantics; prints one JSON line per step.
    Simulate {
        chart: PathBuf,
        trace: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        broadcast_limit: usize,
    },
    /// Emit the reference implementation of a chart.
    Generate {
        chart: PathBuf,
        #[arg(long, value_enum, default_value_t = Emit::Ir)]
        emit: Emit,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Dump the retrieve relation between chart and implementation and check it.
    Retrieve {
        chart: PathBuf,
        /// Defaults to the reference implementation.
        implementation: Option<PathBuf>,
        #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
        lo: i64,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        hi: i64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Verify an implementation (`.sfi` IR text, or `.c`) against a chart.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct VerifyArgs {
    chart: PathBuf,
    implementation: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    traces: usize,
    #[arg(long, default_value_t = 50)]
    max_len: usize,
    #[arg(long, default_value_t = -10, allow_negative_numbers = true)]
    lo: i64,
    #[arg(long, default_value_t = 10, allow_negative_numbers = true)]
    hi: i64,
    #[arg(long, default_value_t = 64)]
    broadcast_limit: usize,
    #[arg(long, value_enum, default_value_t = Mode::Normalized)]
    match_mode: Mode,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Co-simulation worker threads (0: one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Normalized,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Ir,
    C,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Json => ReportFormat::Json,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Validate { chart } => cmd_validate(&RunConfig::new(chart)),
        Command::Simulate { chart, trace, output, broadcast_limit } => {
            let mut cfg = RunConfig::new(chart);
            cfg.trace = Some(trace);
            cfg.output = output;
            cfg.broadcast_depth_limit = broadcast_limit;
            cmd_simulate(&cfg)
        }
        Command::Generate { chart, emit, output } => {
            let mut cfg = RunConfig::new(chart);
            cfg.emit = match emit {
                Emit::Ir => ImplFormat::Ir,
                Emit::C => ImplFormat::C,
            };
            cfg.output = output;
            cmd_generate(&cfg)
        }
        Command::Retrieve { chart, implementation, lo, hi, format, output } => {
            let mut cfg = RunConfig::new(chart);
            cfg.implementation = implementation;
            cfg.domain_lo = lo;
            cfg.domain_hi = hi;
            cfg.report_format = format.into();
            cfg.output = output;
            cmd_retrieve(&cfg)
        }
        Command::Verify(a) => {
            let mut cfg = RunConfig::new(a.chart);
            cfg.implementation = Some(a.implementation);
            cfg.seed = a.seed;
            cfg.trace_count = a.traces;
            cfg.trace_len_max = a.max_len;
            cfg.domain_lo = a.lo;
            cfg.domain_hi = a.hi;
            cfg.broadcast_depth_limit = a.broadcast_limit;
            cfg.match_mode = match a.match_mode {
                Mode::Normalized => MatchMode::Normalized,
                Mode::Exact => MatchMode::Exact,
            };
            cfg.report_format = a.format.into();
            cfg.workers = a.workers;
            cfg.output = a.output;
            cmd_verify(&cfg)
        }
    };
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
