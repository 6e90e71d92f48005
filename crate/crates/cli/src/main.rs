//! `mfac` command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Component, Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfac_core::analysis::{parse_lambda_grid, write_sweep_csv};
use mfac_core::harness::{
    builtin, builtin_names, compute_metrics, default_window, export_csv, import_csv,
};
use mfac_core::{
    build_t, lambda_sweep, poles, run, static_error_power, MfacError, PgVector, PseudoOrders,
    Scenario, SimTrace, StaticErrorLimit, Termination,
};

/// Version tag of the `simulate` summary line.
const SUMMARY_SCHEMA: &str = "mfac-summary/1";

#[derive(Parser)]
#[command(name = "mfac", version, about = "Model-free adaptive control toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct PgArgs {
    /// Pseudo-gradient literal, output block first, e.g. "-0.8,-0.5,-0.2".
    #[arg(long, allow_hyphen_values = true)]
    pg: String,
    /// Number of output entries at the front of the literal.
    #[arg(long, default_value_t = 1)]
    ly: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or built-in scenario and write its trace.
    Simulate {
        /// Scenario TOML path or built-in name.
        scenario: String,
        /// Trace CSV destination; defaults to `<scenario name>.csv`.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Rows used for the summary metrics.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Closed-loop polynomial, poles and verdict for a frozen pseudo-gradient.
    AnalyzePoles {
        #[command(flatten)]
        pg: PgArgs,
        #[arg(long)]
        lambda: f64,
        /// Sampling period of the ramp used for the predicted error.
        #[arg(long, default_value_t = 1.0)]
        ts: f64,
    },
    /// Predicted steady tracking error for `y* = Ts·k` or `y* = kⁿ`.
    AnalyzeStaticError {
        #[command(flatten)]
        pg: PgArgs,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        ts: f64,
        /// Reference order; 1 is the ramp.
        #[arg(long, default_value_t = 1)]
        power: u32,
    },
    /// Spectral radius, verdict and ramp error over a λ grid, as CSV.
    SweepLambda {
        #[command(flatten)]
        pg: PgArgs,
        /// `start:step:stop`, `logspace:lo:hi:n` or a comma list.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 1.0)]
        ts: f64,
        /// Output path; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write a matplotlib script that plots a trace CSV.
    EmitPlot {
        trace: PathBuf,
        /// Script destination; defaults to the trace path with `.py`.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Plot only the pseudo-gradient columns.
        #[arg(long)]
        pg_only: bool,
    },
    /// Names of the built-in scenarios.
    ListScenarios,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Diverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Diverged(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Diverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<MfacError> for Failure {
    fn from(e: MfacError) -> Self {
        match e {
            MfacError::Io(_) => Failure::Io(e.to_string()),
            MfacError::IterationDivergence { .. } | MfacError::DegenerateGain { .. } => {
                Failure::Diverged(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mfac: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Simulate {
            scenario,
            out,
            window,
        } => simulate(&scenario, out, window),
        Command::AnalyzePoles { pg, lambda, ts } => analyze_poles(&pg, lambda, ts),
        Command::AnalyzeStaticError {
            pg,
            lambda,
            ts,
            power,
        } => analyze_static_error(&pg, lambda, ts, power),
        Command::SweepLambda { pg, grid, ts, out } => sweep(&pg, &grid, ts, out),
        Command::EmitPlot {
            trace,
            out,
            pg_only,
        } => emit_plot(&trace, out, pg_only),
        Command::ListScenarios => {
            let mut stdout = io::stdout().lock();
            for name in builtin_names() {
                writeln!(stdout, "{name}")?;
            }
            Ok(())
        }
    }
}

fn load_scenario(arg: &str) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Ok(s) = builtin(arg) {
            return Ok(s);
        }
        return Err(Failure::Io(format!(
            "{arg}: no such file and no built-in scenario of that name"
        )));
    }
    Ok(Scenario::load(path)?)
}

fn simulate(arg: &str, out: Option<PathBuf>, window: Option<usize>) -> CliResult {
    let scenario = load_scenario(arg)?;
    let trace = run(&scenario)?;
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{}.csv", scenario.name)));
    export_csv(&trace, &out)?;
    println!("{}", summary_line(&scenario.name, &trace, window, &out)?);
    match trace.status {
        Termination::Completed => Ok(()),
        Termination::Diverged { k } => Err(Failure::Diverged(format!(
            "{} diverged at k={k}; partial trace in {}",
            scenario.name,
            out.display()
        ))),
    }
}

fn summary_line(
    name: &str,
    trace: &SimTrace,
    window: Option<usize>,
    out: &Path,
) -> Result<String, Failure> {
    let mut line = format!("{SUMMARY_SCHEMA} scenario={name}");
    match trace.status {
        Termination::Completed => line.push_str(" status=completed"),
        Termination::Diverged { k } => write!(line, " status=diverged diverged_at={k}").unwrap(),
    }
    write!(line, " rows={}", trace.len()).unwrap();
    if !trace.is_empty() {
        let m = compute_metrics(trace, window.unwrap_or_else(|| default_window(trace.len())))?;
        write!(
            line,
            " window={} rms_error={:e} static_error={:e} max_abs_u={:e} constraint_violations={}",
            m.window, m.rms_error, m.static_error, m.max_abs_u, m.constraint_violations
        )
        .unwrap();
    }
    write!(line, " out={}", out.display()).unwrap();
    Ok(line)
}

fn parse_pg(args: &PgArgs) -> Result<PgVector, Failure> {
    let values = args
        .pg
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Config(format!("invalid pseudo-gradient entry {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() < 2 || args.ly >= values.len() {
        return Err(Failure::Config(format!(
            "pseudo-gradient needs {} output entries plus at least one input entry, got {}",
            args.ly,
            values.len()
        )));
    }
    let orders = PseudoOrders::new(args.ly, values.len() - args.ly)?;
    Ok(PgVector::new(orders, values, 0)?)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.6}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn analyze_poles(args: &PgArgs, lambda: f64, ts: f64) -> CliResult {
    let pg = parse_pg(args)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Failure::Config(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let t = build_t(&pg, lambda);
    let report = poles(&t)?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "lambda={lambda}")?;
    writeln!(stdout, "t_coefficients={}", join(t.coefficients()))?;
    for (i, (re, im)) in report.roots.iter().enumerate() {
        writeln!(
            stdout,
            "root_{}={re:.6}{im:+.6}i |z|={:.6}",
            i + 1,
            re.hypot(*im)
        )?;
    }
    if report.infinite_roots > 0 {
        writeln!(stdout, "infinite_roots={}", report.infinite_roots)?;
    }
    writeln!(stdout, "spectral_radius={:.6}", report.spectral_radius)?;
    writeln!(stdout, "verdict={}", report.verdict)?;
    match mfac_core::static_error_ramp(&pg, lambda, ts) {
        Ok(e) => writeln!(stdout, "ramp_error={e:.6}")?,
        Err(e) => writeln!(stdout, "ramp_error=degenerate ({e})")?,
    }
    Ok(())
}

fn analyze_static_error(args: &PgArgs, lambda: f64, ts: f64, power: u32) -> CliResult {
    let pg = parse_pg(args)?;
    let value = if power == 1 {
        StaticErrorLimit::Finite(mfac_core::static_error_ramp(&pg, lambda, ts)?)
    } else {
        static_error_power(&pg, power, lambda)?
    };
    match value {
        StaticErrorLimit::Finite(e) => println!("static_error={e:.6}"),
        StaticErrorLimit::Divergent => println!("static_error=divergent"),
    }
    Ok(())
}

fn sweep(args: &PgArgs, grid: &str, ts: f64, out: Option<PathBuf>) -> CliResult {
    let pg = parse_pg(args)?;
    let rows = lambda_sweep(&pg, &parse_lambda_grid(grid)?, ts)?;
    for row in rows.iter().filter(|r| r.degenerate()) {
        log::warn!("lambda={}: ramp error denominator vanishes", row.lambda);
    }
    match out {
        Some(path) => write_sweep_csv(&rows, fs::File::create(path)?)?,
        None => write_sweep_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn emit_plot(trace_path: &Path, out: Option<PathBuf>, pg_only: bool) -> CliResult {
    let trace = import_csv(trace_path)?;
    if trace.is_empty() {
        return Err(Failure::Config(format!(
            "{}: trace has no rows",
            trace_path.display()
        )));
    }
    let out = out.unwrap_or_else(|| trace_path.with_extension("py"));
    let script_dir = out.parent().filter(|p| !p.as_os_str().is_empty());
    let rel = relative_path(trace_path, script_dir.unwrap_or(Path::new(".")))?;
    fs::write(&out, plot_script(&rel, trace.pg_len(), pg_only))?;
    println!("{}", out.display());
    Ok(())
}

/// Path of `target` as seen from directory `base`, with forward slashes.
fn relative_path(target: &Path, base: &Path) -> Result<String, Failure> {
    let target = fs::canonicalize(target)?;
    let base = fs::canonicalize(base)?;
    let t: Vec<Component> = target.components().collect();
    let b: Vec<Component> = base.components().collect();
    let common = t.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut parts: Vec<String> = vec!["..".into(); b.len() - common];
    parts.extend(
        t[common..]
            .iter()
            .map(|c| c.as_os_str().to_string_lossy().into_owned()),
    );
    Ok(parts.join("/"))
}

fn plot_script(csv_rel: &str, pg_len: usize, pg_only: bool) -> String {
    let pg_cols: Vec<String> = (1..=pg_len).map(|i| format!("\"phi_{i}\"")).collect();
    let panels = if pg_only { 1 } else { 3 };
    let mut s = String::new();
    s.push_str("#!/usr/bin/env python3\n");
    s.push_str("\"\"\"Plots an mfac trace. Pass an image path to save instead of showing.\"\"\"\n");
    s.push_str("import csv\nimport sys\nfrom pathlib import Path\n\n");
    s.push_str("import matplotlib.pyplot as plt\n\n");
    writeln!(s, "TRACE = Path(__file__).resolve().parent / \"{csv_rel}\"").unwrap();
    writeln!(s, "PG_COLUMNS = [{}]\n", pg_cols.join(", ")).unwrap();
    s.push_str("with open(TRACE, newline=\"\") as f:\n");
    s.push_str("    rows = list(csv.DictReader(f))\n");
    s.push_str("col = lambda name: [float(r[name]) for r in rows]\n");
    s.push_str("k = col(\"k\")\n\n");
    writeln!(
        s,
        "fig, axes = plt.subplots({panels}, 1, sharex=True, figsize=(8, {}), squeeze=False)",
        2 + 2 * panels
    )
    .unwrap();
    s.push_str("axes = axes[:, 0]\n");
    if !pg_only {
        s.push_str("axes[0].plot(k, col(\"y_star\"), \"--\", label=\"y*\")\n");
        s.push_str("axes[0].plot(k, col(\"y\"), label=\"y\")\n");
        s.push_str("axes[0].set_ylabel(\"output\")\n");
        s.push_str("axes[0].legend()\n");
        s.push_str("axes[1].plot(k, col(\"u\"))\n");
        s.push_str("axes[1].set_ylabel(\"u\")\n");
    }
    writeln!(s, "pg_ax = axes[{}]", panels - 1).unwrap();
    s.push_str("for name in PG_COLUMNS:\n");
    s.push_str("    pg_ax.plot(k, col(name), label=name)\n");
    s.push_str("pg_ax.set_ylabel(\"pseudo-gradient\")\n");
    s.push_str("pg_ax.legend()\n");
    s.push_str("pg_ax.set_xlabel(\"k\")\n");
    s.push_str("fig.tight_layout()\n\n");
    s.push_str("if len(sys.argv) > 1:\n");
    s.push_str("    fig.savefig(sys.argv[1])\n");
    s.push_str("else:\n");
    s.push_str("    plt.show()\n");
    s
}
