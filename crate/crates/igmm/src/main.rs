//! Command-line frontend: minimize, reduce, verify, stats and a CSV
//! benchmark harness.
//!
//! Exit codes: 0 success, 1 input error, 2 timeout, 3 verification failure.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use igmm::boolset::DEFAULT_MAX_PROPS;
use igmm::format::{self, detect_format, Format};
use igmm::machine::Igmm;
use igmm::reduce::{bisim_quotient, reduce_with_output_assignment};
use igmm::satmin::{minimize, MinimizeError, MinimizeOptions, MinimizeReport};
use igmm::verify::{check_specialization, SpecCheck};

#[derive(Parser)]
#[command(
    name = "igmm",
    version,
    about = "Reduce and minimize incompletely specified generalized Mealy machines"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimize a machine (exact SAT search or a polynomial reduction)
    Minimize(MinimizeCmd),
    /// Apply a polynomial-time reduction
    Reduce(ReduceCmd),
    /// Check that one machine specializes another
    Verify(VerifyCmd),
    /// Print machine statistics
    Stats(StatsCmd),
    /// Run methods over a directory of machines, appending CSV rows
    Bench(BenchCmd),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Auto,
    Kiss2,
    Xkiss,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Sat,
    BisimOa,
    Bisim,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Sat => "sat",
            MethodArg::BisimOa => "bisim-oa",
            MethodArg::Bisim => "bisim",
        }
    }
}

#[derive(Args)]
struct InputOpts {
    /// Input file, or `-` for stdin
    input: String,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    /// Cap on input/output proposition counts
    #[arg(long, default_value_t = DEFAULT_MAX_PROPS)]
    max_props: usize,
}

#[derive(Args)]
struct OutputOpts {
    /// Output file (stdout when omitted)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write KISS2, collapsing each output set to its first cube
    #[arg(long)]
    cube_outputs: bool,
}

#[derive(Args)]
struct MinimizeCmd {
    #[command(flatten)]
    input: InputOpts,
    #[command(flatten)]
    output: OutputOpts,
    #[arg(long, value_enum, default_value_t = MethodArg::Sat)]
    method: MethodArg,
    /// Keep states unreachable from the initial state
    #[arg(long)]
    keep_unreachable: bool,
    /// Wall-clock budget in seconds
    #[arg(long, default_value_t = 1800)]
    timeout_s: u64,
    /// Dump one DIMACS file (plus varmap) per solver call into this directory
    #[arg(long)]
    dimacs_dump: Option<PathBuf>,
    /// SAT branching seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReduceMethodArg {
    BisimOa,
    Bisim,
}

#[derive(Args)]
struct ReduceCmd {
    #[command(flatten)]
    input: InputOpts,
    #[command(flatten)]
    output: OutputOpts,
    #[arg(long, value_enum, default_value_t = ReduceMethodArg::BisimOa)]
    method: ReduceMethodArg,
    #[arg(long)]
    keep_unreachable: bool,
}

#[derive(Args)]
struct VerifyCmd {
    /// Machine whose behaviors must all be allowed
    #[arg(long = "impl")]
    implementation: String,
    /// Machine granting the allowed behaviors
    #[arg(long = "spec")]
    specification: String,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    #[arg(long, default_value_t = DEFAULT_MAX_PROPS)]
    max_props: usize,
}

#[derive(Args)]
struct StatsCmd {
    #[command(flatten)]
    input: InputOpts,
}

#[derive(Args)]
struct BenchCmd {
    /// Directory of machine files
    dir: PathBuf,
    /// CSV file to append to (header written when new or empty)
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = [MethodArg::Sat, MethodArg::BisimOa, MethodArg::Bisim])]
    methods: Vec<MethodArg>,
    /// Per-instance wall-clock budget in seconds
    #[arg(long, default_value_t = 1800)]
    timeout_s: u64,
    /// Parallel worker count
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct CliError {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> CliError {
    CliError {
        code,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("igmm: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Minimize(c) => cmd_minimize(c),
        Cmd::Reduce(c) => cmd_reduce(c),
        Cmd::Verify(c) => cmd_verify(c),
        Cmd::Stats(c) => Ok(println!("{}", load(&c.input)?.stats())),
        Cmd::Bench(c) => cmd_bench(c),
    }
}

fn read_input(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| fail(1, format!("stdin: {e}")))?;
        Ok(text)
    } else {
        fs::read_to_string(path).map_err(|e| fail(1, format!("{path}: {e}")))
    }
}

fn pick_format(arg: FormatArg, text: &str) -> Format {
    match arg {
        FormatArg::Auto => detect_format(text),
        FormatArg::Kiss2 => Format::Kiss2,
        FormatArg::Xkiss => Format::Xkiss,
    }
}

fn load(opts: &InputOpts) -> Result<Igmm, CliError> {
    let text = read_input(&opts.input)?;
    format::parse(&text, pick_format(opts.format, &text), opts.max_props)
        .map_err(|e| fail(1, format!("{}: {e}", opts.input)))
}

fn emit(m: &Igmm, out: &OutputOpts) -> Result<(), CliError> {
    let text = if out.cube_outputs {
        format::write_kiss2(&format::with_cube_outputs(m))
            .expect("collapsed outputs are single cubes")
    } else {
        format::write_xkiss(m)
    };
    match &out.output {
        Some(p) => {
            fs::write(p, text).map_err(|e| fail(1, format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn prune_unless(m: Igmm, keep: bool) -> Igmm {
    if keep {
        m
    } else {
        m.reachable_prune().0
    }
}

fn sat_report(r: &MinimizeReport) -> String {
    format!(
        "sat: {} -> {} states, {} ms, {} vars, {} clauses, {} CEGAR rounds, {}",
        r.input_states,
        r.output_states,
        r.wall.as_millis(),
        r.sat_vars,
        r.sat_clauses,
        r.cegar_rounds,
        r.status
    )
}

fn run_poly(m: &Igmm, method: MethodArg) -> Igmm {
    match method {
        MethodArg::Bisim => bisim_quotient(m),
        MethodArg::BisimOa => reduce_with_output_assignment(m),
        MethodArg::Sat => unreachable!("sat handled separately"),
    }
}

fn cmd_minimize(c: MinimizeCmd) -> Result<(), CliError> {
    let m = load(&c.input)?;
    match c.method {
        MethodArg::Sat => {
            let opts = MinimizeOptions {
                seed: c.seed,
                timeout: Some(Duration::from_secs(c.timeout_s)),
                keep_unreachable: c.keep_unreachable,
                dimacs_dir: c.dimacs_dump.clone(),
                ..Default::default()
            };
            match minimize(&m, &opts) {
                Ok(res) => {
                    eprintln!("{}", sat_report(&res.report));
                    emit(&res.machine, &c.output)
                }
                Err(MinimizeError::Timeout { report }) => {
                    Err(fail(2, sat_report(&report)))
                }
                Err(e) => Err(fail(1, e.to_string())),
            }
        }
        method => {
            let base = prune_unless(m, c.keep_unreachable);
            let start = Instant::now();
            let r = run_poly(&base, method);
            eprintln!(
                "{}: {} -> {} states, {} ms",
                method.name(),
                base.n_states(),
                r.n_states(),
                start.elapsed().as_millis()
            );
            emit(&r, &c.output)
        }
    }
}

fn cmd_reduce(c: ReduceCmd) -> Result<(), CliError> {
    let method = match c.method {
        ReduceMethodArg::Bisim => MethodArg::Bisim,
        ReduceMethodArg::BisimOa => MethodArg::BisimOa,
    };
    let base = prune_unless(load(&c.input)?, c.keep_unreachable);
    let start = Instant::now();
    let r = run_poly(&base, method);
    eprintln!(
        "{}: {} -> {} states, {} ms",
        method.name(),
        base.n_states(),
        r.n_states(),
        start.elapsed().as_millis()
    );
    emit(&r, &c.output)
}

fn cmd_verify(c: VerifyCmd) -> Result<(), CliError> {
    let load_one = |path: &str| -> Result<Igmm, CliError> {
        let text = read_input(path)?;
        format::parse(&text, pick_format(c.format, &text), c.max_props)
            .map_err(|e| fail(1, format!("{path}: {e}")))
    };
    let imp = load_one(&c.implementation)?;
    let spec = load_one(&c.specification)?;
    match check_specialization(&imp, &spec) {
        Ok(SpecCheck::Holds) => {
            println!("specialization holds");
            Ok(())
        }
        Ok(SpecCheck::Fails(ce)) => Err(fail(
            3,
            format!(
                "specialization violated {}",
                ce.describe(spec.inputs(), spec.outputs())
            ),
        )),
        Err(e) => Err(fail(1, e.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

struct BenchRow {
    file: String,
    states: usize,
    in_props: usize,
    out_props: usize,
    method: MethodArg,
    result_states: usize,
    time_ms: u128,
    sat_vars: usize,
    sat_clauses: usize,
    cegar_rounds: usize,
    status: String,
}

impl BenchRow {
    fn line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&self.file),
            self.states,
            self.in_props,
            self.out_props,
            self.method.name(),
            self.result_states,
            self.time_ms,
            self.sat_vars,
            self.sat_clauses,
            self.cegar_rounds,
            self.status
        )
    }
}

fn bench_task(path: &Path, method: MethodArg, timeout: Duration, seed: u64) -> BenchRow {
    let file = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let mut row = BenchRow {
        file,
        states: 0,
        in_props: 0,
        out_props: 0,
        method,
        result_states: 0,
        time_ms: 0,
        sat_vars: 0,
        sat_clauses: 0,
        cegar_rounds: 0,
        status: "error".into(),
    };
    let Ok(text) = fs::read_to_string(path) else {
        return row;
    };
    let Ok(m) = format::parse(&text, detect_format(&text), DEFAULT_MAX_PROPS) else {
        return row;
    };
    row.states = m.n_states();
    row.in_props = m.inputs().arity();
    row.out_props = m.outputs().arity();
    match method {
        MethodArg::Sat => {
            let opts = MinimizeOptions {
                seed,
                timeout: Some(timeout),
                ..Default::default()
            };
            match minimize(&m, &opts) {
                Ok(res) => {
                    row.result_states = res.machine.n_states();
                    row.time_ms = res.report.wall.as_millis();
                    row.sat_vars = res.report.sat_vars;
                    row.sat_clauses = res.report.sat_clauses;
                    row.cegar_rounds = res.report.cegar_rounds;
                    row.status = "ok".into();
                }
                Err(MinimizeError::Timeout { report }) => {
                    row.time_ms = report.wall.as_millis();
                    row.sat_vars = report.sat_vars;
                    row.sat_clauses = report.sat_clauses;
                    row.cegar_rounds = report.cegar_rounds;
                    row.status = "timeout".into();
                }
                Err(_) => {}
            }
        }
        method => {
            if timeout.is_zero() {
                row.status = "timeout".into();
                return row;
            }
            let start = Instant::now();
            let r = run_poly(&m.reachable_prune().0, method);
            row.result_states = r.n_states();
            row.time_ms = start.elapsed().as_millis();
            row.status = "ok".into();
        }
    }
    row
}

fn cmd_bench(c: BenchCmd) -> Result<(), CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(&c.dir)
        .map_err(|e| fail(1, format!("{}: {e}", c.dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let tasks: Vec<(&PathBuf, MethodArg)> = files
        .iter()
        .flat_map(|f| c.methods.iter().map(move |&m| (f, m)))
        .collect();

    let timeout = Duration::from_secs(c.timeout_s);
    let rows: Mutex<Vec<Option<BenchRow>>> = Mutex::new((0..tasks.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..c.jobs.max(1) {
            s.spawn(|| loop {
                let t = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(path, method)) = tasks.get(t) else {
                    break;
                };
                let row = bench_task(path, method, timeout, c.seed);
                rows.lock().unwrap()[t] = Some(row);
            });
        }
    });

    let fresh = fs::metadata(&c.csv).map(|m| m.len() == 0).unwrap_or(true);
    let mut out = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&c.csv)
        .map_err(|e| fail(1, format!("{}: {e}", c.csv.display())))?;
    let mut text = String::new();
    if fresh {
        text.push_str(
            "file,states,in_props,out_props,method,result_states,time_ms,sat_vars,sat_clauses,cegar_rounds,status\n",
        );
    }
    for row in rows.into_inner().unwrap() {
        text.push_str(&row.expect("every task ran").line());
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .map_err(|e| fail(1, format!("{}: {e}", c.csv.display())))
}
