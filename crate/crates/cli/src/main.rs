//! `popforge` command-line front end.
//!
//! Exit codes: 0 success, 1 verdict mismatch, 2 input error, 3 state-space
//! cap hit.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use popforge::analysis::{
    explore_post, lemma_oracle_suite, simulate_seeds, verify_artifact, Level, SimOptions, VerifyOptions, DEFAULT_CAP,
};
use popforge::construction::{build_example_program, build_threshold_program, level_constant, threshold_k};
use popforge::lowering::lower;
use popforge::machine::Machine;
use popforge::program::{Program, ProgramSemantics};
use popforge::protocol::{compile_protocol, Protocol, ProtocolSemantics};
use popforge::{canonical_json, pow2_tower, Output, Predicate};

#[derive(Parser)]
#[command(name = "popforge", version, about = "Build, lower, compile and verify population programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Threshold,
    Example,
}


#[derive(Subcommand)]
enum Cmd {
    /// Write a program: the n-level threshold construction or the range example.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lower a program to a population machine.
    Lower {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the lowering map here.
        #[arg(long)]
        emit_map: Option<PathBuf>,
    },
    /// Compile a machine to a population protocol.
    Compile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Print transition counts per schema row.
        #[arg(long)]
        stats: bool,
    },
    /// Check the decided predicate for every population size in a range.
    Verify {
        /// `program`, `machine` or `protocol`.
        #[arg(long)]
        level: Level,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        m_min: u64,
        #[arg(long)]
        m_max: u64,
        /// `threshold:k`, `range:lo:hi` or `shifted:k0:<predicate>`.
        #[arg(long)]
        expect: String,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random runs of a protocol under the uniform pair scheduler.
    Simulate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        m: u64,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        #[arg(long, default_value_t = 100_000_000)]
        max_steps: u64,
        #[arg(long, default_value_t = 2_000_000)]
        window: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Post-set of one procedure from a register configuration.
    Post {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        proc: String,
        /// Comma-separated `register=count`; unnamed registers are 0.
        #[arg(long, default_value = "")]
        regs: String,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the procedure lemmas of the threshold construction.
    Lemmas {
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long, default_value_t = 5)]
        max_total: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Level constants, thresholds and the tower bound.
    Constants {
        #[arg(long, default_value_t = 6)]
        n: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Input(String),
    Mismatch,
    Truncated,
}

impl From<popforge::Error> for Failure {
    fn from(e: popforge::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Serialize)]
struct RunManifest {
    subcommand: &'static str,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    parameters: Map<String, Value>,
    tool_version: &'static str,
    seconds: f64,
}

struct Run {
    manifest: RunManifest,
    t0: Instant,
}

impl Run {
    fn new(subcommand: &'static str) -> Self {
        Run {
            manifest: RunManifest {
                subcommand,
                inputs: Vec::new(),
                outputs: Vec::new(),
                parameters: Map::new(),
                tool_version: env!("CARGO_PKG_VERSION"),
                seconds: 0.0,
            },
            t0: Instant::now(),
        }
    }

    fn param(&mut self, key: &str, v: impl Serialize) {
        self.manifest.parameters.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        self.manifest.inputs.push(path.to_path_buf());
        fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    }

    fn write(&mut self, path: &Path, text: &str) -> CmdResult {
        self.manifest.outputs.push(path.to_path_buf());
        fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    }

    fn write_json(&mut self, path: &Path, v: &impl Serialize) -> CmdResult {
        let text = canonical_json(v)?;
        self.write(path, &text)
    }

    /// Writes `<first output>.manifest.json` when there is an output file.
    fn finish(mut self) -> CmdResult {
        self.manifest.seconds = self.t0.elapsed().as_secs_f64();
        let Some(first) = self.manifest.outputs.first() else {
            return Ok(());
        };
        let mut path = first.clone().into_os_string();
        path.push(".manifest.json");
        let text = canonical_json(&self.manifest)?;
        fs::write(&path, text).map_err(|e| Failure::Input(format!("{}: {e}", Path::new(&path).display())))
    }
}

fn print_json(v: &impl Serialize) -> CmdResult {
    print!("{}", canonical_json(v)?);
    Ok(())
}

fn generate(kind: Kind, n: u32, out: &Path) -> CmdResult {
    let mut run = Run::new("generate");
    run.param("kind", kind);
    let (program, constants) = match kind {
        Kind::Threshold => {
            if n == 0 {
                return Err(Failure::Input("n must be at least 1".into()));
            }
            run.param("n", n);
            let levels: Vec<String> = (1..=n).map(|i| level_constant(i).to_string()).collect();
            (build_threshold_program(n), json!({ "N": levels, "k": threshold_k(n).to_string() }))
        }
        Kind::Example => (build_example_program(), json!({})),
    };
    run.write(out, &program.to_json())?;
    print_json(&json!({ "size": program.size(), "constants": constants }))?;
    run.finish()
}

fn read_program(run: &mut Run, path: &Path) -> Result<Program, Failure> {
    let p = Program::from_json(&run.read(path)?)?;
    p.check()?;
    Ok(p)
}

fn read_machine(run: &mut Run, path: &Path) -> Result<Machine, Failure> {
    let m = Machine::from_json(&run.read(path)?)?;
    m.check()?;
    Ok(m)
}

fn cmd_lower(input: &Path, out: &Path, emit_map: Option<&Path>) -> CmdResult {
    let mut run = Run::new("lower");
    let p = read_program(&mut run, input)?;
    let (m, map) = lower(&p)?;
    run.write(out, &m.to_json()?)?;
    if let Some(path) = emit_map {
        run.write_json(path, &map)?;
    }
    let (ps, ms) = (p.size(), m.size());
    print_json(&json!({
        "program_size": ps,
        "machine_size": ms,
        "ratio": ms.total as f64 / ps.total as f64,
    }))?;
    run.finish()
}

fn cmd_compile(input: &Path, out: &Path, stats: bool) -> CmdResult {
    let mut run = Run::new("compile");
    run.param("stats", stats);
    let m = read_machine(&mut run, input)?;
    let c = compile_protocol(&m)?;
    run.write(out, &c.protocol.to_json()?)?;
    let mut report = json!({ "stats": c.stats, "overlaps": c.overlaps });
    if stats {
        let rows: Vec<Value> =
            c.rows.iter().map(|(k, n)| json!({ "schema": k.schema, "row": k.row, "param": k.param, "transitions": n })).collect();
        report["rows"] = Value::Array(rows);
    }
    print_json(&report)?;
    run.finish()
}

fn cmd_verify(level: Level, input: &Path, m_min: u64, m_max: u64, expect: &str, cap: usize, out: Option<&Path>) -> CmdResult {
    let mut run = Run::new("verify");
    run.param("level", level);
    run.param("m_min", m_min);
    run.param("m_max", m_max);
    run.param("expect", expect);
    run.param("cap", cap);
    let expected: Predicate = expect.parse()?;
    let opts = VerifyOptions { cap, ..VerifyOptions::default() };
    let ms: Vec<u64> = (m_min..=m_max).collect();
    let text = run.read(input)?;
    let report = verify_artifact(level, &text, &ms, &expected, opts)?;
    for r in &report.per_m {
        let verdict = match (r.truncated, r.verdict) {
            (true, _) => "truncated".to_string(),
            (false, Some(v)) => serde_json::to_value(v).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default(),
            (false, None) => "differs-by-initial".to_string(),
        };
        let status = if r.matches { "ok" } else { "MISMATCH" };
        println!("m={:<4} expected={:<5} verdict={verdict:<18} nodes={:<9} {status}", r.m, r.expected, r.nodes);
    }
    if let Some(path) = out {
        run.write_json(path, &report)?;
    }
    run.finish()?;
    if report.any_truncated() {
        Err(Failure::Truncated)
    } else if report.all_match() {
        Ok(())
    } else {
        Err(Failure::Mismatch)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(input: &Path, m: u64, seeds: u64, first_seed: u64, max_steps: u64, window: u64, out: Option<&Path>) -> CmdResult {
    let mut run = Run::new("simulate");
    for (k, v) in [("m", m), ("seeds", seeds), ("first_seed", first_seed), ("max_steps", max_steps), ("window", window)] {
        run.param(k, v);
    }
    if m < 2 {
        return Err(Failure::Input("simulation needs at least 2 agents".into()));
    }
    let p = Protocol::from_json(&run.read(input)?)?;
    let sem = ProtocolSemantics::new(&p)?;
    let c0 = sem.initial_config(m)?;
    let results = simulate_seeds(&sem, &c0, first_seed..first_seed + seeds, SimOptions { max_steps, window });
    for r in &results {
        println!(
            "seed={:<6} output={:<9} converged={:<5} last_change={:<12} steps={}",
            r.seed,
            format!("{:?}", r.output),
            r.converged,
            r.last_change,
            r.steps
        );
    }
    let count = |o: Output| results.iter().filter(|r| r.converged && r.output == o).count();
    let summary = json!({
        "runs": results.len(),
        "converged_true": count(Output::True),
        "converged_false": count(Output::False),
        "converged_fraction": results.iter().filter(|r| r.converged).count() as f64 / results.len().max(1) as f64,
    });
    println!("{summary}");
    if let Some(path) = out {
        run.write_json(path, &json!({ "runs": results, "summary": summary }))?;
    }
    run.finish()
}

fn parse_regs(p: &Program, text: &str) -> Result<Vec<u64>, Failure> {
    let mut regs = vec![0; p.registers.len()];
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, count) = part.split_once('=').ok_or_else(|| Failure::Input(format!("expected name=count, got `{part}`")))?;
        let i = p.register_index(name.trim()).ok_or_else(|| Failure::Input(format!("unknown register `{name}`")))?;
        regs[i] = count.trim().parse().map_err(|_| Failure::Input(format!("bad count in `{part}`")))?;
    }
    Ok(regs)
}

fn cmd_post(input: &Path, proc: &str, regs: &str, cap: usize, out: Option<&Path>) -> CmdResult {
    let mut run = Run::new("post");
    run.param("proc", proc);
    run.param("regs", regs);
    run.param("cap", cap);
    let p = read_program(&mut run, input)?;
    let c = parse_regs(&p, regs)?;
    let sem = ProgramSemantics::new(&p)?;
    let post = match explore_post(&sem, proc, &c, cap) {
        Err(popforge::Error::CapExceeded { .. }) => return Err(Failure::Truncated),
        other => other?,
    };
    let v = post.to_json(&p.registers);
    print_json(&v)?;
    if let Some(path) = out {
        run.write_json(path, &v)?;
    }
    run.finish()
}

fn cmd_lemmas(n: u32, max_total: u64, out: Option<&Path>) -> CmdResult {
    let mut run = Run::new("lemmas");
    run.param("n", n);
    run.param("max_total", max_total);
    let r = lemma_oracle_suite(n, max_total)?;
    println!("configurations: {}", r.configs);
    for (clause, k) in &r.checked {
        println!("  {clause:<9} {k} checks");
    }
    println!("returns that leave high for proper: {}", r.proper_exits.len());
    if let Some(cx) = r.counterexamples.first() {
        println!("first counterexample: {}", serde_json::to_string(cx).unwrap_or_default());
    }
    println!("counterexamples: {}", r.counterexamples.len());
    if let Some(path) = out {
        run.write_json(path, &r)?;
    }
    run.finish()?;
    if r.passed() {
        Ok(())
    } else {
        Err(Failure::Mismatch)
    }
}

fn cmd_constants(n: u32, out: Option<&Path>) -> CmdResult {
    let mut run = Run::new("constants");
    run.param("n", n);
    if n == 0 {
        return Err(Failure::Input("n must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for i in 1..=n {
        let k = threshold_k(i);
        let tower = pow2_tower(i)?;
        rows.push(json!({
            "n": i,
            "N": level_constant(i).to_string(),
            "k": k.to_string(),
            "tower_bits": tower.bits(),
            "k_at_least_tower": k >= tower,
        }));
    }
    print_json(&rows)?;
    if let Some(path) = out {
        run.write_json(path, &rows)?;
    }
    run.finish()
}

fn configure_threads() {
    if let Some(n) = std::env::var("POPFORGE_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    configure_threads();
    let result = match &cli.cmd {
        Cmd::Generate { kind, n, out } => generate(*kind, *n, out),
        Cmd::Lower { input, out, emit_map } => cmd_lower(input, out, emit_map.as_deref()),
        Cmd::Compile { input, out, stats } => cmd_compile(input, out, *stats),
        Cmd::Verify { level, input, m_min, m_max, expect, cap, out } => {
            cmd_verify(*level, input, *m_min, *m_max, expect, *cap, out.as_deref())
        }
        Cmd::Simulate { input, m, seeds, first_seed, max_steps, window, out } => {
            cmd_simulate(input, *m, *seeds, *first_seed, *max_steps, *window, out.as_deref())
        }
        Cmd::Post { input, proc, regs, cap, out } => cmd_post(input, proc, regs, *cap, out.as_deref()),
        Cmd::Lemmas { n, max_total, out } => cmd_lemmas(*n, *max_total, out.as_deref()),
        Cmd::Constants { n, out } => cmd_constants(*n, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Truncated) => {
            eprintln!("error: state-space cap reached");
            ExitCode::from(3)
        }
    }
}
