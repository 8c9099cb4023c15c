//! The `hoc` command line.
//!
//! Exit codes: `check` returns 0 on accept, 1 on reject, 2 outside the
//! fragment and 3 on I/O or parse errors. `simulate` returns 0 when no
//! counterexample exists within the bounds and 1 when one was found.

pub mod crossval;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corpus::{self, CorpusEntry};
use crate::dsl::parse;
use crate::model::{Fragment, Instance, Outcome};
use crate::sim::{self, explicit, guard_size, Bounds, Witness};
use crate::verdict::{check_consensus_as, explain, Report};

pub use crossval::{crossval, crossval_one, default_checker, Checker, CrossvalOptions, CrossvalRow, CrossvalSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_OUT_OF_FRAGMENT: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "HOC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hoc", version, about = "Consensus checker for Heard-Of algorithms")]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Counting,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Agreement,
    Termination,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// Hand-written entries plus the stamped grid.
    Corpus,
    /// Canonical and rotated predicates over the 6x6x6 grid.
    Grid,
    /// Thresholds at most 1/2.
    Impossible,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide consensus for one instance.
    Check {
        path: PathBuf,
        #[arg(long)]
        json: bool,
        /// Check under another fragment than the detected one.
        #[arg(long)]
        fragment: Option<Fragment>,
    },
    /// Print the full decision trace.
    Explain {
        path: PathBuf,
        #[arg(long)]
        fragment: Option<Fragment>,
    },
    /// Search for agreement violations or non-terminating lassos.
    Simulate {
        path: PathBuf,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        /// Bound on explored phases; unbounded by default for the counting engine.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        max_phases: Option<u64>,
        #[arg(long, value_enum, default_value_t = Engine::Counting)]
        engine: Engine,
        /// Defaults to `both`, or `agreement` for the explicit engine.
        #[arg(long, value_enum)]
        check: Option<CheckKind>,
        /// Write the witness JSON here.
        #[arg(long)]
        witness_out: Option<PathBuf>,
        /// Print witnesses as JSON instead of text.
        #[arg(long)]
        json: bool,
        /// Re-execute a saved witness instead of searching.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Bundled corpus.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Compare checker verdicts with bounded simulation.
    Crossval {
        /// Directory of `.ho` files; a `manifest.json` inside supplies expected verdicts.
        dir: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "dir")]
        builtin: Option<Family>,
        #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
        depth: u64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum CorpusAction {
    /// List entries with expected verdicts.
    List {
        /// Include the stamped grid.
        #[arg(long)]
        all: bool,
    },
    /// Compare every entry against its golden verdict.
    Check,
    /// Write the stamped grid as `.ho` files plus a manifest.
    Stamp { dir: PathBuf },
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

macro_rules! say {
    ($w:expr, $($arg:tt)*) => {{
        let _ = writeln!($w, $($arg)*);
    }};
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match CliConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    configure_threads();
    let mut io = Io { out, err };
    match cfg.command {
        Command::Check { path, json, fragment } => cmd_check(&path, json, fragment, &mut io),
        Command::Explain { path, fragment } => cmd_explain(&path, fragment, &mut io),
        Command::Simulate { path, n, max_phases, engine, check, witness_out, json, replay } => {
            let opts = SimulateOptions {
                n: n as usize,
                max_phases: max_phases.map(|d| d as usize),
                engine,
                check: check.unwrap_or(if engine == Engine::Explicit { CheckKind::Agreement } else { CheckKind::Both }),
                witness_out,
                json,
            };
            match replay {
                Some(w) => cmd_replay(&path, &w, &mut io),
                None => cmd_simulate(&path, &opts, &mut io),
            }
        }
        Command::Corpus { action } => match action {
            CorpusAction::List { all } => cmd_corpus_list(all, &mut io),
            CorpusAction::Check => cmd_corpus_check(&mut io),
            CorpusAction::Stamp { dir } => cmd_corpus_stamp(&dir, &mut io),
        },
        Command::Crossval { dir, builtin, n, depth, json } => {
            let opts = CrossvalOptions { max_n: n as usize, depth: depth as usize };
            cmd_crossval(dir.as_deref(), builtin, opts, json, default_checker(), &mut io)
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_from(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn configure_threads() {
    let Some(k) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) else {
        return;
    };
    if k > 0 {
        // Already built when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
}

fn load(path: &Path, io: &mut Io) -> Option<Instance> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            say!(io.err, "error: cannot read {}: {e}", path.display());
            return None;
        }
    };
    match parse(&text) {
        Ok(inst) => Some(inst),
        Err(e) => {
            say!(io.err, "error: {}:{e}", path.display());
            if !e.expected.is_empty() {
                say!(io.err, "  expected one of: {}", e.expected.join(", "));
            }
            let line = text.lines().nth(e.span.line.saturating_sub(1)).unwrap_or("");
            say!(io.err, "  | {line}");
            say!(io.err, "  | {}^", " ".repeat(e.span.column.saturating_sub(1)));
            None
        }
    }
}

fn outcome_code(o: Outcome) -> i32 {
    match o {
        Outcome::Accept => EXIT_OK,
        Outcome::Reject => EXIT_REJECT,
        Outcome::OutOfFragment => EXIT_OUT_OF_FRAGMENT,
    }
}

pub fn cmd_check_instance(inst: &Instance, json: bool, fragment: Option<Fragment>) -> (i32, String) {
    let (v, trace) = check_consensus_as(inst, fragment);
    let text = if json {
        Report::from_trace(&trace).to_json()
    } else {
        let reasons: Vec<String> = v.reasons().iter().map(|r| r.code()).collect();
        let mut s = format!(
            "{}: {} ({} fragment, condition {})",
            trace.algorithm,
            v.outcome(),
            trace.fragment,
            trace.condition
        );
        if !reasons.is_empty() {
            s.push_str(&format!("\n  reasons: {}", reasons.join(", ")));
        }
        if let Some((i, j)) = trace.witness_pair {
            s.push_str(&format!("\n  unifier at sporadic {i}, decider at sporadic {j}"));
        }
        s
    };
    (outcome_code(v.outcome()), text)
}

fn cmd_check(path: &Path, json: bool, fragment: Option<Fragment>, io: &mut Io) -> i32 {
    let Some(inst) = load(path, io) else { return EXIT_ERROR };
    let (code, text) = cmd_check_instance(&inst, json, fragment);
    say!(io.out, "{text}");
    code
}

fn cmd_explain(path: &Path, fragment: Option<Fragment>, io: &mut Io) -> i32 {
    let Some(inst) = load(path, io) else { return EXIT_ERROR };
    let (_, trace) = check_consensus_as(&inst, fragment);
    let _ = write!(io.out, "{}", explain(&trace));
    EXIT_OK
}

struct SimulateOptions {
    n: usize,
    max_phases: Option<usize>,
    engine: Engine,
    check: CheckKind,
    witness_out: Option<PathBuf>,
    json: bool,
}

const EXPLICIT_DEFAULT_DEPTH: usize = 3;

fn cmd_simulate(path: &Path, opts: &SimulateOptions, io: &mut Io) -> i32 {
    let Some(inst) = load(path, io) else { return EXIT_ERROR };
    match opts.engine {
        Engine::Counting => simulate_counting(&inst, opts, io),
        Engine::Explicit => simulate_explicit(&inst, opts, io),
    }
}

fn bounds_text(n: usize, d: Option<usize>) -> String {
    match d {
        Some(d) => format!("n = {n}, at most {d} phases"),
        None => format!("n = {n}, all reachable configurations"),
    }
}

fn simulate_counting(inst: &Instance, opts: &SimulateOptions, io: &mut Io) -> i32 {
    if let Err(e) = guard_size(opts.n, inst.alg().timestamps()) {
        say!(io.err, "error: {e}");
        return EXIT_ERROR;
    }
    let bounds = Bounds { n: opts.n, max_phases: opts.max_phases };
    let bt = bounds_text(opts.n, opts.max_phases);
    let mut found: Option<Witness> = None;
    if matches!(opts.check, CheckKind::Agreement | CheckKind::Both) {
        match sim::check_agreement(inst, bounds) {
            Some(w) => found = Some(w),
            None => say!(io.out, "agreement: no violation ({bt})"),
        }
    }
    if found.is_none() && matches!(opts.check, CheckKind::Termination | CheckKind::Both) {
        match sim::check_termination(inst, bounds) {
            Some(w) => found = Some(w),
            None => say!(io.out, "termination: no lasso ({bt})"),
        }
    }
    let Some(w) = found else { return EXIT_OK };
    if opts.json {
        say!(io.out, "{}", w.to_json());
    } else {
        let _ = write!(io.out, "{}", w.summary());
    }
    if let Some(p) = &opts.witness_out {
        if let Err(e) = std::fs::write(p, w.to_json() + "\n") {
            say!(io.err, "error: cannot write {}: {e}", p.display());
            return EXIT_ERROR;
        }
    }
    EXIT_REJECT
}

fn simulate_explicit(inst: &Instance, opts: &SimulateOptions, io: &mut Io) -> i32 {
    if opts.check != CheckKind::Agreement {
        say!(io.err, "error: the explicit engine checks agreement only; use --check agreement");
        return EXIT_ERROR;
    }
    let depth = opts.max_phases.unwrap_or(EXPLICIT_DEFAULT_DEPTH);
    let reps = match explicit::representatives(inst.alg(), inst.spec().global(), opts.n, depth) {
        Ok(r) => r,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let bt = bounds_text(opts.n, Some(depth));
    match reps.iter().filter(|(c, _)| c.disagrees()).min_by_key(|(c, (_, d))| (*d, (*c).clone())) {
        None => {
            say!(io.out, "agreement: no violation ({bt}, explicit engine)");
            EXIT_OK
        }
        Some((cfg, (state, phase))) => {
            say!(io.out, "agreement violation after {phase} phases ({bt}, explicit engine)");
            say!(io.out, "  configuration {cfg}");
            let procs: Vec<String> =
                state.iter().map(|s| format!("(inp {}, ts {}, dec {})", s.inp, s.ts, s.dec)).collect();
            say!(io.out, "  processes {}", procs.join(" "));
            EXIT_REJECT
        }
    }
}

fn cmd_replay(path: &Path, witness: &Path, io: &mut Io) -> i32 {
    let Some(inst) = load(path, io) else { return EXIT_ERROR };
    let text = match std::fs::read_to_string(witness) {
        Ok(t) => t,
        Err(e) => {
            say!(io.err, "error: cannot read {}: {e}", witness.display());
            return EXIT_ERROR;
        }
    };
    let w = match Witness::from_json(&text) {
        Ok(w) => w,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    match sim::replay(&inst, &w) {
        Ok(()) => {
            say!(io.out, "witness replays: {:?} at n = {} over {} phases", w.kind, w.n, w.phases.len());
            EXIT_OK
        }
        Err(e) => {
            say!(io.out, "{e}");
            EXIT_REJECT
        }
    }
}

fn cmd_corpus_list(all: bool, io: &mut Io) -> i32 {
    let entries = if all { corpus::corpus_entries() } else { corpus::bundled().to_vec() };
    let w = entries.iter().map(|e| e.id.len()).max().unwrap_or(2);
    for e in &entries {
        say!(io.out, "{:<w$}  {:<8}  {:<15}  {}", e.id, e.fragment.to_string(), e.expected.to_string(), e.anchor);
    }
    EXIT_OK
}

fn cmd_corpus_check(io: &mut Io) -> i32 {
    let mut bad = 0;
    let entries = corpus::corpus_entries();
    for e in &entries {
        let inst = match e.instance() {
            Ok(i) => i,
            Err(err) => {
                say!(io.out, "{}: {err}", e.id);
                bad += 1;
                continue;
            }
        };
        let (v, _) = check_consensus_as(&inst, None);
        let reasons: Vec<String> = v.reasons().iter().map(|r| r.code()).collect();
        let ok = v.outcome() == e.expected && (e.is_generated() || reasons == e.reasons);
        if !ok {
            bad += 1;
            say!(io.out, "{}: expected {} {:?}, got {} {:?}", e.id, e.expected, e.reasons, v.outcome(), reasons);
        }
    }
    say!(io.out, "{} entries, {} mismatches", entries.len(), bad);
    i32::from(bad > 0)
}

#[derive(Serialize)]
struct StampedManifest<'a> {
    schema_version: u32,
    entries: Vec<StampedEntry<'a>>,
}

#[derive(Serialize)]
struct StampedEntry<'a> {
    id: &'a str,
    file: String,
    fragment: Fragment,
    expected: Outcome,
    reasons: &'a [String],
    anchor: &'a str,
}

fn write_entries(dir: &Path, entries: &[CorpusEntry]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut m = StampedManifest { schema_version: 1, entries: Vec::new() };
    for e in entries {
        let file = format!("{}.ho", e.id);
        std::fs::write(dir.join(&file), &e.source)?;
        m.entries.push(StampedEntry {
            id: &e.id,
            file,
            fragment: e.fragment,
            expected: e.expected,
            reasons: &e.reasons,
            anchor: &e.anchor,
        });
    }
    let json = serde_json::to_string_pretty(&m).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), json + "\n")
}

fn cmd_corpus_stamp(dir: &Path, io: &mut Io) -> i32 {
    let entries = corpus::one_third_entries();
    match write_entries(dir, &entries) {
        Ok(()) => {
            say!(io.out, "wrote {} instances to {}", entries.len(), dir.display());
            EXIT_OK
        }
        Err(e) => {
            say!(io.err, "error: cannot write {}: {e}", dir.display());
            EXIT_ERROR
        }
    }
}

#[derive(serde::Deserialize)]
struct DirManifest {
    entries: Vec<DirManifestEntry>,
}

#[derive(serde::Deserialize)]
struct DirManifestEntry {
    file: String,
    expected: Outcome,
}

/// Instances of `dir` in file-name order, with expected verdicts from its manifest.
fn load_dir(dir: &Path, io: &mut Io) -> Option<Vec<(String, Instance, Option<Outcome>)>> {
    let mut files: BTreeSet<PathBuf> = BTreeSet::new();
    let rd = match std::fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) => {
            say!(io.err, "error: cannot read {}: {e}", dir.display());
            return None;
        }
    };
    for ent in rd.flatten() {
        let p = ent.path();
        if p.extension().is_some_and(|x| x == "ho") {
            files.insert(p);
        }
    }
    let expected: Vec<DirManifestEntry> = match std::fs::read_to_string(dir.join("manifest.json")) {
        Ok(t) => match serde_json::from_str::<DirManifest>(&t) {
            Ok(m) => m.entries,
            Err(e) => {
                say!(io.err, "error: {}: {e}", dir.join("manifest.json").display());
                return None;
            }
        },
        Err(_) => Vec::new(),
    };
    let mut items = Vec::new();
    for p in files {
        let inst = load(&p, io)?;
        let name = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let exp = expected.iter().find(|e| e.file == name).map(|e| e.expected);
        let id = name.trim_end_matches(".ho").to_string();
        items.push((id, inst, exp));
    }
    Some(items)
}

pub fn builtin_items(f: Family) -> Vec<(String, Instance, Option<Outcome>)> {
    let parsed = |e: CorpusEntry, exp: Option<Outcome>| {
        let inst = e.instance().expect("generated instances parse");
        (e.id, inst, exp)
    };
    match f {
        Family::Corpus => corpus::corpus_entries()
            .into_iter()
            .map(|e| {
                let exp = Some(e.expected);
                parsed(e, exp)
            })
            .collect(),
        Family::Grid => corpus::crossval_family().into_iter().map(|(e, o)| parsed(e, o)).collect(),
        Family::Impossible => corpus::impossibility_grid()
            .into_iter()
            .map(|e| {
                let exp = Some(e.expected);
                parsed(e, exp)
            })
            .collect(),
    }
}

fn cmd_crossval(
    dir: Option<&Path>,
    builtin: Option<Family>,
    opts: CrossvalOptions,
    json: bool,
    checker: &Checker,
    io: &mut Io,
) -> i32 {
    let items = match (dir, builtin) {
        (Some(d), _) => match load_dir(d, io) {
            Some(v) => v,
            None => return EXIT_ERROR,
        },
        (None, Some(f)) => builtin_items(f),
        (None, None) => builtin_items(Family::Corpus),
    };
    let summary = crossval(&items, opts, checker);
    if json {
        say!(io.out, "{}", summary.to_json());
    } else {
        let _ = write!(io.out, "{}", summary.table());
    }
    summary.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_from(std::iter::once("hoc").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn rejects_bad_flags() {
        assert_eq!(run(&["simulate", "x.ho", "--n", "1"]).0, EXIT_ERROR);
        assert_eq!(run(&["check"]).0, EXIT_ERROR);
        assert_eq!(run(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn missing_file_is_an_error() {
        let (code, _, err) = run(&["check", "/nonexistent/x.ho"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(err.contains("cannot read"));
    }

    #[test]
    fn corpus_list_and_check() {
        let (code, out, _) = run(&["corpus", "list"]);
        assert_eq!(code, 0);
        assert!(out.contains("paxos-3round-1-3"));
        let (code, out, _) = run(&["corpus", "check"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("0 mismatches"));
    }
}
