use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use bdi_core::bench::{self, GrowthRow, WalkBenchRow};
use bdi_core::executor::{eval_ucq, ExecError};
use bdi_core::running_example;
use bdi_core::workspace::{Workspace, WorkspaceError};
use bdi_core::{rewrite, validate_ontology, Dataset, GrowthStats, ReleaseDescriptor};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

const EXIT_FAILURE: u8 = 1;
const EXIT_VIOLATIONS: u8 = 2;
const EXIT_QUERY: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "bdi", version, about = "Ontology-mediated integration of evolving data sources")]
struct Cli {
    /// Workspace directory.
    #[arg(long, short = 'w', env = "BDI_WORKSPACE", default_value = ".", global = true)]
    workspace: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a workspace whose Global graph is read from a quad file.
    Init {
        /// Target directory (defaults to --workspace).
        dir: Option<PathBuf>,
        /// Quad file holding the Global graph.
        #[arg(long)]
        global: Option<PathBuf>,
    },
    /// Validate and apply release descriptors in order.
    Release {
        #[arg(required = true)]
        descriptors: Vec<PathBuf>,
    },
    /// Check the ontology constraints.
    Validate,
    /// Rewrite an ontology-mediated query and evaluate it over the wrappers.
    Query(QueryArgs),
    /// Quad counts per named graph.
    Stats,
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Write the monitoring example (Global graph, releases, data, queries).
    Example { dir: PathBuf },
}

#[derive(Args)]
struct QueryArgs {
    /// Query file, or `-` for standard input.
    file: PathBuf,
    /// Print each walk in attribute notation.
    #[arg(long)]
    explain: bool,
    /// Print the phase traces.
    #[arg(long, short)]
    verbose: bool,
    /// Rewrite only.
    #[arg(long)]
    no_exec: bool,
    /// Write result rows to this CSV file instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Walk count and time for the worst case, sweeping W = 1..=wrappers.
    Walks {
        #[arg(long, default_value_t = 5)]
        concepts: usize,
        #[arg(long, default_value_t = 10)]
        wrappers: usize,
        /// Minimum timed runs per point.
        #[arg(long, default_value_t = 3)]
        runs: usize,
        /// Keep repeating a point until this many milliseconds have passed.
        #[arg(long, default_value_t = 100)]
        budget_ms: u64,
    },
    /// Replay a directory of release descriptors and report quad growth.
    Growth {
        #[arg(long)]
        releases: PathBuf,
        /// First write a synthetic stream into the directory.
        #[arg(long)]
        synthesize: bool,
        #[arg(long, default_value_t = 1)]
        majors: usize,
        #[arg(long, default_value_t = 14)]
        minors: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let io = error.chain().any(|c| c.is::<io::Error>());
        Failure { code: if io { EXIT_IO } else { EXIT_FAILURE }, error }
    }
}

fn fail(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure { code, error: error.into() }
}

fn ws_failure(e: WorkspaceError) -> Failure {
    let code = if e.is_io() { EXIT_IO } else if matches!(e, WorkspaceError::Invalid(_)) { EXIT_VIOLATIONS } else { EXIT_FAILURE };
    fail(code, e)
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let ws = cli.workspace;
    match cli.command {
        Command::Init { dir, global } => init(dir.as_deref().unwrap_or(&ws), global.as_deref()),
        Command::Release { descriptors } => release(&ws, &descriptors),
        Command::Validate => validate(&ws),
        Command::Query(args) => query(&ws, &args),
        Command::Stats => stats(&ws),
        Command::Bench(BenchCommand::Walks { concepts, wrappers, runs, budget_ms }) => {
            bench_walks(concepts, wrappers, runs, Duration::from_millis(budget_ms))
        }
        Command::Bench(BenchCommand::Growth { releases, synthesize, majors, minors, seed }) => {
            if synthesize {
                synthesize_stream(&releases, majors, minors, seed)?;
            }
            bench_growth(&ws, &releases)
        }
        Command::Example { dir } => {
            running_example::write_to_dir(&dir).with_context(|| format!("writing {}", dir.display()))?;
            println!("wrote example into {}", dir.display());
            Ok(0)
        }
    }
}

fn open(ws: &Path) -> Result<Workspace, Failure> {
    Workspace::open(ws).map_err(ws_failure)
}

fn init(dir: &Path, global: Option<&Path>) -> Outcome {
    let w = Workspace::init(dir, global).map_err(ws_failure)?;
    println!("initialized {} with {} quads", dir.display(), w.dataset.len());
    Ok(0)
}

fn read_descriptor(path: &Path) -> Result<ReleaseDescriptor, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ReleaseDescriptor::from_json(&text).with_context(|| path.display().to_string()).map_err(Failure::from)
}

fn release(ws: &Path, descriptors: &[PathBuf]) -> Outcome {
    let mut w = open(ws)?;
    for path in descriptors {
        let d = read_descriptor(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let stats = w.release(&d, base).map_err(ws_failure)?;
        println!("{}: {stats}", d.wrapper.name);
    }
    w.save().map_err(ws_failure)?;
    Ok(0)
}

fn validate(ws: &Path) -> Outcome {
    let w = open(ws)?;
    let report = validate_ontology(&w.dataset);
    if report.is_ok() {
        println!("ok: {} quads, no violations", w.dataset.len());
        Ok(0)
    } else {
        print!("{}", report.render(w.dataset.prefixes()));
        eprintln!("{} violation(s)", report.violations.len());
        Ok(EXIT_VIOLATIONS)
    }
}

fn query(ws: &Path, args: &QueryArgs) -> Outcome {
    let w = open(ws)?;
    let text = if args.file == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading query from stdin")?;
        s
    } else {
        fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?
    };
    let r = rewrite(&text, &w.dataset).map_err(|e| fail(EXIT_QUERY, e))?;
    let mut out = io::stdout().lock();
    if args.verbose {
        write!(out, "{}", r.trace.render(w.dataset.prefixes()))?;
    }
    let n = r.ucq.len();
    writeln!(out, "# {n} walk{}", if n == 1 { "" } else { "s" })?;
    if args.explain {
        for (i, c) in r.ucq.conjuncts.iter().enumerate() {
            writeln!(out, "walk {}: {}", i + 1, c.walk)?;
        }
    }
    write!(out, "{}", r.ucq)?;
    if args.no_exec {
        return Ok(0);
    }
    let rel = eval_ucq(&r.ucq, &w.bindings()).map_err(|e| {
        let code = if matches!(e, ExecError::Io(_)) { EXIT_IO } else { EXIT_FAILURE };
        fail(code, e)
    })?;
    match &args.output {
        Some(p) => {
            let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            rel.write_csv(f)?;
            writeln!(out, "# {} rows written to {}", rel.len(), p.display())?;
        }
        None => {
            writeln!(out)?;
            write!(out, "{}", rel.to_csv_string())?;
        }
    }
    Ok(0)
}

fn stats(ws: &Path) -> Outcome {
    let w = open(ws)?;
    println!("graph,quads");
    for (g, n) in w.graph_counts() {
        println!("{g},{n}");
    }
    println!("total,{}", w.dataset.len());
    Ok(0)
}

fn bench_walks(concepts: usize, wrappers: usize, runs: usize, budget: Duration) -> Outcome {
    println!("{}", WalkBenchRow::HEADER);
    for wr in 1..=wrappers {
        let row = bench::time_walks(concepts, wr, runs, budget).map_err(|e| fail(EXIT_QUERY, e))?;
        println!("{}", row.csv());
    }
    Ok(0)
}

#[derive(Serialize)]
struct StreamEntry<'a> {
    file: String,
    kind: &'a str,
}

fn synthesize_stream(dir: &Path, majors: usize, minors: usize, seed: u64) -> Result<(), Failure> {
    let s = bench::release_stream(majors, minors, seed);
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("global.quads"), s.global.to_quad_string())?;
    let mut manifest = Vec::new();
    for (i, (d, kind)) in s.releases.iter().zip(&s.kinds).enumerate() {
        let mut d = d.clone();
        d.prefixes.insert("b".into(), bench::BENCH_NS.into());
        let file = format!("{:02}-{}.json", i + 1, d.wrapper.name);
        fs::write(dir.join(&file), d.to_json() + "\n")?;
        manifest.push(StreamEntry { file, kind });
    }
    fs::write(dir.join("stream.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn bench_growth(ws: &Path, dir: &Path) -> Outcome {
    let global = dir.join("global.quads");
    let mut ds = if global.is_file() {
        Dataset::load(&global).with_context(|| global.display().to_string())?
    } else {
        open(ws)?.dataset
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "stream.json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(fail(EXIT_FAILURE, anyhow!("no release descriptors in {}", dir.display())));
    }
    let descriptors = files.iter().map(|p| read_descriptor(p)).collect::<Result<Vec<_>, _>>()?;
    let rows = bench::replay(&mut ds, &descriptors)?;
    println!("{},{}", GrowthRow::HEADER, GrowthStats::header());
    for r in &rows {
        println!("{},{}", r.csv(), r.stats.csv());
    }
    let evolving: Vec<&GrowthRow> = rows.iter().filter(|r| !r.new_source).collect();
    if evolving.len() >= 2 {
        let xs: Vec<f64> = evolving.iter().map(|r| r.index as f64).collect();
        let ys: Vec<f64> = evolving.iter().map(|r| r.cumulative as f64).collect();
        let (slope, _, r2) = bench::linear_fit(&xs, &ys);
        eprintln!("releases over existing sources: {}, slope {slope:.2} quads/release, r2 {r2:.4}", evolving.len());
    }
    Ok(0)
}
