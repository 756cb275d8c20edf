//! The `tqc` command line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::parse_circuit;
use crate::compiler::compile;
use crate::geometry::{extents, temporal_extent, volume, BraidGeometry};
use crate::obj::export_obj;
use crate::optimizer::{compact, run_plan, CompactionConfig, Strategy};
use crate::resources::{estimate, ResourceParams, DEFAULT_CYCLE_TIME, DEFAULT_QUBITS_PER_UNIT_CELL};
use crate::scene::{
    read_plan, read_scene_document, sha256_hex, write_atomic, write_plan, write_scene_document, Provenance,
    SceneDocument,
};
use crate::semantics::run_shot;
use crate::topology::compute_signature;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "tqc", version, about = "Compile circuits to defect braids and compact them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Greedy,
    Anneal,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile a circuit file to a scene.
    Compile {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compact a scene by search, or by replaying a plan.
    Optimize {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "greedy")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        /// Write the moves taken.
        #[arg(long = "emit-plan")]
        emit_plan: Option<PathBuf>,
        /// Replay this plan instead of searching.
        #[arg(long, conflicts_with_all = ["strategy", "max_iter"])]
        plan: Option<PathBuf>,
        #[arg(long = "relax-injection")]
        relax_injection: bool,
    },
    /// Compare linking signatures; succeeds iff they are equal.
    Verify { a: PathBuf, b: PathBuf },
    /// Print size and resource estimates.
    Stats {
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        d: u64,
        #[arg(long, default_value_t = DEFAULT_QUBITS_PER_UNIT_CELL)]
        qpuc: u64,
        #[arg(long = "cycle-time", default_value_t = DEFAULT_CYCLE_TIME)]
        cycle_time: f64,
    },
    /// Write a Wavefront OBJ mesh.
    Export {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Sample measurement outcomes of a circuit.
    Simulate {
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load_scene(path: &Path) -> Result<SceneDocument, Failure> {
    read_scene_document(&read(path)?).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    write_atomic(path, bytes).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

/// Run with `argv` (program name first), writing to `out` and `err`.
pub fn run_with(argv: &[String], out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

pub fn run(argv: &[String]) -> i32 {
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn execute(cmd: Command, out: &mut dyn std::io::Write) -> Result<i32, Failure> {
    match cmd {
        Command::Compile { input, output } => {
            let bytes = read(&input)?;
            let text = String::from_utf8(bytes.clone()).map_err(|e| Failure(format!("{}: {e}", input.display())))?;
            let circuit = parse_circuit(&text).map_err(|e| Failure(format!("{}: {e}", input.display())))?;
            let g = compile(&circuit)?;
            let prov = Provenance { source_sha256: Some(sha256_hex(&bytes)), plan_sha256: None };
            write(&output, &write_scene_document(&SceneDocument::new(&g, Some(prov))))?;
            writeln!(out, "volume\t{}", volume(&g))?;
        }
        Command::Optimize { input, output, strategy, seed, max_iter, emit_plan, plan, relax_injection } => {
            let doc = load_scene(&input)?;
            let g = doc.geometry();
            let mut prov = doc.provenance.clone().unwrap_or_default();
            let (result, moves) = if let Some(path) = plan {
                let bytes = read(&path)?;
                let p = read_plan(&bytes).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
                prov.plan_sha256 = Some(sha256_hex(&bytes));
                (run_plan(&g, &p)?, p)
            } else {
                let mut cfg = CompactionConfig {
                    strategy: match strategy {
                        StrategyArg::Greedy => Strategy::Greedy,
                        StrategyArg::Anneal => Strategy::Anneal,
                    },
                    seed,
                    relax_injection,
                    ..CompactionConfig::default()
                };
                if let Some(k) = max_iter {
                    cfg.max_iterations = k;
                }
                let (r, p) = compact(&g, &cfg)?;
                prov.plan_sha256 = Some(sha256_hex(&write_plan(&p)));
                (r, p)
            };
            write(&output, &write_scene_document(&SceneDocument::new(&result, Some(prov))))?;
            if let Some(path) = emit_plan {
                write(&path, &write_plan(&moves))?;
            }
            writeln!(out, "volume\t{}\t{}", volume(&g), volume(&result))?;
            writeln!(out, "temporal_extent\t{}\t{}", temporal_extent(&g), temporal_extent(&result))?;
            writeln!(out, "moves\t{}", moves.steps.len())?;
        }
        Command::Verify { a, b } => {
            let sa = compute_signature(&load_scene(&a)?.geometry())?;
            let sb = compute_signature(&load_scene(&b)?.geometry())?;
            write!(out, "# {}\n{}# {}\n{}", a.display(), sa.to_tsv(), b.display(), sb.to_tsv())?;
            if sa != sb {
                writeln!(out, "signatures differ")?;
                return Ok(EXIT_FAILURE);
            }
            writeln!(out, "signatures equal")?;
        }
        Command::Stats { input, d, qpuc, cycle_time } => {
            let g: BraidGeometry = load_scene(&input)?.geometry();
            let params = ResourceParams { d, qubits_per_unit_cell: qpuc, cycle_time };
            let e = estimate(&g, &params)?;
            let [x, y, t] = extents(&g);
            writeln!(out, "extents\t{x}\t{y}\t{t}")?;
            writeln!(out, "strands\t{}", g.strands.len())?;
            writeln!(out, "path_length\t{}", g.total_path_length())?;
            write!(out, "{}", e.to_tsv())?;
        }
        Command::Export { input, output } => {
            let g = load_scene(&input)?.geometry();
            write(&output, export_obj(&g).as_bytes())?;
        }
        Command::Simulate { input, shots, seed } => {
            let bytes = read(&input)?;
            let text = String::from_utf8(bytes).map_err(|e| Failure(format!("{}: {e}", input.display())))?;
            let circuit = parse_circuit(&text).map_err(|e| Failure(format!("{}: {e}", input.display())))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            let mut names = Vec::new();
            for _ in 0..shots {
                let outcome = run_shot(&circuit, &mut rng)?;
                if names.is_empty() {
                    names = outcome.iter().map(|(q, _)| q.clone()).collect();
                }
                let bits: String = outcome.iter().map(|(_, b)| char::from(b'0' + b)).collect();
                *counts.entry(bits).or_default() += 1;
            }
            writeln!(out, "# {}", names.join(" "))?;
            for (bits, n) in counts {
                let label = if bits.is_empty() { "-" } else { bits.as_str() };
                writeln!(out, "{label}\t{n}\t{:.4}", n as f64 / shots.max(1) as f64)?;
            }
        }
    }
    Ok(EXIT_OK)
}
