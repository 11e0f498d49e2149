//! `bsntt` command line.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::engine::Engine;
use crate::faultsim::{run_campaign, CampaignConfig};
use crate::field::Poly;
use crate::netlist::{emit_program, gate_histogram, CircuitKind, GateHistogram};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DETECTED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bsntt", version, about = "Bit-sliced NTT, circuit emission and fault campaigns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolyFormat {
    Json,
    Binary,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward (or inverse) transform of one polynomial.
    Ntt {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        inverse: bool,
        /// Use the redundant pipeline; exit status 2 when a fault is detected.
        #[arg(long)]
        protected: bool,
        #[arg(long, value_enum, default_value_t = PolyFormat::Json)]
        format: PolyFormat,
    },
    /// Negacyclic product of two polynomials.
    Polymul {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PolyFormat::Json)]
        format: PolyFormat,
    },
    /// Emits a circuit as program text.
    Gencode {
        #[arg(long, value_parser = CircuitKind::from_str)]
        circuit: CircuitKind,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Writes the gate histogram as JSON.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Runs a fault campaign described by a JSON config.
    Campaign {
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Worker threads; 0 picks the default.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Debug, Serialize)]
struct HistogramFile {
    circuit: String,
    #[serde(flatten)]
    counts: GateHistogram,
    total: usize,
}

/// Writes through a temporary file in the destination directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), String> {
    match path {
        Some(p) => write_atomic(p, bytes).map_err(|e| format!("{}: {e}", p.display())),
        None => io::stdout().write_all(bytes).map_err(|e| e.to_string()),
    }
}

fn read_poly(path: &Path) -> Result<Poly, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Poly::parse_any(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn encode(poly: &Poly, format: PolyFormat) -> Vec<u8> {
    match format {
        PolyFormat::Json => poly.to_json().into_bytes(),
        PolyFormat::Binary => poly.to_bytes(),
    }
}

/// Runs a parsed command, returning the exit status.
pub fn execute(cli: Cli) -> Result<i32, String> {
    let engine = Engine::shared();
    match cli.command {
        Command::Ntt { input, output, inverse, protected, format } => {
            let a = read_poly(&input)?;
            let (value, detected) = match (protected, inverse) {
                (false, false) => (engine.ntt256(&a), false),
                (false, true) => (engine.intt256(&a), false),
                (true, false) => {
                    let r = engine.protected_ntt256(&a);
                    (r.value, r.fault_detected)
                }
                (true, true) => {
                    let r = engine.protected_intt256(&a);
                    (r.value, r.fault_detected)
                }
            };
            emit(output.as_deref(), &encode(&value, format))?;
            if detected {
                eprintln!("fault detected");
                return Ok(EXIT_DETECTED);
            }
        }
        Command::Polymul { a, b, output, format } => {
            let c = engine.poly_mul(&read_poly(&a)?, &read_poly(&b)?);
            emit(output.as_deref(), &encode(&c, format))?;
        }
        Command::Gencode { circuit, output, histogram } => {
            let netlist = circuit.build();
            emit(output.as_deref(), emit_program(&netlist).as_bytes())?;
            if let Some(path) = histogram {
                let counts = gate_histogram(&netlist);
                let file = HistogramFile { circuit: circuit.name().into(), counts, total: counts.total() };
                let text = serde_json::to_string_pretty(&file).map_err(|e| e.to_string())?;
                emit(Some(&path), text.as_bytes())?;
            }
        }
        Command::Campaign { config, seed, json, csv, threads } => {
            let text = fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            let mut cfg = CampaignConfig::from_json(&text).map_err(|e| e.to_string())?;
            cfg.seed = seed;
            let report = with_threads(threads, || run_campaign(&cfg))?.map_err(|e| e.to_string())?;
            if json.is_none() && csv.is_none() {
                emit(None, report.to_json().as_bytes())?;
            }
            if let Some(p) = json {
                emit(Some(&p), report.to_json().as_bytes())?;
            }
            if let Some(p) = csv {
                emit(Some(&p), report.to_csv().as_bytes())?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, String> {
    Ok(f())
}

/// Parses `args` (program name first) and runs; usage errors map to 1.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}
