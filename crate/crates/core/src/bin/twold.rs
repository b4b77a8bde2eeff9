//! `twold`: verify, decompose and classify twisted tuples stored as JSON
//! tuple files.
//!
//! Exit codes: 0 success, 1 mathematical failure (a relation fails, the tuple
//! is not isometric, ...), 2 input error (unreadable or malformed file, bad
//! flags). `TWOLD_RESIDUAL_TOL` sets the default residual tolerance.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use twisted_wold::io::{parse_angle, render_json, TupleFile};
use twisted_wold::lattice::Boundary;
use twisted_wold::report::{self, DecomposeRun, Format, VerifyOptions, WoldRun};
use twisted_wold::zoo::{self, PlantedSpec, UMode};
use twisted_wold::{c64, Error, ToleranceProfile};

const TOL_ENV: &str = "TWOLD_RESIDUAL_TOL";

#[derive(Parser)]
#[command(name = "twold", version, about = "Wold-type decompositions of twisted tuples of contractions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Text,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Json => Format::Json,
            OutFormat::Text => Format::Text,
        }
    }
}

#[derive(Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp so reports compare byte for byte.
    #[arg(long)]
    canonical: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the twisted relations; exit 1 names the first failing one.
    Verify {
        path: PathBuf,
        /// Residual tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Window size for lattice files.
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: OutFormat,
        #[command(flatten)]
        output: Output,
    },
    /// Split the space into the 2^n slices and report them.
    Decompose {
        path: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        /// Power cap of the chain cross-check (default 2·dim).
        #[arg(long)]
        m_cap: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: OutFormat,
        /// Decompose even if the relations fail.
        #[arg(long)]
        audit: bool,
        /// Worker threads for slice splitting (default sequential).
        #[arg(long)]
        threads: Option<usize>,
        /// Window size for lattice files.
        #[arg(long, default_value_t = 10)]
        window: usize,
        /// Interior margin for the lattice/dense comparison.
        #[arg(long, default_value_t = 3)]
        margin: i64,
        #[command(flatten)]
        output: Output,
    },
    /// Classify the indices of an isometric lattice tuple by slice.
    Wold {
        path: PathBuf,
        #[arg(long, default_value_t = 8)]
        window: usize,
        /// Orbit walk cap (default 4·window).
        #[arg(long)]
        step_cap: Option<usize>,
        /// Compare with the dense decomposition of the densified tuple.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 3)]
        margin: i64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value = "text")]
        format: OutFormat,
        #[command(flatten)]
        output: Output,
    },
    /// Write a standard instance as a tuple file.
    Zoo {
        #[arg(value_enum)]
        name: ZooName,
        #[command(flatten)]
        params: ZooParams,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ground-truth file for `planted` (default: `<out>.truth.json`).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ZooName {
    /// (M_z1, M_z2 D[U]) with U a phase or the bilateral shift.
    HardyDu,
    /// (B_r ⊗ M_z, M_z ⊗ I); fails the adjoint relation.
    CounterexampleBr,
    /// (A_r ⊗ M_z^α, M_z^α ⊗ I).
    HardyAr,
    /// Clock and shift on C^d with twist ω.
    ClockShift,
    /// Planted block tuple with known slices.
    Planted,
    /// Unweighted shifts on Z_+^p x Z^q.
    Shifts,
}

#[derive(Args)]
struct ZooParams {
    /// Angle, e.g. `0.4pi` (hardy-du: U = e^{iθ}; br/ar: r = e^{iθ}).
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    theta: String,
    /// Use the bilateral shift for U (hardy-du).
    #[arg(long)]
    bilateral: bool,
    /// Weight of M_z^α (hardy-ar).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Number of operators (planted).
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dimension (clock-shift) or largest block dimension (planted).
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Scales of the clock and the shift (clock-shift).
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.7])]
    scales: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    d_plus: usize,
    #[arg(long, default_value_t = 0)]
    d_bi: usize,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::RelationFailure(_)
            | Error::NonIsometricTuple(_)
            | Error::NotAContraction { .. }
            | Error::NotAnIsometry { .. }
            | Error::NotPowerPartialIsometry { .. }
            | Error::ContainmentViolation { .. }
            | Error::ReducingBlowup { .. }
            | Error::Numerical(_) => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn input(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: msg.into(),
    }
}

fn base_tolerance() -> Result<ToleranceProfile, Failure> {
    let base = ToleranceProfile::default();
    match std::env::var(TOL_ENV) {
        Ok(v) => {
            let tol: f64 = v.trim().parse().map_err(|_| input(format!("{TOL_ENV}={v:?} is not a number")))?;
            Ok(base.with_residual_tol(tol)?)
        }
        Err(_) => Ok(base),
    }
}

fn with_flag(base: ToleranceProfile, tol: Option<f64>) -> Result<ToleranceProfile, Failure> {
    Ok(match tol {
        Some(t) => base.with_residual_tol(t)?,
        None => base,
    })
}

fn read(path: &Path) -> Result<(TupleFile, Vec<u8>), Failure> {
    TupleFile::read(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let base = base_tolerance()?;
    match cli.command {
        Command::Verify {
            path,
            tol,
            window,
            format,
            output,
        } => {
            let (file, bytes) = read(&path)?;
            let opts = VerifyOptions {
                tol: with_flag(base, tol)?,
                window,
                canonical: output.canonical,
            };
            let r = report::run_verify(&file, &bytes, &opts)?;
            emit(&r.render(format.into()), &output.out)?;
            match r.first_failure {
                None => Ok(()),
                Some(f) => Err(Failure { code: 1, message: f }),
            }
        }
        Command::Decompose {
            path,
            tol,
            m_cap,
            format,
            audit,
            threads,
            window,
            margin,
            output,
        } => {
            let (file, bytes) = read(&path)?;
            if threads == Some(0) {
                return Err(input("--threads must be positive"));
            }
            let run = DecomposeRun {
                tol: with_flag(base, tol)?,
                m_cap,
                audit,
                threads,
                window,
                margin,
                canonical: output.canonical,
            };
            let r = report::run_decompose(&file, &bytes, &run)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            emit(&r.render(format.into()), &output.out)
        }
        Command::Wold {
            path,
            window,
            step_cap,
            oracle,
            margin,
            tol,
            format,
            output,
        } => {
            let (file, bytes) = read(&path)?;
            let run = WoldRun {
                window,
                step_cap,
                oracle,
                margin,
                tol: with_flag(base, tol)?,
                canonical: output.canonical,
            };
            let r = report::run_wold(&file, &bytes, &run)?;
            emit(&r.render(format.into()), &output.out)
        }
        Command::Zoo {
            name,
            params,
            out,
            truth,
        } => {
            let (file, sidecar) = zoo_file(name, &params, base)?;
            emit(&file.to_json(), &out)?;
            if let Some(sidecar) = sidecar {
                let path = match (truth, &out) {
                    (Some(p), _) => p,
                    (None, Some(o)) => {
                        let mut s = o.clone().into_os_string();
                        s.push(".truth.json");
                        PathBuf::from(s)
                    }
                    (None, None) => return Err(input("planted needs --out or --truth for the ground-truth file")),
                };
                emit(&sidecar, &Some(path))?;
            }
            Ok(())
        }
    }
}

fn zoo_file(name: ZooName, p: &ZooParams, tol: ToleranceProfile) -> Result<(TupleFile, Option<String>), Failure> {
    let theta = parse_angle(&p.theta)?;
    let r = c64::cis(theta);
    let one = c64::new(1.0, 0.0);
    Ok(match name {
        ZooName::HardyDu => {
            let (mode, boundary) = if p.bilateral {
                (UMode::Bilateral, Boundary::PeriodicBilateral)
            } else {
                (UMode::Phase(theta), Boundary::Truncate)
            };
            let t = zoo::hardy_pair_du(one, one, mode, true)?;
            (TupleFile::from_lattice(&t, boundary).with_name("hardy-du"), None)
        }
        ZooName::CounterexampleBr => {
            let t = zoo::counterexample_br(r)?;
            (TupleFile::from_lattice(&t, Boundary::Truncate).with_name("counterexample-br"), None)
        }
        ZooName::HardyAr => {
            let t = zoo::hardy_pair_ar(r, p.alpha, 4)?.lattice;
            (TupleFile::from_lattice(&t, Boundary::Truncate).with_name("hardy-ar"), None)
        }
        ZooName::ClockShift => {
            let t = zoo::clock_shift_tuple(p.dim, &p.scales, None)?;
            (TupleFile::from_dense(&t).with_name("clock-shift"), None)
        }
        ZooName::Shifts => {
            let t = zoo::lattice_shifts(p.d_plus, p.d_bi)?;
            let boundary = if p.d_bi > 0 { Boundary::PeriodicBilateral } else { Boundary::Truncate };
            (TupleFile::from_lattice(&t, boundary).with_name("shifts"), None)
        }
        ZooName::Planted => {
            let spec = PlantedSpec::random(p.n, p.dim.max(1), p.seed);
            let (t, truth) = zoo::planted_tuple(&spec)?;
            let t = t.with_tol(tol)?;
            let file = TupleFile::from_dense(&t).with_name("planted").with_seed(p.seed);
            let slices: Vec<_> = truth
                .iter()
                .enumerate()
                .map(|(mask, b)| {
                    let label = twisted_wold::multi::SliceLabel::new(p.n, mask as u32).map(|l| l.to_string());
                    let cols = b.columns();
                    let rows: Vec<Vec<[f64; 2]>> = (0..cols.nrows())
                        .map(|i| (0..cols.ncols()).map(|j| [cols[(i, j)].re + 0.0, cols[(i, j)].im + 0.0]).collect())
                        .collect();
                    json!({"label": label.unwrap_or_default(), "dim": b.dim(), "basis": rows})
                })
                .collect();
            let blocks: Vec<_> = spec
                .blocks
                .iter()
                .map(|b| json!({"mask": b.mask, "dim": b.dim, "twist_order": b.twist_order}))
                .collect();
            let sidecar = json!({
                "format_version": twisted_wold::io::FORMAT_VERSION,
                "seed": p.seed,
                "n": p.n,
                "dim": t.dim(),
                "blocks": blocks,
                "slices": slices,
            });
            (file, Some(render_json(&sidecar)))
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}: {}", if f.code == 1 { "fail" } else { "error" }, f.message);
            ExitCode::from(f.code)
        }
    }
}
