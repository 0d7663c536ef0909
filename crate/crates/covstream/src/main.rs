use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use covstream::counts::{count_report, CountReport, CountedOp};
use covstream::io::{self, FileError};
use covstream::verify::{self, VerifyConfig};
use covstream::{
    window_init, Backend, CovarianceState, DataMatrix, Error, LdlState, WindowConfig, WindowState,
};

#[derive(Parser)]
#[command(
    name = "covstream",
    about = "Streaming covariance maintenance: rank-k updates, downdates, mixed edits, LDL upkeep",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    CovarianceOnly,
    Ldl,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::CovarianceOnly => Backend::CovarianceOnly,
            BackendArg::Ldl => Backend::Ldl,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a covariance state from an observation file (csv or bin).
    Fit {
        input: PathBuf,
        /// Write the state to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Treat the first CSV line as a header.
        #[arg(long)]
        csv_header: bool,
    },
    /// Fold new observations into a stored state (rank-k update).
    Update {
        state: PathBuf,
        rows: PathBuf,
        /// Write the result here instead of back to the state file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv_header: bool,
    },
    /// Remove observations from a stored state (rank-k downdate).
    Downdate {
        state: PathBuf,
        rows: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv_header: bool,
    },
    /// Add and remove observations in one rank-k pass.
    Mixed {
        state: PathBuf,
        #[arg(long)]
        add: PathBuf,
        #[arg(long)]
        remove: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv_header: bool,
    },
    /// Print the LDL factors of a stored state's covariance.
    Ldl { state: PathBuf },
    /// Solve S·x = b against a stored state's covariance.
    Solve {
        state: PathBuf,
        rhs: PathBuf,
        #[arg(long)]
        csv_header: bool,
    },
    /// Run the sliding-window engine over a stream file; emits per-step
    /// variances (and probe scores) as CSV on standard output.
    Window {
        #[arg(long)]
        width: usize,
        #[arg(long, value_enum, default_value_t = BackendArg::CovarianceOnly)]
        backend: BackendArg,
        #[arg(long)]
        stream: PathBuf,
        /// Observations to Mahalanobis-score against the window each step.
        #[arg(long)]
        score: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        refactor_every: usize,
        #[arg(long, default_value_t = 1e-8)]
        drift_tol: f64,
        #[arg(long)]
        csv_header: bool,
    },
    /// Run the oracle property suites; nonzero exit on any violation.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        cases: usize,
    },
    /// Compare incremental against naive timings, optionally with
    /// instrumented operation counts.
    Bench {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        count_ops: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

enum CliError {
    Op(Error),
    File(FileError),
    Check(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Op(e)
    }
}

impl From<FileError> for CliError {
    fn from(e: FileError) -> Self {
        CliError::File(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(CliError::Op(e)) => {
            eprintln!("error: {}: {}", e.name(), e);
            ExitCode::from(1)
        }
        Err(CliError::File(e)) => {
            eprintln!("file error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Cmd) -> Result<ExitCode, CliError> {
    match cmd {
        Cmd::Fit {
            input,
            out,
            csv_header,
        } => {
            let data = io::read_observations_auto(&input, csv_header)?;
            let state = CovarianceState::from_columns(&data);
            print_state(&state)?;
            if let Some(path) = out {
                io::write_state(&path, &state)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Update {
            state,
            rows,
            out,
            csv_header,
        } => {
            let st = io::read_state(&state)?;
            let y = io::read_observations_auto(&rows, csv_header)?;
            let st2 = st.update(&y)?;
            print_state(&st2)?;
            io::write_state(out.as_deref().unwrap_or(&state), &st2)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Downdate {
            state,
            rows,
            out,
            csv_header,
        } => {
            let st = io::read_state(&state)?;
            let y = io::read_observations_auto(&rows, csv_header)?;
            let st2 = st.downdate(&y)?;
            print_state(&st2)?;
            io::write_state(out.as_deref().unwrap_or(&state), &st2)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Mixed {
            state,
            add,
            remove,
            out,
            csv_header,
        } => {
            let st = io::read_state(&state)?;
            let y_add = io::read_observations_auto(&add, csv_header)?;
            let y_remove = io::read_observations_auto(&remove, csv_header)?;
            let st2 = st.mixed(&y_add, &y_remove)?;
            print_state(&st2)?;
            io::write_state(out.as_deref().unwrap_or(&state), &st2)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Ldl { state } => {
            let st = io::read_state(&state)?;
            let ldl = LdlState::from_covariance(&st)?;
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            let d_fields: Vec<String> =
                ldl.diagonal().iter().map(|&v| io::format_value(v)).collect();
            writeln!(&mut w, "d:{}", d_fields.join(",")).map_err(FileError::Io)?;
            writeln!(&mut w, "l:").map_err(FileError::Io)?;
            io::write_matrix_csv(&mut w, ldl.unit_lower())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Solve {
            state,
            rhs,
            csv_header,
        } => {
            let st = io::read_state(&state)?;
            let b = read_vector(&rhs, st.dim(), csv_header)?;
            let ldl = LdlState::from_covariance(&st)?;
            let x = ldl.solve(&b)?;
            let fields: Vec<String> = x.iter().map(|&v| io::format_value(v)).collect();
            println!("{}", fields.join(","));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Window {
            width,
            backend,
            stream,
            score,
            refactor_every,
            drift_tol,
            csv_header,
        } => {
            if !(drift_tol > 0.0 && drift_tol.is_finite()) {
                return Err(CliError::Check("drift tolerance must be > 0".into()));
            }
            let data = io::read_observations_auto(&stream, csv_header)?;
            if data.cols() < width {
                return Err(CliError::Op(Error::CountTooSmall {
                    need: width,
                    have: data.cols(),
                }));
            }
            let probes = match score {
                Some(path) => Some(io::read_observations_auto(&path, csv_header)?),
                None => None,
            };
            run_window(
                &data,
                width,
                backend.into(),
                refactor_every,
                drift_tol,
                probes.as_ref(),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { seed, cases } => {
            let cfg = VerifyConfig { seed, cases };
            println!("verify: seed={seed} cases={cases}");
            let results = verify::run(&cfg);
            let mut all_ok = true;
            for r in &results {
                if r.passed() {
                    println!(
                        "ok   {:<20} cases={:<5} worst={:.3e}",
                        r.name, r.cases, r.worst_ratio
                    );
                } else {
                    all_ok = false;
                    println!(
                        "FAIL {:<20} cases={:<5} worst={:.3e}",
                        r.name, r.cases, r.worst_ratio
                    );
                    for f in &r.failures {
                        println!("     {f}");
                    }
                }
            }
            if all_ok {
                println!("verify: PASS ({} suites)", results.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verify: FAIL");
                Ok(ExitCode::from(1))
            }
        }
        Cmd::Bench {
            m,
            n,
            k,
            count_ops,
            seed,
        } => {
            if m == 0 || n < 2 || k == 0 {
                return Err(CliError::Check("bench needs m >= 1, n >= 2, k >= 1".into()));
            }
            let t = covstream::timing::bench_timings(m, n, k, seed)?;
            println!("bench: m={m} n={n} k={k} seed={seed}");
            println!(
                "covariance: incremental {:>12.3e} s   naive {:>12.3e} s   speedup {:>8.1}x",
                t.incremental_update_s,
                t.naive_recompute_s,
                t.speedup()
            );
            println!(
                "ldl:        incremental {:>12.3e} s   rebuild {:>10.3e} s   speedup {:>8.1}x",
                t.ldl_update_s,
                t.ldl_rebuild_s,
                t.ldl_speedup()
            );
            if count_ops {
                if n < k + 2 {
                    return Err(CliError::Check("count-ops downdates need n >= k + 2".into()));
                }
                println!();
                for op in [
                    CountedOp::CovUpdate,
                    CountedOp::CovDowndate,
                    CountedOp::LdlUpdate,
                    CountedOp::LdlDowndate,
                ] {
                    let r = count_report(op, m, n, k, seed)?;
                    print_count_report(&r);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_state(state: &CovarianceState) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(&mut w, "count:{}", state.count()).map_err(FileError::Io)?;
    let mean_fields: Vec<String> = state.mean().iter().map(|&v| io::format_value(v)).collect();
    writeln!(&mut w, "mean:{}", mean_fields.join(",")).map_err(FileError::Io)?;
    match state.covariance() {
        Ok(cov) => {
            writeln!(&mut w, "covariance:").map_err(FileError::Io)?;
            io::write_matrix_csv(&mut w, &cov)?;
        }
        Err(_) => {
            writeln!(&mut w, "covariance:undefined (count={})", state.count())
                .map_err(FileError::Io)?;
        }
    }
    Ok(())
}

fn read_vector(path: &Path, m: usize, csv_header: bool) -> Result<Vec<f64>, CliError> {
    let data = io::read_observations_auto(path, csv_header)?;
    // a right-hand side can come in as one m-value row or m one-value rows
    if data.rows() == m && data.cols() == 1 {
        Ok(data.col(0).to_vec())
    } else if data.rows() == 1 && data.cols() == m {
        Ok(data.data().to_vec())
    } else {
        Err(CliError::Op(Error::DimensionMismatch {
            expected: m,
            got: data.rows() * data.cols(),
        }))
    }
}

fn run_window(
    data: &DataMatrix,
    width: usize,
    backend: Backend,
    refactor_every: usize,
    drift_tol: f64,
    probes: Option<&DataMatrix>,
) -> Result<(), CliError> {
    let m = data.rows();
    if let Some(p) = probes {
        if p.rows() != m {
            return Err(CliError::Op(Error::DimensionMismatch {
                expected: m,
                got: p.rows(),
            }));
        }
    }
    let cfg = WindowConfig::new(width, backend)?
        .with_refactor_every(refactor_every)
        .with_drift_tol(drift_tol);
    let initial = DataMatrix::new(m, width, data.data()[..m * width].to_vec())?;
    let mut w = window_init(cfg, &initial)?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut header: Vec<String> = vec!["step".into()];
    header.extend((0..m).map(|i| format!("var_{i}")));
    if let Some(p) = probes {
        header.extend((0..p.cols()).map(|i| format!("score_{i}")));
    }
    writeln!(&mut out, "{}", header.join(",")).map_err(FileError::Io)?;

    emit_window_row(&w, 0, probes, &mut out)?;
    let mut step = 0;
    for j in width..data.cols() {
        step += 1;
        let col = DataMatrix::new(m, 1, data.col(j).to_vec())?;
        w.slide(&col)?;
        emit_window_row(&w, step, probes, &mut out)?;
    }
    let report = w.report();
    eprintln!(
        "window: slides={} scheduled_refactorizations={} drift_refactorizations={} definiteness_recoveries={}",
        report.slides,
        report.scheduled_refactorizations,
        report.drift_refactorizations,
        report.definiteness_recoveries
    );
    Ok(())
}

fn emit_window_row(
    w: &WindowState,
    step: usize,
    probes: Option<&DataMatrix>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let m = w.dim();
    let mut fields = vec![step.to_string()];
    let cov = w.stats().covariance()?;
    for i in 0..m {
        fields.push(io::format_value(cov[(i, i)]));
    }
    if let Some(p) = probes {
        for j in 0..p.cols() {
            fields.push(io::format_value(w.score(p.col(j))?));
        }
    }
    writeln!(out, "{}", fields.join(",")).map_err(FileError::Io)?;
    Ok(())
}

fn print_count_report(r: &CountReport) {
    println!("op: {} (m={} n={} k={})", r.op.label(), r.m, r.n, r.k);
    println!(
        "  incremental measured: mults={:<12} adds={:<12} sqrts={}",
        r.incremental.mults, r.incremental.adds, r.incremental.sqrts
    );
    println!(
        "  incremental formula:  mults={:<12} adds={:<12} sqrts={} total={} (delta {:+})",
        fmt_opt(r.incremental_formula.mults),
        fmt_opt(r.incremental_formula.adds),
        fmt_opt(r.incremental_formula.sqrts),
        r.incremental_formula.total,
        r.incremental_delta()
    );
    println!(
        "  naive measured:       mults={:<12} adds={:<12} sqrts={}",
        r.naive.mults, r.naive.adds, r.naive.sqrts
    );
    println!(
        "  naive formula:        mults={:<12} adds={:<12} sqrts={} total={}",
        fmt_opt(r.naive_formula.mults),
        fmt_opt(r.naive_formula.adds),
        fmt_opt(r.naive_formula.sqrts),
        r.naive_formula.total
    );
}

fn fmt_opt(v: Option<u64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "-".to_string(),
    }
}
