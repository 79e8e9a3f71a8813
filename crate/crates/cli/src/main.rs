use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gmleb::checks::{self, CheckConfig};
use gmleb::estimators::{self, EstimatorSpec, ShrinkageTarget};
use gmleb::io::{format_sig, read_observations, write_fit};
use gmleb::npmle::{self, StopRule};
use gmleb::par::Execution;
use gmleb::simlab::{self, RunOptions};

/// General maximum likelihood empirical Bayes estimation of normal means.
#[derive(Parser)]
#[command(name = "gmleb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the NPMLE of the mixing distribution to a file of observations.
    Fit {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "paper")]
        grid: GridArg,
        /// EM steps for `--stop fixed`.
        #[arg(long, default_value_t = npmle::DEFAULT_EM_ITERATIONS)]
        iters: usize,
        #[arg(long, value_enum, default_value = "fixed")]
        stop: StopArg,
        /// Mixture CSV path; the JSON sidecar goes next to it.
        #[arg(long, default_value = "fit.csv")]
        out: PathBuf,
    },
    /// Denoise a file of observations with one estimator.
    Estimate {
        input: PathBuf,
        #[arg(long, value_enum)]
        estimator: EstimatorArg,
        /// FDR level.
        #[arg(long, default_value_t = 0.1)]
        q: f64,
        /// True means, required by the oracle rule.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario file and write records, aggregates and a markdown table.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Base seed for the file: scenario `i` (from 0) gets seed `N + i`,
        /// replacing its own `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Record wall-clock times (makes the records file non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Run the invariant suite.
    Check {
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Paper,
    Certified,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopArg {
    Fixed,
    Certified,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum EstimatorArg {
    Gmleb,
    SGmleb,
    Oracle,
    JamesStein,
    /// James–Stein shrinking toward zero instead of the grand mean.
    JamesSteinOrigin,
    Sure,
    Fdr,
    UniversalSoft,
    UniversalHard,
    Identity,
}

/// Failure with its exit code: 1 for validation, 2 for I/O and usage.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: format!("{}: {err}", path.display()),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<gmleb::Error> for Failure {
    fn from(e: gmleb::Error) -> Self {
        match e {
            gmleb::Error::Io(_) => Self {
                code: 2,
                message: e.to_string(),
            },
            other => Self::validation(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Caps the global pool at `GMLEB_THREADS` when set.
fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("GMLEB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Fit {
            input,
            grid,
            iters,
            stop,
            out,
        } => cmd_fit(&input, grid, iters, stop, &out),
        Command::Estimate {
            input,
            estimator,
            q,
            truth,
            out,
        } => cmd_estimate(&input, estimator, q, truth.as_deref(), out.as_deref()),
        Command::Simulate {
            scenario,
            seed,
            out,
            timing,
        } => cmd_simulate(&scenario, seed, &out, timing),
        Command::Check { quick } => cmd_check(quick),
    }
}

fn read_input(path: &Path) -> CliResult<Vec<f64>> {
    let file = File::open(path).map_err(|e| Failure::io(path, e))?;
    read_observations(BufReader::new(file)).map_err(|e| match e {
        gmleb::Error::Io(err) => Failure::io(path, err),
        other => Failure::validation(format!("{}: {other}", path.display())),
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::io(path, e))
}

fn cmd_fit(
    input: &Path,
    grid: GridArg,
    iters: usize,
    stop: StopArg,
    out: &Path,
) -> CliResult<ExitCode> {
    let x = read_input(input)?;
    let grid = match grid {
        GridArg::Paper => npmle::build_grid_paper(&x)?,
        GridArg::Certified => npmle::build_grid_certified(&x)?,
    };
    let stop = match stop {
        StopArg::Fixed => StopRule::FixedIterations(iters),
        StopArg::Certified => StopRule::certified(x.len()),
    };
    let init = npmle::uniform_weights(grid.len());
    let fit = npmle::fit_npmle(&x, &grid.points, &init, stop)?;
    let sidecar = out.with_extension("json");
    write_fit(&fit, create(out)?, create(&sidecar)?)?;
    eprintln!(
        "{} grid points, {} EM steps, log-likelihood {}",
        grid.len(),
        fit.iterations,
        format_sig(fit.final_loglik(), 6)
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_estimate(
    input: &Path,
    kind: EstimatorArg,
    q: f64,
    truth: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<ExitCode> {
    let spec = match kind {
        EstimatorArg::Gmleb => EstimatorSpec::gmleb(),
        EstimatorArg::SGmleb => EstimatorSpec::s_gmleb(),
        EstimatorArg::Oracle => EstimatorSpec::Oracle,
        EstimatorArg::JamesStein => EstimatorSpec::JamesStein {
            target: ShrinkageTarget::GrandMean,
        },
        EstimatorArg::JamesSteinOrigin => EstimatorSpec::JamesStein {
            target: ShrinkageTarget::Origin,
        },
        EstimatorArg::Sure => EstimatorSpec::Sure,
        EstimatorArg::Fdr => EstimatorSpec::Fdr { q },
        EstimatorArg::UniversalSoft => EstimatorSpec::UniversalSoft,
        EstimatorArg::UniversalHard => EstimatorSpec::UniversalHard,
        EstimatorArg::Identity => EstimatorSpec::Identity,
    };
    if spec.needs_truth() && truth.is_none() {
        return Err(Failure::usage("--estimator oracle requires --truth PATH"));
    }
    let x = read_input(input)?;
    let theta = truth.map(read_input).transpose()?;
    let result = estimators::estimate(&spec, &x, theta.as_deref())?;

    let mut text = String::new();
    for v in &result.estimates {
        text.push_str(&format!("{v}\n"));
    }
    text.push_str(&format!("# estimator: {}\n", spec.label()));
    let md = &result.metadata;
    if let Some(t) = md.threshold {
        text.push_str(&format!("# threshold: {t}\n"));
    }
    if let Some(s) = md.shrinkage {
        text.push_str(&format!("# shrinkage: {s}\n"));
    }
    if let Some(w) = md.zero_proportion {
        text.push_str(&format!("# zero_proportion: {w}\n"));
    }
    if let Some(k) = md.em_iterations {
        text.push_str(&format!("# em_iterations: {k}\n"));
    }
    if let Some(l) = md.final_loglik {
        text.push_str(&format!("# final_loglik: {l}\n"));
    }
    if let Some(g) = &md.mixture {
        let atoms = g.atoms().count();
        text.push_str(&format!("# mixture_atoms: {atoms}\n"));
    }
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::io(path, e))?,
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e))?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(path: &Path, seed: Option<u64>, out: &Path, timing: bool) -> CliResult<ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let mut scenarios = simlab::parse_scenarios(&text)
        .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        for (i, s) in scenarios.iter_mut().enumerate() {
            s.base_seed = seed.wrapping_add(i as u64);
        }
    }
    fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let opts = RunOptions {
        exec: Execution::Parallel,
        timing,
    };
    let mut records = Vec::new();
    for s in &scenarios {
        eprintln!("running {} ({} replications)", s.id(), s.replications);
        records.extend(simlab::run_scenario_with(s, opts)?);
    }
    let rows = simlab::aggregate(&records);
    simlab::write_records_csv(&records, create(&out.join("records.csv"))?)?;
    simlab::write_aggregate_csv(&rows, create(&out.join("aggregate.csv"))?)?;
    let table = simlab::markdown_table(&scenarios, &rows);
    let md = out.join("table.md");
    fs::write(&md, &table).map_err(|e| Failure::io(&md, e))?;
    print!("{table}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(quick: bool) -> CliResult<ExitCode> {
    let cfg = if quick {
        CheckConfig::quick()
    } else {
        CheckConfig::default()
    };
    let outcomes = checks::run_all(&cfg);
    for c in &outcomes {
        println!(
            "{:<26} {}  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    let failed: Vec<_> = outcomes
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Failure::validation(format!(
            "failing properties: {}",
            failed.join(", ")
        )))
    }
}
