use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use uhdgof::data::{load_csv, quadratic_expand, standardize, DEFAULT_EXPANSION_CAP};
use uhdgof::nulldist::CvmBmLaw;
use uhdgof::orchestrator::{run_test, Config, Method, TestReport};
use uhdgof::simlab::{self, mc_experiment_with, write_records, Model, Scenario, Study};
use uhdgof::threads::init_thread_pool;
use uhdgof::{Family, Mode};

#[derive(Parser)]
#[command(name = "uhdgof", version, about = "Goodness-of-fit tests for sparse high-dimensional GLMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Expand {
    Quadratic,
}

#[derive(Subcommand)]
enum Command {
    /// Test a fitted sparse GLM on a CSV dataset.
    Test {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        response: String,
        #[arg(long, default_value = "gaussian")]
        family: Family,
        #[arg(long, default_value = "tcvm-cf")]
        method: Method,
        #[arg(long, value_enum)]
        expand: Option<Expand>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        /// Override the family's default transformation mode.
        #[arg(long)]
        mode: Option<Mode>,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Monte Carlo rejection rate for one simulation cell.
    Simulate {
        #[arg(long)]
        study: u8,
        #[arg(long)]
        model: Model,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value = "tcvm-cf")]
        method: Method,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Append to an existing results file instead of replacing it.
        #[arg(long)]
        append: bool,
    },
    /// Write the quantile table of the null law.
    NullTable {
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_summary(r: &TestReport) {
    println!(
        "{} ({}, {} mode): n = {}, p = {}",
        r.method, r.family, r.mode, r.n, r.p
    );
    for t in &r.per_projection {
        println!(
            "  {:?} from {} on {} #{} {:?}: stat {:.4}, p {:.4}, weight {:.4}",
            t.kind, t.half, t.evaluated_on, t.direction_index, t.source, t.stat, t.p, t.weight
        );
    }
    for d in &r.dropped_projections {
        println!("  dropped {} #{}: {}", d.half, d.direction_index, d.reason);
    }
    for w in &r.warnings {
        println!("  warning: {w}");
    }
    println!(
        "Cauchy statistic {:.4}, p-value {:.4} -> {} at level {}",
        r.statistic,
        r.pvalue,
        if r.reject { "reject" } else { "do not reject" },
        r.level
    );
}

fn cmd_test(
    data: &Path,
    response: &str,
    family: Family,
    cfg: Config,
    expand: Option<Expand>,
    json: Option<&Path>,
) -> Result<()> {
    let (raw, load) = load_csv(data, response, family)
        .with_context(|| format!("loading {}", data.display()))?;
    if load.rows_dropped > 0 {
        eprintln!("dropped {} rows with missing values", load.rows_dropped);
    }
    let mut d = standardize(&raw)?;
    if let Some(Expand::Quadratic) = expand {
        d = quadratic_expand(&d, DEFAULT_EXPANSION_CAP)?;
        println!("quadratic expansion: {} columns", d.p());
    }
    let report = run_test(&d, &cfg)?;
    print_summary(&report);
    if let Some(path) = json {
        std::fs::write(path, report.to_json()?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    study: u8,
    model: Model,
    n: usize,
    p: usize,
    rho: f64,
    a: f64,
    method: Method,
    reps: usize,
    level: f64,
    seed: u64,
    out: &Path,
    append: bool,
) -> Result<()> {
    let study = match study {
        1 => Study::S1,
        2 => Study::S2,
        other => bail!("unknown study {other}; expected 1 or 2"),
    };
    if model.study() != study {
        bail!("model {model} does not belong to study {study:?}");
    }
    let scenario = Scenario::new(model, a, n, p, rho, seed);
    let cfg = Config::new(method, model.family(), seed);
    let checkpoint = out.with_extension("reps.csv");
    let exp = mc_experiment_with(&scenario, &cfg, reps, level, seed, |records| {
        log::info!("{} replications done", records.len());
        write_records(&checkpoint, records)
    })?;
    let mut rows = if append && out.exists() {
        simlab::read_rows(out)?
    } else {
        Vec::new()
    };
    rows.push(exp.row());
    simlab::write_rows(out, &rows)?;
    println!(
        "{model} rho={rho} n={n} p={p} a={a} {method}: rate {:.3} (se {:.3}) over {} reps, {} failed",
        exp.rejection_rate, exp.mc_se, exp.completed, exp.failures
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = init_thread_pool();
    log::debug!("running on {threads} threads");
    match cli.command {
        Command::Test {
            data,
            response,
            family,
            method,
            expand,
            seed,
            level,
            mode,
            json,
        } => {
            let mut cfg = Config::new(method, family, seed);
            cfg.level = level;
            cfg.mode = mode;
            cmd_test(&data, &response, family, cfg, expand, json.as_deref())
        }
        Command::Simulate {
            study,
            model,
            n,
            p,
            rho,
            a,
            method,
            reps,
            level,
            seed,
            out,
            append,
        } => cmd_simulate(study, model, n, p, rho, a, method, reps, level, seed, &out, append),
        Command::NullTable { out } => {
            CvmBmLaw::global()
                .write_table(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
