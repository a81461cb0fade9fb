use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use csma_core::analytics::{snr_axis, Formula, FormulaId, TheoryCurve};
use csma_core::channel::{child_rng, SnrMode};
use csma_core::config::{load_config, parse_plan_spec};
use csma_core::framing::frame_user_data;
use csma_core::harness::{compare_user_scaling, run_experiment, ExperimentConfig};
use csma_core::mapping::{capacity_enhancement, throughput_reduction, AllocationPlan, Demapped};
use csma_core::report::{gnuplot_script, reports_to_csv, BerReport};
use csma_core::{Constellation, Error};

/// The (M, B) pairs of the user-capacity table.
const CAPACITY_ROWS: [(u32, u32); 9] = [
    (64, 4),
    (64, 3),
    (64, 2),
    (256, 6),
    (256, 4),
    (256, 2),
    (1024, 8),
    (1024, 6),
    (1024, 4),
];

#[derive(Parser)]
#[command(
    name = "csma",
    version,
    about = "Constellation-shared multiple access link simulator"
)]
struct Cli {
    /// Suppress the summary printed to standard output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Users per shared modulator for common (M, B) pairs.
    CapacityTable {
        #[arg(long, requires = "bits")]
        order: Option<u32>,
        #[arg(long, requires = "order")]
        bits: Option<u32>,
    },
    /// Per-user throughput factor when A label bits address the user.
    Throughput {
        #[arg(long)]
        order: u32,
        #[arg(long)]
        address_bits: u32,
    },
    /// Closed-form error probability along an SNR-per-symbol axis, as CSV.
    Theory {
        /// eq3, eq4, eq5 or ber-approx.
        #[arg(long)]
        formula: String,
        #[arg(long)]
        order: Option<u64>,
        #[arg(long)]
        data_bits: Option<u32>,
        #[arg(long)]
        address_bits: Option<u32>,
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        #[arg(long, default_value_t = 20.0)]
        stop: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the (user, data word, codeword) table of a plan.
    MapTable {
        #[arg(long)]
        order: u32,
        /// single | address:P,.. | qos:B,.. | lookup:FILE
        #[arg(long)]
        plan: String,
    },
    /// Labelled constellation points grouped by owning user, as CSV.
    ConstellationDump {
        #[arg(long)]
        order: u32,
        #[arg(long, default_value = "single")]
        plan: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One framed slot of random payload for the first run of a config, as CSV.
    GridDump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo BER/SER sweep of every run in a config file.
    BerSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Also write a gnuplot script for the CSV.
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// Repeat the first run of a config with 1, 4, 8, ... users sharing the alphabet.
    UserScaling {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,4,8")]
        users: Vec<u32>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// symbol | databit
    #[arg(long)]
    snr_mode: Option<String>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } => Failure::Config(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let quiet = cli.quiet;
    match cli.command {
        Command::CapacityTable { order, bits } => capacity_table(order.zip(bits)),
        Command::Throughput {
            order,
            address_bits,
        } => {
            let t = throughput_reduction(order, address_bits).map_err(config_err)?;
            println!(
                "{}/{} ({:.6})",
                t.numer(),
                t.denom(),
                *t.numer() as f64 / *t.denom() as f64
            );
            Ok(())
        }
        Command::Theory {
            formula,
            order,
            data_bits,
            address_bits,
            start,
            stop,
            step,
            out,
        } => {
            let id: FormulaId = formula.parse().map_err(config_err)?;
            let formula =
                Formula::from_parts(id, order, data_bits, address_bits).map_err(config_err)?;
            let axis = snr_axis(start, stop, step).map_err(config_err)?;
            let curve = TheoryCurve::new(formula, &axis).map_err(config_err)?;
            emit(out.as_deref(), &curve.to_csv())
        }
        Command::MapTable { order, plan } => {
            let plan = build_plan(order, &plan)?;
            print!("{}", map_table(&plan));
            Ok(())
        }
        Command::ConstellationDump { order, plan, out } => {
            let constellation = Constellation::qam(order).map_err(config_err)?;
            let plan = build_plan(order, &plan)?;
            emit(out.as_deref(), &constellation_dump(&constellation, &plan))
        }
        Command::GridDump { config, seed, out } => {
            let mut runs = load_config(&config)?;
            let mut run = runs.swap_remove(0);
            if let Some(seed) = seed {
                run.seed = seed;
            }
            emit(out.as_deref(), &grid_dump(&run)?)
        }
        Command::BerSweep {
            config,
            out,
            overrides,
            gnuplot,
        } => {
            let runs = load_runs(&config, &overrides)?;
            let reports = runs
                .iter()
                .map(run_experiment)
                .collect::<Result<Vec<_>, _>>()?;
            finish_sweep(&reports, &out, gnuplot.as_deref(), quiet)
        }
        Command::UserScaling {
            config,
            out,
            users,
            overrides,
            gnuplot,
        } => {
            let runs = load_runs(&config, &overrides)?;
            let reports = compare_user_scaling(&runs[0], &users)?;
            finish_sweep(&reports, &out, gnuplot.as_deref(), quiet)
        }
    }
}

fn capacity_table(single: Option<(u32, u32)>) -> CliResult<()> {
    if let Some((order, bits)) = single {
        println!("{}", capacity_enhancement(order, bits).map_err(config_err)?);
        return Ok(());
    }
    println!("{:<12} {:>9} {:>9}", "modulation", "data_bits", "users");
    for (order, bits) in CAPACITY_ROWS {
        let users = capacity_enhancement(order, bits).map_err(runtime_err)?;
        println!("{:<12} {bits:>9} {users:>9}", format!("{order} QAM"));
    }
    Ok(())
}

fn build_plan(order: u32, spec: &str) -> CliResult<AllocationPlan> {
    let spec = parse_plan_spec(spec, Path::new(".")).map_err(|m| config_err(anyhow!(m)))?;
    spec.build(order).map_err(config_err)
}

fn map_table(plan: &AllocationPlan) -> String {
    let d = plan.bits_per_symbol() as usize;
    let mut out = format!("{:<6} {:>9} {:>9}\n", "user", "data", "codeword");
    for user in plan.users() {
        let b = user.data_bits() as usize;
        for (word, cw) in user.codewords().iter().enumerate() {
            out.push_str(&format!(
                "{:<6} {:>9} {:>9}\n",
                user.user_id(),
                format!("{word:0b$b}"),
                format!("{cw:0d$b}")
            ));
        }
    }
    out
}

/// `label_binary,I,Q,user_id` rows, users in plan order, then unallocated
/// labels with user `-1`.
fn constellation_dump(c: &Constellation, plan: &AllocationPlan) -> String {
    let d = c.bits_per_symbol() as usize;
    let mut out = String::from("label_binary,I,Q,user_id\n");
    let mut row = |label: u32, user: i64| {
        let p = c.modulate(label);
        out.push_str(&format!(
            "{label:0d$b},{:.11e},{:.11e},{user}\n",
            p.re, p.im
        ));
    };
    for user in plan.users() {
        let mut labels = user.codewords().to_vec();
        labels.sort_unstable();
        for l in labels {
            row(l, user.user_id() as i64);
        }
    }
    for l in 0..c.order() {
        if plan.demap_symbol(l) == Demapped::Unallocated {
            row(l, -1);
        }
    }
    out
}

fn grid_dump(config: &ExperimentConfig) -> CliResult<String> {
    use rand::Rng;
    let exp = config.prepare().map_err(config_err)?;
    let mut rng = child_rng(config.seed, 0, 0);
    let streams: Vec<Vec<u32>> = exp
        .plan
        .users()
        .iter()
        .map(|u| {
            let n = exp.schedule.count(u.user_id()) * config.geometry.subcarriers;
            (0..n)
                .map(|_| rng.random_range(0..1u32 << u.data_bits()))
                .collect()
        })
        .collect();
    let refs: Vec<&[u32]> = streams.iter().map(Vec::as_slice).collect();
    let grid = frame_user_data(&exp.plan, &exp.schedule, &config.geometry, &refs)?;
    Ok(grid.to_csv(exp.constellation.bits_per_symbol()))
}

fn load_runs(path: &Path, overrides: &Overrides) -> CliResult<Vec<ExperimentConfig>> {
    let mut runs = load_config(path).map_err(|e| config_err(anyhow!("{}: {e}", path.display())))?;
    let mode: Option<SnrMode> = overrides
        .snr_mode
        .as_deref()
        .map(str::parse)
        .transpose()
        .map_err(config_err)?;
    for run in &mut runs {
        if let Some(seed) = overrides.seed {
            run.seed = seed;
        }
        if let Some(mode) = mode {
            run.sweep.mode = mode;
        }
        if let Some(w) = overrides.workers {
            run.workers = w;
        }
        run.prepare()
            .map_err(|e| config_err(anyhow!("{}: run `{}`: {e}", path.display(), run.name)))?;
    }
    Ok(runs)
}

fn finish_sweep(
    reports: &[BerReport],
    out: &Path,
    gnuplot: Option<&Path>,
    quiet: bool,
) -> CliResult<()> {
    let csv = match reports {
        [single] => single.to_csv(),
        many => reports_to_csv(many),
    };
    write_atomic(out, &csv)?;
    if let Some(script) = gnuplot {
        // the plot script selects runs through the leading run column
        let data = if reports.len() == 1 {
            let tagged = out.with_extension("runs.csv");
            write_atomic(&tagged, &reports_to_csv(reports))?;
            tagged
        } else {
            out.to_path_buf()
        };
        write_atomic(script, &gnuplot_script(reports, &data.to_string_lossy()))?;
    }
    if !quiet {
        for r in reports {
            println!("{}", r.summary());
        }
        println!("wrote {}", out.display());
    }
    Ok(())
}

/// Writes to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write_atomic(path, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(runtime_err),
    }
}

/// Temp file in the target directory, then rename, so a failed run never
/// leaves a truncated file behind.
fn write_atomic(path: &Path, text: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a file in {}", dir.display()))
        .map_err(runtime_err)?;
    tmp.write_all(text.as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime_err)?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime_err)?;
    Ok(())
}
