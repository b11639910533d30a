use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qmcnet::bench::{evaluate_points, lookup, AsGrid};
use qmcnet::exp::{
    emit, fit_groups, held_out, job_seed, read_records, run_plan, training_points, ExperimentPlan,
    GridSpec, Summary,
};
use qmcnet::lds::{generate_from, PointSet, SamplerFamily, SamplerKind, DEFAULT_START};
use qmcnet::net::Activation;
use qmcnet::train::{ensemble_select, errors_on, CellOutcome, Dataset, HyperGrid, TrainConfig};
use qmcnet::variation::{hardy_krause_ladder_lower_bound, hardy_krause_upper_bound};
use qmcnet::{Error, Result};

#[derive(Parser)]
#[command(name = "qmcnet", version, about = "Network surrogates on low-discrepancy training sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a point set as CSV.
    Sample {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
        /// Seed of the random sampler; ignored by the sequences.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sequence index of the first point.
        #[arg(long, default_value_t = DEFAULT_START)]
        start: u64,
        /// Base of the van der Corput sequence.
        #[arg(long, default_value_t = 2)]
        base: u32,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the Hardy–Krause variation of a benchmark map.
    Variation {
        #[arg(long)]
        map: String,
        #[arg(long)]
        mesh: usize,
        #[arg(long, value_enum, default_value_t = Method::Recursion)]
        method: Method,
    },
    /// Select a model on the hyperparameter grid and save it.
    Train {
        #[arg(long)]
        benchmark: String,
        #[arg(long, value_enum)]
        sampler: TrainSampler,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = GridChoice::Table1)]
        grid: GridChoice,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Learning rate of the `single` grid.
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        /// Weight decay of the `single` grid.
        #[arg(long, default_value_t = 1e-6)]
        wd: f64,
        /// Hidden layers of the `single` grid.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Neurons per hidden layer of the `single` grid.
        #[arg(long, default_value_t = 12)]
        width: usize,
        #[arg(long, default_value = "sigmoid")]
        activation: Activation,
        #[arg(long)]
        batch_norm: bool,
        #[arg(long, default_value_t = qmcnet::train::DEFAULT_EPOCHS)]
        epochs: usize,
        #[arg(long, default_value_t = 8192)]
        test_size: usize,
        /// Select on the test set instead of a held-out validation set.
        #[arg(long)]
        paper_faithful: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Evaluate a benchmark map at the points of a CSV file.
    Eval {
        #[arg(long)]
        benchmark: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a convergence study described by a plan file.
    Experiment {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use the 12-cell subgrid regardless of the plan.
        #[arg(long, conflicts_with = "full")]
        fast: bool,
        /// Use the 108-cell grid regardless of the plan.
        #[arg(long)]
        full: bool,
    },
    /// Fit convergence rates to a records file.
    Rates {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Sobol,
    Halton,
    Vdc,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainSampler {
    Sobol,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Ladder,
    Recursion,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridChoice {
    Table1,
    Fast,
    Single,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn write_to(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            body(&mut w)?;
            w.flush().map_err(|e| Error::io(p, e))
        }
        None => body(&mut io::stdout().lock()),
    }
}

fn sample(kind: Kind, dim: usize, n: usize, seed: u64, start: u64, base: u32, out: Option<&Path>) -> Result<()> {
    let kind = match kind {
        Kind::Sobol => SamplerKind::Sobol,
        Kind::Halton => SamplerKind::Halton,
        Kind::Vdc => SamplerKind::VanDerCorput { base },
        Kind::Random => SamplerKind::UniformRandom { seed },
    };
    let points = generate_from(kind, dim, n, start)?;
    write_to(out, |w| points.write_csv(w))
}

fn variation(map: &str, mesh: usize, method: Method) -> Result<()> {
    if mesh < 2 {
        return Err(Error::InvalidArgument("mesh must be at least 2".into()));
    }
    let map = lookup(map)?;
    let f = AsGrid(map.as_ref());
    let at = |m: usize| match method {
        Method::Ladder => hardy_krause_ladder_lower_bound(&f, m),
        Method::Recursion => hardy_krause_upper_bound(&f, m),
    };
    let fine = at(mesh)?;
    let coarse = at(mesh / 2)?;
    println!("{fine:.16e}");
    println!("delta {:.3e} (mesh {mesh} vs {})", fine - coarse, mesh / 2);
    Ok(())
}

#[derive(Serialize)]
struct CellLine {
    learning_rate: f64,
    weight_decay: f64,
    depth: usize,
    width: usize,
    seed: u64,
    training_error: Option<f64>,
    validation_error: Option<f64>,
    diverged_at_epoch: Option<usize>,
}

#[derive(Serialize)]
struct TrainReport {
    benchmark: String,
    sampler: String,
    n: usize,
    config: TrainConfig,
    #[serde(rename = "E_T")]
    e_t: f64,
    #[serde(rename = "E_G")]
    e_g: f64,
    validation_error: f64,
    epochs: usize,
    best_epoch: usize,
    wall_ms: u128,
    cells: Vec<CellLine>,
}

fn train(plan: &ExperimentPlan, out: &Path, report: &Path) -> Result<()> {
    plan.validate()?;
    let started = Instant::now();
    let map = lookup(&plan.benchmark)?;
    let n = plan.n_schedule[0];
    let data = Dataset::from_benchmark(map.as_ref(), &training_points(plan, 0, n, map.dim())?)?;
    let split = held_out(plan, map.as_ref(), 0)?;
    let sel = ensemble_select(
        &data,
        split.selection_set(),
        &plan.grid.grid(),
        &plan.settings(),
        job_seed(plan, 0, n),
    )?;
    let e_g = errors_on(&sel.model.params, &split.test, 1)?;

    let mut w = create(out)?;
    sel.model.params.write_to(&mut w).map_err(|e| Error::io(out, e))?;
    w.flush().map_err(|e| Error::io(out, e))?;

    let cells = sel
        .cells
        .iter()
        .map(|c| {
            let (te, ve, div) = match c.outcome {
                CellOutcome::Trained {
                    training_error,
                    validation_error,
                } => (Some(training_error), Some(validation_error), None),
                CellOutcome::Diverged { epoch, .. } => (None, None, Some(epoch)),
            };
            CellLine {
                learning_rate: c.config.learning_rate,
                weight_decay: c.config.weight_decay,
                depth: c.config.network.hidden_layers,
                width: c.config.network.width,
                seed: c.config.seed,
                training_error: te,
                validation_error: ve,
                diverged_at_epoch: div,
            }
        })
        .collect();
    let rep = TrainReport {
        benchmark: plan.benchmark.clone(),
        sampler: plan.samplers[0].label().into(),
        n,
        config: sel.model.config,
        e_t: sel.model.training_error,
        e_g,
        validation_error: sel.validation_error,
        epochs: plan.epochs,
        best_epoch: sel.model.best_epoch,
        wall_ms: started.elapsed().as_millis(),
        cells,
    };
    let mut w = create(report)?;
    serde_json::to_writer_pretty(&mut w, &rep)?;
    w.flush().map_err(|e| Error::io(report, e))?;
    eprintln!(
        "E_T {:.6e}  E_G {:.6e}  ({} of {} cells diverged)",
        rep.e_t,
        rep.e_g,
        rep.cells.iter().filter(|c| c.diverged_at_epoch.is_some()).count(),
        rep.cells.len()
    );
    Ok(())
}

fn eval(benchmark: &str, input: &Path, out: Option<&Path>) -> Result<()> {
    let map = lookup(benchmark)?;
    let points = PointSet::read_csv(open(input)?)?;
    let values = evaluate_points(map.as_ref(), &points)?;
    write_to(out, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["value"])?;
        for v in &values {
            csv.write_record([format!("{v:.16e}")])?;
        }
        csv.flush().map_err(|e| Error::io("<values>", e))
    })
}

/// Diverged cells and failed jobs are logged, in `records.csv`, `summary.json` and on
/// stderr, and do not make the run fail.
fn experiment(plan_path: &Path, out: &Path, fast: bool, full: bool) -> Result<()> {
    let mut plan = ExperimentPlan::load(plan_path)?;
    if fast {
        plan.grid = GridSpec::Fast;
    } else if full {
        plan.grid = GridSpec::Table1;
    }
    let outcome = run_plan(&plan)?;
    let summary = Summary {
        plan: Some(plan),
        fits: fit_groups(&outcome.records),
        failures: outcome.failures.clone(),
    };
    emit(&outcome.records, &summary, out)?;
    for r in &outcome.records {
        if r.diverged > 0 {
            eprintln!("{} N={}: {} diverged runs left out", r.sampler, r.n, r.diverged);
        }
    }
    for f in &outcome.failures {
        eprintln!("{} N={}: {}", f.sampler, f.n, f.reason);
    }
    print_fits(&summary.fits);
    Ok(())
}

fn print_fits(fits: &[qmcnet::exp::SamplerFit]) {
    println!("benchmark,sampler,activation,slope,intercept,r_squared,n_min,n_max");
    for f in fits {
        println!(
            "{},{},{},{:.6},{:.6},{:.6},{},{}",
            f.benchmark, f.sampler, f.activation, f.fit.slope, f.fit.intercept, f.fit.r_squared,
            f.fit.n_min, f.fit.n_max
        );
    }
}

fn rates(input: &Path) -> Result<()> {
    let records = read_records(open(input)?)?;
    print_fits(&fit_groups(&records));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample {
            kind,
            dim,
            n,
            seed,
            start,
            base,
            out,
        } => sample(kind, dim, n, seed, start, base, out.as_deref())?,
        Command::Variation { map, mesh, method } => variation(&map, mesh, method)?,
        Command::Train {
            benchmark,
            sampler,
            n,
            grid,
            seed,
            lr,
            wd,
            depth,
            width,
            activation,
            batch_norm,
            epochs,
            test_size,
            paper_faithful,
            out,
            report,
        } => {
            let grid = match grid {
                GridChoice::Table1 => GridSpec::Table1,
                GridChoice::Fast => GridSpec::Fast,
                GridChoice::Single => GridSpec::Custom(HyperGrid::single(lr, wd, depth, width)),
            };
            let plan = ExperimentPlan {
                benchmark,
                samplers: vec![match sampler {
                    TrainSampler::Sobol => SamplerFamily::Sobol,
                    TrainSampler::Random => SamplerFamily::Random,
                }],
                n_schedule: vec![n],
                grid,
                activation,
                batch_norm,
                epochs,
                test_size,
                select_on_test: paper_faithful,
                seed,
                ..ExperimentPlan::default()
            };
            train(&plan, &out, &report)?
        }
        Command::Eval {
            benchmark,
            input,
            out,
        } => eval(&benchmark, &input, out.as_deref())?,
        Command::Experiment {
            plan,
            out,
            fast,
            full,
        } => experiment(&plan, &out, fast, full)?,
        Command::Rates { input } => rates(&input)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
