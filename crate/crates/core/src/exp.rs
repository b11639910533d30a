//! Convergence studies over the training-set size, rate fits and result files.

use std::fs::File;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{lookup, BenchmarkMap};
use crate::lds::{generate_from, PointSet, SamplerFamily};
use crate::net::Activation;
use crate::rng::split_seed;
use crate::train::{
    ensemble_select, errors_on, retrain_statistics, CellOutcome, Dataset, HyperGrid,
    TrainSettings, DEFAULT_EPOCHS,
};
use crate::{Error, Result};

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// How the hyperparameters of each run are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// The 108-cell ensemble grid.
    Table1,
    /// The 12-cell subgrid of [`HyperGrid::fast`].
    Fast,
    Fixed {
        learning_rate: f64,
        weight_decay: f64,
        depth: usize,
        width: usize,
    },
    Custom(HyperGrid),
}

impl GridSpec {
    pub fn grid(&self) -> HyperGrid {
        match self {
            GridSpec::Table1 => HyperGrid::table1(),
            GridSpec::Fast => HyperGrid::fast(),
            GridSpec::Fixed {
                learning_rate,
                weight_decay,
                depth,
                width,
            } => HyperGrid::single(*learning_rate, *weight_decay, *depth, *width),
            GridSpec::Custom(g) => g.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub benchmark: String,
    pub samplers: Vec<SamplerFamily>,
    pub n_schedule: Vec<usize>,
    pub grid: GridSpec,
    pub activation: Activation,
    pub batch_norm: bool,
    pub loss_exponent: u32,
    pub epochs: usize,
    /// Retrainings averaged for the random sampler.
    pub repeats: usize,
    /// Retrainings averaged for deterministic samplers when `average_deterministic` is set.
    pub sobol_repeats: usize,
    /// Report deterministic samplers as a retraining average instead of the ensemble best.
    pub average_deterministic: bool,
    pub test_size: usize,
    pub validation_size: usize,
    /// Select hyperparameters on the test set instead of a held-out validation set.
    pub select_on_test: bool,
    pub seed: u64,
    /// Store measured wall time; off keeps the records file reproducible bit for bit.
    pub record_timing: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            benchmark: "sum-of-sines".into(),
            samplers: vec![SamplerFamily::Sobol, SamplerFamily::Random],
            n_schedule: (4..=10).map(|k| 1 << k).collect(),
            grid: GridSpec::Table1,
            activation: Activation::Sigmoid,
            batch_norm: false,
            loss_exponent: 2,
            epochs: DEFAULT_EPOCHS,
            repeats: 100,
            sobol_repeats: 1,
            average_deterministic: false,
            test_size: 8192,
            validation_size: 1024,
            select_on_test: false,
            seed: 0,
            record_timing: false,
        }
    }
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(file)?)
    }

    pub fn validate(&self) -> Result<()> {
        let map = lookup(&self.benchmark)?;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.samplers.is_empty() {
            return bad("plan lists no samplers".into());
        }
        if self.n_schedule.is_empty() {
            return bad("empty N schedule".into());
        }
        if self.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return bad("N schedule must be strictly increasing".into());
        }
        let min_n = if self.batch_norm { 2 } else { 1 };
        if self.n_schedule[0] < min_n {
            return bad(format!("smallest N must be at least {min_n}"));
        }
        let max_n = *self.n_schedule.last().unwrap_or(&0);
        if self.test_size <= max_n {
            return bad(format!("test size {} must exceed the largest N {max_n}", self.test_size));
        }
        if self.validation_size == 0 && !self.select_on_test {
            return bad("validation size must be positive".into());
        }
        if self.repeats == 0 || self.sobol_repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epoch cap must be at least 1".into());
        }
        if self.loss_exponent != 1 && self.loss_exponent != 2 {
            return bad(format!("loss exponent must be 1 or 2, got {}", self.loss_exponent));
        }
        if self.grid.grid().is_empty() {
            return bad("grid is empty".into());
        }
        for s in &self.samplers {
            // Surfaces unsupported dimensions before any training starts.
            generate_from(s.with_seed(0), map.dim(), 1, 1)?;
        }
        Ok(())
    }

    pub fn settings(&self) -> TrainSettings {
        TrainSettings {
            activation: self.activation,
            batch_norm: self.batch_norm,
            loss_exponent: self.loss_exponent,
            epochs: self.epochs,
        }
    }

    /// First index of the test block: the smallest multiple of the test size above every
    /// training prefix. The validation block follows it.
    pub fn test_start(&self) -> u64 {
        let max_n = *self.n_schedule.last().unwrap_or(&0) as u64;
        let t = self.test_size as u64;
        (max_n / t + 1) * t
    }

    pub fn validation_start(&self) -> u64 {
        self.test_start() + self.test_size as u64
    }
}

/// One (sampler, N) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub benchmark: String,
    pub sampler: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "E_T")]
    pub e_t: f64,
    #[serde(rename = "E_G")]
    pub e_g: f64,
    pub lr: f64,
    pub wd: f64,
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
    pub wall_ms: u64,
    #[serde(rename = "E_T_std")]
    pub e_t_std: f64,
    #[serde(rename = "E_G_std")]
    pub e_g_std: f64,
    /// Trainings averaged into `E_T`/`E_G`; 1 for an ensemble-best report.
    pub repeats: usize,
    pub activation: String,
    /// Grid cells and retrainings that diverged and were left out.
    pub diverged: usize,
}

/// A (sampler, N) job for which no model could be trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedJob {
    pub sampler: String,
    pub n: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutcome {
    pub records: Vec<ExperimentRecord>,
    pub failures: Vec<FailedJob>,
}

const TEST_STREAM: u64 = 0x7e57;
const VALIDATION_STREAM: u64 = 0x7a11d;
const RETRAIN_STREAM: u64 = 0x2e72a1;

fn job_stream(sampler: usize, n: usize) -> u64 {
    ((sampler as u64 + 1) << 40) | n as u64
}

/// Training points of the `(sampler, N)` job: indices `1..=N` for deterministic
/// sequences, a seed derived from the master seed and the job for random points.
pub fn training_points(plan: &ExperimentPlan, sampler_index: usize, n: usize, dim: usize) -> Result<PointSet> {
    let family = plan.samplers[sampler_index];
    generate_from(family.with_seed(job_seed(plan, sampler_index, n)), dim, n, 1)
}

/// Held-out data of one sampler: the test set and, unless selection uses the test set,
/// the validation set.
#[derive(Debug, Clone)]
pub struct Split {
    pub test: Dataset,
    pub validation: Option<Dataset>,
}

impl Split {
    /// The set hyperparameters are selected on.
    pub fn selection_set(&self) -> &Dataset {
        self.validation.as_ref().unwrap_or(&self.test)
    }
}

fn labelled(map: &dyn BenchmarkMap, points: &PointSet) -> Result<Dataset> {
    Dataset::from_benchmark(map, points)
}

/// Seed of the `(sampler, N)` job, from which its random points and grid cells derive.
pub fn job_seed(plan: &ExperimentPlan, sampler_index: usize, n: usize) -> u64 {
    split_seed(plan.seed, job_stream(sampler_index, n))
}

/// Test and validation sets of one sampler, placed after every training prefix.
pub fn held_out(plan: &ExperimentPlan, map: &dyn BenchmarkMap, sampler_index: usize) -> Result<Split> {
    let s = plan.samplers[sampler_index];
    let d = map.dim();
    let test_pts = generate_from(
        s.with_seed(split_seed(plan.seed, TEST_STREAM)),
        d,
        plan.test_size,
        plan.test_start(),
    )?;
    let validation = if plan.select_on_test {
        None
    } else {
        let pts = generate_from(
            s.with_seed(split_seed(plan.seed, VALIDATION_STREAM)),
            d,
            plan.validation_size,
            plan.validation_start(),
        )?;
        Some(labelled(map, &pts)?)
    };
    Ok(Split {
        test: labelled(map, &test_pts)?,
        validation,
    })
}

/// Runs every (sampler, N) job of the plan. Records come back in plan order.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    plan.validate()?;
    let map = lookup(&plan.benchmark)?;
    let splits: Vec<Split> = (0..plan.samplers.len())
        .map(|s| held_out(plan, map.as_ref(), s))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..plan.samplers.len())
        .flat_map(|s| plan.n_schedule.iter().map(move |&n| (s, n)))
        .collect();
    let results: Vec<Result<std::result::Result<ExperimentRecord, FailedJob>>> = jobs
        .par_iter()
        .map(|&(s, n)| run_job(plan, map.as_ref(), s, n, &splits[s]))
        .collect();

    let mut outcome = ExperimentOutcome::default();
    for r in results {
        match r? {
            Ok(rec) => outcome.records.push(rec),
            Err(f) => outcome.failures.push(f),
        }
    }
    Ok(outcome)
}

fn run_job(
    plan: &ExperimentPlan,
    map: &dyn BenchmarkMap,
    sampler_index: usize,
    n: usize,
    split: &Split,
) -> Result<std::result::Result<ExperimentRecord, FailedJob>> {
    let started = Instant::now();
    let family = plan.samplers[sampler_index];
    let job_seed = job_seed(plan, sampler_index, n);
    let points = training_points(plan, sampler_index, n, map.dim())?;
    let train = labelled(map, &points)?;
    let validation = split.selection_set();
    let grid = plan.grid.grid();
    let failed = |reason: String| FailedJob {
        sampler: family.label().into(),
        n,
        reason,
    };

    let sel = match ensemble_select(&train, validation, &grid, &plan.settings(), job_seed) {
        Ok(s) => s,
        Err(Error::AllCellsDiverged) => return Ok(Err(failed("every grid cell diverged".into()))),
        Err(e) => return Err(e),
    };
    let mut diverged = sel
        .cells
        .iter()
        .filter(|c| matches!(c.outcome, CellOutcome::Diverged { .. }))
        .count();
    let cfg = sel.model.config;

    let averaged = family == SamplerFamily::Random || plan.average_deterministic;
    let (e_t, e_g, e_t_std, e_g_std, repeats, seed) = if averaged {
        let repeats = if family == SamplerFamily::Random {
            plan.repeats
        } else {
            plan.sobol_repeats
        };
        let seed = split_seed(job_seed, RETRAIN_STREAM);
        match retrain_statistics(&cfg, &train, &split.test, repeats, seed) {
            Ok(s) => {
                diverged += s.diverged;
                (
                    s.training_error_mean,
                    s.generalization_error_mean,
                    s.training_error_std,
                    s.generalization_error_std,
                    s.runs,
                    seed,
                )
            }
            Err(Error::AllCellsDiverged) => {
                return Ok(Err(failed("every retraining diverged".into())))
            }
            Err(e) => return Err(e),
        }
    } else {
        let e_g = errors_on(&sel.model.params, &split.test, 1)?;
        (sel.model.training_error, e_g, 0.0, 0.0, 1, cfg.seed)
    };

    Ok(Ok(ExperimentRecord {
        benchmark: plan.benchmark.clone(),
        sampler: family.label().into(),
        n,
        e_t,
        e_g,
        lr: cfg.learning_rate,
        wd: cfg.weight_decay,
        depth: cfg.network.hidden_layers,
        width: cfg.network.width,
        seed,
        wall_ms: if plan.record_timing {
            started.elapsed().as_millis() as u64
        } else {
            0
        },
        e_t_std,
        e_g_std,
        repeats,
        activation: cfg.network.activation.label().into(),
        diverged,
    }))
}

/// Least-squares line through `(log₂ N, log₂ E_G)`. A rate of 1 is a slope of −1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    pub n_min: usize,
    pub n_max: usize,
}

/// Fits `log₂ e = slope · log₂ n + intercept`.
pub fn fit_power_law(ns: &[usize], errors: &[f64]) -> Result<RateFit> {
    if ns.len() != errors.len() {
        return Err(Error::DimensionMismatch {
            expected: ns.len(),
            got: errors.len(),
        });
    }
    if ns.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 3 points, got {}",
            ns.len()
        )));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument(format!("cannot fit a rate through error {e}")));
    }
    if ns.contains(&0) {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs at least two distinct N".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: ns.len(),
        n_min: *ns.iter().min().unwrap_or(&0),
        n_max: *ns.iter().max().unwrap_or(&0),
    })
}

/// Rate of `E_G` over the given records (normally one sampler's).
pub fn fit_rate(records: &[ExperimentRecord]) -> Result<RateFit> {
    let ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    let es: Vec<f64> = records.iter().map(|r| r.e_g).collect();
    fit_power_law(&ns, &es)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerFit {
    pub benchmark: String,
    pub sampler: String,
    pub activation: String,
    pub fit: RateFit,
}

/// Fits every (benchmark, sampler, activation) group with at least three records.
pub fn fit_groups(records: &[ExperimentRecord]) -> Vec<SamplerFit> {
    let mut keys: Vec<(&str, &str, &str)> = Vec::new();
    for r in records {
        let k = (r.benchmark.as_str(), r.sampler.as_str(), r.activation.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .filter_map(|(b, s, a)| {
            let group: Vec<ExperimentRecord> = records
                .iter()
                .filter(|r| r.benchmark == b && r.sampler == s && r.activation == a)
                .cloned()
                .collect();
            fit_rate(&group).ok().map(|fit| SamplerFit {
                benchmark: b.into(),
                sampler: s.into(),
                activation: a.into(),
                fit,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub plan: Option<ExperimentPlan>,
    pub fits: Vec<SamplerFit>,
    pub failures: Vec<FailedJob>,
}

pub fn write_records<W: std::io::Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<records>", e))?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RECORD_COLUMNS.iter().copied()) {
        return Err(Error::InvalidArgument(format!(
            "unexpected records header: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Column order of the records CSV.
pub const RECORD_COLUMNS: &[&str] = &[
    "benchmark", "sampler", "N", "E_T", "E_G", "lr", "wd", "depth", "width", "seed", "wall_ms",
    "E_T_std", "E_G_std", "repeats", "activation", "diverged",
];

/// Writes `records.csv` and `summary.json` into `dir`, creating it if needed.
pub fn emit(records: &[ExperimentRecord], summary: &Summary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rp = dir.join(RECORDS_FILE);
    write_records(records, File::create(&rp).map_err(|e| Error::io(&rp, e))?)?;
    let sp = dir.join(SUMMARY_FILE);
    let f = File::create(&sp).map_err(|e| Error::io(&sp, e))?;
    serde_json::to_writer_pretty(f, summary)?;
    Ok(())
}

/// Reads back what [`emit`] wrote.
pub fn load(dir: &Path) -> Result<(Vec<ExperimentRecord>, Summary)> {
    let rp = dir.join(RECORDS_FILE);
    let records = read_records(File::open(&rp).map_err(|e| Error::io(&rp, e))?)?;
    let sp = dir.join(SUMMARY_FILE);
    let summary = serde_json::from_reader(File::open(&sp).map_err(|e| Error::io(&sp, e))?)?;
    Ok((records, summary))
}
