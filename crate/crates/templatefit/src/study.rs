//! Toy ensembles, pull statistics and timing.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use templatefit_core::{draw, fit, rng_stream, CostFunction, Method, TemplateModel, ToyConfig};

use crate::InputError;

/// Ensemble definition. Toy `i` at every `n_mc` is drawn from
/// `rng_stream(toy.seed, i)`, so all methods see identical toys and the data
/// histograms are shared across `n_mc`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub toy: ToyConfig,
    pub n_mc: Vec<u64>,
    pub n_toys: u64,
    pub methods: Vec<Method>,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

/// Outcome of one fit in an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct PullRecord {
    pub method: Method,
    pub n_mc: u64,
    pub toy_index: u64,
    pub signal_estimate: f64,
    pub signal_error: f64,
    /// Finite iff the fit converged with a positive error.
    pub pull: f64,
    pub qmin: f64,
    pub ndof: i64,
    pub converged: bool,
}

impl PullRecord {
    fn failed(method: Method, n_mc: u64, toy_index: u64) -> Self {
        PullRecord {
            method,
            n_mc,
            toy_index,
            signal_estimate: f64::NAN,
            signal_error: f64::NAN,
            pull: f64::NAN,
            qmin: f64::NAN,
            ndof: 0,
            converged: false,
        }
    }
}

fn fit_toy(
    model: &TemplateModel,
    method: Method,
    n_mc: u64,
    toy_index: u64,
    truth: f64,
) -> PullRecord {
    let result = CostFunction::new(model, method, false).and_then(|cost| fit(&cost));
    let Ok(r) = result else {
        return PullRecord::failed(method, n_mc, toy_index);
    };
    let (estimate, error) = (r.yields[0], r.yield_errors[0]);
    let pull = if r.converged && error > 0.0 {
        (estimate - truth) / error
    } else {
        f64::NAN
    };
    PullRecord {
        method,
        n_mc,
        toy_index,
        signal_estimate: estimate,
        signal_error: error,
        pull,
        qmin: r.qmin,
        ndof: r.ndof,
        converged: r.converged,
    }
}

fn toy_records(cfg: &StudyConfig, n_mc: u64, toy_index: u64) -> Vec<PullRecord> {
    let toy_cfg = ToyConfig {
        n_mc,
        ..cfg.toy.clone()
    };
    let model = draw(&toy_cfg, &mut rng_stream(toy_cfg.seed, toy_index)).and_then(|d| {
        let truth = d.truth.0;
        d.model().map(|m| (m, truth))
    });
    cfg.methods
        .iter()
        .map(|&method| match &model {
            Ok((m, truth)) => fit_toy(m, method, n_mc, toy_index, *truth),
            Err(_) => PullRecord::failed(method, n_mc, toy_index),
        })
        .collect()
}

/// Fits every (method, n_mc, toy) combination. Records come back sorted by
/// (method, n_mc, toy_index); failed fits are kept with `converged = false`.
pub fn run_study(cfg: &StudyConfig) -> Result<Vec<PullRecord>, InputError> {
    if cfg.n_toys == 0 {
        return Err(InputError::Config("n_toys must be at least 1".into()));
    }
    if cfg.methods.is_empty() || cfg.n_mc.is_empty() {
        return Err(InputError::Config(
            "need at least one method and one n_mc value".into(),
        ));
    }
    cfg.toy.validate().map_err(|source| InputError::Model {
        context: "toy configuration".into(),
        source,
    })?;
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let mut grid = cfg.n_mc.clone();
    grid.sort_unstable();
    grid.dedup();
    let cfg = StudyConfig {
        methods,
        n_mc: grid,
        ..cfg.clone()
    };

    let tasks: Vec<(u64, u64)> = cfg
        .n_mc
        .iter()
        .flat_map(|&n| (0..cfg.n_toys).map(move |i| (n, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| InputError::Config(e.to_string()))?;
    let mut records: Vec<PullRecord> = pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|&(n_mc, i)| toy_records(&cfg, n_mc, i))
            .collect()
    });
    records.sort_by_key(|r| (r.method, r.n_mc, r.toy_index));
    Ok(records)
}

/// Sample moments of the pulls of one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_z: f64,
    pub sem_mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std_z: f64,
    pub sem_std: f64,
}

impl Moments {
    /// `None` for fewer than two values.
    pub fn of(z: &[f64]) -> Option<Moments> {
        let n = z.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mean = z.iter().sum::<f64>() / nf;
        let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let std = var.sqrt();
        Some(Moments {
            mean_z: mean,
            sem_mean: std / nf.sqrt(),
            std_z: std,
            sem_std: std / (2.0 * nf).sqrt(),
        })
    }
}

/// Pull statistics of one (method, n_mc) group, over converged fits only.
#[derive(Debug, Clone, PartialEq)]
pub struct PullStats {
    pub method: Method,
    pub n_mc: u64,
    pub n_records: usize,
    pub n_converged: usize,
    /// Absent with fewer than two converged fits.
    pub moments: Option<Moments>,
}

/// Groups records by (method, n_mc), sorted.
pub fn summarize(records: &[PullRecord]) -> Vec<PullStats> {
    let mut groups: BTreeMap<(Method, u64), (usize, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let g = groups.entry((r.method, r.n_mc)).or_default();
        g.0 += 1;
        if r.converged && r.pull.is_finite() {
            g.1.push(r.pull);
        }
    }
    groups
        .into_iter()
        .map(|((method, n_mc), (n_records, z))| PullStats {
            method,
            n_mc,
            n_records,
            n_converged: z.len(),
            moments: Moments::of(&z),
        })
        .collect()
}

/// Median wall time of a full fit (minimization and covariance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub median: Duration,
}

pub const WARMUP_FITS: usize = 2;

/// Times `repetitions` fits of `model` per method after warm-up fits.
pub fn bench(
    model: &TemplateModel,
    methods: &[Method],
    repetitions: usize,
) -> Result<Vec<BenchRow>, InputError> {
    if repetitions < 3 {
        return Err(InputError::Config(
            "bench needs at least 3 repetitions".into(),
        ));
    }
    methods
        .iter()
        .map(|&method| {
            let cost =
                CostFunction::new(model, method, false).map_err(|source| InputError::Model {
                    context: method.to_string(),
                    source,
                })?;
            let run = || -> Result<Duration, InputError> {
                let start = Instant::now();
                let r = fit(&cost).map_err(|source| InputError::Model {
                    context: method.to_string(),
                    source,
                })?;
                let elapsed = start.elapsed();
                std::hint::black_box(r);
                Ok(elapsed)
            };
            for _ in 0..WARMUP_FITS {
                run()?;
            }
            let mut times = (0..repetitions)
                .map(|_| run())
                .collect::<Result<Vec<_>, _>>()?;
            times.sort_unstable();
            Ok(BenchRow {
                method,
                median: times[repetitions / 2],
            })
        })
        .collect()
}

/// Median time of each row relative to the fastest one.
pub fn ratios(rows: &[BenchRow]) -> Vec<f64> {
    let fastest = rows
        .iter()
        .map(|r| r.median)
        .min()
        .unwrap_or_default()
        .as_secs_f64();
    rows.iter()
        .map(|r| r.median.as_secs_f64() / fastest)
        .collect()
}
