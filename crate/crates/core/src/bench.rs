//! Random dense feasible instances and the iteration-count benchmark: seeded
//! generation, per-cell statistics, and the predictor-count forecast model.

use crate::linalg::dot;
use crate::lp::{LpInstance, PrimalDualPoint};
use crate::methods::{run, Method, MethodConfig, Termination};
use crate::rng::Stream;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// CSV header written ahead of the per-cell rows.
pub const CSV_HEADER: &str =
    "m,n,method,count,mean_pred,rel_std_pct,mean_corr,ft_count,forecast,abs_dev";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("generator shape m={m}, n={n} out of range; need 1 <= m <= n/2")]
    BadShape { m: usize, n: usize },
    #[error("cell (m={m}, n={n}, {method}): {failures}/{count} runs failed ({first})")]
    TooManyFailures {
        m: usize,
        n: usize,
        method: Method,
        failures: usize,
        count: usize,
        first: String,
    },
}

/// Shape and seed of one family of random instances.
#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.m == 0 || 2 * self.m > self.n {
            return Err(BenchError::BadShape {
                m: self.m,
                n: self.n,
            });
        }
        Ok(())
    }
}

/// Instance `index` of the family: x0 and s0 uniform on (0,1], A uniform on
/// (-1,1], b = A x0 and c = s0, so u0 = (x0, s0, 0) is strictly feasible
/// with zero primal and dual residuals by construction.
pub fn generate(cfg: &GenConfig, index: u64) -> Result<(LpInstance, PrimalDualPoint), BenchError> {
    cfg.validate()?;
    let (m, n) = (cfg.m, cfg.n);
    let mut xs = Stream::new(cfg.seed, index, 0);
    let mut ss = Stream::new(cfg.seed, index, 1);
    let mut as_ = Stream::new(cfg.seed, index, 2);
    let x: Vec<f64> = (0..n).map(|_| xs.unit()).collect();
    let s: Vec<f64> = (0..n).map(|_| ss.unit()).collect();
    let a: Vec<f64> = (0..m * n).map(|_| as_.symmetric()).collect();
    // The same left-to-right dot the feasibility check uses, so the primal
    // residual of the start is exactly zero.
    let b: Vec<f64> = (0..m).map(|i| dot(&a[i * n..(i + 1) * n], &x)).collect();
    let c = s.clone();
    let inst = LpInstance::new(m, n, a, b, c).expect("generated data is well-formed");
    let u0 = PrimalDualPoint {
        x,
        s,
        y: vec![0.0; m],
    };
    Ok((inst, u0))
}

/// Expected predictor count of the second-order method at accuracy 1e-8:
/// (25 + log2(m) * log2(n/16)) / 4.
pub fn forecast(m: usize, n: usize) -> f64 {
    (25.0 + (m as f64).log2() * (n as f64 / 16.0).log2()) / 4.0
}

/// One benchmark cell: a family shape, a method, and a series length.
#[derive(Debug, Clone, Copy)]
pub struct CellConfig {
    pub m: usize,
    pub n: usize,
    pub method: Method,
    pub count: usize,
    pub seed: u64,
}

/// Per-run measurements kept for aggregation.
#[derive(Debug, Clone, Serialize)]
pub struct RunStat {
    pub predictors: usize,
    pub correctors: usize,
    pub finite_terminated: bool,
    pub final_gap: f64,
    pub wall_time: f64,
}

/// Aggregates of one cell's successful runs.
#[derive(Debug, Clone, Serialize)]
pub struct CellStats {
    pub m: usize,
    pub n: usize,
    pub method: Method,
    /// Successful runs entering the aggregates.
    pub count: usize,
    pub mean_predictors: f64,
    /// Sample standard deviation of the predictor counts over the mean, %.
    pub rel_std_pct: f64,
    pub mean_correctors: f64,
    pub ft_success_count: usize,
    pub mean_gap: f64,
    pub mean_wall_time: f64,
    pub forecast: f64,
}

impl CellStats {
    /// One CSV row matching [`CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.4},{:.2},{:.4},{},{:.4},{:.4}",
            self.m,
            self.n,
            self.method,
            self.count,
            self.mean_predictors,
            self.rel_std_pct,
            self.mean_correctors,
            self.ft_success_count,
            self.forecast,
            (self.mean_predictors - self.forecast).abs()
        )
    }
}

/// Everything one bench invocation produced, for the JSON bundle.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub eps: f64,
    pub count: usize,
    pub finite_termination: bool,
    pub cells: Vec<CellStats>,
}

/// Sum with pairwise splitting; O(eps*log n) error for benign data.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1..=8 => v.iter().sum(),
        len => pairwise_sum(&v[..len / 2]) + pairwise_sum(&v[len / 2..]),
    }
}

fn mean(v: &[f64]) -> f64 {
    pairwise_sum(v) / v.len() as f64
}

fn sample_std(v: &[f64], mean: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    (pairwise_sum(&sq) / (v.len() - 1) as f64).sqrt()
}

/// Runs one cell's series in parallel and aggregates in index order. A cell
/// tolerates isolated failures; above 5% of the series it errors out.
pub fn run_cell(cell: &CellConfig, base: &MethodConfig) -> Result<CellStats, BenchError> {
    let gen = GenConfig {
        m: cell.m,
        n: cell.n,
        seed: cell.seed,
    };
    gen.validate()?;
    let mut config = base.clone();
    config.method = cell.method;

    let results: Vec<Result<RunStat, String>> = (0..cell.count as u64)
        .into_par_iter()
        .map(|index| {
            let (inst, u0) = generate(&gen, index).map_err(|e| e.to_string())?;
            let outcome = run(&inst, &u0, &config).map_err(|e| e.to_string())?;
            let report = outcome.report;
            if !report.termination.is_success() {
                return Err(format!("instance {index}: {}", report.termination));
            }
            Ok(RunStat {
                predictors: report.predictor_count,
                correctors: report.corrector_count,
                finite_terminated: report.termination == Termination::FiniteTermSuccess,
                final_gap: report.final_gap,
                wall_time: report.records.iter().map(|r| r.wall_time).sum(),
            })
        })
        .collect();

    let mut stats = Vec::with_capacity(cell.count);
    let mut failures = 0usize;
    let mut first_failure = String::new();
    for res in results {
        match res {
            Ok(stat) => stats.push(stat),
            Err(msg) => {
                if first_failure.is_empty() {
                    first_failure = msg;
                }
                failures += 1;
            }
        }
    }
    if failures * 20 > cell.count {
        return Err(BenchError::TooManyFailures {
            m: cell.m,
            n: cell.n,
            method: cell.method,
            failures,
            count: cell.count,
            first: first_failure,
        });
    }

    let preds: Vec<f64> = stats.iter().map(|s| s.predictors as f64).collect();
    let corrs: Vec<f64> = stats.iter().map(|s| s.correctors as f64).collect();
    let gaps: Vec<f64> = stats.iter().map(|s| s.final_gap).collect();
    let times: Vec<f64> = stats.iter().map(|s| s.wall_time).collect();
    let mean_predictors = mean(&preds);
    let rel_std_pct = if mean_predictors > 0.0 {
        100.0 * sample_std(&preds, mean_predictors) / mean_predictors
    } else {
        0.0
    };
    Ok(CellStats {
        m: cell.m,
        n: cell.n,
        method: cell.method,
        count: stats.len(),
        mean_predictors,
        rel_std_pct,
        mean_correctors: mean(&corrs),
        ft_success_count: stats.iter().filter(|s| s.finite_terminated).count(),
        mean_gap: mean(&gaps),
        mean_wall_time: mean(&times),
        forecast: forecast(cell.m, cell.n),
    })
}

/// The six-cell grid used by default: small shapes solvable in seconds.
pub fn default_grid() -> Vec<(usize, usize)> {
    vec![
        (32, 64),
        (32, 128),
        (32, 256),
        (64, 128),
        (128, 256),
        (32, 512),
    ]
}

/// The full fifteen-cell grid: m in {32,...,512}, n in {64,...,1024},
/// upper-triangular with m <= n/2.
pub fn full_grid() -> Vec<(usize, usize)> {
    let mut grid = Vec::new();
    for p in 5..=9usize {
        let m = 1usize << p;
        let mut n = 2 * m;
        while n <= 1024 {
            grid.push((m, n));
            n *= 2;
        }
    }
    grid
}
