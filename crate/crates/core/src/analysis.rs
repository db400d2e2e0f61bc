//! Query-complexity analysis.
//!
//! Two halves: the cost recursion for collecting all `|C|` solutions together
//! with its closed-form upper bound, and a Monte Carlo harness that measures
//! ledger query counts on planted instances and fits log-log exponents.

use std::fmt::Write as _;
use std::io;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::brute_force_intersection;
use crate::error::{Error, Result};
use crate::planted::{planted_instance, PlantedSpec};
use crate::qintersection::{q_intersection_with_rng, RunConfig};
use crate::rng;
use crate::statevector::DEFAULT_MAX_INDEX_BITS;

/// Minimum number of trials behind a [`ScalingPoint`].
pub const MIN_TRIALS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecursionParams {
    /// Cost constant of one search call with `t` solutions left.
    pub c: f64,
    /// Cost constant of the final single-solution stage.
    pub c1: f64,
    /// Excess of the per-call success probability over one half.
    pub epsilon: f64,
    pub mn: usize,
    pub t_max: usize,
}

impl RecursionParams {
    fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon {} outside [0, 1/2]", self.epsilon)));
        }
        if !(self.c > 0.0 && self.c1 > 0.0) {
            return Err(Error::InvalidParameter("cost constants must be positive".into()));
        }
        Ok(())
    }
}

/// `I_1 = c1 sqrt(mn)`, `I_t = I_{t-1} + 2c/(1+2ε) sqrt(mn/t)`.
///
/// The increment is the expected-cost recursion
/// `I_t = c sqrt(mn/t) + (1/2+ε) I_{t-1} + (1/2-ε) I_t` solved for `I_t`.
pub fn recursion_sequence(p: &RecursionParams) -> Result<Vec<f64>> {
    p.validate()?;
    if p.t_max < 1 {
        return Err(Error::InvalidParameter("t_max must be at least 1".into()));
    }
    let mn = p.mn as f64;
    let step = 2.0 * p.c / (1.0 + 2.0 * p.epsilon);
    let mut out = Vec::with_capacity(p.t_max);
    out.push(p.c1 * mn.sqrt());
    for t in 2..=p.t_max {
        let prev = out[t - 2];
        out.push(prev + step * (mn / t as f64).sqrt());
    }
    Ok(out)
}

/// `4c sqrt(|C| mn) + (c1 - 4c) sqrt(mn)`.
pub fn closed_form_bound(p: &RecursionParams, c_size: usize) -> Result<f64> {
    if c_size < 1 {
        return Err(Error::InvalidParameter("bound needs at least one solution".into()));
    }
    let mn = p.mn as f64;
    Ok(4.0 * p.c * (c_size as f64 * mn).sqrt() + (p.c1 - 4.0 * p.c) * mn.sqrt())
}

/// Least-squares fit of `log y = slope * log x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for exactly collinear data or
    /// when only two points are given.
    pub std_error: f64,
}

impl ExponentFit {
    /// Two-sided interval `slope ± z * std_error`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.slope - z * self.std_error, self.slope + z * self.std_error)
    }
}

pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidParameter(format!("non-positive datum ({x}, {y})")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all x values coincide".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let std_error = (sse / (n - 2.0) / sxx).sqrt();
    Ok(ExponentFit { slope, intercept, std_error })
}

/// Aggregated Monte Carlo statistics for one `(mn, |C|)` grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub mn: usize,
    pub c_size: usize,
    pub trials: usize,
    /// Mean total generalized-iteration queries per run.
    pub mean_queries: f64,
    pub median_queries: f64,
    /// Fraction of search calls that found a solution, over calls made while
    /// solutions remained.
    pub p_success_per_call: f64,
    pub seed: u64,
    /// Mean queries spent until the last element was found.
    #[serde(skip)]
    pub mean_discovery_queries: f64,
    #[serde(skip)]
    pub median_discovery_queries: f64,
    /// Runs whose result differed from the brute-force intersection.
    #[serde(skip)]
    pub mismatches: usize,
}

struct TrialStats {
    queries: u64,
    discovery: u64,
    found_calls: usize,
    calls_with_solutions: usize,
    mismatch: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn run_trial(
    bits: u32,
    c_size: usize,
    config: &RunConfig,
    master_seed: u64,
    point: u32,
    trial: u32,
) -> Result<TrialStats> {
    let mut r = rng::trial_stream(master_seed, point, trial);
    let (a, b) = planted_instance(&PlantedSpec::for_space(bits, c_size), &mut r)?;
    let res = q_intersection_with_rng(&a, &b, config, &mut r)?;
    Ok(TrialStats {
        queries: res.ledger.ggi_queries,
        discovery: res.discovery_queries(),
        found_calls: res.found_calls(),
        calls_with_solutions: res.calls_with_solutions(),
        mismatch: res.elements != brute_force_intersection(&a, &b)?,
    })
}

/// Runs `trials` planted instances per grid point. Trial `t` of point `p`
/// draws from stream `(p << 32) | t` of `master_seed`, so results do not
/// depend on scheduling. `config.master_seed` is ignored.
pub fn run_scaling_experiment(
    grid: &[(usize, usize)],
    trials: usize,
    master_seed: u64,
    config: &RunConfig,
) -> Result<Vec<ScalingPoint>> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    for &(mn, c_size) in grid {
        if !mn.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("search space {mn} is not a power of two")));
        }
        let bits = mn.trailing_zeros();
        if bits > DEFAULT_MAX_INDEX_BITS {
            return Err(Error::CapExceeded { bits, cap: DEFAULT_MAX_INDEX_BITS });
        }
        if 4 * c_size > 3 * mn || c_size > 1 << (bits / 2) {
            return Err(Error::InvalidParameter(format!("{c_size} common records do not fit mn = {mn}")));
        }
    }
    grid.iter()
        .enumerate()
        .map(|(point, &(mn, c_size))| {
            let bits = mn.trailing_zeros();
            let stats = (0..trials)
                .into_par_iter()
                .map(|t| run_trial(bits, c_size, config, master_seed, point as u32, t as u32))
                .collect::<Result<Vec<_>>>()?;
            let mut queries: Vec<f64> = stats.iter().map(|s| s.queries as f64).collect();
            let mut discovery: Vec<f64> = stats.iter().map(|s| s.discovery as f64).collect();
            let found: usize = stats.iter().map(|s| s.found_calls).sum();
            let calls: usize = stats.iter().map(|s| s.calls_with_solutions).sum();
            let n = trials as f64;
            Ok(ScalingPoint {
                mn,
                c_size,
                trials,
                mean_queries: queries.iter().sum::<f64>() / n,
                median_queries: median(&mut queries),
                p_success_per_call: found as f64 / calls as f64,
                seed: master_seed,
                mean_discovery_queries: discovery.iter().sum::<f64>() / n,
                median_discovery_queries: median(&mut discovery),
                mismatches: stats.iter().filter(|s| s.mismatch).count(),
            })
        })
        .collect()
}

/// Single constant `λ` with `median ≈ λ sqrt(mn |C|)` across a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaFit {
    /// Mean of the per-point ratios.
    pub lambda: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Largest `|ratio - λ| / λ`.
    pub max_relative_deviation: f64,
}

pub fn fit_lambda(points: &[ScalingPoint]) -> Result<LambdaFit> {
    if points.is_empty() || points.iter().any(|p| p.c_size == 0) {
        return Err(Error::InvalidParameter("lambda fit needs points with |C| >= 1".into()));
    }
    let ratios: Vec<f64> = points.iter().map(|p| p.median_queries / (p.mn as f64 * p.c_size as f64).sqrt()).collect();
    let lambda = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(LambdaFit {
        lambda,
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_relative_deviation: ratios.iter().map(|r| (r - lambda).abs() / lambda).fold(0.0, f64::max),
    })
}

pub fn write_scaling_csv<W: io::Write>(points: &[ScalingPoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_table(points: &[ScalingPoint]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>8} {:>5} {:>6} {:>12} {:>12} {:>12} {:>10} {:>10}",
        "mn", "|C|", "trials", "mean_q", "median_q", "discovery_q", "p_call", "mismatch"
    );
    for p in points {
        let _ = writeln!(
            out,
            "{:>8} {:>5} {:>6} {:>12.2} {:>12.1} {:>12.2} {:>10.4} {:>10}",
            p.mn,
            p.c_size,
            p.trials,
            p.mean_queries,
            p.median_queries,
            p.mean_discovery_queries,
            p.p_success_per_call,
            p.mismatches
        );
    }
    out
}
