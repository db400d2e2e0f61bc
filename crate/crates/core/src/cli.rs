//! Command-line front end.
//!
//! Every command resolves a seed (explicit or freshly drawn), prints it first,
//! and writes nothing that depends on timing or thread count, so re-running
//! with the printed seed reproduces the output byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::amplification::{subroutine1, Engine, SearchOptions, SearchOutcome, DEFAULT_CAP_FACTOR};
use crate::analysis::{fit_exponent, fit_lambda, run_scaling_experiment, summary_table, write_scaling_csv};
use crate::dataset::{load_dataset, marked_pairs, Dataset, LoadOptions, MarkedSet, DEFAULT_VALUE_BOUND};
use crate::full_circuit::{CircuitState, RegisterLayout};
use crate::ledger::QueryLedger;
use crate::planted::{planted_instance, PlantedSpec};
use crate::qintersection::{q_intersection, q_union, write_run_rows, RunConfig, DEFAULT_CONFIRM_REPEATS};
use crate::rng;
use crate::statevector::{theoretical_success, StateVector};

/// Largest per-amplitude difference accepted by `verify-equivalence`.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-10;

/// Largest ancilla mass accepted by `verify-equivalence` after each iteration.
pub const ANCILLA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "qset", version, about = "Simulated quantum set intersection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Intersect two record files.
    Intersect(SetArgs),
    /// Union of two record files inside an explicit universe.
    Union(UnionArgs),
    /// Exact vs closed-form success probability for k = 0..k_max.
    GroverCurve(CurveArgs),
    /// Monte Carlo statistics of single search calls.
    BbhtStats(StatsArgs),
    /// Query-scaling grid on planted instances.
    Scaling(ScalingArgs),
    /// Five-register circuit vs reduced engine on random instances.
    VerifyEquivalence(EquivalenceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Master seed; drawn from entropy and printed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for parallel trials.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, default_value_t = Engine::Reduced)]
    pub engine: Engine,
    /// Search budget per call, in units of ceil(sqrt(MN)).
    #[arg(long, default_value_t = DEFAULT_CAP_FACTOR)]
    pub cap_factor: f64,
    /// Extra empty searches required before halting.
    #[arg(long, default_value_t = DEFAULT_CONFIRM_REPEATS)]
    pub confirm: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SetArgs {
    #[arg(long)]
    pub set_a: PathBuf,
    #[arg(long)]
    pub set_b: PathBuf,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = DEFAULT_VALUE_BOUND)]
    pub value_bound: u32,
    /// Drop repeated records instead of rejecting the file.
    #[arg(long)]
    pub dedup: bool,
    /// Append a CSV summary row to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct UnionArgs {
    #[command(flatten)]
    pub sets: SetArgs,
    #[arg(long)]
    pub universe: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    /// Size of the joint index space; a power of two.
    #[arg(long)]
    pub mn: usize,
    /// Number of marked pairs.
    #[arg(long)]
    pub t: usize,
    /// Largest iteration count; defaults to floor(2 sqrt(mn)).
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub mn: usize,
    /// Number of common records planted in each instance.
    #[arg(long)]
    pub t: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    /// Grid points as `mn:c` pairs, comma separated. Defaults to |C| = 1 over
    /// mn = 2^8..2^14 plus mn = 2^12 over |C| = 1, 2, 4, 8, 16.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EquivalenceArgs {
    #[arg(long, default_value_t = 2)]
    pub n_bits: u32,
    #[arg(long, default_value_t = 2)]
    pub m_bits: u32,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 8)]
    pub value_bound: u32,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    /// Iterations per instance; defaults to floor(2 sqrt(MN)).
    #[arg(long)]
    pub k_max: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

impl CommonArgs {
    fn resolve_seed(&self) -> u64 {
        self.seed.unwrap_or_else(rand::random)
    }
}

impl EngineArgs {
    fn config(&self, seed: u64) -> RunConfig {
        RunConfig {
            master_seed: seed,
            iteration_cap_factor: self.cap_factor,
            confirm_repeats: self.confirm,
            dense_prefilter_samples: None,
            engine: self.engine,
        }
    }
}

/// Default grid of the `scaling` command.
pub fn default_scaling_grid() -> Vec<(usize, usize)> {
    let mut grid: Vec<(usize, usize)> = (8..=14).map(|b| (1usize << b, 1)).collect();
    grid.extend([2, 4, 8, 16].map(|c| (1usize << 12, c)));
    grid
}

fn parse_grid(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(|item| {
            let (mn, c) =
                item.trim().split_once(':').with_context(|| format!("grid point {item:?} is not of the form mn:c"))?;
            Ok((mn.trim().parse()?, c.trim().parse()?))
        })
        .collect()
}

fn read_set(path: &Path, dim: usize, opts: LoadOptions, label: &str) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {label} from {}", path.display()))?;
    load_dataset(&text, dim, opts).with_context(|| format!("parsing {label} ({})", path.display()))
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one parsed invocation, writing the report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let common = match &cli.command {
        Command::Intersect(a) => &a.common,
        Command::Union(a) => &a.sets.common,
        Command::GroverCurve(a) => &a.common,
        Command::BbhtStats(a) => &a.common,
        Command::Scaling(a) => &a.common,
        Command::VerifyEquivalence(a) => &a.common,
    };
    let seed = common.resolve_seed();
    writeln!(out, "seed: {seed}")?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = common.threads {
        ensure!(t >= 1, "--threads must be at least 1");
        pool = pool.num_threads(t);
    }
    let pool = pool.build().context("starting worker pool")?;
    let mut buf = Vec::new();
    let status = pool.install(|| {
        let w: &mut dyn Write = &mut buf;
        match &cli.command {
            Command::Intersect(args) => intersect(args, seed, w),
            Command::Union(args) => union(args, seed, w),
            Command::GroverCurve(args) => grover_curve(args, seed, w),
            Command::BbhtStats(args) => bbht_stats(args, seed, w),
            Command::Scaling(args) => scaling(args, seed, w),
            Command::VerifyEquivalence(args) => verify_equivalence(args, seed, w),
        }
    });
    out.write_all(&buf)?;
    status
}

fn load_pair(args: &SetArgs) -> Result<(Dataset, Dataset, LoadOptions)> {
    let opts = LoadOptions { value_bound: args.value_bound, dedup: args.dedup };
    let a = read_set(&args.set_a, args.dim, opts, "set A")?;
    let b = read_set(&args.set_b, args.dim, opts, "set B")?;
    Ok((a, b, opts))
}

fn intersect(args: &SetArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let (a, b, _) = load_pair(args)?;
    writeln!(out, "command: intersect")?;
    writeln!(out, "engine: {}", args.engine.engine)?;
    writeln!(
        out,
        "sets: |A| = {} (padded {}), |B| = {} (padded {}), dim = {}",
        a.logical_size(),
        a.padded_size(),
        b.logical_size(),
        b.padded_size(),
        a.dimension()
    )?;
    let res = q_intersection(&a, &b, &args.engine.config(seed)).context("running intersection")?;
    write!(out, "{}", res.report())?;
    if let Some(path) = &args.out {
        let mut buf = Vec::new();
        write_run_rows(&[res.csv_row(seed, &a, &b)], &mut buf)?;
        fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn union(args: &UnionArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let (a, b, opts) = load_pair(&args.sets)?;
    let universe = read_set(&args.universe, args.sets.dim, opts, "universe")?;
    writeln!(out, "command: union")?;
    writeln!(out, "engine: {}", args.sets.engine.engine)?;
    let res = q_union(&a, &b, &universe, &args.sets.engine.config(seed)).context("running union")?;
    let shown: Vec<String> = res.elements.iter().map(ToString::to_string).collect();
    writeln!(out, "A ∪ B = {{{}}}", shown.join(", "))?;
    writeln!(out, "elements: {}", res.elements.len())?;
    match &res.complement_run {
        Some(run) => {
            writeln!(out, "complement intersection:")?;
            write!(out, "{}", run.report())?;
            if let Some(path) = &args.sets.out {
                let mut buf = Vec::new();
                write_run_rows(&[run.csv_row(seed, &a, &b)], &mut buf)?;
                fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None => writeln!(out, "complement intersection: empty complement, no search")?,
    }
    Ok(())
}

#[derive(Serialize)]
struct CurveRow {
    k: usize,
    exact: f64,
    theory: f64,
    delta: f64,
}

fn grover_curve(args: &CurveArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    ensure!(args.mn.is_power_of_two(), "--mn {} is not a power of two", args.mn);
    ensure!(args.t >= 1 && args.t <= args.mn, "--t must lie in 1..={}", args.mn);
    let bits = args.mn.trailing_zeros();
    let (n_bits, m_bits) = (bits.div_ceil(2), bits / 2);
    let k_max = args.k_max.unwrap_or((2.0 * (args.mn as f64).sqrt()) as usize);

    let mut r = rng::seeded(seed);
    let mut indices: Vec<usize> = (0..args.mn).collect();
    indices.shuffle(&mut r);
    let mut s = StateVector::uniform(n_bits, m_bits).context("preparing state")?;
    let marked: MarkedSet = indices[..args.t].iter().map(|&k| s.pair_of(k)).collect();

    writeln!(out, "command: grover-curve")?;
    writeln!(out, "mn: {} (index bits {n_bits}+{m_bits}), t: {}", args.mn, args.t)?;
    writeln!(out, "{:>5} {:>20} {:>20} {:>10}", "k", "exact", "theory", "delta")?;
    let mut rows = Vec::new();
    let mut ledger = QueryLedger::new();
    for k in 0..=k_max {
        let exact = s.success_probability(&marked);
        let theory = theoretical_success(k, args.t, args.mn)?;
        let delta = (exact - theory).abs();
        writeln!(out, "{k:>5} {exact:>20.15} {theory:>20.15} {delta:>10.3e}")?;
        rows.push(CurveRow { k, exact, theory, delta });
        s.grover_power(&marked, 1, &mut ledger)?;
    }
    let worst = rows.iter().map(|r| r.delta).fold(0.0, f64::max);
    writeln!(out, "max delta: {worst:.3e}")?;
    if let Some(path) = &args.out {
        write_csv_rows(path, &rows)?;
    }
    Ok(())
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    (centre - half, centre + half)
}

fn bbht_stats(args: &StatsArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    use rayon::prelude::*;
    ensure!(args.mn.is_power_of_two(), "--mn {} is not a power of two", args.mn);
    ensure!(args.trials >= 1, "--trials must be at least 1");
    let spec = PlantedSpec::for_space(args.mn.trailing_zeros(), args.t);
    let opts = SearchOptions::for_space(args.mn, args.engine.cap_factor, args.engine.engine);
    let runs = (0..args.trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, QueryLedger)> {
            let mut r = rng::trial_stream(seed, 0, t as u32);
            let (a, b) = planted_instance(&spec, &mut r).context("planting instance")?;
            let mut ledger = QueryLedger::new();
            let outcome = subroutine1(&a, &b, &mut r, &mut ledger, &opts).context("running search")?;
            Ok((matches!(outcome, SearchOutcome::Found { .. }), ledger))
        })
        .collect::<Result<Vec<_>>>()?;
    let found = runs.iter().filter(|(f, _)| *f).count();
    let (lo, hi) = wilson_interval(found, args.trials, 1.96);
    let mut queries: Vec<u64> = runs.iter().map(|(_, l)| l.ggi_queries).collect();
    queries.sort_unstable();
    let mean_q = queries.iter().sum::<u64>() as f64 / args.trials as f64;
    let mean_m = runs.iter().map(|(_, l)| l.measurements).sum::<u64>() as f64 / args.trials as f64;

    writeln!(out, "command: bbht-stats")?;
    writeln!(out, "engine: {}", args.engine.engine)?;
    writeln!(out, "mn: {}, t: {}, trials: {}, iteration cap: {}", args.mn, args.t, args.trials, opts.iteration_cap)?;
    writeln!(out, "found: {found}/{}", args.trials)?;
    writeln!(out, "success rate: {:.4} (95% CI {lo:.4}..{hi:.4})", found as f64 / args.trials as f64)?;
    writeln!(out, "mean ggi_queries: {mean_q:.3}")?;
    writeln!(out, "median ggi_queries: {}", queries[queries.len() / 2])?;
    writeln!(out, "mean measurements: {mean_m:.3}")?;
    if args.t >= 1 {
        writeln!(out, "sqrt(mn/t): {:.3}", (args.mn as f64 / args.t as f64).sqrt())?;
    }
    Ok(())
}

fn scaling(args: &ScalingArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let grid = match &args.grid {
        Some(text) => parse_grid(text).context("parsing --grid")?,
        None => default_scaling_grid(),
    };
    let points = run_scaling_experiment(&grid, args.trials, seed, &args.engine.config(seed))
        .context("running scaling experiment")?;
    writeln!(out, "command: scaling")?;
    writeln!(out, "engine: {}", args.engine.engine)?;
    write!(out, "{}", summary_table(&points))?;

    let by_mn: Vec<_> = points.iter().filter(|p| p.c_size == 1).map(|p| (p.mn as f64, p.mean_queries)).collect();
    if let Ok(fit) = fit_exponent(&by_mn) {
        writeln!(out, "slope vs mn at |C| = 1: {:.4} ± {:.4}", fit.slope, fit.std_error)?;
    }
    if let Some(mn) = points.iter().map(|p| p.mn).max_by_key(|&mn| points.iter().filter(|p| p.mn == mn).count()) {
        let by_c: Vec<_> =
            points.iter().filter(|p| p.mn == mn && p.c_size >= 1).map(|p| (p.c_size as f64, p.mean_queries)).collect();
        if let Ok(fit) = fit_exponent(&by_c) {
            writeln!(out, "slope vs |C| at mn = {mn}: {:.4} ± {:.4}", fit.slope, fit.std_error)?;
        }
    }
    if let Ok(l) = fit_lambda(&points) {
        writeln!(
            out,
            "lambda_fit: {:.4} (ratios {:.4}..{:.4}, max deviation {:.1}%)",
            l.lambda,
            l.min_ratio,
            l.max_ratio,
            100.0 * l.max_relative_deviation
        )?;
    }
    if let Some(path) = &args.out {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_scaling_csv(&points, file)?;
    }
    Ok(())
}

/// Random instance whose padded sizes are exactly `2^n_bits` and `2^m_bits`.
pub fn random_layout_instance<R: Rng + ?Sized>(
    n_bits: u32,
    m_bits: u32,
    dim: usize,
    value_bound: u32,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    let space = (value_bound as usize).checked_pow(dim as u32).filter(|&s| s <= 1 << 20);
    let Some(space) = space else { bail!("value space {value_bound}^{dim} is too large to enumerate") };
    let opts = LoadOptions { value_bound, dedup: false };
    let mut pick = |bits: u32| -> Result<Dataset> {
        let size = 1usize << bits;
        let low = size / 2 + 1;
        ensure!(low <= space, "value space of {space} records cannot fill {size} slots");
        let live = rng.random_range(low..=size.min(space));
        let mut codes: Vec<usize> = (0..space).collect();
        codes.shuffle(rng);
        let rows = codes[..live]
            .iter()
            .map(|&code| {
                (0..dim)
                    .rev()
                    .map(|c| ((code / (value_bound as usize).pow(c as u32)) % value_bound as usize) as u32)
                    .collect()
            })
            .collect();
        Ok(Dataset::from_rows(rows, dim, opts)?)
    };
    let a = pick(n_bits)?;
    let b = pick(m_bits)?;
    Ok((a, b))
}

/// Outcome of comparing the five-register circuit with the reduced engine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub max_delta: f64,
    pub max_ancilla_mass: f64,
    pub iterations: usize,
}

/// Applies `k_max` generalized iterations and `k_max` reduced iterations side
/// by side, tracking the worst amplitude difference and ancilla leakage.
pub fn compare_engines(a: &Dataset, b: &Dataset, k_max: usize) -> crate::error::Result<EquivalenceReport> {
    let layout = RegisterLayout::for_datasets(a, b)?;
    let marked = marked_pairs(a, b)?;
    let mut full = CircuitState::init_superposed(layout, a, b)?;
    let mut reduced = StateVector::uniform(a.index_bits(), b.index_bits())?;
    let mut ledger = QueryLedger::new();
    let mut report = EquivalenceReport { max_delta: 0.0, max_ancilla_mass: 0.0, iterations: k_max };
    let mut track = |full: &CircuitState, reduced: &StateVector| -> crate::error::Result<()> {
        report.max_ancilla_mass = report.max_ancilla_mass.max(full.ancilla_mass());
        let projected = full.reduce_to_index()?;
        for (x, y) in projected.amplitudes().iter().zip(reduced.amplitudes()) {
            report.max_delta = report.max_delta.max((x - y).norm());
        }
        Ok(())
    };
    track(&full, &reduced)?;
    for _ in 0..k_max {
        full.apply_ggi(a, b, &mut ledger)?;
        reduced.grover_power(&marked, 1, &mut ledger)?;
        track(&full, &reduced)?;
    }
    Ok(report)
}

fn verify_equivalence(args: &EquivalenceArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let layout = RegisterLayout::new(args.n_bits, args.m_bits, args.dim, args.value_bound)
        .context("building register layout")?;
    let mn = 1usize << (args.n_bits + args.m_bits);
    let k_max = args.k_max.unwrap_or((2.0 * (mn as f64).sqrt()) as usize);
    writeln!(out, "command: verify-equivalence")?;
    writeln!(
        out,
        "layout: {}+{} index bits, 2x{} value bits, 1 flag bit = {} bits",
        args.n_bits,
        args.m_bits,
        layout.value_bits(),
        layout.total_bits()
    )?;
    let mut worst = EquivalenceReport { max_delta: 0.0, max_ancilla_mass: 0.0, iterations: k_max };
    for n in 0..args.instances {
        let mut r = rng::stream(seed, n as u64);
        let (a, b) = random_layout_instance(args.n_bits, args.m_bits, args.dim, args.value_bound, &mut r)
            .context("generating instance")?;
        let marked = marked_pairs(&a, &b)?.len();
        let rep = compare_engines(&a, &b, k_max).context("comparing engines")?;
        writeln!(
            out,
            "instance {n:>3}: |A|={} |B|={} t={marked} k<= {k_max} max delta {:.3e} ancilla mass {:.3e}",
            a.logical_size(),
            b.logical_size(),
            rep.max_delta,
            rep.max_ancilla_mass
        )?;
        worst.max_delta = worst.max_delta.max(rep.max_delta);
        worst.max_ancilla_mass = worst.max_ancilla_mass.max(rep.max_ancilla_mass);
    }
    writeln!(out, "max amplitude delta: {:.3e}", worst.max_delta)?;
    writeln!(out, "max ancilla mass: {:.3e}", worst.max_ancilla_mass)?;
    ensure!(
        worst.max_delta <= EQUIVALENCE_TOLERANCE && worst.max_ancilla_mass < ANCILLA_TOLERANCE,
        "equivalence check failed"
    );
    writeln!(out, "max amplitude delta ≤ 1e-10, ancilla mass < 1e-12: ok")?;
    Ok(())
}
