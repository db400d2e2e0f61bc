//! Amplitude amplification with an unknown number of solutions.
//!
//! [`subroutine1`] is the BBHT schedule driven by the generalized Grover
//! iteration over index pairs: draw `k` uniformly from `{0, ..., floor(Γ)}`,
//! run `k` iterations from the uniform state, measure both index registers,
//! verify the pair classically, and otherwise grow `Γ <- min(λΓ, sqrt(MN))`.
//! [`bbht_reference`] is the textbook single-register loop, kept separate so
//! the two can be compared draw for draw.

use rand::Rng;

use crate::dataset::{marked_pairs, match_fn, Dataset, MarkedSet};
use crate::error::{Error, Result};
use crate::full_circuit::{CircuitState, RegisterLayout};
use crate::ledger::QueryLedger;
use crate::statevector::StateVector;

/// Growth factor of the iteration bound.
pub const LAMBDA_GROWTH: f64 = 6.0 / 5.0;

/// Default iteration budget per call, in units of `ceil(sqrt(MN))`.
pub const DEFAULT_CAP_FACTOR: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct BbhtState {
    gamma: f64,
    lambda_growth: f64,
    cap: f64,
    total_ggi: u64,
}

impl BbhtState {
    pub fn new(search_space: usize) -> Self {
        Self { gamma: 1.0, lambda_growth: LAMBDA_GROWTH, cap: (search_space as f64).sqrt().max(1.0), total_ggi: 0 }
    }

    /// Uses a custom growth factor; it must lie strictly between 1 and 4/3.
    pub fn with_growth(search_space: usize, lambda_growth: f64) -> Result<Self> {
        if !(lambda_growth > 1.0 && lambda_growth < 4.0 / 3.0) {
            return Err(Error::InvalidParameter(format!("growth factor {lambda_growth} outside (1, 4/3)")));
        }
        Ok(Self { lambda_growth, ..Self::new(search_space) })
    }

    /// Restarts the schedule from a given bound, `1 <= gamma <= sqrt(MN)`.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(1.0..=self.cap).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gamma {gamma} outside [1, {}]", self.cap)));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda_growth(&self) -> f64 {
        self.lambda_growth
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn total_ggi(&self) -> u64 {
        self.total_ggi
    }

    /// Draws `k` uniformly from `{0, 1, ..., floor(gamma)}`.
    pub fn choose_iterations<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..=self.gamma.floor() as usize)
    }

    pub fn grow_gamma(&mut self) {
        self.gamma = (self.lambda_growth * self.gamma).min(self.cap);
    }

    fn record(&mut self, k: usize) {
        self.total_ggi += k as u64;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Engine {
    /// Phase oracle on the joint index space.
    #[default]
    Reduced,
    /// Five-register circuit; limited to small layouts.
    Full,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reduced" => Ok(Engine::Reduced),
            "full" => Ok(Engine::Full),
            other => Err(Error::InvalidParameter(format!("unknown engine {other:?}"))),
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::Reduced => "reduced",
            Engine::Full => "full",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchOptions {
    pub engine: Engine,
    /// Total Grover applications allowed per call before giving up.
    pub iteration_cap: u64,
}

impl SearchOptions {
    pub fn new(engine: Engine, iteration_cap: u64) -> Self {
        Self { engine, iteration_cap }
    }

    /// Budget of `ceil(cap_factor * ceil(sqrt(mn)))` applications.
    pub fn for_space(search_space: usize, cap_factor: f64, engine: Engine) -> Self {
        Self { engine, iteration_cap: iteration_cap(search_space, cap_factor) }
    }
}

pub fn iteration_cap(search_space: usize, cap_factor: f64) -> u64 {
    let root = (search_space as f64).sqrt().ceil();
    ((cap_factor * root).ceil() as u64).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Found { i: usize, j: usize },
    NoSolution,
}

enum Oracle {
    Reduced(MarkedSet),
    Full(RegisterLayout),
}

/// Finds one matching pair of `a x b`, or reports that none turned up within
/// the iteration budget.
pub fn subroutine1<R: Rng + ?Sized>(
    a: &Dataset,
    b: &Dataset,
    rng: &mut R,
    ledger: &mut QueryLedger,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch { left: a.dimension(), right: b.dimension() });
    }
    if opts.iteration_cap == 0 {
        return Err(Error::InvalidParameter("iteration cap must be at least 1".into()));
    }
    let (n_bits, m_bits) = (a.index_bits(), b.index_bits());
    let oracle = match opts.engine {
        // The simulator reads the solution set off the database to build the
        // phase oracle; the search itself only sees measurement outcomes.
        Engine::Reduced => Oracle::Reduced(marked_pairs(a, b)?),
        Engine::Full => Oracle::Full(RegisterLayout::for_datasets(a, b)?),
    };
    let mut state = BbhtState::new(a.padded_size() * b.padded_size());
    loop {
        let k = state.choose_iterations(rng);
        let amplified = match &oracle {
            Oracle::Reduced(marked) => {
                let mut s = StateVector::uniform(n_bits, m_bits)?;
                s.grover_power(marked, k, ledger)?;
                s
            }
            Oracle::Full(layout) => {
                let mut s = CircuitState::init_superposed(*layout, a, b)?;
                for _ in 0..k {
                    s.apply_ggi(a, b, ledger)?;
                }
                s.reduce_to_index()?
            }
        };
        state.record(k);
        let (i, j) = amplified.measure(rng, ledger)?;
        ledger.classical_checks += 1;
        if match_fn(&a.records()[i], &b.records()[j])? {
            return Ok(SearchOutcome::Found { i, j });
        }
        if state.total_ggi() > opts.iteration_cap {
            return Ok(SearchOutcome::NoSolution);
        }
        state.grow_gamma();
    }
}

/// Outcome of one [`bbht_reference`] call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BbhtReport {
    pub found: Option<usize>,
    pub grover_iterations: u64,
    pub measurements: u64,
}

/// Single-register BBHT search over a table of marked flags, with its own
/// real-amplitude Grover loop. Consumes random numbers in the same order as
/// [`subroutine1`], so an `N x 1` instance replays identically.
pub fn bbht_reference<R: Rng + ?Sized>(marked_flags: &[bool], rng: &mut R, cap: u64) -> Result<BbhtReport> {
    let n = marked_flags.len();
    if !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("table length {n} is not a power of two")));
    }
    let limit = (n as f64).sqrt();
    let mut gamma: f64 = 1.0;
    let mut report = BbhtReport { found: None, grover_iterations: 0, measurements: 0 };
    loop {
        let k = rng.random_range(0..=gamma.floor() as usize);
        let mut amps = vec![1.0 / limit; n];
        for _ in 0..k {
            for (a, &marked) in amps.iter_mut().zip(marked_flags) {
                if marked {
                    *a = -*a;
                }
            }
            let mean = amps.iter().sum::<f64>() / n as f64;
            for a in &mut amps {
                *a = mean * 2.0 - *a;
            }
        }
        report.grover_iterations += k as u64;

        let norm: f64 = amps.iter().map(|a| a * a).sum();
        let target = rng.random::<f64>() * norm;
        report.measurements += 1;
        let mut acc = 0.0;
        let mut observed = None;
        let mut last_positive = 0;
        for (idx, a) in amps.iter().enumerate() {
            let p = a * a;
            if p > 0.0 {
                last_positive = idx;
            }
            acc += p;
            if target < acc {
                observed = Some(idx);
                break;
            }
        }
        let observed = observed.unwrap_or(last_positive);

        if marked_flags[observed] {
            report.found = Some(observed);
            return Ok(report);
        }
        if report.grover_iterations > cap {
            return Ok(report);
        }
        gamma = (LAMBDA_GROWTH * gamma).min(limit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::{intro_a, intro_b};
    use crate::dataset::LoadOptions;
    use crate::planted::{planted_instance, PlantedSpec};
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn choose_iterations_at_gamma_one_is_fair_coin() {
        let state = BbhtState::new(64);
        let mut r = rng::seeded(17);
        let n = 10_000;
        let ones = (0..n).filter(|_| state.choose_iterations(&mut r) == 1).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn choose_iterations_uses_floor() {
        let state = BbhtState::new(64).with_gamma(2.5).unwrap();
        let mut r = rng::seeded(4);
        let mut seen = [false; 3];
        for _ in 0..1000 {
            let k = state.choose_iterations(&mut r);
            assert!(k <= 2);
            seen[k] = true;
        }
        assert_eq!(seen, [true; 3]);
        let draws = |seed| {
            let mut r = rng::seeded(seed);
            (0..32).map(|_| state.choose_iterations(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draws(9), draws(9));
    }

    #[test]
    fn grow_gamma_examples() {
        let mut s = BbhtState::new(64);
        s.grow_gamma();
        assert!((s.gamma() - 1.2).abs() < 1e-15);
        s.grow_gamma();
        assert!((s.gamma() - 1.44).abs() < 1e-15);
        let mut s = BbhtState::new(64).with_gamma(7.9).unwrap();
        s.grow_gamma();
        assert_eq!(s.gamma(), 8.0);
        assert!(BbhtState::new(64).with_gamma(8.5).is_err());
        assert!(BbhtState::with_growth(64, 4.0 / 3.0).is_err());
        assert!(BbhtState::with_growth(64, 1.0).is_err());
        assert_eq!(BbhtState::with_growth(64, 1.3).unwrap().lambda_growth(), 1.3);
    }

    #[test]
    fn default_iteration_cap() {
        assert_eq!(iteration_cap(16, DEFAULT_CAP_FACTOR), 12);
        assert_eq!(iteration_cap(1000, DEFAULT_CAP_FACTOR), 96);
        assert_eq!(iteration_cap(1, 1.0), 1);
    }

    #[test]
    fn intro_sets_found_more_often_than_not() {
        let (a, b) = (intro_a(), intro_b());
        let opts = SearchOptions::for_space(16, DEFAULT_CAP_FACTOR, Engine::Reduced);
        let mut found = 0;
        for seed in 0..1000 {
            let mut ledger = QueryLedger::new();
            match subroutine1(&a, &b, &mut rng::seeded(seed), &mut ledger, &opts).unwrap() {
                SearchOutcome::Found { i, j } => {
                    assert_eq!((i, j), (2, 2));
                    found += 1;
                }
                SearchOutcome::NoSolution => {}
            }
            assert_eq!(ledger.measurements, ledger.classical_checks);
        }
        assert!(found > 500, "{found}");
    }

    #[test]
    fn disjoint_sets_never_report_a_solution() {
        let opts_rows = LoadOptions::default();
        let a = Dataset::from_rows(vec![vec![1], vec![2], vec![3]], 1, opts_rows).unwrap();
        let b = Dataset::from_rows(vec![vec![4], vec![5], vec![6], vec![7]], 1, opts_rows).unwrap();
        let opts = SearchOptions::for_space(16, DEFAULT_CAP_FACTOR, Engine::Reduced);
        for seed in 0..1000 {
            let mut ledger = QueryLedger::new();
            let out = subroutine1(&a, &b, &mut rng::seeded(seed), &mut ledger, &opts).unwrap();
            assert_eq!(out, SearchOutcome::NoSolution);
            assert!(ledger.ggi_queries > opts.iteration_cap);
            // the overshoot is bounded by one draw of at most sqrt(MN) iterations
            assert!(ledger.ggi_queries <= opts.iteration_cap + 4);
        }
    }

    #[test]
    fn planted_four_solutions_query_budget() {
        let spec = PlantedSpec::for_space(10, 4);
        let mut total = 0u64;
        let trials = 1000;
        for seed in 0..trials {
            let mut r = rng::stream(99, seed);
            let (a, b) = planted_instance(&spec, &mut r).unwrap();
            let opts = SearchOptions::for_space(1024, DEFAULT_CAP_FACTOR, Engine::Reduced);
            let mut ledger = QueryLedger::new();
            subroutine1(&a, &b, &mut r, &mut ledger, &opts).unwrap();
            total += ledger.ggi_queries;
        }
        let mean = total as f64 / trials as f64;
        assert!(mean <= 4.0 * (1024.0f64 / 4.0).sqrt(), "{mean}");
    }

    #[test]
    fn full_engine_replays_reduced_engine() {
        let opts_rows = LoadOptions { value_bound: 4, dedup: false };
        let a = Dataset::from_rows(vec![vec![0], vec![1], vec![3]], 1, opts_rows).unwrap();
        let b = Dataset::from_rows(vec![vec![2], vec![3], vec![1], vec![0]], 1, opts_rows).unwrap();
        for seed in 0..200 {
            let run = |engine| {
                let opts = SearchOptions::for_space(16, DEFAULT_CAP_FACTOR, engine);
                let mut ledger = QueryLedger::new();
                let out = subroutine1(&a, &b, &mut rng::seeded(seed), &mut ledger, &opts).unwrap();
                (out, ledger)
            };
            assert_eq!(run(Engine::Reduced), run(Engine::Full));
        }
    }

    #[test]
    fn reference_single_marked() {
        let mut flags = vec![false; 16];
        flags[11] = true;
        let cap = iteration_cap(16, DEFAULT_CAP_FACTOR);
        let found =
            (0..1000).filter(|&s| bbht_reference(&flags, &mut rng::seeded(s), cap).unwrap().found == Some(11)).count();
        assert!(found > 500, "{found}");
    }

    #[test]
    fn reference_edge_tables() {
        let all = vec![true; 8];
        for s in 0..50 {
            let rep = bbht_reference(&all, &mut rng::seeded(s), 9).unwrap();
            assert!(rep.found.is_some());
            assert_eq!(rep.measurements, 1);
        }
        let none = vec![false; 8];
        let rep = bbht_reference(&none, &mut rng::seeded(1), 9).unwrap();
        assert_eq!(rep.found, None);
        assert!(rep.grover_iterations > 9);
        assert!(bbht_reference(&[false; 6], &mut rng::seeded(1), 9).is_err());
    }

    #[test]
    fn degenerate_second_register_matches_reference() {
        let spec = PlantedSpec { size_a: 32, size_b: 1, common: 1, dimension: 2, value_bound: 256 };
        for seed in 0..300 {
            let (a, b) = planted_instance(&spec, &mut rng::seeded(seed)).unwrap();
            let flags: Vec<bool> = a.records().iter().map(|r| match_fn(r, &b.records()[0]).unwrap()).collect();
            let opts = SearchOptions::for_space(32, DEFAULT_CAP_FACTOR, Engine::Reduced);
            let mut ledger = QueryLedger::new();
            let ours = subroutine1(&a, &b, &mut rng::stream(seed, 1), &mut ledger, &opts).unwrap();
            let reference = bbht_reference(&flags, &mut rng::stream(seed, 1), opts.iteration_cap).unwrap();
            let ours_index = match ours {
                SearchOutcome::Found { i, j } => {
                    assert_eq!(j, 0);
                    Some(i)
                }
                SearchOutcome::NoSolution => None,
            };
            assert_eq!(ours_index, reference.found);
            assert_eq!(ledger.ggi_queries, reference.grover_iterations);
            assert_eq!(ledger.measurements, reference.measurements);
        }
    }

    proptest! {
        #[test]
        fn gamma_stays_within_bounds(bits in 0u32..20, steps in 0usize..200) {
            let mut s = BbhtState::new(1 << bits);
            for _ in 0..steps {
                s.grow_gamma();
                prop_assert!(s.gamma() >= 1.0 && s.gamma() <= s.cap());
            }
        }
    }
}
