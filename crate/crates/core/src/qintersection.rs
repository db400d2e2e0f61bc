//! Hybrid intersection loop.
//!
//! Repeatedly searches for one matching pair, records its value, and
//! tombstones both records in the classical database so the next search sees
//! one solution fewer. Once a search comes back empty the loop re-searches
//! `confirm_repeats` more times; any hit resumes the loop, all misses halt it.
//! A short classical sampling pass runs first to strip solutions from very
//! dense instances, where amplitude amplification does not help.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io;

use rand::Rng;
use serde::Serialize;

use crate::amplification::{subroutine1, Engine, SearchOptions, SearchOutcome, DEFAULT_CAP_FACTOR};
use crate::dataset::{marked_pairs, match_fn, tombstone_pair, Dataset, LoadOptions, Record};
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::rng;

pub const DEFAULT_CONFIRM_REPEATS: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub master_seed: u64,
    pub iteration_cap_factor: f64,
    pub confirm_repeats: usize,
    /// `None` selects `4 * ceil(log2(MN + 1))`.
    pub dense_prefilter_samples: Option<usize>,
    pub engine: Engine,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            iteration_cap_factor: DEFAULT_CAP_FACTOR,
            confirm_repeats: DEFAULT_CONFIRM_REPEATS,
            dense_prefilter_samples: None,
            engine: Engine::Reduced,
        }
    }
}

impl RunConfig {
    pub fn with_seed(master_seed: u64) -> Self {
        Self { master_seed, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.confirm_repeats < 1 {
            return Err(Error::InvalidParameter("confirm repeats must be at least 1".into()));
        }
        if self.iteration_cap_factor.is_nan() || self.iteration_cap_factor < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "cap factor {} must be at least 1",
                self.iteration_cap_factor
            )));
        }
        Ok(())
    }

    pub fn prefilter_samples(&self, search_space: usize) -> usize {
        self.dense_prefilter_samples.unwrap_or_else(|| {
            let bits = usize::BITS - search_space.leading_zeros();
            // ceil(log2(mn + 1)) is the bit length of mn
            4 * bits as usize
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Main loop.
    Search,
    /// Re-search after an empty result.
    Confirm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RoundOutcome {
    Found {
        i: usize,
        j: usize,
        record: Record,
    },
    NoOutput,
    /// A search returned a value already collected; tombstoning makes this
    /// unreachable, so any occurrence is a defect.
    RejectedDuplicate {
        i: usize,
        j: usize,
        record: Record,
    },
}

/// One call of the search subroutine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundRecord {
    pub phase: Phase,
    pub outcome: RoundOutcome,
    /// Matching pairs left in the database when the call started.
    pub solutions_before: usize,
    /// Ledger query count after the call.
    pub cumulative_queries: u64,
}

/// A solution found by classical sampling before the quantum loop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefilterHit {
    pub i: usize,
    pub j: usize,
    pub record: Record,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionResult {
    pub elements: BTreeSet<Record>,
    pub ledger: QueryLedger,
    pub rounds: usize,
    pub prefilter_hits: Vec<PrefilterHit>,
    pub trace: Vec<RoundRecord>,
}

impl IntersectionResult {
    /// Calls made while at least one solution remained.
    pub fn calls_with_solutions(&self) -> usize {
        self.trace.iter().filter(|r| r.solutions_before > 0).count()
    }

    pub fn found_calls(&self) -> usize {
        self.trace.iter().filter(|r| matches!(r.outcome, RoundOutcome::Found { .. })).count()
    }

    /// Queries spent up to and including the call that found the last element.
    pub fn discovery_queries(&self) -> u64 {
        self.trace
            .iter()
            .rev()
            .find(|r| matches!(r.outcome, RoundOutcome::Found { .. }))
            .map_or(0, |r| r.cumulative_queries)
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let shown: Vec<String> = self.elements.iter().map(Record::to_string).collect();
        let _ = writeln!(out, "C = {{{}}}", shown.join(", "));
        let _ = writeln!(out, "elements: {}", self.elements.len());
        let _ = writeln!(out, "rounds: {}", self.rounds);
        let _ = writeln!(out, "ggi_queries: {}", self.ledger.ggi_queries);
        let _ = writeln!(out, "measurements: {}", self.ledger.measurements);
        let _ = writeln!(out, "classical_checks: {}", self.ledger.classical_checks);
        let _ = writeln!(out, "prefilter_hits: {}", self.prefilter_hits.len());
        for hit in &self.prefilter_hits {
            let _ = writeln!(out, "  prefilter ({}, {}) {}", hit.i, hit.j, hit.record);
        }
        let _ = writeln!(out, "trace:");
        for (n, r) in self.trace.iter().enumerate() {
            let phase = match r.phase {
                Phase::Search => "search",
                Phase::Confirm => "confirm",
            };
            let what = match &r.outcome {
                RoundOutcome::Found { i, j, record } => format!("found ({i}, {j}) {record}"),
                RoundOutcome::NoOutput => "no-output".to_string(),
                RoundOutcome::RejectedDuplicate { i, j, record } => format!("rejected-duplicate ({i}, {j}) {record}"),
            };
            let _ = writeln!(
                out,
                "  {:>3} {phase:<7} {what} [remaining {}, queries {}]",
                n + 1,
                r.solutions_before,
                r.cumulative_queries
            );
        }
        out
    }

    pub fn csv_row(&self, seed: u64, a: &Dataset, b: &Dataset) -> RunRow {
        RunRow {
            seed,
            size_a: a.logical_size(),
            size_b: b.logical_size(),
            elements: self.elements.len(),
            rounds: self.rounds,
            ggi_queries: self.ledger.ggi_queries,
            measurements: self.ledger.measurements,
            classical_checks: self.ledger.classical_checks,
        }
    }
}

/// Machine-readable summary of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunRow {
    pub seed: u64,
    pub size_a: usize,
    pub size_b: usize,
    pub elements: usize,
    pub rounds: usize,
    pub ggi_queries: u64,
    pub measurements: u64,
    pub classical_checks: u64,
}

pub fn write_run_rows<W: io::Write>(rows: &[RunRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Classically samples `samples` uniform index pairs and tombstones every hit.
pub fn dense_prefilter<R: Rng + ?Sized>(
    a: &mut Dataset,
    b: &mut Dataset,
    rng: &mut R,
    samples: usize,
    ledger: &mut QueryLedger,
) -> Result<Vec<PrefilterHit>> {
    if samples == 0 {
        return Err(Error::InvalidParameter("prefilter needs at least one sample".into()));
    }
    let mut hits = Vec::new();
    for _ in 0..samples {
        let i = rng.random_range(0..a.padded_size());
        let j = rng.random_range(0..b.padded_size());
        ledger.classical_checks += 1;
        if match_fn(&a.records()[i], &b.records()[j])? {
            let record = a.records()[i].clone();
            tombstone_pair(a, i, b, j)?;
            hits.push(PrefilterHit { i, j, record });
        }
    }
    Ok(hits)
}

/// Computes `A ∩ B` with the generator seeded from `config.master_seed`.
pub fn q_intersection(a: &Dataset, b: &Dataset, config: &RunConfig) -> Result<IntersectionResult> {
    q_intersection_with_rng(a, b, config, &mut rng::seeded(config.master_seed))
}

pub fn q_intersection_with_rng<R: Rng + ?Sized>(
    a: &Dataset,
    b: &Dataset,
    config: &RunConfig,
    rng: &mut R,
) -> Result<IntersectionResult> {
    config.validate()?;
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch { left: a.dimension(), right: b.dimension() });
    }
    let mut run = Run {
        a: a.clone(),
        b: b.clone(),
        opts: SearchOptions::for_space(a.padded_size() * b.padded_size(), config.iteration_cap_factor, config.engine),
        result: IntersectionResult {
            elements: BTreeSet::new(),
            ledger: QueryLedger::new(),
            rounds: 0,
            prefilter_hits: Vec::new(),
            trace: Vec::new(),
        },
    };

    let samples = config.prefilter_samples(a.padded_size() * b.padded_size());
    let hits = dense_prefilter(&mut run.a, &mut run.b, rng, samples, &mut run.result.ledger)?;
    run.result.elements.extend(hits.iter().map(|h| h.record.clone()));
    run.result.prefilter_hits = hits;

    loop {
        while run.step(Phase::Search, rng)? {}
        let mut resumed = false;
        for _ in 0..config.confirm_repeats {
            if run.step(Phase::Confirm, rng)? {
                resumed = true;
                break;
            }
        }
        if !resumed {
            return Ok(run.result);
        }
    }
}

struct Run {
    a: Dataset,
    b: Dataset,
    opts: SearchOptions,
    result: IntersectionResult,
}

impl Run {
    /// One search call; returns whether it produced a solution.
    fn step<R: Rng + ?Sized>(&mut self, phase: Phase, rng: &mut R) -> Result<bool> {
        let solutions_before = marked_pairs(&self.a, &self.b)?.len();
        let outcome = subroutine1(&self.a, &self.b, rng, &mut self.result.ledger, &self.opts)?;
        self.result.rounds += 1;
        let (outcome, found) = match outcome {
            SearchOutcome::Found { i, j } => {
                let record = self.a.records()[i].clone();
                tombstone_pair(&mut self.a, i, &mut self.b, j)?;
                if self.result.elements.insert(record.clone()) {
                    (RoundOutcome::Found { i, j, record }, true)
                } else {
                    (RoundOutcome::RejectedDuplicate { i, j, record }, true)
                }
            }
            SearchOutcome::NoSolution => (RoundOutcome::NoOutput, false),
        };
        self.result.trace.push(RoundRecord {
            phase,
            outcome,
            solutions_before,
            cumulative_queries: self.result.ledger.ggi_queries,
        });
        Ok(found)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnionResult {
    pub elements: BTreeSet<Record>,
    /// The intersection run over the complements; `None` when a complement
    /// was empty and no search was needed.
    pub complement_run: Option<IntersectionResult>,
}

/// `A ∪ B = U ∖ ((U ∖ A) ∩ (U ∖ B))`, with the inner intersection computed
/// by [`q_intersection`].
pub fn q_union(a: &Dataset, b: &Dataset, universe: &Dataset, config: &RunConfig) -> Result<UnionResult> {
    for ds in [a, b] {
        if ds.dimension() != universe.dimension() {
            return Err(Error::DimensionMismatch { left: ds.dimension(), right: universe.dimension() });
        }
    }
    let in_universe: HashSet<&[u32]> = universe.live().map(Record::values).collect();
    for r in a.live().chain(b.live()) {
        if !in_universe.contains(r.values()) {
            return Err(Error::NotInUniverse(r.to_string()));
        }
    }
    let complement = |ds: &Dataset| -> Vec<Vec<u32>> {
        let present: HashSet<&[u32]> = ds.live().map(Record::values).collect();
        universe.live().filter(|r| !present.contains(r.values())).map(|r| r.values().to_vec()).collect()
    };
    let (rows_a, rows_b) = (complement(a), complement(b));
    let (missing, complement_run) = if rows_a.is_empty() || rows_b.is_empty() {
        (BTreeSet::new(), None)
    } else {
        let opts = LoadOptions { value_bound: universe.value_bound(), dedup: false };
        let ca = Dataset::from_rows(rows_a, universe.dimension(), opts)?;
        let cb = Dataset::from_rows(rows_b, universe.dimension(), opts)?;
        let run = q_intersection(&ca, &cb, config)?;
        (run.elements.clone(), Some(run))
    };
    let elements = universe.live().filter(|r| !missing.contains(*r)).cloned().collect();
    Ok(UnionResult { elements, complement_run })
}
