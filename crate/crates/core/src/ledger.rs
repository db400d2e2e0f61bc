use serde::Serialize;

/// Accounting of oracle queries, measurements and classical comparisons.
///
/// One `ggi_queries` unit is one application of the generalized Grover
/// iteration (load, compute, phase flip, uncompute, unload, diffusion).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QueryLedger {
    pub ggi_queries: u64,
    pub measurements: u64,
    pub classical_checks: u64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn absorb(&mut self, other: &QueryLedger) {
        self.ggi_queries += other.ggi_queries;
        self.measurements += other.measurements;
        self.classical_checks += other.classical_checks;
    }
}
