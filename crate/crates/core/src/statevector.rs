//! Reduced Grover engine on the joint index space of two sets.
//!
//! Basis state `k = (i << m_bits) | j` stands for the index pair `(i, j)`. The
//! load/compute/uncompute block of the generalized iteration acts on this
//! space exactly as a phase flip on marked pairs (see `full_circuit` for the
//! five-register check), so this engine applies the flip directly.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::dataset::MarkedSet;
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;

/// Default cap on `n_bits + m_bits` (2^26 amplitudes, 1 GiB).
pub const DEFAULT_MAX_INDEX_BITS: u32 = 26;

/// Tolerance on the norm before sampling.
pub const MEASURE_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    n_bits: u32,
    m_bits: u32,
}

impl StateVector {
    /// Uniform superposition `1/sqrt(MN)` over all index pairs.
    pub fn uniform(n_bits: u32, m_bits: u32) -> Result<Self> {
        Self::uniform_with_cap(n_bits, m_bits, DEFAULT_MAX_INDEX_BITS)
    }

    pub fn uniform_with_cap(n_bits: u32, m_bits: u32, cap: u32) -> Result<Self> {
        let bits = n_bits + m_bits;
        if bits > cap {
            return Err(Error::CapExceeded { bits, cap });
        }
        let len = 1usize << bits;
        let amp = Complex64::new(1.0 / (len as f64).sqrt(), 0.0);
        Ok(Self { amps: vec![amp; len], n_bits, m_bits })
    }

    /// Wraps raw amplitudes; the length must be `2^(n_bits + m_bits)`.
    pub fn from_amplitudes(n_bits: u32, m_bits: u32, amps: Vec<Complex64>) -> Result<Self> {
        let expected = 1usize << (n_bits + m_bits);
        if amps.len() != expected {
            return Err(Error::InvalidParameter(format!("expected {expected} amplitudes, got {}", amps.len())));
        }
        Ok(Self { amps, n_bits, m_bits })
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn m_bits(&self) -> u32 {
        self.m_bits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn index_of(&self, i: usize, j: usize) -> usize {
        (i << self.m_bits) | j
    }

    pub fn pair_of(&self, k: usize) -> (usize, usize) {
        (k >> self.m_bits, k & ((1usize << self.m_bits) - 1))
    }

    pub fn amplitude(&self, i: usize, j: usize) -> Complex64 {
        self.amps[self.index_of(i, j)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn marked_indices(&self, marked: &MarkedSet) -> Result<Vec<usize>> {
        let (n, m) = (1usize << self.n_bits, 1usize << self.m_bits);
        marked
            .iter()
            .map(|(i, j)| {
                if i >= n {
                    Err(Error::IndexOutOfRange { index: i, size: n })
                } else if j >= m {
                    Err(Error::IndexOutOfRange { index: j, size: m })
                } else {
                    Ok(self.index_of(i, j))
                }
            })
            .collect()
    }

    /// Negates the amplitude of every marked pair.
    pub fn apply_phase_oracle(&mut self, marked: &MarkedSet) -> Result<()> {
        let idx = self.marked_indices(marked)?;
        self.flip(&idx);
        Ok(())
    }

    fn flip(&mut self, indices: &[usize]) {
        for &k in indices {
            self.amps[k] = -self.amps[k];
        }
    }

    /// Reflection about the uniform superposition: `a_k -> 2 mean - a_k`.
    pub fn apply_diffusion(&mut self) {
        let mean = self.amps.iter().sum::<Complex64>() / self.amps.len() as f64;
        let twice = mean * 2.0;
        for a in &mut self.amps {
            *a = twice - *a;
        }
    }

    /// Applies `k` Grover iterations and charges `k` queries to the ledger.
    pub fn grover_power(&mut self, marked: &MarkedSet, k: usize, ledger: &mut QueryLedger) -> Result<()> {
        let idx = self.marked_indices(marked)?;
        for _ in 0..k {
            self.flip(&idx);
            self.apply_diffusion();
        }
        ledger.ggi_queries += k as u64;
        Ok(())
    }

    /// Total probability on the marked pairs.
    pub fn success_probability(&self, marked: &MarkedSet) -> f64 {
        marked
            .iter()
            .filter(|&(i, j)| i < (1 << self.n_bits) && j < (1 << self.m_bits))
            .map(|(i, j)| self.amplitude(i, j).norm_sqr())
            .sum()
    }

    /// Samples an index pair with probability `|amp|^2`. The state is left
    /// untouched; callers restart from the uniform state for every round.
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R, ledger: &mut QueryLedger) -> Result<(usize, usize)> {
        let norm = self.norm_sqr();
        if (norm - 1.0).abs() > MEASURE_NORM_TOLERANCE {
            return Err(Error::NormViolation { norm, tolerance: MEASURE_NORM_TOLERANCE });
        }
        ledger.measurements += 1;
        let k = sample_index(self.amps.iter().map(|a| a.norm_sqr()), rng.random::<f64>() * norm);
        Ok(self.pair_of(k))
    }

    /// Text dump, one `i j re im` line per amplitude.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, a) in self.amps.iter().enumerate() {
            let (i, j) = self.pair_of(k);
            let _ = writeln!(out, "{i} {j} {:.17e} {:.17e}", a.re, a.im);
        }
        out
    }
}

/// Inverse-CDF sampling over non-negative weights. Falls back to the last
/// index with positive weight when rounding leaves `target` past the total.
pub(crate) fn sample_index(weights: impl IntoIterator<Item = f64>, target: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, w) in weights.into_iter().enumerate() {
        if w > 0.0 {
            last_positive = k;
        }
        acc += w;
        if target < acc {
            return k;
        }
    }
    last_positive
}

/// Closed-form success probability `sin^2((2k+1) asin(sqrt(t/mn)))`.
pub fn theoretical_success(k: usize, t: usize, mn: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::NoMarkedStates);
    }
    if t > mn {
        return Err(Error::InvalidParameter(format!("{t} marked states exceed space of {mn}")));
    }
    let theta = (t as f64 / mn as f64).sqrt().asin();
    Ok(((2 * k + 1) as f64 * theta).sin().powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    const TOL: f64 = 1e-12;

    fn marked(pairs: &[(usize, usize)]) -> MarkedSet {
        pairs.iter().copied().collect()
    }

    fn assert_amps(s: &StateVector, expected: &[f64]) {
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!((a.re - e).abs() < TOL && a.im.abs() < TOL, "{a} vs {e}");
        }
    }

    /// Dense `(2|u><u| - I) O` applied by explicit matrix-vector products.
    fn dense_grover(mn: usize, marked: &[usize], k: usize) -> Vec<f64> {
        let mut g = vec![vec![0.0; mn]; mn];
        for (r, row) in g.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                let refl = 2.0 / mn as f64 - if r == c { 1.0 } else { 0.0 };
                let phase = if marked.contains(&c) { -1.0 } else { 1.0 };
                *cell = refl * phase;
            }
        }
        let mut v = vec![1.0 / (mn as f64).sqrt(); mn];
        for _ in 0..k {
            v = g.iter().map(|row| row.iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
        }
        v
    }

    #[test]
    fn uniform_init_values() {
        assert_amps(&StateVector::uniform(1, 1).unwrap(), &[0.5; 4]);
        let s = StateVector::uniform(6, 6).unwrap();
        assert_amps(&s, &vec![1.0 / 64.0; 4096]);
        assert!((s.norm_sqr() - 1.0).abs() < TOL);
        assert_eq!(StateVector::uniform_with_cap(14, 13, 26), Err(Error::CapExceeded { bits: 27, cap: 26 }));
    }

    #[test]
    fn phase_oracle_flips_marked() {
        let mut s = StateVector::uniform(1, 1).unwrap();
        s.apply_phase_oracle(&marked(&[(0, 0)])).unwrap();
        assert_amps(&s, &[-0.5, 0.5, 0.5, 0.5]);
        s.apply_phase_oracle(&marked(&[(0, 0)])).unwrap();
        assert_amps(&s, &[0.5; 4]);
        s.apply_phase_oracle(&MarkedSet::new()).unwrap();
        assert_amps(&s, &[0.5; 4]);
        assert!(matches!(s.apply_phase_oracle(&marked(&[(2, 0)])), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn diffusion_cases() {
        let mut s = StateVector::uniform(1, 1).unwrap();
        s.apply_diffusion();
        assert_amps(&s, &[0.5; 4]);
        s.apply_phase_oracle(&marked(&[(0, 0)])).unwrap();
        s.apply_diffusion();
        assert_amps(&s, &[1.0, 0.0, 0.0, 0.0]);
        s.apply_diffusion();
        assert_amps(&s, &[-0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn grover_power_known_values() {
        let mut ledger = QueryLedger::new();
        let m = marked(&[(0, 0)]);
        let mut s = StateVector::uniform(1, 1).unwrap();
        s.grover_power(&m, 1, &mut ledger).unwrap();
        assert!((s.success_probability(&m) - 1.0).abs() < TOL);

        let s = StateVector::uniform(3, 3).unwrap();
        assert!((s.success_probability(&m) - 1.0 / 64.0).abs() < TOL);

        let mut s = StateVector::uniform(3, 3).unwrap();
        s.grover_power(&m, 6, &mut ledger).unwrap();
        // sin^2(13 asin(1/8))
        assert!((s.success_probability(&m) - 0.996_585_680_786_799).abs() < 1e-12);
        assert_eq!(ledger.ggi_queries, 7);
    }

    #[test]
    fn grover_power_matches_dense_matrix() {
        type Case = (u32, u32, &'static [(usize, usize)]);
        let cases: &[Case] = &[(1, 1, &[(1, 0)]), (2, 1, &[(0, 1), (3, 0)]), (2, 2, &[(1, 1), (2, 3), (3, 0)])];
        for &(n, m, pairs) in cases {
            let mset = marked(pairs);
            for k in 0..8 {
                let mut s = StateVector::uniform(n, m).unwrap();
                s.grover_power(&mset, k, &mut QueryLedger::new()).unwrap();
                let idx: Vec<usize> = pairs.iter().map(|&(i, j)| (i << m) | j).collect();
                let expected = dense_grover(1 << (n + m), &idx, k);
                assert_amps(&s, &expected);
            }
        }
    }

    #[test]
    fn theoretical_success_edges() {
        assert!((theoretical_success(0, 3, 64).unwrap() - 3.0 / 64.0).abs() < TOL);
        for k in 0..5 {
            assert!((theoretical_success(k, 16, 16).unwrap() - 1.0).abs() < TOL);
        }
        assert!((theoretical_success(1, 1, 4).unwrap() - 1.0).abs() < TOL);
        assert_eq!(theoretical_success(1, 0, 4), Err(Error::NoMarkedStates));
        assert!(theoretical_success(1, 5, 4).is_err());
    }

    #[test]
    fn measure_deterministic_state() {
        let mut amps = vec![Complex64::new(0.0, 0.0); 8];
        amps[0] = Complex64::new(1.0, 0.0);
        let s = StateVector::from_amplitudes(2, 1, amps).unwrap();
        let mut r = rng::seeded(3);
        let mut ledger = QueryLedger::new();
        for _ in 0..100 {
            assert_eq!(s.measure(&mut r, &mut ledger).unwrap(), (0, 0));
        }
        assert_eq!(ledger.measurements, 100);
    }

    #[test]
    fn measure_uniform_frequencies() {
        let s = StateVector::uniform(1, 1).unwrap();
        let mut r = rng::seeded(11);
        let mut counts = [0usize; 4];
        let mut ledger = QueryLedger::new();
        let n = 100_000;
        for _ in 0..n {
            let (i, j) = s.measure(&mut r, &mut ledger).unwrap();
            counts[s.index_of(i, j)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn measure_is_reproducible_and_checks_norm() {
        let s = StateVector::uniform(3, 2).unwrap();
        let draw = |seed| {
            let mut r = rng::seeded(seed);
            let mut l = QueryLedger::new();
            (0..50).map(|_| s.measure(&mut r, &mut l).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
        let bad = StateVector::from_amplitudes(1, 0, vec![Complex64::new(1.0, 0.0); 2]).unwrap();
        assert!(matches!(bad.measure(&mut rng::seeded(0), &mut QueryLedger::new()), Err(Error::NormViolation { .. })));
    }

    #[test]
    fn dump_lists_every_amplitude() {
        let s = StateVector::uniform(1, 1).unwrap();
        let text = s.dump();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("0 0 5.0"));
    }

    proptest! {
        #[test]
        fn dynamics_match_closed_form(n in 0u32..5, m in 0u32..5, seed in any::<u64>(), t_frac in 0.0f64..1.0) {
            let mn = 1usize << (n + m);
            let t = 1 + ((mn - 1) as f64 * t_frac) as usize;
            let mut r = rng::seeded(seed);
            let mut all: Vec<usize> = (0..mn).collect();
            rand::seq::SliceRandom::shuffle(all.as_mut_slice(), &mut r);
            let s0 = StateVector::uniform(n, m).unwrap();
            let mset: MarkedSet = all[..t].iter().map(|&k| s0.pair_of(k)).collect();
            let kmax = (2.0 * (mn as f64).sqrt()) as usize;
            let mut s = s0.clone();
            let mut ledger = QueryLedger::new();
            for k in 0..=kmax {
                let p = s.success_probability(&mset);
                prop_assert!((p - theoretical_success(k, t, mn).unwrap()).abs() < 1e-9);
                prop_assert!((s.norm_sqr() - 1.0).abs() < TOL);
                prop_assert!(s.amplitudes().iter().all(|a| a.im.abs() < TOL));
                s.grover_power(&mset, 1, &mut ledger).unwrap();
            }
        }

        #[test]
        fn oracle_and_diffusion_are_involutions(n in 0u32..4, m in 0u32..4, seed in any::<u64>()) {
            let mut r = rng::seeded(seed);
            let len = 1usize << (n + m);
            let raw: Vec<Complex64> = (0..len).map(|_| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)).collect();
            let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let s0 = StateVector::from_amplitudes(n, m, raw.into_iter().map(|a| a / norm).collect()).unwrap();
            let mset: MarkedSet = (0..len).filter(|_| r.random::<bool>()).map(|k| s0.pair_of(k)).collect();
            let mut s = s0.clone();
            s.apply_phase_oracle(&mset).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < TOL);
            prop_assert!((s.success_probability(&mset) - s0.success_probability(&mset)).abs() < TOL);
            s.apply_phase_oracle(&mset).unwrap();
            s.apply_diffusion();
            prop_assert!((s.norm_sqr() - 1.0).abs() < TOL);
            s.apply_diffusion();
            for (a, b) in s.amplitudes().iter().zip(s0.amplitudes()) {
                prop_assert!((a - b).norm() < TOL);
            }
        }
    }
}
