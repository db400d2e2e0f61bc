//! Bit-faithful five-register model of the generalized Grover iteration.
//!
//! Registers, most significant first: index `i` (`n_bits`), index `j`
//! (`m_bits`), value register `x` and value register `y` (`value_bits` each),
//! and a one-bit flag `f`. Basis index layout:
//!
//! ```text
//! idx = ((((i << m) | j) << v | x) << v | y) << 1 | f
//! ```
//!
//! Loading and computing are XOR writes, so both are self-inverse and their
//! adjoints reuse the forward maps. Every operator is applied as a basis
//! permutation or a diagonal phase, never decomposed into gates.

use num_complex::Complex64;

use crate::dataset::{Dataset, Record};
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::statevector::StateVector;

/// Default cap on the total register width (65536 amplitudes).
pub const DEFAULT_MAX_CIRCUIT_BITS: u32 = 16;

/// Largest ancilla mass accepted on entry to [`CircuitState::apply_ggi`].
pub const ANCILLA_ENTRY_TOLERANCE: f64 = 1e-12;

/// Largest ancilla mass accepted by [`CircuitState::reduce_to_index`].
pub const ANCILLA_REDUCE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    n_bits: u32,
    m_bits: u32,
    dimension: usize,
    value_bound: u32,
    coord_bits: u32,
}

impl RegisterLayout {
    pub fn new(n_bits: u32, m_bits: u32, dimension: usize, value_bound: u32) -> Result<Self> {
        Self::with_cap(n_bits, m_bits, dimension, value_bound, DEFAULT_MAX_CIRCUIT_BITS)
    }

    pub fn with_cap(n_bits: u32, m_bits: u32, dimension: usize, value_bound: u32, cap: u32) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::ZeroDimension);
        }
        if value_bound == 0 {
            return Err(Error::InvalidParameter("value bound must be positive".into()));
        }
        // One spare code above `value_bound` per coordinate keeps room for the
        // reserved non-live encodings.
        let coord_bits = u32::BITS - value_bound.leading_zeros();
        let layout = Self { n_bits, m_bits, dimension, value_bound, coord_bits };
        let bits = layout.total_bits_u64();
        if bits > u64::from(cap) {
            return Err(Error::CapExceeded { bits: bits.min(u64::from(u32::MAX)) as u32, cap });
        }
        Ok(layout)
    }

    /// Layout sized for the padded index ranges and value domain of `a`, `b`.
    pub fn for_datasets(a: &Dataset, b: &Dataset) -> Result<Self> {
        Self::for_datasets_with_cap(a, b, DEFAULT_MAX_CIRCUIT_BITS)
    }

    pub fn for_datasets_with_cap(a: &Dataset, b: &Dataset, cap: u32) -> Result<Self> {
        if a.dimension() != b.dimension() {
            return Err(Error::DimensionMismatch { left: a.dimension(), right: b.dimension() });
        }
        if a.value_bound() != b.value_bound() {
            return Err(Error::ValueBoundMismatch { left: a.value_bound(), right: b.value_bound() });
        }
        Self::with_cap(a.index_bits(), b.index_bits(), a.dimension(), a.value_bound(), cap)
    }

    fn total_bits_u64(&self) -> u64 {
        u64::from(self.n_bits) + u64::from(self.m_bits) + 2 * self.dimension as u64 * u64::from(self.coord_bits) + 1
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn m_bits(&self) -> u32 {
        self.m_bits
    }

    pub fn value_bits(&self) -> u32 {
        self.dimension as u32 * self.coord_bits
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits_u64() as u32
    }

    fn ancilla_bits(&self) -> u32 {
        2 * self.value_bits() + 1
    }

    fn value_mask(&self) -> usize {
        (1usize << self.value_bits()) - 1
    }

    /// Basis index of `|i, j, x, y, f>`.
    pub fn join(&self, i: usize, j: usize, x: usize, y: usize, f: usize) -> usize {
        let v = self.value_bits();
        (((((i << self.m_bits) | j) << v | x) << v | y) << 1) | (f & 1)
    }

    pub fn split(&self, idx: usize) -> (usize, usize, usize, usize, usize) {
        let v = self.value_bits();
        let f = idx & 1;
        let y = (idx >> 1) & self.value_mask();
        let x = (idx >> (1 + v)) & self.value_mask();
        let ij = idx >> self.ancilla_bits();
        (ij >> self.m_bits, ij & ((1usize << self.m_bits) - 1), x, y, f)
    }

    /// Fixed-width big-endian encoding of a record. Pad and tombstone records
    /// get a reserved code (first coordinate at or above `value_bound`) that
    /// is never accepted as a live value.
    pub fn encode(&self, record: &Record) -> Result<usize> {
        if record.dimension() != self.dimension {
            return Err(Error::DimensionMismatch { left: record.dimension(), right: self.dimension });
        }
        let w = self.coord_bits;
        if record.is_live() {
            let mut enc = 0usize;
            for &v in record.values() {
                if v >= self.value_bound {
                    return Err(Error::ValueOutOfRange { value: v, bound: self.value_bound });
                }
                enc = (enc << w) | v as usize;
            }
            Ok(enc)
        } else {
            let spare = (1u64 << w) - u64::from(self.value_bound);
            let reserved = u64::from(self.value_bound) + record.uid() % spare;
            Ok((reserved as usize) << (w * (self.dimension as u32 - 1)))
        }
    }

    pub fn is_live_encoding(&self, enc: usize) -> bool {
        let w = self.coord_bits;
        let mask = (1usize << w) - 1;
        (0..self.dimension).all(|c| ((enc >> (w * c as u32)) & mask) < self.value_bound as usize)
    }

    fn check_datasets(&self, a: &Dataset, b: &Dataset) -> Result<()> {
        if a.index_bits() != self.n_bits || b.index_bits() != self.m_bits {
            return Err(Error::InvalidParameter(format!(
                "datasets of padded sizes {}x{} do not fit a {}+{} bit index layout",
                a.padded_size(),
                b.padded_size(),
                self.n_bits,
                self.m_bits
            )));
        }
        Ok(())
    }

    fn encodings(&self, ds: &Dataset) -> Result<Vec<usize>> {
        ds.records().iter().map(|r| self.encode(r)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitState {
    amps: Vec<Complex64>,
    layout: RegisterLayout,
}

impl CircuitState {
    /// Computational basis state `|i, j, x, y, f>`.
    pub fn basis(layout: RegisterLayout, i: usize, j: usize, x: usize, y: usize, f: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << layout.total_bits()];
        amps[layout.join(i, j, x, y, f)] = Complex64::new(1.0, 0.0);
        Self { amps, layout }
    }

    /// Uniform superposition over both index registers, value and flag
    /// registers zero.
    pub fn init_superposed(layout: RegisterLayout, a: &Dataset, b: &Dataset) -> Result<Self> {
        layout.check_datasets(a, b)?;
        layout.encodings(a)?;
        layout.encodings(b)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << layout.total_bits()];
        let mn = 1usize << (layout.n_bits + layout.m_bits);
        let amp = Complex64::new(1.0 / (mn as f64).sqrt(), 0.0);
        for ij in 0..mn {
            amps[ij << layout.ancilla_bits()] = amp;
        }
        Ok(Self { amps, layout })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, i: usize, j: usize, x: usize, y: usize, f: usize) -> Complex64 {
        self.amps[self.layout.join(i, j, x, y, f)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability mass on basis states whose value or flag registers are nonzero.
    pub fn ancilla_mass(&self) -> f64 {
        let mask = (1usize << self.layout.ancilla_bits()) - 1;
        self.amps.iter().enumerate().filter(|(idx, _)| idx & mask != 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    fn permute(&mut self, target: impl Fn(usize) -> usize) {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (idx, &a) in self.amps.iter().enumerate() {
            out[target(idx)] = a;
        }
        self.amps = out;
    }

    /// Loading map `|i,j,x,y,f> -> |i,j, x ^ enc(a_i), y ^ enc(b_j), f>`.
    pub fn apply_load(&mut self, a: &Dataset, b: &Dataset) -> Result<()> {
        let layout = self.layout;
        layout.check_datasets(a, b)?;
        let enc_a = layout.encodings(a)?;
        let enc_b = layout.encodings(b)?;
        self.permute(|idx| {
            let (i, j, x, y, f) = layout.split(idx);
            layout.join(i, j, x ^ enc_a[i], y ^ enc_b[j], f)
        });
        Ok(())
    }

    /// Compute oracle: flips the flag iff both value registers hold the same
    /// live encoding.
    pub fn apply_compute(&mut self) {
        let layout = self.layout;
        self.permute(|idx| {
            let (_, _, x, y, _) = layout.split(idx);
            if x == y && layout.is_live_encoding(x) {
                idx ^ 1
            } else {
                idx
            }
        });
    }

    /// Phase oracle: `(-1)^f`.
    pub fn apply_phase_flag(&mut self) {
        for (idx, a) in self.amps.iter_mut().enumerate() {
            if idx & 1 == 1 {
                *a = -*a;
            }
        }
    }

    /// Reflection about the uniform index superposition, identity on the
    /// value and flag registers.
    pub fn apply_index_diffusion(&mut self) {
        let anc_bits = self.layout.ancilla_bits();
        let anc_mask = (1usize << anc_bits) - 1;
        let mn = (self.amps.len() >> anc_bits) as f64;
        let mut sums = vec![Complex64::new(0.0, 0.0); 1usize << anc_bits];
        for (idx, a) in self.amps.iter().enumerate() {
            sums[idx & anc_mask] += a;
        }
        for (idx, a) in self.amps.iter_mut().enumerate() {
            *a = sums[idx & anc_mask] * (2.0 / mn) - *a;
        }
    }

    /// One generalized Grover iteration: load, compute, phase flip, uncompute,
    /// unload, index diffusion. Charges one query.
    pub fn apply_ggi(&mut self, a: &Dataset, b: &Dataset, ledger: &mut QueryLedger) -> Result<()> {
        let mass = self.ancilla_mass();
        if mass > ANCILLA_ENTRY_TOLERANCE {
            return Err(Error::EntangledAncilla { mass });
        }
        self.apply_load(a, b)?;
        self.apply_compute();
        self.apply_phase_flag();
        self.apply_compute();
        self.apply_load(a, b)?;
        self.apply_index_diffusion();
        ledger.ggi_queries += 1;
        Ok(())
    }

    /// Projects onto the zero-ancilla slice and renormalizes.
    pub fn reduce_to_index(&self) -> Result<StateVector> {
        let mass = self.ancilla_mass();
        if mass > ANCILLA_REDUCE_TOLERANCE {
            return Err(Error::EntangledAncilla { mass });
        }
        let anc_bits = self.layout.ancilla_bits();
        let slice: Vec<Complex64> = (0..self.amps.len() >> anc_bits).map(|ij| self.amps[ij << anc_bits]).collect();
        let norm = slice.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        StateVector::from_amplitudes(
            self.layout.n_bits,
            self.layout.m_bits,
            slice.into_iter().map(|a| a / norm).collect(),
        )
    }
}
