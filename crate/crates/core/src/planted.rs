//! Random instances with a known number of common records.
//!
//! Records are drawn uniformly without replacement from the value space
//! `[0, value_bound)^dimension`. Set A takes `size_a` fresh records; set B
//! takes `common` of A's records plus `size_b - common` records that appear
//! nowhere in A. Both sets are shuffled, so common records land at random
//! indices.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::{Dataset, LoadOptions, DEFAULT_VALUE_BOUND};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlantedSpec {
    pub size_a: usize,
    pub size_b: usize,
    pub common: usize,
    pub dimension: usize,
    pub value_bound: u32,
}

impl PlantedSpec {
    /// Full (unpadded) power-of-two sets whose index space has `2^bits` pairs.
    /// A gets the larger half of the bits.
    pub fn for_space(bits: u32, common: usize) -> Self {
        Self {
            size_a: 1 << bits.div_ceil(2),
            size_b: 1 << (bits / 2),
            common,
            dimension: 4,
            value_bound: DEFAULT_VALUE_BOUND,
        }
    }

    fn space_size(&self) -> f64 {
        f64::from(self.value_bound).powi(self.dimension as i32)
    }

    fn validate(&self) -> Result<()> {
        if self.size_a == 0 || self.size_b == 0 {
            return Err(Error::EmptySet);
        }
        if self.common > self.size_a.min(self.size_b) {
            return Err(Error::InvalidParameter(format!(
                "{} common records do not fit sets of sizes {} and {}",
                self.common, self.size_a, self.size_b
            )));
        }
        let needed = (self.size_a + self.size_b - self.common) as f64;
        // rejection sampling stays cheap while the space is at least twice the draw
        if needed * 2.0 > self.space_size() {
            return Err(Error::InvalidParameter(format!(
                "value space of {} records is too small for {needed} distinct draws",
                self.space_size()
            )));
        }
        Ok(())
    }
}

fn draw_record(spec: &PlantedSpec, rng: &mut (impl Rng + ?Sized)) -> Vec<u32> {
    (0..spec.dimension).map(|_| rng.random_range(0..spec.value_bound)).collect()
}

/// Generates `(A, B)` with `|A ∩ B| == spec.common`.
pub fn planted_instance(spec: &PlantedSpec, rng: &mut (impl Rng + ?Sized)) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let mut used = HashSet::new();
    let mut fresh = |rng: &mut _| loop {
        let r = draw_record(spec, rng);
        if used.insert(r.clone()) {
            break r;
        }
    };
    let mut rows_a: Vec<Vec<u32>> = (0..spec.size_a).map(|_| fresh(rng)).collect();
    let mut rows_b: Vec<Vec<u32>> = rows_a[..spec.common].to_vec();
    rows_b.extend((spec.common..spec.size_b).map(|_| fresh(rng)));
    rows_a.shuffle(rng);
    rows_b.shuffle(rng);
    let opts = LoadOptions { value_bound: spec.value_bound, dedup: false };
    Ok((Dataset::from_rows(rows_a, spec.dimension, opts)?, Dataset::from_rows(rows_b, spec.dimension, opts)?))
}
