//! Classical record database.
//!
//! A [`Dataset`] is an indexed sequence of fixed-dimension unsigned-integer
//! records, padded to a power-of-two length. Padding and removed ("tombstoned")
//! records are tagged out of band by [`RecordKind`] and never match anything,
//! so they need no reserved values inside the value domain.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_VALUE_BOUND: u32 = 1 << 16;

static NEXT_UID: AtomicU64 = AtomicU64::new(1);

fn fresh_uid() -> u64 {
    NEXT_UID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Live,
    Pad,
    Tombstone,
}

/// One database row.
///
/// Live records carry `uid == 0`; pad and tombstone records carry a
/// process-unique serial, so no two of them are ever equal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Record {
    values: Vec<u32>,
    kind: RecordKind,
    uid: u64,
}

impl Record {
    pub fn live(values: Vec<u32>) -> Self {
        Self { values, kind: RecordKind::Live, uid: 0 }
    }

    fn pad(dimension: usize) -> Self {
        Self { values: vec![0; dimension], kind: RecordKind::Pad, uid: fresh_uid() }
    }

    fn tombstone(dimension: usize) -> Self {
        Self { values: vec![0; dimension], kind: RecordKind::Tombstone, uid: fresh_uid() }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn kind(&self) -> RecordKind {
        self.kind
    }

    pub fn uid(&self) -> u64 {
        self.uid
    }

    pub fn is_live(&self) -> bool {
        self.kind == RecordKind::Live
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RecordKind::Live => {
                write!(f, "(")?;
                for (n, v) in self.values.iter().enumerate() {
                    if n > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            RecordKind::Pad => write!(f, "<pad#{}>", self.uid),
            RecordKind::Tombstone => write!(f, "<tombstone#{}>", self.uid),
        }
    }
}

/// Ingestion settings for record files and in-memory rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadOptions {
    /// Exclusive upper bound on every coordinate.
    pub value_bound: u32,
    /// Silently drop repeated rows instead of rejecting them.
    pub dedup: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { value_bound: DEFAULT_VALUE_BOUND, dedup: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<Record>,
    logical_size: usize,
    dimension: usize,
    value_bound: u32,
}

impl Dataset {
    /// Builds a padded dataset from distinct live rows, in order.
    pub fn from_rows(rows: Vec<Vec<u32>>, dimension: usize, opts: LoadOptions) -> Result<Self> {
        Self::ingest(rows.into_iter().enumerate().map(|(n, r)| (n + 1, r)), dimension, opts)
    }

    fn ingest(rows: impl IntoIterator<Item = (usize, Vec<u32>)>, dimension: usize, opts: LoadOptions) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::ZeroDimension);
        }
        if opts.value_bound == 0 {
            return Err(Error::InvalidParameter("value bound must be positive".into()));
        }
        let mut seen = HashSet::new();
        let mut records = Vec::new();
        for (line, values) in rows {
            if values.len() != dimension {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {dimension} values, found {}", values.len()),
                });
            }
            if let Some(&v) = values.iter().find(|&&v| v >= opts.value_bound) {
                return Err(Error::Parse {
                    line,
                    message: format!("value {v} is not below the value bound {}", opts.value_bound),
                });
            }
            if !seen.insert(values.clone()) {
                if opts.dedup {
                    continue;
                }
                return Err(Error::DuplicateRecord { line, record: Record::live(values).to_string() });
            }
            records.push(Record::live(values));
        }
        if records.is_empty() {
            return Err(Error::EmptySet);
        }
        let logical_size = records.len();
        Ok(Self { records, logical_size, dimension, value_bound: opts.value_bound }.pad_to_pow2())
    }

    /// Appends pad records until the length is a power of two. Idempotent.
    pub fn pad_to_pow2(mut self) -> Self {
        let target = self.records.len().max(1).next_power_of_two();
        while self.records.len() < target {
            self.records.push(Record::pad(self.dimension));
        }
        self
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, index: usize) -> Result<&Record> {
        self.records.get(index).ok_or(Error::IndexOutOfRange { index, size: self.records.len() })
    }

    pub fn logical_size(&self) -> usize {
        self.logical_size
    }

    pub fn padded_size(&self) -> usize {
        self.records.len()
    }

    /// log2 of the padded size; the width of this set's index register.
    pub fn index_bits(&self) -> u32 {
        self.records.len().trailing_zeros()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn value_bound(&self) -> u32 {
        self.value_bound
    }

    pub fn live(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.is_live())
    }

    pub fn live_count(&self) -> usize {
        self.live().count()
    }

    /// Renders the live records in record-file format.
    pub fn to_record_file(&self) -> String {
        let mut out = String::new();
        for r in self.live() {
            let line: Vec<String> = r.values.iter().map(u32::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn manifest(&self) -> DatasetManifest {
        let mut hasher = Sha256::new();
        for r in self.live() {
            for v in &r.values {
                hasher.update(v.to_le_bytes());
            }
        }
        DatasetManifest {
            logical_size: self.logical_size,
            padded_size: self.padded_size(),
            dimension: self.dimension,
            value_bound: self.value_bound,
            live_records: self.live_count(),
            checksum: hex::encode(hasher.finalize()),
        }
    }
}

/// Summary of a dataset, serialized as TOML.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DatasetManifest {
    pub logical_size: usize,
    pub padded_size: usize,
    pub dimension: usize,
    pub value_bound: u32,
    pub live_records: usize,
    /// SHA-256 over the little-endian coordinates of live records, in index order.
    pub checksum: String,
}

impl DatasetManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest fields are plain scalars")
    }
}

/// Parses a record file: one record per line, `dimension` whitespace-separated
/// decimal integers. Blank lines are ignored.
pub fn load_dataset(source: &str, dimension: usize, opts: LoadOptions) -> Result<Dataset> {
    if dimension == 0 {
        return Err(Error::ZeroDimension);
    }
    let mut rows = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<u32>()
                    .map_err(|e| Error::Parse { line: line_no, message: format!("invalid value {tok:?}: {e}") })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((line_no, values));
    }
    Dataset::ingest(rows, dimension, opts)
}

/// The match function: true iff both records are live and equal.
pub fn match_fn(a: &Record, b: &Record) -> Result<bool> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch { left: a.dimension(), right: b.dimension() });
    }
    Ok(a.is_live() && b.is_live() && a.values == b.values)
}

fn check_compatible(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.dimension != b.dimension {
        return Err(Error::DimensionMismatch { left: a.dimension, right: b.dimension });
    }
    Ok(())
}

/// Exact `A ∩ B` by the full double loop over both sets.
pub fn brute_force_intersection(a: &Dataset, b: &Dataset) -> Result<BTreeSet<Record>> {
    check_compatible(a, b)?;
    let mut out = BTreeSet::new();
    for ra in &a.records {
        for rb in &b.records {
            if match_fn(ra, rb)? {
                out.insert(ra.clone());
            }
        }
    }
    Ok(out)
}

/// Index pairs `(i, j)` whose records match.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkedSet {
    pairs: BTreeSet<(usize, usize)>,
}

impl MarkedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, i: usize, j: usize) -> bool {
        self.pairs.insert((i, j))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i, j))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }
}

impl FromIterator<(usize, usize)> for MarkedSet {
    fn from_iter<T: IntoIterator<Item = (usize, usize)>>(iter: T) -> Self {
        Self { pairs: iter.into_iter().collect() }
    }
}

/// Enumerates the matching index pairs through a value index on `b`.
pub fn marked_pairs(a: &Dataset, b: &Dataset) -> Result<MarkedSet> {
    check_compatible(a, b)?;
    let mut by_value: HashMap<&[u32], Vec<usize>> = HashMap::new();
    for (j, rb) in b.records.iter().enumerate() {
        if rb.is_live() {
            by_value.entry(rb.values.as_slice()).or_default().push(j);
        }
    }
    let mut out = MarkedSet::new();
    for (i, ra) in a.records.iter().enumerate() {
        if !ra.is_live() {
            continue;
        }
        if let Some(js) = by_value.get(ra.values.as_slice()) {
            for &j in js {
                out.insert(i, j);
            }
        }
    }
    Ok(out)
}

/// Replaces `a[i0]` and `b[j0]` with fresh tombstones, in place.
pub fn tombstone_pair(a: &mut Dataset, i0: usize, b: &mut Dataset, j0: usize) -> Result<()> {
    check_compatible(a, b)?;
    let ra = a.record(i0)?;
    let rb = b.record(j0)?;
    if !match_fn(ra, rb)? {
        return Err(Error::PairNotMatching { i: i0, j: j0 });
    }
    a.records[i0] = Record::tombstone(a.dimension);
    b.records[j0] = Record::tombstone(b.dimension);
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn rows(values: &[u32]) -> Vec<Vec<u32>> {
        values.iter().map(|&v| vec![v, v]).collect()
    }

    #[test]
    fn intro_set_pads_to_four() {
        let a = load_dataset("1 1 1 1\n2 2 2 2\n1 2 3 4\n", 4, LoadOptions::default()).unwrap();
        assert_eq!(a.logical_size(), 3);
        assert_eq!(a.padded_size(), 4);
        assert_eq!(a.records()[3].kind(), RecordKind::Pad);
    }

    #[test]
    fn empty_source_is_rejected() {
        assert_eq!(load_dataset("", 4, LoadOptions::default()), Err(Error::EmptySet));
        assert_eq!(load_dataset("\n\n", 4, LoadOptions::default()), Err(Error::EmptySet));
    }

    #[test]
    fn five_records_pad_to_eight() {
        let ds = Dataset::from_rows(rows(&[1, 2, 3, 4, 5]), 2, LoadOptions::default()).unwrap();
        assert_eq!(ds.padded_size(), 8);
        assert_eq!(ds.records().iter().filter(|r| r.kind() == RecordKind::Pad).count(), 3);
    }

    #[test]
    fn padding_edge_sizes() {
        let one = Dataset::from_rows(rows(&[7]), 2, LoadOptions::default()).unwrap();
        assert_eq!(one.padded_size(), 1);
        let four = Dataset::from_rows(rows(&[1, 2, 3, 4]), 2, LoadOptions::default()).unwrap();
        assert_eq!(four.padded_size(), 4);
        assert!(four.live().count() == 4);
        let again = four.clone().pad_to_pow2();
        assert_eq!(again, four);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = load_dataset("1 2\n3 x\n", 2, LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = load_dataset("1 2\n\n3\n", 2, LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let opts = LoadOptions { value_bound: 4, dedup: false };
        let err = load_dataset("1 2\n3 4\n", 2, opts).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert_eq!(load_dataset("1\n", 0, LoadOptions::default()), Err(Error::ZeroDimension));
    }

    #[test]
    fn duplicates_rejected_unless_dedup() {
        let err = load_dataset("1 2\n3 4\n1 2\n", 2, LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateRecord { line: 3, .. }));
        let opts = LoadOptions { dedup: true, ..LoadOptions::default() };
        let ds = load_dataset("1 2\n3 4\n1 2\n", 2, opts).unwrap();
        assert_eq!(ds.logical_size(), 2);
    }

    #[test]
    fn match_function_cases() {
        let x = Record::live(vec![1, 2, 3, 4]);
        assert!(match_fn(&x, &Record::live(vec![1, 2, 3, 4])).unwrap());
        assert!(!match_fn(&Record::live(vec![1, 1, 1, 1]), &Record::live(vec![3, 3, 3, 3])).unwrap());
        assert!(match_fn(&x, &x).unwrap());
        let pad = Record::pad(4);
        assert!(!match_fn(&pad, &pad).unwrap());
        assert!(!match_fn(&pad, &Record::pad(4)).unwrap());
        assert!(!match_fn(&Record::tombstone(4), &x).unwrap());
        assert!(matches!(match_fn(&x, &Record::live(vec![1, 2])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn intro_intersection_and_marked_pairs() {
        let (a, b) = (intro_a(), intro_b());
        let c = brute_force_intersection(&a, &b).unwrap();
        assert_eq!(c.into_iter().collect::<Vec<_>>(), vec![Record::live(vec![1, 2, 3, 4])]);
        let marked = marked_pairs(&a, &b).unwrap();
        assert_eq!(marked.iter().collect::<Vec<_>>(), vec![(2, 2)]);
    }

    #[test]
    fn self_and_disjoint_intersections() {
        let a = Dataset::from_rows(rows(&[1, 2, 3]), 2, LoadOptions::default()).unwrap();
        let b = Dataset::from_rows(rows(&[4, 5, 6, 7, 8]), 2, LoadOptions::default()).unwrap();
        let aa = brute_force_intersection(&a, &a).unwrap();
        assert_eq!(aa, a.live().cloned().collect());
        assert!(brute_force_intersection(&a, &b).unwrap().is_empty());
        assert!(marked_pairs(&a, &b).unwrap().is_empty());
        let diag = marked_pairs(&a, &a).unwrap();
        assert_eq!(diag.iter().collect::<Vec<_>>(), vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn tombstone_removes_the_pair() {
        let (mut a, mut b) = (intro_a(), intro_b());
        tombstone_pair(&mut a, 2, &mut b, 2).unwrap();
        assert!(marked_pairs(&a, &b).unwrap().is_empty());
        assert_eq!(a.records()[2].kind(), RecordKind::Tombstone);
        assert_ne!(a.records()[2], b.records()[2]);
        assert_eq!(a.records()[0], Record::live(vec![1, 1, 1, 1]));
        assert_eq!(tombstone_pair(&mut a, 2, &mut b, 2), Err(Error::PairNotMatching { i: 2, j: 2 }));
        assert!(matches!(tombstone_pair(&mut a, 9, &mut b, 0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn dimension_mismatch_between_sets() {
        let a = Dataset::from_rows(rows(&[1]), 2, LoadOptions::default()).unwrap();
        let b = Dataset::from_rows(vec![vec![1, 1, 1]], 3, LoadOptions::default()).unwrap();
        assert!(matches!(brute_force_intersection(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(marked_pairs(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn manifest_is_toml_and_checksums_live_records() {
        let a = intro_a();
        let text = a.manifest().to_toml();
        assert!(text.contains("logical_size = 3"));
        assert!(text.contains("padded_size = 4"));
        assert!(text.contains("dimension = 4"));
        let reloaded = load_dataset(&a.to_record_file(), 4, LoadOptions::default()).unwrap();
        assert_eq!(reloaded.manifest(), a.manifest());
        assert_ne!(intro_b().manifest().checksum, a.manifest().checksum);
    }

    fn distinct_rows(max_len: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
        proptest::collection::btree_set(proptest::collection::vec(0u32..4, 2), 1..max_len)
            .prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn marked_pairs_count_equals_intersection(ra in distinct_rows(12), rb in distinct_rows(12)) {
            let a = Dataset::from_rows(ra, 2, LoadOptions::default()).unwrap();
            let b = Dataset::from_rows(rb, 2, LoadOptions::default()).unwrap();
            let marked = marked_pairs(&a, &b).unwrap();
            prop_assert_eq!(marked.len(), brute_force_intersection(&a, &b).unwrap().len());
            for (i, j) in marked.iter() {
                prop_assert!(match_fn(&a.records()[i], &b.records()[j]).unwrap());
            }
        }

        #[test]
        fn padding_invariants(ra in distinct_rows(40)) {
            let a = Dataset::from_rows(ra, 2, LoadOptions::default()).unwrap();
            let n = a.padded_size();
            prop_assert!(n.is_power_of_two());
            prop_assert!(n >= a.logical_size() && n < 2 * a.logical_size());
            prop_assert_eq!(a.clone().pad_to_pow2(), a);
        }

        #[test]
        fn tombstone_decrements_marked_count(ra in distinct_rows(12), rb in distinct_rows(12), pick in any::<prop::sample::Index>()) {
            let mut a = Dataset::from_rows(ra, 2, LoadOptions::default()).unwrap();
            let mut b = Dataset::from_rows(rb, 2, LoadOptions::default()).unwrap();
            let marked: Vec<_> = marked_pairs(&a, &b).unwrap().iter().collect();
            prop_assume!(!marked.is_empty());
            let (i, j) = marked[pick.index(marked.len())];
            tombstone_pair(&mut a, i, &mut b, j).unwrap();
            prop_assert_eq!(marked_pairs(&a, &b).unwrap().len(), marked.len() - 1);
            for r in a.records().iter().chain(b.records()) {
                if !r.is_live() {
                    for other in a.records().iter().chain(b.records()) {
                        prop_assert!(!match_fn(r, other).unwrap());
                    }
                }
            }
        }
    }
}
