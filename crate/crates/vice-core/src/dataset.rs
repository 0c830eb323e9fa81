//! Triplet odd-one-out judgment data: parsing, validation, splitting, and
//! aggregation of repeated responses.
//!
//! The on-disk format is UTF-8 text, one record per line, three integer
//! fields `y z odd` separated by whitespace or commas, where `{y, z}` is the
//! pair the subject chose as most similar and `odd` is the odd-one-out.
//! Indices are 0-based. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// 0-based object identifier. Valid values are `< num_objects` of the
/// dataset the index belongs to; range checks happen at record and dataset
/// construction.
pub type ObjectIndex = u32;

/// The three pairs of a triplet `{a, b, c}` with `a < b < c`, in the
/// canonical order `[{a,b}, {a,c}, {b,c}]`. This ordering fixes the layout
/// of every 3-vector of pair probabilities or counts in the crate.
pub fn canonical_pairs(triplet: [ObjectIndex; 3]) -> [[ObjectIndex; 2]; 3] {
    let [a, b, c] = triplet;
    [[a, b], [a, c], [b, c]]
}

/// One triplet judgment: the presented triplet and the pair chosen as most
/// similar. Both are unordered sets, stored sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TripletRecord {
    triplet: [ObjectIndex; 3],
    chosen: [ObjectIndex; 2],
}

impl TripletRecord {
    /// Build a record from a chosen pair and the odd-one-out.
    pub fn new(chosen: (ObjectIndex, ObjectIndex), odd: ObjectIndex) -> Result<Self> {
        let (y, z) = chosen;
        if y == z || y == odd || z == odd {
            return Err(Error::InvalidArgument(format!(
                "triplet indices must be distinct, got {y} {z} {odd}"
            )));
        }
        let mut triplet = [y, z, odd];
        triplet.sort_unstable();
        let chosen = [y.min(z), y.max(z)];
        Ok(Self { triplet, chosen })
    }

    /// The presented triplet, sorted ascending.
    pub fn triplet(&self) -> [ObjectIndex; 3] {
        self.triplet
    }

    /// The chosen pair, sorted ascending.
    pub fn chosen(&self) -> [ObjectIndex; 2] {
        self.chosen
    }

    /// The odd-one-out (the triplet element not in the chosen pair).
    pub fn odd_one_out(&self) -> ObjectIndex {
        *self
            .triplet
            .iter()
            .find(|i| !self.chosen.contains(i))
            .expect("triplet contains exactly one element outside the chosen pair")
    }

    /// Position of the chosen pair in the canonical pair order (0, 1, or 2).
    pub fn pair_index(&self) -> usize {
        canonical_pairs(self.triplet)
            .iter()
            .position(|p| *p == self.chosen)
            .expect("chosen pair is a subset of the triplet")
    }

    fn max_index(&self) -> ObjectIndex {
        self.triplet[2]
    }
}

/// An ordered collection of triplet judgments over `num_objects` objects.
///
/// Duplicate records are allowed; they are repeated responses to the same
/// triplet. A dataset may be structurally empty (splits with a zero
/// fraction produce one); operations that need records reject emptiness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletDataset {
    records: Vec<TripletRecord>,
    num_objects: usize,
}

impl TripletDataset {
    pub fn new(records: Vec<TripletRecord>, num_objects: usize) -> Result<Self> {
        if num_objects < 3 {
            return Err(Error::InvalidArgument(format!(
                "num_objects must be at least 3, got {num_objects}"
            )));
        }
        for (pos, rec) in records.iter().enumerate() {
            if rec.max_index() as usize >= num_objects {
                return Err(Error::IndexRange {
                    line: pos + 1,
                    index: rec.max_index(),
                    num_objects,
                });
            }
        }
        Ok(Self {
            records,
            num_objects,
        })
    }

    pub fn records(&self) -> &[TripletRecord] {
        &self.records
    }

    pub fn num_objects(&self) -> usize {
        self.num_objects
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Parse a triplet file. Each non-empty, non-comment line holds three
/// integer fields `y z odd`; `{y, z}` is the chosen pair.
pub fn parse_dataset(path: &Path, num_objects: usize) -> Result<TripletDataset> {
    let file = File::open(path)?;
    parse_dataset_from(BufReader::new(file), num_objects)
}

/// Parse triplet records from any reader; see [`parse_dataset`].
pub fn parse_dataset_from<R: Read>(reader: R, num_objects: usize) -> Result<TripletDataset> {
    if num_objects < 3 {
        return Err(Error::InvalidArgument(format!(
            "num_objects must be at least 3, got {num_objects}"
        )));
    }
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 3 {
            return Err(Error::MalformedRecord {
                line: lineno,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let mut values = [0u32; 3];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse::<u32>().map_err(|_| Error::MalformedRecord {
                line: lineno,
                msg: format!("not a non-negative integer: {field:?}"),
            })?;
        }
        let [y, z, odd] = values;
        let record = TripletRecord::new((y, z), odd).map_err(|_| Error::MalformedRecord {
            line: lineno,
            msg: format!("duplicate index in {y} {z} {odd}"),
        })?;
        if record.max_index() as usize >= num_objects {
            return Err(Error::IndexRange {
                line: lineno,
                index: record.max_index(),
                num_objects,
            });
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyInput("no records in triplet file".into()));
    }
    TripletDataset::new(records, num_objects)
}

/// Write a dataset in the standard line format, chosen pair first
/// (ascending), then the odd-one-out.
pub fn write_dataset<W: Write>(data: &TripletDataset, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for rec in &data.records {
        let [y, z] = rec.chosen();
        writeln!(w, "{} {} {}", y, z, rec.odd_one_out())?;
    }
    w.flush()?;
    Ok(())
}

/// Write a dataset to a file; see [`write_dataset`].
pub fn write_dataset_to_path(data: &TripletDataset, path: &Path) -> Result<()> {
    write_dataset(data, File::create(path)?)
}

/// Deterministically shuffle and partition into (train, validation, test).
///
/// Validation and test receive `floor(fraction * n)` records each; the
/// remainder goes to train.
pub fn split_dataset(
    data: &TripletDataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(TripletDataset, TripletDataset, TripletDataset)> {
    let (f_train, f_val, f_test) = fractions;
    for f in [f_train, f_val, f_test] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must lie in [0, 1], got {f}"
            )));
        }
    }
    let total = f_train + f_val + f_test;
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must sum to 1, got {total}"
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty dataset".into()));
    }

    let n = data.len();
    let mut shuffled = data.records.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let n_val = (f_val * n as f64).floor() as usize;
    let n_test = (f_test * n as f64).floor() as usize;
    let n_train = n - n_val - n_test;

    let train = shuffled[..n_train].to_vec();
    let val = shuffled[n_train..n_train + n_val].to_vec();
    let test = shuffled[n_train + n_val..].to_vec();
    let m = data.num_objects;
    Ok((
        TripletDataset {
            records: train,
            num_objects: m,
        },
        TripletDataset {
            records: val,
            num_objects: m,
        },
        TripletDataset {
            records: test,
            num_objects: m,
        },
    ))
}

/// Empirical distribution of responses to one triplet, counts and
/// probabilities in canonical pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseDistribution {
    triplet: [ObjectIndex; 3],
    counts: [u64; 3],
    probabilities: [f64; 3],
}

impl ResponseDistribution {
    /// Build from response counts; probabilities are `counts / total`.
    pub fn from_counts(triplet: [ObjectIndex; 3], counts: [u64; 3]) -> Result<Self> {
        let triplet = sorted_triplet(triplet)?;
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyInput(
                "response distribution needs at least one count".into(),
            ));
        }
        let probabilities = counts.map(|c| c as f64 / total as f64);
        Ok(Self {
            triplet,
            counts,
            probabilities,
        })
    }

    /// Build directly from probabilities (counts unknown, stored as zero).
    pub fn from_probabilities(triplet: [ObjectIndex; 3], probabilities: [f64; 3]) -> Result<Self> {
        let triplet = sorted_triplet(triplet)?;
        let total: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "probabilities must be non-negative and sum to 1, got {probabilities:?}"
            )));
        }
        Ok(Self {
            triplet,
            counts: [0; 3],
            probabilities,
        })
    }

    pub fn triplet(&self) -> [ObjectIndex; 3] {
        self.triplet
    }

    pub fn counts(&self) -> [u64; 3] {
        self.counts
    }

    pub fn probabilities(&self) -> [f64; 3] {
        self.probabilities
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn sorted_triplet(mut t: [ObjectIndex; 3]) -> Result<[ObjectIndex; 3]> {
    t.sort_unstable();
    if t[0] == t[1] || t[1] == t[2] {
        return Err(Error::InvalidArgument(format!(
            "triplet indices must be distinct, got {t:?}"
        )));
    }
    Ok(t)
}

/// Tally repeated responses per distinct triplet. Output is sorted by
/// triplet `(i, j, k)` for deterministic serialization.
pub fn aggregate_repeats(data: &TripletDataset) -> Vec<ResponseDistribution> {
    let mut tallies: BTreeMap<[ObjectIndex; 3], [u64; 3]> = BTreeMap::new();
    for rec in &data.records {
        tallies.entry(rec.triplet()).or_insert([0; 3])[rec.pair_index()] += 1;
    }
    tallies
        .into_iter()
        .map(|(triplet, counts)| {
            ResponseDistribution::from_counts(triplet, counts)
                .expect("every tallied triplet has at least one count")
        })
        .collect()
}

/// Bayes-optimal prediction accuracy implied by a set of response
/// distributions: the mean over triplets of the majority probability.
pub fn accuracy_ceiling(dists: &[ResponseDistribution]) -> Result<f64> {
    if dists.is_empty() {
        return Err(Error::EmptyInput(
            "accuracy ceiling needs at least one distribution".into(),
        ));
    }
    let sum: f64 = dists
        .iter()
        .map(|d| d.probabilities.iter().cloned().fold(f64::MIN, f64::max))
        .sum();
    Ok(sum / dists.len() as f64)
}

/// Export aggregated distributions as CSV with header
/// `i,j,k,p_ij,p_ik,p_jk`.
pub fn write_distributions_csv<W: Write>(dists: &[ResponseDistribution], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "i,j,k,p_ij,p_ik,p_jk")?;
    for d in dists {
        let [i, j, k] = d.triplet;
        let [p_ij, p_ik, p_jk] = d.probabilities;
        writeln!(w, "{i},{j},{k},{p_ij},{p_ik},{p_jk}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse_str(text: &str, m: usize) -> Result<TripletDataset> {
        parse_dataset_from(text.as_bytes(), m)
    }

    #[test]
    fn parses_basic_line() {
        let data = parse_str("268 609 1853\n", 1854).unwrap();
        assert_eq!(data.len(), 1);
        let rec = data.records()[0];
        assert_eq!(rec.triplet(), [268, 609, 1853]);
        assert_eq!(rec.chosen(), [268, 609]);
        assert_eq!(rec.odd_one_out(), 1853);
    }

    #[test]
    fn pair_order_within_line_is_irrelevant() {
        let data = parse_str("2 0 1\n", 3).unwrap();
        let rec = data.records()[0];
        assert_eq!(rec.triplet(), [0, 1, 2]);
        assert_eq!(rec.chosen(), [0, 2]);
        assert_eq!(rec.pair_index(), 1);
    }

    #[test]
    fn rejects_duplicate_index() {
        let err = parse_str("0 1 1\n", 3).unwrap_err();
        match err {
            Error::MalformedRecord { line, .. } => assert_eq!(line, 1),
            other => panic!("expected malformed record, got {other}"),
        }
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = parse_str("0 1 2\n0 1 5\n", 3).unwrap_err();
        match err {
            Error::IndexRange {
                line,
                index,
                num_objects,
            } => {
                assert_eq!((line, index, num_objects), (2, 5, 3));
            }
            other => panic!("expected range error, got {other}"),
        }
    }

    #[test]
    fn rejects_wrong_field_count() {
        assert!(matches!(
            parse_str("0 1\n", 3),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
        assert!(matches!(
            parse_str("0 1 2 3\n", 5),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn accepts_commas_comments_and_blank_lines() {
        let text = "# header comment\n0,1,2\n\n  3 4 5\n1\t2\t3\n";
        let data = parse_str(text, 6).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.records()[0].triplet(), [0, 1, 2]);
        assert_eq!(data.records()[1].triplet(), [3, 4, 5]);
        assert_eq!(data.records()[2].triplet(), [1, 2, 3]);
    }

    #[test]
    fn write_then_parse_round_trips() {
        let text = "2 0 1\n3 4 0\n0 1 2\n";
        let data = parse_str(text, 5).unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        let reparsed = parse_dataset_from(buf.as_slice(), 5).unwrap();
        assert_eq!(reparsed, data);

        // The written form is a fixed point of write . parse.
        let mut buf2 = Vec::new();
        write_dataset(&reparsed, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn split_sizes_exact_division() {
        let data = synthetic_dataset(100);
        let (train, val, test) = split_dataset(&data, (0.9, 0.1, 0.0), 7).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (90, 10, 0));
    }

    #[test]
    fn split_remainder_goes_to_train() {
        let data = synthetic_dataset(101);
        let (train, val, test) = split_dataset(&data, (0.9, 0.1, 0.0), 7).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (91, 10, 0));
    }

    #[test]
    fn split_matches_45_5_50_partition() {
        let data = synthetic_dataset(1000);
        let (train, val, test) = split_dataset(&data, (0.45, 0.05, 0.5), 7).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (450, 50, 500));
    }

    #[test]
    fn split_is_deterministic_and_preserves_multiset() {
        let data = synthetic_dataset(57);
        let a = split_dataset(&data, (0.6, 0.2, 0.2), 13).unwrap();
        let b = split_dataset(&data, (0.6, 0.2, 0.2), 13).unwrap();
        assert_eq!(a, b);

        let mut combined: Vec<TripletRecord> = a
            .0
            .records()
            .iter()
            .chain(a.1.records())
            .chain(a.2.records())
            .cloned()
            .collect();
        let mut original = data.records().to_vec();
        let key = |r: &TripletRecord| (r.triplet(), r.chosen());
        combined.sort_by_key(key);
        original.sort_by_key(key);
        assert_eq!(combined, original);
    }

    #[test]
    fn split_rejects_bad_fractions_and_empty_data() {
        let data = synthetic_dataset(10);
        assert!(split_dataset(&data, (0.5, 0.5, 0.1), 0).is_err());
        assert!(split_dataset(&data, (-0.1, 0.6, 0.5), 0).is_err());
        let empty = TripletDataset::new(Vec::new(), 3).unwrap();
        assert!(matches!(
            split_dataset(&empty, (1.0, 0.0, 0.0), 0),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn aggregate_counts_repeats() {
        let mut records = Vec::new();
        for _ in 0..20 {
            records.push(TripletRecord::new((0, 1), 2).unwrap());
        }
        for _ in 0..3 {
            records.push(TripletRecord::new((0, 2), 1).unwrap());
        }
        for _ in 0..2 {
            records.push(TripletRecord::new((1, 2), 0).unwrap());
        }
        let data = TripletDataset::new(records, 3).unwrap();
        let dists = aggregate_repeats(&data);
        assert_eq!(dists.len(), 1);
        assert_eq!(dists[0].counts(), [20, 3, 2]);
        assert_eq!(dists[0].probabilities(), [0.8, 0.12, 0.08]);
    }

    #[test]
    fn aggregate_single_record_is_one_hot() {
        let data =
            TripletDataset::new(vec![TripletRecord::new((1, 2), 0).unwrap()], 3).unwrap();
        let dists = aggregate_repeats(&data);
        assert_eq!(dists[0].probabilities(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn aggregate_distinct_triplets_stay_separate() {
        let records = vec![
            TripletRecord::new((0, 1), 2).unwrap(),
            TripletRecord::new((3, 4), 5).unwrap(),
        ];
        let data = TripletDataset::new(records, 6).unwrap();
        let dists = aggregate_repeats(&data);
        assert_eq!(dists.len(), 2);
        for d in &dists {
            assert_eq!(d.total(), 1);
            assert!(d.probabilities().contains(&1.0));
        }
    }

    #[test]
    fn ceiling_matches_worked_example() {
        let dists = vec![
            ResponseDistribution::from_probabilities([0, 1, 2], [0.2, 0.3, 0.5]).unwrap(),
            ResponseDistribution::from_probabilities([0, 1, 3], [0.1, 0.8, 0.1]).unwrap(),
        ];
        let ceiling = accuracy_ceiling(&dists).unwrap();
        assert!((ceiling - 0.65).abs() < 1e-15);
    }

    #[test]
    fn ceiling_edge_cases() {
        let one_hot =
            ResponseDistribution::from_probabilities([0, 1, 2], [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(accuracy_ceiling(&[one_hot]).unwrap(), 1.0);

        let third = 1.0 / 3.0;
        let uniform =
            ResponseDistribution::from_probabilities([0, 1, 2], [third, third, third]).unwrap();
        let c = accuracy_ceiling(&[uniform]).unwrap();
        assert!((c - third).abs() < 1e-12);

        assert!(accuracy_ceiling(&[]).is_err());
    }

    #[test]
    fn csv_export_uses_canonical_header() {
        let data =
            TripletDataset::new(vec![TripletRecord::new((0, 2), 1).unwrap()], 3).unwrap();
        let dists = aggregate_repeats(&data);
        let mut buf = Vec::new();
        write_distributions_csv(&dists, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "i,j,k,p_ij,p_ik,p_jk\n0,1,2,0,1,0\n");
    }

    fn synthetic_dataset(n: usize) -> TripletDataset {
        let m = 20u32;
        let records = (0..n)
            .map(|i| {
                let a = (i as u32) % m;
                let b = (a + 1 + (i as u32 / m) % (m - 2)) % m;
                let mut c = (b + 3) % m;
                while c == a || c == b {
                    c = (c + 1) % m;
                }
                TripletRecord::new((a.min(b), a.max(b)), c).unwrap()
            })
            .collect();
        TripletDataset::new(records, m as usize).unwrap()
    }

    proptest! {
        #[test]
        fn aggregate_probabilities_sum_to_one(choices in prop::collection::vec(0usize..3, 1..60)) {
            let pairs = [((0u32, 1u32), 2u32), ((0, 2), 1), ((1, 2), 0)];
            let records: Vec<TripletRecord> = choices
                .iter()
                .map(|&c| TripletRecord::new(pairs[c].0, pairs[c].1).unwrap())
                .collect();
            let n = records.len() as u64;
            let data = TripletDataset::new(records, 3).unwrap();
            let dists = aggregate_repeats(&data);
            let mut total_counts = 0u64;
            for d in &dists {
                let sum: f64 = d.probabilities().iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                total_counts += d.total();
            }
            prop_assert_eq!(total_counts, n);
        }

        #[test]
        fn ceiling_is_between_third_and_one(counts in prop::collection::vec((0u64..40, 0u64..40, 0u64..40), 1..20)) {
            let dists: Vec<ResponseDistribution> = counts
                .iter()
                .enumerate()
                .filter(|(_, (a, b, c))| a + b + c > 0)
                .map(|(i, &(a, b, c))| {
                    let base = 3 * i as u32;
                    ResponseDistribution::from_counts([base, base + 1, base + 2], [a, b, c]).unwrap()
                })
                .collect();
            prop_assume!(!dists.is_empty());
            let ceiling = accuracy_ceiling(&dists).unwrap();
            prop_assert!(ceiling >= 1.0 / 3.0 - 1e-12);
            prop_assert!(ceiling <= 1.0 + 1e-12);
        }
    }
}
