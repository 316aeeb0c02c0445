//! Candidate pools: CSV ingestion, robust target scaling, splits, pair
//! sampling for the ranking loss, and synthetic landscapes of tunable
//! roughness.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{morgan_fingerprint, parse_smiles, tanimoto, Fingerprint, SmilesError};

/// Whether larger or smaller raw targets are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl FromStr for Direction {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        match s {
            "maximize" => Ok(Direction::Maximize),
            "minimize" => Ok(Direction::Minimize),
            other => Err(DataError::BadParameter(format!(
                "direction must be maximize or minimize, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Maximize => write!(f, "maximize"),
            Direction::Minimize => write!(f, "minimize"),
        }
    }
}

/// One candidate: identifier, optional structure, features, raw objective.
#[derive(Debug, Clone)]
pub struct Record {
    pub id: usize,
    /// `None` for synthetic candidates that have no structure.
    pub smiles: Option<String>,
    pub features: Fingerprint,
    pub raw_target: f64,
}

/// A pool of candidates with a shared feature width and dense ids 0..N-1.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    direction: Direction,
    records: Vec<Record>,
}

impl Dataset {
    /// Builds a dataset, assigning dense ids in input order.
    pub fn new(
        name: impl Into<String>,
        direction: Direction,
        items: Vec<(Option<String>, Fingerprint, f64)>,
    ) -> Result<Self, DataError> {
        if items.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        let nbits = items[0].1.nbits();
        let mut records = Vec::with_capacity(items.len());
        for (id, (smiles, features, raw_target)) in items.into_iter().enumerate() {
            if features.nbits() != nbits {
                return Err(DataError::BadParameter(format!(
                    "fingerprint width mismatch at id {id}: {} vs {nbits}",
                    features.nbits()
                )));
            }
            if !raw_target.is_finite() {
                return Err(DataError::NonFiniteTarget { id });
            }
            records.push(Record { id, smiles, features, raw_target });
        }
        Ok(Dataset {
            name: name.into(),
            direction,
            records,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, id: usize) -> &Record {
        &self.records[id]
    }

    pub fn nbits(&self) -> usize {
        self.records[0].features.nbits()
    }

    pub fn raw_targets(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.raw_target).collect()
    }

    /// Raw target converted so that larger is always better. This is the
    /// single place where direction is applied; everything downstream
    /// maximizes.
    pub fn objective(&self, id: usize) -> f64 {
        let raw = self.records[id].raw_target;
        match self.direction {
            Direction::Maximize => raw,
            Direction::Minimize => -raw,
        }
    }

    pub fn objectives(&self) -> Vec<f64> {
        (0..self.len()).map(|id| self.objective(id)).collect()
    }

    /// Writes `id,smiles,target` rows; synthetic candidates get a
    /// `synthetic:{id}` placeholder in the SMILES column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["id", "smiles", "target"])?;
        for record in &self.records {
            let smiles = match &record.smiles {
                Some(s) => s.clone(),
                None => format!("synthetic:{}", record.id),
            };
            out.write_record([
                record.id.to_string(),
                smiles,
                format_target(record.raw_target),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn format_target(value: f64) -> String {
    let mut buffer = ryu_format(value);
    // Keep integral targets readable.
    if buffer.ends_with(".0") {
        buffer.truncate(buffer.len() - 2);
    }
    buffer
}

fn ryu_format(value: f64) -> String {
    // serde_json's f64 formatting (ryu) is shortest-round-trip and stable.
    serde_json::to_string(&value).expect("finite f64 serializes")
}

/// Median/IQR location and scale fitted by [`robust_scale`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub median: f64,
    pub iqr: f64,
    /// Set when the IQR was zero and the effective scale fell back to 1.
    pub fallback_scale_used: bool,
}

impl ScalingParams {
    pub fn effective_scale(&self) -> f64 {
        if self.iqr > 0.0 {
            self.iqr
        } else {
            1.0
        }
    }

    pub fn scale(&self, value: f64) -> f64 {
        (value - self.median) / self.effective_scale()
    }

    pub fn unscale(&self, scaled: f64) -> f64 {
        scaled * self.effective_scale() + self.median
    }
}

/// Unordered index pairs sampled for the ranking loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSample {
    pub pairs: Vec<(usize, usize)>,
}

impl PairSample {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("column {name:?} not found in header")]
    MissingColumn { name: String },
    #[error("target {value:?} at line {line} is not a finite number")]
    BadTarget { line: u64, value: String },
    #[error("{} row(s) failed to parse; first at line {}: {}", failures.len(), failures[0].line, failures[0].error)]
    BadRows { failures: Vec<RowFailure> },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("record {id} has a non-finite target")]
    NonFiniteTarget { id: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("test fraction {fraction} yields a degenerate split for {n} records")]
    DegenerateSplit { n: usize, fraction: f64 },
    #[error("need at least two indices to sample pairs")]
    NotEnoughIndices,
    #[error("{0}")]
    BadParameter(String),
}

/// One skipped or rejected CSV row.
#[derive(Debug)]
pub struct RowFailure {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub smiles: String,
    pub error: SmilesError,
}

/// How [`load_csv`] reads a file.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub smiles_column: String,
    pub target_column: String,
    pub direction: Direction,
    pub radius: u32,
    pub nbits: usize,
    /// Skip rows whose SMILES fail to parse instead of failing the load.
    pub permissive: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            smiles_column: "smiles".into(),
            target_column: "target".into(),
            direction: Direction::Maximize,
            radius: 3,
            nbits: 2048,
            permissive: false,
        }
    }
}

/// A loaded dataset together with the rows that were skipped in permissive
/// mode.
#[derive(Debug)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    pub skipped: Vec<RowFailure>,
}

/// Reads a UTF-8 CSV with a header row, parses and fingerprints each SMILES,
/// and assigns sequential ids in file order.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<LoadOutcome, DataError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn { name: name.into() })
    };
    let smiles_idx = find(&options.smiles_column)?;
    let target_idx = find(&options.target_column)?;

    let mut items = Vec::new();
    let mut failures = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let smiles = row.get(smiles_idx).unwrap_or("").trim().to_string();
        let target_text = row.get(target_idx).unwrap_or("").trim();
        let target: f64 = target_text.parse().map_err(|_| DataError::BadTarget {
            line,
            value: target_text.to_string(),
        })?;
        if !target.is_finite() {
            return Err(DataError::BadTarget {
                line,
                value: target_text.to_string(),
            });
        }
        match parse_smiles(&smiles) {
            Ok(graph) => {
                let features = morgan_fingerprint(&graph, options.radius, options.nbits)
                    .expect("validated width");
                items.push((Some(smiles), features, target));
            }
            Err(error) => failures.push(RowFailure { line, smiles, error }),
        }
    }

    if !failures.is_empty() && !options.permissive {
        return Err(DataError::BadRows { failures });
    }
    if items.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let dataset = Dataset::new("csv", options.direction, items)?;
    Ok(LoadOutcome {
        dataset,
        skipped: failures,
    })
}

/// Quantile of sorted data by linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let position = q * (n - 1) as f64;
    let lo = position.floor() as usize;
    let hi = position.ceil() as usize;
    let weight = position - lo as f64;
    sorted[lo] * (1.0 - weight) + sorted[hi] * weight
}

/// Centers by the median and scales by the interquartile range. A zero IQR
/// falls back to scale 1 and sets the flag.
pub fn robust_scale(values: &[f64]) -> Result<(Vec<f64>, ScalingParams), DataError> {
    if values.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(DataError::NonFiniteInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let median = quantile_sorted(&sorted, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let params = ScalingParams {
        median,
        iqr,
        fallback_scale_used: iqr == 0.0,
    };
    let scaled = values.iter().map(|&v| params.scale(v)).collect();
    Ok((scaled, params))
}

/// Random disjoint (pool, test) partition. The test side gets
/// round(N * test_fraction) records; both sides are returned in ascending
/// id order.
pub fn split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    let n = dataset.len();
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(DataError::DegenerateSplit { n, fraction: test_fraction });
    }
    let test_size = (n as f64 * test_fraction).round() as usize;
    if test_size == 0 || test_size >= n {
        return Err(DataError::DegenerateSplit { n, fraction: test_fraction });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..n).collect();
    // Partial Fisher-Yates: the first test_size slots become the test set.
    for i in 0..test_size {
        let j = rng.gen_range(i..n);
        ids.swap(i, j);
    }
    let mut test: Vec<usize> = ids[..test_size].to_vec();
    let mut pool: Vec<usize> = ids[test_size..].to_vec();
    test.sort_unstable();
    pool.sort_unstable();
    Ok((pool, test))
}

/// Samples `count_multiplier * N` distinct unordered index pairs, or all
/// unique pairs when the target meets or exceeds their number.
pub fn sample_pairs(
    indices: &[usize],
    count_multiplier: usize,
    seed: u64,
) -> Result<PairSample, DataError> {
    let n = indices.len();
    if n < 2 {
        return Err(DataError::NotEnoughIndices);
    }
    let unique = n * (n - 1) / 2;
    let target = count_multiplier.saturating_mul(n);
    if target >= unique {
        let mut pairs = Vec::with_capacity(unique);
        for a in 0..n {
            for b in (a + 1)..n {
                pairs.push((indices[a], indices[b]));
            }
        }
        return Ok(PairSample { pairs });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if target * 2 >= unique {
        // Dense request: enumerate and take a random prefix, which stays
        // uniform without rejection stalls.
        let mut all: Vec<(usize, usize)> = Vec::with_capacity(unique);
        for a in 0..n {
            for b in (a + 1)..n {
                all.push((indices[a], indices[b]));
            }
        }
        for i in 0..target {
            let j = rng.gen_range(i..unique);
            all.swap(i, j);
        }
        all.truncate(target);
        return Ok(PairSample { pairs: all });
    }

    let mut seen = std::collections::HashSet::with_capacity(target);
    let mut pairs = Vec::with_capacity(target);
    while pairs.len() < target {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            pairs.push((indices[a], indices[b]));
        }
    }
    Ok(PairSample { pairs })
}

/// Synthetic landscape: targets interpolate anchor values by Tanimoto
/// similarity (smooth), then `cliff_count` candidates get their target
/// flipped to 1 - y (rough). More anchors and more cliffs raise roughness.
pub fn generate_synthetic(
    n: usize,
    n_anchors: usize,
    cliff_count: usize,
    nbits: usize,
    seed: u64,
) -> Result<Dataset, DataError> {
    if n < 10 {
        return Err(DataError::BadParameter(format!("n must be at least 10, got {n}")));
    }
    if n_anchors == 0 || n_anchors > n {
        return Err(DataError::BadParameter(format!(
            "n_anchors must be in 1..={n}, got {n_anchors}"
        )));
    }
    if cliff_count > n {
        return Err(DataError::BadParameter(format!(
            "cliff_count must be at most {n}, got {cliff_count}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Bernoulli(1/4) bits give a fixed expected popcount of nbits/4 and a
    // usable spread of pairwise similarities.
    let mut fingerprints = Vec::with_capacity(n);
    for _ in 0..n {
        let bits = (0..nbits).filter(|_| rng.gen_bool(0.25));
        fingerprints.push(Fingerprint::from_bits(nbits, 0, bits).map_err(|e| {
            DataError::BadParameter(format!("invalid fingerprint width {nbits}: {e}"))
        })?);
    }

    let anchor_ids = choose_distinct(&mut rng, n, n_anchors);
    let anchor_values: Vec<f64> = (0..n_anchors).map(|_| rng.gen_range(0.0..1.0)).collect();

    let mut targets = Vec::with_capacity(n);
    for fp in &fingerprints {
        let mut weight_sum = 0.0;
        let mut value_sum = 0.0;
        for (&anchor, &value) in anchor_ids.iter().zip(&anchor_values) {
            let w = tanimoto(fp, &fingerprints[anchor]).expect("equal widths");
            weight_sum += w;
            value_sum += w * value;
        }
        let target = if weight_sum > 0.0 {
            value_sum / weight_sum
        } else {
            anchor_values.iter().sum::<f64>() / n_anchors as f64
        };
        targets.push(target);
    }

    for idx in choose_distinct(&mut rng, n, cliff_count) {
        targets[idx] = 1.0 - targets[idx];
    }

    let items = fingerprints
        .into_iter()
        .zip(targets)
        .map(|(fp, y)| (None, fp, y))
        .collect();
    let name = format!("synthetic_n{n}_a{n_anchors}_c{cliff_count}_s{seed}");
    Dataset::new(name, Direction::Maximize, items)
}

/// First `k` elements of a seeded partial shuffle of 0..n.
fn choose_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        ids.swap(i, j);
    }
    ids.truncate(k);
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset(targets: &[f64]) -> Dataset {
        let items = targets
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let fp = Fingerprint::from_bits(16, 0, [i % 16]).unwrap();
                (None, fp, y)
            })
            .collect();
        Dataset::new("tiny", Direction::Maximize, items).unwrap()
    }

    #[test]
    fn robust_scale_hand_example() {
        let (scaled, params) = robust_scale(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(params.median, 3.0);
        assert_eq!(params.iqr, 2.0);
        assert!(!params.fallback_scale_used);
        assert_eq!(scaled, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn robust_scale_constant_input() {
        let (scaled, params) = robust_scale(&[7.0, 7.0, 7.0]).unwrap();
        assert!(params.fallback_scale_used);
        assert_eq!(params.effective_scale(), 1.0);
        assert_eq!(scaled, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn robust_scale_median_ignores_outlier() {
        let (_, params) = robust_scale(&[1.0, 2.0, 3.0, 4.0, 1000.0]).unwrap();
        assert_eq!(params.median, 3.0);
    }

    #[test]
    fn robust_scale_round_trips() {
        let values = [0.3, -2.5, 14.0, 7.25, 0.3, 9.1];
        let (scaled, params) = robust_scale(&values).unwrap();
        for (&v, &s) in values.iter().zip(&scaled) {
            assert!((params.unscale(s) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn robust_scale_rejects_bad_input() {
        assert!(robust_scale(&[]).is_err());
        assert!(robust_scale(&[1.0, f64::NAN]).is_err());
        assert!(robust_scale(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let data = tiny_dataset(&(0..40).map(f64::from).collect::<Vec<_>>());
        let (pool, test) = split(&data, 0.15, 9).unwrap();
        assert_eq!(test.len(), 6);
        assert_eq!(pool.len(), 34);
        let mut all: Vec<usize> = pool.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let data = tiny_dataset(&(0..40).map(f64::from).collect::<Vec<_>>());
        assert_eq!(split(&data, 0.25, 3).unwrap(), split(&data, 0.25, 3).unwrap());
        assert_ne!(
            split(&data, 0.25, 3).unwrap().1,
            split(&data, 0.25, 4).unwrap().1
        );
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let data = tiny_dataset(&[1.0, 2.0, 3.0]);
        assert!(split(&data, 0.0, 1).is_err());
        assert!(split(&data, 1.0, 1).is_err());
        assert!(split(&data, 0.99, 1).is_err());
        assert!(split(&data, 0.01, 1).is_err());
    }

    #[test]
    fn pairs_small_pool_returns_all() {
        let sample = sample_pairs(&[10, 20, 30], 2, 1).unwrap();
        assert_eq!(sample.pairs, vec![(10, 20), (10, 30), (20, 30)]);
    }

    #[test]
    fn pairs_large_pool_returns_exact_count() {
        let indices: Vec<usize> = (0..100).collect();
        let sample = sample_pairs(&indices, 2, 5).unwrap();
        assert_eq!(sample.len(), 200);
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in &sample.pairs {
            assert_ne!(i, j);
            assert!(seen.insert((i.min(j), i.max(j))), "duplicate pair ({i}, {j})");
        }
    }

    #[test]
    fn pairs_dense_request_stays_distinct() {
        // 12 of 15 unique pairs goes through the enumerate-and-choose path.
        let indices: Vec<usize> = (0..6).collect();
        let sample = sample_pairs(&indices, 2, 5).unwrap();
        assert_eq!(sample.len(), 12);
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in &sample.pairs {
            assert!(seen.insert((i.min(j), i.max(j))));
        }
    }

    #[test]
    fn pairs_are_deterministic() {
        let indices: Vec<usize> = (0..50).collect();
        assert_eq!(
            sample_pairs(&indices, 2, 7).unwrap(),
            sample_pairs(&indices, 2, 7).unwrap()
        );
        assert!(sample_pairs(&[1], 2, 7).is_err());
    }

    #[test]
    fn minimize_direction_negates_objective() {
        let items = vec![
            (None, Fingerprint::from_bits(16, 0, [0]).unwrap(), 2.5),
            (None, Fingerprint::from_bits(16, 0, [1]).unwrap(), -1.0),
        ];
        let data = Dataset::new("t", Direction::Minimize, items).unwrap();
        assert_eq!(data.objective(0), -2.5);
        assert_eq!(data.objective(1), 1.0);
        assert_eq!(data.raw_targets(), vec![2.5, -1.0]);
    }

    #[test]
    fn synthetic_single_anchor_is_constant() {
        let data = generate_synthetic(20, 1, 0, 64, 3).unwrap();
        let targets = data.raw_targets();
        for &y in &targets[1..] {
            assert!((y - targets[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(30, 4, 5, 64, 11).unwrap();
        let b = generate_synthetic(30, 4, 5, 64, 11).unwrap();
        assert_eq!(a.raw_targets(), b.raw_targets());
        let c = generate_synthetic(30, 4, 5, 64, 12).unwrap();
        assert_ne!(a.raw_targets(), c.raw_targets());
    }

    #[test]
    fn synthetic_validates_parameters() {
        assert!(generate_synthetic(5, 1, 0, 64, 1).is_err());
        assert!(generate_synthetic(20, 0, 0, 64, 1).is_err());
        assert!(generate_synthetic(20, 21, 0, 64, 1).is_err());
        assert!(generate_synthetic(20, 1, 21, 64, 1).is_err());
    }

    #[test]
    fn synthetic_cliffs_flip_targets() {
        let smooth = generate_synthetic(30, 4, 0, 64, 11).unwrap();
        let rough = generate_synthetic(30, 4, 10, 64, 11).unwrap();
        // Same seed draws the same smooth landscape first, so exactly
        // cliff_count targets differ and each flipped one equals 1 - y.
        let changed: Vec<usize> = smooth
            .raw_targets()
            .iter()
            .zip(rough.raw_targets())
            .enumerate()
            .filter(|(_, (&a, b))| (a - b).abs() > 1e-12)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(changed.len(), 10);
        for i in changed {
            assert!((rough.raw_targets()[i] - (1.0 - smooth.raw_targets()[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.csv");
        std::fs::write(&path, "smiles,target\nCCO,1.5\nc1ccccc1,2\nCC(=O)O,-0.25\n").unwrap();
        let outcome = load_csv(&path, &CsvOptions::default()).unwrap();
        assert_eq!(outcome.dataset.len(), 3);
        assert_eq!(
            outcome.dataset.records().iter().map(|r| r.id).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert_eq!(outcome.dataset.record(1).raw_target, 2.0);
        assert!(outcome.skipped.is_empty());

        let missing = load_csv(
            &path,
            &CsvOptions {
                target_column: "activity".into(),
                ..CsvOptions::default()
            },
        );
        assert!(matches!(missing, Err(DataError::MissingColumn { .. })));
    }

    #[test]
    fn csv_permissive_skips_bad_smiles() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.csv");
        std::fs::write(&path, "smiles,target\nCCO,1\nC(,2\nCCN,3\n").unwrap();

        let strict = load_csv(&path, &CsvOptions::default());
        match strict {
            Err(DataError::BadRows { failures }) => {
                assert_eq!(failures.len(), 1);
                assert_eq!(failures[0].line, 3);
            }
            other => panic!("expected BadRows, got {other:?}"),
        }

        let permissive = load_csv(
            &path,
            &CsvOptions { permissive: true, ..CsvOptions::default() },
        )
        .unwrap();
        assert_eq!(permissive.dataset.len(), 2);
        assert_eq!(permissive.skipped.len(), 1);
        // Ids stay dense after the skip.
        assert_eq!(
            permissive.dataset.records().iter().map(|r| r.id).collect::<Vec<_>>(),
            vec![0, 1]
        );
    }

    #[test]
    fn csv_bad_target_is_always_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.csv");
        std::fs::write(&path, "smiles,target\nCCO,abc\n").unwrap();
        let result = load_csv(&path, &CsvOptions { permissive: true, ..CsvOptions::default() });
        assert!(matches!(result, Err(DataError::BadTarget { line: 2, .. })));

        std::fs::write(&path, "smiles,target\nCCO,inf\n").unwrap();
        let result = load_csv(&path, &CsvOptions::default());
        assert!(matches!(result, Err(DataError::BadTarget { .. })));
    }

    #[test]
    fn synthetic_csv_uses_placeholder() {
        let data = generate_synthetic(10, 2, 0, 64, 5).unwrap();
        let mut buffer = Vec::new();
        data.write_csv(&mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("id,smiles,target"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,synthetic:0,"), "{first}");
        // Write succeeds through any io::Write sink.
        let mut sink = std::io::sink();
        sink.flush().unwrap();
    }
}
