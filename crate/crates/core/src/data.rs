//! Feature-space representation, dataset ingestion and tf-idf encoding.
//!
//! Samples are sparse non-negative vectors over a fixed feature space.
//! Two on-disk formats are supported:
//!
//! * **token lists**: one sample per line, a `0`/`1` label followed by
//!   whitespace-separated feature-name tokens (set-valued, DREBIN-style);
//! * **numeric CSV**: a header row `label,<feature names...>` followed by one
//!   row per sample.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("no samples")]
    Empty,
    #[error("feature id {id} out of range for dimension {dim}")]
    OutOfRange { id: usize, dim: usize },
    #[error("invalid value {value} for feature {id}: values must be finite and non-negative")]
    InvalidValue { id: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid train fraction {0}: must lie strictly between 0 and 1")]
    InvalidFraction(f64),
}

/// Sparse, non-negative feature vector of fixed dimension.
///
/// Entries are kept sorted by feature id; zero values are never stored, so
/// every absent id reads as exactly `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    /// The all-zero vector of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from `(id, value)` pairs. Later duplicates overwrite
    /// earlier ones; zero values are dropped.
    pub fn from_pairs<I>(dim: usize, pairs: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut v = Self::zeros(dim);
        for (id, value) in pairs {
            v.set(id, value)?;
        }
        Ok(v)
    }

    pub fn from_dense(values: &[f64]) -> Result<Self, DataError> {
        Self::from_pairs(values.len(), values.iter().copied().enumerate())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: usize) -> f64 {
        match self.entries.binary_search_by_key(&id, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, id: usize) -> bool {
        self.entries.binary_search_by_key(&id, |&(i, _)| i).is_ok()
    }

    /// Sets coordinate `id`; a value of zero removes it.
    pub fn set(&mut self, id: usize, value: f64) -> Result<(), DataError> {
        if id >= self.dim {
            return Err(DataError::OutOfRange { id, dim: self.dim });
        }
        if !value.is_finite() || value < 0.0 {
            return Err(DataError::InvalidValue { id, value });
        }
        match self.entries.binary_search_by_key(&id, |&(i, _)| i) {
            Ok(pos) if value == 0.0 => {
                self.entries.remove(pos);
            }
            Ok(pos) => self.entries[pos].1 = value,
            Err(_) if value == 0.0 => {}
            Err(pos) => self.entries.insert(pos, (id, value)),
        }
        Ok(())
    }

    /// Zeroes coordinate `id` (no-op when already zero).
    pub fn remove(&mut self, id: usize) {
        if let Ok(pos) = self.entries.binary_search_by_key(&id, |&(i, _)| i) {
            self.entries.remove(pos);
        }
    }

    /// Iterates stored `(id, value)` pairs in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// Nonzero feature ids in ascending order.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }

    /// Copy of `self` keeping only the listed ids (others become zero).
    pub fn restrict(&self, ids: &[usize]) -> Self {
        let mut entries: Vec<(usize, f64)> = ids
            .iter()
            .filter_map(|&id| {
                let v = self.get(id);
                (v != 0.0).then_some((id, v))
            })
            .collect();
        entries.sort_by_key(|&(i, _)| i);
        entries.dedup_by_key(|&mut (i, _)| i);
        Self {
            dim: self.dim,
            entries,
        }
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, v)| v * dense.get(i).copied().unwrap_or(0.0))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    /// Same entries in a space of dimension `dim` (must cover every stored id).
    pub fn with_dim(mut self, dim: usize) -> Result<Self, DataError> {
        if let Some(&(max, _)) = self.entries.last() {
            if max >= dim {
                return Err(DataError::OutOfRange { id: max, dim });
            }
        }
        self.dim = dim;
        Ok(self)
    }
}

/// Serialized as a JSON object `{"<feature-id>": value, ...}` holding the
/// nonzero entries only. The dimension is carried by the surrounding context.
impl Serialize for FeatureVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for &(id, v) in &self.entries {
            map.serialize_entry(&id.to_string(), &v)?;
        }
        map.end()
    }
}

/// Deserializes into a vector with `dim = max id + 1`; callers that know the
/// real dimension widen it with [`FeatureVector::with_dim`].
impl<'de> Deserialize<'de> for FeatureVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SparseVisitor;

        impl<'de> Visitor<'de> for SparseVisitor {
            type Value = FeatureVector;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from feature id to non-negative value")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut pairs = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, f64>()? {
                    let id: usize = k
                        .parse()
                        .map_err(|_| de::Error::custom(format!("invalid feature id {k:?}")))?;
                    pairs.push((id, v));
                }
                let dim = pairs.iter().map(|&(i, _)| i + 1).max().unwrap_or(0);
                FeatureVector::from_pairs(dim, pairs).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_map(SparseVisitor)
    }
}

/// Feature id ↔ feature name mapping, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(names: Vec<String>) -> Self {
        Self::from_names(names)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.names
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Self::new();
        for n in names {
            v.intern(&n.into());
        }
        v
    }

    /// Id of `name`, inserting it at the end if unseen.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Zero-based position of the sample in its source file.
    pub id: usize,
    pub features: FeatureVector,
    /// 1 = positive (malicious), 0 = negative (benign).
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub vocabulary: Vocabulary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    TokenLists,
    NumericCsv,
}

impl DataFormat {
    /// `.csv` files are numeric CSV, everything else token lists.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::NumericCsv,
            _ => DataFormat::TokenLists,
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token-lists" => Ok(DataFormat::TokenLists),
            "numeric-csv" => Ok(DataFormat::NumericCsv),
            other => Err(format!("unknown data format {other:?}")),
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::TokenLists => "token-lists",
            DataFormat::NumericCsv => "numeric-csv",
        })
    }
}

fn parse_label(s: &str, line: usize) -> Result<u8, DataError> {
    match s.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(DataError::Malformed {
            line,
            message: format!("label must be 0 or 1, found {other:?}"),
        }),
    }
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let pos = self.samples.iter().filter(|s| s.label == 1).count();
        (self.samples.len() - pos, pos)
    }

    pub fn load(path: &Path, format: DataFormat) -> Result<Self, DataError> {
        let file = File::open(path)?;
        match format {
            DataFormat::TokenLists => Self::read_token_lists(BufReader::new(file), None),
            DataFormat::NumericCsv => Self::read_numeric_csv(file),
        }
    }

    /// Loads `path` against a fixed vocabulary (e.g. the one a model was
    /// trained with). Unknown tokens or mismatched CSV headers are errors.
    pub fn load_with_vocabulary(
        path: &Path,
        format: DataFormat,
        vocabulary: &Vocabulary,
    ) -> Result<Self, DataError> {
        let file = File::open(path)?;
        match format {
            DataFormat::TokenLists => {
                Self::read_token_lists(BufReader::new(file), Some(vocabulary))
            }
            DataFormat::NumericCsv => {
                let d = Self::read_numeric_csv(file)?;
                if d.dim() != vocabulary.len() {
                    return Err(DataError::DimensionMismatch {
                        expected: vocabulary.len(),
                        found: d.dim(),
                    });
                }
                Ok(d)
            }
        }
    }

    /// Parses the token-list format. With `fixed` set, tokens must already
    /// exist in that vocabulary.
    pub fn read_token_lists<R: BufRead>(
        reader: R,
        fixed: Option<&Vocabulary>,
    ) -> Result<Self, DataError> {
        let mut vocabulary = fixed.cloned().unwrap_or_default();
        let mut rows: Vec<(Vec<usize>, u8)> = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let label = parse_label(tokens.next().unwrap_or_default(), line_no)?;
            let mut ids = Vec::new();
            for tok in tokens {
                let id = if fixed.is_some() {
                    vocabulary.id(tok).ok_or_else(|| DataError::Malformed {
                        line: line_no,
                        message: format!("unknown feature token {tok:?}"),
                    })?
                } else {
                    vocabulary.intern(tok)
                };
                ids.push(id);
            }
            rows.push((ids, label));
        }
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let dim = vocabulary.len();
        let samples = rows
            .into_iter()
            .enumerate()
            .map(|(id, (ids, label))| {
                let features = FeatureVector::from_pairs(dim, ids.into_iter().map(|i| (i, 1.0)))?;
                Ok(Sample {
                    id,
                    features,
                    label,
                })
            })
            .collect::<Result<Vec<_>, DataError>>()?;
        Ok(Self {
            samples,
            vocabulary,
        })
    }

    /// Parses the numeric CSV format: header `label,<names...>`.
    pub fn read_numeric_csv<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            None => return Err(DataError::Empty),
            Some(r) => r.map_err(|e| csv_error(e, 1))?,
        };
        if header.len() < 2 {
            return Err(DataError::Malformed {
                line: 1,
                message: "header needs a label column and at least one feature".into(),
            });
        }
        let vocabulary = Vocabulary::from_names(header.iter().skip(1));
        if vocabulary.len() != header.len() - 1 {
            return Err(DataError::Malformed {
                line: 1,
                message: "duplicate feature names in header".into(),
            });
        }
        let dim = vocabulary.len();
        let mut samples = Vec::new();
        for (n, record) in records.enumerate() {
            let line_no = n + 2;
            let record = record.map_err(|e| csv_error(e, line_no))?;
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            if record.len() != header.len() {
                return Err(DataError::ColumnCount {
                    line: line_no,
                    expected: header.len(),
                    found: record.len(),
                });
            }
            let label = parse_label(&record[0], line_no)?;
            let mut pairs = Vec::new();
            for (j, field) in record.iter().skip(1).enumerate() {
                let value: f64 = field.parse().map_err(|_| DataError::Malformed {
                    line: line_no,
                    message: format!("column {}: not a number: {field:?}", j + 2),
                })?;
                if !value.is_finite() || value < 0.0 {
                    return Err(DataError::Malformed {
                        line: line_no,
                        message: format!("column {}: value must be finite and >= 0", j + 2),
                    });
                }
                pairs.push((j, value));
            }
            samples.push(Sample {
                id: samples.len(),
                features: FeatureVector::from_pairs(dim, pairs)?,
                label,
            });
        }
        if samples.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(Self {
            samples,
            vocabulary,
        })
    }

    /// Writes the numeric CSV format (values printed with full precision).
    pub fn write_numeric_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut line = String::from("label");
        for n in self.vocabulary.names() {
            line.push(',');
            line.push_str(n);
        }
        writeln!(out, "{line}")?;
        for s in &self.samples {
            line.clear();
            line.push_str(if s.label == 1 { "1" } else { "0" });
            for v in s.features.to_dense() {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Looks up a sample by its source id.
    pub fn sample(&self, id: usize) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    fn with_samples(&self, samples: Vec<Sample>) -> Self {
        Self {
            samples,
            vocabulary: self.vocabulary.clone(),
        }
    }
}

fn csv_error(e: csv::Error, line: usize) -> DataError {
    DataError::Malformed {
        line: e.position().map(|p| p.line() as usize).unwrap_or(line),
        message: e.to_string(),
    }
}

/// Stratified, seeded train/test split.
///
/// Each class contributes `floor(n_class * train_fraction)` samples to the
/// training side. Both sides keep source order.
pub fn train_test_split(
    d: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidFraction(train_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; d.samples.len()];
    for label in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..d.samples.len())
            .filter(|&i| d.samples[i].label == label)
            .collect();
        idx.shuffle(&mut rng);
        let take = (idx.len() as f64 * train_fraction).floor() as usize;
        for &i in &idx[..take] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = d
        .samples
        .iter()
        .cloned()
        .zip(in_train)
        .partition(|(_, t)| *t);
    Ok((
        d.with_samples(train.into_iter().map(|(s, _)| s).collect()),
        d.with_samples(test.into_iter().map(|(s, _)| s).collect()),
    ))
}

/// Smoothed tf-idf weights: `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfEncoder {
    pub idf: Vec<f64>,
    pub vocabulary: Vocabulary,
}

impl TfIdfEncoder {
    pub fn fit(train: &Dataset) -> Result<Self, DataError> {
        if train.is_empty() {
            return Err(DataError::Empty);
        }
        let n = train.len() as f64;
        let mut df = vec![0usize; train.dim()];
        for s in &train.samples {
            for id in s.features.support() {
                df[id] += 1;
            }
        }
        let idf = df
            .into_iter()
            .map(|d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Ok(Self {
            idf,
            vocabulary: train.vocabulary.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// `tf × idf`, then L2-normalized (zero vectors stay zero).
    pub fn encode(&self, raw: &FeatureVector) -> Result<FeatureVector, DataError> {
        if raw.dim() != self.dim() {
            if let Some(id) = raw.support().find(|&i| i >= self.dim()) {
                return Err(DataError::OutOfRange {
                    id,
                    dim: self.dim(),
                });
            }
            return Err(DataError::DimensionMismatch {
                expected: self.dim(),
                found: raw.dim(),
            });
        }
        let weighted: Vec<(usize, f64)> = raw.iter().map(|(i, tf)| (i, tf * self.idf[i])).collect();
        let norm = weighted.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
        FeatureVector::from_pairs(self.dim(), weighted.into_iter().map(|(i, v)| (i, v * scale)))
    }

    pub fn encode_dataset(&self, d: &Dataset) -> Result<Dataset, DataError> {
        let samples = d
            .samples
            .iter()
            .map(|s| {
                Ok(Sample {
                    id: s.id,
                    features: self.encode(&s.features)?,
                    label: s.label,
                })
            })
            .collect::<Result<Vec<_>, DataError>>()?;
        Ok(d.with_samples(samples))
    }
}
