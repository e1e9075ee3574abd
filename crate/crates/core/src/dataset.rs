//! Typed tabular data: schemas, CSV ingestion, normalization and
//! stratified splitting.
//!
//! Rows are stored as `f64` cells. Numeric cells hold the value itself and
//! nominal cells hold the category index into the feature's `categories`.
//! The label is always the last CSV column.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Nominal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    /// Short code used in reports, e.g. `F13`.
    pub id: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub protected: bool,
    /// Known categories in index order (nominal only). Unseen labels found
    /// during ingestion are appended in first-seen order.
    #[serde(default)]
    pub categories: Vec<String>,
    /// Raw token to category label, applied before category lookup. Lets a
    /// schema merge raw codes, e.g. personal-status codes into a sex column.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub recode: BTreeMap<String, String>,
}

impl FeatureSchema {
    pub fn numeric(name: &str, id: &str) -> Self {
        Self {
            name: name.to_string(),
            id: id.to_string(),
            kind: FeatureKind::Numeric,
            protected: false,
            categories: Vec::new(),
            recode: BTreeMap::new(),
        }
    }

    pub fn nominal(name: &str, id: &str, categories: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            id: id.to_string(),
            kind: FeatureKind::Nominal,
            protected: false,
            categories: categories.iter().map(|c| c.to_string()).collect(),
            recode: BTreeMap::new(),
        }
    }

    pub fn protected(mut self) -> Self {
        self.protected = true;
        self
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == FeatureKind::Numeric
    }

    pub fn is_nominal(&self) -> bool {
        self.kind == FeatureKind::Nominal
    }
}

/// Delimiter and header handling for CSV input and output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_header")]
    pub header: bool,
}

fn default_delimiter() -> char {
    ','
}

fn default_header() -> bool {
    true
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: ',',
            header: true,
        }
    }
}

/// Schema sidecar: feature declarations, class order and CSV layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default = "default_label_name")]
    pub label: String,
    /// Class labels in index order. Empty means first-seen order.
    #[serde(default)]
    pub classes: Vec<String>,
    #[serde(default)]
    pub csv: CsvOptions,
    #[serde(rename = "feature")]
    pub features: Vec<FeatureSchema>,
}

fn default_label_name() -> String {
    "label".to_string()
}

impl Schema {
    pub fn new(features: Vec<FeatureSchema>) -> Self {
        Self {
            label: default_label_name(),
            classes: Vec::new(),
            csv: CsvOptions::default(),
            features,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        validate_schema(&schema.features)?;
        Ok(schema)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }
}

fn validate_schema(features: &[FeatureSchema]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::Schema("no features declared".into()));
    }
    let mut names = HashMap::new();
    for (j, f) in features.iter().enumerate() {
        if let Some(prev) = names.insert(f.name.as_str(), j) {
            return Err(Error::Schema(format!(
                "duplicate feature name `{}` (columns {prev} and {j})",
                f.name
            )));
        }
        if f.is_numeric() && !f.categories.is_empty() {
            return Err(Error::Schema(format!(
                "numeric feature `{}` declares categories",
                f.name
            )));
        }
        let mut seen = HashMap::new();
        for c in &f.categories {
            if c.is_empty() {
                return Err(Error::Schema(format!("empty category in `{}`", f.name)));
            }
            if seen.insert(c.as_str(), ()).is_some() {
                return Err(Error::Schema(format!("duplicate category `{c}` in `{}`", f.name)));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<FeatureSchema>,
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        schema: Vec<FeatureSchema>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        validate_schema(&schema)?;
        if rows.is_empty() {
            return Err(Error::NoRows("dataset".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        let m = schema.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    column: "*".into(),
                    message: format!("expected {m} cells, found {}", row.len()),
                });
            }
            for (f, &v) in schema.iter().zip(row) {
                let ok = match f.kind {
                    FeatureKind::Numeric => v.is_finite(),
                    FeatureKind::Nominal => v >= 0.0 && v.fract() == 0.0 && (v as usize) < f.categories.len(),
                };
                if !ok {
                    return Err(Error::MalformedRow {
                        row: i + 1,
                        column: f.name.clone(),
                        message: format!("invalid cell value {v}"),
                    });
                }
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::invalid(format!(
                "label index {bad} outside {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            schema,
            rows,
            labels,
            class_names,
        })
    }

    pub fn schema(&self) -> &[FeatureSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_ids(&self) -> Vec<String> {
        self.schema.iter().map(|f| f.id.clone()).collect()
    }

    pub fn feature_index(&self, key: &str) -> Option<usize> {
        self.schema.iter().position(|f| f.id == key || f.name == key)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn protected_indices(&self) -> Vec<usize> {
        (0..self.schema.len()).filter(|&j| self.schema[j].protected).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Category indices of a nominal column.
    pub fn nominal_column(&self, j: usize) -> Vec<usize> {
        self.rows.iter().map(|r| r[j] as usize).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset holding the given rows in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::NoRows("empty subset".into()));
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        })
    }

    /// Seeded class-proportional sample of at most `max_rows` rows, kept in
    /// original row order.
    pub fn stratified_sample(&self, max_rows: usize, seed: u64) -> Result<Dataset> {
        if max_rows == 0 || max_rows >= self.n_rows() {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n_rows() as f64;
        let mut keep = Vec::with_capacity(max_rows);
        for mut members in self.rows_by_class() {
            members.shuffle(&mut rng);
            let take = ((members.len() as f64) * max_rows as f64 / n).round() as usize;
            let take = take.clamp(usize::from(!members.is_empty()), members.len());
            keep.extend_from_slice(&members[..take]);
        }
        keep.sort_unstable();
        self.subset(&keep)
    }

    fn rows_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.class_names.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        by_class
    }
}

/// Reads a CSV file whose columns are the schema features followed by the label.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, options, &path.display().to_string())
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema, options: &CsvOptions, source: &str) -> Result<Dataset> {
    validate_schema(&schema.features)?;
    let delimiter = u8::try_from(options.delimiter)
        .map_err(|_| Error::Schema(format!("delimiter {:?} is not ASCII", options.delimiter)))?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(options.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut features = schema.features.clone();
    let mut lookup: Vec<HashMap<String, usize>> = features
        .iter()
        .map(|f| f.categories.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect())
        .collect();
    let mut class_names = schema.classes.clone();
    let fixed_classes = !class_names.is_empty();
    let mut class_lookup: HashMap<String, usize> =
        class_names.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();

    let width = features.len() + 1;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if record.len() != width {
            return Err(Error::MalformedRow {
                row: row_no,
                column: "*".into(),
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(features.len());
        for (j, feature) in features.iter_mut().enumerate() {
            let raw = &record[j];
            if raw.is_empty() {
                return Err(Error::MalformedRow {
                    row: row_no,
                    column: feature.name.clone(),
                    message: "missing value".into(),
                });
            }
            match feature.kind {
                FeatureKind::Numeric => {
                    let v: f64 = raw.parse().map_err(|_| Error::MalformedRow {
                        row: row_no,
                        column: feature.name.clone(),
                        message: format!("cannot parse `{raw}` as a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::MalformedRow {
                            row: row_no,
                            column: feature.name.clone(),
                            message: format!("non-finite value `{raw}`"),
                        });
                    }
                    row.push(v);
                }
                FeatureKind::Nominal => {
                    let label = feature.recode.get(raw).map_or(raw, String::as_str);
                    let idx = match lookup[j].get(label) {
                        Some(&i) => i,
                        None => {
                            let i = feature.categories.len();
                            feature.categories.push(label.to_string());
                            lookup[j].insert(label.to_string(), i);
                            i
                        }
                    };
                    row.push(idx as f64);
                }
            }
        }
        let raw_label = &record[width - 1];
        let label = match class_lookup.get(raw_label) {
            Some(&c) => c,
            None if fixed_classes => {
                return Err(Error::MalformedRow {
                    row: row_no,
                    column: schema.label.clone(),
                    message: format!("undeclared class `{raw_label}`"),
                })
            }
            None => {
                let c = class_names.len();
                class_names.push(raw_label.to_string());
                class_lookup.insert(raw_label.to_string(), c);
                c
            }
        };
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::NoRows(source.to_string()));
    }
    Dataset::new(features, rows, labels, class_names)
}

/// Writes the dataset with a header row, category labels for nominal cells
/// and shortest round-trip formatting for numeric cells.
pub fn write_csv<W: Write>(ds: &Dataset, label_name: &str, delimiter: char, writer: W) -> Result<()> {
    let delimiter =
        u8::try_from(delimiter).map_err(|_| Error::invalid(format!("delimiter {delimiter:?} is not ASCII")))?;
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    let mut header: Vec<&str> = ds.schema.iter().map(|f| f.name.as_str()).collect();
    header.push(label_name);
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (row, &label) in ds.rows.iter().zip(&ds.labels) {
        record.clear();
        for (f, &v) in ds.schema.iter().zip(row) {
            record.push(match f.kind {
                FeatureKind::Numeric => format!("{v}"),
                FeatureKind::Nominal => f.categories[v as usize].clone(),
            });
        }
        record.push(ds.class_names[label].clone());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Min-max scales every numeric column to [0, 1]; constant columns become 0.
pub fn normalize_numeric(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    for (j, f) in ds.schema.iter().enumerate() {
        if !f.is_numeric() {
            continue;
        }
        let (lo, hi) = ds.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r[j]), hi.max(r[j]))
        });
        let span = hi - lo;
        for row in &mut out.rows {
            row[j] = if span > 0.0 { (row[j] - lo) / span } else { 0.0 };
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitIndices {
    /// Train and validation rows combined, sorted.
    pub fn train_validation(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.train.iter().chain(&self.validation).copied().collect();
        all.sort_unstable();
        all
    }
}

/// Per-class seeded shuffle. Part sizes are rounded globally (train takes
/// the remainder), then each class's count in each part is the floor or
/// ceiling of its exact quota `|part| * n_c / n`, so class ratios in every
/// part are within one row of the global ratios.
pub fn stratified_split(ds: &Dataset, fractions: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if fractions.iter().any(|&f| !f.is_finite() || f <= 0.0) {
        return Err(Error::invalid(format!(
            "split fractions must be positive, got {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions must sum to 1, got {total}")));
    }
    let by_class = ds.rows_by_class();
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < 3 {
            return Err(Error::ClassTooSmall(ds.class_names[class].clone()));
        }
    }
    let n = ds.n_rows();
    let n_val = (n as f64 * fractions[1]).round() as usize;
    let n_test = (n as f64 * fractions[2]).round() as usize;
    if n_val == 0 || n_test == 0 || n_val + n_test >= n {
        return Err(Error::invalid(format!(
            "{n} rows cannot be split with fractions {fractions:?}"
        )));
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let counts = controlled_rounding(&sizes, [n - n_val - n_test, n_val, n_test]);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = SplitIndices {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for (mut members, [_, v, t]) in by_class.into_iter().zip(counts) {
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        split.validation.extend_from_slice(&members[..v]);
        split.test.extend_from_slice(&members[v..v + t]);
        split.train.extend_from_slice(&members[v + t..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Integer table with row sums `rows`, column sums `cols` and every cell
/// equal to the floor or ceiling of `cols[p] * rows[c] / n`. The rounding-up
/// decisions are a bipartite degree problem, solved as a small max-flow.
fn controlled_rounding(rows: &[usize], cols: [usize; 3]) -> Vec<[usize; 3]> {
    let n: usize = rows.iter().sum();
    let k = rows.len();
    let mut table = vec![[0usize; 3]; k];
    let mut rem = vec![[0usize; 3]; k];
    for c in 0..k {
        for p in 0..3 {
            table[c][p] = cols[p] * rows[c] / n;
            rem[c][p] = cols[p] * rows[c] % n;
        }
    }
    // Nodes: source, classes, parts, sink.
    let (source, sink) = (0, k + 4);
    let mut cap = vec![vec![0usize; k + 5]; k + 5];
    for c in 0..k {
        cap[source][1 + c] = rows[c] - table[c].iter().sum::<usize>();
        for p in 0..3 {
            if rem[c][p] > 0 {
                cap[1 + c][1 + k + p] = 1;
            }
        }
    }
    for p in 0..3 {
        cap[1 + k + p][sink] = cols[p] - table.iter().map(|r| r[p]).sum::<usize>();
    }
    while let Some(path) = augmenting_path(&cap, source, sink) {
        for w in path.windows(2) {
            cap[w[0]][w[1]] -= 1;
            cap[w[1]][w[0]] += 1;
        }
    }
    for c in 0..k {
        for p in 0..3 {
            if rem[c][p] > 0 && cap[1 + c][1 + k + p] == 0 {
                table[c][p] += 1;
            }
        }
    }
    table
}

fn augmenting_path(cap: &[Vec<usize>], source: usize, sink: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; cap.len()];
    prev[source] = source;
    let mut queue = std::collections::VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for v in 0..cap.len() {
            if cap[u][v] > 0 && prev[v] == usize::MAX {
                prev[v] = u;
                if v == sink {
                    let mut path = vec![sink];
                    let mut x = sink;
                    while x != source {
                        x = prev[x];
                        path.push(x);
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(v);
            }
        }
    }
    None
}
