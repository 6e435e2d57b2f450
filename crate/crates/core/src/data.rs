//! Tabular dataset loading and preprocessing.
//!
//! Loaders for the Adult census and ProPublica COMPAS files plus a seeded
//! synthetic generator used by property tests. Both loaders follow the same
//! recipe: drop unusable rows, one-hot encode categorical columns, and
//! standardize numeric columns to zero mean / unit variance over the rows
//! that survive cleaning (dataset level, before any client partitioning).

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labelled example: preprocessed features, binary target label and
/// binary sensitive attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: bool,
    pub sensitive: bool,
}

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Adult,
    Compas,
    Synthetic,
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSource::Adult => write!(f, "adult"),
            DatasetSource::Compas => write!(f, "compas"),
            DatasetSource::Synthetic => write!(f, "synthetic"),
        }
    }
}

/// A preprocessed dataset: samples plus the feature names matching their
/// dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub feature_names: Vec<String>,
    pub source: DatasetSource,
}

impl Dataset {
    /// Builds a dataset, validating that every sample matches the feature
    /// names in dimensionality and contains no non-finite entries.
    pub fn new(
        samples: Vec<Sample>,
        feature_names: Vec<String>,
        source: DatasetSource,
    ) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::InvalidDataset("empty feature_names".into()));
        }
        let dim = feature_names.len();
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "sample {i} has {} features, expected {dim}",
                    s.features.len()
                )));
            }
            if s.features.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "sample {i} contains a non-finite feature"
                )));
            }
        }
        Ok(Self {
            samples,
            feature_names,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature dimensionality.
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Sample counts per (label, sensitive) cell, indexed by [`cell_index`].
    pub fn cell_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for s in &self.samples {
            counts[cell_index(s.label, s.sensitive)] += 1;
        }
        counts
    }

    /// New dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            source: self.source,
        }
    }
}

/// Canonical index of a (label, sensitive) cell: `label * 2 + sensitive`.
///
/// Order: (0,0), (0,1), (1,0), (1,1).
pub fn cell_index(label: bool, sensitive: bool) -> usize {
    (label as usize) * 2 + (sensitive as usize)
}

/// Groups one-hot encoded feature columns by their source column.
///
/// Returns `(column_name, index_range)` for every categorical block, i.e.
/// every maximal run of feature names of the form `column=level`.
pub fn categorical_blocks(names: &[String]) -> Vec<(String, std::ops::Range<usize>)> {
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < names.len() {
        if let Some((col, _)) = names[i].split_once('=') {
            let start = i;
            let col = col.to_string();
            while i < names.len()
                && names[i]
                    .split_once('=')
                    .is_some_and(|(c, _)| c == col.as_str())
            {
                i += 1;
            }
            blocks.push((col, start..i));
        } else {
            i += 1;
        }
    }
    blocks
}

// ---------------------------------------------------------------------------
// Shared tabular encoding
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone)]
enum Cell {
    Num(f64),
    Cat(String),
}

struct RawRow {
    cells: Vec<Cell>,
    label: bool,
    sensitive: bool,
}

/// Encodes cleaned rows into feature vectors: categorical columns one-hot
/// (levels sorted lexicographically), numeric columns standardized to zero
/// mean and unit variance (population variance, the `StandardScaler`
/// convention) computed over the retained rows. A numeric column with zero
/// variance encodes as all zeros.
fn encode_rows(
    columns: &[(&str, ColumnKind)],
    rows: Vec<RawRow>,
    source: DatasetSource,
) -> Result<Dataset> {
    if rows.is_empty() {
        return Err(Error::EmptyAfterCleaning);
    }
    let n = rows.len() as f64;

    // Per-column encoding state.
    let mut levels: Vec<Vec<String>> = vec![Vec::new(); columns.len()];
    let mut mean_std: Vec<(f64, f64)> = vec![(0.0, 0.0); columns.len()];
    for (c, (_, kind)) in columns.iter().enumerate() {
        match kind {
            ColumnKind::Categorical => {
                let set: BTreeSet<&str> = rows
                    .iter()
                    .map(|r| match &r.cells[c] {
                        Cell::Cat(s) => s.as_str(),
                        Cell::Num(_) => unreachable!("categorical column holds numeric cell"),
                    })
                    .collect();
                levels[c] = set.into_iter().map(str::to_string).collect();
            }
            ColumnKind::Numeric => {
                let values = rows.iter().map(|r| match &r.cells[c] {
                    Cell::Num(v) => *v,
                    Cell::Cat(_) => unreachable!("numeric column holds categorical cell"),
                });
                let mean = values.clone().sum::<f64>() / n;
                let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                mean_std[c] = (mean, var.sqrt());
            }
        }
    }

    let mut feature_names = Vec::new();
    for (c, (name, kind)) in columns.iter().enumerate() {
        match kind {
            ColumnKind::Numeric => feature_names.push((*name).to_string()),
            ColumnKind::Categorical => {
                for level in &levels[c] {
                    feature_names.push(format!("{name}={level}"));
                }
            }
        }
    }

    let samples = rows
        .into_iter()
        .map(|row| {
            let mut features = Vec::with_capacity(feature_names.len());
            for (c, (_, kind)) in columns.iter().enumerate() {
                match (kind, &row.cells[c]) {
                    (ColumnKind::Numeric, Cell::Num(v)) => {
                        let (mean, std) = mean_std[c];
                        features.push(if std > 0.0 { (v - mean) / std } else { 0.0 });
                    }
                    (ColumnKind::Categorical, Cell::Cat(s)) => {
                        for level in &levels[c] {
                            features.push(if level == s { 1.0 } else { 0.0 });
                        }
                    }
                    _ => unreachable!("cell kind mismatch"),
                }
            }
            Sample {
                features,
                label: row.label,
                sensitive: row.sensitive,
            }
        })
        .collect();

    Dataset::new(samples, feature_names, source)
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(file))
}

/// Resolves required column names to indices in `headers`, applying
/// `aliases` (alternate spelling -> canonical name). Fails fast listing every
/// missing column.
fn resolve_columns(
    dataset: &'static str,
    headers: &csv::StringRecord,
    required: &[&str],
    aliases: &[(&str, &str)],
) -> Result<Vec<usize>> {
    let canonical = |h: &str| -> String {
        let h = h.trim();
        for (alt, canon) in aliases {
            if h.eq_ignore_ascii_case(alt) {
                return (*canon).to_string();
            }
        }
        h.to_ascii_lowercase()
    };
    let header_names: Vec<String> = headers.iter().map(canonical).collect();
    let mut indices = Vec::with_capacity(required.len());
    let mut missing = Vec::new();
    for want in required {
        match header_names.iter().position(|h| h == want) {
            Some(i) => indices.push(i),
            None => missing.push((*want).to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::HeaderMismatch { dataset, missing });
    }
    Ok(indices)
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "?"
}

// ---------------------------------------------------------------------------
// Adult
// ---------------------------------------------------------------------------

/// Adult census columns, in file order. `educational-num` and `gender` are
/// accepted as aliases for `education-num` and `sex`.
pub const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
];

const ADULT_NUMERIC: [&str; 6] = [
    "age",
    "fnlwgt",
    "education-num",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
];

/// Loads the Adult census CSV (comma-separated, header row, the 15 columns
/// of [`ADULT_COLUMNS`]).
///
/// Rows containing a missing marker (`?` or an empty field) in any column
/// are dropped. The target label is `income` (`>50K` = 1) and the sensitive
/// attribute is `sex` (`Male` = 1, `Female` = 0); neither enters the feature
/// vector. Remaining categorical columns are one-hot encoded and numeric
/// columns standardized over the retained rows.
pub fn load_adult(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers()?.clone();
    let aliases = [("educational-num", "education-num"), ("gender", "sex")];
    let idx = resolve_columns("adult", &headers, &ADULT_COLUMNS, &aliases)?;

    let feature_columns: Vec<(&str, ColumnKind)> = ADULT_COLUMNS
        .iter()
        .filter(|c| **c != "sex" && **c != "income")
        .map(|c| {
            let kind = if ADULT_NUMERIC.contains(c) {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            };
            (*c, kind)
        })
        .collect();
    let sex_pos = ADULT_COLUMNS.iter().position(|c| *c == "sex").unwrap();
    let income_pos = ADULT_COLUMNS.iter().position(|c| *c == "income").unwrap();

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |pos: usize| record.get(idx[pos]).unwrap_or("").trim();
        if (0..ADULT_COLUMNS.len()).any(|pos| is_missing(field(pos))) {
            continue;
        }

        let sex = field(sex_pos);
        let sensitive = match sex {
            "Male" => true,
            "Female" => false,
            other => {
                return Err(Error::InvalidDataset(format!(
                    "unrecognized sex value {other:?}"
                )))
            }
        };
        // The test half of the published file suffixes labels with a period.
        let income = field(income_pos).trim_end_matches('.');
        let label = match income {
            ">50K" => true,
            "<=50K" => false,
            other => {
                return Err(Error::InvalidDataset(format!(
                    "unrecognized income value {other:?}"
                )))
            }
        };

        let mut cells = Vec::with_capacity(feature_columns.len());
        for (name, kind) in &feature_columns {
            let pos = ADULT_COLUMNS.iter().position(|c| c == name).unwrap();
            let raw = field(pos);
            cells.push(match kind {
                ColumnKind::Numeric => Cell::Num(raw.parse::<f64>().map_err(|_| {
                    Error::InvalidDataset(format!("non-numeric value {raw:?} in column {name}"))
                })?),
                ColumnKind::Categorical => Cell::Cat(raw.to_string()),
            });
        }
        rows.push(RawRow {
            cells,
            label,
            sensitive,
        });
    }

    encode_rows(&feature_columns, rows, DatasetSource::Adult)
}

// ---------------------------------------------------------------------------
// COMPAS
// ---------------------------------------------------------------------------

/// Columns the COMPAS loader requires in the ProPublica two-year scores
/// file. Further columns are ignored.
pub const COMPAS_REQUIRED_COLUMNS: [&str; 9] = [
    "age_cat",
    "sex",
    "priors_count",
    "c_charge_degree",
    "race",
    "two_year_recid",
    "days_b_screening_arrest",
    "is_recid",
    "score_text",
];

/// Loads the ProPublica COMPAS two-year recidivism CSV.
///
/// Applies the standard cleaning used with this file: rows are kept only if
/// `days_b_screening_arrest` is within [-30, 30], `is_recid` is not -1,
/// `c_charge_degree` is not `O` and `score_text` is not `N/A`; rows with
/// missing values in any required column are dropped. Samples are then
/// restricted to races `Caucasian` (sensitive = 1) and `African-American`
/// (sensitive = 0). The label is `two_year_recid`; the features are
/// `age_cat`, `sex`, `c_charge_degree` (one-hot) and `priors_count`
/// (standardized).
pub fn load_compas(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers()?.clone();
    let idx = resolve_columns("compas", &headers, &COMPAS_REQUIRED_COLUMNS, &[])?;
    let pos_of = |name: &str| {
        COMPAS_REQUIRED_COLUMNS
            .iter()
            .position(|c| *c == name)
            .unwrap()
    };

    let feature_columns: [(&str, ColumnKind); 4] = [
        ("age_cat", ColumnKind::Categorical),
        ("sex", ColumnKind::Categorical),
        ("priors_count", ColumnKind::Numeric),
        ("c_charge_degree", ColumnKind::Categorical),
    ];

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |name: &str| record.get(idx[pos_of(name)]).unwrap_or("").trim();
        if COMPAS_REQUIRED_COLUMNS
            .iter()
            .any(|name| is_missing(field(name)))
        {
            continue;
        }

        let days: f64 = match field("days_b_screening_arrest").parse() {
            Ok(v) => v,
            Err(_) => continue,
        };
        if !(-30.0..=30.0).contains(&days) {
            continue;
        }
        if field("is_recid") == "-1" {
            continue;
        }
        if field("c_charge_degree") == "O" {
            continue;
        }
        if field("score_text") == "N/A" {
            continue;
        }

        let sensitive = match field("race") {
            "Caucasian" => true,
            "African-American" => false,
            _ => continue,
        };
        let label = match field("two_year_recid") {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::InvalidDataset(format!(
                    "unrecognized two_year_recid value {other:?}"
                )))
            }
        };

        let mut cells = Vec::with_capacity(feature_columns.len());
        for (name, kind) in &feature_columns {
            let raw = field(name);
            cells.push(match kind {
                ColumnKind::Numeric => Cell::Num(raw.parse::<f64>().map_err(|_| {
                    Error::InvalidDataset(format!("non-numeric value {raw:?} in column {name}"))
                })?),
                ColumnKind::Categorical => Cell::Cat(raw.to_string()),
            });
        }
        rows.push(RawRow {
            cells,
            label,
            sensitive,
        });
    }

    encode_rows(&feature_columns, rows, DatasetSource::Compas)
}

// ---------------------------------------------------------------------------
// Synthetic
// ---------------------------------------------------------------------------

/// Recipe for a synthetic dataset with controlled (label, sensitive) cell
/// probabilities and Gaussian class-conditional features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Number of samples.
    pub n: usize,
    /// Feature dimensionality.
    pub dim: usize,
    /// Probabilities of the four (label, sensitive) cells in [`cell_index`]
    /// order: (0,0), (0,1), (1,0), (1,1). Must sum to 1.
    pub group_rates: [f64; 4],
    /// Distance scale between the cell-conditional Gaussian means.
    pub separation: f64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let sum: f64 = self.group_rates.iter().sum();
        if self.group_rates.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidCellProbabilities {
                got: self.group_rates,
            });
        }
        if self.n == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "synthetic spec needs n >= 1 and dim >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Generates a synthetic dataset. Each sample's (label, sensitive) cell is
/// drawn from `group_rates`; features are unit-variance Gaussians whose mean
/// depends on the cell. The label direction is uniform across features and
/// the sensitive direction alternates sign, so the two signals are close to
/// orthogonal. Deterministic given `rng_seed`.
pub fn synth_generate(spec: &SynthSpec, rng_seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = Normal::new(0.0, 1.0).expect("valid normal");

    let scale = 1.0 / (spec.dim as f64).sqrt();
    let label_dir: Vec<f64> = (0..spec.dim).map(|_| scale).collect();
    let sens_dir: Vec<f64> = (0..spec.dim)
        .map(|j| if j % 2 == 0 { scale } else { -scale })
        .collect();

    let mut cumulative = [0.0f64; 4];
    let mut acc = 0.0;
    for (c, p) in spec.group_rates.iter().enumerate() {
        acc += p;
        cumulative[c] = acc;
    }

    let mut samples = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let u: f64 = rng.random();
        let cell = cumulative.iter().position(|&c| u < c).unwrap_or(3);
        let label = cell >= 2;
        let sensitive = cell % 2 == 1;
        let ly = if label { 1.0 } else { -1.0 };
        let la = if sensitive { 1.0 } else { -1.0 };
        let features = (0..spec.dim)
            .map(|j| {
                let mean = spec.separation * (ly * label_dir[j] + la * sens_dir[j]);
                mean + noise.sample(&mut rng)
            })
            .collect();
        samples.push(Sample {
            features,
            label,
            sensitive,
        });
    }

    let feature_names = (0..spec.dim).map(|j| format!("f{j}")).collect();
    Dataset::new(samples, feature_names, DatasetSource::Synthetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    pub(crate) fn adult_header() -> String {
        ADULT_COLUMNS.join(",")
    }

    fn adult_row(
        age: u32,
        workclass: &str,
        sex: &str,
        income: &str,
        native_country: &str,
    ) -> String {
        format!(
            "{age},{workclass},200000,Bachelors,13,Never-married,Sales,Own-child,White,{sex},0,0,40,{native_country},{income}"
        )
    }

    #[test]
    fn adult_drops_missing_rows() {
        let mut csv = adult_header() + "\n";
        csv += &(adult_row(25, "Private", "Male", ">50K", "United-States") + "\n");
        csv += &(adult_row(30, "?", "Female", "<=50K", "United-States") + "\n");
        csv += &(adult_row(40, "Private", "Female", "<=50K", "?") + "\n");
        csv += &(adult_row(50, "State-gov", "Female", ">50K", "Cuba") + "\n");
        let f = write_csv(&csv);
        let ds = load_adult(f.path()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples[0].label, true);
        assert_eq!(ds.samples[0].sensitive, true);
        assert_eq!(ds.samples[1].sensitive, false);
        assert_eq!(ds.source, DatasetSource::Adult);
    }

    #[test]
    fn adult_all_rows_missing_is_an_error() {
        let mut csv = adult_header() + "\n";
        for _ in 0..3 {
            csv += &(adult_row(30, "?", "Male", ">50K", "United-States") + "\n");
        }
        let f = write_csv(&csv);
        match load_adult(f.path()) {
            Err(Error::EmptyAfterCleaning) => {}
            other => panic!("expected EmptyAfterCleaning, got {other:?}"),
        }
    }

    #[test]
    fn adult_header_mismatch_fails_fast() {
        let f = write_csv("age,workclass\n39,Private\n");
        match load_adult(f.path()) {
            Err(Error::HeaderMismatch { dataset, missing }) => {
                assert_eq!(dataset, "adult");
                assert!(missing.contains(&"income".to_string()));
            }
            other => panic!("expected HeaderMismatch, got {other:?}"),
        }
    }

    #[test]
    fn adult_missing_file() {
        assert!(matches!(
            load_adult("/nonexistent/adult.csv"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn adult_kaggle_style_aliases_accepted() {
        let header = adult_header()
            .replace("education-num", "educational-num")
            .replace(",sex,", ",gender,");
        let csv = format!(
            "{header}\n{}\n{}\n",
            adult_row(25, "Private", "Male", ">50K", "United-States"),
            adult_row(30, "Private", "Female", "<=50K.", "United-States"),
        );
        let f = write_csv(&csv);
        let ds = load_adult(f.path()).unwrap();
        assert_eq!(ds.len(), 2);
        // trailing '.' on test-half labels is stripped
        assert_eq!(ds.samples[1].label, false);
    }

    // 10-row fixture with one categorical column of 3 levels: hand-encoded
    // expectation is a 3-wide one-hot block with exactly one 1 per row.
    #[test]
    fn one_hot_block_hand_fixture() {
        let workclasses = [
            "Private",
            "State-gov",
            "Self-emp",
            "Private",
            "Private",
            "State-gov",
            "Self-emp",
            "Private",
            "State-gov",
            "Private",
        ];
        let mut csv = adult_header() + "\n";
        for (i, wc) in workclasses.iter().enumerate() {
            csv += &(adult_row(20 + i as u32, wc, "Male", "<=50K", "United-States") + "\n");
        }
        let f = write_csv(&csv);
        let ds = load_adult(f.path()).unwrap();
        assert_eq!(ds.len(), 10);

        let blocks = categorical_blocks(&ds.feature_names);
        let (_, wc_range) = blocks
            .iter()
            .find(|(name, _)| name == "workclass")
            .unwrap()
            .clone();
        assert_eq!(wc_range.len(), 3);
        // levels are sorted lexicographically
        assert_eq!(ds.feature_names[wc_range.start], "workclass=Private");
        assert_eq!(ds.feature_names[wc_range.start + 1], "workclass=Self-emp");
        assert_eq!(ds.feature_names[wc_range.start + 2], "workclass=State-gov");
        for (i, s) in ds.samples.iter().enumerate() {
            let block = &s.features[wc_range.clone()];
            assert_eq!(
                block.iter().filter(|&&x| x == 1.0).count(),
                1,
                "row {i}: {block:?}"
            );
            assert!(block.iter().all(|&x| x == 0.0 || x == 1.0));
            let expect = match workclasses[i] {
                "Private" => 0,
                "Self-emp" => 1,
                _ => 2,
            };
            assert_eq!(block[expect], 1.0);
        }
    }

    #[test]
    fn standardization_zero_mean_unit_variance() {
        let mut csv = adult_header() + "\n";
        for age in [22, 31, 47, 58, 64] {
            csv += &(adult_row(age, "Private", "Male", "<=50K", "United-States") + "\n");
        }
        let f = write_csv(&csv);
        let ds = load_adult(f.path()).unwrap();
        let age_col = ds.feature_names.iter().position(|n| n == "age").unwrap();
        let n = ds.len() as f64;
        let mean: f64 = ds.samples.iter().map(|s| s.features[age_col]).sum::<f64>() / n;
        let var: f64 = ds
            .samples
            .iter()
            .map(|s| (s.features[age_col] - mean).powi(2))
            .sum::<f64>()
            / n;
        assert!(mean.abs() < 1e-9, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-9, "var {var}");
    }

    #[test]
    fn loading_twice_is_identical() {
        let mut csv = adult_header() + "\n";
        for age in [22, 31, 47] {
            csv += &(adult_row(age, "Private", "Female", ">50K", "United-States") + "\n");
        }
        let f = write_csv(&csv);
        let a = load_adult(f.path()).unwrap();
        let b = load_adult(f.path()).unwrap();
        assert_eq!(a, b);
    }

    pub(crate) fn compas_header() -> String {
        // Deliberately includes an extra column to check that unknown
        // columns are ignored and order is irrelevant.
        "id,age_cat,sex,priors_count,c_charge_degree,race,two_year_recid,\
         days_b_screening_arrest,is_recid,score_text"
            .to_string()
    }

    pub(crate) fn compas_row(race: &str, recid: u8, priors: u32) -> String {
        format!("7,25 - 45,Male,{priors},F,{race},{recid},0,{recid},Low")
    }

    #[test]
    fn compas_race_filter_hand_fixture() {
        // 3 Caucasian / 2 African-American / 1 other: the other-race row drops.
        let mut csv = compas_header() + "\n";
        csv += &(compas_row("Caucasian", 1, 0) + "\n");
        csv += &(compas_row("Caucasian", 0, 2) + "\n");
        csv += &(compas_row("Caucasian", 0, 1) + "\n");
        csv += &(compas_row("African-American", 1, 3) + "\n");
        csv += &(compas_row("African-American", 0, 5) + "\n");
        csv += &(compas_row("Hispanic", 1, 1) + "\n");
        let f = write_csv(&csv);
        let ds = load_compas(f.path()).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.samples.iter().filter(|s| s.sensitive).count(), 3);
        assert_eq!(ds.samples.iter().filter(|s| s.label).count(), 2);
    }

    #[test]
    fn compas_only_other_races_is_an_error() {
        let mut csv = compas_header() + "\n";
        csv += &(compas_row("Hispanic", 1, 1) + "\n");
        csv += &(compas_row("Hispanic", 0, 0) + "\n");
        let f = write_csv(&csv);
        assert!(matches!(
            load_compas(f.path()),
            Err(Error::EmptyAfterCleaning)
        ));
    }

    #[test]
    fn compas_standard_filters_apply() {
        let mut csv = compas_header() + "\n";
        csv += &(compas_row("Caucasian", 1, 0) + "\n");
        // days_b_screening_arrest out of range
        csv += "8,25 - 45,Male,1,F,Caucasian,1,45,1,Low\n";
        // is_recid = -1
        csv += "9,25 - 45,Male,1,F,Caucasian,1,0,-1,Low\n";
        // ordinary traffic offense
        csv += "10,25 - 45,Male,1,O,Caucasian,1,0,1,Low\n";
        // score_text N/A
        csv += "11,25 - 45,Male,1,F,Caucasian,1,0,1,N/A\n";
        // missing days_b_screening_arrest
        csv += "12,25 - 45,Male,1,F,Caucasian,1,,1,Low\n";
        let f = write_csv(&csv);
        let ds = load_compas(f.path()).unwrap();
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn synth_degenerate_cell_and_determinism() {
        let spec = SynthSpec {
            n: 4,
            dim: 3,
            group_rates: [0.0, 0.0, 0.0, 1.0],
            separation: 1.0,
        };
        let a = synth_generate(&spec, 7).unwrap();
        assert_eq!(a.len(), 4);
        assert!(a.samples.iter().all(|s| s.label && s.sensitive));
        let b = synth_generate(&spec, 7).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_rejects_bad_probabilities() {
        let spec = SynthSpec {
            n: 10,
            dim: 2,
            group_rates: [0.5, 0.5, 0.25, -0.25],
            separation: 1.0,
        };
        assert!(matches!(
            synth_generate(&spec, 1),
            Err(Error::InvalidCellProbabilities { .. })
        ));
    }

    // Multinomial tail bound: each balanced cell count within 4 sigma of 250.
    #[test]
    fn synth_cell_counts_near_expectation() {
        let spec = SynthSpec {
            n: 1000,
            dim: 2,
            group_rates: [0.25; 4],
            separation: 0.5,
        };
        let sigma = (1000.0f64 * 0.25 * 0.75).sqrt();
        for seed in [1, 2, 3] {
            let ds = synth_generate(&spec, seed).unwrap();
            for (c, count) in ds.cell_counts().iter().enumerate() {
                let dev = (*count as f64 - 250.0).abs();
                assert!(dev <= 4.0 * sigma, "seed {seed} cell {c}: count {count}");
            }
        }
    }

    #[test]
    fn cell_index_order() {
        assert_eq!(cell_index(false, false), 0);
        assert_eq!(cell_index(false, true), 1);
        assert_eq!(cell_index(true, false), 2);
        assert_eq!(cell_index(true, true), 3);
    }
}
