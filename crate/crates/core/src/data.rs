//! Datasets, synthetic generators and CSV preprocessing.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest number of distinct label values accepted from a CSV file.
pub const MAX_CLASSES: usize = 50;

/// A dense row-major `rows x cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(invalid(format!(
                "{rows} x {cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            values,
        }
    }

    fn column_mut(&mut self, col: usize) -> impl Iterator<Item = &mut f64> {
        self.values.iter_mut().skip(col).step_by(self.cols.max(1))
    }
}

/// Features with zero-based class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    labels: Vec<usize>,
    k: usize,
    feature_names: Vec<String>,
    /// Whether each column is continuous (subject to standardization).
    continuous: Vec<bool>,
    /// Original label value for each class index.
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        labels: Vec<usize>,
        k: usize,
        feature_names: Vec<String>,
        continuous: Vec<bool>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if x.rows() == 0 {
            return Err(invalid("dataset has no rows"));
        }
        if labels.len() != x.rows() {
            return Err(invalid(format!(
                "{} labels for {} rows",
                labels.len(),
                x.rows()
            )));
        }
        if k < 2 {
            return Err(invalid(format!("need K >= 2 classes, got {k}")));
        }
        if let Some(i) = labels.iter().position(|&y| y >= k) {
            return Err(invalid(format!(
                "label {} at row {} out of range for K = {k}",
                labels[i] + 1,
                i + 1
            )));
        }
        if feature_names.len() != x.cols() || continuous.len() != x.cols() {
            return Err(invalid("feature metadata does not match the column count"));
        }
        if label_names.len() != k {
            return Err(invalid("need one label name per class"));
        }
        if let Some(i) = x.values().iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite feature value at row {}, column `{}`",
                i / x.cols() + 1,
                feature_names[i % x.cols()]
            )));
        }
        Ok(Self {
            x,
            labels,
            k,
            feature_names,
            continuous,
            label_names,
        })
    }

    /// A dataset with continuous columns `x1..xd` and labels named `1..K`.
    pub fn from_parts(x: Matrix, labels: Vec<usize>, k: usize) -> Result<Self> {
        let d = x.cols();
        Self::new(
            x,
            labels,
            k,
            (1..=d).map(|j| format!("x{j}")).collect(),
            vec![true; d],
            (1..=k).map(|c| c.to_string()).collect(),
        )
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn continuous(&self) -> &[bool] {
        &self.continuous
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Self {
        Self {
            x: Matrix::new(0, self.x.cols(), Vec::new()).unwrap(),
            labels: Vec::new(),
            k: self.k,
            feature_names: self.feature_names.clone(),
            continuous: self.continuous.clone(),
            label_names: self.label_names.clone(),
        }
    }

    fn with_x(&self, x: Matrix) -> Self {
        Self {
            x,
            labels: self.labels.clone(),
            ..self.clone_meta()
        }
    }

    /// Writes a header row and one row per example, label column last.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Csv {
            path: "<export>".into(),
            source: e,
        };
        let mut header = self.feature_names.clone();
        header.push("label".into());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.label_names[self.labels[i]].clone());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `v_1(j) = max(6 - |j - 11|, 0)` for one-based `j`.
pub fn waveform_base(j: i64) -> f64 {
    (6 - (j - 11).abs()).max(0) as f64
}

/// The three shifted triangles `v_1, v_2, v_3` at one-based position `j`.
pub fn waveform_vertex(shape: usize, j: i64) -> f64 {
    match shape {
        0 => waveform_base(j),
        1 => waveform_base(j - 4),
        2 => waveform_base(j + 4),
        _ => panic!("waveform shape index {shape} out of range"),
    }
}

/// Triangle pairs mixed by each waveform class.
pub const WAVEFORM_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Which synthetic problem to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// Three classes, 21 features of noisy mixed triangular waveforms.
    Waveform,
    /// Four classes, 10 features, two informative Gaussian coordinates.
    FourClass,
}

impl Generator {
    pub fn k(self) -> usize {
        match self {
            Generator::Waveform => 3,
            Generator::FourClass => 4,
        }
    }

    pub fn d(self) -> usize {
        match self {
            Generator::Waveform => 21,
            Generator::FourClass => 10,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Generator::Waveform => "waveform",
            Generator::FourClass => "four_class",
        }
    }

    /// Draws `n` examples from `rng`.
    pub fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(invalid("sample size must be >= 1"));
        }
        let (k, d) = (self.k(), self.d());
        let mut x = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = rng.random_range(0..k);
            labels.push(y);
            match self {
                Generator::Waveform => {
                    let (a, b) = WAVEFORM_PAIRS[y];
                    let u: f64 = rng.random();
                    for j in 1..=d as i64 {
                        let noise: f64 = rng.sample(StandardNormal);
                        x.push(
                            u * waveform_vertex(a, j) + (1.0 - u) * waveform_vertex(b, j) + noise,
                        );
                    }
                }
                Generator::FourClass => {
                    let (m1, m2) = four_class_means(y);
                    for j in 0..d {
                        let noise: f64 = rng.sample(StandardNormal);
                        x.push(match j {
                            0 => m1,
                            1 => m2,
                            _ => 0.0,
                        } + noise);
                    }
                }
            }
        }
        Dataset::from_parts(Matrix::new(n, d, x)?, labels, k)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "waveform" => Ok(Generator::Waveform),
            "four_class" | "four-class" | "four_class_gaussian" => Ok(Generator::FourClass),
            other => Err(invalid(format!(
                "unknown generator `{other}` (expected waveform or four_class)"
            ))),
        }
    }
}

/// Means of the two informative coordinates for zero-based class `y`.
pub fn four_class_means(y: usize) -> (f64, f64) {
    let ind = |c: usize| if y == c { 1.0 } else { 0.0 };
    (3.0 * (ind(0) - ind(2)), 3.0 * (ind(1) - ind(2)))
}

/// `n` waveform examples from a generator seeded with `seed`.
pub fn gen_waveform(n: usize, seed: u64) -> Result<Dataset> {
    Generator::Waveform.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `n` four-class Gaussian examples from a generator seeded with `seed`.
pub fn gen_four_class(n: usize, seed: u64) -> Result<Dataset> {
    Generator::FourClass.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Generator for substream `stream` of `seed`.
///
/// Replication `r` of an experiment uses stream `r`, so replications are
/// independent of each other and of the order they run in.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Column kinds for CSV loading. Columns not listed are numeric.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    kinds: HashMap<String, ColumnKind>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: impl Into<String>, kind: ColumnKind) -> Self {
        self.kinds.insert(column.into(), kind);
        self
    }

    pub fn categorical<S: AsRef<str>>(columns: &[S]) -> Self {
        columns.iter().fold(Self::new(), |s, c| {
            s.with(c.as_ref(), ColumnKind::Categorical)
        })
    }

    pub fn kind(&self, column: &str) -> ColumnKind {
        self.kinds.get(column).copied().unwrap_or(ColumnKind::Numeric)
    }
}

/// A parsed CSV file: header plus cells, with missing cells as `None`.
#[derive(Debug, Clone)]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<Option<String>>>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

impl Table {
    pub fn read<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let csv_err = |e: csv::Error| Error::Csv {
            path: source.to_path_buf(),
            source: e,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(invalid(format!("{} is empty", source.display())));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            rows.push(
                rec.iter()
                    .map(|c| (!is_missing(c)).then(|| c.to_string()))
                    .collect(),
            );
        }
        if rows.is_empty() {
            return Err(invalid(format!("{} has no data rows", source.display())));
        }
        Ok(Self { headers, rows })
    }

    pub fn open(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file), path)
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| invalid(format!("column `{name}` not found")))
    }

    fn numeric(&self, col: usize) -> Result<Vec<Option<f64>>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| match &row[col] {
                None => Ok(None),
                Some(s) => s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some).ok_or_else(|| {
                    Error::Parse {
                        // Data rows start on line 2 of the file.
                        row: r + 2,
                        column: self.headers[col].clone(),
                        message: format!("`{s}` is not a number"),
                    }
                }),
            })
            .collect()
    }
}

/// Preprocessing learned from a training file and replayable on new files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub label_column: String,
    pub label_names: Vec<String>,
    pub columns: Vec<ColumnEncoding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnEncoding {
    /// Missing cells are replaced by `mean`.
    Numeric { name: String, mean: f64 },
    /// One indicator per level; missing cells take the `mode` level.
    Categorical {
        name: String,
        levels: Vec<String>,
        mode: usize,
    },
}

impl ColumnEncoding {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoding::Numeric { name, .. } | ColumnEncoding::Categorical { name, .. } => name,
        }
    }
}

/// Sorts label values numerically when they all parse as numbers,
/// lexicographically otherwise.
fn sort_labels(values: &mut [String]) {
    let numeric: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
    match numeric {
        Some(_) => values.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .total_cmp(&b.parse::<f64>().unwrap())
        }),
        None => values.sort(),
    }
}

impl Encoding {
    /// Learns label mapping, imputation values and one-hot levels.
    pub fn fit(table: &Table, label_column: &str, schema: &Schema) -> Result<Self> {
        let label_col = table.column(label_column)?;
        let mut label_names: Vec<String> = Vec::new();
        for (r, row) in table.rows.iter().enumerate() {
            match &row[label_col] {
                None => {
                    return Err(Error::Parse {
                        row: r + 2,
                        column: label_column.into(),
                        message: "missing label".into(),
                    })
                }
                Some(v) if !label_names.contains(v) => label_names.push(v.clone()),
                Some(_) => {}
            }
        }
        if label_names.len() > MAX_CLASSES {
            return Err(invalid(format!(
                "label column `{label_column}` has {} distinct values, at most {MAX_CLASSES} allowed",
                label_names.len()
            )));
        }
        if label_names.len() < 2 {
            return Err(invalid(format!(
                "label column `{label_column}` needs at least two distinct values"
            )));
        }
        sort_labels(&mut label_names);

        let mut columns = Vec::new();
        for (c, name) in table.headers.iter().enumerate() {
            if c == label_col {
                continue;
            }
            columns.push(match schema.kind(name) {
                ColumnKind::Numeric => {
                    let vals: Vec<f64> = table.numeric(c)?.into_iter().flatten().collect();
                    if vals.is_empty() {
                        return Err(invalid(format!("numeric column `{name}` has no values")));
                    }
                    ColumnEncoding::Numeric {
                        name: name.clone(),
                        mean: vals.iter().sum::<f64>() / vals.len() as f64,
                    }
                }
                ColumnKind::Categorical => {
                    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                    for row in &table.rows {
                        if let Some(v) = &row[c] {
                            *counts.entry(v).or_default() += 1;
                        }
                    }
                    if counts.is_empty() {
                        return Err(invalid(format!("categorical column `{name}` has no values")));
                    }
                    let levels: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
                    let top = counts.values().copied().max().unwrap();
                    let mode = counts.values().position(|&n| n == top).unwrap();
                    ColumnEncoding::Categorical {
                        name: name.clone(),
                        levels,
                        mode,
                    }
                }
            });
        }
        if columns.is_empty() {
            return Err(invalid("no feature columns besides the label"));
        }
        Ok(Self {
            label_column: label_column.into(),
            label_names,
            columns,
        })
    }

    pub fn k(&self) -> usize {
        self.label_names.len()
    }

    /// Names of the encoded feature columns; indicators are `column=level`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for col in &self.columns {
            match col {
                ColumnEncoding::Numeric { name, .. } => out.push(name.clone()),
                ColumnEncoding::Categorical { name, levels, .. } => {
                    out.extend(levels.iter().map(|l| format!("{name}={l}")))
                }
            }
        }
        out
    }

    fn continuous(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for col in &self.columns {
            match col {
                ColumnEncoding::Numeric { .. } => out.push(true),
                ColumnEncoding::Categorical { levels, .. } => {
                    out.extend(std::iter::repeat_n(false, levels.len()))
                }
            }
        }
        out
    }

    /// Encodes the feature columns of `table`. Categorical levels unseen
    /// during fitting encode as all-zero indicators.
    pub fn features(&self, table: &Table) -> Result<Matrix> {
        let d = self.feature_names().len();
        let n = table.len();
        let mut values = vec![0.0; n * d];
        let mut offset = 0;
        for col in &self.columns {
            let c = table.column(col.name())?;
            match col {
                ColumnEncoding::Numeric { mean, .. } => {
                    for (r, v) in table.numeric(c)?.into_iter().enumerate() {
                        values[r * d + offset] = v.unwrap_or(*mean);
                    }
                    offset += 1;
                }
                ColumnEncoding::Categorical { levels, mode, .. } => {
                    for (r, row) in table.rows.iter().enumerate() {
                        let level = match &row[c] {
                            None => Some(*mode),
                            Some(v) => levels.iter().position(|l| l == v),
                        };
                        if let Some(l) = level {
                            values[r * d + offset + l] = 1.0;
                        }
                    }
                    offset += levels.len();
                }
            }
        }
        Matrix::new(n, d, values)
    }

    /// Zero-based class indices of the label column.
    pub fn labels(&self, table: &Table) -> Result<Vec<usize>> {
        let c = table.column(&self.label_column)?;
        table
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let v = row[c].as_deref().unwrap_or("");
                self.label_names
                    .iter()
                    .position(|l| l == v)
                    .ok_or_else(|| Error::Parse {
                        row: r + 2,
                        column: self.label_column.clone(),
                        message: format!("unknown label `{v}`"),
                    })
            })
            .collect()
    }

    pub fn dataset(&self, table: &Table) -> Result<Dataset> {
        Dataset::new(
            self.features(table)?,
            self.labels(table)?,
            self.k(),
            self.feature_names(),
            self.continuous(),
            self.label_names.clone(),
        )
    }
}

/// Loads a CSV with a header row, imputing missing values (empty or `NA`)
/// and one-hot encoding categorical columns. Labels map to class indices
/// in sorted order of their distinct values.
pub fn load_csv(path: &Path, label_column: &str, schema: &Schema) -> Result<(Dataset, Encoding)> {
    let table = Table::open(path)?;
    let enc = Encoding::fit(&table, label_column, schema)?;
    Ok((enc.dataset(&table)?, enc))
}

/// Column means and population standard deviations of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Columns that are shifted and scaled; others pass through.
    pub scaled: Vec<bool>,
    /// Continuous columns left unscaled because their sd is zero.
    pub constant: Vec<usize>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Self {
        let (n, d) = (train.n() as f64, train.d());
        let mut means = vec![0.0; d];
        let mut sds = vec![0.0; d];
        let mut scaled = vec![false; d];
        let mut constant = Vec::new();
        for j in 0..d {
            let col = (0..train.n()).map(|i| train.x.get(i, j));
            let mean = col.clone().sum::<f64>() / n;
            let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            means[j] = mean;
            sds[j] = var.sqrt();
            if train.continuous[j] {
                if sds[j] > 1e-12 * mean.abs().max(1.0) {
                    scaled[j] = true;
                } else {
                    constant.push(j);
                }
            }
        }
        Self {
            means,
            sds,
            scaled,
            constant,
        }
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(invalid(format!(
                "standardizer fitted on {} columns, got {}",
                self.means.len(),
                x.cols()
            )));
        }
        let mut out = x.clone();
        for j in (0..x.cols()).filter(|&j| self.scaled[j]) {
            let (m, s) = (self.means[j], self.sds[j]);
            out.column_mut(j).for_each(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        Ok(data.with_x(self.apply_matrix(&data.x)?))
    }
}

/// Standardizes the continuous columns of `train` to mean 0 and
/// population sd 1 and applies the same transform to `others`.
pub fn standardize(train: &Dataset, others: &[Dataset]) -> Result<(Dataset, Vec<Dataset>, Standardizer)> {
    let st = Standardizer::fit(train);
    let t = st.apply(train)?;
    let o = others.iter().map(|d| st.apply(d)).collect::<Result<_>>()?;
    Ok((t, o, st))
}

/// Splits row indices into train and test sets, sampling the fraction
/// `train_fraction` within each class. Classes with at least two rows
/// contribute at least one row to each side.
pub fn stratified_split<R: Rng + ?Sized>(
    labels: &[usize],
    k: usize,
    train_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        by_class
            .get_mut(y)
            .ok_or_else(|| invalid(format!("label {} out of range", y + 1)))?
            .push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut rows in by_class {
        rows.shuffle(rng);
        let mut take = (train_fraction * rows.len() as f64).round() as usize;
        if rows.len() >= 2 {
            take = take.clamp(1, rows.len() - 1);
        }
        train.extend_from_slice(&rows[..take]);
        test.extend_from_slice(&rows[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
