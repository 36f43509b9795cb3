use std::fmt;
use std::io::Read;

use crate::error::{invalid, Error, Result};

/// A `K x K` misclassification cost matrix.
///
/// `C[j][k]` is the cost of predicting class `k` when the truth is `j`.
/// Entries are finite and nonnegative and the diagonal is zero; the matrix
/// need not be symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(invalid(format!("cost matrix needs K >= 2, got {k}")));
        }
        if entries.len() != k * k {
            return Err(invalid(format!(
                "cost matrix with K = {k} needs {} entries, got {}",
                k * k,
                entries.len()
            )));
        }
        for j in 0..k {
            for t in 0..k {
                let v = entries[j * k + t];
                if !v.is_finite() || v < 0.0 {
                    return Err(invalid(format!(
                        "cost entry at row {}, column {} must be finite and >= 0, got {v}",
                        j + 1,
                        t + 1
                    )));
                }
                if j == t && v != 0.0 {
                    return Err(invalid(format!(
                        "cost entry at row {}, column {} is on the diagonal and must be 0, got {v}",
                        j + 1,
                        t + 1
                    )));
                }
            }
        }
        Ok(Self { k, entries })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let k = rows.len();
        let mut entries = Vec::with_capacity(k * k);
        for (j, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != k {
                return Err(invalid(format!(
                    "cost matrix row {} has {} columns, expected {k}",
                    j + 1,
                    r.len()
                )));
            }
            entries.extend_from_slice(r);
        }
        Self::new(k, entries)
    }

    /// `C[j][k] = 1` off the diagonal.
    pub fn zero_one(k: usize) -> Result<Self> {
        Self::from_fn(k, |j, t| if j == t { 0.0 } else { 1.0 })
    }

    pub fn from_fn(k: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(k * k);
        for j in 0..k {
            for t in 0..k {
                entries.push(f(j, t));
            }
        }
        Self::new(k, entries)
    }

    /// Parses a headerless CSV with `K` rows of `K` decimal numbers.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                row: r + 1,
                column: "?".into(),
                message: e.to_string(),
            })?;
            let mut row = Vec::with_capacity(rec.len());
            for (c, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: r + 1,
                    column: (c + 1).to_string(),
                    message: format!("`{cell}` is not a number"),
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(invalid("cost matrix file is empty"));
        }
        Self::from_rows(&rows)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, truth: usize, predicted: usize) -> f64 {
        self.entries[truth * self.k + predicted]
    }

    pub fn row(&self, truth: usize) -> &[f64] {
        &self.entries[truth * self.k..(truth + 1) * self.k]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Whether every off-diagonal entry equals one.
    pub fn is_zero_one(&self) -> bool {
        (0..self.k).all(|j| (0..self.k).all(|t| j == t || self.get(j, t) == 1.0))
    }

    /// Multiplies every entry by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.k, self.entries.iter().map(|v| v * factor).collect())
    }

    /// Relabels classes: entry `(a, b)` of the result is `C[order[a]][order[b]]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.k || order.iter().any(|&o| o >= self.k) {
            return Err(invalid("not a permutation of the class indices"));
        }
        Self::from_fn(self.k, |a, b| self.get(order[a], order[b]))
    }
}

impl fmt::Display for CostMatrix {
    /// Headerless CSV, one row per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.k {
            let row: Vec<String> = self.row(j).iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonzero_diagonal() {
        let err = CostMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.5]]).unwrap_err();
        assert!(err.to_string().contains("row 2, column 2"), "{err}");
    }

    #[test]
    fn rejects_negative_entries() {
        let err = CostMatrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]).unwrap_err();
        assert!(err.to_string().contains("row 1, column 2"), "{err}");
    }

    #[test]
    fn asymmetric_is_allowed() {
        let c = CostMatrix::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap();
        assert_eq!(c.get(0, 1), 2.0);
        assert_eq!(c.get(1, 0), 1.0);
        assert!(!c.is_zero_one());
        assert!(CostMatrix::zero_one(5).unwrap().is_zero_one());
    }

    #[test]
    fn parses_csv() {
        let text = "0,2,2\n1, 0 ,1\n1,1,0\n";
        let c = CostMatrix::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(c.row(0), &[0.0, 2.0, 2.0]);
        let back = CostMatrix::from_csv_reader(c.to_string().as_bytes()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn csv_errors_name_the_cell() {
        let err = CostMatrix::from_csv_reader("0,1\n1,x\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "2");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(CostMatrix::from_csv_reader("0,1,1\n1,0\n".as_bytes()).is_err());
        assert!(CostMatrix::from_csv_reader("".as_bytes()).is_err());
    }
}
