use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An `n x p` data matrix with column labels. Column 1 is the treatment and
/// column `p` the response when the dataset covers a full model.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
}

impl Dataset {
    pub fn new(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if matrix.nrows() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 rows, got {}",
                matrix.nrows()
            )));
        }
        if matrix.ncols() == 0 {
            return Err(Error::InvalidData("dataset has no columns".into()));
        }
        if labels.len() != matrix.ncols() {
            return Err(Error::InvalidData(format!(
                "{} labels for {} columns",
                labels.len(),
                matrix.ncols()
            )));
        }
        if let Some(pos) = matrix.iter().position(|x| !x.is_finite()) {
            let (r, c) = (pos % matrix.nrows(), pos / matrix.nrows());
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                r + 1,
                c + 1
            )));
        }
        Ok(Dataset { matrix, labels })
    }

    /// Dataset with labels `X1..Xp`.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let labels = default_labels(matrix.ncols());
        Dataset::new(matrix, labels)
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn p(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Column `j`, 1-indexed.
    pub fn column(&self, j: usize) -> DVector<f64> {
        self.matrix.column(j - 1).into_owned()
    }

    /// Sample means of all columns.
    pub fn means(&self) -> DVector<f64> {
        self.matrix.row_mean().transpose()
    }

    /// Sample covariance with divisor `n`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let centered = self.centered();
        (centered.transpose() * &centered) / self.n() as f64
    }

    /// Data with each column shifted to sample mean zero.
    pub fn centered(&self) -> DMatrix<f64> {
        let means = self.matrix.row_mean();
        let mut c = self.matrix.clone();
        for mut row in c.row_iter_mut() {
            row -= &means;
        }
        c
    }

    /// Keeps the given 1-indexed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        let m = DMatrix::from_fn(self.n(), cols.len(), |r, c| self.matrix[(r, cols[c] - 1)]);
        let labels = cols.iter().map(|&c| self.labels[c - 1].clone()).collect();
        Dataset::new(m, labels)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.labels)?;
        for row in self.matrix.row_iter() {
            wr.write_record(row.iter().map(|x| format!("{x:e}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Dataset> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let labels: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let p = labels.len();
        let mut values = Vec::new();
        let mut n = 0;
        for (k, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != p {
                return Err(Error::Parse {
                    line: k + 2,
                    message: format!("expected {p} fields, found {}", rec.len()),
                });
            }
            for field in rec.iter() {
                let x = field.parse::<f64>().map_err(|_| Error::Parse {
                    line: k + 2,
                    message: format!("not a number: '{field}'"),
                })?;
                values.push(x);
            }
            n += 1;
        }
        Dataset::new(DMatrix::from_row_slice(n, p, &values), labels)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load_csv(path: &Path) -> Result<Dataset> {
        Dataset::read_csv(std::fs::File::open(path)?)
    }
}

pub(crate) fn default_labels(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}
