//! Regular grids with a missing-data mask and their CSV interchange format.
//!
//! A grid file is a header-less CSV of row-major values in which `-1` marks a
//! missing cell, accompanied by a JSON sidecar `{"rows", "cols", "cell_size"}`
//! stored next to it with a `.json` extension.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Sentinel written for missing cells.
pub const MISSING: f64 = -1.0;

/// Values on a regular grid; `mask[(i, j)]` is true where the cell is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedGrid {
    values: DMatrix<f64>,
    mask: DMatrix<bool>,
    cell_size: f64,
}

/// Contents of the JSON sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
}

impl MaskedGrid {
    /// Values in unobserved cells are ignored and stored as zero.
    pub fn new(values: DMatrix<f64>, mask: DMatrix<bool>, cell_size: f64) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(invalid(format!(
                "values have shape {:?} but mask has shape {:?}",
                values.shape(),
                mask.shape()
            )));
        }
        if values.is_empty() {
            return Err(invalid("grid must have at least one cell"));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(invalid(format!("cell size must be positive, got {cell_size}")));
        }
        let mut values = values;
        for (v, &m) in values.iter_mut().zip(mask.iter()) {
            if !m {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(invalid("observed grid values must be finite"));
            }
        }
        Ok(Self { values, mask, cell_size })
    }

    /// Every cell observed.
    pub fn full(values: DMatrix<f64>, cell_size: f64) -> Result<Self> {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, mask, cell_size)
    }

    /// Grid whose cells equal to `-1` are missing.
    pub fn from_sentinel(values: DMatrix<f64>, cell_size: f64) -> Result<Self> {
        let mask = values.map(|v| v != MISSING);
        Self::new(values, mask, cell_size)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn missing_count(&self) -> usize {
        self.mask.len() - self.observed_count()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.mask[(i, j)].then(|| self.values[(i, j)])
    }

    /// Copy with the given cells hidden in addition to the existing missing ones.
    pub fn hide(&self, cells: &[(usize, usize)]) -> Self {
        let mut out = self.clone();
        for &(i, j) in cells {
            out.mask[(i, j)] = false;
            out.values[(i, j)] = 0.0;
        }
        out
    }

    pub fn meta(&self) -> GridMeta {
        let (rows, cols) = self.shape();
        GridMeta {
            rows,
            cols,
            cell_size: self.cell_size,
        }
    }

    /// Values with missing cells replaced by `-1`.
    pub fn to_sentinel(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.values.nrows(), self.values.ncols(), |i, j| {
            self.get(i, j).unwrap_or(MISSING)
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        let sentinel = self.to_sentinel();
        for row in sentinel.row_iter() {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, meta: &GridMeta) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut data = Vec::with_capacity(meta.rows * meta.cols);
        let mut rows = 0;
        for record in rdr.records() {
            let record = record?;
            if record.len() != meta.cols {
                return Err(invalid(format!(
                    "grid row {} has {} cells, expected {}",
                    rows + 1,
                    record.len(),
                    meta.cols
                )));
            }
            for field in record.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| invalid(format!("grid row {}: cannot parse {field:?}", rows + 1)))?;
                data.push(v);
            }
            rows += 1;
        }
        if rows != meta.rows {
            return Err(invalid(format!("grid has {rows} rows, sidecar says {}", meta.rows)));
        }
        Self::from_sentinel(DMatrix::from_row_slice(meta.rows, meta.cols, &data), meta.cell_size)
    }

    /// Writes `path` and its `.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))?;
        let sidecar = BufWriter::new(File::create(sidecar_path(path))?);
        serde_json::to_writer_pretty(sidecar, &self.meta())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: GridMeta = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
        Self::read_csv(BufReader::new(File::open(path)?), &meta)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}
