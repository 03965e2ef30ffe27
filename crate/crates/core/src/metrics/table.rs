use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = CompensatedSum::default();
    values.into_iter().for_each(|x| s.add(x));
    s.value()
}

/// Arithmetic mean, `None` for an empty input.
pub fn mean<I: IntoIterator<Item = f64>>(values: I) -> Option<f64> {
    let mut s = CompensatedSum::default();
    let mut n = 0usize;
    for x in values {
        s.add(x);
        n += 1;
    }
    (n > 0).then(|| s.value() / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub keys: Vec<String>,
    pub values: Vec<Option<f64>>,
}

/// A long-format table: key columns, then value columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub name: String,
    pub key_columns: Vec<String>,
    pub value_columns: Vec<String>,
    pub rows: Vec<MetricRow>,
    /// Key columns that identify one distribution slice, when the table holds one.
    pub slice_keys: Option<Vec<usize>>,
    /// Value column that sums to 1 within each slice.
    pub fraction_column: Option<usize>,
    pub note: String,
}

impl MetricTable {
    pub fn new(name: &str, keys: &[&str], values: &[&str], note: &str) -> Self {
        MetricTable {
            name: name.into(),
            key_columns: keys.iter().map(|s| s.to_string()).collect(),
            value_columns: values.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            slice_keys: None,
            fraction_column: None,
            note: note.into(),
        }
    }

    pub fn with_slices(mut self, slice_keys: &[usize], fraction_column: usize) -> Self {
        self.slice_keys = Some(slice_keys.to_vec());
        self.fraction_column = Some(fraction_column);
        self
    }

    pub fn push(&mut self, keys: Vec<String>, values: Vec<Option<f64>>) {
        debug_assert_eq!(keys.len(), self.key_columns.len());
        debug_assert_eq!(values.len(), self.value_columns.len());
        self.rows.push(MetricRow { keys, values });
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.value_columns.iter().position(|c| c == name)
    }

    /// Value at the row whose keys equal `keys`.
    pub fn get(&self, keys: &[&str], column: &str) -> Option<f64> {
        let c = self.column(column)?;
        self.rows
            .iter()
            .find(|r| r.keys.iter().map(String::as_str).eq(keys.iter().copied()))
            .and_then(|r| r.values[c])
    }

    /// Sum of the fraction column per slice, in first-seen order.
    pub fn slice_sums(&self) -> Vec<(Vec<String>, f64)> {
        let (Some(keys), Some(col)) = (&self.slice_keys, self.fraction_column) else {
            return Vec::new();
        };
        let mut out: Vec<(Vec<String>, CompensatedSum)> = Vec::new();
        for row in &self.rows {
            let k: Vec<String> = keys.iter().map(|i| row.keys[*i].clone()).collect();
            let v = row.values[col].unwrap_or(0.0);
            match out.iter_mut().find(|(s, _)| *s == k) {
                Some((_, s)) => s.add(v),
                None => {
                    let mut s = CompensatedSum::default();
                    s.add(v);
                    out.push((k, s));
                }
            }
        }
        out.into_iter().map(|(k, s)| (k, s.value())).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .key_columns
            .iter()
            .chain(&self.value_columns)
            .map(String::as_str)
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut cells: Vec<String> = row.keys.iter().map(|k| csv_cell(k)).collect();
            cells.extend(row.values.iter().map(|v| v.map(|x| format!("{x}")).unwrap_or_default()));
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(format!("{}.csv", self.name)), self.to_csv().as_bytes())
    }

    /// Parse a CSV written by [`MetricTable::to_csv`]; the first `n_keys` columns are keys.
    pub fn read_csv(path: &Path, n_keys: usize) -> Result<MetricTable> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < n_keys {
            return Err(Error::Invalid(format!("{}: fewer than {n_keys} columns", path.display())));
        }
        let mut t = MetricTable {
            name,
            key_columns: header[..n_keys].to_vec(),
            value_columns: header[n_keys..].to_vec(),
            rows: Vec::new(),
            slice_keys: None,
            fraction_column: None,
            note: String::new(),
        };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let keys = rec.iter().take(n_keys).map(str::to_string).collect();
            let values = rec
                .iter()
                .skip(n_keys)
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>().map(Some).map_err(|e| Error::Parse {
                            path: path.to_path_buf(),
                            line: i + 2,
                            message: e.to_string(),
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            t.rows.push(MetricRow { keys, values });
        }
        Ok(t)
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
