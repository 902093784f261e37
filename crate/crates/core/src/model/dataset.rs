use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Independent d-dimensional observations, stored row-major.
///
/// The optional `group` column carries the binary case/control label used by
/// the ordinal model.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    values: Vec<f64>,
    n: usize,
    d: usize,
    group: Option<Vec<u8>>,
}

pub const GROUP_COLUMN: &str = "group";

impl Dataset {
    pub fn new(values: Vec<f64>, n: usize, d: usize, group: Option<Vec<u8>>) -> Result<Self> {
        let names = (1..=d).map(|k| format!("x{k}")).collect();
        Self::with_names(names, values, n, d, group)
    }

    pub fn with_names(
        names: Vec<String>,
        values: Vec<f64>,
        n: usize,
        d: usize,
        group: Option<Vec<u8>>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidData("no variables".into()));
        }
        if values.len() != n * d {
            return Err(Error::InvalidData(format!(
                "{} values do not fill a {n}×{d} table",
                values.len()
            )));
        }
        if names.len() != d {
            return Err(Error::InvalidData(format!(
                "{} column names for {d} variables",
                names.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at row {}, column {}",
                pos / d + 1,
                pos % d + 1
            )));
        }
        if let Some(g) = &group {
            if g.len() != n {
                return Err(Error::InvalidData(format!(
                    "group column has {} entries for {n} rows",
                    g.len()
                )));
            }
            if g.iter().any(|&x| x > 1) {
                return Err(Error::InvalidData("group labels must be 0 or 1".into()));
            }
        }
        Ok(Dataset {
            names,
            values,
            n,
            d,
            group,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.d + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn group(&self) -> Option<&[u8]> {
        self.group.as_deref()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for i in 0..self.n {
            for (acc, v) in m.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    /// Checks that every entry is one of the ordinal categories 0, 1, 2.
    pub fn check_ordinal(&self) -> Result<()> {
        if let Some(pos) = self
            .values
            .iter()
            .position(|&v| !(v == 0.0 || v == 1.0 || v == 2.0))
        {
            return Err(Error::InvalidData(format!(
                "ordinal entry {} at row {}, column {} is not in {{0,1,2}}",
                self.values[pos],
                pos / self.d + 1,
                pos % self.d + 1
            )));
        }
        Ok(())
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        let group = self
            .group
            .as_ref()
            .map(|g| rows.iter().map(|&i| g[i]).collect());
        Self::with_names(self.names.clone(), values, rows.len(), self.d, group)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        if self.group.is_some() {
            header.push(GROUP_COLUMN);
        }
        out.write_record(&header)?;
        let mut rec = Vec::with_capacity(self.d + 1);
        for i in 0..self.n {
            rec.clear();
            rec.extend(self.row(i).iter().map(|v| format!("{v}")));
            if let Some(g) = &self.group {
                rec.push(g[i].to_string());
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses a header row plus one observation per row. A final column
    /// named `group` is read as the binary covariate.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let has_group = names.last().is_some_and(|h| h == GROUP_COLUMN);
        if has_group {
            names.pop();
        }
        let d = names.len();
        let mut values = Vec::new();
        let mut group = has_group.then(Vec::new);
        let mut n = 0;
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (k, field) in rec.iter().enumerate().take(d) {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidData(format!(
                        "row {}, column `{}`: cannot parse {field:?} as a number",
                        row + 1,
                        names[k]
                    ))
                })?;
                values.push(v);
            }
            if let Some(g) = group.as_mut() {
                let field = rec.get(d).unwrap_or("");
                let label: u8 = field.parse().map_err(|_| {
                    Error::InvalidData(format!(
                        "row {}: group label {field:?} is not 0 or 1",
                        row + 1
                    ))
                })?;
                g.push(label);
            }
            n += 1;
        }
        Self::with_names(names, values, n, d, group)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// SHA-256 of the canonical CSV rendering.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        hex::encode(Sha256::digest(&buf))
    }
}
