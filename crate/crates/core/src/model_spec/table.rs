use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Raw column-named data, kept as text until a recipe decides how each
/// column is interpreted.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
    columns: Vec<Vec<String>>,
}

impl DataTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<String>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::input("column name count does not match column count"));
        }
        let n = columns.first().map(Vec::len).unwrap_or(0);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::input("columns have unequal lengths"));
        }
        let mut index = HashMap::new();
        for (j, name) in names.iter().enumerate() {
            if index.insert(name.clone(), j).is_some() {
                return Err(Error::input(format!("duplicate column `{name}`")));
            }
        }
        Ok(Self { names, index, columns })
    }

    pub fn from_numeric(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let (names, cols): (Vec<_>, Vec<_>) = columns
            .into_iter()
            .map(|(n, c)| (n, c.iter().map(|v| format!("{v:?}")).collect()))
            .unzip();
        Self::new(names, cols)
    }

    /// Reads a CSV with a header row. Empty cells are rejected with their
    /// 1-based data row index.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (j, cell) in rec.iter().enumerate() {
                let cell = cell.trim();
                if cell.is_empty() {
                    return Err(Error::input(format!(
                        "missing value in column `{}` at data row {}",
                        names[j],
                        row + 1
                    )));
                }
                columns[j].push(cell.to_string());
            }
        }
        Self::new(names, columns)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| {
            Error::input(format!("cannot open {}: {e}", path.as_ref().display()))
        })?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.names)?;
        for i in 0..self.rows() {
            w.write_record(self.columns.iter().map(|c| c[i].as_str()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map(Vec::len).unwrap_or(0)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn text(&self, name: &str) -> Result<&[String]> {
        self.index
            .get(name)
            .map(|&j| self.columns[j].as_slice())
            .ok_or_else(|| Error::input(format!("missing column `{name}`")))
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        self.text(name)?
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::input(format!("column `{name}`, data row {}: `{s}` is not a finite number", i + 1))
                    })
            })
            .collect()
    }

    /// Returns a copy with one column replaced by numeric values.
    pub fn with_numeric(&self, name: &str, values: &[f64]) -> Result<Self> {
        let j = *self
            .index
            .get(name)
            .ok_or_else(|| Error::input(format!("missing column `{name}`")))?;
        if values.len() != self.rows() {
            return Err(Error::input("replacement column has the wrong length"));
        }
        let mut out = self.clone();
        out.columns[j] = values.iter().map(|v| format!("{v:?}")).collect();
        Ok(out)
    }
}
