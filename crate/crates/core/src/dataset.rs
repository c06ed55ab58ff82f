//! Sampled populations and their delimited-text file format.
//!
//! The file has a header row with one column per feature (declaration
//! order), then `y`, an optional `y_proxy` and `pi_true`. Categorical
//! features are written as level labels, binary features as 0/1.

use std::path::Path;

use crate::design::{FeatureKind, FeatureLookup, FeatureSchema};
use crate::dgp::DgpSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub schema: FeatureSchema,
    pub values: Vec<f64>,
}

/// A sampled population: features, true labels, optional proxy labels and
/// the true outcome probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    y: Vec<u8>,
    y_proxy: Option<Vec<u8>>,
    pi_true: Vec<f64>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, y: Vec<u8>, y_proxy: Option<Vec<u8>>, pi_true: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if pi_true.len() != n {
            return Err(Error::Input(format!("pi_true has {} rows, y has {n}", pi_true.len())));
        }
        if let Some(p) = &y_proxy {
            if p.len() != n {
                return Err(Error::Input(format!("y_proxy has {} rows, y has {n}", p.len())));
            }
            if p.iter().any(|&v| v > 1) {
                return Err(Error::Input("y_proxy must be 0/1".into()));
            }
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::Input("y must be 0/1".into()));
        }
        if pi_true.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Input("pi_true must lie in [0, 1]".into()));
        }
        for c in &columns {
            if c.values.len() != n {
                return Err(Error::Input(format!(
                    "column '{}' has {} rows, y has {n}",
                    c.schema.name,
                    c.values.len()
                )));
            }
            if let Some(k) = c.schema.n_levels() {
                if c.values.iter().any(|&v| v < 0.0 || v >= k as f64 || v.fract() != 0.0) {
                    return Err(Error::Input(format!("column '{}' holds an invalid level code", c.schema.name)));
                }
            } else if c.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("column '{}' holds a non-finite value", c.schema.name)));
            }
        }
        Ok(Self { columns, y, y_proxy, pi_true })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn schemas(&self) -> Vec<FeatureSchema> {
        self.columns.iter().map(|c| c.schema.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.schema.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.schema.name == name)
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn y_proxy(&self) -> Option<&[u8]> {
        self.y_proxy.as_deref()
    }

    pub fn pi_true(&self) -> &[f64] {
        &self.pi_true
    }

    #[inline]
    pub fn value(&self, row: usize, column: usize) -> f64 {
        self.columns[column].values[row]
    }

    pub fn row(&self, row: usize) -> RowRef<'_> {
        RowRef { data: self, row }
    }

    /// Copies the given rows, in the given order, into a new dataset.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column { schema: c.schema.clone(), values: pick(&c.values) })
                .collect(),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            y_proxy: self.y_proxy.as_ref().map(|p| rows.iter().map(|&r| p[r]).collect()),
            pi_true: pick(&self.pi_true),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file).map_err(|e| match e {
            Error::Input(m) => Error::io(path, std::io::Error::other(m)),
            other => other,
        })
    }

    pub fn write_csv_to(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Input(e.to_string());
        let mut header: Vec<String> = self.columns.iter().map(|c| c.schema.name.clone()).collect();
        header.push("y".into());
        if self.y_proxy.is_some() {
            header.push("y_proxy".into());
        }
        header.push("pi_true".into());
        w.write_record(&header).map_err(csv_err)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            record.clear();
            for c in &self.columns {
                let v = c.values[i];
                record.push(match c.schema.kind {
                    FeatureKind::Continuous => format!("{v}"),
                    _ => c.schema.level_label(v),
                });
            }
            record.push(self.y[i].to_string());
            if let Some(p) = &self.y_proxy {
                record.push(p[i].to_string());
            }
            record.push(format!("{}", self.pi_true[i]));
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
        Ok(())
    }

    /// Reads a dataset written by [`Dataset::write_csv`]. The DGP spec
    /// supplies the feature schemas (level labels, column order).
    pub fn read_csv(path: &Path, spec: &DgpSpec) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(file, spec).map_err(|e| match e {
            Error::Input(message) => Error::Parse { path: path.to_path_buf(), message },
            other => other,
        })
    }

    pub fn read_csv_from(input: impl std::io::Read, spec: &DgpSpec) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(|e| Error::Input(e.to_string()))?.clone();
        let find = |name: &str| header.iter().position(|h| h == name);
        let schemas = spec.schemas();
        let mut feature_cols = Vec::with_capacity(schemas.len());
        for s in &schemas {
            feature_cols.push(find(&s.name).ok_or_else(|| Error::Input(format!("missing column '{}'", s.name)))?);
        }
        let y_col = find("y").ok_or_else(|| Error::Input("missing column 'y'".into()))?;
        let pi_col = find("pi_true").ok_or_else(|| Error::Input("missing column 'pi_true'".into()))?;
        let proxy_col = find("y_proxy");

        let mut values: Vec<Vec<f64>> = vec![Vec::new(); schemas.len()];
        let mut y = Vec::new();
        let mut y_proxy = proxy_col.map(|_| Vec::new());
        let mut pi_true = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Input(e.to_string()))?;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let bad = |what: &str, raw: &str| Error::Input(format!("row {}: invalid {what} '{raw}'", line + 1));
            for (j, s) in schemas.iter().enumerate() {
                let raw = field(feature_cols[j]);
                let v = match &s.kind {
                    FeatureKind::Categorical { levels } => {
                        levels.iter().position(|l| l == raw).ok_or_else(|| bad(&s.name, raw))? as f64
                    }
                    FeatureKind::Binary => match raw {
                        "0" => 0.0,
                        "1" => 1.0,
                        _ => return Err(bad(&s.name, raw)),
                    },
                    FeatureKind::Continuous => raw.parse::<f64>().map_err(|_| bad(&s.name, raw))?,
                };
                values[j].push(v);
            }
            let label = |c: usize, what: &str| match field(c) {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                raw => Err(bad(what, raw)),
            };
            y.push(label(y_col, "y")?);
            if let (Some(c), Some(p)) = (proxy_col, y_proxy.as_mut()) {
                p.push(label(c, "y_proxy")?);
            }
            let raw = field(pi_col);
            pi_true.push(raw.parse::<f64>().map_err(|_| bad("pi_true", raw))?);
        }
        let columns = schemas
            .into_iter()
            .zip(values)
            .map(|(schema, values)| Column { schema, values })
            .collect();
        Dataset::new(columns, y, y_proxy, pi_true)
    }
}

/// One row of a dataset viewed as a feature assignment.
#[derive(Debug, Clone, Copy)]
pub struct RowRef<'a> {
    data: &'a Dataset,
    row: usize,
}

impl FeatureLookup for RowRef<'_> {
    fn value(&self, feature: &str) -> Option<f64> {
        self.data.column_index(feature).map(|c| self.data.value(self.row, c))
    }
}
