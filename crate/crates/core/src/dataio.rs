//! Reading data sets (LIBSVM, CSV), preprocessing, and writing results.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::losses::LossModel;
use crate::matrix::DesignMatrix;
use crate::path::PathResult;

/// Features plus an `n × q` row-major target buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DesignMatrix,
    pub y: Vec<f64>,
    pub q: usize,
    pub feature_names: Option<Vec<String>>,
}

/// How the targets of a [`Dataset`] are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    /// Two distinct labels; `{−1, 1}` and `{0, 1}` are recognised, otherwise
    /// the smaller label becomes 0.
    Binary,
    /// One label column holding class ids, or `q` one-hot columns.
    Multiclass,
    /// `q` real-valued target columns.
    MultiTask,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.x.n_samples()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_features()
    }

    pub fn to_loss(&self, task: Task) -> Result<LossModel> {
        match task {
            Task::Regression => {
                self.require_single("regression")?;
                LossModel::quadratic(self.y.clone())
            }
            Task::MultiTask => LossModel::multi_task(self.y.clone(), self.q),
            Task::Binary => {
                self.require_single("binary classification")?;
                LossModel::logistic(binary_labels(&self.y)?)
            }
            Task::Multiclass if self.q > 1 => LossModel::multinomial(self.y.clone(), self.q),
            Task::Multiclass => {
                let (classes, q) = class_indices(&self.y)?;
                LossModel::multinomial_from_classes(&classes, q)
            }
        }
    }

    fn require_single(&self, what: &str) -> Result<()> {
        if self.q != 1 {
            return Err(Error::InvalidLabels(format!("{what} needs one label column, got {}", self.q)));
        }
        Ok(())
    }
}

fn binary_labels(y: &[f64]) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in y {
        if !distinct.contains(&v) {
            distinct.push(v);
            if distinct.len() > 2 {
                return Err(Error::InvalidLabels("more than two distinct labels".into()));
            }
        }
    }
    let keep = |v: &f64| *v == 0.0 || *v == 1.0;
    if distinct.iter().all(keep) {
        return Ok(y.to_vec());
    }
    if distinct.iter().all(|v| *v == -1.0 || *v == 1.0) {
        return Ok(y.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect());
    }
    let lo = distinct.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(y.iter().map(|&v| if v == lo { 0.0 } else { 1.0 }).collect())
}

/// Integer labels `1..=q` map to classes `0..q`; anything else is ranked.
fn class_indices(y: &[f64]) -> Result<(Vec<usize>, usize)> {
    if y.is_empty() {
        return Err(Error::InvalidLabels("no samples".into()));
    }
    if y.iter().all(|&v| v >= 1.0 && v.fract() == 0.0 && v < 1e6) {
        let q = y.iter().fold(0.0f64, |a, &b| a.max(b)) as usize;
        return Ok((y.iter().map(|&v| v as usize - 1).collect(), q));
    }
    let mut distinct: Vec<f64> = y.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let classes = y
        .iter()
        .map(|v| distinct.binary_search_by(|d| d.total_cmp(v)).unwrap())
        .collect();
    Ok((classes, distinct.len()))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses LIBSVM text: `label idx:val idx:val ...`, 1-based increasing indices.
pub fn parse_libsvm<R: Read>(reader: R) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut triplets = Vec::new();
    let mut p = 0;
    for (row, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = row + 1;
        let mut tokens = line.split_ascii_whitespace();
        let label = tokens.next().ok_or_else(|| parse_err(lineno, "empty line"))?;
        let label: f64 = label
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid label {label:?}")))?;
        if !label.is_finite() {
            return Err(parse_err(lineno, "non-finite label"));
        }
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "indices are 1-based"));
            }
            if idx <= last {
                return Err(parse_err(lineno, format!("index {idx} not increasing")));
            }
            last = idx;
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid value {val:?}")))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, "non-finite value"));
            }
            p = p.max(idx);
            triplets.push((labels.len(), idx - 1, val));
        }
        labels.push(label);
    }
    let x = DesignMatrix::from_triplets(labels.len(), p, &triplets)?;
    Ok(Dataset {
        x,
        y: labels,
        q: 1,
        feature_names: None,
    })
}

pub fn read_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_libsvm(File::open(path)?)
}

/// Writes a single-output data set in LIBSVM format (zeros omitted). Values use
/// the shortest representation that reads back to the same `f64`.
pub fn write_libsvm(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    if ds.q != 1 {
        return Err(Error::InvalidLabels("LIBSVM output supports one label column".into()));
    }
    let n = ds.n_samples();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for j in 0..ds.n_features() {
        ds.x.column(j).for_each(|i, v| {
            if v != 0.0 {
                rows[i].push((j, v));
            }
        });
    }
    let mut out = BufWriter::new(File::create(path)?);
    for (label, row) in ds.y.iter().zip(rows) {
        write!(out, "{label:?}")?;
        for (j, v) in row {
            write!(out, " {}:{v:?}", j + 1)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses comma-separated values: the first `label_columns` columns are
/// targets, the rest features. With `header`, the first row names the columns.
pub fn parse_csv<R: Read>(reader: R, label_columns: usize, header: bool) -> Result<Dataset> {
    if label_columns == 0 {
        return Err(Error::InvalidConfig("at least one label column is required".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let feature_names = if header {
        let h = rdr.headers()?;
        Some(h.iter().skip(label_columns).map(str::to_owned).collect::<Vec<_>>())
    } else {
        None
    };
    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let lineno = k + 1 + usize::from(header);
        if rec.len() < label_columns {
            return Err(parse_err(lineno, "fewer fields than label columns"));
        }
        let mut vals = Vec::with_capacity(rec.len());
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid number {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, "non-finite value"));
            }
            vals.push(v);
        }
        y.extend_from_slice(&vals[..label_columns]);
        rows.push(vals[label_columns..].to_vec());
    }
    if let Some(first) = rows.first() {
        if let Some((k, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != first.len()) {
            return Err(parse_err(k + 1 + usize::from(header), "ragged row"));
        }
    }
    let x = DesignMatrix::from_rows(&rows)?;
    Ok(Dataset {
        x,
        y,
        q: label_columns,
        feature_names,
    })
}

pub fn read_csv(path: impl AsRef<Path>, label_columns: usize, header: bool) -> Result<Dataset> {
    parse_csv(File::open(path)?, label_columns, header)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnScaling {
    #[default]
    None,
    /// `‖X_j‖₂ = 1`
    UnitNorm,
    /// Empirical variance 1 (population convention).
    UnitVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StandardizeOptions {
    pub center_y: bool,
    pub unit_variance_y: bool,
    /// Subtract column means (densifies sparse matrices).
    pub center_columns: bool,
    pub columns: ColumnScaling,
}

/// Parameters of a standardization, enough to map coefficients back.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transform {
    pub y_mean: Vec<f64>,
    pub y_scale: Vec<f64>,
    pub column_mean: Vec<f64>,
    pub column_scale: Vec<f64>,
    /// Columns left at zero because they had no spread.
    pub zero_columns: Vec<usize>,
}

pub fn standardize(ds: &Dataset, opts: &StandardizeOptions) -> Result<(Dataset, Transform)> {
    let n = ds.n_samples();
    let q = ds.q;
    let p = ds.n_features();
    let mut tr = Transform {
        y_mean: vec![0.0; q],
        y_scale: vec![1.0; q],
        column_mean: vec![0.0; p],
        column_scale: vec![1.0; p],
        zero_columns: Vec::new(),
    };
    let mut y = ds.y.clone();
    if n > 0 {
        for k in 0..q {
            if opts.center_y {
                let mean = (0..n).map(|i| y[i * q + k]).sum::<f64>() / n as f64;
                (0..n).for_each(|i| y[i * q + k] -= mean);
                tr.y_mean[k] = mean;
            }
            if opts.unit_variance_y {
                let mean = (0..n).map(|i| y[i * q + k]).sum::<f64>() / n as f64;
                let var = (0..n).map(|i| (y[i * q + k] - mean).powi(2)).sum::<f64>() / n as f64;
                if var > 0.0 {
                    let sd = var.sqrt();
                    (0..n).for_each(|i| y[i * q + k] /= sd);
                    tr.y_scale[k] = sd;
                }
            }
        }
    }

    let mut x = if opts.center_columns && ds.x.is_sparse() {
        ds.x.to_dense()
    } else {
        ds.x.clone()
    };
    let center = opts.center_columns;
    let scaling = opts.columns;
    x.map_columns(|j, vals| {
        if center && n > 0 {
            let mean = vals.iter().sum::<f64>() / n as f64;
            vals.iter_mut().for_each(|v| *v -= mean);
            tr.column_mean[j] = mean;
        }
        let sq: f64 = vals.iter().map(|v| v * v).sum();
        let scale = match scaling {
            ColumnScaling::None => return,
            ColumnScaling::UnitNorm => sq.sqrt(),
            ColumnScaling::UnitVariance => {
                // sparse columns hold only nonzeros; the implicit zeros count too
                let mean = vals.iter().sum::<f64>() / n as f64;
                (sq / n as f64 - mean * mean).max(0.0).sqrt()
            }
        };
        if scale > 0.0 {
            vals.iter_mut().for_each(|v| *v /= scale);
            tr.column_scale[j] = scale;
        } else {
            vals.iter_mut().for_each(|v| *v = 0.0);
            tr.zero_columns.push(j);
        }
    });
    Ok((
        Dataset {
            x,
            y,
            q,
            feature_names: ds.feature_names.clone(),
        },
        tr,
    ))
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub lambda: f64,
    pub epochs: usize,
    pub gap: f64,
    pub active_groups: usize,
    pub active_features: usize,
    pub screened_fraction: f64,
    pub wall_ms: f64,
    pub rule: String,
    pub warm_start: String,
}

pub const RESULTS_HEADER: [&str; 9] = [
    "lambda",
    "epochs",
    "gap",
    "active_groups",
    "active_features",
    "screened_fraction",
    "wall_ms",
    "rule",
    "warm_start",
];

pub fn result_rows(path: &PathResult) -> Vec<ResultRow> {
    path.points
        .iter()
        .map(|pt| {
            let (epochs, gap, groups, features) = match &pt.outcome {
                Ok(r) => (r.epochs, r.gap, r.active.n_active_groups(), r.active.n_active_features()),
                Err(_) => (0, f64::NAN, path.n_groups, path.n_features),
            };
            let screened = if path.n_features == 0 {
                0.0
            } else {
                1.0 - features as f64 / path.n_features as f64
            };
            ResultRow {
                lambda: pt.lambda,
                epochs,
                gap,
                active_groups: groups,
                active_features: features,
                screened_fraction: screened,
                wall_ms: pt.wall.as_secs_f64() * 1e3,
                rule: path.rule.name().to_owned(),
                warm_start: path.warm_start.name().to_owned(),
            }
        })
        .collect()
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_result_rows<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            format_float(r.lambda),
            r.epochs.to_string(),
            format_float(r.gap),
            r.active_groups.to_string(),
            r.active_features.to_string(),
            format_float(r.screened_fraction),
            format_float(r.wall_ms),
            r.rule.clone(),
            r.warm_start.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_csv(path: impl AsRef<Path>, result: &PathResult) -> Result<()> {
    write_result_rows(File::create(path)?, &result_rows(result))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(File::open(path)?);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(parse_err(1, "unexpected header"));
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let f = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| parse_err(line, format!("invalid number {:?}", &rec[i])))
        };
        let u = |i: usize| -> Result<usize> {
            rec[i].parse().map_err(|_| parse_err(line, format!("invalid count {:?}", &rec[i])))
        };
        out.push(ResultRow {
            lambda: f(0)?,
            epochs: u(1)?,
            gap: f(2)?,
            active_groups: u(3)?,
            active_features: u(4)?,
            screened_fraction: f(5)?,
            wall_ms: f(6)?,
            rule: rec[7].to_owned(),
            warm_start: rec[8].to_owned(),
        });
    }
    Ok(out)
}

/// Coefficients as `p` lines of `q` comma-separated values (exact round trip).
pub fn write_coefficients(path: impl AsRef<Path>, beta: &[f64], q: usize) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in beta.chunks(q.max(1)) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a coefficient file; returns the flattened `p × q` buffer and `q`.
pub fn read_coefficients(path: impl AsRef<Path>) -> Result<(Vec<f64>, usize)> {
    let reader = BufReader::new(File::open(path)?);
    let mut beta = Vec::new();
    let mut q = None;
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| parse_err(k + 1, format!("invalid number {s:?}"))))
            .collect::<Result<_>>()?;
        match q {
            None => q = Some(vals.len()),
            Some(q) if q != vals.len() => return Err(parse_err(k + 1, "ragged row")),
            _ => {}
        }
        beta.extend(vals);
    }
    Ok((beta, q.unwrap_or(1)))
}
