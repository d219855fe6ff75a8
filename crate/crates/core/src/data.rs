//! Synthetic sparse logistic-regression data and CSV ingestion.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sigmoid, Dataset};

/// Density of the nonzero covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    Normal,
    Laplace,
}

impl Density {
    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Density::Normal => rng.sample(StandardNormal),
            Density::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficients {
    /// Uniformly random direction with unit norm.
    RandomUnit,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseMode {
    /// `y ~ Bernoulli(sigmoid(xᵀξ_true))`.
    FromModel,
    /// Exactly `k` ones at uniformly random positions, independent of `x`.
    FixedOnes { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    /// Probability that a covariate is nonzero.
    pub sparsity: f64,
    pub density: Density,
    pub coefficients: Coefficients,
    pub responses: ResponseMode,
    /// Optional per-column multipliers applied after drawing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_scales: Option<Vec<f64>>,
    /// Append an all-ones column after drawing; responses ignore it.
    #[serde(default)]
    pub intercept: bool,
}

impl SynthSpec {
    pub fn new(n: usize, p: usize, sparsity: f64, density: Density) -> Self {
        SynthSpec {
            n,
            p,
            sparsity,
            density,
            coefficients: Coefficients::RandomUnit,
            responses: ResponseMode::FromModel,
            column_scales: None,
            intercept: false,
        }
    }

    pub fn with_responses(mut self, r: ResponseMode) -> Self {
        self.responses = r;
        self
    }

    pub fn with_coefficients(mut self, c: Coefficients) -> Self {
        self.coefficients = c;
        self
    }

    pub fn with_intercept(mut self, on: bool) -> Self {
        self.intercept = on;
        self
    }

    pub fn with_column_scales(mut self, s: Vec<f64>) -> Self {
        self.column_scales = Some(s);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::config("n and p must be positive"));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(Error::config(format!("sparsity level {} outside (0, 1]", self.sparsity)));
        }
        if let Coefficients::Fixed(c) = &self.coefficients {
            if c.len() != self.p || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("fixed coefficients must be finite with length p"));
            }
        }
        if let ResponseMode::FixedOnes { k } = self.responses {
            if k > self.n {
                return Err(Error::config(format!("{k} ones requested for n = {}", self.n)));
            }
        }
        if let Some(s) = &self.column_scales {
            if s.len() != self.p || s.iter().any(|v| !(v.is_finite() && *v != 0.0)) {
                return Err(Error::config("column scales must be finite, nonzero, length p"));
            }
        }
        Ok(())
    }
}

/// Draws a dataset. One 64-bit seed is taken from `rng`; each column and the
/// responses then use their own ChaCha stream, so columns can be drawn in parallel.
pub fn generate<R: Rng + ?Sized>(spec: &SynthSpec, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    let base: u64 = rng.random();
    let stream = |s: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(base);
        r.set_stream(s);
        r
    };

    let columns: Vec<Vec<(usize, f64)>> = (0..spec.p)
        .into_par_iter()
        .map(|i| {
            let mut r = stream(i as u64 + 1);
            let scale = spec.column_scales.as_ref().map_or(1.0, |s| s[i]);
            let mut col = Vec::new();
            for j in 0..spec.n {
                if spec.sparsity >= 1.0 || r.random::<f64>() < spec.sparsity {
                    let x = spec.density.sample(&mut r) * scale;
                    if x != 0.0 {
                        col.push((j, x));
                    }
                }
            }
            col
        })
        .collect();

    let mut r = stream(0);
    let xi_true = match &spec.coefficients {
        Coefficients::Fixed(c) => c.clone(),
        Coefficients::RandomUnit => loop {
            let v: Vec<f64> = (0..spec.p).map(|_| r.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.iter().map(|x| x / norm).collect();
            }
        },
    };

    let y = match spec.responses {
        ResponseMode::FromModel => {
            let mut eta = vec![0.0; spec.n];
            for (col, b) in columns.iter().zip(&xi_true) {
                for &(j, x) in col {
                    eta[j] += x * b;
                }
            }
            eta.iter().map(|&e| u8::from(r.random::<f64>() < sigmoid(e))).collect()
        }
        ResponseMode::FixedOnes { k } => {
            let mut y = vec![0u8; spec.n];
            for j in rand::seq::index::sample(&mut r, spec.n, k) {
                y[j] = 1;
            }
            y
        }
    };

    let data = Dataset::from_columns(spec.n, y, columns)?;
    Ok(if spec.intercept { data.with_intercept() } else { data })
}

/// Seeded convenience wrapper around [`generate`].
pub fn generate_seeded(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    generate(spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Replace missing cells by the column median of the observed values.
    #[default]
    Median,
    /// Median imputation plus one 0/1 indicator column per column with missing values.
    MedianWithIndicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    #[default]
    None,
    /// Divide each column by its largest absolute value.
    UnitMaxAbs,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub missing: MissingPolicy,
    pub scaling: Scaling,
    /// Append an all-ones column.
    pub intercept: bool,
}

/// Cells treated as missing.
pub const MISSING_TOKENS: [&str; 5] = ["", "?", "NA", "nan", "NaN"];

/// Columns with more zeros than this fraction are flagged sparse.
pub const SPARSE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub name: String,
    pub zero_fraction: f64,
    pub missing: usize,
    pub imputed_with: Option<f64>,
    pub scale: f64,
    pub sparse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub n: usize,
    pub p: usize,
    pub positives: usize,
    pub positive_fraction: f64,
    pub sparse_columns: usize,
    pub options: CsvOptions,
    pub columns: Vec<ColumnReport>,
}

fn parse_cell(raw: &str) -> Option<Option<f64>> {
    let s = raw.trim();
    if MISSING_TOKENS.contains(&s) {
        return Some(None);
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Reads a headered CSV with a binary response column into a sparse dataset.
pub fn load_csv(path: impl AsRef<Path>, response_column: &str, options: &CsvOptions) -> Result<(Dataset, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| Error::Csv {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Csv {
            row: 0,
            column: String::new(),
            message: "empty file".into(),
        });
    }
    let response_idx = headers.iter().position(|h| h == response_column).ok_or_else(|| Error::Csv {
        row: 0,
        column: response_column.to_string(),
        message: "response column not found in header".into(),
    })?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != response_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let p0 = names.len();

    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); p0];
    let mut y = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if rec.len() != headers.len() {
            return Err(Error::Csv {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let mut c = 0;
        for (k, raw) in rec.iter().enumerate() {
            if k == response_idx {
                let v = match parse_cell(raw) {
                    Some(Some(v)) if v == 0.0 || v == 1.0 => v as u8,
                    _ => {
                        return Err(Error::Csv {
                            row,
                            column: response_column.to_string(),
                            message: format!("response must be 0 or 1, found '{raw}'"),
                        })
                    }
                };
                y.push(v);
            } else {
                let v = parse_cell(raw).ok_or_else(|| Error::Csv {
                    row,
                    column: names[c].clone(),
                    message: format!("cannot parse '{raw}' as a number"),
                })?;
                cells[c].push(v);
                c += 1;
            }
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::Csv {
            row: 0,
            column: String::new(),
            message: "no data rows".into(),
        });
    }

    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut reports = Vec::new();
    let mut indicators: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
    for (name, col) in names.iter().zip(&cells) {
        let mut observed: Vec<f64> = col.iter().flatten().copied().collect();
        let missing = n - observed.len();
        let fill = median(&mut observed);
        let values: Vec<f64> = col.iter().map(|v| v.unwrap_or(fill)).collect();
        let scale = match options.scaling {
            Scaling::None => 1.0,
            Scaling::UnitMaxAbs => {
                let m = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if m > 0.0 {
                    m
                } else {
                    1.0
                }
            }
        };
        let zeros = values.iter().filter(|&&v| v == 0.0).count();
        let zero_fraction = zeros as f64 / n as f64;
        reports.push(ColumnReport {
            name: name.clone(),
            zero_fraction,
            missing,
            imputed_with: (missing > 0).then_some(fill),
            scale,
            sparse: zero_fraction > SPARSE_THRESHOLD,
        });
        columns.push(
            values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (j, v / scale))
                .collect(),
        );
        if options.missing == MissingPolicy::MedianWithIndicator && missing > 0 {
            let ind = col
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_none())
                .map(|(j, _)| (j, 1.0))
                .collect::<Vec<_>>();
            indicators.push((format!("{name}_missing"), ind));
        }
    }
    for (name, ind) in indicators {
        let zero_fraction = 1.0 - ind.len() as f64 / n as f64;
        reports.push(ColumnReport {
            name,
            zero_fraction,
            missing: 0,
            imputed_with: None,
            scale: 1.0,
            sparse: zero_fraction > SPARSE_THRESHOLD,
        });
        columns.push(ind);
    }
    if options.intercept {
        reports.push(ColumnReport {
            name: "intercept".into(),
            zero_fraction: 0.0,
            missing: 0,
            imputed_with: None,
            scale: 1.0,
            sparse: false,
        });
        columns.push((0..n).map(|j| (j, 1.0)).collect());
    }

    let data = Dataset::from_columns(n, y, columns)?;
    let report = IngestReport {
        n,
        p: data.p(),
        positives: data.positives(),
        positive_fraction: data.positives() as f64 / n as f64,
        sparse_columns: reports.iter().filter(|c| c.sparse).count(),
        options: options.clone(),
        columns: reports,
    };
    log::info!(
        "loaded {}: n={} p={} positives={} sparse columns={}",
        path.as_ref().display(),
        report.n,
        report.p,
        report.positives,
        report.sparse_columns
    );
    Ok((data, report))
}

/// Writes `x0..x{p-1},y` with shortest round-trip decimal formatting.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut header: Vec<String> = (0..data.p()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(to_io)?;
    let mut row = vec![String::new(); data.p() + 1];
    for j in 0..data.n() {
        for cell in row.iter_mut().take(data.p()) {
            *cell = "0".into();
        }
        for (i, x) in data.row(j).iter() {
            row[i] = format!("{x}");
        }
        row[data.p()] = data.responses()[j].to_string();
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}
