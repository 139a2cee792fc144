//! Sample ingestion, empirical statistics, synthetic generation, and result
//! persistence.
//!
//! Covariances are normalized by `1/n` (the expectation under the uniform
//! distribution on the atoms), not the `1/(n-1)` unbiased estimator. All
//! randomness flows through ChaCha8 so runs reproduce bit-for-bit across
//! builds and platforms.
//!
//! Results persist as a JSON document (config echo, problem summary, exit
//! certificate, metric table) plus a companion CSV with the per-iteration
//! trace; floats are written in shortest round-trip decimal form.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DroPcaError, Result};
use crate::smpg::IterateRecord;
use crate::stiefel::{gaussian_matrix, sym};

/// An n×d matrix of samples, one row per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: DMatrix<f64>,
}

impl SampleSet {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(DroPcaError::EmptySampleSet);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DroPcaError::InvalidParameter(
                "sample set has non-finite entries".into(),
            ));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn mean(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_fn(self.dim(), |j, _| self.data.column(j).sum() / n)
    }

    /// The first `n` rows as a training subset.
    pub fn head(&self, n: usize) -> Result<SampleSet> {
        if n == 0 || n > self.n() {
            return Err(DroPcaError::InvalidParameter(format!(
                "cannot take {n} rows from a sample set of {}",
                self.n()
            )));
        }
        SampleSet::new(self.data.rows(0, n).into_owned())
    }
}

/// Mean and `1/n` covariance of a sample set.
#[derive(Debug, Clone)]
pub struct EmpiricalStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

pub fn empirical_stats(samples: &SampleSet) -> EmpiricalStats {
    let n = samples.n();
    let d = samples.dim();
    let mean = samples.mean();
    let mut centered = samples.data().clone();
    for i in 0..n {
        for j in 0..d {
            centered[(i, j)] -= mean[j];
        }
    }
    let covariance = psd_projection(&(centered.transpose() * &centered / n as f64));
    EmpiricalStats { mean, covariance }
}

/// Seeded synthetic instance: a ground-truth covariance obtained by
/// projecting a symmetrized standard Gaussian matrix onto the PSD cone, and
/// `n` rows drawn from the centered normal with that covariance (through its
/// symmetric square root, so singular covariances work too).
pub fn synthetic_gaussian(d: usize, n: usize, seed: u64) -> Result<(SampleSet, DMatrix<f64>)> {
    if d == 0 || n == 0 {
        return Err(DroPcaError::InvalidParameter(format!(
            "synthetic data needs d >= 1 and n >= 1, got d={d}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(d, d, &mut rng);
    let sigma_true = psd_projection(&sym(&g));
    let root = sqrt_psd(&sigma_true);
    let z = gaussian_matrix(n, d, &mut rng);
    let samples = SampleSet::new(z * root)?;
    Ok((samples, sigma_true))
}

/// Frobenius-nearest PSD matrix: symmetrize, then zero out negative
/// eigenvalues. Idempotent.
pub fn psd_projection(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sym(m));
    let clamped = DVector::from_iterator(m.nrows(), eig.eigenvalues.iter().map(|&l| l.max(0.0)));
    &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

/// Symmetric square root of a PSD matrix.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sym(m));
    let roots = DVector::from_iterator(
        m.nrows(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Reads a numeric CSV (comma-separated, '.' decimals, optional single
/// header line, UTF-8) into a sample set. Ragged rows and non-numeric cells
/// report the offending row and column.
pub fn load_matrix_csv(path: &Path, has_header: bool) -> Result<SampleSet> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DroPcaError::Csv {
            path: display.clone(),
            detail: e.to_string(),
        })?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DroPcaError::Csv {
            path: display.clone(),
            detail: format!("row {}: {e}", idx + 1),
        })?;
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| DroPcaError::Csv {
                path: display.clone(),
                detail: format!(
                    "row {}, column {}: cannot parse {field:?} as a number",
                    idx + 1,
                    col + 1
                ),
            })?;
            row.push(value);
        }
        if let Some(w) = width {
            if row.len() != w {
                return Err(DroPcaError::Csv {
                    path: display,
                    detail: format!("row {} has {} fields, expected {w}", idx + 1, row.len()),
                });
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    let n = rows.len();
    let d = width.ok_or(DroPcaError::EmptySampleSet)?;
    let data = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    SampleSet::new(data)
}

/// Problem summary echoed into the results document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub d: usize,
    pub r: usize,
    pub rho: f64,
    pub gamma: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateJson {
    pub v_norm: f64,
    pub mu: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub f: f64,
    pub worst_case: f64,
    pub out_of_sample: f64,
    /// Fraction of frame entries with magnitude at most 1e-6.
    pub sparsity: f64,
    pub runtime_s: f64,
}

/// The on-disk results schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsJson {
    pub config: serde_json::Value,
    pub problem: ProblemMeta,
    pub status: String,
    pub certificate: Option<CertificateJson>,
    pub metrics: Metrics,
    pub trace_csv: String,
}

/// Writes the results JSON at `path` and the trace CSV at
/// `results.trace_csv`.
pub fn save_results(path: &Path, results: &ResultsJson, trace: &[IterateRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::fs::File::create(path)?;
    let body = serde_json::to_string_pretty(results).map_err(|e| DroPcaError::Csv {
        path: path.display().to_string(),
        detail: format!("json serialization: {e}"),
    })?;
    file.write_all(body.as_bytes())?;
    file.write_all(b"\n")?;
    write_trace_csv(Path::new(&results.trace_csv), trace)
}

/// Companion trace path for a results file: `foo.json -> foo.trace.csv`.
pub fn default_trace_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("trace.csv")
}

pub fn write_trace_csv(path: &Path, trace: &[IterateRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| DroPcaError::Csv {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    for record in trace {
        writer.serialize(record).map_err(|e| DroPcaError::Csv {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_trace_csv(path: &Path) -> Result<Vec<IterateRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| DroPcaError::Csv {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let record: IterateRecord = row.map_err(|e| DroPcaError::Csv {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}
