//! Dense linear maps `K: R^{d_x} -> R^{d_y}` and the spectral quantities the
//! stepsize rules consume: `||K||`, `lambda_min(KK*)` and the smallest positive
//! eigenvalue of `KK*`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::rng::SeededRng;
use crate::vecops;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinopsError {
    #[error("dimension mismatch: expected length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("tolerance {0} outside (0, 1e-3]")]
    InvalidTolerance(f64),
    #[error("matrix parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Dense real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl LinearMap {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinopsError> {
        if rows == 0 || cols == 0 {
            return Err(LinopsError::Empty);
        }
        if data.len() != rows * cols {
            return Err(LinopsError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinopsError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(LinopsError::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(r, c, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    /// Square diagonal matrix.
    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    /// Matrix with entries uniform in `[-1, 1)`.
    pub fn random(rows: usize, cols: usize, rng: &mut SeededRng) -> Self {
        let data = rng.vector(rows * cols);
        Self::from_row_major(rows, cols, data).expect("nonempty by construction")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        vecops::norm(&self.data)
    }

    /// `Kx`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinopsError> {
        if x.len() != self.cols {
            return Err(LinopsError::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok(self.mul_vec(x))
    }

    /// `K* y`
    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>, LinopsError> {
        if y.len() != self.rows {
            return Err(LinopsError::DimensionMismatch {
                expected: self.rows,
                found: y.len(),
            });
        }
        Ok(self.mul_vec_t(y))
    }

    /// Unchecked `Kx` for callers that validated dimensions up front.
    pub(crate) fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| vecops::dot(self.row(i), x)).collect()
    }

    /// Unchecked `K* y`.
    pub(crate) fn mul_vec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi != 0.0 {
                vecops::axpy(*yi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self, LinopsError> {
        if self.cols != other.rows {
            return Err(LinopsError::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                vecops::axpy(a, other.row(k), dst);
            }
        }
        Ok(out)
    }

    /// `KK*`, a `rows x rows` symmetric matrix.
    pub fn gram_outer(&self) -> Self {
        let mut g = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let v = vecops::dot(self.row(i), self.row(j));
                g.data[i * self.rows + j] = v;
                g.data[j * self.rows + i] = v;
            }
        }
        g
    }

    /// `K*K`, a `cols x cols` symmetric matrix.
    pub fn gram_inner(&self) -> Self {
        self.transpose().gram_outer()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: vecops::scale(alpha, &self.data),
        }
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LinopsError> {
        let text = std::fs::read_to_string(path).map_err(|e| LinopsError::Io(e.to_string()))?;
        text.parse()
    }

    /// Plain-text form: a `rows cols` header followed by one line per row.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for LinearMap {
    type Err = LinopsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| LinopsError::Parse("missing header line".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| LinopsError::Parse(format!("bad header {header:?}: {e}")))?;
        let [rows, cols] = dims[..] else {
            return Err(LinopsError::Parse(format!(
                "header must be \"rows cols\", got {header:?}"
            )));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| LinopsError::Parse(format!("expected {rows} rows, found {r}")))?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|e| LinopsError::Parse(format!("row {r}: {tok:?}: {e}")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(LinopsError::Parse(format!(
                    "row {r} has {} entries, expected {cols}",
                    data.len() - before
                )));
            }
        }
        if lines.next().is_some() {
            return Err(LinopsError::Parse(format!("more than {rows} rows")));
        }
        Self::from_row_major(rows, cols, data)
    }
}

/// Spectral quantities of `K` used by the stepsize corollaries.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectralSummary {
    /// `||K||`, the largest singular value.
    pub op_norm: f64,
    /// `lambda_min(KK*)`; zero whenever `KK*` is singular.
    pub lambda_min: f64,
    /// Smallest positive eigenvalue of `KK*`; `None` only for the zero map.
    pub lambda_min_pos: Option<f64>,
}

const POWER_MAX_ITERS: usize = 10_000;
const POWER_SEED: u64 = 0x5EED_0FC0_FFEE;

/// Eigenvalues of `KK*` below this value are treated as exact zeros.
pub fn zero_eigenvalue_threshold(k: &LinearMap, op_norm: f64) -> f64 {
    op_norm * op_norm * f64::EPSILON * k.rows.max(k.cols) as f64 * 64.0
}

pub fn spectral_summary(k: &LinearMap, tol: f64) -> Result<SpectralSummary, LinopsError> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(LinopsError::InvalidTolerance(tol));
    }
    if k.is_zero() {
        return Ok(SpectralSummary {
            op_norm: 0.0,
            lambda_min: 0.0,
            lambda_min_pos: None,
        });
    }
    let eig = SymmetricEigen::jacobi(&k.gram_outer());
    let lambda_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    // Power iteration is the primary estimate; the Jacobi maximum guards the
    // stepsize rules against an under-converged (too small) norm.
    let op_norm = power_iteration_norm(k, tol).max(lambda_max.sqrt());
    let threshold = zero_eigenvalue_threshold(k, op_norm);
    let smallest = eig.values[0];
    let lambda_min = if smallest <= threshold { 0.0 } else { smallest };
    let lambda_min_pos = eig.values.iter().copied().find(|v| *v > threshold);
    Ok(SpectralSummary {
        op_norm,
        lambda_min,
        lambda_min_pos,
    })
}

/// Largest singular value by power iteration on `K*K` from a fixed start.
pub fn power_iteration_norm(k: &LinearMap, tol: f64) -> f64 {
    let n = k.cols;
    let mut rng = SeededRng::new(POWER_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| 1.0 + 0.5 * rng.uniform(-1.0, 1.0)).collect();
    let nv = vecops::norm(&v);
    v.iter_mut().for_each(|e| *e /= nv);
    let mut rho = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = k.mul_vec_t(&k.mul_vec(&v));
        let rho_new = vecops::dot(&v, &w);
        let nw = vecops::norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let resid = vecops::dist(&w, &vecops::scale(rho_new, &v));
        let converged = resid <= tol * rho_new || (rho_new - rho).abs() <= 1e-3 * tol * rho_new;
        rho = rho_new;
        v = vecops::scale(1.0 / nw, &w);
        if converged {
            break;
        }
    }
    rho.max(0.0).sqrt()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

impl SymmetricEigen {
    pub fn jacobi(a: &LinearMap) -> Self {
        assert_eq!(a.rows, a.cols, "Jacobi needs a square matrix");
        let n = a.rows;
        let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
        let mut v: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let scale = a.frobenius_norm();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .map(|(i, j)| m[i][j] * m[i][j])
                .sum();
            if off.sqrt() <= f64::EPSILON * scale * 1e-2 || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[p][q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for row in m.iter_mut() {
                        let (akp, akq) = (row[p], row[q]);
                        row[p] = c * akp - s * akq;
                        row[q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (m[p][k], m[q][k]);
                        m[p][k] = c * apk - s * aqk;
                        m[q][k] = s * apk + c * aqk;
                    }
                    m[p][q] = 0.0;
                    m[q][p] = 0.0;
                    for row in v.iter_mut() {
                        let (vkp, vkq) = (row[p], row[q]);
                        row[p] = c * vkp - s * vkq;
                        row[q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
        let values = order.iter().map(|&i| m[i][i]).collect();
        let vectors = order
            .iter()
            .map(|&i| (0..n).map(|r| v[r][i]).collect())
            .collect();
        Self { values, vectors }
    }
}

/// Orthogonal projector onto `ran(K)`, built from the eigenvectors of `KK*`
/// with nonzero eigenvalue.
#[derive(Debug, Clone)]
pub struct RangeProjector {
    dim: usize,
    basis: Vec<Vec<f64>>,
}

impl RangeProjector {
    pub fn new(k: &LinearMap) -> Self {
        let eig = SymmetricEigen::jacobi(&k.gram_outer());
        let lambda_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
        let threshold = zero_eigenvalue_threshold(k, lambda_max.sqrt());
        let basis = eig
            .values
            .iter()
            .zip(eig.vectors)
            .filter(|(val, _)| **val > threshold)
            .map(|(_, vec)| vec)
            .collect();
        Self { dim: k.rows, basis }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for u in &self.basis {
            vecops::axpy(vecops::dot(u, y), u, &mut out);
        }
        out
    }

    /// Distance from `y` to `ran(K)`.
    pub fn distance(&self, y: &[f64]) -> f64 {
        vecops::dist(y, &self.project(y))
    }
}
