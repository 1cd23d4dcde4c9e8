//! Closed catalog of convex functions with value, gradient, prox, conjugate
//! prox and Bregman divergence.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linops::{LinearMap, SymmetricEigen};
use crate::vecops;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuncError {
    #[error("dimension mismatch: expected length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("gradient unavailable for {0}")]
    GradientUnavailable(&'static str),
    #[error("nothing to transfer: f has no strong convexity (mu_f = 0)")]
    NothingToTransfer,
    #[error("strong convexity transfer needs a Quadratic or ScaledSqNorm f, got {0}")]
    TransferUnsupported(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("linear solve failed in prox of {0}")]
    SolveFailed(&'static str),
}

/// Smoothness and strong-convexity constants of a smooth function.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmoothProfile {
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    /// `1/2 x'Qx - q'x` with `Q` symmetric positive semidefinite.
    Quadratic { q_mat: LinearMap, q_lin: Vec<f64> },
    /// `mu/2 ||x - c||^2`
    ScaledSqNorm { mu: f64, center: Vec<f64> },
    /// `lambda ||x||_1`
    L1 { lambda: f64 },
    /// `mu/2 ||x||^2 + lambda ||x||_1`
    ElasticReg { mu: f64, lambda: f64 },
    /// Indicator of the single point `b`.
    IndicatorPoint { point: Vec<f64> },
    /// `<x, b>`
    LinearFunc { b: Vec<f64> },
    Zero,
}

impl FunctionKind {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionKind::Quadratic { .. } => "Quadratic",
            FunctionKind::ScaledSqNorm { .. } => "ScaledSqNorm",
            FunctionKind::L1 { .. } => "L1",
            FunctionKind::ElasticReg { .. } => "ElasticReg",
            FunctionKind::IndicatorPoint { .. } => "IndicatorPoint",
            FunctionKind::LinearFunc { .. } => "LinearFunc",
            FunctionKind::Zero => "Zero",
        }
    }
}

/// A function on `R^dim` plus an additive constant.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionHandle {
    kind: FunctionKind,
    dim: usize,
    offset: f64,
    profile: Option<SmoothProfile>,
}

impl fmt::Display for FunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FunctionKind::ScaledSqNorm { mu, .. } => write!(f, "ScaledSqNorm(mu={mu})"),
            FunctionKind::L1 { lambda } => write!(f, "L1(lambda={lambda})"),
            FunctionKind::ElasticReg { mu, lambda } => {
                write!(f, "ElasticReg(mu={mu}, lambda={lambda})")
            }
            k => f.write_str(k.name()),
        }?;
        write!(f, " on R^{}", self.dim)
    }
}

fn check_len(expected: usize, v: &[f64]) -> Result<(), FuncError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(FuncError::DimensionMismatch {
            expected,
            found: v.len(),
        })
    }
}

fn nonneg(name: &str, v: f64) -> Result<f64, FuncError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(FuncError::InvalidParameter(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<f64, FuncError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(FuncError::InvalidParameter(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Tolerance used when deciding whether a point lies on an indicator's point.
const POINT_TOL: f64 = 1e-12;

impl FunctionHandle {
    fn build(kind: FunctionKind, dim: usize, offset: f64) -> Self {
        let profile = match &kind {
            FunctionKind::Quadratic { q_mat, .. } => {
                let eig = SymmetricEigen::jacobi(q_mat);
                let l = eig.values.last().copied().unwrap_or(0.0).max(0.0);
                // Rounding leaves O(eps L) noise on exact zero eigenvalues.
                let floor = l * f64::EPSILON * q_mat.rows() as f64 * 64.0;
                let mu = if eig.values[0] <= floor { 0.0 } else { eig.values[0].min(l) };
                Some(SmoothProfile { l, mu })
            }
            FunctionKind::ScaledSqNorm { mu, .. } => Some(SmoothProfile { l: *mu, mu: *mu }),
            FunctionKind::LinearFunc { .. } | FunctionKind::Zero => {
                Some(SmoothProfile { l: 0.0, mu: 0.0 })
            }
            _ => None,
        };
        Self {
            kind,
            dim,
            offset,
            profile,
        }
    }

    /// `1/2 ||Ax - b||^2`
    pub fn least_squares(a: &LinearMap, b: &[f64]) -> Result<Self, FuncError> {
        check_len(a.rows(), b)?;
        let q_mat = a.gram_inner();
        let q_lin = a.mul_vec_t(b);
        Ok(Self::build(
            FunctionKind::Quadratic { q_mat, q_lin },
            a.cols(),
            0.5 * vecops::norm_sq(b),
        ))
    }

    /// `1/2 x'Qx - q'x + offset`; `Q` must be square and symmetric.
    pub fn quadratic_form(q_mat: LinearMap, q_lin: Vec<f64>, offset: f64) -> Result<Self, FuncError> {
        let n = q_mat.rows();
        if q_mat.cols() != n {
            return Err(FuncError::InvalidParameter("Q must be square".into()));
        }
        check_len(n, &q_lin)?;
        let asym = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .fold(0.0f64, |m, (i, j)| m.max((q_mat.get(i, j) - q_mat.get(j, i)).abs()));
        if asym > 1e-12 * (1.0 + q_mat.frobenius_norm()) {
            return Err(FuncError::InvalidParameter("Q must be symmetric".into()));
        }
        Ok(Self::build(FunctionKind::Quadratic { q_mat, q_lin }, n, offset))
    }

    pub fn scaled_sq_norm(mu: f64, center: Vec<f64>) -> Result<Self, FuncError> {
        positive("mu", mu)?;
        let dim = center.len();
        Ok(Self::build(FunctionKind::ScaledSqNorm { mu, center }, dim, 0.0))
    }

    pub fn l1(lambda: f64, dim: usize) -> Result<Self, FuncError> {
        nonneg("lambda", lambda)?;
        Ok(Self::build(FunctionKind::L1 { lambda }, dim, 0.0))
    }

    pub fn elastic_reg(mu: f64, lambda: f64, dim: usize) -> Result<Self, FuncError> {
        positive("mu", mu)?;
        nonneg("lambda", lambda)?;
        Ok(Self::build(FunctionKind::ElasticReg { mu, lambda }, dim, 0.0))
    }

    pub fn indicator_point(point: Vec<f64>) -> Self {
        let dim = point.len();
        Self::build(FunctionKind::IndicatorPoint { point }, dim, 0.0)
    }

    pub fn linear(b: Vec<f64>) -> Self {
        let dim = b.len();
        Self::build(FunctionKind::LinearFunc { b }, dim, 0.0)
    }

    pub fn zero(dim: usize) -> Self {
        Self::build(FunctionKind::Zero, dim, 0.0)
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Present exactly for the smooth kinds.
    pub fn profile(&self) -> Option<SmoothProfile> {
        self.profile
    }

    pub fn is_smooth(&self) -> bool {
        self.profile.is_some()
    }

    /// Strong-convexity modulus; zero when the kind has none.
    pub fn strong_convexity(&self) -> f64 {
        match &self.kind {
            FunctionKind::ElasticReg { mu, .. } => *mu,
            _ => self.profile.map_or(0.0, |p| p.mu),
        }
    }

    /// Strong-convexity modulus of the conjugate, i.e. `1/L` for smooth kinds
    /// with `L > 0`; zero otherwise.
    pub fn conjugate_strong_convexity(&self) -> f64 {
        match self.profile {
            Some(p) if p.l > 0.0 => 1.0 / p.l,
            _ => 0.0,
        }
    }

    /// True for kinds whose sum with another such kind is again a quadratic.
    pub fn is_quadratic_type(&self) -> bool {
        matches!(
            self.kind,
            FunctionKind::Quadratic { .. }
                | FunctionKind::ScaledSqNorm { .. }
                | FunctionKind::LinearFunc { .. }
                | FunctionKind::Zero
        )
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, FuncError> {
        check_len(self.dim, x)?;
        let v = match &self.kind {
            FunctionKind::Quadratic { q_mat, q_lin } => {
                0.5 * vecops::dot(x, &q_mat.mul_vec(x)) - vecops::dot(q_lin, x)
            }
            FunctionKind::ScaledSqNorm { mu, center } => 0.5 * mu * vecops::dist(x, center).powi(2),
            FunctionKind::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            FunctionKind::ElasticReg { mu, lambda } => {
                0.5 * mu * vecops::norm_sq(x) + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
            }
            FunctionKind::IndicatorPoint { point } => {
                if vecops::max_abs_diff(x, point) <= POINT_TOL * (1.0 + vecops::norm_inf(point)) {
                    0.0
                } else {
                    return Ok(f64::INFINITY);
                }
            }
            FunctionKind::LinearFunc { b } => vecops::dot(x, b),
            FunctionKind::Zero => 0.0,
        };
        Ok(v + self.offset)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FuncError> {
        check_len(self.dim, x)?;
        match &self.kind {
            FunctionKind::Quadratic { q_mat, q_lin } => Ok(vecops::sub(&q_mat.mul_vec(x), q_lin)),
            FunctionKind::ScaledSqNorm { mu, center } => Ok(vecops::scale(*mu, &vecops::sub(x, center))),
            FunctionKind::LinearFunc { b } => Ok(b.clone()),
            FunctionKind::Zero => Ok(vec![0.0; self.dim]),
            k => Err(FuncError::GradientUnavailable(k.name())),
        }
    }

    /// `grad F(x) - grad F(y)`, formed from `x - y` so that it vanishes exactly
    /// at `x = y` and loses no accuracy near it.
    pub fn gradient_difference(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, FuncError> {
        check_len(self.dim, x)?;
        check_len(self.dim, y)?;
        let d = vecops::sub(x, y);
        match &self.kind {
            FunctionKind::Quadratic { q_mat, .. } => Ok(q_mat.mul_vec(&d)),
            FunctionKind::ScaledSqNorm { mu, .. } => Ok(vecops::scale(*mu, &d)),
            FunctionKind::LinearFunc { .. } | FunctionKind::Zero => Ok(vec![0.0; self.dim]),
            k => Err(FuncError::GradientUnavailable(k.name())),
        }
    }

    /// `D_F(x; y) = F(x) - F(y) - <grad F(y), x - y>`, in closed form per kind.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64, FuncError> {
        check_len(self.dim, x)?;
        check_len(self.dim, y)?;
        let d = vecops::sub(x, y);
        match &self.kind {
            FunctionKind::Quadratic { q_mat, .. } => {
                Ok((0.5 * vecops::dot(&d, &q_mat.mul_vec(&d))).max(0.0))
            }
            FunctionKind::ScaledSqNorm { mu, .. } => Ok(0.5 * mu * vecops::norm_sq(&d)),
            FunctionKind::LinearFunc { .. } | FunctionKind::Zero => Ok(0.0),
            k => Err(FuncError::GradientUnavailable(k.name())),
        }
    }

    /// `argmin_w F(w) + 1/(2 gamma) ||w - v||^2`
    pub fn prox(&self, gamma: f64, v: &[f64]) -> Result<Vec<f64>, FuncError> {
        check_len(self.dim, v)?;
        positive("gamma", gamma)?;
        match &self.kind {
            FunctionKind::Quadratic { q_mat, q_lin } => {
                let n = self.dim;
                let mut m = DMatrix::from_row_slice(n, n, q_mat.as_slice()) * gamma;
                for i in 0..n {
                    m[(i, i)] += 1.0;
                }
                let rhs = DVector::from_iterator(
                    n,
                    v.iter().zip(q_lin).map(|(vi, qi)| vi + gamma * qi),
                );
                let chol = m.cholesky().ok_or(FuncError::SolveFailed("Quadratic"))?;
                Ok(chol.solve(&rhs).iter().copied().collect())
            }
            FunctionKind::ScaledSqNorm { mu, center } => {
                let s = 1.0 / (1.0 + gamma * mu);
                Ok(v
                    .iter()
                    .zip(center)
                    .map(|(vi, ci)| (vi + gamma * mu * ci) * s)
                    .collect())
            }
            FunctionKind::L1 { lambda } => {
                Ok(v.iter().map(|vi| soft_threshold(*vi, gamma * lambda)).collect())
            }
            FunctionKind::ElasticReg { mu, lambda } => {
                let s = 1.0 / (1.0 + gamma * mu);
                Ok(v
                    .iter()
                    .map(|vi| soft_threshold(*vi, gamma * lambda) * s)
                    .collect())
            }
            FunctionKind::IndicatorPoint { point } => Ok(point.clone()),
            FunctionKind::LinearFunc { b } => Ok(vecops::lincomb(1.0, v, -gamma, b)),
            FunctionKind::Zero => Ok(v.to_vec()),
        }
    }

    /// Prox of the convex conjugate `F*`.
    pub fn prox_conjugate(&self, gamma: f64, v: &[f64]) -> Result<Vec<f64>, FuncError> {
        check_len(self.dim, v)?;
        positive("gamma", gamma)?;
        match &self.kind {
            FunctionKind::L1 { lambda } => Ok(v.iter().map(|vi| vi.clamp(-lambda, *lambda)).collect()),
            FunctionKind::IndicatorPoint { point } => Ok(vecops::lincomb(1.0, v, -gamma, point)),
            FunctionKind::ScaledSqNorm { mu, center } => {
                let s = mu / (mu + gamma);
                Ok(v
                    .iter()
                    .zip(center)
                    .map(|(vi, ci)| (vi - gamma * ci) * s)
                    .collect())
            }
            FunctionKind::LinearFunc { b } => Ok(b.clone()),
            FunctionKind::Zero => Ok(vec![0.0; self.dim]),
            FunctionKind::Quadratic { .. } | FunctionKind::ElasticReg { .. } => {
                self.prox_conjugate_moreau(gamma, v)
            }
        }
    }

    /// `prox_{gamma F*}(v) = v - gamma prox_{F/gamma}(v/gamma)`
    pub fn prox_conjugate_moreau(&self, gamma: f64, v: &[f64]) -> Result<Vec<f64>, FuncError> {
        let inner = self.prox(1.0 / gamma, &vecops::scale(1.0 / gamma, v))?;
        Ok(vecops::lincomb(1.0, v, -gamma, &inner))
    }

    /// Distance from `u` to the subdifferential of `F` at `x`. Infinite when
    /// `x` is outside the domain.
    pub fn subgradient_distance(&self, x: &[f64], u: &[f64]) -> Result<f64, FuncError> {
        check_len(self.dim, x)?;
        check_len(self.dim, u)?;
        let l1_dist = |lambda: f64, shift: &dyn Fn(usize) -> f64| -> f64 {
            x.iter()
                .zip(u)
                .enumerate()
                .map(|(i, (xi, ui))| {
                    let w = ui - shift(i);
                    let d = if *xi > 0.0 {
                        w - lambda
                    } else if *xi < 0.0 {
                        w + lambda
                    } else {
                        (w.abs() - lambda).max(0.0)
                    };
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        };
        match &self.kind {
            FunctionKind::L1 { lambda } => Ok(l1_dist(*lambda, &|_| 0.0)),
            FunctionKind::ElasticReg { mu, lambda } => Ok(l1_dist(*lambda, &|i| mu * x[i])),
            FunctionKind::IndicatorPoint { point } => {
                if vecops::max_abs_diff(x, point) <= POINT_TOL * (1.0 + vecops::norm_inf(point)) {
                    Ok(0.0)
                } else {
                    Ok(f64::INFINITY)
                }
            }
            _ => Ok(vecops::dist(u, &self.gradient(x)?)),
        }
    }

    /// `(Q, q, offset)` with `F(x) = 1/2 x'Qx - q'x + offset`, for quadratic-type kinds.
    pub fn as_quadratic_form(&self) -> Option<(LinearMap, Vec<f64>, f64)> {
        let n = self.dim;
        match &self.kind {
            FunctionKind::Quadratic { q_mat, q_lin } => Some((q_mat.clone(), q_lin.clone(), self.offset)),
            FunctionKind::ScaledSqNorm { mu, center } => Some((
                LinearMap::identity(n).scaled(*mu),
                vecops::scale(*mu, center),
                self.offset + 0.5 * mu * vecops::norm_sq(center),
            )),
            FunctionKind::LinearFunc { b } => Some((LinearMap::zeros(n, n), vecops::scale(-1.0, b), self.offset)),
            FunctionKind::Zero => Some((LinearMap::zeros(n, n), vec![0.0; n], self.offset)),
            _ => None,
        }
    }
}

/// `F + G` as a single Quadratic, for quadratic-type `F` and `G`.
pub fn sum_quadratic(a: &FunctionHandle, b: &FunctionHandle) -> Option<FunctionHandle> {
    if a.dim != b.dim {
        return None;
    }
    let (qa, la, oa) = a.as_quadratic_form()?;
    let (qb, lb, ob) = b.as_quadratic_form()?;
    let n = a.dim;
    let data: Vec<f64> = qa.as_slice().iter().zip(qb.as_slice()).map(|(x, y)| x + y).collect();
    let q = LinearMap::from_row_major(n, n, data).ok()?;
    FunctionHandle::quadratic_form(q, vecops::add(&la, &lb), oa + ob).ok()
}

/// Move the strong convexity of `f` into `g`:
/// `f~ = f - mu_f/2 ||.||^2` and `g~ = g + mu_f/2 ||.||^2`, so `f + g = f~ + g~`.
pub fn transfer_strong_convexity(
    f: &FunctionHandle,
    g: &FunctionHandle,
) -> Result<(FunctionHandle, FunctionHandle), FuncError> {
    if f.dim != g.dim {
        return Err(FuncError::DimensionMismatch {
            expected: f.dim,
            found: g.dim,
        });
    }
    let n = f.dim;
    let mu_f = match &f.kind {
        FunctionKind::Quadratic { .. } | FunctionKind::ScaledSqNorm { .. } => f.strong_convexity(),
        k => return Err(FuncError::TransferUnsupported(k.name())),
    };
    if mu_f <= 0.0 {
        return Err(FuncError::NothingToTransfer);
    }
    let prof_f = f.profile.expect("smooth kind");

    let f_new = match &f.kind {
        FunctionKind::Quadratic { q_mat, q_lin } => {
            let mut q = q_mat.clone();
            for i in 0..n {
                q.set(i, i, q.get(i, i) - mu_f);
            }
            let mut h = FunctionHandle::build(
                FunctionKind::Quadratic {
                    q_mat: q,
                    q_lin: q_lin.clone(),
                },
                n,
                f.offset,
            );
            h.profile = Some(SmoothProfile {
                l: prof_f.l - mu_f,
                mu: 0.0,
            });
            h
        }
        FunctionKind::ScaledSqNorm { mu, center } => {
            let offset = f.offset + 0.5 * mu * vecops::norm_sq(center);
            if center.iter().all(|c| *c == 0.0) {
                FunctionHandle::zero(n).with_offset(offset)
            } else {
                FunctionHandle::linear(vecops::scale(-mu, center)).with_offset(offset)
            }
        }
        _ => unreachable!(),
    };

    let g_new = match &g.kind {
        FunctionKind::Zero => FunctionHandle::scaled_sq_norm(mu_f, vec![0.0; n])?.with_offset(g.offset),
        FunctionKind::ScaledSqNorm { mu, center } => {
            let m = mu + mu_f;
            let c = vecops::scale(mu / m, center);
            let extra = 0.5 * mu * mu_f / m * vecops::norm_sq(center);
            FunctionHandle::scaled_sq_norm(m, c)?.with_offset(g.offset + extra)
        }
        FunctionKind::L1 { lambda } => FunctionHandle::elastic_reg(mu_f, *lambda, n)?.with_offset(g.offset),
        FunctionKind::ElasticReg { mu, lambda } => {
            FunctionHandle::elastic_reg(mu + mu_f, *lambda, n)?.with_offset(g.offset)
        }
        FunctionKind::LinearFunc { b } => {
            let c = vecops::scale(-1.0 / mu_f, b);
            let extra = -vecops::norm_sq(b) / (2.0 * mu_f);
            FunctionHandle::scaled_sq_norm(mu_f, c)?.with_offset(g.offset + extra)
        }
        FunctionKind::IndicatorPoint { point } => {
            let extra = 0.5 * mu_f * vecops::norm_sq(point);
            FunctionHandle::indicator_point(point.clone()).with_offset(g.offset + extra)
        }
        FunctionKind::Quadratic { q_mat, q_lin } => {
            let mut q = q_mat.clone();
            for i in 0..n {
                q.set(i, i, q.get(i, i) + mu_f);
            }
            let prof_g = g.profile.expect("smooth kind");
            let mut h = FunctionHandle::build(
                FunctionKind::Quadratic {
                    q_mat: q,
                    q_lin: q_lin.clone(),
                },
                n,
                g.offset,
            );
            h.profile = Some(SmoothProfile {
                l: prof_g.l + mu_f,
                mu: prof_g.mu + mu_f,
            });
            h
        }
    };
    Ok((f_new, g_new))
}
