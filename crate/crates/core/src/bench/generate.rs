//! Seeded problem generators, one per regime.
//!
//! The constants below (l1 weight 0.1, unit strong convexity, unit `||K||`)
//! are arbitrary harness choices and are recorded as such in trace metadata.

use serde::{Deserialize, Serialize};

use crate::funcs::FunctionHandle;
use crate::linops::{spectral_summary, LinearMap};
use crate::rng::SeededRng;
use crate::solvers::CompositeProblem;
use crate::tuning::Regime;
use crate::vecops;

use super::BenchError;

fn one() -> f64 {
    1.0
}

fn default_l1() -> f64 {
    0.1
}

fn default_lambda_min() -> f64 {
    0.25
}

/// Generator inputs. `L_f = conditioning * mu_g` (or `conditioning` when
/// `mu_g = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub regime: Regime,
    pub dim_x: usize,
    /// Defaults to `max(1, dim_x / 2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_y: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub conditioning: f64,
    #[serde(default = "one")]
    pub mu_g: f64,
    #[serde(default)]
    pub mu_f: f64,
    /// Strong convexity of `h*` in the smooth regime.
    #[serde(default = "one")]
    pub mu_hstar: f64,
    /// Smallest (positive) eigenvalue of `KK*` in the nonsmooth and
    /// constrained regimes.
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    /// Rank of `K` in the constrained regime; defaults to full row rank.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default = "default_l1")]
    pub l1_weight: f64,
    #[serde(default = "one")]
    pub k_norm: f64,
}

impl ProblemSpec {
    pub fn new(regime: Regime, dim_x: usize, seed: u64, conditioning: f64) -> Self {
        Self {
            regime,
            dim_x,
            dim_y: None,
            seed,
            conditioning,
            mu_g: 1.0,
            mu_f: 0.0,
            mu_hstar: 1.0,
            lambda_min: default_lambda_min(),
            rank: None,
            l1_weight: default_l1(),
            k_norm: 1.0,
        }
    }

    pub fn with_dim_y(mut self, dim_y: usize) -> Self {
        self.dim_y = Some(dim_y);
        self
    }

    pub fn resolved_dim_y(&self) -> usize {
        self.dim_y.unwrap_or((self.dim_x / 2).max(1))
    }

    pub fn l_f(&self) -> f64 {
        if self.mu_g > 0.0 {
            self.conditioning * self.mu_g
        } else {
            self.conditioning
        }
    }

    pub(crate) fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.dim_x == 0 || self.resolved_dim_y() == 0 {
            return bad("dimensions must be at least 1".into());
        }
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_pos(self.conditioning) {
            return bad(format!("conditioning must be positive, got {}", self.conditioning));
        }
        if !finite_nonneg(self.mu_g) || !finite_nonneg(self.mu_f) || !finite_nonneg(self.l1_weight) {
            return bad("mu_g, mu_f and l1_weight must be nonnegative".into());
        }
        if self.mu_f > self.l_f() {
            return bad(format!("mu_f = {} exceeds L_f = {}", self.mu_f, self.l_f()));
        }
        if !finite_pos(self.mu_hstar) || !finite_pos(self.k_norm) {
            return bad("mu_hstar and k_norm must be positive".into());
        }
        if matches!(self.regime, Regime::NonsmoothH | Regime::LinearConstraint) {
            if self.resolved_dim_y() > self.dim_x {
                return bad(format!(
                    "{} needs dim_y <= dim_x, got {} > {}",
                    self.regime,
                    self.resolved_dim_y(),
                    self.dim_x
                ));
            }
            if !(finite_pos(self.lambda_min) && self.lambda_min <= self.k_norm * self.k_norm) {
                return bad(format!(
                    "lambda_min must lie in (0, k_norm^2], got {}",
                    self.lambda_min
                ));
            }
        }
        if let Some(r) = self.rank {
            if self.regime != Regime::LinearConstraint {
                return bad("rank is only used by the linear_constraint regime".into());
            }
            if r == 0 || r > self.resolved_dim_y() {
                return bad(format!("rank must lie in [1, dim_y], got {r}"));
            }
        }
        Ok(())
    }
}

/// `count` orthonormal vectors in `R^n` by twice-iterated Gram-Schmidt.
pub fn orthonormal_columns(n: usize, count: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    assert!(count <= n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = rng.vector(n);
        let start = vecops::norm(&v);
        for _ in 0..2 {
            for b in &basis {
                let c = vecops::dot(b, &v);
                vecops::axpy(-c, b, &mut v);
            }
        }
        let nv = vecops::norm(&v);
        if nv > 1e-3 * start {
            basis.push(vecops::scale(1.0 / nv, &v));
        }
    }
    basis
}

/// `sum_i s_i u_i v_i'` for orthonormal `u_i` in `R^rows`, `v_i` in `R^cols`.
fn from_singular_triples(rows: usize, cols: usize, s: &[f64], rng: &mut SeededRng) -> LinearMap {
    let u = orthonormal_columns(rows, s.len(), rng);
    let v = orthonormal_columns(cols, s.len(), rng);
    let mut k = LinearMap::zeros(rows, cols);
    for (idx, si) in s.iter().enumerate() {
        for i in 0..rows {
            let a = si * u[idx][i];
            for j in 0..cols {
                k.set(i, j, k.get(i, j) + a * v[idx][j]);
            }
        }
    }
    k
}

/// Values in `[lo, hi]` with both endpoints attained.
fn spread(count: usize, lo: f64, hi: f64, rng: &mut SeededRng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..count).map(|_| rng.uniform(lo, hi)).collect();
    if count > 0 {
        v[0] = hi;
    }
    if count > 1 {
        v[count - 1] = lo;
    }
    v
}

/// `1/2 ||Ax - b||^2` with eigenvalues of `A'A` spread over `[mu_f, L_f]`.
fn smooth_quadratic(spec: &ProblemSpec, rng: &mut SeededRng) -> Result<FunctionHandle, BenchError> {
    let n = spec.dim_x;
    let ev = spread(n, spec.mu_f, spec.l_f(), rng);
    let v = orthonormal_columns(n, n, rng);
    let mut a = LinearMap::zeros(n, n);
    for (i, e) in ev.iter().enumerate() {
        let s = e.sqrt();
        for j in 0..n {
            a.set(i, j, s * v[i][j]);
        }
    }
    let b = rng.vector(n);
    FunctionHandle::least_squares(&a, &b).map_err(|e| BenchError::Generator(e.to_string()))
}

fn gen_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::Generator(e.to_string())
}

const REDRAWS: usize = 10;

pub fn generate_problem(spec: &ProblemSpec) -> Result<CompositeProblem, BenchError> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let n = spec.dim_x;
    let m = spec.resolved_dim_y();
    let f = smooth_quadratic(spec, &mut rng)?;
    let prox_friendly_g = || -> Result<FunctionHandle, BenchError> {
        if spec.mu_g > 0.0 {
            FunctionHandle::elastic_reg(spec.mu_g, spec.l1_weight, n).map_err(gen_err)
        } else {
            FunctionHandle::l1(spec.l1_weight, n).map_err(gen_err)
        }
    };
    let smooth_g = |rng: &mut SeededRng| -> Result<FunctionHandle, BenchError> {
        if spec.mu_g > 0.0 {
            FunctionHandle::scaled_sq_norm(spec.mu_g, rng.vector(n)).map_err(gen_err)
        } else {
            Ok(FunctionHandle::zero(n))
        }
    };
    let problem = match spec.regime {
        Regime::TwoFunction => CompositeProblem::two_function(f, prox_friendly_g()?),
        Regime::SmoothH => {
            let g = prox_friendly_g()?;
            let raw = LinearMap::random(m, n, &mut rng);
            let s = spectral_summary(&raw, 1e-12).map_err(gen_err)?;
            if s.op_norm == 0.0 {
                return Err(BenchError::Generator("drew a zero K".into()));
            }
            let k = raw.scaled(spec.k_norm / s.op_norm);
            let h = FunctionHandle::scaled_sq_norm(1.0 / spec.mu_hstar, rng.vector(m)).map_err(gen_err)?;
            CompositeProblem::primal_dual(f, g, h, k)
        }
        Regime::NonsmoothH | Regime::LinearConstraint => {
            let g = smooth_g(&mut rng)?;
            let rank = spec.rank.unwrap_or(m);
            let mut drawn = None;
            for _ in 0..REDRAWS {
                let s = spread(rank, spec.lambda_min.sqrt(), spec.k_norm, &mut rng);
                let k = from_singular_triples(m, n, &s, &mut rng);
                let sum = spectral_summary(&k, 1e-12).map_err(gen_err)?;
                let ok = match spec.regime {
                    Regime::NonsmoothH => sum.lambda_min > 0.0,
                    _ => sum.lambda_min_pos.is_some() && (rank < m) == (sum.lambda_min == 0.0),
                };
                if ok {
                    drawn = Some(k);
                    break;
                }
            }
            let k = drawn.ok_or_else(|| {
                BenchError::Generator(format!("K failed the rank check after {REDRAWS} draws"))
            })?;
            let h = if spec.regime == Regime::NonsmoothH {
                FunctionHandle::l1(spec.l1_weight, m).map_err(gen_err)?
            } else {
                let x_feas = rng.vector(n);
                FunctionHandle::indicator_point(k.mul_vec(&x_feas))
            };
            CompositeProblem::primal_dual(f, g, h, k)
        }
    };
    problem.map_err(gen_err)
}
