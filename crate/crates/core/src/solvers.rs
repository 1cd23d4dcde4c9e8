//! Iteration state machines for the accelerated methods and their baselines.
//!
//! Every step is a pure function `state -> state`. The gradient at the current
//! `z` is carried in the state, so each step evaluates exactly one fresh
//! gradient.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use thiserror::Error;

use crate::funcs::{sum_quadratic, FuncError, FunctionHandle, FunctionKind};
use crate::linops::{spectral_summary, LinearMap, LinopsError, RangeProjector, SpectralSummary};
use crate::lyapunov::{self, LyapunovRecord, ReferenceSolution};
use crate::tuning::{Constants, Regime, StepSizes};
use crate::vecops;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("{alg} cannot be applied: {reason}")]
    Shape { alg: AlgorithmId, reason: String },
    #[error("{what}: expected length {expected}, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("y0 supplied for two-function algorithm {0}")]
    UnexpectedDual(AlgorithmId),
    #[error("{0} needs a dual stepsize eta_y")]
    MissingDualStep(AlgorithmId),
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: u64 },
    #[error(transparent)]
    Func(#[from] FuncError),
    #[error(transparent)]
    Linops(#[from] LinopsError),
}

/// `min f(x) + g(x) + h(Kx)`; `h` and `K` are present together or not at all.
#[derive(Debug)]
pub struct CompositeProblem {
    f: FunctionHandle,
    g: FunctionHandle,
    dual: Option<(FunctionHandle, LinearMap, SpectralSummary)>,
    range: OnceLock<RangeProjector>,
    folded: OnceLock<Option<FunctionHandle>>,
}

impl Clone for CompositeProblem {
    fn clone(&self) -> Self {
        Self {
            f: self.f.clone(),
            g: self.g.clone(),
            dual: self.dual.clone(),
            range: OnceLock::new(),
            folded: OnceLock::new(),
        }
    }
}

const SPECTRAL_TOL: f64 = 1e-12;

impl CompositeProblem {
    pub fn two_function(f: FunctionHandle, g: FunctionHandle) -> Result<Self, SolverError> {
        Self::validate_fg(&f, &g)?;
        Ok(Self {
            f,
            g,
            dual: None,
            range: OnceLock::new(),
            folded: OnceLock::new(),
        })
    }

    pub fn primal_dual(
        f: FunctionHandle,
        g: FunctionHandle,
        h: FunctionHandle,
        k: LinearMap,
    ) -> Result<Self, SolverError> {
        Self::validate_fg(&f, &g)?;
        if k.cols() != f.dim() {
            return Err(SolverError::DimensionMismatch {
                what: "K columns vs dim(f)",
                expected: f.dim(),
                found: k.cols(),
            });
        }
        if k.rows() != h.dim() {
            return Err(SolverError::DimensionMismatch {
                what: "K rows vs dim(h)",
                expected: h.dim(),
                found: k.rows(),
            });
        }
        let spectral = spectral_summary(&k, SPECTRAL_TOL)?;
        Ok(Self {
            f,
            g,
            dual: Some((h, k, spectral)),
            range: OnceLock::new(),
            folded: OnceLock::new(),
        })
    }

    fn validate_fg(f: &FunctionHandle, g: &FunctionHandle) -> Result<(), SolverError> {
        if !f.is_smooth() {
            return Err(SolverError::InvalidProblem(format!("f must be smooth, got {f}")));
        }
        if f.dim() != g.dim() {
            return Err(SolverError::DimensionMismatch {
                what: "dim(g) vs dim(f)",
                expected: f.dim(),
                found: g.dim(),
            });
        }
        Ok(())
    }

    pub fn f(&self) -> &FunctionHandle {
        &self.f
    }

    pub fn g(&self) -> &FunctionHandle {
        &self.g
    }

    pub fn h(&self) -> Option<&FunctionHandle> {
        self.dual.as_ref().map(|d| &d.0)
    }

    pub fn k(&self) -> Option<&LinearMap> {
        self.dual.as_ref().map(|d| &d.1)
    }

    pub fn spectral(&self) -> Option<&SpectralSummary> {
        self.dual.as_ref().map(|d| &d.2)
    }

    pub fn dim_x(&self) -> usize {
        self.f.dim()
    }

    pub fn dim_y(&self) -> Option<usize> {
        self.k().map(LinearMap::rows)
    }

    pub fn is_primal_dual(&self) -> bool {
        self.dual.is_some()
    }

    pub fn is_linearly_constrained(&self) -> bool {
        matches!(self.h().map(FunctionHandle::kind), Some(FunctionKind::IndicatorPoint { .. }))
    }

    /// The right-hand side `b` of `Kx = b` in the constrained case.
    pub fn constraint_rhs(&self) -> Option<&[f64]> {
        match self.h().map(FunctionHandle::kind) {
            Some(FunctionKind::IndicatorPoint { point }) => Some(point),
            _ => None,
        }
    }

    pub fn constants(&self) -> Constants {
        let pf = self.f.profile().expect("validated smooth f");
        let spectral = self.spectral().copied();
        Constants {
            l_f: pf.l,
            mu_f: pf.mu,
            mu_g: self.g.strong_convexity(),
            l_g: self.g.profile().map(|p| p.l),
            mu_hstar: self.h().map_or(0.0, FunctionHandle::conjugate_strong_convexity),
            k_norm: spectral.map_or(0.0, |s| s.op_norm),
            lambda_min: spectral.map_or(0.0, |s| s.lambda_min),
            lambda_min_pos: spectral.and_then(|s| s.lambda_min_pos),
        }
    }

    /// Regime whose hypotheses the problem's shape matches.
    pub fn natural_regime(&self) -> Regime {
        match self.h() {
            None => Regime::TwoFunction,
            Some(h) if matches!(h.kind(), FunctionKind::IndicatorPoint { .. }) => Regime::LinearConstraint,
            Some(h) if h.conjugate_strong_convexity() > 0.0 => Regime::SmoothH,
            Some(_) => Regime::NonsmoothH,
        }
    }

    /// Projector onto `ran(K)`; built on first use.
    pub fn range_projector(&self) -> Option<&RangeProjector> {
        let k = self.k()?;
        Some(self.range.get_or_init(|| RangeProjector::new(k)))
    }

    /// `prox_{gamma (f + g)}`, available when `f` is affine or both `f` and
    /// `g` are quadratic-type.
    pub fn prox_f_plus_g(&self, gamma: f64, v: &[f64]) -> Result<Vec<f64>, SolverError> {
        match self.f.kind() {
            FunctionKind::Zero => return Ok(self.g.prox(gamma, v)?),
            FunctionKind::LinearFunc { b } => {
                return Ok(self.g.prox(gamma, &vecops::lincomb(1.0, v, -gamma, b))?);
            }
            _ => {}
        }
        let folded = self.folded.get_or_init(|| sum_quadratic(&self.f, &self.g));
        match folded {
            Some(fg) => Ok(fg.prox(gamma, v)?),
            None => Err(SolverError::Shape {
                alg: AlgorithmId::Cp,
                reason: format!(
                    "prox of f + g has no closed form for f = {}, g = {}",
                    self.f, self.g
                ),
            }),
        }
    }

    pub fn supports_fold(&self) -> bool {
        matches!(self.f.kind(), FunctionKind::Zero | FunctionKind::LinearFunc { .. })
            || (self.f.is_quadratic_type() && self.g.is_quadratic_type())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AlgorithmId {
    Apgd,
    Apge,
    Acv1,
    Acv2,
    Apdtr1,
    Apdtr2,
    Pgd,
    Frb,
    Cv1,
    Cv2,
    Pdtr1,
    Pdtr2,
    Cp,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 13] = [
        AlgorithmId::Apgd,
        AlgorithmId::Apge,
        AlgorithmId::Acv1,
        AlgorithmId::Acv2,
        AlgorithmId::Apdtr1,
        AlgorithmId::Apdtr2,
        AlgorithmId::Pgd,
        AlgorithmId::Frb,
        AlgorithmId::Cv1,
        AlgorithmId::Cv2,
        AlgorithmId::Pdtr1,
        AlgorithmId::Pdtr2,
        AlgorithmId::Cp,
    ];

    pub const ACCELERATED_TWO: [AlgorithmId; 2] = [AlgorithmId::Apgd, AlgorithmId::Apge];
    pub const ACCELERATED_PD: [AlgorithmId; 4] = [
        AlgorithmId::Acv1,
        AlgorithmId::Acv2,
        AlgorithmId::Apdtr1,
        AlgorithmId::Apdtr2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::Apgd => "APGD",
            AlgorithmId::Apge => "APGE",
            AlgorithmId::Acv1 => "ACV1",
            AlgorithmId::Acv2 => "ACV2",
            AlgorithmId::Apdtr1 => "APDTR1",
            AlgorithmId::Apdtr2 => "APDTR2",
            AlgorithmId::Pgd => "PGD",
            AlgorithmId::Frb => "FRB",
            AlgorithmId::Cv1 => "CV1",
            AlgorithmId::Cv2 => "CV2",
            AlgorithmId::Pdtr1 => "PDTR1",
            AlgorithmId::Pdtr2 => "PDTR2",
            AlgorithmId::Cp => "CP",
        }
    }

    pub fn is_primal_dual(self) -> bool {
        !matches!(
            self,
            AlgorithmId::Apgd | AlgorithmId::Apge | AlgorithmId::Pgd | AlgorithmId::Frb
        )
    }

    pub fn is_accelerated(self) -> bool {
        matches!(
            self,
            AlgorithmId::Apgd
                | AlgorithmId::Apge
                | AlgorithmId::Acv1
                | AlgorithmId::Acv2
                | AlgorithmId::Apdtr1
                | AlgorithmId::Apdtr2
        )
    }

    /// Baselines that keep `z^k = x^{k-1}` for the reflected gradient.
    fn uses_previous_iterate(self) -> bool {
        matches!(self, AlgorithmId::Frb | AlgorithmId::Pdtr1 | AlgorithmId::Pdtr2)
    }

    /// Algorithms whose `z` is not an independent variable but a copy of `x`.
    fn z_tracks_x(self) -> bool {
        matches!(
            self,
            AlgorithmId::Pgd | AlgorithmId::Cv1 | AlgorithmId::Cv2 | AlgorithmId::Cp
        )
    }

    /// Algorithms applicable to problems of the given shape.
    pub fn applicable(primal_dual: bool) -> Vec<AlgorithmId> {
        Self::ALL
            .into_iter()
            .filter(|a| a.is_primal_dual() == primal_dual)
            .collect()
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_uppercase()
            .replace(['-', '_'], "")
            .replace("II", "2")
            .replace('I', "1");
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

impl From<AlgorithmId> for String {
    fn from(a: AlgorithmId) -> String {
        a.as_str().to_string()
    }
}

impl TryFrom<String> for AlgorithmId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Per-run counts of oracle evaluations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct OracleCalls {
    pub gradient: u64,
    pub prox_g: u64,
    pub prox_hstar: u64,
    pub apply_k: u64,
    pub apply_kt: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub z: Vec<f64>,
    pub k: u64,
    /// `grad f(z^k)`.
    pub grad_z: Vec<f64>,
    pub calls: OracleCalls,
}

fn check_dim(what: &'static str, expected: usize, v: &[f64]) -> Result<(), SolverError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(SolverError::DimensionMismatch {
            what,
            expected,
            found: v.len(),
        })
    }
}

fn check_shape(problem: &CompositeProblem, alg: AlgorithmId) -> Result<(), SolverError> {
    let shape_err = |reason: &str| SolverError::Shape {
        alg,
        reason: reason.to_string(),
    };
    if alg.is_primal_dual() && !problem.is_primal_dual() {
        return Err(shape_err("needs h and K"));
    }
    if !alg.is_primal_dual() && problem.is_primal_dual() {
        return Err(shape_err("needs a problem without h and K"));
    }
    if alg == AlgorithmId::Cp && !problem.supports_fold() {
        return Err(shape_err(
            "f must be affine, or f and g both quadratic-type, so that f folds into the prox of g",
        ));
    }
    Ok(())
}

pub fn init(
    problem: &CompositeProblem,
    alg: AlgorithmId,
    x0: &[f64],
    y0: Option<&[f64]>,
    z0: Option<&[f64]>,
) -> Result<SolverState, SolverError> {
    check_shape(problem, alg)?;
    check_dim("x0", problem.dim_x(), x0)?;
    let y = match (problem.dim_y(), y0) {
        (None, Some(_)) => return Err(SolverError::UnexpectedDual(alg)),
        (None, None) => None,
        (Some(m), None) => Some(vec![0.0; m]),
        (Some(m), Some(y0)) => {
            check_dim("y0", m, y0)?;
            if problem.is_linearly_constrained() {
                Some(problem.range_projector().expect("primal-dual").project(y0))
            } else {
                Some(y0.to_vec())
            }
        }
    };
    let z = match z0 {
        Some(z0) if !alg.z_tracks_x() => {
            check_dim("z0", problem.dim_x(), z0)?;
            z0.to_vec()
        }
        _ => x0.to_vec(),
    };
    let grad_z = problem.f().gradient(&z)?;
    Ok(SolverState {
        x: x0.to_vec(),
        y,
        z,
        k: 0,
        grad_z,
        calls: OracleCalls {
            gradient: 1,
            ..Default::default()
        },
    })
}

/// `z/(1+eta_z) + eta_z/(1+eta_z) * target`
fn damp(z: &[f64], target: &[f64], eta_z: f64) -> Vec<f64> {
    let a = 1.0 / (1.0 + eta_z);
    vecops::lincomb(a, z, eta_z * a, target)
}

/// Lightweight view of a primal-dual problem's dual block.
struct Dual<'a> {
    h: &'a FunctionHandle,
    k: &'a LinearMap,
}

fn dual_parts(problem: &CompositeProblem) -> Dual<'_> {
    Dual {
        h: problem.h().expect("checked shape"),
        k: problem.k().expect("checked shape"),
    }
}

fn eta_y(alg: AlgorithmId, steps: &StepSizes) -> Result<f64, SolverError> {
    steps.eta_y.ok_or(SolverError::MissingDualStep(alg))
}

pub fn step_apgd(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState) -> Result<SolverState, SolverError> {
    let f = problem.f();
    let mut calls = s.calls;
    let x = problem.g().prox(steps.eta_x, &vecops::lincomb(1.0, &s.x, -steps.eta_x, &s.grad_z))?;
    calls.prox_g += 1;
    let z = damp(&s.z, &vecops::reflect(&x, &s.x), steps.eta_z);
    let grad_z = f.gradient(&z)?;
    calls.gradient += 1;
    Ok(SolverState {
        x,
        y: None,
        z,
        k: s.k + 1,
        grad_z,
        calls,
    })
}

pub fn step_apge(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState) -> Result<SolverState, SolverError> {
    let mut calls = s.calls;
    let z = damp(&s.z, &s.x, steps.eta_z);
    let grad_z = problem.f().gradient(&z)?;
    calls.gradient += 1;
    let refl = vecops::reflect(&grad_z, &s.grad_z);
    let x = problem.g().prox(steps.eta_x, &vecops::lincomb(1.0, &s.x, -steps.eta_x, &refl))?;
    calls.prox_g += 1;
    Ok(SolverState {
        x,
        y: None,
        z,
        k: s.k + 1,
        grad_z,
        calls,
    })
}

pub fn step_acv1(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState) -> Result<SolverState, SolverError> {
    let d = dual_parts(problem);
    let ey = eta_y(AlgorithmId::Acv1, steps)?;
    let y = s.y.as_deref().expect("primal-dual state");
    let mut calls = s.calls;
    let mut dir = d.k.mul_vec_t(y);
    calls.apply_kt += 1;
    vecops::axpy(1.0, &s.grad_z, &mut dir);
    let x = problem.g().prox(steps.eta_x, &vecops::lincomb(1.0, &s.x, -steps.eta_x, &dir))?;
    calls.prox_g += 1;
    let xr = vecops::reflect(&x, &s.x);
    let kx = d.k.mul_vec(&xr);
    calls.apply_k += 1;
    let y_new = d.h.prox_conjugate(ey, &vecops::lincomb(1.0, y, ey, &kx))?;
    calls.prox_hstar += 1;
    let z = damp(&s.z, &xr, steps.eta_z);
    let grad_z = problem.f().gradient(&z)?;
    calls.gradient += 1;
    Ok(SolverState {
        x,
        y: Some(y_new),
        z,
        k: s.k + 1,
        grad_z,
        calls,
    })
}

pub fn step_acv2(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState) -> Result<SolverState, SolverError> {
    let d = dual_parts(problem);
    let ey = eta_y(AlgorithmId::Acv2, steps)?;
    let y = s.y.as_deref().expect("primal-dual state");
    let mut calls = s.calls;
    let kx = d.k.mul_vec(&s.x);
    calls.apply_k += 1;
    let y_new = d.h.prox_conjugate(ey, &vecops::lincomb(1.0, y, ey, &kx))?;
    calls.prox_hstar += 1;
    let mut dir = d.k.mul_vec_t(&vecops::reflect(&y_new, y));
    calls.apply_kt += 1;
    vecops::axpy(1.0, &s.grad_z, &mut dir);
    let x = problem.g().prox(steps.eta_x, &vecops::lincomb(1.0, &s.x, -steps.eta_x, &dir))?;
    calls.prox_g += 1;
    let z = damp(&s.z, &vecops::reflect(&x, &s.x), steps.eta_z);
    let grad_z = problem.f().gradient(&z)?;
    calls.gradient += 1;
    Ok(SolverState {
        x,
        y: Some(y_new),
        z,
        k: s.k + 1,
        grad_z,
        calls,
    })
}

pub fn step_apdtr1(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState) -> Result<SolverState, SolverError> {
    let d = dual_parts(problem);
    let ey = eta_y(AlgorithmId::Apdtr1, steps)?;
    let y = s.y.as_deref().expect("primal-dual state");
    let mut calls = s.calls;
    let z = damp(&s.z, &s.x, steps.eta_z);
    let grad_z = problem.f().gradient(&z)?;
    calls.gradient += 1;
    let mut dir = d.k.mul_vec_t(y);
    calls.apply_kt += 1;
    vecops::axpy(2.0, &grad_z, &mut dir);
    vecops::axpy(-1.0, &s.grad_z, &mut dir);
    let x = problem.g().prox(steps.eta_x, &vecops::lincomb(1.0, &s.x, -steps.eta_x, &dir))?;
    calls.prox_g += 1;
    let kx = d.k.mul_vec(&vecops::reflect(&x, &s.x));
    calls.apply_k += 1;
    let y_new = d.h.prox_conjugate(ey, &vecops::lincomb(1.0, y, ey, &kx))?;
    calls.prox_hstar += 1;
    Ok(SolverState {
        x,
        y: Some(y_new),
        z,
        k: s.k + 1,
        grad_z,
        calls,
    })
}

pub fn step_apdtr2(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState) -> Result<SolverState, SolverError> {
    let d = dual_parts(problem);
    let ey = eta_y(AlgorithmId::Apdtr2, steps)?;
    let y = s.y.as_deref().expect("primal-dual state");
    let mut calls = s.calls;
    let kx = d.k.mul_vec(&s.x);
    calls.apply_k += 1;
    let y_new = d.h.prox_conjugate(ey, &vecops::lincomb(1.0, y, ey, &kx))?;
    calls.prox_hstar += 1;
    let z = damp(&s.z, &s.x, steps.eta_z);
    let grad_z = problem.f().gradient(&z)?;
    calls.gradient += 1;
    let mut dir = d.k.mul_vec_t(&vecops::reflect(&y_new, y));
    calls.apply_kt += 1;
    vecops::axpy(2.0, &grad_z, &mut dir);
    vecops::axpy(-1.0, &s.grad_z, &mut dir);
    let x = problem.g().prox(steps.eta_x, &vecops::lincomb(1.0, &s.x, -steps.eta_x, &dir))?;
    calls.prox_g += 1;
    Ok(SolverState {
        x,
        y: Some(y_new),
        z,
        k: s.k + 1,
        grad_z,
        calls,
    })
}

/// PGD, FRB, CV-I/II, PDTR-I/II and Chambolle-Pock (form I).
///
/// The z-free baselines keep `z = x`; FRB and PDTR keep `z^k = x^{k-1}` so
/// that `grad_z` holds the previous gradient of the reflected update.
pub fn step_baseline(
    problem: &CompositeProblem,
    steps: &StepSizes,
    s: &SolverState,
    alg: AlgorithmId,
) -> Result<SolverState, SolverError> {
    if alg.is_accelerated() {
        return Err(SolverError::Shape {
            alg,
            reason: "not a baseline".into(),
        });
    }
    check_shape(problem, alg)?;
    let f = problem.f();
    let ex = steps.eta_x;
    let mut calls = s.calls;

    // Gradient term of the x-update, and the state's next (z, grad_z).
    let (grad_term, next_z) = if alg.uses_previous_iterate() {
        let g_now = f.gradient(&s.x)?;
        calls.gradient += 1;
        (vecops::reflect(&g_now, &s.grad_z), Some((s.x.clone(), g_now)))
    } else if alg == AlgorithmId::Cp {
        (vec![0.0; s.x.len()], None)
    } else {
        (s.grad_z.clone(), None)
    };

    let prox_x = |v: Vec<f64>, calls: &mut OracleCalls| -> Result<Vec<f64>, SolverError> {
        calls.prox_g += 1;
        if alg == AlgorithmId::Cp {
            problem.prox_f_plus_g(ex, &v)
        } else {
            Ok(problem.g().prox(ex, &v)?)
        }
    };

    let (x, y) = match alg {
        AlgorithmId::Pgd | AlgorithmId::Frb => {
            let x = prox_x(vecops::lincomb(1.0, &s.x, -ex, &grad_term), &mut calls)?;
            (x, None)
        }
        AlgorithmId::Cv1 | AlgorithmId::Pdtr1 | AlgorithmId::Cp => {
            let d = dual_parts(problem);
            let ey = eta_y(alg, steps)?;
            let y = s.y.as_deref().expect("primal-dual state");
            let mut dir = d.k.mul_vec_t(y);
            calls.apply_kt += 1;
            vecops::axpy(1.0, &grad_term, &mut dir);
            let x = prox_x(vecops::lincomb(1.0, &s.x, -ex, &dir), &mut calls)?;
            let kx = d.k.mul_vec(&vecops::reflect(&x, &s.x));
            calls.apply_k += 1;
            let y_new = d.h.prox_conjugate(ey, &vecops::lincomb(1.0, y, ey, &kx))?;
            calls.prox_hstar += 1;
            (x, Some(y_new))
        }
        AlgorithmId::Cv2 | AlgorithmId::Pdtr2 => {
            let d = dual_parts(problem);
            let ey = eta_y(alg, steps)?;
            let y = s.y.as_deref().expect("primal-dual state");
            let kx = d.k.mul_vec(&s.x);
            calls.apply_k += 1;
            let y_new = d.h.prox_conjugate(ey, &vecops::lincomb(1.0, y, ey, &kx))?;
            calls.prox_hstar += 1;
            let mut dir = d.k.mul_vec_t(&vecops::reflect(&y_new, y));
            calls.apply_kt += 1;
            vecops::axpy(1.0, &grad_term, &mut dir);
            let x = prox_x(vecops::lincomb(1.0, &s.x, -ex, &dir), &mut calls)?;
            (x, Some(y_new))
        }
        _ => unreachable!("accelerated ids rejected above"),
    };

    let (z, grad_z) = match next_z {
        Some(pair) => pair,
        None if alg == AlgorithmId::Cp => (x.clone(), s.grad_z.clone()),
        None => {
            let g = f.gradient(&x)?;
            calls.gradient += 1;
            (x.clone(), g)
        }
    };
    Ok(SolverState {
        x,
        y,
        z,
        k: s.k + 1,
        grad_z,
        calls,
    })
}

/// One iteration of `alg`.
pub fn step(
    problem: &CompositeProblem,
    alg: AlgorithmId,
    steps: &StepSizes,
    s: &SolverState,
) -> Result<SolverState, SolverError> {
    match alg {
        AlgorithmId::Apgd => step_apgd(problem, steps, s),
        AlgorithmId::Apge => step_apge(problem, steps, s),
        AlgorithmId::Acv1 => step_acv1(problem, steps, s),
        AlgorithmId::Acv2 => step_acv2(problem, steps, s),
        AlgorithmId::Apdtr1 => step_apdtr1(problem, steps, s),
        AlgorithmId::Apdtr2 => step_apdtr2(problem, steps, s),
        _ => step_baseline(problem, steps, s, alg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_iters: u64,
    /// Stop once the KKT residual falls to this value.
    pub kkt_tol: Option<f64>,
    /// Stop once the Lyapunov value falls to this fraction of its initial value.
    pub lyapunov_rel_tol: Option<f64>,
}

impl StopRule {
    pub fn iterations(max_iters: u64) -> Self {
        Self {
            max_iters,
            kkt_tol: None,
            lyapunov_rel_tol: None,
        }
    }
}

/// What `run` records besides the KKT residual.
#[derive(Debug, Clone, Copy, Default)]
pub struct Monitor<'a> {
    /// Needed for Lyapunov values.
    pub reference: Option<&'a ReferenceSolution>,
    /// Contraction factor for the envelope column.
    pub theta: Option<f64>,
    /// Record wall time per iteration (disables byte-identical traces).
    pub timing: bool,
}

fn state_is_finite(s: &SolverState) -> bool {
    vecops::all_finite(&s.x) && vecops::all_finite(&s.z) && s.y.as_deref().is_none_or(vecops::all_finite)
}

pub fn run(
    problem: &CompositeProblem,
    alg: AlgorithmId,
    steps: &StepSizes,
    state0: SolverState,
    stop: &StopRule,
    monitor: &Monitor<'_>,
) -> Result<(SolverState, Vec<LyapunovRecord>), SolverError> {
    check_shape(problem, alg)?;
    if alg.is_primal_dual() {
        eta_y(alg, steps)?;
    }
    let sign = lyapunov::SignPattern::for_algorithm(alg);
    let start = Instant::now();
    let record = |s: &SolverState, value0: Option<f64>| -> LyapunovRecord {
        let value = monitor
            .reference
            .map(|r| lyapunov::lyapunov_value(problem, steps, s, r, sign));
        let k = s.k;
        let envelope = match (value0.or(value), monitor.theta) {
            (Some(v0), Some(theta)) => Some(v0 * theta.powf(k as f64)),
            _ => None,
        };
        LyapunovRecord {
            k,
            value,
            envelope,
            kkt: lyapunov::kkt_residual(problem, s),
            wall_ns: if monitor.timing {
                start.elapsed().as_nanos() as u64
            } else {
                0
            },
        }
    };
    let first = record(&state0, None);
    let value0 = first.value;
    let mut trace = vec![first];
    let mut state = state0;
    let done = |r: &LyapunovRecord| {
        stop.kkt_tol.is_some_and(|t| r.kkt <= t)
            || matches!((stop.lyapunov_rel_tol, r.value, value0), (Some(t), Some(v), Some(v0)) if v <= t * v0)
    };
    if done(&trace[0]) {
        return Ok((state, trace));
    }
    for _ in 0..stop.max_iters {
        let next = step(problem, alg, steps, &state)?;
        if !state_is_finite(&next) {
            return Err(SolverError::NonFinite { iteration: next.k });
        }
        state = next;
        let r = record(&state, value0);
        if !r.kkt.is_finite() || r.value.is_some_and(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { iteration: state.k });
        }
        let stop_now = done(&r);
        trace.push(r);
        if stop_now {
            break;
        }
    }
    Ok((state, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_two(alpha: f64) -> CompositeProblem {
        // f = alpha/2 x^2, g = 0
        CompositeProblem::two_function(
            FunctionHandle::scaled_sq_norm(alpha, vec![0.0]).unwrap(),
            FunctionHandle::zero(1),
        )
        .unwrap()
    }

    fn scalar_pd() -> CompositeProblem {
        // f = x^2/2, g = 0, h = y^2/2 so that h* = y^2/2, K = 1
        CompositeProblem::primal_dual(
            FunctionHandle::scaled_sq_norm(1.0, vec![0.0]).unwrap(),
            FunctionHandle::zero(1),
            FunctionHandle::scaled_sq_norm(1.0, vec![0.0]).unwrap(),
            LinearMap::identity(1),
        )
        .unwrap()
    }

    #[test]
    fn algorithm_names_parse() {
        for a in AlgorithmId::ALL {
            assert_eq!(a.as_str().parse::<AlgorithmId>().unwrap(), a);
            assert_eq!(a.as_str().to_lowercase().parse::<AlgorithmId>().unwrap(), a);
        }
        assert_eq!("ACV-I".parse::<AlgorithmId>().unwrap(), AlgorithmId::Acv1);
        assert_eq!("apdtr-ii".parse::<AlgorithmId>().unwrap(), AlgorithmId::Apdtr2);
        assert_eq!("PDTR_II".parse::<AlgorithmId>().unwrap(), AlgorithmId::Pdtr2);
        assert!("nope".parse::<AlgorithmId>().is_err());
    }

    #[test]
    fn init_defaults() {
        let p = scalar_two(1.0);
        let p2 = CompositeProblem::two_function(FunctionHandle::zero(2).with_offset(0.0), FunctionHandle::zero(2));
        let p2 = p2.unwrap();
        let s = init(&p2, AlgorithmId::Apgd, &[1.0, 1.0], None, None).unwrap();
        assert_eq!(s.z, vec![1.0, 1.0]);
        assert_eq!(s.k, 0);
        assert!(matches!(
            init(&p, AlgorithmId::Apgd, &[1.0], Some(&[0.0]), None),
            Err(SolverError::UnexpectedDual(_))
        ));
        let q = CompositeProblem::primal_dual(
            FunctionHandle::scaled_sq_norm(1.0, vec![0.0; 2]).unwrap(),
            FunctionHandle::zero(2),
            FunctionHandle::l1(1.0, 3).unwrap(),
            LinearMap::zeros(3, 2),
        )
        .unwrap();
        let s = init(&q, AlgorithmId::Acv1, &[0.0, 0.0], None, None).unwrap();
        assert_eq!(s.y, Some(vec![0.0, 0.0, 0.0]));
        assert!(init(&q, AlgorithmId::Acv1, &[0.0], None, None).is_err());
        assert!(init(&q, AlgorithmId::Apgd, &[0.0, 0.0], None, None).is_err());
    }

    #[test]
    fn init_projects_dual_onto_range_in_constrained_case() {
        let p = CompositeProblem::primal_dual(
            FunctionHandle::scaled_sq_norm(1.0, vec![0.0; 2]).unwrap(),
            FunctionHandle::zero(2),
            FunctionHandle::indicator_point(vec![1.0, 1.0]),
            LinearMap::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let s = init(&p, AlgorithmId::Acv1, &[0.0, 0.0], Some(&[1.0, 0.0]), None).unwrap();
        let y = s.y.unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15 && (y[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn apgd_scalar_step() {
        let p = scalar_two(1.0);
        let s0 = init(&p, AlgorithmId::Apgd, &[1.0], None, None).unwrap();
        let s1 = step_apgd(&p, &StepSizes::two_function(1.0, 1.0), &s0).unwrap();
        assert_eq!(s1.x, vec![0.0]);
        assert_eq!(s1.z, vec![0.0]);
        assert_eq!(s1.k, 1);
    }

    #[test]
    fn apge_scalar_step() {
        let p = scalar_two(1.0);
        let s0 = init(&p, AlgorithmId::Apge, &[1.0], None, None).unwrap();
        let s1 = step_apge(&p, &StepSizes::two_function(0.5, 1.0), &s0).unwrap();
        assert_eq!(s1.z, vec![1.0]);
        assert_eq!(s1.x, vec![0.5]);
    }

    #[test]
    fn pgd_scalar_step() {
        let p = scalar_two(1.0);
        let s0 = init(&p, AlgorithmId::Pgd, &[1.0], None, None).unwrap();
        let s1 = step_baseline(&p, &StepSizes::two_function(1.0, 1.0), &s0, AlgorithmId::Pgd).unwrap();
        assert_eq!(s1.x, vec![0.0]);
    }

    #[test]
    fn frb_two_steps_by_hand() {
        // f = 2x^2 (grad 4x), eta = 0.1, x^{-1} = x^0 = 1.
        // x1 = 1 - 0.1(2*4 - 4) = 0.6
        // x2 = 0.6 - 0.1(2*2.4 - 4) = 0.52
        let p = scalar_two(4.0);
        let st = StepSizes::two_function(0.1, 1.0);
        let s0 = init(&p, AlgorithmId::Frb, &[1.0], None, None).unwrap();
        let s1 = step_baseline(&p, &st, &s0, AlgorithmId::Frb).unwrap();
        let s2 = step_baseline(&p, &st, &s1, AlgorithmId::Frb).unwrap();
        assert!((s1.x[0] - 0.6).abs() < 1e-15);
        assert!((s2.x[0] - 0.52).abs() < 1e-15);
    }

    // Hand substitution with x = y = z = 1 and all stepsizes 1/2 on the
    // scalar instance f = x^2/2, g = 0, h* = y^2/2, K = 1. The prox of
    // gamma h* with gamma = 1/2 is v/1.5.
    #[test]
    fn acv1_scalar_step() {
        let p = scalar_pd();
        let st = StepSizes::primal_dual(0.5, 0.5, 0.5, Regime::SmoothH);
        let s0 = init(&p, AlgorithmId::Acv1, &[1.0], Some(&[1.0]), Some(&[1.0])).unwrap();
        let s1 = step_acv1(&p, &st, &s0).unwrap();
        // x' = 1 - 0.5(1 + 1) = 0; y' = (1 + 0.5(2*0 - 1))/1.5 = 1/3
        // z' = 1/1.5 + (0.5/1.5)(-1) = 1/3
        assert!(s1.x[0].abs() < 1e-15);
        assert!((s1.y.as_ref().unwrap()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s1.z[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn acv2_scalar_step() {
        let p = scalar_pd();
        let st = StepSizes::primal_dual(0.5, 0.5, 0.5, Regime::SmoothH);
        let s0 = init(&p, AlgorithmId::Acv2, &[1.0], Some(&[1.0]), Some(&[1.0])).unwrap();
        let s1 = step_acv2(&p, &st, &s0).unwrap();
        // y' = (1 + 0.5*1)/1.5 = 1; x' = 1 - 0.5((2 - 1) + 1) = 0
        // z' = 1/1.5 + (0.5/1.5)(2*0 - 1) = 1/3
        assert!((s1.y.as_ref().unwrap()[0] - 1.0).abs() < 1e-15);
        assert!(s1.x[0].abs() < 1e-15);
        assert!((s1.z[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn apdtr1_scalar_step() {
        let p = scalar_pd();
        let st = StepSizes::primal_dual(0.5, 0.5, 0.5, Regime::SmoothH);
        let s0 = init(&p, AlgorithmId::Apdtr1, &[1.0], Some(&[1.0]), Some(&[1.0])).unwrap();
        let s1 = step_apdtr1(&p, &st, &s0).unwrap();
        // z' = 1/1.5 + (0.5/1.5)*1 = 1; x' = 1 - 0.5(1 + 2*1 - 1) = 0
        // y' = (1 + 0.5(0 - 1))/1.5 = 1/3
        assert!((s1.z[0] - 1.0).abs() < 1e-15);
        assert!(s1.x[0].abs() < 1e-15);
        assert!((s1.y.as_ref().unwrap()[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn apdtr2_scalar_step() {
        let p = scalar_pd();
        let st = StepSizes::primal_dual(0.5, 0.5, 0.5, Regime::SmoothH);
        let s0 = init(&p, AlgorithmId::Apdtr2, &[1.0], Some(&[1.0]), Some(&[1.0])).unwrap();
        let s1 = step_apdtr2(&p, &st, &s0).unwrap();
        // y' = 1; z' = 1; x' = 1 - 0.5((2 - 1) + 2 - 1) = 0
        assert!((s1.y.as_ref().unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((s1.z[0] - 1.0).abs() < 1e-15);
        assert!(s1.x[0].abs() < 1e-15);
    }

    #[test]
    fn accelerated_steps_use_one_of_each_oracle() {
        let p = scalar_pd();
        let st = StepSizes::primal_dual(0.5, 0.5, 0.5, Regime::SmoothH);
        for alg in AlgorithmId::ACCELERATED_PD {
            let s0 = init(&p, alg, &[1.0], Some(&[1.0]), None).unwrap();
            let s1 = step(&p, alg, &st, &s0).unwrap();
            let d = s1.calls;
            let base = s0.calls;
            assert_eq!(
                (
                    d.gradient - base.gradient,
                    d.prox_g - base.prox_g,
                    d.prox_hstar - base.prox_hstar,
                    d.apply_k - base.apply_k,
                    d.apply_kt - base.apply_kt
                ),
                (1, 1, 1, 1, 1),
                "{alg}"
            );
        }
        let p = scalar_two(1.0);
        for alg in AlgorithmId::ACCELERATED_TWO {
            let s0 = init(&p, alg, &[1.0], None, None).unwrap();
            let s1 = step(&p, alg, &StepSizes::two_function(0.5, 0.5), &s0).unwrap();
            assert_eq!(s1.calls.gradient - s0.calls.gradient, 1);
            assert_eq!(s1.calls.prox_g - s0.calls.prox_g, 1);
        }
    }

    #[test]
    fn cp_requires_foldable_f() {
        let p = CompositeProblem::primal_dual(
            FunctionHandle::scaled_sq_norm(1.0, vec![0.0]).unwrap(),
            FunctionHandle::l1(1.0, 1).unwrap(),
            FunctionHandle::l1(1.0, 1).unwrap(),
            LinearMap::identity(1),
        )
        .unwrap();
        assert!(matches!(
            init(&p, AlgorithmId::Cp, &[0.0], None, None),
            Err(SolverError::Shape { .. })
        ));
        let q = scalar_pd();
        let s0 = init(&q, AlgorithmId::Cp, &[1.0], Some(&[1.0]), None).unwrap();
        let st = StepSizes::primal_dual(0.5, 0.5, 1.0, Regime::SmoothH);
        // x' = prox_{0.5 x^2/2}(1 - 0.5) = 0.5/1.5
        let s1 = step(&q, AlgorithmId::Cp, &st, &s0).unwrap();
        assert!((s1.x[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn run_with_zero_iterations_returns_initial_state() {
        let p = scalar_two(1.0);
        let s0 = init(&p, AlgorithmId::Apgd, &[1.0], None, None).unwrap();
        let (s, trace) = run(
            &p,
            AlgorithmId::Apgd,
            &StepSizes::two_function(1.0, 1.0),
            s0.clone(),
            &StopRule::iterations(0),
            &Monitor::default(),
        )
        .unwrap();
        assert_eq!(s, s0);
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].value, None);
    }

    #[test]
    fn divergent_steps_raise_non_finite() {
        let a = LinearMap::diagonal(&[10f64.sqrt(), 0.1]);
        let f = FunctionHandle::least_squares(&a, &[1.0, 1.0]).unwrap();
        let p = CompositeProblem::two_function(f, FunctionHandle::zero(2)).unwrap();
        let s0 = init(&p, AlgorithmId::Pgd, &[1.0, 1.0], None, None).unwrap();
        let err = run(
            &p,
            AlgorithmId::Pgd,
            &StepSizes::two_function(10.0, 1.0),
            s0,
            &StopRule::iterations(200),
            &Monitor::default(),
        )
        .unwrap_err();
        match err {
            SolverError::NonFinite { iteration } => assert!(iteration <= 200),
            e => panic!("unexpected {e}"),
        }
    }
}
