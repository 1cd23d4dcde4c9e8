//! Reference solutions, Lyapunov functions, KKT residuals and contraction
//! checks.
//!
//! The reference solver shares no code with the step functions in
//! [`crate::solvers`]: it warm-starts with its own plain forward-backward or
//! primal-dual loop and then solves the KKT system on the detected active set.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::funcs::{FunctionHandle, FunctionKind};
use crate::solvers::{AlgorithmId, CompositeProblem, SolverError, SolverState};
use crate::tuning::{RateBound, StepSizes};
use crate::vecops;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("reference solve reached residual {residual:e} after {iterations} iterations (target {tol:e})")]
    NotConverged {
        iterations: u64,
        residual: f64,
        tol: f64,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSolution {
    pub x_star: Vec<f64>,
    pub y_star: Option<Vec<f64>>,
    pub z_star: Vec<f64>,
    pub kkt_residual: f64,
}

impl ReferenceSolution {
    /// The reference as a solver state, for fixed-point checks.
    pub fn as_state(&self, problem: &CompositeProblem) -> SolverState {
        SolverState {
            x: self.x_star.clone(),
            y: self.y_star.clone(),
            z: self.z_star.clone(),
            k: 0,
            grad_z: problem.f().gradient(&self.z_star).expect("smooth f"),
            calls: Default::default(),
        }
    }
}

/// Signs of the coupling terms `<y - y*, K(x - x*)>` and
/// `<grad f(z) - grad f(z*), x - x*>`. A zero sign drops the term; `s_fz = 0`
/// also drops the Bregman term (f folded into g).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignPattern {
    pub s_ky: i8,
    pub s_fz: i8,
}

impl SignPattern {
    pub fn for_algorithm(alg: AlgorithmId) -> Self {
        let (s_ky, s_fz) = match alg {
            AlgorithmId::Apgd | AlgorithmId::Pgd => (0, -1),
            AlgorithmId::Apge | AlgorithmId::Frb => (0, 1),
            AlgorithmId::Acv1 | AlgorithmId::Cv1 => (-1, -1),
            AlgorithmId::Acv2 | AlgorithmId::Cv2 => (1, -1),
            AlgorithmId::Apdtr1 | AlgorithmId::Pdtr1 => (-1, 1),
            AlgorithmId::Apdtr2 | AlgorithmId::Pdtr2 => (1, 1),
            AlgorithmId::Cp => (-1, 0),
        };
        Self { s_ky, s_fz }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovRecord {
    pub k: u64,
    /// `Phi_k` or `Psi_k`; absent without a reference solution.
    pub value: Option<f64>,
    /// `theta^k * value_0`; absent without a reference or a theta.
    pub envelope: Option<f64>,
    pub kkt: f64,
    pub wall_ns: u64,
}

fn primal_part(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState, r: &ReferenceSolution, sign: SignPattern) -> f64 {
    let dx = vecops::sub(&s.x, &r.x_star);
    let mut v = 0.5 / steps.eta_x * vecops::norm_sq(&dx);
    if sign.s_fz != 0 {
        let f = problem.f();
        let d = f.bregman(&s.z, &r.z_star).expect("smooth f");
        let gd = f.gradient_difference(&s.z, &r.z_star).expect("smooth f");
        v += d / steps.eta_z + f64::from(sign.s_fz) * vecops::dot(&gd, &dx);
    }
    v
}

/// `Phi = 1/(2 eta_x)||x - x*||^2 + D_f(z; z*)/eta_z +- <grad f(z) - grad f(z*), x - x*>`
pub fn phi(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState, r: &ReferenceSolution, sign: SignPattern) -> f64 {
    primal_part(problem, steps, s, r, sign)
}

/// `Psi = Phi + 1/(2 eta_y)||y - y*||^2 +- <y - y*, K(x - x*)>`
pub fn psi(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState, r: &ReferenceSolution, sign: SignPattern) -> f64 {
    let k = problem.k().expect("primal-dual problem");
    let y = s.y.as_deref().expect("primal-dual state");
    let ys = r.y_star.as_deref().expect("primal-dual reference");
    let dy = vecops::sub(y, ys);
    let dx = vecops::sub(&s.x, &r.x_star);
    primal_part(problem, steps, s, r, sign)
        + 0.5 / steps.eta_y() * vecops::norm_sq(&dy)
        + f64::from(sign.s_ky) * vecops::dot(&dy, &k.mul_vec(&dx))
}

/// `phi` or `psi` depending on whether the state carries a dual variable.
pub fn lyapunov_value(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState, r: &ReferenceSolution, sign: SignPattern) -> f64 {
    if s.y.is_some() {
        psi(problem, steps, s, r, sign)
    } else {
        phi(problem, steps, s, r, sign)
    }
}

/// Upper sandwich bound `||x - x*||^2/eta_x (+ ||y - y*||^2/eta_y) + 2 D_f(z; z*)/eta_z`.
pub fn sandwich_upper(problem: &CompositeProblem, steps: &StepSizes, s: &SolverState, r: &ReferenceSolution) -> f64 {
    let mut u = vecops::dist(&s.x, &r.x_star).powi(2) / steps.eta_x
        + 2.0 / steps.eta_z * problem.f().bregman(&s.z, &r.z_star).expect("smooth f");
    if let (Some(y), Some(ys)) = (&s.y, &r.y_star) {
        u += vecops::dist(y, ys).powi(2) / steps.eta_y();
    }
    u
}

/// Rounding level of a Lyapunov value evaluated against `r`: the sandwich
/// bound at a displacement of `64 eps (1 + |x*|) + kkt(r)` in x and z and
/// `64 eps (1 + |y*|) + kkt(r)` in y. Below this the computed value is noise
/// from the reference and the iterate, and consecutive ratios carry no
/// information.
pub fn evaluation_floor(problem: &CompositeProblem, steps: &StepSizes, r: &ReferenceSolution) -> f64 {
    let eps = f64::EPSILON;
    let dx = 64.0 * eps * (1.0 + vecops::norm(&r.x_star)) + r.kkt_residual;
    let l_f = problem.f().profile().map_or(0.0, |p| p.l);
    let mut floor = dx * dx / steps.eta_x + l_f * dx * dx / steps.eta_z;
    if let Some(ys) = &r.y_star {
        let dy = 64.0 * eps * (1.0 + vecops::norm(ys)) + r.kkt_residual;
        floor += dy * dy / steps.eta_y();
    }
    floor
}

fn g_residual(g: &FunctionHandle, x: &[f64], u: &[f64]) -> f64 {
    match g.kind() {
        FunctionKind::IndicatorPoint { point } => vecops::dist(x, point),
        _ => g.subgradient_distance(x, u).expect("dims checked"),
    }
}

/// Norm of the violation of the optimality system in `(x, y, z)`:
/// `-K*y - grad f(z)` in `dg(x)`, `y = prox_{h*}(y + Kx)`, `x = z`, and in the
/// constrained case `y` in `ran(K)`.
pub fn kkt_residual(problem: &CompositeProblem, s: &SolverState) -> f64 {
    let u = problem.f().gradient(&s.z).expect("smooth f");
    let mut total = vecops::dist(&s.x, &s.z).powi(2);
    match (problem.k(), problem.h(), s.y.as_deref()) {
        (Some(k), Some(h), Some(y)) => {
            let mut w = k.mul_vec_t(y);
            vecops::axpy(1.0, &u, &mut w);
            let neg = vecops::scale(-1.0, &w);
            total += g_residual(problem.g(), &s.x, &neg).powi(2);
            let v = vecops::add(y, &k.mul_vec(&s.x));
            let p = h.prox_conjugate(1.0, &v).expect("dims checked");
            total += vecops::dist(y, &p).powi(2);
            if problem.is_linearly_constrained() {
                total += problem.range_projector().expect("primal-dual").distance(y).powi(2);
            }
        }
        _ => {
            let neg = vecops::scale(-1.0, &u);
            total += g_residual(problem.g(), &s.x, &neg).powi(2);
        }
    }
    total.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub k: u64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub violations: Vec<Violation>,
    /// `theta = 1`: the bound is vacuous.
    pub no_linear_rate: bool,
    /// Records without a Lyapunov value were skipped.
    pub skipped: usize,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Violations whose value lies above `floor`.
    pub fn above_floor(&self, floor: f64) -> usize {
        self.violations.iter().filter(|v| v.value > floor).count()
    }

    pub fn note(&self) -> &'static str {
        if self.no_linear_rate {
            "no linear rate"
        } else if self.passed() {
            "ok"
        } else {
            "envelope violated"
        }
    }
}

/// Every `k` with `value_k > theta^k value_0 (1 + slack)`.
pub fn verify_contraction(trace: &[LyapunovRecord], theta: &RateBound, slack: f64) -> ContractionReport {
    let mut report = ContractionReport {
        violations: Vec::new(),
        no_linear_rate: theta.no_linear_rate,
        skipped: 0,
    };
    let Some(v0) = trace.first().and_then(|r| r.value) else {
        report.skipped = trace.len();
        return report;
    };
    for r in trace {
        let Some(v) = r.value else {
            report.skipped += 1;
            continue;
        };
        let bound = v0 * theta.theta.powf(r.k as f64) * (1.0 + slack);
        if v > bound {
            report.violations.push(Violation { k: r.k, value: v, bound });
        }
    }
    report
}

/// Every `k` with `value_{k+1} > theta value_k (1 + slack)`, reported at `k + 1`.
pub fn verify_per_step(trace: &[LyapunovRecord], theta: &RateBound, slack: f64) -> ContractionReport {
    let mut report = ContractionReport {
        violations: Vec::new(),
        no_linear_rate: theta.no_linear_rate,
        skipped: 0,
    };
    for pair in trace.windows(2) {
        match (pair[0].value, pair[1].value) {
            (Some(a), Some(b)) => {
                let bound = theta.theta * a * (1.0 + slack);
                if b > bound {
                    report.violations.push(Violation {
                        k: pair[1].k,
                        value: b,
                        bound,
                    });
                }
            }
            _ => report.skipped += 1,
        }
    }
    report
}

const WARM_CHUNK: u64 = 2000;
const MAX_ITERS: u64 = 1_000_000;

pub fn solve_reference(problem: &CompositeProblem, tol: f64) -> Result<ReferenceSolution, LyapunovError> {
    let n = problem.dim_x();
    let mut x = vec![0.0; n];
    let mut y = problem.dim_y().map(|m| vec![0.0; m]);
    let mut iterations = 0u64;
    let mut best = f64::INFINITY;
    loop {
        warm_iterations(problem, &mut x, y.as_mut(), WARM_CHUNK);
        iterations += WARM_CHUNK;
        let mut candidates = Vec::new();
        if let Some(sol) = polish(problem, &x, y.as_deref()) {
            candidates.push(sol);
        }
        candidates.push((x.clone(), y.clone()));
        for (cx, cy) in candidates {
            let cy = match (cy, problem.range_projector()) {
                (Some(v), Some(p)) if problem.is_linearly_constrained() => Some(p.project(&v)),
                (v, _) => v,
            };
            let state = SolverState {
                grad_z: problem.f().gradient(&cx).expect("smooth f"),
                x: cx.clone(),
                y: cy.clone(),
                z: cx.clone(),
                k: 0,
                calls: Default::default(),
            };
            let res = kkt_residual(problem, &state);
            best = best.min(res);
            if res <= tol {
                return Ok(ReferenceSolution {
                    z_star: cx.clone(),
                    x_star: cx,
                    y_star: cy,
                    kkt_residual: res,
                });
            }
        }
        if iterations >= MAX_ITERS {
            return Err(LyapunovError::NotConverged {
                iterations,
                residual: best,
                tol,
            });
        }
    }
}

/// Plain forward-backward (two-function) or Condat-Vu type primal-dual
/// iterations with conservative steps.
fn warm_iterations(problem: &CompositeProblem, x: &mut Vec<f64>, y: Option<&mut Vec<f64>>, iters: u64) {
    let f = problem.f();
    let g = problem.g();
    let l_f = f.profile().map_or(0.0, |p| p.l);
    match (problem.k(), problem.h(), y) {
        (Some(k), Some(h), Some(y)) => {
            let kn = problem.spectral().map_or(0.0, |s| s.op_norm).max(1e-300);
            let tau = 1.0 / (l_f + kn);
            let sigma = 1.0 / kn;
            for _ in 0..iters {
                let mut d = f.gradient(x).expect("smooth f");
                vecops::axpy(1.0, &k.mul_vec_t(y), &mut d);
                let xn = g.prox(tau, &vecops::lincomb(1.0, x, -tau, &d)).expect("prox");
                let kx = k.mul_vec(&vecops::reflect(&xn, x));
                let yn = h.prox_conjugate(sigma, &vecops::lincomb(1.0, y, sigma, &kx)).expect("prox");
                *x = xn;
                *y = yn;
            }
        }
        _ => {
            let tau = if l_f > 0.0 { 1.0 / l_f } else { 1.0 };
            for _ in 0..iters {
                let d = f.gradient(x).expect("smooth f");
                *x = g.prox(tau, &vecops::lincomb(1.0, x, -tau, &d)).expect("prox");
            }
        }
    }
}

/// Solve the optimality system on the active set read off `(x_hat, y_hat)`.
/// Returns `None` when a function kind is outside what the linear system can
/// express.
fn polish(problem: &CompositeProblem, x_hat: &[f64], y_hat: Option<&[f64]>) -> Option<(Vec<f64>, Option<Vec<f64>>)> {
    let n = problem.dim_x();
    let m = problem.dim_y().unwrap_or(0);
    let dim = n + m;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let (qf, lf, _) = problem.f().as_quadratic_form()?;

    // Stationarity rows: grad f(x) + grad_g(x) + K*y = 0 on free coordinates.
    let set_stationarity = |i: usize, extra_diag: f64, extra_rhs: f64, a: &mut DMatrix<f64>, rhs: &mut DVector<f64>| {
        for j in 0..n {
            a[(i, j)] = qf.get(i, j);
        }
        a[(i, i)] += extra_diag;
        if let Some(k) = problem.k() {
            for r in 0..m {
                a[(i, n + r)] = k.get(r, i);
            }
        }
        rhs[i] = lf[i] + extra_rhs;
    };
    match problem.g().kind() {
        FunctionKind::L1 { .. } | FunctionKind::ElasticReg { .. } => {
            let (mu, lambda) = match problem.g().kind() {
                FunctionKind::L1 { lambda } => (0.0, *lambda),
                FunctionKind::ElasticReg { mu, lambda } => (*mu, *lambda),
                _ => unreachable!(),
            };
            for i in 0..n {
                if x_hat[i] == 0.0 {
                    a[(i, i)] = 1.0;
                } else {
                    set_stationarity(i, mu, -lambda * x_hat[i].signum(), &mut a, &mut rhs);
                }
            }
        }
        FunctionKind::IndicatorPoint { point } => {
            for i in 0..n {
                a[(i, i)] = 1.0;
                rhs[i] = point[i];
            }
        }
        _ => {
            let (qg, lg, _) = problem.g().as_quadratic_form()?;
            for i in 0..n {
                set_stationarity(i, 0.0, lg[i], &mut a, &mut rhs);
                for j in 0..n {
                    a[(i, j)] += qg.get(i, j);
                }
            }
        }
    }

    // Dual rows: y in dh(Kx).
    if let (Some(k), Some(h), Some(y_hat)) = (problem.k(), problem.h(), y_hat) {
        for r in 0..m {
            let row = n + r;
            let kx_row = |a: &mut DMatrix<f64>, scale: f64| {
                for j in 0..n {
                    a[(row, j)] += scale * k.get(r, j);
                }
            };
            match h.kind() {
                FunctionKind::IndicatorPoint { point } => {
                    kx_row(&mut a, 1.0);
                    rhs[row] = point[r];
                }
                FunctionKind::Zero => {
                    a[(row, row)] = 1.0;
                }
                FunctionKind::LinearFunc { b } => {
                    a[(row, row)] = 1.0;
                    rhs[row] = b[r];
                }
                FunctionKind::L1 { lambda } | FunctionKind::ElasticReg { lambda, .. } => {
                    let mu = match h.kind() {
                        FunctionKind::ElasticReg { mu, .. } => *mu,
                        _ => 0.0,
                    };
                    if y_hat[r].abs() < *lambda {
                        kx_row(&mut a, 1.0);
                    } else {
                        a[(row, row)] = 1.0;
                        kx_row(&mut a, -mu);
                        rhs[row] = lambda * y_hat[r].signum();
                    }
                }
                _ => {
                    // Quadratic-type h: y = Q_h K x - q_h.
                    let (qh, lh, _) = h.as_quadratic_form()?;
                    a[(row, row)] = 1.0;
                    for c in 0..m {
                        let w = qh.get(r, c);
                        if w != 0.0 {
                            for j in 0..n {
                                a[(row, j)] -= w * k.get(c, j);
                            }
                        }
                    }
                    rhs[row] = -lh[r];
                }
            }
        }
    }

    let svd = a.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max();
    let sol = svd.solve(&rhs, eps).ok()?;
    let x: Vec<f64> = sol.rows(0, n).iter().copied().collect();
    if !vecops::all_finite(&x) {
        return None;
    }
    let y = (m > 0).then(|| sol.rows(n, m).iter().copied().collect::<Vec<f64>>());
    Some((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::LinearMap;
    use crate::rng::SeededRng;
    use crate::solvers::init;

    #[test]
    fn unconstrained_quadratic_reference() {
        let c = vec![1.0, -2.0, 0.5];
        let p = CompositeProblem::two_function(
            FunctionHandle::scaled_sq_norm(1.0, c.clone()).unwrap(),
            FunctionHandle::zero(3),
        )
        .unwrap();
        let r = solve_reference(&p, 1e-12).unwrap();
        assert!(vecops::max_abs_diff(&r.x_star, &c) < 1e-14);
        assert!(r.kkt_residual <= 1e-12);
    }

    #[test]
    fn point_constraint_reference() {
        let b = vec![0.7];
        let p = CompositeProblem::primal_dual(
            FunctionHandle::scaled_sq_norm(1.0, vec![0.0]).unwrap(),
            FunctionHandle::zero(1),
            FunctionHandle::indicator_point(b.clone()),
            LinearMap::identity(1),
        )
        .unwrap();
        let r = solve_reference(&p, 1e-12).unwrap();
        assert!((r.x_star[0] - 0.7).abs() < 1e-14);
        assert!((r.y_star.as_ref().unwrap()[0] + 0.7).abs() < 1e-14);
    }

    #[test]
    fn lasso_like_reference_has_tiny_residual() {
        let mut rng = SeededRng::new(77);
        let a = LinearMap::random(8, 6, &mut rng);
        let f = FunctionHandle::least_squares(&a, &rng.vector(8)).unwrap();
        let g = FunctionHandle::elastic_reg(1.0, 0.3, 6).unwrap();
        let p = CompositeProblem::two_function(f, g).unwrap();
        let r = solve_reference(&p, 1e-12).unwrap();
        assert!(r.kkt_residual <= 1e-12);
        // x* = prox_g(x* - grad f(x*))
        let grad = p.f().gradient(&r.x_star).unwrap();
        let fixed = p.g().prox(1.0, &vecops::sub(&r.x_star, &grad)).unwrap();
        assert!(vecops::max_abs_diff(&fixed, &r.x_star) <= 1e-10);
    }

    #[test]
    fn nonsmooth_h_reference() {
        let mut rng = SeededRng::new(5);
        let a = LinearMap::random(6, 6, &mut rng);
        let f = FunctionHandle::least_squares(&a, &rng.vector(6)).unwrap();
        let g = FunctionHandle::scaled_sq_norm(1.0, rng.vector(6)).unwrap();
        let h = FunctionHandle::l1(0.2, 4).unwrap();
        let k = LinearMap::random(4, 6, &mut rng);
        let p = CompositeProblem::primal_dual(f, g, h, k).unwrap();
        let r = solve_reference(&p, 1e-12).unwrap();
        assert!(r.kkt_residual <= 1e-12, "{}", r.kkt_residual);
    }

    #[test]
    fn phi_scalar_hand_evaluation() {
        // f = x^2/2, eta_x = eta_z = 1, x = z = 1, x* = z* = 0, APGD signs:
        // 1/2 + 1/2 - 1 = 0.
        let p = CompositeProblem::two_function(
            FunctionHandle::scaled_sq_norm(1.0, vec![0.0]).unwrap(),
            FunctionHandle::zero(1),
        )
        .unwrap();
        let r = ReferenceSolution {
            x_star: vec![0.0],
            y_star: None,
            z_star: vec![0.0],
            kkt_residual: 0.0,
        };
        let s = init(&p, AlgorithmId::Apgd, &[1.0], None, None).unwrap();
        let st = StepSizes::two_function(1.0, 1.0);
        assert_eq!(phi(&p, &st, &s, &r, SignPattern::for_algorithm(AlgorithmId::Apgd)), 0.0);
        assert_eq!(phi(&p, &st, &s, &r, SignPattern::for_algorithm(AlgorithmId::Apge)), 2.0);
        assert_eq!(phi(&p, &st, &r.as_state(&p), &r, SignPattern::for_algorithm(AlgorithmId::Apgd)), 0.0);
    }

    #[test]
    fn sign_table() {
        let pairs: Vec<(i8, i8)> = AlgorithmId::ACCELERATED_PD
            .iter()
            .map(|a| {
                let s = SignPattern::for_algorithm(*a);
                (s.s_ky, s.s_fz)
            })
            .collect();
        assert_eq!(pairs, vec![(-1, -1), (1, -1), (-1, 1), (1, 1)]);
        assert_eq!(SignPattern::for_algorithm(AlgorithmId::Apgd).s_fz, -1);
        assert_eq!(SignPattern::for_algorithm(AlgorithmId::Apge).s_fz, 1);
    }

    #[test]
    fn kkt_residual_grows_linearly_with_perturbation() {
        let mut rng = SeededRng::new(8);
        let a = LinearMap::random(5, 4, &mut rng);
        let f = FunctionHandle::least_squares(&a, &rng.vector(5)).unwrap();
        let g = FunctionHandle::scaled_sq_norm(1.0, vec![0.0; 4]).unwrap();
        let h = FunctionHandle::scaled_sq_norm(2.0, rng.vector(3)).unwrap();
        let k = LinearMap::random(3, 4, &mut rng);
        let p = CompositeProblem::primal_dual(f, g, h, k).unwrap();
        let r = solve_reference(&p, 1e-12).unwrap();
        let dir = rng.vector(4);
        let at = |delta: f64| {
            let mut s = r.as_state(&p);
            vecops::axpy(delta, &dir, &mut s.x);
            s.z = s.x.clone();
            s.grad_z = p.f().gradient(&s.z).unwrap();
            kkt_residual(&p, &s)
        };
        let ratio = at(1e-3) / at(1e-4);
        assert!((ratio - 10.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn verify_detects_inflated_record() {
        let theta = RateBound {
            theta: 0.5,
            components: vec![],
            no_linear_rate: false,
        };
        let mut trace: Vec<LyapunovRecord> = (0..10)
            .map(|k| LyapunovRecord {
                k,
                value: Some(0.4f64.powi(k as i32)),
                envelope: None,
                kkt: 0.0,
                wall_ns: 0,
            })
            .collect();
        assert!(verify_contraction(&trace, &theta, 1e-7).passed());
        assert!(verify_per_step(&trace, &theta, 1e-7).passed());
        trace[6].value = Some(1.0);
        let rep = verify_contraction(&trace, &theta, 1e-7);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].k, 6);
        let vac = RateBound {
            theta: 1.0,
            components: vec![],
            no_linear_rate: true,
        };
        trace[6].value = Some(0.9);
        let rep = verify_contraction(&trace, &vac, 1e-7);
        assert!(rep.passed() && rep.note() == "no linear rate");
    }
}
