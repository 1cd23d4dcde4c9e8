//! The harness commands. Every command first generates all instances and
//! resolves all stepsizes, so infeasible settings are refused before any
//! iteration runs.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::linops::{spectral_summary, LinearMap, SpectralSummary};
use crate::lyapunov::{evaluation_floor, solve_reference, verify_contraction, LyapunovRecord, ReferenceSolution};
use crate::parallel::Execution;
use crate::rng::SeededRng;
use crate::solvers::{init, run, step, AlgorithmId, CompositeProblem, Monitor, SolverError, SolverState, StopRule};
use crate::tuning::{
    check_feasible, complexity_factor, stepsizes_for, theta_for, Constants, RateBound, Regime, StepSizes, TuningError,
};
use crate::vecops;

use super::config::ExperimentConfig;
use super::generate::{generate_problem, ProblemSpec};
use super::trace::{StepSource, TraceFile, TraceMeta};
use super::BenchError;

/// Stream for starting points, kept apart from the generator stream.
const START_STREAM: u64 = 0x5354_4152_5450_5453;

pub struct Instance {
    pub seed: u64,
    pub problem: CompositeProblem,
    pub constants: Constants,
    pub reference: ReferenceSolution,
    pub x0: Vec<f64>,
    pub y0: Option<Vec<f64>>,
}

impl Instance {
    pub fn build(spec: &ProblemSpec, reference_tol: f64) -> Result<Self, BenchError> {
        let problem = generate_problem(spec)?;
        Self::from_problem(problem, spec.seed, reference_tol)
    }

    pub fn from_problem(problem: CompositeProblem, seed: u64, reference_tol: f64) -> Result<Self, BenchError> {
        let reference =
            solve_reference(&problem, reference_tol).map_err(|source| BenchError::Reference { seed, source })?;
        let mut rng = SeededRng::new(seed ^ START_STREAM);
        let x0 = rng.vector(problem.dim_x());
        let y0 = problem.dim_y().map(|m| rng.vector(m));
        Ok(Self {
            seed,
            constants: problem.constants(),
            problem,
            reference,
            x0,
            y0,
        })
    }

    /// Initial state at the seeded starting point, with `z0 = x0`.
    pub fn start(&self, alg: AlgorithmId) -> Result<SolverState, SolverError> {
        init(&self.problem, alg, &self.x0, self.y0.as_deref(), None)
    }
}

fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.run.instances).map(|i| cfg.problem.seed + i).collect()
}

pub fn build_instances(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<Instance>, BenchError> {
    let specs: Vec<ProblemSpec> = seeds(cfg)
        .into_iter()
        .map(|seed| ProblemSpec {
            seed,
            ..cfg.problem.clone()
        })
        .collect();
    exec.map(&specs, |s| Instance::build(s, cfg.run.reference_tol))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedSteps {
    pub steps: StepSizes,
    pub source: StepSource,
    /// Only for the accelerated methods.
    pub theta: Option<RateBound>,
}

/// The default rule evaluated with `mu_g` replaced by `L_f`. The stepsize
/// constraints do not involve `mu_g`, so the result is feasible; the rate
/// computed from the true `mu_g = 0` is then 1.
fn fallback_steps(regime: Regime, c: &Constants) -> Result<StepSizes, TuningError> {
    let mut s = *c;
    s.mu_g = c.l_f;
    s.l_g = Some(c.l_g.unwrap_or(0.0).max(s.mu_g));
    stepsizes_for(regime, &s)
}

/// Conventional stepsizes for the non-accelerated methods.
fn baseline_steps(alg: AlgorithmId, regime: Regime, c: &Constants) -> StepSizes {
    let l = if c.l_f > 0.0 { c.l_f } else { 1.0 };
    let k = if c.k_norm > 0.0 { c.k_norm } else { 1.0 };
    match alg {
        AlgorithmId::Pgd => StepSizes::two_function(1.0 / l, 1.0),
        AlgorithmId::Frb => StepSizes::two_function(0.25 / l, 1.0),
        AlgorithmId::Cv1 | AlgorithmId::Cv2 => StepSizes::primal_dual(1.0 / (l + k), 1.0 / k, 1.0, regime),
        AlgorithmId::Pdtr1 | AlgorithmId::Pdtr2 => {
            StepSizes::primal_dual(0.25 / (l + k), 0.25 / k, 1.0, regime)
        }
        AlgorithmId::Cp => StepSizes::primal_dual(0.99 / k, 0.99 / k, 1.0, regime),
        _ => unreachable!("accelerated methods use the regime rule"),
    }
}

/// Stepsizes for `alg` under the config, with overrides applied and, for the
/// accelerated methods, the regime constraint checked.
pub fn resolve_steps(cfg: &ExperimentConfig, alg: AlgorithmId, c: &Constants) -> Result<ResolvedSteps, BenchError> {
    let regime = cfg.regime();
    let infeasible = |source| BenchError::Infeasible { alg, source };
    let (mut steps, mut source) = if !alg.is_accelerated() {
        (baseline_steps(alg, regime, c), StepSource::Baseline)
    } else if c.mu_g > 0.0 {
        (stepsizes_for(regime, c).map_err(infeasible)?, StepSource::Corollary)
    } else {
        (fallback_steps(regime, c).map_err(infeasible)?, StepSource::Fallback)
    };
    let run = &cfg.run;
    if run.has_overrides() {
        steps.eta_x = run.eta_x.unwrap_or(steps.eta_x) * run.eta_x_scale;
        if run.eta_y.is_some() {
            steps.eta_y = run.eta_y;
        }
        steps.eta_z = run.eta_z.unwrap_or(steps.eta_z);
        source = StepSource::Override;
    }
    let theta = if alg.is_accelerated() {
        check_feasible(&steps, c).map_err(infeasible)?;
        Some(theta_for(&steps, c))
    } else {
        None
    };
    Ok(ResolvedSteps { steps, source, theta })
}

struct Job {
    instance: usize,
    alg: AlgorithmId,
    steps: ResolvedSteps,
}

/// Generates problems, resolves stepsizes for every (instance, algorithm),
/// then solves for the references.
fn plan(cfg: &ExperimentConfig, exec: Execution) -> Result<(Vec<Instance>, Vec<Job>), BenchError> {
    let seeds = seeds(cfg);
    let problems: Vec<CompositeProblem> = exec
        .map(&seeds, |&seed| {
            generate_problem(&ProblemSpec {
                seed,
                ..cfg.problem.clone()
            })
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    let mut jobs = Vec::new();
    for (i, p) in problems.iter().enumerate() {
        let c = p.constants();
        for alg in cfg.algorithms() {
            jobs.push(Job {
                instance: i,
                alg,
                steps: resolve_steps(cfg, alg, &c)?,
            });
        }
    }
    let pairs: Vec<(CompositeProblem, u64)> = problems.into_iter().zip(seeds).collect();
    let instances = exec
        .map(&pairs, |(p, seed)| Instance::from_problem(p.clone(), *seed, cfg.run.reference_tol))
        .into_iter()
        .collect::<Result<_, _>>()?;
    Ok((instances, jobs))
}

pub fn run_trace(
    cfg: &ExperimentConfig,
    inst: &Instance,
    alg: AlgorithmId,
    rs: &ResolvedSteps,
    stop: &StopRule,
) -> Result<TraceFile, BenchError> {
    let solver_err = |source| BenchError::Solver {
        alg,
        seed: inst.seed,
        source,
    };
    let state = inst.start(alg).map_err(solver_err)?;
    let monitor = Monitor {
        reference: Some(&inst.reference),
        theta: rs.theta.as_ref().map(|t| t.theta),
        timing: cfg.run.timing,
    };
    let (_, records) = run(&inst.problem, alg, &rs.steps, state, stop, &monitor).map_err(solver_err)?;
    let floor = evaluation_floor(&inst.problem, &rs.steps, &inst.reference);
    let envelope_violations = rs
        .theta
        .as_ref()
        .map(|t| verify_contraction(&records, t, cfg.run.slack).above_floor(floor));
    let meta = TraceMeta {
        algorithm: alg,
        regime: cfg.regime(),
        seed: inst.seed,
        iterations: records.last().map_or(0, |r| r.k),
        stepsizes: rs.steps,
        step_source: rs.source,
        no_linear_rate: rs.theta.as_ref().is_some_and(|t| t.no_linear_rate),
        theta: rs.theta.clone(),
        constants: inst.constants,
        reference_kkt: inst.reference.kkt_residual,
        evaluation_floor: floor,
        final_kkt: records.last().map_or(f64::NAN, |r| r.kkt),
        envelope_violations,
        artifact_choices: true,
        timing: cfg.run.timing,
    };
    Ok(TraceFile { meta, records })
}

fn run_all(
    cfg: &ExperimentConfig,
    exec: Execution,
    out: Option<&Path>,
) -> Result<(Vec<Job>, Vec<TraceFile>), BenchError> {
    let (instances, jobs) = plan(cfg, exec)?;
    let stop = StopRule::iterations(cfg.run.max_iters);
    let traces: Vec<TraceFile> = exec
        .map(&jobs, |j| run_trace(cfg, &instances[j.instance], j.alg, &j.steps, &stop))
        .into_iter()
        .collect::<Result<_, _>>()?;
    if let Some(dir) = out {
        for t in &traces {
            t.write(dir)?;
        }
    }
    Ok((jobs, traces))
}

/// One trace per (instance, algorithm), written to `out` when given.
pub fn cmd_run(cfg: &ExperimentConfig, exec: Execution, out: Option<&Path>) -> Result<Vec<TraceFile>, BenchError> {
    run_all(cfg, exec, out).map(|(_, t)| t)
}

/// First `k` with `value_k <= eps * value_0`.
pub fn iterations_to(records: &[LyapunovRecord], eps: f64) -> Option<u64> {
    let v0 = records.first()?.value?;
    records.iter().find(|r| r.value.is_some_and(|v| v <= eps * v0)).map(|r| r.k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub algorithm: AlgorithmId,
    pub theta: Option<f64>,
    pub no_linear_rate: bool,
    /// Worst case over instances; `None` if some instance did not get there.
    pub iterations_to_eps: Option<u64>,
    pub predicted: Option<u64>,
    pub envelope_violations: Option<usize>,
    pub first_violation: Option<(u64, u64)>,
    pub final_kkt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionCheck {
    pub name: &'static str,
    pub max_diff: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    pub reductions: Vec<ReductionCheck>,
    pub epsilon: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.first_failure().is_none()
    }

    pub fn first_failure(&self) -> Option<String> {
        for r in &self.rows {
            if let Some((seed, k)) = r.first_violation {
                return Some(format!("{} violates its envelope at k = {k} (seed {seed})", r.algorithm));
            }
        }
        self.reductions
            .iter()
            .find(|c| !c.passed)
            .map(|c| format!("reduction {} differs by {:e}", c.name, c.max_diff))
    }

    pub fn render(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>10} {:>10} {:>12}  note",
            "alg",
            "theta",
            format!("iters@{:.0e}", self.epsilon),
            "predicted",
            "env.viol",
            "final kkt"
        );
        for r in &self.rows {
            let note = match (r.no_linear_rate, r.envelope_violations) {
                (true, _) => "no linear rate",
                (_, None) => "baseline",
                (_, Some(0)) => "ok",
                _ => "envelope violated",
            };
            let _ = writeln!(
                s,
                "{:<8} {:>10} {:>10} {:>10} {:>10} {:>12.3e}  {note}",
                r.algorithm.as_str(),
                opt(r.theta.map(|t| format!("{t:.6}"))),
                opt(r.iterations_to_eps.map(|v| v.to_string())),
                opt(r.predicted.map(|v| v.to_string())),
                opt(r.envelope_violations.map(|v| v.to_string())),
                r.final_kkt,
            );
        }
        for c in &self.reductions {
            let _ = writeln!(
                s,
                "reduction {:<12} max diff {:.3e}  {}",
                c.name,
                c.max_diff,
                if c.passed { "ok" } else { "FAILED" }
            );
        }
        s
    }
}

/// Runs every configured algorithm, checks the contraction envelopes and
/// the reduction identities.
pub fn cmd_verify(cfg: &ExperimentConfig, exec: Execution, out: Option<&Path>) -> Result<VerifyReport, BenchError> {
    let (jobs, traces) = run_all(cfg, exec, out)?;
    let eps = cfg.run.epsilon;
    let mut rows: Vec<VerifyRow> = Vec::new();
    for (job, t) in jobs.iter().zip(&traces) {
        let floor = t.meta.evaluation_floor;
        let report = job
            .steps
            .theta
            .as_ref()
            .map(|th| verify_contraction(&t.records, th, cfg.run.slack));
        let reached = iterations_to(&t.records, eps);
        let first = report
            .as_ref()
            .and_then(|r| r.violations.iter().find(|v| v.value > floor))
            .map(|v| (t.meta.seed, v.k));
        let idx = match rows.iter().position(|r| r.algorithm == job.alg) {
            Some(i) => i,
            None => {
                rows.push(VerifyRow {
                    algorithm: job.alg,
                    theta: job.steps.theta.as_ref().map(|th| th.theta),
                    no_linear_rate: t.meta.no_linear_rate,
                    iterations_to_eps: reached,
                    predicted: job.steps.theta.as_ref().and_then(|th| th.predicted_iterations(eps)),
                    envelope_violations: report.as_ref().map(|_| 0),
                    first_violation: None,
                    final_kkt: 0.0,
                });
                rows.len() - 1
            }
        };
        let row = &mut rows[idx];
        if let Some(th) = &job.steps.theta {
            row.theta = row.theta.map(|v| v.max(th.theta));
            row.predicted = row.predicted.max(th.predicted_iterations(eps));
        }
        row.iterations_to_eps = match (row.iterations_to_eps, reached) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        if let (Some(n), Some(r)) = (row.envelope_violations.as_mut(), report.as_ref()) {
            *n += r.above_floor(floor);
        }
        row.first_violation = row.first_violation.or(first);
        row.final_kkt = row.final_kkt.max(t.meta.final_kkt);
    }
    let reductions = reduction_suite(cfg.problem.seed, cfg.problem.dim_x)?;
    Ok(VerifyReport {
        rows,
        reductions,
        epsilon: eps,
    })
}

pub const REDUCTION_TOL: f64 = 1e-12;
pub const REDUCTION_ITERS: u64 = 50;

/// Runs each accelerated method with `z0 = x0`, `eta_z = 1` next to the
/// method it reduces to and records the largest coordinate difference.
pub fn reduction_suite(seed: u64, dim_x: usize) -> Result<Vec<ReductionCheck>, BenchError> {
    let two = generate_problem(&ProblemSpec::new(Regime::TwoFunction, dim_x, seed, 10.0))?;
    let pd = generate_problem(&ProblemSpec::new(Regime::SmoothH, dim_x, seed, 10.0))?;
    let c2 = two.constants();
    let cp = pd.constants();
    let steps_two = StepSizes::two_function(1.0 / c2.l_f, 1.0);
    let steps_pd = StepSizes::primal_dual(1.0 / (cp.l_f + cp.k_norm), 1.0 / cp.k_norm, 1.0, Regime::SmoothH);
    let cases = [
        ("APGD=PGD", AlgorithmId::Apgd, AlgorithmId::Pgd, &two, &steps_two),
        ("ACV1=CV1", AlgorithmId::Acv1, AlgorithmId::Cv1, &pd, &steps_pd),
        ("ACV2=CV2", AlgorithmId::Acv2, AlgorithmId::Cv2, &pd, &steps_pd),
    ];
    let mut rng = SeededRng::new(seed ^ START_STREAM);
    let mut out = Vec::new();
    for (name, acc, base, p, steps) in cases {
        let x0 = rng.vector(p.dim_x());
        let y0 = p.dim_y().map(|m| rng.vector(m));
        let max_diff = reduction_gap(p, acc, base, steps, &x0, y0.as_deref(), REDUCTION_ITERS).map_err(|source| {
            BenchError::Solver {
                alg: acc,
                seed,
                source,
            }
        })?;
        out.push(ReductionCheck {
            name,
            max_diff,
            passed: max_diff <= REDUCTION_TOL,
        });
    }
    Ok(out)
}

/// Largest per-coordinate gap in `x` and `y` between two methods over
/// `iters` steps from the same start.
pub fn reduction_gap(
    p: &CompositeProblem,
    a: AlgorithmId,
    b: AlgorithmId,
    steps: &StepSizes,
    x0: &[f64],
    y0: Option<&[f64]>,
    iters: u64,
) -> Result<f64, SolverError> {
    let mut sa = init(p, a, x0, y0, Some(x0))?;
    let mut sb = init(p, b, x0, y0, Some(x0))?;
    let mut worst = 0.0f64;
    for _ in 0..iters {
        sa = step(p, a, steps, &sa)?;
        sb = step(p, b, steps, &sb)?;
        worst = worst.max(vecops::max_abs_diff(&sa.x, &sb.x));
        if let (Some(ya), Some(yb)) = (&sa.y, &sb.y) {
            worst = worst.max(vecops::max_abs_diff(ya, yb));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesRow {
    pub value: f64,
    pub algorithm: AlgorithmId,
    pub theta: f64,
    pub predicted: Option<u64>,
    /// Worst case over instances; `None` if the budget ran out.
    pub measured: Option<u64>,
    /// Complexity factor times `log(1/eps)`.
    pub trend: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesReport {
    pub parameter: &'static str,
    pub rows: Vec<RatesRow>,
    pub growth_factor: f64,
    pub failures: Vec<String>,
}

impl RatesReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn base(&self, alg: AlgorithmId) -> Option<&RatesRow> {
        self.rows.iter().find(|r| r.algorithm == alg)
    }

    /// `(measured / measured_0, trend / trend_0)` against the first sweep value.
    pub fn ratios(&self, r: &RatesRow) -> (Option<f64>, Option<f64>) {
        let b = self.base(r.algorithm).expect("row belongs to report");
        let m = match (r.measured, b.measured) {
            (Some(a), Some(z)) if z > 0 => Some(a as f64 / z as f64),
            _ => None,
        };
        let t = match (r.trend, b.trend) {
            (Some(a), Some(z)) if z > 0.0 => Some(a / z),
            _ => None,
        };
        (m, t)
    }

    pub fn to_csv(&self) -> Result<String, BenchError> {
        #[derive(Serialize)]
        struct Line<'a> {
            parameter: &'a str,
            value: f64,
            algorithm: &'a str,
            theta: f64,
            predicted: Option<u64>,
            measured: Option<u64>,
            trend: Option<f64>,
            measured_ratio: Option<f64>,
            trend_ratio: Option<f64>,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            let (measured_ratio, trend_ratio) = self.ratios(r);
            w.serialize(Line {
                parameter: self.parameter,
                value: r.value,
                algorithm: r.algorithm.as_str(),
                theta: r.theta,
                predicted: r.predicted,
                measured: r.measured,
                trend: r.trend,
                measured_ratio,
                trend_ratio,
            })
            .map_err(|e| BenchError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn render(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>12} {:<8} {:>10} {:>10} {:>10} {:>10} {:>10}",
            self.parameter, "alg", "theta", "predicted", "measured", "meas.x", "trend.x"
        );
        for r in &self.rows {
            let (m, t) = self.ratios(r);
            let _ = writeln!(
                s,
                "{:>12} {:<8} {:>10.6} {:>10} {:>10} {:>10} {:>10}",
                r.value,
                r.algorithm.as_str(),
                r.theta,
                opt(r.predicted.map(|v| v.to_string())),
                opt(r.measured.map(|v| v.to_string())),
                opt(m.map(|v| format!("{v:.3}"))),
                opt(t.map(|v| format!("{v:.3}"))),
            );
        }
        for f in &self.failures {
            let _ = writeln!(s, "FAILED: {f}");
        }
        s
    }
}

/// Iterations to `epsilon` across a conditioning or `lambda_min` sweep,
/// against the predicted counts; growth relative to the first sweep value
/// may exceed the predicted trend by at most `growth_factor`.
pub fn cmd_rates(cfg: &ExperimentConfig, exec: Execution) -> Result<RatesReport, BenchError> {
    let rates = cfg
        .rates
        .clone()
        .ok_or_else(|| BenchError::Config("rates needs a [rates] section".into()))?;
    let (parameter, values) = if rates.conditioning.is_empty() {
        ("lambda_min", rates.lambda_min.clone())
    } else {
        ("conditioning", rates.conditioning.clone())
    };
    let eps = cfg.run.epsilon;
    let swept: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            if parameter == "conditioning" {
                c.problem.conditioning = v;
            } else {
                c.problem.lambda_min = v;
            }
            c
        })
        .collect();
    let mut planned = Vec::new();
    for c in &swept {
        planned.push(plan(c, exec)?);
    }
    let stop = StopRule {
        max_iters: rates.max_iters,
        kkt_tol: None,
        lyapunov_rel_tol: Some(eps),
    };
    let mut tasks = Vec::new();
    for (si, (_, jobs)) in planned.iter().enumerate() {
        for ji in 0..jobs.len() {
            tasks.push((si, ji));
        }
    }
    let traces: Vec<TraceFile> = exec
        .map(&tasks, |&(si, ji)| {
            let (instances, jobs) = &planned[si];
            let j = &jobs[ji];
            run_trace(&swept[si], &instances[j.instance], j.alg, &j.steps, &stop)
        })
        .into_iter()
        .collect::<Result<_, _>>()?;

    let mut rows: Vec<RatesRow> = Vec::new();
    for (&(si, ji), t) in tasks.iter().zip(&traces) {
        let (instances, jobs) = &planned[si];
        let j = &jobs[ji];
        let theta = j.steps.theta.as_ref().map_or(f64::NAN, |th| th.theta);
        let predicted = j.steps.theta.as_ref().and_then(|th| th.predicted_iterations(eps));
        let trend = complexity_factor(cfg.regime(), &instances[j.instance].constants).map(|f| f * (1.0 / eps).ln());
        let measured = iterations_to(&t.records, eps);
        let value = values[si];
        match rows.iter_mut().find(|r| r.value == value && r.algorithm == j.alg) {
            Some(r) => {
                r.theta = r.theta.max(theta);
                r.predicted = r.predicted.max(predicted);
                r.measured = r.measured.zip(measured).map(|(a, b)| a.max(b));
                r.trend = r.trend.zip(trend).map(|(a, b)| a.max(b));
            }
            None => rows.push(RatesRow {
                value,
                algorithm: j.alg,
                theta,
                predicted,
                measured,
                trend,
            }),
        }
    }
    let mut report = RatesReport {
        parameter,
        rows,
        growth_factor: rates.growth_factor,
        failures: Vec::new(),
    };
    let mut failures = Vec::new();
    for r in &report.rows {
        match report.ratios(r) {
            (Some(m), Some(t)) if m <= rates.growth_factor * t => {}
            (Some(m), Some(t)) => failures.push(format!(
                "{} at {parameter} = {}: measured growth {m:.3} exceeds {} x predicted growth {t:.3}",
                r.algorithm, r.value, rates.growth_factor
            )),
            (None, _) if r.measured.is_none() => failures.push(format!(
                "{} at {parameter} = {}: did not reach {eps:e} within {} iterations",
                r.algorithm, r.value, rates.max_iters
            )),
            _ => failures.push(format!(
                "{} at {parameter} = {}: no predicted trend (mu_g = 0?)",
                r.algorithm, r.value
            )),
        }
    }
    report.failures = failures;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectraReport {
    pub rows: usize,
    pub cols: usize,
    pub summary: SpectralSummary,
}

impl SpectraReport {
    pub fn render(&self) -> String {
        let pos = self
            .summary
            .lambda_min_pos
            .map_or_else(|| "-".to_string(), |v| format!("{v:.12e}"));
        format!(
            "shape          {} x {}\nop_norm        {:.12e}\nlambda_min     {:.12e}\nlambda_min_pos {pos}\n",
            self.rows, self.cols, self.summary.op_norm, self.summary.lambda_min
        )
    }
}

pub fn cmd_spectra(path: &Path) -> Result<SpectraReport, BenchError> {
    let k = LinearMap::load(path)?;
    let summary = spectral_summary(&k, 1e-12)?;
    Ok(SpectraReport {
        rows: k.rows(),
        cols: k.cols(),
        summary,
    })
}
