//! Stepsize rules per regime, feasibility checks of the stepsize constraints
//! and contraction factors.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    TwoFunction,
    SmoothH,
    NonsmoothH,
    LinearConstraint,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::TwoFunction,
        Regime::SmoothH,
        Regime::NonsmoothH,
        Regime::LinearConstraint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::TwoFunction => "two_function",
            Regime::SmoothH => "smooth_h",
            Regime::NonsmoothH => "nonsmooth_h",
            Regime::LinearConstraint => "linear_constraint",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown regime {s:?}"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuningError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{0} stepsizes require strong convexity of g (mu_g > 0)")]
    StrongConvexityRequired(Regime),
    #[error("nonsmooth_h stepsizes require lambda_min(KK*) > 0")]
    LambdaMinZero,
    #[error("linear_constraint stepsizes require lambda_min_pos(KK*) > 0")]
    LambdaMinPosZero,
    #[error("L_g = {l_g} must be at least mu_g = {mu_g}")]
    SmoothnessBelowStrongConvexity { l_g: f64, mu_g: f64 },
    #[error("regime {0} needs a dual stepsize eta_y")]
    MissingEtaY(Regime),
    #[error("stepsizes violate the {regime} constraint {constraint}: lhs = {lhs} > 1")]
    Infeasible {
        regime: Regime,
        constraint: &'static str,
        lhs: f64,
    },
}

/// Problem constants consumed by the stepsize rules.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Constants {
    pub l_f: f64,
    pub mu_f: f64,
    pub mu_g: f64,
    pub l_g: Option<f64>,
    pub mu_hstar: f64,
    pub k_norm: f64,
    pub lambda_min: f64,
    pub lambda_min_pos: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub eta_x: f64,
    pub eta_y: Option<f64>,
    pub eta_z: f64,
    pub regime: Regime,
}

impl StepSizes {
    pub fn two_function(eta_x: f64, eta_z: f64) -> Self {
        Self {
            eta_x,
            eta_y: None,
            eta_z,
            regime: Regime::TwoFunction,
        }
    }

    pub fn primal_dual(eta_x: f64, eta_y: f64, eta_z: f64, regime: Regime) -> Self {
        Self {
            eta_x,
            eta_y: Some(eta_y),
            eta_z,
            regime,
        }
    }

    /// Dual stepsize; panics for two-function stepsizes.
    pub fn eta_y(&self) -> f64 {
        self.eta_y.expect("primal-dual stepsizes carry eta_y")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaComponent {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub theta: f64,
    pub components: Vec<ThetaComponent>,
    /// Set when `theta = 1`: the theorem then gives no linear rate.
    pub no_linear_rate: bool,
}

impl RateBound {
    fn from_components(parts: &[(&str, f64)]) -> Self {
        let components: Vec<ThetaComponent> = parts
            .iter()
            .map(|(label, value)| ThetaComponent {
                label: (*label).to_string(),
                value: *value,
            })
            .collect();
        let theta = components.iter().fold(0.0f64, |m, c| m.max(c.value));
        Self {
            theta,
            no_linear_rate: theta >= 1.0,
            components,
        }
    }

    pub fn component(&self, label: &str) -> Option<f64> {
        self.components.iter().find(|c| c.label == label).map(|c| c.value)
    }

    /// Iterations after which `theta^k <= eps` is guaranteed.
    pub fn predicted_iterations(&self, eps: f64) -> Option<u64> {
        predicted_iterations(self.theta, eps)
    }
}

/// `ceil(log(1/eps) / (1 - theta))`, which bounds the smallest `k` with
/// `theta^k <= eps` because `theta^k <= exp(-k (1 - theta))`.
pub fn predicted_iterations(theta: f64, eps: f64) -> Option<u64> {
    if !(theta < 1.0) || !(eps > 0.0 && eps < 1.0) {
        return None;
    }
    Some(((1.0 / eps).ln() / (1.0 - theta)).ceil() as u64)
}

fn pos(name: &'static str, value: f64) -> Result<f64, TuningError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(TuningError::NonPositive { name, value })
    }
}

const FEASIBILITY_TOL: f64 = 1.0 + 1e-12;

pub fn stepsizes_two_function(l_f: f64, mu_g: f64) -> Result<StepSizes, TuningError> {
    pos("L_f", l_f)?;
    if !(mu_g > 0.0) {
        return Err(TuningError::StrongConvexityRequired(Regime::TwoFunction));
    }
    pos("mu_g", mu_g)?;
    Ok(StepSizes::two_function(
        1.0 / (l_f * mu_g).sqrt(),
        (mu_g / l_f).sqrt(),
    ))
}

pub fn stepsizes_smooth(l_f: f64, mu_g: f64, mu_hstar: f64, k_norm: f64) -> Result<StepSizes, TuningError> {
    pos("L_f", l_f)?;
    pos("mu_g", mu_g)?;
    pos("mu_h*", mu_hstar)?;
    pos("||K||", k_norm)?;
    let k2 = k_norm * k_norm;
    let eta_x = (1.0 / (l_f * mu_g).sqrt()).min((mu_hstar / (k2 * mu_g)).sqrt());
    let eta_y = 0.5 * (mu_g / (k2 * mu_hstar)).sqrt();
    let eta_z = 0.5 * (mu_g / l_f).sqrt();
    let steps = StepSizes::primal_dual(eta_x, eta_y, eta_z, Regime::SmoothH);
    let c = Constants {
        l_f,
        k_norm,
        ..Default::default()
    };
    debug_assert!(check_feasible(&steps, &c).is_ok());
    check_feasible(&steps, &c)?;
    Ok(steps)
}

fn nonsmooth_formulas(
    l_f: f64,
    l_g: f64,
    mu_g: f64,
    k_norm: f64,
    lam: f64,
    regime: Regime,
) -> Result<StepSizes, TuningError> {
    pos("L_f", l_f)?;
    pos("mu_g", mu_g)?;
    pos("L_g", l_g)?;
    pos("||K||", k_norm)?;
    if l_g < mu_g {
        return Err(TuningError::SmoothnessBelowStrongConvexity { l_g, mu_g });
    }
    let k2 = k_norm * k_norm;
    let eta_x = (1.0 / (l_f * mu_g).sqrt()).min((lam / k2).sqrt() / ((l_g + l_f) * mu_g).sqrt());
    let eta_y = 1.0 / (8.0 * k2 * eta_x);
    let eta_z = 1.0 / (8.0 * l_f * eta_x);
    Ok(StepSizes::primal_dual(eta_x, eta_y, eta_z, regime))
}

pub fn stepsizes_nonsmooth(
    l_f: f64,
    l_g: f64,
    mu_g: f64,
    k_norm: f64,
    lam_min: f64,
) -> Result<StepSizes, TuningError> {
    if !(lam_min > 0.0) {
        return Err(TuningError::LambdaMinZero);
    }
    nonsmooth_formulas(l_f, l_g, mu_g, k_norm, lam_min, Regime::NonsmoothH)
}

pub fn stepsizes_linear_constraint(
    l_f: f64,
    l_g: f64,
    mu_g: f64,
    k_norm: f64,
    lam_min_pos: f64,
) -> Result<StepSizes, TuningError> {
    if !(lam_min_pos > 0.0) {
        return Err(TuningError::LambdaMinPosZero);
    }
    nonsmooth_formulas(l_f, l_g, mu_g, k_norm, lam_min_pos, Regime::LinearConstraint)
}

/// Default stepsizes for the given regime.
pub fn stepsizes_for(regime: Regime, c: &Constants) -> Result<StepSizes, TuningError> {
    let l_g = || c.l_g.ok_or(TuningError::NonPositive { name: "L_g", value: f64::NAN });
    match regime {
        Regime::TwoFunction => stepsizes_two_function(c.l_f, c.mu_g),
        Regime::SmoothH => stepsizes_smooth(c.l_f, c.mu_g, c.mu_hstar, c.k_norm),
        Regime::NonsmoothH => stepsizes_nonsmooth(c.l_f, l_g()?, c.mu_g, c.k_norm, c.lambda_min),
        Regime::LinearConstraint => {
            stepsizes_linear_constraint(c.l_f, l_g()?, c.mu_g, c.k_norm, c.lambda_min_pos.unwrap_or(0.0))
        }
    }
}

/// Checks the stepsize constraint of the theorem matching `steps.regime`.
pub fn check_feasible(steps: &StepSizes, c: &Constants) -> Result<(), TuningError> {
    pos("eta_x", steps.eta_x)?;
    pos("eta_z", steps.eta_z)?;
    let k2 = c.k_norm * c.k_norm;
    let regime = steps.regime;
    let fail = |constraint, lhs: f64| {
        if lhs <= FEASIBILITY_TOL {
            Ok(())
        } else {
            Err(TuningError::Infeasible {
                regime,
                constraint,
                lhs,
            })
        }
    };
    match steps.regime {
        Regime::TwoFunction => fail(
            "L_f*eta_x*eta_z <= 1",
            c.l_f * steps.eta_x * steps.eta_z,
        ),
        Regime::SmoothH => {
            let eta_y = pos("eta_y", steps.eta_y.ok_or(TuningError::MissingEtaY(steps.regime))?)?;
            fail(
            "||K||^2*eta_x*eta_y + L_f*eta_x*eta_z <= 1",
                k2 * steps.eta_x * eta_y + c.l_f * steps.eta_x * steps.eta_z,
            )
        }
        Regime::NonsmoothH | Regime::LinearConstraint => {
            let eta_y = pos("eta_y", steps.eta_y.ok_or(TuningError::MissingEtaY(steps.regime))?)?;
            fail(
            "8*||K||^2*eta_x*eta_y <= 1",
                8.0 * k2 * steps.eta_x * eta_y,
            )?;
            fail(
            "8*L_f*eta_x*eta_z <= 1",
                8.0 * c.l_f * steps.eta_x * steps.eta_z,
            )
        }
    }
}

pub fn theta_two_function(steps: &StepSizes, mu_g: f64) -> RateBound {
    RateBound::from_components(&[
        ("primal", 1.0 / (1.0 + mu_g * steps.eta_x)),
        ("z-damping", 2.0 / (2.0 + steps.eta_z)),
    ])
}

pub fn theta_smooth(steps: &StepSizes, mu_g: f64, mu_hstar: f64) -> RateBound {
    RateBound::from_components(&[
        ("primal", 1.0 / (1.0 + mu_g * steps.eta_x)),
        ("dual", 1.0 / (1.0 + mu_hstar * steps.eta_y())),
        ("z-damping", 2.0 / (2.0 + steps.eta_z)),
    ])
}

pub fn theta_nonsmooth(steps: &StepSizes, mu_g: f64, l_g: f64, l_f: f64, lam_min: f64) -> RateBound {
    let eta_y = steps.eta_y();
    RateBound::from_components(&[
        ("primal", 2.0 / (2.0 + mu_g * steps.eta_x)),
        ("coupling", 40.0 / (40.0 + lam_min * steps.eta_x * eta_y)),
        ("dual", 20.0 / (20.0 + lam_min / (l_g + l_f) * eta_y)),
        ("z-damping", 2.0 / (2.0 + steps.eta_z)),
    ])
}

/// Contraction factor of the theorem matching `steps.regime`.
pub fn theta_for(steps: &StepSizes, c: &Constants) -> RateBound {
    match steps.regime {
        Regime::TwoFunction => theta_two_function(steps, c.mu_g),
        Regime::SmoothH => theta_smooth(steps, c.mu_g, c.mu_hstar),
        Regime::NonsmoothH => theta_nonsmooth(steps, c.mu_g, c.l_g.unwrap_or(0.0), c.l_f, c.lambda_min),
        Regime::LinearConstraint => theta_nonsmooth(
            steps,
            c.mu_g,
            c.l_g.unwrap_or(0.0),
            c.l_f,
            c.lambda_min_pos.unwrap_or(0.0),
        ),
    }
}

/// Leading factor of the iteration complexity `O(factor * log(1/eps))` for
/// the regime's default stepsizes. `None` when a required modulus is zero.
pub fn complexity_factor(regime: Regime, c: &Constants) -> Option<f64> {
    if !(c.mu_g > 0.0) {
        return None;
    }
    let k = c.k_norm;
    match regime {
        Regime::TwoFunction => Some(1.0 + (c.l_f / c.mu_g).sqrt()),
        Regime::SmoothH => (c.mu_hstar > 0.0).then(|| (c.l_f / c.mu_g).sqrt() + k / (c.mu_g * c.mu_hstar).sqrt()),
        Regime::NonsmoothH | Regime::LinearConstraint => {
            let lam = if regime == Regime::NonsmoothH {
                c.lambda_min
            } else {
                c.lambda_min_pos.unwrap_or(0.0)
            };
            let l_g = c.l_g?;
            (lam > 0.0).then(|| ((c.l_f + l_g) / c.mu_g).sqrt() * k / lam.sqrt() + k * k / lam)
        }
    }
}
