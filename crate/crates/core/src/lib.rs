//! Accelerated primal-dual splitting for `min_x f(x) + g(x) + h(Kx)`.
//!
//! `solvers` holds the accelerated methods (APGD, APGE, ACV-I/II,
//! APDTR-I/II) and their unaccelerated baselines, `tuning` the default
//! stepsizes and contraction factors, `lyapunov` the Lyapunov functions and
//! the contraction checks. `bench` generates test problems and drives the
//! `pdaccel` command line tool.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod funcs;
pub mod linops;
pub mod lyapunov;
pub mod parallel;
pub mod rng;
pub mod solvers;
pub mod tuning;
pub mod vecops;
pub mod bench;
