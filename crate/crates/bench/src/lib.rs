//! Shared fixtures for the criterion benches.

use mpmi_core::experiments::{perturb_rhs, PoissonProblem};
use mpmi_core::{svd, SvdFactors, Vector};

/// A factored Poisson problem with one noisy right-hand side.
pub struct Fixture {
    pub problem: PoissonProblem,
    pub factors: SvdFactors,
    pub u_delta: Vector,
    pub delta_abs: f64,
}

impl Fixture {
    pub fn poisson(m: usize, n: usize, delta_rel: f64) -> Self {
        let problem = PoissonProblem::build(m, n, 0.1).expect("valid grid");
        let factors = svd(&problem.matrix).expect("svd converges");
        let u_delta = perturb_rhs(&problem.u_bar, delta_rel, 0).expect("valid noise level");
        let delta_abs = delta_rel * problem.u_bar.norm();
        Fixture {
            problem,
            factors,
            u_delta,
            delta_abs,
        }
    }

    /// The 199 x 201 grid.
    pub fn desk(delta_rel: f64) -> Self {
        Self::poisson(199, 201, delta_rel)
    }
}
