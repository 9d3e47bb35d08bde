//! High-order reference integration of the spatially homogeneous kinetics.

use ode_solvers::{Dop853, OutputType, System, Vector3};
use thiserror::Error;

use crate::model::Params;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("reference integration failed on [{from}, {to}]: {source}")]
    Integration {
        from: f64,
        to: f64,
        #[source]
        source: ode_solvers::dop_shared::IntegrationError,
    },
    #[error("output times must be nondecreasing and start at or after 0")]
    Times,
}

struct Kinetics(Params);

impl System<f64, Vector3<f64>> for Kinetics {
    fn system(&self, _t: f64, y: &Vector3<f64>, dy: &mut Vector3<f64>) {
        let (u, v, w) = (y[0], y[1], y[2]);
        dy[0] = self.0.f(u, v, w);
        dy[1] = self.0.g(u, v, w);
        dy[2] = self.0.h(u, v, w);
    }
}

pub const RTOL: f64 = 1e-12;
pub const ATOL: f64 = 1e-12;

/// Solution of `(u, v, w)' = (f, g, h)` from `y0` at `t = 0`, sampled at
/// `times` (nondecreasing). Uses an 8th-order Dormand-Prince method.
pub fn solve_kinetics(p: &Params, y0: [f64; 3], times: &[f64]) -> Result<Vec<[f64; 3]>, OdeError> {
    if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(OdeError::Times);
    }
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut y = Vector3::new(y0[0], y0[1], y0[2]);
    for &target in times {
        if target > t {
            let span = target - t;
            let mut stepper = Dop853::from_param(
                Kinetics(*p),
                t,
                target,
                span,
                y,
                RTOL,
                ATOL,
                0.9,
                0.0,
                1.0 / 3.0,
                6.0,
                span,
                0.0,
                1_000_000,
                1000,
                OutputType::Sparse,
            );
            stepper
                .integrate()
                .map_err(|source| OdeError::Integration { from: t, to: target, source })?;
            // sparse output ends exactly at the last accepted step, i.e. at `target`
            y = *stepper.y_out().last().expect("integrator reports the end point");
            t = target;
        }
        out.push([y[0], y[1], y[2]]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_prey_matches_closed_form() {
        // v = w = 0 reduces to u' = u (l - m u)
        let p = Params { lambda1: 2.0, mu1: 0.5, ..Params::unit() };
        let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        let sol = solve_kinetics(&p, [0.1, 0.0, 0.0], &times).unwrap();
        for (t, y) in times.iter().zip(&sol) {
            let k = p.lambda1 / p.mu1;
            let exact = k / (1.0 + (k / 0.1 - 1.0) * (-p.lambda1 * t).exp());
            assert!((y[0] - exact).abs() < 1e-9, "t={t}: {} vs {exact}", y[0]);
            assert_eq!(y[1], 0.0);
            assert_eq!(y[2], 0.0);
        }
    }

    #[test]
    fn rejects_decreasing_times() {
        assert!(matches!(
            solve_kinetics(&Params::unit(), [1.0; 3], &[1.0, 0.5]),
            Err(OdeError::Times)
        ));
    }

    #[test]
    fn equilibrium_is_stationary() {
        let sol = solve_kinetics(&Params::unit(), [0.0, 0.0, 1.0], &[5.0]).unwrap();
        assert!((sol[0][2] - 1.0).abs() < 1e-12);
    }
}
