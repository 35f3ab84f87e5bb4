//! Levenberg-Marquardt driver for problems that can solve their own damped
//! normal equations.
//!
//! The driver only needs the objective `||r||^2`, the gradient half `J^T r`
//! and a solver for `(J^T J + lambda I) delta = -J^T r`. Problems with
//! structured Jacobians (low-rank updates of the identity, for instance)
//! solve that system in linear time.

/// Knobs for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    pub damping_init: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the objective by less than this
    /// fraction.
    pub rel_tol: f64,
    /// Stop once `max |J^T r|` drops below this.
    pub grad_tol: f64,
    /// Keep every accepted parameter vector in [`LmOutcome::iterates`].
    pub record_iterates: bool,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            damping_init: 1e-3,
            damping_up: 10.0,
            damping_down: 10.0,
            max_iterations: 200,
            rel_tol: 1e-10,
            grad_tol: 1e-8,
            record_iterates: false,
        }
    }
}

pub trait DampedLeastSquares {
    /// Sum of squared residuals.
    fn objective(&self, params: &[f64]) -> f64;

    /// `J^T r`, half the objective's gradient.
    fn gradient(&self, params: &[f64]) -> Vec<f64>;

    /// Solves `(J^T J + lambda I) delta = -gradient` at `params`.
    fn damped_step(&self, params: &[f64], lambda: f64, gradient: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    /// Outer iterations, accepted or not.
    pub iterations: usize,
    /// False when the iteration budget ran out before a stopping rule fired.
    pub converged: bool,
    pub iterates: Vec<Vec<f64>>,
}

pub fn minimize<P: DampedLeastSquares + ?Sized>(
    problem: &P,
    init: &[f64],
    settings: &LmSettings,
) -> LmOutcome {
    let mut params = init.to_vec();
    let mut f = problem.objective(&params);
    let initial_objective = f;
    let mut lambda = settings.damping_init;
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let mut grad = problem.gradient(&params);
    while iterations < settings.max_iterations {
        if f == 0.0 || grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < settings.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let step = problem.damped_step(&params, lambda, &grad);
        let trial: Vec<f64> = params.iter().zip(&step).map(|(p, d)| p + d).collect();
        let f_trial = problem.objective(&trial);
        if f_trial.is_finite() && f_trial < f {
            let rel = (f - f_trial) / f;
            params = trial;
            f = f_trial;
            lambda /= settings.damping_down;
            if settings.record_iterates {
                iterates.push(params.clone());
            }
            if rel < settings.rel_tol {
                converged = true;
                break;
            }
            grad = problem.gradient(&params);
        } else {
            lambda *= settings.damping_up;
            if !lambda.is_finite() || lambda > 1e300 {
                // no descent direction left at any damping
                converged = true;
                break;
            }
        }
    }

    LmOutcome {
        params,
        objective: f,
        initial_objective,
        iterations,
        converged,
        iterates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Dense problem with an explicit residual function and Jacobian.
    struct Dense<F, J> {
        residuals: F,
        jacobian: J,
    }

    impl<F, J> DampedLeastSquares for Dense<F, J>
    where
        F: Fn(&[f64]) -> DVector<f64>,
        J: Fn(&[f64]) -> DMatrix<f64>,
    {
        fn objective(&self, p: &[f64]) -> f64 {
            (self.residuals)(p).norm_squared()
        }

        fn gradient(&self, p: &[f64]) -> Vec<f64> {
            ((self.jacobian)(p).transpose() * (self.residuals)(p))
                .as_slice()
                .to_vec()
        }

        fn damped_step(&self, p: &[f64], lambda: f64, g: &[f64]) -> Vec<f64> {
            let j = (self.jacobian)(p);
            let n = j.ncols();
            let m = j.transpose() * &j + DMatrix::identity(n, n) * lambda;
            let rhs = -DVector::from_column_slice(g);
            m.lu().solve(&rhs).unwrap().as_slice().to_vec()
        }
    }

    #[test]
    fn rosenbrock() {
        let p = Dense {
            residuals: |x: &[f64]| DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]),
            jacobian: |x: &[f64]| DMatrix::from_row_slice(2, 2, &[-20.0 * x[0], 10.0, -1.0, 0.0]),
        };
        let out = minimize(&p, &[-1.2, 1.0], &LmSettings::default());
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-6 && (out.params[1] - 1.0).abs() < 1e-6);
        assert!(out.objective < 1e-12);
    }

    #[test]
    fn never_increases_objective() {
        let p = Dense {
            residuals: |x: &[f64]| {
                DVector::from_vec(vec![x[0].sin() * 3.0 - 1.0, x[0] * x[0] - 2.0])
            },
            jacobian: |x: &[f64]| DMatrix::from_row_slice(2, 1, &[3.0 * x[0].cos(), 2.0 * x[0]]),
        };
        let settings = LmSettings {
            record_iterates: true,
            ..LmSettings::default()
        };
        let out = minimize(&p, &[0.1], &settings);
        assert!(out.objective <= out.initial_objective);
        let mut last = out.initial_objective;
        for it in &out.iterates {
            let f = p.objective(it);
            assert!(f < last);
            last = f;
        }
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let p = Dense {
            residuals: |x: &[f64]| DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]),
            jacobian: |x: &[f64]| DMatrix::from_row_slice(2, 2, &[-20.0 * x[0], 10.0, -1.0, 0.0]),
        };
        let settings = LmSettings {
            max_iterations: 2,
            ..LmSettings::default()
        };
        let out = minimize(&p, &[-1.2, 1.0], &settings);
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
        assert!(out.objective <= out.initial_objective);
    }
}
