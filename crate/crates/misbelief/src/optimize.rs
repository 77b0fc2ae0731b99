//! Dense BFGS minimization with numerically computed gradients.
//!
//! The objectives in this crate are smooth and low-dimensional (a few dozen
//! variables at most), so a plain inverse-Hessian BFGS with central-difference
//! gradients and an Armijo backtracking line search is enough. Curvature
//! updates are skipped when `sᵀy` is not safely positive, which keeps the
//! Hessian approximation positive definite.

use nalgebra::{DMatrix, DVector};

/// Central-difference step scale: cube root of machine epsilon.
const CBRT_EPS: f64 = 6.055454452393343e-6;

#[derive(Debug, Clone)]
pub struct Options {
    /// Stop when the Euclidean gradient norm falls below this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self { gradient_tolerance: 1e-8, max_iterations: 400 }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub point: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference gradient, step `h_j = ∛ε · (1 + |x_j|)` per coordinate.
pub fn numeric_gradient<F: Fn(&DVector<f64>) -> f64>(f: &F, x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut g = DVector::zeros(n);
    let mut probe = x.clone();
    for j in 0..n {
        let h = CBRT_EPS * (1.0 + x[j].abs());
        probe[j] = x[j] + h;
        let up = f(&probe);
        probe[j] = x[j] - h;
        let down = f(&probe);
        probe[j] = x[j];
        g[j] = (up - down) / (2.0 * h);
    }
    g
}

/// Minimizes `f` from `start` by BFGS with numeric gradients.
pub fn minimize<F: Fn(&DVector<f64>) -> f64>(
    f: &F,
    start: &DVector<f64>,
    options: &Options,
) -> Outcome {
    let n = start.len();
    let mut x = start.clone();
    let mut value = f(&x);
    let mut grad = numeric_gradient(f, &x);
    let mut inv_hessian = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut first_step = true;

    while iterations < options.max_iterations {
        let grad_norm = grad.norm();
        if grad_norm <= options.gradient_tolerance || !grad_norm.is_finite() {
            break;
        }
        iterations += 1;

        let mut direction = -(&inv_hessian * &grad);
        let mut slope = direction.dot(&grad);
        if slope >= 0.0 {
            // Hessian approximation lost descent; fall back to steepest descent.
            inv_hessian = DMatrix::identity(n, n);
            direction = -grad.clone();
            slope = -grad_norm * grad_norm;
        }

        // Armijo backtracking.
        let mut alpha = 1.0;
        let mut trial_value = f64::INFINITY;
        let mut trial = x.clone();
        let mut accepted = false;
        for _ in 0..48 {
            trial = &x + &direction * alpha;
            trial_value = f(&trial);
            if trial_value.is_finite() && trial_value <= value + 1e-4 * alpha * slope {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break; // no progress possible along this direction
        }

        let step = &trial - &x;
        let new_grad = numeric_gradient(f, &trial);
        let grad_change = &new_grad - &grad;
        let sy = step.dot(&grad_change);

        if sy > 1e-12 * step.norm() * grad_change.norm() {
            if first_step {
                // Scale the initial inverse Hessian to the problem's curvature.
                let scale = sy / grad_change.dot(&grad_change);
                if scale.is_finite() && scale > 0.0 {
                    inv_hessian = DMatrix::identity(n, n) * scale;
                }
                first_step = false;
            }
            let rho = 1.0 / sy;
            let hy = &inv_hessian * &grad_change;
            let yhy = grad_change.dot(&hy);
            // BFGS inverse update:
            // H ← H + (sᵀy + yᵀHy)/(sᵀy)² ssᵀ − (Hysᵀ + syᵀH)/(sᵀy)
            let ss = &step * step.transpose();
            let hys = &hy * step.transpose();
            inv_hessian += ss * ((sy + yhy) * rho * rho);
            inv_hessian -= (&hys + hys.transpose()) * rho;
        }

        x = trial;
        value = trial_value;
        grad = new_grad;
    }

    let gradient_norm = grad.norm();
    Outcome {
        converged: gradient_norm <= options.gradient_tolerance,
        point: x,
        value,
        gradient_norm,
        iterations,
    }
}
