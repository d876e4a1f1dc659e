//! Dense BFGS with backtracking line search.

/// Objective: writes the gradient into the second argument and returns the
/// value.
pub(crate) trait Objective {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Objective for F {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the value by less than
    /// `tolerance · min(1, f)` twice in a row, or the value reaches zero.
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub initial_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns the accepted point, its value and gradient, or `None` if no
/// decrease was found along `dir`.
fn line_search<O: Objective>(
    obj: &mut O,
    x: &[f64],
    f: f64,
    g: &[f64],
    dir: &[f64],
    step0: f64,
) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let slope = dot(g, dir);
    if !(slope < 0.0) {
        return None;
    }
    let mut step = step0;
    let mut trial = vec![0.0; x.len()];
    let mut grad = vec![0.0; x.len()];
    for _ in 0..MAX_HALVINGS {
        for i in 0..x.len() {
            trial[i] = x[i] + step * dir[i];
        }
        let ft = obj.eval(&trial, &mut grad);
        if ft.is_finite() && ft <= f + ARMIJO * step * slope && ft < f {
            return Some((trial, ft, grad));
        }
        step *= 0.5;
    }
    None
}

pub(crate) fn bfgs<O: Objective>(obj: &mut O, x0: Vec<f64>, settings: Settings) -> Outcome {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = obj.eval(&x, &mut g);
    let initial_value = f;
    // inverse Hessian approximation, row-major
    let mut h = identity(n);
    let mut fresh = true;
    let mut small_steps = 0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iterations {
        if g.iter().all(|v| *v == 0.0) {
            converged = true;
            break;
        }
        let dir: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let step0 = if fresh {
            // first step of a fresh curvature model: cap its length
            let norm = dot(&dir, &dir).sqrt();
            (0.1 / norm).min(1.0)
        } else {
            1.0
        };
        let Some((x_new, f_new, g_new)) = line_search(obj, &x, f, &g, &dir, step0) else {
            if fresh {
                // no decrease even along steepest descent: at a minimum to
                // working precision
                converged = true;
                break;
            }
            h = identity(n);
            fresh = true;
            continue;
        };
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 && sy.is_finite() {
            if fresh {
                // scale the initial model to the observed curvature
                let gamma = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= gamma);
            }
            update_inverse_hessian(&mut h, &s, &y, sy);
            fresh = false;
        }

        let decrease = f - f_new;
        x = x_new;
        g = g_new;
        f = f_new;
        if f <= 0.0 || decrease <= settings.tolerance * f.abs().min(1.0) {
            small_steps += 1;
            if small_steps >= 2 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    Outcome {
        x,
        initial_value,
        iterations,
        converged,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, `ρ = 1/(yᵀs)`.
fn update_inverse_hessian(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Central finite-difference gradient.
pub(crate) fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], step: f64, grad: &mut [f64]) {
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * step);
    }
}
