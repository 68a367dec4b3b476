//! Limited-memory BFGS with a weak Wolfe line search, used by the
//! rate-function solvers for the inner unconstrained subproblems.

const MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MAX_LINE_STEPS: usize = 60;

pub struct OptOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimize a smooth objective given value+gradient evaluations.
pub fn lbfgs<F>(objective: F, x0: Vec<f64>, max_iter: usize, gtol: f64) -> OptOutcome
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut gx) = objective(&x);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();

    for iter in 0..max_iter {
        let gnorm = inf_norm(&gx);
        if gnorm <= gtol {
            return OptOutcome { x, value: fx, grad_norm: gnorm, iterations: iter };
        }

        // Two-loop recursion.
        let mut q = gx.clone();
        let pairs = s_hist.len();
        let mut alphas = vec![0.0; pairs];
        for i in (0..pairs).rev() {
            let rho_i = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let a = rho_i * dot(&s_hist[i], &q);
            alphas[i] = a;
            for (qk, yk) in q.iter_mut().zip(&y_hist[i]) {
                *qk -= a * yk;
            }
        }
        let gamma = if pairs > 0 {
            let i = pairs - 1;
            dot(&s_hist[i], &y_hist[i]) / dot(&y_hist[i], &y_hist[i])
        } else {
            1.0
        };
        for qk in q.iter_mut() {
            *qk *= gamma;
        }
        for i in 0..pairs {
            let rho_i = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let b = rho_i * dot(&y_hist[i], &q);
            for (qk, sk) in q.iter_mut().zip(&s_hist[i]) {
                *qk += (alphas[i] - b) * sk;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&gx, &dir);
        if slope >= 0.0 {
            // Not a descent direction; fall back to steepest descent.
            dir = gx.iter().map(|v| -v).collect();
            slope = -dot(&gx, &gx);
            s_hist.clear();
            y_hist.clear();
        }

        // Weak Wolfe bracketing: shrink on sufficient-decrease failure,
        // expand on curvature failure. Guarantees s.y > 0 when both hold.
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        let mut step = 1.0f64;
        let mut accepted = None;
        let mut fallback = None;
        for _ in 0..MAX_LINE_STEPS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = objective(&trial);
            if !(ft.is_finite() && ft <= fx + ARMIJO_C1 * step * slope) {
                hi = step;
            } else {
                // Keep the best Armijo point in case curvature never holds.
                fallback = Some((trial.clone(), ft, gt.clone()));
                if dot(&gt, &dir) < WOLFE_C2 * slope {
                    lo = step;
                } else {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * step };
        }
        let Some((xn, fn_, gn)) = accepted.or(fallback) else {
            // Line search stalled; report the current iterate.
            return OptOutcome { x, value: fx, grad_norm: gnorm, iterations: iter };
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&gx).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-14 * dot(&y, &y).max(1e-300) {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        x = xn;
        fx = fn_;
        gx = gn;
    }
    let gnorm = inf_norm(&gx);
    OptOutcome { x, value: fx, grad_norm: gnorm, iterations: max_iter }
}
