//! Calibration of the low-dimensional similarity curve `1 / (1 + a * x^(2b))`.

const GRID_POINTS: usize = 300;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFit {
    pub a: f64,
    pub b: f64,
    /// False when the iteration budget ran out before the step size settled.
    pub converged: bool,
}

fn target_curve(x: f64, min_dist: f64, spread: f64) -> f64 {
    if x < min_dist {
        1.0
    } else {
        (-(x - min_dist) / spread).exp()
    }
}

pub fn curve(x: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * x.powf(2.0 * b))
}

/// The fitting grid: `GRID_POINTS` evenly spaced values in `(0, 3 * spread]`.
pub fn fit_grid(spread: f64) -> Vec<f64> {
    (1..=GRID_POINTS)
        .map(|i| 3.0 * spread * i as f64 / GRID_POINTS as f64)
        .collect()
}

fn cost(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (curve(x, a, b) - y).powi(2))
        .sum()
}

/// Least-squares fit of `(a, b)` by Levenberg-Marquardt starting from `(1, 1)`.
pub fn fit_ab(min_dist: f64, spread: f64) -> CurveFit {
    assert!(spread > 0.0, "spread must be positive");
    let xs = fit_grid(spread);
    let ys: Vec<f64> = xs.iter().map(|&x| target_curve(x, min_dist, spread)).collect();

    let (mut a, mut b) = (1.0_f64, 1.0_f64);
    let mut current = cost(&xs, &ys, a, b);
    let mut damping = 1e-3;
    let mut converged = false;

    for _ in 0..MAX_ITER {
        // normal equations J^T J and gradient J^T r
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let p = x.powf(2.0 * b);
            let denom = (1.0 + a * p).powi(2);
            let da = -p / denom;
            let db = -a * p * 2.0 * x.ln() / denom;
            let r = curve(x, a, b) - y;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }

        let mut accepted = false;
        while damping < 1e12 {
            let (m00, m11) = (jaa * (1.0 + damping), jbb * (1.0 + damping));
            let det = m00 * m11 - jab * jab;
            if det.abs() < f64::MIN_POSITIVE {
                damping *= 10.0;
                continue;
            }
            let step_a = -(m11 * ga - jab * gb) / det;
            let step_b = -(m00 * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            if na > 0.0 && nb > 0.0 {
                let c = cost(&xs, &ys, na, nb);
                if c <= current {
                    let tiny = step_a.abs() <= 1e-12 * (1.0 + a) && step_b.abs() <= 1e-12 * (1.0 + b);
                    let flat = current - c <= 1e-15 * current.max(f64::MIN_POSITIVE);
                    a = na;
                    b = nb;
                    current = c;
                    damping = (damping / 3.0).max(1e-12);
                    accepted = true;
                    converged = tiny || flat;
                    break;
                }
            }
            damping *= 2.0;
        }
        if !accepted {
            // no descent direction left at any damping: a stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }
    CurveFit { a, b, converged }
}
