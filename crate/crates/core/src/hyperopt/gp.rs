//! Gaussian-process surrogate with an isotropic Matérn-5/2 kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const GRID: usize = 16;
const LENGTH_RANGE: (f64, f64) = (0.05, 2.0);
const VARIANCE_RANGE: (f64, f64) = (0.1, 10.0);
const MAX_JITTER: f64 = 1e-2;

pub const DEFAULT_JITTER: f64 = 1e-8;

fn log_grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..GRID).map(move |i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (GRID - 1) as f64).exp())
}

/// Matérn-5/2 correlation at distance `r` (unit signal variance).
pub fn matern52(r: f64, length_scale: f64) -> f64 {
    let s = 5f64.sqrt() * r / length_scale;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct GpSurrogate {
    points: Vec<Vec<f64>>,
    y_mean: f64,
    y_std: f64,
    pub length_scale: f64,
    /// Signal variance in standardized score units.
    pub signal_variance: f64,
    /// Diagonal jitter, relative to the signal variance, that made the factorization succeed.
    pub jitter: f64,
    chol: Cholesky<f64, Dyn>,
    /// `(R + jitter I)^-1 y` for standardized scores.
    alpha: DVector<f64>,
    pub log_marginal_likelihood: f64,
}

fn correlation(points: &[Vec<f64>], length_scale: f64, jitter: f64) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| {
        let r = matern52(dist(&points[i], &points[j]), length_scale);
        if i == j {
            r + jitter
        } else {
            r
        }
    })
}

fn factor(points: &[Vec<f64>], length_scale: f64, jitter: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let mut j = jitter;
    loop {
        if let Some(c) = Cholesky::new(correlation(points, length_scale, j)) {
            return Some((c, j));
        }
        if j >= MAX_JITTER {
            return None;
        }
        j = (j * 10.0).min(MAX_JITTER);
    }
}

impl GpSurrogate {
    /// Fits a GP to unit-cube points, choosing length scale and signal variance by
    /// maximum marginal likelihood over a 16x16 log grid. Scores are standardized.
    pub fn fit(points: Vec<Vec<f64>>, scores: &[f64], jitter: f64) -> Result<Self> {
        let n = points.len();
        if n < 2 || scores.len() != n {
            return Err(Error::invalid("GP fit needs at least 2 points with matching scores"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("GP scores must be finite"));
        }
        let y_mean = scores.iter().sum::<f64>() / n as f64;
        let var = scores.iter().map(|s| (s - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let y = DVector::from_iterator(n, scores.iter().map(|s| (s - y_mean) / y_std));

        let log2pi = (2.0 * std::f64::consts::PI).ln();
        let mut best: Option<(f64, f64, f64, Cholesky<f64, Dyn>, f64)> = None;
        for length_scale in log_grid(LENGTH_RANGE.0, LENGTH_RANGE.1) {
            let Some((chol, used_jitter)) = factor(&points, length_scale, jitter) else {
                continue;
            };
            let alpha = chol.solve(&y);
            let quad = y.dot(&alpha);
            let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            // the variance range is relative to var(y), which is 1 after standardizing
            for sv in log_grid(VARIANCE_RANGE.0, VARIANCE_RANGE.1) {
                let lml = -0.5 * quad / sv - 0.5 * (log_det + n as f64 * sv.ln()) - 0.5 * n as f64 * log2pi;
                if best.as_ref().is_none_or(|b| lml > b.0) {
                    best = Some((lml, length_scale, sv, chol.clone(), used_jitter));
                }
            }
        }
        let Some((lml, length_scale, signal_variance, chol, used_jitter)) = best else {
            return Err(Error::Cholesky { jitter: MAX_JITTER });
        };
        let alpha = chol.solve(&y);
        Ok(GpSurrogate {
            points,
            y_mean,
            y_std,
            length_scale,
            signal_variance,
            jitter: used_jitter,
            chol,
            alpha,
            log_marginal_likelihood: lml,
        })
    }

    /// Fits with fixed hyperparameters instead of the likelihood grid.
    pub fn fit_fixed(points: Vec<Vec<f64>>, scores: &[f64], length_scale: f64, signal_variance: f64, jitter: f64) -> Result<Self> {
        let mut gp = GpSurrogate::fit(points, scores, jitter)?;
        let (chol, used) = factor(&gp.points, length_scale, jitter).ok_or(Error::Cholesky { jitter: MAX_JITTER })?;
        let y = DVector::from_iterator(scores.len(), scores.iter().map(|s| (s - gp.y_mean) / gp.y_std));
        gp.alpha = chol.solve(&y);
        gp.chol = chol;
        gp.jitter = used;
        gp.length_scale = length_scale;
        gp.signal_variance = signal_variance;
        Ok(gp)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Posterior mean and variance in standardized score units.
    pub fn posterior_standardized(&self, x: &[f64]) -> (f64, f64) {
        let r = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| matern52(dist(p, x), self.length_scale)),
        );
        let mean = r.dot(&self.alpha);
        let v = self.chol.solve(&r);
        let var = self.signal_variance * (1.0 - r.dot(&v));
        (mean, var.max(0.0))
    }

    /// Posterior mean and variance in the original score units.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.posterior_standardized(x);
        (m * self.y_std + self.y_mean, v * self.y_std * self.y_std)
    }

    /// Prior variance in original units.
    pub fn prior_variance(&self) -> f64 {
        self.signal_variance * self.y_std * self.y_std
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement over `best` for maximization.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    if sigma == 0.0 {
        return (mean - best).max(0.0);
    }
    let z = (mean - best) / sigma;
    (sigma * (z * normal_cdf(z) + normal_pdf(z))).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ei_closed_forms() {
        assert!((expected_improvement(0.0, 1.0, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert_eq!(expected_improvement(-1.0, 0.0, 0.0), 0.0);
        assert_eq!(expected_improvement(1.5, 0.0, 1.0), 0.5);
    }

    #[test]
    fn interpolates_two_points() {
        let gp = GpSurrogate::fit(vec![vec![0.1, 0.2], vec![0.8, 0.9]], &[3.0, -1.0], DEFAULT_JITTER).unwrap();
        assert!((gp.posterior(&[0.1, 0.2]).0 - 3.0).abs() < 1e-6);
        assert!((gp.posterior(&[0.8, 0.9]).0 + 1.0).abs() < 1e-6);
        assert!(gp.posterior_standardized(&[0.1, 0.2]).1 <= 1e-6);
    }

    #[test]
    fn duplicate_points_do_not_fail() {
        let gp = GpSurrogate::fit(vec![vec![0.5], vec![0.5], vec![0.1]], &[1.0, 1.0, 0.0], DEFAULT_JITTER).unwrap();
        assert!((gp.posterior(&[0.5]).0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_scores() {
        let gp = GpSurrogate::fit(vec![vec![0.0], vec![1.0]], &[2.0, 2.0], DEFAULT_JITTER).unwrap();
        assert!((gp.posterior(&[0.5]).0 - 2.0).abs() < 1e-9);
    }
}
