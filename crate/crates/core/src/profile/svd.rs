use nalgebra::DMatrix;

const MAX_SWEEPS: usize = 60;

/// Thin SVD `A = U diag(σ) Vᵀ` with σ descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns are orthogonalized by plane rotations until every pair is
/// orthogonal to working precision. Each right singular vector is signed so
/// that its largest-magnitude component (first on ties) is positive; the
/// matching left vector follows. For a zero singular value the vector on the
/// longer side of the matrix is left as zero.
pub fn jacobi_svd(a: &DMatrix<f64>) -> Svd {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.transpose());
        let mut out = Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
        normalize_signs(&mut out);
        return out;
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha: f64 = w.column(i).norm_squared();
                let beta: f64 = w.column(j).norm_squared();
                let gamma: f64 = w.column(i).dot(&w.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (x, y) = (w[(k, i)], w[(k, j)]);
                    w[(k, i)] = c * x - s * y;
                    w[(k, j)] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * x - s * y;
                    v[(k, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let scale = norms.iter().copied().fold(0.0, f64::max);
    let mut u = DMatrix::<f64>::zeros(m, n);
    let mut vs = DMatrix::<f64>::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        vs.set_column(dst, &v.column(src));
        if s > scale * 1e-15 && s > 0.0 {
            u.set_column(dst, &(w.column(src) / s));
        }
    }
    let mut out = Svd {
        u,
        singular_values: sigma,
        v: vs,
    };
    normalize_signs(&mut out);
    out
}

fn normalize_signs(svd: &mut Svd) {
    for j in 0..svd.v.ncols() {
        let col = svd.v.column(j);
        let mut pivot = 0;
        for k in 1..col.len() {
            if col[k].abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        if col[pivot] < 0.0 {
            svd.v.column_mut(j).neg_mut();
            if j < svd.u.ncols() {
                svd.u.column_mut(j).neg_mut();
            }
        }
    }
}
