use nalgebra::DMatrix;

use super::MultivariateError;

pub const VARIMAX_MAX_SWEEPS: usize = 500;
const ANGLE_TOL: f64 = 1e-12;
const FLAT_TOL: f64 = 1e-14;

/// Rotated loadings `loadings = input · rotation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Varimax {
    pub loadings: DMatrix<f64>,
    pub rotation: DMatrix<f64>,
    pub sweeps: usize,
}

fn row_norms(a: &DMatrix<f64>) -> Vec<f64> {
    a.row_iter().map(|r| r.norm()).collect()
}

fn normalized(a: &DMatrix<f64>) -> DMatrix<f64> {
    let h = row_norms(a);
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| if h[i] > 0.0 { a[(i, j)] / h[i] } else { 0.0 })
}

/// Raw varimax criterion on Kaiser-normalized loadings: the sum over columns
/// of the variance of the squared loadings.
pub fn varimax_criterion(loadings: &DMatrix<f64>) -> f64 {
    let b = normalized(loadings);
    let p = b.nrows() as f64;
    b.column_iter()
        .map(|col| {
            let sq: Vec<f64> = col.iter().map(|x| x * x).collect();
            let mean = sq.iter().sum::<f64>() / p;
            sq.iter().map(|s| s * s).sum::<f64>() / p - mean * mean
        })
        .sum()
}

/// Kaiser-normalized varimax by cyclic planar rotations.
///
/// Each planar step takes the closed-form angle maximizing the criterion in
/// that plane, so the criterion never decreases. Columns of the result are
/// ordered by descending sum of squared loadings and signed so each column's
/// largest-magnitude entry is non-negative.
pub fn varimax(loadings: &DMatrix<f64>) -> Result<Varimax, MultivariateError> {
    let (p, m) = loadings.shape();
    if m < 2 {
        return Err(MultivariateError::RequiresTwoComponents(m));
    }
    let mut b = normalized(loadings);
    let mut q = DMatrix::<f64>::identity(m, m);
    let pf = p as f64;
    let mut sweeps = 0;
    loop {
        if sweeps == VARIMAX_MAX_SWEEPS {
            return Err(MultivariateError::NoConvergence(sweeps));
        }
        sweeps += 1;
        let mut max_angle = 0.0_f64;
        for j in 0..m {
            for k in (j + 1)..m {
                let (mut sa, mut sb, mut sc, mut sd) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..p {
                    let (x, y) = (b[(i, j)], b[(i, k)]);
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    sa += u;
                    sb += v;
                    sc += u * u - v * v;
                    sd += 2.0 * u * v;
                }
                let num = sd - 2.0 * sa * sb / pf;
                let den = sc - (sa * sa - sb * sb) / pf;
                // criterion flat in this plane
                if num.hypot(den) < FLAT_TOL * pf {
                    continue;
                }
                let phi = num.atan2(den) / 4.0;
                if phi.abs() < ANGLE_TOL {
                    continue;
                }
                max_angle = max_angle.max(phi.abs());
                let (s, c) = phi.sin_cos();
                for i in 0..p {
                    let (x, y) = (b[(i, j)], b[(i, k)]);
                    b[(i, j)] = c * x + s * y;
                    b[(i, k)] = -s * x + c * y;
                }
                for i in 0..m {
                    let (x, y) = (q[(i, j)], q[(i, k)]);
                    q[(i, j)] = c * x + s * y;
                    q[(i, k)] = -s * x + c * y;
                }
            }
        }
        if max_angle < ANGLE_TOL {
            break;
        }
    }

    let rotated = loadings * &q;
    let ss: Vec<f64> = rotated.column_iter().map(|c| c.norm_squared()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| ss[b].partial_cmp(&ss[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut q_out = DMatrix::<f64>::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        let col = rotated.column(src);
        let sign = if col[col.iamax()] < 0.0 { -1.0 } else { 1.0 };
        q_out.set_column(dst, &(q.column(src) * sign));
    }
    Ok(Varimax { loadings: loadings * &q_out, rotation: q_out, sweeps })
}
