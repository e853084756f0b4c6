//! Reference computations used by the integration and acceptance tests.
//!
//! Everything here is plain `Vec<Vec<f64>>` arithmetic with no dependency on
//! the library's linear algebra, so each check compares two independent routes.

#![allow(dead_code)]

pub type Mat = Vec<Vec<f64>>;

pub fn transpose(a: &Mat) -> Mat {
    let (n, m) = (a.len(), a[0].len());
    (0..m).map(|j| (0..n).map(|i| a[i][j]).collect()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let ail = a[i][l];
            for j in 0..m {
                out[i][j] += ail * b[l][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Householder reduction of symmetric `a` to tridiagonal form; returns the
/// diagonal and the sub-diagonal. Similarity transforms keep the spectrum.
pub fn householder_tridiagonal(a: &Mat) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut m = a.clone();
    for k in 0..n.saturating_sub(2) {
        let alpha_sq: f64 = (k + 1..n).map(|i| m[i][k] * m[i][k]).sum();
        if alpha_sq == 0.0 {
            continue;
        }
        let alpha = if m[k + 1][k] > 0.0 { -alpha_sq.sqrt() } else { alpha_sq.sqrt() };
        let mut v = vec![0.0; n];
        v[k + 1] = m[k + 1][k] - alpha;
        for i in k + 2..n {
            v[i] = m[i][k];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        // M ← H M H with H = I − 2vvᵀ/vᵀv
        let p: Vec<f64> = (0..n).map(|i| 2.0 * (0..n).map(|j| m[i][j] * v[j]).sum::<f64>() / vtv).collect();
        let kappa = (0..n).map(|i| v[i] * p[i]).sum::<f64>() / vtv;
        let q: Vec<f64> = (0..n).map(|i| p[i] - kappa * v[i]).collect();
        for i in 0..n {
            for j in 0..n {
                m[i][j] -= v[i] * q[j] + q[i] * v[j];
            }
        }
    }
    let diag = (0..n).map(|i| m[i][i]).collect();
    let off = (1..n).map(|i| m[i][i - 1]).collect();
    (diag, off)
}

/// Sturm count: eigenvalues of the tridiagonal (d, e) strictly below `sigma`.
pub fn sturm_count(d: &[f64], e: &[f64], sigma: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut q = 1.0;
    let mut count = 0;
    for i in 0..d.len() {
        let e2 = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] };
        q = d[i] - sigma - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalues in descending order by bisection on Sturm counts of the
/// Householder tridiagonal form.
pub fn bisection_eigenvalues(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let (d, e) = householder_tridiagonal(a);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    lo -= 1.0;
    hi += 1.0;
    let mut out = Vec::with_capacity(n);
    // k-th smallest eigenvalue: smallest σ with sturm_count(σ) ≥ k + 1
    for k in 0..n {
        let (mut a_lo, mut a_hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a_lo + a_hi);
            if sturm_count(&d, &e, mid) > k {
                a_hi = mid;
            } else {
                a_lo = mid;
            }
            if a_hi - a_lo < 1e-14 * (1.0 + mid.abs()) {
                break;
            }
        }
        out.push(0.5 * (a_lo + a_hi));
    }
    out.reverse();
    out
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn lu_det(a: &Mat) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if m[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    det
}

/// Gauss–Jordan inverse with partial pivoting; `None` when singular.
pub fn gauss_jordan_inverse(a: &Mat) -> Option<Mat> {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if m[p][k].abs() < 1e-300 {
            return None;
        }
        m.swap(p, k);
        let piv = m[k][k];
        for v in m[k].iter_mut() {
            *v /= piv;
        }
        for i in 0..n {
            if i != k {
                let f = m[i][k];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[i][j] -= f * m[k][j];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    gauss_jordan_inverse(a).map(|inv| matvec(&inv, b))
}

/// Least squares via the normal equations, `x` given as rows.
pub fn ols(x: &Mat, y: &[f64]) -> Vec<f64> {
    let xt = transpose(x);
    let xtx = matmul(&xt, x);
    let xty = matvec(&xt, y);
    solve(&xtx, &xty).expect("full-rank regressors")
}

/// Just-identified IV: (Z'X)⁻¹ Z'y.
pub fn iv(z: &Mat, x: &Mat, y: &[f64]) -> Vec<f64> {
    let zt = transpose(z);
    solve(&matmul(&zt, x), &matvec(&zt, y)).expect("Z'X invertible")
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Textbook KMO: partial correlations from the explicit inverse.
pub fn kmo_textbook(r: &Mat) -> (f64, Vec<f64>) {
    let p = r.len();
    let inv = gauss_jordan_inverse(r).expect("invertible correlation matrix");
    let mut num = vec![0.0; p];
    let mut den = vec![0.0; p];
    for j in 0..p {
        for k in 0..p {
            if j != k {
                let partial = -inv[j][k] / (inv[j][j] * inv[k][k]).sqrt();
                num[j] += r[j][k].powi(2);
                den[j] += r[j][k].powi(2) + partial.powi(2);
            }
        }
    }
    let overall = num.iter().sum::<f64>() / den.iter().sum::<f64>();
    (overall, num.iter().zip(&den).map(|(a, b)| a / b).collect())
}

/// ln Γ(k/2) for a positive integer `k`, by the exact recursions from Γ(1) and Γ(1/2).
pub fn ln_gamma_half_integer(k: u32) -> f64 {
    let (mut acc, mut x) = if k % 2 == 0 { (0.0, 1.0) } else { (0.5 * std::f64::consts::PI.ln(), 0.5) };
    let target = k as f64 / 2.0;
    while x < target - 1e-12 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

pub fn chi2_density(t: f64, df: u32) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let h = df as f64 / 2.0;
    ((h - 1.0) * t.ln() - t / 2.0 - h * 2f64.ln() - ln_gamma_half_integer(df)).exp()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// P(χ²_df > x) by adaptive quadrature of the density over [x, x + tail].
pub fn chi2_sf_quadrature(x: f64, df: u32) -> f64 {
    let k = df as f64;
    let upper = x.max(k) + 60.0 * (2.0 * k).sqrt() + 200.0;
    // split into panels so the adaptive rule sees the peak
    let panels = 64;
    let w = (upper - x) / panels as f64;
    (0..panels)
        .map(|i| {
            let a = x + i as f64 * w;
            adaptive_simpson(&|t| chi2_density(t, df), a, a + w, 1e-15)
        })
        .sum()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Varimax objective on row-normalized loadings, evaluated directly.
pub fn varimax_objective(l: &Mat) -> f64 {
    let p = l.len();
    let m = l[0].len();
    let b: Mat = l
        .iter()
        .map(|r| {
            let h = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter().map(|x| if h > 0.0 { x / h } else { 0.0 }).collect()
        })
        .collect();
    (0..m)
        .map(|j| {
            let sq: Vec<f64> = (0..p).map(|i| b[i][j].powi(2)).collect();
            let mu = mean(&sq);
            sq.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / p as f64
        })
        .sum()
}
