//! Dense symmetric linear algebra and the chi-square tail probability.
//!
//! Storage is `nalgebra::DMatrix`; the decompositions themselves (cyclic
//! Jacobi, Cholesky) and the regularized incomplete gamma function are
//! implemented here so their tolerances and conventions stay fixed.

use nalgebra::DMatrix;
use thiserror::Error;

/// Relative tolerance used when checking symmetry on construction.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Off-diagonal Frobenius norm (relative to the full norm) at which Jacobi stops.
pub const JACOBI_THRESHOLD: f64 = 1e-13;
/// Maximum number of cyclic Jacobi sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| exceeds tolerance")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix has a non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("insufficient observations: {complete} complete rows, need at least {required}")]
    InsufficientObservations { complete: usize, required: usize },
    #[error("need at least 2 columns, got {0}")]
    TooFewColumns(usize),
    #[error("column {0} has zero variance over the complete rows")]
    ZeroVariance(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// A real symmetric matrix. Symmetry and finiteness are checked once, here.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, NumericsError> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(NumericsError::NotSquare { rows, cols });
        }
        let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..rows {
            for j in 0..cols {
                if !m[(i, j)].is_finite() {
                    return Err(NumericsError::NonFinite { row: i, col: j });
                }
                if j > i && (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(NumericsError::NotSymmetric { row: i, col: j });
                }
            }
        }
        // store the exactly symmetric average
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymMatrix(sym))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Reorders rows and columns so that entry (i, j) becomes (perm[i], perm[j]) of the input.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.order();
        SymMatrix(DMatrix::from_fn(n, n, |i, j| self.0[(perm[i], perm[j])]))
    }

    /// Adds `eps` to every diagonal entry.
    pub fn ridged(&self, eps: f64) -> Self {
        let n = self.order();
        SymMatrix(&self.0 + DMatrix::identity(n, n) * eps)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Eigenpairs sorted by descending eigenvalue; column `k` of `vectors` pairs with `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> nalgebra::DVector<f64> {
        self.vectors.column(k).into_owned()
    }
}

fn frobenius_split(a: &DMatrix<f64>) -> (f64, f64) {
    let n = a.nrows();
    let mut off = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)] * a[(i, j)];
            total += v;
            if i != j {
                off += v;
            }
        }
    }
    (off.sqrt(), total.sqrt())
}

/// Cyclic Jacobi eigendecomposition.
///
/// Eigenvalues come back sorted descending (ties keep their original diagonal
/// order) and every eigenvector is flipped so that its largest-magnitude
/// component is non-negative.
pub fn sym_eigen(m: &SymMatrix) -> Result<EigenDecomposition, NumericsError> {
    let n = m.order();
    let mut a = m.as_matrix().clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let (_, total) = frobenius_split(&a);
    let mut sweeps = 0;

    loop {
        let (off, _) = frobenius_split(&a);
        if off <= JACOBI_THRESHOLD * total || off == 0.0 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(NumericsError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps original index order on ties
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));

    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).into_owned();
        let mut pivot = 0;
        for k in 1..n {
            if col[k].abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition { values, vectors, sweeps })
}

/// Lower-triangular Cholesky factor `L` with `A = L L'`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    pub fn factor(m: &SymMatrix) -> Result<Self, NumericsError> {
        let a = m.as_matrix();
        let n = a.nrows();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(NumericsError::NotPositiveDefinite { pivot: j });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
        let n = self.l.nrows();
        if rhs.nrows() != n {
            return Err(NumericsError::DimensionMismatch { expected: n, actual: rhs.nrows() });
        }
        let mut x = rhs.clone();
        for col in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[(i, col)];
                for k in 0..i {
                    s -= self.l[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = x[(i, col)];
                for k in (i + 1)..n {
                    s -= self.l[(k, i)] * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)];
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.l.nrows();
        let inv = self.solve(&DMatrix::identity(n, n)).expect("square identity rhs");
        (&inv + inv.transpose()) * 0.5
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Solves `m · x = rhs` for symmetric positive definite `m`.
pub fn solve_spd(m: &SymMatrix, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
    Cholesky::factor(m)?.solve(rhs)
}

/// Natural log of the determinant of a symmetric positive definite matrix.
pub fn log_det(m: &SymMatrix) -> Result<f64, NumericsError> {
    Ok(Cholesky::factor(m)?.log_det())
}

/// Pearson correlation matrix plus the listwise-deletion bookkeeping.
#[derive(Debug, Clone)]
pub struct Correlation {
    pub matrix: SymMatrix,
    pub n_complete: usize,
    pub n_dropped: usize,
}

/// Pearson correlations over the rows where every column is present.
pub fn correlation_matrix(rows: &[Vec<Option<f64>>]) -> Result<Correlation, NumericsError> {
    let p = rows.first().map_or(0, |r| r.len());
    if p < 2 {
        return Err(NumericsError::TooFewColumns(p));
    }
    let mut complete: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for r in rows {
        if r.len() != p {
            return Err(NumericsError::DimensionMismatch { expected: p, actual: r.len() });
        }
        if r.iter().all(Option::is_some) {
            complete.push(r.iter().map(|v| v.unwrap()).collect());
        }
    }
    let n = complete.len();
    if n < 3 {
        return Err(NumericsError::InsufficientObservations { complete: n, required: 3 });
    }
    let data = DMatrix::from_fn(n, p, |i, j| complete[i][j]);
    let matrix = correlation_of_complete(&data)?;
    Ok(Correlation { matrix, n_complete: n, n_dropped: rows.len() - n })
}

/// Pearson correlation matrix of a fully observed `n × p` data matrix.
pub fn correlation_of_complete(data: &DMatrix<f64>) -> Result<SymMatrix, NumericsError> {
    let (n, p) = data.shape();
    if p < 2 {
        return Err(NumericsError::TooFewColumns(p));
    }
    if n < 3 {
        return Err(NumericsError::InsufficientObservations { complete: n, required: 3 });
    }
    let mut centered = data.clone();
    let mut norms = vec![0.0; p];
    for j in 0..p {
        let mean = data.column(j).sum() / n as f64;
        let mut ss = 0.0;
        for i in 0..n {
            let d = data[(i, j)] - mean;
            centered[(i, j)] = d;
            ss += d * d;
        }
        if ss == 0.0 {
            return Err(NumericsError::ZeroVariance(j));
        }
        norms[j] = ss.sqrt();
    }
    let mut r = DMatrix::<f64>::identity(p, p);
    for a in 0..p {
        for b in (a + 1)..p {
            let dot = centered.column(a).dot(&centered.column(b));
            let v = (dot / (norms[a] * norms[b])).clamp(-1.0, 1.0);
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    Ok(SymMatrix(r))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Returns (P(a, x), Q(a, x)) where P + Q = 1 and both come from the same expansion.
fn incomplete_gamma_pair(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // series for P
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefix).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        // modified Lentz continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefix).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    incomplete_gamma_pair(a, x).0
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    incomplete_gamma_pair(a, x).1
}

/// P(χ²_df > x).
pub fn chi2_sf(x: f64, df: u32) -> f64 {
    if x <= 0.0 || x.is_nan() {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}

/// P(χ²_df ≤ x).
pub fn chi2_cdf(x: f64, df: u32) -> f64 {
    if x <= 0.0 || x.is_nan() {
        return 0.0;
    }
    gamma_p(df as f64 / 2.0, x / 2.0)
}

/// Two-sided normal tail probability of a z statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    chi2_sf(z * z, 1)
}

/// Infinity norm (max abs entry) of a matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
