//! Dense linear algebra for small symmetric matrices.
//!
//! Everything here is sized for embedding orders of a few dozen at most:
//! the Gram matrices are `l x l` with `l = 10` by default, and one
//! eigen-decomposition is solved per (training instance, feature) pair.
//! A cyclic Jacobi solver is used because it is provably convergent on
//! symmetric input and returns orthonormal vectors directly. All kernels
//! use fixed loop orders so results are bit-reproducible across runs.

use crate::error::{Error, Result};

/// Maximum supported order of a symmetric matrix.
pub const MAX_ORDER: usize = 64;

/// Relative symmetry tolerance accepted by [`SymMatrix::new`].
const SYMMETRY_TOL: f64 = 1e-12;

/// Off-diagonal convergence threshold for the Jacobi sweep, relative to
/// the Frobenius norm of the input.
const JACOBI_TOL: f64 = 1e-14;

/// Hard cap on Jacobi sweeps.
const MAX_SWEEPS: usize = 100;

/// Magnitude below which a vector component is ignored by the sign rule.
const SIGN_EPS: f64 = 1e-12;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from explicit rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged row in Matrix::from_rows");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    /// Wrap an existing row-major buffer. Panics if sizes disagree.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer size mismatch");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    /// Row `r` as a slice.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Column `c` copied out.
    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Row-major backing buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Symmetric matrix of order `2..=64`, exactly symmetric in storage.
///
/// Construction validates finiteness and symmetry (to `1e-12` relative to
/// the largest entry) and then stores the symmetrized average, so the
/// eigensolver never sees asymmetric round-off.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Validate and wrap a full row-major `order x order` buffer.
    pub fn new(order: usize, data: Vec<f64>) -> Result<Self> {
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(Error::Domain(format!(
                "symmetric matrix order {order} outside 2..={MAX_ORDER}"
            )));
        }
        if data.len() != order * order {
            return Err(Error::Domain(format!(
                "expected {} entries for order {order}, got {}",
                order * order,
                data.len()
            )));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::Domain("non-finite entry in symmetric matrix".into()));
        }
        let max_abs = data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tol = SYMMETRY_TOL * max_abs;
        let mut sym = data;
        for i in 0..order {
            for j in (i + 1)..order {
                let a = sym[i * order + j];
                let b = sym[j * order + i];
                if (a - b).abs() > tol {
                    return Err(Error::Domain(format!(
                        "matrix not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                sym[i * order + j] = avg;
                sym[j * order + i] = avg;
            }
        }
        Ok(SymMatrix { order, data: sym })
    }

    /// Build from explicit rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let order = rows.len();
        let mut data = Vec::with_capacity(order * order);
        for row in rows {
            if row.len() != order {
                return Err(Error::Domain("ragged rows in symmetric matrix".into()));
            }
            data.extend_from_slice(row);
        }
        SymMatrix::new(order, data)
    }

    /// Internal constructor for buffers already exactly symmetric.
    fn from_exact(order: usize, data: Vec<f64>) -> Result<Self> {
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(Error::Domain(format!(
                "symmetric matrix order {order} outside 2..={MAX_ORDER}"
            )));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::Domain("non-finite entry in symmetric matrix".into()));
        }
        Ok(SymMatrix { order, data })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.order + c]
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Copy out as a general matrix.
    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.order,
            cols: self.order,
            data: self.data.clone(),
        }
    }
}

/// Eigen-decomposition of a symmetric matrix.
///
/// Eigenvalues are ascending; `eigenvectors` holds the matching
/// orthonormal vectors as columns. Each vector is sign-normalized: its
/// first component of magnitude above `1e-12` is positive. Columns with
/// exactly equal eigenvalues are ordered lexicographically by entries.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    /// Eigenvector for the smallest eigenvalue.
    pub fn min_eigenvector(&self) -> Vec<f64> {
        self.eigenvectors.col(0)
    }
}

/// Gram matrix `A^T A`, exactly symmetric by construction.
pub fn gram(a: &Matrix) -> Result<SymMatrix> {
    if a.rows() < 1 || a.cols() < 2 {
        return Err(Error::Domain(format!(
            "gram input must be at least 1x2, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::Domain("non-finite entry in gram input".into()));
    }
    let l = a.cols();
    let mut data = vec![0.0; l * l];
    for i in 0..l {
        for j in i..l {
            let mut acc = 0.0;
            for r in 0..a.rows() {
                acc += a.get(r, i) * a.get(r, j);
            }
            data[i * l + j] = acc;
            data[j * l + i] = acc;
        }
    }
    if !data.iter().all(|x| x.is_finite()) {
        return Err(Error::Domain("gram product overflowed".into()));
    }
    SymMatrix::from_exact(l, data)
}

/// Product `S * V` with a fixed accumulation order.
pub fn mat_mul(s: &SymMatrix, v: &Matrix) -> Result<Matrix> {
    if v.rows() != s.order() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {0}x{0} times {1}x{2}",
            s.order(),
            v.rows(),
            v.cols()
        )));
    }
    let l = s.order();
    let p = v.cols();
    let mut out = Matrix::zeros(l, p);
    for i in 0..l {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..l {
                acc += s.get(i, k) * v.get(k, j);
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Matrix-vector product `S * x`.
pub fn mat_vec(s: &SymMatrix, x: &[f64]) -> Vec<f64> {
    let l = s.order();
    assert_eq!(x.len(), l, "vector length mismatch");
    let mut out = vec![0.0; l];
    for i in 0..l {
        let mut acc = 0.0;
        for k in 0..l {
            acc += s.get(i, k) * x[k];
        }
        out[i] = acc;
    }
    out
}

/// Cyclic Jacobi eigen-decomposition.
///
/// Sweeps rotate every off-diagonal pair until the largest off-diagonal
/// magnitude falls below `1e-14 * ||S||_F`, capped at 100 sweeps.
pub fn eigen_sym(s: &SymMatrix) -> EigenDecomposition {
    let n = s.order();
    let mut a = s.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let threshold = JACOBI_TOL * s.frobenius_norm();

    for _ in 0..MAX_SWEEPS {
        let mut off_max = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off_max = off_max.max(a[p * n + q].abs());
            }
        }
        if off_max <= threshold {
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // tan of the rotation angle; the smaller root keeps |t| <= 1
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                let tau = sn / (1.0 + c);

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    let new_ip = aip - sn * (aiq + tau * aip);
                    let new_iq = aiq + sn * (aip - tau * aiq);
                    a[i * n + p] = new_ip;
                    a[p * n + i] = new_ip;
                    a[i * n + q] = new_iq;
                    a[q * n + i] = new_iq;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = vip - sn * (viq + tau * vip);
                    v[i * n + q] = viq + sn * (vip - tau * viq);
                }
            }
        }
    }

    // Extract, sign-normalize, then order ascending with a lexicographic
    // tie-break on exactly equal eigenvalues.
    let mut columns: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| {
            let mut col: Vec<f64> = (0..n).map(|i| v[i * n + j]).collect();
            sign_normalize(&mut col);
            (a[j * n + j], col)
        })
        .collect();
    columns.sort_by(|x, y| {
        x.0.total_cmp(&y.0).then_with(|| {
            for (xa, ya) in x.1.iter().zip(y.1.iter()) {
                let ord = xa.total_cmp(ya);
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });

    let eigenvalues: Vec<f64> = columns.iter().map(|(lambda, _)| *lambda).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (j, (_, col)) in columns.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            eigenvectors.set(i, j, x);
        }
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Flip the vector so its first component of magnitude above `1e-12` is
/// positive. Idempotent; leaves all-tiny vectors untouched.
pub fn sign_normalize(v: &mut [f64]) {
    for &x in v.iter() {
        if x.abs() > SIGN_EPS {
            if x < 0.0 {
                for y in v.iter_mut() {
                    *y = -*y;
                }
            }
            return;
        }
    }
}
