//! Small dense real linear algebra.
//!
//! Only what the learners and the stability monitor need: vectors, row-major
//! matrices, Frobenius and spectral norms, spectral-radius estimates and
//! products over a window of local matrices of dynamics.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense real column vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Validating constructor: non-empty, all entries finite.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::domain("vector must have dimension > 0"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("vector has non-finite entries"));
        }
        Ok(Vector(data))
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * c).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + c * b).collect())
    }

    /// Stacks several vectors into one.
    pub fn concat(parts: &[&Vector]) -> Vector {
        Vector(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector(data)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// `c * I`
    pub fn scaled_identity(n: usize, c: f64) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::domain("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::Dimension {
                expected: c,
                got: bad.len(),
            });
        }
        Matrix::from_row_major(r, c, rows.concat())
    }

    /// Single-column matrix holding `v`.
    pub fn column(v: &Vector) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.as_slice().to_vec(),
        }
    }

    /// `a bᵀ`
    pub fn outer(a: &Vector, b: &Vector) -> Self {
        Matrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.len() {
            return Err(Error::Dimension {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok(Vector::from(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect::<Vec<f64>>(),
        ))
    }

    /// `mᵀ v` without materialising the transpose.
    pub fn tr_mul_vec(&self, v: &Vector) -> Result<Vector> {
        if self.rows != v.len() {
            return Err(Error::Dimension {
                expected: self.rows,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(Vector::from(out))
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// `(M + Mᵀ) / 2`
    pub fn symmetrized(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:>12.6}")).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

pub fn frobenius_norm(m: &Matrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::domain("frobenius_norm: non-finite entry"));
    }
    Ok(m.data.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Outcome of a power-iteration estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Largest singular value by power iteration on `mᵀm`.
///
/// Starts from the normalised all-ones vector. If that start lies in the
/// null space of a non-zero `m`, iteration restarts from the unit vector on
/// the column of largest norm. The returned value is a Rayleigh quotient and
/// never exceeds the true norm.
pub fn spectral_norm_est(m: &Matrix, tol: f64, max_iter: usize) -> Result<SpectralEstimate> {
    if !m.is_finite() {
        return Err(Error::domain("spectral_norm_est: non-finite entry"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::domain("spectral_norm_est: tol must be > 0"));
    }
    let n = m.cols;
    let mut x = Vector::from(vec![1.0 / (n as f64).sqrt(); n]);
    let mut best = 0.0_f64;
    let mut prev = f64::NAN;
    let mut restarted = false;
    // below this the iterate is numerically in the null space
    let floor = 64.0 * f64::EPSILON * m.max_abs() * (n as f64);
    let max_iter = max_iter.max(1);
    // the last quarter of the budget goes to Gram squaring
    let squarings = (max_iter / 4).min(60);
    let power_iter = max_iter - squarings;
    for it in 1..=power_iter {
        let y = m.mul_vec(&x)?;
        let sigma = y.norm();
        best = best.max(sigma);
        let z = m.tr_mul_vec(&y)?;
        let zn = z.norm();
        if sigma <= floor || zn == 0.0 {
            if restarted || m.max_abs() == 0.0 {
                return Ok(SpectralEstimate {
                    value: best,
                    converged: m.max_abs() == 0.0,
                    iterations: it,
                });
            }
            restarted = true;
            let j = (0..n)
                .max_by(|&a, &b| column_norm_sq(m, a).total_cmp(&column_norm_sq(m, b)))
                .unwrap_or(0);
            x = Vector::zeros(n);
            x[j] = 1.0;
            prev = f64::NAN;
            continue;
        }
        x = z.scale(1.0 / zn);
        if (sigma - prev).abs() <= tol * sigma {
            return Ok(SpectralEstimate {
                value: best,
                converged: true,
                iterations: it,
            });
        }
        prev = sigma;
    }
    // slow convergence means nearly equal top singular values; squaring the
    // Gram matrix widens the gap geometrically
    let (value, converged, used) = refine_by_squaring(m, &x, tol, squarings)?;
    Ok(SpectralEstimate {
        value: best.max(value),
        converged,
        iterations: power_iter + used,
    })
}

fn refine_by_squaring(m: &Matrix, start: &Vector, tol: f64, budget: usize) -> Result<(f64, bool, usize)> {
    let mut prev = m.mul_vec(start)?.norm();
    if budget == 0 {
        return Ok((prev, false, 0));
    }
    let mut gram = m.transpose().matmul(m)?;
    let mut x = start.clone();
    for used in 1..=budget {
        gram = gram.matmul(&gram)?;
        let scale = gram.max_abs();
        if scale == 0.0 || !scale.is_finite() {
            break;
        }
        gram = gram.scale(1.0 / scale);
        let z = gram.mul_vec(&x)?;
        let zn = z.norm();
        if zn == 0.0 {
            break;
        }
        x = z.scale(1.0 / zn);
        let sigma = m.mul_vec(&x)?.norm();
        if (sigma - prev).abs() <= tol * sigma {
            return Ok((sigma.max(prev), true, used));
        }
        prev = prev.max(sigma);
    }
    Ok((prev, false, budget))
}

fn column_norm_sq(m: &Matrix, j: usize) -> f64 {
    (0..m.rows).map(|i| m[(i, j)] * m[(i, j)]).sum()
}

/// Spectral radius of `I − η g gᵀ` (or any `I − a bᵀ` with `bᵀa = eta_gnorm2`).
///
/// The spectrum is `{1 (dim − 1 times), 1 − η‖g‖²}`.
pub fn spectral_radius_rank1_lmd(eta_gnorm2: f64, dim: usize) -> f64 {
    let active = (1.0 - eta_gnorm2).abs();
    if dim <= 1 {
        active
    } else {
        active.max(1.0)
    }
}

/// Spectral radius of a general square matrix via Gelfand's formula,
/// evaluated by repeated normalised squaring:
/// `log ρ = Σᵢ log‖Nᵢ‖ / 2ⁱ` where `N₀ = M` and `Nᵢ₊₁ = (Nᵢ/‖Nᵢ‖)²`.
pub fn spectral_radius_est(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension {
            expected: m.rows,
            got: m.cols,
        });
    }
    let mut current = m.clone();
    let mut log_rho = 0.0;
    let mut weight = 1.0;
    for _ in 0..64 {
        let c = frobenius_norm(&current)?;
        if c == 0.0 {
            return Ok(0.0);
        }
        let term = weight * c.ln();
        log_rho += term;
        if term.abs() < 1e-15 && weight < 1e-3 {
            break;
        }
        let normalized = current.scale(1.0 / c);
        current = normalized.matmul(&normalized)?;
        weight *= 0.5;
    }
    Ok(log_rho.exp())
}

/// Product of a window of square matrices, ordered oldest first.
///
/// The newest matrix ends up on the left: `[M₁, M₂, M₃] ↦ M₃·M₂·M₁`.
pub fn window_product(mats: &[Matrix]) -> Result<Matrix> {
    window_product_iter(mats.iter())
}

pub(crate) fn window_product_iter<'a, I>(mats: I) -> Result<Matrix>
where
    I: IntoIterator<Item = &'a Matrix>,
{
    let mut iter = mats.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::domain("window_product: empty window"))?;
    if !first.is_square() {
        return Err(Error::Dimension {
            expected: first.rows,
            got: first.cols,
        });
    }
    let mut acc = first.clone();
    for m in iter {
        if m.rows != acc.rows || m.cols != acc.cols {
            return Err(Error::Dimension {
                expected: acc.rows,
                got: m.rows.max(m.cols),
            });
        }
        acc = m.matmul(&acc)?;
    }
    Ok(acc)
}
