//! Dense complex matrices at Wronskian scale (a few dozen rows at most),
//! with the three operations the determinant formulas need: LU
//! determinants, threshold-guarded inversion, and directional determinant
//! derivatives via Jacobi's formula.

use crate::error::{Error, Result};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, ONE);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(CMatrix { rows: r, cols: c, data })
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

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn set_col(&mut self, c: usize, col: &[Complex64]) {
        assert_eq!(col.len(), self.rows);
        for (r, v) in col.iter().enumerate() {
            self.set(r, c, *v);
        }
    }

    pub fn with_col(&self, c: usize, col: &[Complex64]) -> CMatrix {
        let mut out = self.clone();
        out.set_col(c, col);
        out
    }

    pub fn mul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        let mut out = vec![ZERO; self.rows];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[i] += self.get(i, j) * v[j];
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &CMatrix, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<CMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a = f(*a, *b);
        }
        Ok(out)
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn transpose(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn conj(&self) -> CMatrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.conj();
        }
        out
    }

    pub fn conj_transpose(&self) -> CMatrix {
        self.transpose().conj()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entry modulus within one row.
    pub fn row_scale(&self, r: usize) -> f64 {
        (0..self.cols).map(|c| self.get(r, c).norm()).fold(0.0, f64::max)
    }

    /// Max over rows of the row scale; the reference magnitude for
    /// singularity thresholds.
    pub fn scale_max_row(&self) -> f64 {
        (0..self.rows).map(|r| self.row_scale(r)).fold(0.0, f64::max)
    }

    fn minor(&self, skip_r: usize, skip_c: usize) -> CMatrix {
        let n = self.rows;
        let mut out = CMatrix::zeros(n - 1, n - 1);
        let mut ri = 0;
        for r in 0..n {
            if r == skip_r {
                continue;
            }
            let mut ci = 0;
            for c in 0..n {
                if c == skip_c {
                    continue;
                }
                out.set(ri, ci, self.get(r, c));
                ci += 1;
            }
            ri += 1;
        }
        out
    }
}

/// Partial-pivot LU factors, kept even when a pivot vanishes so callers
/// can read off a zero determinant.
pub struct LuFactors {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

pub fn lu_factor(m: &CMatrix) -> LuFactors {
    assert!(m.is_square(), "LU factor of non-square matrix");
    let n = m.rows();
    let mut lu = m.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut singular = false;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].norm();
        for r in (k + 1)..n {
            let v = lu[r * n + k].norm();
            if v > best {
                best = v;
                p = r;
            }
        }
        if p != k {
            for c in 0..n {
                lu.swap(k * n + c, p * n + c);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = lu[k * n + k];
        if pivot.norm() == 0.0 {
            singular = true;
            continue;
        }
        for r in (k + 1)..n {
            let f = lu[r * n + k] / pivot;
            lu[r * n + k] = f;
            for c in (k + 1)..n {
                let sub = f * lu[k * n + c];
                lu[r * n + c] -= sub;
            }
        }
    }
    LuFactors { n, lu, perm, sign, singular }
}

impl LuFactors {
    pub fn det(&self) -> Complex64 {
        let mut d = Complex64::new(self.sign, 0.0);
        for k in 0..self.n {
            d *= self.lu[k * self.n + k];
        }
        d
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// min/max pivot moduli; their ratio is a cheap conditioning probe.
    pub fn pivot_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for k in 0..self.n {
            let v = self.lu[k * self.n + k].norm();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn solve_vec(&self, b: &[Complex64]) -> Option<Vec<Complex64>> {
        if self.singular {
            return None;
        }
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 1..n {
            for c in 0..r {
                let sub = self.lu[r * n + c] * y[c];
                y[r] -= sub;
            }
        }
        for r in (0..n).rev() {
            for c in (r + 1)..n {
                let sub = self.lu[r * n + c] * y[c];
                y[r] -= sub;
            }
            y[r] /= self.lu[r * n + r];
        }
        Some(y)
    }

    pub fn solve_mat(&self, b: &CMatrix) -> Option<CMatrix> {
        let n = self.n;
        assert_eq!(b.rows(), n);
        let mut out = CMatrix::zeros(n, b.cols());
        for c in 0..b.cols() {
            let col: Vec<Complex64> = (0..n).map(|r| b.get(r, c)).collect();
            let sol = self.solve_vec(&col)?;
            for r in 0..n {
                out.set(r, c, sol[r]);
            }
        }
        Some(out)
    }
}

/// Determinant via partial-pivot LU. A zero pivot makes the product of
/// diagonal factors zero, so singular input yields 0 without an error.
pub fn lu_det(m: &CMatrix) -> Complex64 {
    if m.rows() == 0 {
        return ONE;
    }
    lu_factor(m).det()
}

/// Inverse guarded by the relative singularity threshold
/// `tol_rel * scale^n`, `scale` the max row norm.
pub fn inverse(m: &CMatrix, tol_rel: f64) -> Result<CMatrix> {
    assert!(m.is_square());
    let n = m.rows();
    let lu = lu_factor(m);
    let det = lu.det();
    let scale = m.scale_max_row();
    let threshold = tol_rel * scale.powi(n as i32);
    if det.norm() <= threshold {
        return Err(Error::SingularMatrix { det_abs: det.norm(), threshold });
    }
    lu.solve_mat(&CMatrix::identity(n))
        .ok_or(Error::SingularMatrix { det_abs: det.norm(), threshold })
}

// Pivot ratios below this route det_derivative through cofactors, where
// the adjugate identity det * tr(M^-1 M') is unreliable.
const PIVOT_RATIO_CUTOFF: f64 = 1e-8;

/// Directional derivative of the determinant: given M and entrywise M',
/// returns d/dt det(M + t M') at t = 0, i.e. tr(adj(M) M').
///
/// Well-conditioned input goes through the LU identity
/// `det(M) tr(M^-1 M')`; otherwise the cofactor sum is evaluated
/// directly, which stays exact for singular M.
pub fn det_derivative(m: &CMatrix, mprime: &CMatrix) -> Complex64 {
    assert!(m.is_square());
    assert_eq!(m.rows(), mprime.rows());
    assert_eq!(m.cols(), mprime.cols());
    let n = m.rows();
    if n == 0 {
        return ZERO;
    }
    if n == 1 {
        return mprime.get(0, 0);
    }
    let lu = lu_factor(m);
    let (lo, hi) = lu.pivot_range();
    if !lu.is_singular() && hi > 0.0 && lo / hi > PIVOT_RATIO_CUTOFF {
        let det = lu.det();
        if let Some(y) = lu.solve_mat(mprime) {
            let mut tr = ZERO;
            for k in 0..n {
                tr += y.get(k, k);
            }
            return det * tr;
        }
    }
    // Cofactor route: sum_{r,c} (-1)^{r+c} det(minor_{rc}(M)) * M'_{rc}.
    let mut acc = ZERO;
    for r in 0..n {
        for c in 0..n {
            let mp = mprime.get(r, c);
            if mp == ZERO {
                continue;
            }
            let cof = lu_det(&m.minor(r, c));
            let sign = if (r + c) % 2 == 0 { ONE } else { -ONE };
            acc += sign * cof * mp;
        }
    }
    acc
}
