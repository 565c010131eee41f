//! Complex scalar, 2×2 and dense matrix arithmetic.
//!
//! Everything is double precision. Dense matrices are stored row-major.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Optical field amplitude.
pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
/// The imaginary unit `j`.
pub const J: C64 = C64::new(0.0, 1.0);

/// A 2×2 complex matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix2 {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2::new(ONE, ZERO, ZERO, ONE);

    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self { a, b, c, d }
    }

    /// The symmetric 50:50 beam splitter `(1/√2)[[1, j], [j, 1]]`.
    pub fn beam_splitter() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(C64::new(s, 0.0), C64::new(0.0, s), C64::new(0.0, s), C64::new(s, 0.0))
    }

    /// Phase shifter on the upper arm, `diag(e^{jθ}, 1)`.
    pub fn phase_shifter(theta: f64) -> Self {
        Self::new(C64::from_polar(1.0, theta), ZERO, ZERO, ONE)
    }

    #[inline]
    pub fn apply(&self, x0: C64, x1: C64) -> (C64, C64) {
        (self.a * x0 + self.b * x1, self.c * x0 + self.d * x1)
    }

    /// Applies the conjugate transpose without materializing it.
    #[inline]
    pub fn apply_adjoint(&self, x0: C64, x1: C64) -> (C64, C64) {
        (
            self.a.conj() * x0 + self.c.conj() * x1,
            self.b.conj() * x0 + self.d.conj() * x1,
        )
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.a.conj(), self.c.conj(), self.b.conj(), self.d.conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![self.a, self.b], vec![self.c, self.d]])
            .expect("2x2 rows are rectangular")
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;

    fn mul(self, r: Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    /// Size of the entry buffer in bytes.
    pub fn byte_len(&self) -> usize {
        self.data.len() * std::mem::size_of::<C64>()
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if self.cols != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix applied to length-{} vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c].conj();
            }
        }
        out
    }

    /// Largest entry magnitude of `MᴴM − I`.
    pub fn hermitian_deviation(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::NotSquare { rows: self.rows, cols: self.cols });
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                let mut acc = ZERO;
                for r in 0..n {
                    acc += self.data[r * n + i].conj() * self.data[r * n + k];
                }
                if i == k {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        Ok(worst)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        max_abs_diff(&self.data, &other.data)
    }
}

impl fmt::Display for DenseMatrix {
    /// One line per row, `re+imj` literals separated by commas.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|z| complex_literal(*z)).collect();
            writeln!(f, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Formats `z` as `re+imj` / `re-imj` using the shortest round-trip decimal form.
pub fn complex_literal(z: C64) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}j", z.re, -z.im)
    } else {
        format!("{}+{}j", z.re, z.im)
    }
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn l2_norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A batch of equal-width samples stored contiguously, one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    width: usize,
    data: Vec<T>,
}

impl<T: Copy> Batch<T> {
    pub fn from_flat(width: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || !data.len().is_multiple_of(width) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form rows of width {width}",
                data.len()
            )));
        }
        Ok(Self { width, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let width = rows.first().map(|r| r.as_ref().len()).ok_or(Error::EmptyBatch)?;
        let mut data = Vec::with_capacity(width * rows.len());
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != width {
                return Err(Error::DimensionMismatch(format!(
                    "sample {i} has width {} but sample 0 has width {width}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(width, data)
    }

    pub fn filled(len: usize, width: usize, value: T) -> Self {
        Self { width, data: vec![value; len * width] }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.width)
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, T> {
        self.data.chunks_exact_mut(self.width)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_rows(self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    /// Keeps the first `width` columns of every row.
    pub fn truncate_columns(&self, width: usize) -> Self {
        assert!(width <= self.width && width > 0);
        let data = self.rows().flat_map(|r| r[..width].iter().copied()).collect();
        Self { width, data }
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(&T) -> U) -> Batch<U> {
        Batch { width: self.width, data: self.data.iter().map(f).collect() }
    }
}
