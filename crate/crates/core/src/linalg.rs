//! Small dense matrices and the Cholesky machinery behind the Gaussian
//! conditionals. Everything here is K×K or N×K sized, so plain row-major
//! storage with straightforward loops is all that is needed.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RawMat<F>", bound(deserialize = "F: Scalar"))]
pub struct Mat<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

#[derive(serde::Deserialize)]
struct RawMat<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> TryFrom<RawMat<F>> for Mat<F> {
    type Error = Error;

    fn try_from(r: RawMat<F>) -> Result<Self> {
        Mat::from_vec(r.rows, r.cols, r.data)
    }
}

impl<F: Scalar> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: F) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[F]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn fill(&mut self, value: F) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> Mat<F> {
        let k = self.cols;
        let mut g = Mat::zeros(k, k);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..k {
                let ra = r[a];
                if ra == F::zero() {
                    continue;
                }
                let grow = g.row_mut(a);
                for b in a..k {
                    grow[b] += ra * r[b];
                }
            }
        }
        g.symmetrize_upper();
        g
    }

    /// Copies the upper triangle onto the lower one.
    pub fn symmetrize_upper(&mut self) {
        for a in 0..self.rows {
            for b in 0..a {
                self[(a, b)] = self[(b, a)];
            }
        }
    }

    /// Elementwise product in place.
    pub fn hadamard_assign(&mut self, other: &Mat<F>) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a *= b;
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, scale: F, other: &Mat<F>) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn add_identity(&mut self, scale: F) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += scale;
        }
    }

    pub fn trace(&self) -> F {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Sum of all elements of `self ∘ other`.
    pub fn frobenius_dot(&self, other: &Mat<F>) -> F {
        self.data
            .iter()
            .zip(&other.data)
            .fold(F::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Mat<F> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<F> Index<(usize, usize)> for Mat<F> {
    type Output = F;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> IndexMut<(usize, usize)> for Mat<F> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `Λ = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky<F> {
    l: Mat<F>,
}

impl<F: Scalar> Cholesky<F> {
    /// Factors a symmetric positive definite matrix. Only the lower triangle
    /// of `a` is read.
    pub fn factor(a: &Mat<F>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Shape(format!(
                "cholesky of a {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for p in 0..j {
                diag -= l[(j, p)] * l[(j, p)];
            }
            if !(diag > F::zero()) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite { minor: j });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    /// Factors `a`, retrying once with `1e-8 · trace(a) / n` added to the
    /// diagonal when the first attempt fails.
    pub fn factor_with_jitter(a: &Mat<F>) -> Result<Self> {
        match Self::factor(a) {
            Ok(c) => Ok(c),
            Err(Error::NotPositiveDefinite { minor }) => {
                let n = a.rows().max(1);
                let jitter = F::of(1e-8) * a.trace().abs() / F::of(n as f64);
                log::warn!("cholesky failed at minor {minor}; retrying with jitter {jitter:e}");
                let mut b = a.clone();
                b.add_identity(jitter);
                Self::factor(&b)
            }
            Err(e) => Err(e),
        }
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &Mat<F> {
        &self.l
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [F]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = b[i];
            for p in 0..i {
                s -= row[p] * b[p];
            }
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_in_place(&self, y: &mut [F]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in (i + 1)..n {
                s -= self.l[(p, i)] * y[p];
            }
            y[i] = s / self.l[(i, i)];
        }
    }

    /// Solves `Λ x = b` in place.
    pub fn solve_in_place(&self, b: &mut [F]) {
        self.forward_in_place(b);
        self.backward_in_place(b);
    }

    pub fn solve(&self, b: &[F]) -> Vec<F> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `log det Λ`.
    pub fn log_det(&self) -> F {
        let two = F::of(2.0);
        (0..self.dim()).map(|i| two * self.l[(i, i)].ln()).sum()
    }
}
