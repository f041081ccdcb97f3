//! Small dense kernels: Hadamard and Kronecker products, the vec-trick
//! Kronecker mat-vec, and row-major reshape/flatten.
//!
//! Everything is `f64` and row-major. The vec-trick uses a column-wise
//! reshape, which is spelled out explicitly instead of relying on layout.

use std::ops::{Deref, DerefMut};

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2, ShapeBuilder};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for DenseVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Dense matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Result<DenseVector> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "matvec: {}x{} matrix with vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect::<Vec<_>>().into())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        gemm(
            Operand::plain(&self.data, self.rows, self.cols),
            Operand::plain(&other.data, other.rows, other.cols),
            &mut out.data,
            false,
        );
        Ok(out)
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Elementwise product.
pub fn hadamard(x: &[f64], y: &[f64]) -> Result<DenseVector> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("hadamard: lengths {} and {}", x.len(), y.len())));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a * b).collect::<Vec<_>>().into())
}

/// Vector Kronecker product: `out[i * z.len() + j] = x[i] * z[j]`.
pub fn kron_vec(x: &[f64], z: &[f64]) -> DenseVector {
    let mut out = Vec::with_capacity(x.len() * z.len());
    for &a in x {
        out.extend(z.iter().map(|&b| a * b));
    }
    out.into()
}

/// Writes `x ⊗ x` into `out`, which must have length `x.len()²`.
pub fn self_kron_into(x: &[f64], out: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(out.len(), n * n);
    for (i, &a) in x.iter().enumerate() {
        for (o, &b) in out[i * n..(i + 1) * n].iter_mut().zip(x) {
            *o = a * b;
        }
    }
}

/// Vector-Jacobian product of `x ↦ x ⊗ x`: accumulates `J(x)ᵀ g` into `out`.
///
/// `out[k] += Σ_j g[k·n + j]·x[j] + Σ_i g[i·n + k]·x[i]`
pub fn self_kron_vjp(x: &[f64], g: &[f64], out: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(g.len(), n * n);
    debug_assert_eq!(out.len(), n);
    for k in 0..n {
        let row = dot(&g[k * n..(k + 1) * n], x);
        let col: f64 = (0..n).map(|i| g[i * n + k] * x[i]).sum();
        out[k] += row + col;
    }
}

/// Block Kronecker product: block `(i, j)` of the result is `x[i][j] · z`.
pub fn kron_mat(x: &DenseMatrix, z: &DenseMatrix) -> DenseMatrix {
    let rows = x.rows * z.rows;
    let cols = x.cols * z.cols;
    let mut out = DenseMatrix::zeros(rows, cols);
    for i in 0..x.rows {
        for j in 0..x.cols {
            let a = x.get(i, j);
            for k in 0..z.rows {
                for l in 0..z.cols {
                    out.set(i * z.rows + k, j * z.cols + l, a * z.get(k, l));
                }
            }
        }
    }
    out
}

/// Computes `(x ⊗ z)·v` without forming the Kronecker matrix.
///
/// `v` is split column-wise into a `z.cols × x.cols` matrix `V`, the product
/// `Z·V·Xᵀ` is formed, and the result is flattened column-wise.
pub fn kron_matvec(x: &DenseMatrix, z: &DenseMatrix, v: &[f64]) -> Result<DenseVector> {
    if v.len() != x.cols * z.cols {
        return Err(Error::Shape(format!(
            "kron_matvec: vector of length {} against {}x{} ⊗ {}x{}",
            v.len(),
            x.rows,
            x.cols,
            z.rows,
            z.cols
        )));
    }
    // Column j of V is v[j*q .. (j+1)*q].
    let q = z.cols;
    let mut vm = DenseMatrix::zeros(q, x.cols);
    for j in 0..x.cols {
        for l in 0..q {
            vm.set(l, j, v[j * q + l]);
        }
    }
    let zv = z.matmul(&vm)?;
    let zvxt = zv.matmul(&x.transpose())?;
    // Column-wise flatten of the (z.rows × x.rows) result.
    let p = z.rows;
    let mut out = vec![0.0; x.rows * p];
    for i in 0..x.rows {
        for k in 0..p {
            out[i * p + k] = zvxt.get(k, i);
        }
    }
    Ok(out.into())
}

/// Row-major reinterpretation of `v` as a `rows × cols` matrix.
pub fn reshape(v: &[f64], rows: usize, cols: usize) -> Result<DenseMatrix> {
    DenseMatrix::from_vec(rows, cols, v.to_vec())
}

/// Row-major flatten; inverse of [`reshape`].
pub fn flatten(m: &DenseMatrix) -> DenseVector {
    m.data.clone().into()
}

/// Integer square root when `d` is a perfect square.
pub fn exact_sqrt(d: usize) -> Option<usize> {
    let r = (d as f64).sqrt().round() as usize;
    (r * r == d).then_some(r)
}

/// A borrowed row-major matrix, optionally read transposed.
#[derive(Clone, Copy)]
pub(crate) struct Operand<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    transposed: bool,
}

impl<'a> Operand<'a> {
    /// `data` holds a row-major `rows × cols` matrix.
    pub(crate) fn plain(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            transposed: false,
        }
    }

    /// `data` holds a row-major `cols × rows` matrix, read as its transpose.
    pub(crate) fn transposed(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            transposed: true,
        }
    }

    fn view(&self) -> ArrayView2<'a, f64> {
        if self.transposed {
            ArrayView2::from_shape((self.rows, self.cols).f(), self.data)
        } else {
            ArrayView2::from_shape((self.rows, self.cols), self.data)
        }
        .expect("operand shape checked by caller")
    }
}

/// `c = a·b` (or `c += a·b` when `accumulate`), with `c` row-major.
pub(crate) fn gemm(a: Operand<'_>, b: Operand<'_>, c: &mut [f64], accumulate: bool) {
    assert_eq!(a.cols, b.rows, "gemm inner dimensions");
    assert_eq!(a.data.len(), a.rows * a.cols);
    assert_eq!(b.data.len(), b.rows * b.cols);
    let beta = if accumulate { 1.0 } else { 0.0 };
    let mut out = ArrayViewMut2::from_shape((a.rows, b.cols), c).expect("gemm output shape");
    general_mat_mul(1.0, &a.view(), &b.view(), beta, &mut out);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn hadamard_examples() {
        assert_eq!(&*hadamard(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), &[3.0, 8.0]);
        assert_eq!(&*hadamard(&[1.5, -2.0], &[1.0, 1.0]).unwrap(), &[1.5, -2.0]);
        assert_eq!(&*hadamard(&[0.0, 5.0], &[7.0, 0.0]).unwrap(), &[0.0, 0.0]);
        assert!(matches!(hadamard(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn kron_vec_examples() {
        assert_eq!(&*kron_vec(&[1.0, 2.0], &[3.0, 4.0]), &[3.0, 4.0, 6.0, 8.0]);
        let (a, b) = (1.7, -0.3);
        assert_eq!(&*kron_vec(&[a, b], &[a, b]), &[a * a, a * b, b * a, b * b]);
        assert_eq!(&*kron_vec(&[1.0], &[4.0, 5.0, 6.0]), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn kron_mat_examples() {
        let z = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(kron_mat(&m(&[&[1.0]]), &z), z);
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let expected = m(&[
            &[0.0, 1.0, 0.0, 2.0],
            &[1.0, 0.0, 2.0, 0.0],
            &[0.0, 3.0, 0.0, 4.0],
            &[3.0, 0.0, 4.0, 0.0],
        ]);
        assert_eq!(kron_mat(&x, &z), expected);
        assert_ne!(kron_mat(&x, &z), kron_mat(&z, &x));
    }

    #[test]
    fn kron_matvec_examples() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let z = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(
            &*kron_matvec(&x, &z, &[1.0, 0.0, 0.0, 0.0]).unwrap(),
            &[0.0, 1.0, 0.0, 3.0]
        );

        let v = [0.3, -1.0, 2.5, 4.0];
        let i2 = DenseMatrix::identity(2);
        assert_eq!(&*kron_matvec(&i2, &i2, &v).unwrap(), &v);

        assert!(kron_matvec(&x, &z, &[1.0; 3]).is_err());
    }

    #[test]
    fn kron_matvec_rectangular_against_block_matrix() {
        let x = m(&[&[0.5, -1.0], &[2.0, 0.25], &[1.5, 3.0]]);
        let z = m(&[&[1.0, -2.0], &[0.5, 4.0]]);
        let v = [1.0, 2.0, -3.0, 0.5];
        let fast = kron_matvec(&x, &z, &v).unwrap();
        let slow = kron_mat(&x, &z).matvec(&v).unwrap();
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reshape_examples() {
        let r = reshape(&[1.0, 2.0, 2.0, 4.0], 2, 2).unwrap();
        assert_eq!(r, m(&[&[1.0, 2.0], &[2.0, 4.0]]));
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = reshape(&v, 2, 3).unwrap();
        assert_eq!(r, m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]));
        assert_eq!(&*flatten(&r), &v);
        assert!(reshape(&v, 4, 2).is_err());
    }

    #[test]
    fn self_kron_vjp_matches_finite_differences() {
        let x = [0.4, -1.2, 0.7];
        let g = [0.1, -0.2, 0.3, 0.5, 0.05, -0.7, 1.1, 0.9, -0.4];
        let mut analytic = [0.0; 3];
        self_kron_vjp(&x, &g, &mut analytic);
        let f = |x: &[f64]| dot(&kron_vec(x, x), &g);
        let h = 1e-6;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let numeric = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!(
                (numeric - analytic[k]).abs() < 1e-8,
                "{k}: {numeric} vs {}",
                analytic[k]
            );
        }
    }

    #[test]
    fn gemm_transposed_operand() {
        // a: 2x3, b stored as 2x3 and read as 3x2
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, -1.0, 2.0, 1.0, 0.0];
        let mut c = [0.0; 4];
        gemm(Operand::plain(&a, 2, 3), Operand::transposed(&b, 3, 2), &mut c, false);
        assert_eq!(c, [-2.0, 4.0, -2.0, 13.0]);
        gemm(Operand::plain(&a, 2, 3), Operand::transposed(&b, 3, 2), &mut c, true);
        assert_eq!(c, [-4.0, 8.0, -4.0, 26.0]);
    }

    #[test]
    fn exact_sqrt_detects_squares() {
        assert_eq!(exact_sqrt(289), Some(17));
        assert_eq!(exact_sqrt(1), Some(1));
        assert_eq!(exact_sqrt(7), None);
        assert_eq!(exact_sqrt(0), Some(0));
    }
}
