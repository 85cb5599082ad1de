//! Small dense complex linear algebra: conjugate transpose, LU solve and
//! inverse with partial pivoting. The matrices here are tiny ((K+1)x(K+1)
//! Gram matrices or MxM priors), so a hand-rolled LU is plenty.

use ndarray::{Array1, Array2};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::{CMat, CVec};

/// Conjugate transpose.
pub fn hermitian<T: Real>(a: &CMat<T>) -> CMat<T> {
    a.t().mapv(|z| z.conj())
}

/// Frobenius norm.
pub fn fro_norm<T: Real>(a: &CMat<T>) -> T {
    a.iter().map(|z| z.norm_sqr()).fold(T::zero(), |s, v| s + v).sqrt()
}

/// Squared Euclidean norm of a vector.
pub fn norm_sqr<T: Real>(v: &CVec<T>) -> T {
    v.iter().map(|z| z.norm_sqr()).fold(T::zero(), |s, v| s + v)
}

/// Largest entry magnitude.
pub fn max_abs<T: Real>(a: &CMat<T>) -> T {
    a.iter().map(|z| z.norm()).fold(T::zero(), T::max)
}

/// Solve `A X = B` for square `A` via LU with partial pivoting.
pub fn solve<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Result<CMat<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("solve: A must be square".into()));
    }
    if b.nrows() != n {
        return Err(Error::Dimension("solve: B row count must match A".into()));
    }
    let m = b.ncols();
    let mut lu = a.clone();
    let mut rhs = b.clone();

    for col in 0..n {
        // pivot
        let mut pivot = col;
        let mut best = lu[(col, col)].norm();
        for r in col + 1..n {
            let v = lu[(r, col)].norm();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if !(best > T::zero()) || !best.is_finite() {
            return Err(Error::Singular(format!("zero pivot at column {col}")));
        }
        if pivot != col {
            for j in 0..n {
                lu.swap((col, j), (pivot, j));
            }
            for j in 0..m {
                rhs.swap((col, j), (pivot, j));
            }
        }
        let d = lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] / d;
            if factor.norm_sqr() == T::zero() {
                continue;
            }
            for j in col..n {
                let v = lu[(col, j)];
                lu[(r, j)] = lu[(r, j)] - factor * v;
            }
            for j in 0..m {
                let v = rhs[(col, j)];
                rhs[(r, j)] = rhs[(r, j)] - factor * v;
            }
        }
    }
    // back substitution
    for col in (0..n).rev() {
        let d = lu[(col, col)];
        for j in 0..m {
            let mut acc = rhs[(col, j)];
            for k in col + 1..n {
                acc = acc - lu[(col, k)] * rhs[(k, j)];
            }
            rhs[(col, j)] = acc / d;
        }
    }
    Ok(rhs)
}

/// Inverse of a square complex matrix.
pub fn inverse<T: Real>(a: &CMat<T>) -> Result<CMat<T>> {
    let n = a.nrows();
    let eye = identity(n);
    solve(a, &eye)
}

/// Complex identity matrix.
pub fn identity<T: Real>(n: usize) -> CMat<T> {
    let mut m = Array2::from_elem((n, n), Complex::new(T::zero(), T::zero()));
    for i in 0..n {
        m[(i, i)] = Complex::new(T::one(), T::zero());
    }
    m
}

/// Matrix-vector product `A v`.
pub fn matvec<T: Real>(a: &CMat<T>, v: &CVec<T>) -> CVec<T> {
    let mut out = Array1::from_elem(a.nrows(), Complex::new(T::zero(), T::zero()));
    for (i, row) in a.outer_iter().enumerate() {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (x, y) in row.iter().zip(v.iter()) {
            acc = acc + *x * *y;
        }
        out[i] = acc;
    }
    out
}

/// Matrix product `A B` (thin wrapper so callers avoid trait-bound noise).
pub fn matmul<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    let (n, k) = (a.nrows(), a.ncols());
    let m = b.ncols();
    debug_assert_eq!(k, b.nrows());
    let mut out = Array2::from_elem((n, m), Complex::new(T::zero(), T::zero()));
    for i in 0..n {
        for l in 0..k {
            let av = a[(i, l)];
            if av.norm_sqr() == T::zero() {
                continue;
            }
            for j in 0..m {
                out[(i, j)] = out[(i, j)] + av * b[(l, j)];
            }
        }
    }
    out
}
