//! Dense complex matrix helpers on top of `ndarray`.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::{lit, to_f64, Real};

/// Dense complex matrix.
pub type CMat<T> = Array2<Complex<T>>;

pub fn zeros<T: Real>(n: usize) -> CMat<T> {
    Array2::from_elem((n, n), Complex::zero())
}

pub fn identity<T: Real>(n: usize) -> CMat<T> {
    let mut m = zeros(n);
    for i in 0..n {
        m[(i, i)] = Complex::one();
    }
    m
}

/// Conjugate transpose.
pub fn dagger<T: Real>(m: &CMat<T>) -> CMat<T> {
    m.t().mapv(|z| z.conj())
}

pub fn commutator<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    a.dot(b) - b.dot(a)
}

pub fn trace<T: Real>(m: &CMat<T>) -> Complex<T> {
    m.diag().iter().fold(Complex::zero(), |acc, z| acc + *z)
}

pub fn max_abs<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).norm()))
}

/// Largest absolute column sum.
pub fn norm1<T: Real>(m: &CMat<T>) -> T {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<T>())
        .fold(T::zero(), T::max)
}

/// Matrix exponential by scaling and squaring with an adaptive Taylor core.
pub fn expm<T: Real>(a: &CMat<T>) -> CMat<T> {
    let n = a.nrows();
    let norm = to_f64(norm1(a));
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale: T = lit(0.5f64.powi(squarings as i32));
    let b = a.mapv(|z| z * scale);

    let tol = T::epsilon() * lit(0.5);
    let mut result = identity::<T>(n);
    let mut term = identity::<T>(n);
    for k in 1..=60 {
        let inv_k: T = lit(1.0 / k as f64);
        term = term.dot(&b).mapv(|z| z * inv_k);
        result += &term;
        if norm1(&term) <= tol * norm1(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Hermitian residual max |m - m†|.
pub fn hermiticity_residual<T: Real>(m: &CMat<T>) -> T {
    let n = m.nrows();
    let mut r = T::zero();
    for i in 0..n {
        for j in i..n {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

/// Smallest eigenvalue of the Hermitian part of `m`, computed in double precision.
pub fn hermitian_min_eigenvalue<T: Real>(m: &CMat<T>) -> f64 {
    let n = m.nrows();
    let h = DMatrix::from_fn(n, n, |i, j| {
        let z = (m[(i, j)] + m[(j, i)].conj()) * lit::<T>(0.5);
        Complex::new(to_f64(z.re), to_f64(z.im))
    });
    h.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
