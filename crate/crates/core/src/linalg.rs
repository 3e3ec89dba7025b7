//! Dense real matrices and their eigenvalues.
//!
//! The eigensolver is the classical EISPACK pipeline: diagonal balancing,
//! reduction to upper Hessenberg form by stabilized elementary similarity
//! transforms, then the Francis double-shift QR iteration on the
//! Hessenberg matrix. Only eigenvalues are computed.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T = f64> {
    order: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            data: vec![T::zero(); order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row vectors; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let order = rows.len();
        if rows.iter().any(|r| r.len() != order) {
            return Err(Error::InvalidParameter("matrix rows must form a square".into()));
        }
        Ok(Self {
            order,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.order);
        (0..self.order)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Product with a complex vector, used for eigenpair residual checks.
    pub fn mul_complex_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.order);
        (0..self.order)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (&a, &b)| acc + b * a)
            })
            .collect()
    }

    /// Companion matrix of the monic polynomial with ascending coefficients
    /// `c[0] + c[1] x + … + c[n-1] x^(n-1) + x^n`.
    pub fn companion(monic_low: &[T]) -> Self {
        let n = monic_low.len();
        let mut m = Self::zeros(n);
        for (j, &c) in monic_low.iter().enumerate() {
            m[(0, n - 1 - j)] = -c;
        }
        for i in 1..n {
            m[(i, i - 1)] = T::one();
        }
        m
    }
}

impl<T> Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.order + j]
    }
}

impl<T> IndexMut<(usize, usize)> for SquareMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.order + j]
    }
}

/// All eigenvalues of a real square matrix, in no particular order.
///
/// Complex eigenvalues are returned as exact conjugate pairs.
pub fn eigenvalues<T: Scalar>(matrix: &SquareMatrix<T>) -> Result<Vec<Complex<T>>> {
    let mut a = matrix.clone();
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    balance(&mut a);
    reduce_to_hessenberg(&mut a);
    hessenberg_qr(&mut a)
}

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

fn balance<T: Scalar>(a: &mut SquareMatrix<T>) {
    let n = a.order;
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let mut g = r / radix;
            let mut f = T::one();
            let s = c + r;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < T::lit(0.95) * s {
                done = false;
                let ginv = T::one() / f;
                for j in 0..n {
                    a[(i, j)] *= ginv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Gaussian elimination with partial pivoting; leaves zeros below the subdiagonal.
fn reduce_to_hessenberg<T: Scalar>(a: &mut SquareMatrix<T>) {
    let n = a.order;
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        let mut x = T::zero();
        let mut pivot = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                pivot = j;
            }
        }
        if pivot != m {
            for j in (m - 1)..n {
                let tmp = a[(pivot, j)];
                a[(pivot, j)] = a[(m, j)];
                a[(m, j)] = tmp;
            }
            for j in 0..n {
                let tmp = a[(j, pivot)];
                a[(j, pivot)] = a[(j, m)];
                a[(j, m)] = tmp;
            }
        }
        if x != T::zero() {
            for i in (m + 1)..n {
                let mut y = a[(i, m - 1)];
                if y != T::zero() {
                    y /= x;
                    a[(i, m - 1)] = T::zero();
                    for j in m..n {
                        let am = a[(m, j)];
                        a[(i, j)] -= y * am;
                    }
                    for j in 0..n {
                        let ai = a[(j, i)];
                        a[(j, m)] += y * ai;
                    }
                }
            }
        }
    }
}

fn sign<T: Scalar>(magnitude: T, of: T) -> T {
    if of >= T::zero() {
        magnitude.abs()
    } else {
        -magnitude.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroys `a`).
fn hessenberg_qr<T: Scalar>(a: &mut SquareMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = a.order;
    let zero = T::zero();
    let mut out = vec![Complex::new(zero, zero); n];
    if n == 0 {
        return Ok(out);
    }
    let eps = T::epsilon();
    let mut anorm = zero;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    // `nn` is the index of the last row still active; signed to allow -1.
    let mut nn = n as isize - 1;
    let mut shift = zero;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            // Look for a single small subdiagonal element.
            let mut l = nu;
            while l > 0 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == zero {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = zero;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nu, nu)];
            if l == nu {
                out[nu] = Complex::new(x + shift, zero);
                nn -= 1;
                break;
            }
            let mut y = a[(nu - 1, nu - 1)];
            let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l + 1 == nu {
                let p = T::lit(0.5) * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += shift;
                if q >= zero {
                    let z = p + sign(z, p);
                    let mut hi = x + z;
                    let lo = hi;
                    if z != zero {
                        hi = x - w / z;
                    }
                    out[nu - 1] = Complex::new(lo, zero);
                    out[nu] = Complex::new(hi, zero);
                } else {
                    out[nu - 1] = Complex::new(x + p, z);
                    out[nu] = Complex::new(x + p, -z);
                }
                nn -= 2;
                break;
            }

            if its == MAX_SWEEPS_PER_EIGENVALUE {
                return Err(Error::EigenNoConvergence {
                    order: n,
                    deflated: n - 1 - nu,
                });
            }
            if its == 10 || its == 20 || its == 40 {
                // Exceptional shift.
                shift += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;

            // Find two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[(i + 2, i)] = zero;
                if i != m {
                    a[(i + 2, i - 1)] = zero;
                }
            }

            // Double QR step on rows l..=nu and columns m..=nu.
            for k in m..nu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = zero;
                    if k + 1 != nu {
                        r = a[(k + 2, k - 1)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != zero {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s == zero {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nu {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k + 1 != nu {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * z;
                    }
                    a[(k + 1, j)] -= pp * y;
                    a[(k, j)] -= pp * x;
                }
                let mmin = if nu < k + 3 { nu } else { k + 3 };
                for i in l..=mmin {
                    let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k + 1 != nu {
                        pp += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(out)
}

/// Roots of the polynomial with ascending coefficients `coeffs`, via the
/// companion matrix. Trailing zero coefficients are dropped.
pub fn polynomial_roots<T: Scalar>(coeffs: &[T]) -> Result<Vec<Complex<T>>> {
    let degree = coeffs
        .iter()
        .rposition(|c| *c != T::zero())
        .ok_or_else(|| Error::InvalidParameter("zero polynomial has no roots".into()))?;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    let monic: Vec<T> = coeffs[..degree].iter().map(|&c| c / lead).collect();
    eigenvalues(&SquareMatrix::companion(&monic))
}

/// Null vector of `(A − λI)` by inverse iteration, normalized to unit 2-norm.
///
/// Used to certify eigenvalues through the residual ‖A v − λ v‖.
pub fn eigenvector<T: Scalar>(matrix: &SquareMatrix<T>, lambda: Complex<T>) -> Result<Vec<Complex<T>>> {
    let n = matrix.order;
    // Perturb the shift slightly so the shifted matrix is numerically invertible.
    let scale = lambda.norm().max(T::one());
    let shift = lambda + Complex::new(scale * T::lit(1e3) * T::epsilon(), T::zero());
    let mut lu: Vec<Complex<T>> = matrix.data.iter().map(|&v| Complex::new(v, T::zero())).collect();
    for i in 0..n {
        lu[i * n + i] -= shift;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&a, &b| {
                lu[a * n + k]
                    .norm()
                    .partial_cmp(&lu[b * n + k].norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if pivot != k {
            for j in 0..n {
                lu.swap(k * n + j, pivot * n + j);
            }
            perm.swap(k, pivot);
        }
        let d = lu[k * n + k];
        if d.norm() == T::zero() {
            lu[k * n + k] = Complex::new(T::epsilon() * scale, T::zero());
        }
        let d = lu[k * n + k];
        for i in (k + 1)..n {
            let f = lu[i * n + k] / d;
            lu[i * n + k] = f;
            for j in (k + 1)..n {
                let u = lu[k * n + j];
                lu[i * n + j] -= f * u;
            }
        }
    }
    let mut v = vec![Complex::new(T::one(), T::zero()); n];
    for _ in 0..3 {
        let b: Vec<Complex<T>> = perm.iter().map(|&p| v[p]).collect();
        let mut y = b;
        for i in 0..n {
            for j in 0..i {
                let l = lu[i * n + j];
                let yj = y[j];
                y[i] -= l * yj;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = lu[i * n + j];
                let yj = y[j];
                y[i] -= u * yj;
            }
            y[i] /= lu[i * n + i];
        }
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if !(norm.is_finite() && norm > T::zero()) {
            return Err(Error::EigenNoConvergence {
                order: n,
                deflated: 0,
            });
        }
        v = y.into_iter().map(|z| z / norm).collect();
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn triangular_matrix_eigenvalues_are_its_diagonal() {
        let m = SquareMatrix::from_rows(&[vec![3.0, 1.0, 2.0], vec![0.0, -1.0, 5.0], vec![0.0, 0.0, 0.5]])
            .unwrap();
        let ev = sorted(eigenvalues(&m).unwrap());
        let expect = [-1.0, 0.5, 3.0];
        for (z, e) in ev.iter().zip(expect) {
            assert!((z.re - e).abs() < 1e-13 && z.im.abs() < 1e-13);
        }
    }

    #[test]
    fn rotation_has_conjugate_pair() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let m = SquareMatrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let ev = sorted(eigenvalues(&m).unwrap());
        assert!((ev[0] - Complex::new(c, -s)).norm() < 1e-14);
        assert_eq!(ev[0], ev[1].conj());
    }

    #[test]
    fn polynomial_roots_of_known_cubic() {
        // (x - 1)(x + 2)(x - 3) = x³ - 2x² - 5x + 6
        let roots = sorted(polynomial_roots(&[6.0, -5.0, -2.0, 1.0]).unwrap());
        for (z, e) in roots.iter().zip([-2.0, 1.0, 3.0]) {
            assert!((z.re - e).abs() < 1e-12 && z.im.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_polynomial_rejected() {
        assert!(polynomial_roots::<f64>(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn eigenvector_residual_is_small() {
        let m = SquareMatrix::from_rows(&[
            vec![4.0, -2.0, 1.0, 0.5],
            vec![1.0, 1.0, -3.0, 2.0],
            vec![0.0, 2.0, 0.5, -1.0],
            vec![1.5, 0.0, 1.0, -2.0],
        ])
        .unwrap();
        for lambda in eigenvalues(&m).unwrap() {
            let v = eigenvector(&m, lambda).unwrap();
            let av = m.mul_complex_vec(&v);
            let res: f64 = av
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b * lambda).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-10, "λ={lambda} residual={res}");
        }
    }
}
