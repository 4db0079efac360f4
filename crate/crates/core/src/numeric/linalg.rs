//! Dense linear algebra over [`Field`] scalars.
//!
//! Matrices are row-major `Vec<T>` with an explicit size. Pivoting uses the
//! real part, so a solve over dual numbers differentiates the same pivot
//! sequence as the value solve.

use super::jet::Field;
use nalgebra::{DMatrix, Complex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    /// Ratio of largest to smallest pivot magnitude seen before failure.
    pub pivot_ratio: f64,
}

/// LU factorization with partial pivoting, in place.
#[derive(Debug, Clone)]
pub struct Lu<T: Field> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
    sign: f64,
    pub pivot_ratio: f64,
}

impl<T: Field> Lu<T> {
    pub fn new(mut a: Vec<T>, n: usize) -> Result<Self, Singular> {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut pmax: f64 = 0.0;
        let mut pmin = f64::INFINITY;
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.re().abs()));
        if scale == 0.0 || !scale.is_finite() {
            return Err(Singular { pivot_ratio: f64::INFINITY });
        }
        for k in 0..n {
            let mut best = k;
            let mut bv = a[k * n + k].re().abs();
            for i in k + 1..n {
                let v = a[i * n + k].re().abs();
                if v > bv {
                    bv = v;
                    best = i;
                }
            }
            if bv <= scale * 1e-300 || !bv.is_finite() {
                return Err(Singular { pivot_ratio: f64::INFINITY });
            }
            pmax = pmax.max(bv);
            pmin = pmin.min(bv);
            if best != k {
                for j in 0..n {
                    a.swap(k * n + j, best * n + j);
                }
                perm.swap(k, best);
                sign = -sign;
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                a[i * n + k] = f;
                for j in k + 1..n {
                    let u = a[k * n + j];
                    a[i * n + j] -= f * u;
                }
            }
        }
        Ok(Lu { n, lu: a, perm, sign, pivot_ratio: if n == 0 { 1.0 } else { pmax / pmin } })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    pub fn det(&self) -> T {
        let mut d = T::cst(self.sign);
        for i in 0..self.n {
            d *= self.lu[i * self.n + i];
        }
        d
    }
}

pub fn solve<T: Field>(a: Vec<T>, n: usize, b: &[T]) -> Result<Vec<T>, Singular> {
    Ok(Lu::new(a, n)?.solve(b))
}

/// Determinant; zero for singular input.
pub fn det<T: Field>(a: Vec<T>, n: usize) -> T {
    if n == 0 {
        return T::one();
    }
    match Lu::new(a, n) {
        Ok(lu) => lu.det(),
        Err(_) => T::zero(),
    }
}

pub fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for l in 0..k {
            let x = a[i * k + l];
            if x == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i * m + j] += x * b[l * m + j];
            }
        }
    }
    c
}

pub fn transpose(a: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            t[j * n + i] = a[i * m + j];
        }
    }
    t
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigenvalues of a small real square matrix (row-major).
pub fn eigenvalues(a: &[f64], n: usize) -> Vec<Complex<f64>> {
    if n == 0 {
        return vec![];
    }
    let m = DMatrix::from_row_slice(n, n, a);
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Eigenvector of `a` for a real eigenvalue `mu`, by inverse iteration.
pub fn real_eigenvector(a: &[f64], n: usize, mu: f64) -> Option<Vec<f64>> {
    let shift = mu + 1e-10 * (1.0 + mu.abs());
    let mut m = a.to_vec();
    for i in 0..n {
        m[i * n + i] -= shift;
    }
    let lu = Lu::new(m, n).ok()?;
    let mut v = vec![1.0; n];
    for (i, x) in v.iter_mut().enumerate() {
        *x += 0.1 * i as f64;
    }
    for _ in 0..8 {
        let w = lu.solve(&v);
        let nw = norm(&w);
        if !nw.is_finite() || nw == 0.0 {
            return None;
        }
        v = w.iter().map(|x| x / nw).collect();
    }
    Some(v)
}

/// Orthonormal basis of the orthogonal complement of the span of `rows`
/// (each of length d), by Gram-Schmidt against the coordinate vectors.
pub fn complement_basis(rows: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let rn = norm(r);
        let mut v = r.clone();
        for b in &basis {
            let c = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let nv = norm(&v);
        if nv > 1e-9 * rn && nv > 1e-300 {
            basis.push(v.iter().map(|x| x / nv).collect());
        }
    }
    let k = basis.len();
    let mut out = Vec::new();
    let mut cands: Vec<usize> = (0..d).collect();
    // prefer coordinate directions least aligned with the given rows
    cands.sort_by(|&i, &j| {
        let wi: f64 = basis.iter().map(|b| b[i] * b[i]).sum();
        let wj: f64 = basis.iter().map(|b| b[j] * b[j]).sum();
        wi.partial_cmp(&wj).unwrap()
    });
    for i in cands {
        if basis.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
            basis.push(v.clone());
            out.push(v);
        }
    }
    debug_assert_eq!(out.len(), d - k);
    out
}

/// Least-squares coefficients of `v` in the (full column rank) basis `cols`.
pub fn coefficients(cols: &[Vec<f64>], v: &[f64]) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut g = vec![0.0; k * k];
    let mut r = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            g[i * k + j] = dot(&cols[i], &cols[j]);
        }
        r[i] = dot(&cols[i], v);
    }
    solve(g, k, &r).ok()
}

/// Singular values of an n×m matrix, largest first.
pub fn singular_values(a: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mat = DMatrix::from_row_slice(n, m, a);
    let mut s: Vec<f64> = mat.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Matrix exponential of a small square matrix.
pub fn expm(a: &[f64], n: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(n, n, a).exp();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
    out
}

/// Orthonormal basis (as vectors) of the dominant k-dimensional invariant
/// subspace of `a`, by orthogonal iteration.
pub fn dominant_subspace(a: &[f64], n: usize, k: usize, iters: usize) -> Vec<Vec<f64>> {
    if k == 0 {
        return vec![];
    }
    let mat = DMatrix::from_row_slice(n, n, a);
    let mut q = DMatrix::from_fn(n, k, |i, j| if i == j { 1.0 } else { 0.1 * ((i * 7 + j * 3) % 5) as f64 + 0.01 });
    for _ in 0..iters {
        let z = &mat * &q;
        q = z.qr().q();
        if !q.iter().all(|x| x.is_finite()) {
            break;
        }
    }
    (0..k).map(|j| q.column(j).iter().copied().collect()).collect()
}

/// Minimum-norm least-squares solution of J x = r for an m×d matrix J.
pub fn pinv_solve(j: &[f64], m: usize, d: usize, r: &[f64]) -> Vec<f64> {
    let a = DMatrix::from_row_slice(m, d, j);
    let b = nalgebra::DVector::from_column_slice(r);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    match svd.solve(&b, smax * 1e-10) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![0.0; d],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::jet::Dual;

    #[test]
    fn solve_and_det() {
        let a = vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let x = solve(a.clone(), 3, &[1.0, 2.0, 3.0]).unwrap();
        let r = matmul(&a, &x, 3, 3, 1);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
        assert!((det(a, 3) - 18.0).abs() < 1e-12);
    }

    #[test]
    fn dual_solve_differentiates() {
        // x(t) solves [[t, 1], [1, 2]] x = [1, 0]; x0 = 2 / (2t - 1)
        let t = Dual::variable(1.5, 0);
        let one = Dual::constant(1.0);
        let a = vec![t, one, one, Dual::constant(2.0)];
        let x = solve(a, 2, &[one, Dual::constant(0.0)]).unwrap();
        let expect = -4.0 / (2.0 * 1.5 - 1.0f64).powi(2);
        assert!((x[0].d[0] - expect).abs() < 1e-13);
    }

    #[test]
    fn eigen_of_rotation() {
        let ev = eigenvalues(&[0.0, -1.0, 1.0, 0.0], 2);
        for e in ev {
            assert!((e.norm() - 1.0).abs() < 1e-12);
        }
    }
}
