//! Scalar types that the pointwise pipeline is generic over.
//!
//! [`Field`] is implemented by `f64` and by [`Dual`], a first-order jet
//! carrying a value and a gradient with respect to up to [`MAX_DIM`]
//! ambient coordinates. Evaluating any expression or linear solve over
//! `Dual` yields the exact first derivatives of the result.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Largest ambient dimension supported by jets (n ≤ 3 gives 7; the
/// convex-form model needs 2n + 1 as well).
pub const MAX_DIM: usize = 8;

pub trait Field:
    Copy
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn cst(x: f64) -> Self;
    /// Real part used for pivoting and branch decisions.
    fn re(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, k: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    /// k-th derivative of psi(u) = exp(-1/u) (u > 0), 0 otherwise.
    fn psi(self, k: u32) -> Self;
    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }
    fn is_exact_zero(self) -> bool;
    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
}

impl Field for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn psi(self, k: u32) -> Self {
        psi_deriv(self, k)
    }
    fn is_exact_zero(self) -> bool {
        self == 0.0
    }
}

/// psi^(k)(u) = P_k(1/u) exp(-1/u) with P_0 = 1 and
/// P_{k+1}(w) = w^2 (P_k(w) - P_k'(w)).
pub fn psi_deriv(u: f64, k: u32) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let w = 1.0 / u;
    let e = (-w).exp();
    if e == 0.0 {
        return 0.0;
    }
    // coefficients of P_k in powers of w
    let mut p: Vec<f64> = vec![1.0];
    for _ in 0..k {
        let mut next = vec![0.0; p.len() + 2];
        for (j, c) in p.iter().enumerate() {
            next[j + 2] += c;
            if j > 0 {
                next[j + 1] -= j as f64 * c;
            }
        }
        p = next;
    }
    let mut acc = 0.0;
    for c in p.iter().rev() {
        acc = acc * w + c;
    }
    acc * e
}

/// First-order jet: value and gradient.
#[derive(Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: [f64; MAX_DIM],
}

impl fmt::Debug for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dual({}, {:?})", self.v, &self.d)
    }
}

impl Dual {
    pub const fn constant(v: f64) -> Self {
        Dual { v, d: [0.0; MAX_DIM] }
    }

    /// The coordinate function x_i with value `v`.
    pub fn variable(v: f64, i: usize) -> Self {
        let mut d = [0.0; MAX_DIM];
        d[i] = 1.0;
        Dual { v, d }
    }

    /// Seeds a point: component i is x_i with unit derivative in slot i.
    pub fn seed(p: &[f64]) -> Vec<Dual> {
        assert!(p.len() <= MAX_DIM, "jet dimension {} exceeds {}", p.len(), MAX_DIM);
        p.iter().enumerate().map(|(i, &x)| Dual::variable(x, i)).collect()
    }

    #[inline]
    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= dv;
        }
        Dual { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(mut self, o: Dual) -> Dual {
        self.v += o.v;
        for i in 0..MAX_DIM {
            self.d[i] += o.d[i];
        }
        self
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(mut self, o: Dual) -> Dual {
        self.v -= o.v;
        for i in 0..MAX_DIM {
            self.d[i] -= o.d[i];
        }
        self
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        let mut d = [0.0; MAX_DIM];
        for i in 0..MAX_DIM {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
        }
        Dual { v: self.v * o.v, d }
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        let mut d = [0.0; MAX_DIM];
        for i in 0..MAX_DIM {
            d[i] = (self.d[i] - q * o.d[i]) * inv;
        }
        Dual { v: q, d }
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(mut self) -> Dual {
        self.v = -self.v;
        for x in self.d.iter_mut() {
            *x = -*x;
        }
        self
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        *self = *self + o;
    }
}

impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, o: Dual) {
        *self = *self - o;
    }
}

impl MulAssign for Dual {
    #[inline]
    fn mul_assign(&mut self, o: Dual) {
        *self = *self * o;
    }
}

impl Field for Dual {
    #[inline]
    fn cst(x: f64) -> Self {
        Dual::constant(x)
    }
    #[inline]
    fn re(self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
    fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Dual::constant(1.0);
        }
        self.chain(self.v.powi(k), k as f64 * self.v.powi(k - 1))
    }
    fn powf(self, p: f64) -> Self {
        self.chain(self.v.powf(p), p * self.v.powf(p - 1.0))
    }
    fn psi(self, k: u32) -> Self {
        self.chain(psi_deriv(self.v, k), psi_deriv(self.v, k + 1))
    }
    fn is_exact_zero(self) -> bool {
        self.v == 0.0 && self.d.iter().all(|x| *x == 0.0)
    }
    fn scale(mut self, c: f64) -> Self {
        self.v *= c;
        for x in self.d.iter_mut() {
            *x *= c;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_derivatives_match_differences() {
        for &u in &[0.2, 0.5, 1.0, 3.0] {
            for k in 0..3 {
                let h = 1e-5;
                let fd = (psi_deriv(u + h, k) - psi_deriv(u - h, k)) / (2.0 * h);
                let an = psi_deriv(u, k + 1);
                assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "u={u} k={k}");
            }
        }
        assert_eq!(psi_deriv(0.0, 2), 0.0);
        assert_eq!(psi_deriv(-1.0, 0), 0.0);
    }

    #[test]
    fn dual_quotient_rule() {
        let x = Dual::variable(2.0, 0);
        let y = Dual::variable(3.0, 1);
        let q = (x * x) / y;
        assert!((q.v - 4.0 / 3.0).abs() < 1e-15);
        assert!((q.d[0] - 4.0 / 3.0).abs() < 1e-15);
        assert!((q.d[1] + 4.0 / 9.0).abs() < 1e-15);
    }
}
