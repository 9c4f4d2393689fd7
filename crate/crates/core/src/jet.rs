//! Univariate truncated Taylor arithmetic.
//!
//! A `Jet<N>` stores the normalized Taylor coefficients `c[k] = f⁽ᵏ⁾(x₀)/k!`
//! of a function around a point, truncated after order `N − 1`. Arithmetic on
//! jets propagates exact derivatives through closed-form expressions, so an
//! analytic solution written once against [`Scalar`] yields both its value and
//! its derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::special;

/// Operations an analytic closed form needs. Implemented for `f64` and jets.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn erfc(self) -> Self;
    fn recip(self) -> Self {
        Self::constant(1.0) / self
    }
    fn square(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn erfc(self) -> Self {
        special::erfc(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub c: [f64; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Self { c }
    }

    /// The identity function expanded around `x0`.
    pub fn variable(x0: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = x0;
        if N > 1 {
            c[1] = 1.0;
        }
        Self { c }
    }

    /// `k`-th derivative, `k! · c[k]`.
    pub fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.c[k] * fact
    }

    pub fn order(&self) -> usize {
        N - 1
    }

    /// Composition `g(self)` given the Taylor coefficients of `g'∘self`:
    /// `h_k = (1/k) Σ_{j=1..k} j·a_j·q_{k−j}` where `h' = q·a'`.
    fn integrate_chain(&self, h0: f64, q: &Self) -> Self {
        let mut h = [0.0; N];
        h[0] = h0;
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * q.c[k - j];
            }
            h[k] = s / k as f64;
        }
        Self { c: h }
    }
}

impl<const N: usize> Scalar for Jet<N> {
    fn constant(v: f64) -> Self {
        Jet::constant(v)
    }

    fn value(&self) -> f64 {
        self.c[0]
    }

    fn exp(self) -> Self {
        // e' = e·a'  =>  e_k = (1/k) Σ j·a_j·e_{k−j}
        let mut e = [0.0; N];
        e[0] = self.c[0].exp();
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Self { c: e }
    }

    fn sqrt(self) -> Self {
        // s² = a  =>  s_k = (a_k − Σ_{j=1..k−1} s_j s_{k−j}) / (2 s_0)
        let mut s = [0.0; N];
        s[0] = self.c[0].sqrt();
        for k in 1..N {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc / (2.0 * s[0]);
        }
        Self { c: s }
    }

    fn erfc(self) -> Self {
        // erfc'(z) = −2/√π·exp(−z²)
        let q = (-(self * self)).exp() * (-std::f64::consts::FRAC_2_SQRT_PI);
        self.integrate_chain(special::erfc(self.c[0]), &q)
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for k in 0..N {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for k in 0..N {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for k in 0..N {
            self.c[k] = -self.c[k];
        }
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut c = [0.0; N];
        for k in 0..N {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * rhs.c[k - j];
            }
            c[k] = s;
        }
        Self { c }
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        // q·b = a  =>  q_k = (a_k − Σ_{j=1..k} b_j q_{k−j}) / b_0
        let mut q = [0.0; N];
        for k in 0..N {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= rhs.c[j] * q[k - j];
            }
            q[k] = s / rhs.c[0];
        }
        Self { c: q }
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Jet<N> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.c[0] -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        for k in 0..N {
            self.c[k] *= rhs;
        }
        self
    }
}

impl<const N: usize> Div<f64> for Jet<N> {
    type Output = Self;
    fn div(mut self, rhs: f64) -> Self {
        for k in 0..N {
            self.c[k] /= rhs;
        }
        self
    }
}

/// `cosh(a)·e^{−m}` without forming `cosh(a)`; finite whenever `|a| ≤ m`.
pub fn scaled_cosh<T: Scalar>(a: T, m: f64) -> T {
    ((a - m).exp() + (-a - m).exp()) * 0.5
}

/// `sinh(a)·e^{−m}`.
pub fn scaled_sinh<T: Scalar>(a: T, m: f64) -> T {
    ((a - m).exp() - (-a - m).exp()) * 0.5
}

/// `sech(a)`, evaluated through `e^{−|a|}`.
pub fn sech<T: Scalar>(a: T) -> T {
    let e = if a.value() >= 0.0 { (-a).exp() } else { a.exp() };
    e * 2.0 / (e * e + 1.0)
}
