//! Orthonormal Legendre bases on the reference interval and square.
//!
//! The 1D functions are `L_n(s) = sqrt((2n+1)/2) P_n(s)` on `[-1, 1]`; the 2D
//! basis of degree `k` is `{ L_a(X) L_b(V) : a + b <= k }`, ordered by total
//! degree and then by decreasing power of `X`. Both are orthonormal on their
//! reference domain, so on a physical cell the mass matrix is the identity
//! times the Jacobian.

use crate::error::{Error, Result};
use crate::poly::Poly2;

pub const MAX_DEGREE: usize = 2;

/// `(a, b)` exponent pairs of the 2D basis, in storage order.
const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

pub fn check_degree(k: usize) -> Result<()> {
    if k > MAX_DEGREE {
        Err(Error::UnsupportedDegree(k))
    } else {
        Ok(())
    }
}

/// Number of 2D basis functions of total degree `<= k`.
#[inline]
pub const fn n_basis(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Exponent pair `(a, b)` of 2D basis function `m`.
#[inline]
pub fn pair(m: usize) -> (usize, usize) {
    PAIRS[m]
}

/// Orthonormal Legendre function `L_n` at `s`.
#[inline]
pub fn legendre(n: usize, s: f64) -> f64 {
    match n {
        0 => std::f64::consts::FRAC_1_SQRT_2,
        1 => 1.224_744_871_391_589 * s,
        2 => 1.581_138_830_084_19 * 0.5 * (3.0 * s * s - 1.0),
        _ => {
            let (p, _) = crate::quadrature::legendre_with_derivative(n, s);
            ((2 * n + 1) as f64 / 2.0).sqrt() * p
        }
    }
}

/// Derivative of [`legendre`].
#[inline]
pub fn legendre_derivative(n: usize, s: f64) -> f64 {
    match n {
        0 => 0.0,
        1 => 1.224_744_871_391_589,
        2 => 1.581_138_830_084_19 * 3.0 * s,
        _ => {
            let (_, d) = crate::quadrature::legendre_with_derivative(n, s);
            ((2 * n + 1) as f64 / 2.0).sqrt() * d
        }
    }
}

/// Monomial coefficients of `L_n`, lowest power first.
pub fn legendre_monomials(n: usize) -> [f64; 3] {
    let c1 = 1.224_744_871_391_589;
    let c2 = 1.581_138_830_084_19;
    match n {
        0 => [std::f64::consts::FRAC_1_SQRT_2, 0.0, 0.0],
        1 => [0.0, c1, 0.0],
        2 => [-0.5 * c2, 0.0, 1.5 * c2],
        _ => panic!("legendre_monomials supports n <= 2"),
    }
}

/// Value of 2D basis function `m` at reference point `(xi, eta)`.
#[inline]
pub fn eval(m: usize, xi: f64, eta: f64) -> f64 {
    let (a, b) = PAIRS[m];
    legendre(a, xi) * legendre(b, eta)
}

/// Values of all basis functions of degree `k` at `(xi, eta)`.
pub fn eval_all(k: usize, xi: f64, eta: f64, out: &mut [f64]) {
    let lx = [legendre(0, xi), legendre(1, xi), legendre(2, xi)];
    let lv = [legendre(0, eta), legendre(1, eta), legendre(2, eta)];
    for (m, o) in out.iter_mut().enumerate().take(n_basis(k)) {
        let (a, b) = PAIRS[m];
        *o = lx[a] * lv[b];
    }
}

/// Basis function `m` as a monomial polynomial in reference coordinates.
pub fn as_poly(m: usize) -> Poly2 {
    let (a, b) = PAIRS[m];
    let ca = legendre_monomials(a);
    let cb = legendre_monomials(b);
    let mut p = Poly2::zero();
    for (i, &x) in ca.iter().enumerate() {
        for (j, &y) in cb.iter().enumerate() {
            if x != 0.0 && y != 0.0 {
                p.set(i, j, x * y);
            }
        }
    }
    p
}

/// Value of the constant basis function; a cell average is `c_0 * PHI0`.
pub const PHI0: f64 = 0.5;
