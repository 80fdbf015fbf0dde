//! Small dense bivariate polynomials in monomial form.

use std::ops::{Add, Mul, Sub};

/// Largest power stored per variable.
pub const MAX_POWER: usize = 6;

/// `sum c[p][q] X^p V^q` with `p, q < MAX_POWER`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poly2 {
    c: [[f64; MAX_POWER]; MAX_POWER],
}

impl Default for Poly2 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Poly2 {
    pub const fn zero() -> Self {
        Self {
            c: [[0.0; MAX_POWER]; MAX_POWER],
        }
    }

    pub fn constant(value: f64) -> Self {
        let mut p = Self::zero();
        p.c[0][0] = value;
        p
    }

    pub fn monomial(px: usize, pv: usize, coeff: f64) -> Self {
        let mut p = Self::zero();
        p.c[px][pv] = coeff;
        p
    }

    #[inline]
    pub fn coeff(&self, px: usize, pv: usize) -> f64 {
        self.c[px][pv]
    }

    #[inline]
    pub fn set(&mut self, px: usize, pv: usize, value: f64) {
        self.c[px][pv] = value;
    }

    #[inline]
    pub fn add_to(&mut self, px: usize, pv: usize, value: f64) {
        self.c[px][pv] += value;
    }

    /// Total degree of the highest non-zero monomial (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        let mut d = 0;
        for p in 0..MAX_POWER {
            for q in 0..MAX_POWER {
                if self.c[p][q] != 0.0 {
                    d = d.max(p + q);
                }
            }
        }
        d
    }

    pub fn eval(&self, x: f64, v: f64) -> f64 {
        let mut acc = 0.0;
        for p in (0..MAX_POWER).rev() {
            let row = &self.c[p];
            let mut inner = 0.0;
            for q in (0..MAX_POWER).rev() {
                inner = inner * v + row[q];
            }
            acc = acc * x + inner;
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for row in out.c.iter_mut() {
            for c in row.iter_mut() {
                *c *= s;
            }
        }
        out
    }

    /// `p(X + sx, V + sv)` expanded back into monomials.
    pub fn shifted(&self, sx: f64, sv: f64) -> Self {
        let bx = shift_matrix(sx);
        let bv = shift_matrix(sv);
        let mut out = Self::zero();
        for p in 0..MAX_POWER {
            for q in 0..MAX_POWER {
                let c = self.c[p][q];
                if c == 0.0 {
                    continue;
                }
                for a in 0..=p {
                    let ca = c * bx[p][a];
                    for b in 0..=q {
                        out.c[a][b] += ca * bv[q][b];
                    }
                }
            }
        }
        out
    }

    /// `p(ax X + bx, av V + bv)` for affine maps of each variable.
    pub fn affine(&self, ax: f64, bx: f64, av: f64, bv: f64) -> Self {
        let mut scaled = Self::zero();
        for p in 0..MAX_POWER {
            for q in 0..MAX_POWER {
                scaled.c[p][q] = self.c[p][q] * ax.powi(p as i32) * av.powi(q as i32);
            }
        }
        if ax == 0.0 || av == 0.0 {
            return Self::constant(self.eval(bx, bv));
        }
        scaled.shifted(bx / ax, bv / av)
    }

    /// `Q(X, V) = int_{anchor}^{X} p(s, V) ds`.
    ///
    /// Panics if the result would exceed the stored degree.
    pub fn x_antiderivative(&self, anchor: f64) -> Self {
        let mut out = Self::zero();
        for p in 0..MAX_POWER {
            for q in 0..MAX_POWER {
                let c = self.c[p][q];
                if c == 0.0 {
                    continue;
                }
                assert!(p + 1 < MAX_POWER, "antiderivative exceeds stored degree");
                out.c[p + 1][q] += c / (p as f64 + 1.0);
            }
        }
        let base = out.eval_x_only(anchor);
        for q in 0..MAX_POWER {
            out.c[0][q] -= base[q];
        }
        out
    }

    /// `d p / dX`.
    pub fn dx(&self) -> Self {
        let mut out = Self::zero();
        for p in 1..MAX_POWER {
            for q in 0..MAX_POWER {
                out.c[p - 1][q] = self.c[p][q] * p as f64;
            }
        }
        out
    }

    /// `d p / dV`.
    pub fn dv(&self) -> Self {
        let mut out = Self::zero();
        for p in 0..MAX_POWER {
            for q in 1..MAX_POWER {
                out.c[p][q - 1] = self.c[p][q] * q as f64;
            }
        }
        out
    }

    /// Coefficients in `V` after substituting `X = x`.
    fn eval_x_only(&self, x: f64) -> [f64; MAX_POWER] {
        let mut out = [0.0; MAX_POWER];
        let mut xp = 1.0;
        for p in 0..MAX_POWER {
            for q in 0..MAX_POWER {
                out[q] += self.c[p][q] * xp;
            }
            xp *= x;
        }
        out
    }
}

/// Row `p` holds the coefficients of `(X + s)^p` in powers of `X`.
fn shift_matrix(s: f64) -> [[f64; MAX_POWER]; MAX_POWER] {
    let mut m = [[0.0; MAX_POWER]; MAX_POWER];
    m[0][0] = 1.0;
    for p in 1..MAX_POWER {
        for a in 0..=p {
            let from_x = if a > 0 { m[p - 1][a - 1] } else { 0.0 };
            m[p][a] = from_x + s * m[p - 1][a];
        }
    }
    m
}

impl Add for Poly2 {
    type Output = Poly2;
    fn add(mut self, rhs: Poly2) -> Poly2 {
        for p in 0..MAX_POWER {
            for q in 0..MAX_POWER {
                self.c[p][q] += rhs.c[p][q];
            }
        }
        self
    }
}

impl Sub for Poly2 {
    type Output = Poly2;
    fn sub(mut self, rhs: Poly2) -> Poly2 {
        for p in 0..MAX_POWER {
            for q in 0..MAX_POWER {
                self.c[p][q] -= rhs.c[p][q];
            }
        }
        self
    }
}

impl Mul for Poly2 {
    type Output = Poly2;
    /// Panics if a product term exceeds the stored degree.
    fn mul(self, rhs: Poly2) -> Poly2 {
        let mut out = Poly2::zero();
        for p in 0..MAX_POWER {
            for q in 0..MAX_POWER {
                let a = self.c[p][q];
                if a == 0.0 {
                    continue;
                }
                for r in 0..MAX_POWER {
                    for s in 0..MAX_POWER {
                        let b = rhs.c[r][s];
                        if b == 0.0 {
                            continue;
                        }
                        assert!(
                            p + r < MAX_POWER && q + s < MAX_POWER,
                            "polynomial product exceeds stored degree"
                        );
                        out.c[p + r][q + s] += a * b;
                    }
                }
            }
        }
        out
    }
}
