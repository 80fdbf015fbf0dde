//! Gauss–Legendre rules on `[-1, 1]`.

use std::sync::OnceLock;

/// An `n`-point Gauss–Legendre rule, exact for polynomials of degree `2n - 1`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Computes the rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for k in 0..m {
            // Tricomi initial guess
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const MAX_CACHED: usize = 12;

/// Cached rule with `n` nodes (`1 <= n <= 12`).
pub fn gauss(n: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=MAX_CACHED).map(GaussRule::new).collect());
    assert!((1..=MAX_CACHED).contains(&n), "no cached Gauss rule with {n} nodes");
    &rules[n - 1]
}

/// Fewest Gauss nodes that integrate a polynomial of degree `degree` exactly.
pub fn nodes_for_degree(degree: usize) -> usize {
    (degree + 2) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in 1..=MAX_CACHED {
            let s: f64 = gauss(n).weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n={n}: {s}");
        }
    }

    #[test]
    fn exact_for_monomials() {
        for n in 1..=MAX_CACHED {
            let rule = gauss(n);
            for p in 0..(2 * n) {
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                let q = rule.integrate(-1.0, 1.0, |x| x.powi(p as i32));
                assert!((q - exact).abs() < 1e-13, "n={n} p={p}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn known_two_point_rule() {
        let r = gauss(2);
        assert!((r.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn node_count_for_degree() {
        assert_eq!(nodes_for_degree(0), 1);
        assert_eq!(nodes_for_degree(1), 1);
        assert_eq!(nodes_for_degree(5), 3);
        assert_eq!(nodes_for_degree(11), 6);
    }
}
