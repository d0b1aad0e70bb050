use crate::error::{Error, Result};

/// Gauss-Legendre rule mapped to [0, 1].
///
/// Weights sum to 1; a rule of a given order integrates polynomials up to
/// degree `2*order - 1` exactly.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

/// Nodes and weights of the `order`-point Gauss-Legendre rule on [0, 1].
///
/// Nodes are found by Newton iteration on the Legendre recurrence starting
/// from the Chebyshev guess; symmetric about 0.5.
pub fn gauss_legendre(order: usize) -> QuadratureRule {
    assert!(order >= 1, "quadrature order must be at least 1");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // root of P_n on [-1, 1], descending
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 1..n {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x); // descending root -> ascending node
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 && n > 1 {
        nodes[n / 2] = 0.5;
    }
    if n == 1 {
        nodes[0] = 0.5;
        weights[0] = 1.0;
    }
    QuadratureRule { nodes, weights }
}

/// Tensor-product integral of `f` over the unit square.
///
/// Summation order is fixed (outer u, inner v) so results are deterministic
/// for a given rule.
pub fn integrate2d<F: Fn(f64, f64) -> f64>(f: F, rule: &QuadratureRule) -> Result<f64> {
    let mut total = 0.0;
    for (i, &u) in rule.nodes.iter().enumerate() {
        let mut row = 0.0;
        for (j, &v) in rule.nodes.iter().enumerate() {
            let val = f(u, v);
            if !val.is_finite() {
                return Err(Error::NonFiniteIntegrand { u, v });
            }
            row += rule.weights[j] * val;
        }
        total += rule.weights[i] * row;
    }
    Ok(total)
}
