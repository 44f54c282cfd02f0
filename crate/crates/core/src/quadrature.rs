//! One-dimensional quadrature rules and their tensor products.
//!
//! Periodic axes use the composite trapezoid rule on uniform nodes, which
//! integrates trigonometric polynomials of degree below the node count
//! exactly. Dirichlet axes use Gauss-Legendre rules.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Composite trapezoid rule for a periodic function on `[lo, hi)`.
///
/// The right endpoint is omitted since it duplicates the left one.
pub fn trapezoid_periodic(lo: f64, hi: f64, count: usize) -> Rule1d {
    let h = (hi - lo) / count as f64;
    Rule1d {
        nodes: (0..count).map(|i| lo + i as f64 * h).collect(),
        weights: vec![h; count],
    }
}

/// Gauss-Legendre rule with `count` nodes mapped to `[lo, hi]`.
///
/// Nodes are found by Newton iteration on the three-term recurrence, which
/// converges to machine precision for the rule sizes used here (a few hundred).
pub fn gauss_legendre(lo: f64, hi: f64, count: usize) -> Rule1d {
    assert!(count >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let n = count as f64;
    let half = (count + 1) / 2;
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(count, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(count, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    if count % 2 == 1 {
        nodes[count / 2] = 0.0;
    }
    let mid = 0.5 * (lo + hi);
    let scale = 0.5 * (hi - lo);
    Rule1d {
        nodes: nodes.iter().map(|&x| mid + scale * x).collect(),
        weights: weights.iter().map(|&w| scale * w).collect(),
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
