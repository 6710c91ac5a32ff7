//! Gauss-Legendre quadrature.
//!
//! Nodes and weights are computed at construction by Newton iteration on the
//! Legendre recurrence, so any order is available; the crate default for the
//! curvature-remainder integrals is [`DEFAULT_ORDER`].

use crate::error::{Error, Result};

/// Default quadrature order for line integrals of field curvature.
pub const DEFAULT_ORDER: usize = 16;

/// Gauss-Legendre rule of fixed order on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule of the given order (number of nodes, >= 1).
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument {
                arg: "order",
                reason: "quadrature order must be at least 1".to_string(),
            });
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi-style initial guess for the i-th positive root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Legendre recurrence for P_n(x) and dP_n/dx.
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = p1;
                dp = n as f64 * (x * pn - p0) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integral of `f` over [0, 1].
    pub fn integrate_unit(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let xi = 0.5 * (x + 1.0);
            acc += w * f(xi);
        }
        0.5 * acc
    }
}
