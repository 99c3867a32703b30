//! Gauss–Legendre rules, deterministic summation and integration settings.

use serde::{Deserialize, Serialize};

/// How an integral over a copula measure is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationMethod {
    TensorGauss,
    MonteCarlo,
}

/// Integration settings. For `TensorGauss`, `points` is the node count per
/// axis; for `MonteCarlo` it is the sample count, and `(seed, points)` fully
/// determine the estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub method: IntegrationMethod,
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-3
}

impl IntegrationSpec {
    pub fn gauss(nodes: usize) -> Self {
        IntegrationSpec { method: IntegrationMethod::TensorGauss, points: nodes, seed: 0, tolerance: 1e-3 }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        IntegrationSpec { method: IntegrationMethod::MonteCarlo, points: samples, seed, tolerance: 5e-3 }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// A quadrature rule on [0, 1].
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

impl Rule {
    /// `n`-point Gauss–Legendre on [0, 1].
    pub fn gauss_legendre(n: usize) -> Rule {
        let (x, w) = gauss_legendre(n);
        Rule {
            nodes: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|v| 0.5 * v).collect(),
        }
    }

    /// `panels` equal panels of `per_panel`-point Gauss–Legendre.
    pub fn composite(panels: usize, per_panel: usize) -> Rule {
        let base = Rule::gauss_legendre(per_panel);
        let h = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let a = p as f64 * h;
            for (t, w) in base.nodes.iter().zip(&base.weights) {
                nodes.push(a + h * t);
                weights.push(h * w);
            }
        }
        Rule { nodes, weights }
    }

    /// Composite rule pushed towards both endpoints by the substitution
    /// `t = u^2 (3 - 2u)`. Its Jacobian `6u(1-u)` vanishes at 0 and 1, which
    /// tames integrable endpoint singularities such as `t^(-1/2)`.
    pub fn clustered(panels: usize, per_panel: usize) -> Rule {
        let c = Rule::composite(panels, per_panel);
        let nodes = c.nodes.iter().map(|&u| u * u * (3.0 - 2.0 * u)).collect();
        let weights = c.nodes.iter().zip(&c.weights).map(|(&u, &w)| w * 6.0 * u * (1.0 - u)).collect();
        Rule { nodes, weights }
    }

    /// Default rule with roughly `n` nodes: clustered panels of 8 points.
    pub fn standard(n: usize) -> Rule {
        if n < 16 {
            return Rule::clustered(1, n.max(1));
        }
        Rule::clustered(n.div_ceil(8), 8)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.nodes.iter().zip(&self.weights).map(move |(&t, &w)| (a + h * t, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let terms: Vec<f64> = self.on(a, b).map(|(x, w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }
}

/// Pairwise (cascade) summation in fixed order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Mean and standard error of the mean, summed pairwise.
pub fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Uniform grid `0, 1/(n-1), ..., 1`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Trapezoid rule for samples of a function on an equispaced grid over [0, 1].
pub fn trapezoid_unit(values: &[f64]) -> f64 {
    let n = values.len();
    let h = 1.0 / (n - 1) as f64;
    let inner = pairwise_sum(&values[1..n - 1]);
    h * (inner + 0.5 * (values[0] + values[n - 1]))
}
