//! Copula distances, the dependence measure `zeta_1` and convergence
//! diagnostics.
//!
//! `zeta_1` of a k-copula `C` is
//! `3 int int |K_C(s, [0,y]) - y| dlambda(y) dmu_{C^{1:k-1}}(s)`, with the
//! kernel of the last coordinate given the first `k-1`. The inner integral
//! uses the trapezoid rule on an equispaced `y` grid (201 points for Monte
//! Carlo, 1001 for quadrature); the outer one is delegated to
//! [`crate::measure`].

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conditional::ConditionalCopula;
use crate::copula::{ArchimedeanCopula, Copula, KernelCopula};
use crate::error::{Error, Result};
use crate::measure::integrate_leading;
use crate::quadrature::{pairwise_sum, trapezoid_unit, unit_grid, IntegrationMethod, IntegrationSpec, Rule};
use crate::stream::row_uniforms;

fn same_dim<A: Copula + ?Sized, B: Copula + ?Sized>(a: &A, b: &B) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("copulas of dimension {} and {}", a.dim(), b.dim())));
    }
    Ok(a.dim())
}

/// Calls `f` on every point of the tensor grid `axis^k`.
fn for_each_tensor<F: FnMut(&[f64]) -> Result<()>>(axis: &[f64], k: usize, mut f: F) -> Result<()> {
    let mut idx = vec![0usize; k];
    let mut point = vec![axis[0]; k];
    loop {
        f(&point)?;
        let mut j = 0;
        loop {
            if j == k {
                return Ok(());
            }
            idx[j] += 1;
            if idx[j] < axis.len() {
                point[j] = axis[idx[j]];
                break;
            }
            idx[j] = 0;
            point[j] = axis[0];
            j += 1;
        }
    }
}

/// `max |A - B|` over the tensor grid with `resolution` points per axis.
pub fn d_uniform<A, B>(a: &A, b: &B, resolution: usize) -> Result<f64>
where
    A: Copula + ?Sized,
    B: Copula + ?Sized,
{
    let d = same_dim(a, b)?;
    if resolution < 2 {
        return Err(Error::InvalidConfig("grid resolution must be at least 2".into()));
    }
    let axis = unit_grid(resolution);
    let mut worst = 0.0f64;
    for_each_tensor(&axis, d, |u| {
        worst = worst.max((a.cdf(u)? - b.cdf(u)?).abs());
        Ok(())
    })?;
    Ok(worst)
}

/// The 1-Markov-kernel metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelMetric {
    #[serde(rename = "D1")]
    D1,
    #[serde(rename = "D2")]
    D2,
    #[serde(rename = "Dinf")]
    DInf,
}

impl FromStr for KernelMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d1" => Ok(KernelMetric::D1),
            "d2" => Ok(KernelMetric::D2),
            "dinf" | "d-inf" | "dinfty" => Ok(KernelMetric::DInf),
            _ => Err(Error::InvalidConfig(format!("unknown metric {s:?} (expected D1, D2 or Dinf)"))),
        }
    }
}

/// Values of the three kernel metrics between two copulas.
#[derive(Clone, Debug, Serialize)]
pub struct KernelMetrics {
    pub d1: f64,
    pub d2: f64,
    /// Maximum over a `51^(d-1)` grid of `y`: a lower bound for the supremum.
    pub d_inf: f64,
    pub y_grid: usize,
    /// Standard errors of `d1` and of `d2^2` for Monte Carlo runs.
    pub stderr: Option<(f64, f64)>,
    /// `d1 <= d_inf` and `d2 <= sqrt(d1)` (up to integration error).
    pub consistent: bool,
}

const DINF_GRID: usize = 51;

/// All three 1-Markov-kernel metrics. `D1` and `D2` integrate over `I^d` with
/// a tensor rule (`spec.points` nodes per axis) or Monte Carlo; the `x`
/// integral inside `D_inf` always uses a one-dimensional rule.
pub fn kernel_metrics<A, B>(a: &A, b: &B, spec: &IntegrationSpec) -> Result<KernelMetrics>
where
    A: KernelCopula + ?Sized,
    B: KernelCopula + ?Sized,
{
    let d = same_dim(a, b)?;
    let diff = |x: f64, y: &[f64]| -> Result<f64> { Ok((a.kernel(&[x], y)? - b.kernel(&[x], y)?).abs()) };
    let (d1, d2sq, stderr) = match spec.method {
        IntegrationMethod::TensorGauss => {
            let rule = Rule::standard(spec.points);
            let mut s1 = Vec::new();
            let mut s2 = Vec::new();
            let mut idx = vec![0usize; d - 1];
            let mut y = vec![0.0; d - 1];
            loop {
                let mut wy = 1.0;
                for (j, &i) in idx.iter().enumerate() {
                    y[j] = rule.nodes[i];
                    wy *= rule.weights[i];
                }
                for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
                    let v = diff(x, &y)?;
                    s1.push(wx * wy * v);
                    s2.push(wx * wy * v * v);
                }
                let mut j = 0;
                while j < d - 1 {
                    idx[j] += 1;
                    if idx[j] < rule.len() {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == d - 1 {
                    break;
                }
            }
            (pairwise_sum(&s1), pairwise_sum(&s2), None)
        }
        IntegrationMethod::MonteCarlo => {
            let n = spec.points;
            let mut v1 = Vec::with_capacity(n);
            let mut v2 = Vec::with_capacity(n);
            let mut u = vec![0.0; d];
            for row in 0..n {
                row_uniforms(spec.seed, row as u64, &mut u);
                let v = diff(u[0], &u[1..])?;
                v1.push(v);
                v2.push(v * v);
            }
            let (m1, e1) = crate::quadrature::mean_and_stderr(&v1);
            let (m2, e2) = crate::quadrature::mean_and_stderr(&v2);
            (m1, m2, Some((e1, e2)))
        }
    };
    let x_rule = Rule::standard(if spec.method == IntegrationMethod::TensorGauss { spec.points } else { 64 });
    let axis = unit_grid(DINF_GRID);
    let mut d_inf = 0.0f64;
    for_each_tensor(&axis, d - 1, |y| {
        let mut terms = Vec::with_capacity(x_rule.len());
        for (&x, &w) in x_rule.nodes.iter().zip(&x_rule.weights) {
            terms.push(w * diff(x, y)?);
        }
        d_inf = d_inf.max(pairwise_sum(&terms));
        Ok(())
    })?;
    let d2 = d2sq.max(0.0).sqrt();
    let slack = spec.tolerance;
    let consistent = d1 <= d_inf + slack && d2 <= d1.sqrt() + slack;
    Ok(KernelMetrics { d1, d2, d_inf, y_grid: DINF_GRID, stderr, consistent })
}

/// One kernel metric; see [`kernel_metrics`].
pub fn kernel_metric<A, B>(a: &A, b: &B, which: KernelMetric, spec: &IntegrationSpec) -> Result<f64>
where
    A: KernelCopula + ?Sized,
    B: KernelCopula + ?Sized,
{
    let m = kernel_metrics(a, b, spec)?;
    Ok(match which {
        KernelMetric::D1 => m.d1,
        KernelMetric::D2 => m.d2,
        KernelMetric::DInf => m.d_inf,
    })
}

/// A `zeta_1` value with its Monte Carlo standard error (absent for quadrature).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Zeta1Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
}

const MC_Y_GRID: usize = 201;
const QUAD_Y_GRID: usize = 1001;

fn zeta1_raw<C: KernelCopula + ?Sized>(c: &C, spec: &IntegrationSpec, y_points: usize) -> Result<Zeta1Estimate> {
    let k = c.dim();
    if k < 2 {
        return Err(Error::DimensionMismatch("zeta_1 needs dimension at least 2".into()));
    }
    let ys = unit_grid(y_points);
    let grid = c.prepare_targets(&ys)?;
    let est = integrate_leading(c, &vec![1.0; k - 1], spec, 1, |s, out| {
        let mut g = vec![0.0; ys.len()];
        c.conditional_cdf_on(s, &grid, &mut g)?;
        let dev: Vec<f64> = g.iter().zip(&ys).map(|(v, y)| (v - y).abs()).collect();
        out[0] = 3.0 * trapezoid_unit(&dev);
        Ok(())
    })?;
    let value = est.values[0].clamp(0.0, 1.0);
    Ok(Zeta1Estimate { value, stderr: est.stderr.map(|s| s[0]) })
}

/// `zeta_1` of a copula of dimension `k >= 2`.
///
/// With a tensor rule the estimate is recomputed with half the nodes; a
/// disagreement above `spec.tolerance` is reported as
/// [`Error::IntegrationFailure`].
pub fn zeta1<C: KernelCopula + ?Sized>(c: &C, spec: &IntegrationSpec) -> Result<Zeta1Estimate> {
    match spec.method {
        IntegrationMethod::MonteCarlo => zeta1_raw(c, spec, MC_Y_GRID),
        IntegrationMethod::TensorGauss => {
            let fine = zeta1_raw(c, spec, QUAD_Y_GRID)?;
            let coarse = IntegrationSpec { points: (spec.points / 2).max(8), ..*spec };
            let check = zeta1_raw(c, &coarse, QUAD_Y_GRID)?;
            if (fine.value - check.value).abs() > spec.tolerance {
                return Err(Error::IntegrationFailure(format!(
                    "zeta_1 changed from {} to {} when doubling the rule",
                    check.value, fine.value
                )));
            }
            Ok(fine)
        }
    }
}

/// `zeta_1^x(C) = zeta_1(C^x)`.
pub fn zeta1_conditional(c: &ArchimedeanCopula, x: &[f64], spec: &IntegrationSpec) -> Result<Zeta1Estimate> {
    zeta1(&ConditionalCopula::new(c, x)?, spec)
}

/// Values of one diagnostic along a sequence.
#[derive(Clone, Debug, Serialize)]
pub struct CriterionSeries {
    pub name: String,
    pub values: Vec<f64>,
    /// Each value is strictly below its predecessor.
    pub decreasing: bool,
}

impl CriterionSeries {
    fn new(name: &str, values: Vec<f64>) -> Self {
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        CriterionSeries { name: name.into(), values, decreasing }
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap_or(&f64::NAN)
    }
}

/// Distances between the members of a sequence and its limit.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    /// Uniform distance on a `21^d` grid.
    pub uniform: CriterionSeries,
    /// `sup |psi_n - psi|` over 2001 points of `[0, 50]`.
    pub generator_sup: CriterionSeries,
    /// `max |psi_n^(m) - psi^(m)|` over `m = 1..d-2` and 400 points of `[0.05, 20]`.
    pub derivative: CriterionSeries,
    /// `max |K_n - K|` over `l = 1..d-1`, `x in {0.25,0.5,0.75}^l`, same `y` probes.
    pub kernel_probe: CriterionSeries,
    pub d1: CriterionSeries,
    pub d2: CriterionSeries,
    pub d_inf: CriterionSeries,
    /// All criteria decreasing.
    pub all_decreasing: bool,
}

impl ConvergenceReport {
    pub fn criteria(&self) -> [&CriterionSeries; 7] {
        [&self.uniform, &self.generator_sup, &self.derivative, &self.kernel_probe, &self.d1, &self.d2, &self.d_inf]
    }
}

const PROBES: [f64; 3] = [0.25, 0.5, 0.75];

fn kernel_probe_distance(a: &ArchimedeanCopula, b: &ArchimedeanCopula) -> Result<f64> {
    let d = a.dim();
    let mut worst = 0.0f64;
    for l in 1..d {
        for_each_tensor(&PROBES, l, |x| {
            for_each_tensor(&PROBES, d - l, |y| {
                worst = worst.max((a.kernel(x, y)? - b.kernel(x, y)?).abs());
                Ok(())
            })
        })?;
    }
    Ok(worst)
}

/// Evaluates every convergence criterion for each member of `sequence`
/// against `limit`.
pub fn convergence_report(sequence: &[ArchimedeanCopula], limit: &ArchimedeanCopula, spec: &IntegrationSpec) -> Result<ConvergenceReport> {
    let d = limit.dim();
    for c in sequence {
        same_dim(c, limit)?;
    }
    let z_sup: Vec<f64> = (0..2001).map(|i| 50.0 * i as f64 / 2000.0).collect();
    let z_der: Vec<f64> = (0..400).map(|i| 0.05 + (20.0 - 0.05) * i as f64 / 399.0).collect();
    let (mut uni, mut gen, mut der, mut probe, mut d1, mut d2, mut dinf) =
        (vec![], vec![], vec![], vec![], vec![], vec![], vec![]);
    let g = limit.generator();
    for c in sequence {
        let gn = c.generator();
        uni.push(d_uniform(c, limit, 21)?);
        gen.push(z_sup.iter().map(|&z| (gn.psi_unchecked(z) - g.psi_unchecked(z)).abs()).fold(0.0, f64::max));
        let mut worst = 0.0f64;
        for m in 1..d.saturating_sub(1).max(2) {
            for &z in &z_der {
                worst = worst.max((gn.psi_deriv(m, z)? - g.psi_deriv(m, z)?).abs());
            }
        }
        der.push(worst);
        probe.push(kernel_probe_distance(c, limit)?);
        let km = kernel_metrics(c, limit, spec)?;
        d1.push(km.d1);
        d2.push(km.d2);
        dinf.push(km.d_inf);
    }
    let mut report = ConvergenceReport {
        uniform: CriterionSeries::new("uniform", uni),
        generator_sup: CriterionSeries::new("generator-sup", gen),
        derivative: CriterionSeries::new("derivative", der),
        kernel_probe: CriterionSeries::new("kernel-probe", probe),
        d1: CriterionSeries::new("D1", d1),
        d2: CriterionSeries::new("D2", d2),
        d_inf: CriterionSeries::new("Dinf", dinf),
        all_decreasing: false,
    };
    report.all_decreasing = report.criteria().iter().all(|c| c.decreasing);
    Ok(report)
}

/// `|zeta_1(C_n) - zeta_1(C)|` along a sequence.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub limit: Zeta1Estimate,
    pub values: Vec<Zeta1Estimate>,
    pub deviations: Vec<f64>,
    /// Combined standard error of each deviation (0 for quadrature).
    pub noise: Vec<f64>,
    /// Each deviation is at most its predecessor plus two standard errors.
    pub decreasing_within_noise: bool,
}

/// Compares `zeta_1` (or `zeta_1^x` when `x` is given) along `sequence` with
/// its value at `limit`, using the same integration settings (and so common
/// random numbers) for every member.
pub fn zeta1_continuity_check(
    sequence: &[ArchimedeanCopula],
    limit: &ArchimedeanCopula,
    x: Option<&[f64]>,
    spec: &IntegrationSpec,
) -> Result<ContinuityReport> {
    let eval = |c: &ArchimedeanCopula| match x {
        Some(x) => zeta1_conditional(c, x, spec),
        None => zeta1(c, spec),
    };
    let lim = eval(limit)?;
    let values = sequence.iter().map(eval).collect::<Result<Vec<_>>>()?;
    let se = |e: &Zeta1Estimate| e.stderr.unwrap_or(0.0);
    let deviations: Vec<f64> = values.iter().map(|v| (v.value - lim.value).abs()).collect();
    let noise: Vec<f64> = values.iter().map(|v| (se(v).powi(2) + se(&lim).powi(2)).sqrt()).collect();
    let decreasing_within_noise = (1..deviations.len())
        .all(|i| deviations[i] <= deviations[i - 1] + 2.0 * (noise[i] + noise[i - 1]) + 1e-12);
    Ok(ContinuityReport { limit: lim, values, deviations, noise, decreasing_within_noise })
}
