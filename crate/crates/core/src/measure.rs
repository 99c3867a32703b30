//! Integration against the leading marginal measure `mu_{C^{1:l}}` of a copula.
//!
//! Both methods push forward the uniform measure on `I^l` through the
//! conditional-quantile (Rosenblatt) map, so only conditional distribution
//! functions and quantiles are needed, never marginal densities. The box
//! `[0, x]` in the original coordinates becomes the region
//! `v_1 <= x_1, v_j <= F_j(x_j | s_1..s_{j-1})`, which the tensor rule covers
//! with nested variable limits.

use rayon::prelude::*;

use crate::copula::KernelCopula;
use crate::error::{Error, Result};
use crate::quadrature::{pairwise_sum, IntegrationMethod, IntegrationSpec, Rule};
use crate::stream::row_uniforms;

/// Integral estimates for a vector-valued integrand. `stderr` is present for
/// Monte Carlo estimates.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

const MC_CHUNK: usize = 4096;

/// `int_{[0, upper]} f dmu_{C^{1:l}}` with `l = upper.len()`. The integrand
/// writes `m` values into its output slice.
pub fn integrate_leading<C, F>(c: &C, upper: &[f64], spec: &IntegrationSpec, m: usize, f: F) -> Result<Estimate>
where
    C: KernelCopula + ?Sized,
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    let l = upper.len();
    if l == 0 || l >= c.dim() + 1 {
        return Err(Error::DimensionMismatch(format!("cannot integrate over {l} leading coordinates of a {}-copula", c.dim())));
    }
    if spec.points == 0 {
        return Err(Error::InvalidConfig("integration needs at least one point".into()));
    }
    match spec.method {
        IntegrationMethod::TensorGauss => {
            let rule = Rule::standard(spec.points);
            let mut acc = vec![0.0; m];
            let mut tmp = vec![0.0; m];
            let mut s = vec![0.0; l];
            nested(c, upper, &rule, 0, &mut s, 1.0, &f, &mut acc, &mut tmp)?;
            Ok(Estimate { values: acc, stderr: None })
        }
        IntegrationMethod::MonteCarlo => monte_carlo(c, upper, spec, m, &f),
    }
}

#[allow(clippy::too_many_arguments)]
fn nested<C, F>(
    c: &C,
    upper: &[f64],
    rule: &Rule,
    j: usize,
    s: &mut [f64],
    w: f64,
    f: &F,
    acc: &mut [f64],
    tmp: &mut [f64],
) -> Result<()>
where
    C: KernelCopula + ?Sized,
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let limit = if j == 0 || upper[j] == 1.0 { upper[j] } else { c.conditional_cdf(&s[..j], upper[j])? };
    if limit <= 0.0 {
        return Ok(());
    }
    for (v, wv) in rule.on(0.0, limit) {
        s[j] = if j == 0 { v } else { c.conditional_quantile(&s[..j], v)? };
        if j + 1 == s.len() {
            f(s, tmp)?;
            for (a, t) in acc.iter_mut().zip(tmp.iter()) {
                *a += w * wv * t;
            }
        } else {
            nested(c, upper, rule, j + 1, s, w * wv, f, acc, tmp)?;
        }
    }
    Ok(())
}

fn monte_carlo<C, F>(c: &C, upper: &[f64], spec: &IntegrationSpec, m: usize, f: &F) -> Result<Estimate>
where
    C: KernelCopula + ?Sized,
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    let l = upper.len();
    let n = spec.points;
    let chunks: Vec<usize> = (0..n.div_ceil(MC_CHUNK)).collect();
    let partial: Vec<Result<(Vec<f64>, Vec<f64>)>> = chunks
        .par_iter()
        .map(|&k| {
            let mut sum = vec![0.0; m];
            let mut sq = vec![0.0; m];
            let mut v = vec![0.0; l];
            let mut s = vec![0.0; l];
            let mut tmp = vec![0.0; m];
            for row in k * MC_CHUNK..((k + 1) * MC_CHUNK).min(n) {
                row_uniforms(spec.seed, row as u64, &mut v);
                if !rosenblatt_in_box(c, &v, upper, &mut s)? {
                    continue;
                }
                f(&s, &mut tmp)?;
                for i in 0..m {
                    sum[i] += tmp[i];
                    sq[i] += tmp[i] * tmp[i];
                }
            }
            Ok((sum, sq))
        })
        .collect();
    let mut sums = vec![Vec::with_capacity(chunks.len()); m];
    let mut sqs = vec![Vec::with_capacity(chunks.len()); m];
    for p in partial {
        let (sum, sq) = p?;
        for i in 0..m {
            sums[i].push(sum[i]);
            sqs[i].push(sq[i]);
        }
    }
    let nf = n as f64;
    let mut values = Vec::with_capacity(m);
    let mut stderr = Vec::with_capacity(m);
    for i in 0..m {
        let mean = pairwise_sum(&sums[i]) / nf;
        let var = ((pairwise_sum(&sqs[i]) / nf - mean * mean) * nf / (nf - 1.0).max(1.0)).max(0.0);
        values.push(mean);
        stderr.push((var / nf).sqrt());
    }
    Ok(Estimate { values, stderr: Some(stderr) })
}

/// Maps `v` through the conditional quantiles, stopping early (returning
/// false) once a coordinate leaves `[0, upper]`.
fn rosenblatt_in_box<C: KernelCopula + ?Sized>(c: &C, v: &[f64], upper: &[f64], s: &mut [f64]) -> Result<bool> {
    for j in 0..v.len() {
        if j > 0 && upper[j] < 1.0 {
            // s_j <= x_j iff v_j <= F_j(x_j | s_<j)
            if v[j] > c.conditional_cdf(&s[..j], upper[j])? {
                return Ok(false);
            }
        } else if j == 0 && v[0] > upper[0] {
            return Ok(false);
        }
        s[j] = if j == 0 { v[0] } else { c.conditional_quantile(&s[..j], v[j])? };
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{ArchimedeanCopula, Copula};
    use crate::generator::GeneratorFamily as F;

    #[test]
    fn independence_box_mass() {
        let c = ArchimedeanCopula::from_family(F::independence(), 3).unwrap();
        let e = integrate_leading(&c, &[0.3, 0.6], &IntegrationSpec::gauss(16), 1, |_, o| {
            o[0] = 1.0;
            Ok(())
        })
        .unwrap();
        assert!((e.values[0] - 0.18).abs() < 1e-12);
    }

    #[test]
    fn disintegration_spot_check() {
        let c = ArchimedeanCopula::from_family(F::gumbel(3.0).unwrap(), 3).unwrap();
        let x = [0.7, 0.5];
        let y = 0.4;
        let e = integrate_leading(&c, &x, &IntegrationSpec::gauss(32), 1, |s, o| {
            o[0] = c.kernel(s, &[y])?;
            Ok(())
        })
        .unwrap();
        let target = c.cdf(&[0.7, 0.5, 0.4]).unwrap();
        assert!((e.values[0] - target).abs() < 1e-4, "{} {}", e.values[0], target);
        let mc = integrate_leading(&c, &x, &IntegrationSpec::monte_carlo(20000, 3), 1, |s, o| {
            o[0] = c.kernel(s, &[y])?;
            Ok(())
        })
        .unwrap();
        let se = mc.stderr.unwrap()[0];
        assert!((mc.values[0] - target).abs() < 4.0 * se, "{} {} {se}", mc.values[0], target);
    }
}
