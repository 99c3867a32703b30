//! One-parameter fitting of Archimedean families and the conditional
//! `zeta_1` estimation pipeline.

use serde::Serialize;

use crate::copula::ArchimedeanCopula;
use crate::error::{Error, Result};
use crate::generator::{make_generator, FamilyId, GeneratorFamily};
use crate::metrics::zeta1_conditional;
use crate::quadrature::{pairwise_sum, IntegrationSpec};
use crate::sampling::SampleMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    /// The maximum sits on the edge of the search range; `theta_hat` is that edge.
    AtBoundary,
    ClosedForm,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub family: FamilyId,
    pub theta_hat: f64,
    pub log_likelihood: f64,
    pub n: usize,
    pub convergence: FitStatus,
    /// Inverse square root of the observed information, when it is positive.
    pub stderr_estimate: Option<f64>,
}

/// Search range for the maximum-likelihood parameter.
pub fn theta_range(family: FamilyId) -> Result<(f64, f64)> {
    match family {
        FamilyId::Gumbel => Ok((1.0, 50.0)),
        FamilyId::Clayton | FamilyId::Frank => Ok((1e-4, 50.0)),
        other => Err(Error::InvalidConfig(format!("{other} has no free parameter to fit"))),
    }
}

fn check_sample(d: usize, sample: &SampleMatrix) -> Result<()> {
    if sample.d != d {
        return Err(Error::DimensionMismatch(format!("sample has {} columns, expected {d}", sample.d)));
    }
    if sample.n < 10 {
        return Err(Error::DegenerateSample(format!("{} rows; at least 10 are needed", sample.n)));
    }
    if sample.values.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::DegenerateSample("values on the boundary of the unit interval".into()));
    }
    for j in 0..d {
        let mut col = sample.column(j);
        col.sort_by(f64::total_cmp);
        if col.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DegenerateSample(format!("tied values in column {}", j + 1)));
        }
    }
    Ok(())
}

/// `sum ln c_theta(u_i)`; `-inf` where the parameter is not admissible.
pub fn log_likelihood(family: FamilyId, theta: f64, sample: &SampleMatrix) -> f64 {
    let c = match GeneratorFamily::new(family, theta).and_then(|f| make_generator(f, sample.d)) {
        Ok(g) => ArchimedeanCopula::new(g),
        Err(_) => return f64::NEG_INFINITY,
    };
    let terms: Result<Vec<f64>> = sample.rows().map(|r| c.ln_density(r)).collect();
    match terms {
        Ok(t) => {
            let s = pairwise_sum(&t);
            if s.is_nan() {
                f64::NEG_INFINITY
            } else {
                s
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const SCAN_POINTS: usize = 41;

/// Maximum-likelihood fit: a log-spaced scan of the range, golden-section
/// search between the neighbours of the best scan point (tolerance 1e-8 on
/// theta), then one parabolic step through the final bracket.
pub fn fit_mle(family: FamilyId, d: usize, sample: &SampleMatrix) -> Result<FitResult> {
    let (lo, hi) = theta_range(family)?;
    check_sample(d, sample)?;
    let ll = |t: f64| log_likelihood(family, t, sample);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| (llo + (lhi - llo) * i as f64 / (SCAN_POINTS - 1) as f64).exp()).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| ll(t)).collect();
    let best = (0..SCAN_POINTS).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    if vals[best] == f64::NEG_INFINITY {
        return Err(Error::NumericalFailure("log-likelihood is -inf over the whole range".into()));
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(SCAN_POINTS - 1)];
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (ll(x1), ll(x2));
    while b - a > 1e-8 * (1.0 + a.abs()) {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = ll(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = ll(x1);
        }
    }
    let (mut theta, mut value) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    // parabolic step through (a, theta, b)
    let (fa, fb) = (ll(a), ll(b));
    let num = (theta - a).powi(2) * (value - fb) - (theta - b).powi(2) * (value - fa);
    let den = (theta - a) * (value - fb) - (theta - b) * (value - fa);
    if den != 0.0 {
        let t = theta - 0.5 * num / den;
        if t > a && t < b {
            let ft = ll(t);
            if ft > value {
                theta = t;
                value = ft;
            }
        }
    }
    for (edge, f_edge) in [(lo, vals[0]), (hi, vals[SCAN_POINTS - 1])] {
        if f_edge >= value {
            theta = edge;
            value = f_edge;
        }
    }
    let at_edge = (theta - lo).abs() <= 1e-6 * (1.0 + lo) || (hi - theta).abs() <= 1e-6 * hi;
    let h = 1e-4 * theta.max(1e-2);
    let curvature = if at_edge { f64::NAN } else { (ll(theta + h) - 2.0 * value + ll(theta - h)) / (h * h) };
    Ok(FitResult {
        family,
        theta_hat: theta,
        log_likelihood: value,
        n: sample.n,
        convergence: if at_edge { FitStatus::AtBoundary } else { FitStatus::Converged },
        stderr_estimate: (curvature < 0.0).then(|| (-1.0 / curvature).sqrt()),
    })
}

/// Kendall's tau of two columns (no ties assumed), O(n^2).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            let p = (x[i] - x[j]) * (y[i] - y[j]);
            s += (p > 0.0) as i64 - (p < 0.0) as i64;
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

/// Average of Kendall's tau over all column pairs.
pub fn pairwise_kendall_tau(sample: &SampleMatrix) -> f64 {
    let cols: Vec<Vec<f64>> = (0..sample.d).map(|j| sample.column(j)).collect();
    let mut taus = Vec::new();
    for i in 0..sample.d {
        for j in i + 1..sample.d {
            taus.push(kendall_tau(&cols[i], &cols[j]));
        }
    }
    pairwise_sum(&taus) / taus.len() as f64
}

/// Parameter with the given Kendall's tau: Gumbel `1/(1-tau)`, Clayton
/// `2 tau/(1-tau)`.
pub fn theta_from_tau(family: FamilyId, tau: f64) -> Result<f64> {
    match family {
        FamilyId::Gumbel if (0.0..1.0).contains(&tau) => Ok(1.0 / (1.0 - tau)),
        FamilyId::Clayton if tau > 0.0 && tau < 1.0 => Ok(2.0 * tau / (1.0 - tau)),
        FamilyId::Gumbel | FamilyId::Clayton => Err(Error::OutOfRangeTau(format!("tau = {tau} has no {family} parameter"))),
        other => Err(Error::InvalidConfig(format!("tau inversion is not available for {other}"))),
    }
}

/// Moment fit through the pairwise-averaged Kendall's tau.
pub fn fit_tau_inversion(family: FamilyId, d: usize, sample: &SampleMatrix) -> Result<FitResult> {
    if !matches!(family, FamilyId::Gumbel | FamilyId::Clayton) {
        return Err(Error::InvalidConfig(format!("tau inversion is not available for {family}")));
    }
    check_sample(d, sample)?;
    let theta = theta_from_tau(family, pairwise_kendall_tau(sample))?;
    Ok(FitResult {
        family,
        theta_hat: theta,
        log_likelihood: log_likelihood(family, theta, sample),
        n: sample.n,
        convergence: FitStatus::ClosedForm,
        stderr_estimate: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionalZetaRow {
    pub x: Vec<f64>,
    pub zeta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionalZetaTable {
    pub fit: FitResult,
    pub rows: Vec<ConditionalZetaRow>,
}

/// Fits `family` by maximum likelihood and evaluates `zeta_1^x` of the fitted
/// copula at each conditioning point.
pub fn estimate_conditional_zeta(
    sample: &SampleMatrix,
    family: FamilyId,
    x_grid: &[Vec<f64>],
    spec: &IntegrationSpec,
) -> Result<ConditionalZetaTable> {
    let fit = fit_mle(family, sample.d, sample)?;
    let c = ArchimedeanCopula::new(make_generator(GeneratorFamily::new(family, fit.theta_hat)?, sample.d)?);
    let rows = x_grid
        .iter()
        .map(|x| Ok(ConditionalZetaRow { x: x.clone(), zeta: zeta1_conditional(&c, x, spec)?.value }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionalZetaTable { fit, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample;

    fn arch(f: GeneratorFamily, d: usize) -> ArchimedeanCopula {
        ArchimedeanCopula::from_family(f, d).unwrap()
    }

    #[test]
    fn tau_formulas() {
        assert!((theta_from_tau(FamilyId::Gumbel, 0.8).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(theta_from_tau(FamilyId::Gumbel, 0.0).unwrap(), 1.0);
        assert!((theta_from_tau(FamilyId::Clayton, 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(theta_from_tau(FamilyId::Gumbel, -0.1), Err(Error::OutOfRangeTau(_))));
        let x = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(kendall_tau(&x, &x), 1.0);
        assert_eq!(kendall_tau(&x, &[0.4, 0.3, 0.2, 0.1]), -1.0);
    }

    #[test]
    fn gumbel_fit_recovers_parameter() {
        let c = arch(GeneratorFamily::gumbel(5.0).unwrap(), 3);
        let s = sample(&c, 1000, 21).unwrap();
        let mle = fit_mle(FamilyId::Gumbel, 3, &s).unwrap();
        assert_eq!(mle.convergence, FitStatus::Converged);
        assert!((mle.theta_hat - 5.0).abs() < 0.5, "{mle:?}");
        assert!(mle.log_likelihood >= log_likelihood(FamilyId::Gumbel, 5.0, &s));
        let se = mle.stderr_estimate.unwrap();
        assert!(se > 0.0 && se < 0.5);
    }

    #[test]
    fn tau_inversion_agrees_with_mle() {
        let c = arch(GeneratorFamily::gumbel(5.0).unwrap(), 3);
        let mut gap = 0.0;
        for seed in 0..5 {
            let s = sample(&c, 1000, seed).unwrap();
            let tau = fit_tau_inversion(FamilyId::Gumbel, 3, &s).unwrap();
            let mle = fit_mle(FamilyId::Gumbel, 3, &s).unwrap();
            assert!((tau.theta_hat - mle.theta_hat).abs() < 0.5);
            gap += (tau.theta_hat - mle.theta_hat) / 5.0;
        }
        assert!(gap.abs() < 0.3, "{gap}");
    }

    #[test]
    fn clayton_and_frank_fits() {
        for (f, id) in [(GeneratorFamily::clayton(2.0).unwrap(), FamilyId::Clayton), (GeneratorFamily::frank(6.0).unwrap(), FamilyId::Frank)] {
            let c = arch(f, 2);
            let s = sample(&c, 800, 3).unwrap();
            let fit = fit_mle(id, 2, &s).unwrap();
            assert!((fit.theta_hat - f.theta()).abs() < 0.2 * f.theta(), "{fit:?}");
        }
    }

    #[test]
    fn independence_as_gumbel_hits_the_boundary_or_near_it() {
        let c = arch(GeneratorFamily::independence(), 2);
        let s = sample(&c, 500, 8).unwrap();
        let fit = fit_mle(FamilyId::Gumbel, 2, &s).unwrap();
        assert!(fit.theta_hat < 1.1, "{fit:?}");
    }

    #[test]
    fn degenerate_samples() {
        let c = arch(GeneratorFamily::gumbel(2.0).unwrap(), 2);
        let s = sample(&c, 5, 1).unwrap();
        assert!(matches!(fit_mle(FamilyId::Gumbel, 2, &s), Err(Error::DegenerateSample(_))));
        let mut t = sample(&c, 20, 1).unwrap();
        t.values[2] = t.values[0];
        assert!(matches!(fit_mle(FamilyId::Gumbel, 2, &t), Err(Error::DegenerateSample(_))));
        t.values[2] = 1.0;
        assert!(matches!(fit_mle(FamilyId::Gumbel, 2, &t), Err(Error::DegenerateSample(_))));
        assert!(matches!(fit_mle(FamilyId::Independence, 2, &t), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn conditional_zeta_pipeline() {
        let c = arch(GeneratorFamily::gumbel(5.0).unwrap(), 3);
        let s = sample(&c, 300, 2).unwrap();
        let xs = vec![vec![0.1], vec![0.5], vec![0.9]];
        let t = estimate_conditional_zeta(&s, FamilyId::Gumbel, &xs, &IntegrationSpec::gauss(32)).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.iter().all(|r| (0.0..=1.0).contains(&r.zeta)));
        assert!(t.rows[0].zeta < t.rows[2].zeta);
    }
}
