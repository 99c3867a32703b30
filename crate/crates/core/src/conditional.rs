//! Conditional Archimedean copulas.
//!
//! Conditioning a strict Archimedean copula on its first `l` coordinates at
//! `x` gives the Archimedean copula with generator
//! `psi^x(z) = psi^(l)(a + z) / psi^(l)(a)`, `a = sum phi(x_i)`.
//! [`ConditionalCopula`] carries that generator so every copula, kernel and
//! metric operation applies to it unchanged, including further conditioning.

use serde::Serialize;

use crate::copula::{check_dim, ArchimedeanCopula, Copula, KernelCopula, TargetGrid};
use crate::error::{check_unit_all, Error, Result};
use crate::generator::Generator;
use crate::measure::integrate_leading;
use crate::quadrature::IntegrationSpec;

/// The (d-l)-dimensional conditional copula `C^x` of a strict copula.
#[derive(Clone, Debug)]
pub struct ConditionalCopula {
    base: ArchimedeanCopula,
    x: Vec<f64>,
    copula: ArchimedeanCopula,
}

impl ConditionalCopula {
    pub fn new(base: &ArchimedeanCopula, x: &[f64]) -> Result<Self> {
        if !base.is_strict() {
            return Err(Error::NotStrict("conditional copulas need a strict generator".into()));
        }
        let d = base.dim();
        let l = x.len();
        if l == 0 || l + 2 > d {
            return Err(Error::Domain(format!("conditioning needs 1 <= l <= d-2 = {}, got l = {l}", d as i64 - 2)));
        }
        if x.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Domain(format!("conditioning point {x:?} is not interior")));
        }
        let a = base.sum_phi(x);
        let gen = base.generator().conditioned(l, a, d - l);
        Ok(ConditionalCopula { base: base.clone(), x: x.to_vec(), copula: ArchimedeanCopula::new(gen) })
    }

    pub fn base(&self) -> &ArchimedeanCopula {
        &self.base
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `psi^x`, not renormalized.
    pub fn generator(&self) -> &Generator {
        self.copula.generator()
    }

    /// `psi^x` rescaled so that `psi^x(1) = 1/2`; the copula is unchanged.
    pub fn normalized_generator(&self) -> Result<Generator> {
        self.generator().normalized()
    }

    /// `C^x` as an Archimedean copula.
    pub fn copula(&self) -> &ArchimedeanCopula {
        &self.copula
    }

    /// `C^x(u)` through Sklar's theorem: `K(x, [0, g_x^{-1}(u_1)] x ...)`.
    pub fn cdf_ratio(&self, u: &[f64]) -> Result<f64> {
        check_dim("conditional cdf", u.len(), self.copula.dim())?;
        check_unit_all("u", u)?;
        let y = u
            .iter()
            .map(|&t| Ok(self.base.kernel_univariate_quantile(&self.x, t)?.value))
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.base.kernel_cdf(&self.x, &y)?.value)
    }

    /// `C^x(u) = psi^x(sum phi^x(u_j))`.
    pub fn cdf_archimedean(&self, u: &[f64]) -> Result<f64> {
        self.copula.cdf(u)
    }
}

impl Copula for ConditionalCopula {
    fn dim(&self) -> usize {
        self.copula.dim()
    }
    fn cdf(&self, u: &[f64]) -> Result<f64> {
        self.copula.cdf(u)
    }
}

impl KernelCopula for ConditionalCopula {
    fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.copula.kernel(x, y)
    }
    fn conditional_cdf(&self, x: &[f64], y: f64) -> Result<f64> {
        self.copula.conditional_cdf(x, y)
    }
    fn conditional_quantile(&self, x: &[f64], v: f64) -> Result<f64> {
        self.copula.conditional_quantile(x, v)
    }
    fn prepare_targets(&self, ys: &[f64]) -> Result<TargetGrid> {
        self.copula.prepare_targets(ys)
    }
    fn conditional_cdf_on(&self, x: &[f64], grid: &TargetGrid, out: &mut [f64]) -> Result<()> {
        self.copula.conditional_cdf_on(x, grid, out)
    }
    fn transform_leading(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.copula.transform_leading(v, out)
    }
}

pub fn conditional_copula(c: &ArchimedeanCopula, x: &[f64]) -> Result<ConditionalCopula> {
    ConditionalCopula::new(c, x)
}

/// `psi^x(z) = K(x, [0, psi(z)])`.
pub fn conditional_generator(c: &ArchimedeanCopula, x: &[f64], z: f64) -> Result<f64> {
    ConditionalCopula::new(c, x)?.generator().psi(z)
}

/// `psi^[0,x](z) = psi(z + phi(C^{1:l}(x))) / C^{1:l}(x)`: the generator of
/// the copula of the last `d-l` coordinates given `X <= x`.
pub fn box_conditional_generator(c: &ArchimedeanCopula, x: &[f64], z: f64) -> Result<f64> {
    let l = x.len();
    if l == 0 || l >= c.dim() {
        return Err(Error::Domain(format!("conditioning on {l} of {} coordinates", c.dim())));
    }
    let g = c.generator();
    if z.is_nan() || z < 0.0 {
        return Err(Error::Domain(format!("z must be non-negative, got {z}")));
    }
    let mass = c.marginal(l)?.cdf(x)?;
    if mass == 0.0 {
        return Err(Error::ZeroMass(format!("C^(1:{l})({x:?}) = 0")));
    }
    Ok((g.psi_unchecked(z + g.phi_unchecked(mass)) / mass).min(1.0))
}

/// Residuals of a mixture identity on a grid of `z` values.
#[derive(Clone, Debug, Serialize)]
pub struct MixtureReport {
    pub z: Vec<f64>,
    /// Closed-form side of the identity.
    pub expected: Vec<f64>,
    /// Integral side.
    pub integrated: Vec<f64>,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn mixture(c: &ArchimedeanCopula, upper: &[f64], z_grid: &[f64], spec: &IntegrationSpec, expected: Vec<f64>) -> Result<MixtureReport> {
    let l = upper.len();
    let marginal = c.marginal(l + 1)?;
    let est = integrate_leading(&marginal, upper, spec, z_grid.len(), |s, out| {
        let a = c.sum_phi(s);
        for (o, &z) in out.iter_mut().zip(z_grid) {
            // psi^s(z) = K(s, [0, psi(z)])
            *o = c.kernel_from_sums(l, false, a, z).value;
        }
        Ok(())
    })?;
    let max_abs_error = expected.iter().zip(&est.values).map(|(e, v)| (e - v).abs()).fold(0.0, f64::max);
    Ok(MixtureReport {
        z: z_grid.to_vec(),
        expected,
        integrated: est.values,
        max_abs_error,
        tolerance: spec.tolerance,
        passed: max_abs_error <= spec.tolerance,
    })
}

/// Checks `psi(z) = int psi^s(z) dmu_{C^{1:l}}(s)` on `z_grid`.
pub fn mixture_identity_check(c: &ArchimedeanCopula, l: usize, z_grid: &[f64], spec: &IntegrationSpec) -> Result<MixtureReport> {
    if !c.is_strict() {
        return Err(Error::NotStrict("mixture identity needs a strict generator".into()));
    }
    if l == 0 || l + 2 > c.dim() {
        return Err(Error::Domain(format!("mixture identity needs 1 <= l <= d-2, got l = {l}")));
    }
    let expected = z_grid.iter().map(|&z| c.generator().psi(z)).collect::<Result<Vec<_>>>()?;
    mixture(c, &vec![1.0; l], z_grid, spec, expected)
}

/// Checks `psi^[0,x](z) C^{1:l}(x) = int_{[0,x]} psi^s(z) dmu_{C^{1:l}}(s)`.
pub fn box_mixture_identity_check(c: &ArchimedeanCopula, x: &[f64], z_grid: &[f64], spec: &IntegrationSpec) -> Result<MixtureReport> {
    if !c.is_strict() {
        return Err(Error::NotStrict("mixture identity needs a strict generator".into()));
    }
    let l = x.len();
    if l == 0 || l + 2 > c.dim() {
        return Err(Error::Domain(format!("mixture identity needs 1 <= l <= d-2, got l = {l}")));
    }
    let mass = c.marginal(l)?.cdf(x)?;
    let expected = z_grid
        .iter()
        .map(|&z| Ok(box_conditional_generator(c, x, z)? * mass))
        .collect::<Result<Vec<_>>>()?;
    mixture(c, x, z_grid, spec, expected)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogConvexityReport {
    pub status: CheckStatus,
    pub order: usize,
    pub checked_points: usize,
    /// `(z, slope drop)` where the log-slope first decreased.
    pub first_violation: Option<(f64, f64)>,
    /// Conditional increasingness of `C` carries over to every `C^x`.
    pub transfers_to_conditional: bool,
}

/// Checks that `ln |psi^(order)|` is convex on `grid` through its successive
/// slopes. Non-strict generators are reported as not applicable.
pub fn log_convexity_check(c: &ArchimedeanCopula, order: usize, grid: &[f64]) -> LogConvexityReport {
    let mut report = LogConvexityReport {
        status: CheckStatus::NotApplicable,
        order,
        checked_points: 0,
        first_violation: None,
        transfers_to_conditional: false,
    };
    if !c.is_strict() || grid.len() < 3 {
        return report;
    }
    let g = c.generator();
    let f: Vec<f64> = grid.iter().map(|&z| g.ln_abs_deriv(order, z)).collect();
    let slopes: Vec<f64> = (0..grid.len() - 1).map(|i| (f[i + 1] - f[i]) / (grid[i + 1] - grid[i])).collect();
    report.checked_points = grid.len();
    report.status = CheckStatus::Pass;
    for i in 1..slopes.len() {
        let tol = 1e-9 * (1.0 + slopes[i].abs().max(slopes[i - 1].abs()));
        if slopes[i] < slopes[i - 1] - tol {
            report.status = CheckStatus::Fail;
            report.first_violation = Some((grid[i], slopes[i - 1] - slopes[i]));
            break;
        }
    }
    report.transfers_to_conditional = report.status == CheckStatus::Pass;
    report
}

/// Checks `C^x(u, ..., u) < u` at `points` equispaced interior `u`.
pub fn diagonal_below_identity(cc: &ConditionalCopula, points: usize) -> Result<bool> {
    let k = cc.dim();
    for i in 1..=points {
        let u = i as f64 / (points + 1) as f64;
        if cc.cdf(&vec![u; k])? >= u {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorFamily as F;

    fn arch(f: F, d: usize) -> ArchimedeanCopula {
        ArchimedeanCopula::from_family(f, d).unwrap()
    }

    #[test]
    fn generator_basics() {
        let c = arch(F::gumbel(3.0).unwrap(), 3);
        assert_eq!(conditional_generator(&c, &[0.4], 0.0).unwrap(), 1.0);
        let x = [0.4];
        for z in [0.1, 0.7, 2.5, 9.0] {
            let direct = conditional_generator(&c, &x, z).unwrap();
            let via_kernel = c.kernel_univariate_cdf(&x, c.generator().psi(z).unwrap()).unwrap();
            assert!((direct - via_kernel).abs() < 1e-12);
        }
        let i = arch(F::independence(), 3);
        for z in [0.1, 1.0, 4.0] {
            assert!((conditional_generator(&i, &[0.3], z).unwrap() - 2f64.powf(-z)).abs() < 1e-14);
        }
    }

    #[test]
    fn clayton_conditional_generator_closed_form() {
        // s = 1, a = phi(0.5) = 1: psi^x(z) = (1 + z/2)^-2
        let c = arch(F::clayton(1.0).unwrap(), 3);
        for z in [0.0, 0.3, 1.0, 7.0, 40.0] {
            let v = conditional_generator(&c, &[0.5], z).unwrap();
            assert!((v - (1.0 + z / 2.0).powi(-2)).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_invariance_and_closure() {
        for theta in [0.5, 1.0, 2.0] {
            let c = arch(F::clayton(theta).unwrap(), 4);
            for x in [vec![0.3], vec![0.2, 0.85]] {
                let cc = conditional_copula(&c, &x).unwrap();
                let theta_x = theta / (1.0 + x.len() as f64 * theta);
                let target = arch(F::clayton(theta_x).unwrap(), cc.dim());
                let grid = [0.05, 0.3, 0.6, 0.95];
                for &u1 in &grid {
                    for &u2 in &grid {
                        let mut u = vec![u1, u2];
                        if cc.dim() == 3 {
                            u.push(0.5);
                        }
                        let arch_form = cc.cdf_archimedean(&u).unwrap();
                        assert!((cc.cdf_ratio(&u).unwrap() - arch_form).abs() < 1e-10);
                        assert!((target.cdf(&u).unwrap() - arch_form).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn conditional_is_a_copula_and_associative() {
        let c = arch(F::frank(5.0).unwrap(), 4);
        let cc = conditional_copula(&c, &[0.7]).unwrap();
        assert!((cc.cdf(&[1.0, 1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cc.cdf(&[0.4, 0.0, 0.8]).unwrap(), 0.0);
        assert!((cc.cdf(&[1.0, 0.37, 1.0]).unwrap() - 0.37).abs() < 1e-12);
        let c2 = cc.copula().marginal(2).unwrap();
        let (u1, u2, u3) = (0.3, 0.65, 0.8);
        let left = c2.cdf(&[c2.cdf(&[u1, u2]).unwrap(), u3]).unwrap();
        let right = c2.cdf(&[u1, c2.cdf(&[u2, u3]).unwrap()]).unwrap();
        assert!((left - right).abs() < 1e-10);
        assert!(diagonal_below_identity(&cc, 99).unwrap());
    }

    #[test]
    fn errors() {
        let b = arch(F::clayton_boundary(3).unwrap(), 3);
        assert!(matches!(conditional_copula(&b, &[0.5]), Err(Error::NotStrict(_))));
        let g = arch(F::gumbel(2.0).unwrap(), 3);
        assert!(matches!(conditional_copula(&g, &[0.5, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(conditional_copula(&g, &[0.0]), Err(Error::Domain(_))));
        assert!(matches!(box_conditional_generator(&b, &[0.05, 0.05], 1.0), Err(Error::ZeroMass(_))));
    }

    #[test]
    fn box_generator() {
        let c = arch(F::gumbel(3.0).unwrap(), 3);
        assert!((box_conditional_generator(&c, &[0.4], 0.0).unwrap() - 1.0).abs() < 1e-14);
        for z in [0.2, 1.0, 3.0] {
            let v = box_conditional_generator(&c, &[1.0, 1.0], z).unwrap();
            assert!((v - c.generator().psi(z).unwrap()).abs() < 1e-14);
            // C^{1:2}(x, psi(z)) / x
            let x = 0.4;
            let direct = c.marginal(2).unwrap().cdf(&[x, c.generator().psi(z).unwrap()]).unwrap() / x;
            assert!((box_conditional_generator(&c, &[x], z).unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn mixture_identities() {
        let z: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
        let c = arch(F::gumbel(3.0).unwrap(), 3);
        let r = mixture_identity_check(&c, 1, &z, &IntegrationSpec::gauss(64)).unwrap();
        assert!(r.passed, "{}", r.max_abs_error);
        let r = box_mixture_identity_check(&c, &[0.6], &z, &IntegrationSpec::gauss(64)).unwrap();
        assert!(r.passed, "{}", r.max_abs_error);
        let i = arch(F::independence(), 3);
        let r = mixture_identity_check(&i, 1, &z, &IntegrationSpec::gauss(16)).unwrap();
        assert!(r.max_abs_error < 1e-13);
    }

    #[test]
    fn log_convexity() {
        let grid: Vec<f64> = (0..200).map(|i| 0.05 + i as f64 * 0.1).collect();
        for f in [F::gumbel(1.5).unwrap(), F::gumbel(5.0).unwrap(), F::clayton(0.5).unwrap(), F::independence()] {
            let c = arch(f, 3);
            assert_eq!(log_convexity_check(&c, 2, &grid).status, CheckStatus::Pass, "{f:?}");
        }
        let b = arch(F::clayton_boundary(3).unwrap(), 3);
        assert_eq!(log_convexity_check(&b, 2, &grid).status, CheckStatus::NotApplicable);
    }
}
