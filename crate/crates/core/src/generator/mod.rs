//! Parametric Archimedean generators.
//!
//! A [`Generator`] is a normalized d-monotone function `psi` (with
//! `psi(1) = 1/2`) together with its pseudoinverse `phi` and exact
//! derivatives of every order the copula machinery needs. Conditional
//! generators of the form `psi^(k)(a + r z) / psi^(k)(a)` are represented by
//! the same type, so a conditional copula is just another generator-backed
//! copula.

mod base;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots;
use base::Base;

/// Largest dimension the crate builds generators for.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyId {
    Independence,
    Gumbel,
    Clayton,
    Frank,
    ClaytonBoundary,
}

impl FamilyId {
    pub fn name(self) -> &'static str {
        match self {
            FamilyId::Independence => "independence",
            FamilyId::Gumbel => "gumbel",
            FamilyId::Clayton => "clayton",
            FamilyId::Frank => "frank",
            FamilyId::ClaytonBoundary => "clayton-boundary",
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "independence" | "indep" | "product" => Ok(FamilyId::Independence),
            "gumbel" => Ok(FamilyId::Gumbel),
            "clayton" => Ok(FamilyId::Clayton),
            "frank" => Ok(FamilyId::Frank),
            "clayton-boundary" | "boundary" => Ok(FamilyId::ClaytonBoundary),
            other => Err(Error::InvalidConfig(format!("unknown family '{other}'"))),
        }
    }
}

/// A family together with its parameter.
///
/// For `ClaytonBoundary` the parameter is `-1/(d-1)` and is fixed by the
/// dimension `d` it was built for; `Independence` has no parameter and
/// reports `theta = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorFamily {
    id: FamilyId,
    theta: f64,
}

impl GeneratorFamily {
    pub fn new(id: FamilyId, theta: f64) -> Result<Self> {
        let fam = GeneratorFamily { id, theta };
        fam.check_theta()?;
        Ok(fam)
    }

    pub fn independence() -> Self {
        GeneratorFamily { id: FamilyId::Independence, theta: 1.0 }
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        Self::new(FamilyId::Gumbel, theta)
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        Self::new(FamilyId::Clayton, theta)
    }

    pub fn frank(theta: f64) -> Result<Self> {
        Self::new(FamilyId::Frank, theta)
    }

    /// Clayton family at its lower boundary `theta = -1/(d-1)`.
    pub fn clayton_boundary(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InadmissibleParameter(format!("boundary Clayton needs d >= 2, got {d}")));
        }
        Ok(GeneratorFamily { id: FamilyId::ClaytonBoundary, theta: -1.0 / (d as f64 - 1.0) })
    }

    pub fn id(&self) -> FamilyId {
        self.id
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Largest dimension for which the generator is d-monotone (capped at
    /// [`MAX_DIM`] for the completely monotone families).
    pub fn admissible_dim(&self) -> usize {
        match self.id {
            FamilyId::ClaytonBoundary => (1.0 - 1.0 / self.theta).round() as usize,
            _ => MAX_DIM,
        }
    }

    fn check_theta(&self) -> Result<()> {
        let t = self.theta;
        let ok = t.is_finite()
            && match self.id {
                FamilyId::Independence => true,
                FamilyId::Gumbel => t >= 1.0,
                FamilyId::Clayton | FamilyId::Frank => t > 0.0,
                FamilyId::ClaytonBoundary => {
                    let d = 1.0 - 1.0 / t;
                    t < 0.0 && (d - d.round()).abs() < 1e-9 && d.round() >= 2.0
                }
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InadmissibleParameter(format!("theta = {t} is not admissible for {}", self.id)))
        }
    }

    fn base(&self) -> Base {
        match self.id {
            FamilyId::Independence => Base::independence(),
            FamilyId::Gumbel if self.theta == 1.0 => Base::gumbel(1.0),
            FamilyId::Gumbel => Base::gumbel(self.theta),
            FamilyId::Clayton => Base::clayton(self.theta),
            FamilyId::Frank => Base::frank(self.theta),
            FamilyId::ClaytonBoundary => Base::boundary(self.admissible_dim()),
        }
    }
}

/// Flat serialized form, e.g. `{"family":"gumbel","theta":3.0,"dim":3}`.
/// The normalization scale is recomputed when the generator is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: FamilyId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub dim: usize,
}

impl GeneratorSpec {
    pub fn family(&self) -> Result<GeneratorFamily> {
        match self.family {
            FamilyId::Independence => Ok(GeneratorFamily::independence()),
            FamilyId::ClaytonBoundary => {
                let fam = GeneratorFamily::clayton_boundary(self.dim)?;
                if let Some(t) = self.theta {
                    if (t - fam.theta).abs() > 1e-12 {
                        return Err(Error::InadmissibleParameter(format!(
                            "boundary Clayton in dimension {} has theta {}, got {t}",
                            self.dim, fam.theta
                        )));
                    }
                }
                Ok(fam)
            }
            id => {
                let t = self
                    .theta
                    .ok_or_else(|| Error::InvalidConfig(format!("family {id} requires theta")))?;
                GeneratorFamily::new(id, t)
            }
        }
    }

    pub fn build(&self) -> Result<Generator> {
        make_generator(self.family()?, self.dim)
    }
}

/// Builds the normalized generator of `family` for use in dimension `d`.
pub fn make_generator(family: GeneratorFamily, d: usize) -> Result<Generator> {
    family.check_theta()?;
    if d < 2 || d > family.admissible_dim() {
        return Err(Error::InadmissibleParameter(format!(
            "{} (theta = {}) is not a generator in dimension {d} (admissible up to {})",
            family.id,
            family.theta,
            family.admissible_dim()
        )));
    }
    Ok(Generator {
        family,
        dim: d,
        base: Arc::new(family.base()),
        order: 0,
        offset: 0.0,
        rescale: 1.0,
        ln_norm: 0.0,
    })
}

/// A normalized generator, possibly a conditional one.
///
/// Internally `psi(z) = psi_b^(k)(a + r z) / psi_b^(k)(a)` where `psi_b` is
/// the family's normalized generator. Plain generators have `k = 0, a = 0,
/// r = 1`.
#[derive(Clone, Debug)]
pub struct Generator {
    family: GeneratorFamily,
    dim: usize,
    base: Arc<Base>,
    order: usize,
    offset: f64,
    rescale: f64,
    ln_norm: f64,
}

impl Generator {
    pub fn family(&self) -> GeneratorFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normalization scale of the underlying family: `psi_norm(z) = psi_raw(s z)`.
    pub fn scale(&self) -> f64 {
        self.base.scale()
    }

    /// True when this is a conditional generator `psi^(k)(a + .)/psi^(k)(a)`.
    pub fn is_conditional(&self) -> bool {
        self.order > 0
    }

    /// `phi(0)`: `f64::INFINITY` exactly when the generator is strict.
    pub fn phi_zero(&self) -> f64 {
        let pz = self.base.phi_zero();
        if pz.is_infinite() {
            pz
        } else {
            (pz - self.offset) / self.rescale
        }
    }

    pub fn is_strict(&self) -> bool {
        self.phi_zero().is_infinite()
    }

    pub fn spec(&self) -> GeneratorSpec {
        let theta = match self.family.id {
            FamilyId::Independence | FamilyId::ClaytonBoundary => None,
            _ => Some(self.family.theta),
        };
        GeneratorSpec { family: self.family.id, theta, dim: self.dim }
    }

    /// The same generator declared for another dimension. Conditional
    /// generators can only be lowered.
    pub fn with_dim(&self, d: usize) -> Result<Generator> {
        let cap = if self.order == 0 { self.family.admissible_dim() } else { self.dim };
        if d < 2 || d > cap {
            return Err(Error::InadmissibleParameter(format!(
                "generator cannot be used in dimension {d} (at most {cap})"
            )));
        }
        let mut g = self.clone();
        g.dim = d;
        Ok(g)
    }

    /// `ln |psi^(m)(z)|`. The sign of `psi^(m)` is `(-1)^m`.
    ///
    /// No validation; `z` must be non-negative (infinity allowed).
    pub fn ln_abs_deriv(&self, m: usize, z: f64) -> f64 {
        if self.order == 0 && self.rescale == 1.0 {
            return self.base.ln_abs_deriv(m, z);
        }
        let w = self.offset + self.rescale * z;
        m as f64 * self.rescale.ln() + self.base.ln_abs_deriv(self.order + m, w) - self.ln_norm
    }

    /// `psi(z)` without argument checks.
    #[inline]
    pub fn psi_unchecked(&self, z: f64) -> f64 {
        if self.order == 0 && self.rescale == 1.0 {
            return self.base.psi(z);
        }
        self.ln_abs_deriv(0, z).exp().min(1.0)
    }

    pub fn psi(&self, z: f64) -> Result<f64> {
        if z.is_nan() || z < 0.0 {
            return Err(Error::Domain(format!("psi needs z >= 0, got {z}")));
        }
        Ok(self.psi_unchecked(z))
    }

    /// `phi(t)` without argument checks. Falls back to `phi(0)` if the
    /// numerical inversion fails, which only happens for `t` within rounding
    /// of 0.
    #[inline]
    pub fn phi_unchecked(&self, t: f64) -> f64 {
        if t >= 1.0 {
            return 0.0;
        }
        if t <= 0.0 {
            return self.phi_zero();
        }
        if self.order == 0 && self.rescale == 1.0 {
            return self.base.phi(t);
        }
        let target = t.ln() + self.ln_norm;
        match self.solve_base(self.order, target, self.offset) {
            Ok(w) => ((w - self.offset) / self.rescale).max(0.0),
            Err(_) => self.phi_zero(),
        }
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        if t.is_nan() || !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("phi needs t in [0, 1], got {t}")));
        }
        Ok(self.phi_unchecked(t))
    }

    /// `psi^(m)(z)` for `0 <= m <= d-1` and `z > 0`. Order `d-1` is the left
    /// derivative of `psi^(d-2)`.
    pub fn psi_deriv(&self, m: usize, z: f64) -> Result<f64> {
        if m >= self.dim {
            return Err(Error::Domain(format!(
                "derivative order {m} exceeds d-1 = {}",
                self.dim - 1
            )));
        }
        if z.is_nan() || z <= 0.0 {
            return Err(Error::Domain(format!("psi_deriv needs z > 0, got {z}")));
        }
        Ok(sign(m) * self.ln_abs_deriv(m, z).exp())
    }

    /// Solves `psi^(m)(z) = v` for `z > 0`, `1 <= m <= d-1`.
    pub fn psi_deriv_inverse(&self, m: usize, v: f64) -> Result<f64> {
        if m == 0 || m >= self.dim {
            return Err(Error::Domain(format!("inverse derivative order {m} not in 1..={}", self.dim - 1)));
        }
        if self.base.step_order() == Some(self.order + m) {
            return Err(Error::NonInvertible(format!(
                "derivative of order {m} is a step function for {}",
                self.family.id
            )));
        }
        if v.is_nan() || v == 0.0 || (v > 0.0) != (m % 2 == 0) {
            return Err(Error::Range(format!("{v} is not a value of psi^({m})")));
        }
        let target = v.abs().ln() - m as f64 * self.rescale.ln() + self.ln_norm;
        let w = self.solve_base(self.order + m, target, self.offset)?;
        let z = (w - self.offset) / self.rescale;
        if z <= 0.0 {
            return Err(Error::Range(format!("{v} is not a value of psi^({m}) on (0, inf)")));
        }
        Ok(z)
    }

    /// Finds `w >= lo` with `ln |psi_b^(n)(w)| = target`.
    pub(crate) fn solve_base(&self, n: usize, target: f64, lo: f64) -> Result<f64> {
        let f_lo = self.base.ln_abs_deriv(n, lo) - target;
        if f_lo < 0.0 {
            // within rounding of the left end
            if f_lo > -1e-13 * target.abs().max(1.0) {
                return Ok(lo);
            }
            return Err(Error::Range(format!(
                "target {target} above ln|psi^({n})({lo})| = {}",
                f_lo + target
            )));
        }
        if let Some(w) = self.base.solve_closed_form(n, target) {
            return Ok(w.max(lo));
        }
        let base = &self.base;
        let f = |w: f64| base.ln_abs_deriv(n, w) - target;
        let (a, b) = roots::bracket_decreasing(f, lo, lo.max(1.0))?;
        roots::newton_bracketed(
            |w| {
                let ln_n = base.ln_abs_deriv(n, w);
                let slope = -(base.ln_abs_deriv(n + 1, w) - ln_n).exp();
                (ln_n - target, slope)
            },
            a,
            b,
            1e-15,
        )
    }

    /// Finds `z >= lo` with `ln |psi^(m)(z)| = target`.
    pub(crate) fn solve_ln_deriv(&self, m: usize, target: f64, lo: f64) -> Result<f64> {
        let target_base = target - m as f64 * self.rescale.ln() + self.ln_norm;
        let w = self.solve_base(self.order + m, target_base, self.offset + self.rescale * lo)?;
        Ok(((w - self.offset) / self.rescale).max(lo))
    }

    /// Conditional generator `psi^(l)(a + z) / psi^(l)(a)` as a generator for
    /// dimension `dim`.
    pub(crate) fn conditioned(&self, l: usize, a: f64, dim: usize) -> Generator {
        let offset = self.offset + self.rescale * a;
        let order = self.order + l;
        Generator {
            family: self.family,
            dim,
            base: Arc::clone(&self.base),
            order,
            offset,
            rescale: self.rescale,
            ln_norm: self.base.ln_abs_deriv(order, offset),
        }
    }

    /// Rescales the argument so that `psi(1) = 1/2`.
    pub fn normalized(&self) -> Result<Generator> {
        let z_half = self.phi(0.5)?;
        let mut g = self.clone();
        g.rescale *= z_half;
        if g.order == 0 {
            g.ln_norm = 0.0;
        }
        Ok(g)
    }

    /// Location of the kink of a piecewise-polynomial generator, if any.
    pub fn kink(&self) -> Option<f64> {
        self.base.step_order().map(|_| self.phi_zero())
    }

    /// Derivative order of the underlying step-function derivative, relative
    /// to this generator.
    pub(crate) fn step_order(&self) -> Option<usize> {
        self.base.step_order().and_then(|p| p.checked_sub(self.order))
    }

    /// Checks the d-monotonicity sign pattern on `grid`.
    pub fn validate_d_monotone(&self, grid: &[f64]) -> MonotonicityReport {
        validate_d_monotone(|m, z| sign(m) * self.ln_abs_deriv(m, z).exp(), self.dim, grid)
    }
}

#[inline]
pub(crate) fn sign(m: usize) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// First failed condition found by [`validate_d_monotone`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub condition: String,
    pub order: usize,
    pub z: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub passed: bool,
    pub checked_points: usize,
    pub first_violation: Option<Violation>,
}

/// Checks d-monotonicity of a function given through its derivatives
/// `deriv(m, z)`: `(-1)^m psi^(m) >= 0` for `m <= d-2`, and
/// `(-1)^(d-2) psi^(d-2)` non-increasing and convex on the sorted grid.
pub fn validate_d_monotone<F>(deriv: F, d: usize, grid: &[f64]) -> MonotonicityReport
where
    F: Fn(usize, f64) -> f64,
{
    let mut z: Vec<f64> = grid.iter().copied().filter(|v| *v > 0.0).collect();
    z.sort_by(f64::total_cmp);
    z.dedup();
    let fail = |condition: &str, order, z, value| MonotonicityReport {
        passed: false,
        checked_points: grid.len(),
        first_violation: Some(Violation { condition: condition.to_string(), order, z, value }),
    };
    if z.is_empty() {
        return fail("empty grid", 0, f64::NAN, f64::NAN);
    }
    let top = d.saturating_sub(2);
    for m in 0..=top {
        for &zi in &z {
            let v = sign(m) * deriv(m, zi);
            if v.is_nan() || v < -1e-12 {
                return fail("sign", m, zi, v);
            }
        }
    }
    let g: Vec<f64> = z.iter().map(|&zi| sign(top) * deriv(top, zi)).collect();
    let tol = |a: f64, b: f64| 1e-10 * (1.0 + a.abs() + b.abs());
    for i in 1..z.len() {
        if g[i] > g[i - 1] + tol(g[i], g[i - 1]) {
            return fail("non-increasing", top, z[i], g[i] - g[i - 1]);
        }
    }
    for i in 1..z.len().saturating_sub(1) {
        let left = (g[i] - g[i - 1]) / (z[i] - z[i - 1]);
        let right = (g[i + 1] - g[i]) / (z[i + 1] - z[i]);
        let scale = tol(g[i - 1], g[i + 1]) / (z[i + 1] - z[i - 1]).min(z[i] - z[i - 1]);
        if right < left - scale {
            return fail("convexity", top, z[i], right - left);
        }
    }
    MonotonicityReport { passed: true, checked_points: z.len(), first_violation: None }
}
