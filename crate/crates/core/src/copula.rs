//! Copula evaluation: Archimedean copulas, the fixture copula
//! `B(x, y, z) = z min(x, y)`, box volumes and the finite-difference kernel
//! oracle.

use serde::Serialize;

use crate::error::{check_unit_all, Error, Result};
use crate::generator::{make_generator, Generator, GeneratorFamily};

/// A d-dimensional copula given by its distribution function.
pub trait Copula: Send + Sync {
    fn dim(&self) -> usize;
    fn cdf(&self, u: &[f64]) -> Result<f64>;
}

/// Target values of a conditional distribution prepared by
/// [`KernelCopula::prepare_targets`]; `transformed` is copula-specific
/// (the `phi` values for Archimedean copulas).
#[derive(Clone, Debug)]
pub struct TargetGrid {
    pub ys: Vec<f64>,
    pub(crate) transformed: Vec<f64>,
}

/// A copula with access to its Markov kernels.
///
/// `kernel(x, y)` is `K(x, [0, y])` for the `l`-Markov kernel with
/// `l = x.len()` and `y.len() = dim - l`. The conditional distribution of the
/// single coordinate `l + 1` given the first `l` is exposed separately,
/// together with its quantile, because sampling and integration against
/// leading marginals are built from it.
pub trait KernelCopula: Copula {
    fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    /// Conditional distribution function of coordinate `x.len() + 1` given
    /// the first `x.len()` coordinates, evaluated at `y`.
    fn conditional_cdf(&self, x: &[f64], y: f64) -> Result<f64> {
        let mut target = vec![1.0; self.dim() - x.len()];
        target[0] = y;
        self.kernel(x, &target)
    }

    /// Quantile of [`KernelCopula::conditional_cdf`] (right-continuous
    /// generalized inverse where the distribution has atoms).
    fn conditional_quantile(&self, x: &[f64], v: f64) -> Result<f64>;

    /// Prepares target values for repeated [`KernelCopula::conditional_cdf_on`]
    /// calls. Only the copula that prepared a grid may evaluate on it.
    fn prepare_targets(&self, ys: &[f64]) -> Result<TargetGrid> {
        check_unit_all("y", ys)?;
        Ok(TargetGrid { ys: ys.to_vec(), transformed: Vec::new() })
    }

    /// [`KernelCopula::conditional_cdf`] at every point of a prepared grid.
    fn conditional_cdf_on(&self, x: &[f64], grid: &TargetGrid, out: &mut [f64]) -> Result<()> {
        for (o, &y) in out.iter_mut().zip(&grid.ys) {
            *o = self.conditional_cdf(x, y)?;
        }
        Ok(())
    }

    /// [`KernelCopula::conditional_cdf`] for many conditioning points at once.
    /// `xs` holds `l`-vectors back to back; the result is row-major with one
    /// row per conditioning point and one column per entry of `ys`.
    fn conditional_cdf_grid(&self, xs: &[f64], l: usize, ys: &[f64]) -> Result<Vec<f64>> {
        let grid = self.prepare_targets(ys)?;
        let rows = xs.len() / l.max(1);
        let mut out = vec![0.0; rows * ys.len()];
        if ys.is_empty() {
            return Ok(out);
        }
        for (x, o) in xs.chunks(l).zip(out.chunks_mut(ys.len())) {
            self.conditional_cdf_on(x, &grid, o)?;
        }
        Ok(out)
    }

    /// Conditional-distribution (Rosenblatt) map: sends `v`, uniform on the
    /// unit cube, to a point distributed as the leading `v.len()`-marginal.
    fn transform_leading(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = v[0];
        for j in 1..v.len() {
            let (head, tail) = out.split_at_mut(j);
            tail[0] = self.conditional_quantile(head, v[j])?;
        }
        Ok(())
    }
}

impl<T: Copula + ?Sized> Copula for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn cdf(&self, u: &[f64]) -> Result<f64> {
        (**self).cdf(u)
    }
}

impl<T: KernelCopula + ?Sized> KernelCopula for &T {
    fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        (**self).kernel(x, y)
    }
    fn conditional_cdf(&self, x: &[f64], y: f64) -> Result<f64> {
        (**self).conditional_cdf(x, y)
    }
    fn conditional_quantile(&self, x: &[f64], v: f64) -> Result<f64> {
        (**self).conditional_quantile(x, v)
    }
    fn prepare_targets(&self, ys: &[f64]) -> Result<TargetGrid> {
        (**self).prepare_targets(ys)
    }
    fn conditional_cdf_on(&self, x: &[f64], grid: &TargetGrid, out: &mut [f64]) -> Result<()> {
        (**self).conditional_cdf_on(x, grid, out)
    }
    fn transform_leading(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).transform_leading(v, out)
    }
}

pub(crate) fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!("{what}: expected {want} coordinates, got {got}")));
    }
    Ok(())
}

/// Relative tolerance used when comparing a sum of `phi` values with `phi(0)`.
pub const ZERO_SET_RTOL: f64 = 1e-12;

/// Position of a point relative to the zero set `L0 = {sum phi >= phi(0)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroSetClass {
    Outside,
    Boundary,
    Interior,
}

/// A zero-set membership question for the leading `margin` coordinates of
/// `point` (the whole point when `margin == point.len()`).
#[derive(Clone, Debug)]
pub struct ZeroSetQuery {
    pub point: Vec<f64>,
    pub margin: usize,
}

impl ZeroSetQuery {
    pub fn full(point: Vec<f64>) -> Self {
        let margin = point.len();
        ZeroSetQuery { point, margin }
    }
}

/// The Archimedean copula `C(x) = psi(phi(x_1) + ... + phi(x_d))`.
#[derive(Clone, Debug)]
pub struct ArchimedeanCopula {
    gen: Generator,
    d: usize,
}

impl ArchimedeanCopula {
    /// Copula in the generator's declared dimension.
    pub fn new(gen: Generator) -> Self {
        let d = gen.dim();
        ArchimedeanCopula { gen, d }
    }

    pub fn from_family(family: GeneratorFamily, d: usize) -> Result<Self> {
        Ok(Self::new(make_generator(family, d)?))
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    pub fn is_strict(&self) -> bool {
        self.gen.is_strict()
    }

    /// The leading `l`-marginal: the Archimedean copula with the same
    /// generator in dimension `l` (`l = 1` is the uniform distribution).
    pub fn marginal(&self, l: usize) -> Result<ArchimedeanCopula> {
        if l == 0 || l > self.d {
            return Err(Error::Domain(format!("marginal dimension {l} not in 1..={}", self.d)));
        }
        Ok(ArchimedeanCopula { gen: self.gen.clone(), d: l })
    }

    /// `sum phi(x_i)`, infinite when a coordinate is 0 and the generator is strict.
    pub fn sum_phi(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| self.gen.phi_unchecked(t)).sum()
    }

    pub(crate) fn classify_sum(&self, s: f64) -> ZeroSetClass {
        let pz = self.gen.phi_zero();
        if pz.is_infinite() {
            return if s.is_infinite() { ZeroSetClass::Boundary } else { ZeroSetClass::Outside };
        }
        let tol = ZERO_SET_RTOL * pz;
        if s > pz + tol {
            ZeroSetClass::Interior
        } else if s >= pz - tol {
            ZeroSetClass::Boundary
        } else {
            ZeroSetClass::Outside
        }
    }

    pub fn in_zero_set(&self, q: &ZeroSetQuery) -> Result<ZeroSetClass> {
        if q.margin == 0 || q.margin > q.point.len() || q.point.len() > self.d {
            return Err(Error::DimensionMismatch(format!(
                "zero-set query on {} of {} coordinates in dimension {}",
                q.margin,
                q.point.len(),
                self.d
            )));
        }
        check_unit_all("point", &q.point)?;
        Ok(self.classify_sum(self.sum_phi(&q.point[..q.margin])))
    }

    /// Density `prod phi'(x_i) psi^(d)(sum phi(x_i))`, using the almost
    /// everywhere derivative of the top derivative. Zero on the zero set.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.ln_density(x)?.exp())
    }

    /// Natural log of [`ArchimedeanCopula::density`] (`-inf` where it is 0).
    pub fn ln_density(&self, x: &[f64]) -> Result<f64> {
        check_dim("density", x.len(), self.d)?;
        if x.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Domain("density needs a point of the open cube".into()));
        }
        let phis: Vec<f64> = x.iter().map(|&t| self.gen.phi_unchecked(t)).collect();
        let s: f64 = phis.iter().sum();
        if let Some(k) = self.gen.kink() {
            if (s - k).abs() <= ZERO_SET_RTOL * k {
                return Err(Error::NotDifferentiable(format!("sum phi = {s} sits on the kink {k}")));
            }
            if s > k {
                return Ok(f64::NEG_INFINITY);
            }
        }
        let g = &self.gen;
        let top = g.ln_abs_deriv(self.d, s);
        Ok(top - phis.iter().map(|&p| g.ln_abs_deriv(1, p)).sum::<f64>())
    }
}

impl Copula for ArchimedeanCopula {
    fn dim(&self) -> usize {
        self.d
    }

    fn cdf(&self, x: &[f64]) -> Result<f64> {
        check_dim("cdf", x.len(), self.d)?;
        check_unit_all("x", x)?;
        let s = self.sum_phi(x);
        if s >= self.gen.phi_zero() {
            return Ok(0.0);
        }
        Ok(self.gen.psi_unchecked(s))
    }
}

/// The three-dimensional copula `B(x, y, z) = z min(x, y)`: the first two
/// coordinates are comonotone and the third is independent of both.
#[derive(Clone, Copy, Debug, Default)]
pub struct FixtureCopulaB;

impl Copula for FixtureCopulaB {
    fn dim(&self) -> usize {
        3
    }

    fn cdf(&self, u: &[f64]) -> Result<f64> {
        check_dim("fixture cdf", u.len(), 3)?;
        check_unit_all("u", u)?;
        Ok(u[2] * u[0].min(u[1]))
    }
}

impl KernelCopula for FixtureCopulaB {
    /// `K(x, [0,y2] x [0,y3]) = 1{x <= y2} y3` and `K((x,y), [0,z]) = z`.
    fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim("fixture kernel", x.len() + y.len(), 3)?;
        check_unit_all("x", x)?;
        check_unit_all("y", y)?;
        match x.len() {
            1 => Ok(if x[0] <= y[0] { y[1] } else { 0.0 }),
            2 => Ok(y[0]),
            l => Err(Error::Domain(format!("fixture copula has no {l}-Markov kernel"))),
        }
    }

    fn conditional_quantile(&self, x: &[f64], v: f64) -> Result<f64> {
        check_unit_all("x", x)?;
        match x.len() {
            1 => Ok(if v > 0.0 { x[0] } else { 0.0 }),
            2 => Ok(v),
            l => Err(Error::Domain(format!("fixture copula has no {l}-Markov kernel"))),
        }
    }
}

/// V_F((a, b]) for a function `f` on the unit cube: the signed sum of `f`
/// over the vertices of the box.
pub fn box_volume_with<F>(f: F, a: &[f64], b: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if a.len() != b.len() {
        return Err(Error::InvalidBox(format!("corners of length {} and {}", a.len(), b.len())));
    }
    if a.iter().zip(b).any(|(x, y)| !(x <= y)) {
        return Err(Error::InvalidBox(format!("{a:?} is not below {b:?}")));
    }
    check_unit_all("a", a)?;
    check_unit_all("b", b)?;
    let k = a.len();
    let mut v = vec![0.0; k];
    let mut terms = Vec::with_capacity(1 << k);
    for mask in 0u32..(1 << k) {
        let mut lower = 0;
        for i in 0..k {
            if mask & (1 << i) != 0 {
                v[i] = b[i];
            } else {
                v[i] = a[i];
                lower += 1;
            }
        }
        let s = if lower % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(s * f(&v)?);
    }
    let vol = crate::quadrature::pairwise_sum(&terms);
    Ok(if (-1e-12..0.0).contains(&vol) { 0.0 } else { vol })
}

/// `C`-volume of the box `(a, b]`. Rounding below `-1e-12` is reported as is
/// (a genuinely negative volume); smaller negative values are clamped to 0.
pub fn box_volume<C: Copula + ?Sized>(c: &C, a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim("box", a.len(), c.dim())?;
    box_volume_with(|v| c.cdf(v), a, b)
}

/// Finite-difference estimate of `K(x, [0, y])` as
/// `d^l C(x, y) / dx_1 ... dx_l` divided by the marginal density `c^{1:l}(x)`.
///
/// Both mixed partials are iterated central differences
/// `Delta_h^1 ... Delta_h^l` of the distribution function, extrapolated
/// (Richardson) over the steps `h, h/2, h/4`. The step is shrunk to keep
/// every evaluation inside the cube; a step below `1e-7` or a marginal
/// density lost in rounding gives [`Error::StepTooSmall`].
pub fn partial_derivative_kernel_oracle<C: Copula + ?Sized>(
    c: &C,
    x: &[f64],
    y: &[f64],
    h: f64,
) -> Result<f64> {
    check_dim("oracle", x.len() + y.len(), c.dim())?;
    check_unit_all("x", x)?;
    check_unit_all("y", y)?;
    let room = x.iter().map(|&t| t.min(1.0 - t)).fold(f64::INFINITY, f64::min);
    let mut h = h.min(0.9 * room);
    let ones = vec![1.0; y.len()];
    for _attempt in 0..4 {
        if h < 1e-7 {
            break;
        }
        let num = richardson_mixed(c, x, y, h)?;
        let den = richardson_mixed(c, x, &ones, h)?;
        // roundoff in an l-fold difference of values of size <= 1
        let noise = 1e3 * f64::EPSILON * (1u64 << x.len()) as f64 / (2.0 * h / 4.0).powi(x.len() as i32);
        if den.abs() > noise {
            return Ok(num / den);
        }
        h *= 2.0;
        if h > 0.9 * room {
            break;
        }
    }
    Err(Error::StepTooSmall(format!("marginal density at {x:?} lost in rounding")))
}

fn mixed_difference<C: Copula + ?Sized>(c: &C, x: &[f64], y: &[f64], h: f64) -> Result<f64> {
    let l = x.len();
    let mut point: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut terms = Vec::with_capacity(1 << l);
    for mask in 0u32..(1 << l) {
        let mut minus = 0;
        for i in 0..l {
            if mask & (1 << i) != 0 {
                point[i] = x[i] + h;
            } else {
                point[i] = x[i] - h;
                minus += 1;
            }
        }
        let s = if minus % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(s * c.cdf(&point)?);
    }
    Ok(crate::quadrature::pairwise_sum(&terms) / (2.0 * h).powi(l as i32))
}

fn richardson_mixed<C: Copula + ?Sized>(c: &C, x: &[f64], y: &[f64], h: f64) -> Result<f64> {
    let d0 = mixed_difference(c, x, y, h)?;
    let d1 = mixed_difference(c, x, y, h / 2.0)?;
    let d2 = mixed_difference(c, x, y, h / 4.0)?;
    let r1 = (4.0 * d1 - d0) / 3.0;
    let r2 = (4.0 * d2 - d1) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}
