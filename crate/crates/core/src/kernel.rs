//! Closed-form Markov kernels of Archimedean copulas.
//!
//! For `x` in `I^l` and `y` in `I^(d-l)` the kernel is
//!
//! ```text
//! K(x, [0,y]) = 1                                   if min(x) = 1 or x in L0^{1:l}
//!             = 0                                   if (x, y) in int L0
//!             = psi^(l)(a + b) / psi^(l)(a)         otherwise
//! ```
//!
//! with `a = sum phi(x_i)` and `b = sum phi(y_j)`. The ratio is evaluated in
//! log space. For `l = d - 1` the top derivative is the left derivative of
//! `psi^(d-2)`, which is a step function for the boundary Clayton family.

use serde::Serialize;

use crate::copula::{check_dim, ArchimedeanCopula, Copula, KernelCopula, TargetGrid, ZeroSetClass};
use crate::error::{check_unit, check_unit_all, Error, Result};

/// Which case of the kernel formula produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelBranch {
    MinIsOne,
    InZeroMargin,
    InteriorZeroSet,
    Regular,
}

impl KernelBranch {
    pub fn name(self) -> &'static str {
        match self {
            KernelBranch::MinIsOne => "min-is-one",
            KernelBranch::InZeroMargin => "in-zero-margin",
            KernelBranch::InteriorZeroSet => "interior-zero-set",
            KernelBranch::Regular => "regular",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelEvaluation {
    pub value: f64,
    pub branch: KernelBranch,
}

/// A conditional quantile. `generalized` is set when the conditional
/// distribution is a step function and the right-continuous generalized
/// inverse was returned.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelQuantile {
    pub value: f64,
    pub generalized: bool,
}

impl ArchimedeanCopula {
    fn check_split(&self, l: usize) -> Result<()> {
        if l == 0 || l >= self.dim() {
            return Err(Error::Domain(format!(
                "kernel needs 1 <= l <= d-1 = {}, got l = {l}",
                self.dim() - 1
            )));
        }
        Ok(())
    }

    /// The kernel from `a = sum phi(x_i)` and `b = sum phi(y_j)`.
    pub(crate) fn kernel_from_sums(&self, l: usize, min_x_is_one: bool, a: f64, b: f64) -> KernelEvaluation {
        if min_x_is_one {
            return KernelEvaluation { value: 1.0, branch: KernelBranch::MinIsOne };
        }
        if self.classify_sum(a) != ZeroSetClass::Outside {
            return KernelEvaluation { value: 1.0, branch: KernelBranch::InZeroMargin };
        }
        let s = a + b;
        let value = match self.classify_sum(s) {
            ZeroSetClass::Interior => {
                return KernelEvaluation { value: 0.0, branch: KernelBranch::InteriorZeroSet };
            }
            _ if s.is_infinite() => 0.0,
            // left limit at phi(0)
            ZeroSetClass::Boundary => self.ratio(l, a, self.generator().phi_zero()),
            ZeroSetClass::Outside => self.ratio(l, a, s),
        };
        KernelEvaluation { value, branch: KernelBranch::Regular }
    }

    fn ratio(&self, l: usize, a: f64, s: f64) -> f64 {
        let g = self.generator();
        let den = g.ln_abs_deriv(l, a);
        if den == f64::NEG_INFINITY {
            return 0.0;
        }
        (g.ln_abs_deriv(l, s) - den).exp().clamp(0.0, 1.0)
    }

    /// `K(x, [0, y])` for the `l`-Markov kernel, `l = x.len()`.
    pub fn kernel_cdf(&self, x: &[f64], y: &[f64]) -> Result<KernelEvaluation> {
        let l = x.len();
        self.check_split(l)?;
        check_dim("kernel target", y.len(), self.dim() - l)?;
        check_unit_all("x", x)?;
        check_unit_all("y", y)?;
        let min_x = x.iter().copied().fold(1.0, f64::min);
        Ok(self.kernel_from_sums(l, min_x == 1.0, self.sum_phi(x), self.sum_phi(y)))
    }

    /// `g_x(y)`: distribution function of one target coordinate under `K(x, .)`.
    pub fn kernel_univariate_cdf(&self, x: &[f64], y: f64) -> Result<f64> {
        let l = x.len();
        self.check_split(l)?;
        check_unit_all("x", x)?;
        check_unit("y", y)?;
        let min_x = x.iter().copied().fold(1.0, f64::min);
        let g = self.generator();
        Ok(self.kernel_from_sums(l, min_x == 1.0, self.sum_phi(x), g.phi_unchecked(y)).value)
    }

    /// `g_x^{-1}(u) = psi(psi^(l)^{-1}(u psi^(l)(a)) - a)`.
    pub fn kernel_univariate_quantile(&self, x: &[f64], u: f64) -> Result<KernelQuantile> {
        let l = x.len();
        self.check_split(l)?;
        check_unit_all("x", x)?;
        check_unit("u", u)?;
        let a = self.sum_phi(x);
        if x.iter().any(|&t| t == 0.0 || t == 1.0) || self.classify_sum(a) != ZeroSetClass::Outside {
            return Err(Error::Domain(format!(
                "quantile needs an interior conditioning point outside the zero set, got {x:?}"
            )));
        }
        Ok(self.quantile_from_sum(l, a, u)?)
    }

    pub(crate) fn quantile_from_sum(&self, l: usize, a: f64, u: f64) -> Result<KernelQuantile> {
        let g = self.generator();
        if g.step_order() == Some(l) {
            // K(x, .) is a unit step at y* = psi(phi(0) - a)
            let value = if u == 0.0 { 0.0 } else { g.psi_unchecked(g.phi_zero() - a) };
            return Ok(KernelQuantile { value, generalized: true });
        }
        if u == 0.0 {
            return Ok(KernelQuantile { value: 0.0, generalized: false });
        }
        if u == 1.0 {
            return Ok(KernelQuantile { value: 1.0, generalized: false });
        }
        let target = u.ln() + g.ln_abs_deriv(l, a);
        let z = g.solve_ln_deriv(l, target, a).map_err(|e| {
            Error::NumericalFailure(format!("conditional quantile at u = {u}: {e}"))
        })?;
        Ok(KernelQuantile { value: g.psi_unchecked(z - a), generalized: false })
    }

    /// Evaluates the kernel after replacing each group of consecutive target
    /// coordinates by the value of its marginal copula. `grouping` lists the
    /// group sizes in order.
    pub fn kernel_consolidate(&self, x: &[f64], y: &[f64], grouping: &[usize]) -> Result<f64> {
        if !self.is_strict() {
            return Err(Error::NotStrict("consolidation needs a strict generator".into()));
        }
        let l = x.len();
        self.check_split(l)?;
        check_dim("kernel target", y.len(), self.dim() - l)?;
        if grouping.iter().any(|&k| k == 0) || grouping.iter().sum::<usize>() != y.len() {
            return Err(Error::Domain(format!("grouping {grouping:?} does not partition {} coordinates", y.len())));
        }
        check_unit_all("y", y)?;
        let mut merged = Vec::with_capacity(grouping.len());
        let mut start = 0;
        for &k in grouping {
            let block = &y[start..start + k];
            merged.push(if k == 1 { block[0] } else { self.marginal(k)?.cdf(block)? });
            start += k;
        }
        let lower = self.marginal(l + grouping.len())?;
        Ok(lower.kernel_cdf(x, &merged)?.value)
    }
}

impl KernelCopula for ArchimedeanCopula {
    fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.kernel_cdf(x, y)?.value)
    }

    fn conditional_cdf(&self, x: &[f64], y: f64) -> Result<f64> {
        self.kernel_univariate_cdf(x, y)
    }

    fn conditional_quantile(&self, x: &[f64], v: f64) -> Result<f64> {
        Ok(self.kernel_univariate_quantile(x, v)?.value)
    }

    fn prepare_targets(&self, ys: &[f64]) -> Result<TargetGrid> {
        check_unit_all("y", ys)?;
        let g = self.generator();
        Ok(TargetGrid { ys: ys.to_vec(), transformed: ys.iter().map(|&y| g.phi_unchecked(y)).collect() })
    }

    fn conditional_cdf_on(&self, x: &[f64], grid: &TargetGrid, out: &mut [f64]) -> Result<()> {
        let l = x.len();
        self.check_split(l)?;
        check_unit_all("x", x)?;
        let g = self.generator();
        let fresh;
        let phis = if grid.transformed.len() == grid.ys.len() {
            &grid.transformed
        } else {
            fresh = grid.ys.iter().map(|&y| g.phi_unchecked(y)).collect::<Vec<_>>();
            &fresh
        };
        let min_one = x.iter().all(|&t| t == 1.0);
        let a = self.sum_phi(x);
        if min_one || self.classify_sum(a) != ZeroSetClass::Outside || !self.is_strict() {
            for (o, &b) in out.iter_mut().zip(phis) {
                *o = self.kernel_from_sums(l, min_one, a, b).value;
            }
            return Ok(());
        }
        // strict: every target is in the regular branch
        let den = g.ln_abs_deriv(l, a);
        for (o, &b) in out.iter_mut().zip(phis) {
            *o = if b.is_infinite() { 0.0 } else { (g.ln_abs_deriv(l, a + b) - den).exp().clamp(0.0, 1.0) };
        }
        Ok(())
    }

    fn transform_leading(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let g = self.generator();
        out[0] = v[0];
        let mut a = g.phi_unchecked(v[0]);
        for j in 1..v.len() {
            if !(out[..j].iter().all(|&t| t > 0.0 && t < 1.0)) || self.classify_sum(a) != ZeroSetClass::Outside {
                // conditioning point on the edge of the cube: fall back to the checked path
                let (head, tail) = out.split_at_mut(j);
                tail[0] = self.conditional_quantile(head, v[j])?;
            } else {
                out[j] = self.quantile_from_sum(j, a, v[j])?.value;
            }
            a += g.phi_unchecked(out[j]);
        }
        Ok(())
    }
}
