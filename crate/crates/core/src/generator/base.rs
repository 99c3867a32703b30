//! Normalized base generators and their derivatives in log space.
//!
//! Every family is stored already normalized (`psi(1) = 1/2`). The central
//! primitive is [`Base::ln_abs_deriv`], returning `ln |psi^(m)(z)|`. The sign
//! of `psi^(m)` is always `(-1)^m` for the shipped families, so magnitudes in
//! log space carry all the information and ratios of derivatives never
//! overflow or underflow.

use std::f64::consts::LN_2;

/// Highest derivative order precomputed for the polynomial families.
pub(crate) const MAX_ORDER: usize = 24;

#[derive(Clone, Debug)]
pub(crate) enum Base {
    /// `psi(z) = 2^(-z)`.
    Independence,
    /// `psi(z) = exp(-ln2 * z^alpha)`, `alpha = 1/theta`.
    ///
    /// `psi^(m)(z) = psi(z) z^(-m) P_m(w)` with `w = ln2 * z^alpha`; `coeffs[m][k]`
    /// holds `|[w^k] P_m|`. All coefficients of `P_m` share the sign `(-1)^m`.
    Gumbel { alpha: f64, coeffs: Vec<Vec<f64>> },
    /// `psi(z) = (1 + s z)^(-1/theta)`.
    Clayton { inv_theta: f64, scale: f64, ln_rising: Vec<f64> },
    /// `psi(z) = -ln(1 - kappa e^(-s z)) / theta`, `kappa = 1 - e^(-theta)`.
    ///
    /// Derivatives are polylogarithms of negative order,
    /// `Li_(-n)(q) = q A_n(q) / (1 - q)^(n + 1)` with Eulerian polynomials `A_n`.
    Frank { theta: f64, scale: f64, ln_kappa: f64, eulerian: Vec<Vec<f64>> },
    /// `psi(z) = (1 - sigma z)_+^p`, the Clayton boundary `theta = -1/p`.
    Boundary { p: usize, sigma: f64, phi_zero: f64 },
}

fn ln1mexp(lq: f64) -> f64 {
    // ln(1 - e^lq) for lq < 0
    if lq < -LN_2 {
        (-lq.exp()).ln_1p()
    } else {
        (-lq.exp_m1()).ln()
    }
}

/// `ln(sum_k c[k] w^k)` for non-negative coefficients, without overflow.
fn ln_poly(c: &[f64], w: f64) -> f64 {
    if w <= 1.0 {
        c.iter().rev().fold(0.0, |acc, &ck| acc * w + ck).ln()
    } else {
        let deg = c.len() - 1;
        let inv = 1.0 / w;
        let s = c.iter().fold(0.0, |acc, &ck| acc * inv + ck);
        deg as f64 * w.ln() + s.ln()
    }
}

impl Base {
    pub(crate) fn independence() -> Base {
        Base::Independence
    }

    pub(crate) fn gumbel(theta: f64) -> Base {
        let alpha = 1.0 / theta;
        let mut coeffs = vec![vec![1.0]];
        for m in 0..MAX_ORDER {
            let prev = &coeffs[m];
            let mut next = vec![0.0; m + 2];
            for (k, slot) in next.iter_mut().enumerate() {
                let a_k = prev.get(k).copied().unwrap_or(0.0);
                let a_km1 = if k > 0 { prev[k - 1] } else { 0.0 };
                *slot = (m as f64 - alpha * k as f64) * a_k + alpha * a_km1;
            }
            coeffs.push(next);
        }
        Base::Gumbel { alpha, coeffs }
    }

    pub(crate) fn clayton(theta: f64) -> Base {
        let inv_theta = 1.0 / theta;
        let scale = theta.exp2() - 1.0;
        let mut ln_rising = vec![0.0];
        for k in 0..MAX_ORDER {
            ln_rising.push(ln_rising[k] + (inv_theta + k as f64).ln());
        }
        Base::Clayton { inv_theta, scale, ln_rising }
    }

    pub(crate) fn frank(theta: f64) -> Base {
        let scale = (-0.5 * theta).exp().ln_1p();
        let ln_kappa = (-(-theta).exp()).ln_1p();
        // eulerian[n][k] = A(n, k)
        let mut eulerian: Vec<Vec<f64>> = vec![vec![1.0]];
        for n in 1..=MAX_ORDER {
            let prev = &eulerian[n - 1];
            let row: Vec<f64> = (0..n.max(1))
                .map(|k| {
                    if n == 1 {
                        return 1.0;
                    }
                    let a = prev.get(k).copied().unwrap_or(0.0);
                    let b = if k > 0 { prev.get(k - 1).copied().unwrap_or(0.0) } else { 0.0 };
                    (k as f64 + 1.0) * a + (n - k) as f64 * b
                })
                .collect();
            eulerian.push(row);
        }
        Base::Frank { theta, scale, ln_kappa, eulerian }
    }

    pub(crate) fn boundary(dim: usize) -> Base {
        let p = dim - 1;
        let sigma = -(-LN_2 / p as f64).exp_m1();
        Base::Boundary { p, sigma, phi_zero: 1.0 / sigma }
    }

    /// Normalization scale `s` with `psi_norm(z) = psi_raw(s z)`, where the raw
    /// generators are `e^(-z)`, `exp(-z^(1/theta))`, `(1 + z)^(-1/theta)`,
    /// `-ln(1 - (1 - e^(-theta)) e^(-z)) / theta` and `(1 - z/p)_+^p`.
    pub(crate) fn scale(&self) -> f64 {
        match self {
            Base::Independence => LN_2,
            Base::Gumbel { alpha, .. } => LN_2.powf(1.0 / alpha),
            Base::Clayton { scale, .. } | Base::Frank { scale, .. } => *scale,
            Base::Boundary { p, sigma, .. } => *p as f64 * sigma,
        }
    }

    pub(crate) fn phi_zero(&self) -> f64 {
        match self {
            Base::Boundary { phi_zero, .. } => *phi_zero,
            _ => f64::INFINITY,
        }
    }

    /// Order of the piecewise-constant top derivative, if the family has one.
    pub(crate) fn step_order(&self) -> Option<usize> {
        match self {
            Base::Boundary { p, .. } => Some(*p),
            _ => None,
        }
    }

    /// `ln |psi^(m)(z)|` for `z >= 0` (`z = inf` allowed). For the boundary
    /// family the order-`p` derivative is the left derivative, and orders above
    /// `p` are the almost-everywhere derivative (zero).
    pub(crate) fn ln_abs_deriv(&self, m: usize, z: f64) -> f64 {
        if z == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        match self {
            Base::Independence => m as f64 * LN_2.ln() - LN_2 * z,
            Base::Gumbel { alpha, coeffs } => {
                if m == 0 {
                    return -LN_2 * z.powf(*alpha);
                }
                if *alpha == 1.0 {
                    return m as f64 * LN_2.ln() - LN_2 * z;
                }
                if z == 0.0 {
                    return f64::INFINITY;
                }
                let ln_z = z.ln();
                let w = (LN_2.ln() + alpha * ln_z).exp();
                -w - m as f64 * ln_z + ln_poly(&coeffs[m], w)
            }
            Base::Clayton { inv_theta, scale, ln_rising } => {
                m as f64 * scale.ln() + ln_rising[m] - (inv_theta + m as f64) * (scale * z).ln_1p()
            }
            Base::Frank { theta, scale, ln_kappa, eulerian } => {
                let lq = ln_kappa - scale * z;
                if m == 0 {
                    if lq < -30.0 {
                        return lq + 0.5 * lq.exp() - theta.ln();
                    }
                    return (-ln1mexp(lq)).ln() - theta.ln();
                }
                let q = lq.exp();
                let poly = eulerian[m - 1].iter().rev().fold(0.0, |acc, &c| acc * q + c);
                m as f64 * scale.ln() - theta.ln() + lq + poly.ln() - m as f64 * ln1mexp(lq)
            }
            Base::Boundary { p, sigma, phi_zero } => {
                let p = *p;
                if m > p {
                    return f64::NEG_INFINITY;
                }
                let ln_falling: f64 = (p - m + 1..=p).map(|k| (k as f64).ln()).sum();
                let head = m as f64 * sigma.ln() + ln_falling;
                if m == p {
                    return if z <= *phi_zero { head } else { f64::NEG_INFINITY };
                }
                let rest = 1.0 - sigma * z;
                if rest <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                head + (p - m) as f64 * rest.ln()
            }
        }
    }

    pub(crate) fn psi(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 1.0;
        }
        self.ln_abs_deriv(0, z).exp().min(1.0)
    }

    /// Pseudoinverse, closed form for every family.
    pub(crate) fn phi(&self, t: f64) -> f64 {
        if t >= 1.0 {
            return 0.0;
        }
        if t <= 0.0 {
            return self.phi_zero();
        }
        match self {
            Base::Independence => -t.log2(),
            Base::Gumbel { alpha, .. } => (-t.ln() / LN_2).powf(1.0 / alpha),
            Base::Clayton { inv_theta, scale, .. } => (-t.ln() / inv_theta).exp_m1() / scale,
            Base::Frank { theta, scale, ln_kappa, .. } => {
                (ln_kappa - ln1mexp(-theta * t)) / scale
            }
            Base::Boundary { p, sigma, .. } => -(t.ln() / *p as f64).exp_m1() / sigma,
        }
    }

    /// Closed-form solution `w` of `ln |psi^(m)(w)| = target`, where one exists.
    pub(crate) fn solve_closed_form(&self, m: usize, target: f64) -> Option<f64> {
        match self {
            Base::Independence => Some((m as f64 * LN_2.ln() - target) / LN_2),
            Base::Clayton { inv_theta, scale, ln_rising } => {
                let head = m as f64 * scale.ln() + ln_rising[m];
                Some(((head - target) / (inv_theta + m as f64)).exp_m1() / scale)
            }
            Base::Boundary { p, sigma, .. } if m < *p => {
                let ln_falling: f64 = (p - m + 1..=*p).map(|k| (k as f64).ln()).sum();
                let head = m as f64 * sigma.ln() + ln_falling;
                Some(-((target - head) / (p - m) as f64).exp_m1() / sigma)
            }
            Base::Gumbel { .. } | Base::Frank { .. } if m == 0 => Some(self.phi(target.exp())),
            _ => None,
        }
    }
}
