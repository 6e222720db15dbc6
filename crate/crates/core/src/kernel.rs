//! The Volterra kernel of fractional Brownian motion with `H < 1/2` and the
//! fractional-calculus operators built on it.
//!
//! Central objects:
//!
//! * `K_H(t,s) = c_H [ (t/s)^{H-1/2} (t-s)^{H-1/2}
//!                     + (1/2-H) s^{1/2-H} \int_s^t u^{H-3/2} (u-s)^{H-1/2} du ]`
//!   with `c_H = (2H / ((1-2H) B(1-2H, H+1/2)))^{1/2}`,
//! * its time derivative `dK/dt = c_H (H-1/2) (t/s)^{H-1/2} (t-s)^{H-3/2}`,
//! * the covariance `R_H(t,s) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2`, which
//!   factorises as `\int_0^{t ^ s} K_H(t,u) K_H(s,u) du`,
//! * discretised left/right Riemann-Liouville integrals and derivatives on a
//!   uniform grid (product integration, exact against the singular weight),
//! * the inverse-isometry `K_H^{-1}` in its absolutely-continuous form
//!   `(K_H^{-1} phi)(s) = s^{H-1/2} I_{0+}^{1/2-H} [ r^{1/2-H} phi'(r) ](s)`.
//!
//! Power singularities at interval endpoints are removed by the substitution
//! `u = s + v^{1/(H+1/2)}` (and its mirror image), which turns
//! `(u-s)^{H-1/2} du` into a bounded integrand; the remaining inner integral
//! is reduced to the one-dimensional ratio integral
//! `Ghat(r) = \int_1^r v^{H-3/2} (v-1)^{H-1/2} dv`, evaluated by substituted
//! Gauss quadrature near `r = 1` and by a binomial tail series elsewhere.

use alloc::vec;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
#[cfg(test)]
use crate::grid::TimeGrid;
use crate::math;

/// Which theorem regime a Hurst parameter falls into (d = 1).
///
/// `H < 1/(2(d+2)) = 1/6` guarantees a unique strong solution with Sobolev
/// regularity; `H < 1/(2(d+3)) = 1/8` additionally gives a continuous
/// modification of the delta representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HurstRegime {
    /// `H < 1/8`.
    ContinuousDelta1D,
    /// `1/8 <= H < 1/6`.
    StrongSolution1D,
    /// `1/6 <= H < 1/2`.
    General,
}

/// Validated Hurst exponent, `0 < H < 1/2` strictly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstParam {
    value: f64,
}

impl HurstParam {
    pub fn new(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0 && value < 0.5) {
            return Err(Error::InvalidHurst(value));
        }
        Ok(Self { value })
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Tightest regime bracket containing this parameter.
    pub fn regime(&self) -> HurstRegime {
        if self.value < 1.0 / 8.0 {
            HurstRegime::ContinuousDelta1D
        } else if self.value < 1.0 / 6.0 {
            HurstRegime::StrongSolution1D
        } else {
            HurstRegime::General
        }
    }
}

/// `c_H = (2H / ((1-2H) B(1-2H, H+1/2)))^{1/2}`.
pub fn c_h(h: HurstParam) -> f64 {
    let hv = h.value();
    math::sqrt(2.0 * hv / ((1.0 - 2.0 * hv) * math::beta(1.0 - 2.0 * hv, hv + 0.5)))
}

/// `C_H = 1 / (c_H Gamma(1/2+H) Gamma(1/2-H))`.
pub fn big_c_h(h: HurstParam) -> f64 {
    let hv = h.value();
    1.0 / (c_h(h) * math::gamma(0.5 + hv) * math::gamma(0.5 - hv))
}

/// fBm covariance `R_H(t,s) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2`, `t, s >= 0`.
pub fn covariance_r(h: HurstParam, t: f64, s: f64) -> f64 {
    let e = 2.0 * h.value();
    0.5 * (math::powf(s, e) + math::powf(t, e) - math::powf(math::abs(t - s), e))
}

const TAIL_TERMS: usize = 80;

/// Kernel evaluator with the per-`H` constants precomputed.
///
/// `K_H(t,s)` splits as `A(t,s) (t-s)^{H-1/2} + V(t,s) s^{H-1/2}` with `A`
/// and `V` bounded; quadratures against the kernel work with the split form
/// so that the singular powers can be paired with substitution Jacobians
/// without cancellation or overflow.
pub struct KernelEvaluator {
    h: f64,
    c_h: f64,
    g_inf: f64,
    /// Tail-series coefficients `binom(H-1/2, k) (-1)^k / (k+1-2H)`.
    tail: [f64; TAIL_TERMS],
}

impl KernelEvaluator {
    pub fn new(h: HurstParam) -> Self {
        let hv = h.value();
        let mut tail = [0.0; TAIL_TERMS];
        let alpha = hv - 0.5;
        let mut binom = 1.0;
        let mut sign = 1.0;
        for (k, c) in tail.iter_mut().enumerate() {
            *c = binom * sign / (k as f64 + 1.0 - 2.0 * hv);
            binom *= (alpha - k as f64) / (k as f64 + 1.0);
            sign = -sign;
        }
        Self {
            h: hv,
            c_h: c_h(h),
            g_inf: math::beta(1.0 - 2.0 * hv, hv + 0.5),
            tail,
        }
    }

    #[inline]
    pub fn hurst(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn c_h(&self) -> f64 {
        self.c_h
    }

    /// `Ghat(1 + rm1) = \int_1^{1+rm1} v^{H-3/2} (v-1)^{H-1/2} dv`, `rm1 >= 0`.
    ///
    /// Near 1 the endpoint singularity is flattened by `v = 1 + w^{1/(H+1/2)}`;
    /// for `rm1 >= 1/2` the complement is summed as a binomial series in `1/r`,
    /// converging geometrically.
    pub fn g_hat(&self, rm1: f64) -> f64 {
        if rm1 <= 0.0 {
            return 0.0;
        }
        let h = self.h;
        if rm1 < 0.5 {
            let p = h + 0.5;
            let wmax = math::powf(rm1, p);
            let inv_p = 1.0 / p;
            let val = math::gauss16(0.0, wmax, |w| {
                let v = 1.0 + math::powf(w, inv_p);
                math::powf(v, h - 1.5)
            });
            return val * inv_p;
        }
        let r = 1.0 + rm1;
        let ri = 1.0 / r;
        let mut s = 0.0;
        for c in self.tail.iter().rev() {
            s = s * ri + c;
        }
        self.g_inf - math::powf(r, 2.0 * h - 1.0) * s
    }

    /// Split `K_H(t,s) = A (t-s)^{H-1/2} + V s^{H-1/2}` with `tms = t - s`
    /// supplied explicitly so callers can keep it exact under substitutions.
    #[inline]
    pub(crate) fn parts(&self, t: f64, s: f64, tms: f64) -> (f64, f64) {
        let a = self.c_h * math::powf(t / s, self.h - 0.5);
        let v = self.c_h * (0.5 - self.h) * self.g_hat(tms / s);
        (a, v)
    }

    /// `K_H(t, s)` for `0 < s < t`.
    pub fn k(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0 && t > s) {
            return Err(Error::KernelDomain { t, s });
        }
        let tms = t - s;
        let (a, v) = self.parts(t, s, tms);
        Ok(a * math::powf(tms, self.h - 0.5) + v * math::powf(s, self.h - 0.5))
    }

    /// `dK_H/dt (t,s) = c_H (H-1/2) (t/s)^{H-1/2} (t-s)^{H-3/2}`, `0 < s < t`.
    pub fn dk_dt(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0 && t > s) {
            return Err(Error::KernelDomain { t, s });
        }
        Ok(self.c_h
            * (self.h - 0.5)
            * math::powf(t / s, self.h - 0.5)
            * math::powf(t - s, self.h - 1.5))
    }
}

/// One-off evaluation of `K_H(t,s)`; build a [`KernelEvaluator`] for loops.
pub fn kernel_k(h: HurstParam, t: f64, s: f64) -> Result<f64> {
    KernelEvaluator::new(h).k(t, s)
}

/// One-off evaluation of the kernel's time derivative.
pub fn kernel_dk_dt(h: HurstParam, t: f64, s: f64) -> Result<f64> {
    KernelEvaluator::new(h).dk_dt(t, s)
}

/// `\int_0^{min(t,s)} K_H(t,u) K_H(s,u) du` by substituted composite
/// quadrature with roughly `points` kernel evaluations per factor.
///
/// Both endpoint singularities (`u^{2H-1}`-type mass at 0, and
/// `(m-u)^{H-1/2}` or `(m-u)^{2H-1}` at `u = m`) are flattened by power
/// substitutions before panelled Gauss rules are applied.
pub fn kernel_product_integral(ev: &KernelEvaluator, t: f64, s: f64, points: usize) -> f64 {
    let m = t.min(s);
    let h = ev.hurst();
    let half = 0.5 * m;
    let panels = (points / 64).max(2);

    // Left half [0, m/2]: product behaves like u^{2H-1}; sub u = z^{1/(2H)}.
    let q_left = 2.0 * h;
    let zmax = math::powf(half, q_left);
    let inv_q = 1.0 / q_left;
    let mut acc = 0.0;
    for p in 0..panels {
        let za = zmax * p as f64 / panels as f64;
        let zb = zmax * (p + 1) as f64 / panels as f64;
        acc += math::gauss16(za, zb, |z| {
            let u = math::powf(z, inv_q);
            let ku1 = ev.k(t, u).unwrap_or(0.0);
            let ku2 = ev.k(s, u).unwrap_or(0.0);
            ku1 * ku2 * math::powf(u, 1.0 - q_left)
        }) * inv_q;
    }

    // Right half [m/2, m]: exponent depends on whether t == s.
    let q_right = if t == s { 2.0 * h } else { h + 0.5 };
    let wmax = math::powf(half, q_right);
    let inv_qr = 1.0 / q_right;
    for p in 0..panels {
        let wa = wmax * p as f64 / panels as f64;
        let wb = wmax * (p + 1) as f64 / panels as f64;
        acc += math::gauss16(wa, wb, |w| {
            let mmu = math::powf(w, inv_qr); // m - u, exact in the substituted variable
            let u = m - mmu;
            if u <= 0.0 {
                return 0.0;
            }
            let jac = math::powf(mmu, 1.0 - q_right);
            if t == s {
                // K(t,u)^2 (t-u)^{1-2H} without forming the singular square.
                let (a, v) = ev.parts(t, u, mmu);
                let vs = v * math::powf(u, h - 0.5);
                a * a + 2.0 * a * vs * math::powf(mmu, 0.5 - h) + vs * vs * jac
            } else {
                let k_far = ev.k(t.max(s), u).unwrap_or(0.0);
                let (a, v) = ev.parts(m, u, mmu);
                let vs = v * math::powf(u, h - 0.5);
                // K(m,u) (m-u)^{1/2-H} stays bounded as u -> m.
                k_far * (a + vs * math::powf(mmu, 0.5 - h))
            }
        }) * inv_qr;
    }
    acc
}

/// Side of a Riemann-Liouville operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter("fractional order must lie in (0, 1)"));
    }
    Ok(())
}

/// Riemann-Liouville fractional integral
/// `(I^a_{0+} f)(x) = 1/Gamma(a) \int_0^x (x-y)^{a-1} f(y) dy`
/// (or its right-sided mirror), discretised by product integration: the
/// singular weight is integrated exactly against piecewise-linear data.
pub fn rl_integral(alpha: f64, side: Side, f: &GridFunction) -> Result<GridFunction> {
    check_alpha(alpha)?;
    match side {
        Side::Left => Ok(rl_integral_left(alpha, f)),
        Side::Right => Ok(reverse_grid_fn(&rl_integral_left(
            alpha,
            &reverse_grid_fn(f),
        ))),
    }
}

fn reverse_grid_fn(f: &GridFunction) -> GridFunction {
    let mut values = f.values().to_vec();
    values.reverse();
    GridFunction::new(f.grid(), values).expect("same grid")
}

fn rl_integral_left(alpha: f64, f: &GridFunction) -> GridFunction {
    let grid = f.grid();
    let n = grid.steps();
    let dt = grid.delta();
    let v = f.values();
    let dt_a = math::powf(dt, alpha);
    // Cell moments against (x_i - y)^{alpha-1} for k = i - j:
    //   m0[k] = dt^a (k^a - (k-1)^a) / a
    //   m1[k] = dt^a [ k (k^a - (k-1)^a)/a - (k^{1+a} - (k-1)^{1+a})/(1+a) ]
    let mut pow_a = vec![0.0; n + 1];
    let mut pow_a1 = vec![0.0; n + 1];
    for (k, (pa, pa1)) in pow_a.iter_mut().zip(pow_a1.iter_mut()).enumerate() {
        *pa = math::powf(k as f64, alpha);
        *pa1 = math::powf(k as f64, alpha + 1.0);
    }
    let mut m0 = vec![0.0; n + 1];
    let mut m1 = vec![0.0; n + 1];
    for k in 1..=n {
        let d0 = (pow_a[k] - pow_a[k - 1]) / alpha;
        m0[k] = dt_a * d0;
        m1[k] = dt_a * (k as f64 * d0 - (pow_a1[k] - pow_a1[k - 1]) / (alpha + 1.0));
    }
    let inv_gamma = 1.0 / math::gamma(alpha);
    let mut out = vec![0.0; n + 1];
    for (i, o) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for j in 0..i {
            let k = i - j;
            acc += v[j] * m0[k] + (v[j + 1] - v[j]) * m1[k];
        }
        *o = inv_gamma * acc;
    }
    GridFunction::new(grid, out).expect("same grid")
}

/// Riemann-Liouville fractional derivative in the Marchaud form
/// `(D^a_{0+} f)(x) = 1/Gamma(1-a) [ f(x)/x^a
///                    + a \int_0^x (f(x)-f(y)) (x-y)^{-a-1} dy ]`,
/// which avoids differentiating a discrete integral. On the final cell the
/// difference `f(x)-f(y)` is paired with the weight exactly (piecewise-linear
/// data), keeping the integrand bounded. The node at 0 is assigned by
/// continuity from the right.
pub fn rl_derivative(alpha: f64, side: Side, f: &GridFunction) -> Result<GridFunction> {
    check_alpha(alpha)?;
    match side {
        Side::Left => Ok(rl_derivative_left(alpha, f)),
        Side::Right => Ok(reverse_grid_fn(&rl_derivative_left(
            alpha,
            &reverse_grid_fn(f),
        ))),
    }
}

fn rl_derivative_left(alpha: f64, f: &GridFunction) -> GridFunction {
    let grid = f.grid();
    let n = grid.steps();
    let dt = grid.delta();
    let v = f.values();
    let dt_ma = math::powf(dt, -alpha);
    // Moments of (x_i - y)^{-alpha-1} over the cell at distance k = i - j >= 2:
    //   a0[k] = dt^-a ((k-1)^-a - k^-a) / a
    //   a1[k] = k a0[k] - dt^-a (k^{1-a} - (k-1)^{1-a}) / (1-a)   (scaled by cell)
    let mut pow_ma = vec![0.0; n + 1];
    let mut pow_1ma = vec![0.0; n + 1];
    for k in 1..=n {
        pow_ma[k] = math::powf(k as f64, -alpha);
        pow_1ma[k] = math::powf(k as f64, 1.0 - alpha);
    }
    let mut a0 = vec![0.0; n + 1];
    let mut a1 = vec![0.0; n + 1];
    for k in 2..=n {
        let d0 = (pow_ma[k - 1] - pow_ma[k]) / alpha;
        a0[k] = dt_ma * d0;
        a1[k] = k as f64 * a0[k] - dt_ma * (pow_1ma[k] - pow_1ma[k - 1]) / (1.0 - alpha);
    }
    let inv_gamma = 1.0 / math::gamma(1.0 - alpha);
    let dt_1ma = math::powf(dt, 1.0 - alpha);
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        let fi = v[i];
        let mut integral = 0.0;
        for j in 0..i.saturating_sub(1) {
            let k = i - j;
            integral += (fi - v[j]) * a0[k] - (v[j + 1] - v[j]) * a1[k];
        }
        // Final cell: f(x_i) - f(y) = slope (x_i - y) exactly for linear data.
        let slope = (v[i] - v[i - 1]) / dt;
        integral += slope * dt_1ma / (1.0 - alpha);
        out[i] = inv_gamma * (fi * math::powf(grid.node(i), -alpha) + alpha * integral);
    }
    out[0] = out[1];
    GridFunction::new(grid, out).expect("same grid")
}

/// Inverse isometry on absolutely continuous inputs:
/// `(K_H^{-1} phi)(s) = s^{H-1/2} I_{0+}^{1/2-H} [ r^{1/2-H} phi'(r) ](s)`,
/// given the derivative samples `phi'` of a function with `phi(0) = 0`.
///
/// The node at `s = 0` is fixed by the limiting power behaviour
/// `s^{H-1/2} I(s) ~ s^{1/2-H} -> 0` for bounded `phi'`.
pub fn k_h_inverse_ac(h: HurstParam, phi_prime: &GridFunction) -> Result<GridFunction> {
    let hv = h.value();
    let grid = phi_prime.grid();
    let weighted = GridFunction::new(
        grid,
        phi_prime
            .values()
            .iter()
            .enumerate()
            .map(|(i, &p)| math::powf(grid.node(i), 0.5 - hv) * p)
            .collect(),
    )?;
    let integ = rl_integral(0.5 - hv, Side::Left, &weighted)?;
    let mut out = integ.into_values();
    for (i, o) in out.iter_mut().enumerate() {
        if i == 0 {
            *o = 0.0;
        } else {
            *o *= math::powf(grid.node(i), hv - 0.5);
        }
    }
    GridFunction::new(grid, out)
}

/// General form of the inverse isometry,
/// `(K_H^{-1} phi)(s) = s^{1/2-H} D_{0+}^{1/2-H} [ r^{H-1/2} (D_{0+}^{2H} phi)(r) ](s)`,
/// valid for `H < 1/2` since both fractional orders then lie in (0, 1).
/// Numerically noisier than [`k_h_inverse_ac`]; used as a cross-check on
/// smooth inputs.
pub fn k_h_inverse_general(h: HurstParam, phi: &GridFunction) -> Result<GridFunction> {
    let hv = h.value();
    let grid = phi.grid();
    let d2h = rl_derivative(2.0 * hv, Side::Left, phi)?;
    let weighted = GridFunction::new(
        grid,
        d2h.values()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if i == 0 {
                    0.0
                } else {
                    math::powf(grid.node(i), hv - 0.5) * p
                }
            })
            .collect(),
    )?;
    let outer = rl_derivative(0.5 - hv, Side::Left, &weighted)?;
    let mut out = outer.into_values();
    for (i, o) in out.iter_mut().enumerate() {
        if i == 0 {
            *o = 0.0;
        } else {
            *o *= math::powf(grid.node(i), 0.5 - hv);
        }
    }
    GridFunction::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{gauss16, powf};
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn hp(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn hurst_validation_and_regimes() {
        assert!(HurstParam::new(0.0).is_err());
        assert!(HurstParam::new(0.5).is_err());
        assert!(HurstParam::new(-0.1).is_err());
        assert!(HurstParam::new(f64::NAN).is_err());
        assert_eq!(hp(0.1).regime(), HurstRegime::ContinuousDelta1D);
        assert_eq!(hp(0.125).regime(), HurstRegime::StrongSolution1D);
        assert_eq!(hp(0.15).regime(), HurstRegime::StrongSolution1D);
        assert_eq!(hp(1.0 / 6.0).regime(), HurstRegime::General);
        assert_eq!(hp(0.3).regime(), HurstRegime::General);
    }

    #[test]
    fn c_h_frozen_values() {
        // Independent log-Gamma oracle (mpmath, 30 digits):
        assert!((c_h(hp(0.25)) - 0.645_998_003_740_752).abs() < 1e-14);
        assert!((c_h(hp(0.1)) - 0.357_685_773_422_335_14).abs() < 1e-14);
    }

    #[test]
    fn c_h_bounded_near_one_half() {
        // B(1-2H, .) ~ 1/(1-2H) cancels the (1-2H) factor.
        for i in 0..10 {
            let h = 0.4 + 0.009 * i as f64;
            let c = c_h(hp(h));
            assert!(c.is_finite() && c > 0.0 && c < 2.0, "c_h({h}) = {c}");
        }
    }

    #[test]
    fn big_c_h_identity_and_value() {
        for h in [0.02, 0.05, 0.08, 0.1, 0.12, 0.15] {
            let hp = hp(h);
            let prod = big_c_h(hp) * c_h(hp) * math::gamma(0.5 + h) * math::gamma(0.5 - h);
            assert!((prod - 1.0).abs() < 1e-14, "H={h}: {prod}");
            assert!(big_c_h(hp).is_finite() && big_c_h(hp) > 0.0);
        }
        assert!((big_c_h(hp(0.1)) - 0.846_359_329_753_983_56).abs() < 1e-14);
    }

    #[test]
    fn kernel_frozen_values() {
        // High-precision quadrature oracle (mpmath) of the defining integral.
        assert!((kernel_k(hp(0.1), 1.0, 0.5).unwrap() - 0.575_062_237_786_205_85).abs() < 1e-9);
        assert!((kernel_k(hp(0.1), 1.0, 0.25).unwrap() - 0.609_370_511_427_981_78).abs() < 1e-9);
        assert!((kernel_k(hp(0.05), 1.0, 0.5).unwrap() - 0.424_902_741_507_428_85).abs() < 1e-9);
    }

    #[test]
    fn kernel_vs_brute_force_quadrature() {
        // Independent route: integrate u^{H-3/2}(u-s)^{H-1/2} directly with a
        // dense substituted panel rule (10x the production resolution).
        let h = 0.1;
        let ev = KernelEvaluator::new(hp(h));
        for (t, s) in [(1.0, 0.5), (1.0, 0.9), (2.0, 0.3), (1.0, 0.05)] {
            let p = h + 0.5;
            let wmax = powf(t - s, p);
            let panels = 160;
            let mut inner = 0.0;
            for k in 0..panels {
                let a = wmax * k as f64 / panels as f64;
                let b = wmax * (k + 1) as f64 / panels as f64;
                inner += gauss16(a, b, |w| {
                    let u = s + powf(w, 1.0 / p);
                    powf(u, h - 1.5)
                }) / p;
            }
            let brute = ev.c_h()
                * (powf(t / s, h - 0.5) * powf(t - s, h - 0.5)
                    + (0.5 - h) * powf(s, 0.5 - h) * inner);
            let fast = ev.k(t, s).unwrap();
            assert!(
                ((fast - brute) / brute).abs() < 1e-8,
                "K({t},{s}): {fast} vs {brute}"
            );
        }
    }

    #[test]
    fn kernel_domain_errors() {
        assert!(kernel_k(hp(0.1), 0.5, 0.5).is_err());
        assert!(kernel_k(hp(0.1), 0.5, 0.7).is_err());
        assert!(kernel_k(hp(0.1), 0.5, 0.0).is_err());
        assert!(kernel_dk_dt(hp(0.1), 0.5, 0.5).is_err());
    }

    #[test]
    fn kernel_near_diagonal_factor_is_bounded() {
        let h = hp(0.1);
        let ev = KernelEvaluator::new(h);
        let t = 1.0;
        for k in 1..12 {
            let s = t - powf(10.0, -(k as f64));
            let v = ev.k(t, s).unwrap() * powf(t - s, 0.5 - h.value());
            assert!(v.is_finite() && v > 0.0 && v < 2.0 * ev.c_h(), "s={s}: {v}");
        }
    }

    #[test]
    fn dk_dt_sign_and_finite_difference() {
        let h = hp(0.1);
        let ev = KernelEvaluator::new(h);
        let eps = 1e-5;
        for (t, s) in [(1.0, 0.3), (1.0, 0.7), (2.0, 0.5)] {
            let d = ev.dk_dt(t, s).unwrap();
            assert!(d < 0.0);
            let fd = (ev.k(t + eps, s).unwrap() - ev.k(t - eps, s).unwrap()) / (2.0 * eps);
            assert!(((d - fd) / fd).abs() < 1e-4, "dK({t},{s}): {d} vs fd {fd}");
        }
    }

    proptest! {
        #[test]
        fn dk_dt_scaling_law(
            hv in 0.02f64..0.48,
            t in 0.2f64..2.0,
            frac in 0.05f64..0.95,
        ) {
            // Homogeneity: dK(2t, 2s) = 2^{H-3/2} dK(t, s).
            let h = hp(hv);
            let s = frac * t;
            let ev = KernelEvaluator::new(h);
            let lhs = ev.dk_dt(2.0 * t, 2.0 * s).unwrap();
            let rhs = powf(2.0, hv - 1.5) * ev.dk_dt(t, s).unwrap();
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
        }

        #[test]
        fn covariance_is_symmetric(
            hv in 0.02f64..0.48,
            t in 0.0f64..3.0,
            s in 0.0f64..3.0,
        ) {
            let h = hp(hv);
            prop_assert_eq!(covariance_r(h, t, s), covariance_r(h, s, t));
        }
    }

    #[test]
    fn covariance_values() {
        assert_eq!(covariance_r(hp(0.3), 1.0, 1.0), 1.0);
        // H = 0.25: R(2,1) = (1 + 2^0.5 - 1)/2 = 2^{-1/2}.
        assert!((covariance_r(hp(0.25), 2.0, 1.0) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn kernel_factorization_reproduces_covariance() {
        // max over a coarse (t,s) sample of |int K K - R| / R; the full 64x64
        // sweep at 4096 points is in the acceptance suite.
        for hv in [0.05, 0.1, 0.15] {
            let h = hp(hv);
            let ev = KernelEvaluator::new(h);
            let mut worst = 0.0f64;
            for i in 1..=8 {
                for j in 1..=i {
                    let t = i as f64 / 8.0;
                    let s = j as f64 / 8.0;
                    let got = kernel_product_integral(&ev, t, s, 2048);
                    let want = covariance_r(h, t, s);
                    worst = worst.max(((got - want) / want).abs());
                }
            }
            assert!(worst < 1e-3, "H={hv}: worst rel err {worst}");
        }
    }

    fn power_fn(grid: TimeGrid, beta: f64) -> GridFunction {
        GridFunction::sample(grid, |t| powf(t, beta))
    }

    #[test]
    fn rl_integral_power_rule() {
        // I^a_{0+} y^b = Gamma(b+1)/Gamma(b+1+a) x^{b+a}, tested at b = 1/2 - H.
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        for (alpha, beta) in [(0.4, 0.4), (0.25, 0.45), (0.7, 0.3)] {
            let f = power_fn(grid, beta);
            let out = rl_integral(alpha, Side::Left, &f).unwrap();
            let coef = math::exp(math::ln_gamma(beta + 1.0) - math::ln_gamma(beta + 1.0 + alpha));
            let mut worst = 0.0f64;
            for i in 0..=1024 {
                let x = grid.node(i);
                if x < 0.1 {
                    continue;
                }
                let want = coef * powf(x, beta + alpha);
                worst = worst.max(((out.values()[i] - want) / want).abs());
            }
            assert!(worst < 1e-3, "alpha={alpha} beta={beta}: {worst}");
        }
    }

    #[test]
    fn rl_integral_of_zero_is_zero() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let z = GridFunction::zeros(grid);
        let out = rl_integral(0.3, Side::Left, &z).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
        let out_r = rl_integral(0.3, Side::Right, &z).unwrap();
        assert!(out_r.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rl_integral_rejects_bad_alpha() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let f = GridFunction::zeros(grid);
        assert!(rl_integral(0.0, Side::Left, &f).is_err());
        assert!(rl_integral(1.0, Side::Left, &f).is_err());
        assert!(rl_derivative(-0.2, Side::Left, &f).is_err());
    }

    #[test]
    fn rl_derivative_of_constant() {
        // D^a c = c x^{-a} / Gamma(1-a).
        let grid = TimeGrid::new(1.0, 512).unwrap();
        let f = GridFunction::sample(grid, |_| 2.5);
        let alpha = 0.35;
        let out = rl_derivative(alpha, Side::Left, &f).unwrap();
        for i in (32..=512).step_by(32) {
            let x = grid.node(i);
            let want = 2.5 * powf(x, -alpha) / math::gamma(1.0 - alpha);
            let got = out.values()[i];
            assert!(((got - want) / want).abs() < 1e-3, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn rl_derivative_of_zero_is_zero() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let out = rl_derivative(0.45, Side::Left, &GridFunction::zeros(grid)).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rl_derivative_inverts_integral_on_sin() {
        // D^a (I^a f) = f, sup-norm tolerance 1e-2 at N = 1024.
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        let f = GridFunction::sample(grid, math::sin);
        for alpha in [0.2, 0.4, 0.6] {
            let i = rl_integral(alpha, Side::Left, &f).unwrap();
            let d = rl_derivative(alpha, Side::Left, &i).unwrap();
            let sup = d
                .values()
                .iter()
                .zip(f.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(sup < 1e-2, "alpha={alpha}: sup {sup}");
        }
    }

    #[test]
    fn rl_right_side_mirrors_left() {
        // I^a_{T-} f(x) for f(y) = (T-y)^b mirrors the left power rule.
        let grid = TimeGrid::new(1.0, 512).unwrap();
        let alpha = 0.4;
        let beta = 0.45;
        let f = GridFunction::sample(grid, |t| powf(1.0 - t, beta));
        let out = rl_integral(alpha, Side::Right, &f).unwrap();
        let coef = math::exp(math::ln_gamma(beta + 1.0) - math::ln_gamma(beta + 1.0 + alpha));
        for i in (0..=448).step_by(64) {
            let x = grid.node(i);
            let want = coef * powf(1.0 - x, beta + alpha);
            let got = out.values()[i];
            assert!(((got - want) / want).abs() < 2e-3, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn k_h_inverse_of_identity_path() {
        // phi(t) = t: (K^{-1} phi)(s) = Gamma(3/2-H)/Gamma(2-2H) s^{1/2-H}.
        let grid = TimeGrid::new(1.0, 512).unwrap();
        for hv in [0.05, 0.1] {
            let h = hp(hv);
            let phi_prime = GridFunction::sample(grid, |_| 1.0);
            let out = k_h_inverse_ac(h, &phi_prime).unwrap();
            let coef = math::exp(math::ln_gamma(1.5 - hv) - math::ln_gamma(2.0 - 2.0 * hv));
            assert_eq!(out.values()[0], 0.0);
            for i in (32..=512).step_by(32) {
                let s = grid.node(i);
                let want = coef * powf(s, 0.5 - hv);
                let got = out.values()[i];
                assert!(((got - want) / want).abs() < 2e-3, "H={hv} s={s}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn k_h_inverse_of_zero() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let out = k_h_inverse_ac(hp(0.1), &GridFunction::zeros(grid)).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn k_h_inverse_quadratic_vs_brute_force() {
        // phi(t) = t^2 at H = 0.1: compare the production operator against a
        // 10x-resolution substituted-quadrature evaluation of the defining
        // integral s^{H-1/2}/Gamma(1/2-H) int_0^s (s-r)^{-1/2-H} r^{1/2-H} 2r dr.
        let hv = 0.1;
        let h = hp(hv);
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let phi_prime = GridFunction::sample(grid, |t| 2.0 * t);
        let out = k_h_inverse_ac(h, &phi_prime).unwrap();
        let alpha = 0.5 - hv;
        for i in (32..=256).step_by(32) {
            let s = grid.node(i);
            // sub s - r = w^{1/alpha}
            let p = alpha;
            let wmax = powf(s, p);
            let panels = 80;
            let mut acc = 0.0;
            for k in 0..panels {
                let a = wmax * k as f64 / panels as f64;
                let b = wmax * (k + 1) as f64 / panels as f64;
                acc += gauss16(a, b, |w| {
                    let r = s - powf(w, 1.0 / p);
                    if r <= 0.0 {
                        0.0
                    } else {
                        2.0 * r * powf(r, 0.5 - hv)
                    }
                }) / p;
            }
            let want = powf(s, hv - 0.5) * acc / math::gamma(alpha);
            let got = out.values()[i];
            assert!(((got - want) / want).abs() < 5e-3, "s={s}: {got} vs {want}");
        }
    }

    #[test]
    fn k_h_inverse_general_form_agrees_on_smooth_input() {
        // Cross-check of the D^{2H}-based representation on phi(t) = t^2.
        let hv = 0.1;
        let h = hp(hv);
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        let phi = GridFunction::sample(grid, |t| t * t);
        let phi_prime = GridFunction::sample(grid, |t| 2.0 * t);
        let ac = k_h_inverse_ac(h, &phi_prime).unwrap();
        let gen = k_h_inverse_general(h, &phi).unwrap();
        for i in (128..=1024).step_by(64) {
            let a = ac.values()[i];
            let g = gen.values()[i];
            assert!(((a - g) / a).abs() < 2e-2, "node {i}: ac {a} vs general {g}");
        }
    }

    #[test]
    fn ghat_matches_series_and_quadrature_across_branches() {
        // Branch consistency at the 1.5 crossover (frozen mpmath values).
        let ev = KernelEvaluator::new(hp(0.1));
        assert!((ev.g_hat(0.5) - 0.886_938_543_983_473_85).abs() < 1e-9);
        assert!((ev.g_hat(2.0) - 1.398_450_793_217_978_5).abs() < 1e-12);
        assert!((ev.g_hat(99.0) - 1.922_599_858_767_378_8).abs() < 1e-12);
        let ev05 = KernelEvaluator::new(hp(0.05));
        assert!((ev05.g_hat(0.5) - 1.006_959_715_144_839_6).abs() < 1e-9);
        let ev15 = KernelEvaluator::new(hp(0.15));
        assert!((ev15.g_hat(2.0) - 1.317_588_825_050_533_7).abs() < 1e-12);
    }

    #[test]
    fn rl_power_rule_beta_tied_to_hurst() {
        // The case the inverse isometry feeds: alpha = 1/2 - H, beta = 1/2 - H.
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        for hv in [0.05, 0.1, 0.15] {
            let alpha = 0.5 - hv;
            let beta = 0.5 - hv;
            let f = power_fn(grid, beta);
            let out = rl_integral(alpha, Side::Left, &f).unwrap();
            let coef = math::exp(math::ln_gamma(beta + 1.0) - math::ln_gamma(beta + 1.0 + alpha));
            let mut worst = 0.0f64;
            for i in (103..=1024).step_by(41) {
                let x = grid.node(i);
                let want = coef * powf(x, beta + alpha);
                worst = worst.max(((out.values()[i] - want) / want).abs());
            }
            assert!(worst < 1e-3, "H={hv}: {worst}");
        }
    }

    #[test]
    fn weighted_singular_integral_matches_beta_closed_form() {
        // int_0^s u^{-H-1/2} (s-u)^{1/2-H} du = s^{1-2H} B(1/2-H, 3/2-H),
        // evaluated by the substituted panel quadrature to 1e-6 relative.
        for hv in [0.05, 0.1, 0.15] {
            for s in [0.3, 1.0] {
                // split at s/2; left sub u = z^{1/(1/2-H)}, right is regular in
                // (s-u)^{1/2-H} (positive exponent), plain panels suffice.
                let p = 0.5 - hv;
                let zmax = powf(0.5 * s, p);
                let mut acc = 0.0;
                let panels = 40;
                for k in 0..panels {
                    let a = zmax * k as f64 / panels as f64;
                    let b = zmax * (k + 1) as f64 / panels as f64;
                    acc += gauss16(a, b, |z| {
                        let u = powf(z, 1.0 / p);
                        powf(s - u, 0.5 - hv)
                    }) / p;
                }
                for k in 0..panels {
                    let a = 0.5 * s + 0.5 * s * k as f64 / panels as f64;
                    let b = 0.5 * s + 0.5 * s * (k + 1) as f64 / panels as f64;
                    acc += gauss16(a, b, |u| powf(u, -hv - 0.5) * powf(s - u, 0.5 - hv));
                }
                let want = powf(s, 1.0 - 2.0 * hv) * math::beta(0.5 - hv, 1.5 - hv);
                assert!(
                    ((acc - want) / want).abs() < 1e-6,
                    "H={hv} s={s}: {acc} vs {want}"
                );
            }
        }
    }

    #[test]
    fn composition_integral_then_derivative_on_powers() {
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        let alpha = 0.3;
        let f = power_fn(grid, 0.5);
        let i = rl_integral(alpha, Side::Left, &f).unwrap();
        let d = rl_derivative(alpha, Side::Left, &i).unwrap();
        let mut worst = 0.0f64;
        for k in (103..=1024).step_by(41) {
            let want = f.values()[k];
            worst = worst.max(((d.values()[k] - want) / want).abs());
        }
        assert!(worst < 1e-3, "{worst}");
    }
}
