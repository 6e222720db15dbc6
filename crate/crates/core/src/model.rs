//! Correlated rough-volatility stock model
//!
//! ```text
//! S_t     = x1 + int mu S_u du + int g(sigma_u) S_u dW_u
//! sigma_t = x2/nu +- int b(u, sigma_u) du + sqrt(1-rho^2) B^H_t + rho W_t
//! ```
//!
//! with `g` mapped through a truncated exponential (or a constant for the
//! Black-Scholes degenerate case), `b` a drift from [`crate::sde`], and the
//! sign of the drift integral selectable. The stock is simulated in log
//! space, which keeps `S > 0` structurally and makes `S` exactly linear in
//! `x1`; the volatility uses left-point Euler with the noise added exactly.
//!
//! Alongside `(S, sigma)` the simulation carries the pathwise first
//! variations entering the sensitivity weights: `dS/dx1 = S/x1` (exact),
//! `dsigma/dx2` as the tangent of the Euler recursion (product of
//! `1 + sign b' delta` factors starting at `1/nu`), and `dS/dx2` as the
//! exact tangent of the log-Euler recursion.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::math;
use crate::noise::{MixSpec, NoiseBundle};
use crate::sde::DriftSpec;

/// Volatility map `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolMap {
    /// `g = sigma0` constant (Black-Scholes degenerate case).
    ConstantVol(f64),
    /// `g(x) = exp(f(x))` with `f` smooth, compactly supported on
    /// `[-(cutoff+taper), cutoff+taper]`, and `f(x) = x` on `[-cutoff, cutoff]`.
    TruncatedExp { cutoff: f64, taper: f64 },
    /// `g(x) = exp(x)`; test-only: the stock is not square integrable in
    /// general, so estimators reject this map.
    PlainExp,
}

/// Quintic smoothstep: 0 -> 1 on [0, 1] with vanishing first and second
/// derivatives at both ends.
#[inline]
fn smoothstep5(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (u * (u * 6.0 - 15.0) + 10.0)
    }
}

#[inline]
fn smoothstep5_derivative(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        30.0 * u * u * (u - 1.0) * (u - 1.0)
    }
}

impl VolMap {
    pub fn constant(sigma0: f64) -> Result<Self> {
        if !(sigma0 > 0.0) {
            return Err(Error::InvalidParameter("constant volatility must be > 0"));
        }
        Ok(VolMap::ConstantVol(sigma0))
    }

    pub fn truncated_exp(cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidParameter("truncation level must be > 0"));
        }
        Ok(VolMap::TruncatedExp {
            cutoff,
            taper: cutoff,
        })
    }

    /// `(g(x), g'(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match *self {
            VolMap::ConstantVol(s) => (s, 0.0),
            VolMap::PlainExp => {
                let g = math::exp(x);
                (g, g)
            }
            VolMap::TruncatedExp { cutoff, taper } => {
                let ax = math::abs(x);
                if ax <= cutoff {
                    let g = math::exp(x);
                    (g, g)
                } else if ax >= cutoff + taper {
                    (1.0, 0.0)
                } else {
                    // f(x) = x (1 - q(u)), u = (|x|-cutoff)/taper, q = smoothstep5
                    let u = (ax - cutoff) / taper;
                    let q = smoothstep5(u);
                    let dq = smoothstep5_derivative(u) / taper;
                    let f = x * (1.0 - q);
                    let sign = if x < 0.0 { -1.0 } else { 1.0 };
                    let df = (1.0 - q) - x * dq * sign;
                    let g = math::exp(f);
                    (g, g * df)
                }
            }
        }
    }

    /// Positive lower bound `alpha` with `g > alpha` (0 for the plain
    /// exponential, which has no uniform bound).
    pub fn lower_bound(&self) -> f64 {
        match *self {
            VolMap::ConstantVol(s) => s,
            VolMap::PlainExp => 0.0,
            VolMap::TruncatedExp { cutoff, taper } => math::exp(-(cutoff + taper)),
        }
    }

    /// Whether the stock driven by this map stays square integrable (the
    /// plain exponential does not, in general).
    pub fn estimator_safe(&self) -> bool {
        !matches!(self, VolMap::PlainExp)
    }
}

/// `(g(x), g'(x))` for a volatility map.
pub fn g_eval(map: &VolMap, x: f64) -> (f64, f64) {
    map.eval(x)
}

/// Sign of the drift integral in the volatility equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolDriftSign {
    /// `sigma = x2/nu + int b du + noise`.
    PlusIntegral,
    /// `sigma = x2/nu - int b du + noise` (the regime-switching convention).
    MinusIntegral,
}

impl VolDriftSign {
    #[inline]
    fn factor(&self) -> f64 {
        match self {
            VolDriftSign::PlusIntegral => 1.0,
            VolDriftSign::MinusIntegral => -1.0,
        }
    }
}

/// Parameters of the stock model.
#[derive(Debug, Clone)]
pub struct StockModelParams {
    /// Stock drift rate.
    pub mu: f64,
    /// Vol-of-vol scale; the initial volatility is `x2 / nu`.
    pub nu: f64,
    /// Correlation between the volatility noise and the stock driver.
    pub rho: f64,
    pub vol_map: VolMap,
    pub vol_drift: DriftSpec,
    pub vol_drift_sign: VolDriftSign,
}

impl StockModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::InvalidParameter("nu must be > 0"));
        }
        if !(self.rho.is_finite() && self.rho.abs() < 1.0) {
            return Err(Error::InvalidParameter("rho must lie in (-1, 1)"));
        }
        Ok(())
    }

    /// Black-Scholes degenerate model: constant vol, zero vol drift, rho = 0.
    pub fn black_scholes(mu: f64, sigma0: f64) -> Result<Self> {
        Ok(Self {
            mu,
            nu: 1.0,
            rho: 0.0,
            vol_map: VolMap::constant(sigma0)?,
            vol_drift: DriftSpec::zero(),
            vol_drift_sign: VolDriftSign::MinusIntegral,
        })
    }

    /// Mean-reverting rough log-volatility (the Vasicek-type special case):
    /// `sigma = x2/nu - int a nu (sigma - b) du + B^H`, `g = exp` truncated
    /// at `cutoff`.
    pub fn rough_vasicek(mu: f64, nu: f64, a: f64, b_level: f64, cutoff: f64) -> Result<Self> {
        if !(a > 0.0 && nu > 0.0) {
            return Err(Error::InvalidParameter("mean reversion and nu must be > 0"));
        }
        Ok(Self {
            mu,
            nu,
            rho: 0.0,
            vol_map: VolMap::truncated_exp(cutoff)?,
            // equal slopes and levels make the regime split degenerate; the
            // mollified form is then exact everywhere and carries a derivative
            vol_drift: DriftSpec::regime_switching(a * nu, a * nu, b_level, b_level, 0.0)?
                .mollified(16)?,
            vol_drift_sign: VolDriftSign::MinusIntegral,
        })
    }

    /// Regime-switching rough volatility with correlation. The drift's
    /// indicator is mollified at `1/mollify_level` so the pathwise first
    /// variation has an evaluable derivative.
    #[allow(clippy::too_many_arguments)]
    pub fn regime_switching(
        mu: f64,
        nu: f64,
        rho: f64,
        a1: f64,
        a2: f64,
        b1: f64,
        b2: f64,
        threshold: f64,
        cutoff: f64,
        mollify_level: u32,
    ) -> Result<Self> {
        Ok(Self {
            mu,
            nu,
            rho,
            vol_map: VolMap::truncated_exp(cutoff)?,
            vol_drift: DriftSpec::regime_switching(a1, a2, b1, b2, threshold)?
                .mollified(mollify_level)?,
            vol_drift_sign: VolDriftSign::MinusIntegral,
        })
    }
}

/// Per-path trajectories of `(S, sigma)` and the first variations.
#[derive(Debug, Clone)]
pub struct ModelPathSet {
    pub grid: TimeGrid,
    pub stock: Vec<f64>,
    pub sigma: Vec<f64>,
    pub ds_dx1: Vec<f64>,
    pub ds_dx2: Vec<f64>,
    pub dsigma_dx2: Vec<f64>,
}

/// Joint Euler simulation of `(S, sigma)` and the three first variations on
/// one noise bundle. The bundle must carry a `Correlated` mix matching the
/// model's `rho`; the volatility reads the mixed path, the stock reads `W`.
pub fn simulate_model(
    params: &StockModelParams,
    noise: &NoiseBundle,
    x1: f64,
    x2: f64,
) -> Result<ModelPathSet> {
    params.validate()?;
    if !(x1 > 0.0) {
        return Err(Error::InvalidParameter("initial stock price must be > 0"));
    }
    match noise.mix {
        MixSpec::Correlated { rho } if rho == params.rho => {}
        _ => {
            return Err(Error::GridMismatch(
                "noise bundle must carry Correlated(rho) matching the model",
            ))
        }
    }
    if !params.vol_drift.has_derivative() {
        return Err(Error::Capability(
            "volatility drift needs an evaluable derivative for the first variation; mollify it",
        ));
    }
    let grid = noise.grid;
    let n = grid.steps();
    let dt = grid.delta();
    let sign = params.vol_drift_sign.factor();
    let mixed = noise.mixed.as_deref().expect("correlated mix present");

    let mut sigma = vec![0.0; n + 1];
    let mut stock = vec![0.0; n + 1];
    let mut ds_dx1 = vec![0.0; n + 1];
    let mut ds_dx2 = vec![0.0; n + 1];
    let mut dsigma_dx2 = vec![0.0; n + 1];

    let sigma0 = x2 / params.nu;
    sigma[0] = sigma0;
    stock[0] = x1;
    ds_dx1[0] = 1.0;
    ds_dx2[0] = 0.0;
    dsigma_dx2[0] = 1.0 / params.nu;

    let mut drift_acc = 0.0;
    let mut log_s = math::ln(x1);
    for i in 0..n {
        let t = grid.node(i);
        let (g, dg) = params.vol_map.eval(sigma[i]);
        let dw = noise.w[i + 1] - noise.w[i];

        // volatility: left-point Euler, noise added exactly
        drift_acc += sign * params.vol_drift.eval(t, sigma[i]) * dt;
        sigma[i + 1] = sigma0 + mixed[i + 1] + drift_acc;

        // stock: log-Euler
        let incr = (params.mu - 0.5 * g * g) * dt + g * dw;
        log_s += incr;
        stock[i + 1] = math::exp(log_s);

        // tangents of the discrete recursions
        let db = params
            .vol_drift
            .derivative(t, sigma[i])
            .expect("checked derivative");
        dsigma_dx2[i + 1] = dsigma_dx2[i] * (1.0 + sign * db * dt);
        let ratio = stock[i + 1] / stock[i];
        ds_dx2[i + 1] = (ds_dx2[i] + stock[i] * dg * (dw - g * dt) * dsigma_dx2[i]) * ratio;
        ds_dx1[i + 1] = stock[i + 1] / x1;
    }

    Ok(ModelPathSet {
        grid,
        stock,
        sigma,
        ds_dx1,
        ds_dx2,
        dsigma_dx2,
    })
}

/// Closed-form mean-reverting volatility
/// `sigma_t = x2/nu + b (1 - e^{-a nu t}) + int_0^t e^{-a nu (t-s)} dB^H_s`,
/// the stochastic integral taken as a Young sum over the grid. Oracle for
/// the Euler scheme on the linear-drift preset.
pub fn fou_closed_form(
    a: f64,
    nu: f64,
    b_level: f64,
    x2: f64,
    bh: &[f64],
    grid: TimeGrid,
) -> Vec<f64> {
    let n = grid.steps();
    debug_assert_eq!(bh.len(), n + 1);
    let dt = grid.delta();
    let decay = math::exp(-a * nu * dt);
    let mut out = vec![0.0; n + 1];
    out[0] = x2 / nu;
    let mut young = 0.0;
    for i in 1..=n {
        young = decay * (young + bh[i] - bh[i - 1]);
        out[i] = x2 / nu + b_level * (1.0 - math::exp(-a * nu * grid.node(i))) + young;
    }
    out
}
