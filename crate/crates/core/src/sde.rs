//! Euler-type pathwise solvers for singular-drift SDEs, drift mollification,
//! and the first-variation process `J_t = dX_t/dx` by two routes:
//!
//! * the exponential representation
//!   `J_t = exp( \int_0^t b'(u, X_u) du )`, available whenever the drift has
//!   an evaluable spatial derivative (smooth, bump, or mollified drifts);
//! * the local-time route for merely measurable drifts: with mixed noise
//!   `rho1 B^H + rho2 W` (`rho2 != 0`), conditioning on the fBm component
//!   turns `Y = (X - x - rho1 B^H)/rho2` into a Brownian-drift process and
//!   `J_t = exp( -\int_0^t \int_R f(s,y) L^Y(ds, dy) )` with
//!   `f(s,y) = b(s, x + rho1 B^H_s + rho2 y)/rho2`.
//!
//! The local time-space integral is discretised through its forward/backward
//! decomposition for `W^x = x + W`:
//!
//! ```text
//! int_0^t int f dL = int_0^t f(s, W^x_s) dW_s
//!                  + int_{T-t}^T f(T-s, What^x_s) dW*_s
//!                  - int_{T-t}^T f(T-s, What^x_s) What_s/(T-s) ds
//! ```
//!
//! with `What_t = W_{T-t}` and `W*_t = What_t - W_T + int_0^t What_s/(T-s) ds`;
//! the integrable `1/(T-s)` weight is dropped on the final grid cell.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TimeGrid};
use crate::math;
use crate::noise::NoiseBundle;

/// Shared drift closure `(t, y) -> value`.
pub type DynFn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Threshold drift `b(t,y) = a1 (y-b1) 1_{y<R} + a2 (y-b2) 1_{y>=R}`.
///
/// Splitting off the Lipschitz part `bhat(y) = a2 (y-b2)` leaves
/// `btilde(y) = (a1(y-b1) - a2(y-b2)) 1_{y<R}`, which is unbounded on
/// `(-inf, R)` when `a1 != a2`; evaluation clamps it at `tilde_cap` so the
/// bounded-plus-Lipschitz hypothesis holds, and callers can monitor whether
/// any path ever reached the clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSwitching {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub threshold: f64,
    pub tilde_cap: f64,
}

pub const DEFAULT_TILDE_CAP: f64 = 100.0;

impl RegimeSwitching {
    #[inline]
    fn hat(&self, y: f64) -> f64 {
        self.a2 * (y - self.b2)
    }

    /// Raw (unclamped) bounded component.
    #[inline]
    fn tilde_raw(&self, y: f64) -> f64 {
        if y < self.threshold {
            self.a1 * (y - self.b1) - self.a2 * (y - self.b2)
        } else {
            0.0
        }
    }

    #[inline]
    fn tilde(&self, y: f64) -> f64 {
        self.tilde_raw(y).clamp(-self.tilde_cap, self.tilde_cap)
    }

    pub fn sup_tilde_on(&self, lo: f64, hi: f64) -> f64 {
        let mut sup = 0.0f64;
        let steps = 512;
        for i in 0..=steps {
            let y = lo + (hi - lo) * i as f64 / steps as f64;
            sup = sup.max(math::abs(self.tilde(y)));
        }
        sup
    }

    /// Difference of the two regime lines, before the indicator.
    #[inline]
    fn tilde_raw_unclamped(&self, y: f64) -> f64 {
        self.a1 * (y - self.b1) - self.a2 * (y - self.b2)
    }

    /// Clamped regime difference without the indicator (the mollified ramp
    /// replaces the indicator).
    #[inline]
    fn tilde_blend(&self, y: f64) -> f64 {
        self.tilde_raw_unclamped(y)
            .clamp(-self.tilde_cap, self.tilde_cap)
    }

    #[inline]
    fn tilde_blend_with_derivative(&self, y: f64) -> (f64, f64) {
        let raw = self.tilde_raw_unclamped(y);
        if math::abs(raw) > self.tilde_cap {
            (raw.clamp(-self.tilde_cap, self.tilde_cap), 0.0)
        } else {
            (raw, self.a1 - self.a2)
        }
    }
}

/// Bounded measurable plus Lipschitz decomposition with explicit constants.
#[derive(Clone)]
pub struct BoundedPlusLipschitz {
    pub tilde: DynFn2,
    pub tilde_bound: f64,
    pub hat: DynFn2,
    pub hat_lipschitz: f64,
    pub hat_growth: f64,
}

/// Smooth compactly supported bump, a member of `L^1`:
/// `b(y) = height * exp(1 - 1/(1 - z^2))` for `z = (y-center)/width`, |z|<1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrableBump {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

/// `int_{-1}^{1} exp(-1/(1-u^2)) du`, the mass of the standard mollifier.
fn standard_bump_mass() -> f64 {
    let mut acc = 0.0;
    for p in 0..8 {
        let a = -1.0 + 2.0 * p as f64 / 8.0;
        let b = -1.0 + 2.0 * (p + 1) as f64 / 8.0;
        acc += math::gauss16(a, b, |u| {
            let d = 1.0 - u * u;
            if d <= 0.0 {
                0.0
            } else {
                math::exp(-1.0 / d)
            }
        });
    }
    acc
}

impl IntegrableBump {
    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        let z = (y - self.center) / self.width;
        let d = 1.0 - z * z;
        if d <= 0.0 {
            0.0
        } else {
            self.height * math::exp(1.0 - 1.0 / d)
        }
    }

    #[inline]
    pub fn derivative(&self, y: f64) -> f64 {
        let z = (y - self.center) / self.width;
        let d = 1.0 - z * z;
        if d <= 0.0 {
            0.0
        } else {
            self.height * math::exp(1.0 - 1.0 / d) * (-2.0 * z / (d * d)) / self.width
        }
    }

    /// `L^1` norm `height * width * e * int exp(-1/(1-u^2)) du`.
    pub fn l1_norm(&self) -> f64 {
        self.height * self.width * core::f64::consts::E * standard_bump_mass()
    }
}

/// A drift vector field `b(t, x)` as a tagged family.
#[derive(Clone)]
pub enum DriftSpec {
    /// Smooth drift with its spatial derivative.
    Smooth { f: DynFn2, df: DynFn2 },
    RegimeSwitching(RegimeSwitching),
    BoundedPlusLipschitz(BoundedPlusLipschitz),
    IntegrableBump(IntegrableBump),
    /// Smoothing of `base` at scale `1/level` (closed-form ramp blend for the
    /// regime-switching indicator, mollifier convolution otherwise).
    Mollified { base: Arc<DriftSpec>, level: u32 },
}

impl core::fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DriftSpec::Smooth { .. } => f.write_str("Smooth"),
            DriftSpec::RegimeSwitching(rs) => write!(f, "RegimeSwitching({rs:?})"),
            DriftSpec::BoundedPlusLipschitz(_) => f.write_str("BoundedPlusLipschitz"),
            DriftSpec::IntegrableBump(b) => write!(f, "IntegrableBump({b:?})"),
            DriftSpec::Mollified { base, level } => write!(f, "Mollified({base:?}, n={level})"),
        }
    }
}

/// C-infinity ramp: 0 for `u <= 0`, 1 for `u >= 1`, strictly increasing on
/// (0, 1), built from `h(u) = exp(-1/u)`.
fn smooth_ramp(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = math::exp(-1.0 / u);
        let b = math::exp(-1.0 / (1.0 - u));
        a / (a + b)
    }
}

fn smooth_ramp_derivative(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let a = math::exp(-1.0 / u);
    let b = math::exp(-1.0 / (1.0 - u));
    let da = a / (u * u);
    let db = -b / ((1.0 - u) * (1.0 - u));
    (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
}

/// Quadrature convolution with the standard mollifier of radius `r`.
fn convolve(f: &dyn Fn(f64, f64) -> f64, t: f64, y: f64, radius: f64, derivative: bool) -> f64 {
    let mass = standard_bump_mass();
    // phi_r(z) = exp(-1/(1-(z/r)^2)) / (r * mass); d/dy (f * phi_r) = f * phi_r'
    let mut acc = 0.0;
    for p in 0..4 {
        let a = -radius + 2.0 * radius * p as f64 / 4.0;
        let b = -radius + 2.0 * radius * (p + 1) as f64 / 4.0;
        acc += math::gauss16(a, b, |z| {
            let u = z / radius;
            let d = 1.0 - u * u;
            if d <= 0.0 {
                return 0.0;
            }
            let phi = math::exp(-1.0 / d) / (radius * mass);
            let w = if derivative {
                phi * (-2.0 * u / (d * d)) / radius
            } else {
                phi
            };
            w * f(t, y - z)
        });
    }
    acc
}

impl DriftSpec {
    pub fn zero() -> Self {
        DriftSpec::Smooth {
            f: Arc::new(|_, _| 0.0),
            df: Arc::new(|_, _| 0.0),
        }
    }

    /// Linear mean-reverting drift `b(t, y) = -lambda y`.
    pub fn linear(lambda: f64) -> Self {
        DriftSpec::Smooth {
            f: Arc::new(move |_, y| -lambda * y),
            df: Arc::new(move |_, _| -lambda),
        }
    }

    pub fn smooth(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        DriftSpec::Smooth {
            f: Arc::new(f),
            df: Arc::new(df),
        }
    }

    pub fn regime_switching(a1: f64, a2: f64, b1: f64, b2: f64, threshold: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0) {
            return Err(Error::InvalidParameter("regime slopes a1, a2 must be > 0"));
        }
        Ok(DriftSpec::RegimeSwitching(RegimeSwitching {
            a1,
            a2,
            b1,
            b2,
            threshold,
            tilde_cap: DEFAULT_TILDE_CAP,
        }))
    }

    pub fn bump(center: f64, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidParameter("bump width must be > 0"));
        }
        Ok(DriftSpec::IntegrableBump(IntegrableBump {
            center,
            width,
            height,
        }))
    }

    pub fn bounded_plus_lipschitz(
        tilde: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        tilde_bound: f64,
        hat: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        hat_lipschitz: f64,
        hat_growth: f64,
    ) -> Self {
        DriftSpec::BoundedPlusLipschitz(BoundedPlusLipschitz {
            tilde: Arc::new(tilde),
            tilde_bound,
            hat: Arc::new(hat),
            hat_lipschitz,
            hat_growth,
        })
    }

    /// Smoothing at scale `1/n`; see [`mollify`].
    pub fn mollified(&self, level: u32) -> Result<Self> {
        mollify(self, level)
    }

    pub fn eval(&self, t: f64, y: f64) -> f64 {
        let mut hits = 0;
        self.eval_monitored(t, y, &mut hits)
    }

    /// Evaluate, counting clamp activations of the truncated regime component.
    pub fn eval_monitored(&self, t: f64, y: f64, truncation_hits: &mut u32) -> f64 {
        match self {
            DriftSpec::Smooth { f, .. } => f(t, y),
            DriftSpec::RegimeSwitching(rs) => {
                if y >= rs.threshold {
                    return rs.hat(y);
                }
                let raw = rs.tilde_raw(y);
                if math::abs(raw) > rs.tilde_cap {
                    *truncation_hits += 1;
                    rs.hat(y) + raw.clamp(-rs.tilde_cap, rs.tilde_cap)
                } else {
                    // below the clamp the split recombines exactly
                    rs.a1 * (y - rs.b1)
                }
            }
            DriftSpec::BoundedPlusLipschitz(b) => (b.tilde)(t, y) + (b.hat)(t, y),
            DriftSpec::IntegrableBump(b) => b.eval(y),
            DriftSpec::Mollified { base, level } => match base.as_ref() {
                DriftSpec::RegimeSwitching(rs) => {
                    let delta = 0.5 / *level as f64;
                    let w = smooth_ramp((y - (rs.threshold - delta)) / (2.0 * delta));
                    if w == 0.0 || w == 1.0 {
                        // off the ramp the mollified drift equals the raw one
                        return base.eval_monitored(t, y, truncation_hits);
                    }
                    if math::abs(rs.tilde_raw_unclamped(y)) > rs.tilde_cap {
                        *truncation_hits += 1;
                    }
                    rs.hat(y) + (1.0 - w) * rs.tilde_blend(y)
                }
                other => {
                    let radius = 1.0 / *level as f64;
                    convolve(&|tt, yy| other.eval(tt, yy), t, y, radius, false)
                }
            },
        }
    }

    /// Spatial derivative, when defined everywhere.
    pub fn derivative(&self, t: f64, y: f64) -> Option<f64> {
        match self {
            DriftSpec::Smooth { df, .. } => Some(df(t, y)),
            DriftSpec::IntegrableBump(b) => Some(b.derivative(y)),
            DriftSpec::Mollified { base, level } => match base.as_ref() {
                DriftSpec::RegimeSwitching(rs) => {
                    let delta = 0.5 / *level as f64;
                    let u = (y - (rs.threshold - delta)) / (2.0 * delta);
                    let w = smooth_ramp(u);
                    let dw = smooth_ramp_derivative(u) / (2.0 * delta);
                    let (tb, dtb) = rs.tilde_blend_with_derivative(y);
                    Some(rs.a2 + (1.0 - w) * dtb - dw * tb)
                }
                other => {
                    let radius = 1.0 / *level as f64;
                    Some(convolve(&|tt, yy| other.eval(tt, yy), t, y, radius, true))
                }
            },
            DriftSpec::RegimeSwitching(_) | DriftSpec::BoundedPlusLipschitz(_) => None,
        }
    }

    pub fn has_derivative(&self) -> bool {
        !matches!(
            self,
            DriftSpec::RegimeSwitching(_) | DriftSpec::BoundedPlusLipschitz(_)
        )
    }
}

/// Smooth a drift at scale `1/n`.
///
/// For the regime-switching family the indicator `1_{[R, inf)}` is replaced
/// by a C-infinity ramp of width `1/n` centred at `R` (closed form, exact
/// outside the ramp); bounded-plus-Lipschitz and bump drifts are convolved
/// with the standard mollifier of radius `1/n` by fixed quadrature. Both
/// constructions preserve `sup |btilde|` and the Lipschitz constant of
/// `bhat`.
pub fn mollify(drift: &DriftSpec, level: u32) -> Result<DriftSpec> {
    if level == 0 {
        return Err(Error::InvalidParameter("mollification level must be >= 1"));
    }
    match drift {
        DriftSpec::RegimeSwitching(_)
        | DriftSpec::BoundedPlusLipschitz(_)
        | DriftSpec::IntegrableBump(_) => Ok(DriftSpec::Mollified {
            base: Arc::new(drift.clone()),
            level,
        }),
        _ => Err(Error::InvalidParameter(
            "mollify expects a regime-switching, bounded-plus-Lipschitz, or bump drift",
        )),
    }
}

/// One Euler path of `dX = b(t, X) dt + d(noise)`.
#[derive(Debug, Clone)]
pub struct SdePath {
    pub grid: TimeGrid,
    pub x: Vec<f64>,
    pub x0: f64,
    pub drift: DriftSpec,
    /// Number of drift evaluations that hit the regime-truncation clamp.
    pub truncation_hits: u32,
}

/// Left-point Euler with the noise increments added exactly: the state is
/// kept as `x0 + noise_level + accumulated drift`, so with `b = 0` the path
/// is bitwise `x0 + noise`.
pub fn euler_solve(drift: &DriftSpec, noise: &NoiseBundle, x0: f64) -> Result<SdePath> {
    let grid = noise.grid;
    let levels = noise.driving_levels();
    if levels.len() != grid.num_nodes() {
        return Err(Error::GridMismatch("noise levels do not match the grid"));
    }
    let dt = grid.delta();
    let n = grid.steps();
    let mut x = vec![0.0; n + 1];
    let mut hits = 0u32;
    let mut drift_acc = 0.0;
    x[0] = x0;
    for i in 0..n {
        drift_acc += drift.eval_monitored(grid.node(i), x[i], &mut hits) * dt;
        x[i + 1] = x0 + levels[i + 1] + drift_acc;
    }
    Ok(SdePath {
        grid,
        x,
        x0,
        drift: drift.clone(),
        truncation_hits: hits,
    })
}

/// First variation by the exponential representation
/// `J_{t_i} = exp( sum_{j<i} b'(t_j, X_{t_j}) delta )`; strictly positive.
pub fn first_variation_exp(drift: &DriftSpec, path: &SdePath) -> Result<GridFunction> {
    if !drift.has_derivative() {
        return Err(Error::Capability(
            "drift has no pointwise spatial derivative; mollify it or use the local-time route",
        ));
    }
    let grid = path.grid;
    let dt = grid.delta();
    let mut out = vec![0.0; grid.num_nodes()];
    let mut acc = 0.0;
    out[0] = 1.0;
    for i in 1..grid.num_nodes() {
        let t = grid.node(i - 1);
        acc += drift
            .derivative(t, path.x[i - 1])
            .expect("checked has_derivative")
            * dt;
        out[i] = math::exp(acc);
    }
    GridFunction::new(grid, out)
}

/// Running values of the local time-space integral
/// `\int_0^{t_k} \int_R f(s, y) L^{W^x}(ds, dy)` for every grid node `t_k`,
/// where `f` takes a *node index* and the state value `x + W`.
///
/// Three-term discretisation (forward Ito sum, backward sum against `W*`,
/// drift-correction sum), with the `1/(T-s)` weight dropped on `[T-delta, T]`.
pub fn local_time_space_profile(
    f: impl Fn(usize, f64) -> f64,
    x: f64,
    w: &[f64],
    grid: TimeGrid,
) -> Vec<f64> {
    let n = grid.steps();
    debug_assert_eq!(w.len(), n + 1);
    let dt = grid.delta();

    // forward cells: fwd[j] = f(t_j, W^x_{t_j}) (W_{t_{j+1}} - W_{t_j})
    let mut fwd = vec![0.0; n];
    for (j, fw) in fwd.iter_mut().enumerate() {
        *fw = f(j, x + w[j]) * (w[j + 1] - w[j]);
    }
    // reversed-time cells j (with m = N - j indexing What_{t_j} = W_{t_m}):
    //   rev[j]  = f(T-t_j, What^x_j) dW*_j,  dW*_j = (What_{j+1}-What_j) + c_j
    //   corr[j] = f(T-t_j, What^x_j) What_j/(T-t_j) dt
    // with the 1/(T-s) weight dropped on the final cell (j = N-1).
    let mut back = vec![0.0; n];
    for (j, bk) in back.iter_mut().enumerate() {
        let m = n - j;
        let fval = f(m, x + w[m]);
        let dhat = w[m - 1] - w[m];
        if j + 1 < n {
            let c = w[m] / grid.node(m) * dt;
            *bk = fval * (dhat + c) - fval * c;
        } else {
            *bk = fval * dhat;
        }
    }
    // profile[k] = sum_{j<k} fwd[j] + sum_{j >= N-k} back[j]
    let mut out = vec![0.0; n + 1];
    let mut bsum = vec![0.0; n + 1]; // bsum[k] = sum of back[j] for j >= n-k
    for k in 1..=n {
        bsum[k] = bsum[k - 1] + back[n - k];
    }
    let mut fsum = 0.0;
    for k in 1..=n {
        fsum += fwd[k - 1];
        out[k] = fsum + bsum[k];
    }
    out
}

/// Local time-space integral of `f(s, y)` over the whole horizon for the
/// Brownian case `W^x = x + W`.
pub fn local_time_space_integral(
    f: impl Fn(f64, f64) -> f64,
    x: f64,
    w: &[f64],
    grid: TimeGrid,
) -> f64 {
    let profile = local_time_space_profile(|i, y| f(grid.node(i), y), x, w, grid);
    *profile.last().expect("nonempty grid")
}

/// First variation through the local-time route. Requires mixed noise with a
/// Wiener component (`rho2 != 0`); the fBm component of the bundle is frozen
/// (conditioned on) and the Eisenbaum discretisation is applied to
/// `Y = (X - x0 - rho1 B^H)/rho2` pathwise. Reweighting to a Brownian
/// reference measure, when an expectation demands it, is the caller's task.
pub fn first_variation_localtime(
    drift: &DriftSpec,
    bundle: &NoiseBundle,
    path: &SdePath,
) -> Result<GridFunction> {
    let (rho1, rho2) = bundle.mix.coefficients();
    if rho2 == 0.0 {
        return Err(Error::Capability(
            "local-time first variation needs a Wiener component (rho2 != 0)",
        ));
    }
    let grid = path.grid;
    if bundle.grid != grid {
        return Err(Error::GridMismatch("bundle and path grids differ"));
    }
    let n = grid.num_nodes();
    let y: Vec<f64> = (0..n)
        .map(|i| (path.x[i] - path.x0 - rho1 * bundle.bh[i]) / rho2)
        .collect();
    let x0 = path.x0;
    let f = |i: usize, yv: f64| -> f64 {
        drift.eval(grid.node(i), x0 + rho1 * bundle.bh[i] + rho2 * yv) / rho2
    };
    let profile = local_time_space_profile(f, 0.0, &y, grid);
    let values = profile.iter().map(|&v| math::exp(-v)).collect();
    GridFunction::new(grid, values)
}
