//! Scalar math for `no_std` builds plus deterministic summation helpers.
//!
//! All elementary functions are routed through `libm` (never `std`), so the
//! crate computes bit-identical values whether or not `std` is linked.

use alloc::vec::Vec;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, p: f64) -> f64 {
    libm::pow(x, p)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Natural log of the Gamma function, `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `ln B(a, b)` via log-Gamma, avoiding overflow for small arguments.
#[inline]
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

#[inline]
pub fn beta(a: f64, b: f64) -> f64 {
    exp(ln_beta(a, b))
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// slice layout, never on thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n if n <= 32 => values.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
///
/// Both moments use pairwise summation so the result is a pure function of
/// the value vector.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, sqrt(var / n as f64))
}

/// Ordinary least squares of `y` on `x`: returns (slope, slope standard error).
pub fn slope_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let xm = pairwise_sum(x) / n;
    let ym = pairwise_sum(y) / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - xm) * (xi - xm);
        sxy += (xi - xm) * (yi - ym);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let mut rss = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let r = yi - intercept - slope * xi;
        rss += r * r;
    }
    let dof = (x.len() as f64 - 2.0).max(1.0);
    (slope, sqrt(rss / dof / sxx))
}

/// Abscissas/weights for Gauss-Legendre rules on [-1, 1].
pub(crate) const GL8_X: [f64; 8] = [
    -9.602_898_564_975_361_8e-1,
    -7.966_664_774_136_267_3e-1,
    -5.255_324_099_163_290e-1,
    -1.834_346_424_956_497_8e-1,
    1.834_346_424_956_497_8e-1,
    5.255_324_099_163_290e-1,
    7.966_664_774_136_267_3e-1,
    9.602_898_564_975_361_8e-1,
];
pub(crate) const GL8_W: [f64; 8] = [
    1.012_285_362_903_766_9e-1,
    2.223_810_344_533_743_4e-1,
    3.137_066_458_778_870_5e-1,
    3.626_837_833_783_617_7e-1,
    3.626_837_833_783_617_7e-1,
    3.137_066_458_778_870_5e-1,
    2.223_810_344_533_743_4e-1,
    1.012_285_362_903_766_9e-1,
];

pub(crate) const GL16_X: [f64; 16] = [
    -9.894_009_349_916_499_4e-1,
    -9.445_750_230_732_326e-1,
    -8.656_312_023_878_317_6e-1,
    -7.554_044_083_550_03e-1,
    -6.178_762_444_026_437_7e-1,
    -4.580_167_776_572_273_7e-1,
    -2.816_035_507_792_589_2e-1,
    -9.501_250_983_763_745_4e-2,
    9.501_250_983_763_745_4e-2,
    2.816_035_507_792_589_2e-1,
    4.580_167_776_572_273_7e-1,
    6.178_762_444_026_437_7e-1,
    7.554_044_083_550_03e-1,
    8.656_312_023_878_317_6e-1,
    9.445_750_230_732_326e-1,
    9.894_009_349_916_499_4e-1,
];
pub(crate) const GL16_W: [f64; 16] = [
    2.715_245_941_175_403_7e-2,
    6.225_352_393_864_770_6e-2,
    9.515_851_168_249_259_1e-2,
    1.246_289_712_555_340_3e-1,
    1.495_959_888_165_767_6e-1,
    1.691_565_193_950_026_2e-1,
    1.826_034_150_449_236_1e-1,
    1.894_506_104_550_685_8e-1,
    1.894_506_104_550_685_8e-1,
    1.826_034_150_449_236_1e-1,
    1.691_565_193_950_026_2e-1,
    1.495_959_888_165_767_6e-1,
    1.246_289_712_555_340_3e-1,
    9.515_851_168_249_259_1e-2,
    6.225_352_393_864_770_6e-2,
    2.715_245_941_175_403_7e-2,
];

/// Gauss-Legendre quadrature of `f` over `[a, b]` with the 16-point rule.
pub(crate) fn gauss16(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL16_X.iter().zip(GL16_W.iter()) {
        acc += w * f(mid + half * x);
    }
    half * acc
}

/// Gauss-Legendre quadrature of `f` over `[a, b]` with the 8-point rule.
pub(crate) fn gauss8(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL8_X.iter().zip(GL8_W.iter()) {
        acc += w * f(mid + half * x);
    }
    half * acc
}

/// Composite Simpson rule with `2n` sub-intervals.
pub(crate) fn simpson(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let m = 2 * n.max(1);
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}
