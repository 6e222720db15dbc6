//! Empirical moment-scaling harness for flow stability in the initial
//! condition: for solutions of `dX = b dt + rho1 dB^H + rho2 dW` the
//! moments `E[ sup_t |X^x_t - X^y_t|^p ]` (with `p = 2^r`) are bounded by
//! `C |x - y|^p`, so the log-log slope of moment against gap must come out
//! at `p`. The slope, not the non-explicit constant, is the test statistic.
//!
//! Pairs share their noise bundle (common random numbers) and every gap
//! level reuses the same per-path bundles, so the per-gap moments are
//! comparable and monotone in the gap by the monotone flow property.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::greeks::mc_map;
use crate::kernel::HurstParam;
use crate::math;
use crate::noise::{MixSpec, NoiseSampler};
use crate::sde::{euler_solve, DriftSpec};

/// Scan description: base point `x`, paired points `x + gap` for strictly
/// decreasing gaps, all inside the cube `[cube.0, cube.1]`.
#[derive(Debug, Clone)]
pub struct StabilityScan {
    pub drift: DriftSpec,
    pub h: HurstParam,
    /// Moment order is `p = 2^moment_log2`.
    pub moment_log2: u32,
    pub base_point: f64,
    pub cube: (f64, f64),
    pub gaps: Vec<f64>,
    pub mix: MixSpec,
    pub grid: TimeGrid,
    pub n_paths: u64,
    pub seed: u64,
}

impl StabilityScan {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        drift: DriftSpec,
        h: HurstParam,
        moment_log2: u32,
        base_point: f64,
        cube: (f64, f64),
        gaps: Vec<f64>,
        mix: MixSpec,
        grid: TimeGrid,
        n_paths: u64,
        seed: u64,
    ) -> Result<Self> {
        mix.validate()?;
        if !(cube.0 < cube.1) {
            return Err(Error::InvalidParameter("cube must have positive extent"));
        }
        for w in gaps.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::InvalidParameter("gaps must be strictly decreasing"));
            }
        }
        for &g in &gaps {
            if !(g > 0.0) {
                return Err(Error::InvalidParameter("gaps must be positive"));
            }
            if base_point < cube.0 || base_point + g > cube.1 {
                return Err(Error::InvalidParameter("a pair leaves the declared cube"));
            }
        }
        Ok(Self {
            drift,
            h,
            moment_log2,
            base_point,
            cube,
            gaps,
            mix,
            grid,
            n_paths,
            seed,
        })
    }

    /// `p = 2^r`.
    pub fn moment_order(&self) -> f64 {
        math::powf(2.0, self.moment_log2 as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub gap: f64,
    pub moment: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// Fitted slope of `log moment` against `log gap`.
    pub slope: f64,
    pub slope_std_error: f64,
    pub moment_order: f64,
}

/// Run the scan: per gap, the Monte Carlo moment of the pathwise sup
/// difference under common noise, then the least-squares slope fit.
pub fn stability_scan(scan: &StabilityScan) -> Result<StabilityReport> {
    if scan.gaps.len() < 3 {
        return Err(Error::FitUnderdetermined {
            needed: 3,
            got: scan.gaps.len(),
        });
    }
    if scan.n_paths < 2 {
        return Err(Error::InvalidParameter("need at least 2 paths"));
    }
    let sampler = NoiseSampler::new(scan.grid, scan.h, scan.mix)?;
    let p = scan.moment_order();
    let n_gaps = scan.gaps.len();

    // per path: one bundle, sup difference for every gap level
    let per_path: Vec<Vec<f64>> = mc_map(scan.n_paths, |i| {
        let bundle = sampler.sample_path(scan.seed, i);
        let base = euler_solve(&scan.drift, &bundle, scan.base_point).expect("validated");
        scan.gaps
            .iter()
            .map(|&g| {
                let shifted =
                    euler_solve(&scan.drift, &bundle, scan.base_point + g).expect("validated");
                let sup = base
                    .x
                    .iter()
                    .zip(shifted.x.iter())
                    .map(|(a, b)| math::abs(a - b))
                    .fold(0.0f64, f64::max);
                math::powf(sup, p)
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(n_gaps);
    let mut log_gap = Vec::with_capacity(n_gaps);
    let mut log_moment = Vec::with_capacity(n_gaps);
    for (k, &gap) in scan.gaps.iter().enumerate() {
        let vals: Vec<f64> = per_path.iter().map(|row| row[k]).collect();
        let (moment, se) = math::mean_and_stderr(&vals);
        if !(moment > 0.0) {
            return Err(Error::NonFinite("moment estimate"));
        }
        rows.push(StabilityRow {
            gap,
            moment,
            std_error: se,
        });
        log_gap.push(math::ln(gap));
        log_moment.push(math::ln(moment));
    }
    let (slope, slope_std_error) = math::slope_fit(&log_gap, &log_moment);
    Ok(StabilityReport {
        rows,
        slope,
        slope_std_error,
        moment_order: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn hp(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    fn base_scan(drift: DriftSpec, gaps: Vec<f64>, n_paths: u64) -> StabilityScan {
        StabilityScan::new(
            drift,
            hp(0.1),
            1, // p = 2
            0.0,
            (-2.0, 2.0),
            gaps,
            MixSpec::Scaled {
                rho1: 1.0,
                rho2: 1.0,
            },
            TimeGrid::new(1.0, 64).unwrap(),
            n_paths,
            7,
        )
        .unwrap()
    }

    #[test]
    fn validation_rejects_bad_scans() {
        let drift = DriftSpec::zero();
        // non-decreasing gaps
        assert!(StabilityScan::new(
            drift.clone(),
            hp(0.1),
            1,
            0.0,
            (-1.0, 1.0),
            vec![0.01, 0.1],
            MixSpec::None,
            TimeGrid::new(1.0, 8).unwrap(),
            10,
            0
        )
        .is_err());
        // pair escapes the cube
        assert!(StabilityScan::new(
            drift,
            hp(0.1),
            1,
            0.9,
            (-1.0, 1.0),
            vec![0.5, 0.2, 0.1],
            MixSpec::None,
            TimeGrid::new(1.0, 8).unwrap(),
            10,
            0
        )
        .is_err());
    }

    #[test]
    fn fewer_than_three_gaps_is_a_fit_error() {
        let scan = base_scan(DriftSpec::zero(), vec![0.1, 0.01], 10);
        assert!(matches!(
            stability_scan(&scan),
            Err(Error::FitUnderdetermined { .. })
        ));
    }

    #[test]
    fn zero_drift_slope_is_exact() {
        // additive noise cancels: sup|X^x - X^y| = gap, moment = gap^p.
        let scan = base_scan(DriftSpec::zero(), vec![0.1, 0.01, 0.001], 50);
        let rep = stability_scan(&scan).unwrap();
        assert!((rep.slope - 2.0).abs() < 1e-10, "slope {}", rep.slope);
        for row in &rep.rows {
            assert!((row.moment - row.gap * row.gap).abs() < 1e-15 * row.moment.max(1.0));
            assert!(row.std_error < 1e-18);
        }
    }

    #[test]
    fn linear_drift_slope_matches_order() {
        // X^x - X^y = (x-y) e^{-lambda t} at Euler level up to O(dt):
        // slope = p within the fit error.
        let scan = base_scan(DriftSpec::linear(0.7), vec![0.1, 0.01, 0.001], 200);
        let rep = stability_scan(&scan).unwrap();
        assert!(
            (rep.slope - 2.0).abs() < 3.0 * rep.slope_std_error.max(1e-3),
            "slope {} +- {}",
            rep.slope,
            rep.slope_std_error
        );
    }

    #[test]
    fn regime_switching_slope_close_to_order() {
        let drift = DriftSpec::regime_switching(0.8, 1.2, 0.1, -0.1, 0.0).unwrap();
        let scan = StabilityScan::new(
            drift,
            hp(0.1),
            1,
            0.0,
            (-2.0, 2.0),
            vec![0.1, 0.01, 0.001],
            MixSpec::Scaled {
                rho1: 1.0,
                rho2: 1.0,
            },
            TimeGrid::new(1.0, 128).unwrap(),
            2_000,
            11,
        )
        .unwrap();
        let rep = stability_scan(&scan).unwrap();
        assert!((rep.slope - 2.0).abs() < 0.1, "slope {}", rep.slope);
    }

    #[test]
    fn moments_are_monotone_in_gap() {
        let drift = DriftSpec::regime_switching(1.0, 1.5, 0.0, 0.0, 0.0).unwrap();
        let scan = StabilityScan::new(
            drift,
            hp(0.1),
            2, // p = 4
            -0.5,
            (-2.0, 2.0),
            vec![0.2, 0.05, 0.01, 0.002],
            MixSpec::Scaled {
                rho1: 1.0,
                rho2: 0.5,
            },
            TimeGrid::new(1.0, 64).unwrap(),
            500,
            3,
        )
        .unwrap();
        let rep = stability_scan(&scan).unwrap();
        for w in rep.rows.windows(2) {
            assert!(w[0].moment > w[1].moment, "{:?}", rep.rows);
        }
        assert_eq!(rep.moment_order, 4.0);
    }

    #[test]
    fn pure_fbm_scan_also_runs() {
        // rho2 = 0 (pure fractional noise) is outside the mixed-noise
        // hypothesis but the harness can still measure the slope.
        let drift = DriftSpec::regime_switching(0.8, 1.2, 0.0, 0.0, 0.0).unwrap();
        let scan = StabilityScan::new(
            drift,
            hp(0.1),
            1,
            0.0,
            (-2.0, 2.0),
            vec![0.1, 0.01, 0.001],
            MixSpec::None,
            TimeGrid::new(1.0, 64).unwrap(),
            500,
            5,
        )
        .unwrap();
        let rep = stability_scan(&scan).unwrap();
        assert!((rep.slope - 2.0).abs() < 0.2, "slope {}", rep.slope);
    }
}
