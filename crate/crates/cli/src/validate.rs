//! Named invariant suites behind `roughbel validate --suite <name>`.
//!
//! Each suite runs a handful of fast structural checks (the heavyweight
//! statistical gates live in the acceptance test target) and prints one
//! line per check; any failure exits with code 3.

use roughbel::greeks::{bel_delta_sde, BelWeightTable, Payoff, WeightFn};
use roughbel::kernel::{
    big_c_h, c_h, covariance_r, kernel_product_integral, rl_derivative, rl_integral,
    HurstParam, KernelEvaluator, Side,
};
use roughbel::math;
use roughbel::model::{simulate_model, StockModelParams};
use roughbel::noise::{CholeskySampler, KernelMatrix, NoiseSampler};
use roughbel::sde::{euler_solve, first_variation_exp, local_time_space_integral};
use roughbel::stability::{stability_scan, StabilityScan};
use roughbel::{DriftSpec, GridFunction, MixSpec, TimeGrid};

use crate::config::ConfigMap;
use crate::{CliError, ValidateArgs};

type Check = (&'static str, fn() -> Result<(), String>);

fn hp(v: f64) -> HurstParam {
    HurstParam::new(v).unwrap()
}

fn check_kernel_constants() -> Result<(), String> {
    for h in [0.05, 0.1, 0.15, 0.25] {
        let hpv = hp(h);
        let prod = big_c_h(hpv) * c_h(hpv) * math::gamma(0.5 + h) * math::gamma(0.5 - h);
        if (prod - 1.0).abs() > 1e-13 {
            return Err(format!("C_H c_H Gamma identity off at H={h}: {prod}"));
        }
    }
    Ok(())
}

fn check_kernel_factorization() -> Result<(), String> {
    let h = hp(0.1);
    let ev = KernelEvaluator::new(h);
    let mut worst = 0.0f64;
    for i in 1..=8 {
        for j in 1..=i {
            let (t, s) = (i as f64 / 8.0, j as f64 / 8.0);
            let got = kernel_product_integral(&ev, t, s, 2048);
            let want = covariance_r(h, t, s);
            worst = worst.max(((got - want) / want).abs());
        }
    }
    if worst > 1e-3 {
        return Err(format!("kernel factorisation rel err {worst}"));
    }
    Ok(())
}

fn check_rl_power_rule() -> Result<(), String> {
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let (alpha, beta) = (0.4, 0.4);
    let f = GridFunction::sample(grid, |t| math::powf(t, beta));
    let out = rl_integral(alpha, Side::Left, &f).map_err(|e| e.to_string())?;
    let coef = math::exp(math::ln_gamma(beta + 1.0) - math::ln_gamma(beta + 1.0 + alpha));
    for i in (32..=256).step_by(32) {
        let x = grid.node(i);
        let want = coef * math::powf(x, beta + alpha);
        let rel = ((out.values()[i] - want) / want).abs();
        if rel > 2e-3 {
            return Err(format!("power rule rel err {rel} at x={x}"));
        }
    }
    Ok(())
}

fn check_rl_composition() -> Result<(), String> {
    let grid = TimeGrid::new(1.0, 512).unwrap();
    let f = GridFunction::sample(grid, math::sin);
    let i = rl_integral(0.4, Side::Left, &f).map_err(|e| e.to_string())?;
    let d = rl_derivative(0.4, Side::Left, &i).map_err(|e| e.to_string())?;
    let sup = d
        .values()
        .iter()
        .zip(f.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if sup > 2e-2 {
        return Err(format!("D(I f) != f, sup {sup}"));
    }
    Ok(())
}

fn check_matrix_variance() -> Result<(), String> {
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let h = 0.1;
    let m = KernelMatrix::build(grid, hp(h));
    let dt = grid.delta();
    for i in [32usize, 64, 128] {
        let var: f64 = m.row(i).iter().map(|k| k * k).sum::<f64>() * dt;
        let want = math::powf(grid.node(i), 2.0 * h);
        let rel = ((var - want) / want).abs();
        if rel > 2e-2 {
            return Err(format!("row {i} variance rel err {rel}"));
        }
    }
    Ok(())
}

fn check_volterra_vs_cholesky() -> Result<(), String> {
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let h = hp(0.1);
    let vs = NoiseSampler::new(grid, h, MixSpec::None).map_err(|e| e.to_string())?;
    let cs = CholeskySampler::new(grid, h).map_err(|e| e.to_string())?;
    let n = 4000u64;
    let vv: Vec<f64> = (0..n)
        .map(|i| {
            let b = vs.sample_path(1, i);
            b.bh[64] * b.bh[64]
        })
        .collect();
    let cv: Vec<f64> = (0..n)
        .map(|i| {
            let p = cs.sample_path(2, i);
            p[64] * p[64]
        })
        .collect();
    let (mv, sev) = math::mean_and_stderr(&vv);
    let (mc, sec) = math::mean_and_stderr(&cv);
    let se = math::sqrt(sev * sev + sec * sec);
    if (mv - mc).abs() > 3.0 * se {
        return Err(format!("terminal variances {mv} vs {mc} (3se {})", 3.0 * se));
    }
    Ok(())
}

fn check_zero_drift_translation() -> Result<(), String> {
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let s = NoiseSampler::new(grid, hp(0.1), MixSpec::None).map_err(|e| e.to_string())?;
    let b = s.sample_path(9, 0);
    let p = euler_solve(&DriftSpec::zero(), &b, 0.4).map_err(|e| e.to_string())?;
    for (x, bh) in p.x.iter().zip(b.bh.iter()) {
        if x.to_bits() != (0.4 + bh).to_bits() {
            return Err("zero-drift path is not a bitwise noise translation".into());
        }
    }
    Ok(())
}

fn check_first_variation_fd() -> Result<(), String> {
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let s = NoiseSampler::new(grid, hp(0.1), MixSpec::None).map_err(|e| e.to_string())?;
    let drift = DriftSpec::linear(0.7);
    let b = s.sample_path(3, 0);
    let base = euler_solve(&drift, &b, 0.5).map_err(|e| e.to_string())?;
    let bumped = euler_solve(&drift, &b, 0.5 + 1e-5).map_err(|e| e.to_string())?;
    let j = first_variation_exp(&drift, &base).map_err(|e| e.to_string())?;
    for i in 0..=128 {
        let fd = (bumped.x[i] - base.x[i]) / 1e-5;
        if (fd - j.values()[i]).abs() > 1e-3 {
            return Err(format!("J vs FD gap at node {i}"));
        }
    }
    Ok(())
}

fn check_local_time_ibp() -> Result<(), String> {
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let s = NoiseSampler::new(grid, hp(0.1), MixSpec::None).map_err(|e| e.to_string())?;
    let vals: Vec<f64> = (0..200u64)
        .map(|i| {
            let b = s.sample_path(5, i);
            local_time_space_integral(|_, y| y, 0.0, &b.w, grid) + 1.0
        })
        .collect();
    let (m, se) = math::mean_and_stderr(&vals);
    if m.abs() > 3.0 * se {
        return Err(format!("IBP mean {m} +- {se}"));
    }
    Ok(())
}

fn check_gbm_mean() -> Result<(), String> {
    let params = StockModelParams::black_scholes(0.05, 0.2).map_err(|e| e.to_string())?;
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let s = NoiseSampler::new(grid, hp(0.1), MixSpec::Correlated { rho: 0.0 })
        .map_err(|e| e.to_string())?;
    let vals: Vec<f64> = (0..4000u64)
        .map(|i| {
            let b = s.sample_path(7, i);
            simulate_model(&params, &b, 1.0, 0.0).unwrap().stock[64]
        })
        .collect();
    let (m, se) = math::mean_and_stderr(&vals);
    let want = math::exp(0.05);
    if (m - want).abs() > 3.0 * se {
        return Err(format!("GBM mean {m} +- {se} vs {want}"));
    }
    Ok(())
}

fn check_stock_linearity() -> Result<(), String> {
    let params = StockModelParams::rough_vasicek(0.02, 0.5, 1.0, 0.1, 4.0)
        .map_err(|e| e.to_string())?;
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let s = NoiseSampler::new(grid, hp(0.1), MixSpec::Correlated { rho: 0.0 })
        .map_err(|e| e.to_string())?;
    let b = s.sample_path(11, 0);
    let one = simulate_model(&params, &b, 1.0, 0.2).map_err(|e| e.to_string())?;
    let two = simulate_model(&params, &b, 2.0, 0.2).map_err(|e| e.to_string())?;
    for i in 0..=64 {
        if ((two.stock[i] - 2.0 * one.stock[i]) / two.stock[i]).abs() > 1e-12 {
            return Err("stock is not linear in x1".into());
        }
        if one.ds_dx1[i].to_bits() != one.stock[i].to_bits() {
            return Err("dS/dx1 != S/x1".into());
        }
    }
    Ok(())
}

fn check_weight_guard() -> Result<(), String> {
    if WeightFn::new(|_| 0.9, 1.0).is_ok() {
        return Err("unnormalised weight accepted".into());
    }
    if WeightFn::new(|_| 1.0, 1.0).is_err() {
        return Err("normalised weight rejected".into());
    }
    Ok(())
}

fn check_weight_mean_zero() -> Result<(), String> {
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let h = hp(0.1);
    let s = NoiseSampler::new(grid, h, MixSpec::None).map_err(|e| e.to_string())?;
    let w = WeightFn::uniform(1.0);
    let table = BelWeightTable::new(grid, h, &w);
    let j = vec![1.0; 65];
    let vals: Vec<f64> = (0..4000u64)
        .map(|i| {
            let b = s.sample_path(13, i);
            table.double_integral(&j, &b.b_increments())
        })
        .collect();
    let (m, se) = math::mean_and_stderr(&vals);
    if m.abs() > 3.0 * se {
        return Err(format!("weight mean {m} +- {se}"));
    }
    Ok(())
}

fn check_estimator_determinism() -> Result<(), String> {
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let drift = DriftSpec::linear(0.4);
    let run = || {
        bel_delta_sde(
            &drift,
            hp(0.1),
            grid,
            1.0,
            &Payoff::square(),
            &WeightFn::uniform(1.0),
            200,
            77,
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    if a.value.to_bits() != b.value.to_bits() {
        return Err("estimator is not deterministic".into());
    }
    Ok(())
}

fn check_stability_zero_drift() -> Result<(), String> {
    let scan = StabilityScan::new(
        DriftSpec::zero(),
        hp(0.1),
        1,
        0.0,
        (-1.0, 1.0),
        vec![0.1, 0.01, 0.001],
        MixSpec::Scaled {
            rho1: 1.0,
            rho2: 1.0,
        },
        TimeGrid::new(1.0, 32).unwrap(),
        20,
        0,
    )
    .map_err(|e| e.to_string())?;
    let rep = stability_scan(&scan).map_err(|e| e.to_string())?;
    if (rep.slope - 2.0).abs() > 1e-9 {
        return Err(format!("zero-drift slope {}", rep.slope));
    }
    Ok(())
}

fn suite_checks(name: &str) -> Option<Vec<Check>> {
    let kernel: Vec<Check> = vec![
        ("kernel.constants-identity", check_kernel_constants),
        ("kernel.factorization", check_kernel_factorization),
        ("kernel.rl-power-rule", check_rl_power_rule),
        ("kernel.rl-composition", check_rl_composition),
    ];
    let noise: Vec<Check> = vec![
        ("noise.matrix-variance", check_matrix_variance),
        ("noise.volterra-vs-cholesky", check_volterra_vs_cholesky),
    ];
    let sde: Vec<Check> = vec![
        ("sde.zero-drift-translation", check_zero_drift_translation),
        ("sde.first-variation-fd", check_first_variation_fd),
        ("sde.local-time-ibp", check_local_time_ibp),
    ];
    let model: Vec<Check> = vec![
        ("model.gbm-mean", check_gbm_mean),
        ("model.stock-linearity", check_stock_linearity),
    ];
    let greeks: Vec<Check> = vec![
        ("greeks.weight-guard", check_weight_guard),
        ("greeks.weight-mean-zero", check_weight_mean_zero),
        ("greeks.determinism", check_estimator_determinism),
    ];
    let stability: Vec<Check> = vec![("stability.zero-drift-slope", check_stability_zero_drift)];

    match name {
        "kernel" => Some(kernel),
        "noise" => Some(noise),
        "sde" => Some(sde),
        "model" => Some(model),
        "greeks" => Some(greeks),
        "stability" => Some(stability),
        "all" => {
            let mut all = kernel;
            all.extend(noise);
            all.extend(sde);
            all.extend(model);
            all.extend(greeks);
            all.extend(stability);
            Some(all)
        }
        _ => None,
    }
}

pub fn run(args: &ValidateArgs, file: &ConfigMap) -> Result<(), CliError> {
    let suite = crate::config::resolve(args.suite.clone(), file, "suite", "all".to_string())?;
    let checks = suite_checks(&suite).ok_or_else(|| {
        CliError::Config(format!(
            "--suite {suite}: expected kernel | noise | sde | model | greeks | stability | all"
        ))
    })?;
    let mut failures = 0usize;
    for (name, f) in &checks {
        match f() {
            Ok(()) => println!("ok   {name}"),
            Err(msg) => {
                failures += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    println!("{} checks, {} failed", checks.len(), failures);
    if failures > 0 {
        Err(CliError::Suite(format!(
            "{failures} of {} checks failed in suite '{suite}'",
            checks.len()
        )))
    } else {
        Ok(())
    }
}
