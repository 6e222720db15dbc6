//! Subcommand implementations.

use std::time::Instant;

use roughbel::greeks::{
    bel_delta_sde, bel_greeks_model, fd_delta_sde, fd_greeks, Component, Estimator,
    GreeksEstimate, Payoff, WeightFn,
};
use roughbel::kernel::{covariance_r, HurstParam, HurstRegime, KernelEvaluator};
use roughbel::model::{simulate_model as run_model, StockModelParams};
use roughbel::noise::NoiseSampler;
use roughbel::sde::{euler_solve, first_variation_exp, first_variation_localtime};
use roughbel::stability::{stability_scan, StabilityScan};
use roughbel::{DriftSpec, GridFunction, MixSpec, TimeGrid};

use crate::config::{resolve, resolve_opt, ConfigMap, RunConfig};
use crate::output::{fmt, Sink};
use crate::{lib_err, CliError};
use crate::{
    GreeksArgs, KernelTableArgs, ModelArgs, SamplePathsArgs, SolveArgs, StabilityArgs,
};

fn hurst(h: f64) -> Result<HurstParam, CliError> {
    HurstParam::new(h).map_err(lib_err)
}

fn grid(t: f64, steps: usize) -> Result<TimeGrid, CliError> {
    TimeGrid::new(t, steps).map_err(lib_err)
}

/// `none | correlated:RHO | scaled:RHO1,RHO2`
fn parse_mix(spec: &str) -> Result<MixSpec, CliError> {
    let bad = |m: &str| CliError::Config(format!("--mix {spec}: {m}"));
    let mix = if spec == "none" {
        MixSpec::None
    } else if let Some(rest) = spec.strip_prefix("correlated:") {
        MixSpec::Correlated {
            rho: rest.parse().map_err(|_| bad("bad correlation"))?,
        }
    } else if let Some(rest) = spec.strip_prefix("scaled:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err(bad("expected scaled:RHO1,RHO2"));
        }
        MixSpec::Scaled {
            rho1: parts[0].parse().map_err(|_| bad("bad rho1"))?,
            rho2: parts[1].parse().map_err(|_| bad("bad rho2"))?,
        }
    } else {
        return Err(bad("expected none | correlated:RHO | scaled:RHO1,RHO2"));
    };
    mix.validate().map_err(lib_err)?;
    Ok(mix)
}

/// `zero | linear:L | bump:C,W,H | regime:A1,A2,B1,B2,R`, optionally mollified.
fn parse_drift(spec: &str, mollify: Option<u32>) -> Result<DriftSpec, CliError> {
    let bad = |m: &str| CliError::Config(format!("--drift {spec}: {m}"));
    let floats = |rest: &str, n: usize| -> Result<Vec<f64>, CliError> {
        let parts: Result<Vec<f64>, _> = rest.split(',').map(str::parse).collect();
        let parts = parts.map_err(|_| bad("bad numeric parameter"))?;
        if parts.len() != n {
            return Err(bad("wrong number of parameters"));
        }
        Ok(parts)
    };
    let base = if spec == "zero" {
        DriftSpec::zero()
    } else if let Some(rest) = spec.strip_prefix("linear:") {
        DriftSpec::linear(rest.parse().map_err(|_| bad("bad lambda"))?)
    } else if let Some(rest) = spec.strip_prefix("bump:") {
        let p = floats(rest, 3)?;
        DriftSpec::bump(p[0], p[1], p[2]).map_err(lib_err)?
    } else if let Some(rest) = spec.strip_prefix("regime:") {
        let p = floats(rest, 5)?;
        DriftSpec::regime_switching(p[0], p[1], p[2], p[3], p[4]).map_err(lib_err)?
    } else {
        return Err(bad(
            "expected zero | linear:L | bump:C,W,H | regime:A1,A2,B1,B2,R",
        ));
    };
    match mollify {
        None => Ok(base),
        Some(n) => base.mollified(n).map_err(lib_err),
    }
}

/// `call:K | put:K | digital:K | identity | square`
fn parse_payoff(spec: &str) -> Result<Payoff, CliError> {
    let bad = || CliError::Config(format!("--payoff {spec}: expected call:K | put:K | digital:K | identity | square"));
    if spec == "identity" {
        return Ok(Payoff::identity());
    }
    if spec == "square" {
        return Ok(Payoff::square());
    }
    let (kind, strike) = spec.split_once(':').ok_or_else(bad)?;
    let k: f64 = strike.parse().map_err(|_| bad())?;
    match kind {
        "call" => Ok(Payoff::call(k)),
        "put" => Ok(Payoff::put(k)),
        "digital" => Ok(Payoff::digital(k)),
        _ => Err(bad()),
    }
}

fn regime_warning(h: HurstParam, stock: bool) {
    match h.regime() {
        HurstRegime::General => eprintln!(
            "warning: H = {} is outside the strong-solution regime (H < 1/6 for d = 1); \
             the weight representation has no theoretical backing here",
            h.value()
        ),
        HurstRegime::StrongSolution1D if stock => eprintln!(
            "warning: H = {} >= 1/8; the stock sensitivity lacks a continuous modification \
             guarantee (needs H < 1/8)",
            h.value()
        ),
        _ => {}
    }
}

pub fn kernel_table(args: &KernelTableArgs, file: &ConfigMap) -> Result<(), CliError> {
    let h = resolve(args.h, file, "h", 0.1)?;
    let t_max = resolve(args.t_max, file, "t_max", 1.0)?;
    let n = resolve(args.n, file, "n", 64usize)?;
    if n < 2 {
        return Err(CliError::Config("--n must be at least 2".into()));
    }
    let hp = hurst(h)?;
    let ev = KernelEvaluator::new(hp);

    let mut cfg = RunConfig::new("kernel-table");
    cfg.put("h", h);
    cfg.put("t_max", t_max);
    cfg.put("n", n);

    let mut sink = Sink::open(args.out.as_deref())?;
    sink.header(&cfg)?;
    sink.line("t,s,K,dK_dt,R")?;
    for i in 1..=n {
        let t = t_max * i as f64 / n as f64;
        for j in 1..i {
            let s = t_max * j as f64 / n as f64;
            let k = ev.k(t, s).map_err(lib_err)?;
            let dk = ev.dk_dt(t, s).map_err(lib_err)?;
            let r = covariance_r(hp, t, s);
            sink.line(&format!("{},{},{},{},{}", fmt(t), fmt(s), fmt(k), fmt(dk), fmt(r)))?;
        }
    }
    Ok(())
}

pub fn sample_paths(args: &SamplePathsArgs, file: &ConfigMap) -> Result<(), CliError> {
    let h = resolve(args.h, file, "h", 0.1)?;
    let t = resolve(args.t, file, "t", 1.0)?;
    let steps = resolve(args.steps, file, "steps", 256usize)?;
    let seed = resolve(args.seed, file, "seed", 42u64)?;
    let paths = resolve(args.paths, file, "paths", 1u64)?;
    let mix_spec = resolve(args.mix.clone(), file, "mix", "none".to_string())?;
    let mix = parse_mix(&mix_spec)?;
    let hp = hurst(h)?;
    let g = grid(t, steps)?;

    let mut cfg = RunConfig::new("sample-paths");
    cfg.put("h", h);
    cfg.put("t", t);
    cfg.put("steps", steps);
    cfg.put("seed", seed);
    cfg.put("paths", paths);
    cfg.put("mix", &mix_spec);

    let sampler = NoiseSampler::new(g, hp, mix).map_err(lib_err)?;
    let mut sink = Sink::open(args.out.as_deref())?;
    sink.header(&cfg)?;
    let with_path_col = paths > 1;
    sink.line(if with_path_col {
        "path,t,B,BH,W,mixed"
    } else {
        "t,B,BH,W,mixed"
    })?;
    for p in 0..paths {
        let b = sampler.sample_path(seed, p);
        for i in 0..g.num_nodes() {
            let mixed = b.mixed.as_ref().map_or(b.bh[i], |m| m[i]);
            let row = format!(
                "{},{},{},{},{}",
                fmt(g.node(i)),
                fmt(b.b[i]),
                fmt(b.bh[i]),
                fmt(b.w[i]),
                fmt(mixed)
            );
            if with_path_col {
                sink.line(&format!("{p},{row}"))?;
            } else {
                sink.line(&row)?;
            }
        }
    }
    Ok(())
}

pub fn solve(args: &SolveArgs, file: &ConfigMap) -> Result<(), CliError> {
    let drift_spec = resolve(args.drift.clone(), file, "drift", "linear:0.5".to_string())?;
    let mollify = resolve_opt(args.mollify, file, "mollify")?;
    let h = resolve(args.h, file, "h", 0.1)?;
    let t = resolve(args.t, file, "t", 1.0)?;
    let steps = resolve(args.steps, file, "steps", 256usize)?;
    let seed = resolve(args.seed, file, "seed", 42u64)?;
    let paths = resolve(args.paths, file, "paths", 1u64)?;
    let mix_spec = resolve(args.mix.clone(), file, "mix", "none".to_string())?;
    let x0 = resolve(args.x0, file, "x0", 1.0)?;

    let drift = parse_drift(&drift_spec, mollify)?;
    let mix = parse_mix(&mix_spec)?;
    let hp = hurst(h)?;
    let g = grid(t, steps)?;

    let mut cfg = RunConfig::new("solve");
    cfg.put("drift", &drift_spec);
    if let Some(n) = mollify {
        cfg.put("mollify", n);
    }
    cfg.put("h", h);
    cfg.put("t", t);
    cfg.put("steps", steps);
    cfg.put("seed", seed);
    cfg.put("paths", paths);
    cfg.put("mix", &mix_spec);
    cfg.put("x0", x0);

    let (_, rho2) = mix.coefficients();
    if !drift.has_derivative() && rho2 == 0.0 {
        return Err(CliError::Config(
            "this drift has no derivative and the mix has no Wiener component; \
             pass --mollify N or a mix with rho2 != 0 so a first variation exists"
                .into(),
        ));
    }

    let sampler = NoiseSampler::new(g, hp, mix).map_err(lib_err)?;
    let mut sink = Sink::open(args.out.as_deref())?;
    sink.header(&cfg)?;
    let with_path_col = paths > 1;
    sink.line(if with_path_col { "path,t,X,J" } else { "t,X,J" })?;
    for p in 0..paths {
        let bundle = sampler.sample_path(seed, p);
        let path = euler_solve(&drift, &bundle, x0).map_err(lib_err)?;
        let j: GridFunction = if drift.has_derivative() {
            first_variation_exp(&drift, &path).map_err(lib_err)?
        } else {
            first_variation_localtime(&drift, &bundle, &path).map_err(lib_err)?
        };
        for i in 0..g.num_nodes() {
            let row = format!("{},{},{}", fmt(g.node(i)), fmt(path.x[i]), fmt(j.values()[i]));
            if with_path_col {
                sink.line(&format!("{p},{row}"))?;
            } else {
                sink.line(&row)?;
            }
        }
        if path.truncation_hits > 0 {
            eprintln!(
                "warning: path {p}: drift truncation clamp hit {} times",
                path.truncation_hits
            );
        }
    }
    Ok(())
}

/// Assemble stock-model parameters from preset + overrides; returns the
/// params and the key-value pairs recorded into the run config.
#[allow(clippy::too_many_arguments)]
fn build_stock_params(
    preset: &str,
    mu: f64,
    nu: f64,
    rho: f64,
    sigma0: f64,
    a: f64,
    b_level: f64,
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    threshold: f64,
    cutoff: f64,
    mollify: u32,
    cfg: &mut RunConfig,
) -> Result<StockModelParams, CliError> {
    cfg.put("preset", preset);
    cfg.put("mu", mu);
    match preset {
        "bs" => {
            cfg.put("sigma0", sigma0);
            StockModelParams::black_scholes(mu, sigma0).map_err(lib_err)
        }
        "gjr" => {
            cfg.put("nu", nu);
            cfg.put("a", a);
            cfg.put("b_level", b_level);
            cfg.put("cutoff", cutoff);
            StockModelParams::rough_vasicek(mu, nu, a, b_level, cutoff).map_err(lib_err)
        }
        "regime" => {
            cfg.put("nu", nu);
            cfg.put("rho", rho);
            cfg.put("a1", a1);
            cfg.put("a2", a2);
            cfg.put("b1", b1);
            cfg.put("b2", b2);
            cfg.put("threshold", threshold);
            cfg.put("cutoff", cutoff);
            cfg.put("mollify", mollify);
            StockModelParams::regime_switching(
                mu, nu, rho, a1, a2, b1, b2, threshold, cutoff, mollify,
            )
            .map_err(lib_err)
        }
        other => Err(CliError::Config(format!(
            "--preset {other}: expected bs | gjr | regime"
        ))),
    }
}

pub fn simulate_model(args: &ModelArgs, file: &ConfigMap) -> Result<(), CliError> {
    let preset = resolve(args.preset.clone(), file, "preset", "gjr".to_string())?;
    let h = resolve(args.h, file, "h", 0.1)?;
    let t = resolve(args.t, file, "t", 1.0)?;
    let steps = resolve(args.steps, file, "steps", 256usize)?;
    let seed = resolve(args.seed, file, "seed", 42u64)?;
    let paths = resolve(args.paths, file, "paths", 1u64)?;
    let mu = resolve(args.mu, file, "mu", 0.0)?;
    let nu = resolve(args.nu, file, "nu", 0.5)?;
    let rho = resolve(args.rho, file, "rho", 0.0)?;
    let sigma0 = resolve(args.sigma0, file, "sigma0", 0.2)?;
    let a = resolve(args.a, file, "a", 1.0)?;
    let b_level = resolve(args.b_level, file, "b_level", 0.1)?;
    let a1 = resolve(args.a1, file, "a1", 1.0)?;
    let a2 = resolve(args.a2, file, "a2", 1.5)?;
    let b1 = resolve(args.b1, file, "b1", 0.1)?;
    let b2 = resolve(args.b2, file, "b2", -0.1)?;
    let threshold = resolve(args.threshold, file, "threshold", 0.0)?;
    let cutoff = resolve(args.cutoff, file, "cutoff", 4.0)?;
    let mollify = resolve(args.mollify, file, "mollify", 32u32)?;
    let x1 = resolve(args.x1, file, "x1", 1.0)?;
    let x2 = resolve(args.x2, file, "x2", 0.1)?;

    let hp = hurst(h)?;
    let g = grid(t, steps)?;
    let mut cfg = RunConfig::new("simulate-model");
    cfg.put("h", h);
    cfg.put("t", t);
    cfg.put("steps", steps);
    cfg.put("seed", seed);
    cfg.put("paths", paths);
    cfg.put("x1", x1);
    cfg.put("x2", x2);
    let params = build_stock_params(
        &preset, mu, nu, rho, sigma0, a, b_level, a1, a2, b1, b2, threshold, cutoff, mollify,
        &mut cfg,
    )?;

    let sampler = NoiseSampler::new(g, hp, MixSpec::Correlated { rho: params.rho })
        .map_err(lib_err)?;
    let mut sink = Sink::open(args.out.as_deref())?;
    sink.header(&cfg)?;
    let with_path_col = paths > 1;
    sink.line(if with_path_col {
        "path,t,S,sigma,dS_dx1,dS_dx2,dsigma_dx2"
    } else {
        "t,S,sigma,dS_dx1,dS_dx2,dsigma_dx2"
    })?;
    for p in 0..paths {
        let bundle = sampler.sample_path(seed, p);
        let sim = run_model(&params, &bundle, x1, x2).map_err(lib_err)?;
        for i in 0..g.num_nodes() {
            let row = format!(
                "{},{},{},{},{},{}",
                fmt(g.node(i)),
                fmt(sim.stock[i]),
                fmt(sim.sigma[i]),
                fmt(sim.ds_dx1[i]),
                fmt(sim.ds_dx2[i]),
                fmt(sim.dsigma_dx2[i])
            );
            if with_path_col {
                sink.line(&format!("{p},{row}"))?;
            } else {
                sink.line(&row)?;
            }
        }
    }
    Ok(())
}

struct TimedEstimate {
    est: GreeksEstimate,
    runtime_ms: u128,
}

fn component_name(c: Component) -> &'static str {
    match c {
        Component::DeltaX1 => "delta_x1",
        Component::DeltaX2 => "delta_x2",
        Component::DeltaX => "delta_x",
    }
}

fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Bel => "bel",
        Estimator::Fd => "fd",
    }
}

pub fn greeks(args: &GreeksArgs, file: &ConfigMap) -> Result<(), CliError> {
    let model = resolve(args.model.clone(), file, "model", "stock".to_string())?;
    let estimator = resolve(args.estimator.clone(), file, "estimator", "both".to_string())?;
    let paths = resolve(args.paths, file, "paths", 10_000u64)?;
    let steps = resolve(args.steps, file, "steps", 256usize)?;
    let seed = resolve(args.seed, file, "seed", 42u64)?;
    let h = resolve(args.h, file, "h", 0.1)?;
    let t = resolve(args.t, file, "t", 1.0)?;
    let payoff_spec = resolve(args.payoff.clone(), file, "payoff", "call:1.0".to_string())?;
    let format = resolve(args.format.clone(), file, "format", "csv".to_string())?;
    let fd_bump = resolve_opt(args.fd_bump, file, "fd_bump")?;

    let run_bel = matches!(estimator.as_str(), "bel" | "both");
    let run_fd = matches!(estimator.as_str(), "fd" | "both");
    if !(run_bel || run_fd) {
        return Err(CliError::Config(format!(
            "--estimator {estimator}: expected bel | fd | both"
        )));
    }
    let hp = hurst(h)?;
    let g = grid(t, steps)?;
    let payoff = parse_payoff(&payoff_spec)?;
    let weight = WeightFn::uniform(t);

    let mut cfg = RunConfig::new("greeks");
    cfg.put("model", &model);
    cfg.put("estimator", &estimator);
    cfg.put("paths", paths);
    cfg.put("steps", steps);
    cfg.put("seed", seed);
    cfg.put("h", h);
    cfg.put("t", t);
    cfg.put("payoff", &payoff_spec);

    let mut rows: Vec<TimedEstimate> = Vec::new();
    match model.as_str() {
        "sde" => {
            regime_warning(hp, false);
            let drift_spec = resolve(args.drift.clone(), file, "drift", "linear:0.5".to_string())?;
            let mollify = resolve_opt(args.mollify, file, "mollify")?;
            let x = resolve(args.x, file, "x", 1.0)?;
            cfg.put("drift", &drift_spec);
            if let Some(n) = mollify {
                cfg.put("mollify", n);
            }
            cfg.put("x", x);
            let drift = parse_drift(&drift_spec, mollify)?;
            if run_bel {
                let t0 = Instant::now();
                let est = bel_delta_sde(&drift, hp, g, x, &payoff, &weight, paths, seed)
                    .map_err(lib_err)?;
                rows.push(TimedEstimate {
                    est,
                    runtime_ms: t0.elapsed().as_millis(),
                });
            }
            if run_fd {
                let bump = fd_bump.unwrap_or(1e-2 * x.abs().max(1e-2));
                cfg.put("fd_bump", bump);
                let t0 = Instant::now();
                let est = fd_delta_sde(&drift, hp, g, x, &payoff, bump, paths, seed)
                    .map_err(lib_err)?;
                rows.push(TimedEstimate {
                    est,
                    runtime_ms: t0.elapsed().as_millis(),
                });
            }
        }
        "stock" => {
            regime_warning(hp, true);
            let preset = resolve(args.preset.clone(), file, "preset", "regime".to_string())?;
            let mu = resolve(args.mu, file, "mu", 0.0)?;
            let nu = resolve(args.nu, file, "nu", 0.5)?;
            let rho = resolve(args.rho, file, "rho", -0.5)?;
            let sigma0 = resolve(args.sigma0, file, "sigma0", 0.2)?;
            let a = resolve(args.a, file, "a", 1.0)?;
            let b_level = resolve(args.b_level, file, "b_level", 0.1)?;
            let a1 = resolve(args.a1, file, "a1", 1.0)?;
            let a2 = resolve(args.a2, file, "a2", 1.5)?;
            let b1 = resolve(args.b1, file, "b1", 0.1)?;
            let b2 = resolve(args.b2, file, "b2", -0.1)?;
            let threshold = resolve(args.threshold, file, "threshold", 0.0)?;
            let cutoff = resolve(args.cutoff, file, "cutoff", 4.0)?;
            let mollify = resolve(args.mollify, file, "mollify", 32u32)?;
            let x1 = resolve(args.x1, file, "x1", 1.0)?;
            let x2 = resolve(args.x2, file, "x2", 0.1)?;
            cfg.put("x1", x1);
            cfg.put("x2", x2);
            let params = build_stock_params(
                &preset, mu, nu, rho, sigma0, a, b_level, a1, a2, b1, b2, threshold, cutoff,
                mollify, &mut cfg,
            )?;
            if run_bel {
                let t0 = Instant::now();
                let (d1, d2) =
                    bel_greeks_model(&params, hp, g, x1, x2, &payoff, &weight, paths, seed)
                        .map_err(lib_err)?;
                let ms = t0.elapsed().as_millis();
                rows.push(TimedEstimate {
                    est: d1,
                    runtime_ms: ms,
                });
                rows.push(TimedEstimate {
                    est: d2,
                    runtime_ms: ms,
                });
            }
            if run_fd {
                let bumps = fd_bump.map(|b| (b, b));
                if let Some(b) = fd_bump {
                    cfg.put("fd_bump", b);
                }
                let t0 = Instant::now();
                let (d1, d2) = fd_greeks(&params, hp, g, x1, x2, &payoff, bumps, paths, seed)
                    .map_err(lib_err)?;
                let ms = t0.elapsed().as_millis();
                rows.push(TimedEstimate {
                    est: d1,
                    runtime_ms: ms,
                });
                rows.push(TimedEstimate {
                    est: d2,
                    runtime_ms: ms,
                });
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "--model {other}: expected sde | stock"
            )))
        }
    }

    match format.as_str() {
        "csv" => {
            let mut sink = Sink::open(args.out.as_deref())?;
            sink.header(&cfg)?;
            sink.line("component,estimator,value,std_error,n_paths,runtime_ms")?;
            for r in &rows {
                sink.line(&format!(
                    "{},{},{},{},{},{}",
                    component_name(r.est.component),
                    estimator_name(r.est.estimator),
                    fmt(r.est.value),
                    fmt(r.est.std_error),
                    r.est.n_paths,
                    r.runtime_ms
                ))?;
            }
        }
        "json" => {
            #[derive(serde::Serialize)]
            struct JsonRow<'a> {
                component: &'a str,
                estimator: &'a str,
                value: f64,
                std_error: f64,
                n_paths: u64,
                runtime_ms: u128,
            }
            #[derive(serde::Serialize)]
            struct JsonOut<'a> {
                version: &'a str,
                config_sha256: String,
                config: String,
                seed: u64,
                results: Vec<JsonRow<'a>>,
            }
            let out = JsonOut {
                version: env!("CARGO_PKG_VERSION"),
                config_sha256: cfg.hash(),
                config: cfg.canonical(),
                seed,
                results: rows
                    .iter()
                    .map(|r| JsonRow {
                        component: component_name(r.est.component),
                        estimator: estimator_name(r.est.estimator),
                        value: r.est.value,
                        std_error: r.est.std_error,
                        n_paths: r.est.n_paths,
                        runtime_ms: r.runtime_ms,
                    })
                    .collect(),
            };
            let text = serde_json::to_string_pretty(&out)
                .map_err(|e| CliError::Numerical(format!("json encoding failed: {e}")))?;
            let mut sink = Sink::open(args.out.as_deref())?;
            sink.line(&text)?;
        }
        other => {
            return Err(CliError::Config(format!(
                "--format {other}: expected csv | json"
            )))
        }
    }
    Ok(())
}

pub fn stability(args: &StabilityArgs, file: &ConfigMap) -> Result<(), CliError> {
    let p = resolve(args.p, file, "p", 2u32)?;
    if !p.is_power_of_two() {
        return Err(CliError::Config(format!(
            "--p {p}: moment order must be a power of two"
        )));
    }
    let gaps_spec = resolve(args.gaps.clone(), file, "gaps", "0.1,0.01,0.001".to_string())?;
    let gaps: Result<Vec<f64>, _> = gaps_spec.split(',').map(str::parse).collect();
    let gaps = gaps.map_err(|_| CliError::Config(format!("--gaps {gaps_spec}: bad number")))?;
    let drift_spec = resolve(
        args.drift.clone(),
        file,
        "drift",
        "regime:0.8,1.2,0.1,-0.1,0.0".to_string(),
    )?;
    let h = resolve(args.h, file, "h", 0.1)?;
    let t = resolve(args.t, file, "t", 1.0)?;
    let steps = resolve(args.steps, file, "steps", 256usize)?;
    let seed = resolve(args.seed, file, "seed", 42u64)?;
    let paths = resolve(args.paths, file, "paths", 10_000u64)?;
    let base_x = resolve(args.base_x, file, "base_x", 0.0)?;
    let cube_spec = resolve(args.cube.clone(), file, "cube", "-2.0,2.0".to_string())?;
    let cube_parts: Result<Vec<f64>, _> = cube_spec.split(',').map(str::parse).collect();
    let cube_parts =
        cube_parts.map_err(|_| CliError::Config(format!("--cube {cube_spec}: bad number")))?;
    if cube_parts.len() != 2 {
        return Err(CliError::Config("--cube expects lo,hi".into()));
    }
    let mix_spec = resolve(args.mix.clone(), file, "mix", "scaled:1.0,1.0".to_string())?;

    let drift = parse_drift(&drift_spec, None)?;
    let mix = parse_mix(&mix_spec)?;
    let hp = hurst(h)?;
    let g = grid(t, steps)?;

    let mut cfg = RunConfig::new("stability");
    cfg.put("p", p);
    cfg.put("gaps", &gaps_spec);
    cfg.put("drift", &drift_spec);
    cfg.put("h", h);
    cfg.put("t", t);
    cfg.put("steps", steps);
    cfg.put("seed", seed);
    cfg.put("paths", paths);
    cfg.put("base_x", base_x);
    cfg.put("cube", &cube_spec);
    cfg.put("mix", &mix_spec);

    let scan = StabilityScan::new(
        drift,
        hp,
        p.trailing_zeros(),
        base_x,
        (cube_parts[0], cube_parts[1]),
        gaps,
        mix,
        g,
        paths,
        seed,
    )
    .map_err(lib_err)?;
    let report = stability_scan(&scan).map_err(lib_err)?;

    let mut sink = Sink::open(args.out.as_deref())?;
    sink.header(&cfg)?;
    sink.line("gap,moment,stderr")?;
    for row in &report.rows {
        sink.line(&format!(
            "{},{},{}",
            fmt(row.gap),
            fmt(row.moment),
            fmt(row.std_error)
        ))?;
    }
    sink.line(&format!(
        "# slope={} slope_stderr={} target_p={}",
        fmt(report.slope),
        fmt(report.slope_std_error),
        fmt(report.moment_order)
    ))?;
    Ok(())
}
