//! Subcommand implementations. Each returns the full text of its output.

use std::fmt::Write as _;
use std::path::Path;

use blocklength::bounds::{self, BoundReport};
use blocklength::limits::{
    epsilon_profile_pair, epsilon_star_pair_bruteforce, epsilon_star_prefix_from, length_law,
    markov_epsilon_profile_bruteforce, rate_from_profile, Method, TypeClassOptions,
};
use blocklength::markov::{berry_esseen_probe, build_z_chain, markov_rates};
use blocklength::measures::{h_n_sigma_n, measures};
use blocklength::model::{parse_unchecked, validate};
use blocklength::prob::rational_to_f64;
use blocklength::{CondIidModel, MarkovPairModel, SourceModel};
use rayon::prelude::*;

use crate::config::{Command, RunConfig, ScopeArg, YPattern};
use crate::output::{num, Table};
use crate::{CliError, Outcome, EXIT_OK};

/// Side strings enumerated by the pair-scope brute-force oracle.
const PAIR_Y_BUDGET: u64 = 1 << 12;

const FIG1_MODEL: &str = include_str!("../../../corpus/fig1.json");

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    let config = command.config();
    config.check()?;
    let text = match command {
        Command::Validate(c) => return cmd_validate(c),
        Command::Measures(c) => cmd_measures(c)?,
        Command::Limits(c) => cmd_limits(c)?,
        Command::Bounds(c) => cmd_bounds(c)?,
        Command::Figure1(c) => cmd_figure1(c)?,
        Command::Markov(c) => cmd_markov(c)?,
        Command::Verify(c) => return crate::verify::cmd_verify(c),
    };
    Ok(Outcome { text, code: EXIT_OK })
}

/// Parses and fully validates a model file.
pub fn load(path: &Path) -> Result<SourceModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let model = parse_unchecked(&text)?;
    let report = validate(&model);
    if let Some(issue) = report.errors().next() {
        return Err(CliError::invalid(format!("{}: {}", path.display(), issue.message)));
    }
    Ok(model)
}

fn require_model(config: &RunConfig) -> Result<SourceModel, CliError> {
    let path = config.model.as_ref().ok_or_else(|| CliError::usage("--model is required"))?;
    load(path)
}

fn cmd_validate(config: &RunConfig) -> Result<Outcome, CliError> {
    let path = config.model.as_ref().ok_or_else(|| CliError::usage("--model is required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let model = match parse_unchecked(&text) {
        Ok(m) => m,
        Err(e) => {
            return Ok(Outcome {
                text: format!("INVALID {}\nerror: {e}\n", path.display()),
                code: crate::EXIT_INVALID,
            })
        }
    };
    let report = validate(&model);
    let mut out = String::new();
    let status = if report.ok() { "OK" } else { "INVALID" };
    writeln!(out, "{status} {}", path.display()).unwrap();
    writeln!(out, "kind={}", model.kind()).unwrap();
    for issue in &report.issues {
        let severity = match issue.severity {
            blocklength::model::Severity::Error => "error",
            blocklength::model::Severity::Warning => "warning",
        };
        writeln!(out, "{severity}: {}", issue.message).unwrap();
    }
    let code = if report.ok() { EXIT_OK } else { crate::EXIT_INVALID };
    Ok(Outcome { text: out, code })
}

fn kv(out: &mut String, key: &str, value: f64) {
    writeln!(out, "{key}={}", num(value)).unwrap();
}

fn cmd_measures(config: &RunConfig) -> Result<String, CliError> {
    let mut out = String::new();
    match require_model(config)? {
        SourceModel::CondIid(m) => {
            if m.p_y().is_some() {
                let s = measures(&m)?;
                kv(&mut out, "h_xy", s.h_xy);
                kv(&mut out, "h_x", s.h_x);
                kv(&mut out, "sigma2", s.sigma2);
                kv(&mut out, "ev", s.ev);
                kv(&mut out, "var_hhat", s.var_hhat);
                kv(&mut out, "dispersion_gap", s.sigma2 - s.ev);
                kv(&mut out, "m3", s.m3);
                kv(&mut out, "mu3_pair", s.mu3_pair);
                kv(&mut out, "psi2", s.psi2);
            }
            let profile = blocklength::measures::per_y_profile(&m);
            for y in 0..m.y_size() {
                let label = m.y_alphabet().label(y);
                kv(&mut out, &format!("h[{label}]"), profile.entropy[y]);
                kv(&mut out, &format!("v[{label}]"), profile.varentropy[y]);
                kv(&mut out, &format!("m3[{label}]"), profile.third_moment[y]);
            }
            if let Some(text) = &config.y {
                let pattern = YPattern::parse(text, m.y_alphabet())?;
                let n = pattern.natural_len().or(config.n).ok_or_else(|| {
                    CliError::usage("a blocklength is required for a repeat pattern")
                })?;
                let y = pattern.take(config.n.unwrap_or(n), m.y_alphabet())?;
                let s = h_n_sigma_n(&m, &y);
                writeln!(out, "n={}", y.len()).unwrap();
                kv(&mut out, "h_n", s.h_n);
                kv(&mut out, "sigma2_n", s.sigma2_n);
            }
        }
        SourceModel::MarkovPair(m) => write_markov_analysis(&mut out, &m)?,
    }
    Ok(out)
}

fn write_markov_analysis(out: &mut String, model: &MarkovPairModel) -> Result<(), CliError> {
    let a = markov_rates(model)?;
    writeln!(out, "order={}", model.order()).unwrap();
    writeln!(out, "z_states={}", build_z_chain(model)?.len()).unwrap();
    kv(out, "h_rate", a.h_rate);
    kv(out, "sigma2_rate", a.sigma2_rate);
    kv(out, "delta", a.delta);
    kv(out, "markovianity_defect", a.markovianity_defect);
    Ok(())
}

/// A resolved computation scope.
enum Target {
    Ref(YPattern),
    Pair,
}

fn target(config: &RunConfig, model: &CondIidModel) -> Result<Target, CliError> {
    let wants_ref = match config.scope {
        ScopeArg::Ref => true,
        ScopeArg::Pair => false,
        ScopeArg::Auto | ScopeArg::Prefix => config.y.is_some(),
    };
    if wants_ref {
        let text = config.y.as_ref().ok_or_else(|| CliError::usage("--y is required for the reference scope"))?;
        Ok(Target::Ref(YPattern::parse(text, model.y_alphabet())?))
    } else {
        model.require_p_y()?;
        Ok(Target::Pair)
    }
}

/// Excess-rate profile `eps*(n, 0..=k_max)` and the method that produced it.
fn cond_profile(
    model: &CondIidModel,
    target: &Target,
    n: usize,
    method: Method,
) -> Result<(Vec<f64>, Method), CliError> {
    match target {
        Target::Ref(pattern) => {
            let y = pattern.take(n, model.y_alphabet())?;
            let resolved = method.resolve(model.x_size(), n);
            Ok((length_law(model, &y, resolved)?.epsilon_profile(), resolved))
        }
        Target::Pair => match method {
            Method::Bruteforce => {
                let exact = epsilon_star_pair_bruteforce(model, n, PAIR_Y_BUDGET)?;
                Ok((exact.iter().map(rational_to_f64).collect(), Method::Bruteforce))
            }
            _ => Ok((epsilon_profile_pair(model, n, &TypeClassOptions::default())?, Method::Typeclass)),
        },
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Auto => "auto",
        Method::Bruteforce => "bruteforce",
        Method::Typeclass => "typeclass",
    }
}

fn cmd_limits(config: &RunConfig) -> Result<String, CliError> {
    let model = require_model(config)?;
    let prefix = config.scope == ScopeArg::Prefix;
    let (ns, scope_name, x_size) = match &model {
        SourceModel::CondIid(m) => {
            let t = target(config, m)?;
            let fallback = match &t {
                Target::Ref(p) => p.natural_len(),
                Target::Pair => None,
            };
            let name = match (&t, prefix) {
                (Target::Ref(_), false) => "ref",
                (Target::Pair, false) => "pair",
                (Target::Ref(_), true) => "prefix_ref",
                (Target::Pair, true) => "prefix_pair",
            };
            (config.blocklengths(fallback)?, name, m.x_size())
        }
        SourceModel::MarkovPair(m) => {
            if config.y.is_some() || config.scope == ScopeArg::Ref {
                return Err(CliError::usage("markov models support the pair scope only"));
            }
            let name = if prefix { "prefix_pair" } else { "pair" };
            (config.blocklengths(None)?, name, m.x_size())
        }
    };

    let rows: Vec<Result<Vec<Vec<String>>, CliError>> = ns
        .par_iter()
        .map(|&n| {
            let (profile, method) = match &model {
                SourceModel::CondIid(m) => cond_profile(m, &target(config, m)?, n, config.method)?,
                SourceModel::MarkovPair(m) => {
                    if config.method == Method::Typeclass {
                        return Err(CliError::usage("markov models are computed by enumeration only"));
                    }
                    (markov_epsilon_profile_bruteforce(m, n)?, Method::Bruteforce)
                }
            };
            let profile = if prefix {
                (0..=profile.len())
                    .map(|k| if k == 0 { Ok(1.0) } else { epsilon_star_prefix_from(&profile, n, x_size, k) })
                    .collect::<Result<Vec<f64>, _>>()?
            } else {
                profile
            };
            let quantity = if prefix { "epsilon_star_prefix" } else { "epsilon_star" };
            let rate_quantity = if prefix { "rate_star_prefix" } else { "rate_star" };
            let ks: Vec<usize> = if config.k.is_empty() && config.eps.is_empty() {
                (0..profile.len()).collect()
            } else {
                config.k.clone()
            };
            let mut out = Vec::new();
            let row = |q: &str, key: String, v: f64| {
                vec![n.to_string(), q.to_string(), key, num(v), method_name(method).into(), scope_name.into()]
            };
            for &k in &ks {
                out.push(row(quantity, k.to_string(), profile.get(k).copied().unwrap_or(0.0)));
            }
            for &eps in &config.eps {
                let r = rate_from_profile(n, &profile, eps)?;
                out.push(row(rate_quantity, num(eps), r.rate));
            }
            Ok(out)
        })
        .collect();

    let mut table = Table::new(&["n", "quantity", "k_or_eps", "value", "method", "scope"])?;
    for chunk in rows {
        for r in chunk? {
            table.row(r)?;
        }
    }
    table.finish()
}

fn constants_field(report: &BoundReport) -> String {
    report
        .constants
        .iter()
        .map(|(k, v)| format!("{k}={}", num(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

fn bound_row(table: &mut Table, r: &BoundReport) -> Result<(), CliError> {
    table.row([
        r.kind.name().to_string(),
        r.n.to_string(),
        num(r.epsilon),
        num(r.value),
        num(r.n_threshold),
        r.valid.to_string(),
        constants_field(r),
    ])
}

fn cmd_bounds(config: &RunConfig) -> Result<String, CliError> {
    let model = require_model(config)?;
    if config.eps.is_empty() {
        return Err(CliError::usage("--eps is required"));
    }
    let prefix = config.scope == ScopeArg::Prefix;
    let header = ["kind", "n", "epsilon", "value", "threshold", "valid", "constants"];
    let mut table = Table::new(&header)?;
    match &model {
        SourceModel::CondIid(m) => {
            let t = target(config, m)?;
            let fallback = match &t {
                Target::Ref(p) => p.natural_len(),
                Target::Pair => None,
            };
            let ns = config.blocklengths(fallback)?;
            let jobs: Vec<(usize, f64)> =
                ns.iter().flat_map(|&n| config.eps.iter().map(move |&e| (n, e))).collect();
            let results: Vec<Result<Vec<BoundReport>, CliError>> = jobs
                .par_iter()
                .map(|&(n, eps)| {
                    let (lower, upper) = match &t {
                        Target::Ref(p) => {
                            let y = p.take(n, m.y_alphabet())?;
                            (bounds::ref_converse(m, &y, eps)?, bounds::ref_achievability(m, &y, eps)?)
                        }
                        Target::Pair => {
                            (bounds::pair_converse(m, n, eps)?, bounds::pair_achievability(m, n, eps)?)
                        }
                    };
                    let upper = if prefix { upper.prefix_free() } else { upper };
                    Ok(vec![lower, upper])
                })
                .collect();
            let exact: Vec<Option<f64>> = jobs
                .par_iter()
                .map(|&(n, eps)| exact_rate(m, &t, n, eps, prefix, config.method).ok())
                .collect();
            for ((&(n, eps), reports), exact) in jobs.iter().zip(results).zip(exact) {
                let reports = reports?;
                for r in &reports {
                    bound_row(&mut table, r)?;
                }
                if let Some(rate) = exact {
                    let bracket = reports[0].value <= rate + 1e-12 && rate <= reports[1].value + 1e-12;
                    let valid = reports.iter().all(|r| r.valid);
                    table.row(["r_star".into(), n.to_string(), num(eps), num(rate), String::new(), "true".into(), String::new()])?;
                    table.row([
                        "bracket".into(),
                        n.to_string(),
                        num(eps),
                        if bracket { "1".into() } else { "0".into() },
                        String::new(),
                        valid.to_string(),
                        String::new(),
                    ])?;
                }
            }
        }
        SourceModel::MarkovPair(m) => {
            let a = config.a.ok_or_else(|| CliError::usage("--A is required for markov bounds"))?;
            let analysis = markov_rates(m)?;
            for n in config.blocklengths(None)? {
                for &eps in &config.eps {
                    let (achiev, converse) = bounds::markov_bounds(&analysis, n, eps, a)?;
                    bound_row(&mut table, &converse)?;
                    bound_row(&mut table, &achiev)?;
                }
            }
        }
    }
    table.finish()
}

fn exact_rate(
    model: &CondIidModel,
    target: &Target,
    n: usize,
    eps: f64,
    prefix: bool,
    method: Method,
) -> Result<f64, CliError> {
    let (profile, _) = cond_profile(model, target, n, method)?;
    let profile = if prefix {
        (0..=profile.len())
            .map(|k| if k == 0 { Ok(1.0) } else { epsilon_star_prefix_from(&profile, n, model.x_size(), k) })
            .collect::<Result<Vec<f64>, _>>()?
    } else {
        profile
    };
    Ok(rate_from_profile(n, &profile, eps)?.rate)
}

fn cmd_figure1(config: &RunConfig) -> Result<String, CliError> {
    let model = match &config.model {
        Some(path) => load(path)?,
        None => SourceModel::from_json_str(FIG1_MODEL)?,
    };
    let m = model.as_cond_iid()?;
    let pattern = YPattern::parse(config.y.as_deref().unwrap_or("repeat:001"), m.y_alphabet())?;
    let eps = match config.eps.as_slice() {
        [] => 0.1,
        [e] => *e,
        _ => return Err(CliError::usage("figure1 takes a single epsilon")),
    };
    let ns = match (config.n, config.n_range) {
        (None, None) => (1..=500).collect(),
        _ => config.blocklengths(None)?,
    };
    let rows: Vec<Result<Vec<String>, CliError>> = ns
        .par_iter()
        .map(|&n| {
            let y = pattern.take(n, m.y_alphabet())?;
            let law = length_law(m, &y, config.method.resolve(m.x_size(), n))?;
            let rate = rate_from_profile(n, &law.epsilon_profile(), eps)?;
            let s = h_n_sigma_n(m, &y);
            let approx = bounds::normal_approximation(s.h_n, s.sigma2_n, n, eps)?;
            let (lower, upper) = if s.degenerate {
                (None, None)
            } else {
                (Some(bounds::ref_converse(m, &y, eps)?), Some(bounds::ref_achievability(m, &y, eps)?))
            };
            let value = |r: &Option<BoundReport>| r.as_ref().map_or("nan".into(), |r| num(r.value));
            let valid = |r: &Option<BoundReport>| r.as_ref().is_some_and(|r| r.valid).to_string();
            Ok(vec![
                n.to_string(),
                rate.k.to_string(),
                num(rate.rate),
                num(approx),
                value(&lower),
                value(&upper),
                valid(&lower),
                valid(&upper),
            ])
        })
        .collect();
    let mut table = Table::new(&[
        "n",
        "k",
        "r_star_exact",
        "normal_approx",
        "ref_converse",
        "ref_achiev",
        "converse_valid",
        "achiev_valid",
    ])?;
    for r in rows {
        table.row(r?)?;
    }
    table.finish()
}

fn cmd_markov(config: &RunConfig) -> Result<String, CliError> {
    let model = match require_model(config)? {
        SourceModel::MarkovPair(m) => m,
        SourceModel::CondIid(m) => MarkovPairModel::from_cond_iid(&m)?,
    };
    let mut out = String::new();
    write_markov_analysis(&mut out, &model)?;
    if !config.probe.is_empty() {
        let trials = config.trials.unwrap_or(10_000);
        let report = berry_esseen_probe(&model, &config.probe, trials, config.seed)?;
        kv(&mut out, "fitted_constant", report.fitted_constant);
        writeln!(out, "non_increasing={}", report.non_increasing).unwrap();
        let mut table = Table::new(&["n", "kolmogorov", "kolmogorov_sqrt_n", "noise"])?;
        for r in &report.rows {
            table.row([r.n.to_string(), num(r.kolmogorov), num(r.kolmogorov_sqrt_n), num(r.noise)])?;
        }
        out.push_str(&table.finish()?);
    }
    Ok(out)
}
