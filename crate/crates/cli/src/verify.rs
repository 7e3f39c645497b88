//! Property suite over a corpus of model files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use blocklength::bounds;
use blocklength::code::{build_prefix_code, check_counting_sandwich, check_pointwise_achievability};
use blocklength::limits::{
    check_general_converse, epsilon_profile_pair, epsilon_profile_pair_exact, epsilon_star_bruteforce,
    epsilon_star_pair_bruteforce, length_law_typeclass, length_law_typeclass_with,
    markov_epsilon_profile_bruteforce, rate_from_profile, ConverseScope, TypeClassOptions,
};
use blocklength::markov::{markov_rates, simulate_paths, DensityEvaluator};
use blocklength::measures::measures;
use blocklength::prob::rational_to_f64;
use blocklength::{CondIidModel, MarkovPairModel, SideInfoString, SourceModel};
use num_traits::{One, Zero};

use crate::commands::load;
use crate::config::RunConfig;
use crate::{CliError, Outcome, EXIT_INVALID, EXIT_OK, EXIT_VERIFY};

/// Largest `|X|^n` enumerated by the small-blocklength checks.
const SMALL_STRINGS: usize = 1 << 10;
/// Largest `|Y|^n` for the pair-scope oracle and converse checks.
const SMALL_SIDES: usize = 1 << 6;
const TAU_GRID: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
/// Bracketing is attempted when both thresholds fall below this blocklength.
const BRACKET_MAX_N: usize = 600;
const BRACKET_EPS: f64 = 0.1;
const PATHS: usize = 2000;
const PATH_LEN: usize = 40;

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Log {
    checks: Vec<Check>,
}

impl Log {
    fn record(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    fn attempt(&mut self, name: &str, result: Result<(bool, String), blocklength::Error>) {
        match result {
            Ok((pass, detail)) => self.record(name, pass, detail),
            Err(e) => self.record(name, false, format!("error: {e}")),
        }
    }
}

pub fn cmd_verify(config: &RunConfig) -> Result<Outcome, CliError> {
    let dir = config
        .model
        .as_ref()
        .ok_or_else(|| CliError::usage("--model must name a corpus directory"))?;
    let files = corpus_files(dir)?;
    let tau_grid = if config.tau.is_empty() { TAU_GRID.to_vec() } else { config.tau.clone() };
    if tau_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(CliError::usage("--tau values must be positive"));
    }
    let mut out = String::new();
    let (mut failed, mut invalid) = (0usize, 0usize);
    for path in &files {
        let name = path.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let model = match load(path) {
            Ok(m) => m,
            Err(e) => {
                invalid += 1;
                writeln!(out, "INVALID {name}: {e}").unwrap();
                continue;
            }
        };
        let log = match &model {
            SourceModel::CondIid(m) => verify_cond_iid(m, config.seed, &tau_grid),
            SourceModel::MarkovPair(m) => verify_markov(m, config.seed),
        };
        for c in &log.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            writeln!(out, "{status} {name} {}: {}", c.name, c.detail).unwrap();
        }
        failed += log.checks.iter().filter(|c| !c.pass).count();
    }
    writeln!(out, "summary: {} models, {failed} failed checks, {invalid} invalid models", files.len()).unwrap();
    let code = if failed > 0 {
        EXIT_VERIFY
    } else if invalid > 0 {
        EXIT_INVALID
    } else {
        EXIT_OK
    };
    Ok(Outcome { text: out, code })
}

fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::usage(format!("corpus {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::usage(format!("corpus {} has no model files", dir.display())));
    }
    Ok(files)
}

/// Blocklengths with `|X|^n <= SMALL_STRINGS`, at most 8.
fn small_ns(x_size: usize) -> Vec<usize> {
    (1..=8).take_while(|&n| x_size.checked_pow(n as u32).is_some_and(|t| t <= SMALL_STRINGS)).collect()
}

/// Side strings exercised at blocklength `n`: every constant string and
/// the cyclic ramp `0,1,..,|Y|-1,0,..`.
fn side_strings(model: &CondIidModel, n: usize) -> Vec<SideInfoString> {
    let ys = model.y_size();
    let mut out: Vec<Vec<usize>> = (0..ys).map(|a| vec![a; n]).collect();
    if ys > 1 {
        out.push((0..n).map(|i| i % ys).collect());
    }
    out.into_iter()
        .map(|s| SideInfoString::new(s, model.y_alphabet()).expect("symbols in range"))
        .collect()
}

fn verify_cond_iid(model: &CondIidModel, seed: u64, tau_grid: &[f64]) -> Log {
    let mut log = Log::default();
    let has_p_y = model.p_y().is_some();

    if has_p_y {
        log.attempt(
            "decomposition",
            measures(model).map(|s| {
                let gap = (s.sigma2 - s.ev - s.var_hhat).abs();
                (gap <= 1e-12 && s.var_hhat >= 0.0, format!("|sigma2 - EV - VAR| = {gap:.3e}"))
            }),
        );
    }

    let ns = small_ns(model.x_size());
    log.attempt("oracle_ref", oracle_ref(model, &ns));
    if has_p_y {
        let pair_ns: Vec<usize> = ns
            .iter()
            .copied()
            .filter(|&n| model.y_size().checked_pow(n as u32).is_some_and(|t| t <= SMALL_SIDES))
            .take(5)
            .collect();
        log.attempt("oracle_pair", oracle_pair(model, &pair_ns));
    }
    log.attempt("prefix_identity", prefix_identity(model, &ns));
    log.attempt("pointwise_achievability", pointwise(model, &ns));
    log.attempt("counting_sandwich", sandwich(model, &ns));
    log.attempt("general_converse", converse(model, &ns, tau_grid));
    if has_p_y {
        bracketing(model, &mut log);
        match MarkovPairModel::from_cond_iid(model) {
            Ok(m) => markov_checks(&m, seed, Some(model), &mut log),
            Err(e) => log.record("markov_embedding", false, format!("error: {e}")),
        }
    }
    log
}

fn oracle_ref(model: &CondIidModel, ns: &[usize]) -> Result<(bool, String), blocklength::Error> {
    let mut compared = 0;
    for &n in ns {
        for y in side_strings(model, n) {
            let oracle = epsilon_star_bruteforce(model, &y)?;
            let exact = length_law_typeclass_with(model, &y, &TypeClassOptions { exact: Some(true), ..Default::default() })?
                .epsilon_profile_exact()
                .expect("exact track requested");
            let float = length_law_typeclass(model, &y)?.epsilon_profile();
            for (k, e) in oracle.iter().enumerate() {
                let t = exact.get(k).cloned().unwrap_or_else(Zero::zero);
                let f = float.get(k).copied().unwrap_or(0.0);
                if &t != e || (f - rational_to_f64(e)).abs() > 1e-9 {
                    return Ok((false, format!("n={n} y={:?} k={k}", y.symbols())));
                }
                compared += 1;
            }
        }
    }
    Ok((true, format!("{compared} values agree")))
}

fn oracle_pair(model: &CondIidModel, ns: &[usize]) -> Result<(bool, String), blocklength::Error> {
    let mut compared = 0;
    for &n in ns {
        let oracle = epsilon_star_pair_bruteforce(model, n, u64::MAX)?;
        let exact = epsilon_profile_pair_exact(model, n)?;
        let float = epsilon_profile_pair(model, n, &TypeClassOptions::default())?;
        for (k, e) in oracle.iter().enumerate() {
            let t = exact.get(k).cloned().unwrap_or_else(Zero::zero);
            let f = float.get(k).copied().unwrap_or(0.0);
            if &t != e || (f - rational_to_f64(e)).abs() > 1e-9 {
                return Ok((false, format!("n={n} k={k}")));
            }
            compared += 1;
        }
    }
    Ok((true, format!("{compared} values agree")))
}

fn prefix_identity(model: &CondIidModel, ns: &[usize]) -> Result<(bool, String), blocklength::Error> {
    let mut compared = 0;
    for &n in ns.iter().take(6) {
        for y in side_strings(model, n) {
            let profile = epsilon_star_bruteforce(model, &y)?;
            for k in 1..profile.len() {
                if !blocklength::limits::below_support_bits(k, n, model.x_size()) {
                    break;
                }
                let code = build_prefix_code(model, &y, k)?;
                let kraft_ok = code.kraft_sum() <= One::one();
                if !kraft_ok || !code.is_prefix_free() || code.excess_probability(k + 1) != profile[k] {
                    return Ok((false, format!("n={n} y={:?} k={k}", y.symbols())));
                }
                compared += 1;
            }
        }
    }
    Ok((true, format!("{compared} codes checked")))
}

fn pointwise(model: &CondIidModel, ns: &[usize]) -> Result<(bool, String), blocklength::Error> {
    let mut worst = f64::NEG_INFINITY;
    for &n in ns {
        for y in side_strings(model, n) {
            worst = worst.max(check_pointwise_achievability(model, &y)?);
        }
    }
    Ok((worst <= 1e-9, format!("max slack {worst:.3e}")))
}

fn sandwich(model: &CondIidModel, ns: &[usize]) -> Result<(bool, String), blocklength::Error> {
    let mut rows = 0;
    for &n in ns {
        for y in side_strings(model, n) {
            for row in check_counting_sandwich(model, &y)? {
                if !row.holds() {
                    return Ok((false, format!("n={n} x index {}", row.x_index)));
                }
                rows += 1;
            }
        }
    }
    Ok((true, format!("{rows} strings")))
}

fn converse(model: &CondIidModel, ns: &[usize], tau_grid: &[f64]) -> Result<(bool, String), blocklength::Error> {
    let mut scopes = Vec::new();
    for &n in ns.iter().take(5) {
        for y in side_strings(model, n) {
            scopes.push((n, ConverseScope::Reference(y)));
        }
        let sides = model.y_size().checked_pow(n as u32).is_some_and(|t| t <= SMALL_SIDES);
        if model.p_y().is_some() && sides && n <= 4 {
            scopes.push((n, ConverseScope::Pair(n)));
        }
    }
    let mut points = 0;
    for (n, scope) in &scopes {
        let kmax = (*n as f64 * (model.x_size() as f64).log2()).ceil() as usize + 1;
        for k in 0..=kmax {
            let report = check_general_converse(model, scope, k, tau_grid)?;
            if !report.holds {
                return Ok((false, format!("n={n} k={k}")));
            }
            points += report.points.len();
        }
    }
    Ok((true, format!("{points} (k, tau) points")))
}

/// Pair-scope bracket at the smallest blocklength above both thresholds,
/// when that blocklength is small enough to compute exactly.
fn bracketing(model: &CondIidModel, log: &mut Log) {
    let probe = match (
        bounds::pair_converse(model, 1, BRACKET_EPS),
        bounds::pair_achievability(model, 1, BRACKET_EPS),
    ) {
        (Ok(l), Ok(u)) => l.n_threshold.max(u.n_threshold),
        // Degenerate models have no Gaussian bounds.
        _ => return,
    };
    if !probe.is_finite() || probe >= BRACKET_MAX_N as f64 || model.y_size() > 2 {
        return;
    }
    let n = probe.floor() as usize + 1;
    let result = (|| {
        let lower = bounds::pair_converse(model, n, BRACKET_EPS)?;
        let upper = bounds::pair_achievability(model, n, BRACKET_EPS)?;
        let profile = epsilon_profile_pair(model, n, &TypeClassOptions::default())?;
        let rate = rate_from_profile(n, &profile, BRACKET_EPS)?.rate;
        let pass = lower.valid && upper.valid && lower.value <= rate && rate <= upper.value;
        Ok((pass, format!("n={n}: {:.6} <= {rate:.6} <= {:.6}", lower.value, upper.value)))
    })();
    log.attempt("pair_bracketing", result);
}

fn verify_markov(model: &MarkovPairModel, seed: u64) -> Log {
    let mut log = Log::default();
    markov_checks(model, seed, None, &mut log);
    let result = (|| {
        let n = 3;
        let profile = markov_epsilon_profile_bruteforce(model, n)?;
        let monotone = profile.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let ends = (profile[0] - 1.0).abs() <= 1e-9 && profile.last().is_some_and(|&e| e.abs() <= 1e-12);
        Ok((monotone && ends, format!("n={n}, {} thresholds", profile.len())))
    })();
    log.attempt("profile_shape", result);
    log
}

fn markov_checks(model: &MarkovPairModel, seed: u64, iid: Option<&CondIidModel>, log: &mut Log) {
    let analysis = match markov_rates(model) {
        Ok(a) => a,
        Err(e) => {
            log.record("markov_rates", false, format!("error: {e}"));
            return;
        }
    };
    let finite = analysis.h_rate.is_finite() && analysis.sigma2_rate >= 0.0 && analysis.delta.is_finite();
    log.record(
        "markov_rates",
        finite,
        format!("H={:.9} sigma2={:.9} delta={:.6}", analysis.h_rate, analysis.sigma2_rate, analysis.delta),
    );
    if let Some(iid) = iid {
        log.attempt(
            "markov_embedding",
            measures(iid).map(|s| {
                let dh = (s.h_xy - analysis.h_rate).abs();
                let ds = (s.sigma2 - analysis.sigma2_rate).abs();
                (dh <= 1e-9 && ds <= 1e-9, format!("|dH|={dh:.2e} |dsigma2|={ds:.2e}"))
            }),
        );
    }
    let result = (|| {
        let eval = DensityEvaluator::new(model)?;
        let d = model.order();
        let mut worst = 0.0f64;
        for path in simulate_paths(model, PATH_LEN + d, PATHS, seed)? {
            let gap = (eval.density(&path[..PATH_LEN])? - eval.block_sum(&path)).abs();
            worst = worst.max(gap);
        }
        Ok((worst <= analysis.delta + 1e-9, format!("max gap {worst:.6} over {PATHS} paths")))
    })();
    log.attempt("boundary_bound", result);
}
