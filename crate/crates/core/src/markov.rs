//! Markov pair sources: the block function, the overlapping-block chain,
//! entropy and varentropy rates, the boundary bound `delta`, and Monte Carlo
//! support.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::FiniteChain;
use crate::error::{Error, Result};
use crate::gaussian::big_phi;
use crate::model::{derive_y_chain, MarkovPairModel, YChain};

/// Trials simulated per parallel block (each block has its own stream).
const TRIAL_BLOCK: usize = 1024;

/// Log-probability tables shared by the density, block function and bound.
#[derive(Clone, Debug)]
struct LogTables {
    /// `log2 P(s | pair context)`.
    pair: Vec<Vec<f64>>,
    /// `log2 P(y | y context)` from the derived side chain.
    side: Vec<Vec<f64>>,
    /// `log2 P(y_1^d) - log2 P(s_1^d)` under the initial law, per context.
    start: Vec<f64>,
}

impl LogTables {
    fn new(model: &MarkovPairModel, ychain: &YChain) -> Result<Self> {
        let pair = model
            .transition_rows()
            .iter()
            .map(|row| row.iter().map(|p| p.value().log2()).collect())
            .collect();
        let side = ychain
            .transition
            .iter()
            .map(|row| row.iter().map(|p| p.log2()).collect())
            .collect();
        let init = model.initial_law()?;
        let mut y_init = vec![0.0; ychain.context_prob.len()];
        for (c, &p) in init.iter().enumerate() {
            y_init[model.y_context_of(c)] += p;
        }
        let start = init
            .iter()
            .enumerate()
            .map(|(c, &p)| y_init[model.y_context_of(c)].log2() - p.log2())
            .collect();
        Ok(LogTables { pair, side, start })
    }

    /// `f` for the pair `s` following `context`.
    fn f(&self, model: &MarkovPairModel, context: usize, s: usize) -> f64 {
        let y = s % model.y_size();
        self.side[model.y_context_of(context)][y] - self.pair[context][s]
    }
}

/// Overlapping `(d+1)`-blocks of a pair chain, restricted to blocks of
/// positive stationary probability.
#[derive(Clone, Debug)]
pub struct ZChain {
    /// Block index (`context * |X||Y| + next pair`) of each retained state.
    pub states: Vec<usize>,
    pub chain: FiniteChain,
    pub stationary: Vec<f64>,
}

impl ZChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Builds the block chain: `(s_1..s_{d+1}) -> (s_2..s_{d+2})` with
/// probability `P(s_{d+2} | s_2..s_{d+1})`.
pub fn build_z_chain(model: &MarkovPairModel) -> Result<ZChain> {
    let pi = model.stationary_contexts()?;
    let m = model.pair_size();
    let mut index = vec![usize::MAX; model.context_count() * m];
    let mut states = Vec::new();
    for (c, &pc) in pi.iter().enumerate() {
        for s in 0..m {
            if pc > 0.0 && model.transition(c, s).value() > 0.0 {
                index[c * m + s] = states.len();
                states.push(c * m + s);
            }
        }
    }
    let rows = states
        .iter()
        .map(|&z| {
            let next_context = model.next_context(z / m, z % m);
            (0..m)
                .filter_map(|s| {
                    let p = model.transition(next_context, s).value();
                    let j = index[next_context * m + s];
                    (p > 0.0 && j != usize::MAX).then_some((j, p))
                })
                .collect()
        })
        .collect();
    let chain = FiniteChain::new(rows);
    let stationary = chain.stationary()?;
    Ok(ZChain { states, chain, stationary })
}

/// `f(block) = log2 P(y_{d+1}|y_1^d) - log2 P(x_{d+1},y_{d+1}|x_1^d,y_1^d)`
/// over positive-probability blocks, as `(block index, f)`.
pub fn block_function(model: &MarkovPairModel) -> Result<Vec<(usize, f64)>> {
    let ychain = derive_y_chain(model)?;
    let tables = LogTables::new(model, &ychain)?;
    let z = build_z_chain(model)?;
    let m = model.pair_size();
    Ok(z.states.iter().map(|&b| (b, tables.f(model, b / m, b % m))).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct MarkovAnalysis {
    /// Conditional entropy rate (bits/symbol).
    pub h_rate: f64,
    /// Conditional varentropy rate (bits^2/symbol).
    pub sigma2_rate: f64,
    /// Bound on the boundary term `|-log2 P(x|y) - sum f|`.
    pub delta: f64,
    pub block_f: Vec<(usize, f64)>,
    pub markovianity_defect: f64,
}

/// Rates by the stationary law of the block chain; the variance solves the
/// Poisson equation.
pub fn markov_rates(model: &MarkovPairModel) -> Result<MarkovAnalysis> {
    let ychain = derive_y_chain(model)?;
    let tables = LogTables::new(model, &ychain)?;
    let z = build_z_chain(model)?;
    let m = model.pair_size();
    let f: Vec<f64> = z.states.iter().map(|&b| tables.f(model, b / m, b % m)).collect();
    let pi = &z.stationary;
    let h_rate: f64 = pi.iter().zip(&f).map(|(p, v)| p * v).sum();
    let g = z.chain.poisson(pi, &f)?;
    let pg = z.chain.apply(&g);
    let mut sigma2_rate = 0.0;
    for i in 0..f.len() {
        if pi[i] > 0.0 {
            let c = f[i] - h_rate;
            sigma2_rate += pi[i] * (c * c + 2.0 * c * pg[i]);
        }
    }
    // Clean round-off around a vanishing variance.
    if sigma2_rate.abs() < 1e-13 {
        sigma2_rate = 0.0;
    }
    let block_f = z.states.iter().copied().zip(f.iter().copied()).collect();
    Ok(MarkovAnalysis {
        h_rate,
        sigma2_rate: sigma2_rate.max(0.0),
        delta: boundary_delta(model, &tables)?,
        block_f,
        markovianity_defect: ychain.markovianity_defect,
    })
}

/// `max |Delta_n|` where `Delta_n = a(first d pairs) + b(last 2d pairs)`,
/// `a = log2 P(y_1^d)/P(s_1^d)` and `b = -sum of f` over the `d` blocks
/// that end past position `n`.
fn boundary_delta(model: &MarkovPairModel, tables: &LogTables) -> Result<f64> {
    let init = model.initial_law()?;
    let pi = model.stationary_contexts()?;
    let (mut a_min, mut a_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (c, &p) in init.iter().enumerate() {
        if p > 0.0 {
            a_min = a_min.min(tables.start[c]);
            a_max = a_max.max(tables.start[c]);
        }
    }
    let (mut b_min, mut b_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut stack: Vec<(usize, usize, f64)> = (0..pi.len())
        .filter(|&c| pi[c] > 0.0)
        .map(|c| (c, 0, 0.0))
        .collect();
    while let Some((c, depth, acc)) = stack.pop() {
        if depth == model.order() {
            b_min = b_min.min(acc);
            b_max = b_max.max(acc);
            continue;
        }
        for s in 0..model.pair_size() {
            if model.transition(c, s).value() > 0.0 {
                stack.push((model.next_context(c, s), depth + 1, acc - tables.f(model, c, s)));
            }
        }
    }
    if !a_min.is_finite() || !b_min.is_finite() {
        return Err(Error::Degenerate("no positive-probability boundary blocks".into()));
    }
    Ok((a_max + b_max).abs().max((a_min + b_min).abs()))
}

/// Per-model machinery for repeated density evaluations.
#[derive(Clone, Debug)]
pub struct DensityEvaluator {
    model: MarkovPairModel,
    tables: LogTables,
}

impl DensityEvaluator {
    pub fn new(model: &MarkovPairModel) -> Result<Self> {
        let ychain = derive_y_chain(model)?;
        let tables = LogTables::new(model, &ychain)?;
        Ok(DensityEvaluator { model: model.clone(), tables })
    }

    /// `-log2 P(x_1^n | y_1^n)` for a pair path (`n >= d`), by the chain rule
    /// on the pair chain and the derived side chain.
    pub fn density(&self, pairs: &[usize]) -> Result<f64> {
        let model = &self.model;
        let d = model.order();
        if pairs.len() < d {
            return Err(Error::Domain(format!("path length {} below the order {d}", pairs.len())));
        }
        if let Some(&s) = pairs.iter().find(|&&s| s >= model.pair_size()) {
            return Err(Error::Domain(format!("pair index {s} outside the pair alphabet")));
        }
        let mut context = model.context_of(&pairs[..d]);
        let mut total = self.tables.start[context];
        for &s in &pairs[d..] {
            total += self.tables.f(model, context, s);
            context = model.next_context(context, s);
        }
        if !total.is_finite() {
            return Err(Error::Domain("zero-probability pair path".into()));
        }
        Ok(total)
    }

    /// `sum_{j=1}^{n} f(Z_j)` over a path of length `n + d`.
    pub fn block_sum(&self, pairs: &[usize]) -> f64 {
        let model = &self.model;
        let d = model.order();
        let mut context = model.context_of(&pairs[..d]);
        let mut total = 0.0;
        for &s in &pairs[d..] {
            total += self.tables.f(model, context, s);
            context = model.next_context(context, s);
        }
        total
    }
}

/// `-log2 P(x_1^n | y_1^n)` for a Markov pair model.
pub fn cond_info_density_markov(model: &MarkovPairModel, x: &[usize], y: &[usize]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain("source and side strings differ in length".into()));
    }
    if x.iter().any(|&v| v >= model.x_size()) || y.iter().any(|&v| v >= model.y_size()) {
        return Err(Error::Domain("symbol outside its alphabet".into()));
    }
    let pairs: Vec<usize> = x.iter().zip(y).map(|(&a, &b)| model.pair_index(a, b)).collect();
    DensityEvaluator::new(model)?.density(&pairs)
}

/// Cumulative sampling tables for a pair chain.
#[derive(Clone, Debug)]
struct Sampler {
    initial: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl Sampler {
    fn new(model: &MarkovPairModel) -> Result<Self> {
        let cumulate = |v: &[f64]| {
            let mut acc = 0.0;
            v.iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect::<Vec<f64>>()
        };
        let initial = cumulate(&model.initial_law()?);
        let rows = model
            .transition_rows()
            .iter()
            .map(|r| cumulate(&r.iter().map(|p| p.value()).collect::<Vec<_>>()))
            .collect();
        Ok(Sampler { initial, rows })
    }

    fn draw(cdf: &[f64], u: f64) -> usize {
        let u = u * cdf[cdf.len() - 1];
        let i = cdf.partition_point(|&c| c <= u);
        // Never land on a zero-probability tail entry.
        let mut i = i.min(cdf.len() - 1);
        while i > 0 && cdf[i] == cdf[i - 1] {
            i -= 1;
        }
        i
    }

    /// A path of `len` pair symbols.
    fn path<R: Rng>(&self, model: &MarkovPairModel, len: usize, rng: &mut R) -> Vec<usize> {
        let d = model.order();
        let mut context = Sampler::draw(&self.initial, rng.random::<f64>());
        let mut out = model.context_pairs(context);
        out.truncate(len);
        while out.len() < len {
            let s = Sampler::draw(&self.rows[context], rng.random::<f64>());
            out.push(s);
            context = model.next_context(context, s);
        }
        debug_assert!(out.len() == len || len < d);
        out
    }
}

/// Samples `(x_1^n, y_1^n)` from the initial law then the transitions,
/// deterministically in `seed`.
pub fn simulate_pair(model: &MarkovPairModel, n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let sampler = Sampler::new(model)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let path = sampler.path(model, n, &mut rng);
    Ok(path.into_iter().map(|s| model.split_pair(s)).unzip())
}

/// Simulated pair paths of length `len`, in parallel blocks with one
/// stream each; the result does not depend on the thread count.
pub fn simulate_paths(
    model: &MarkovPairModel,
    len: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let sampler = Sampler::new(model)?;
    let blocks = trials.div_ceil(TRIAL_BLOCK);
    let out: Vec<Vec<Vec<usize>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
            (0..count).map(|_| sampler.path(model, len, &mut rng)).collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Samples of `-log2 P(X_1^n | Y_1^n)`.
pub fn density_samples(model: &MarkovPairModel, n: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let eval = DensityEvaluator::new(model)?;
    let sampler = Sampler::new(model)?;
    let blocks = trials.div_ceil(TRIAL_BLOCK);
    let out: Vec<Result<Vec<f64>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
            (0..count)
                .map(|_| eval.density(&sampler.path(model, n, &mut rng)))
                .collect()
        })
        .collect();
    let mut samples = Vec::with_capacity(trials);
    for block in out {
        samples.extend(block?);
    }
    Ok(samples)
}

/// Sample mean and variance with their standard errors.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SampleMoments {
    pub mean: f64,
    pub variance: f64,
    pub mean_se: f64,
    pub variance_se: f64,
}

pub fn sample_moments(samples: &[f64]) -> SampleMoments {
    let t = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / t;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &v in samples {
        let c = (v - mean) * (v - mean);
        m2 += c;
        m4 += c * c;
    }
    let variance = m2 / (t - 1.0);
    let m4 = m4 / t;
    let m2n = m2 / t;
    SampleMoments {
        mean,
        variance,
        mean_se: (variance / t).sqrt(),
        variance_se: ((m4 - m2n * m2n).max(0.0) / t).sqrt(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeRow {
    pub n: usize,
    pub kolmogorov: f64,
    pub kolmogorov_sqrt_n: f64,
    /// Typical size of the sampling error of `kolmogorov_sqrt_n`.
    pub noise: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    /// Smallest constant bounding `kolmogorov * sqrt(n)` over the grid.
    pub fitted_constant: f64,
    /// Each scaled distance is at most the previous one plus twice its noise.
    pub non_increasing: bool,
}

/// Kolmogorov distance between a sample and the standard normal law.
pub fn kolmogorov_distance(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let t = samples.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < samples.len() {
        // Atoms: the empirical CDF jumps once per distinct value.
        let mut j = i;
        while j + 1 < samples.len() && samples[j + 1] == samples[i] {
            j += 1;
        }
        let cdf = big_phi(samples[i]);
        d = d.max((cdf - i as f64 / t).abs()).max(((j + 1) as f64 / t - cdf).abs());
        i = j + 1;
    }
    d
}

/// Kolmogorov distance of the normalized information density over a grid
/// of blocklengths.
pub fn berry_esseen_probe(
    model: &MarkovPairModel,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let analysis = markov_rates(model)?;
    if analysis.sigma2_rate <= 0.0 {
        return Err(Error::Degenerate("conditional varentropy rate is zero".into()));
    }
    if trials < 2 {
        return Err(Error::Domain("at least two trials are needed".into()));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let scale = (analysis.sigma2_rate * n as f64).sqrt();
        let samples: Vec<f64> = density_samples(model, n, trials, seed.wrapping_add(i as u64))?
            .into_iter()
            .map(|v| (v - n as f64 * analysis.h_rate) / scale)
            .collect();
        let kolmogorov = kolmogorov_distance(samples);
        let root = (n as f64).sqrt();
        rows.push(ProbeRow {
            n,
            kolmogorov,
            kolmogorov_sqrt_n: kolmogorov * root,
            noise: 0.87 * root / (trials as f64).sqrt(),
        });
    }
    let fitted_constant = rows.iter().map(|r| r.kolmogorov_sqrt_n).fold(0.0, f64::max);
    let non_increasing = rows
        .windows(2)
        .all(|w| w[1].kolmogorov_sqrt_n <= w[0].kolmogorov_sqrt_n + 2.0 * w[1].noise);
    Ok(ProbeReport { rows, fitted_constant, non_increasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::measures;
    use crate::model::{Alphabet, SourceModel};
    use crate::prob::Prob;

    const FIG1: &str = r#"{"kind":"cond_iid","x_alphabet":["0","1"],"y_alphabet":["0","1"],
        "p_y":["2/3","1/3"],"p_x_given_y":[["0.9","0.1"],["0.4","0.6"]]}"#;

    fn fig1_embedded() -> MarkovPairModel {
        let src = SourceModel::from_json_str(FIG1).unwrap();
        MarkovPairModel::from_cond_iid(src.as_cond_iid().unwrap()).unwrap()
    }

    fn p(s: &str) -> Prob {
        s.parse().unwrap()
    }

    /// X copies Y; Y is a sticky binary chain.
    fn copy_chain() -> MarkovPairModel {
        // pairs: (0,0)=0, (0,1)=1, (1,0)=2, (1,1)=3
        let stay0 = vec![p("0.8"), p("0"), p("0"), p("0.2")];
        let stay1 = vec![p("0.3"), p("0"), p("0"), p("0.7")];
        MarkovPairModel::new(
            1,
            Alphabet::numeric(2),
            Alphabet::numeric(2),
            vec![stay0.clone(), stay0, stay1.clone(), stay1],
            None,
        )
        .unwrap()
    }

    #[test]
    fn embedded_rates_match_single_letter_measures() {
        let chain = fig1_embedded();
        let a = markov_rates(&chain).unwrap();
        let src = SourceModel::from_json_str(FIG1).unwrap();
        let m = measures(src.as_cond_iid().unwrap()).unwrap();
        assert!((a.h_rate - m.h_xy).abs() < 1e-12);
        assert!((a.sigma2_rate - m.sigma2).abs() < 1e-12);
        assert!(a.markovianity_defect < 1e-12);
        // a = -log2 P(x|y), b = +log2 P(x|y): delta = max - min of -log2 P(x|y).
        let want = -(0.1f64.log2()) + 0.9f64.log2();
        assert!((a.delta - want).abs() < 1e-12, "{}", a.delta);
    }

    #[test]
    fn embedded_block_function_is_single_letter() {
        let chain = fig1_embedded();
        let rows = [[0.9, 0.1], [0.4, 0.6]];
        for (b, f) in block_function(&chain).unwrap() {
            let (x, y) = chain.split_pair(b % 4);
            assert!((f + f64::log2(rows[y][x])).abs() < 1e-12);
        }
    }

    #[test]
    fn copy_chain_is_degenerate() {
        let chain = copy_chain();
        let a = markov_rates(&chain).unwrap();
        assert_eq!((a.h_rate, a.sigma2_rate, a.delta), (0.0, 0.0, 0.0));
        assert!(berry_esseen_probe(&chain, &[8], 100, 1).is_err());
        let (x, y) = simulate_pair(&chain, 500, 9).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn z_chain_stationary_is_block_law() {
        let chain = copy_chain();
        let z = build_z_chain(&chain).unwrap();
        assert_eq!(z.len(), 4);
        // pi_Y = (0.6, 0.4) for the sticky chain.
        let want = [0.6 * 0.8, 0.6 * 0.2, 0.4 * 0.3, 0.4 * 0.7];
        let blocks = [0, 3, 12, 15];
        for (b, w) in blocks.iter().zip(want) {
            let i = z.states.iter().position(|s| s == b).unwrap();
            assert!((z.stationary[i] - w).abs() < 1e-12);
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let chain = fig1_embedded();
        assert_eq!(simulate_pair(&chain, 300, 5).unwrap(), simulate_pair(&chain, 300, 5).unwrap());
        assert_ne!(simulate_pair(&chain, 300, 5).unwrap(), simulate_pair(&chain, 300, 6).unwrap());
        let a = density_samples(&chain, 20, 3000, 1).unwrap();
        assert_eq!(a, density_samples(&chain, 20, 3000, 1).unwrap());
    }

    #[test]
    fn density_decomposition_is_bounded_by_delta() {
        let chain = fig1_embedded();
        let a = markov_rates(&chain).unwrap();
        let eval = DensityEvaluator::new(&chain).unwrap();
        for path in simulate_paths(&chain, 41, 500, 3).unwrap() {
            let lhs = eval.density(&path[..40]).unwrap();
            assert!((lhs - eval.block_sum(&path)).abs() <= a.delta + 1e-9);
        }
    }

    #[test]
    fn embedded_density_matches_product_form() {
        let chain = fig1_embedded();
        let d = cond_info_density_markov(&chain, &[0, 1], &[0, 1]).unwrap();
        assert!((d + 0.54f64.log2()).abs() < 1e-12);
        assert!(cond_info_density_markov(&copy_chain(), &[0, 1], &[1, 1]).is_err());
    }

    #[test]
    fn kolmogorov_of_exact_quantiles_is_small() {
        let samples: Vec<f64> = (1..2000)
            .map(|i| crate::gaussian::q_inv(1.0 - i as f64 / 2000.0).unwrap())
            .collect();
        assert!(kolmogorov_distance(samples) <= 1.0 / 1999.0 + 1e-12);
    }
}
