//! Source and side-information models: alphabets, conditionally-i.i.d. and
//! Markov pair laws, the model file format, validation and the derived
//! side-information chain.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::chain::FiniteChain;
use crate::error::{Error, Result};
use crate::prob::{common_denominator, parse_rational, Prob};

/// Tolerance on PMF sums.
pub const PMF_TOLERANCE: f64 = 1e-12;

/// An ordered set of distinct symbol labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::Schema("alphabet must not be empty".into()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate alphabet symbol {s:?}")));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    /// Alphabet `{"0", "1", ..., "size-1"}`.
    pub fn numeric(size: usize) -> Self {
        Alphabet::new((0..size).map(|i| i.to_string())).expect("distinct labels")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    fn single_char(&self) -> bool {
        self.symbols.iter().all(|s| s.chars().count() == 1)
    }

    /// Parses a string over this alphabet. Single-character alphabets read
    /// one symbol per character; otherwise symbols are separated by
    /// whitespace or commas.
    pub fn parse_string(&self, text: &str) -> Result<Vec<usize>> {
        let lookup = |tok: &str| {
            self.index_of(tok)
                .ok_or_else(|| Error::Parse(format!("symbol {tok:?} not in alphabet")))
        };
        if self.single_char() && !text.contains([' ', ',']) {
            text.trim()
                .chars()
                .map(|c| lookup(c.encode_utf8(&mut [0u8; 4])))
                .collect()
        } else {
            text.split([' ', ',', '\t', '\n'])
                .filter(|t| !t.is_empty())
                .map(lookup)
                .collect()
        }
    }

    pub fn render(&self, symbols: &[usize]) -> String {
        let sep = if self.single_char() { "" } else { " " };
        symbols
            .iter()
            .map(|&s| self.symbols[s].as_str())
            .collect::<Vec<_>>()
            .join(sep)
    }
}

/// A side-information string `y_1^n` (symbol indices).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SideInfoString {
    symbols: Vec<usize>,
}

impl SideInfoString {
    pub fn new(symbols: Vec<usize>, alphabet: &Alphabet) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Domain("side-information string must be nonempty".into()));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s >= alphabet.len()) {
            return Err(Error::Domain(format!("symbol index {bad} outside the y alphabet")));
        }
        Ok(SideInfoString { symbols })
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self> {
        SideInfoString::new(alphabet.parse_string(text)?, alphabet)
    }

    /// The first `n` symbols of `word` repeated periodically.
    pub fn repeat(word: &[usize], n: usize, alphabet: &Alphabet) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::Domain("empty repeat word".into()));
        }
        SideInfoString::new(word.iter().copied().cycle().take(n).collect(), alphabet)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    /// Number of occurrences of each y symbol.
    pub fn composition(&self, y_size: usize) -> Vec<usize> {
        let mut counts = vec![0; y_size];
        for &s in &self.symbols {
            counts[s] += 1;
        }
        counts
    }
}

/// A conditional family `P_{X|Y}` with an optional side-information marginal.
#[derive(Clone, Debug)]
pub struct CondIidModel {
    x_alphabet: Alphabet,
    y_alphabet: Alphabet,
    p_y: Option<Vec<Prob>>,
    p_x_given_y: Vec<Vec<Prob>>,
    lattice: Lattice,
}

/// All conditional probabilities rescaled onto one common denominator, so
/// products of them stay in exact integer arithmetic.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub denominator: BigUint,
    pub numerators: Vec<Vec<BigUint>>,
}

impl CondIidModel {
    /// Builds the model, checking dimensions and PMF constraints.
    pub fn new(
        x_alphabet: Alphabet,
        y_alphabet: Alphabet,
        p_y: Option<Vec<Prob>>,
        p_x_given_y: Vec<Vec<Prob>>,
    ) -> Result<Self> {
        let model = CondIidModel::unchecked(x_alphabet, y_alphabet, p_y, p_x_given_y)?;
        let report = validate(&SourceModel::CondIid(model.clone()));
        report.into_result()?;
        Ok(model)
    }

    fn unchecked(
        x_alphabet: Alphabet,
        y_alphabet: Alphabet,
        p_y: Option<Vec<Prob>>,
        p_x_given_y: Vec<Vec<Prob>>,
    ) -> Result<Self> {
        if p_x_given_y.len() != y_alphabet.len() {
            return Err(Error::Schema(format!(
                "p_x_given_y has {} rows, expected {}",
                p_x_given_y.len(),
                y_alphabet.len()
            )));
        }
        if let Some(row) = p_x_given_y.iter().find(|r| r.len() != x_alphabet.len()) {
            return Err(Error::Schema(format!(
                "p_x_given_y row has {} entries, expected {}",
                row.len(),
                x_alphabet.len()
            )));
        }
        if let Some(p) = &p_y {
            if p.len() != y_alphabet.len() {
                return Err(Error::Schema(format!(
                    "p_y has {} entries, expected {}",
                    p.len(),
                    y_alphabet.len()
                )));
            }
        }
        let flat: Vec<BigRational> = p_x_given_y
            .iter()
            .flatten()
            .map(|p| p.exact().abs())
            .collect();
        let (denominator, nums) = common_denominator(flat.iter());
        let numerators = nums.chunks(x_alphabet.len()).map(<[_]>::to_vec).collect();
        Ok(CondIidModel {
            x_alphabet,
            y_alphabet,
            p_y,
            p_x_given_y,
            lattice: Lattice { denominator, numerators },
        })
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.x_alphabet
    }

    pub fn y_alphabet(&self) -> &Alphabet {
        &self.y_alphabet
    }

    pub fn x_size(&self) -> usize {
        self.x_alphabet.len()
    }

    pub fn y_size(&self) -> usize {
        self.y_alphabet.len()
    }

    pub fn p_y(&self) -> Option<&[Prob]> {
        self.p_y.as_deref()
    }

    /// `P_Y`, or a domain error for reference-only models.
    pub fn require_p_y(&self) -> Result<&[Prob]> {
        self.p_y()
            .ok_or_else(|| Error::Domain("model has no p_y (reference-based use only)".into()))
    }

    pub fn cond(&self, x: usize, y: usize) -> &Prob {
        &self.p_x_given_y[y][x]
    }

    pub fn cond_row(&self, y: usize) -> &[Prob] {
        &self.p_x_given_y[y]
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Indices `x` with `P(x|y) > 0`.
    pub fn support(&self, y: usize) -> Vec<usize> {
        (0..self.x_size()).filter(|&x| !self.cond(x, y).is_zero()).collect()
    }
}

/// A `d`-th order Markov chain on pairs `(x, y)`.
///
/// Pair symbols are indexed `x * |Y| + y`; a context of `d` pairs is the
/// mixed-radix number with the oldest pair most significant.
#[derive(Clone, Debug)]
pub struct MarkovPairModel {
    order: usize,
    x_alphabet: Alphabet,
    y_alphabet: Alphabet,
    transition: Vec<Vec<Prob>>,
    initial: Option<Vec<Prob>>,
}

impl MarkovPairModel {
    /// Builds the model, checking dimensions and PMF constraints (not
    /// ergodicity; see [`validate`]).
    pub fn new(
        order: usize,
        x_alphabet: Alphabet,
        y_alphabet: Alphabet,
        transition: Vec<Vec<Prob>>,
        initial: Option<Vec<Prob>>,
    ) -> Result<Self> {
        let model = MarkovPairModel::unchecked(order, x_alphabet, y_alphabet, transition, initial)?;
        let report = validate(&SourceModel::MarkovPair(model.clone()));
        if let Some(issue) = report.errors().find(|i| i.kind == IssueKind::Pmf) {
            return Err(Error::InvalidModel(issue.message.clone()));
        }
        Ok(model)
    }

    fn unchecked(
        order: usize,
        x_alphabet: Alphabet,
        y_alphabet: Alphabet,
        transition: Vec<Vec<Prob>>,
        initial: Option<Vec<Prob>>,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::Schema("markov order must be >= 1".into()));
        }
        let m = x_alphabet.len() * y_alphabet.len();
        let contexts = m
            .checked_pow(order as u32)
            .filter(|&c| c <= 1 << 24)
            .ok_or_else(|| Error::Schema("too many contexts".into()))?;
        if transition.len() != contexts {
            return Err(Error::Schema(format!(
                "transition has {} rows, expected {contexts}",
                transition.len()
            )));
        }
        if let Some(row) = transition.iter().find(|r| r.len() != m) {
            return Err(Error::Schema(format!(
                "transition row has {} entries, expected {m}",
                row.len()
            )));
        }
        if let Some(init) = &initial {
            if init.len() != contexts {
                return Err(Error::Schema(format!(
                    "initial has {} entries, expected {contexts}",
                    init.len()
                )));
            }
        }
        Ok(MarkovPairModel { order, x_alphabet, y_alphabet, transition, initial })
    }

    /// Embeds a conditionally-i.i.d. pair with `p_y` as an order-1 chain whose
    /// every row is the joint law `P_Y(y) P(x|y)`.
    pub fn from_cond_iid(model: &CondIidModel) -> Result<Self> {
        let p_y = model.require_p_y()?;
        let mut row = Vec::with_capacity(model.x_size() * model.y_size());
        for x in 0..model.x_size() {
            for (y, py) in p_y.iter().enumerate() {
                row.push(Prob::from_rational(py.exact() * model.cond(x, y).exact()));
            }
        }
        let m = row.len();
        MarkovPairModel::new(
            1,
            model.x_alphabet().clone(),
            model.y_alphabet().clone(),
            vec![row; m],
            None,
        )
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.x_alphabet
    }

    pub fn y_alphabet(&self) -> &Alphabet {
        &self.y_alphabet
    }

    pub fn x_size(&self) -> usize {
        self.x_alphabet.len()
    }

    pub fn y_size(&self) -> usize {
        self.y_alphabet.len()
    }

    /// Number of pair symbols `|X||Y|`.
    pub fn pair_size(&self) -> usize {
        self.x_size() * self.y_size()
    }

    pub fn context_count(&self) -> usize {
        self.transition.len()
    }

    pub fn pair_index(&self, x: usize, y: usize) -> usize {
        x * self.y_size() + y
    }

    pub fn split_pair(&self, s: usize) -> (usize, usize) {
        (s / self.y_size(), s % self.y_size())
    }

    /// Context reached from `context` after emitting pair `s`.
    pub fn next_context(&self, context: usize, s: usize) -> usize {
        (context * self.pair_size() + s) % self.context_count()
    }

    /// Pairs of a context, oldest first.
    pub fn context_pairs(&self, mut context: usize) -> Vec<usize> {
        let m = self.pair_size();
        let mut out = vec![0; self.order];
        for slot in out.iter_mut().rev() {
            *slot = context % m;
            context /= m;
        }
        out
    }

    pub fn context_of(&self, pairs: &[usize]) -> usize {
        pairs.iter().fold(0, |c, &s| c * self.pair_size() + s)
    }

    pub fn transition(&self, context: usize, s: usize) -> &Prob {
        &self.transition[context][s]
    }

    pub fn transition_rows(&self) -> &[Vec<Prob>] {
        &self.transition
    }

    pub fn initial(&self) -> Option<&[Prob]> {
        self.initial.as_deref()
    }

    /// The chain on contexts.
    pub fn context_chain(&self) -> FiniteChain {
        let rows = (0..self.context_count())
            .map(|c| {
                (0..self.pair_size())
                    .map(|s| (self.next_context(c, s), self.transition(c, s).value()))
                    .collect()
            })
            .collect();
        FiniteChain::new(rows)
    }

    /// Stationary law on contexts.
    pub fn stationary_contexts(&self) -> Result<Vec<f64>> {
        self.context_chain().stationary()
    }

    /// Law of the first `d` pairs: the given initial law, else stationary.
    pub fn initial_law(&self) -> Result<Vec<f64>> {
        match &self.initial {
            Some(init) => Ok(init.iter().map(Prob::value).collect()),
            None => self.stationary_contexts(),
        }
    }

    /// Index of the y-only part of a pair context (`|Y|`-ary, oldest first).
    pub fn y_context_of(&self, context: usize) -> usize {
        self.context_pairs(context)
            .into_iter()
            .fold(0, |c, s| c * self.y_size() + s % self.y_size())
    }
}

#[derive(Clone, Debug)]
pub enum SourceModel {
    CondIid(CondIidModel),
    MarkovPair(MarkovPairModel),
}

impl SourceModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SourceModel::CondIid(_) => "cond_iid",
            SourceModel::MarkovPair(_) => "markov_pair",
        }
    }

    pub fn as_cond_iid(&self) -> Result<&CondIidModel> {
        match self {
            SourceModel::CondIid(m) => Ok(m),
            _ => Err(Error::Domain("operation requires a cond_iid model".into())),
        }
    }

    pub fn as_markov(&self) -> Result<&MarkovPairModel> {
        match self {
            SourceModel::MarkovPair(m) => Ok(m),
            _ => Err(Error::Domain("operation requires a markov_pair model".into())),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let model = parse_unchecked(text)?;
        let report = validate(&model);
        if let Some(issue) = report.errors().find(|i| i.kind == IssueKind::Pmf) {
            return Err(Error::InvalidModel(issue.message.clone()));
        }
        Ok(model)
    }

    /// Serializes to the model file format, probabilities as exact strings.
    pub fn to_json_string(&self) -> String {
        let strings = |v: &[Prob]| v.iter().map(|p| NumText::Text(p.to_string())).collect();
        let file = match self {
            SourceModel::CondIid(m) => ModelFile {
                kind: "cond_iid".into(),
                name: None,
                description: None,
                x_alphabet: m.x_alphabet.labels().to_vec(),
                y_alphabet: m.y_alphabet.labels().to_vec(),
                p_y: m.p_y.as_deref().map(strings),
                p_x_given_y: Some(m.p_x_given_y.iter().map(|r| strings(r)).collect()),
                order: None,
                transition: None,
                initial: None,
            },
            SourceModel::MarkovPair(m) => ModelFile {
                kind: "markov_pair".into(),
                name: None,
                description: None,
                x_alphabet: m.x_alphabet.labels().to_vec(),
                y_alphabet: m.y_alphabet.labels().to_vec(),
                p_y: None,
                p_x_given_y: None,
                order: Some(m.order),
                transition: Some(m.transition.iter().map(|r| strings(r)).collect()),
                initial: m.initial.as_deref().map(strings),
            },
        };
        serde_json::to_string_pretty(&file).expect("model file serializes")
    }
}

/// A number in a model file: preferably a decimal or fraction string.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum NumText {
    Text(String),
    Number(serde_json::Number),
}

impl NumText {
    fn to_prob(&self) -> Result<Prob> {
        match self {
            NumText::Text(s) => Ok(Prob::from_rational(parse_rational(s)?)),
            NumText::Number(n) => Ok(Prob::from_rational(parse_rational(&n.to_string())?)),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    x_alphabet: Vec<String>,
    y_alphabet: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_y: Option<Vec<NumText>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_x_given_y: Option<Vec<Vec<NumText>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transition: Option<Vec<Vec<NumText>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<Vec<NumText>>,
}

fn probs(v: &[NumText]) -> Result<Vec<Prob>> {
    v.iter().map(NumText::to_prob).collect()
}

fn prob_rows(rows: &[Vec<NumText>]) -> Result<Vec<Vec<Prob>>> {
    rows.iter().map(|r| probs(r)).collect()
}

/// Parses a model file with schema (dimension) checks only; PMF and chain
/// checks are left to [`validate`].
pub fn parse_unchecked(text: &str) -> Result<SourceModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    let x_alphabet = Alphabet::new(file.x_alphabet)?;
    let y_alphabet = Alphabet::new(file.y_alphabet)?;
    match file.kind.as_str() {
        "cond_iid" => {
            let rows = file
                .p_x_given_y
                .ok_or_else(|| Error::Schema("cond_iid model needs p_x_given_y".into()))?;
            let p_y = file.p_y.as_deref().map(probs).transpose()?;
            Ok(SourceModel::CondIid(CondIidModel::unchecked(
                x_alphabet,
                y_alphabet,
                p_y,
                prob_rows(&rows)?,
            )?))
        }
        "markov_pair" => {
            let order = file
                .order
                .ok_or_else(|| Error::Schema("markov_pair model needs order".into()))?;
            let rows = file
                .transition
                .ok_or_else(|| Error::Schema("markov_pair model needs transition".into()))?;
            let initial = file.initial.as_deref().map(probs).transpose()?;
            Ok(SourceModel::MarkovPair(MarkovPairModel::unchecked(
                order,
                x_alphabet,
                y_alphabet,
                prob_rows(&rows)?,
                initial,
            )?))
        }
        other => Err(Error::Schema(format!("unknown model kind {other:?}"))),
    }
}

/// Reads and parses a model file, rejecting PMF violations.
pub fn load_model(path: impl AsRef<Path>) -> Result<SourceModel> {
    let text = std::fs::read_to_string(path)?;
    SourceModel::from_json_str(&text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueKind {
    Pmf,
    Chain,
    Support,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    fn push(&mut self, severity: Severity, kind: IssueKind, message: String) {
        self.issues.push(Issue { severity, kind, message });
    }

    fn into_result(self) -> Result<()> {
        match self.errors().next() {
            Some(issue) => Err(Error::InvalidModel(issue.message.clone())),
            None => Ok(()),
        }
    }
}

fn check_pmf(report: &mut ValidationReport, what: &str, row: &[Prob]) -> usize {
    if let Some(p) = row.iter().find(|p| p.is_negative()) {
        report.push(
            Severity::Error,
            IssueKind::Pmf,
            format!("{what}: negative probability {p}"),
        );
    }
    let sum: BigRational = row.iter().map(|p| p.exact().clone()).sum();
    let gap = crate::prob::rational_to_f64(&(sum - BigRational::one())).abs();
    if gap > PMF_TOLERANCE {
        report.push(
            Severity::Error,
            IssueKind::Pmf,
            format!("{what}: row PMF sum differs from 1 by {gap:.3e}"),
        );
    }
    row.iter().filter(|p| p.is_zero()).count()
}

/// Checks PMF sums, nonnegativity and, for Markov pairs, irreducibility and
/// aperiodicity of the chain on positive-probability contexts.
pub fn validate(model: &SourceModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    match model {
        SourceModel::CondIid(m) => {
            if let Some(p_y) = &m.p_y {
                check_pmf(&mut report, "p_y", p_y);
            }
            let mut zeros = 0;
            for (y, row) in m.p_x_given_y.iter().enumerate() {
                zeros += check_pmf(&mut report, &format!("p_x_given_y[{}]", m.y_alphabet.label(y)), row);
            }
            if zeros > 0 {
                report.push(
                    Severity::Warning,
                    IssueKind::Support,
                    format!("{zeros} zero conditional probabilities; sums range over the support"),
                );
            }
        }
        SourceModel::MarkovPair(m) => {
            let mut zeros = 0;
            for (c, row) in m.transition.iter().enumerate() {
                zeros += check_pmf(&mut report, &format!("transition[{c}]"), row);
            }
            if let Some(init) = &m.initial {
                check_pmf(&mut report, "initial", init);
            }
            if zeros > 0 {
                report.push(
                    Severity::Warning,
                    IssueKind::Support,
                    format!("{zeros} zero transition probabilities; sums range over the support"),
                );
            }
            if report.ok() {
                if let Err(Error::NonErgodic(msg)) = m.context_chain().ergodic_class() {
                    report.push(Severity::Error, IssueKind::Chain, msg);
                }
            }
        }
    }
    report
}

/// Law of the side-information process derived from the stationary pair law.
#[derive(Clone, Debug)]
pub struct YChain {
    pub order: usize,
    pub y_size: usize,
    /// Stationary probability of each y context (`|Y|^d`, oldest first).
    pub context_prob: Vec<f64>,
    /// `P(y_next | y context)`; rows of zero-probability contexts are zero.
    pub transition: Vec<Vec<f64>>,
    /// Largest gap between the (d+1)-deep and d-deep conditionals of `Y`.
    pub markovianity_defect: f64,
}

impl YChain {
    pub fn next_context(&self, context: usize, y: usize) -> usize {
        (context * self.y_size + y) % self.context_prob.len()
    }
}

/// Marginalizes the stationary pair law onto `Y` and measures how far `Y` is
/// from being a `d`-th order Markov chain.
pub fn derive_y_chain(model: &MarkovPairModel) -> Result<YChain> {
    let pi = model.stationary_contexts()?;
    let d = model.order();
    let ny = model.y_size();
    let y_contexts = ny.pow(d as u32);
    let mut context_prob = vec![0.0; y_contexts];
    // Joint law of (y context, next y) and of (y context, next y, y after).
    let mut block = vec![vec![0.0; ny]; y_contexts];
    let mut deep = vec![vec![vec![0.0; ny]; ny]; y_contexts];
    for (c, &pc) in pi.iter().enumerate() {
        if pc == 0.0 {
            continue;
        }
        let yc = model.y_context_of(c);
        context_prob[yc] += pc;
        for s in 0..model.pair_size() {
            let p1 = pc * model.transition(c, s).value();
            if p1 == 0.0 {
                continue;
            }
            let y1 = s % ny;
            block[yc][y1] += p1;
            let c1 = model.next_context(c, s);
            for s2 in 0..model.pair_size() {
                let p2 = p1 * model.transition(c1, s2).value();
                if p2 > 0.0 {
                    deep[yc][y1][s2 % ny] += p2;
                }
            }
        }
    }
    let transition: Vec<Vec<f64>> = block
        .iter()
        .zip(&context_prob)
        .map(|(row, &pc)| {
            if pc > 0.0 {
                row.iter().map(|&p| p / pc).collect()
            } else {
                vec![0.0; ny]
            }
        })
        .collect();
    let mut defect = 0.0f64;
    for yc in 0..y_contexts {
        for y1 in 0..ny {
            let head = block[yc][y1];
            if head <= 0.0 {
                continue;
            }
            let shifted = (yc * ny + y1) % y_contexts;
            for y2 in 0..ny {
                let deep_cond = deep[yc][y1][y2] / head;
                defect = defect.max((deep_cond - transition[shifted][y2]).abs());
            }
        }
    }
    Ok(YChain {
        order: d,
        y_size: ny,
        context_prob,
        transition,
        markovianity_defect: defect,
    })
}

impl fmt::Display for SideInfoString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text: Vec<String> = self.symbols.iter().map(|s| s.to_string()).collect();
        f.write_str(&text.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIG1: &str = r#"{
        "kind": "cond_iid",
        "x_alphabet": ["0", "1"],
        "y_alphabet": ["0", "1"],
        "p_y": ["2/3", "1/3"],
        "p_x_given_y": [["0.9", "0.1"], ["0.4", "0.6"]]
    }"#;

    fn p(s: &str) -> Prob {
        s.parse().unwrap()
    }

    #[test]
    fn loads_fig1_with_exact_probabilities() {
        let model = SourceModel::from_json_str(FIG1).unwrap();
        let m = model.as_cond_iid().unwrap();
        assert_eq!(m.p_y().unwrap()[1], p("1/3"));
        assert_eq!(*m.cond(1, 0), p("0.1"));
        assert_eq!(*m.cond(1, 1), p("0.6"));
        assert_eq!(m.lattice().denominator, BigUint::from(10u32));
        assert!(validate(&model).ok());
    }

    #[test]
    fn row_sum_violation_is_rejected() {
        let bad = FIG1.replace(r#"["0.4", "0.6"]"#, r#"["0.39", "0.6"]"#);
        let err = SourceModel::from_json_str(&bad).unwrap_err();
        assert!(err.to_string().contains("row PMF sum"), "{err}");
    }

    #[test]
    fn schema_violations_are_reported() {
        let missing = FIG1.replace(r#""p_x_given_y": [["0.9", "0.1"], ["0.4", "0.6"]]"#, r#""p": 1"#);
        assert!(SourceModel::from_json_str(&missing).is_err());
        let short = FIG1.replace(r#"["0.4", "0.6"]"#, r#"["1"]"#);
        assert!(matches!(SourceModel::from_json_str(&short), Err(Error::Schema(_))));
        assert!(matches!(SourceModel::from_json_str("{"), Err(Error::Parse(_))));
        let dup = FIG1.replace(r#""x_alphabet": ["0", "1"]"#, r#""x_alphabet": ["0", "0"]"#);
        assert!(matches!(SourceModel::from_json_str(&dup), Err(Error::Schema(_))));
    }

    #[test]
    fn round_trip_preserves_rationals() {
        let model = SourceModel::from_json_str(FIG1).unwrap();
        let again = SourceModel::from_json_str(&model.to_json_string()).unwrap();
        let (a, b) = (model.as_cond_iid().unwrap(), again.as_cond_iid().unwrap());
        assert_eq!(a.p_y(), b.p_y());
        for y in 0..2 {
            assert_eq!(a.cond_row(y), b.cond_row(y));
        }
    }

    fn flip_chain() -> MarkovPairModel {
        // X deterministic copy of Y, Y alternates 0,1,0,1: period 2.
        let rows = vec![
            vec![p("0"), p("0"), p("0"), p("1")],
            vec![p("1"), p("0"), p("0"), p("0")],
            vec![p("1"), p("0"), p("0"), p("0")],
            vec![p("1"), p("0"), p("0"), p("0")],
        ];
        MarkovPairModel::new(1, Alphabet::numeric(2), Alphabet::numeric(2), rows, None).unwrap()
    }

    #[test]
    fn periodic_chain_is_flagged() {
        let report = validate(&SourceModel::MarkovPair(flip_chain()));
        assert!(!report.ok());
        assert!(report.errors().any(|i| i.message.contains("not aperiodic")));
    }

    #[test]
    fn disconnected_chain_is_flagged() {
        let one = vec![p("1"), p("0"), p("0"), p("0")];
        let stay = |s: usize| {
            let mut r = vec![p("0"); 4];
            r[s] = p("1");
            r
        };
        let rows = vec![one, stay(1), stay(2), stay(3)];
        let model =
            MarkovPairModel::new(1, Alphabet::numeric(2), Alphabet::numeric(2), rows, None).unwrap();
        let report = validate(&SourceModel::MarkovPair(model));
        assert!(report.errors().any(|i| i.message.contains("not irreducible")));
    }

    #[test]
    fn parse_strings_over_alphabets() {
        let a = Alphabet::numeric(2);
        assert_eq!(a.parse_string("0110").unwrap(), vec![0, 1, 1, 0]);
        let words = Alphabet::new(["sun", "rain"]).unwrap();
        assert_eq!(words.parse_string("rain sun,rain").unwrap(), vec![1, 0, 1]);
        assert!(a.parse_string("012").is_err());
        assert_eq!(words.render(&[1, 0]), "rain sun");
    }
}
