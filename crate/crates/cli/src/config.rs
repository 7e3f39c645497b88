//! Command-line arguments.

use std::path::PathBuf;
use std::str::FromStr;

use blocklength::limits::Method;
use blocklength::model::Alphabet;
use blocklength::SideInfoString;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "blocklength", version, about = "Finite-blocklength limits of compression with side information")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Check a model file.
    Validate(RunConfig),
    /// Single-letter information measures.
    Measures(RunConfig),
    /// Exact excess-rate probabilities and optimal rates.
    Limits(RunConfig),
    /// Normal-approximation bounds.
    Bounds(RunConfig),
    /// Exact reference-based rate against its normal approximation.
    Figure1(RunConfig),
    /// Markov rates, boundary bound and the Berry-Esseen probe.
    Markov(RunConfig),
    /// Run the property suite over a corpus directory.
    Verify(RunConfig),
}

impl Command {
    pub fn config(&self) -> &RunConfig {
        match self {
            Command::Validate(c)
            | Command::Measures(c)
            | Command::Limits(c)
            | Command::Bounds(c)
            | Command::Figure1(c)
            | Command::Markov(c)
            | Command::Verify(c) => c,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    /// Reference-based when `--y` is given, pair-based otherwise.
    #[default]
    Auto,
    Ref,
    Pair,
    /// Prefix-free codes (reference-based with `--y`).
    Prefix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NRange {
    pub start: usize,
    pub end: usize,
}

impl FromStr for NRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or("expected a:b")?;
        let start: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
        let end: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
        if start == 0 || end < start {
            return Err(format!("empty or invalid range {s}"));
        }
        Ok(NRange { start, end })
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Model file (or corpus directory for `verify`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Inclusive blocklength range `a:b`.
    #[arg(long = "n-range")]
    pub n_range: Option<NRange>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    /// Side string: a literal, `repeat:<word>` or `file:<path>`.
    #[arg(long)]
    pub y: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "auto")]
    pub method: Method,
    /// Berry-Esseen constant for the Markov bounds.
    #[arg(long = "A")]
    pub a: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScopeArg::Auto)]
    pub scope: ScopeArg,
    /// Threshold grid for the general converse check in `verify`.
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,
    /// Monte Carlo trials per blocklength.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Blocklengths for the Berry-Esseen probe.
    #[arg(long, value_delimiter = ',')]
    pub probe: Vec<usize>,
}

impl RunConfig {
    pub fn check(&self) -> Result<(), CliError> {
        if let Some(e) = self.eps.iter().find(|e| !(**e >= 0.0 && **e < 1.0)) {
            return Err(CliError::usage(format!("epsilon {e} outside [0,1)")));
        }
        if self.n.is_some() && self.n_range.is_some() {
            return Err(CliError::usage("give either --n or --n-range"));
        }
        if self.n == Some(0) {
            return Err(CliError::usage("--n must be positive"));
        }
        Ok(())
    }

    /// Blocklengths requested, ascending; `fallback` when none are given.
    pub fn blocklengths(&self, fallback: Option<usize>) -> Result<Vec<usize>, CliError> {
        match (self.n, self.n_range) {
            (Some(n), _) => Ok(vec![n]),
            (_, Some(r)) => Ok((r.start..=r.end).collect()),
            _ => fallback
                .map(|n| vec![n])
                .ok_or_else(|| CliError::usage("a blocklength is required (--n or --n-range)")),
        }
    }
}

/// A side string pattern resolved against an alphabet.
#[derive(Clone, Debug)]
pub enum YPattern {
    Repeat(Vec<usize>),
    Literal(Vec<usize>),
}

impl YPattern {
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self, CliError> {
        let bad = |e: blocklength::Error| CliError::usage(format!("--y: {e}"));
        if let Some(word) = text.strip_prefix("repeat:") {
            let symbols = alphabet.parse_string(word).map_err(bad)?;
            if symbols.is_empty() {
                return Err(CliError::usage("--y: empty repeat word"));
            }
            Ok(YPattern::Repeat(symbols))
        } else if let Some(path) = text.strip_prefix("file:") {
            let content = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("--y: cannot read {path}: {e}")))?;
            Ok(YPattern::Literal(alphabet.parse_string(content.trim()).map_err(bad)?))
        } else {
            Ok(YPattern::Literal(alphabet.parse_string(text).map_err(bad)?))
        }
    }

    /// Natural length of a literal string.
    pub fn natural_len(&self) -> Option<usize> {
        match self {
            YPattern::Repeat(_) => None,
            YPattern::Literal(s) => Some(s.len()),
        }
    }

    /// The first `n` symbols.
    pub fn take(&self, n: usize, alphabet: &Alphabet) -> Result<SideInfoString, CliError> {
        let symbols: Vec<usize> = match self {
            YPattern::Repeat(w) => w.iter().copied().cycle().take(n).collect(),
            YPattern::Literal(s) => {
                if s.len() < n {
                    return Err(CliError::usage(format!(
                        "side string has {} symbols, blocklength {n} requested",
                        s.len()
                    )));
                }
                s[..n].to_vec()
            }
        };
        SideInfoString::new(symbols, alphabet).map_err(CliError::from)
    }
}
