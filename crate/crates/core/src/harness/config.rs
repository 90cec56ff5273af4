use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Mimo,
    Cdma,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mimo" => Ok(Scenario::Mimo),
            "cdma" => Ok(Scenario::Cdma),
            _ => Err(Error::Config(format!("unknown scenario {s:?} (mimo|cdma)"))),
        }
    }
}

/// How a codebook (and its selection rule) is chosen per trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    /// Exhaustive quadratic-form search (max for MIMO, min for CDMA).
    RvqFull,
    /// Exhaustive nearest neighbor to the optimal eigenvector.
    NnExhaustive,
    /// Nearest neighbor through a GLA tree.
    GlaTree,
    /// Nearest neighbor through a kd-tree.
    KdTree,
    /// Eigenvector-free kd-tree search on the quadratic form.
    KdModified,
    /// Uniformly random entry.
    Random,
    /// Exhaustive closest-in-angle to the optimal eigenvector.
    AngleExhaustive,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::RvqFull,
        Scheme::NnExhaustive,
        Scheme::GlaTree,
        Scheme::KdTree,
        Scheme::KdModified,
        Scheme::Random,
        Scheme::AngleExhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::RvqFull => "rvq_full",
            Scheme::NnExhaustive => "nn_exhaustive",
            Scheme::GlaTree => "gla_tree",
            Scheme::KdTree => "kd_tree",
            Scheme::KdModified => "kd_modified",
            Scheme::Random => "random",
            Scheme::AngleExhaustive => "angle_exhaustive",
        }
    }

    pub(crate) fn needs_eigenvector(self) -> bool {
        matches!(
            self,
            Scheme::NnExhaustive | Scheme::GlaTree | Scheme::KdTree | Scheme::AngleExhaustive
        )
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodebookPolicy {
    /// A new codebook per trial.
    Fresh,
    /// Trial `t` uses codebook `t mod count` of a fixed pool.
    Pool(usize),
}

impl FromStr for CodebookPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "fresh" {
            return Ok(CodebookPolicy::Fresh);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(CodebookPolicy::Pool(n)),
            _ => Err(Error::Config(format!("codebooks must be \"fresh\" or a positive count, got {s:?}"))),
        }
    }
}

/// One experiment: scenario dimensions, B sweep, schemes and Monte-Carlo setup.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n_t: usize,
    pub n_r: usize,
    pub snr_db: f64,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub alpha: f64,
    pub sigma2: f64,
    pub bits: Vec<u32>,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub seed: u64,
    pub codebooks: CodebookPolicy,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Mimo,
            n_t: 3,
            n_r: 4,
            snr_db: 10.0,
            n: 10,
            k: 5,
            l: 1,
            alpha: 1.0,
            sigma2: 0.1,
            bits: vec![0, 2, 4, 6, 8],
            schemes: vec![Scheme::RvqFull],
            trials: 2000,
            seed: 1,
            codebooks: CodebookPolicy::Fresh,
            out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

/// `0,2,4` or inclusive ranges `0-12`, mixed freely.
pub fn parse_bits(value: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once('-') {
            let (lo, hi): (u32, u32) = (parse("bits", lo.trim())?, parse("bits", hi.trim())?);
            if lo > hi {
                return Err(Error::Config(format!("empty bit range {part:?}")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(parse("bits", part)?);
        }
    }
    Ok(out)
}

pub fn parse_schemes(value: &str) -> Result<Vec<Scheme>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect()
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key; used by both the file parser and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = value.parse()?,
            "n_t" => self.n_t = parse(key, value)?,
            "n_r" => self.n_r = parse(key, value)?,
            "snr_db" => self.snr_db = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "l" => self.l = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "sigma2" => self.sigma2 = parse(key, value)?,
            "bits" => self.bits = parse_bits(value)?,
            "schemes" | "scheme" => self.schemes = parse_schemes(value)?,
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "codebooks" => self.codebooks = value.parse()?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.bits.is_empty() {
            return fail("bit sweep is empty".into());
        }
        if self.schemes.is_empty() {
            return fail("no schemes selected".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        match self.scenario {
            Scenario::Mimo => {
                if self.n_t == 0 || self.n_r == 0 {
                    return fail("n_t and n_r must be positive".into());
                }
                if !self.snr_db.is_finite() {
                    return fail("snr_db must be finite".into());
                }
            }
            Scenario::Cdma => {
                if self.n == 0 || self.k == 0 {
                    return fail("n and k must be positive".into());
                }
                if self.l == 0 || self.l > self.n {
                    return fail(format!("l must be in 1..={}, got {}", self.n, self.l));
                }
                if !(self.alpha > 0.0) || !(self.sigma2 >= 0.0) {
                    return fail("need alpha > 0 and sigma2 >= 0".into());
                }
                if self.sigma2 == 0.0 && self.k == 1 {
                    return fail("sigma2 = 0 with k = 1 leaves the SINR undefined".into());
                }
            }
        }
        Ok(())
    }

    /// Dimension of the covariance being quantized (`N_t` or `N`).
    pub fn dim(&self) -> usize {
        match self.scenario {
            Scenario::Mimo => self.n_t,
            Scenario::Cdma => self.n,
        }
    }

    /// Linear SNR `ρ`.
    pub fn rho(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// Bit counts in ascending order without repeats.
    pub fn sweep(&self) -> Vec<u32> {
        let mut b = self.bits.clone();
        b.sort_unstable();
        b.dedup();
        b
    }

    /// Schemes in a fixed order without repeats.
    pub fn scheme_list(&self) -> Vec<Scheme> {
        let mut s = self.schemes.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}
