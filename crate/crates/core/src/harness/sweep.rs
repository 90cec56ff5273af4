use rand::Rng;
use rayon::prelude::*;

use crate::channels::{interference_covariance, mimo_covariance, rate_from_power, sample_cdma, sample_mimo, sinr_matched_filter, PowerProfile};
use crate::codebook::{
    check_capacity, generate_rvq, select_closest_in_angle, select_nearest_neighbor, select_quadratic, Codebook,
    Objective, DEFAULT_ENTRY_CAP,
};
use crate::corelin::{eigen_decompose, quadratic_form_raw, CovarianceMatrix, OpCounter, UnitVector};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::trees::{build_gla_tree, build_kd_tree, modified_kd_search, GlaTree, KdTree, NearestNeighborTree};

use super::config::{CodebookPolicy, ExperimentConfig, Scenario, Scheme};

/// One scheme's result on one trial at one bit count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    /// Capacity in bits (MIMO) or linear SINR (CDMA).
    pub performance: f64,
    /// `v†Mv` of the selected entry.
    pub objective: f64,
    pub index: usize,
    pub macs: u64,
}

/// Per-trial outcomes of a sweep, in trial order.
#[derive(Clone, Debug)]
pub struct SweepData {
    pub scenario: Scenario,
    pub dim: usize,
    /// Feasible bit counts, ascending.
    pub bits: Vec<u32>,
    pub schemes: Vec<Scheme>,
    outcomes: Vec<Vec<Outcome>>,
}

impl SweepData {
    pub fn trials(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcome(&self, trial: usize, bits: u32, scheme: Scheme) -> Option<&Outcome> {
        let b = self.bits.iter().position(|&x| x == bits)?;
        let s = self.schemes.iter().position(|&x| x == scheme)?;
        Some(&self.outcomes[trial][b * self.schemes.len() + s])
    }

    /// All trials' outcomes for one (bits, scheme) pair.
    pub fn series(&self, bits: u32, scheme: Scheme) -> Vec<Outcome> {
        (0..self.trials()).filter_map(|t| self.outcome(t, bits, scheme).copied()).collect()
    }
}

/// A codebook at one bit count with whichever trees the schemes need.
struct Level {
    cb: Codebook,
    kd: Option<KdTree>,
    gla: Option<GlaTree>,
}

fn prepare(cfg: &ExperimentConfig, bits: &[u32], schemes: &[Scheme], index: u64) -> Result<Vec<Level>> {
    let top = *bits.last().expect("sweep is non-empty");
    let full = generate_rvq(cfg.dim(), top, &mut stream(cfg.seed, domain::CODEBOOK, index))?;
    let need_kd = schemes.iter().any(|s| matches!(s, Scheme::KdTree | Scheme::KdModified));
    let need_gla = schemes.contains(&Scheme::GlaTree);
    bits.iter()
        .map(|&b| {
            // Nested prefixes: the B-bit codebook is the first 2^B entries.
            let cb = full.prefix(b)?;
            let kd = need_kd.then(|| build_kd_tree(&cb));
            let gla = need_gla.then(|| build_gla_tree(&cb, &mut stream(cfg.seed, domain::GLA, (index << 8) | b as u64)));
            Ok(Level { cb, kd, gla })
        })
        .collect()
}

/// Bit counts within the memory cap; the rest are skipped with a warning.
fn feasible_bits(cfg: &ExperimentConfig) -> Result<Vec<u32>> {
    let sweep = cfg.sweep();
    let ok: Vec<u32> = sweep
        .iter()
        .copied()
        .filter(|&b| match check_capacity(b, DEFAULT_ENTRY_CAP) {
            Ok(()) => true,
            Err(e) => {
                log::warn!("skipping B = {b}: {e}");
                false
            }
        })
        .collect();
    if ok.is_empty() {
        return Err(Error::Capacity {
            bits: *sweep.last().expect("sweep is non-empty"),
            cap: DEFAULT_ENTRY_CAP,
        });
    }
    Ok(ok)
}

/// The per-trial channel draw reduced to what selection and scoring need.
enum Draw {
    Mimo { m: CovarianceMatrix, rho: f64 },
    Cdma { m: CovarianceMatrix, inst: crate::channels::CdmaInstance },
}

impl Draw {
    fn covariance(&self) -> &CovarianceMatrix {
        match self {
            Draw::Mimo { m, .. } | Draw::Cdma { m, .. } => m,
        }
    }

    fn performance(&self, v: &UnitVector) -> Result<f64> {
        match self {
            Draw::Mimo { m, rho } => Ok(rate_from_power(quadratic_form_raw(v.as_slice(), m), *rho)),
            Draw::Cdma { inst, .. } => sinr_matched_filter(v, inst),
        }
    }
}

fn draw(cfg: &ExperimentConfig, profile: Option<&PowerProfile>, trial: u64) -> Result<Draw> {
    let mut rng = stream(cfg.seed, domain::CHANNEL, trial);
    Ok(match cfg.scenario {
        Scenario::Mimo => {
            let ch = sample_mimo(cfg.n_t, cfg.n_r, &mut rng)?;
            Draw::Mimo {
                m: mimo_covariance(&ch),
                rho: cfg.rho(),
            }
        }
        Scenario::Cdma => {
            let profile = profile.expect("profile is built for CDMA");
            let inst = sample_cdma(cfg.n, cfg.k, cfg.l, profile, cfg.sigma2, &mut rng)?;
            Draw::Cdma {
                m: interference_covariance(&inst),
                inst,
            }
        }
    })
}

fn objective(scenario: Scenario) -> Objective {
    match scenario {
        Scenario::Mimo => Objective::Max,
        Scenario::Cdma => Objective::Min,
    }
}

fn run_trial(cfg: &ExperimentConfig, levels: &[Level], schemes: &[Scheme], profile: Option<&PowerProfile>, trial: u64) -> Result<Vec<Outcome>> {
    let draw = draw(cfg, profile, trial)?;
    let m = draw.covariance();
    let objective = objective(cfg.scenario);
    // The eigenvector the NN schemes quantize: top for power, bottom for interference.
    let target = if schemes.iter().any(|s| s.needs_eigenvector()) {
        let eig = eigen_decompose(m)?;
        Some(match objective {
            Objective::Max => eig.top().clone(),
            Objective::Min => eig.bottom().clone(),
        })
    } else {
        None
    };
    let mut pick = stream(cfg.seed, domain::PICK, trial);
    let mut out = Vec::with_capacity(levels.len() * schemes.len());
    for level in levels {
        let cb = &level.cb;
        let mut full_counter = OpCounter::new();
        let best = select_quadratic(cb, m, objective, &mut full_counter)?;
        for &scheme in schemes {
            let mut counter = OpCounter::new();
            let index = match scheme {
                Scheme::RvqFull => {
                    counter = full_counter;
                    best.index
                }
                Scheme::NnExhaustive => select_nearest_neighbor(cb, target.as_ref().unwrap(), &mut counter)?.index,
                Scheme::AngleExhaustive => select_closest_in_angle(cb, target.as_ref().unwrap(), &mut counter)?.index,
                Scheme::KdTree => level.kd.as_ref().unwrap().nearest(target.as_ref().unwrap(), &mut counter)?.index,
                Scheme::GlaTree => level.gla.as_ref().unwrap().nearest(target.as_ref().unwrap(), &mut counter)?.index,
                Scheme::KdModified => modified_kd_search(level.kd.as_ref().unwrap(), m, objective, &mut counter)?.index,
                Scheme::Random => pick.random_range(0..cb.len()),
            };
            let v = cb.entry_vector(index);
            let value = quadratic_form_raw(v.as_slice(), m);
            let slack = 1e-12 * (1.0 + best.score.abs());
            let beats = match objective {
                Objective::Max => value > best.score + slack,
                Objective::Min => value < best.score - slack,
            };
            if beats {
                return Err(Error::Contract(format!(
                    "dominance violated: {scheme} scored {value} against exhaustive {} (trial {trial}, B = {})",
                    best.score,
                    cb.bits()
                )));
            }
            out.push(Outcome {
                performance: draw.performance(&v)?,
                objective: value,
                index,
                macs: counter.macs(),
            });
        }
    }
    Ok(out)
}

/// Runs every trial of `cfg` for its scenario; trial order and all random
/// streams depend only on the seed, so thread count never changes results.
pub fn simulate(cfg: &ExperimentConfig) -> Result<SweepData> {
    cfg.validate()?;
    let bits = feasible_bits(cfg)?;
    let schemes = cfg.scheme_list();
    let profile = match cfg.scenario {
        Scenario::Cdma => Some(PowerProfile::uniform(cfg.l, cfg.alpha)?),
        Scenario::Mimo => None,
    };
    let pool = match cfg.codebooks {
        CodebookPolicy::Pool(n) => Some(
            (0..n as u64)
                .into_par_iter()
                .map(|i| prepare(cfg, &bits, &schemes, i))
                .collect::<Result<Vec<_>>>()?,
        ),
        CodebookPolicy::Fresh => None,
    };
    let outcomes = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| match &pool {
            Some(p) => run_trial(cfg, &p[t as usize % p.len()], &schemes, profile.as_ref(), t),
            None => run_trial(cfg, &prepare(cfg, &bits, &schemes, t)?, &schemes, profile.as_ref(), t),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepData {
        scenario: cfg.scenario,
        dim: cfg.dim(),
        bits,
        schemes,
        outcomes,
    })
}

fn expect_scenario(cfg: &ExperimentConfig, scenario: Scenario) -> Result<()> {
    if cfg.scenario != scenario {
        return Err(Error::Config(format!("expected scenario {scenario:?}, config has {:?}", cfg.scenario)));
    }
    Ok(())
}

pub fn simulate_mimo(cfg: &ExperimentConfig) -> Result<SweepData> {
    expect_scenario(cfg, Scenario::Mimo)?;
    simulate(cfg)
}

pub fn simulate_cdma(cfg: &ExperimentConfig) -> Result<SweepData> {
    expect_scenario(cfg, Scenario::Cdma)?;
    simulate(cfg)
}
