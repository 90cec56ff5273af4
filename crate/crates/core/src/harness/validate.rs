//! Monte-Carlo checks of the large-system overlap statistics.

use rayon::prelude::*;

use crate::asymptotics::lemma1_residual;
use crate::channels::{mimo_covariance, random_unit, sample_mimo};
use crate::codebook::{generate_rvq, select_closest_in_angle};
use crate::corelin::{eigen_decompose, inner, OpCounter};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::stats::MeanAccumulator;

/// Per-trial overlap of the closest-in-angle entry with the eigenbasis of an
/// `N × N` Wishart covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapTrial {
    /// `|ṽ†u₁|²`.
    pub overlap: f64,
    /// `Σ_{i≥2} λᵢ|ṽ†uᵢ|²`.
    pub residual: f64,
    /// `(1/N) Σ_{i≥2} λᵢ`.
    pub mean_lower_eigenvalue: f64,
    /// `(1/N) Σ λᵢ`.
    pub mean_eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapSummary {
    pub trials: usize,
    pub mean_overlap: f64,
    pub overlap_stderr: f64,
    pub mean_residual: f64,
    /// `2^{−b̄}` times the mean of `(1/N) Σ_{i≥2} λᵢ`.
    pub residual_target: f64,
    /// `2^{−b̄}` times the mean of `(1/N) Σ λᵢ`.
    pub residual_target_trace: f64,
}

/// Fresh codebook and channel per trial; deterministic in `seed`.
pub fn overlap_trials(n: usize, bits: u32, trials: usize, seed: u64) -> Result<Vec<OverlapTrial>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let m = mimo_covariance(&sample_mimo(n, n, &mut stream(seed, domain::VALIDATION, t))?);
            let eig = eigen_decompose(&m)?;
            let cb = generate_rvq(n, bits, &mut stream(seed, domain::CODEBOOK, t))?;
            let pick = select_closest_in_angle(&cb, eig.top(), &mut OpCounter::new())?;
            let v = pick.vector.as_slice();
            let residual = eig.values()[1..]
                .iter()
                .zip(&eig.vectors()[1..])
                .map(|(l, u)| l * inner(u.as_slice(), v).norm_sqr())
                .sum();
            Ok(OverlapTrial {
                overlap: pick.score,
                residual,
                mean_lower_eigenvalue: eig.values()[1..].iter().sum::<f64>() / n as f64,
                mean_eigenvalue: eig.values().iter().sum::<f64>() / n as f64,
            })
        })
        .collect()
}

pub fn summarize_overlap(trials: &[OverlapTrial], b_bar: f64) -> OverlapSummary {
    let overlap: MeanAccumulator = trials.iter().map(|t| t.overlap).collect();
    let residual: MeanAccumulator = trials.iter().map(|t| t.residual).collect();
    let lower: MeanAccumulator = trials.iter().map(|t| t.mean_lower_eigenvalue).collect();
    let all: MeanAccumulator = trials.iter().map(|t| t.mean_eigenvalue).collect();
    OverlapSummary {
        trials: trials.len(),
        mean_overlap: overlap.mean(),
        overlap_stderr: overlap.stderr(),
        mean_residual: residual.mean(),
        residual_target: lemma1_residual(b_bar, lower.mean()),
        residual_target_trace: lemma1_residual(b_bar, all.mean()),
    }
}

/// Samples `|v†u₂|²` for isotropic `v` conditioned on `|v†u₁|² ≥ s₁²`, where
/// `u₁, u₂` are the top two eigenvectors of a Wishart draw.
pub fn conditional_overlap_samples(n: usize, s1_sq: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 2 || !(0.0..1.0).contains(&s1_sq) {
        return Err(Error::Contract(format!("need N >= 2 and s1² in [0, 1), got {n} and {s1_sq}")));
    }
    let mut rng = stream(seed, domain::VALIDATION, u64::MAX);
    let eig = eigen_decompose(&mimo_covariance(&sample_mimo(n, n, &mut rng)?))?;
    let (u1, u2) = (eig.vectors()[0].as_slice(), eig.vectors()[1].as_slice());
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = random_unit(n, &mut rng)?;
        if inner(u1, v.as_slice()).norm_sqr() >= s1_sq {
            out.push(inner(u2, v.as_slice()).norm_sqr());
        }
    }
    Ok(out)
}
