//! Large-system predictors for RVQ beamforming and signature quantization.
//!
//! All logarithms are base 2. Ratios are per degree of freedom:
//! `b̄ = B/N`, `k̄ = K/N`, `n̄_r = N_r/N_t`.

use crate::error::{Error, Result};

/// Normalized system parameters; unused fields are ignored by each predictor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LargeSystemParams {
    pub b_bar: f64,
    pub k_bar: f64,
    pub nr_bar: f64,
    pub rho: f64,
    pub alpha: f64,
    pub sigma2: f64,
}

impl LargeSystemParams {
    pub fn mimo(b_bar: f64, nr_bar: f64, rho: f64) -> Self {
        Self {
            b_bar,
            k_bar: 0.0,
            nr_bar,
            rho,
            alpha: 1.0,
            sigma2: 0.0,
        }
    }

    pub fn cdma(b_bar: f64, k_bar: f64, alpha: f64, sigma2: f64) -> Self {
        Self {
            b_bar,
            k_bar,
            nr_bar: 1.0,
            rho: 0.0,
            alpha,
            sigma2,
        }
    }
}

/// Limit of `|ṽ†u₁|²` for the closest-in-angle RVQ entry: `1 − 2^{−b̄}`.
pub fn overlap_limit(b_bar: f64) -> f64 {
    1.0 - (-b_bar).exp2()
}

/// Limit of `Σ_{i≥2} λᵢ|ṽ†uᵢ|²`: `2^{−b̄}` times the mean eigenvalue.
pub fn lemma1_residual(b_bar: f64, mean_eigenvalue: f64) -> f64 {
    (-b_bar).exp2() * mean_eigenvalue
}

fn check_conditional(s1_sq: f64, n: usize) -> Result<()> {
    if !(0.0..1.0).contains(&s1_sq) {
        return Err(Error::Contract(format!("s1² = {s1_sq} outside [0, 1)")));
    }
    if n < 2 {
        return Err(Error::Contract(format!("N = {n} < 2")));
    }
    Ok(())
}

/// `P(|ṽ†u₂|² ≤ x | |ṽ†u₁|² ≥ s₁²) = 1 − (1 − x/(1 − s₁²))^{N−1}`.
pub fn conditional_overlap_cdf(x: f64, s1_sq: f64, n: usize) -> Result<f64> {
    check_conditional(s1_sq, n)?;
    let top = 1.0 - s1_sq;
    if !(0.0..=top).contains(&x) {
        return Err(Error::Contract(format!("x = {x} outside [0, {top}]")));
    }
    Ok(1.0 - (1.0 - x / top).powi(n as i32 - 1))
}

/// Mean under [`conditional_overlap_cdf`]: `(1 − s₁²)/N`.
pub fn conditional_overlap_mean(s1_sq: f64, n: usize) -> Result<f64> {
    check_conditional(s1_sq, n)?;
    Ok((1.0 - s1_sq) / n as f64)
}

/// How the spectrum is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumModel {
    /// `H†H` with entries of variance `1/N_r`; ratio `n̄_r`, mean `1/n̄_r`.
    Mimo,
    /// Interference covariance with unit-gain interferers; ratio `k̄`, mean `k̄`.
    Cdma,
}

/// Limiting largest, smallest and mean eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumStats {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub mean: f64,
}

/// Marchenko–Pastur edge and mean statistics. Below ratio 1 the matrix is
/// rank deficient, so the smallest eigenvalue is 0.
pub fn mp_spectrum_stats(ratio: f64, model: SpectrumModel) -> Result<SpectrumStats> {
    if !(ratio > 0.0) {
        return Err(Error::Contract(format!("spectrum ratio {ratio} must be positive")));
    }
    let r = ratio.sqrt().recip();
    let lambda_min = if ratio < 1.0 { 0.0 } else { (1.0 - r).powi(2) };
    Ok(SpectrumStats {
        lambda_max: (1.0 + r).powi(2),
        lambda_min,
        mean: match model {
            SpectrumModel::Mimo => ratio.recip(),
            SpectrumModel::Cdma => ratio,
        },
    })
}

/// Large-system capacity of the quantized eigen-beamformer, bits per use.
pub fn theorem1_capacity(p: &LargeSystemParams) -> Result<f64> {
    if !(p.nr_bar > 0.0) || p.rho < 0.0 {
        return Err(Error::Contract(format!("need n̄_r > 0 and ρ ≥ 0, got {} and {}", p.nr_bar, p.rho)));
    }
    let lambda_max = (1.0 + p.nr_bar.sqrt().recip()).powi(2);
    let residual = (-p.b_bar).exp2();
    Ok((1.0 + p.rho * lambda_max * (1.0 - residual) + p.rho / p.nr_bar * residual).log2())
}

/// Both branches of the SINR limit, for diagnostics near `k̄ = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theorem2Branches {
    /// The `k̄ ≤ 1` expression.
    pub light: Option<f64>,
    /// The `k̄ > 1` expression (undefined at `k̄ = 0`).
    pub heavy: Option<f64>,
    /// The branch the predictor uses.
    pub selected: f64,
}

fn ratio_or_none(alpha: f64, denom: f64) -> Option<f64> {
    (denom != 0.0 && denom.is_finite()).then(|| alpha / denom)
}

pub fn theorem2_branches(p: &LargeSystemParams) -> Result<Theorem2Branches> {
    if p.k_bar < 0.0 || p.sigma2 < 0.0 || !(p.alpha > 0.0) {
        return Err(Error::Contract(format!(
            "need k̄ ≥ 0, σ² ≥ 0, α > 0; got {}, {}, {}",
            p.k_bar, p.sigma2, p.alpha
        )));
    }
    let noise = p.alpha * p.sigma2;
    let light = ratio_or_none(p.alpha, p.k_bar * (1.0 - p.b_bar).exp2() + noise);
    let heavy = (p.k_bar > 0.0)
        .then(|| {
            let edge = (1.0 - p.k_bar.sqrt().recip()).powi(2);
            let residual = (-p.b_bar).exp2();
            ratio_or_none(p.alpha, edge * (1.0 - residual) + p.k_bar * residual + noise)
        })
        .flatten();
    let selected = if p.k_bar <= 1.0 { light } else { heavy };
    let selected = selected.ok_or_else(|| Error::Degenerate("SINR limit has a zero denominator".into()))?;
    Ok(Theorem2Branches { light, heavy, selected })
}

/// Large-system matched-filter SINR with quantized signatures (linear).
pub fn theorem2_sinr(p: &LargeSystemParams) -> Result<f64> {
    theorem2_branches(p).map(|b| b.selected)
}
