//! MIMO and reverse-link CDMA channel models.
//!
//! Only covariances are simulated: capacity and matched-filter SINR depend on
//! the channel through `H†H` and `C₁†H₁H₁†C₁`, so transmit symbols and noise
//! realizations are never drawn.

use rand::Rng;

use crate::corelin::{check_dim, inner, CMatrix, CovarianceMatrix, UnitVector, C64};
use crate::error::{Error, Result};
use crate::rng::complex_gaussian;

/// `N_r × N_t` flat-fading channel with iid `CN(0, 1/N_r)` gains, so each
/// transmit antenna reaches the receiver with unit total power.
#[derive(Clone, Debug)]
pub struct MimoChannel {
    h: CMatrix,
}

impl MimoChannel {
    pub fn from_matrix(h: CMatrix) -> Result<Self> {
        if h.rows() == 0 || h.cols() == 0 {
            return Err(Error::Contract("channel matrix must be non-empty".into()));
        }
        Ok(Self { h })
    }

    pub fn n_t(&self) -> usize {
        self.h.cols()
    }

    pub fn n_r(&self) -> usize {
        self.h.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.h
    }
}

pub fn sample_mimo<R: Rng + ?Sized>(n_t: usize, n_r: usize, rng: &mut R) -> Result<MimoChannel> {
    if n_t == 0 || n_r == 0 {
        return Err(Error::Contract(format!("antenna counts must be positive (n_t={n_t}, n_r={n_r})")));
    }
    let variance = 1.0 / n_r as f64;
    let h = CMatrix::from_fn(n_r, n_t, |_, _| complex_gaussian(rng, variance));
    Ok(MimoChannel { h })
}

/// `H†H` (`N_t × N_t`).
pub fn mimo_covariance(ch: &MimoChannel) -> CovarianceMatrix {
    CovarianceMatrix::from_gram(&ch.h)
}

/// `log₂(1 + ρ · power)`.
pub fn rate_from_power(power: f64, rho: f64) -> f64 {
    (1.0 + rho * power).log2()
}

/// `log₂(1 + ρ v†H†Hv)` for one channel realization (bits per channel use).
pub fn instantaneous_rate(v: &UnitVector, ch: &MimoChannel, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Contract(format!("SNR must be positive, got {rho}")));
    }
    let hv = ch.h.mul_vec(v.as_slice())?;
    let power: f64 = hv.iter().map(|z| z.norm_sqr()).sum();
    Ok(rate_from_power(power, rho))
}

/// Per-path average powers `E|h_l|²` for the desired user and for each
/// interferer. The desired user's paths sum to `α`; interferers' sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerProfile {
    desired: Vec<f64>,
    interferer: Vec<f64>,
}

impl PowerProfile {
    /// Equal power on all `l` paths.
    pub fn uniform(l: usize, alpha: f64) -> Result<Self> {
        if l == 0 {
            return Err(Error::Contract("at least one path is required".into()));
        }
        Self::new(vec![alpha / l as f64; l], vec![1.0 / l as f64; l])
    }

    pub fn new(desired: Vec<f64>, interferer: Vec<f64>) -> Result<Self> {
        if desired.is_empty() || desired.len() != interferer.len() {
            return Err(Error::Contract(format!(
                "path profiles must be non-empty and equal length ({} vs {})",
                desired.len(),
                interferer.len()
            )));
        }
        if desired.iter().chain(&interferer).any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Contract("path powers must be finite and nonnegative".into()));
        }
        let interferer_total: f64 = interferer.iter().sum();
        if (interferer_total - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("interferer paths must sum to 1, got {interferer_total}")));
        }
        Ok(Self { desired, interferer })
    }

    pub fn paths(&self) -> usize {
        self.desired.len()
    }

    /// Total gain `α` of user 1.
    pub fn alpha(&self) -> f64 {
        self.desired.iter().sum()
    }

    pub fn desired(&self) -> &[f64] {
        &self.desired
    }

    pub fn interferer(&self) -> &[f64] {
        &self.interferer
    }
}

/// `N × N` lower-triangular banded Toeplitz matrix with first column
/// `(h₁, …, h_L, 0, …)`: truncated linear convolution, no cyclic wrap.
pub fn build_cdma_channel_matrix(gains: &[C64], n: usize) -> Result<CMatrix> {
    let l = gains.len();
    if l == 0 || l > n {
        return Err(Error::Contract(format!("need 1 <= L <= N, got L={l}, N={n}")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        if i >= j && i - j < l {
            gains[i - j]
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// One reverse-link CDMA realization as seen by user 1.
#[derive(Clone, Debug)]
pub struct CdmaInstance {
    c1: CMatrix,
    /// Columns `C_k s_k`, `k = 2..K`.
    h1: CMatrix,
    sigma2: f64,
    signatures: Vec<UnitVector>,
    /// Path gains, row `k` for user `k + 1`.
    gains: Vec<Vec<C64>>,
}

impl CdmaInstance {
    /// Assembles an instance from explicit gains and interferer signatures.
    /// `gains[0]` belongs to user 1, `gains[k]` to the user with signature
    /// `signatures[k - 1]`.
    pub fn from_parts(n: usize, gains: Vec<Vec<C64>>, signatures: Vec<UnitVector>, sigma2: f64) -> Result<Self> {
        if gains.len() != signatures.len() + 1 {
            return Err(Error::Contract(format!(
                "{} gain rows for {} interferers",
                gains.len(),
                signatures.len()
            )));
        }
        if !(sigma2 >= 0.0) {
            return Err(Error::Contract(format!("noise variance must be nonnegative, got {sigma2}")));
        }
        let c1 = build_cdma_channel_matrix(&gains[0], n)?;
        let mut columns = Vec::with_capacity(signatures.len());
        for (g, s) in gains[1..].iter().zip(&signatures) {
            check_dim(n, s.dim())?;
            columns.push(build_cdma_channel_matrix(g, n)?.mul_vec(s.as_slice())?);
        }
        let h1 = CMatrix::from_columns(n, &columns)?;
        Ok(Self {
            c1,
            h1,
            sigma2,
            signatures,
            gains,
        })
    }

    pub fn n(&self) -> usize {
        self.c1.rows()
    }

    /// Number of users including user 1.
    pub fn k(&self) -> usize {
        self.gains.len()
    }

    pub fn c1(&self) -> &CMatrix {
        &self.c1
    }

    pub fn h1(&self) -> &CMatrix {
        &self.h1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn interferer_signatures(&self) -> &[UnitVector] {
        &self.signatures
    }

    pub fn path_gains(&self) -> &[Vec<C64>] {
        &self.gains
    }

    /// Channel matrix of user `k` (1-based, as in the model).
    pub fn channel_matrix(&self, k: usize) -> Result<CMatrix> {
        if k == 0 || k > self.k() {
            return Err(Error::Contract(format!("user {k} out of range 1..={}", self.k())));
        }
        build_cdma_channel_matrix(&self.gains[k - 1], self.n())
    }
}

/// Draws path gains for all `K` users and iid isotropic signatures for the
/// `K − 1` interferers.
pub fn sample_cdma<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    l: usize,
    profile: &PowerProfile,
    sigma2: f64,
    rng: &mut R,
) -> Result<CdmaInstance> {
    if k == 0 || n == 0 {
        return Err(Error::Contract(format!("need N >= 1 and K >= 1, got N={n}, K={k}")));
    }
    if profile.paths() != l {
        return Err(Error::Contract(format!("profile has {} paths, expected L={l}", profile.paths())));
    }
    let draw = |powers: &[f64], rng: &mut R| powers.iter().map(|&p| complex_gaussian(rng, p)).collect::<Vec<_>>();
    let mut gains = Vec::with_capacity(k);
    let mut signatures = Vec::with_capacity(k - 1);
    gains.push(draw(profile.desired(), rng));
    for _ in 1..k {
        gains.push(draw(profile.interferer(), rng));
        signatures.push(random_unit(n, rng)?);
    }
    CdmaInstance::from_parts(n, gains, signatures, sigma2)
}

/// Isotropic unit vector in `C^n`.
pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitVector> {
    let g: Vec<C64> = (0..n).map(|_| complex_gaussian(rng, 1.0)).collect();
    UnitVector::normalize(crate::corelin::ComplexVector::new(g)?)
}

/// `C₁† H₁ H₁† C₁`, so that `s₁† M s₁ = Σ_{k≥2} |s₁† C₁† C_k s_k|²`.
pub fn interference_covariance(inst: &CdmaInstance) -> CovarianceMatrix {
    if inst.h1.cols() == 0 {
        return CovarianceMatrix::zero(inst.n());
    }
    let g = inst.h1.adjoint().matmul(&inst.c1).expect("H₁ and C₁ share N rows");
    CovarianceMatrix::from_gram(&g)
}

/// Matched-filter output SINR `(s₁†C₁†C₁s₁)² / (I₁ + σ² s₁†C₁†C₁s₁)`.
pub fn sinr_matched_filter(s1: &UnitVector, inst: &CdmaInstance) -> Result<f64> {
    check_dim(inst.n(), s1.dim())?;
    let received = inst.c1.mul_vec(s1.as_slice())?;
    let signal: f64 = received.iter().map(|z| z.norm_sqr()).sum();
    let interference: f64 = (0..inst.h1.cols())
        .map(|j| inner(&received, &inst.h1.column(j)).norm_sqr())
        .sum();
    sinr_from_parts(signal, interference, inst.sigma2)
}

pub fn sinr_from_parts(signal: f64, interference: f64, sigma2: f64) -> Result<f64> {
    let denom = interference + sigma2 * signal;
    if !(denom > 0.0) {
        return Err(Error::Degenerate(format!(
            "SINR denominator is {denom} (interference {interference}, noise variance {sigma2})"
        )));
    }
    Ok(signal * signal / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::generate_rvq;
    use crate::corelin::{eigen_decompose, quadratic_form, OpCounter};
    use crate::rng::stream;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn mimo_draw_is_reproducible() {
        let a = sample_mimo(1, 1, &mut stream(5, 0, 0)).unwrap();
        let b = sample_mimo(1, 1, &mut stream(5, 0, 0)).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert!(sample_mimo(0, 2, &mut stream(5, 0, 0)).is_err());
    }

    #[test]
    fn mimo_gain_moments() {
        let mut rng = stream(9, 0, 0);
        let draws = 10_000;
        let mut entry_power = 0.0;
        let mut column_power = [0.0; 3];
        for _ in 0..draws {
            let ch = sample_mimo(3, 4, &mut rng).unwrap();
            for r in 0..4 {
                for (col, acc) in column_power.iter_mut().enumerate() {
                    let p = ch.matrix()[(r, col)].norm_sqr();
                    entry_power += p;
                    *acc += p;
                }
            }
        }
        let mean_entry = entry_power / (draws * 12) as f64;
        assert!((mean_entry - 0.25).abs() < 0.05 * 0.25, "{mean_entry}");
        for acc in column_power {
            let mean_col = acc / draws as f64;
            assert!((mean_col - 1.0).abs() < 0.05, "{mean_col}");
        }
    }

    #[test]
    fn mimo_covariance_examples() {
        let eye = MimoChannel::from_matrix(CMatrix::identity(3)).unwrap();
        assert_eq!(mimo_covariance(&eye).matrix(), &CMatrix::identity(3));

        let mut rng = stream(2, 0, 0);
        let mut h = sample_mimo(3, 4, &mut rng).unwrap().matrix().clone();
        for r in 0..4 {
            h[(r, 1)] = c(0.0, 0.0);
        }
        let cov = mimo_covariance(&MimoChannel::from_matrix(h.clone()).unwrap());
        assert_eq!(cov.matrix()[(1, 1)], c(0.0, 0.0));

        let h = sample_mimo(3, 5, &mut rng).unwrap();
        let cov = mimo_covariance(&h);
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = c(0.0, 0.0);
                for r in 0..5 {
                    acc += h.matrix()[(r, i)].conj() * h.matrix()[(r, j)];
                }
                assert!((acc - cov.matrix()[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn mimo_covariance_is_psd() {
        let mut rng = stream(4, 0, 0);
        for _ in 0..100 {
            let cov = mimo_covariance(&sample_mimo(4, 3, &mut rng).unwrap());
            let eig = eigen_decompose(&cov).unwrap();
            let top = eig.values()[0];
            assert!(eig.values().iter().all(|&l| l >= -1e-9 * top));
        }
    }

    #[test]
    fn rate_examples() {
        let eye = MimoChannel::from_matrix(CMatrix::identity(2)).unwrap();
        let v = UnitVector::basis(2, 1).unwrap();
        assert!((instantaneous_rate(&v, &eye, 10.0).unwrap() - 11f64.log2()).abs() < 1e-12);
        assert!(instantaneous_rate(&v, &eye, 1e-12).unwrap() < 1e-11);
        assert!(instantaneous_rate(&v, &eye, 0.0).is_err());

        let mut rng = stream(6, 0, 0);
        let ch = sample_mimo(3, 4, &mut rng).unwrap();
        let eig = eigen_decompose(&mimo_covariance(&ch)).unwrap();
        let best = instantaneous_rate(eig.top(), &ch, 10.0).unwrap();
        let cb = generate_rvq(3, 8, &mut rng).unwrap();
        for j in 0..cb.len() {
            let r = instantaneous_rate(&cb.entry_vector(j), &ch, 10.0).unwrap();
            assert!(r <= best + 1e-12);
        }
    }

    #[test]
    fn channel_matrix_structure() {
        assert_eq!(build_cdma_channel_matrix(&[c(1.0, 0.0)], 4).unwrap(), CMatrix::identity(4));

        let (a, b) = (c(0.3, 0.1), c(-0.2, 0.7));
        let m = build_cdma_channel_matrix(&[a, b], 3).unwrap();
        let z = c(0.0, 0.0);
        let want = CMatrix::from_row_major(3, 3, vec![a, z, z, b, a, z, z, b, a]).unwrap();
        assert_eq!(m, want);

        assert!(build_cdma_channel_matrix(&[a, b, a], 2).is_err());
        assert!(build_cdma_channel_matrix(&[], 2).is_err());
    }

    #[test]
    fn channel_matrix_is_truncated_convolution() {
        let mut rng = stream(8, 0, 0);
        let h: Vec<C64> = (0..3).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let s: Vec<C64> = (0..8).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let cs = build_cdma_channel_matrix(&h, 8).unwrap().mul_vec(&s).unwrap();
        for i in 0..8 {
            let mut conv = c(0.0, 0.0);
            for (l, hl) in h.iter().enumerate() {
                if i >= l {
                    conv += hl * s[i - l];
                }
            }
            assert!((conv - cs[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn single_user_has_no_interference() {
        let profile = PowerProfile::uniform(2, 1.0).unwrap();
        let inst = sample_cdma(6, 1, 2, &profile, 0.1, &mut stream(1, 0, 0)).unwrap();
        assert_eq!(inst.h1().cols(), 0);
        let m = interference_covariance(&inst);
        assert_eq!(m.matrix(), &CMatrix::zeros(6, 6));
        let s = random_unit(6, &mut stream(2, 0, 0)).unwrap();
        let mut counter = OpCounter::new();
        assert_eq!(quadratic_form(&s, &m, &mut counter).unwrap(), 0.0);
    }

    #[test]
    fn cdma_draw_is_reproducible() {
        let profile = PowerProfile::uniform(2, 1.0).unwrap();
        let a = sample_cdma(6, 4, 2, &profile, 0.1, &mut stream(3, 0, 0)).unwrap();
        let b = sample_cdma(6, 4, 2, &profile, 0.1, &mut stream(3, 0, 0)).unwrap();
        assert_eq!(a.h1(), b.h1());
        assert_eq!(a.c1(), b.c1());
    }

    #[test]
    fn desired_user_gain_moment() {
        let profile = PowerProfile::uniform(2, 1.0).unwrap();
        assert!((profile.alpha() - 1.0).abs() <= 1e-12);
        let mut rng = stream(12, 0, 0);
        let draws = 10_000;
        let total: f64 = (0..draws)
            .map(|_| {
                let inst = sample_cdma(4, 2, 2, &profile, 0.1, &mut rng).unwrap();
                inst.path_gains()[0].iter().map(|h| h.norm_sqr()).sum::<f64>()
            })
            .sum();
        let mean = total / draws as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn power_profile_validation() {
        assert!(PowerProfile::uniform(0, 1.0).is_err());
        assert!(PowerProfile::new(vec![0.5], vec![0.5]).is_err());
        assert!(PowerProfile::new(vec![0.5, 0.5], vec![1.0]).is_err());
        let p = PowerProfile::new(vec![1.5, 0.5], vec![0.25, 0.75]).unwrap();
        assert_eq!(p.alpha(), 2.0);
    }

    #[test]
    fn interference_covariance_identity_channels() {
        let s2 = random_unit(4, &mut stream(7, 0, 0)).unwrap();
        let one = vec![c(1.0, 0.0)];
        let inst = CdmaInstance::from_parts(4, vec![one.clone(), one], vec![s2.clone()], 0.1).unwrap();
        let m = interference_covariance(&inst);
        for r in 0..4 {
            for col in 0..4 {
                let want = s2.as_slice()[r] * s2.as_slice()[col].conj();
                assert!((m.matrix()[(r, col)] - want).norm() < 1e-14);
            }
        }
    }

    /// Eq. 7's left-hand side, straight from the raw signatures and gains.
    fn interference_oracle(s1: &UnitVector, inst: &CdmaInstance) -> f64 {
        let c1 = inst.channel_matrix(1).unwrap();
        let c1s1 = c1.mul_vec(s1.as_slice()).unwrap();
        let mut total = 0.0;
        for (k, sk) in inst.interferer_signatures().iter().enumerate() {
            let ck = inst.channel_matrix(k + 2).unwrap();
            let cksk = ck.mul_vec(sk.as_slice()).unwrap();
            let mut acc = c(0.0, 0.0);
            for i in 0..inst.n() {
                acc += c1s1[i].conj() * cksk[i];
            }
            total += acc.norm_sqr();
        }
        total
    }

    #[test]
    fn interference_covariance_matches_direct_sum() {
        let mut rng = stream(21, 0, 0);
        for trial in 0..100 {
            let n = 2 + trial % 7;
            let k = 1 + trial % 6;
            let l = 1 + trial % n.min(3);
            let profile = PowerProfile::uniform(l, 1.3).unwrap();
            let inst = sample_cdma(n, k, l, &profile, 0.2, &mut rng).unwrap();
            let m = interference_covariance(&inst);
            let s1 = random_unit(n, &mut rng).unwrap();
            let mut counter = OpCounter::new();
            let q = quadratic_form(&s1, &m, &mut counter).unwrap();
            let want = interference_oracle(&s1, &inst);
            assert!((q - want).abs() <= 1e-9 * want.max(1.0), "{q} vs {want}");
        }
    }

    #[test]
    fn sinr_examples() {
        let one = vec![c(1.0, 0.0)];
        let s1 = UnitVector::basis(3, 0).unwrap();
        let alone = CdmaInstance::from_parts(3, vec![one.clone()], vec![], 0.1).unwrap();
        assert!((sinr_matched_filter(&s1, &alone).unwrap() - 10.0).abs() < 1e-12);

        let orth = CdmaInstance::from_parts(3, vec![one.clone(), one.clone()], vec![UnitVector::basis(3, 1).unwrap()], 0.1).unwrap();
        assert!((sinr_matched_filter(&s1, &orth).unwrap() - 10.0).abs() < 1e-12);

        let silent = CdmaInstance::from_parts(3, vec![one], vec![], 0.0).unwrap();
        assert!(matches!(sinr_matched_filter(&s1, &silent), Err(Error::Degenerate(_))));
    }

    #[test]
    fn sinr_matches_raw_recomputation() {
        let mut rng = stream(33, 0, 0);
        let profile = PowerProfile::uniform(3, 2.0).unwrap();
        for _ in 0..50 {
            let inst = sample_cdma(8, 5, 3, &profile, 0.1, &mut rng).unwrap();
            let s1 = random_unit(8, &mut rng).unwrap();
            let c1s1 = inst.channel_matrix(1).unwrap().mul_vec(s1.as_slice()).unwrap();
            let signal: f64 = c1s1.iter().map(|z| z.norm_sqr()).sum();
            let want = signal * signal / (interference_oracle(&s1, &inst) + 0.1 * signal);
            let got = sinr_matched_filter(&s1, &inst).unwrap();
            assert!((got - want).abs() <= 1e-10 * want.max(1.0));
        }
    }

    #[test]
    fn signature_choice_is_irrelevant_without_interference() {
        let inst = CdmaInstance::from_parts(4, vec![vec![c(1.0, 0.0)]], vec![], 0.1).unwrap();
        let cb = generate_rvq(4, 6, &mut stream(40, 0, 0)).unwrap();
        let sinrs: Vec<f64> = (0..cb.len())
            .map(|j| sinr_matched_filter(&cb.entry_vector(j), &inst).unwrap())
            .collect();
        let max = sinrs.iter().cloned().fold(f64::MIN, f64::max);
        let min = sinrs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max - min <= 1e-9);
    }
}
