//! Random vector quantization codebooks and the exhaustive selection rules.
//!
//! Entries are drawn in order from one stream, so a `B`-bit codebook is the
//! prefix of the `B+1`-bit codebook generated from the same seed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::corelin::{
    check_dim, inner, quadratic_form_macs, quadratic_form_raw, re_inner, CovarianceMatrix, OpCounter, UnitVector, C64,
};
use crate::error::{Error, Result};
use crate::rng::complex_gaussian;

/// Largest codebook [`generate_rvq`] will allocate.
pub const DEFAULT_ENTRY_CAP: usize = 1 << 24;

pub const CODEBOOK_MAGIC: &[u8; 4] = b"RVQ1";

/// `2^B` unit-norm entries of dimension `N`, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    dim: usize,
    bits: u32,
    data: Vec<C64>,
}

impl Codebook {
    /// Wraps explicit entries; each must be unit-norm to `1e-9`.
    pub fn from_entries(dim: usize, entries: &[UnitVector]) -> Result<Self> {
        let len = entries.len();
        if dim == 0 || len == 0 || !len.is_power_of_two() {
            return Err(Error::Contract(format!(
                "codebook needs N >= 1 and a power-of-two entry count, got N={dim}, {len} entries"
            )));
        }
        let mut data = Vec::with_capacity(len * dim);
        for e in entries {
            check_dim(dim, e.dim())?;
            data.extend_from_slice(e.as_slice());
        }
        Ok(Self {
            dim,
            bits: len.trailing_zeros(),
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        1 << self.bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn entry(&self, j: usize) -> &[C64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn entry_vector(&self, j: usize) -> UnitVector {
        UnitVector::from_vec_unchecked(self.entry(j).to_vec())
    }

    pub fn iter(&self) -> impl Iterator<Item = &[C64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// The first `2^bits` entries.
    pub fn prefix(&self, bits: u32) -> Result<Codebook> {
        if bits > self.bits {
            return Err(Error::Contract(format!(
                "cannot take a {bits}-bit prefix of a {}-bit codebook",
                self.bits
            )));
        }
        Ok(Self {
            dim: self.dim,
            bits,
            data: self.data[..(1usize << bits) * self.dim].to_vec(),
        })
    }
}

pub fn generate_rvq<R: Rng + ?Sized>(n: usize, bits: u32, rng: &mut R) -> Result<Codebook> {
    generate_rvq_capped(n, bits, DEFAULT_ENTRY_CAP, rng)
}

/// Each entry is `g / ‖g‖` with `g` iid standard complex Gaussian.
pub fn generate_rvq_capped<R: Rng + ?Sized>(n: usize, bits: u32, cap: usize, rng: &mut R) -> Result<Codebook> {
    if n == 0 {
        return Err(Error::Contract("codebook dimension must be at least 1".into()));
    }
    check_capacity(bits, cap)?;
    let len = 1usize << bits;
    let mut data = Vec::with_capacity(len * n);
    let mut g = vec![C64::new(0.0, 0.0); n];
    for _ in 0..len {
        // A zero draw has probability zero; redraw rather than divide by it.
        let norm = loop {
            for z in g.iter_mut() {
                *z = complex_gaussian(rng, 1.0);
            }
            let norm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                break norm;
            }
        };
        data.extend(g.iter().map(|z| z / norm));
    }
    Ok(Codebook { dim: n, bits, data })
}

pub fn check_capacity(bits: u32, cap: usize) -> Result<()> {
    if bits >= usize::BITS - 1 || (1usize << bits) > cap {
        return Err(Error::Capacity { bits, cap });
    }
    Ok(())
}

/// Which way a quadratic-form search optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Received power (MIMO beamforming).
    Max,
    /// Interference power (CDMA signatures).
    Min,
}

impl Objective {
    /// Strict improvement, so the earlier candidate wins ties.
    #[inline]
    pub fn better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Objective::Max => candidate > incumbent,
            Objective::Min => candidate < incumbent,
        }
    }
}

/// Outcome of a codebook search.
#[derive(Clone, Debug)]
pub struct Selection {
    pub index: usize,
    pub vector: UnitVector,
    /// The criterion value at `index` (quadratic form, `Re{u†v}` or `|u†v|²`).
    pub score: f64,
}

fn select_by<F>(cb: &Codebook, objective: Objective, mut score: F) -> Selection
where
    F: FnMut(&[C64]) -> f64,
{
    let mut best = 0;
    let mut best_score = score(cb.entry(0));
    for j in 1..cb.len() {
        let s = score(cb.entry(j));
        if objective.better(s, best_score) {
            best = j;
            best_score = s;
        }
    }
    Selection {
        index: best,
        vector: cb.entry_vector(best),
        score: best_score,
    }
}

/// Exhaustive `argmax_j v_j† M v_j`.
pub fn select_max_quadratic(cb: &Codebook, m: &CovarianceMatrix, counter: &mut OpCounter) -> Result<Selection> {
    select_quadratic(cb, m, Objective::Max, counter)
}

/// Exhaustive `argmin_j v_j† M v_j`.
pub fn select_min_quadratic(cb: &Codebook, m: &CovarianceMatrix, counter: &mut OpCounter) -> Result<Selection> {
    select_quadratic(cb, m, Objective::Min, counter)
}

pub fn select_quadratic(
    cb: &Codebook,
    m: &CovarianceMatrix,
    objective: Objective,
    counter: &mut OpCounter,
) -> Result<Selection> {
    check_dim(cb.dim(), m.dim())?;
    counter.add(cb.len() as u64 * quadratic_form_macs(cb.dim()));
    Ok(select_by(cb, objective, |v| quadratic_form_raw(v, m)))
}

/// Closest entry in Euclidean distance: `argmax_j Re{u† v_j}`.
pub fn select_nearest_neighbor(cb: &Codebook, u: &UnitVector, counter: &mut OpCounter) -> Result<Selection> {
    check_dim(cb.dim(), u.dim())?;
    counter.add((cb.len() * cb.dim()) as u64);
    let u = u.as_slice();
    Ok(select_by(cb, Objective::Max, |v| re_inner(u, v)))
}

/// Closest entry in angle: `argmax_j |u† v_j|²`, blind to a global phase.
pub fn select_closest_in_angle(cb: &Codebook, u: &UnitVector, counter: &mut OpCounter) -> Result<Selection> {
    check_dim(cb.dim(), u.dim())?;
    counter.add((cb.len() * cb.dim()) as u64);
    let u = u.as_slice();
    Ok(select_by(cb, Objective::Max, |v| inner(u, v).norm_sqr()))
}

/// Writes the 16-byte header (`RVQ1`, `N`, `B`, reserved) and the entries as
/// little-endian `(re, im)` `f64` pairs, row-major.
pub fn write_codebook<W: Write>(cb: &Codebook, mut w: W) -> Result<()> {
    write_header(&mut w, cb, 0)?;
    write_entries(&mut w, cb)?;
    Ok(())
}

pub(crate) fn write_header<W: Write>(w: &mut W, cb: &Codebook, reserved: u32) -> Result<()> {
    w.write_all(CODEBOOK_MAGIC)?;
    w.write_all(&(cb.dim as u32).to_le_bytes())?;
    w.write_all(&cb.bits.to_le_bytes())?;
    w.write_all(&reserved.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_entries<W: Write>(w: &mut W, cb: &Codebook) -> Result<()> {
    for z in &cb.data {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_codebook<R: Read>(r: R) -> Result<Codebook> {
    read_codebook_with_reserved(r).map(|(cb, _)| cb)
}

/// Reads a codebook container, also returning the header's reserved word.
pub(crate) fn read_codebook_with_reserved<R: Read>(mut r: R) -> Result<(Codebook, u32)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CODEBOOK_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let dim = read_u32(&mut r)? as usize;
    let bits = read_u32(&mut r)?;
    let reserved = read_u32(&mut r)?;
    if dim == 0 {
        return Err(Error::Format("codebook dimension 0".into()));
    }
    check_capacity(bits, DEFAULT_ENTRY_CAP).map_err(|_| Error::Format(format!("unsupported bit count {bits}")))?;
    let count = (1usize << bits) * dim;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        data.push(C64::new(re, im));
    }
    let cb = Codebook { dim, bits, data };
    for (j, e) in cb.iter().enumerate() {
        let norm = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UnitVector::NORM_TOLERANCE {
            return Err(Error::Format(format!("entry {j} has norm {norm}")));
        }
    }
    Ok((cb, reserved))
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn save_codebook(cb: &Codebook, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_codebook(cb, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    read_codebook(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corelin::{embed_real, CMatrix};
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn e(n: usize, k: usize) -> UnitVector {
        UnitVector::basis(n, k).unwrap()
    }

    fn random_cov(n: usize, seed: u64) -> CovarianceMatrix {
        let mut rng = stream(seed, 9, 9);
        CovarianceMatrix::from_gram(&CMatrix::from_fn(n + 1, n, |_, _| complex_gaussian(&mut rng, 1.0)))
    }

    #[test]
    fn zero_bits_is_one_unit_vector() {
        let cb = generate_rvq(3, 0, &mut stream(1, 0, 0)).unwrap();
        assert_eq!(cb.len(), 1);
        let norm = cb.entry_vector(0).as_complex().norm();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entries_are_unit_norm() {
        let cb = generate_rvq(5, 9, &mut stream(2, 0, 0)).unwrap();
        for v in cb.iter() {
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn isotropy_moment() {
        let cb = generate_rvq(4, 10, &mut stream(3, 0, 0)).unwrap();
        let mut rng = stream(4, 0, 0);
        let pairs = 100_000;
        let mut acc = 0.0;
        for _ in 0..pairs {
            let i = rng.random_range(0..cb.len());
            let j = loop {
                let j = rng.random_range(0..cb.len());
                if j != i {
                    break j;
                }
            };
            acc += inner(cb.entry(i), cb.entry(j)).norm_sqr();
        }
        let mean = acc / pairs as f64;
        assert!((mean - 0.25).abs() < 0.05 * 0.25, "{mean}");
    }

    #[test]
    fn nested_prefix_and_determinism() {
        let small = generate_rvq(3, 4, &mut stream(5, 0, 0)).unwrap();
        let big = generate_rvq(3, 6, &mut stream(5, 0, 0)).unwrap();
        assert_eq!(big.prefix(4).unwrap(), small);
        assert_eq!(generate_rvq(3, 6, &mut stream(5, 0, 0)).unwrap(), big);
        assert!(small.prefix(5).is_err());
    }

    #[test]
    fn capacity_error() {
        assert!(matches!(
            generate_rvq_capped(2, 11, 1024, &mut stream(0, 0, 0)),
            Err(Error::Capacity { bits: 11, cap: 1024 })
        ));
        assert!(generate_rvq_capped(2, 10, 1024, &mut stream(0, 0, 0)).is_ok());
    }

    #[test]
    fn max_quadratic_examples() {
        let m = CovarianceMatrix::new(CMatrix::from_fn(2, 2, |r, c| {
            C64::new(if r == 0 && c == 0 { 1.0 } else { 0.0 }, 0.0)
        }))
        .unwrap();
        let cb = Codebook::from_entries(2, &[e(2, 1), e(2, 0)]).unwrap();
        let mut counter = OpCounter::new();
        let sel = select_max_quadratic(&cb, &m, &mut counter).unwrap();
        assert_eq!(sel.index, 1);
        assert_eq!(counter.macs(), 2 * (4 + 2));

        let min = select_min_quadratic(&Codebook::from_entries(2, &[e(2, 0), e(2, 1)]).unwrap(), &m, &mut counter).unwrap();
        assert_eq!(min.index, 1);

        let rvq = generate_rvq(3, 5, &mut stream(6, 0, 0)).unwrap();
        let eye = CovarianceMatrix::new(CMatrix::identity(3)).unwrap();
        // v†Iv is 1 up to rounding; tie-breaking only applies to exact ties,
        // so check through an exactly-flat objective instead.
        let flat = CovarianceMatrix::zero(3);
        assert_eq!(select_max_quadratic(&rvq, &flat, &mut counter).unwrap().index, 0);
        assert_eq!(select_min_quadratic(&rvq, &flat, &mut counter).unwrap().index, 0);
        let sel = select_max_quadratic(&rvq, &eye, &mut counter).unwrap();
        assert!((sel.score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_selection_matches_brute_force() {
        for seed in 0..20 {
            let cb = generate_rvq(4, 8, &mut stream(seed, 1, 0)).unwrap();
            let m = random_cov(4, seed);
            let values: Vec<f64> = (0..cb.len())
                .map(|j| {
                    let v = cb.entry(j);
                    let mut acc = C64::new(0.0, 0.0);
                    for r in 0..4 {
                        for c in 0..4 {
                            acc += v[r].conj() * m.matrix()[(r, c)] * v[c];
                        }
                    }
                    acc.re
                })
                .collect();
            let argmax = (0..values.len()).fold(0, |b, j| if values[j] > values[b] { j } else { b });
            let argmin = (0..values.len()).fold(0, |b, j| if values[j] < values[b] { j } else { b });
            let mut counter = OpCounter::new();
            assert_eq!(select_max_quadratic(&cb, &m, &mut counter).unwrap().index, argmax);
            assert_eq!(select_min_quadratic(&cb, &m, &mut counter).unwrap().index, argmin);
        }
    }

    #[test]
    fn nearest_neighbor_is_sign_sensitive() {
        let cb = Codebook::from_entries(2, &[e(2, 0), e(2, 1)]).unwrap();
        let mut counter = OpCounter::new();
        assert_eq!(select_nearest_neighbor(&cb, &e(2, 0), &mut counter).unwrap().index, 0);
        assert_eq!(select_nearest_neighbor(&cb, &e(2, 0).negated(), &mut counter).unwrap().index, 1);
        assert_eq!(select_closest_in_angle(&cb, &e(2, 0), &mut counter).unwrap().index, 0);
        assert_eq!(select_closest_in_angle(&cb, &e(2, 0).negated(), &mut counter).unwrap().index, 0);
        assert_eq!(counter.macs(), 4 * 2 * 2);
    }

    #[test]
    fn nearest_neighbor_equals_embedded_euclidean_argmin() {
        let cb = generate_rvq(4, 10, &mut stream(7, 0, 0)).unwrap();
        let embedded: Vec<Vec<f64>> = (0..cb.len()).map(|j| embed_real(cb.entry_vector(j).as_complex())).collect();
        let mut rng = stream(8, 0, 0);
        for _ in 0..50 {
            let u = crate::channels::random_unit(4, &mut rng).unwrap();
            let eu = embed_real(u.as_complex());
            let dist = |p: &Vec<f64>| p.iter().zip(&eu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let oracle = (0..cb.len()).fold(0, |b, j| if dist(&embedded[j]) < dist(&embedded[b]) { j } else { b });
            let got = select_nearest_neighbor(&cb, &u, &mut OpCounter::new()).unwrap();
            assert_eq!(got.index, oracle);
        }
    }

    #[test]
    fn angle_choice_dominates_nearest_neighbor() {
        let mut rng = stream(9, 0, 0);
        for _ in 0..200 {
            let cb = generate_rvq(4, 6, &mut rng).unwrap();
            let u = crate::channels::random_unit(4, &mut rng).unwrap();
            let mut counter = OpCounter::new();
            let angle = select_closest_in_angle(&cb, &u, &mut counter).unwrap();
            let nn = select_nearest_neighbor(&cb, &u, &mut counter).unwrap();
            let nn_overlap = inner(u.as_slice(), nn.vector.as_slice()).norm_sqr();
            assert!(angle.score >= nn_overlap);
        }
    }

    #[test]
    fn performance_ordering_per_instance() {
        let mut rng = stream(10, 0, 0);
        for seed in 0..50 {
            let cb = generate_rvq(4, 7, &mut rng).unwrap();
            let m = random_cov(4, 100 + seed);
            let mut counter = OpCounter::new();
            let best = select_max_quadratic(&cb, &m, &mut counter).unwrap().score;
            let top = crate::corelin::eigen_decompose(&m).unwrap();
            let angle = select_closest_in_angle(&cb, top.top(), &mut counter).unwrap();
            let angle_value = quadratic_form_raw(angle.vector.as_slice(), &m);
            assert!(best >= angle_value);
            for j in 0..cb.len() {
                assert!(best >= quadratic_form_raw(cb.entry(j), &m));
            }
        }
    }

    #[test]
    fn selected_power_grows_with_bits() {
        let trials = 500;
        let mut means = vec![0.0; 9];
        for t in 0..trials {
            let cb = generate_rvq(3, 8, &mut stream(11, 0, t)).unwrap();
            let m = random_cov(3, 1000 + t);
            for (bits, mean) in means.iter_mut().enumerate() {
                let prefix = cb.prefix(bits as u32).unwrap();
                *mean += select_max_quadratic(&prefix, &m, &mut OpCounter::new()).unwrap().score / trials as f64;
            }
        }
        assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cb = generate_rvq(3, 2, &mut stream(1, 0, 0)).unwrap();
        let mut counter = OpCounter::new();
        assert!(select_nearest_neighbor(&cb, &e(2, 0), &mut counter).is_err());
        assert!(select_max_quadratic(&cb, &CovarianceMatrix::zero(4), &mut counter).is_err());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(matches!(read_codebook(&b"RVQ2\0\0\0\0"[..]), Err(Error::Format(_))));
        let cb = generate_rvq(2, 1, &mut stream(1, 0, 0)).unwrap();
        let mut bytes = Vec::new();
        write_codebook(&cb, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + 2 * 2 * 16);
        assert_eq!(&bytes[..4], b"RVQ1");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert!(read_codebook(&bytes[..bytes.len() - 1]).is_err());
        bytes[16..24].copy_from_slice(&3.0f64.to_le_bytes());
        assert!(matches!(read_codebook(&bytes[..]), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn file_round_trip_is_bit_exact(seed in 0u64..1000, n in 1usize..6, bits in 0u32..7) {
            let cb = generate_rvq(n, bits, &mut stream(seed, 0, 0)).unwrap();
            let mut bytes = Vec::new();
            write_codebook(&cb, &mut bytes).unwrap();
            let back = read_codebook(&bytes[..]).unwrap();
            prop_assert_eq!(back, cb);
        }

        #[test]
        fn distance_and_correlation_agree(seed in 0u64..1000, n in 1usize..9, bits in 0u32..11) {
            let cb = generate_rvq(n, bits, &mut stream(seed, 0, 0)).unwrap();
            let u = crate::channels::random_unit(n, &mut stream(seed, 1, 0)).unwrap();
            let dist = |v: &[C64]| v.iter().zip(u.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
            let oracle = (0..cb.len()).fold(0, |b, j| if dist(cb.entry(j)) < dist(cb.entry(b)) { j } else { b });
            let got = select_nearest_neighbor(&cb, &u, &mut OpCounter::new()).unwrap().index;
            prop_assert_eq!(got, oracle);
        }
    }
}
