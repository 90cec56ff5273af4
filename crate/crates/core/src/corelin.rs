//! Complex linear-algebra primitives shared by every search.
//!
//! Matrices are small (tens of rows at most) and dense, so everything is kept
//! in plain row-major `Vec<Complex64>` storage. The Hermitian eigensolver is a
//! cyclic complex Jacobi method.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// `a† b`.
#[inline]
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `Re{a† b}`, summed element by element in the same order as the
/// real-embedded dot product in [`embedded_dot`], so both agree bitwise.
#[inline]
pub fn re_inner(a: &[C64], b: &[C64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x.re * y.re + x.im * y.im;
    }
    acc
}

/// Dot product of two real embeddings `[Re v; Im v]` of length `2N`.
#[inline]
pub fn embedded_dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() / 2;
    let mut acc = 0.0;
    for k in 0..n {
        acc += a[k] * b[k] + a[n + k] * b[n + k];
    }
    acc
}

/// N-dimensional vector of complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector(Vec<C64>);

impl ComplexVector {
    pub fn new(elements: Vec<C64>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Contract("vector dimension must be at least 1".into()));
        }
        Ok(Self(elements))
    }

    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::DimensionMismatch {
                expected: re.len(),
                got: im.len(),
            });
        }
        Self::new(re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `self† other`.
    pub fn inner(&self, other: &ComplexVector) -> Result<C64> {
        check_dim(self.len(), other.len())?;
        Ok(inner(&self.0, &other.0))
    }
}

/// Unit-norm complex vector: codebook entries, beams, signatures, eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitVector(ComplexVector);

impl UnitVector {
    pub const NORM_TOLERANCE: f64 = 1e-9;

    pub fn new(v: ComplexVector) -> Result<Self> {
        let norm = v.norm();
        if (norm - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::Contract(format!("vector norm {norm} is not 1")));
        }
        Ok(Self(v))
    }

    pub fn from_slice(elements: &[C64]) -> Result<Self> {
        Self::new(ComplexVector::new(elements.to_vec())?)
    }

    /// Scales `v` onto the unit sphere.
    pub fn normalize(v: ComplexVector) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate(format!("cannot normalize vector of norm {norm}")));
        }
        let scaled = v.0.into_iter().map(|z| z / norm).collect();
        Ok(Self(ComplexVector(scaled)))
    }

    /// Standard basis vector `e_k` of dimension `n`.
    pub fn basis(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::Contract(format!("basis index {k} out of range for dimension {n}")));
        }
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[k] = C64::new(1.0, 0.0);
        Ok(Self(ComplexVector(e)))
    }

    pub(crate) fn from_vec_unchecked(elements: Vec<C64>) -> Self {
        Self(ComplexVector(elements))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn as_complex(&self) -> &ComplexVector {
        &self.0
    }

    pub fn negated(&self) -> Self {
        Self(ComplexVector(self.0 .0.iter().map(|z| -z).collect()))
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Matrix whose columns are the given vectors (all of length `rows`).
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Result<Self> {
        for col in columns {
            check_dim(rows, col.len())?;
        }
        Ok(Self::from_fn(rows, columns.len(), |r, c| columns[c][r]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<Self> {
        check_dim(self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other[(k, c)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.cols, v.len())?;
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, x)| a * x).sum())
            .collect())
    }

    /// `A† A`. Exactly Hermitian in floating point: entry `(i, j)` and `(j, i)`
    /// accumulate the same products in the same order.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..self.rows {
                    acc += self[(k, i)].conj() * self[(k, j)];
                }
                out.data[i * n + j] = acc;
                out.data[j * n + i] = acc.conj();
            }
            out.data[i * n + i].im = 0.0;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        (0..n).all(|r| (r..n).all(|c| (self[(r, c)] - self[(c, r)].conj()).norm() <= tol))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Hermitian positive-semidefinite `N×N` matrix `S S†`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    m: CMatrix,
}

impl CovarianceMatrix {
    pub const HERMITIAN_TOLERANCE: f64 = 1e-9;
    pub const PSD_TOLERANCE: f64 = 1e-9;

    /// Validates Hermitian symmetry and positive semidefiniteness.
    pub fn new(m: CMatrix) -> Result<Self> {
        let eig = hermitian_eigen(&m)?;
        let top = eig.values[0];
        let bottom = *eig.values.last().unwrap();
        if bottom < -Self::PSD_TOLERANCE * top.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Contract(format!(
                "matrix is not positive semidefinite: eigenvalue {bottom:e} (largest {top:e})"
            )));
        }
        Ok(Self { m })
    }

    /// `A† A`, PSD by construction.
    pub fn from_gram(a: &CMatrix) -> Self {
        Self { m: a.gram() }
    }

    pub fn zero(n: usize) -> Self {
        Self { m: CMatrix::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.m.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    /// The `2N×2N` real matrix `[[Re M, -Im M], [Im M, Re M]]`.
    pub fn real_embedding(&self) -> RealEmbeddedCovariance {
        let n = self.dim();
        let n2 = 2 * n;
        let mut data = vec![0.0; n2 * n2];
        for r in 0..n {
            for c in 0..n {
                let z = self.m[(r, c)];
                data[r * n2 + c] = z.re;
                data[r * n2 + n + c] = -z.im;
                data[(n + r) * n2 + c] = z.im;
                data[(n + r) * n2 + n + c] = z.re;
            }
        }
        RealEmbeddedCovariance { n2, data }
    }
}

/// Real form of a covariance acting on real embeddings:
/// `embed(v)ᵀ M̂ embed(v) = v† M v`, cross terms included.
#[derive(Clone, Debug)]
pub struct RealEmbeddedCovariance {
    n2: usize,
    data: Vec<f64>,
}

impl RealEmbeddedCovariance {
    pub fn dim(&self) -> usize {
        self.n2
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n2 + c]
    }

    /// `rᵀ M̂ r`; counts as one complex quadratic form (`N² + N` MACs).
    pub fn quadratic_form(&self, r: &[f64], counter: &mut OpCounter) -> f64 {
        debug_assert_eq!(r.len(), self.n2);
        counter.add(quadratic_form_macs(self.n2 / 2));
        let mut acc = 0.0;
        for (i, &ri) in r.iter().enumerate() {
            let row = &self.data[i * self.n2..(i + 1) * self.n2];
            let dot: f64 = row.iter().zip(r).map(|(a, x)| a * x).sum();
            acc += ri * dot;
        }
        acc
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    values: Vec<f64>,
    vectors: Vec<UnitVector>,
}

impl EigenSystem {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &[UnitVector] {
        &self.vectors
    }

    /// Maximizer of `v† M v` over the unit sphere.
    pub fn top(&self) -> &UnitVector {
        &self.vectors[0]
    }

    /// Minimizer of `v† M v` over the unit sphere.
    pub fn bottom(&self) -> &UnitVector {
        self.vectors.last().unwrap()
    }

    /// `Σ λᵢ uᵢ uᵢ†`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut m = CMatrix::zeros(n, n);
        for (lambda, u) in self.values.iter().zip(&self.vectors) {
            let u = u.as_slice();
            for r in 0..n {
                for c in 0..n {
                    m[(r, c)] += u[r] * u[c].conj() * *lambda;
                }
            }
        }
        m
    }
}

pub fn eigen_decompose(m: &CovarianceMatrix) -> Result<EigenSystem> {
    hermitian_eigen(&m.m)
}

/// Eigendecomposition of any Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> Result<EigenSystem> {
    if m.rows != m.cols {
        return Err(Error::Contract(format!("{}x{} matrix is not square", m.rows, m.cols)));
    }
    if m.rows == 0 {
        return Err(Error::Contract("empty matrix".into()));
    }
    let tol = CovarianceMatrix::HERMITIAN_TOLERANCE * m.max_abs().max(1.0);
    if !m.is_hermitian(tol) {
        return Err(Error::Contract("matrix is not Hermitian".into()));
    }
    let n = m.rows;
    let mut a = m.clone();
    // Symmetrize so rounding in the input cannot leak into the rotations.
    for r in 0..n {
        a[(r, r)].im = 0.0;
        for c in r + 1..n {
            let avg = (a[(r, c)] + a[(c, r)].conj()) * 0.5;
            a[(r, c)] = avg;
            a[(c, r)] = avg.conj();
        }
    }
    let mut v = CMatrix::identity(n);
    jacobi_sweeps(&mut a, &mut v)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re).then(i.cmp(&j)));

    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut col = v.column(i);
            fix_phase(&mut col);
            UnitVector::from_vec_unchecked(col)
        })
        .collect();
    Ok(EigenSystem { values, vectors })
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.rows;
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                acc += a[(r, c)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi: each rotation first removes the phase of `a_pq` with a
/// diagonal unitary, then applies the real symmetric Jacobi rotation.
fn jacobi_sweeps(a: &mut CMatrix, v: &mut CMatrix) -> Result<()> {
    let n = a.rows;
    let scale = a.frobenius_norm();
    if scale == 0.0 || n == 1 {
        return Ok(());
    }
    let max_sweeps = 10 * n * n;
    let target = 1e-15 * scale;
    for _ in 0..max_sweeps {
        if off_diagonal_norm(a) <= target {
            return Ok(());
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                // A <- A J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                // A <- J† A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
                // V <- V J
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }
    let off_norm = off_diagonal_norm(a);
    if off_norm <= target {
        return Ok(());
    }
    Err(Error::NoConvergence {
        sweeps: max_sweeps,
        off_norm,
        dim: n,
    })
}

/// Rotates `u` so its largest-magnitude entry (first on ties) is real-positive.
fn fix_phase(u: &mut [C64]) {
    let mut best = 0;
    for k in 1..u.len() {
        if u[k].norm() > u[best].norm() {
            best = k;
        }
    }
    let mag = u[best].norm();
    if mag == 0.0 {
        return;
    }
    let rot = u[best].conj() / mag;
    for z in u.iter_mut() {
        *z *= rot;
    }
    u[best] = C64::new(mag, 0.0);
}

/// Complex multiply-accumulate counter for one search session.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter {
    macs: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, macs: u64) {
        self.macs += macs;
    }

    pub fn macs(&self) -> u64 {
        self.macs
    }

    /// MACs expressed as `N`-dimensional inner products.
    pub fn equivalent_inner_products(&self, dim: usize) -> f64 {
        self.macs as f64 / dim as f64
    }

    pub fn merge(&mut self, other: &OpCounter) {
        self.macs += other.macs;
    }
}

impl fmt::Display for OpCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} MACs", self.macs)
    }
}

/// Cost of one `v† M v` evaluation: `M v` then the inner product.
pub const fn quadratic_form_macs(n: usize) -> u64 {
    (n * n + n) as u64
}

pub fn quadratic_form(v: &UnitVector, m: &CovarianceMatrix, counter: &mut OpCounter) -> Result<f64> {
    check_dim(m.dim(), v.dim())?;
    counter.add(quadratic_form_macs(v.dim()));
    Ok(quadratic_form_raw(v.as_slice(), m))
}

/// `v† M v` without dimension checks or counting.
#[inline]
pub(crate) fn quadratic_form_raw(v: &[C64], m: &CovarianceMatrix) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for r in 0..n {
        let mv: C64 = m.m.row(r).iter().zip(v).map(|(a, x)| a * x).sum();
        acc += (v[r].conj() * mv).re;
    }
    acc
}

/// `[Re v; Im v]`.
pub fn embed_real(v: &ComplexVector) -> Vec<f64> {
    let mut out = vec![0.0; 2 * v.len()];
    embed_into(v.as_slice(), &mut out);
    out
}

pub fn embed_into(v: &[C64], out: &mut [f64]) {
    let n = v.len();
    for (k, z) in v.iter().enumerate() {
        out[k] = z.re;
        out[n + k] = z.im;
    }
}

/// Inverse of [`embed_real`].
pub fn unembed(r: &[f64]) -> Vec<C64> {
    let n = r.len() / 2;
    (0..n).map(|k| C64::new(r[k], r[n + k])).collect()
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
