//! Entry laws, p-support validation and Wigner/GOE/GUE samplers.
//!
//! Entry laws describe the distribution of `sqrt(N) * H_ij`. Every sampled
//! matrix has `E|H_ij|^2 = 1/N` off the diagonal, so the spectrum fills
//! `[-2, 2]`.

use std::fmt;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::numeric::compensated_sum;
use crate::spectra::Spectrum;
use crate::{c64, Error, Result};

/// Tolerance on the total mass of an atomic law.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Tolerance on mean 0 / variance 1 for laws used in sampling.
pub const STANDARD_TOL: f64 = 1e-10;

/// A finitely supported probability law with strictly increasing atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAtomic")]
pub struct AtomicLaw {
    points: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawAtomic {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawAtomic> for AtomicLaw {
    type Error = Error;

    fn try_from(raw: RawAtomic) -> Result<Self> {
        AtomicLaw::new(raw.points, raw.weights)
    }
}

impl AtomicLaw {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidLaw("atomic law needs at least one atom".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidLaw(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().chain(&weights).any(|x| !x.is_finite()) {
            return Err(Error::InvalidLaw("non-finite point or weight".into()));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidLaw("weights must be strictly positive".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLaw("points must be strictly increasing".into()));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidLaw(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    /// Symmetric two-point law on {-1, +1}.
    pub fn rademacher() -> Self {
        Self::new(vec![-1.0, 1.0], vec![0.5, 0.5]).expect("valid law")
    }

    /// `count` equally weighted, equally spaced atoms on `[-half_width, half_width]`.
    pub fn equispaced(count: usize, half_width: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidLaw("need at least two equispaced atoms".into()));
        }
        let step = 2.0 * half_width / (count - 1) as f64;
        let points = (0..count).map(|i| -half_width + step * i as f64).collect();
        let weights = equal_weights(count);
        Self::new(points, weights)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.points.iter().zip(&self.weights).map(|(x, w)| x * w))
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        compensated_sum(
            self.points
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| w * (x - mean) * (x - mean)),
        )
    }

    /// Smallest distance between consecutive atoms (infinite for one atom).
    pub fn min_separation(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Same weights, atoms moved to `points`.
    pub fn with_points(&self, points: Vec<f64>) -> Result<Self> {
        Self::new(points, self.weights.clone())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (x, w) in self.points.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return *x;
            }
        }
        *self.points.last().expect("non-empty")
    }
}

fn equal_weights(count: usize) -> Vec<f64> {
    // Spread the rounding remainder so that the sum is 1 to within an ulp.
    let w = 1.0 / count as f64;
    let mut weights = vec![w; count];
    let excess = compensated_sum(weights.iter().copied()) - 1.0;
    weights[count - 1] -= excess;
    weights
}

/// Law of a standardized matrix entry `sqrt(N) * H_ij`.
///
/// `GaussianDivisible { base, t }` is the variance-preserving mixture
/// `sqrt(1 - t) X + sqrt(t) G` with `X ~ base` and `G` standard Gaussian,
/// `t` in `[0, 1)`. It coincides with `e^{-s/2} X + sqrt(1 - e^{-s}) G`,
/// the OU marginal at time `s = -ln(1 - t)`; see [`EntryLaw::ou_time`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawRepr", into = "LawRepr")]
pub enum EntryLaw {
    Atomic(AtomicLaw),
    StandardGaussian,
    GaussianDivisible { base: AtomicLaw, t: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum LawRepr {
    Atomic { points: Vec<f64>, weights: Vec<f64> },
    Gaussian,
    Gde { base: AtomicLaw, t: f64 },
}

impl TryFrom<LawRepr> for EntryLaw {
    type Error = Error;

    fn try_from(repr: LawRepr) -> Result<Self> {
        match repr {
            LawRepr::Atomic { points, weights } => Ok(EntryLaw::Atomic(AtomicLaw::new(points, weights)?)),
            LawRepr::Gaussian => Ok(EntryLaw::StandardGaussian),
            LawRepr::Gde { base, t } => EntryLaw::gaussian_divisible(base, t),
        }
    }
}

impl From<EntryLaw> for LawRepr {
    fn from(law: EntryLaw) -> Self {
        match law {
            EntryLaw::Atomic(a) => LawRepr::Atomic {
                points: a.points,
                weights: a.weights,
            },
            EntryLaw::StandardGaussian => LawRepr::Gaussian,
            EntryLaw::GaussianDivisible { base, t } => LawRepr::Gde { base, t },
        }
    }
}

impl EntryLaw {
    pub fn gaussian_divisible(base: AtomicLaw, t: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::InvalidT(t));
        }
        Ok(EntryLaw::GaussianDivisible { base, t })
    }

    pub fn rademacher() -> Self {
        EntryLaw::Atomic(AtomicLaw::rademacher())
    }

    /// The atomic component, if any.
    pub fn atomic_part(&self) -> Option<&AtomicLaw> {
        match self {
            EntryLaw::Atomic(a) => Some(a),
            EntryLaw::GaussianDivisible { base, .. } => Some(base),
            EntryLaw::StandardGaussian => None,
        }
    }

    /// OU flow time realising the Gaussian component (0 for atomic laws).
    pub fn ou_time(&self) -> f64 {
        match self {
            EntryLaw::GaussianDivisible { t, .. } => -(1.0 - t).ln(),
            EntryLaw::Atomic(_) => 0.0,
            EntryLaw::StandardGaussian => f64::INFINITY,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            EntryLaw::Atomic(a) => a.mean(),
            EntryLaw::StandardGaussian => 0.0,
            EntryLaw::GaussianDivisible { base, t } => (1.0 - t).sqrt() * base.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            EntryLaw::Atomic(a) => a.variance(),
            EntryLaw::StandardGaussian => 1.0,
            EntryLaw::GaussianDivisible { base, t } => (1.0 - t) * base.variance() + t,
        }
    }

    pub fn is_standardized(&self) -> bool {
        self.mean().abs() <= STANDARD_TOL && (self.variance() - 1.0).abs() <= STANDARD_TOL
    }

    pub fn ensure_standardized(&self) -> Result<()> {
        if self.is_standardized() {
            Ok(())
        } else {
            Err(Error::NotStandardized {
                mean: self.mean(),
                variance: self.variance(),
            })
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EntryLaw::Atomic(a) => a.sample(rng),
            EntryLaw::StandardGaussian => rng.sample(StandardNormal),
            EntryLaw::GaussianDivisible { base, t } => {
                let x = base.sample(rng);
                let g: f64 = rng.sample(StandardNormal);
                (1.0 - t).sqrt() * x + t.sqrt() * g
            }
        }
    }

    /// Short identifier used in output tables.
    pub fn id(&self) -> String {
        match self {
            EntryLaw::Atomic(a) => format!("atomic{}", a.len()),
            EntryLaw::StandardGaussian => "gaussian".into(),
            EntryLaw::GaussianDivisible { base, t } => format!("gde{}_t{t}", base.len()),
        }
    }
}

impl fmt::Display for EntryLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Affinely rescale atom positions to mean 0 and variance 1.
pub fn standardize(law: &EntryLaw) -> Result<EntryLaw> {
    fn standardize_atomic(a: &AtomicLaw) -> Result<AtomicLaw> {
        let mean = a.mean();
        let var = a.variance();
        if a.len() < 2 || var <= 0.0 {
            return Err(Error::ZeroVariance);
        }
        let sd = var.sqrt();
        a.with_points(a.points.iter().map(|x| (x - mean) / sd).collect())
    }
    match law {
        EntryLaw::Atomic(a) => Ok(EntryLaw::Atomic(standardize_atomic(a)?)),
        EntryLaw::StandardGaussian => Ok(EntryLaw::StandardGaussian),
        EntryLaw::GaussianDivisible { base, t } => EntryLaw::gaussian_divisible(standardize_atomic(base)?, *t),
    }
}

/// Parameters of the p-support condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PSupportParams {
    pub p: usize,
    /// Minimal separation between the chosen cluster origins.
    pub c: f64,
    /// Cluster width; zero for point masses.
    pub c_hat: f64,
    /// Minimal mass per cluster.
    pub kappa: f64,
    /// Bound on the cluster origins.
    pub a: f64,
}

impl PSupportParams {
    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.p == 0 {
            v.push("p must be at least 1".to_string());
        }
        if !(self.c > 0.0) {
            v.push(format!("c = {} must be positive", self.c));
        }
        if !(self.c_hat >= 0.0 && self.c_hat < self.c) {
            v.push(format!("c_hat = {} must lie in [0, c)", self.c_hat));
        }
        if !(self.kappa > 0.0) || (self.p > 0 && self.kappa > 1.0 / self.p as f64) {
            v.push(format!("kappa = {} must lie in (0, 1/p]", self.kappa));
        }
        if !(self.a > 0.0) {
            v.push(format!("A = {} must be positive", self.a));
        }
        v
    }
}

/// Outcome of [`validate_psupport`].
#[derive(Clone, Debug, PartialEq)]
pub struct PSupportReport {
    pub satisfied: bool,
    /// Cluster origins found (ascending), up to `p` of them.
    pub origins: Vec<f64>,
    pub violations: Vec<String>,
}

/// Check whether `law` (its atomic part) has p-support with `params`.
///
/// Cluster origins can be taken at atoms; among the admissible origins
/// (mass of `[x, x + c_hat]` above kappa, `|x| <= A`) a greedy left-to-right
/// scan finds a maximal family with pairwise separation above `c`.
pub fn validate_psupport(law: &EntryLaw, params: &PSupportParams) -> PSupportReport {
    let mut violations = params.violations();
    let Some(atomic) = law.atomic_part() else {
        violations.push("law has no atomic part".into());
        return PSupportReport {
            satisfied: false,
            origins: Vec::new(),
            violations,
        };
    };
    if atomic.len() < params.p {
        violations.push(format!("only {} atoms, need {}", atomic.len(), params.p));
    }
    let mut heavy = 0;
    let mut bounded = 0;
    let mut candidates = Vec::new();
    for &x in atomic.points() {
        let mass: f64 = atomic
            .points()
            .iter()
            .zip(atomic.weights())
            .filter(|(y, _)| **y >= x && **y <= x + params.c_hat)
            .map(|(_, w)| *w)
            .sum();
        let is_heavy = mass > params.kappa;
        let is_bounded = x.abs() <= params.a;
        heavy += usize::from(is_heavy);
        bounded += usize::from(is_bounded);
        if is_heavy && is_bounded {
            candidates.push(x);
        }
    }
    if heavy < params.p {
        violations.push(format!("only {heavy} clusters carry mass above kappa = {}", params.kappa));
    }
    if bounded < params.p {
        violations.push(format!("only {bounded} atoms within |x| <= A = {}", params.a));
    }
    let mut origins: Vec<f64> = Vec::new();
    for x in candidates {
        if origins.last().is_none_or(|last| x - last > params.c) {
            origins.push(x);
        }
    }
    if origins.len() < params.p && violations.is_empty() {
        violations.push(format!(
            "only {} admissible clusters are separated by more than c = {}",
            origins.len(),
            params.c
        ));
    } else if origins.len() < params.p {
        violations.push(format!("only {} separated admissible clusters", origins.len()));
    }
    origins.truncate(params.p);
    PSupportReport {
        satisfied: violations.is_empty(),
        origins,
        violations,
    }
}

/// Real symmetric or complex Hermitian symmetry class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    RealSymmetric,
    ComplexHermitian,
}

impl SymmetryClass {
    /// Dyson index: 1 for real symmetric, 2 for complex Hermitian.
    pub fn beta(self) -> u32 {
        match self {
            SymmetryClass::RealSymmetric => 1,
            SymmetryClass::ComplexHermitian => 2,
        }
    }

    pub fn from_beta(beta: u32) -> Result<Self> {
        match beta {
            1 => Ok(SymmetryClass::RealSymmetric),
            2 => Ok(SymmetryClass::ComplexHermitian),
            b => Err(Error::InvalidArgument(format!("beta must be 1 or 2, got {b}"))),
        }
    }

    pub fn gaussian_name(self) -> &'static str {
        match self {
            SymmetryClass::RealSymmetric => "GOE",
            SymmetryClass::ComplexHermitian => "GUE",
        }
    }
}

/// Dense self-adjoint matrix storage.
#[derive(Clone, Debug, PartialEq)]
pub enum SelfAdjointMatrix {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl SelfAdjointMatrix {
    pub fn zeros(n: usize, class: SymmetryClass) -> Self {
        match class {
            SymmetryClass::RealSymmetric => SelfAdjointMatrix::Real(Mat::zeros(n, n)),
            SymmetryClass::ComplexHermitian => SelfAdjointMatrix::Complex(Mat::zeros(n, n)),
        }
    }

    pub fn from_real_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        SelfAdjointMatrix::Real(Mat::from_fn(n, n, f))
    }

    pub fn dim(&self) -> usize {
        match self {
            SelfAdjointMatrix::Real(m) => m.nrows(),
            SelfAdjointMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn class(&self) -> SymmetryClass {
        match self {
            SelfAdjointMatrix::Real(_) => SymmetryClass::RealSymmetric,
            SelfAdjointMatrix::Complex(_) => SymmetryClass::ComplexHermitian,
        }
    }

    /// Entry `(i, j)` as a complex number.
    pub fn get(&self, i: usize, j: usize) -> c64 {
        match self {
            SelfAdjointMatrix::Real(m) => c64::new(m[(i, j)], 0.0),
            SelfAdjointMatrix::Complex(m) => m[(i, j)],
        }
    }

    /// Real part of the stored matrix.
    pub fn re(&self) -> Mat<f64> {
        match self {
            SelfAdjointMatrix::Real(m) => m.clone(),
            SelfAdjointMatrix::Complex(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re),
        }
    }

    /// Imaginary part of the stored matrix (zero in the real class).
    pub fn im(&self) -> Mat<f64> {
        match self {
            SelfAdjointMatrix::Real(m) => Mat::zeros(m.nrows(), m.ncols()),
            SelfAdjointMatrix::Complex(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].im),
        }
    }

    /// Exact (bitwise) self-adjointness.
    pub fn is_exactly_self_adjoint(&self) -> bool {
        let n = self.dim();
        match self {
            SelfAdjointMatrix::Real(m) => {
                (0..n).all(|i| (i..n).all(|j| m[(i, j)].to_bits() == m[(j, i)].to_bits()))
            }
            SelfAdjointMatrix::Complex(m) => (0..n).all(|i| {
                m[(i, i)].im == 0.0
                    && (i + 1..n).all(|j| {
                        let a = m[(i, j)];
                        let b = m[(j, i)];
                        a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == (-b.im).to_bits()
                    })
            }),
        }
    }

    pub fn trace(&self) -> f64 {
        compensated_sum((0..self.dim()).map(|i| self.get(i, i).re))
    }

    /// `Tr H^2 = sum_ij |H_ij|^2`.
    pub fn trace_of_square(&self) -> f64 {
        let n = self.dim();
        compensated_sum((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| self.get(i, j).norm_sqr()))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        match self {
            SelfAdjointMatrix::Real(m) => linalg::symmetric_eigenvalues(m),
            SelfAdjointMatrix::Complex(m) => linalg::hermitian_eigenvalues(m),
        }
    }

    /// Row-major bytes of the stored entries, for hashing and determinism checks.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n * 16);
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                out.extend_from_slice(&z.re.to_le_bytes());
                if self.class() == SymmetryClass::ComplexHermitian {
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
        out
    }
}

/// Build a self-adjoint matrix by drawing only the upper triangle.
///
/// `diag` draws a diagonal entry; `off` draws an off-diagonal entry as
/// (real, imaginary) parts, the imaginary part ignored in the real class.
/// Entries are drawn row by row, `i <= j`.
pub fn fill_upper<R: Rng + ?Sized>(
    n: usize,
    class: SymmetryClass,
    rng: &mut R,
    mut diag: impl FnMut(&mut R) -> f64,
    mut off: impl FnMut(&mut R) -> (f64, f64),
) -> SelfAdjointMatrix {
    match class {
        SymmetryClass::RealSymmetric => {
            let mut m = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = diag(rng);
                for j in i + 1..n {
                    let (re, _) = off(rng);
                    m[(i, j)] = re;
                    m[(j, i)] = re;
                }
            }
            SelfAdjointMatrix::Real(m)
        }
        SymmetryClass::ComplexHermitian => {
            let mut m = Mat::<c64>::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = c64::new(diag(rng), 0.0);
                for j in i + 1..n {
                    let (re, im) = off(rng);
                    m[(i, j)] = c64::new(re, im);
                    m[(j, i)] = c64::new(re, -im);
                }
            }
            SelfAdjointMatrix::Complex(m)
        }
    }
}

/// A sampled self-adjoint matrix with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerDraw {
    pub class: SymmetryClass,
    pub matrix: SelfAdjointMatrix,
    pub seed: u64,
    pub law_id: String,
}

impl WignerDraw {
    pub fn n(&self) -> usize {
        self.matrix.dim()
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        Ok(Spectrum::from_sorted(
            self.matrix.eigenvalues()?,
            self.law_id.clone(),
            self.seed,
        ))
    }
}

/// Deterministic RNG for a given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sample a Wigner matrix with i.i.d. entries `Z / sqrt(N)`, `Z ~ law`.
///
/// In the Hermitian class the real and imaginary parts of off-diagonal
/// entries are independent copies of `Z / sqrt(2N)`; the diagonal is real
/// with variance `1/N` in both classes.
pub fn sample_wigner(law: &EntryLaw, n: usize, class: SymmetryClass, seed: u64) -> Result<WignerDraw> {
    if n < 2 {
        return Err(Error::InvalidN(n));
    }
    law.ensure_standardized()?;
    let mut rng = rng_from_seed(seed);
    let matrix = sample_wigner_matrix(law, n, class, &mut rng);
    Ok(WignerDraw {
        class,
        matrix,
        seed,
        law_id: law.id(),
    })
}

pub(crate) fn sample_wigner_matrix<R: Rng + ?Sized>(
    law: &EntryLaw,
    n: usize,
    class: SymmetryClass,
    rng: &mut R,
) -> SelfAdjointMatrix {
    let s_diag = 1.0 / (n as f64).sqrt();
    match class {
        SymmetryClass::RealSymmetric => fill_upper(n, class, rng, |r| law.sample(r) * s_diag, |r| (law.sample(r) * s_diag, 0.0)),
        SymmetryClass::ComplexHermitian => {
            let s_off = 1.0 / (2.0 * n as f64).sqrt();
            fill_upper(
                n,
                class,
                rng,
                |r| law.sample(r) * s_diag,
                |r| {
                    let re = law.sample(r) * s_off;
                    let im = law.sample(r) * s_off;
                    (re, im)
                },
            )
        }
    }
}

/// Sample from GOE (off-diagonal variance 1/N, diagonal 2/N) or GUE
/// (`E|H_ij|^2 = 1/N`, real diagonal with variance 1/N).
pub fn sample_gaussian_invariant(n: usize, class: SymmetryClass, seed: u64) -> Result<WignerDraw> {
    if n < 2 {
        return Err(Error::InvalidN(n));
    }
    let mut rng = rng_from_seed(seed);
    let matrix = sample_gaussian_matrix(n, class, 1.0, &mut rng);
    Ok(WignerDraw {
        class,
        matrix,
        seed,
        law_id: class.gaussian_name().to_string(),
    })
}

/// GOE/GUE matrix scaled so that off-diagonal `E|H_ij|^2 = variance / N`.
pub(crate) fn sample_gaussian_matrix<R: Rng + ?Sized>(
    n: usize,
    class: SymmetryClass,
    variance: f64,
    rng: &mut R,
) -> SelfAdjointMatrix {
    let nf = n as f64;
    match class {
        SymmetryClass::RealSymmetric => {
            let s_off = (variance / nf).sqrt();
            let s_diag = (2.0 * variance / nf).sqrt();
            fill_upper(
                n,
                class,
                rng,
                |r| s_diag * r.sample::<f64, _>(StandardNormal),
                |r| (s_off * r.sample::<f64, _>(StandardNormal), 0.0),
            )
        }
        SymmetryClass::ComplexHermitian => {
            let s_off = (variance / (2.0 * nf)).sqrt();
            let s_diag = (variance / nf).sqrt();
            fill_upper(
                n,
                class,
                rng,
                |r| s_diag * r.sample::<f64, _>(StandardNormal),
                |r| {
                    let re = s_off * r.sample::<f64, _>(StandardNormal);
                    let im = s_off * r.sample::<f64, _>(StandardNormal);
                    (re, im)
                },
            )
        }
    }
}

/// GOE (beta = 1) or GUE (beta = 2) spectrum from the Dumitriu–Edelman
/// tridiagonal model `tridiag(N(0,2), chi_{beta(N-k)}) / sqrt(beta N)`.
pub fn sample_gxe_spectrum_tridiagonal(n: usize, class: SymmetryClass, seed: u64) -> Result<Spectrum> {
    if n < 2 {
        return Err(Error::InvalidN(n));
    }
    let beta = class.beta() as f64;
    let scale = 1.0 / (beta * n as f64).sqrt();
    let mut rng = rng_from_seed(seed);
    let diag: Vec<f64> = (0..n)
        .map(|_| scale * std::f64::consts::SQRT_2 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let off = (1..n)
        .map(|k| {
            let dof = beta * (n - k) as f64;
            let chi2 = ChiSquared::new(dof).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(scale * chi2.sample(&mut rng).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    let values = linalg::tridiagonal_eigenvalues(&diag, &off)?;
    Ok(Spectrum::from_sorted(values, format!("{}-tridiag", class.gaussian_name()), seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_atoms() -> EntryLaw {
        EntryLaw::Atomic(AtomicLaw::equispaced(6, 2.0).unwrap())
    }

    #[test]
    fn atomic_law_rejects_bad_input() {
        assert!(AtomicLaw::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(AtomicLaw::new(vec![0.0, 1.0], vec![0.6, 0.5]).is_err());
        assert!(AtomicLaw::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(AtomicLaw::new(vec![0.0], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn psupport_rademacher() {
        let law = EntryLaw::rademacher();
        let ok = PSupportParams {
            p: 2,
            c: 1.5,
            c_hat: 0.0,
            kappa: 0.4,
            a: 1.0,
        };
        assert!(validate_psupport(&law, &ok).satisfied);
        let three = PSupportParams { p: 3, kappa: 0.3, ..ok };
        let report = validate_psupport(&law, &three);
        assert!(!report.satisfied);
        assert!(report.violations.iter().any(|v| v.contains("only 2 atoms")));
    }

    #[test]
    fn psupport_six_equispaced_and_perturbation() {
        let params = PSupportParams {
            p: 6,
            c: 0.7,
            c_hat: 0.0,
            kappa: 0.1,
            a: 2.0,
        };
        assert!(validate_psupport(&six_atoms(), &params).satisfied);
        // move the third atom inside the c-ball of its left neighbour
        let base = AtomicLaw::equispaced(6, 2.0).unwrap();
        let mut pts = base.points().to_vec();
        pts[2] = pts[1] + 0.5;
        let moved = EntryLaw::Atomic(base.with_points(pts).unwrap());
        assert!(!validate_psupport(&moved, &params).satisfied);
    }

    #[test]
    fn psupport_gaussian_has_no_atoms() {
        let params = PSupportParams {
            p: 1,
            c: 1.0,
            c_hat: 0.0,
            kappa: 0.5,
            a: 1.0,
        };
        assert!(!validate_psupport(&EntryLaw::StandardGaussian, &params).satisfied);
    }

    #[test]
    fn standardize_examples() {
        let law = EntryLaw::Atomic(AtomicLaw::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap());
        let s = standardize(&law).unwrap();
        let a = s.atomic_part().unwrap();
        assert!((a.points()[0] + 1.0).abs() < 1e-15 && (a.points()[1] - 1.0).abs() < 1e-15);
        assert_eq!(standardize(&EntryLaw::rademacher()).unwrap(), EntryLaw::rademacher());

        // {0, 1, 3} with equal weights: mean 4/3, variance 14/9
        let third = 1.0 / 3.0;
        let law = EntryLaw::Atomic(AtomicLaw::new(vec![0.0, 1.0, 3.0], vec![third, third, 1.0 - 2.0 * third]).unwrap());
        assert!((law.mean() - 4.0 / 3.0).abs() < 1e-15);
        assert!((law.variance() - 14.0 / 9.0).abs() < 1e-15);
        let s = standardize(&law).unwrap();
        let a = s.atomic_part().unwrap();
        let m1: f64 = a.points().iter().zip(a.weights()).map(|(x, w)| x * w).sum();
        let m2: f64 = a.points().iter().zip(a.weights()).map(|(x, w)| x * x * w).sum();
        assert!(m1.abs() < 1e-14);
        assert!((m2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn standardize_point_mass_fails() {
        let law = EntryLaw::Atomic(AtomicLaw::new(vec![2.0], vec![1.0]).unwrap());
        assert_eq!(standardize(&law), Err(Error::ZeroVariance));
    }

    #[test]
    fn law_config_roundtrip_and_validation() {
        let law: EntryLaw = serde_json::from_str(r#"{ "type": "atomic", "points": [-1, 1], "weights": [0.5, 0.5] }"#).unwrap();
        assert_eq!(law, EntryLaw::rademacher());
        let g: EntryLaw = serde_json::from_str(r#"{ "type": "gaussian" }"#).unwrap();
        assert_eq!(g, EntryLaw::StandardGaussian);
        let gde: EntryLaw =
            serde_json::from_str(r#"{ "type": "gde", "base": { "points": [-1, 1], "weights": [0.5, 0.5] }, "t": 0.5 }"#).unwrap();
        assert_eq!(gde, EntryLaw::gaussian_divisible(AtomicLaw::rademacher(), 0.5).unwrap());
        let back: EntryLaw = serde_json::from_str(&serde_json::to_string(&gde).unwrap()).unwrap();
        assert_eq!(back, gde);
        assert!(serde_json::from_str::<EntryLaw>(r#"{ "type": "gde", "base": { "points": [-1, 1], "weights": [0.5, 0.5] }, "t": 1.5 }"#).is_err());
        assert!(serde_json::from_str::<EntryLaw>(r#"{ "type": "atomic", "points": [1, -1], "weights": [0.5, 0.5] }"#).is_err());
    }

    #[test]
    fn wigner_symmetry_and_determinism() {
        for class in [SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian] {
            for law in [EntryLaw::rademacher(), EntryLaw::StandardGaussian, six_atoms_standard()] {
                let d = sample_wigner(&law, 2, class, 7).unwrap();
                assert!(d.matrix.is_exactly_self_adjoint());
                let d1 = sample_wigner(&law, 30, class, 99).unwrap();
                let d2 = sample_wigner(&law, 30, class, 99).unwrap();
                assert!(d1.matrix.is_exactly_self_adjoint());
                assert_eq!(d1.matrix.to_le_bytes(), d2.matrix.to_le_bytes());
            }
        }
    }

    fn six_atoms_standard() -> EntryLaw {
        standardize(&six_atoms()).unwrap()
    }

    #[test]
    fn wigner_requires_standardized_law_and_n() {
        assert!(matches!(
            sample_wigner(&six_atoms(), 10, SymmetryClass::RealSymmetric, 1),
            Err(Error::NotStandardized { .. })
        ));
        assert_eq!(
            sample_wigner(&EntryLaw::rademacher(), 1, SymmetryClass::RealSymmetric, 1).unwrap_err(),
            Error::InvalidN(1)
        );
        assert_eq!(sample_gaussian_invariant(1, SymmetryClass::ComplexHermitian, 0).unwrap_err(), Error::InvalidN(1));
    }

    #[test]
    fn rademacher_entry_moments() {
        // E[H_12] = 0 and E[H_12^2] = 1/N with CLT error bars.
        let n = 100;
        let draws = 10_000;
        let xs: Vec<f64> = (0..draws)
            .map(|s| {
                let d = sample_wigner(&EntryLaw::rademacher(), n, SymmetryClass::RealSymmetric, s).unwrap();
                d.matrix.get(0, 1).re
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64).sqrt();
        assert!(mean.abs() <= 4.0 * sd / (draws as f64).sqrt());
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let msq = sq.iter().sum::<f64>() / draws as f64;
        let sd_sq = (sq.iter().map(|x| (x - msq).powi(2)).sum::<f64>() / (draws - 1) as f64).sqrt();
        // Rademacher squares are constant: the error bar degenerates to zero.
        assert!((msq - 1.0 / n as f64).abs() <= 4.0 * sd_sq / (draws as f64).sqrt() + 1e-12);
    }

    #[test]
    fn row_second_moment_sums() {
        let n = 20;
        let draws = 1000;
        for class in [SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian] {
            let sums: Vec<f64> = (0..draws)
                .map(|s| {
                    let d = sample_wigner(&EntryLaw::StandardGaussian, n, class, 1000 + s).unwrap();
                    (0..n).map(|i| d.matrix.get(i, 0).norm_sqr()).sum::<f64>()
                })
                .collect();
            let mean = sums.iter().sum::<f64>() / draws as f64;
            let sd = (sums.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64).sqrt();
            assert!((mean - 1.0).abs() <= 5.0 * sd / (draws as f64).sqrt(), "{class:?}: {mean}");
        }
    }

    #[test]
    fn goe_n2_trace_of_square() {
        // E Tr H^2 = 2 * (1/2) + 2 * (2/2) = 3
        let draws = 40_000;
        let vals: Vec<f64> = (0..draws)
            .map(|s| sample_gaussian_invariant(2, SymmetryClass::RealSymmetric, s).unwrap().matrix.trace_of_square())
            .collect();
        let mean = vals.iter().sum::<f64>() / draws as f64;
        let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64).sqrt();
        assert!((mean - 3.0).abs() <= 4.0 * sd / (draws as f64).sqrt(), "{mean}");
    }

    #[test]
    fn goe_spectrum_inside_bulk_window() {
        let mut inside = 0usize;
        let mut total = 0usize;
        for s in 0..20 {
            let spec = sample_gaussian_invariant(400, SymmetryClass::RealSymmetric, s).unwrap().spectrum().unwrap();
            inside += spec.values().iter().filter(|x| x.abs() <= 2.1).count();
            total += spec.n();
        }
        assert!(inside as f64 / total as f64 >= 0.999);
    }

    #[test]
    fn gaussian_invariant_determinism() {
        let a = sample_gaussian_invariant(25, SymmetryClass::ComplexHermitian, 5).unwrap();
        let b = sample_gaussian_invariant(25, SymmetryClass::ComplexHermitian, 5).unwrap();
        assert_eq!(a.matrix.to_le_bytes(), b.matrix.to_le_bytes());
        assert!(a.matrix.is_exactly_self_adjoint());
    }

    #[test]
    fn tridiagonal_small_case_sorted() {
        for s in 0..50 {
            let spec = sample_gxe_spectrum_tridiagonal(2, SymmetryClass::RealSymmetric, s).unwrap();
            assert!(spec.values()[1] > spec.values()[0]);
        }
    }
}
