//! The matrix Ornstein–Uhlenbeck flow `dH = dB / sqrt(N) - H dt / 2`.
//!
//! [`ou_flow_exact`] draws the time-`t` marginal in one shot.
//! [`ou_flow_euler`] integrates the SDE pathwise. [`coupled_paths`] drives
//! two initial matrices with one shared noise stream.

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensembles::{
    fill_upper, rng_from_seed, sample_gaussian_matrix, sample_wigner, sample_gaussian_invariant, EntryLaw,
    SelfAdjointMatrix, SymmetryClass, WignerDraw,
};
use crate::linalg;
use crate::runner::derive_stream;
use crate::spectra::{bulk_index_range, Spectrum};
use crate::stats::median;
use crate::{c64, Error, Result};

/// Largest step accepted for Euler–Maruyama integration.
pub const MAX_EULER_DT: f64 = 0.01;
/// Default step size.
pub const DEFAULT_DT: f64 = 0.002;
/// Budget constant standing in for `N^eps` in relaxation checks.
pub const RELAXATION_BUDGET: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowScheme {
    ExactMarginal,
    EulerMaruyama,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub t_end: f64,
    pub dt: f64,
    pub scheme: FlowScheme,
}

impl FlowConfig {
    pub fn new(t_end: f64, dt: f64, scheme: FlowScheme) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidArgument(format!("flow time must be positive, got {t_end}")));
        }
        if !(dt > 0.0) || dt > t_end {
            return Err(Error::InvalidArgument(format!("step dt = {dt} must lie in (0, t_end = {t_end}]")));
        }
        if scheme == FlowScheme::EulerMaruyama && dt > MAX_EULER_DT {
            return Err(Error::StabilityViolation {
                dt,
                limit: MAX_EULER_DT,
            });
        }
        Ok(Self { t_end, dt, scheme })
    }
}

/// Brownian increment `dB` over a step of length `dt`.
///
/// Real class: off-diagonal variance `dt`, diagonal `2 dt`. Complex class:
/// real and imaginary parts of off-diagonal entries each `dt / 2`, real
/// diagonal `dt`.
pub fn noise_increment<R: Rng + ?Sized>(n: usize, class: SymmetryClass, dt: f64, rng: &mut R) -> SelfAdjointMatrix {
    let (s_diag, s_off) = match class {
        SymmetryClass::RealSymmetric => ((2.0 * dt).sqrt(), dt.sqrt()),
        SymmetryClass::ComplexHermitian => (dt.sqrt(), (dt / 2.0).sqrt()),
    };
    fill_upper(
        n,
        class,
        rng,
        |r| s_diag * r.sample::<f64, _>(StandardNormal),
        |r| match class {
            SymmetryClass::RealSymmetric => (s_off * r.sample::<f64, _>(StandardNormal), 0.0),
            SymmetryClass::ComplexHermitian => {
                let re = s_off * r.sample::<f64, _>(StandardNormal);
                (re, s_off * r.sample::<f64, _>(StandardNormal))
            }
        },
    )
}

/// One Euler–Maruyama step `H + dW / sqrt(N) - H dt / 2`.
///
/// Only the upper triangle is computed; the lower triangle is its mirror,
/// so the result is exactly self-adjoint.
pub fn ou_step(h: &SelfAdjointMatrix, dw: &SelfAdjointMatrix, dt: f64) -> Result<SelfAdjointMatrix> {
    let n = h.dim();
    if dw.dim() != n || dw.class() != h.class() {
        return Err(Error::ShapeMismatch {
            expected: format!("{n}x{n} {:?}", h.class()),
            found: format!("{0}x{0} {1:?}", dw.dim(), dw.class()),
        });
    }
    let decay = 1.0 - 0.5 * dt;
    let s = 1.0 / (n as f64).sqrt();
    Ok(match (h, dw) {
        (SelfAdjointMatrix::Real(a), SelfAdjointMatrix::Real(w)) => {
            let mut out = Mat::<f64>::zeros(n, n);
            for j in 0..n {
                for i in 0..=j {
                    let v = decay * a[(i, j)] + s * w[(i, j)];
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
            SelfAdjointMatrix::Real(out)
        }
        (SelfAdjointMatrix::Complex(a), SelfAdjointMatrix::Complex(w)) => {
            let mut out = Mat::<c64>::zeros(n, n);
            for j in 0..n {
                for i in 0..j {
                    let v = a[(i, j)] * decay + w[(i, j)] * s;
                    out[(i, j)] = v;
                    out[(j, i)] = v.conj();
                }
                out[(j, j)] = c64::new(decay * a[(j, j)].re + s * w[(j, j)].re, 0.0);
            }
            SelfAdjointMatrix::Complex(out)
        }
        _ => unreachable!("classes checked above"),
    })
}

/// `a * x + b * y` for two matrices of the same class, mirrored from the
/// upper triangle.
fn combine(a: f64, x: &SelfAdjointMatrix, b: f64, y: &SelfAdjointMatrix) -> SelfAdjointMatrix {
    let n = x.dim();
    match (x, y) {
        (SelfAdjointMatrix::Real(p), SelfAdjointMatrix::Real(q)) => {
            let mut out = Mat::<f64>::zeros(n, n);
            for j in 0..n {
                for i in 0..=j {
                    let v = a * p[(i, j)] + b * q[(i, j)];
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
            SelfAdjointMatrix::Real(out)
        }
        (SelfAdjointMatrix::Complex(p), SelfAdjointMatrix::Complex(q)) => {
            let mut out = Mat::<c64>::zeros(n, n);
            for j in 0..n {
                for i in 0..j {
                    let v = p[(i, j)] * a + q[(i, j)] * b;
                    out[(i, j)] = v;
                    out[(j, i)] = v.conj();
                }
                out[(j, j)] = c64::new(a * p[(j, j)].re + b * q[(j, j)].re, 0.0);
            }
            SelfAdjointMatrix::Complex(out)
        }
        _ => unreachable!("callers pass matching classes"),
    }
}

/// Exact time-`t` marginal `e^{-t/2} H0 + sqrt(1 - e^{-t}) G`, `G` an
/// independent GOE/GUE matrix drawn from `seed`.
pub fn ou_flow_exact(h0: &WignerDraw, t: f64, seed: u64) -> Result<WignerDraw> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("flow time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(h0.clone());
    }
    let mut rng = rng_from_seed(seed);
    let g = sample_gaussian_matrix(h0.n(), h0.class, 1.0, &mut rng);
    Ok(WignerDraw {
        class: h0.class,
        matrix: combine((-0.5 * t).exp(), &h0.matrix, (-(-t).exp_m1()).sqrt(), &g),
        seed: h0.seed,
        law_id: format!("{}+ou({t})", h0.law_id),
    })
}

/// Number of steps and step length covering `span` with steps of at most `dt`.
fn step_plan(span: f64, dt: f64) -> (usize, f64) {
    let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    (steps, span / steps as f64)
}

/// Euler–Maruyama path from `h0` to `t_end` with noise drawn from `seed`.
pub fn ou_flow_euler(h0: &WignerDraw, t_end: f64, dt: f64, seed: u64) -> Result<WignerDraw> {
    let cfg = FlowConfig::new(t_end, dt, FlowScheme::EulerMaruyama)?;
    let (steps, h) = step_plan(cfg.t_end, cfg.dt);
    let mut rng = rng_from_seed(seed);
    let mut m = h0.matrix.clone();
    for _ in 0..steps {
        let dw = noise_increment(m.dim(), h0.class, h, &mut rng);
        m = ou_step(&m, &dw, h)?;
    }
    Ok(WignerDraw {
        class: h0.class,
        matrix: m,
        seed: h0.seed,
        law_id: format!("{}+em({t_end})", h0.law_id),
    })
}

/// Evolve `h0` according to `cfg`.
pub fn flow(h0: &WignerDraw, cfg: &FlowConfig, seed: u64) -> Result<WignerDraw> {
    match cfg.scheme {
        FlowScheme::ExactMarginal => ou_flow_exact(h0, cfg.t_end, seed),
        FlowScheme::EulerMaruyama => ou_flow_euler(h0, cfg.t_end, cfg.dt, seed),
    }
}

/// Initial condition of one side of a coupled pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialEnsemble {
    Wigner(EntryLaw),
    Gaussian,
}

impl InitialEnsemble {
    pub fn sample(&self, n: usize, class: SymmetryClass, seed: u64) -> Result<WignerDraw> {
        match self {
            InitialEnsemble::Wigner(law) => sample_wigner(law, n, class, seed),
            InitialEnsemble::Gaussian => sample_gaussian_invariant(n, class, seed),
        }
    }
}

/// How the two sides of a coupled pair share their noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingScheme {
    /// Both matrices receive the same increment `dB` entry by entry.
    Entrywise,
    /// Each matrix is carried in its own eigenbasis and the same `dB` is
    /// added there: `Lambda' = eig(Lambda (1 - dt/2) + dB / sqrt(N))`. By
    /// unitary invariance of `dB` each side keeps the law of the matrix
    /// Euler–Maruyama scheme, while the driving noise of eigenvalue `k` is
    /// shared between the two sides.
    Eigenframe,
}

/// Euler step of a spectrum carried in its own eigenframe.
fn eigenframe_step(values: &[f64], dw: &SelfAdjointMatrix, dt: f64) -> Result<Vec<f64>> {
    let n = values.len();
    let decay = 1.0 - 0.5 * dt;
    let s = 1.0 / (n as f64).sqrt();
    match dw {
        SelfAdjointMatrix::Real(w) => {
            let m = Mat::from_fn(n, n, |i, j| s * w[(i, j)] + if i == j { decay * values[i] } else { 0.0 });
            linalg::symmetric_eigenvalues(&m)
        }
        SelfAdjointMatrix::Complex(w) => {
            let m = Mat::from_fn(n, n, |i, j| {
                w[(i, j)] * s + if i == j { c64::new(decay * values[i], 0.0) } else { c64::new(0.0, 0.0) }
            });
            linalg::hermitian_eigenvalues(&m)
        }
    }
}

/// Spectra of a coupled pair at one checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSnapshot {
    pub t: f64,
    pub a: Spectrum,
    pub b: Spectrum,
}

/// Drive `h_a` and `h_b` with one shared noise stream, recording both
/// spectra at each checkpoint (strictly increasing, positive).
///
/// Segments between checkpoints are split into equal steps of at most
/// `dt`, so a path to `t = 1` with checkpoints `{0.1, 1}` follows the same
/// noise as a path with the single checkpoint `1` whenever `dt` divides
/// both evenly.
pub fn coupled_paths(
    h_a: &WignerDraw,
    h_b: &WignerDraw,
    checkpoints: &[f64],
    dt: f64,
    noise_seed: u64,
    coupling: CouplingScheme,
) -> Result<Vec<CoupledSnapshot>> {
    if h_a.n() != h_b.n() || h_a.class != h_b.class {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0} {1:?}", h_a.n(), h_a.class),
            found: format!("{0}x{0} {1:?}", h_b.n(), h_b.class),
        });
    }
    let t_last = *checkpoints
        .last()
        .ok_or_else(|| Error::InvalidArgument("at least one checkpoint is required".into()))?;
    if checkpoints.windows(2).any(|w| !(w[0] < w[1])) || !(checkpoints[0] > 0.0) {
        return Err(Error::InvalidArgument("checkpoints must be positive and strictly increasing".into()));
    }
    FlowConfig::new(t_last, dt.min(t_last), FlowScheme::EulerMaruyama)?;
    if dt > MAX_EULER_DT {
        return Err(Error::StabilityViolation {
            dt,
            limit: MAX_EULER_DT,
        });
    }
    let n = h_a.n();
    let class = h_a.class;
    let mut rng = rng_from_seed(noise_seed);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut t_now = 0.0;
    match coupling {
        CouplingScheme::Entrywise => {
            let (mut a, mut b) = (h_a.matrix.clone(), h_b.matrix.clone());
            for &tc in checkpoints {
                let (steps, h) = step_plan(tc - t_now, dt);
                for _ in 0..steps {
                    let dw = noise_increment(n, class, h, &mut rng);
                    a = ou_step(&a, &dw, h)?;
                    b = ou_step(&b, &dw, h)?;
                }
                t_now = tc;
                out.push(CoupledSnapshot {
                    t: tc,
                    a: Spectrum::new(a.eigenvalues()?, h_a.law_id.clone(), h_a.seed)?,
                    b: Spectrum::new(b.eigenvalues()?, h_b.law_id.clone(), h_b.seed)?,
                });
            }
        }
        CouplingScheme::Eigenframe => {
            let mut a = h_a.matrix.eigenvalues()?;
            let mut b = h_b.matrix.eigenvalues()?;
            for &tc in checkpoints {
                let (steps, h) = step_plan(tc - t_now, dt);
                for _ in 0..steps {
                    let dw = noise_increment(n, class, h, &mut rng);
                    a = eigenframe_step(&a, &dw, h)?;
                    b = eigenframe_step(&b, &dw, h)?;
                }
                t_now = tc;
                out.push(CoupledSnapshot {
                    t: tc,
                    a: Spectrum::new(a.clone(), h_a.law_id.clone(), h_a.seed)?,
                    b: Spectrum::new(b.clone(), h_b.law_id.clone(), h_b.seed)?,
                });
            }
        }
    }
    Ok(out)
}

/// One bulk index of a relaxation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationRow {
    pub k: usize,
    pub gap_a: f64,
    pub gap_b: f64,
    pub abs_err: f64,
}

/// Gap coupling errors of one coupled pair at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub n: usize,
    pub t: f64,
    pub dt: f64,
    pub alpha: f64,
    pub seed: u64,
    pub coupling: CouplingScheme,
    pub rows: Vec<RelaxationRow>,
    pub median_error: f64,
    /// `max_k N^2 t err_k`.
    pub max_scaled_error: f64,
    /// `10 (log N)^2 / N`.
    pub t_floor: f64,
    /// True when `t` lies below [`RelaxationReport::t_floor`].
    pub below_t_floor: bool,
}

/// Pragmatic floor `10 (log N)^2 / N` on the relaxation time.
pub fn relaxation_t_floor(n: usize) -> f64 {
    let nf = n as f64;
    10.0 * nf.ln().powi(2) / nf
}

/// Compare bulk gaps of two spectra at time `t`.
pub fn relaxation_report(snap: &CoupledSnapshot, dt: f64, alpha: f64, seed: u64, coupling: CouplingScheme) -> RelaxationReport {
    let n = snap.a.n();
    let (lo, hi) = bulk_index_range(n, alpha);
    let rows: Vec<RelaxationRow> = (lo..=hi)
        .map(|k| {
            let gap_a = snap.a.lambda(k + 1) - snap.a.lambda(k);
            let gap_b = snap.b.lambda(k + 1) - snap.b.lambda(k);
            RelaxationRow {
                k,
                gap_a,
                gap_b,
                abs_err: (gap_a - gap_b).abs(),
            }
        })
        .collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.abs_err).collect();
    let nf = n as f64;
    let t_floor = relaxation_t_floor(n);
    RelaxationReport {
        n,
        t: snap.t,
        dt,
        alpha,
        seed,
        coupling,
        median_error: if errs.is_empty() { 0.0 } else { median(&errs) },
        max_scaled_error: errs.iter().fold(0.0, |m: f64, &e| m.max(nf * nf * snap.t * e)),
        rows,
        t_floor,
        below_t_floor: snap.t < t_floor,
    }
}

/// Couple a Wigner matrix with entry law `law` to a GOE/GUE matrix and
/// report bulk gap coupling errors at each checkpoint.
///
/// Initial matrices and noise come from independent sub-streams of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn coupled_relaxation_path(
    law: &EntryLaw,
    n: usize,
    class: SymmetryClass,
    checkpoints: &[f64],
    dt: f64,
    alpha: f64,
    seed: u64,
    coupling: CouplingScheme,
) -> Result<Vec<RelaxationReport>> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} outside (0, 1/2)")));
    }
    let h_a = sample_wigner(law, n, class, derive_stream(seed, 0, 0))?;
    let h_b = sample_gaussian_invariant(n, class, derive_stream(seed, 1, 0))?;
    let snaps = coupled_paths(&h_a, &h_b, checkpoints, dt, derive_stream(seed, 2, 0), coupling)?;
    Ok(snaps.iter().map(|s| relaxation_report(s, dt, alpha, seed, coupling)).collect())
}

/// Single-time version of [`coupled_relaxation_path`] in the real class.
pub fn coupled_relaxation(
    law: &EntryLaw,
    n: usize,
    t: f64,
    dt: f64,
    alpha: f64,
    seed: u64,
    coupling: CouplingScheme,
) -> Result<RelaxationReport> {
    let mut v = coupled_relaxation_path(law, n, SymmetryClass::RealSymmetric, &[t], dt, alpha, seed, coupling)?;
    Ok(v.remove(0))
}
