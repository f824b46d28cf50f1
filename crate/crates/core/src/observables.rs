//! Smoothed counting functions, the semicircle Stieltjes transform,
//! resolvents and the moment-order comparison experiment.

use faer::prelude::*;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_wigner, AtomicLaw, EntryLaw, SelfAdjointMatrix, SymmetryClass, WignerDraw};
use crate::moment_match::{build_matched_gde, DEFAULT_TOL};
use crate::runner::{derive_stream, parallel_map};
use crate::spectra::Spectrum;
use crate::{c64, Error, Result};

/// Smallest spectral parameter accepted by [`resolvent`].
pub const MIN_ETA: f64 = 1e-14;
/// Polylogarithmic budget used in local-law checks.
pub const LOCAL_LAW_BUDGET: f64 = 10.0;

/// Scales `eta_d = N^{-3/2+eps}`, `eta_0 = N^{-3/2+2eps}`, `delta = N^{-3/2+3eps}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub epsilon: f64,
    pub n: usize,
    pub eta_d: f64,
    pub eta_0: f64,
    pub delta: f64,
}

impl SmoothingParams {
    pub fn new(epsilon: f64, n: usize) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
        }
        if n < 2 {
            return Err(Error::InvalidN(n));
        }
        let nf = n as f64;
        Ok(Self {
            epsilon,
            n,
            eta_d: nf.powf(-1.5 + epsilon),
            eta_0: nf.powf(-1.5 + 2.0 * epsilon),
            delta: nf.powf(-1.5 + 3.0 * epsilon),
        })
    }

    /// Additive slack `e^{-N^{eps/2}}` of the sandwich bounds.
    pub fn sandwich_slack(&self) -> f64 {
        (-(self.n as f64).powf(self.epsilon / 2.0)).exp()
    }

    /// True when `eta_d < eta_0 < delta < 1/N`.
    pub fn is_ordered(&self) -> bool {
        self.eta_d < self.eta_0 && self.eta_0 < self.delta && self.delta < 1.0 / self.n as f64
    }
}

/// `s(x) = 1 / (1 + e^x)`, evaluated without overflow.
pub fn logistic(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Smoothed indicator of `x <= e` at scale `eta_d`.
pub fn f_e(x: f64, e: f64, eta_d: f64) -> f64 {
    logistic((x - e) / eta_d)
}

/// Cutoff: 0 below `alpha - 2/3`, 1 above `alpha - 1/3`, cubic smoothstep between.
pub fn q_alpha(x: f64, alpha: f64) -> f64 {
    if x <= alpha - 2.0 / 3.0 {
        return 0.0;
    }
    if x >= alpha - 1.0 / 3.0 {
        return 1.0;
    }
    let u = (3.0 * (x - alpha + 2.0 / 3.0)).clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// `Tr f_E(H) = sum_i f_E(lambda_i)`.
pub fn tr_f(s: &Spectrum, e: f64, eta_d: f64) -> f64 {
    s.values().iter().map(|&l| f_e(l, e, eta_d)).sum()
}

/// `#{i : lambda_i <= E}`.
pub fn counting(s: &Spectrum, e: f64) -> usize {
    s.values().partition_point(|&l| l <= e)
}

/// Outcome of [`sandwich_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub e: f64,
    pub count: usize,
    pub tr_lower: f64,
    pub tr_upper: f64,
    pub slack: f64,
    /// Both counting-function bounds hold.
    pub counting_bounds: bool,
    /// Number of integer levels `alpha` in `1..=N` at which the cutoff bracketing fails.
    pub cutoff_failures: usize,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.counting_bounds && self.cutoff_failures == 0
    }
}

/// Check `Tr f_{E-eta_0} - slack <= N(E) <= Tr f_{E+eta_0} + slack` and
/// `q_a(Tr f_{E-eta_0}) <= 1{N(E) >= a} <= q_a(Tr f_{E+eta_0})` for every
/// integer `a` in `1..=N`.
pub fn sandwich_check(s: &Spectrum, e: f64, params: &SmoothingParams) -> SandwichReport {
    let count = counting(s, e);
    let tr_lower = tr_f(s, e - params.eta_0, params.eta_d);
    let tr_upper = tr_f(s, e + params.eta_0, params.eta_d);
    let slack = params.sandwich_slack();
    let nf = count as f64;
    let counting_bounds = tr_lower - slack <= nf && nf <= tr_upper + slack;
    let cutoff_failures = (1..=s.n())
        .filter(|&a| {
            let ind = if count >= a { 1.0 } else { 0.0 };
            let af = a as f64;
            !(q_alpha(tr_lower, af) <= ind && ind <= q_alpha(tr_upper, af))
        })
        .count();
    SandwichReport {
        e,
        count,
        tr_lower,
        tr_upper,
        slack,
        counting_bounds,
        cutoff_failures,
    }
}

/// Stieltjes transform of the semicircle law, the root of `m^2 + z m + 1 = 0`
/// with `Im m > 0`.
pub fn m_sc(z: c64) -> c64 {
    let two = c64::new(2.0, 0.0);
    // sqrt(z - 2) sqrt(z + 2) has its cut on [-2, 2] and behaves like z at
    // infinity, so -2 / (z + r) is the decaying root without cancellation.
    let r = (z - two).sqrt() * (z + two).sqrt();
    let m = -two / (z + r);
    if m.im >= 0.0 {
        m
    } else {
        m.inv()
    }
}

/// `G(z) = (H - z)^{-1}` with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventSample {
    pub z: c64,
    pub g: Mat<c64>,
    pub h_ref: String,
}

impl ResolventSample {
    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    /// `(1/N) Tr G`.
    pub fn normalized_trace(&self) -> c64 {
        let n = self.n();
        (0..n).map(|i| self.g[(i, i)]).sum::<c64>() / n as f64
    }
}

fn check_eta(z: c64) -> Result<()> {
    if !(z.im >= MIN_ETA) {
        return Err(Error::NearSingular { eta: z.im });
    }
    Ok(())
}

/// Resolvent of a dense matrix by one LU factorization of `H - z`.
pub fn resolvent_of(h: &SelfAdjointMatrix, z: c64) -> Result<Mat<c64>> {
    check_eta(z)?;
    crate::linalg::ensure_sequential();
    let n = h.dim();
    let a = Mat::from_fn(n, n, |i, j| if i == j { h.get(i, j) - z } else { h.get(i, j) });
    let lu = a.partial_piv_lu();
    let id = Mat::<c64>::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
    Ok(lu.solve(&id))
}

pub fn resolvent(h: &WignerDraw, z: c64) -> Result<ResolventSample> {
    Ok(ResolventSample {
        z,
        g: resolvent_of(&h.matrix, z)?,
        h_ref: format!("{}#{}", h.law_id, h.seed),
    })
}

/// `(1/N) sum_k 1 / (lambda_k - z)`.
pub fn normalized_trace_from_spectrum(s: &Spectrum, z: c64) -> c64 {
    s.values().iter().map(|&l| (c64::new(l, 0.0) - z).inv()).sum::<c64>() / s.n() as f64
}

/// `max_ij |G_ij - delta_ij m_sc(z)|`.
pub fn local_law_deviation(sample: &ResolventSample) -> f64 {
    let m = m_sc(sample.z);
    let n = sample.n();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let d = if i == j { sample.g[(i, j)] - m } else { sample.g[(i, j)] };
            worst = worst.max(d.norm());
        }
    }
    worst
}

/// Local-law statistic of `H` at `z`, for `|E| <= 10` and `0 < eta <= 10`.
pub fn local_law_stat(h: &WignerDraw, z: c64) -> Result<f64> {
    if z.re.abs() > 10.0 || z.im > 10.0 {
        return Err(Error::DomainViolation(format!("z = {z} outside |E| <= 10, 0 < eta <= 10")));
    }
    Ok(local_law_deviation(&resolvent(h, z)?))
}

/// Reference scale `sqrt(Im m_sc / (N eta)) + 1 / (N eta)`.
pub fn local_law_scale(n: usize, z: c64) -> f64 {
    let ne = n as f64 * z.im;
    (m_sc(z).im / ne).sqrt() + 1.0 / ne
}

/// Largest relative error of `sum_j |G_ij|^2 = Im G_ii / eta` over rows.
pub fn ward_check(sample: &ResolventSample) -> f64 {
    let n = sample.n();
    let eta = sample.z.im;
    (0..n)
        .map(|i| {
            let lhs: f64 = (0..n).map(|j| sample.g[(i, j)].norm_sqr()).sum();
            let rhs = sample.g[(i, i)].im / eta;
            (lhs - rhs).abs() / rhs.abs()
        })
        .fold(0.0, f64::max)
}

/// One row of the moment-order comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub p: usize,
    /// `|E_v (1/N) Tr G - E_w (1/N) Tr G|`.
    pub estimate: f64,
    /// Delete-one jackknife standard error of `estimate`.
    pub stderr: f64,
    pub reps: usize,
    pub t_used: f64,
}

/// Delete-one jackknife of `|mean(a) - mean(b)|` over paired replicas.
pub fn jackknife_abs_mean_difference(a: &[c64], b: &[c64]) -> (f64, f64) {
    let n = a.len();
    assert_eq!(n, b.len());
    let diffs: Vec<c64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let total: c64 = diffs.iter().sum();
    let estimate = (total / n as f64).norm();
    if n < 2 {
        return (estimate, f64::NAN);
    }
    let loo: Vec<f64> = diffs.iter().map(|d| ((total - d) / (n - 1) as f64).norm()).collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (estimate, var.sqrt())
}

/// Compare `(1/N) Tr G(z)` between Wigner matrices with entry law `mu` and
/// matrices from its `p`-moment-matched Gaussian-divisible law, for each `p`.
#[allow(clippy::too_many_arguments)]
pub fn green_comparison(
    mu: &AtomicLaw,
    p_values: &[usize],
    n: usize,
    z: c64,
    t_requested: f64,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<ComparisonRow>> {
    check_eta(z)?;
    if z.im < 1.0 / n as f64 {
        return Err(Error::DomainViolation(format!("eta = {} below the mesoscopic floor 1/N", z.im)));
    }
    let law_v = EntryLaw::Atomic(mu.clone());
    law_v.ensure_standardized()?;
    let class = SymmetryClass::RealSymmetric;
    let mut rows = Vec::with_capacity(p_values.len());
    for (pi, &p) in p_values.iter().enumerate() {
        let matched = build_matched_gde(mu, p, t_requested, DEFAULT_TOL)?;
        let law_w = matched.matched_law.clone();
        let pairs = parallel_map(reps, workers, derive_stream(seed, pi as u64, 0), |_, s| {
            let v = sample_wigner(&law_v, n, class, derive_stream(s, 0, 0))?.spectrum()?;
            let w = sample_wigner(&law_w, n, class, derive_stream(s, 1, 0))?.spectrum()?;
            Ok((normalized_trace_from_spectrum(&v, z), normalized_trace_from_spectrum(&w, z)))
        })
        .map_err(|f| f.error)?;
        let (a, b): (Vec<c64>, Vec<c64>) = pairs.into_iter().unzip();
        let (estimate, stderr) = jackknife_abs_mean_difference(&a, &b);
        rows.push(ComparisonRow {
            p,
            estimate,
            stderr,
            reps,
            t_used: matched.t_used,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_gaussian_invariant;
    use crate::spectra::{semicircle_density, typical_locations};
    use std::f64::consts::PI;

    #[test]
    fn logistic_values() {
        assert_eq!(logistic(0.0), 0.5);
        assert_eq!(logistic(1000.0), 0.0);
        assert_eq!(logistic(-1000.0), 1.0);
        for x in [0.3, 2.0, 17.5, 700.5] {
            assert!((logistic(x) + logistic(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn smoothed_indicator() {
        let eta = 1e-3;
        assert_eq!(f_e(0.4, 0.4, eta), 0.5);
        assert!((f_e(0.4 - 10.0 * eta, 0.4, eta) - 0.9999546).abs() < 1e-7);
        let xs: Vec<f64> = (0..200).map(|i| -0.1 + i as f64 * 1e-3).collect();
        assert!(xs.windows(2).all(|w| f_e(w[0], 0.0, 0.01) >= f_e(w[1], 0.0, 0.01)));
    }

    #[test]
    fn cutoff_shape() {
        let a = 3.0;
        assert_eq!(q_alpha(a - 2.0 / 3.0, a), 0.0);
        assert_eq!(q_alpha(a - 1.0 / 3.0, a), 1.0);
        assert!((q_alpha(a - 0.5, a) - 0.5).abs() < 1e-12);
        let xs: Vec<f64> = (0..1000).map(|i| a - 1.0 + i as f64 * 1e-3).collect();
        assert!(xs.windows(2).all(|w| q_alpha(w[0], a) <= q_alpha(w[1], a)));
    }

    #[test]
    fn smoothing_scales() {
        let p = SmoothingParams::new(0.1, 10_000).unwrap();
        assert!(p.is_ordered());
        let p = SmoothingParams::new(0.2, 100).unwrap();
        assert!((p.eta_d - 100f64.powf(-1.3)).abs() < 1e-15);
        assert!((p.sandwich_slack() - (-(100f64.powf(0.1))).exp()).abs() < 1e-15);
    }

    #[test]
    fn counting_extremes() {
        let s = Spectrum::new(vec![-1.0, 0.0, 0.5], "t", 0).unwrap();
        assert_eq!(counting(&s, -5.0), 0);
        assert!(tr_f(&s, -5.0, 1e-3) < 1e-100);
        assert_eq!(counting(&s, 5.0), 3);
        assert_eq!(counting(&s, 0.0), 2);
        let es: Vec<f64> = (0..100).map(|i| -1.5 + 0.03 * i as f64).collect();
        assert!(es.windows(2).all(|w| tr_f(&s, w[0], 0.01) <= tr_f(&s, w[1], 0.01)));
    }

    #[test]
    fn sandwich_on_typical_locations() {
        let n = 100;
        let params = SmoothingParams::new(0.2, n).unwrap();
        let s = Spectrum::new(typical_locations(n), "typical", 0).unwrap();
        assert!(sandwich_check(&s, 0.0, &params).holds());
        // An eigenvalue exactly at E.
        let mut v = typical_locations(n);
        v[30] = -0.77;
        let s = Spectrum::new(v, "pinned", 0).unwrap();
        assert!(sandwich_check(&s, -0.77, &params).holds());
    }

    #[test]
    fn sandwich_on_goe() {
        let n = 100;
        let params = SmoothingParams::new(0.2, n).unwrap();
        for seed in 0..30u64 {
            let s = sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, seed).unwrap().spectrum().unwrap();
            for e in [-1.0, 0.0, 1.0] {
                let r = sandwich_check(&s, e, &params);
                assert!(r.holds(), "seed {seed} E {e}: {r:?}");
            }
        }
    }

    #[test]
    fn stieltjes_transform() {
        let m = m_sc(c64::new(0.0, 1.0));
        assert!(m.re.abs() < 1e-15);
        assert!((m.im - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        let z = c64::new(600.0, 800.0);
        assert!((m_sc(z) + z.inv()).norm() < 1e-5 * z.inv().norm());
        for e in [-1.5, -0.3, 0.0, 1.0, 1.9] {
            let m = m_sc(c64::new(e, 1e-8));
            assert!((m.im - PI * semicircle_density(e)).abs() < 1e-5);
        }
        for (re, im) in [(0.3, 0.01), (-3.0, 0.5), (5.0, 1e-6), (0.0, 30.0)] {
            let z = c64::new(re, im);
            let m = m_sc(z);
            assert!(m.im > 0.0);
            assert!((m * m + z * m + 1.0).norm() < 1e-14 * (1.0 + z.norm()));
        }
    }

    #[test]
    fn resolvent_of_zero() {
        let h = WignerDraw {
            class: SymmetryClass::RealSymmetric,
            matrix: SelfAdjointMatrix::zeros(5, SymmetryClass::RealSymmetric),
            seed: 0,
            law_id: "zero".into(),
        };
        let r = resolvent(&h, c64::new(0.0, 1.0)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { c64::new(0.0, 1.0) } else { c64::new(0.0, 0.0) };
                assert!((r.g[(i, j)] - want).norm() < 1e-15);
            }
        }
        assert!(ward_check(&r) < 1e-15);
        assert!(matches!(resolvent(&h, c64::new(0.0, 1e-16)), Err(Error::NearSingular { .. })));
    }

    #[test]
    fn resolvent_identities() {
        let h = sample_gaussian_invariant(100, SymmetryClass::RealSymmetric, 5).unwrap();
        let z = c64::new(0.3, 0.01);
        let r = resolvent(&h, z).unwrap();
        let s = h.spectrum().unwrap();
        assert!((r.normalized_trace() - normalized_trace_from_spectrum(&s, z)).norm() < 1e-8);
        assert!(ward_check(&r) <= 1e-7);
        // G(z)^* = G(conj z): compare with the solve at -conj(z) reflected.
        let rc = resolvent_of(&h.matrix, c64::new(z.re, z.im)).unwrap();
        let n = 100;
        let a = Mat::from_fn(n, n, |i, j| if i == j { h.matrix.get(i, j) - z.conj() } else { h.matrix.get(i, j) });
        let back = &a * rc.adjoint();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((back[(i, j)] - c64::new(want, 0.0)).norm() < 1e-8);
            }
        }
        let lhs = &Mat::from_fn(n, n, |i, j| if i == j { h.matrix.get(i, j) - z } else { h.matrix.get(i, j) }) * &r.g;
        for i in 0..n {
            assert!((lhs[(i, i)] - c64::new(1.0, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn local_law_on_goe() {
        let n = 200;
        let z = c64::new(0.0, 1.0);
        let bound = LOCAL_LAW_BUDGET * local_law_scale(n, z);
        let mut ok = 0;
        for seed in 0..10u64 {
            let h = sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, seed).unwrap();
            let stat = local_law_stat(&h, z).unwrap();
            assert!(stat >= 0.0);
            if stat <= bound {
                ok += 1;
            }
        }
        assert!(ok >= 9);
        let h = sample_gaussian_invariant(10, SymmetryClass::RealSymmetric, 0).unwrap();
        assert!(local_law_stat(&h, c64::new(11.0, 1.0)).is_err());
    }

    #[test]
    fn jackknife_matches_delta_method() {
        let a: Vec<c64> = (0..400).map(|i| c64::new(((i * 37) % 101) as f64 / 101.0, 0.0)).collect();
        let b: Vec<c64> = vec![c64::new(0.0, 0.0); 400];
        let (est, se) = jackknife_abs_mean_difference(&a, &b);
        let re: Vec<f64> = a.iter().map(|z| z.re).collect();
        let (m, s) = crate::stats::mean_and_stderr(&re);
        assert!((est - m).abs() < 1e-12);
        assert!((se / s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_ensembles_compare_to_zero() {
        // A law that is its own 2-moment match at t = 0.
        let mu = AtomicLaw::rademacher();
        let rows = green_comparison(&mu, &[2], 20, c64::new(0.0, 0.2), 0.0, 300, 1, 1).unwrap();
        assert_eq!(rows[0].t_used, 0.0);
        assert!(rows[0].estimate <= 2.0 * rows[0].stderr + 1e-12, "{:?}", rows[0]);
    }

    #[test]
    fn comparison_is_deterministic() {
        let mu = AtomicLaw::equispaced(6, 1.0).unwrap();
        let mu = match crate::ensembles::standardize(&EntryLaw::Atomic(mu)).unwrap() {
            EntryLaw::Atomic(a) => a,
            _ => unreachable!(),
        };
        let a = green_comparison(&mu, &[2, 4], 20, c64::new(0.0, 0.1), 0.5, 50, 9, 1).unwrap();
        let b = green_comparison(&mu, &[2, 4], 20, c64::new(0.0, 0.1), 0.5, 50, 9, 3).unwrap();
        assert_eq!(a, b);
    }
}
