//! Exact p-moment matching of atomic laws by Gaussian-divisible laws.
//!
//! Given a standardized atomic law `mu` and a mixing fraction `t`, the
//! construction runs in two stages:
//!
//! 1. [`target_moments`] inverts the binomial mixing formula to find the
//!    unique moment sequence `m(X)` such that `sqrt(1 - t) X + sqrt(t) G`
//!    has the moments of `mu`;
//! 2. [`match_measure`] moves `p` designated atoms of `mu` (weights fixed)
//!    so that the shifted law has exactly those moments. The map from shifts
//!    to moments has Jacobian `J[l][k] = l w_k x_k^{l-1}`, whose determinant
//!    is `p! prod w_k prod_{i<j} |x_i - x_j|`, so Newton's method is well
//!    posed while the atoms stay separated.
//!
//! [`build_matched_gde`] combines both and halves `t` until the shift
//! problem is solvable.

use faer::prelude::*;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::ensembles::{AtomicLaw, EntryLaw, STANDARD_TOL};
use crate::linalg::ensure_sequential;
use crate::numeric::{binomial, compensated_sum, KahanSum};
use crate::{Error, Result};

/// Default sup-norm tolerance on matched moments.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Smallest mixing fraction tried by [`build_matched_gde`].
pub const T_FLOOR: f64 = 1e-4;
/// Default Newton iteration cap.
pub const DEFAULT_MAX_ITER: usize = 50;
/// Condition number above which the moment Jacobian counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Raw moments `m_1..m_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    m: Vec<f64>,
}

impl MomentVector {
    pub fn new(m: Vec<f64>) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("moments must be finite".into()));
        }
        Ok(Self { m })
    }

    pub fn p(&self) -> usize {
        self.m.len()
    }

    /// `m_k`, with `m_0 = 1`.
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.m[k - 1]
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }

    /// Sup-norm distance over the common orders.
    pub fn sup_distance(&self, other: &MomentVector) -> f64 {
        self.m
            .iter()
            .zip(&other.m)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Moments of the standard Gaussian: `(k - 1)!!` for even `k`, 0 for odd.
pub fn gaussian_moment(k: usize) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(|j| j as f64).product()
}

fn atomic_moments(points: &[f64], weights: &[f64], p: usize) -> Vec<f64> {
    (1..=p)
        .map(|k| compensated_sum(points.iter().zip(weights).map(|(x, w)| w * x.powi(k as i32))))
        .collect()
}

/// Exact raw moments of an entry law.
pub fn moments(law: &EntryLaw, p: usize) -> MomentVector {
    match law {
        EntryLaw::Atomic(a) => MomentVector {
            m: atomic_moments(a.points(), a.weights(), p),
        },
        EntryLaw::StandardGaussian => MomentVector {
            m: (1..=p).map(gaussian_moment).collect(),
        },
        EntryLaw::GaussianDivisible { base, t } => {
            let base = MomentVector {
                m: atomic_moments(base.points(), base.weights(), p),
            };
            gde_moments(&base, *t, p)
        }
    }
}

fn mixing_coefficient(k: usize, j: usize, t: f64) -> f64 {
    binomial(k, j) * (1.0 - t).powf((k - j) as f64 / 2.0) * t.powf(j as f64 / 2.0) * gaussian_moment(j)
}

/// Moments of `sqrt(1 - t) X + sqrt(t) G` from the moments of `X`.
pub fn gde_moments(base: &MomentVector, t: f64, p: usize) -> MomentVector {
    let m = (1..=p)
        .map(|k| {
            let mut acc = KahanSum::new();
            for j in 0..=k {
                let c = mixing_coefficient(k, j, t);
                if c != 0.0 {
                    acc.add(c * base.get(k - j));
                }
            }
            acc.value()
        })
        .collect();
    MomentVector { m }
}

/// The unique moments of `X` for which `sqrt(1 - t) X + sqrt(t) G` has
/// moments `mu_moments`, by triangular back-substitution.
pub fn target_moments(mu_moments: &MomentVector, t: f64, p: usize) -> Result<MomentVector> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::InvalidT(t));
    }
    if p > mu_moments.p() {
        return Err(Error::InvalidArgument(format!(
            "requested {p} moments from a vector of {}",
            mu_moments.p()
        )));
    }
    if p >= 2 && (mu_moments.get(1).abs() > STANDARD_TOL || (mu_moments.get(2) - 1.0).abs() > STANDARD_TOL) {
        return Err(Error::NotStandardized {
            mean: mu_moments.get(1),
            variance: mu_moments.get(2) - mu_moments.get(1).powi(2),
        });
    }
    let mut out = MomentVector { m: Vec::with_capacity(p) };
    for k in 1..=p {
        let mut acc = KahanSum::new();
        acc.add(mu_moments.get(k));
        for j in 1..=k {
            let c = mixing_coefficient(k, j, t);
            if c != 0.0 {
                acc.add(-c * out.get(k - j));
            }
        }
        out.m.push(acc.value() / (1.0 - t).powf(k as f64 / 2.0));
    }
    Ok(out)
}

/// Indices (ascending) of the `p` atoms moved during matching: the `p`
/// heaviest atoms, ties broken by ascending position.
pub fn designated_atoms(law: &AtomicLaw, p: usize) -> Result<Vec<usize>> {
    if law.len() < p {
        return Err(Error::TooFewAtoms {
            needed: p,
            have: law.len(),
        });
    }
    let mut idx: Vec<usize> = (0..law.len()).collect();
    // points are strictly increasing, so index order is position order
    idx.sort_by(|&a, &b| law.weights()[b].total_cmp(&law.weights()[a]).then(a.cmp(&b)));
    idx.truncate(p);
    idx.sort_unstable();
    Ok(idx)
}

fn jacobian_at(points: &[f64], weights: &[f64], atoms: &[usize]) -> Mat<f64> {
    let p = atoms.len();
    Mat::from_fn(p, p, |row, col| {
        let l = row + 1;
        let k = atoms[col];
        l as f64 * weights[k] * points[k].powi(row as i32)
    })
}

/// Jacobian of the first `p` moments with respect to shifts of the
/// designated atoms, at zero shift: `J[l-1][k] = l w_k x_k^{l-1}`.
/// Columns follow the designated atoms in ascending position.
pub fn jacobian(law: &AtomicLaw, p: usize) -> Result<Mat<f64>> {
    let atoms = designated_atoms(law, p)?;
    Ok(jacobian_at(law.points(), law.weights(), &atoms))
}

/// `p! prod w_k prod_{i<j} |x_i - x_j|` over the designated atoms.
pub fn jacobian_determinant_closed_form(law: &AtomicLaw, p: usize) -> Result<f64> {
    let atoms = designated_atoms(law, p)?;
    let factorial: f64 = (1..=p).map(|j| j as f64).product();
    let weights: f64 = atoms.iter().map(|&k| law.weights()[k]).product();
    let mut vandermonde = 1.0;
    for (a, &i) in atoms.iter().enumerate() {
        for &j in &atoms[a + 1..] {
            vandermonde *= (law.points()[i] - law.points()[j]).abs();
        }
    }
    Ok(factorial * weights * vandermonde)
}

/// Lower bound `p! c^{p(p-1)/2} kappa^p` on `|det J|` for point masses.
pub fn jacobian_determinant_lower_bound(p: usize, c: f64, kappa: f64) -> f64 {
    let factorial: f64 = (1..=p).map(|j| j as f64).product();
    factorial * c.powi((p * (p - 1) / 2) as i32) * kappa.powi(p as i32)
}

/// Per-atom location shifts applied to the designated atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftVector {
    /// Indices of the shifted atoms in the source law.
    pub atoms: Vec<usize>,
    pub delta: Vec<f64>,
}

impl ShiftVector {
    pub fn max_abs(&self) -> f64 {
        self.delta.iter().map(|d| d.abs()).fold(0.0, f64::max)
    }
}

/// Result of [`match_measure`].
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureMatch {
    pub law: AtomicLaw,
    pub shift: ShiftVector,
    pub iterations: usize,
    pub residual: f64,
    /// Sup-norm residual before the first step and after every accepted step.
    pub residual_history: Vec<f64>,
}

fn shifted_points(law: &AtomicLaw, atoms: &[usize], delta: &[f64]) -> Vec<f64> {
    let mut pts = law.points().to_vec();
    for (&k, d) in atoms.iter().zip(delta) {
        pts[k] += d;
    }
    pts
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn residual_vector(points: &[f64], weights: &[f64], target: &MomentVector) -> Vec<f64> {
    atomic_moments(points, weights, target.p())
        .into_iter()
        .zip(target.as_slice())
        .map(|(m, t)| m - t)
        .collect()
}

fn condition_estimate(j: &Mat<f64>) -> f64 {
    // rows scaled to unit max-norm so that moment orders are comparable
    let p = j.nrows();
    let scaled = Mat::from_fn(p, p, |r, c| {
        let s = (0..p).map(|k| j[(r, k)].abs()).fold(0.0, f64::max);
        if s > 0.0 {
            j[(r, c)] / s
        } else {
            0.0
        }
    });
    match scaled.singular_values() {
        Ok(sv) => {
            let max = sv.iter().copied().fold(0.0, f64::max);
            let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
            if min > 0.0 {
                max / min
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Shift the designated atoms of `law` so that its first `target.p()`
/// moments equal `target` to within `tol` (sup norm).
///
/// Newton's method with the analytic Jacobian at the current shift; a step
/// is halved while it fails to reduce the residual. Shifts are confined to
/// `|delta| < c / 4` with `c` the minimal atom separation of `law`.
pub fn match_measure(law: &AtomicLaw, target: &MomentVector, tol: f64, max_iter: usize) -> Result<MeasureMatch> {
    ensure_sequential();
    let p = target.p();
    let atoms = designated_atoms(law, p)?;
    let limit = law.min_separation() / 4.0;
    let weights = law.weights();
    let mut delta = vec![0.0; p];
    let mut points = law.points().to_vec();
    let mut f = residual_vector(&points, weights, target);
    let mut r = sup_norm(&f);
    let mut history = vec![r];
    let mut iterations = 0;
    // Once within tolerance a couple of extra steps are taken if they help,
    // so that downstream mixing does not amplify the residual past `tol`.
    let mut polish = 2;

    while r > tol || (polish > 0 && r > 0.0) {
        if r <= tol {
            polish -= 1;
        } else if iterations >= max_iter {
            return Err(Error::NoConvergence { iterations, residual: r });
        }
        let j = jacobian_at(&points, weights, &atoms);
        let condition = condition_estimate(&j);
        if !(condition <= MAX_CONDITION) {
            if r <= tol {
                break;
            }
            return Err(Error::SingularJacobian { condition });
        }
        let rhs = Mat::from_fn(p, 1, |i, _| -f[i]);
        let step = j.partial_piv_lu().solve(&rhs);
        let step: Vec<f64> = (0..p).map(|i| step[(i, 0)]).collect();

        let full: Vec<f64> = delta.iter().zip(&step).map(|(d, s)| d + s).collect();
        let reach = sup_norm(&full);
        if !(reach < limit) {
            if r <= tol {
                break;
            }
            return Err(Error::SeparationViolated { shift: reach, limit });
        }

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand: Vec<f64> = delta.iter().zip(&step).map(|(d, s)| d + lambda * s).collect();
            let cand_points = shifted_points(law, &atoms, &cand);
            let cand_f = residual_vector(&cand_points, weights, target);
            let cand_r = sup_norm(&cand_f);
            if cand_r < r {
                accepted = Some((cand, cand_points, cand_f, cand_r));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((d, pts, fv, rv)) => {
                delta = d;
                points = pts;
                f = fv;
                r = rv;
                iterations += 1;
                history.push(r);
            }
            None if r <= tol => break,
            None => return Err(Error::NoConvergence { iterations, residual: r }),
        }
    }

    let matched = law.with_points(points).map_err(|_| Error::SeparationViolated {
        shift: sup_norm(&delta),
        limit,
    })?;
    Ok(MeasureMatch {
        law: matched,
        shift: ShiftVector { atoms, delta },
        iterations,
        residual: r,
        residual_history: history,
    })
}

/// A Gaussian-divisible law matching the first `p` moments of its source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub p: usize,
    pub matched_law: EntryLaw,
    pub shift: ShiftVector,
    pub t_requested: f64,
    pub t_used: f64,
    /// `max_{j <= p} |m_j(matched) - m_j(source)|`.
    pub residual: f64,
    /// Newton steps taken for the accepted `t_used`.
    pub iterations: usize,
    /// Number of mixing fractions tried, including the accepted one.
    pub attempts: usize,
}

/// Build `sqrt(1 - t) X + sqrt(t) G`, `X ~ nu`, with the first `p` moments of `mu`.
///
/// Starts at `t_requested` and halves `t` whenever the shift problem has no
/// solution within the separation constraint, down to [`T_FLOOR`].
pub fn build_matched_gde(mu: &AtomicLaw, p: usize, t_requested: f64, tol: f64) -> Result<MatchResult> {
    if !(0.0..1.0).contains(&t_requested) {
        return Err(Error::InvalidT(t_requested));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    let source = EntryLaw::Atomic(mu.clone());
    source.ensure_standardized()?;
    designated_atoms(mu, p)?;
    let mu_moments = moments(&source, p);

    let mut t = t_requested;
    let mut attempts = 0;
    loop {
        attempts += 1;
        let target = target_moments(&mu_moments, t, p)?;
        let outcome = match_measure(mu, &target, tol, DEFAULT_MAX_ITER).and_then(|m| {
            let matched_law = EntryLaw::gaussian_divisible(m.law.clone(), t)?;
            let residual = verify_match(&matched_law, &source, p);
            if residual <= tol {
                Ok((m, matched_law, residual))
            } else {
                Err(Error::NoConvergence {
                    iterations: m.iterations,
                    residual,
                })
            }
        });
        match outcome {
            Ok((m, matched_law, residual)) => {
                return Ok(MatchResult {
                    p,
                    matched_law,
                    shift: m.shift,
                    t_requested,
                    t_used: t,
                    residual,
                    iterations: m.iterations,
                    attempts,
                })
            }
            Err(e) if e.is_convergence_failure() => {
                t *= 0.5;
                if t < T_FLOOR || t_requested == 0.0 {
                    return Err(Error::NoAdmissibleT { floor: T_FLOOR });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// `max_{j <= p} |m_j(a) - m_j(b)|`, computed exactly.
pub fn verify_match(a: &EntryLaw, b: &EntryLaw, p: usize) -> f64 {
    moments(a, p).sup_distance(&moments(b, p))
}
