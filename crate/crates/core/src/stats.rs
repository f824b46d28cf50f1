//! Empirical CDFs, exact two-sample Kolmogorov distance, DKW bands,
//! limiting smallest-gap laws and log-log rate fits.

use serde::{Deserialize, Serialize};

use crate::ensembles::SymmetryClass;
use crate::{Error, Result};

/// Empirical distribution function of a finite sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidArgument("empirical CDF needs at least one sample".into()));
        }
        if sample.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument("sample contains NaN".into()));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Self { sorted: sample })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{x_i <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.n() as f64
    }

    /// Pooled sample (sorted union).
    pub fn merge(&self, other: &Ecdf) -> Ecdf {
        let mut v = Vec::with_capacity(self.n() + other.n());
        let (mut i, mut j) = (0, 0);
        while i < self.n() || j < other.n() {
            if j >= other.n() || (i < self.n() && self.sorted[i] <= other.sorted[j]) {
                v.push(self.sorted[i]);
                i += 1;
            } else {
                v.push(other.sorted[j]);
                j += 1;
            }
        }
        Ecdf { sorted: v }
    }

    /// Empirical quantile (lower, type 1).
    pub fn quantile(&self, q: f64) -> f64 {
        let idx = ((q * self.n() as f64).ceil() as usize).clamp(1, self.n());
        self.sorted[idx - 1]
    }
}

/// Exact two-sample Kolmogorov distance `sup_x |F_a(x) - F_b(x)|`.
///
/// Both step functions are right-continuous, so the supremum is attained
/// just after one of the merged breakpoints.
pub fn kolmogorov_distance(a: &Ecdf, b: &Ecdf) -> f64 {
    let (na, nb) = (a.n() as f64, b.n() as f64);
    let (xa, xb) = (a.sorted(), b.sorted());
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < xa.len() || j < xb.len() {
        let v = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] <= v {
            i += 1;
        }
        while j < xb.len() && xb[j] <= v {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// Kolmogorov distance of a sample to a continuous CDF.
pub fn kolmogorov_distance_to<F: Fn(f64) -> f64>(a: &Ecdf, cdf: F) -> f64 {
    let n = a.n() as f64;
    a.sorted()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// DKW band half-width `sqrt(ln(2/delta) / (2n))`, clamped to 1.
pub fn dkw_bound(n: usize, delta: f64) -> f64 {
    assert!(n >= 1 && delta > 0.0 && delta < 1.0);
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt().min(1.0)
}

/// Two-sample band `sqrt(ln(2/delta) (1/n_a + 1/n_b) / 2)`, clamped to 1.
pub fn pooled_dkw_bound(n_a: usize, n_b: usize, delta: f64) -> f64 {
    assert!(n_a >= 1 && n_b >= 1 && delta > 0.0 && delta < 1.0);
    ((2.0 / delta).ln() * (1.0 / n_a as f64 + 1.0 / n_b as f64) / 2.0).sqrt().min(1.0)
}

/// Limiting CDF of the rescaled smallest bulk gap: `1 - e^{-x^3}` for the
/// Hermitian class, `1 - e^{-x^2}` for the real symmetric class.
pub fn min_gap_limit_cdf(x: f64, class: SymmetryClass) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    match class {
        SymmetryClass::ComplexHermitian => -(-x.powi(3)).exp_m1(),
        SymmetryClass::RealSymmetric => -(-x * x).exp_m1(),
    }
}

/// Density of [`min_gap_limit_cdf`].
pub fn min_gap_limit_density(x: f64, class: SymmetryClass) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    match class {
        SymmetryClass::ComplexHermitian => 3.0 * x * x * (-x.powi(3)).exp(),
        SymmetryClass::RealSymmetric => 2.0 * x * (-x * x).exp(),
    }
}

/// Quantile of [`min_gap_limit_cdf`].
pub fn min_gap_limit_quantile(q: f64, class: SymmetryClass) -> f64 {
    let e = -(-q).ln_1p();
    match class {
        SymmetryClass::ComplexHermitian => e.cbrt(),
        SymmetryClass::RealSymmetric => e.sqrt(),
    }
}

/// Least-squares fit of `log d_K` against `log N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(n, d)| !(n > 0.0) || !(d > 0.0)) {
        return Err(Error::InvalidArgument("rate fit needs positive N and d_K".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

/// One-sided sign-test p-value `P(Bin(n, 1/2) >= successes)`.
pub fn sign_test_p_value(successes: usize, trials: usize) -> f64 {
    if successes == 0 {
        return 1.0;
    }
    let ln_half_n = trials as f64 * 0.5f64.ln();
    let mut ln_choose = 0.0; // ln C(n, 0)
    let mut total = 0.0;
    for k in 0..=trials {
        if k > 0 {
            ln_choose += ((trials - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= successes {
            total += (ln_choose + ln_half_n).exp();
        }
    }
    total.min(1.0)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Median of a non-empty sample.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
