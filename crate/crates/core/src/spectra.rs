//! Spectra, semicircle quantiles, rigidity profiles and eigenvalue gaps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ensembles::WignerDraw;
use crate::{Error, Result};

/// Ascending eigenvalues with ensemble metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
    pub ensemble_id: String,
    pub seed: u64,
}

impl Spectrum {
    /// Sorts `values` ascending.
    pub fn new(mut values: Vec<f64>, ensemble_id: impl Into<String>, seed: u64) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("spectrum contains non-finite values".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            values,
            ensemble_id: ensemble_id.into(),
            seed,
        })
    }

    pub(crate) fn from_sorted(values: Vec<f64>, ensemble_id: impl Into<String>, seed: u64) -> Self {
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        Self {
            values,
            ensemble_id: ensemble_id.into(),
            seed,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// 1-based eigenvalue `lambda_k`.
    pub fn lambda(&self, k: usize) -> f64 {
        self.values[k - 1]
    }
}

/// Sorted eigenvalues of a sampled matrix.
pub fn eigenvalues(h: &WignerDraw) -> Result<Spectrum> {
    h.spectrum()
}

/// Semicircle density `sqrt((4 - x^2)_+) / (2 pi)`.
pub fn semicircle_density(x: f64) -> f64 {
    (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI)
}

/// Semicircle distribution function.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    let v = 0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI;
    v.clamp(0.0, 1.0)
}

/// Semicircle quantile: the `x` with `semicircle_cdf(x) = q`.
pub fn semicircle_quantile(q: f64) -> f64 {
    if q <= 0.0 {
        return -2.0;
    }
    if q >= 1.0 {
        return 2.0;
    }
    if q == 0.5 {
        return 0.0;
    }
    // odd symmetry keeps the solve on the upper half for accuracy
    if q < 0.5 {
        return -semicircle_quantile(1.0 - q);
    }
    let (mut lo, mut hi) = (0.0_f64, 2.0_f64);
    let mut x = 1.0;
    for _ in 0..200 {
        let f = semicircle_cdf(x) - q;
        if f.abs() < 1e-16 || hi - lo < 1e-15 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = semicircle_density(x);
        let newton = x - f / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}

/// Typical location `gamma_k`: the `k/N` quantile of the semicircle law.
pub fn typical_location(k: usize, n: usize) -> f64 {
    assert!(k >= 1 && k <= n, "typical_location needs 1 <= k <= N");
    if 2 * k == n {
        return 0.0;
    }
    semicircle_quantile(k as f64 / n as f64)
}

/// All typical locations `gamma_1..gamma_N`.
pub fn typical_locations(n: usize) -> Vec<f64> {
    (1..=n).map(|k| typical_location(k, n)).collect()
}

/// Rigidity residual profile `|lambda_k - gamma_k| N^{2/3} khat^{1/3}`,
/// `khat = min(k, N + 1 - k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidityReport {
    pub profile: Vec<f64>,
    /// Maximum of the profile over `alpha N <= k <= (1 - alpha) N`.
    pub max_bulk_residual: f64,
}

pub fn rigidity_report(s: &Spectrum, alpha: f64) -> RigidityReport {
    let n = s.n();
    let nf = n as f64;
    let profile: Vec<f64> = (1..=n)
        .map(|k| {
            let khat = k.min(n + 1 - k) as f64;
            (s.lambda(k) - typical_location(k, n)).abs() * nf.powf(2.0 / 3.0) * khat.powf(1.0 / 3.0)
        })
        .collect();
    let (lo, hi) = bulk_index_range(n, alpha);
    let max_bulk_residual = (lo..=hi.min(n)).map(|k| profile[k - 1]).fold(0.0, f64::max);
    RigidityReport {
        profile,
        max_bulk_residual,
    }
}

/// One eigenvalue gap `lambda_{k+1} - lambda_k` with its scaled version.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub k: usize,
    pub raw_gap: f64,
    pub scaled_gap: f64,
}

/// Bulk gap indices `ceil(alpha N) <= k <= min(floor((1 - alpha) N), N - 1)`.
pub fn bulk_index_range(n: usize, alpha: f64) -> (usize, usize) {
    let nf = n as f64;
    let lo = ((alpha * nf) - 1e-9).ceil().max(1.0) as usize;
    let hi = (((1.0 - alpha) * nf) + 1e-9).floor() as usize;
    (lo, hi.min(n.saturating_sub(1)))
}

/// Bulk gaps with `scaled_gap = N (lambda_{k+1} - lambda_k)`.
pub fn bulk_gaps(s: &Spectrum, alpha: f64) -> Vec<GapRecord> {
    assert!(alpha > 0.0 && alpha < 0.5, "alpha must lie in (0, 1/2)");
    let n = s.n();
    let (lo, hi) = bulk_index_range(n, alpha);
    (lo..=hi)
        .filter(|&k| k < n)
        .map(|k| {
            let raw_gap = s.lambda(k + 1) - s.lambda(k);
            GapRecord {
                k,
                raw_gap,
                scaled_gap: n as f64 * raw_gap,
            }
        })
        .collect()
}

/// The single gap at index `k`, scaled by `N`.
pub fn gap_at(s: &Spectrum, k: usize) -> GapRecord {
    let raw_gap = s.lambda(k + 1) - s.lambda(k);
    GapRecord {
        k,
        raw_gap,
        scaled_gap: s.n() as f64 * raw_gap,
    }
}

/// Smallest bulk gap, scaled by `N^exponent`; ties go to the smallest `k`.
pub fn min_bulk_gap(s: &Spectrum, alpha: f64, exponent: f64) -> Result<GapRecord> {
    let gaps = bulk_gaps(s, alpha);
    let best = gaps
        .iter()
        .copied()
        .reduce(|best, g| if g.raw_gap < best.raw_gap { g } else { best })
        .ok_or_else(|| Error::InvalidArgument(format!("no bulk gaps for N = {} and alpha = {alpha}", s.n())))?;
    Ok(GapRecord {
        scaled_gap: (s.n() as f64).powf(exponent) * best.raw_gap,
        ..best
    })
}
