//! Monte Carlo cross-checks between independent samplers and flows.

use rand::Rng;

use wigner_gaps::dynamics::{ou_flow_euler, ou_flow_exact};
use wigner_gaps::ensembles::{rng_from_seed, sample_gaussian_invariant, sample_gxe_spectrum_tridiagonal, sample_wigner, standardize};
use wigner_gaps::moment_match::{build_matched_gde, moments};
use wigner_gaps::runner::{derive_seed, derive_stream};
use wigner_gaps::spectra::{gap_at, semicircle_cdf};
use wigner_gaps::stats::{dkw_bound, kolmogorov_distance, kolmogorov_distance_to, mean_and_stderr, pooled_dkw_bound};
use wigner_gaps::{AtomicLaw, Ecdf, EntryLaw, SymmetryClass};

fn middle_gap(s: &wigner_gaps::Spectrum) -> f64 {
    gap_at(s, s.n() / 2).scaled_gap
}

#[test]
fn tridiagonal_and_dense_goe_agree() {
    let (n, reps) = (100, 4000u64);
    let tri: Vec<f64> = (0..reps)
        .map(|i| middle_gap(&sample_gxe_spectrum_tridiagonal(n, SymmetryClass::RealSymmetric, derive_seed(1, i)).unwrap()))
        .collect();
    let dense: Vec<f64> = (0..reps)
        .map(|i| {
            let d = sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, derive_seed(2, i)).unwrap();
            middle_gap(&d.spectrum().unwrap())
        })
        .collect();
    let d = kolmogorov_distance(&Ecdf::new(tri).unwrap(), &Ecdf::new(dense).unwrap());
    let band = pooled_dkw_bound(reps as usize, reps as usize, 0.05);
    assert!(d <= 2.0 * band, "d_K {d}, band {band}");
}

#[test]
fn gue_spectrum_follows_semicircle() {
    let (n, reps) = (200, 2000u64);
    let mut all = Vec::with_capacity(n * reps as usize);
    for i in 0..reps {
        all.extend_from_slice(sample_gxe_spectrum_tridiagonal(n, SymmetryClass::ComplexHermitian, derive_seed(3, i)).unwrap().values());
    }
    let d = kolmogorov_distance_to(&Ecdf::new(all).unwrap(), semicircle_cdf);
    assert!(d <= 0.02, "d_K {d}");
}

#[test]
fn trace_identities() {
    let d = sample_wigner(&EntryLaw::rademacher(), 50, SymmetryClass::ComplexHermitian, 4).unwrap();
    let s = d.spectrum().unwrap();
    let sum: f64 = s.values().iter().sum();
    let sq: f64 = s.values().iter().map(|x| x * x).sum();
    assert!((sum - d.matrix.trace()).abs() <= 1e-9 * d.matrix.trace().abs().max(1.0));
    assert!((sq - d.matrix.trace_of_square()).abs() <= 1e-9 * d.matrix.trace_of_square());
}

#[test]
fn long_flow_forgets_initial_law() {
    let (n, reps) = (100, 2000u64);
    let law = EntryLaw::rademacher();
    let mut flowed = Vec::new();
    let mut goe = Vec::new();
    for i in 0..reps {
        let h0 = sample_wigner(&law, n, SymmetryClass::RealSymmetric, derive_stream(5, 0, i)).unwrap();
        flowed.push(middle_gap(&ou_flow_exact(&h0, 20.0, derive_stream(5, 1, i)).unwrap().spectrum().unwrap()));
        goe.push(middle_gap(&sample_gxe_spectrum_tridiagonal(n, SymmetryClass::RealSymmetric, derive_stream(5, 2, i)).unwrap()));
    }
    let d = kolmogorov_distance(&Ecdf::new(flowed).unwrap(), &Ecdf::new(goe).unwrap());
    assert!(d <= 2.0 * pooled_dkw_bound(reps as usize, reps as usize, 0.05), "d_K {d}");
}

#[test]
fn exact_marginal_and_euler_agree() {
    let (n, reps, t) = (50, 2000u64, 0.5);
    let law = EntryLaw::rademacher();
    let mut exact = Vec::new();
    let mut euler = Vec::new();
    for i in 0..reps {
        let h0 = sample_wigner(&law, n, SymmetryClass::RealSymmetric, derive_stream(6, 0, i)).unwrap();
        exact.push(middle_gap(&ou_flow_exact(&h0, t, derive_stream(6, 1, i)).unwrap().spectrum().unwrap()));
        let h1 = sample_wigner(&law, n, SymmetryClass::RealSymmetric, derive_stream(6, 2, i)).unwrap();
        euler.push(middle_gap(&ou_flow_euler(&h1, t, 0.002, derive_stream(6, 3, i)).unwrap().spectrum().unwrap()));
    }
    let d = kolmogorov_distance(&Ecdf::new(exact).unwrap(), &Ecdf::new(euler).unwrap());
    assert!(d <= 2.0 * pooled_dkw_bound(reps as usize, reps as usize, 0.05), "d_K {d}");
}

#[test]
fn matched_gde_moments_by_monte_carlo() {
    let mu = match standardize(&EntryLaw::Atomic(AtomicLaw::equispaced(5, 1.0).unwrap())).unwrap() {
        EntryLaw::Atomic(a) => a,
        _ => unreachable!(),
    };
    let p = 4;
    let res = build_matched_gde(&mu, p, 0.3, 1e-10).unwrap();
    let target = moments(&EntryLaw::Atomic(mu), p);
    let draws = 400_000;
    let mut rng = rng_from_seed(7);
    let xs: Vec<f64> = (0..draws).map(|_| res.matched_law.sample(&mut rng)).collect();
    for k in 1..=p {
        let pk: Vec<f64> = xs.iter().map(|x| x.powi(k as i32)).collect();
        let (m, se) = mean_and_stderr(&pk);
        assert!((m - target.get(k)).abs() <= 4.0 * se, "moment {k}: {m} vs {}", target.get(k));
    }
}

#[test]
fn ecdf_of_iid_uniform_within_dkw() {
    let mut rng = rng_from_seed(8);
    let n = 3000;
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let d = kolmogorov_distance_to(&Ecdf::new(xs).unwrap(), |x| x.clamp(0.0, 1.0));
    assert!(d <= dkw_bound(n, 0.01));
}
