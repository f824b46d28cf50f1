use proptest::prelude::*;

use wigner_gaps::ensembles::{sample_wigner, standardize, validate_psupport};
use wigner_gaps::moment_match::{
    build_matched_gde, gde_moments, jacobian, jacobian_determinant_closed_form, jacobian_determinant_lower_bound,
    match_measure, moments, target_moments, DEFAULT_TOL,
};
use wigner_gaps::spectra::{bulk_gaps, semicircle_cdf, typical_location};
use wigner_gaps::{AtomicLaw, EntryLaw, PSupportParams, Spectrum, SymmetryClass};

/// Random standardized law with `count` atoms; before standardization the
/// gaps lie in [0.3, 1.5) and weight ratios are at most 4.
fn atomic_law(count: std::ops::Range<usize>) -> impl Strategy<Value = AtomicLaw> {
    count
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.3f64..1.5, n),
                prop::collection::vec(0.5f64..2.0, n),
                -1.0f64..1.0,
            )
        })
        .prop_map(|(gaps, raw_w, start)| {
            let mut pts = vec![start];
            for g in &gaps[1..] {
                let last = *pts.last().unwrap();
                pts.push(last + g);
            }
            let total: f64 = raw_w.iter().sum();
            let w: Vec<f64> = raw_w.iter().map(|x| x / total).collect();
            let law = AtomicLaw::new(pts, w).unwrap();
            match standardize(&EntryLaw::Atomic(law)).unwrap() {
                EntryLaw::Atomic(a) => a,
                _ => unreachable!(),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn moment_round_trip(law in atomic_law(2..9), ti in 0usize..4) {
        let t = [0.1, 0.25, 0.5, 0.9][ti];
        let p = 8;
        let m = moments(&EntryLaw::Atomic(law), p);
        let back = gde_moments(&target_moments(&m, t, p).unwrap(), t, p);
        for k in 1..=p {
            let scale = m.get(k).abs().max(1.0);
            prop_assert!((back.get(k) - m.get(k)).abs() <= 1e-12 * scale, "k {}: {} vs {}", k, back.get(k), m.get(k));
        }
    }

    #[test]
    fn jacobian_determinant_identity(law in atomic_law(2..9)) {
        let p = law.len();
        let det = jacobian(&law, p).unwrap().determinant().abs();
        let closed = jacobian_determinant_closed_form(&law, p).unwrap();
        prop_assert!((det / closed - 1.0).abs() < 1e-10, "{} vs {}", det, closed);
    }

    #[test]
    fn jacobian_lower_bound_under_psupport(law in atomic_law(2..8)) {
        let p = law.len();
        let c = law.min_separation() * 0.999;
        let kappa = 0.999 * law.weights().iter().copied().fold(f64::INFINITY, f64::min).min(1.0 / p as f64);
        let a = law.points().iter().map(|x| x.abs()).fold(0.0, f64::max) + 1.0;
        let params = PSupportParams { p, c, c_hat: 0.0, kappa, a };
        prop_assume!(validate_psupport(&EntryLaw::Atomic(law.clone()), &params).satisfied);
        let det = jacobian_determinant_closed_form(&law, p).unwrap();
        prop_assert!(det >= jacobian_determinant_lower_bound(p, c, kappa) * (1.0 - 1e-12));
    }

    #[test]
    fn matched_atoms_stay_local(law in atomic_law(4..7)) {
        let p = 4;
        if let Ok(res) = build_matched_gde(&law, p, 0.3, DEFAULT_TOL) {
            prop_assert!(res.residual <= DEFAULT_TOL);
            prop_assert!(res.shift.max_abs() < law.min_separation() / 4.0);
            let base = res.matched_law.atomic_part().unwrap();
            let bound = law.points().iter().map(|x| x.abs()).fold(0.0, f64::max) + 1.0;
            prop_assert!(base.points().iter().all(|x| x.abs() <= bound));
        }
    }

    #[test]
    fn newton_converges_quadratically(law in atomic_law(3..6)) {
        let p = law.len();
        let mu = moments(&EntryLaw::Atomic(law.clone()), p);
        let target = target_moments(&mu, 0.05, p).unwrap();
        if let Ok(m) = match_measure(&law, &target, 1e-13, 50) {
            // Consecutive residuals below 1e-4 must contract superlinearly.
            let h: Vec<f64> = m.residual_history.iter().copied().filter(|r| *r > 1e-13).collect();
            for w in h.windows(2) {
                if w[0] < 1e-4 {
                    prop_assert!(w[1] <= 0.1 * w[0], "history {:?}", m.residual_history);
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_self_adjoint(seed in any::<u64>(), n in 2usize..12, complex in any::<bool>()) {
        let class = if complex { SymmetryClass::ComplexHermitian } else { SymmetryClass::RealSymmetric };
        let law = EntryLaw::rademacher();
        let a = sample_wigner(&law, n, class, seed).unwrap();
        let b = sample_wigner(&law, n, class, seed).unwrap();
        prop_assert!(a.matrix.is_exactly_self_adjoint());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bulk_gaps_ignore_input_order(mut v in prop::collection::vec(-3.0f64..3.0, 8..40), alpha in 0.05f64..0.45) {
        let a = bulk_gaps(&Spectrum::new(v.clone(), "x", 0).unwrap(), alpha);
        v.reverse();
        let b = bulk_gaps(&Spectrum::new(v, "x", 0).unwrap(), alpha);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn typical_location_inverts_cdf(n in 2usize..2000, frac in 0.0f64..1.0) {
        let k = 1 + ((n - 1) as f64 * frac) as usize;
        let g = typical_location(k, n);
        prop_assert!((semicircle_cdf(g) - k as f64 / n as f64).abs() < 1e-12);
        if k < n {
            prop_assert!(typical_location(k + 1, n) > g);
        }
    }
}
