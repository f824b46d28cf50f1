//! Fixtures shared by the benchmarks.

use wigner_gaps::ensembles::{sample_wigner, standardize};
use wigner_gaps::{AtomicLaw, EntryLaw, SymmetryClass, WignerDraw};

/// Standardized law with `k` equally weighted, equally spaced atoms.
pub fn equispaced_law(k: usize) -> AtomicLaw {
    match standardize(&EntryLaw::Atomic(AtomicLaw::equispaced(k, 1.0).expect("k >= 1"))) {
        Ok(EntryLaw::Atomic(a)) => a,
        _ => panic!("equispaced law with {k} atoms cannot be standardized"),
    }
}

/// A fixed Rademacher Wigner matrix.
pub fn rademacher_matrix(n: usize, class: SymmetryClass) -> WignerDraw {
    sample_wigner(&EntryLaw::rademacher(), n, class, 0x5eed).expect("valid size")
}
