//! Ground-truth cohorts at a given prevalence.

use crate::error::{Error, Result};
use crate::types::{Cohort, Fraction};

/// Splits `n_total` cases into positives and negatives.
///
/// The positive stratum is `prevalence * n_total` rounded half away from
/// zero; negatives take the exact complement. A product that sits within
/// floating-point noise of a half (e.g. `0.35 * 10`, which evaluates to
/// 3.4999999999999996) is treated as an exact half.
pub fn make_cohort(n_total: u64, prevalence: Fraction) -> Result<Cohort> {
    if n_total == 0 {
        return Err(Error::EmptyCohort);
    }
    let exact = prevalence.value() * n_total as f64;
    let floor = exact.floor();
    let tol = 1e-9 * exact.max(1.0);
    let n_positive = if (exact - (floor + 0.5)).abs() <= tol {
        floor + 1.0
    } else {
        exact.round()
    };
    let n_positive = (n_positive as u64).min(n_total);
    Cohort::new(n_positive, n_total - n_positive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frac(x: f64) -> Fraction {
        Fraction::new(x).unwrap()
    }

    #[test]
    fn study_cohorts() {
        let c = make_cohort(10_000, frac(0.30)).unwrap();
        assert_eq!((c.n_positive(), c.n_negative()), (3000, 7000));
        let c = make_cohort(10_000, frac(0.10)).unwrap();
        assert_eq!((c.n_positive(), c.n_negative()), (1000, 9000));
        for (p, pos) in [(0.7, 7000), (0.9, 9000)] {
            assert_eq!(make_cohort(10_000, frac(p)).unwrap().n_positive(), pos);
        }
    }

    #[test]
    fn rounding_policy() {
        let c = make_cohort(10, frac(0.5)).unwrap();
        assert_eq!((c.n_positive(), c.n_negative()), (5, 5));
        let c = make_cohort(10, frac(0.25)).unwrap();
        assert_eq!((c.n_positive(), c.n_negative()), (3, 7));
        assert_eq!(make_cohort(10, frac(0.35)).unwrap().n_positive(), 4);
        assert_eq!(make_cohort(10, frac(0.34)).unwrap().n_positive(), 3);
        assert_eq!(make_cohort(1, frac(0.5)).unwrap().n_positive(), 1);
    }

    #[test]
    fn zero_total_rejected() {
        assert!(make_cohort(0, frac(0.5)).is_err());
    }

    #[test]
    fn degenerate_prevalence() {
        let c = make_cohort(37, Fraction::ZERO).unwrap();
        assert_eq!((c.n_positive(), c.n_negative()), (0, 37));
        let c = make_cohort(37, Fraction::ONE).unwrap();
        assert_eq!((c.n_positive(), c.n_negative()), (37, 0));
    }

    proptest! {
        #[test]
        fn strata_sum_to_total(n in 1u64..1_000_000, p in 0.0f64..=1.0) {
            let c = make_cohort(n, frac(p)).unwrap();
            prop_assert_eq!(c.n_positive() + c.n_negative(), n);
        }

        #[test]
        fn monotone_in_prevalence(n in 1u64..100_000, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let c_lo = make_cohort(n, frac(lo)).unwrap();
            let c_hi = make_cohort(n, frac(hi)).unwrap();
            prop_assert!(c_lo.n_positive() <= c_hi.n_positive());
        }
    }
}
