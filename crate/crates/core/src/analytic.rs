//! Expectation-level confusion counts, observed metrics, and the
//! best/worst-case agreement bounds.
//!
//! Within one ground-truth stratum the joint model-by-reference table has a
//! single free cell once both classifiers' counts are fixed: the number of
//! cases both flag positive. Every other cell follows from the margins.
//! Raising that overlap raises the agreeing-negative cell by the same
//! amount, so pushing it to the top of its Fréchet interval in both strata
//! maximizes the numerators of observed sensitivity and specificity at the
//! same time, and the bottom of the interval minimizes both. The best and
//! worst cases are therefore attained by single, jointly valid tables.

use crate::error::Result;
use crate::types::{
    frechet_interval, AgreementTable, Cohort, ConfusionCounts, Fraction, MetricBounds,
    ObservedMetrics, OperatingPoint, Stratum,
};

/// How the model and reference labels are coupled inside each stratum
/// when computing a single point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PointAssumption {
    /// Labels are independent given ground truth.
    #[default]
    ConditionalIndependence,
    /// A caller-supplied table.
    ExplicitTable(AgreementTable),
}

/// Expected confusion counts of a classifier with operating point `op`.
pub fn confusion_counts(cohort: &Cohort, op: &OperatingPoint) -> ConfusionCounts {
    let pos = cohort.n_positive() as f64;
    let neg = cohort.n_negative() as f64;
    let tp = op.sensitivity.value() * pos;
    let tn = op.specificity.value() * neg;
    ConfusionCounts::new(cohort, tp, pos - tp, tn, neg - tn)
        .expect("rates in [0, 1] always yield valid counts")
}

/// Model sensitivity and specificity using the reference labels as truth.
pub fn observed_metrics(table: &AgreementTable) -> ObservedMetrics {
    let pos = table.stratum(Stratum::Positive);
    let neg = table.stratum(Stratum::Negative);
    ObservedMetrics {
        sensitivity: Fraction::ratio(
            pos.both_pos + neg.both_pos,
            table.reference_positive_total(),
        ),
        specificity: Fraction::ratio(
            pos.both_neg + neg.both_neg,
            table.reference_negative_total(),
        ),
    }
}

struct Margins {
    cohort: Cohort,
    model: ConfusionCounts,
    reference: ConfusionCounts,
}

impl Margins {
    fn new(cohort: &Cohort, model: &OperatingPoint, reference: &OperatingPoint) -> Self {
        Margins {
            cohort: *cohort,
            model: confusion_counts(cohort, model),
            reference: confusion_counts(cohort, reference),
        }
    }

    fn table_with(&self, overlap: impl Fn(f64, f64, f64) -> f64) -> AgreementTable {
        let [pos, neg] = Stratum::BOTH.map(|s| {
            overlap(
                self.model.flagged_positive(s),
                self.reference.flagged_positive(s),
                self.cohort.stratum_size(s) as f64,
            )
        });
        AgreementTable::from_overlaps(&self.cohort, &self.model, &self.reference, pos, neg)
            .expect("overlap chosen inside the Fréchet interval")
    }
}

fn independence_overlap(model_pos: f64, ref_pos: f64, size: f64) -> f64 {
    if size == 0.0 {
        0.0
    } else {
        model_pos * ref_pos / size
    }
}

/// Agreement table whose overlap cells are the independence expectation.
pub fn independence_table(
    cohort: &Cohort,
    model: &OperatingPoint,
    reference: &OperatingPoint,
) -> AgreementTable {
    Margins::new(cohort, model, reference).table_with(independence_overlap)
}

/// Agreement table with maximal overlap in each stratum.
pub fn best_case_table(
    cohort: &Cohort,
    model: &OperatingPoint,
    reference: &OperatingPoint,
) -> AgreementTable {
    Margins::new(cohort, model, reference).table_with(|m, r, n| frechet_interval(m, r, n).1)
}

/// Agreement table with minimal overlap in each stratum.
pub fn worst_case_table(
    cohort: &Cohort,
    model: &OperatingPoint,
    reference: &OperatingPoint,
) -> AgreementTable {
    Margins::new(cohort, model, reference).table_with(|m, r, n| frechet_interval(m, r, n).0)
}

/// Observed metrics under conditional independence of the two labelers.
/// Matches the large-cohort mean of the Monte Carlo trials.
pub fn point_estimate(
    cohort: &Cohort,
    model: &OperatingPoint,
    reference: &OperatingPoint,
) -> ObservedMetrics {
    observed_metrics(&independence_table(cohort, model, reference))
}

/// Point estimate under an explicit assumption about label coupling.
pub fn point_estimate_with(
    cohort: &Cohort,
    model: &OperatingPoint,
    reference: &OperatingPoint,
    assumption: &PointAssumption,
) -> ObservedMetrics {
    match assumption {
        PointAssumption::ConditionalIndependence => point_estimate(cohort, model, reference),
        PointAssumption::ExplicitTable(table) => observed_metrics(table),
    }
}

pub fn best_case(
    cohort: &Cohort,
    model: &OperatingPoint,
    reference: &OperatingPoint,
) -> ObservedMetrics {
    observed_metrics(&best_case_table(cohort, model, reference))
}

pub fn worst_case(
    cohort: &Cohort,
    model: &OperatingPoint,
    reference: &OperatingPoint,
) -> ObservedMetrics {
    observed_metrics(&worst_case_table(cohort, model, reference))
}

/// Bounds for both metrics; a metric is `None` when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsPair {
    pub sensitivity: Option<MetricBounds>,
    pub specificity: Option<MetricBounds>,
}

fn pack(worst: Option<Fraction>, best: Option<Fraction>) -> Result<Option<MetricBounds>> {
    match (worst, best) {
        (Some(w), Some(b)) => MetricBounds::new(w, b).map(Some),
        _ => Ok(None),
    }
}

/// Best case, worst case, and error range of each observed metric.
pub fn metric_bounds(
    cohort: &Cohort,
    model: &OperatingPoint,
    reference: &OperatingPoint,
) -> BoundsPair {
    let best = best_case(cohort, model, reference);
    let worst = worst_case(cohort, model, reference);
    BoundsPair {
        sensitivity: pack(worst.sensitivity, best.sensitivity)
            .expect("minimal overlap never beats maximal overlap"),
        specificity: pack(worst.specificity, best.specificity)
            .expect("minimal overlap never beats maximal overlap"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Metric;
    use proptest::prelude::*;

    fn op(se: f64, sp: f64) -> OperatingPoint {
        OperatingPoint::new(se, sp).unwrap()
    }

    fn cohort(p: u64, n: u64) -> Cohort {
        Cohort::new(p, n).unwrap()
    }

    fn val(x: Option<Fraction>) -> f64 {
        x.expect("defined").value()
    }

    #[test]
    fn confusion_counts_worked_example() {
        let c = cohort(3000, 7000);
        let r = confusion_counts(&c, &op(0.9, 0.9));
        assert_eq!((r.tp(), r.fn_(), r.tn(), r.fp()), (2700.0, 300.0, 6300.0, 700.0));
        let m = confusion_counts(&c, &op(0.8, 0.8));
        assert_eq!((m.tp(), m.fn_(), m.tn(), m.fp()), (2400.0, 600.0, 5600.0, 1400.0));
        let p = confusion_counts(&cohort(1000, 9000), &OperatingPoint::PERFECT);
        assert_eq!((p.tp(), p.fn_(), p.tn(), p.fp()), (1000.0, 0.0, 9000.0, 0.0));
    }

    #[test]
    fn full_agreement_is_perfect() {
        let c = cohort(3000, 7000);
        let counts = confusion_counts(&c, &op(0.83, 0.91));
        let t = AgreementTable::full_agreement(&c, &counts).unwrap();
        let m = observed_metrics(&t);
        assert_eq!(val(m.sensitivity), 1.0);
        assert_eq!(val(m.specificity), 1.0);
    }

    #[test]
    fn all_negative_reference_leaves_sensitivity_undefined() {
        let c = cohort(100, 900);
        let m = point_estimate(&c, &op(0.9, 0.9), &op(0.0, 1.0));
        assert!(m.sensitivity.is_none());
        assert!(m.specificity.is_some());
    }

    #[test]
    fn worst_case_worked_example() {
        let m = worst_case(&cohort(3000, 7000), &op(0.8, 0.8), &op(0.9, 0.9));
        assert!((val(m.sensitivity) - 2100.0 / 3400.0).abs() < 1e-15);
        assert!((val(m.specificity) - 4900.0 / 6600.0).abs() < 1e-15);
    }

    #[test]
    fn best_case_worked_example() {
        // maximal overlap: 2400 + 700 agreeing positives over 3400 reference positives
        let m = best_case(&cohort(3000, 7000), &op(0.8, 0.8), &op(0.9, 0.9));
        assert!((val(m.sensitivity) - 3100.0 / 3400.0).abs() < 1e-15);
        assert!((val(m.specificity) - 5900.0 / 6600.0).abs() < 1e-15);
    }

    #[test]
    fn bounds_at_low_prevalence() {
        let c = cohort(1000, 9000);
        let model = op(0.95, 0.95);
        let reference = op(0.90, 0.95);
        assert!((val(best_case(&c, &model, &reference).sensitivity) - 1.0).abs() < 1e-15);
        let worst = val(worst_case(&c, &model, &reference).sensitivity);
        assert!((worst - 850.0 / 1350.0).abs() < 1e-15);
        let b = metric_bounds(&c, &model, &reference);
        assert!((b.sensitivity.unwrap().range().value() - 500.0 / 1350.0).abs() < 1e-12);

        let b = metric_bounds(&c, &model, &op(0.90, 0.90));
        let spec = b.specificity.unwrap();
        assert!((spec.best().value() - 8150.0 / 8200.0).abs() < 1e-12);
        assert!((spec.worst().value() - 7650.0 / 8200.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_reference_collapses_bounds() {
        let c = cohort(1000, 9000);
        let model = op(0.95, 0.93);
        let b = metric_bounds(&c, &model, &OperatingPoint::PERFECT);
        for (bounds, truth) in [(b.sensitivity, 0.95), (b.specificity, 0.93)] {
            let bounds = bounds.unwrap();
            assert_eq!(bounds.range().value(), 0.0);
            assert!((bounds.best().value() - truth).abs() < 1e-12);
        }
        let p = point_estimate(&c, &model, &OperatingPoint::PERFECT);
        assert!((val(p.sensitivity) - 0.95).abs() < 1e-12);
        assert!((val(p.specificity) - 0.93).abs() < 1e-12);
    }

    #[test]
    fn identical_operating_points_admit_full_agreement() {
        let c = cohort(300, 700);
        let m = best_case(&c, &op(0.87, 0.92), &op(0.87, 0.92));
        assert_eq!(val(m.sensitivity), 1.0);
        assert_eq!(val(m.specificity), 1.0);
    }

    #[test]
    fn perfect_model_point_estimate_is_ppv() {
        let m = point_estimate(&cohort(1000, 9000), &OperatingPoint::PERFECT, &op(1.0, 0.9));
        assert!((val(m.sensitivity) - 1000.0 / 1900.0).abs() < 1e-12);
        let m = point_estimate(&cohort(9000, 1000), &OperatingPoint::PERFECT, &op(0.9, 1.0));
        assert!((val(m.specificity) - 1000.0 / 1900.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_table_assumption() {
        let c = cohort(3000, 7000);
        let model = op(0.8, 0.8);
        let reference = op(0.9, 0.9);
        let t = worst_case_table(&c, &model, &reference);
        let via = point_estimate_with(&c, &model, &reference, &PointAssumption::ExplicitTable(t));
        assert_eq!(via, worst_case(&c, &model, &reference));
        let default = point_estimate_with(&c, &model, &reference, &PointAssumption::default());
        assert_eq!(default, point_estimate(&c, &model, &reference));
    }

    #[test]
    fn empty_stratum_is_handled() {
        let c = cohort(0, 50);
        let m = point_estimate(&c, &op(0.9, 0.9), &op(0.9, 0.9));
        // reference positives are all false positives here
        assert!(m.sensitivity.is_some());
        let b = metric_bounds(&c, &op(0.9, 0.9), &op(0.9, 1.0));
        assert!(b.sensitivity.is_none());
        assert!(b.specificity.is_some());
    }

    fn arb_op() -> impl Strategy<Value = OperatingPoint> {
        (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(a, b)| op(a, b))
    }

    fn arb_cohort() -> impl Strategy<Value = Cohort> {
        (0u64..5000, 0u64..5000)
            .prop_filter("non-empty", |(p, n)| p + n > 0)
            .prop_map(|(p, n)| cohort(p, n))
    }

    proptest! {
        #[test]
        fn point_within_bounds(c in arb_cohort(), m in arb_op(), r in arb_op()) {
            let point = point_estimate(&c, &m, &r);
            let b = metric_bounds(&c, &m, &r);
            for metric in Metric::BOTH {
                let bounds = match metric {
                    Metric::Sensitivity => b.sensitivity,
                    Metric::Specificity => b.specificity,
                };
                match (point.get(metric), bounds) {
                    (Some(p), Some(bd)) => prop_assert!(bd.contains(p.value(), 1e-12)),
                    (None, None) => {}
                    (p, bd) => prop_assert!(false, "definedness mismatch {:?} {:?}", p, bd),
                }
            }
        }

        #[test]
        fn perfect_model_reads_reference_predictive_values(c in arb_cohort(), r in arb_op()) {
            let counts = confusion_counts(&c, &r);
            let m = point_estimate(&c, &OperatingPoint::PERFECT, &r);
            let w = worst_case(&c, &OperatingPoint::PERFECT, &r);
            let b = best_case(&c, &OperatingPoint::PERFECT, &r);
            for got in [m, w, b] {
                match (got.sensitivity, counts.ppv()) {
                    (Some(a), Some(e)) => prop_assert!((a.value() - e.value()).abs() < 1e-12),
                    (None, None) => {}
                    other => prop_assert!(false, "{:?}", other),
                }
                match (got.specificity, counts.npv()) {
                    (Some(a), Some(e)) => prop_assert!((a.value() - e.value()).abs() < 1e-12),
                    (None, None) => {}
                    other => prop_assert!(false, "{:?}", other),
                }
            }
        }

        #[test]
        fn scale_invariant(c in arb_cohort(), m in arb_op(), r in arb_op(), k in 1u64..50) {
            let big = c.scaled(k).unwrap();
            for f in [point_estimate, best_case, worst_case] {
                let a = f(&c, &m, &r);
                let b = f(&big, &m, &r);
                for metric in Metric::BOTH {
                    match (a.get(metric), b.get(metric)) {
                        (Some(x), Some(y)) => prop_assert!((x.value() - y.value()).abs() < 1e-9),
                        (None, None) => {}
                        other => prop_assert!(false, "{:?}", other),
                    }
                }
            }
        }
    }
}
