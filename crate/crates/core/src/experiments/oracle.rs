//! Brute-force arbiter for the closed-form bounds.
//!
//! Walks every whole-number agreement table consistent with both
//! classifiers' counts and records the smallest and largest observed value of
//! each metric. It does not use the Fréchet formulas: each stratum's overlap
//! cell is tried over `0..=stratum size` and kept only if all four cells come
//! out non-negative.

use crate::analytic::{confusion_counts, observed_metrics};
use crate::error::{Error, Result};
use crate::types::{
    AgreementTable, Cohort, ConfusionCounts, Metric, OperatingPoint, Stratum, StratumCells,
};

/// Largest cohort the oracle will enumerate.
pub const ORACLE_MAX_COHORT: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleExtrema {
    /// `(min, max)`, or `None` when the metric is undefined for these margins.
    pub sensitivity: Option<(f64, f64)>,
    pub specificity: Option<(f64, f64)>,
    pub tables: u64,
}

impl OracleExtrema {
    pub fn get(&self, metric: Metric) -> Option<(f64, f64)> {
        match metric {
            Metric::Sensitivity => self.sensitivity,
            Metric::Specificity => self.specificity,
        }
    }
}

fn whole(counts: &ConfusionCounts, who: &str) -> Result<()> {
    if counts.is_integral() {
        Ok(())
    } else {
        Err(Error::NonIntegral(format!(
            "{who} counts tp={} fn={} tn={} fp={}",
            counts.tp(),
            counts.fn_(),
            counts.tn(),
            counts.fp()
        )))
    }
}

fn feasible_cells(size: u64, model_pos: u64, ref_pos: u64) -> Vec<StratumCells> {
    (0..=size)
        .filter_map(|overlap| {
            let model_only = model_pos.checked_sub(overlap)?;
            let ref_only = ref_pos.checked_sub(overlap)?;
            let both_neg = size.checked_sub(overlap + model_only + ref_only)?;
            Some(StratumCells {
                both_pos: overlap as f64,
                model_only_pos: model_only as f64,
                ref_only_pos: ref_only as f64,
                both_neg: both_neg as f64,
            })
        })
        .collect()
}

fn widen(acc: &mut Option<(f64, f64)>, v: f64) {
    *acc = Some(match *acc {
        None => (v, v),
        Some((lo, hi)) => (lo.min(v), hi.max(v)),
    });
}

/// Exact per-metric extrema over all integer agreement tables with the given margins.
pub fn enumerate_oracle(
    cohort: &Cohort,
    model: &ConfusionCounts,
    reference: &ConfusionCounts,
) -> Result<OracleExtrema> {
    if cohort.n_total() > ORACLE_MAX_COHORT {
        return Err(Error::CohortTooLarge {
            n: cohort.n_total(),
            limit: ORACLE_MAX_COHORT,
        });
    }
    whole(model, "model")?;
    whole(reference, "reference")?;

    let [pos, neg] = Stratum::BOTH.map(|s| {
        feasible_cells(
            cohort.stratum_size(s),
            model.flagged_positive(s) as u64,
            reference.flagged_positive(s) as u64,
        )
    });
    let mut out = OracleExtrema {
        sensitivity: None,
        specificity: None,
        tables: 0,
    };
    for p in &pos {
        for n in &neg {
            let table = AgreementTable::new(cohort, model, reference, *p, *n)?;
            let m = observed_metrics(&table);
            out.tables += 1;
            if let Some(v) = m.sensitivity {
                widen(&mut out.sensitivity, v.value());
            }
            if let Some(v) = m.specificity {
                widen(&mut out.specificity, v.value());
            }
        }
    }
    Ok(out)
}

/// Runs the oracle on the expected counts of two operating points.
/// Fails unless every expected count is a whole number.
pub fn oracle_for_rates(
    cohort: &Cohort,
    model: &OperatingPoint,
    reference: &OperatingPoint,
) -> Result<OracleExtrema> {
    let snap = |c: ConfusionCounts| -> Result<ConfusionCounts> {
        let near = |x: f64| {
            let r = x.round();
            if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
                Ok(r)
            } else {
                Err(Error::NonIntegral(format!("expected count {x} is not whole")))
            }
        };
        ConfusionCounts::new(cohort, near(c.tp())?, near(c.fn_())?, near(c.tn())?, near(c.fp())?)
    };
    let m = snap(confusion_counts(cohort, model))?;
    let r = snap(confusion_counts(cohort, reference))?;
    enumerate_oracle(cohort, &m, &r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(c: &Cohort, tp: f64, fn_: f64, tn: f64, fp: f64) -> ConfusionCounts {
        ConfusionCounts::new(c, tp, fn_, tn, fp).unwrap()
    }

    #[test]
    fn scaled_worked_example() {
        let c = Cohort::new(30, 70).unwrap();
        let model = counts(&c, 24.0, 6.0, 56.0, 14.0);
        let reference = counts(&c, 27.0, 3.0, 63.0, 7.0);
        let o = enumerate_oracle(&c, &model, &reference).unwrap();
        let (smin, smax) = o.sensitivity.unwrap();
        let (pmin, pmax) = o.specificity.unwrap();
        assert!((smin - 21.0 / 34.0).abs() < 1e-15);
        assert!((pmin - 49.0 / 66.0).abs() < 1e-15);
        assert!((smax - 31.0 / 34.0).abs() < 1e-15);
        assert!((pmax - 59.0 / 66.0).abs() < 1e-15);
        // positive stratum overlap 21..=24, negative 0..=7
        assert_eq!(o.tables, 4 * 8);
    }

    #[test]
    fn tiny_cohort_by_hand() {
        // one flagged positive and one flagged negative per stratum for both
        let c = Cohort::new(2, 2).unwrap();
        let k = counts(&c, 1.0, 1.0, 1.0, 1.0);
        let o = enumerate_oracle(&c, &k, &k).unwrap();
        assert_eq!(o.tables, 4);
        // overlaps (0,0): 0/2, (1,1): 2/2
        assert_eq!(o.sensitivity, Some((0.0, 1.0)));
        assert_eq!(o.specificity, Some((0.0, 1.0)));
    }

    #[test]
    fn perfect_reference_pins_metrics() {
        let c = Cohort::new(20, 30).unwrap();
        let model = counts(&c, 17.0, 3.0, 24.0, 6.0);
        let reference = counts(&c, 20.0, 0.0, 30.0, 0.0);
        let o = enumerate_oracle(&c, &model, &reference).unwrap();
        assert_eq!(o.tables, 1);
        assert_eq!(o.sensitivity, Some((17.0 / 20.0, 17.0 / 20.0)));
        assert_eq!(o.specificity, Some((24.0 / 30.0, 24.0 / 30.0)));
    }

    #[test]
    fn rejects_fractional_and_large() {
        let c = Cohort::new(3, 7).unwrap();
        let m = counts(&c, 1.5, 1.5, 7.0, 0.0);
        let r = counts(&c, 3.0, 0.0, 7.0, 0.0);
        assert!(matches!(enumerate_oracle(&c, &m, &r), Err(Error::NonIntegral(_))));
        let big = Cohort::new(60, 60).unwrap();
        let k = counts(&big, 60.0, 0.0, 60.0, 0.0);
        assert!(matches!(enumerate_oracle(&big, &k, &k), Err(Error::CohortTooLarge { .. })));
    }

    #[test]
    fn rates_need_whole_counts() {
        let c = Cohort::new(3, 7).unwrap();
        let m = OperatingPoint::new(0.5, 0.5).unwrap();
        assert!(oracle_for_rates(&c, &m, &OperatingPoint::PERFECT).is_err());
        let c = Cohort::new(30, 70).unwrap();
        let m = OperatingPoint::new(0.8, 0.8).unwrap();
        let r = OperatingPoint::new(0.9, 0.9).unwrap();
        assert!(oracle_for_rates(&c, &m, &r).is_ok());
    }
}
