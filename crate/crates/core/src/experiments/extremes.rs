use std::collections::BTreeMap;

use super::SweepRecord;
use crate::error::{Error, Result};
use crate::types::{Fraction, Metric, OperatingPoint};

/// One of the two reference-labeler grid axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferenceAxis {
    Sensitivity,
    Specificity,
}

impl ReferenceAxis {
    fn get(self, op: &OperatingPoint) -> Fraction {
        match self {
            ReferenceAxis::Sensitivity => op.sensitivity,
            ReferenceAxis::Specificity => op.specificity,
        }
    }

    fn other(self) -> ReferenceAxis {
        match self {
            ReferenceAxis::Sensitivity => ReferenceAxis::Specificity,
            ReferenceAxis::Specificity => ReferenceAxis::Sensitivity,
        }
    }

    /// The reference rate whose errors drive bias in `metric`: false positives
    /// (low specificity) inflate the sensitivity denominator, and vice versa.
    fn opposing(metric: Metric) -> ReferenceAxis {
        match metric {
            Metric::Sensitivity => ReferenceAxis::Specificity,
            Metric::Specificity => ReferenceAxis::Sensitivity,
        }
    }
}

/// Shrinkage of an error range when one reference rate is raised from the
/// bottom to the top of the grid with the other rate held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisDelta {
    pub axis: ReferenceAxis,
    /// Value of the other reference rate.
    pub fixed: Fraction,
    pub from: Fraction,
    pub to: Fraction,
    /// `range(from) - range(to)`.
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricExtremes {
    pub metric: Metric,
    pub min_range: f64,
    pub max_range: f64,
    /// First reference point (in sweep order) attaining `max_range`.
    pub argmax: OperatingPoint,
    pub deltas: Vec<AxisDelta>,
    /// Largest grid value of the opposing reference rate at or below which
    /// every cell's best case still falls short of the model's true value.
    pub below_truth_threshold: Option<Fraction>,
}

impl MetricExtremes {
    /// Largest reduction along `axis` over all fixed values of the other rate.
    pub fn max_reduction(&self, axis: ReferenceAxis) -> Option<&AxisDelta> {
        self.deltas
            .iter()
            .filter(|d| d.axis == axis)
            .max_by(|a, b| a.reduction.total_cmp(&b.reduction))
    }

    /// Reduction along `axis` with the other rate fixed at `fixed`.
    pub fn reduction_at(&self, axis: ReferenceAxis, fixed: Fraction) -> Option<f64> {
        self.deltas
            .iter()
            .find(|d| d.axis == axis && d.fixed == fixed)
            .map(|d| d.reduction)
    }
}

/// Extremes for the records sharing one cohort size, prevalence and model.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupExtremes {
    pub n_total: u64,
    pub prevalence: Fraction,
    pub model: OperatingPoint,
    pub records: usize,
    pub sensitivity: Option<MetricExtremes>,
    pub specificity: Option<MetricExtremes>,
}

impl GroupExtremes {
    pub fn get(&self, metric: Metric) -> Option<&MetricExtremes> {
        match metric {
            Metric::Sensitivity => self.sensitivity.as_ref(),
            Metric::Specificity => self.specificity.as_ref(),
        }
    }
}

type CellKey = (u64, u64);

fn key(op: &OperatingPoint) -> CellKey {
    (op.sensitivity.value().to_bits(), op.specificity.value().to_bits())
}

fn sorted_axis(records: &[&SweepRecord], axis: ReferenceAxis) -> Vec<Fraction> {
    let mut v: Vec<Fraction> = records.iter().map(|r| axis.get(&r.reference)).collect();
    v.sort_by(|a, b| a.value().total_cmp(&b.value()));
    v.dedup();
    v
}

fn metric_extremes(records: &[&SweepRecord], metric: Metric) -> Option<MetricExtremes> {
    let mut min_range = f64::INFINITY;
    let mut max_range = f64::NEG_INFINITY;
    let mut argmax = None;
    for r in records {
        if let Some(b) = r.bounds(metric) {
            let range = b.range().value();
            min_range = min_range.min(range);
            if range > max_range {
                max_range = range;
                argmax = Some(r.reference);
            }
        }
    }
    let argmax = argmax?;

    let ranges: BTreeMap<CellKey, f64> = records
        .iter()
        .filter_map(|r| r.bounds(metric).map(|b| (key(&r.reference), b.range().value())))
        .collect();
    let mut deltas = Vec::new();
    for axis in [ReferenceAxis::Sensitivity, ReferenceAxis::Specificity] {
        let values = sorted_axis(records, axis);
        let (Some(&from), Some(&to)) = (values.first(), values.last()) else {
            continue;
        };
        if from == to {
            continue;
        }
        for fixed in sorted_axis(records, axis.other()) {
            let at = |v: Fraction| {
                let op = match axis {
                    ReferenceAxis::Sensitivity => OperatingPoint { sensitivity: v, specificity: fixed },
                    ReferenceAxis::Specificity => OperatingPoint { sensitivity: fixed, specificity: v },
                };
                ranges.get(&key(&op)).copied()
            };
            if let (Some(a), Some(b)) = (at(from), at(to)) {
                deltas.push(AxisDelta {
                    axis,
                    fixed,
                    from,
                    to,
                    reduction: a - b,
                });
            }
        }
    }

    Some(MetricExtremes {
        metric,
        min_range,
        max_range,
        argmax,
        deltas,
        below_truth_threshold: threshold(records, metric),
    })
}

fn threshold(records: &[&SweepRecord], metric: Metric) -> Option<Fraction> {
    let axis = ReferenceAxis::opposing(metric);
    let mut last = None;
    for value in sorted_axis(records, axis) {
        let all_below = records
            .iter()
            .filter(|r| axis.get(&r.reference) == value)
            .all(|r| match r.bounds(metric) {
                Some(b) => b.best().value() < metric.of(&r.model).value(),
                None => false,
            });
        if !all_below {
            break;
        }
        last = Some(value);
    }
    last
}

/// Highest value of the opposing reference rate for which every grid cell
/// at or below it has best-case `metric` under the model's true value.
///
/// `records` should share one prevalence and model.
pub fn below_truth_threshold(records: &[SweepRecord], metric: Metric) -> Option<Fraction> {
    let refs: Vec<&SweepRecord> = records.iter().collect();
    threshold(&refs, metric)
}

/// Range extremes and uncertainty-reduction deltas per
/// (cohort size, prevalence, model) group, in first-seen order.
pub fn summarize_extremes(records: &[SweepRecord]) -> Result<Vec<GroupExtremes>> {
    if records.is_empty() {
        return Err(Error::Empty);
    }
    let mut order: Vec<(u64, u64, CellKey)> = Vec::new();
    let mut groups: BTreeMap<(u64, u64, CellKey), Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        let k = (r.n_total, r.prevalence.value().to_bits(), key(&r.model));
        groups
            .entry(k)
            .or_insert_with(|| {
                order.push(k);
                Vec::new()
            })
            .push(r);
    }
    Ok(order
        .iter()
        .map(|k| {
            let group = &groups[k];
            let first = group[0];
            GroupExtremes {
                n_total: first.n_total,
                prevalence: first.prevalence,
                model: first.model,
                records: group.len(),
                sensitivity: metric_extremes(group, Metric::Sensitivity),
                specificity: metric_extremes(group, Metric::Specificity),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_sweep, SweepSpec};

    fn fr(x: f64) -> Fraction {
        Fraction::new(x).unwrap()
    }

    #[test]
    fn empty_rejected() {
        assert!(summarize_extremes(&[]).is_err());
    }

    #[test]
    fn fixed_model_low_prevalence() {
        let recs = run_sweep(&SweepSpec::fixed_model_study()).unwrap();
        let groups = summarize_extremes(&recs).unwrap();
        assert_eq!(groups.len(), 2);
        let g = &groups[0];
        assert_eq!(g.prevalence.value(), 0.1);
        assert_eq!(g.records, 121);

        let sens = g.sensitivity.as_ref().unwrap();
        assert!((sens.max_range - 500.0 / 1350.0).abs() < 1e-12);
        assert_eq!(sens.argmax, OperatingPoint::new(0.9, 0.95).unwrap());
        assert!(sens.min_range.abs() < 1e-12);
        let d = sens.reduction_at(ReferenceAxis::Specificity, fr(1.0)).unwrap();
        assert!((d - 450.0 / 1900.0).abs() < 1e-12);
        let d = sens.reduction_at(ReferenceAxis::Sensitivity, fr(0.95)).unwrap();
        assert!((d - (500.0 / 1350.0 - 450.0 / 1450.0)).abs() < 1e-12);
        assert_eq!(sens.below_truth_threshold, Some(fr(0.94)));

        let spec = g.specificity.as_ref().unwrap();
        assert!((spec.max_range - 0.0610).abs() < 1e-3);
        let d = spec.reduction_at(ReferenceAxis::Specificity, fr(1.0)).unwrap();
        assert!((d - 450.0 / 8100.0).abs() < 1e-12);
        let d = spec.reduction_at(ReferenceAxis::Sensitivity, fr(0.95)).unwrap();
        assert!((d - (500.0 / 8650.0 - 450.0 / 8550.0)).abs() < 1e-12);
    }

    #[test]
    fn perfect_reference_has_zero_range() {
        let recs = run_sweep(&SweepSpec::prevalence_study()).unwrap();
        for g in summarize_extremes(&recs).unwrap() {
            for m in Metric::BOTH {
                assert!(g.get(m).unwrap().min_range.abs() < 1e-12);
            }
        }
    }
}
