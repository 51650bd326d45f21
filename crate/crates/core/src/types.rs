//! Validated value types shared by every other module.
//!
//! All constructors check their invariants, so a value of any type here is
//! known-good once it exists. Counts are `f64` because expected confusion
//! counts are products of a rate and a stratum size; integer counts only
//! appear in the Monte Carlo sampler.

use std::fmt;

use crate::error::{Error, Result};

/// Relative slack used when comparing counts that should agree exactly
/// but were reached through different floating-point paths.
const COUNT_ULPS: f64 = 8.0 * f64::EPSILON;

pub(crate) fn counts_agree(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= COUNT_ULPS * scale
}

/// A rate in the closed unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Fraction(f64);

impl Fraction {
    pub const ZERO: Fraction = Fraction(0.0);
    pub const ONE: Fraction = Fraction(1.0);

    /// Wraps `value`, rejecting anything outside `[0, 1]` (including NaN).
    pub fn new(value: f64) -> Result<Self> {
        Self::named("value", value)
    }

    /// Like [`Fraction::new`], but the error names `field`.
    pub fn named(field: &str, value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Fraction(value))
        } else {
            Err(Error::OutOfRange {
                field: field.to_string(),
                value,
            })
        }
    }

    /// `numerator / denominator`, or `None` when the denominator is zero.
    ///
    /// Callers guarantee `0 <= numerator <= denominator`; the result is
    /// clamped so that rounding in the sums never escapes the unit interval.
    pub(crate) fn ratio(numerator: f64, denominator: f64) -> Option<Self> {
        if denominator <= 0.0 {
            return None;
        }
        Some(Fraction((numerator / denominator).clamp(0.0, 1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Fraction {
        Fraction(1.0 - self.0)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<Fraction> for f64 {
    fn from(f: Fraction) -> f64 {
        f.0
    }
}

/// Checks that `x` lies in `[0, 1]`.
pub fn validate_fraction(x: f64) -> Result<Fraction> {
    Fraction::new(x)
}

/// Sensitivity/specificity pair of a classifier (the model or the reference labeler).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub sensitivity: Fraction,
    pub specificity: Fraction,
}

impl OperatingPoint {
    pub fn new(sensitivity: f64, specificity: f64) -> Result<Self> {
        Ok(OperatingPoint {
            sensitivity: Fraction::named("sensitivity", sensitivity)?,
            specificity: Fraction::named("specificity", specificity)?,
        })
    }

    pub const PERFECT: OperatingPoint = OperatingPoint {
        sensitivity: Fraction::ONE,
        specificity: Fraction::ONE,
    };

    /// Same classifier with the roles of the two classes exchanged.
    pub fn swapped(self) -> OperatingPoint {
        OperatingPoint {
            sensitivity: self.specificity,
            specificity: self.sensitivity,
        }
    }
}

impl fmt::Display for OperatingPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.2}/{:.2}",
            self.sensitivity.value(),
            self.specificity.value()
        )
    }
}

/// Ground-truth population: how many cases are truly positive and truly negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cohort {
    n_positive: u64,
    n_negative: u64,
}

impl Cohort {
    pub fn new(n_positive: u64, n_negative: u64) -> Result<Self> {
        match n_positive.checked_add(n_negative) {
            Some(0) => Err(Error::EmptyCohort),
            Some(_) => Ok(Cohort {
                n_positive,
                n_negative,
            }),
            None => Err(Error::Invalid("cohort size overflows u64".into())),
        }
    }

    pub fn n_positive(&self) -> u64 {
        self.n_positive
    }

    pub fn n_negative(&self) -> u64 {
        self.n_negative
    }

    pub fn n_total(&self) -> u64 {
        self.n_positive + self.n_negative
    }

    pub fn prevalence(&self) -> Fraction {
        Fraction(self.n_positive as f64 / self.n_total() as f64)
    }

    pub fn stratum_size(&self, stratum: Stratum) -> u64 {
        match stratum {
            Stratum::Positive => self.n_positive,
            Stratum::Negative => self.n_negative,
        }
    }

    /// Exchanges the positive and negative strata.
    pub fn swapped(self) -> Cohort {
        Cohort {
            n_positive: self.n_negative,
            n_negative: self.n_positive,
        }
    }

    /// Multiplies both strata by `factor`.
    pub fn scaled(self, factor: u64) -> Result<Cohort> {
        let pos = self.n_positive.checked_mul(factor);
        let neg = self.n_negative.checked_mul(factor);
        match (pos, neg) {
            (Some(p), Some(n)) => Cohort::new(p, n),
            _ => Err(Error::Invalid("scaled cohort overflows u64".into())),
        }
    }
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+/{}-", self.n_positive, self.n_negative)
    }
}

/// Ground-truth stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stratum {
    Positive,
    Negative,
}

impl Stratum {
    pub const BOTH: [Stratum; 2] = [Stratum::Positive, Stratum::Negative];
}

/// TP/FN/TN/FP of one classifier against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionCounts {
    tp: f64,
    fn_: f64,
    tn: f64,
    fp: f64,
}

impl ConfusionCounts {
    /// Validates non-negativity and that the rows match the cohort strata.
    pub fn new(cohort: &Cohort, tp: f64, fn_: f64, tn: f64, fp: f64) -> Result<Self> {
        for (name, v) in [("tp", tp), ("fn", fn_), ("tn", tn), ("fp", fp)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Invalid(format!("{name} must be a non-negative count, got {v}")));
            }
        }
        if !counts_agree(tp + fn_, cohort.n_positive as f64) {
            return Err(Error::Invalid(format!(
                "tp + fn = {} but cohort has {} positives",
                tp + fn_,
                cohort.n_positive
            )));
        }
        if !counts_agree(tn + fp, cohort.n_negative as f64) {
            return Err(Error::Invalid(format!(
                "tn + fp = {} but cohort has {} negatives",
                tn + fp,
                cohort.n_negative
            )));
        }
        Ok(ConfusionCounts { tp, fn_, tn, fp })
    }

    pub fn tp(&self) -> f64 {
        self.tp
    }
    pub fn fn_(&self) -> f64 {
        self.fn_
    }
    pub fn tn(&self) -> f64 {
        self.tn
    }
    pub fn fp(&self) -> f64 {
        self.fp
    }

    /// Cases flagged positive within `stratum` (TP for positives, FP for negatives).
    pub fn flagged_positive(&self, stratum: Stratum) -> f64 {
        match stratum {
            Stratum::Positive => self.tp,
            Stratum::Negative => self.fp,
        }
    }

    /// Cases flagged negative within `stratum` (FN for positives, TN for negatives).
    pub fn flagged_negative(&self, stratum: Stratum) -> f64 {
        match stratum {
            Stratum::Positive => self.fn_,
            Stratum::Negative => self.tn,
        }
    }

    pub fn predicted_positive(&self) -> f64 {
        self.tp + self.fp
    }

    pub fn predicted_negative(&self) -> f64 {
        self.tn + self.fn_
    }

    /// Positive predictive value, undefined with no predicted positives.
    pub fn ppv(&self) -> Option<Fraction> {
        Fraction::ratio(self.tp, self.predicted_positive())
    }

    /// Negative predictive value, undefined with no predicted negatives.
    pub fn npv(&self) -> Option<Fraction> {
        Fraction::ratio(self.tn, self.predicted_negative())
    }

    /// Empirical sensitivity/specificity against ground truth.
    pub fn empirical(&self) -> ObservedMetrics {
        ObservedMetrics {
            sensitivity: Fraction::ratio(self.tp, self.tp + self.fn_),
            specificity: Fraction::ratio(self.tn, self.tn + self.fp),
        }
    }

    /// True when every count is a whole number.
    pub fn is_integral(&self) -> bool {
        [self.tp, self.fn_, self.tn, self.fp]
            .iter()
            .all(|v| v.fract() == 0.0)
    }
}

/// Joint model-by-reference labels inside one ground-truth stratum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumCells {
    /// Model positive, reference positive.
    pub both_pos: f64,
    /// Model positive, reference negative.
    pub model_only_pos: f64,
    /// Model negative, reference positive.
    pub ref_only_pos: f64,
    /// Model negative, reference negative.
    pub both_neg: f64,
}

impl StratumCells {
    /// Fills the 2x2 from its two margins and the overlap cell. No validation.
    pub(crate) fn from_overlap(model_pos: f64, ref_pos: f64, size: f64, overlap: f64) -> Self {
        StratumCells {
            both_pos: overlap,
            model_only_pos: model_pos - overlap,
            ref_only_pos: ref_pos - overlap,
            both_neg: size - model_pos - ref_pos + overlap,
        }
    }

    pub fn total(&self) -> f64 {
        self.both_pos + self.model_only_pos + self.ref_only_pos + self.both_neg
    }

    pub fn model_positive(&self) -> f64 {
        self.both_pos + self.model_only_pos
    }

    pub fn ref_positive(&self) -> f64 {
        self.both_pos + self.ref_only_pos
    }

    pub fn model_negative(&self) -> f64 {
        self.ref_only_pos + self.both_neg
    }

    pub fn ref_negative(&self) -> f64 {
        self.model_only_pos + self.both_neg
    }
}

/// Fréchet interval of the overlap cell given both positive margins.
pub fn frechet_interval(model_pos: f64, ref_pos: f64, size: f64) -> (f64, f64) {
    ((model_pos + ref_pos - size).max(0.0), model_pos.min(ref_pos))
}

/// Model-by-reference cross-classification, stratified by ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementTable {
    positive: StratumCells,
    negative: StratumCells,
}

impl AgreementTable {
    /// Builds a table from explicit cells and checks it against the cohort
    /// and both classifiers' confusion counts.
    pub fn new(
        cohort: &Cohort,
        model: &ConfusionCounts,
        reference: &ConfusionCounts,
        positive: StratumCells,
        negative: StratumCells,
    ) -> Result<Self> {
        for stratum in Stratum::BOTH {
            let cells = match stratum {
                Stratum::Positive => &positive,
                Stratum::Negative => &negative,
            };
            let label = match stratum {
                Stratum::Positive => "positive",
                Stratum::Negative => "negative",
            };
            let size = cohort.stratum_size(stratum) as f64;
            let values = [
                cells.both_pos,
                cells.model_only_pos,
                cells.ref_only_pos,
                cells.both_neg,
            ];
            if values.iter().any(|v| !v.is_finite() || *v < -COUNT_ULPS * size.max(1.0)) {
                return Err(Error::Invalid(format!(
                    "{label} stratum has a negative or non-finite cell: {cells:?}"
                )));
            }
            if !counts_agree(cells.total(), size) {
                return Err(Error::Invalid(format!(
                    "{label} stratum cells sum to {} instead of {size}",
                    cells.total()
                )));
            }
            if !counts_agree(cells.model_positive(), model.flagged_positive(stratum)) {
                return Err(Error::Invalid(format!(
                    "{label} stratum model margin {} does not match confusion counts {}",
                    cells.model_positive(),
                    model.flagged_positive(stratum)
                )));
            }
            if !counts_agree(cells.ref_positive(), reference.flagged_positive(stratum)) {
                return Err(Error::Invalid(format!(
                    "{label} stratum reference margin {} does not match confusion counts {}",
                    cells.ref_positive(),
                    reference.flagged_positive(stratum)
                )));
            }
        }
        Ok(AgreementTable { positive, negative })
    }

    /// Builds the table fixed by choosing the overlap cell in each stratum.
    /// Each overlap must lie in its Fréchet interval.
    pub fn from_overlaps(
        cohort: &Cohort,
        model: &ConfusionCounts,
        reference: &ConfusionCounts,
        overlap_positive: f64,
        overlap_negative: f64,
    ) -> Result<Self> {
        let mut cells = [None, None];
        for (i, (stratum, overlap)) in Stratum::BOTH
            .into_iter()
            .zip([overlap_positive, overlap_negative])
            .enumerate()
        {
            let size = cohort.stratum_size(stratum) as f64;
            let m = model.flagged_positive(stratum);
            let r = reference.flagged_positive(stratum);
            let (lo, hi) = frechet_interval(m, r, size);
            let slack = COUNT_ULPS * size.max(1.0);
            if !(overlap >= lo - slack && overlap <= hi + slack) {
                return Err(Error::Invalid(format!(
                    "overlap {overlap} outside Fréchet interval [{lo}, {hi}] in {stratum:?} stratum"
                )));
            }
            cells[i] = Some(StratumCells::from_overlap(m, r, size, overlap));
        }
        let [Some(positive), Some(negative)] = cells else {
            unreachable!()
        };
        Self::new(cohort, model, reference, positive, negative)
    }

    /// Table in which the model and reference agree on every case.
    /// Both classifiers must have the same counts.
    pub fn full_agreement(cohort: &Cohort, counts: &ConfusionCounts) -> Result<Self> {
        Self::from_overlaps(cohort, counts, counts, counts.tp(), counts.fp())
    }

    pub fn stratum(&self, stratum: Stratum) -> &StratumCells {
        match stratum {
            Stratum::Positive => &self.positive,
            Stratum::Negative => &self.negative,
        }
    }

    /// Row margins: the model's confusion counts.
    pub fn model_counts(&self) -> (f64, f64, f64, f64) {
        (
            self.positive.model_positive(),
            self.positive.model_negative(),
            self.negative.model_negative(),
            self.negative.model_positive(),
        )
    }

    /// Column margins: the reference labeler's confusion counts.
    pub fn reference_counts(&self) -> (f64, f64, f64, f64) {
        (
            self.positive.ref_positive(),
            self.positive.ref_negative(),
            self.negative.ref_negative(),
            self.negative.ref_positive(),
        )
    }

    pub fn reference_positive_total(&self) -> f64 {
        self.positive.ref_positive() + self.negative.ref_positive()
    }

    pub fn reference_negative_total(&self) -> f64 {
        self.positive.ref_negative() + self.negative.ref_negative()
    }
}

/// Model metrics scored against the reference labels. `None` means the
/// denominator (reference positives or reference negatives) was zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedMetrics {
    pub sensitivity: Option<Fraction>,
    pub specificity: Option<Fraction>,
}

impl ObservedMetrics {
    pub fn get(&self, metric: Metric) -> Option<Fraction> {
        match metric {
            Metric::Sensitivity => self.sensitivity,
            Metric::Specificity => self.specificity,
        }
    }

    /// Exchanges the two metrics.
    pub fn swapped(self) -> ObservedMetrics {
        ObservedMetrics {
            sensitivity: self.specificity,
            specificity: self.sensitivity,
        }
    }
}

/// Which of the two observed metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Sensitivity,
    Specificity,
}

impl Metric {
    pub const BOTH: [Metric; 2] = [Metric::Sensitivity, Metric::Specificity];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sensitivity => "sensitivity",
            Metric::Specificity => "specificity",
        }
    }

    /// The classifier rate this metric estimates.
    pub fn of(self, op: &OperatingPoint) -> Fraction {
        match self {
            Metric::Sensitivity => op.sensitivity,
            Metric::Specificity => op.specificity,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Worst- and best-case observed value of one metric, and their gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricBounds {
    worst: Fraction,
    best: Fraction,
}

impl MetricBounds {
    pub fn new(worst: Fraction, best: Fraction) -> Result<Self> {
        if worst > best {
            return Err(Error::Invalid(format!(
                "worst case {worst} exceeds best case {best}"
            )));
        }
        Ok(MetricBounds { worst, best })
    }

    pub fn worst(&self) -> Fraction {
        self.worst
    }

    pub fn best(&self) -> Fraction {
        self.best
    }

    pub fn range(&self) -> Fraction {
        Fraction(self.best.0 - self.worst.0)
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.worst.0 - slack && x <= self.best.0 + slack
    }
}
