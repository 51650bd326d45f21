//! Parameter sweeps over prevalence, model quality and reference-labeler grid.

mod extremes;
mod oracle;

pub use extremes::{
    below_truth_threshold, summarize_extremes, AxisDelta, GroupExtremes, MetricExtremes,
    ReferenceAxis,
};
pub use oracle::{enumerate_oracle, oracle_for_rates, OracleExtrema, ORACLE_MAX_COHORT};

use rayon::prelude::*;

use crate::analytic::{metric_bounds, point_estimate};
use crate::cohort::make_cohort;
use crate::error::{Error, Result};
use crate::montecarlo::{run_trials, McSummary, TrialConfig, DEFAULT_TRIALS};
use crate::types::{
    Cohort, Fraction, Metric, MetricBounds, ObservedMetrics, OperatingPoint,
};

/// Largest power-of-ten denominator tried when snapping grid bounds to integers.
const MAX_GRID_DECIMALS: u32 = 6;

/// Evenly spaced rates from `lo` to `hi` inclusive, applied independently to
/// the reference sensitivity and specificity.
///
/// Values are produced as `k / 10^d` for integer `k`, never by accumulating
/// a floating step, so the same grid always yields bit-identical cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefGrid {
    lo: Fraction,
    hi: Fraction,
    step: Fraction,
}

impl RefGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let lo = Fraction::named("grid lo", lo)?;
        let hi = Fraction::named("grid hi", hi)?;
        let step = Fraction::named("grid step", step)?;
        if lo > hi {
            return Err(Error::Invalid(format!("grid lo {lo} exceeds hi {hi}")));
        }
        if step.value() <= 0.0 {
            return Err(Error::Invalid("grid step must be positive".into()));
        }
        let grid = RefGrid { lo, hi, step };
        let (l, h, st, _) = grid.integer_basis()?;
        // a step that skips hi is almost always a unit mistake (1 vs 1%)
        if (h - l) % st != 0 {
            return Err(Error::Invalid(format!(
                "grid step {step} does not divide the span from {lo} to {hi}"
            )));
        }
        Ok(grid)
    }

    /// The 90%..100% grid in 1% steps.
    pub fn standard() -> Self {
        RefGrid::new(0.90, 1.00, 0.01).expect("static grid")
    }

    /// A single-point grid.
    pub fn single(value: Fraction) -> Result<Self> {
        RefGrid::new(value.value(), value.value(), 1.0)
    }

    pub fn lo(&self) -> Fraction {
        self.lo
    }
    pub fn hi(&self) -> Fraction {
        self.hi
    }
    pub fn step(&self) -> Fraction {
        self.step
    }

    fn integer_basis(&self) -> Result<(u64, u64, u64, f64)> {
        for d in 0..=MAX_GRID_DECIMALS {
            let scale = 10f64.powi(d as i32);
            let snap = |x: f64| {
                let v = x * scale;
                let r = v.round();
                ((v - r).abs() <= 1e-7 * scale.max(1.0)).then_some(r as u64)
            };
            if let (Some(lo), Some(hi), Some(step)) =
                (snap(self.lo.value()), snap(self.hi.value()), snap(self.step.value()))
            {
                if step > 0 {
                    return Ok((lo, hi, step, scale));
                }
            }
        }
        Err(Error::Invalid(format!(
            "grid ({}, {}, {}) needs more than {MAX_GRID_DECIMALS} decimal places",
            self.lo, self.hi, self.step
        )))
    }

    /// Axis values in ascending order.
    pub fn axis(&self) -> Vec<Fraction> {
        let (lo, hi, step, scale) = self.integer_basis().expect("validated on construction");
        (lo..=hi)
            .step_by(step as usize)
            .map(|k| Fraction::new((k as f64 / scale).min(1.0)).expect("k <= hi"))
            .collect()
    }

    /// Cross product of the axis with itself, sensitivity-major.
    pub fn cells(&self) -> Vec<OperatingPoint> {
        let axis = self.axis();
        axis.iter()
            .flat_map(|&se| {
                axis.iter().map(move |&sp| OperatingPoint {
                    sensitivity: se,
                    specificity: sp,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n_total: u64,
    pub prevalences: Vec<Fraction>,
    pub model_points: Vec<OperatingPoint>,
    pub reference_grid: RefGrid,
    pub n_trials: u64,
    pub seed: u64,
    pub include_mc: bool,
}

pub const DEFAULT_N_TOTAL: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 42;

fn fr(x: f64) -> Fraction {
    Fraction::new(x).expect("static rate")
}

fn op(se: f64, sp: f64) -> OperatingPoint {
    OperatingPoint::new(se, sp).expect("static operating point")
}

impl SweepSpec {
    fn base(prevalences: &[f64], models: Vec<OperatingPoint>) -> Self {
        SweepSpec {
            n_total: DEFAULT_N_TOTAL,
            prevalences: prevalences.iter().copied().map(fr).collect(),
            model_points: models,
            reference_grid: RefGrid::standard(),
            n_trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            include_mc: false,
        }
    }

    /// Perfect model across four prevalences.
    pub fn prevalence_study() -> Self {
        Self::base(&[0.1, 0.3, 0.7, 0.9], vec![OperatingPoint::PERFECT])
    }

    /// 95%/95% model at 10% and 30% prevalence.
    pub fn fixed_model_study() -> Self {
        Self::base(&[0.1, 0.3], vec![op(0.95, 0.95)])
    }

    /// 90%/90% and 98%/98% models at 10% prevalence.
    pub fn model_quality_study() -> Self {
        Self::base(&[0.1], vec![op(0.90, 0.90), op(0.98, 0.98)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_total == 0 {
            return Err(Error::EmptyCohort);
        }
        if self.prevalences.is_empty() {
            return Err(Error::Invalid("sweep needs at least one prevalence".into()));
        }
        if self.model_points.is_empty() {
            return Err(Error::Invalid("sweep needs at least one model point".into()));
        }
        if self.include_mc && self.n_trials == 0 {
            return Err(Error::Invalid("n_trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn record_count(&self) -> usize {
        let axis = self.reference_grid.axis().len();
        self.prevalences.len() * self.model_points.len() * axis * axis
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub n_total: u64,
    pub prevalence: Fraction,
    pub cohort: Cohort,
    pub model: OperatingPoint,
    pub reference: OperatingPoint,
    pub point: ObservedMetrics,
    pub sensitivity: Option<MetricBounds>,
    pub specificity: Option<MetricBounds>,
    pub mc: Option<McSummary>,
}

impl SweepRecord {
    pub fn bounds(&self, metric: Metric) -> Option<&MetricBounds> {
        match metric {
            Metric::Sensitivity => self.sensitivity.as_ref(),
            Metric::Specificity => self.specificity.as_ref(),
        }
    }

    /// Computes one record; runs the Monte Carlo trials when `trials` is given.
    pub fn compute(
        n_total: u64,
        prevalence: Fraction,
        model: OperatingPoint,
        reference: OperatingPoint,
        trials: Option<(u64, u64)>,
    ) -> Result<Self> {
        let cohort = make_cohort(n_total, prevalence)?;
        let bounds = metric_bounds(&cohort, &model, &reference);
        let mc = match trials {
            Some((n_trials, seed)) => Some(run_trials(&TrialConfig::new(
                cohort, model, reference, n_trials, seed,
            )?)),
            None => None,
        };
        Ok(SweepRecord {
            n_total,
            prevalence,
            cohort,
            model,
            reference,
            point: point_estimate(&cohort, &model, &reference),
            sensitivity: bounds.sensitivity,
            specificity: bounds.specificity,
            mc,
        })
    }
}

/// One record per prevalence x model x reference cell, in that lexicographic order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    let cells = spec.reference_grid.cells();
    let jobs: Vec<(Fraction, OperatingPoint, OperatingPoint)> = spec
        .prevalences
        .iter()
        .flat_map(|&p| {
            let cells = &cells;
            spec.model_points
                .iter()
                .flat_map(move |&m| cells.iter().map(move |&r| (p, m, r)))
        })
        .collect();
    let trials = spec.include_mc.then_some((spec.n_trials, spec.seed));
    jobs.into_par_iter()
        .map(|(p, m, r)| SweepRecord::compute(spec.n_total, p, m, r, trials))
        .collect()
}

/// Lowest observed sensitivity of a perfect model over the reference grid.
/// For a perfect model this is the reference's smallest positive predictive value.
pub fn perfect_model_floor(n_total: u64, prevalence: Fraction, grid: &RefGrid) -> Result<Option<Fraction>> {
    let cohort = make_cohort(n_total, prevalence)?;
    Ok(grid
        .cells()
        .iter()
        .filter_map(|r| point_estimate(&cohort, &OperatingPoint::PERFECT, r).sensitivity)
        .min_by(|a, b| a.value().total_cmp(&b.value())))
}
