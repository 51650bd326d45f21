//! Monte Carlo envelope of the observed metrics.
//!
//! Each trial labels the cohort twice, once for the model and once for the
//! reference, independently given ground truth. Per stratum the model's
//! positive count is binomial; the reference then labels the model-positive
//! and model-negative cases with two further binomials. That is per-case
//! independent labeling: the reference margin is binomial over the whole
//! stratum, and given both margins the overlap is hypergeometric.
//!
//! Reproducibility: trial `i` draws from its own ChaCha8 stream, keyed by
//! the master seed and stream number `i`. Trials are computed in any order
//! (in parallel when a rayon pool is available), stored by index, and then
//! reduced sequentially in index order, so a summary is bit-identical for a
//! given seed regardless of worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::analytic::observed_metrics;
use crate::error::{Error, Result};
use crate::types::{
    AgreementTable, Cohort, ConfusionCounts, Metric, ObservedMetrics, OperatingPoint, Stratum,
    StratumCells,
};

pub const DEFAULT_TRIALS: u64 = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub cohort: Cohort,
    pub model: OperatingPoint,
    pub reference: OperatingPoint,
    n_trials: u64,
    pub seed: u64,
}

impl TrialConfig {
    pub fn new(
        cohort: Cohort,
        model: OperatingPoint,
        reference: OperatingPoint,
        n_trials: u64,
        seed: u64,
    ) -> Result<Self> {
        if n_trials == 0 {
            return Err(Error::Invalid("n_trials must be at least 1".into()));
        }
        Ok(TrialConfig {
            cohort,
            model,
            reference,
            n_trials,
            seed,
        })
    }

    pub fn n_trials(&self) -> u64 {
        self.n_trials
    }
}

/// Whole-number confusion counts from one stochastic labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledCounts {
    pub tp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
}

impl SampledCounts {
    pub fn flagged_positive(&self, stratum: Stratum) -> u64 {
        match stratum {
            Stratum::Positive => self.tp,
            Stratum::Negative => self.fp,
        }
    }

    pub fn to_counts(&self, cohort: &Cohort) -> ConfusionCounts {
        ConfusionCounts::new(
            cohort,
            self.tp as f64,
            self.fn_ as f64,
            self.tn as f64,
            self.fp as f64,
        )
        .expect("sampled counts partition the cohort")
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("p strictly inside (0, 1)")
        .sample(rng)
}

/// Labels every case of `cohort` with a classifier at `op`.
pub fn sample_labels<R: Rng + ?Sized>(
    cohort: &Cohort,
    op: &OperatingPoint,
    rng: &mut R,
) -> SampledCounts {
    let tp = binomial(cohort.n_positive(), op.sensitivity.value(), rng);
    let tn = binomial(cohort.n_negative(), op.specificity.value(), rng);
    SampledCounts {
        tp,
        fn_: cohort.n_positive() - tp,
        tn,
        fp: cohort.n_negative() - tn,
    }
}

/// The random stream used by trial `trial_index`.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Draws the realized agreement table of one trial.
pub fn sample_table<R: Rng + ?Sized>(
    cohort: &Cohort,
    model: &OperatingPoint,
    reference: &OperatingPoint,
    rng: &mut R,
) -> AgreementTable {
    let m = sample_labels(cohort, model, rng);
    let mut cells = [[0u64; 2]; 2];
    for (i, s) in Stratum::BOTH.into_iter().enumerate() {
        // probability the reference flags a case of this stratum positive
        let p = match s {
            Stratum::Positive => reference.sensitivity.value(),
            Stratum::Negative => 1.0 - reference.specificity.value(),
        };
        let mp = m.flagged_positive(s);
        cells[i] = [
            binomial(mp, p, rng),
            binomial(cohort.stratum_size(s) - mp, p, rng),
        ];
    }
    let [[both_pp, ref_only_p], [both_pn, ref_only_n]] = cells;
    let r = SampledCounts {
        tp: both_pp + ref_only_p,
        fn_: cohort.n_positive() - both_pp - ref_only_p,
        tn: cohort.n_negative() - both_pn - ref_only_n,
        fp: both_pn + ref_only_n,
    };
    let [pos, neg] = Stratum::BOTH.map(|s| {
        let size = cohort.stratum_size(s) as f64;
        let overlap = match s {
            Stratum::Positive => both_pp,
            Stratum::Negative => both_pn,
        };
        StratumCells::from_overlap(
            m.flagged_positive(s) as f64,
            r.flagged_positive(s) as f64,
            size,
            overlap as f64,
        )
    });
    AgreementTable::new(cohort, &m.to_counts(cohort), &r.to_counts(cohort), pos, neg)
        .expect("overlap cells respect the margins")
}

/// Observed metrics of trial `trial_index`.
pub fn run_trial(config: &TrialConfig, trial_index: u64) -> ObservedMetrics {
    let mut rng = trial_rng(config.seed, trial_index);
    let table = sample_table(&config.cohort, &config.model, &config.reference, &mut rng);
    observed_metrics(&table)
}

/// Distribution of one metric over the trials where it was defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std_dev: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

impl MetricSummary {
    /// Summarizes `values`, which must be sorted ascending and non-empty.
    fn from_sorted(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_dev = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MetricSummary {
            min: values[0],
            max: values[n - 1],
            mean,
            std_dev,
            q025: quantile(values, 0.025),
            q50: quantile(values, 0.5),
            q975: quantile(values, 0.975),
        }
    }

    /// Standard error of the mean over `defined` trials.
    pub fn std_error(&self, defined: u64) -> f64 {
        self.std_dev / (defined as f64).sqrt()
    }
}

/// Linear interpolation between order statistics (R type 7).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let v = sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]);
    v.clamp(sorted[lo], sorted[hi])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSummary {
    pub n_trials: u64,
    pub seed: u64,
    /// `None` when the metric was undefined in every trial.
    pub sensitivity: Option<MetricSummary>,
    pub specificity: Option<MetricSummary>,
    pub defined_sensitivity: u64,
    pub defined_specificity: u64,
}

impl McSummary {
    pub fn get(&self, metric: Metric) -> Option<&MetricSummary> {
        match metric {
            Metric::Sensitivity => self.sensitivity.as_ref(),
            Metric::Specificity => self.specificity.as_ref(),
        }
    }

    pub fn defined(&self, metric: Metric) -> u64 {
        match metric {
            Metric::Sensitivity => self.defined_sensitivity,
            Metric::Specificity => self.defined_specificity,
        }
    }

    fn from_trials(config: &TrialConfig, trials: &[ObservedMetrics]) -> Self {
        let collect = |metric: Metric| {
            let mut v: Vec<f64> = trials
                .iter()
                .filter_map(|t| t.get(metric).map(|f| f.value()))
                .collect();
            v.sort_by(f64::total_cmp);
            let defined = v.len() as u64;
            let summary = (!v.is_empty()).then(|| MetricSummary::from_sorted(&v));
            (summary, defined)
        };
        let (sensitivity, defined_sensitivity) = collect(Metric::Sensitivity);
        let (specificity, defined_specificity) = collect(Metric::Specificity);
        McSummary {
            n_trials: config.n_trials,
            seed: config.seed,
            sensitivity,
            specificity,
            defined_sensitivity,
            defined_specificity,
        }
    }
}

/// Runs all trials on the current rayon pool and summarizes them.
pub fn run_trials(config: &TrialConfig) -> McSummary {
    let trials: Vec<ObservedMetrics> = (0..config.n_trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect();
    McSummary::from_trials(config, &trials)
}

/// Runs all trials on a dedicated pool of `workers` threads (0 = rayon default).
pub fn run_trials_with_workers(config: &TrialConfig, workers: usize) -> Result<McSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| run_trials(config)))
}

/// Runs all trials on the calling thread.
pub fn run_trials_sequential(config: &TrialConfig) -> McSummary {
    let trials: Vec<ObservedMetrics> = (0..config.n_trials)
        .map(|i| run_trial(config, i))
        .collect();
    McSummary::from_trials(config, &trials)
}
