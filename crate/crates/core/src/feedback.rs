//! Feedback-loop simulator: assessors whose recording is nudged by the current
//! model's verdict, and a model retrained on what they recorded.
//!
//! The generative model is a concrete, deliberately simple instantiation:
//!
//! 1. Each iteration draws a fresh population from [`PopulationSpec`].
//! 2. The current weights score each case's true items; for cases at or
//!    above the cutoff the assessor records item `i` affirmatively with
//!    probability `min(1, rate_i + bias_i)` instead of `rate_i` (the two
//!    draws share one uniform, so bias only ever adds affirmatives).
//! 3. The recorded items are scored and classified with the current weights.
//! 4. The training set is either every case with its true label, or every
//!    case with the model's own predicted label.
//! 5. New weights are proportional to the positive affirmative-rate gaps
//!    between the training classes, renormalized to the point budget.
//!
//! Iteration 0 fits the weights on an unbiased draw with true labels.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{CohortError, PopulationSpec};
use crate::label::Label;
use crate::metrics::ConfusionMatrix;
use crate::psychometrics::{item_discrimination, ResponseMatrix};
use crate::scale::ScaleDefinition;

/// Upper bound on `iterations`.
pub const MAX_ITERATIONS: usize = 1000;

/// Growth over baseline above which [`drift_report`] flags an item.
pub const DRIFT_FLAG_GROWTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedbackError {
    #[error(transparent)]
    Population(#[from] CohortError),
    #[error("bias has {found} entries, expected {expected}")]
    BiasLength { found: usize, expected: usize },
    #[error("bias for item {item} is {value}; must be finite and >= 0")]
    BadBias { item: usize, value: f64 },
    #[error("iterations {0} exceeds the cap of {MAX_ITERATIONS}")]
    TooManyIterations(usize),
    #[error("cutoff {0} must be finite and positive")]
    BadCutoff(f64),
    #[error("the initial unbiased draw has no positive rate gap; weights cannot be fitted")]
    DegenerateInitialFit,
    #[error("invalid feedback config: {0}")]
    Parse(String),
}

impl FeedbackError {
    pub fn code(&self) -> &'static str {
        match self {
            FeedbackError::Population(e) => e.code(),
            FeedbackError::BiasLength { .. } => "bias-length",
            FeedbackError::BadBias { .. } => "bad-bias",
            FeedbackError::TooManyIterations(_) => "too-many-iterations",
            FeedbackError::BadCutoff(_) => "bad-cutoff",
            FeedbackError::DegenerateInitialFit => "degenerate-initial-fit",
            FeedbackError::Parse(_) => "feedback-config",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Retrain with the model's own predicted labels.
    RetrainOnPredictedSevere,
    /// Retrain with true outcome labels.
    RetrainOnAll,
}

/// Simulation settings without the seed (the seed is always supplied
/// explicitly by the caller).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSpec {
    #[serde(default = "PopulationSpec::illustrative")]
    pub population: PopulationSpec,
    /// Per-item additive boost; omitted means no bias.
    #[serde(default)]
    pub bias: Vec<f64>,
    pub selection_rule: SelectionRule,
    pub iterations: usize,
    /// Weighted-score threshold; defaults to the first high-tier total.
    #[serde(default)]
    pub cutoff: Option<f64>,
}

impl FeedbackSpec {
    pub fn parse(document: &str) -> Result<Self, FeedbackError> {
        toml::from_str(document).map_err(|e| FeedbackError::Parse(e.message().to_string()))
    }

    pub fn with_seed(self, seed: u64) -> FeedbackConfig {
        FeedbackConfig { spec: self, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackConfig {
    #[serde(flatten)]
    pub spec: FeedbackSpec,
    pub seed: u64,
}

/// Confusion counts of one subgroup defined by the item-1 flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubgroupStats {
    pub item_1_affirmative: bool,
    pub confusion: ConfusionMatrix,
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
}

impl SubgroupStats {
    fn new(item_1_affirmative: bool, confusion: ConfusionMatrix) -> Self {
        let ratio = |n: u64, d: u64| (d > 0).then(|| n as f64 / d as f64);
        Self {
            item_1_affirmative,
            fnr: ratio(confusion.fn_, confusion.n_pos()),
            fpr: ratio(confusion.fp, confusion.n_neg()),
            confusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Weights after this iteration's retraining.
    pub weights: Vec<f64>,
    /// `weights − iteration-0 weights`.
    pub drift: Vec<f64>,
    pub cases: u64,
    /// Cases at or above the cutoff on their recorded items, using the
    /// weights in force during the iteration.
    pub predicted_severe: u64,
    pub predicted_prevalence: f64,
    /// Cases whose recording was biased by the model's prior verdict.
    pub biased_cases: u64,
    /// `[item 1 not affirmative, item 1 affirmative]`, by true item 1.
    pub subgroups: [SubgroupStats; 2],
    /// Retraining was skipped (single-class training set or no positive
    /// gap); weights carried over.
    pub stalled: bool,
}

impl IterationRecord {
    /// FNR(item 1 affirmative) − FNR(item 1 not affirmative).
    pub fn subgroup_fnr_gap(&self) -> Option<f64> {
        Some(self.subgroups[1].fnr? - self.subgroups[0].fnr?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackTrace {
    pub config: FeedbackConfig,
    pub point_budget: f64,
    pub cutoff: f64,
    pub iterations: Vec<IterationRecord>,
}

struct Case {
    label: Label,
    latent: Vec<u8>,
    uniforms: Vec<f64>,
}

struct Simulator<'a> {
    scale: &'a ScaleDefinition,
    maxima: Vec<u8>,
    population: &'a PopulationSpec,
    bias: Vec<f64>,
    budget: f64,
    cutoff: f64,
    rng: ChaCha8Rng,
}

impl Simulator<'_> {
    fn draw(&mut self) -> Vec<Case> {
        let pop = self.population;
        let mut cases = Vec::with_capacity(pop.n_severe + pop.n_non_severe);
        for (label, n) in [(Label::Severe, pop.n_severe), (Label::NonSevere, pop.n_non_severe)] {
            let rates = pop.rates(label);
            for _ in 0..n {
                let mut latent = Vec::with_capacity(rates.len());
                let mut uniforms = Vec::new();
                for (&rate, &max) in rates.iter().zip(&self.maxima) {
                    let mut points = 0u8;
                    for _ in 0..max {
                        let u: f64 = self.rng.gen();
                        points += u8::from(u < rate);
                        uniforms.push(u);
                    }
                    latent.push(points);
                }
                cases.push(Case { label, latent, uniforms });
            }
        }
        cases
    }

    fn weighted_score(&self, weights: &[f64], points: &[u8]) -> f64 {
        weights
            .iter()
            .zip(points)
            .zip(&self.maxima)
            .map(|((w, &p), &m)| w * f64::from(p) / f64::from(m))
            .sum()
    }

    /// Points as recorded by an assessor who already believes the case is
    /// severe.
    fn biased_record(&self, label: Label, uniforms: &[f64]) -> Vec<u8> {
        let rates = self.population.rates(label);
        let mut trials = uniforms.iter();
        rates
            .iter()
            .zip(&self.bias)
            .zip(&self.maxima)
            .map(|((&rate, &bias), &max)| {
                let boosted = (rate + bias).clamp(0.0, 1.0);
                (0..max).filter(|_| *trials.next().expect("one uniform per trial") < boosted).count() as u8
            })
            .collect()
    }

    /// Rate-gap weights, or `None` when the training set is degenerate.
    fn fit(&self, matrix: &ResponseMatrix) -> Option<Vec<f64>> {
        let ranked = item_discrimination::<f64>(matrix).ok()?;
        let mut gaps = vec![0.0; self.maxima.len()];
        for item in ranked {
            gaps[usize::from(item.item_id - 1)] = item.rate_gap.max(0.0);
        }
        let total: f64 = gaps.iter().sum();
        (total > 0.0).then(|| gaps.iter().map(|g| self.budget * g / total).collect())
    }

    fn evaluate(&self, weights: &[f64], cases: &[Case], recorded: &[Vec<u8>], biased: u64) -> (Vec<Label>, IterationRecord) {
        let mut predicted = Vec::with_capacity(cases.len());
        let mut groups = [ConfusionMatrix::new(0, 0, 0, 0); 2];
        for (case, points) in cases.iter().zip(recorded) {
            let severe = self.weighted_score(weights, points) >= self.cutoff;
            let cm = &mut groups[usize::from(case.latent[0] > 0)];
            match (case.label, severe) {
                (Label::Severe, true) => cm.tp += 1,
                (Label::Severe, false) => cm.fn_ += 1,
                (Label::NonSevere, true) => cm.fp += 1,
                (Label::NonSevere, false) => cm.tn += 1,
            }
            predicted.push(if severe { Label::Severe } else { Label::NonSevere });
        }
        let predicted_severe = predicted.iter().filter(|l| l.is_severe()).count() as u64;
        let record = IterationRecord {
            iteration: 0,
            weights: Vec::new(),
            drift: Vec::new(),
            cases: cases.len() as u64,
            predicted_severe,
            predicted_prevalence: predicted_severe as f64 / cases.len() as f64,
            biased_cases: biased,
            subgroups: [SubgroupStats::new(false, groups[0]), SubgroupStats::new(true, groups[1])],
            stalled: false,
        };
        (predicted, record)
    }
}

fn validate(config: &FeedbackConfig, scale: &ScaleDefinition) -> Result<(Vec<f64>, f64), FeedbackError> {
    let spec = &config.spec;
    let items = scale.items().len();
    spec.population.validate(items)?;
    let bias = if spec.bias.is_empty() { vec![0.0; items] } else { spec.bias.clone() };
    if bias.len() != items {
        return Err(FeedbackError::BiasLength { found: bias.len(), expected: items });
    }
    if let Some((i, &b)) = bias.iter().enumerate().find(|(_, b)| !b.is_finite() || **b < 0.0) {
        return Err(FeedbackError::BadBias { item: i + 1, value: b });
    }
    if spec.iterations > MAX_ITERATIONS {
        return Err(FeedbackError::TooManyIterations(spec.iterations));
    }
    let cutoff = spec.cutoff.unwrap_or(f64::from(scale.tier_bounds().moderate_max + 1));
    if !cutoff.is_finite() || cutoff <= 0.0 {
        return Err(FeedbackError::BadCutoff(cutoff));
    }
    Ok((bias, cutoff))
}

/// Runs the loop for `iterations` rounds. The trace has `iterations + 1`
/// records; identical config and seed give a bit-identical trace.
pub fn run_feedback(config: &FeedbackConfig, scale: &ScaleDefinition) -> Result<FeedbackTrace, FeedbackError> {
    let (bias, cutoff) = validate(config, scale)?;
    let mut sim = Simulator {
        scale,
        maxima: scale.max_points(),
        population: &config.spec.population,
        bias,
        budget: f64::from(scale.max_total()),
        cutoff,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };
    debug_assert_eq!(sim.maxima.len(), sim.scale.items().len());

    // Iteration 0: unbiased draw, true labels.
    let cases = sim.draw();
    let latent: Vec<Vec<u8>> = cases.iter().map(|c| c.latent.clone()).collect();
    let labels: Vec<Label> = cases.iter().map(|c| c.label).collect();
    let initial = ResponseMatrix::new(latent.clone(), labels).expect("rectangular draw");
    let baseline = sim.fit(&initial).ok_or(FeedbackError::DegenerateInitialFit)?;
    let (_, mut record) = sim.evaluate(&baseline, &cases, &latent, 0);
    record.weights = baseline.clone();
    record.drift = vec![0.0; baseline.len()];
    let mut iterations = vec![record];

    let mut weights = baseline.clone();
    for t in 1..=config.spec.iterations {
        let cases = sim.draw();
        let mut biased = 0u64;
        let recorded: Vec<Vec<u8>> = cases
            .iter()
            .map(|case| {
                if sim.weighted_score(&weights, &case.latent) >= sim.cutoff {
                    biased += 1;
                    sim.biased_record(case.label, &case.uniforms)
                } else {
                    case.latent.clone()
                }
            })
            .collect();
        let (predicted, mut record) = sim.evaluate(&weights, &cases, &recorded, biased);

        let training_labels = match config.spec.selection_rule {
            SelectionRule::RetrainOnAll => cases.iter().map(|c| c.label).collect(),
            SelectionRule::RetrainOnPredictedSevere => predicted,
        };
        let training = ResponseMatrix::new(recorded, training_labels).expect("rectangular draw");
        match sim.fit(&training) {
            Some(w) => weights = w,
            None => record.stalled = true,
        }
        record.iteration = t;
        record.drift = weights.iter().zip(&baseline).map(|(w, b)| w - b).collect();
        record.weights = weights.clone();
        iterations.push(record);
    }

    Ok(FeedbackTrace { config: config.clone(), point_budget: sim.budget, cutoff, iterations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemDrift {
    pub item_id: u8,
    pub initial: f64,
    pub final_weight: f64,
    pub delta: f64,
    /// Largest `weight_t / initial` over the trace; `None` for a zero
    /// baseline.
    pub max_growth_ratio: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub iterations: usize,
    pub items: Vec<ItemDrift>,
    pub flagged_items: Vec<u8>,
    pub stalled_iterations: Vec<usize>,
    /// Per iteration: FNR of item-1-affirmative cases minus FNR of the rest.
    pub subgroup_fnr_gap: Vec<Option<f64>>,
    pub predicted_prevalence: Vec<f64>,
}

/// Summarizes final-versus-initial weights and flags any item whose weight
/// grew by more than 50% over its baseline at any point of the trace.
pub fn drift_report(trace: &FeedbackTrace) -> DriftReport {
    let first = trace.iterations.first().expect("trace always holds the initial state");
    let last = trace.iterations.last().expect("trace always holds the initial state");
    let items: Vec<ItemDrift> = (0..first.weights.len())
        .map(|i| {
            let initial = first.weights[i];
            let peak = trace.iterations.iter().map(|r| r.weights[i]).fold(f64::MIN, f64::max);
            let max_growth_ratio = (initial > 0.0).then(|| peak / initial);
            let flagged = match max_growth_ratio {
                Some(ratio) => ratio > 1.0 + DRIFT_FLAG_GROWTH,
                None => peak > 0.0,
            };
            ItemDrift {
                item_id: (i + 1) as u8,
                initial,
                final_weight: last.weights[i],
                delta: last.weights[i] - initial,
                max_growth_ratio,
                flagged,
            }
        })
        .collect();
    DriftReport {
        iterations: trace.iterations.len() - 1,
        flagged_items: items.iter().filter(|d| d.flagged).map(|d| d.item_id).collect(),
        items,
        stalled_iterations: trace.iterations.iter().filter(|r| r.stalled).map(|r| r.iteration).collect(),
        subgroup_fnr_gap: trace.iterations.iter().map(IterationRecord::subgroup_fnr_gap).collect(),
        predicted_prevalence: trace.iterations.iter().map(|r| r.predicted_prevalence).collect(),
    }
}

/// Long-form trace export, one row per iteration per item.
pub fn trace_csv(trace: &FeedbackTrace) -> String {
    let mut out = String::from(
        "iteration,item_id,weight,drift,predicted_prevalence,stalled,\
         tp_item1,fn_item1,fp_item1,tn_item1,tp_rest,fn_rest,fp_rest,tn_rest\n",
    );
    for r in &trace.iterations {
        let [rest, flagged] = &r.subgroups;
        for (i, (w, d)) in r.weights.iter().zip(&r.drift).enumerate() {
            let (a, b) = (flagged.confusion, rest.confusion);
            writeln!(
                out,
                "{},{},{:.9},{:.9},{:.9},{},{},{},{},{},{},{},{},{}",
                r.iteration, i + 1, w, d, r.predicted_prevalence, r.stalled,
                a.tp, a.fn_, a.fp, a.tn, b.tp, b.fn_, b.fp, b.tn
            )
            .expect("writing to a String");
        }
    }
    out
}

/// Spearman rank correlation between iteration index and one item's weight,
/// with average ranks for ties. `None` when either side is constant.
pub fn weight_trend(trace: &FeedbackTrace, item_id: u8) -> Option<f64> {
    let ys: Vec<f64> = trace.iterations.iter().map(|r| r.weights[usize::from(item_id - 1)]).collect();
    let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
    spearman(&xs, &ys)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
