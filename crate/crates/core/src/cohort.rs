//! Labeled cohorts: CSV loading and export, the anchor-constrained reference
//! distribution, and seeded synthetic item-level cohorts.

use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Label;
use crate::metrics::{LabeledScore, ScoreDistribution};
use crate::psychometrics::ResponseMatrix;
use crate::scale::ScaleDefinition;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CohortError {
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("header must be `score,label` or `item_1,...,item_{items},label`; got `{found}`")]
    Header { found: String, items: usize },
    #[error("line {line}: {source}")]
    BadLabel { line: u64, source: crate::label::LabelParseError },
    #[error("line {line}: score {score} outside 0..={max_total}")]
    ScoreOutOfRange { line: u64, score: u32, max_total: u32 },
    #[error("line {line}: column {column}: {points} exceeds the item maximum {max_points}")]
    CellOutOfRange { line: u64, column: String, points: u8, max_points: u8 },
    #[error("line {line}: column {column}: {token:?} is not a non-negative integer")]
    BadNumber { line: u64, column: String, token: String },
    #[error("line {line}: {found} fields, expected {expected}")]
    Ragged { line: u64, found: usize, expected: usize },
    #[error("invalid synthetic cohort config: {0}")]
    Config(String),
}

impl CohortError {
    pub fn code(&self) -> &'static str {
        match self {
            CohortError::Csv { .. } => "csv",
            CohortError::Header { .. } => "cohort-header",
            CohortError::BadLabel { .. } => "bad-label",
            CohortError::ScoreOutOfRange { .. } => "score-out-of-range",
            CohortError::CellOutOfRange { .. } => "cell-out-of-range",
            CohortError::BadNumber { .. } => "bad-number",
            CohortError::Ragged { .. } => "ragged-row",
            CohortError::Config(_) => "cohort-config",
        }
    }
}

/// A loaded cohort file in whichever form its header declares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cohort {
    Scores(Vec<LabeledScore>),
    Items(ResponseMatrix),
}

impl Cohort {
    /// Score distribution of the cohort; item rows are summed first.
    pub fn distribution(&self, scale: &ScaleDefinition) -> ScoreDistribution {
        let max_total = scale.max_total();
        let scores: Vec<LabeledScore> = match self {
            Cohort::Scores(s) => s.clone(),
            Cohort::Items(m) => m
                .totals()
                .into_iter()
                .zip(m.labels())
                .map(|(t, &l)| LabeledScore::new(t, l))
                .collect(),
        };
        ScoreDistribution::from_scores(&scores, max_total).expect("loaded cohort was range-checked")
    }
}

fn item_header(items: usize) -> Vec<String> {
    (1..=items).map(|i| format!("item_{i}")).chain(std::iter::once("label".to_string())).collect()
}

/// Reads a cohort CSV (score form or item form), validating every row against
/// `scale`. Errors carry the 1-based file line.
pub fn load_cohort<R: Read>(reader: R, scale: &ScaleDefinition) -> Result<Cohort, CohortError> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::None).from_reader(reader);
    let header: Vec<String> = csv
        .headers()
        .map_err(|e| CohortError::Csv { line: 1, message: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();

    let items = scale.items().len();
    let is_scores = header == ["score", "label"];
    if !is_scores && header != item_header(items) {
        return Err(CohortError::Header { found: header.join(","), items });
    }

    let maxima = scale.max_points();
    let mut scores = Vec::new();
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    for record in csv.records() {
        let record = record.map_err(|e| CohortError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(CohortError::Ragged { line, found: record.len(), expected: header.len() });
        }
        let label_token = &record[header.len() - 1];
        let label: Label = label_token.parse().map_err(|source| CohortError::BadLabel { line, source })?;

        let number = |idx: usize| -> Result<u32, CohortError> {
            let token = record[idx].trim();
            token.parse::<u32>().map_err(|_| CohortError::BadNumber {
                line,
                column: header[idx].clone(),
                token: token.to_string(),
            })
        };

        if is_scores {
            let score = number(0)?;
            if score > scale.max_total() {
                return Err(CohortError::ScoreOutOfRange { line, score, max_total: scale.max_total() });
            }
            scores.push(LabeledScore::new(score, label));
        } else {
            let mut row = Vec::with_capacity(items);
            for (idx, &max_points) in maxima.iter().enumerate() {
                let value = number(idx)?;
                if value > u32::from(max_points) {
                    return Err(CohortError::CellOutOfRange {
                        line,
                        column: header[idx].clone(),
                        points: value.min(255) as u8,
                        max_points,
                    });
                }
                row.push(value as u8);
            }
            rows.push(row);
            labels.push(label);
        }
    }

    if is_scores {
        Ok(Cohort::Scores(scores))
    } else {
        let matrix = ResponseMatrix::new(rows, labels).expect("rows built with uniform width");
        Ok(Cohort::Items(matrix))
    }
}

fn finish(writer: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(writer.into_inner().expect("in-memory CSV flush")).expect("CSV output is UTF-8")
}

/// Score-form cohort CSV: `score,label`.
pub fn scores_csv(scores: &[LabeledScore]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["score", "label"]).expect("in-memory CSV write");
    for s in scores {
        w.write_record([s.score.to_string().as_str(), s.label.as_str()]).expect("in-memory CSV write");
    }
    finish(w)
}

/// Item-form cohort CSV: `item_1..item_k,label`.
pub fn matrix_csv(matrix: &ResponseMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(item_header(matrix.item_count())).expect("in-memory CSV write");
    for (row, label) in matrix.rows().iter().zip(matrix.labels()) {
        let mut fields: Vec<String> = row.iter().map(u8::to_string).collect();
        fields.push(label.as_str().to_string());
        w.write_record(&fields).expect("in-memory CSV write");
    }
    finish(w)
}

/// Histogram CSV: `score,severe,non_severe`, one row per score.
pub fn distribution_csv(dist: &ScoreDistribution) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["score", "severe", "non_severe"]).expect("in-memory CSV write");
    for (score, (s, n)) in dist.severe().iter().zip(dist.non_severe()).enumerate() {
        w.write_record([score.to_string(), s.to_string(), n.to_string()]).expect("in-memory CSV write");
    }
    finish(w)
}

// ---------------------------------------------------------------------------
// Anchor reconstruction

/// Severe cases in the reference cohort.
pub const ANCHOR_SEVERE: u64 = 269;
/// Non-severe cases in the reference cohort.
pub const ANCHOR_NON_SEVERE: u64 = 812;
/// Maximum total of the binary scale the anchors were published for.
pub const ANCHOR_MAX_TOTAL: u32 = 20;

/// How an anchor count was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnchorCount {
    /// Count published directly.
    Published { count: u64 },
    /// `round_half_up(rate × class_size)` for a published percentage
    /// `rate_basis_points / 10000`.
    FromRate { rate_basis_points: u64, class_size: u64, count: u64 },
}

impl AnchorCount {
    fn published(count: u64) -> Self {
        AnchorCount::Published { count }
    }

    fn from_rate(rate_basis_points: u64, class_size: u64) -> Self {
        let count = (2 * rate_basis_points * class_size + 10_000) / 20_000;
        AnchorCount::FromRate { rate_basis_points, class_size, count }
    }

    pub fn count(&self) -> u64 {
        match *self {
            AnchorCount::Published { count } | AnchorCount::FromRate { count, .. } => count,
        }
    }
}

/// A published operating point: how many cases of each class score at or
/// above `cutoff`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnchorPoint {
    pub cutoff: u32,
    pub severe_at_or_above: u64,
    pub non_severe_at_or_above: u64,
    pub severe_source: AnchorCount,
    /// For a rate anchor this may count the non-severe cases *below* the
    /// cutoff (a specificity); `non_severe_at_or_above` is always derived.
    pub non_severe_source: AnchorCount,
    pub provenance: &'static str,
}

/// The operating points every reconstruction must honour, in cutoff order.
pub fn anchor_points() -> Vec<AnchorPoint> {
    let spec_at_6 = AnchorCount::from_rate(4532, ANCHOR_NON_SEVERE);
    let sens_at_6 = AnchorCount::from_rate(8327, ANCHOR_SEVERE);
    let sens_at_12 = AnchorCount::from_rate(2900, ANCHOR_SEVERE);
    let fpr_at_12 = AnchorCount::from_rate(600, ANCHOR_NON_SEVERE);
    vec![
        AnchorPoint {
            cutoff: 0,
            severe_at_or_above: ANCHOR_SEVERE,
            non_severe_at_or_above: ANCHOR_NON_SEVERE,
            severe_source: AnchorCount::published(ANCHOR_SEVERE),
            non_severe_source: AnchorCount::published(ANCHOR_NON_SEVERE),
            provenance: "cutoff 0 classifies every case severe; class sizes 269 severe / 812 non-severe",
        },
        AnchorPoint {
            cutoff: 6,
            severe_at_or_above: sens_at_6.count(),
            non_severe_at_or_above: ANCHOR_NON_SEVERE - spec_at_6.count(),
            severe_source: sens_at_6,
            non_severe_source: spec_at_6,
            provenance: "published rates at cutoff 6: sensitivity 83.27%, specificity 45.32%",
        },
        AnchorPoint {
            cutoff: 10,
            severe_at_or_above: 129,
            non_severe_at_or_above: 151,
            severe_source: AnchorCount::published(129),
            non_severe_source: AnchorCount::published(151),
            provenance: "published confusion matrix at cutoff 10: TP 129, FN 140, FP 151, TN 661",
        },
        AnchorPoint {
            cutoff: 12,
            severe_at_or_above: sens_at_12.count(),
            non_severe_at_or_above: fpr_at_12.count(),
            severe_source: sens_at_12,
            non_severe_source: fpr_at_12,
            provenance: "published rates at cutoff 12: 29% of severe cases flagged, 6% false positives",
        },
        AnchorPoint {
            cutoff: ANCHOR_MAX_TOTAL + 1,
            severe_at_or_above: 0,
            non_severe_at_or_above: 0,
            severe_source: AnchorCount::published(0),
            non_severe_source: AnchorCount::published(0),
            provenance: "no score exceeds the scale maximum of 20",
        },
    ]
}

/// Spreads `count` cases over `bins` scores: equal shares, remainder one each
/// to the lowest scores.
fn spread(count: u64, bins: u32) -> impl Iterator<Item = u64> {
    let (share, remainder) = (count / u64::from(bins), count % u64::from(bins));
    (0..u64::from(bins)).map(move |i| share + u64::from(i < remainder))
}

/// The canonical reference distribution over scores 0..=20 that reproduces
/// every published operating point. Between anchors, cases are spread evenly
/// with the remainder assigned to the lower scores.
pub fn reconstruct_anchor_cohort() -> ScoreDistribution {
    let anchors = anchor_points();
    let mut severe = Vec::with_capacity(ANCHOR_MAX_TOTAL as usize + 1);
    let mut non_severe = Vec::with_capacity(ANCHOR_MAX_TOTAL as usize + 1);
    for pair in anchors.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        assert!(
            lo.cutoff < hi.cutoff
                && lo.severe_at_or_above >= hi.severe_at_or_above
                && lo.non_severe_at_or_above >= hi.non_severe_at_or_above,
            "anchor points must be non-increasing in cutoff"
        );
        let bins = hi.cutoff - lo.cutoff;
        severe.extend(spread(lo.severe_at_or_above - hi.severe_at_or_above, bins));
        non_severe.extend(spread(lo.non_severe_at_or_above - hi.non_severe_at_or_above, bins));
    }
    ScoreDistribution::new(ANCHOR_MAX_TOTAL, severe, non_severe).expect("anchors span 0..=max_total + 1")
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

/// Class sizes and per-item rates of a synthetic population.
///
/// For an item worth `m` points, a case's points are the number of successes
/// in `m` independent trials at the item's class rate, so a binary item is
/// affirmative with exactly that probability and a rate of 1.0 always yields
/// the item maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub n_severe: usize,
    pub n_non_severe: usize,
    pub severe_rates: Vec<f64>,
    pub non_severe_rates: Vec<f64>,
}

impl PopulationSpec {
    /// Illustrative rates for demos and tests. Item 1 uses the published
    /// foreign-origin shares (35.7% of severe, 25.9% of non-severe cases);
    /// the rest are invented and carry no clinical meaning.
    pub fn illustrative() -> Self {
        Self {
            n_severe: ANCHOR_SEVERE as usize,
            n_non_severe: ANCHOR_NON_SEVERE as usize,
            severe_rates: vec![
                0.357, 0.45, 0.40, 0.65, 0.35, 0.40, 0.45, 0.40, 0.55, 0.20, 0.70, 0.30, 0.25,
                0.35, 0.15, 0.40, 0.55, 0.50, 0.30, 0.30,
            ],
            non_severe_rates: vec![
                0.259, 0.35, 0.25, 0.40, 0.20, 0.15, 0.20, 0.10, 0.15, 0.08, 0.35, 0.15, 0.12,
                0.22, 0.08, 0.18, 0.35, 0.15, 0.20, 0.18,
            ],
        }
    }

    /// Parses a TOML population document (not yet validated against a scale).
    pub fn parse(document: &str) -> Result<Self, CohortError> {
        toml::from_str(document).map_err(|e| CohortError::Config(e.message().to_string()))
    }

    pub fn validate(&self, items: usize) -> Result<(), CohortError> {
        if self.n_severe == 0 || self.n_non_severe == 0 {
            return Err(CohortError::Config("both class sizes must be positive".into()));
        }
        for (name, rates) in [("severe_rates", &self.severe_rates), ("non_severe_rates", &self.non_severe_rates)] {
            if rates.len() != items {
                return Err(CohortError::Config(format!("{name} has {} entries, expected {items}", rates.len())));
            }
            if let Some((i, r)) = rates.iter().enumerate().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
                return Err(CohortError::Config(format!("{name}[{i}] = {r} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn rates(&self, label: Label) -> &[f64] {
        match label {
            Label::Severe => &self.severe_rates,
            Label::NonSevere => &self.non_severe_rates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCohortConfig {
    pub population: PopulationSpec,
    pub seed: u64,
}

/// Draws one item's points: successes among `max_points` trials, each
/// succeeding when its uniform draw falls below `rate`.
pub(crate) fn draw_points<R: Rng>(rng: &mut R, rate: f64, max_points: u8) -> u8 {
    (0..max_points).filter(|_| rng.gen::<f64>() < rate).count() as u8
}

/// Generates severe rows first, then non-severe rows. Same config, same matrix.
pub fn generate_synthetic(
    config: &SyntheticCohortConfig,
    scale: &ScaleDefinition,
) -> Result<ResponseMatrix, CohortError> {
    let pop = &config.population;
    pop.validate(scale.items().len())?;
    let maxima = scale.max_points();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Vec::with_capacity(pop.n_severe + pop.n_non_severe);
    let mut labels = Vec::with_capacity(rows.capacity());
    for (label, n) in [(Label::Severe, pop.n_severe), (Label::NonSevere, pop.n_non_severe)] {
        let rates = pop.rates(label);
        for _ in 0..n {
            rows.push(
                rates.iter().zip(&maxima).map(|(&r, &m)| draw_points(&mut rng, r, m)).collect(),
            );
            labels.push(label);
        }
    }
    Ok(ResponseMatrix::new(rows, labels).expect("generated rows are rectangular"))
}
