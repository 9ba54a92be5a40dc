//! Threshold classification metrics over integer score distributions.
//!
//! A case is predicted severe when its score is `>= cutoff`, so cutoff 0 flags
//! every case and cutoff `max_total + 1` flags none. Ratios with a zero
//! denominator are `None` and render as `n/a`; they are never silently 0 or 1.

use serde::Serialize;
use thiserror::Error;

use crate::decimal;
use crate::label::Label;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cutoff {cutoff} outside 0..={limit}")]
    CutoffOutOfRange { cutoff: u32, limit: u32 },
    #[error("score {score} outside 0..={max_total}")]
    ScoreOutOfRange { score: u32, max_total: u32 },
    #[error("histograms must have max_total + 1 = {expected} bins (got {severe} and {non_severe})")]
    HistogramLength { expected: usize, severe: usize, non_severe: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("distribution has no cases")]
    EmptyDistribution,
    #[error("ROC needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("ROC point at cutoff {0} is undefined (single-class data)")]
    UndefinedRocPoint(u32),
}

impl MetricsError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricsError::CutoffOutOfRange { .. } => "cutoff-out-of-range",
            MetricsError::ScoreOutOfRange { .. } => "score-out-of-range",
            MetricsError::HistogramLength { .. } => "histogram-length",
            MetricsError::EmptyMatrix => "empty-matrix",
            MetricsError::EmptyDistribution => "empty-distribution",
            MetricsError::TooFewPoints(_) => "too-few-points",
            MetricsError::UndefinedRocPoint(_) => "undefined-roc-point",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LabeledScore {
    pub score: u32,
    pub label: Label,
}

impl LabeledScore {
    pub fn new(score: u32, label: Label) -> Self {
        Self { score, label }
    }
}

/// Per-class score histograms over `0..=max_total`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreDistribution {
    max_total: u32,
    severe: Vec<u64>,
    non_severe: Vec<u64>,
}

impl ScoreDistribution {
    pub fn new(max_total: u32, severe: Vec<u64>, non_severe: Vec<u64>) -> Result<Self, MetricsError> {
        let expected = max_total as usize + 1;
        if severe.len() != expected || non_severe.len() != expected {
            return Err(MetricsError::HistogramLength {
                expected,
                severe: severe.len(),
                non_severe: non_severe.len(),
            });
        }
        Ok(Self { max_total, severe, non_severe })
    }

    pub fn from_scores(scores: &[LabeledScore], max_total: u32) -> Result<Self, MetricsError> {
        let bins = max_total as usize + 1;
        let (mut severe, mut non_severe) = (vec![0u64; bins], vec![0u64; bins]);
        for s in scores {
            if s.score > max_total {
                return Err(MetricsError::ScoreOutOfRange { score: s.score, max_total });
            }
            match s.label {
                Label::Severe => severe[s.score as usize] += 1,
                Label::NonSevere => non_severe[s.score as usize] += 1,
            }
        }
        Ok(Self { max_total, severe, non_severe })
    }

    pub fn max_total(&self) -> u32 {
        self.max_total
    }

    pub fn severe(&self) -> &[u64] {
        &self.severe
    }

    pub fn non_severe(&self) -> &[u64] {
        &self.non_severe
    }

    pub fn n_pos(&self) -> u64 {
        self.severe.iter().sum()
    }

    pub fn n_neg(&self) -> u64 {
        self.non_severe.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.n_pos() + self.n_neg()
    }

    /// Largest valid cutoff (`max_total + 1`, nothing predicted severe).
    pub fn cutoff_limit(&self) -> u32 {
        self.max_total + 1
    }

    pub fn severe_at_or_above(&self, cutoff: u32) -> u64 {
        self.severe.iter().skip(cutoff as usize).sum()
    }

    pub fn non_severe_at_or_above(&self, cutoff: u32) -> u64 {
        self.non_severe.iter().skip(cutoff as usize).sum()
    }

    /// Expands the histograms into one record per case, in score order.
    pub fn to_labeled_scores(&self) -> Vec<LabeledScore> {
        let mut out = Vec::with_capacity(self.total() as usize);
        for (score, (&s, &n)) in self.severe.iter().zip(&self.non_severe).enumerate() {
            let score = score as u32;
            out.extend(std::iter::repeat_n(LabeledScore::new(score, Label::Severe), s as usize));
            out.extend(std::iter::repeat_n(LabeledScore::new(score, Label::NonSevere), n as usize));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self { tp, fn_, fp, tn }
    }

    /// Counts straight from case records, without a histogram.
    pub fn from_scores(scores: &[LabeledScore], cutoff: u32) -> Self {
        let mut cm = Self::new(0, 0, 0, 0);
        for s in scores {
            match (s.label, s.score >= cutoff) {
                (Label::Severe, true) => cm.tp += 1,
                (Label::Severe, false) => cm.fn_ += 1,
                (Label::NonSevere, true) => cm.fp += 1,
                (Label::NonSevere, false) => cm.tn += 1,
            }
        }
        cm
    }

    pub fn n_pos(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn n_neg(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.n_pos() + self.n_neg()
    }

    pub fn predicted_severe(&self) -> u64 {
        self.tp + self.fp
    }

    /// More severe cases missed than caught.
    pub fn fn_majority(&self) -> bool {
        self.fn_ > self.tp
    }

    /// Every metric rendered as an exact fixed-point decimal (or `n/a`).
    pub fn decimal_row(&self, cutoff: u32) -> DecimalRow {
        let p = decimal::PLACES;
        let r = |n: u64, d: u64| decimal::or_undefined(decimal::ratio(n, d, p));
        let (tp, fn_, fp, tn) = (self.tp, self.fn_, self.fp, self.tn);
        let f_defined = tp + fp > 0 && tp + fn_ > 0;
        DecimalRow {
            cutoff,
            tp,
            fn_,
            fp,
            tn,
            sensitivity: r(tp, tp + fn_),
            specificity: r(tn, tn + fp),
            fpr: r(fp, fp + tn),
            fnr: r(fn_, tp + fn_),
            accuracy: r(tp + tn, self.total()),
            precision: r(tp, tp + fp),
            npv: r(tn, tn + fn_),
            f_measure: if f_defined { r(2 * tp, 2 * tp + fp + fn_) } else { decimal::UNDEFINED.to_string() },
            g_mean: decimal::or_undefined(if tp + fn_ > 0 && tn + fp > 0 {
                decimal::sqrt_ratio(
                    u128::from(tp) * u128::from(tn),
                    u128::from(tp + fn_) * u128::from(tn + fp),
                    p,
                )
            } else {
                None
            }),
        }
    }
}

/// Classification ratios of one confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics<T> {
    pub sensitivity: Option<T>,
    pub specificity: Option<T>,
    pub fpr: Option<T>,
    pub fnr: Option<T>,
    pub accuracy: Option<T>,
    pub precision: Option<T>,
    pub npv: Option<T>,
    pub f_measure: Option<T>,
    pub g_mean: Option<T>,
}

/// One cutoff of a sweep: the counts plus their metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow<T> {
    pub cutoff: u32,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics<T>,
}

/// Fixed-column, string-valued sweep row shared by CSV export, reports and the
/// service wire format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecimalRow {
    pub cutoff: u32,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    pub sensitivity: String,
    pub specificity: String,
    pub fpr: String,
    pub fnr: String,
    pub accuracy: String,
    pub precision: String,
    pub npv: String,
    pub f_measure: String,
    pub g_mean: String,
}

pub const SWEEP_CSV_HEADER: &str =
    "cutoff,tp,fn,fp,tn,sensitivity,specificity,fpr,fnr,accuracy,precision,npv,f_measure,g_mean";

pub fn confusion(dist: &ScoreDistribution, cutoff: u32) -> Result<ConfusionMatrix, MetricsError> {
    let limit = dist.cutoff_limit();
    if cutoff > limit {
        return Err(MetricsError::CutoffOutOfRange { cutoff, limit });
    }
    let tp = dist.severe_at_or_above(cutoff);
    let fp = dist.non_severe_at_or_above(cutoff);
    Ok(ConfusionMatrix::new(tp, dist.n_pos() - tp, fp, dist.n_neg() - fp))
}

fn ratio<T: Scalar>(num: u64, den: u64) -> Option<T> {
    (den > 0).then(|| T::from_ratio(num, den))
}

pub fn metrics<T: Scalar>(cm: &ConfusionMatrix) -> Result<Metrics<T>, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let ConfusionMatrix { tp, fn_, fp, tn } = *cm;
    let sensitivity: Option<T> = ratio(tp, tp + fn_);
    let specificity: Option<T> = ratio(tn, tn + fp);
    let precision: Option<T> = ratio(tp, tp + fp);
    let f_measure = match (&precision, &sensitivity) {
        (Some(_), Some(_)) => ratio(2 * tp, 2 * tp + fp + fn_),
        _ => None,
    };
    let g_mean = match (&sensitivity, &specificity) {
        (Some(s), Some(sp)) => Some((s.clone() * sp.clone()).sqrt()),
        _ => None,
    };
    Ok(Metrics {
        fpr: ratio(fp, fp + tn),
        fnr: ratio(fn_, tp + fn_),
        accuracy: ratio(tp + tn, cm.total()),
        npv: ratio(tn, tn + fn_),
        sensitivity,
        specificity,
        precision,
        f_measure,
        g_mean,
    })
}

pub fn metrics_row<T: Scalar>(dist: &ScoreDistribution, cutoff: u32) -> Result<MetricsRow<T>, MetricsError> {
    let cm = confusion(dist, cutoff)?;
    Ok(MetricsRow { cutoff, confusion: cm, metrics: metrics(&cm)? })
}

/// One row per cutoff in `0..=max_total + 1`. Single-class distributions still
/// produce a sweep; the metrics that need the missing class are `None`.
pub fn sweep<T: Scalar>(dist: &ScoreDistribution) -> Result<Vec<MetricsRow<T>>, MetricsError> {
    if dist.total() == 0 {
        return Err(MetricsError::EmptyDistribution);
    }
    (0..=dist.cutoff_limit()).map(|c| metrics_row(dist, c)).collect()
}

/// Exact decimal rows for every cutoff.
pub fn decimal_sweep(dist: &ScoreDistribution) -> Result<Vec<DecimalRow>, MetricsError> {
    if dist.total() == 0 {
        return Err(MetricsError::EmptyDistribution);
    }
    (0..=dist.cutoff_limit())
        .map(|c| confusion(dist, c).map(|cm| cm.decimal_row(c)))
        .collect()
}

/// Sweep export in the fixed column order of [`SWEEP_CSV_HEADER`].
pub fn sweep_csv(dist: &ScoreDistribution) -> Result<String, MetricsError> {
    let rows = decimal_sweep(dist)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        writer.serialize(row).expect("in-memory CSV write");
    }
    let bytes = writer.into_inner().expect("in-memory CSV flush");
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Trapezoidal area under the ROC polygon through every sweep point plus the
/// (0,0) and (1,1) corners.
pub fn auc<T: Scalar>(rows: &[MetricsRow<T>]) -> Result<T, MetricsError> {
    if rows.len() < 2 {
        return Err(MetricsError::TooFewPoints(rows.len()));
    }
    let mut points = Vec::with_capacity(rows.len() + 2);
    points.push((T::zero(), T::zero()));
    for row in rows {
        match (&row.metrics.fpr, &row.metrics.sensitivity) {
            (Some(x), Some(y)) => points.push((x.clone(), y.clone())),
            _ => return Err(MetricsError::UndefinedRocPoint(row.cutoff)),
        }
    }
    points.push((T::one(), T::one()));
    points.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    });
    let two = T::one() + T::one();
    let area = points.windows(2).fold(T::zero(), |acc, w| {
        let (x0, y0) = &w[0];
        let (x1, y1) = &w[1];
        acc + (x1.clone() - x0.clone()) * (y0.clone() + y1.clone()) / two.clone()
    });
    Ok(area)
}

/// Result of the accuracy-paradox rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParadoxCheck {
    pub flagged: bool,
    pub explanation: String,
}

/// Accuracy threshold (inclusive) of the paradox rule, as a fraction.
pub const PARADOX_MIN_ACCURACY: (u64, u64) = (7, 10);
/// Sensitivity must be strictly below this fraction.
pub const PARADOX_MAX_SENSITIVITY: (u64, u64) = (6, 10);
/// Minority class share must be strictly below this fraction.
pub const PARADOX_MAX_MINORITY_SHARE: (u64, u64) = (35, 100);

/// Flags a cutoff whose accuracy looks good only because the majority class
/// dominates: accuracy ≥ 0.7, sensitivity < 0.6 and minority share < 0.35.
pub fn accuracy_paradox_flag<T: Scalar>(row: &MetricsRow<T>, dist: &ScoreDistribution) -> ParadoxCheck {
    let (Some(accuracy), Some(sensitivity)) = (&row.metrics.accuracy, &row.metrics.sensitivity) else {
        return ParadoxCheck {
            flagged: false,
            explanation: format!("cutoff {}: accuracy or sensitivity undefined; rule not applicable", row.cutoff),
        };
    };
    let total = dist.total();
    let minority = dist.n_pos().min(dist.n_neg());
    let frac = |(n, d): (u64, u64)| T::from_ratio(n, d);
    let minority_share: T = if total == 0 { T::zero() } else { T::from_ratio(minority, total) };

    let flagged = *accuracy >= frac(PARADOX_MIN_ACCURACY)
        && *sensitivity < frac(PARADOX_MAX_SENSITIVITY)
        && minority_share < frac(PARADOX_MAX_MINORITY_SHARE);

    let cm = &row.confusion;
    let pct = |n: u64, d: u64| decimal::or_undefined(decimal::ratio(100 * n, d, 2));
    let acc_pct = pct(cm.tp + cm.tn, cm.total());
    let sens_pct = pct(cm.tp, cm.n_pos());
    let share_pct = pct(minority, total);
    let explanation = if flagged {
        format!(
            "cutoff {}: accuracy {acc_pct}% looks acceptable but sensitivity is only {sens_pct}%; \
             the minority class is {share_pct}% of cases, so accuracy mostly reflects the majority class",
            row.cutoff
        )
    } else {
        format!(
            "cutoff {}: accuracy {acc_pct}%, sensitivity {sens_pct}%, minority share {share_pct}%; no paradox",
            row.cutoff
        )
    };
    ParadoxCheck { flagged, explanation }
}
