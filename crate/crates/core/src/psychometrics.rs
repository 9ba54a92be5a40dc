//! Design-stage statistics for an item scale: internal consistency
//! (Cronbach's alpha), mean-score comparison between outcome groups (pooled
//! two-sample t), and per-item frequency tests (Pearson chi-squared).
//!
//! Significance is decided against fixed 0.05 critical-value tables; no p-values
//! are computed.

use serde::Serialize;
use thiserror::Error;

use crate::label::Label;
use crate::scalar::Scalar;
use crate::scale::ScaleDefinition;

/// Note attached to every t-test report.
pub const T_TEST_ASSUMPTION_NOTE: &str = "pooled-variance Student t; assumes both groups are roughly normal with equal variances, which was not verified for this data";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PsychError {
    #[error("matrix row {row} has {found} cells, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("row {row}, item {item}: {points} points exceeds maximum {max_points}")]
    CellOutOfRange { row: usize, item: usize, points: u8, max_points: u8 },
    #[error("matrix has {found} item columns; the scale defines {expected}")]
    ItemCount { found: usize, expected: usize },
    #[error("need at least {needed} {what}, got {found}")]
    TooFew { what: &'static str, needed: usize, found: usize },
    #[error("total-score variance is zero")]
    ZeroTotalVariance,
    #[error("pooled variance is zero while group means differ")]
    ZeroPooledVariance,
    #[error("non-finite value in group {0}")]
    NonFinite(&'static str),
    #[error("contingency table needs at least 2 columns (degrees of freedom would be 0)")]
    DegreesOfFreedom,
    #[error("contingency table has a zero row or column total")]
    ZeroMargin,
    #[error("both severe and non-severe rows are required")]
    SingleLabel,
}

impl PsychError {
    pub fn code(&self) -> &'static str {
        match self {
            PsychError::Ragged { .. } => "ragged-matrix",
            PsychError::LabelCount { .. } => "label-count",
            PsychError::CellOutOfRange { .. } => "cell-out-of-range",
            PsychError::ItemCount { .. } => "item-count",
            PsychError::TooFew { .. } => "too-few",
            PsychError::ZeroTotalVariance => "zero-total-variance",
            PsychError::ZeroPooledVariance => "zero-pooled-variance",
            PsychError::NonFinite(_) => "non-finite",
            PsychError::DegreesOfFreedom => "degrees-of-freedom",
            PsychError::ZeroMargin => "zero-margin",
            PsychError::SingleLabel => "single-label",
        }
    }
}

/// Cases × items point matrix with one outcome label per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    rows: Vec<Vec<u8>>,
    labels: Vec<Label>,
    items: usize,
}

impl ResponseMatrix {
    pub fn new(rows: Vec<Vec<u8>>, labels: Vec<Label>) -> Result<Self, PsychError> {
        if rows.len() != labels.len() {
            return Err(PsychError::LabelCount { rows: rows.len(), labels: labels.len() });
        }
        let items = rows.first().map_or(0, Vec::len);
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != items) {
            return Err(PsychError::Ragged { row, found: r.len(), expected: items });
        }
        Ok(Self { rows, labels, items })
    }

    /// Checks the column count and every cell against the scale's maxima.
    pub fn validate_against(&self, scale: &ScaleDefinition) -> Result<(), PsychError> {
        let maxima = scale.max_points();
        if self.items != maxima.len() && !self.rows.is_empty() {
            return Err(PsychError::ItemCount { found: self.items, expected: maxima.len() });
        }
        for (row, cells) in self.rows.iter().enumerate() {
            for (item, (&points, &max_points)) in cells.iter().zip(&maxima).enumerate() {
                if points > max_points {
                    return Err(PsychError::CellOutOfRange { row, item: item + 1, points, max_points });
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn item_count(&self) -> usize {
        self.items
    }

    pub fn case_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, item: usize) -> Vec<u8> {
        self.rows.iter().map(|r| r[item]).collect()
    }

    pub fn totals(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.iter().map(|&p| u32::from(p)).sum()).collect()
    }

    /// Row totals of the cases carrying `label`.
    pub fn group_totals(&self, label: Label) -> Vec<u32> {
        self.totals()
            .into_iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == label)
            .map(|(t, _)| t)
            .collect()
    }

    /// Same matrix with the item columns reordered so that new column `j` is
    /// old column `order[j]`.
    pub fn permute_items(&self, order: &[usize]) -> Self {
        let rows = self.rows.iter().map(|r| order.iter().map(|&j| r[j]).collect()).collect();
        Self { rows, labels: self.labels.clone(), items: order.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport<T> {
    pub statistic: T,
    pub degrees_of_freedom: u64,
    pub critical_value_05: f64,
    pub significant_at_05: bool,
    pub assumption_notes: Vec<String>,
}

impl<T: Scalar> TestReport<T> {
    fn new(statistic: T, dof: u64, critical: f64, two_sided: bool) -> Self {
        let magnitude = if two_sided { statistic.abs_value() } else { statistic.clone() };
        let significant_at_05 = magnitude.to_f64_lossy() > critical;
        Self {
            statistic,
            degrees_of_freedom: dof,
            critical_value_05: critical,
            significant_at_05,
            assumption_notes: Vec::new(),
        }
    }
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    let sum = xs.iter().cloned().fold(T::zero(), |acc, x| acc + x);
    sum / T::from_count(xs.len() as u64)
}

/// Sample variance with the n − 1 denominator.
fn sample_variance<T: Scalar>(xs: &[T]) -> T {
    let m = mean(xs);
    let ss = xs.iter().fold(T::zero(), |acc, x| {
        let d = x.clone() - m.clone();
        acc + d.clone() * d
    });
    ss / T::from_count(xs.len() as u64 - 1)
}

/// Cronbach's alpha of the matrix's item columns.
pub fn cronbach_alpha<T: Scalar>(matrix: &ResponseMatrix) -> Result<T, PsychError> {
    let columns: Vec<Vec<T>> = (0..matrix.item_count())
        .map(|j| matrix.column(j).into_iter().map(|p| T::from_count(u64::from(p))).collect())
        .collect();
    cronbach_alpha_columns(&columns)
}

/// Cronbach's alpha over item columns of equal length.
pub fn cronbach_alpha_columns<T: Scalar>(columns: &[Vec<T>]) -> Result<T, PsychError> {
    let k = columns.len();
    if k < 2 {
        return Err(PsychError::TooFew { what: "items", needed: 2, found: k });
    }
    let n = columns[0].len();
    if let Some((row, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
        return Err(PsychError::Ragged { row, found: c.len(), expected: n });
    }
    if n < 2 {
        return Err(PsychError::TooFew { what: "cases", needed: 2, found: n });
    }
    let totals: Vec<T> = (0..n)
        .map(|i| columns.iter().fold(T::zero(), |acc, c| acc + c[i].clone()))
        .collect();
    let total_var = sample_variance(&totals);
    if total_var == T::zero() {
        return Err(PsychError::ZeroTotalVariance);
    }
    let item_var_sum = columns.iter().fold(T::zero(), |acc, c| acc + sample_variance(c));
    let k_t = T::from_count(k as u64);
    Ok(k_t.clone() / (k_t - T::one()) * (T::one() - item_var_sum / total_var))
}

/// Pooled-variance two-sample Student t test of `mean(a) − mean(b)`.
pub fn two_sample_t<T: Scalar>(group_a: &[T], group_b: &[T]) -> Result<TestReport<T>, PsychError> {
    for (name, group) in [("a", group_a), ("b", group_b)] {
        if group.len() < 2 {
            return Err(PsychError::TooFew { what: "values per group", needed: 2, found: group.len() });
        }
        if group.iter().any(|x| !x.to_f64_lossy().is_finite()) {
            return Err(PsychError::NonFinite(name));
        }
    }
    let (na, nb) = (group_a.len() as u64, group_b.len() as u64);
    let dof = na + nb - 2;
    let diff = mean(group_a) - mean(group_b);
    let pooled = (T::from_count(na - 1) * sample_variance(group_a)
        + T::from_count(nb - 1) * sample_variance(group_b))
        / T::from_count(dof);

    let statistic = if pooled == T::zero() {
        if diff != T::zero() {
            return Err(PsychError::ZeroPooledVariance);
        }
        T::zero()
    } else {
        let se2 = pooled * (T::one() / T::from_count(na) + T::one() / T::from_count(nb));
        diff / se2.sqrt()
    };

    let mut report = TestReport::new(statistic, dof, t_critical_05(dof), true);
    report.assumption_notes.push(T_TEST_ASSUMPTION_NOTE.to_string());
    Ok(report)
}

/// 2 × k contingency table of counts. Row 0 is conventionally the severe group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    rows: [Vec<u64>; 2],
}

impl ContingencyTable {
    pub fn new(first: Vec<u64>, second: Vec<u64>) -> Result<Self, PsychError> {
        if first.len() != second.len() {
            return Err(PsychError::Ragged { row: 1, found: second.len(), expected: first.len() });
        }
        Ok(Self { rows: [first, second] })
    }

    pub fn rows(&self) -> &[Vec<u64>; 2] {
        &self.rows
    }

    pub fn columns(&self) -> usize {
        self.rows[0].len()
    }
}

/// Pearson chi-squared statistic of a 2 × k table, dof (2 − 1)(k − 1).
pub fn chi_squared<T: Scalar>(table: &ContingencyTable) -> Result<TestReport<T>, PsychError> {
    let k = table.columns();
    if k < 2 {
        return Err(PsychError::DegreesOfFreedom);
    }
    let row_totals: Vec<u64> = table.rows.iter().map(|r| r.iter().sum()).collect();
    let col_totals: Vec<u64> = (0..k).map(|j| table.rows[0][j] + table.rows[1][j]).collect();
    if row_totals.contains(&0) || col_totals.contains(&0) {
        return Err(PsychError::ZeroMargin);
    }
    let n = T::from_count(row_totals.iter().sum());
    let mut statistic = T::zero();
    for (i, row) in table.rows.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = T::from_count(row_totals[i]) * T::from_count(col_totals[j]) / n.clone();
            let d = T::from_count(observed) - expected.clone();
            statistic = statistic + d.clone() * d / expected;
        }
    }
    let dof = (k - 1) as u64;
    Ok(TestReport::new(statistic, dof, chi2_critical_05(dof), false))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemDiscrimination<T> {
    pub item_id: u8,
    pub report: TestReport<T>,
    /// Share of severe cases answering the item affirmatively (points > 0).
    pub severe_rate: T,
    pub non_severe_rate: T,
    /// `severe_rate − non_severe_rate`.
    pub rate_gap: T,
}

/// Per-item 2 × 2 chi-squared of affirmative responses by outcome group,
/// ranked by statistic (descending, ties by item id).
///
/// An item that is constant across all cases carries no information and is
/// reported with statistic 0 rather than as an error.
pub fn item_discrimination<T: Scalar>(
    matrix: &ResponseMatrix,
) -> Result<Vec<ItemDiscrimination<T>>, PsychError> {
    let n_severe = matrix.labels.iter().filter(|l| l.is_severe()).count() as u64;
    let n_non = matrix.labels.len() as u64 - n_severe;
    if n_severe == 0 || n_non == 0 {
        return Err(PsychError::SingleLabel);
    }

    let mut out = Vec::with_capacity(matrix.item_count());
    for j in 0..matrix.item_count() {
        let (mut yes_severe, mut yes_non) = (0u64, 0u64);
        for (row, label) in matrix.rows.iter().zip(&matrix.labels) {
            if row[j] > 0 {
                match label {
                    Label::Severe => yes_severe += 1,
                    Label::NonSevere => yes_non += 1,
                }
            }
        }
        let table = ContingencyTable::new(
            vec![yes_severe, n_severe - yes_severe],
            vec![yes_non, n_non - yes_non],
        )?;
        let report = match chi_squared::<T>(&table) {
            Ok(report) => report,
            Err(PsychError::ZeroMargin) => {
                let mut report = TestReport::new(T::zero(), 1, chi2_critical_05(1), false);
                report.assumption_notes.push("item is constant across all cases".to_string());
                report
            }
            Err(e) => return Err(e),
        };
        let severe_rate = T::from_ratio(yes_severe, n_severe);
        let non_severe_rate = T::from_ratio(yes_non, n_non);
        out.push(ItemDiscrimination {
            item_id: (j + 1) as u8,
            report,
            rate_gap: severe_rate.clone() - non_severe_rate.clone(),
            severe_rate,
            non_severe_rate,
        });
    }
    out.sort_by(|a, b| {
        b.report
            .statistic
            .partial_cmp(&a.report.statistic)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.item_id.cmp(&b.item_id))
    });
    Ok(out)
}

/// Everything the design-stage analysis reports for one matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsychometricSummary<T> {
    pub cases: usize,
    pub severe_cases: usize,
    pub cronbach_alpha: T,
    pub total_score_t: TestReport<T>,
    pub items: Vec<ItemDiscrimination<T>>,
}

pub fn summarize<T: Scalar>(matrix: &ResponseMatrix) -> Result<PsychometricSummary<T>, PsychError> {
    let to_t = |xs: Vec<u32>| xs.into_iter().map(|x| T::from_count(u64::from(x))).collect::<Vec<T>>();
    let severe = to_t(matrix.group_totals(Label::Severe));
    let non_severe = to_t(matrix.group_totals(Label::NonSevere));
    Ok(PsychometricSummary {
        cases: matrix.case_count(),
        severe_cases: severe.len(),
        cronbach_alpha: cronbach_alpha(matrix)?,
        total_score_t: two_sample_t(&severe, &non_severe)?,
        items: item_discrimination(matrix)?,
    })
}

/// Two-tailed 0.05 critical values of Student's t for df 1..=30.
const T_TABLE: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];
const T_TAIL: [(u64, f64); 3] = [(40, 2.021), (60, 2.000), (120, 1.980)];
const T_INFINITE: f64 = 1.960;

/// Upper 0.05 critical values of chi-squared for df 1..=30.
const CHI2_TABLE: [f64; 30] = [
    3.841, 5.991, 7.815, 9.488, 11.070, 12.592, 14.067, 15.507, 16.919, 18.307, 19.675, 21.026,
    22.362, 23.685, 24.996, 26.296, 27.587, 28.869, 30.144, 31.410, 32.671, 33.924, 35.172,
    36.415, 37.652, 38.885, 40.113, 41.337, 42.557, 43.773,
];
const CHI2_TAIL: [(u64, f64); 5] = [(40, 55.758), (50, 67.505), (60, 79.082), (80, 101.879), (100, 124.342)];

/// Table lookup; between tabulated rows the value is interpolated linearly in 1/df.
pub fn t_critical_05(dof: u64) -> f64 {
    assert!(dof > 0, "degrees of freedom must be positive");
    if dof <= 30 {
        return T_TABLE[dof as usize - 1];
    }
    let mut prev = (30u64, T_TABLE[29]);
    for &(d, v) in &T_TAIL {
        if dof <= d {
            return interpolate_inverse(prev, (d, v), dof);
        }
        prev = (d, v);
    }
    // between 120 and infinity: 1/df runs from 1/120 down to 0
    let w = 120.0 / dof as f64;
    T_INFINITE + (prev.1 - T_INFINITE) * w
}

/// Table lookup with linear interpolation up to df 100 and the Wilson–Hilferty
/// approximation beyond.
pub fn chi2_critical_05(dof: u64) -> f64 {
    assert!(dof > 0, "degrees of freedom must be positive");
    if dof <= 30 {
        return CHI2_TABLE[dof as usize - 1];
    }
    let mut prev = (30u64, CHI2_TABLE[29]);
    for &(d, v) in &CHI2_TAIL {
        if dof <= d {
            let frac = (dof - prev.0) as f64 / (d - prev.0) as f64;
            return prev.1 + (v - prev.1) * frac;
        }
        prev = (d, v);
    }
    let k = dof as f64;
    let z = 1.644_853_626_951_472_2;
    let c = 2.0 / (9.0 * k);
    k * (1.0 - c + z * c.sqrt()).powi(3)
}

fn interpolate_inverse(lo: (u64, f64), hi: (u64, f64), dof: u64) -> f64 {
    let (x0, x1, x) = (1.0 / lo.0 as f64, 1.0 / hi.0 as f64, 1.0 / dof as f64);
    lo.1 + (hi.1 - lo.1) * (x0 - x) / (x0 - x1)
}
