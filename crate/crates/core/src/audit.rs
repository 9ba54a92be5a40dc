//! Audit reports over a score distribution, and per-case disclosure blocks.
//!
//! Every number in a report is copied from a module output and each section
//! names the operation that produced it in its `source` field.

use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::cohort::{anchor_points, ANCHOR_MAX_TOTAL};
use crate::decimal;
use crate::metrics::{self, DecimalRow, MetricsError, ScoreDistribution};
use crate::scale::{ScaleDefinition, ScaleId, ScoreResult, ScoreWarning, Tier, TierBounds};
use crate::Scalar;

pub const SCHEMA_VERSION: &str = "1";

/// Shown with every tier, complete assessment or not.
pub const RELATIVE_RISK_BANNER: &str = "Tiers express risk relative to reported population: \
the score ranks this case among cases that were reported, and is not an absolute probability \
of severe violence.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("cost ratio must be a finite number > 0, got {0}")]
    NonPositiveCostRatio(String),
    #[error("distribution covers totals 0..={found} but the scale maximum is {expected}")]
    ScaleMismatch { found: u32, expected: u32 },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl AuditError {
    pub fn code(&self) -> &'static str {
        match self {
            AuditError::NonPositiveCostRatio(_) => "non-positive-cost-ratio",
            AuditError::ScaleMismatch { .. } => "scale-mismatch",
            AuditError::Metrics(e) => e.code(),
        }
    }
}

/// Where the audited distribution came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CohortOrigin {
    /// The reconstruction from published operating points.
    Anchors,
    /// A user-supplied cohort file.
    Upload { name: String },
    Synthetic { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScaleSummary {
    pub scale_id: ScaleId,
    pub name: String,
    pub items: usize,
    pub max_total: u32,
    pub tier_bounds: TierBounds,
    pub notice: Option<String>,
}

impl ScaleSummary {
    fn of(scale: &ScaleDefinition) -> Self {
        Self {
            scale_id: scale.scale_id(),
            name: scale.name().to_string(),
            items: scale.items().len(),
            max_total: scale.max_total(),
            tier_bounds: scale.tier_bounds(),
            notice: scale.notice().map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CohortSummary {
    pub origin: CohortOrigin,
    pub severe: u64,
    pub non_severe: u64,
    pub total: u64,
    pub source: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepSection {
    pub rows: Vec<DecimalRow>,
    pub auc: String,
    pub source: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutoffFlags {
    pub cutoff: u32,
    /// `fn > tp`: more severe cases missed than caught.
    pub fn_majority: bool,
    pub accuracy_paradox: bool,
    pub paradox_explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlagSection {
    pub per_cutoff: Vec<CutoffFlags>,
    pub fn_majority_cutoffs: Vec<u32>,
    pub accuracy_paradox_cutoffs: Vec<u32>,
    pub source: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostRow {
    pub cutoff: u32,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub expected_cost: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostSection {
    pub cost_ratio: String,
    pub rows: Vec<CostRow>,
    /// Lowest cutoff among those with minimal expected cost.
    pub minimizing_cutoff: u32,
    pub minimum_cost: String,
    pub source: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProvenanceNote {
    pub subject: String,
    pub note: String,
}

/// Per-case disclosure: completeness, imputation, tier and the banner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseDisclosure {
    pub answered_items: usize,
    pub item_count: usize,
    pub missing_items: Vec<u8>,
    pub imputation_applied: bool,
    pub answered_points: u32,
    pub total: u32,
    pub max_total: u32,
    pub completeness: String,
    pub low_completeness: bool,
    pub tier: Tier,
    pub tier_bounds: TierBounds,
    pub banner: &'static str,
    pub notice: Option<String>,
    pub text: String,
}

impl fmt::Display for CaseDisclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn tier_ranges(bounds: TierBounds, max_total: u32) -> String {
    format!(
        "low 0-{}, moderate {}-{}, high {}-{}",
        bounds.low_max,
        bounds.low_max + 1,
        bounds.moderate_max,
        bounds.moderate_max + 1,
        max_total
    )
}

fn join_ids(ids: &[u8]) -> String {
    ids.iter().map(u8::to_string).collect::<Vec<_>>().join(", ")
}

/// Builds the disclosure block for one scored case. Never empty, including
/// for complete assessments.
pub fn case_disclosure(result: &ScoreResult, scale: &ScaleDefinition) -> CaseDisclosure {
    let missing = result.missing_items();
    let answered = result.answered_items();
    let count = result.contributions.len();
    let imputed = result.imputed();
    let low = result.has_warning(ScoreWarning::LowCompleteness);
    let completeness = decimal::ratio(
        u64::from(*result.completeness.numer()),
        u64::from(*result.completeness.denom()),
        decimal::PLACES,
    )
    .expect("completeness denominator is non-zero");

    let mut text = String::new();
    if imputed {
        let _ = writeln!(text, "Items: {answered}/{count} items answered; missing items: {}", join_ids(&missing));
        let _ = writeln!(
            text,
            "Imputation: applied; {} of {} answerable points scored, prorated total {} of {}",
            result.answered_points, result.answered_max, result.imputed_total, result.max_total
        );
    } else {
        let _ = writeln!(text, "Items: {answered}/{count} items answered; no imputation");
        let _ = writeln!(text, "Total: {} of {}", result.imputed_total, result.max_total);
    }
    if low {
        let _ = writeln!(text, "Warning: low completeness ({completeness} of items answered)");
    }
    let bounds = scale.tier_bounds();
    let _ = writeln!(text, "Tier: {} ({})", result.tier, tier_ranges(bounds, scale.max_total()));
    let _ = writeln!(text, "Note: {RELATIVE_RISK_BANNER}");
    if let Some(notice) = scale.notice() {
        let _ = writeln!(text, "Scale notice: {notice}");
    }

    CaseDisclosure {
        answered_items: answered,
        item_count: count,
        missing_items: missing,
        imputation_applied: imputed,
        answered_points: result.answered_points,
        total: result.imputed_total,
        max_total: result.max_total,
        completeness,
        low_completeness: low,
        tier: result.tier,
        tier_bounds: bounds,
        banner: RELATIVE_RISK_BANNER,
        notice: scale.notice().map(str::to_string),
        text,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseEntry {
    pub case_id: String,
    pub disclosure: CaseDisclosure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub schema_version: &'static str,
    pub scale: ScaleSummary,
    pub cohort: CohortSummary,
    pub sweep: SweepSection,
    pub flags: FlagSection,
    pub cost: CostSection,
    pub cases: Vec<CaseEntry>,
    pub provenance: Vec<ProvenanceNote>,
}

fn exact_cost_ratio(cost_ratio: f64) -> Result<BigRational, AuditError> {
    match BigRational::from_f64(cost_ratio) {
        Some(r) if cost_ratio.is_finite() && r > BigRational::zero() => Ok(r),
        _ => Err(AuditError::NonPositiveCostRatio(cost_ratio.to_string())),
    }
}

fn cost_section(rows: &[DecimalRow], cost_ratio: f64) -> Result<CostSection, AuditError> {
    let ratio = exact_cost_ratio(cost_ratio)?;
    let costs: Vec<BigRational> = rows
        .iter()
        .map(|r| ratio.clone() * BigInt::from(r.fn_) + BigInt::from(r.fp))
        .collect();
    let (best, min) = costs
        .iter()
        .enumerate()
        .fold(None::<(usize, &BigRational)>, |acc, (i, c)| match acc {
            Some((_, m)) if c >= m => acc,
            _ => Some((i, c)),
        })
        .expect("a sweep always has rows");
    Ok(CostSection {
        cost_ratio: ratio.to_decimal(decimal::PLACES),
        rows: rows
            .iter()
            .zip(&costs)
            .map(|(r, c)| CostRow { cutoff: r.cutoff, fn_: r.fn_, fp: r.fp, expected_cost: c.to_decimal(decimal::PLACES) })
            .collect(),
        minimizing_cutoff: rows[best].cutoff,
        minimum_cost: min.to_decimal(decimal::PLACES),
        source: "cost_ratio * fn + fp per sweep row",
    })
}

fn provenance(origin: &CohortOrigin, dist: &ScoreDistribution) -> Vec<ProvenanceNote> {
    let mut notes = Vec::new();
    match origin {
        CohortOrigin::Anchors => {
            for anchor in anchor_points() {
                notes.push(ProvenanceNote {
                    subject: format!("anchor at cutoff {}", anchor.cutoff),
                    note: format!(
                        "{}; reproduced as {} severe and {} non-severe at or above the cutoff",
                        anchor.provenance, anchor.severe_at_or_above, anchor.non_severe_at_or_above
                    ),
                });
            }
            debug_assert_eq!(dist.max_total(), ANCHOR_MAX_TOTAL);
            notes.push(ProvenanceNote {
                subject: "between anchors".into(),
                note: "per-score counts between published operating points are spread evenly, \
                       remainder to the lower scores; they are a reconstruction, not observed data"
                    .into(),
            });
        }
        CohortOrigin::Upload { name } => notes.push(ProvenanceNote {
            subject: "cohort".into(),
            note: format!("uploaded cohort '{name}'; counts tallied from its rows"),
        }),
        CohortOrigin::Synthetic { seed } => notes.push(ProvenanceNote {
            subject: "cohort".into(),
            note: format!("synthetic cohort generated with seed {seed}; not observed data"),
        }),
    }
    notes
}

/// Builds the audit for one distribution at a user-supplied FN:FP cost ratio.
pub fn build_audit(
    dist: &ScoreDistribution,
    scale: &ScaleDefinition,
    origin: CohortOrigin,
    cost_ratio: f64,
) -> Result<AuditReport, AuditError> {
    if dist.max_total() != scale.max_total() {
        return Err(AuditError::ScaleMismatch { found: dist.max_total(), expected: scale.max_total() });
    }
    let exact_rows = metrics::sweep::<BigRational>(dist)?;
    let auc = metrics::auc(&exact_rows)?.to_decimal(decimal::PLACES);
    let rows = metrics::decimal_sweep(dist)?;
    let cost = cost_section(&rows, cost_ratio)?;

    let per_cutoff: Vec<CutoffFlags> = exact_rows
        .iter()
        .map(|row| {
            let paradox = metrics::accuracy_paradox_flag(row, dist);
            CutoffFlags {
                cutoff: row.cutoff,
                fn_majority: row.confusion.fn_majority(),
                accuracy_paradox: paradox.flagged,
                paradox_explanation: paradox.explanation,
            }
        })
        .collect();
    let flags = FlagSection {
        fn_majority_cutoffs: per_cutoff.iter().filter(|f| f.fn_majority).map(|f| f.cutoff).collect(),
        accuracy_paradox_cutoffs: per_cutoff.iter().filter(|f| f.accuracy_paradox).map(|f| f.cutoff).collect(),
        per_cutoff,
        source: "fn > tp and the accuracy-paradox rule, per sweep row",
    };

    Ok(AuditReport {
        schema_version: SCHEMA_VERSION,
        scale: ScaleSummary::of(scale),
        cohort: CohortSummary {
            origin: origin.clone(),
            severe: dist.n_pos(),
            non_severe: dist.n_neg(),
            total: dist.total(),
            source: "score distribution class totals",
        },
        sweep: SweepSection { rows, auc, source: "cutoff sweep over the distribution; AUC by trapezoid over (fpr, tpr)" },
        flags,
        cost,
        cases: Vec::new(),
        provenance: provenance(&origin, dist),
    })
}

impl AuditReport {
    /// Attaches a disclosure block for one scored case.
    pub fn add_case(&mut self, case_id: impl Into<String>, result: &ScoreResult, scale: &ScaleDefinition) {
        self.cases.push(CaseEntry { case_id: case_id.into(), disclosure: case_disclosure(result, scale) });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// Human-readable Markdown rendering of the same content.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let s = &self.scale;
        let _ = writeln!(out, "# Audit report: {}\n", s.name);
        let _ = writeln!(out, "Schema version: {}\n", self.schema_version);
        let _ = writeln!(out, "## Scale\n");
        let _ = writeln!(out, "- {} items, totals 0-{}", s.items, s.max_total);
        let _ = writeln!(out, "- Tiers: {}", tier_ranges(s.tier_bounds, s.max_total));
        if let Some(notice) = &s.notice {
            let _ = writeln!(out, "- Notice: {notice}");
        }

        let c = &self.cohort;
        let _ = writeln!(out, "\n## Cohort\n");
        let _ = writeln!(out, "- {} cases: {} severe, {} non-severe ({})", c.total, c.severe, c.non_severe, c.source);

        let _ = writeln!(out, "\n## Cutoff sweep\n");
        let _ = writeln!(out, "Source: {}. AUC {}.\n", self.sweep.source, self.sweep.auc);
        let _ = writeln!(out, "| cutoff | tp | fn | fp | tn | sensitivity | specificity | accuracy | precision | expected cost | flags |");
        let _ = writeln!(out, "|---|---|---|---|---|---|---|---|---|---|---|");
        for ((row, cost), flags) in self.sweep.rows.iter().zip(&self.cost.rows).zip(&self.flags.per_cutoff) {
            let mut marks = Vec::new();
            if flags.fn_majority {
                marks.push("FN-majority");
            }
            if flags.accuracy_paradox {
                marks.push("accuracy-paradox");
            }
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                row.cutoff, row.tp, row.fn_, row.fp, row.tn, row.sensitivity, row.specificity,
                row.accuracy, row.precision, cost.expected_cost, marks.join(", ")
            );
        }

        let _ = writeln!(out, "\n## Flags\n");
        let _ = writeln!(out, "Source: {}.\n", self.flags.source);
        let _ = writeln!(out, "- FN-majority (fn > tp) at cutoffs: {}", list_or_none(&self.flags.fn_majority_cutoffs));
        let _ = writeln!(out, "- Accuracy paradox at cutoffs: {}", list_or_none(&self.flags.accuracy_paradox_cutoffs));
        for f in self.flags.per_cutoff.iter().filter(|f| f.accuracy_paradox) {
            let _ = writeln!(out, "  - {}", f.paradox_explanation);
        }

        let _ = writeln!(out, "\n## Cost analysis\n");
        let _ = writeln!(out, "Source: {}.\n", self.cost.source);
        let _ = writeln!(
            out,
            "At FN:FP cost ratio {}, the lowest expected cost is {} at cutoff {}.",
            self.cost.cost_ratio, self.cost.minimum_cost, self.cost.minimizing_cutoff
        );

        if !self.cases.is_empty() {
            let _ = writeln!(out, "\n## Cases");
            for case in &self.cases {
                let _ = writeln!(out, "\n### {}\n", case.case_id);
                for line in case.disclosure.text.lines() {
                    let _ = writeln!(out, "    {line}");
                }
            }
        }

        let _ = writeln!(out, "\n## Provenance\n");
        for note in &self.provenance {
            let _ = writeln!(out, "- {}: {}", note.subject, note.note);
        }
        out
    }
}

fn list_or_none(cutoffs: &[u32]) -> String {
    if cutoffs.is_empty() {
        "none".into()
    } else {
        cutoffs.iter().map(u32::to_string).collect::<Vec<_>>().join(", ")
    }
}

/// Plot data: `cutoff,sensitivity,specificity,accuracy`.
pub fn cutoff_curve_csv(dist: &ScoreDistribution) -> Result<String, AuditError> {
    let mut out = String::from("cutoff,sensitivity,specificity,accuracy\n");
    for r in metrics::decimal_sweep(dist)? {
        let _ = writeln!(out, "{},{},{},{}", r.cutoff, r.sensitivity, r.specificity, r.accuracy);
    }
    Ok(out)
}

/// Plot data: `cutoff,fpr,tpr`, one ROC point per cutoff.
pub fn roc_csv(dist: &ScoreDistribution) -> Result<String, AuditError> {
    let mut out = String::from("cutoff,fpr,tpr\n");
    for r in metrics::decimal_sweep(dist)? {
        let _ = writeln!(out, "{},{},{}", r.cutoff, r.fpr, r.sensitivity);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::reconstruct_anchor_cohort;
    use crate::scale::{score_responses, ItemResponse};

    fn anchors_audit(cost_ratio: f64) -> AuditReport {
        build_audit(&reconstruct_anchor_cohort(), &ScaleDefinition::epv(), CohortOrigin::Anchors, cost_ratio).unwrap()
    }

    fn brute_force_best(dist: &ScoreDistribution, ratio: u64) -> u32 {
        (0..=dist.cutoff_limit())
            .min_by_key(|&k| {
                let cm = metrics::confusion(dist, k).unwrap();
                (ratio * cm.fn_ + cm.fp, k)
            })
            .unwrap()
    }

    #[test]
    fn fn_majority_at_ten() {
        let report = anchors_audit(1.0);
        let at_10 = &report.flags.per_cutoff[10];
        assert!(at_10.fn_majority);
        assert_eq!((report.sweep.rows[10].fn_, report.sweep.rows[10].tp), (140, 129));
        for (f, r) in report.flags.per_cutoff.iter().zip(&report.sweep.rows) {
            assert_eq!(f.fn_majority, r.fn_ > r.tp);
        }
    }

    #[test]
    fn cost_minimum_matches_exhaustive_scan() {
        let dist = reconstruct_anchor_cohort();
        for ratio in [1u64, 2, 3, 5, 10] {
            let report = anchors_audit(ratio as f64);
            assert_eq!(report.cost.minimizing_cutoff, brute_force_best(&dist, ratio), "ratio {ratio}");
            assert_eq!(report.cost.rows.len(), 22);
        }
        let report = anchors_audit(1.0);
        let cm = metrics::confusion(&dist, report.cost.minimizing_cutoff).unwrap();
        assert_eq!(report.cost.minimum_cost, format!("{}.000000", cm.fn_ + cm.fp));
    }

    #[test]
    fn cost_ratio_must_be_positive() {
        let dist = reconstruct_anchor_cohort();
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            let err = build_audit(&dist, &ScaleDefinition::epv(), CohortOrigin::Anchors, bad).unwrap_err();
            assert_eq!(err.code(), "non-positive-cost-ratio");
        }
    }

    #[test]
    fn scale_must_match_distribution() {
        let err = build_audit(&reconstruct_anchor_cohort(), &ScaleDefinition::epv_r(), CohortOrigin::Anchors, 1.0).unwrap_err();
        assert_eq!(err, AuditError::ScaleMismatch { found: 20, expected: 34 });
    }

    #[test]
    fn reports_are_deterministic_and_versioned() {
        let (a, b) = (anchors_audit(3.0), anchors_audit(3.0));
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_markdown(), b.to_markdown());
        let json: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(json["schema_version"], "1");
        assert_eq!(json["sweep"]["rows"][10]["sensitivity"], "0.479554");
        assert!(a.to_markdown().contains("Schema version: 1"));
        assert_eq!(a.provenance.len(), 6);
    }

    #[test]
    fn complete_assessment_disclosure() {
        let scale = ScaleDefinition::epv();
        let responses: Vec<_> = (1..=20).map(|i| ItemResponse::answered(i, u8::from(i <= 2))).collect();
        let d = case_disclosure(&score_responses(&scale, &responses).unwrap(), &scale);
        assert!(d.text.contains("20/20 items answered; no imputation"));
        assert!(d.text.contains("Tier: low (low 0-4, moderate 5-9, high 10-20)"));
        assert!(d.text.contains("risk relative to reported population"));
        assert!(d.missing_items.is_empty());
    }

    #[test]
    fn imputed_assessment_disclosure() {
        let scale = ScaleDefinition::epv();
        let responses: Vec<_> = (1..=20u8)
            .map(|i| if i % 2 == 0 { ItemResponse::missing(i) } else { ItemResponse::answered(i, u8::from(i <= 7)) })
            .collect();
        let result = score_responses(&scale, &responses).unwrap();
        let d = case_disclosure(&result, &scale);
        assert_eq!(d.missing_items, vec![2, 4, 6, 8, 10, 12, 14, 16, 18, 20]);
        assert_eq!(d.total, 8);
        assert!(d.imputation_applied && d.low_completeness);
        assert!(d.text.contains("missing items: 2, 4, 6, 8, 10, 12, 14, 16, 18, 20"));
        assert!(d.text.contains("prorated total 8 of 20"));
    }

    #[test]
    fn graded_scale_notice_is_disclosed() {
        let scale = ScaleDefinition::epv_r();
        let responses: Vec<_> = (1..=20).map(|i| ItemResponse::answered(i, 1)).collect();
        let d = case_disclosure(&score_responses(&scale, &responses).unwrap(), &scale);
        assert!(d.notice.is_some());
        assert!(d.text.contains("Scale notice:"));
    }

    #[test]
    fn plot_data() {
        let dist = reconstruct_anchor_cohort();
        let curve = cutoff_curve_csv(&dist).unwrap();
        assert_eq!(curve.lines().count(), 23);
        assert_eq!(curve.lines().nth(11).unwrap(), "10,0.479554,0.814039,0.730805");
        let roc = roc_csv(&dist).unwrap();
        assert_eq!(roc.lines().nth(1).unwrap(), "0,1.000000,1.000000");
        assert_eq!(roc.lines().last().unwrap(), "21,0.000000,0.000000");
    }
}
