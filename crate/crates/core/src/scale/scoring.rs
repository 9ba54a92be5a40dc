use std::fmt;

use num_rational::Ratio;
use serde::{Serialize, Serializer};
use thiserror::Error;

use super::{Assessment, ItemResponse, ResponseValue, ScaleDefinition, ITEM_COUNT};
use crate::decimal;

/// Completeness at or below this fraction raises [`ScoreWarning::LowCompleteness`].
pub const LOW_COMPLETENESS_THRESHOLD: (u32, u32) = (3, 4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Low,
    Moderate,
    High,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Low => "low",
            Tier::Moderate => "moderate",
            Tier::High => "high",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreWarning {
    ImputationApplied,
    LowCompleteness,
    AllMissingBlocked,
}

impl ScoreWarning {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreWarning::ImputationApplied => "imputation-applied",
            ScoreWarning::LowCompleteness => "low-completeness",
            ScoreWarning::AllMissingBlocked => "all-missing-blocked",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Contribution {
    pub item_id: u8,
    pub points: Option<u8>,
    pub max_points: u8,
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreResult {
    pub answered_points: u32,
    pub answered_max: u32,
    pub max_total: u32,
    pub imputed_total: u32,
    pub tier: Tier,
    #[serde(serialize_with = "serialize_completeness")]
    pub completeness: Ratio<u32>,
    pub contributions: Vec<Contribution>,
    pub warnings: Vec<ScoreWarning>,
}

fn serialize_completeness<S: Serializer>(value: &Ratio<u32>, s: S) -> Result<S::Ok, S::Error> {
    let rendered = decimal::ratio(u64::from(*value.numer()), u64::from(*value.denom()), decimal::PLACES)
        .expect("completeness denominator is non-zero");
    s.serialize_str(&rendered)
}

impl ScoreResult {
    pub fn missing_items(&self) -> Vec<u8> {
        self.contributions.iter().filter(|c| c.missing).map(|c| c.item_id).collect()
    }

    pub fn answered_items(&self) -> usize {
        self.contributions.iter().filter(|c| !c.missing).count()
    }

    pub fn has_warning(&self, warning: ScoreWarning) -> bool {
        self.warnings.contains(&warning)
    }

    pub fn imputed(&self) -> bool {
        self.has_warning(ScoreWarning::ImputationApplied)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("expected {ITEM_COUNT} responses, got {0}")]
    ResponseCount(usize),
    #[error("response references unknown item {0}")]
    UnknownItem(u8),
    #[error("item {0} answered more than once")]
    DuplicateResponse(u8),
    #[error("item {0} has no response (record it as missing instead)")]
    NoResponse(u8),
    #[error("item {item_id}: {points} points exceeds the item maximum {max_points}")]
    PointsOutOfRange { item_id: u8, points: u8, max_points: u8 },
    #[error("every item is missing; refusing to score (a zero would read as low risk)")]
    AllMissing,
    #[error("total {total} outside 0..={max_total}")]
    TotalOutOfRange { total: u32, max_total: u32 },
}

impl ScoreError {
    pub fn code(&self) -> &'static str {
        match self {
            ScoreError::ResponseCount(_) => "response-count",
            ScoreError::UnknownItem(_) => "unknown-item",
            ScoreError::DuplicateResponse(_) => "duplicate-response",
            ScoreError::NoResponse(_) => "no-response",
            ScoreError::PointsOutOfRange { .. } => "points-out-of-range",
            ScoreError::AllMissing => ScoreWarning::AllMissingBlocked.as_str(),
            ScoreError::TotalOutOfRange { .. } => "total-out-of-range",
        }
    }
}

/// Maps a total onto the scale's tiers.
pub fn classify_tier(total: u32, scale: &ScaleDefinition) -> Result<Tier, ScoreError> {
    let max_total = scale.max_total();
    if total > max_total {
        return Err(ScoreError::TotalOutOfRange { total, max_total });
    }
    let bounds = scale.tier_bounds();
    Ok(if total <= bounds.low_max {
        Tier::Low
    } else if total <= bounds.moderate_max {
        Tier::Moderate
    } else {
        Tier::High
    })
}

pub fn score(scale: &ScaleDefinition, assessment: &Assessment) -> Result<ScoreResult, ScoreError> {
    score_responses(scale, &assessment.responses)
}

/// Scores one response set.
///
/// Missing items are imputed by prorating the answered points over the
/// maximum achievable points: `round_half_up(answered_points * max_total /
/// answered_max)`. Any imputation is always reported in `warnings`.
pub fn score_responses(
    scale: &ScaleDefinition,
    responses: &[ItemResponse],
) -> Result<ScoreResult, ScoreError> {
    let values = validate(scale, responses)?;

    let mut answered_points = 0u32;
    let mut answered_max = 0u32;
    let contributions: Vec<Contribution> = scale
        .items()
        .iter()
        .zip(&values)
        .map(|(item, value)| {
            if let ResponseValue::Answered(p) = value {
                answered_points += u32::from(*p);
                answered_max += u32::from(item.max_points);
            }
            Contribution {
                item_id: item.id,
                points: value.points(),
                max_points: item.max_points,
                missing: value.is_missing(),
            }
        })
        .collect();

    if answered_max == 0 {
        return Err(ScoreError::AllMissing);
    }

    let max_total = scale.max_total();
    let any_missing = answered_max < max_total;
    let imputed_total = if any_missing {
        prorate(answered_points, answered_max, max_total)
    } else {
        answered_points
    };

    let completeness = Ratio::new(answered_max, max_total);
    let mut warnings = Vec::new();
    if any_missing {
        warnings.push(ScoreWarning::ImputationApplied);
    }
    let (tn, td) = LOW_COMPLETENESS_THRESHOLD;
    if completeness <= Ratio::new(tn, td) {
        warnings.push(ScoreWarning::LowCompleteness);
    }

    Ok(ScoreResult {
        answered_points,
        answered_max,
        max_total,
        imputed_total,
        tier: classify_tier(imputed_total, scale)?,
        completeness,
        contributions,
        warnings,
    })
}

fn prorate(points: u32, answered_max: u32, max_total: u32) -> u32 {
    let (p, a, m) = (u64::from(points), u64::from(answered_max), u64::from(max_total));
    ((2 * p * m + a) / (2 * a)) as u32
}

/// Returns response values in item order after checking coverage and ranges.
fn validate(scale: &ScaleDefinition, responses: &[ItemResponse]) -> Result<Vec<ResponseValue>, ScoreError> {
    let mut slots: Vec<Option<ResponseValue>> = vec![None; scale.items().len()];
    for response in responses {
        let item = scale.item(response.item_id).ok_or(ScoreError::UnknownItem(response.item_id))?;
        let slot = &mut slots[usize::from(item.id - 1)];
        if slot.is_some() {
            return Err(ScoreError::DuplicateResponse(item.id));
        }
        if let ResponseValue::Answered(points) = response.points {
            if points > item.max_points {
                return Err(ScoreError::PointsOutOfRange {
                    item_id: item.id,
                    points,
                    max_points: item.max_points,
                });
            }
        }
        *slot = Some(response.points);
    }
    if responses.len() != slots.len() {
        if let Some(idx) = slots.iter().position(Option::is_none) {
            return Err(ScoreError::NoResponse(idx as u8 + 1));
        }
        return Err(ScoreError::ResponseCount(responses.len()));
    }
    Ok(slots.into_iter().map(|s| s.expect("all slots filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn epv() -> ScaleDefinition {
        ScaleDefinition::epv()
    }

    fn run(points: &[Option<u8>]) -> Result<ScoreResult, ScoreError> {
        score(&epv(), &Assessment::from_points("t", points))
    }

    #[test]
    fn all_zero_is_low() {
        let r = run(&[Some(0); 20]).unwrap();
        assert_eq!(r.imputed_total, 0);
        assert_eq!(r.tier, Tier::Low);
        assert!(r.warnings.is_empty());
        assert_eq!(r.completeness, Ratio::new(1, 1));
    }

    #[test]
    fn all_one_is_high() {
        let r = run(&[Some(1); 20]).unwrap();
        assert_eq!(r.imputed_total, 20);
        assert_eq!(r.tier, Tier::High);
    }

    #[test]
    fn ten_is_high() {
        let mut points = [Some(0); 20];
        points[..10].fill(Some(1));
        let r = run(&points).unwrap();
        assert_eq!(r.answered_points, 10);
        assert_eq!(r.imputed_total, 10);
        assert_eq!(r.tier, Tier::High);
    }

    #[test]
    fn prorates_half_missing() {
        // 10 answered items summing 4, 10 missing -> round(4 * 20 / 10) = 8.
        let mut points = [None; 20];
        for (i, slot) in points.iter_mut().take(10).enumerate() {
            *slot = Some(u8::from(i < 4));
        }
        let r = run(&points).unwrap();
        assert_eq!(r.answered_points, 4);
        assert_eq!(r.answered_max, 10);
        assert_eq!(r.imputed_total, 8);
        assert_eq!(r.tier, Tier::Moderate);
        assert_eq!(r.warnings, vec![ScoreWarning::ImputationApplied, ScoreWarning::LowCompleteness]);
        assert_eq!(r.missing_items(), (11..=20).collect::<Vec<u8>>());
        assert_eq!(r.completeness, Ratio::new(1, 2));
    }

    #[test]
    fn prorating_rounds_half_up() {
        // 1 point over 8 answered: 1 * 20 / 8 = 2.5 -> 3
        let mut points = [None; 20];
        points[..8].fill(Some(0));
        points[0] = Some(1);
        assert_eq!(run(&points).unwrap().imputed_total, 3);
        // 1 point over 19 answered: 20/19 = 1.05 -> 1
        let mut points = [Some(0); 20];
        points[19] = None;
        points[0] = Some(1);
        let r = run(&points).unwrap();
        assert_eq!(r.imputed_total, 1);
        assert_eq!(r.warnings, vec![ScoreWarning::ImputationApplied]);
    }

    #[test]
    fn five_missing_items_warn_on_epv() {
        let mut points = [Some(0); 20];
        points[15..].fill(None);
        let r = run(&points).unwrap();
        assert_eq!(r.completeness, Ratio::new(3, 4));
        assert!(r.has_warning(ScoreWarning::LowCompleteness));
        let mut points = [Some(0); 20];
        points[16..].fill(None);
        assert!(!run(&points).unwrap().has_warning(ScoreWarning::LowCompleteness));
    }

    #[test]
    fn all_missing_is_refused() {
        let err = run(&[None; 20]).unwrap_err();
        assert_eq!(err, ScoreError::AllMissing);
        assert_eq!(err.code(), "all-missing-blocked");
    }

    #[test]
    fn tier_boundaries() {
        let scale = epv();
        assert_eq!(classify_tier(0, &scale).unwrap(), Tier::Low);
        assert_eq!(classify_tier(4, &scale).unwrap(), Tier::Low);
        assert_eq!(classify_tier(5, &scale).unwrap(), Tier::Moderate);
        assert_eq!(classify_tier(9, &scale).unwrap(), Tier::Moderate);
        assert_eq!(classify_tier(10, &scale).unwrap(), Tier::High);
        assert_eq!(classify_tier(20, &scale).unwrap(), Tier::High);
        assert!(matches!(classify_tier(21, &scale), Err(ScoreError::TotalOutOfRange { .. })));
    }

    #[test]
    fn validation_errors() {
        let scale = epv();
        let mut responses: Vec<ItemResponse> = (1..=20).map(|id| ItemResponse::answered(id, 0)).collect();
        responses[3].points = ResponseValue::Answered(2);
        assert_eq!(
            score_responses(&scale, &responses).unwrap_err(),
            ScoreError::PointsOutOfRange { item_id: 4, points: 2, max_points: 1 }
        );
        responses[3].points = ResponseValue::Answered(0);
        responses[5].item_id = 5;
        assert_eq!(score_responses(&scale, &responses).unwrap_err(), ScoreError::DuplicateResponse(5));
        responses[5].item_id = 30;
        assert_eq!(score_responses(&scale, &responses).unwrap_err(), ScoreError::UnknownItem(30));
        responses[5].item_id = 6;
        responses.truncate(19);
        assert_eq!(score_responses(&scale, &responses).unwrap_err(), ScoreError::NoResponse(20));
    }

    #[test]
    fn graded_scale_prorates_by_maximum() {
        let scale = ScaleDefinition::epv_r();
        // answer only item 8 (max 3) with 3 points: 3 * 34 / 3 = 34
        let responses: Vec<ItemResponse> = scale
            .items()
            .iter()
            .map(|i| if i.id == 8 { ItemResponse::answered(8, 3) } else { ItemResponse::missing(i.id) })
            .collect();
        let r = score_responses(&scale, &responses).unwrap();
        assert_eq!(r.imputed_total, scale.max_total());
        assert_eq!(r.tier, Tier::High);
    }

    #[test]
    fn serializes_completeness_as_decimal() {
        let mut points = [None; 20];
        points[..10].fill(Some(0));
        let json = serde_json::to_value(run(&points).unwrap()).unwrap();
        assert_eq!(json["completeness"], "0.500000");
        assert_eq!(json["tier"], "low");
        assert_eq!(json["warnings"][0], "imputation-applied");
        assert_eq!(json["contributions"][10]["points"], serde_json::Value::Null);
    }
}
