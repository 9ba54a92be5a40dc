//! The instrument: item definitions, tier bounds, and scoring of single
//! assessments.

mod assessment;
mod scoring;

pub use assessment::{Assessment, AssessorRole, ItemResponse, ResponseValue};
pub use scoring::{
    classify_tier, score, score_responses, Contribution, ScoreError, ScoreResult, ScoreWarning,
    Tier, LOW_COMPLETENESS_THRESHOLD,
};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of items on every supported scale.
pub const ITEM_COUNT: usize = 20;

const EPV_DOCUMENT: &str = include_str!("builtin/epv.toml");
const EPV_R_DOCUMENT: &str = include_str!("builtin/epv_r.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemCategory {
    PersonalData,
    Relationship,
    ViolenceType,
    PerpetratorProfile,
    VictimVulnerability,
}

impl ItemCategory {
    pub const ALL: [ItemCategory; 5] = [
        ItemCategory::PersonalData,
        ItemCategory::Relationship,
        ItemCategory::ViolenceType,
        ItemCategory::PerpetratorProfile,
        ItemCategory::VictimVulnerability,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScaleId {
    #[serde(rename = "EPV")]
    Epv,
    #[serde(rename = "EPV-R")]
    EpvR,
    #[serde(rename = "custom")]
    Custom,
}

impl fmt::Display for ScaleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleId::Epv => "EPV",
            ScaleId::EpvR => "EPV-R",
            ScaleId::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemSpec {
    pub id: u8,
    pub label_key: String,
    pub category: ItemCategory,
    pub max_points: u8,
    pub guidance: String,
}

/// Inclusive upper bounds of the low and moderate tiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierBounds {
    pub low_max: u32,
    pub moderate_max: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScaleError {
    #[error("scale document is not valid: {0}")]
    Parse(String),
    #[error("item count {found} ≠ {ITEM_COUNT}")]
    ItemCount { found: usize },
    #[error("item id {0} is outside 1..=20")]
    ItemIdOutOfRange(u8),
    #[error("item id {0} appears more than once")]
    DuplicateItem(u8),
    #[error("item {id}: max_points {max_points} not allowed on a {scale} scale")]
    MaxPointsOutOfRange { id: u8, max_points: u8, scale: ScaleId },
    #[error("tier bounds must satisfy 0 ≤ low_max < moderate_max < max_total (got {low_max}, {moderate_max}, max_total {max_total})")]
    TierBounds { low_max: u32, moderate_max: u32, max_total: u32 },
    #[error("unknown built-in scale {0:?} (expected epv or epv-r)")]
    UnknownBuiltin(String),
}

impl ScaleError {
    pub fn code(&self) -> &'static str {
        match self {
            ScaleError::Parse(_) => "scale-parse",
            ScaleError::ItemCount { .. } => "item-count",
            ScaleError::ItemIdOutOfRange(_) => "item-id-out-of-range",
            ScaleError::DuplicateItem(_) => "duplicate-item",
            ScaleError::MaxPointsOutOfRange { .. } => "max-points-out-of-range",
            ScaleError::TierBounds { .. } => "tier-bounds",
            ScaleError::UnknownBuiltin(_) => "unknown-scale",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaleDocument {
    scale_id: ScaleId,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    notice: Option<String>,
    tier_bounds: TierBounds,
    items: Vec<ItemSpec>,
}

/// A validated, immutable scale. Items are held in id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScaleDefinition {
    scale_id: ScaleId,
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    notice: Option<String>,
    items: Vec<ItemSpec>,
    tier_bounds: TierBounds,
    max_total: u32,
}

/// Parses and validates a scale config document (TOML).
pub fn load_scale(document: &str) -> Result<ScaleDefinition, ScaleError> {
    let doc: ScaleDocument =
        toml::from_str(document).map_err(|e| ScaleError::Parse(e.message().to_string()))?;
    ScaleDefinition::new(doc.scale_id, doc.name, doc.notice, doc.items, doc.tier_bounds)
}

impl ScaleDefinition {
    pub fn new(
        scale_id: ScaleId,
        name: Option<String>,
        notice: Option<String>,
        mut items: Vec<ItemSpec>,
        tier_bounds: TierBounds,
    ) -> Result<Self, ScaleError> {
        if items.len() != ITEM_COUNT {
            return Err(ScaleError::ItemCount { found: items.len() });
        }
        let mut seen = BTreeSet::new();
        for item in &items {
            if !(1..=ITEM_COUNT as u8).contains(&item.id) {
                return Err(ScaleError::ItemIdOutOfRange(item.id));
            }
            if !seen.insert(item.id) {
                return Err(ScaleError::DuplicateItem(item.id));
            }
            let allowed = match scale_id {
                ScaleId::Epv => item.max_points == 1,
                ScaleId::EpvR => (1..=3).contains(&item.max_points),
                ScaleId::Custom => item.max_points >= 1,
            };
            if !allowed {
                return Err(ScaleError::MaxPointsOutOfRange {
                    id: item.id,
                    max_points: item.max_points,
                    scale: scale_id,
                });
            }
        }
        items.sort_by_key(|item| item.id);

        let max_total: u32 = items.iter().map(|i| u32::from(i.max_points)).sum();
        let TierBounds { low_max, moderate_max } = tier_bounds;
        if !(low_max < moderate_max && moderate_max < max_total) {
            return Err(ScaleError::TierBounds { low_max, moderate_max, max_total });
        }

        Ok(Self {
            scale_id,
            name: name.unwrap_or_else(|| scale_id.to_string()),
            notice,
            items,
            tier_bounds,
            max_total,
        })
    }

    /// The binary-item scale with tiers 0–4 / 5–9 / 10–20.
    pub fn epv() -> Self {
        load_scale(EPV_DOCUMENT).expect("built-in EPV document is valid")
    }

    /// The graded variant. Its per-item maxima are illustrative.
    pub fn epv_r() -> Self {
        load_scale(EPV_R_DOCUMENT).expect("built-in EPV-R document is valid")
    }

    /// Resolves `epv` / `epv-r` (case-insensitive, `_` accepted for `-`).
    pub fn builtin(name: &str) -> Result<Self, ScaleError> {
        match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "epv" => Ok(Self::epv()),
            "epv-r" | "epvr" => Ok(Self::epv_r()),
            _ => Err(ScaleError::UnknownBuiltin(name.to_string())),
        }
    }

    pub fn scale_id(&self) -> ScaleId {
        self.scale_id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Caveat that must accompany any output produced with this scale.
    pub fn notice(&self) -> Option<&str> {
        self.notice.as_deref()
    }

    pub fn items(&self) -> &[ItemSpec] {
        &self.items
    }

    pub fn item(&self, id: u8) -> Option<&ItemSpec> {
        id.checked_sub(1).and_then(|idx| self.items.get(usize::from(idx)))
    }

    pub fn tier_bounds(&self) -> TierBounds {
        self.tier_bounds
    }

    pub fn max_total(&self) -> u32 {
        self.max_total
    }

    pub fn max_points(&self) -> Vec<u8> {
        self.items.iter().map(|i| i.max_points).collect()
    }
}
