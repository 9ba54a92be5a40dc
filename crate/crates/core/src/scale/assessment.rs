use chrono::{DateTime, Utc};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An item's recorded value. Serialized as an integer or the string `"missing"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResponseValue {
    Answered(u8),
    Missing,
}

impl ResponseValue {
    pub fn points(self) -> Option<u8> {
        match self {
            ResponseValue::Answered(p) => Some(p),
            ResponseValue::Missing => None,
        }
    }

    pub fn is_missing(self) -> bool {
        self == ResponseValue::Missing
    }
}

impl Serialize for ResponseValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ResponseValue::Answered(p) => serializer.serialize_u8(*p),
            ResponseValue::Missing => serializer.serialize_str("missing"),
        }
    }
}

impl<'de> Deserialize<'de> for ResponseValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ValueVisitor;

        impl Visitor<'_> for ValueVisitor {
            type Value = ResponseValue;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a non-negative integer or \"missing\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                u8::try_from(v)
                    .map(ResponseValue::Answered)
                    .map_err(|_| E::custom(format!("points {v} out of range")))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                u8::try_from(v)
                    .map(ResponseValue::Answered)
                    .map_err(|_| E::custom(format!("points {v} out of range")))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v.trim().eq_ignore_ascii_case("missing") {
                    Ok(ResponseValue::Missing)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(ValueVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemResponse {
    pub item_id: u8,
    pub points: ResponseValue,
}

impl ItemResponse {
    pub fn answered(item_id: u8, points: u8) -> Self {
        Self { item_id, points: ResponseValue::Answered(points) }
    }

    pub fn missing(item_id: u8) -> Self {
        Self { item_id, points: ResponseValue::Missing }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessorRole {
    Police,
    Judge,
    Auditor,
    #[default]
    Other,
}

/// One case's answers. Validation against a scale happens at scoring time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assessment {
    #[serde(default)]
    pub case_id: String,
    #[serde(default)]
    pub assessor_role: AssessorRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recorded_at: Option<DateTime<Utc>>,
    pub responses: Vec<ItemResponse>,
}

impl Assessment {
    pub fn new(case_id: impl Into<String>, responses: Vec<ItemResponse>) -> Self {
        Self {
            case_id: case_id.into(),
            assessor_role: AssessorRole::default(),
            recorded_at: None,
            responses,
        }
    }

    /// Builds an assessment from 20 optional point values in item order.
    pub fn from_points(case_id: impl Into<String>, points: &[Option<u8>]) -> Self {
        let responses = points
            .iter()
            .enumerate()
            .map(|(idx, p)| {
                let id = idx as u8 + 1;
                match p {
                    Some(p) => ItemResponse::answered(id, *p),
                    None => ItemResponse::missing(id),
                }
            })
            .collect();
        Self::new(case_id, responses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interchange_format() {
        let json = r#"{"case_id":"c-7","assessor_role":"police","recorded_at":"2024-03-01T10:00:00Z",
            "responses":[{"item_id":1,"points":1},{"item_id":2,"points":"missing"}]}"#;
        let a: Assessment = serde_json::from_str(json).unwrap();
        assert_eq!(a.assessor_role, AssessorRole::Police);
        assert_eq!(a.responses[0], ItemResponse::answered(1, 1));
        assert_eq!(a.responses[1], ItemResponse::missing(2));
        let back = serde_json::to_string(&a.responses).unwrap();
        assert_eq!(back, r#"[{"item_id":1,"points":1},{"item_id":2,"points":"missing"}]"#);
    }

    #[test]
    fn rejects_negative_and_unknown_tokens() {
        assert!(serde_json::from_str::<ItemResponse>(r#"{"item_id":1,"points":-1}"#).is_err());
        assert!(serde_json::from_str::<ItemResponse>(r#"{"item_id":1,"points":"yes"}"#).is_err());
        assert!(serde_json::from_str::<ItemResponse>(r#"{"item_id":1,"points":null}"#).is_err());
    }
}
