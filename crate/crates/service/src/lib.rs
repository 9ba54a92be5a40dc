//! HTTP front end for scoring, cutoff sweeps, what-if queries and audits.
//!
//! Bodies are JSON with a `schema_version`. Ratios are exact decimal
//! strings and counts are integers. Errors are `{"error": {code, message}}`
//! with a 4xx status; 5xx is reserved for internal failures.

use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use riskscale::audit::{self, AuditReport, CaseDisclosure, CohortOrigin, SCHEMA_VERSION};
use riskscale::cohort::{self, CohortError};
use riskscale::metrics::{self, ConfusionMatrix, DecimalRow, MetricsError, ScoreDistribution};
use riskscale::scale::{self, ItemResponse, ScaleDefinition, ScoreResult};
use riskscale::Exact;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        Self { status, code: code.into(), message: message.into() }
    }

    fn unprocessable(code: &str, message: impl ToString) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "schema_version": SCHEMA_VERSION, "error": self }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(e.status(), "bad-request-body", e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad-query", e.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortSource {
    Anchors,
    Upload,
}

/// A cohort held by the service. Never modified after creation.
#[derive(Debug, Clone, Serialize)]
pub struct SessionCohort {
    pub cohort_id: String,
    pub source: CohortSource,
    pub created_at: DateTime<Utc>,
    #[serde(skip)]
    pub scale: ScaleDefinition,
    pub distribution: ScoreDistribution,
}

/// Append-only cohort store; ids are `c1`, `c2`, ... in creation order.
#[derive(Debug, Default)]
pub struct CohortStore {
    cohorts: RwLock<Vec<Arc<SessionCohort>>>,
}

impl CohortStore {
    pub fn insert(
        &self,
        source: CohortSource,
        scale: ScaleDefinition,
        distribution: ScoreDistribution,
    ) -> Arc<SessionCohort> {
        let mut cohorts = self.cohorts.write().expect("cohort store lock poisoned");
        let cohort = Arc::new(SessionCohort {
            cohort_id: format!("c{}", cohorts.len() + 1),
            source,
            created_at: Utc::now(),
            scale,
            distribution,
        });
        cohorts.push(Arc::clone(&cohort));
        cohort
    }

    pub fn get(&self, id: &str) -> Option<Arc<SessionCohort>> {
        let index: usize = id.strip_prefix('c')?.parse().ok()?;
        let cohorts = self.cohorts.read().expect("cohort store lock poisoned");
        cohorts.get(index.checked_sub(1)?).cloned()
    }

    fn require(&self, id: &str) -> Result<Arc<SessionCohort>, ApiError> {
        self.get(id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown-cohort", format!("no cohort '{id}'")))
    }
}

#[derive(Debug, Clone, Default)]
pub struct AppState {
    pub cohorts: Arc<CohortStore>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scale/{id}", get(get_scale))
        .route("/score", post(post_score))
        .route("/cohorts", post(post_cohort))
        .route("/cohorts/{id}/sweep", get(get_sweep))
        .route("/cohorts/{id}/whatif", get(get_whatif))
        .route("/audit", post(post_audit))
        .with_state(state)
}

fn builtin_scale(id: &str) -> Result<ScaleDefinition, ApiError> {
    ScaleDefinition::builtin(id).map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e.code(), e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct ScaleResponse {
    pub schema_version: &'static str,
    pub scale: ScaleDefinition,
}

async fn get_scale(Path(id): Path<String>) -> ApiResult<ScaleResponse> {
    Ok(Json(ScaleResponse { schema_version: SCHEMA_VERSION, scale: builtin_scale(&id)? }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub scale_id: String,
    #[serde(default)]
    pub case_id: String,
    pub responses: Vec<ItemResponse>,
}

#[derive(Debug, Serialize)]
pub struct ScoreResponse {
    pub schema_version: &'static str,
    pub case_id: String,
    pub result: ScoreResult,
    pub disclosure: CaseDisclosure,
}

/// The `/score` payload for one request; shared with the parity tests.
pub fn score_payload(request: ScoreRequest) -> Result<ScoreResponse, ApiError> {
    let scale = ScaleDefinition::builtin(&request.scale_id).map_err(|e| ApiError::unprocessable(e.code(), e))?;
    let result = scale::score_responses(&scale, &request.responses).map_err(|e| ApiError::unprocessable(e.code(), e))?;
    let disclosure = audit::case_disclosure(&result, &scale);
    Ok(ScoreResponse { schema_version: SCHEMA_VERSION, case_id: request.case_id, result, disclosure })
}

async fn post_score(body: Result<Json<ScoreRequest>, JsonRejection>) -> ApiResult<ScoreResponse> {
    let Json(request) = body?;
    score_payload(request).map(Json)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortRequest {
    pub source: CohortSource,
    /// Cohort CSV text, required for `upload`.
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default = "default_scale_id")]
    pub scale_id: String,
}

fn default_scale_id() -> String {
    "epv".into()
}

#[derive(Debug, Serialize)]
pub struct CohortResponse {
    pub schema_version: &'static str,
    pub cohort_id: String,
    pub source: CohortSource,
    pub created_at: DateTime<Utc>,
    pub severe: u64,
    pub non_severe: u64,
}

fn cohort_error(e: CohortError) -> ApiError {
    ApiError::unprocessable(e.code(), e)
}

async fn post_cohort(
    State(state): State<AppState>,
    body: Result<Json<CohortRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CohortResponse>), ApiError> {
    let Json(request) = body?;
    let (scale, dist) = match request.source {
        CohortSource::Anchors => {
            if request.csv.is_some() {
                return Err(ApiError::unprocessable("unexpected-csv", "anchors cohorts take no csv"));
            }
            (ScaleDefinition::epv(), cohort::reconstruct_anchor_cohort())
        }
        CohortSource::Upload => {
            let csv = request.csv.ok_or_else(|| ApiError::unprocessable("missing-csv", "upload cohorts need csv"))?;
            let scale = ScaleDefinition::builtin(&request.scale_id).map_err(|e| ApiError::unprocessable(e.code(), e))?;
            let loaded = cohort::load_cohort(csv.as_bytes(), &scale).map_err(cohort_error)?;
            let dist = loaded.distribution(&scale);
            (scale, dist)
        }
    };
    let stored = state.cohorts.insert(request.source, scale, dist);
    Ok((
        StatusCode::CREATED,
        Json(CohortResponse {
            schema_version: SCHEMA_VERSION,
            cohort_id: stored.cohort_id.clone(),
            source: stored.source,
            created_at: stored.created_at,
            severe: stored.distribution.n_pos(),
            non_severe: stored.distribution.n_neg(),
        }),
    ))
}

#[derive(Debug, Serialize)]
pub struct SweepResponse {
    pub schema_version: &'static str,
    pub cohort_id: String,
    pub rows: Vec<DecimalRow>,
    pub auc: String,
}

fn metrics_error(e: MetricsError) -> ApiError {
    let status = match e {
        MetricsError::CutoffOutOfRange { .. } => StatusCode::BAD_REQUEST,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    ApiError::new(status, e.code(), e.to_string())
}

pub fn sweep_payload(cohort_id: &str, dist: &ScoreDistribution) -> Result<SweepResponse, ApiError> {
    let exact = metrics::sweep::<Exact>(dist).map_err(metrics_error)?;
    let auc = riskscale::Scalar::to_decimal(&metrics::auc(&exact).map_err(metrics_error)?, riskscale::decimal::PLACES);
    Ok(SweepResponse {
        schema_version: SCHEMA_VERSION,
        cohort_id: cohort_id.to_string(),
        rows: metrics::decimal_sweep(dist).map_err(metrics_error)?,
        auc,
    })
}

async fn get_sweep(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<SweepResponse> {
    let cohort = state.cohorts.require(&id)?;
    sweep_payload(&cohort.cohort_id, &cohort.distribution).map(Json)
}

#[derive(Debug, Deserialize)]
pub struct WhatIfQuery {
    pub cutoff: u32,
}

#[derive(Debug, Serialize)]
pub struct WhatIfFlags {
    pub fn_majority: bool,
    pub accuracy_paradox: bool,
    pub paradox_explanation: String,
}

#[derive(Debug, Serialize)]
pub struct WhatIfResponse {
    pub schema_version: &'static str,
    pub cohort_id: String,
    pub cutoff: u32,
    pub confusion: ConfusionMatrix,
    pub metrics: DecimalRow,
    pub flags: WhatIfFlags,
}

pub fn whatif_payload(cohort_id: &str, dist: &ScoreDistribution, cutoff: u32) -> Result<WhatIfResponse, ApiError> {
    let row = metrics::metrics_row::<Exact>(dist, cutoff).map_err(metrics_error)?;
    let paradox = metrics::accuracy_paradox_flag(&row, dist);
    Ok(WhatIfResponse {
        schema_version: SCHEMA_VERSION,
        cohort_id: cohort_id.to_string(),
        cutoff,
        confusion: row.confusion,
        metrics: row.confusion.decimal_row(cutoff),
        flags: WhatIfFlags {
            fn_majority: row.confusion.fn_majority(),
            accuracy_paradox: paradox.flagged,
            paradox_explanation: paradox.explanation,
        },
    })
}

async fn get_whatif(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<WhatIfQuery>, QueryRejection>,
) -> ApiResult<WhatIfResponse> {
    let cohort = state.cohorts.require(&id)?;
    let Query(query) = query?;
    whatif_payload(&cohort.cohort_id, &cohort.distribution, query.cutoff).map(Json)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRequest {
    pub cohort_id: String,
    pub cost_ratio: f64,
}

pub fn audit_payload(cohort: &SessionCohort, cost_ratio: f64) -> Result<AuditReport, ApiError> {
    let origin = match cohort.source {
        CohortSource::Anchors => CohortOrigin::Anchors,
        CohortSource::Upload => CohortOrigin::Upload { name: cohort.cohort_id.clone() },
    };
    audit::build_audit(&cohort.distribution, &cohort.scale, origin, cost_ratio)
        .map_err(|e| ApiError::unprocessable(e.code(), e))
}

async fn post_audit(
    State(state): State<AppState>,
    body: Result<Json<AuditRequest>, JsonRejection>,
) -> ApiResult<AuditReport> {
    let Json(request) = body?;
    let cohort = state.cohorts.require(&request.cohort_id)?;
    audit_payload(&cohort, request.cost_ratio).map(Json)
}
