//! HTTP service holding networks and consultation sessions in memory.
//!
//! [`ServiceState`] carries the logic and can be driven directly;
//! [`router`] exposes it over HTTP + JSON. Payload shapes are documented in
//! `docs/api.md`.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, PoisonError, RwLock};

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{decision_node, recommend, DecisionError, DecisionRecommendation};
use crate::inference::{posterior, prob_of_evidence, InferenceError, Query};
use crate::model::{Evidence, Network, NodeKind};
use crate::netlang::{parse_network_named, serialize_evidence, ParseDiagnostic};
use crate::sensitivity::{rank_indicants, Event, IndicantSensitivity, SensitivityError};

/// Tag marking the variables summarized in every payload.
pub const DIAGNOSIS_TAG: &str = "diagnosis";
/// Tag marking the observable variables ranked by what-if queries.
pub const INDICANT_TAG: &str = "indicant";

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("network source has errors")]
    Diagnostics(Vec<ParseDiagnostic>),
    #[error("{0}")]
    BadRequest(String),
    #[error("evidence has zero probability")]
    Conflict { revision: u64, evidence: BTreeMap<String, String> },
    #[error("{0}")]
    Engine(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<&'a [ParseDiagnostic]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    revision: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    evidence: Option<&'a BTreeMap<String, String>>,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Diagnostics(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Conflict { .. } => StatusCode::CONFLICT,
            ApiError::Engine(_) => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::NotFound(_) => "not_found",
            ApiError::Diagnostics(_) => "invalid_network",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Conflict { .. } => "evidence_conflict",
            ApiError::Engine(_) => "engine_error",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (diagnostics, revision, evidence) = match &self {
            ApiError::Diagnostics(d) => (Some(d.as_slice()), None, None),
            ApiError::Conflict { revision, evidence } => (None, Some(*revision), Some(evidence)),
            _ => (None, None, None),
        };
        let body = ErrorBody { error: self.code(), message: self.to_string(), diagnostics, revision, evidence };
        (self.status(), Json(body)).into_response()
    }
}

impl From<InferenceError> for ApiError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Model(m) => ApiError::BadRequest(m.to_string()),
            other => ApiError::Engine(other.to_string()),
        }
    }
}

impl From<DecisionError> for ApiError {
    fn from(e: DecisionError) -> Self {
        match e {
            DecisionError::Inference(i) => i.into(),
            other => ApiError::Engine(other.to_string()),
        }
    }
}

impl From<SensitivityError> for ApiError {
    fn from(e: SensitivityError) -> Self {
        match e {
            SensitivityError::Inference(i) => i.into(),
            SensitivityError::Decision(d) => d.into(),
            other => ApiError::Engine(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariableInfo {
    pub name: String,
    pub kind: NodeKind,
    pub levels: Vec<String>,
    pub parents: Vec<String>,
    pub tags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkInfo {
    pub id: String,
    pub variables: Vec<VariableInfo>,
    /// Warnings and lints produced while loading.
    pub diagnostics: Vec<ParseDiagnostic>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Posterior {
    pub variable: String,
    pub levels: Vec<String>,
    pub probabilities: Vec<f64>,
}

/// Everything the consultation view shows for one evidence set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub posteriors: Vec<Posterior>,
    pub decision: Option<DecisionRecommendation>,
    pub evidence_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionPayload {
    pub session: String,
    pub network: String,
    pub revision: u64,
    pub evidence: BTreeMap<String, String>,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionPayload {
    pub session: String,
    pub revision: u64,
    pub decision: DecisionRecommendation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorDelta {
    pub variable: String,
    pub levels: Vec<String>,
    pub deltas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UtilityDelta {
    pub alternative: String,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WhatIfPayload {
    pub session: String,
    pub network: String,
    /// Revision of the session the hypothesis was evaluated against.
    pub revision: u64,
    /// The hypothetical evidence.
    pub evidence: BTreeMap<String, String>,
    #[serde(flatten)]
    pub summary: Summary,
    pub posterior_deltas: Vec<PosteriorDelta>,
    pub utility_deltas: Vec<UtilityDelta>,
    pub target: Option<Event>,
    pub indicants: Vec<IndicantSensitivity>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct WhatIfRequest {
    /// `null` removes an observation from the hypothetical evidence.
    #[serde(default)]
    pub assignments: BTreeMap<String, Option<String>>,
    #[serde(default)]
    pub target: Option<TargetRequest>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct TargetRequest {
    pub variable: String,
    pub level: String,
}

fn evidence_map(evidence: &Evidence) -> BTreeMap<String, String> {
    evidence.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Posteriors of the diagnosis variables, the decision when the network has
/// one, and the probability of the evidence.
pub fn summarize(net: &Network, evidence: &Evidence) -> Result<Summary, ApiError> {
    let evidence_probability = prob_of_evidence(net, evidence)?;
    if evidence_probability <= 0.0 {
        return Err(InferenceError::ImpossibleEvidence.into());
    }
    let mut posteriors = Vec::new();
    for node in net.tagged(DIAGNOSIS_TAG) {
        let dist = posterior(net, &Query::single(node.name(), evidence.clone()))?;
        posteriors.push(Posterior {
            variable: node.name().to_string(),
            levels: node.variable.levels().to_vec(),
            probabilities: dist.probabilities().to_vec(),
        });
    }
    let decision = if net.utility_node().is_some() && decision_node(net).is_ok() {
        Some(recommend(net, evidence)?)
    } else {
        None
    };
    Ok(Summary { posteriors, decision, evidence_probability })
}

fn summarize_or_conflict(net: &Network, evidence: &Evidence, revision: u64) -> Result<Summary, ApiError> {
    if prob_of_evidence(net, evidence)? <= 0.0 {
        return Err(ApiError::Conflict { revision, evidence: evidence_map(evidence) });
    }
    summarize(net, evidence)
}

fn check_assignment(net: &Network, variable: &str, level: &str) -> Result<(), ApiError> {
    let node = net.node(variable).ok_or_else(|| ApiError::BadRequest(format!("unknown variable `{variable}`")))?;
    if node.kind == NodeKind::Utility {
        return Err(ApiError::BadRequest(format!("utility node `{variable}` cannot be observed")));
    }
    if node.variable.level_index(level).is_none() {
        return Err(ApiError::BadRequest(format!("`{variable}` has no level `{level}`")));
    }
    Ok(())
}

fn check_variable(net: &Network, variable: &str) -> Result<(), ApiError> {
    match net.node(variable) {
        Some(_) => Ok(()),
        None => Err(ApiError::BadRequest(format!("unknown variable `{variable}`"))),
    }
}

#[derive(Debug)]
struct Session {
    network_id: String,
    net: Arc<Network>,
    evidence: Evidence,
    revision: u64,
}

/// Networks and sessions, shared between request handlers.
#[derive(Debug, Default)]
pub struct ServiceState {
    networks: RwLock<HashMap<String, Arc<Network>>>,
    sessions: RwLock<HashMap<String, Arc<RwLock<Session>>>>,
    next_network: AtomicU64,
    next_session: AtomicU64,
}

impl ServiceState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses and stores a network. Identical sources still get distinct ids.
    pub fn load_network(&self, source: &str) -> Result<NetworkInfo, ApiError> {
        let id = format!("n{}", self.next_network.fetch_add(1, Ordering::Relaxed) + 1);
        let parsed = parse_network_named(source, &id).map_err(ApiError::Diagnostics)?;
        let net = Arc::new(parsed.value);
        self.networks.write().unwrap_or_else(PoisonError::into_inner).insert(id.clone(), net.clone());
        Ok(catalog(&id, &net, parsed.diagnostics))
    }

    pub fn network(&self, id: &str) -> Result<NetworkInfo, ApiError> {
        let net = self.get_network(id)?;
        Ok(catalog(id, &net, Vec::new()))
    }

    fn get_network(&self, id: &str) -> Result<Arc<Network>, ApiError> {
        self.networks
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("network `{id}`")))
    }

    fn session(&self, id: &str) -> Result<Arc<RwLock<Session>>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("session `{id}`")))
    }

    pub fn create_session(&self, network_id: &str) -> Result<SessionPayload, ApiError> {
        let net = self.get_network(network_id)?;
        let summary = summarize(&net, &Evidence::new())?;
        let id = format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed) + 1);
        let session = Session { network_id: network_id.to_string(), net, evidence: Evidence::new(), revision: 0 };
        let payload = SessionPayload {
            session: id.clone(),
            network: network_id.to_string(),
            revision: 0,
            evidence: BTreeMap::new(),
            summary,
        };
        self.sessions.write().unwrap_or_else(PoisonError::into_inner).insert(id, Arc::new(RwLock::new(session)));
        Ok(payload)
    }

    /// Applies `update` to the session's evidence. The session only changes
    /// when the new evidence is possible.
    fn mutate(&self, id: &str, update: impl FnOnce(&Network, &mut Evidence) -> Result<(), ApiError>) -> Result<SessionPayload, ApiError> {
        let handle = self.session(id)?;
        let mut session = handle.write().unwrap_or_else(PoisonError::into_inner);
        let mut evidence = session.evidence.clone();
        update(&session.net, &mut evidence)?;
        let summary = summarize_or_conflict(&session.net, &evidence, session.revision)?;
        session.evidence = evidence;
        session.revision += 1;
        Ok(SessionPayload {
            session: id.to_string(),
            network: session.network_id.clone(),
            revision: session.revision,
            evidence: evidence_map(&session.evidence),
            summary,
        })
    }

    /// Sets `variable` to `level`, or clears it when `level` is `None`.
    pub fn set_evidence(&self, id: &str, variable: &str, level: Option<&str>) -> Result<SessionPayload, ApiError> {
        self.mutate(id, |net, evidence| {
            match level {
                Some(level) => {
                    check_assignment(net, variable, level)?;
                    evidence.set(variable, level);
                }
                None => {
                    check_variable(net, variable)?;
                    evidence.remove(variable);
                }
            }
            Ok(())
        })
    }

    pub fn clear_evidence(&self, id: &str, variable: &str) -> Result<SessionPayload, ApiError> {
        self.set_evidence(id, variable, None)
    }

    pub fn posteriors(&self, id: &str) -> Result<SessionPayload, ApiError> {
        let handle = self.session(id)?;
        let session = handle.read().unwrap_or_else(PoisonError::into_inner);
        Ok(SessionPayload {
            session: id.to_string(),
            network: session.network_id.clone(),
            revision: session.revision,
            evidence: evidence_map(&session.evidence),
            summary: summarize(&session.net, &session.evidence)?,
        })
    }

    pub fn decision(&self, id: &str) -> Result<DecisionPayload, ApiError> {
        let handle = self.session(id)?;
        let session = handle.read().unwrap_or_else(PoisonError::into_inner);
        Ok(DecisionPayload {
            session: id.to_string(),
            revision: session.revision,
            decision: recommend(&session.net, &session.evidence)?,
        })
    }

    /// Evaluates hypothetical evidence without touching the session.
    pub fn whatif(&self, id: &str, request: &WhatIfRequest) -> Result<WhatIfPayload, ApiError> {
        let handle = self.session(id)?;
        let session = handle.read().unwrap_or_else(PoisonError::into_inner);
        let net = &session.net;
        let mut evidence = session.evidence.clone();
        for (variable, level) in &request.assignments {
            match level {
                Some(level) => {
                    check_assignment(net, variable, level)?;
                    evidence.set(variable.clone(), level.clone());
                }
                None => {
                    check_variable(net, variable)?;
                    evidence.remove(variable);
                }
            }
        }
        let current = summarize(net, &session.evidence)?;
        let summary = summarize_or_conflict(net, &evidence, session.revision)?;
        let posterior_deltas = summary
            .posteriors
            .iter()
            .zip(&current.posteriors)
            .map(|(new, old)| PosteriorDelta {
                variable: new.variable.clone(),
                levels: new.levels.clone(),
                deltas: new.probabilities.iter().zip(&old.probabilities).map(|(a, b)| a - b).collect(),
            })
            .collect();
        let utility_deltas = match (&summary.decision, &current.decision) {
            (Some(new), Some(old)) => new
                .alternatives
                .iter()
                .zip(&old.alternatives)
                .map(|(a, b)| UtilityDelta { alternative: a.alternative.clone(), delta: a.expected_utility - b.expected_utility })
                .collect(),
            _ => Vec::new(),
        };
        let target = match &request.target {
            Some(t) => {
                check_assignment(net, &t.variable, &t.level)?;
                Some(Event::new(t.variable.clone(), t.level.clone()))
            }
            None => default_target(net),
        };
        let indicants = match &target {
            Some(target) if !evidence.contains(&target.variable) => {
                let candidates: Vec<String> = net.tagged(INDICANT_TAG).map(|n| n.name().to_string()).collect();
                rank_indicants(net, &evidence, target, &candidates)?
            }
            _ => Vec::new(),
        };
        Ok(WhatIfPayload {
            session: id.to_string(),
            network: session.network_id.clone(),
            revision: session.revision,
            evidence: evidence_map(&evidence),
            summary,
            posterior_deltas,
            utility_deltas,
            target,
            indicants,
        })
    }

    /// The session's evidence in `.ev` form.
    pub fn export(&self, id: &str) -> Result<String, ApiError> {
        let handle = self.session(id)?;
        let session = handle.read().unwrap_or_else(PoisonError::into_inner);
        Ok(serialize_evidence(&session.evidence))
    }
}

/// Last level of the first diagnosis variable.
pub fn default_target(net: &Network) -> Option<Event> {
    net.tagged(DIAGNOSIS_TAG)
        .next()
        .and_then(|n| n.variable.levels().last().map(|l| Event::new(n.name(), l.clone())))
}

fn catalog(id: &str, net: &Network, diagnostics: Vec<ParseDiagnostic>) -> NetworkInfo {
    NetworkInfo {
        id: id.to_string(),
        variables: net
            .nodes()
            .iter()
            .map(|n| VariableInfo {
                name: n.name().to_string(),
                kind: n.kind,
                levels: n.variable.levels().to_vec(),
                parents: n.parents.clone(),
                tags: n.tags.clone(),
            })
            .collect(),
        diagnostics,
    }
}

#[derive(Deserialize)]
struct LoadRequest {
    source: String,
}

#[derive(Deserialize)]
struct SessionRequest {
    network: String,
}

#[derive(Deserialize)]
struct EvidenceRequest {
    variable: String,
    #[serde(default)]
    level: Option<String>,
}

type Shared = Arc<ServiceState>;

async fn load_network(State(state): State<Shared>, Json(req): Json<LoadRequest>) -> Result<impl IntoResponse, ApiError> {
    Ok((StatusCode::CREATED, Json(state.load_network(&req.source)?)))
}

async fn get_network(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<NetworkInfo>, ApiError> {
    Ok(Json(state.network(&id)?))
}

async fn create_session(State(state): State<Shared>, Json(req): Json<SessionRequest>) -> Result<impl IntoResponse, ApiError> {
    Ok((StatusCode::CREATED, Json(state.create_session(&req.network)?)))
}

async fn put_evidence(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<EvidenceRequest>,
) -> Result<Json<SessionPayload>, ApiError> {
    Ok(Json(state.set_evidence(&id, &req.variable, req.level.as_deref())?))
}

async fn delete_evidence(
    State(state): State<Shared>,
    Path((id, variable)): Path<(String, String)>,
) -> Result<Json<SessionPayload>, ApiError> {
    Ok(Json(state.clear_evidence(&id, &variable)?))
}

async fn get_posteriors(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionPayload>, ApiError> {
    Ok(Json(state.posteriors(&id)?))
}

async fn get_decision(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<DecisionPayload>, ApiError> {
    Ok(Json(state.decision(&id)?))
}

async fn post_whatif(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<WhatIfRequest>,
) -> Result<Json<WhatIfPayload>, ApiError> {
    Ok(Json(state.whatif(&id, &req)?))
}

async fn get_export(State(state): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], state.export(&id)?))
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/networks", post(load_network))
        .route("/networks/{id}", get(get_network))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/evidence", put(put_evidence))
        .route("/sessions/{id}/evidence/{variable}", delete(delete_evidence))
        .route("/sessions/{id}/posteriors", get(get_posteriors))
        .route("/sessions/{id}/decision", get(get_decision))
        .route("/sessions/{id}/whatif", post(post_whatif))
        .route("/sessions/{id}/export", get(get_export))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Shared) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
