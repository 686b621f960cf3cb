use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rfir_core::engine::{
    knn_retrieve, refined_retrieve, FeedbackSet, OpCounter, PreferenceClassifier, QueryVector,
    RankedList, RefinedOutcome,
};
use rfir_core::store::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    /// First-round result count when a request does not give one.
    pub m: usize,
    /// Size of the refined result list.
    pub k: usize,
    /// Drop items the user already rated from the refined results.
    pub rate_once: bool,
    /// Append-only JSONL log of session events.
    pub transcript: Option<PathBuf>,
    /// Directory that relative `image_uri` values resolve against.
    pub image_root: Option<PathBuf>,
    /// Directory served under `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            m: 10,
            k: 10,
            rate_once: true,
            transcript: None,
            image_root: None,
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Created,
    FirstReturned,
    FeedbackReceived,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionQuery {
    ItemId(String),
    Vector(Vec<f32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub id: String,
    pub relevant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Session {
    pub session_id: String,
    pub query: SessionQuery,
    pub state: SessionState,
    pub m: usize,
    pub first_results: RankedList,
    pub feedback: Option<Vec<Rating>>,
    pub refined_results: Option<RankedList>,
    /// True once refinement found no preferred candidates.
    pub failure: bool,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub updated_at: u64,
}

impl Session {
    fn advance(&mut self, to: SessionState) {
        debug_assert!(to > self.state);
        self.state = to;
        self.updated_at = now_millis();
    }
}

/// Result of a feedback submission.
#[derive(Debug, Clone, PartialEq)]
pub enum Refinement {
    Ranked(RankedList),
    NoPreferredCandidates,
}

/// One line of the transcript log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Create {
        session_id: String,
        query: SessionQuery,
        m: usize,
        results: Vec<String>,
    },
    Feedback {
        session_id: String,
        bits: Vec<u8>,
        /// `None` when there were no preferred candidates.
        results: Option<Vec<String>>,
    },
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// In-memory sessions over one read-only dataset.
///
/// The map lock is only held to look up or insert a session; work on a
/// session happens under that session's own mutex.
pub struct SessionManager {
    dataset: Arc<Dataset>,
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    transcript: Option<Mutex<File>>,
}

impl SessionManager {
    pub fn new(dataset: Arc<Dataset>, config: ServiceConfig) -> ServiceResult<Self> {
        if config.m == 0 || config.k == 0 {
            return Err(ServiceError::BadRequest("m and k must be at least 1".into()));
        }
        let transcript = match &config.transcript {
            Some(path) => Some(Mutex::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| ServiceError::Transcript(format!("{}: {e}", path.display())))?,
            )),
            None => None,
        };
        Ok(Self {
            dataset,
            config,
            sessions: RwLock::new(HashMap::new()),
            transcript,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn create_session(&self, query: SessionQuery, m: Option<usize>) -> ServiceResult<Session> {
        self.create_with_id(uuid::Uuid::new_v4().to_string(), query, m)
    }

    fn create_with_id(
        &self,
        session_id: String,
        query: SessionQuery,
        m: Option<usize>,
    ) -> ServiceResult<Session> {
        let m = m.unwrap_or(self.config.m);
        if m == 0 {
            return Err(ServiceError::BadRequest("m must be at least 1".into()));
        }
        let (vector, exclude) = self.resolve_query(&query)?;
        let now = now_millis();
        let mut session = Session {
            session_id: session_id.clone(),
            query,
            state: SessionState::Created,
            m,
            first_results: RankedList::default(),
            feedback: None,
            refined_results: None,
            failure: false,
            created_at: now,
            updated_at: now,
        };
        session.first_results = knn_retrieve(
            &vector,
            m,
            self.dataset.store(),
            Some(&exclude),
            &mut OpCounter::new(),
        )?;
        session.advance(SessionState::FirstReturned);

        self.log(&TranscriptEvent::Create {
            session_id: session_id.clone(),
            query: session.query.clone(),
            m,
            results: session.first_results.ids().map(str::to_owned).collect(),
        })?;
        self.sessions
            .write()
            .unwrap()
            .insert(session_id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    fn resolve_query(&self, query: &SessionQuery) -> ServiceResult<(QueryVector, HashSet<String>)> {
        let store = self.dataset.store();
        match query {
            SessionQuery::ItemId(id) => {
                let row = store
                    .row_of(id)
                    .ok_or_else(|| ServiceError::UnknownItem(id.clone()))?;
                Ok((QueryVector::from_store(store, row), HashSet::from([id.clone()])))
            }
            SessionQuery::Vector(v) => {
                if v.len() != store.dim() {
                    return Err(ServiceError::DimMismatch {
                        expected: store.dim(),
                        found: v.len(),
                    });
                }
                Ok((QueryVector::new(v)?, HashSet::new()))
            }
        }
    }

    fn lookup(&self, session_id: &str) -> ServiceResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .unwrap()
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(session_id.to_owned()))
    }

    pub fn get_session(&self, session_id: &str) -> ServiceResult<Session> {
        Ok(self.lookup(session_id)?.lock().unwrap().clone())
    }

    /// Rates the first-round results (`bits[i]` for rank `i`) and runs the
    /// refined retrieval.
    pub fn submit_feedback(&self, session_id: &str, bits: &[u8]) -> ServiceResult<Refinement> {
        let handle = self.lookup(session_id)?;
        let mut session = handle.lock().unwrap();
        if session.state != SessionState::FirstReturned {
            return Err(ServiceError::WrongState {
                expected: SessionState::FirstReturned,
                found: session.state,
            });
        }
        if bits.len() != session.first_results.len() {
            return Err(ServiceError::LengthMismatch {
                expected: session.first_results.len(),
                found: bits.len(),
            });
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(ServiceError::BadRequest(format!("feedback bits must be 0 or 1, got {b}")));
        }
        let relevant: Vec<bool> = bits.iter().map(|&b| b == 1).collect();

        let store = self.dataset.store();
        let feedback = FeedbackSet::from_ranked(&session.first_results, &relevant, store)?;
        let classifier = PreferenceClassifier::new(feedback)?;
        session.feedback = Some(
            session
                .first_results
                .iter()
                .zip(&relevant)
                .map(|(e, &relevant)| Rating {
                    id: e.item_id.clone(),
                    relevant,
                })
                .collect(),
        );
        session.advance(SessionState::FeedbackReceived);

        let (query, mut exclude) = self.resolve_query(&session.query)?;
        if self.config.rate_once {
            exclude.extend(session.first_results.ids().map(str::to_owned));
        }
        let k = self.config.k.min(store.len());
        let outcome = refined_retrieve(
            &query,
            k,
            store.len(),
            store,
            &classifier,
            Some(&exclude),
            &mut OpCounter::new(),
        )?;
        let refinement = match outcome {
            RefinedOutcome::Ranked(list) => Refinement::Ranked(list),
            RefinedOutcome::NoCandidates => Refinement::NoPreferredCandidates,
        };
        match &refinement {
            Refinement::Ranked(list) => session.refined_results = Some(list.clone()),
            Refinement::NoPreferredCandidates => session.failure = true,
        }
        session.advance(SessionState::Refined);

        self.log(&TranscriptEvent::Feedback {
            session_id: session_id.to_owned(),
            bits: bits.to_vec(),
            results: session
                .refined_results
                .as_ref()
                .map(|l| l.ids().map(str::to_owned).collect()),
        })?;
        Ok(refinement)
    }

    fn log(&self, event: &TranscriptEvent) -> ServiceResult<()> {
        let Some(file) = &self.transcript else {
            return Ok(());
        };
        let mut line = serde_json::to_string(event).expect("transcript events serialize");
        line.push('\n');
        // one write per line keeps concurrent appends whole
        file.lock()
            .unwrap()
            .write_all(line.as_bytes())
            .map_err(|e| ServiceError::Transcript(e.to_string()))
    }

    /// Re-runs a transcript against this manager, keeping the logged session
    /// ids, and compares every result list with the logged one.
    pub fn replay(&self, transcript: &Path) -> ServiceResult<ReplayReport> {
        let file = File::open(transcript)
            .map_err(|e| ServiceError::Transcript(format!("{}: {e}", transcript.display())))?;
        let mut report = ReplayReport::default();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| ServiceError::Transcript(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let event: TranscriptEvent = serde_json::from_str(&line)
                .map_err(|e| ServiceError::Transcript(format!("line {}: {e}", n + 1)))?;
            report.events += 1;
            match event {
                TranscriptEvent::Create {
                    session_id,
                    query,
                    m,
                    results,
                } => {
                    let s = self.create_with_id(session_id.clone(), query, Some(m))?;
                    let got: Vec<String> = s.first_results.ids().map(str::to_owned).collect();
                    if got != results {
                        report.mismatches.push(session_id);
                    }
                }
                TranscriptEvent::Feedback {
                    session_id,
                    bits,
                    results,
                } => {
                    let got = match self.submit_feedback(&session_id, &bits)? {
                        Refinement::Ranked(list) => Some(list.ids().map(str::to_owned).collect()),
                        Refinement::NoPreferredCandidates => None,
                    };
                    if got != results {
                        report.mismatches.push(session_id);
                    }
                }
            }
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub events: usize,
    /// Sessions whose replayed results differ from the log.
    pub mismatches: Vec<String>,
}
