//! Interactive retrieval sessions over HTTP.
//!
//! A session runs a first K-NN retrieval for a query item or vector, takes
//! one round of binary ratings on those results and answers with the
//! feedback-filtered retrieval. All sessions share one read-only dataset.

mod api;
mod error;
mod session;

pub use api::{corpus_summary_of, image_url, placeholder_svg, router, CorpusSummary};
pub use error::{ServiceError, ServiceResult};
pub use session::{
    Rating, Refinement, ReplayReport, ServiceConfig, Session, SessionManager, SessionQuery,
    SessionState, TranscriptEvent,
};
