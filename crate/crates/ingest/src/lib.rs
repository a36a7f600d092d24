//! Turning CD pipeline logs into monitor input.
//!
//! Two sources are understood: registry webhook payloads (an image was
//! pushed, labelled `create`) and image-poller logs (the poller resolved the
//! latest tag, labelled `fetch`). Both become events in the plain line
//! format read by the monitor:
//!
//! ```text
//! create auth-backend stg-7c03f5241c93d6e77bb132d8ea9ffe9e59e7b62d-1445 171982
//! ```

pub mod collector;
pub mod line;
pub mod pipeline;
pub mod source;

use thiserror::Error;

pub use line::{format_event, parse_event_line, parse_line, read_log};
pub use pipeline::{follow, merge, preprocess, read_records, FollowStats};
pub use source::{
    parse_fluxcd, parse_rfc3339, parse_webhook, FluxcdSource, SourceParser, SourceRegistry,
    WebhookSource,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected a JSON object")]
    NotAnObject,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}` must be a string")]
    NotAString { field: &'static str },
    #[error("field `{field}`: cannot parse time `{value}`")]
    BadTime { field: &'static str, value: String },
    #[error("field {index} of `{label}` is empty or contains whitespace: {value:?}")]
    BadField {
        label: String,
        index: usize,
        value: String,
    },
    #[error("line {line}: expected {expected} columns, found {found}")]
    Columns {
        line: usize,
        expected: &'static str,
        found: usize,
    },
    #[error("line {line}: timestamp `{value}` is not a non-negative integer")]
    Timestamp { line: usize, value: String },
    #[error("line {line}: {source}")]
    Event {
        line: usize,
        source: cdmon_core::CoreError,
    },
    #[error(transparent)]
    Core(#[from] cdmon_core::CoreError),
    #[error("unknown source `{name}` (available: {available})")]
    UnknownSource { name: String, available: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
