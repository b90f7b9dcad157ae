//! Exit-code classification.

use editsum_core::ingest::IngestError;
use editsum_core::metrics::MetricsError;
use editsum_core::promptgen::PromptError;

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

/// Bad input data or configuration.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Invalid(pub String);

/// 2 when any cause is an I/O, network or external-service failure, else 1.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let io_like = err.chain().any(|cause| {
        if cause.is::<std::io::Error>() {
            return true;
        }
        if let Some(e) = cause.downcast_ref::<IngestError>() {
            return !matches!(e, IngestError::MissingUserAgent | IngestError::MalformedXml { .. });
        }
        if let Some(e) = cause.downcast_ref::<PromptError>() {
            return matches!(
                e,
                PromptError::RateLimited { .. }
                    | PromptError::Transport(_)
                    | PromptError::Io(_)
                    | PromptError::Checkpoint(_)
                    | PromptError::InvalidResponse(_)
            );
        }
        matches!(cause.downcast_ref::<MetricsError>(), Some(MetricsError::ScorerUnavailable(_)))
    });
    if io_like {
        EXIT_IO
    } else {
        EXIT_VALIDATION
    }
}
