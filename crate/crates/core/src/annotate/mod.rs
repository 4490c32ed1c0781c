//! Pseudo annotation: simulated filler-word diarization errors with gold
//! boundary labels, plus an error-type analyzer for real transcripts.

mod dist;
mod inject;
mod labels;
mod lexicon;
mod taxonomy;

pub use dist::{DistError, DistRow, ErrorDistribution, SHARE_SUM_TOLERANCE};
pub use inject::{
    inject_dialogue, inject_errors, inject_errors_with, DialogueInjection, Injection, InjectionReport, MAX_CHAIN,
};
pub use labels::{
    check_corpus_alignment, label_clean, label_with, load_labels, read_labels, save_labels, write_labels,
    BoundaryLabels, LabelError, LabelScheme,
};
pub use lexicon::{filler_boundary, BoundaryPosition, FillerBoundary, FillerLexicon, DEFAULT_FILLERS};
pub use taxonomy::{analyze_taxonomy, ErrorTaxonomyCount};
