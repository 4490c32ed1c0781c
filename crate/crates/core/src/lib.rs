//! Toolkit for repairing speaker-diarization errors in two-speaker interview
//! transcripts and for running long, topic-aware interview dialogues.

pub mod annotate;
pub mod diarizer;
pub mod eval;
pub mod generator;
pub mod nn;
pub mod par;
pub mod session;
pub mod synth;
pub mod transcript;
pub mod vocab;
