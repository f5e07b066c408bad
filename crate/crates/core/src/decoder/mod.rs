//! Intent decoding: a video projection into a small causal text decoder,
//! fused with OCR and intent text, trained through low-rank adapters.

mod fusion;
mod model;
mod train;
mod vocab;

pub use fusion::{build_fusion, ocr_filter, FusionSequence};
pub use model::{DecodeMode, DecoderConfig, FusionOptions, IntentDecoder, Stores};
pub use train::{build_vocab, encode_ocr, DecoderExample, FinetuneConfig, Finetuner, Prediction, StepReport};
pub use vocab::{Vocab, END, PAD, SEP, UNK};
