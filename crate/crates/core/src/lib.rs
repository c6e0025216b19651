//! Building and scoring four-option multiple-choice benchmarks from
//! free-form QA pairs.
//!
//! The crate covers the whole path: validating QA and MCQ records
//! ([`model`], [`jsonl`]), talking to chat-completion endpoints
//! ([`gateway`]), LLM-assisted augmentation into MCQ items ([`augment`]),
//! stratified splitting ([`split`]), fine-tuning prompt rendering
//! ([`prompt`]) and zero-shot evaluation ([`eval`]).

pub mod augment;
pub mod country;
pub mod eval;
pub mod gateway;
pub mod jsonl;
pub mod model;
pub mod prompt;
pub mod seeding;
pub mod split;
pub mod text;
pub mod tokens;
