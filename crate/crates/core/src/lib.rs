//! Benchmark engine for few-shot relation classification with a
//! none-of-the-above (NOTA) category.
//!
//! The crate turns supervised relation classification corpora into few-shot
//! datasets with disjoint relation sets per section, samples N-way K-shot
//! episodes under realistic / fixed-NOTA-rate / no-NOTA regimes, trains
//! embedding-space classifiers whose NOTA decision is a learned threshold or
//! one or more learned NOTA vectors, and computes episodic and exhaustive
//! evaluation metrics.
//!
//! Module map:
//! - [`corpus`]: data model, ingestion, native serialization, embedding stores
//! - [`transform`]: supervised corpus -> few-shot dataset conversion
//! - [`sampler`]: episode generation and episode files
//! - [`encoder`]: trainable surrogate instance encoder + precomputed import
//! - [`rules`]: prototypes, similarity, decision rules, constraint checkers
//! - [`training`]: episodic training loop with early stopping
//! - [`evaluation`]: episodic metrics and exhaustive 1-way 1-shot evaluation

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod rng;
pub mod rules;
pub mod sampler;
pub mod training;
pub mod transform;
pub mod util;

pub use corpus::{
    load_corpus, load_embeddings, save_corpus, CorpusSchema, EmbeddingStore, LabelId,
    RelationInstance, Section, SectionMap, Span, SupervisedCorpus,
};
pub use error::{Error, Result};
pub use transform::{
    apply_split, load_dataset, plan_multiple_splits, plan_split, save_dataset, split_stats,
    FewShotDataset, PinnedRelations, SplitPlan, SplitStats,
};
