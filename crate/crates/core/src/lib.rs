//! Learning-objective generation and analysis.
//!
//! The crate covers the whole batch workflow: rendering the two-part prompt
//! for each course module, obtaining completions from a chat-completion
//! endpoint or a replay store, parsing the returned lists into learning
//! objectives, checking them against Bloom's taxonomy, and measuring
//! agreement between human annotators and automatic classifications.

pub mod agreement;
pub mod analysis;
pub mod bundle;
pub mod error;
pub mod lexicon;
pub mod matrix;
pub mod llm;
pub mod model;
pub mod parser;
pub mod prompt;

pub use error::{Error, Result};
pub use model::{
    bloom_group_of, AnnotationRecord, AssignmentSource, BloomAssignment, BloomGroup, BloomLevel,
    CourseSpec, GenerationParams, LearningObjective, ModuleKind, ModuleSpec,
};
