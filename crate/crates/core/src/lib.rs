//! Association tests over sets of video embeddings.
//!
//! The crate measures how strongly sets of pooled video embeddings associate
//! with attribute sets: the two-target VEAT statistic, the single-category
//! SC-VEAT statistic, Cohen's d effect sizes and one-sided permutation tests
//! (exact enumeration or seeded Monte Carlo). Around the engine sit the
//! analysis helpers used to audit generated video (demographic correlations,
//! debias-condition comparisons, rater agreement), a declarative battery
//! runner and report emitters.

pub mod association;
pub mod embedding;
pub mod error;
pub mod report;
pub mod stats;
pub mod study;

pub use association::{
    cosine, item_score, run_scveat, run_veat, scveat_effect_size, scveat_p_value, scveat_statistic,
    veat_effect_size, veat_p_value, veat_statistic, AssociationScore, EngineConfig, Method, PValue,
    PermutationConfig, StdDivisor, TestKind, TestResult, TieRule,
};
pub use embedding::{
    pool_frames, read_archive, sampling_schedule, verify_archive, write_archive, ArchiveReport,
    ConceptSet, FrameSequence, PoolMode, Role, VideoEmbedding,
};
pub use error::{Error, Result};
pub use report::{read_results, write_report};
pub use study::{
    emit_provenance, load_battery, run_battery, Battery, BatteryConfig, BatteryResults,
    ReferenceData, RunManifest,
};
