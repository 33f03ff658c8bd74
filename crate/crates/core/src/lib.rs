//! Quality-diversity optimization with CMA-MAE and three scalable variants.
//!
//! The crate is split along the pieces of the algorithm:
//!
//! * [`es`] holds the ask/tell evolution strategies (full CMA-ES, LM-MA-ES,
//!   sep-CMA-ES and OpenAI-ES) behind a single [`es::EsState`] type.
//! * [`archive`] holds the soft annealed archive and the best-ever result
//!   archive used for reporting.
//! * [`scheduler`] runs the emitter loop that ties both together.
//! * [`domains`] and [`metrics`] provide the benchmark problems and the
//!   QD score / coverage / best summaries.
//! * [`experiment`] is the file-based harness used by the `cmamae` CLI.

pub mod archive;
pub mod domains;
pub mod es;
pub mod experiment;
pub mod metrics;
pub mod rng;
pub mod scheduler;

pub use archive::{
    insert, ArchiveError, GridSpec, InsertResult, ResultArchive, SoftArchive, SolutionRecord,
};
pub use domains::{ArmDomain, Domain, DomainKind, SphereDomain};
pub use es::{EsError, EsKind, EsParams, EsState, RankedBatch};
pub use metrics::{summarize, MetricsReport};
pub use scheduler::{Emitter, IterationStats, RunOutput, Scheduler, SchedulerConfig, SchedulerError};
