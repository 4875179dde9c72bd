//! Analysis of viral campaigns as generation-indexed branching processes.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`event`] — ingest transmission event logs (CSV) into an [`EventLog`].
//! 2. [`forest`] — replay the log into a [`CascadeForest`]: every infected
//!    actor with its generation (hop count from a seed) and infection time.
//! 3. [`series`] — collapse the forest into per-generation counts
//!    (infected, cumulative, decisions, infections sent).
//! 4. [`metrics`] — per-generation epidemic parameters: contagion `p`,
//!    intensity `λ`, and the threshold parameter `ETP = p·λ` with
//!    sub/super/critical classification.
//! 5. [`model`] — a deterministic finite-population branching recursion
//!    projecting expected infections per generation and total reach.
//! 6. [`estimator`] — fit the model to the first `k` generations only and
//!    sweep `k`, reporting fit errors and reach errors per prefix length.
//! 7. [`temporal`] — the time × generation structure: period matrices,
//!    cumulative curves, generation first-occurrence, stabilization.
//! 8. [`simulator`] — seeded stochastic campaign generator emitting event
//!    logs compatible with stage 1, used as ground truth in tests and for
//!    synthetic workloads.

pub mod estimator;
pub mod event;
pub mod forest;
pub mod metrics;
pub mod model;
pub mod series;
pub mod simulator;
pub mod temporal;

mod util;

pub use estimator::{FitReport, FitResult, FitRow, SearchConfig};
pub use event::{EventLog, EventRecord, FormatConfig, ParsedLog, TimestampFormat};
pub use forest::{CascadeForest, ForestNode, OrphanPolicy};
pub use metrics::{Criticality, GenerationParams, Summary};
pub use model::{ModelParams, Trajectory};
pub use series::GenerationSeries;
pub use simulator::SimParams;
pub use temporal::{PeriodMatrix, StabilizationReport};
