//! Schedulability toolkit for sporadic parallel DAG tasks on identical
//! multiprocessors.
//!
//! The crate implements segmented-flattened-and-split (SFS) scheduling: DAG
//! tasks are cut into parallel segments by maximum hop distance, each segment
//! is turned into a fixed multiprocessor schedule with McNaughton's wraparound
//! rule, and the resulting gang tasks are placed onto processor clusters with
//! a two-pass assignment that may split a task's execution across clusters in
//! the style of C=D semi-partitioning. A federated-scheduling baseline, a
//! synthetic workload generator, a tick-level validating simulator, and JSON
//! file formats round out the toolkit.
//!
//! Modules mirror the pipeline:
//!
//! - [`taskmodel`] — DAG tasks, validation, derived metrics, segmentation
//! - [`flatten`] — wraparound schedules, Graham bounds, cluster sizing, rumps
//! - [`analysis`] — uniprocessor EDF tests and C=D sensitivity analysis
//! - [`assign`] — the two-pass SFS assignment and the federated baseline
//! - [`generator`] — UUniFast-Discard workloads with layered random DAGs
//! - [`simulate`] — discrete-time execution of a plan plus trace checking
//! - [`formats`] — versioned JSON schemas for task sets and system plans

pub mod analysis;
pub mod assign;
pub mod flatten;
pub mod formats;
pub mod generator;
pub mod simulate;
pub mod taskmodel;

/// Integer time. All durations, deadlines and periods are tick counts.
pub type Tick = u64;

/// Identifies a node within one DAG task.
pub type NodeId = usize;

/// Identifies a DAG task within a task set.
pub type TaskId = usize;

/// Exact fraction used for utilisations, densities and admission bounds.
///
/// Signed so that expressions like `1 - total_density` stay exact; i128
/// components leave ample headroom for sums over desk-scale task sets.
pub type Frac = num_rational::Ratio<i128>;

/// Builds the fraction `num / den` from tick-sized integers.
pub fn frac(num: Tick, den: Tick) -> Frac {
    Frac::new(num as i128, den as i128)
}
