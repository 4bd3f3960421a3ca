//! Fixed offline schedules for segmented DAGs.
//!
//! A segment is a set of mutually independent nodes, so its nodes can be
//! packed onto a cluster with McNaughton's wraparound rule: fill processor 0
//! from time 0, and when a node overruns the schedule length, split it into a
//! tail on the current processor and a head at time 0 on the next one. The
//! schedule length is `max(Cmax, ceil(W / width))`, which is optimal for
//! independent preemptable jobs. A whole DAG is flattened by concatenating
//! its segment schedules in order.
//!
//! The module also provides the Graham makespan bound for work-conserving
//! scheduling, the cluster sizes implied by either route, and the "rump"
//! computation used for splitting: what remains of a segmented DAG after the
//! first `cut` ticks of a flattened schedule have executed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taskmodel::{DagTask, SegmentedDag};
use crate::{NodeId, Tick};

/// One allocation of a node to a processor over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleInterval {
    pub node: NodeId,
    pub proc: usize,
    pub start: Tick,
    pub end: Tick,
}

/// A fixed schedule on `width` processors, `length` ticks long.
///
/// Interval times are relative to the schedule start. Within one processor
/// the intervals never overlap, and a wrapped node's head on processor p+1
/// always ends no later than its tail starts on processor p, so a node never
/// runs in parallel with itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlattenedSchedule {
    pub width: usize,
    pub length: Tick,
    pub intervals: Vec<ScheduleInterval>,
}

impl FlattenedSchedule {
    /// Total time allotted to each node.
    pub fn per_node_time(&self) -> BTreeMap<NodeId, Tick> {
        let mut out = BTreeMap::new();
        for iv in &self.intervals {
            *out.entry(iv.node).or_insert(0) += iv.end - iv.start;
        }
        out
    }

    /// Time each node receives strictly before `cut`.
    pub fn work_before(&self, cut: Tick) -> BTreeMap<NodeId, Tick> {
        let mut out = BTreeMap::new();
        for iv in &self.intervals {
            let done = iv.end.min(cut).saturating_sub(iv.start.min(cut));
            if done > 0 {
                *out.entry(iv.node).or_insert(0) += done;
            }
        }
        out
    }

    /// The first `cut` ticks of the schedule as a schedule of its own.
    /// Intervals straddling the cut are truncated; empty ones are dropped.
    pub fn prefix(&self, cut: Tick) -> FlattenedSchedule {
        let intervals = self
            .intervals
            .iter()
            .filter(|iv| iv.start < cut)
            .map(|iv| ScheduleInterval {
                end: iv.end.min(cut),
                ..*iv
            })
            .collect();
        FlattenedSchedule {
            width: self.width,
            length: cut.min(self.length),
            intervals,
        }
    }
}

/// Work still to execute, organised as ordered segments of
/// `(node, remaining wcet)` pairs. This is the working representation for
/// flattening and for rump DAGs during splitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedWork {
    pub segments: Vec<Vec<(NodeId, Tick)>>,
}

impl SegmentedWork {
    /// Segments a task and pairs each real node with its full WCET.
    pub fn from_dag(dag: &DagTask) -> Self {
        Self::from_segmented(dag, &dag.segment())
    }

    /// Pairs an existing segmentation with the task's WCETs.
    pub fn from_segmented(dag: &DagTask, sdag: &SegmentedDag) -> Self {
        let wcet: BTreeMap<NodeId, Tick> = dag.nodes.iter().map(|n| (n.id, n.wcet)).collect();
        let segments = sdag
            .segments
            .iter()
            .map(|seg| seg.iter().map(|&n| (n, wcet[&n])).collect())
            .collect();
        SegmentedWork { segments }
    }

    /// Remaining work summed over all segments.
    pub fn total(&self) -> Tick {
        self.segments
            .iter()
            .flat_map(|s| s.iter().map(|&(_, w)| w))
            .sum()
    }

    /// Sum over segments of the largest node WCET: no flattened schedule of
    /// this work can be shorter, whatever the width.
    pub fn serial_lower_bound(&self) -> Tick {
        self.segments
            .iter()
            .map(|s| s.iter().map(|&(_, w)| w).max().unwrap_or(0))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Why no schedule meeting the deadline exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Infeasible {
    /// The serial lower bound (sum of per-segment maxima) exceeds the
    /// deadline: no amount of processors shortens a flattened schedule below
    /// this bound.
    #[error("serial lower bound {lower_bound} exceeds deadline {deadline}")]
    SerialBound { lower_bound: Tick, deadline: Tick },
    /// The deadline does not exceed the longest path, so the Graham bound
    /// cannot meet it on any cluster size.
    #[error("deadline {deadline} within longest path {longest_path}")]
    DeadlineWithinLongestPath { longest_path: Tick, deadline: Tick },
}

/// The cut is not strictly inside the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cut {cut} outside (0, {length})")]
pub struct InvalidCut {
    pub cut: Tick,
    pub length: Tick,
}

/// Packs one segment's nodes onto `width` processors by the wraparound rule.
///
/// Nodes are placed in ascending node id. The schedule length is
/// `max(Cmax, ceil(W / width))`. A node whose allocation would run past the
/// schedule length is split into a tail interval on the current processor and
/// a head interval starting at 0 on the next; a node ending exactly at the
/// schedule length simply moves the cursor to the next processor. Zero-length
/// intervals are never emitted.
pub fn flatten_segment(nodes: &[(NodeId, Tick)], width: usize) -> FlattenedSchedule {
    assert!(width >= 1, "cluster width must be positive");
    let mut items: Vec<(NodeId, Tick)> =
        nodes.iter().copied().filter(|&(_, w)| w > 0).collect();
    items.sort_unstable_by_key(|&(id, _)| id);
    let total: Tick = items.iter().map(|&(_, w)| w).sum();
    let cmax: Tick = items.iter().map(|&(_, w)| w).max().unwrap_or(0);
    let length = cmax.max(total.div_ceil(width as Tick));

    let mut intervals = Vec::with_capacity(items.len());
    let mut offset: Tick = 0;
    let mut proc: usize = 0;
    for (node, wcet) in items {
        let end = offset + wcet;
        if end < length {
            intervals.push(ScheduleInterval { node, proc, start: offset, end });
            offset = end;
        } else if end == length {
            intervals.push(ScheduleInterval { node, proc, start: offset, end: length });
            offset = 0;
            proc += 1;
        } else {
            let head_end = end - length;
            // head_end <= offset because wcet <= length; the wrapped halves
            // can therefore never overlap in time
            assert!(head_end <= offset, "wrapped node would run in parallel with itself");
            intervals.push(ScheduleInterval { node, proc, start: offset, end: length });
            intervals.push(ScheduleInterval { node, proc: proc + 1, start: 0, end: head_end });
            offset = head_end;
            proc += 1;
        }
    }
    FlattenedSchedule { width, length, intervals }
}

/// Flattens every segment at the given width and concatenates the results in
/// segment order. The total length is the sum of the segment lengths.
pub fn flatten_dag(work: &SegmentedWork, width: usize) -> FlattenedSchedule {
    let mut intervals = Vec::new();
    let mut offset: Tick = 0;
    for seg in &work.segments {
        let fs = flatten_segment(seg, width);
        intervals.extend(fs.intervals.into_iter().map(|iv| ScheduleInterval {
            start: iv.start + offset,
            end: iv.end + offset,
            ..iv
        }));
        offset += fs.length;
    }
    FlattenedSchedule { width, length: offset, intervals }
}

/// Finds the smallest width whose flattened schedule meets the deadline.
///
/// Fails fast when the serial lower bound already exceeds the deadline.
/// Otherwise the search starts from `ceil(W / min(D, T))` — no smaller width
/// can fit the volume before the deadline — and widens until the schedule
/// fits. Termination is guaranteed because the length converges to the
/// serial lower bound as the width grows.
pub fn feasibly_max_flatten(dag: &DagTask) -> Result<FlattenedSchedule, Infeasible> {
    let work = SegmentedWork::from_dag(dag);
    let lb = work.serial_lower_bound();
    if lb > dag.deadline {
        return Err(Infeasible::SerialBound { lower_bound: lb, deadline: dag.deadline });
    }
    let horizon = dag.deadline.min(dag.period);
    let mut width = (work.total().div_ceil(horizon.max(1)) as usize).max(1);
    loop {
        let fs = flatten_dag(&work, width);
        if fs.length <= dag.deadline {
            return Ok(fs);
        }
        width += 1;
    }
}

/// Graham's makespan bound for any work-conserving schedule of a DAG with
/// volume `volume` and longest path `longest_path` on `width` processors.
pub fn graham_makespan(volume: Tick, longest_path: Tick, width: usize) -> Tick {
    assert!(volume >= longest_path, "volume cannot be below the longest path");
    assert!(width >= 1);
    longest_path + (volume - longest_path).div_ceil(width as Tick)
}

/// Smallest cluster size for which the Graham bound meets the deadline,
/// at least 1. Infeasible when the deadline does not exceed the longest path.
pub fn graham_cluster_size(
    volume: Tick,
    longest_path: Tick,
    deadline: Tick,
) -> Result<usize, Infeasible> {
    if deadline <= longest_path {
        return Err(Infeasible::DeadlineWithinLongestPath { longest_path, deadline });
    }
    let width = (volume - longest_path).div_ceil(deadline - longest_path);
    Ok((width as usize).max(1))
}

/// How a dedicated cluster for a task should execute it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Requirement {
    /// Run the fixed flattened schedule; cluster width is the schedule width
    /// and the budget is its length.
    Flattened(FlattenedSchedule),
    /// Run any work-conserving node scheduler on `width` processors; the
    /// budget is the Graham bound.
    WorkConserving { width: usize, makespan: Tick },
}

impl Requirement {
    pub fn width(&self) -> usize {
        match self {
            Requirement::Flattened(fs) => fs.width,
            Requirement::WorkConserving { width, .. } => *width,
        }
    }

    /// Execution budget of the encapsulating gang task.
    pub fn budget(&self) -> Tick {
        match self {
            Requirement::Flattened(fs) => fs.length,
            Requirement::WorkConserving { makespan, .. } => *makespan,
        }
    }
}

/// Sizes a dedicated cluster for a task, taking the smaller of the flattened
/// width and the Graham width. Ties prefer the flattened schedule, whose
/// budget is typically shorter. Infeasible only when both routes are.
pub fn cluster_size_requirements(dag: &DagTask) -> Result<Requirement, Infeasible> {
    let volume = dag.volume();
    let longest = dag.longest_path();
    let flat = feasibly_max_flatten(dag);
    let graham = graham_cluster_size(volume, longest, dag.deadline);
    match (flat, graham) {
        (Ok(fs), Ok(gw)) if gw < fs.width => {
            let makespan = graham_makespan(volume, longest, gw);
            debug_assert!(makespan <= dag.deadline);
            Ok(Requirement::WorkConserving { width: gw, makespan })
        }
        (Ok(fs), _) => Ok(Requirement::Flattened(fs)),
        (Err(_), Ok(gw)) => {
            let makespan = graham_makespan(volume, longest, gw);
            debug_assert!(makespan <= dag.deadline);
            Ok(Requirement::WorkConserving { width: gw, makespan })
        }
        (Err(e), Err(_)) => Err(e),
    }
}

/// What remains of segmented work after the first `cut` ticks of its
/// flattened schedule `fs` have executed.
///
/// Each node keeps its WCET minus the time it received before the cut;
/// completed nodes disappear, as do segments left empty. Segment order is
/// preserved, so the rump can be re-flattened at any width.
pub fn leftover_dag(
    work: &SegmentedWork,
    fs: &FlattenedSchedule,
    cut: Tick,
) -> Result<SegmentedWork, InvalidCut> {
    if cut == 0 || cut >= fs.length {
        return Err(InvalidCut { cut, length: fs.length });
    }
    let done = fs.work_before(cut);
    let mut segments = Vec::new();
    for seg in &work.segments {
        let mut rest = Vec::new();
        for &(node, wcet) in seg {
            let executed = done.get(&node).copied().unwrap_or(0);
            debug_assert!(executed <= wcet, "schedule executed node {node} beyond its wcet");
            let remaining = wcet.saturating_sub(executed);
            if remaining > 0 {
                rest.push((node, remaining));
            }
        }
        if !rest.is_empty() {
            segments.push(rest);
        }
    }
    Ok(SegmentedWork { segments })
}
