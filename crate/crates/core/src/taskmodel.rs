//! The sporadic DAG task model.
//!
//! A [`DagTask`] is a directed acyclic graph of sequential subtasks (nodes),
//! each with a worst-case execution time, released sporadically with a
//! minimum inter-arrival time and a constrained deadline. Every task carries
//! one dummy source and one dummy sink node of zero WCET; all real work sits
//! between them.
//!
//! Besides validation and the derived metrics (volume, longest path,
//! utilisation), this module computes the segmentation of a DAG: nodes are
//! grouped by their *maximum* hop distance from the dummy source, and the
//! groups execute strictly in index order. Any edge then crosses from a lower
//! segment to a strictly higher one, so running segment k to completion
//! before segment k+1 starts can never violate a precedence constraint, and
//! nodes inside one segment are mutually independent.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{NodeId, TaskId, Tick};

/// One node of a DAG task: an identifier and a worst-case execution time.
///
/// `wcet == 0` is reserved for the dummy source and sink; real nodes need at
/// least one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub wcet: Tick,
}

/// A sporadic DAG task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagTask {
    pub task_id: TaskId,
    pub nodes: Vec<NodeSpec>,
    /// Directed edges as `(from, to)` pairs of node ids.
    pub edges: Vec<(NodeId, NodeId)>,
    /// Minimum inter-arrival time.
    pub period: Tick,
    /// Relative deadline, at most `period`.
    pub deadline: Tick,
}

/// A broken invariant found by [`validate`]. Violations are data, not
/// errors: an invalid task is a property of the input, not a fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `deadline > period`; only constrained deadlines are supported.
    DeadlineExceedsPeriod { deadline: Tick, period: Tick },
    ZeroPeriod,
    ZeroDeadline,
    DuplicateNodeId { node: NodeId },
    /// An edge endpoint names no node of the task.
    UnknownEdgeEndpoint { from: NodeId, to: NodeId },
    SelfLoop { node: NodeId },
    /// The edge relation admits no topological order.
    Cycle,
    /// Number of nodes with no incoming edges differs from one.
    SourceCount { found: Vec<NodeId> },
    /// Number of nodes with no outgoing edges differs from one.
    SinkCount { found: Vec<NodeId> },
    /// The dummy source or sink carries a non-zero WCET.
    DummyWithWork { node: NodeId, wcet: Tick },
    /// A real (non-dummy) node has WCET zero.
    RealNodeWithoutWork { node: NodeId },
    /// A real node is not reachable from the dummy source.
    UnreachableFromSource { node: NodeId },
    /// A real node cannot reach the dummy sink.
    CannotReachSink { node: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DeadlineExceedsPeriod { deadline, period } => {
                write!(f, "deadline {deadline} exceeds period {period}")
            }
            Violation::ZeroPeriod => write!(f, "period is zero"),
            Violation::ZeroDeadline => write!(f, "deadline is zero"),
            Violation::DuplicateNodeId { node } => write!(f, "duplicate node id {node}"),
            Violation::UnknownEdgeEndpoint { from, to } => {
                write!(f, "edge ({from}, {to}) references an unknown node")
            }
            Violation::SelfLoop { node } => write!(f, "self loop on node {node}"),
            Violation::Cycle => write!(f, "edge relation contains a cycle"),
            Violation::SourceCount { found } => {
                write!(f, "expected exactly one source node, found {found:?}")
            }
            Violation::SinkCount { found } => {
                write!(f, "expected exactly one sink node, found {found:?}")
            }
            Violation::DummyWithWork { node, wcet } => {
                write!(f, "dummy node {node} has non-zero wcet {wcet}")
            }
            Violation::RealNodeWithoutWork { node } => {
                write!(f, "real node {node} has wcet 0")
            }
            Violation::UnreachableFromSource { node } => {
                write!(f, "node {node} is unreachable from the source")
            }
            Violation::CannotReachSink { node } => {
                write!(f, "node {node} cannot reach the sink")
            }
        }
    }
}

/// The segmentation of a DAG task by maximum hop distance from the source.
///
/// `segments[k]` holds the real nodes whose maximum hop distance is `k + 1`;
/// the dummy source (distance 0) and the dummy sink never appear in a
/// segment. Node ids inside each segment are in ascending order, which is
/// also the packing order used when segments are flattened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedDag {
    pub task_id: TaskId,
    pub segments: Vec<Vec<NodeId>>,
    /// Maximum hop distance from the dummy source for every node, dummies
    /// included.
    pub xi: BTreeMap<NodeId, usize>,
}

impl SegmentedDag {
    /// Number of segments.
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

impl DagTask {
    fn wcet_by_id(&self) -> BTreeMap<NodeId, Tick> {
        self.nodes.iter().map(|n| (n.id, n.wcet)).collect()
    }

    fn successors(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut succ: BTreeMap<NodeId, Vec<NodeId>> =
            self.nodes.iter().map(|n| (n.id, Vec::new())).collect();
        for &(from, to) in &self.edges {
            if let Some(s) = succ.get_mut(&from) {
                s.push(to);
            }
        }
        for s in succ.values_mut() {
            s.sort_unstable();
            s.dedup();
        }
        succ
    }

    fn predecessors(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut pred: BTreeMap<NodeId, Vec<NodeId>> =
            self.nodes.iter().map(|n| (n.id, Vec::new())).collect();
        for &(from, to) in &self.edges {
            if let Some(p) = pred.get_mut(&to) {
                p.push(from);
            }
        }
        for p in pred.values_mut() {
            p.sort_unstable();
            p.dedup();
        }
        pred
    }

    /// Nodes in a topological order (ascending node id among ready nodes),
    /// or `None` if the edge relation has a cycle. Edges with unknown
    /// endpoints are ignored.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let succ = self.successors();
        let mut indegree: BTreeMap<NodeId, usize> =
            self.nodes.iter().map(|n| (n.id, 0)).collect();
        for s in succ.values() {
            for &to in s {
                if let Some(d) = indegree.get_mut(&to) {
                    *d += 1;
                }
            }
        }
        let mut ready: Vec<NodeId> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&next) = ready.first() {
            ready.remove(0);
            order.push(next);
            for &to in &succ[&next] {
                let d = indegree.get_mut(&to).unwrap();
                *d -= 1;
                if *d == 0 {
                    // keep the ready list sorted so the order is total
                    let pos = ready.binary_search(&to).unwrap_or_else(|p| p);
                    ready.insert(pos, to);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// The dummy source: the unique node without incoming edges.
    pub fn source(&self) -> Option<NodeId> {
        let pred = self.predecessors();
        let mut it = pred.iter().filter(|(_, p)| p.is_empty()).map(|(&n, _)| n);
        let first = it.next()?;
        it.next().is_none().then_some(first)
    }

    /// The dummy sink: the unique node without outgoing edges.
    pub fn sink(&self) -> Option<NodeId> {
        let succ = self.successors();
        let mut it = succ.iter().filter(|(_, s)| s.is_empty()).map(|(&n, _)| n);
        let first = it.next()?;
        it.next().is_none().then_some(first)
    }

    /// Real nodes: everything except the dummy source and sink, ascending id.
    pub fn real_nodes(&self) -> Vec<NodeId> {
        let source = self.source();
        let sink = self.sink();
        let mut ids: Vec<NodeId> = self
            .nodes
            .iter()
            .map(|n| n.id)
            .filter(|id| Some(*id) != source && Some(*id) != sink)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Total work: the sum of all node WCETs.
    pub fn volume(&self) -> Tick {
        self.nodes.iter().map(|n| n.wcet).sum()
    }

    /// Heavy tasks need more than one processor worth of capacity
    /// (volume strictly greater than period).
    pub fn is_heavy(&self) -> bool {
        self.volume() > self.period
    }

    /// Utilisation as an exact fraction, volume / period.
    pub fn utilisation(&self) -> crate::Frac {
        crate::frac(self.volume(), self.period)
    }

    /// Length of the longest source-to-sink path, by summed WCETs.
    ///
    /// Dynamic programming over a topological order; the dummy endpoints
    /// contribute zero.
    pub fn longest_path(&self) -> Tick {
        let order = match self.topological_order() {
            Some(o) => o,
            None => return 0,
        };
        let wcet = self.wcet_by_id();
        let pred = self.predecessors();
        let mut dist: BTreeMap<NodeId, Tick> = BTreeMap::new();
        let mut best = 0;
        for n in order {
            let base = pred[&n].iter().map(|p| dist[p]).max().unwrap_or(0);
            let d = base + wcet[&n];
            best = best.max(d);
            dist.insert(n, d);
        }
        best
    }

    /// Groups real nodes into segments by maximum hop distance from the
    /// dummy source.
    ///
    /// The maximum (not minimum) distance matters: a node reachable both
    /// directly and through an intermediate node must wait for the longer
    /// chain, so it lands in the later segment.
    pub fn segment(&self) -> SegmentedDag {
        let order = self.topological_order().unwrap_or_default();
        let pred = self.predecessors();
        let source = self.source();
        let sink = self.sink();
        let mut xi: BTreeMap<NodeId, usize> = BTreeMap::new();
        for n in order {
            let hops = pred[&n]
                .iter()
                .filter_map(|p| xi.get(p).map(|&x| x + 1))
                .max()
                .unwrap_or(0);
            xi.insert(n, hops);
        }
        let max_real_xi = self
            .nodes
            .iter()
            .map(|n| n.id)
            .filter(|id| Some(*id) != source && Some(*id) != sink)
            .filter_map(|id| xi.get(&id).copied())
            .max()
            .unwrap_or(0);
        let mut segments = vec![Vec::new(); max_real_xi];
        for n in self.nodes.iter().map(|n| n.id) {
            if Some(n) == source || Some(n) == sink {
                continue;
            }
            if let Some(&k) = xi.get(&n) {
                if k >= 1 {
                    segments[k - 1].push(n);
                }
            }
        }
        for seg in &mut segments {
            seg.sort_unstable();
        }
        // a valid DAG leaves no segment empty; drop trailing artefacts from
        // invalid inputs rather than panic
        segments.retain(|s| !s.is_empty());
        SegmentedDag {
            task_id: self.task_id,
            segments,
            xi,
        }
    }
}

/// Least common multiple of all task periods (1 for an empty set); the
/// natural simulation horizon.
pub fn hyperperiod(tasks: &[DagTask]) -> Tick {
    use num_integer::Integer;
    tasks.iter().fold(1, |acc, t| acc.lcm(&t.period))
}

/// Checks every task invariant and reports each violation found.
///
/// An empty list means the task is valid. Reachability checks are skipped
/// while the graph is cyclic or lacks unique dummies, since they would be
/// meaningless.
pub fn validate(dag: &DagTask) -> Vec<Violation> {
    let mut out = Vec::new();
    if dag.period == 0 {
        out.push(Violation::ZeroPeriod);
    }
    if dag.deadline == 0 {
        out.push(Violation::ZeroDeadline);
    }
    if dag.deadline > dag.period {
        out.push(Violation::DeadlineExceedsPeriod {
            deadline: dag.deadline,
            period: dag.period,
        });
    }

    let mut seen = BTreeMap::new();
    for n in &dag.nodes {
        if seen.insert(n.id, ()).is_some() {
            out.push(Violation::DuplicateNodeId { node: n.id });
        }
    }
    let mut edges_ok = true;
    for &(from, to) in &dag.edges {
        if !seen.contains_key(&from) || !seen.contains_key(&to) {
            out.push(Violation::UnknownEdgeEndpoint { from, to });
            edges_ok = false;
        } else if from == to {
            out.push(Violation::SelfLoop { node: from });
            edges_ok = false;
        }
    }
    if !edges_ok {
        return out;
    }

    let acyclic = dag.topological_order().is_some();
    if !acyclic {
        out.push(Violation::Cycle);
        return out;
    }

    let pred = dag.predecessors();
    let succ = dag.successors();
    let sources: Vec<NodeId> = pred
        .iter()
        .filter(|(_, p)| p.is_empty())
        .map(|(&n, _)| n)
        .collect();
    let sinks: Vec<NodeId> = succ
        .iter()
        .filter(|(_, s)| s.is_empty())
        .map(|(&n, _)| n)
        .collect();
    let mut dummies_ok = true;
    if sources.len() != 1 {
        out.push(Violation::SourceCount { found: sources.clone() });
        dummies_ok = false;
    }
    if sinks.len() != 1 {
        out.push(Violation::SinkCount { found: sinks.clone() });
        dummies_ok = false;
    }
    if !dummies_ok {
        return out;
    }
    let source = sources[0];
    let sink = sinks[0];
    let wcet = dag.wcet_by_id();
    for &d in &[source, sink] {
        if wcet[&d] != 0 {
            out.push(Violation::DummyWithWork { node: d, wcet: wcet[&d] });
        }
    }
    for n in &dag.nodes {
        if n.id != source && n.id != sink && n.wcet == 0 {
            out.push(Violation::RealNodeWithoutWork { node: n.id });
        }
    }

    // forward reachability from the source
    let mut from_source: BTreeMap<NodeId, bool> =
        dag.nodes.iter().map(|n| (n.id, false)).collect();
    from_source.insert(source, true);
    for n in dag.topological_order().unwrap() {
        if pred[&n].iter().any(|p| from_source[p]) {
            from_source.insert(n, true);
        }
    }
    // backward reachability to the sink
    let mut to_sink: BTreeMap<NodeId, bool> =
        dag.nodes.iter().map(|n| (n.id, false)).collect();
    to_sink.insert(sink, true);
    for n in dag.topological_order().unwrap().into_iter().rev() {
        if succ[&n].iter().any(|s| to_sink[s]) {
            to_sink.insert(n, true);
        }
    }
    for n in dag.nodes.iter().map(|n| n.id) {
        if n == source || n == sink {
            continue;
        }
        if !from_source[&n] {
            out.push(Violation::UnreachableFromSource { node: n });
        }
        if !to_sink[&n] {
            out.push(Violation::CannotReachSink { node: n });
        }
    }
    out
}
