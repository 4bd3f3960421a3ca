//! Discrete-time validation of system plans.
//!
//! [`simulate_plan`] executes a successful plan under the worst-case arrival
//! pattern — every task releases at time zero and then strictly periodically —
//! and records who owns every processor at every tick. Each cluster (and each
//! bin, as a width-1 cluster) runs uniprocessor EDF over its gang pieces:
//! at most one piece executes per cluster per tick, in lockstep across all of
//! the cluster's processors. A flattened piece replays its fixed schedule,
//! leaving payload holes idle; a work-conserving piece list-schedules its
//! task's ready nodes. Split piece `k + 1` releases the moment piece `k`'s
//! budget completes.
//!
//! [`check_trace`] then re-derives everything from the recorded trace alone:
//! deadlines, per-node budgets, no self-parallelism, precedence, gang
//! lockstep, and per-target EDF order. The module also houses the tick-level
//! EDF oracle used to cross-check the analytical schedulability test, and
//! the work-conserving list scheduler whose makespans the Graham bound must
//! dominate.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use crate::analysis::SeqTask;
use crate::assign::{GangPiece, Outcome, PiecePayload, SystemPlan, Target};
use crate::taskmodel::DagTask;
use crate::{NodeId, TaskId, Tick};

/// Who owns one processor during one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Idle,
    /// A piece holds the processor and executes `node`.
    Busy { task: TaskId, piece: usize, job: usize, node: NodeId },
    /// A piece holds the processor but schedules no node on it this tick
    /// (a hole in a flattened payload, or spare width under list
    /// scheduling).
    Reserved { task: TaskId, piece: usize, job: usize },
}

impl Owner {
    fn piece_key(&self) -> Option<(TaskId, usize, usize)> {
        match *self {
            Owner::Idle => None,
            Owner::Busy { task, piece, job, .. } | Owner::Reserved { task, piece, job } => {
                Some((task, piece, job))
            }
        }
    }
}

/// One job of one DAG task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JobRecord {
    pub task: TaskId,
    pub job: usize,
    pub release: Tick,
    pub deadline: Tick,
    pub completion: Option<Tick>,
}

/// Tick-level execution record.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub horizon: Tick,
    /// `owners[proc][tick]`
    pub owners: Vec<Vec<Owner>>,
    pub jobs: Vec<JobRecord>,
}

impl SimTrace {
    /// Writes the trace as `tick,processor,owner` CSV rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tick,processor,owner")?;
        for (p, row) in self.owners.iter().enumerate() {
            for (t, owner) in row.iter().enumerate() {
                let label = match owner {
                    Owner::Idle => "idle".to_string(),
                    Owner::Busy { task, node, .. } => format!("task{task}.node{node}"),
                    Owner::Reserved { task, .. } => format!("task{task}.reserved"),
                };
                writeln!(out, "{t},{p},{label}")?;
            }
        }
        Ok(())
    }
}

/// A broken runtime guarantee found in a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    DeadlineMiss { task: TaskId, job: usize, deadline: Tick, completion: Option<Tick> },
    WrongNodeBudget { task: TaskId, job: usize, node: NodeId, served: Tick, wcet: Tick },
    SelfParallel { task: TaskId, job: usize, node: NodeId, tick: Tick },
    PrecedenceViolation { task: TaskId, job: usize, from: NodeId, to: NodeId },
    LockstepBroken { target: Target, tick: Tick },
    EdfOrderBroken { target: Target, tick: Tick },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceViolation::DeadlineMiss { task, job, deadline, completion } => write!(
                f,
                "task {task} job {job} missed deadline {deadline} (completion {completion:?})"
            ),
            TraceViolation::WrongNodeBudget { task, job, node, served, wcet } => write!(
                f,
                "task {task} job {job} node {node} served {served} ticks, wcet {wcet}"
            ),
            TraceViolation::SelfParallel { task, job, node, tick } => write!(
                f,
                "task {task} job {job} node {node} on two processors at tick {tick}"
            ),
            TraceViolation::PrecedenceViolation { task, job, from, to } => write!(
                f,
                "task {task} job {job}: node {to} started before predecessor {from} finished"
            ),
            TraceViolation::LockstepBroken { target, tick } => {
                write!(f, "{target:?} not in lockstep at tick {tick}")
            }
            TraceViolation::EdfOrderBroken { target, tick } => {
                write!(f, "{target:?} violated EDF order at tick {tick}")
            }
        }
    }
}

/// Per-task data shared by the simulator and the checker.
struct TaskInfo<'a> {
    dag: &'a DagTask,
    volume: Tick,
    real_nodes: Vec<NodeId>,
    /// real predecessors of each real node
    preds: BTreeMap<NodeId, Vec<NodeId>>,
}

impl<'a> TaskInfo<'a> {
    fn new(dag: &'a DagTask) -> Self {
        let real: Vec<NodeId> = dag.real_nodes();
        let real_set: std::collections::BTreeSet<NodeId> = real.iter().copied().collect();
        let mut preds: BTreeMap<NodeId, Vec<NodeId>> =
            real.iter().map(|&n| (n, Vec::new())).collect();
        for &(from, to) in &dag.edges {
            if real_set.contains(&from) && real_set.contains(&to) {
                preds.get_mut(&to).unwrap().push(from);
            }
        }
        TaskInfo { dag, volume: dag.volume(), real_nodes: real, preds }
    }
}

/// One assignment target with its global processor slice.
struct Unit<'a> {
    target: Target,
    first_proc: usize,
    width: usize,
    pieces: Vec<&'a GangPiece>,
}

fn units_of<'a>(plan: &'a SystemPlan) -> Vec<Unit<'a>> {
    let mut units = Vec::new();
    let mut next_proc = 0;
    for cluster in &plan.clusters {
        units.push(Unit {
            target: Target::Cluster(cluster.cluster_id),
            first_proc: next_proc,
            width: cluster.width,
            pieces: cluster.members.iter().collect(),
        });
        next_proc += cluster.width;
    }
    for bin in &plan.bins {
        units.push(Unit {
            target: Target::Bin(bin.bin_id),
            first_proc: next_proc,
            width: 1,
            pieces: bin.members.iter().collect(),
        });
        next_proc += 1;
    }
    units
}

/// Per-(piece, job) execution state.
#[derive(Clone, Copy)]
struct PieceJob {
    release: Option<Tick>,
    served: Tick,
    done: bool,
}

/// Sorted intervals per payload processor slot for O(log n) lookup.
struct PayloadIndex {
    by_slot: Vec<Vec<(Tick, Tick, NodeId)>>,
}

impl PayloadIndex {
    fn new(piece: &GangPiece, width: usize) -> Option<Self> {
        match &piece.payload {
            PiecePayload::Flattened(fs) => {
                debug_assert_eq!(fs.width, width, "payload width must match its target");
                let mut by_slot = vec![Vec::new(); width];
                for iv in &fs.intervals {
                    by_slot[iv.proc].push((iv.start, iv.end, iv.node));
                }
                for slot in &mut by_slot {
                    slot.sort_unstable();
                }
                Some(PayloadIndex { by_slot })
            }
            PiecePayload::WorkConserving => None,
        }
    }

    fn node_at(&self, slot: usize, local: Tick) -> Option<NodeId> {
        let slots = &self.by_slot[slot];
        let idx = slots.partition_point(|&(start, _, _)| start <= local);
        if idx == 0 {
            return None;
        }
        let (start, end, node) = slots[idx - 1];
        (local >= start && local < end).then_some(node)
    }
}

/// Remaining work of one job of a work-conserving gang task.
struct WcJob {
    remaining: BTreeMap<NodeId, Tick>,
}

/// Executes a successful plan for `horizon` ticks under synchronous,
/// strictly periodic arrivals.
///
/// The horizon should be at least the hyperperiod of all task periods so
/// every job's deadline falls inside the trace.
pub fn simulate_plan(tasks: &[DagTask], plan: &SystemPlan, horizon: Tick) -> SimTrace {
    assert!(
        matches!(plan.outcome, Outcome::Success),
        "only successful plans can be simulated"
    );
    let infos: BTreeMap<TaskId, TaskInfo> =
        tasks.iter().map(|t| (t.task_id, TaskInfo::new(t))).collect();
    let units = units_of(plan);

    let mut owners = vec![vec![Owner::Idle; horizon as usize]; plan.m];

    // job bookkeeping for every task, whether or not it owns pieces
    let mut delivered: BTreeMap<(TaskId, usize), Tick> = BTreeMap::new();
    let mut jobs: Vec<JobRecord> = Vec::new();
    let mut job_index: BTreeMap<(TaskId, usize), usize> = BTreeMap::new();
    for info in infos.values() {
        let period = info.dag.period;
        let mut j = 0;
        while (j as Tick) * period < horizon {
            let release = (j as Tick) * period;
            job_index.insert((info.dag.task_id, j), jobs.len());
            jobs.push(JobRecord {
                task: info.dag.task_id,
                job: j,
                release,
                deadline: release + info.dag.deadline,
                completion: (info.volume == 0).then_some(release),
            });
            delivered.insert((info.dag.task_id, j), 0);
            j += 1;
        }
    }

    // piece state and payload indices per unit member
    let mut states: Vec<Vec<Vec<PieceJob>>> = Vec::new();
    let mut payloads: Vec<Vec<Option<PayloadIndex>>> = Vec::new();
    for unit in &units {
        let mut unit_states = Vec::new();
        let mut unit_payloads = Vec::new();
        for piece in &unit.pieces {
            let n_jobs = (horizon.div_ceil(piece.period)) as usize;
            let mut job_states = vec![PieceJob { release: None, served: 0, done: false }; n_jobs];
            if piece.piece_index == 0 {
                for (j, js) in job_states.iter_mut().enumerate() {
                    js.release = Some(j as Tick * piece.period);
                }
            }
            unit_states.push(job_states);
            unit_payloads.push(PayloadIndex::new(piece, unit.width));
        }
        states.push(unit_states);
        payloads.push(unit_payloads);
    }
    // successor piece lookup: (task, piece_index) -> (unit, member)
    let mut piece_at: BTreeMap<(TaskId, usize), (usize, usize)> = BTreeMap::new();
    for (ui, unit) in units.iter().enumerate() {
        for (mi, piece) in unit.pieces.iter().enumerate() {
            piece_at.insert((piece.origin, piece.piece_index), (ui, mi));
        }
    }

    let mut wc_jobs: BTreeMap<(TaskId, usize), WcJob> = BTreeMap::new();

    for t in 0..horizon {
        for (ui, unit) in units.iter().enumerate() {
            // EDF pick: earliest reported absolute deadline, ties by task id
            // then piece index then job
            let mut best: Option<(Tick, TaskId, usize, usize, usize)> = None;
            for (mi, piece) in unit.pieces.iter().enumerate() {
                for (j, js) in states[ui][mi].iter().enumerate() {
                    let Some(release) = js.release else { continue };
                    if js.done || release > t {
                        continue;
                    }
                    let key =
                        (release + piece.deadline, piece.origin, piece.piece_index, j, mi);
                    if best.map_or(true, |b| key < (b.0, b.1, b.2, b.3, b.4)) {
                        best = Some(key);
                    }
                }
            }
            let Some((_, task, piece_index, job, mi)) = best else { continue };
            let piece = unit.pieces[mi];
            let info = &infos[&task];
            let state = &mut states[ui][mi][job];

            // lay down this tick's owners
            match &payloads[ui][mi] {
                Some(index) => {
                    let local = state.served;
                    for slot in 0..unit.width {
                        let proc = unit.first_proc + slot;
                        owners[proc][t as usize] = match index.node_at(slot, local) {
                            Some(node) => {
                                *delivered.get_mut(&(task, job)).unwrap() += 1;
                                Owner::Busy { task, piece: piece_index, job, node }
                            }
                            None => Owner::Reserved { task, piece: piece_index, job },
                        };
                    }
                }
                None => {
                    // work-conserving: serve ready nodes in ascending id
                    let wc = wc_jobs.entry((task, job)).or_insert_with(|| WcJob {
                        remaining: info
                            .real_nodes
                            .iter()
                            .map(|&n| (n, infos[&task].dag.nodes.iter().find(|x| x.id == n).unwrap().wcet))
                            .collect(),
                    });
                    let ready: Vec<NodeId> = info
                        .real_nodes
                        .iter()
                        .copied()
                        .filter(|n| {
                            wc.remaining[n] > 0
                                && info.preds[n].iter().all(|p| wc.remaining[p] == 0)
                        })
                        .take(unit.width)
                        .collect();
                    for slot in 0..unit.width {
                        let proc = unit.first_proc + slot;
                        owners[proc][t as usize] = match ready.get(slot) {
                            Some(&node) => {
                                *wc.remaining.get_mut(&node).unwrap() -= 1;
                                *delivered.get_mut(&(task, job)).unwrap() += 1;
                                Owner::Busy { task, piece: piece_index, job, node }
                            }
                            None => Owner::Reserved { task, piece: piece_index, job },
                        };
                    }
                }
            }
            state.served += 1;

            // budget completion releases the next piece; a work-conserving
            // job also finishes early once all its nodes are done
            let job_work_done = delivered[&(task, job)] >= info.volume;
            if state.served >= piece.exec || (payloads[ui][mi].is_none() && job_work_done) {
                state.done = true;
                if let Some(&(nui, nmi)) = piece_at.get(&(task, piece.piece_index + 1)) {
                    let next_n_jobs = states[nui][nmi].len();
                    if job < next_n_jobs {
                        states[nui][nmi][job].release = Some(t + 1);
                    }
                }
            }
            if job_work_done {
                let rec = &mut jobs[job_index[&(task, job)]];
                if rec.completion.is_none() {
                    rec.completion = Some(t + 1);
                }
            }
        }
    }

    SimTrace { horizon, owners, jobs }
}

/// Re-derives every runtime guarantee from the trace alone and reports each
/// breach: deadlines met, exact per-node budgets, no node on two processors
/// at once, precedence respected, clusters in lockstep, and per-target EDF
/// order (with zero-laxity pieces judged by their reported deadlines).
pub fn check_trace(tasks: &[DagTask], plan: &SystemPlan, trace: &SimTrace) -> Vec<TraceViolation> {
    let mut out = Vec::new();
    let infos: BTreeMap<TaskId, TaskInfo> =
        tasks.iter().map(|t| (t.task_id, TaskInfo::new(t))).collect();
    let horizon = trace.horizon;

    // (c) self-parallelism: scan tick columns
    for t in 0..horizon as usize {
        let mut seen: BTreeMap<(TaskId, usize, NodeId), usize> = BTreeMap::new();
        for row in &trace.owners {
            if let Owner::Busy { task, job, node, .. } = row[t] {
                *seen.entry((task, job, node)).or_insert(0) += 1;
            }
        }
        for ((task, job, node), count) in seen {
            if count > 1 {
                out.push(TraceViolation::SelfParallel { task, job, node, tick: t as Tick });
            }
        }
    }

    // per-job, per-node service times and busy windows
    #[derive(Default, Clone)]
    struct NodeService {
        served: Tick,
        first: Option<Tick>,
        last: Option<Tick>,
    }
    let mut service: BTreeMap<(TaskId, usize), BTreeMap<NodeId, NodeService>> = BTreeMap::new();
    for row in &trace.owners {
        for (t, owner) in row.iter().enumerate() {
            if let Owner::Busy { task, job, node, .. } = *owner {
                let entry = service
                    .entry((task, job))
                    .or_default()
                    .entry(node)
                    .or_default();
                entry.served += 1;
                if entry.first.is_none() {
                    entry.first = Some(t as Tick);
                }
                entry.last = Some(t as Tick);
            }
        }
    }

    for info in infos.values() {
        let task = info.dag.task_id;
        let period = info.dag.period;
        let n_jobs = horizon.div_ceil(period) as usize;
        for job in 0..n_jobs {
            let release = job as Tick * period;
            let deadline = release + info.dag.deadline;
            let nodes = service.get(&(task, job));
            // (b) exact budgets
            let mut completion: Option<Tick> = Some(release);
            for &n in &info.real_nodes {
                let wcet = info.dag.nodes.iter().find(|x| x.id == n).unwrap().wcet;
                let sv = nodes.and_then(|m| m.get(&n));
                let served = sv.map_or(0, |s| s.served);
                if served != wcet {
                    out.push(TraceViolation::WrongNodeBudget { task, job, node: n, served, wcet });
                    completion = None;
                } else if let (Some(c), Some(s)) = (completion, sv) {
                    completion = Some(c.max(s.last.unwrap() + 1));
                }
            }
            // (a) deadline met
            match completion {
                Some(c) if c <= deadline => {}
                other => out.push(TraceViolation::DeadlineMiss {
                    task,
                    job,
                    deadline,
                    completion: other,
                }),
            }
            // (d) precedence: a node starts only after its predecessors end
            if let Some(nodes) = nodes {
                for (&to, preds) in &info.preds {
                    for &from in preds {
                        let (Some(f), Some(t_)) = (nodes.get(&from), nodes.get(&to)) else {
                            continue;
                        };
                        if let (Some(last), Some(first)) = (f.last, t_.first) {
                            if first <= last {
                                out.push(TraceViolation::PrecedenceViolation {
                                    task,
                                    job,
                                    from,
                                    to,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    // (e) lockstep and EDF order per target, re-derived from the trace
    let units = units_of(plan);
    for unit in &units {
        let procs = unit.first_proc..unit.first_proc + unit.width;
        // served piece per tick, or None when idle
        let mut served_at: Vec<Option<(TaskId, usize, usize)>> =
            Vec::with_capacity(horizon as usize);
        for t in 0..horizon as usize {
            let keys: Vec<Option<(TaskId, usize, usize)>> = procs
                .clone()
                .map(|p| trace.owners[p][t].piece_key())
                .collect();
            let first = keys[0];
            if keys.iter().any(|&k| k != first) || (first.is_none() && keys.len() > 1 && keys.iter().any(|k| k.is_some()))
            {
                out.push(TraceViolation::LockstepBroken { target: unit.target, tick: t as Tick });
                served_at.push(None);
            } else {
                served_at.push(first);
            }
        }
        // rebuild release times and budgets from service counts
        let mut served: Vec<Vec<Tick>> = unit
            .pieces
            .iter()
            .map(|p| vec![0; horizon.div_ceil(p.period) as usize])
            .collect();
        let mut release: Vec<Vec<Option<Tick>>> = unit
            .pieces
            .iter()
            .map(|p| {
                let n = horizon.div_ceil(p.period) as usize;
                (0..n)
                    .map(|j| (p.piece_index == 0).then(|| j as Tick * p.period))
                    .collect()
            })
            .collect();
        // chains may continue on other units; pieces whose predecessor lives
        // elsewhere get their release from that unit's completion times
        let all_units = &units;
        for (mi, piece) in unit.pieces.iter().enumerate() {
            if piece.piece_index == 0 {
                continue;
            }
            for j in 0..release[mi].len() {
                release[mi][j] =
                    completion_of_piece(all_units, trace, piece.origin, piece.piece_index - 1, j)
                        .map(|t| t + 1);
            }
        }
        let volume_of: BTreeMap<TaskId, Tick> =
            infos.values().map(|i| (i.dag.task_id, i.volume)).collect();
        let mut wc_left: BTreeMap<(usize, usize), Tick> = BTreeMap::new();
        for t in 0..horizon as usize {
            // ready set at tick t
            let mut best: Option<(Tick, TaskId, usize, usize, usize)> = None;
            for (mi, piece) in unit.pieces.iter().enumerate() {
                for j in 0..served[mi].len() {
                    let Some(rel) = release[mi][j] else { continue };
                    if rel > t as Tick || served[mi][j] >= piece.exec {
                        continue;
                    }
                    // a work-conserving piece with all work delivered is done
                    if matches!(piece.payload, PiecePayload::WorkConserving) {
                        let left = *wc_left
                            .entry((mi, j))
                            .or_insert_with(|| volume_of[&piece.origin]);
                        if left == 0 {
                            continue;
                        }
                    }
                    let key = (rel + piece.deadline, piece.origin, piece.piece_index, j, mi);
                    if best.map_or(true, |b| key < (b.0, b.1, b.2, b.3, b.4)) {
                        best = Some(key);
                    }
                }
            }
            let expected = best.map(|(_, task, piece, job, _)| (task, piece, job));
            if served_at[t] != expected {
                out.push(TraceViolation::EdfOrderBroken { target: unit.target, tick: t as Tick });
            }
            if let Some((task, piece_index, job)) = served_at[t] {
                if let Some(mi) = unit
                    .pieces
                    .iter()
                    .position(|p| p.origin == task && p.piece_index == piece_index)
                {
                    served[mi][job] += 1;
                    if matches!(unit.pieces[mi].payload, PiecePayload::WorkConserving) {
                        let busy = procs
                            .clone()
                            .filter(|&p| matches!(trace.owners[p][t], Owner::Busy { .. }))
                            .count() as Tick;
                        let left = wc_left.entry((mi, job)).or_insert_with(|| volume_of[&task]);
                        *left = left.saturating_sub(busy);
                    }
                }
            }
        }
    }

    out
}

/// The tick at which a piece's budget completes for a given job, derived
/// from the trace (the last tick the piece was served), or `None` when it
/// never completes. Work-conserving pieces complete when their task's work
/// is delivered.
fn completion_of_piece(
    units: &[Unit],
    trace: &SimTrace,
    task: TaskId,
    piece_index: usize,
    job: usize,
) -> Option<Tick> {
    for unit in units {
        let Some(piece) = unit
            .pieces
            .iter()
            .find(|p| p.origin == task && p.piece_index == piece_index)
        else {
            continue;
        };
        let mut budget = piece.exec;
        for t in 0..trace.horizon as usize {
            let key = trace.owners[unit.first_proc][t].piece_key();
            if key == Some((task, piece_index, job)) {
                budget -= 1;
                if budget == 0 {
                    return Some(t as Tick);
                }
            }
        }
        return None;
    }
    None
}

/// Tick-level preemptive uniprocessor EDF with synchronous periodic
/// arrivals: true iff no deadline is missed up to `horizon`. With the
/// hyperperiod as horizon this is an exact schedulability decision.
pub fn edf_brute_force(tasks: &[SeqTask], horizon: Tick) -> bool {
    let n = tasks.len();
    let mut remaining: Vec<Tick> = vec![0; n];
    let mut abs_deadline: Vec<Tick> = vec![0; n];
    for t in 0..horizon {
        for i in 0..n {
            if remaining[i] > 0 && abs_deadline[i] <= t {
                return false;
            }
            if t % tasks[i].period == 0 {
                remaining[i] = tasks[i].exec;
                abs_deadline[i] = t + tasks[i].deadline;
            }
        }
        let pick = (0..n)
            .filter(|&i| remaining[i] > 0)
            .min_by_key(|&i| (abs_deadline[i], i));
        if let Some(i) = pick {
            remaining[i] -= 1;
        }
    }
    (0..n).all(|i| remaining[i] == 0 || abs_deadline[i] > horizon)
}

/// Greedy work-conserving schedule of one DAG on `width` processors: each
/// tick runs up to `width` ready nodes in ascending node id. Returns the
/// makespan.
pub fn list_schedule(dag: &DagTask, width: usize) -> Tick {
    assert!(width >= 1);
    let info = TaskInfo::new(dag);
    let mut remaining: BTreeMap<NodeId, Tick> = info
        .real_nodes
        .iter()
        .map(|&n| (n, dag.nodes.iter().find(|x| x.id == n).unwrap().wcet))
        .collect();
    let mut left = info.volume;
    let mut t: Tick = 0;
    while left > 0 {
        let ready: Vec<NodeId> = info
            .real_nodes
            .iter()
            .copied()
            .filter(|n| remaining[n] > 0 && info.preds[n].iter().all(|p| remaining[p] == 0))
            .take(width)
            .collect();
        assert!(!ready.is_empty(), "no ready node with work remaining: invalid DAG");
        for n in ready {
            *remaining.get_mut(&n).unwrap() -= 1;
            left -= 1;
        }
        t += 1;
    }
    t
}
