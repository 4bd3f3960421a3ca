//! Task-set assignment: the two-pass segmented-flattened-and-split algorithm
//! and the federated-scheduling baseline.
//!
//! Pass 1 mirrors federated scheduling: heavy tasks (utilisation above one)
//! get dedicated clusters sized for their flattened schedule — or by the
//! Graham bound in the rare cases that needs fewer processors — and light
//! tasks go first-fit onto single-processor bins as sequential tasks. Unlike
//! federated scheduling, a task that does not fit is skipped rather than
//! failed.
//!
//! Pass 2 places the skipped tasks by C=D splitting. A heavy task walks the
//! existing clusters from fullest to emptiest (by total member density over
//! width); on each cluster the remaining work is re-flattened at the cluster
//! width and either admitted whole as the final piece or cut down to the
//! largest zero-laxity budget the cluster accepts. Zero-laxity pieces run at
//! top EDF priority, so they finish exactly their budget after release; the
//! cluster is then closed to further pieces, and the rump continues to the
//! next cluster with the remaining deadline. A light task does the same over
//! bins first (as a sequential task), then over clusters as a gang task.
//!
//! Every piece of an accepted task is recorded in the [`SystemPlan`] with its
//! release offset and budget, so the plan can be executed tick by tick by the
//! simulator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    cd_sensitivity, density_schedulable, exact_edf_schedulable, SeqTask, TestMode,
};
use crate::flatten::{
    cluster_size_requirements, flatten_dag, leftover_dag, FlattenedSchedule, Requirement,
    SegmentedWork,
};
use crate::flatten::{graham_cluster_size, graham_makespan};
use crate::taskmodel::DagTask;
use crate::{Frac, TaskId, Tick};

/// Which assignment algorithm produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sfs,
    Fs,
}

/// How the processors of a target execute a piece.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiecePayload {
    /// Run this fixed schedule; its length equals the piece budget.
    Flattened(FlattenedSchedule),
    /// Run a work-conserving list scheduler over the task's ready nodes.
    WorkConserving,
}

/// A gang task, or one C=D piece of a split task, as placed on a target.
///
/// All threads of a gang piece run in lockstep across its cluster, so for
/// admission it behaves exactly like the sequential task `(exec, deadline,
/// period)`. Piece `k + 1` of a task releases when piece `k`'s budget
/// completes; `release_offset` is the static offset this amounts to when
/// every earlier piece meets its zero-laxity deadline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GangPiece {
    pub origin: TaskId,
    pub piece_index: usize,
    pub exec: Tick,
    pub deadline: Tick,
    pub period: Tick,
    pub release_offset: Tick,
    pub zero_laxity: bool,
    pub payload: PiecePayload,
}

impl GangPiece {
    /// The sequential view used by all EDF analysis.
    pub fn seq(&self) -> SeqTask {
        SeqTask::new(self.exec, self.deadline, self.period)
    }
}

/// A dedicated group of processors serving gang pieces under EDF.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: usize,
    pub width: usize,
    pub members: Vec<GangPiece>,
    /// Closed targets accept no further pieces; holding a zero-laxity piece
    /// closes a target for good.
    pub closed: bool,
}

/// A single processor serving sequential pieces under EDF.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub bin_id: usize,
    pub members: Vec<GangPiece>,
    pub closed: bool,
}

/// Where a piece was placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Cluster(usize),
    Bin(usize),
}

/// Placement record: one entry per piece, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceRef {
    pub target: Target,
    pub exec: Tick,
    pub deadline: Tick,
    pub release_offset: Tick,
    pub zero_laxity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// The serial lower bound of the remaining work exceeds the remaining
    /// deadline: no split of any kind can finish in time.
    SerialBoundExceedsDeadline,
    /// Ran out of assignment targets while splitting.
    NoClusters,
    /// The cumulative split budget reached the deadline before the task's
    /// work was covered.
    DeadlineExhausted,
    /// Federated scheduling found too few empty processors.
    InsufficientProcessors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure { task_id: TaskId, reason: FailureReason },
}

/// The result of assigning a task set to `m` processors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemPlan {
    pub m: usize,
    pub algorithm: Algorithm,
    pub mode: TestMode,
    pub clusters: Vec<Cluster>,
    pub bins: Vec<Bin>,
    /// Ordered piece locations per task. Tasks with no work map to an empty
    /// list.
    pub placements: BTreeMap<TaskId, Vec<PieceRef>>,
    pub outcome: Outcome,
}

impl SystemPlan {
    pub fn is_success(&self) -> bool {
        matches!(self.outcome, Outcome::Success)
    }
}

struct State {
    mode: TestMode,
    m_empty: usize,
    clusters: Vec<Cluster>,
    bins: Vec<Bin>,
    placements: BTreeMap<TaskId, Vec<PieceRef>>,
}

impl State {
    fn cluster_seqs(&self, ci: usize) -> Vec<SeqTask> {
        self.clusters[ci].members.iter().map(GangPiece::seq).collect()
    }

    fn bin_seqs(&self, bi: usize) -> Vec<SeqTask> {
        self.bins[bi].members.iter().map(GangPiece::seq).collect()
    }

    fn place(&mut self, target: Target, piece: GangPiece) {
        let record = PieceRef {
            target,
            exec: piece.exec,
            deadline: piece.deadline,
            release_offset: piece.release_offset,
            zero_laxity: piece.zero_laxity,
        };
        self.placements.entry(piece.origin).or_default().push(record);
        match target {
            Target::Cluster(ci) => {
                let cluster = &mut self.clusters[ci];
                debug_assert!(!cluster.closed, "placement on a closed cluster");
                if piece.zero_laxity {
                    cluster.closed = true;
                }
                cluster.members.push(piece);
            }
            Target::Bin(bi) => {
                let bin = &mut self.bins[bi];
                debug_assert!(!bin.closed, "placement on a closed bin");
                if piece.zero_laxity {
                    bin.closed = true;
                }
                bin.members.push(piece);
            }
        }
    }

    /// Open clusters from fullest to emptiest by normalised gross
    /// utilisation (total member density over width), ties by id.
    fn clusters_by_gross_utilisation(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.clusters.len())
            .filter(|&ci| !self.clusters[ci].closed)
            .collect();
        order.sort_by(|&a, &b| {
            let key = |ci: usize| -> Frac {
                let total: Frac = self.clusters[ci]
                    .members
                    .iter()
                    .map(|p| p.seq().density())
                    .sum();
                total / Frac::from_integer(self.clusters[ci].width as i128)
            };
            key(b).cmp(&key(a)).then(a.cmp(&b))
        });
        order
    }

    /// Open bins from fullest to emptiest by total member density, ties by
    /// id.
    fn bins_by_density(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.bins.len())
            .filter(|&bi| !self.bins[bi].closed)
            .collect();
        order.sort_by(|&a, &b| {
            let key = |bi: usize| -> Frac {
                self.bins[bi].members.iter().map(|p| p.seq().density()).sum()
            };
            key(b).cmp(&key(a)).then(a.cmp(&b))
        });
        order
    }
}

/// Whole-task admission: density test in fast mode, processor-demand test in
/// exact mode. The candidate must already be a valid task view.
fn admits(members: &[SeqTask], candidate: SeqTask, mode: TestMode) -> bool {
    let mut all = members.to_vec();
    all.push(candidate);
    match mode {
        TestMode::Fast => density_schedulable(&all),
        TestMode::Exact => exact_edf_schedulable(&all),
    }
}

/// Task indices in assignment order: non-increasing `min(D, T)`, ties by
/// ascending task id.
fn assignment_order(tasks: &[DagTask]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = tasks[a].deadline.min(tasks[a].period);
        let kb = tasks[b].deadline.min(tasks[b].period);
        kb.cmp(&ka).then(tasks[a].task_id.cmp(&tasks[b].task_id))
    });
    order
}

/// Runs the complete two-pass assignment.
pub fn sfs_assign(tasks: &[DagTask], m: usize, mode: TestMode) -> SystemPlan {
    let order = assignment_order(tasks);
    let mut state = State {
        mode,
        m_empty: m,
        clusters: Vec::new(),
        bins: Vec::new(),
        placements: BTreeMap::new(),
    };
    let mut skipped: Vec<usize> = Vec::new();

    // pass 1: assignments without splitting
    for &i in &order {
        let dag = &tasks[i];
        if dag.volume() == 0 {
            state.placements.insert(dag.task_id, Vec::new());
            continue;
        }
        if dag.is_heavy() {
            match cluster_size_requirements(dag) {
                Ok(req) if req.width() <= state.m_empty => {
                    let width = req.width();
                    let budget = req.budget();
                    let payload = match req {
                        Requirement::Flattened(fs) => PiecePayload::Flattened(fs),
                        Requirement::WorkConserving { .. } => PiecePayload::WorkConserving,
                    };
                    let ci = state.clusters.len();
                    state.clusters.push(Cluster {
                        cluster_id: ci,
                        width,
                        members: Vec::new(),
                        closed: false,
                    });
                    state.m_empty -= width;
                    state.place(
                        Target::Cluster(ci),
                        GangPiece {
                            origin: dag.task_id,
                            piece_index: 0,
                            exec: budget,
                            deadline: dag.deadline,
                            period: dag.period,
                            release_offset: 0,
                            zero_laxity: budget == dag.deadline,
                            payload,
                        },
                    );
                }
                _ => skipped.push(i),
            }
        } else {
            let volume = dag.volume();
            if volume > dag.deadline {
                // no sequential placement can meet the deadline; leave the
                // task for splitting over clusters
                skipped.push(i);
                continue;
            }
            let candidate = SeqTask::new(volume, dag.deadline, dag.period);
            let fits = (0..state.bins.len())
                .find(|&bi| {
                    !state.bins[bi].closed
                        && admits(&state.bin_seqs(bi), candidate, TestMode::Fast)
                })
                .or_else(|| {
                    (state.m_empty > 0).then(|| {
                        let bi = state.bins.len();
                        state.bins.push(Bin {
                            bin_id: bi,
                            members: Vec::new(),
                            closed: false,
                        });
                        state.m_empty -= 1;
                        bi
                    })
                });
            match fits {
                Some(bi) => {
                    let work = SegmentedWork::from_dag(dag);
                    state.place(
                        Target::Bin(bi),
                        GangPiece {
                            origin: dag.task_id,
                            piece_index: 0,
                            exec: volume,
                            deadline: dag.deadline,
                            period: dag.period,
                            release_offset: 0,
                            zero_laxity: volume == dag.deadline,
                            payload: PiecePayload::Flattened(flatten_dag(&work, 1)),
                        },
                    );
                }
                None => skipped.push(i),
            }
        }
    }

    // pass 2: assignments with splitting; processors left idle by pass 1
    // open as fresh bins so light tasks can still use them
    if !skipped.is_empty() {
        while state.m_empty > 0 {
            let bi = state.bins.len();
            state.bins.push(Bin { bin_id: bi, members: Vec::new(), closed: false });
            state.m_empty -= 1;
        }
    }
    for &i in &skipped {
        let dag = &tasks[i];
        let result = if dag.is_heavy() {
            split_heavy(dag, &mut state)
        } else {
            split_light(dag, &mut state)
        };
        if let Err(reason) = result {
            return finish(state, m, Algorithm::Sfs, mode, Outcome::Failure {
                task_id: dag.task_id,
                reason,
            });
        }
    }
    finish(state, m, Algorithm::Sfs, mode, Outcome::Success)
}

fn finish(
    state: State,
    m: usize,
    algorithm: Algorithm,
    mode: TestMode,
    outcome: Outcome,
) -> SystemPlan {
    let used: usize =
        state.clusters.iter().map(|c| c.width).sum::<usize>() + state.bins.len();
    debug_assert!(used <= m, "plan uses {used} of {m} processors");
    SystemPlan {
        m,
        algorithm,
        mode,
        clusters: state.clusters,
        bins: state.bins,
        placements: state.placements,
        outcome,
    }
}

/// Splits an unassigned heavy task over the open clusters.
fn split_heavy(dag: &DagTask, state: &mut State) -> Result<(), FailureReason> {
    let work = SegmentedWork::from_dag(dag);
    split_over_clusters(dag, state, work, dag.deadline, 0, 0)
}

/// Splits an unassigned light task: populated bins first, then clusters.
fn split_light(dag: &DagTask, state: &mut State) -> Result<(), FailureReason> {
    let mut rump = SegmentedWork::from_dag(dag);
    let mut c_rem = dag.volume();
    let mut d_rem = dag.deadline;
    let mut placed: Tick = 0;
    let mut piece_index = 0;

    for bi in state.bins_by_density() {
        let members = state.bin_seqs(bi);
        if c_rem <= d_rem && admits(&members, SeqTask::new(c_rem, d_rem, dag.period), state.mode)
        {
            let fs = flatten_dag(&rump, 1);
            state.place(
                Target::Bin(bi),
                GangPiece {
                    origin: dag.task_id,
                    piece_index,
                    exec: c_rem,
                    deadline: d_rem,
                    period: dag.period,
                    release_offset: placed,
                    zero_laxity: c_rem == d_rem,
                    payload: PiecePayload::Flattened(fs),
                },
            );
            return Ok(());
        }
        let piece_c = cd_sensitivity(&members, dag.period, c_rem, state.mode);
        if piece_c == 0 {
            continue;
        }
        let completes = piece_c >= c_rem;
        if piece_c > d_rem || (piece_c == d_rem && !completes) {
            // cannot happen for implicit deadlines (c_rem <= d_rem is
            // maintained); guards constrained-deadline inputs
            return Err(FailureReason::DeadlineExhausted);
        }
        let fs = flatten_dag(&rump, 1);
        if completes {
            state.place(
                Target::Bin(bi),
                GangPiece {
                    origin: dag.task_id,
                    piece_index,
                    exec: c_rem,
                    deadline: c_rem,
                    period: dag.period,
                    release_offset: placed,
                    zero_laxity: true,
                    payload: PiecePayload::Flattened(fs),
                },
            );
            return Ok(());
        }
        state.place(
            Target::Bin(bi),
            GangPiece {
                origin: dag.task_id,
                piece_index,
                exec: piece_c,
                deadline: piece_c,
                period: dag.period,
                release_offset: placed,
                zero_laxity: true,
                payload: PiecePayload::Flattened(fs.prefix(piece_c)),
            },
        );
        rump = leftover_dag(&rump, &fs, piece_c).expect("cut inside schedule");
        c_rem -= piece_c;
        d_rem -= piece_c;
        placed += piece_c;
        piece_index += 1;
    }

    // out of bins: continue over clusters as a gang task
    split_over_clusters(dag, state, rump, d_rem, placed, piece_index)
}

/// The cluster phase shared by heavy splitting and the light-task fallback:
/// walk open clusters by non-increasing normalised gross utilisation,
/// flattening the rump at each cluster's width.
fn split_over_clusters(
    dag: &DagTask,
    state: &mut State,
    mut rump: SegmentedWork,
    mut d_rem: Tick,
    mut placed: Tick,
    mut piece_index: usize,
) -> Result<(), FailureReason> {
    if rump.serial_lower_bound() > d_rem {
        return Err(FailureReason::SerialBoundExceedsDeadline);
    }
    for ci in state.clusters_by_gross_utilisation() {
        let members = state.cluster_seqs(ci);
        let width = state.clusters[ci].width;
        let fs = flatten_dag(&rump, width);
        // try to finish here: the whole remainder as the final piece
        if fs.length <= d_rem
            && admits(&members, SeqTask::new(fs.length, d_rem, dag.period), state.mode)
        {
            state.place(
                Target::Cluster(ci),
                GangPiece {
                    origin: dag.task_id,
                    piece_index,
                    exec: fs.length,
                    deadline: d_rem,
                    period: dag.period,
                    release_offset: placed,
                    zero_laxity: fs.length == d_rem,
                    payload: PiecePayload::Flattened(fs),
                },
            );
            return Ok(());
        }
        // otherwise carve out the largest zero-laxity budget
        let piece_c = cd_sensitivity(&members, dag.period, fs.length, state.mode);
        if piece_c == 0 {
            continue;
        }
        let completes = piece_c >= fs.length;
        if piece_c > d_rem || (piece_c == d_rem && !completes) {
            // the deadline would be reached without completing the task
            return Err(FailureReason::DeadlineExhausted);
        }
        if completes {
            state.place(
                Target::Cluster(ci),
                GangPiece {
                    origin: dag.task_id,
                    piece_index,
                    exec: fs.length,
                    deadline: fs.length,
                    period: dag.period,
                    release_offset: placed,
                    zero_laxity: true,
                    payload: PiecePayload::Flattened(fs),
                },
            );
            return Ok(());
        }
        state.place(
            Target::Cluster(ci),
            GangPiece {
                origin: dag.task_id,
                piece_index,
                exec: piece_c,
                deadline: piece_c,
                period: dag.period,
                release_offset: placed,
                zero_laxity: true,
                payload: PiecePayload::Flattened(fs.prefix(piece_c)),
            },
        );
        rump = leftover_dag(&rump, &fs, piece_c).expect("cut inside schedule");
        d_rem -= piece_c;
        placed += piece_c;
        piece_index += 1;
    }
    Err(FailureReason::NoClusters)
}

/// The federated-scheduling baseline: heavy tasks get clusters sized by the
/// Graham bound and run work-conserving; light tasks go first-fit onto bins
/// under the utilisation test (exact for the implicit-deadline workloads the
/// generator produces). No skipping, no splitting: the first task that does
/// not fit fails the whole set.
pub fn federated_assign(tasks: &[DagTask], m: usize) -> SystemPlan {
    let order = assignment_order(tasks);
    let mut state = State {
        mode: TestMode::Fast,
        m_empty: m,
        clusters: Vec::new(),
        bins: Vec::new(),
        placements: BTreeMap::new(),
    };
    for &i in &order {
        let dag = &tasks[i];
        if dag.volume() == 0 {
            state.placements.insert(dag.task_id, Vec::new());
            continue;
        }
        let fail = |state: State, reason: FailureReason| {
            finish(state, m, Algorithm::Fs, TestMode::Fast, Outcome::Failure {
                task_id: dag.task_id,
                reason,
            })
        };
        if dag.is_heavy() {
            let volume = dag.volume();
            let longest = dag.longest_path();
            let width = match graham_cluster_size(volume, longest, dag.deadline) {
                Ok(w) => w,
                Err(_) => return fail(state, FailureReason::SerialBoundExceedsDeadline),
            };
            if width > state.m_empty {
                return fail(state, FailureReason::InsufficientProcessors);
            }
            let budget = graham_makespan(volume, longest, width);
            let ci = state.clusters.len();
            state.clusters.push(Cluster {
                cluster_id: ci,
                width,
                members: Vec::new(),
                closed: false,
            });
            state.m_empty -= width;
            state.place(
                Target::Cluster(ci),
                GangPiece {
                    origin: dag.task_id,
                    piece_index: 0,
                    exec: budget,
                    deadline: dag.deadline,
                    period: dag.period,
                    release_offset: 0,
                    zero_laxity: budget == dag.deadline,
                    payload: PiecePayload::WorkConserving,
                },
            );
        } else {
            let volume = dag.volume();
            if volume > dag.deadline {
                return fail(state, FailureReason::SerialBoundExceedsDeadline);
            }
            let candidate = SeqTask::new(volume, dag.deadline, dag.period);
            let one = Frac::from_integer(1);
            let util_fits = |members: &[SeqTask]| {
                let total: Frac = members.iter().map(SeqTask::utilisation).sum();
                total + candidate.utilisation() <= one
            };
            let found = (0..state.bins.len())
                .find(|&bi| !state.bins[bi].closed && util_fits(&state.bin_seqs(bi)))
                .or_else(|| {
                    (state.m_empty > 0).then(|| {
                        let bi = state.bins.len();
                        state.bins.push(Bin {
                            bin_id: bi,
                            members: Vec::new(),
                            closed: false,
                        });
                        state.m_empty -= 1;
                        bi
                    })
                });
            match found {
                Some(bi) => {
                    let work = SegmentedWork::from_dag(dag);
                    state.place(
                        Target::Bin(bi),
                        GangPiece {
                            origin: dag.task_id,
                            piece_index: 0,
                            exec: volume,
                            deadline: dag.deadline,
                            period: dag.period,
                            release_offset: 0,
                            zero_laxity: volume == dag.deadline,
                            payload: PiecePayload::Flattened(flatten_dag(&work, 1)),
                        },
                    );
                }
                None => return fail(state, FailureReason::InsufficientProcessors),
            }
        }
    }
    finish(state, m, Algorithm::Fs, TestMode::Fast, Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskmodel::tests::task;

    fn heavy_pair_task(id: TaskId, wcet: Tick, d: Tick) -> DagTask {
        // one segment of two equal nodes
        let mut t = task(&[wcet, wcet], &[], d, d);
        t.task_id = id;
        t
    }

    #[test]
    fn single_heavy_task_gets_a_cluster() {
        let dag = heavy_pair_task(0, 22, 40); // volume 44 > period 40
        let plan = sfs_assign(&[dag], 4, TestMode::Fast);
        assert!(plan.is_success());
        assert_eq!(plan.clusters.len(), 1);
        assert_eq!(plan.clusters[0].width, 2);
        assert!(plan.bins.is_empty());
        let piece = &plan.clusters[0].members[0];
        assert_eq!((piece.exec, piece.deadline), (22, 40));
    }

    #[test]
    fn light_tasks_first_fit_onto_bins() {
        let mut tasks = Vec::new();
        for id in 0..10 {
            let mut t = task(&[20, 20], &[(1, 2)], 100, 100);
            t.task_id = id;
            tasks.push(t);
        }
        // each task has density 0.4: two per bin, five bins
        let plan = sfs_assign(&tasks, 8, TestMode::Fast);
        assert!(plan.is_success());
        assert_eq!(plan.clusters.len(), 0);
        assert_eq!(plan.bins.len(), 5);
        for bin in &plan.bins {
            assert_eq!(bin.members.len(), 2);
        }
    }

    #[test]
    fn serial_bound_beyond_deadline_fails() {
        // heavy chain: volume 130 in a 100-tick window, longest path 130
        let mut dag = task(&[65, 65], &[(1, 2)], 100, 100);
        dag.task_id = 0;
        let plan = sfs_assign(&[dag], 8, TestMode::Fast);
        assert_eq!(
            plan.outcome,
            Outcome::Failure {
                task_id: 0,
                reason: FailureReason::SerialBoundExceedsDeadline
            }
        );
    }

    #[test]
    fn pass1_prefers_flattening_on_equal_width() {
        // flatten: width 2, budget 22; Graham: ceil(22/18) = 2, budget 33
        let dag = heavy_pair_task(0, 22, 40);
        let plan = sfs_assign(&[dag], 2, TestMode::Fast);
        let piece = &plan.clusters[0].members[0];
        assert_eq!(piece.exec, 22);
        assert!(matches!(piece.payload, PiecePayload::Flattened(_)));
    }

    #[test]
    fn pass1_uses_graham_when_it_needs_fewer_processors() {
        // volume 120, longest path 60, deadline 85: flattening needs 118
        // ticks at any width, the Graham bound fits 3 processors in 80
        let mut dag = task(&[1, 59, 59, 1], &[(1, 3), (2, 4)], 85, 100);
        dag.task_id = 0;
        assert!(dag.is_heavy());
        let plan = sfs_assign(&[dag], 8, TestMode::Fast);
        assert!(plan.is_success());
        let piece = &plan.clusters[0].members[0];
        assert_eq!(plan.clusters[0].width, 3);
        assert_eq!(piece.exec, 80);
        assert!(matches!(piece.payload, PiecePayload::WorkConserving));
    }

    #[test]
    fn light_task_fills_a_bin_to_density_one() {
        let mut a = task(&[50], &[], 100, 100);
        a.task_id = 0;
        let mut b = task(&[50], &[], 100, 100);
        b.task_id = 1;
        let plan = sfs_assign(&[a, b], 8, TestMode::Fast);
        assert!(plan.is_success());
        assert_eq!(plan.bins.len(), 1);
        assert_eq!(plan.bins[0].members.len(), 2);
    }

    #[test]
    fn heavy_task_skipped_when_no_processors_remain_for_its_cluster() {
        // two width-2 clusters fill 4 of 7 processors; the last heavy task
        // needs width 4 > 3 empty and is left for pass 2
        let mut tasks = vec![
            heavy_pair_task(0, 22, 40),
            heavy_pair_task(1, 22, 40),
        ];
        let mut v = task(&[25, 25, 25, 25], &[], 26, 26);
        v.task_id = 2;
        tasks.push(v);
        let plan = sfs_assign(&tasks, 7, TestMode::Fast);
        // no width-4 cluster was ever opened
        assert!(plan.clusters.iter().all(|c| c.width == 2));
        // the three spare processors opened as bins for pass 2
        assert_eq!(plan.bins.len(), 3);
    }

    #[test]
    fn split_heavy_over_two_clusters_matches_hand_computation() {
        // clusters: Q0 width 2 (member density 0.4), Q1 width 3 (0.25);
        // victim: three two-node segments, deadline 130
        let mut state = State {
            mode: TestMode::Fast,
            m_empty: 0,
            clusters: vec![
                Cluster {
                    cluster_id: 0,
                    width: 2,
                    members: vec![GangPiece {
                        origin: 10,
                        piece_index: 0,
                        exec: 60,
                        deadline: 150,
                        period: 150,
                        release_offset: 0,
                        zero_laxity: false,
                        payload: PiecePayload::WorkConserving,
                    }],
                    closed: false,
                },
                Cluster {
                    cluster_id: 1,
                    width: 3,
                    members: vec![GangPiece {
                        origin: 11,
                        piece_index: 0,
                        exec: 50,
                        deadline: 200,
                        period: 200,
                        release_offset: 0,
                        zero_laxity: false,
                        payload: PiecePayload::WorkConserving,
                    }],
                    closed: false,
                },
            ],
            bins: Vec::new(),
            placements: BTreeMap::new(),
        };
        let mut victim = task(
            &[40, 40, 25, 25, 40, 40],
            &[(1, 3), (2, 4), (3, 5), (4, 6)],
            130,
            130,
        );
        victim.task_id = 2;
        assert!(victim.is_heavy());

        split_heavy(&victim, &mut state).unwrap();

        let refs = &state.placements[&2];
        assert_eq!(refs.len(), 2);
        // first piece: zero-laxity budget 55 on the fuller width-2 cluster
        // (bound 3/7 of the period, floored)
        assert_eq!(refs[0].target, Target::Cluster(0));
        assert_eq!((refs[0].exec, refs[0].deadline), (55, 55));
        assert!(refs[0].zero_laxity);
        assert!(state.clusters[0].closed);
        // final piece: the 50-tick rump at width 3 with the leftover deadline
        assert_eq!(refs[1].target, Target::Cluster(1));
        assert_eq!((refs[1].exec, refs[1].deadline), (50, 75));
        assert_eq!(refs[1].release_offset, 55);
        assert!(!refs[1].zero_laxity);
        assert!(!state.clusters[1].closed);
        // deadlines telescope: 55 + 75 = 130
        assert_eq!(refs[0].exec + refs[1].deadline, victim.deadline);
    }

    #[test]
    fn split_finishes_whole_rump_on_an_empty_cluster() {
        let mut state = State {
            mode: TestMode::Fast,
            m_empty: 0,
            clusters: vec![Cluster {
                cluster_id: 0,
                width: 2,
                members: Vec::new(),
                closed: false,
            }],
            bins: Vec::new(),
            placements: BTreeMap::new(),
        };
        let mut victim = task(&[30, 30], &[], 50, 50);
        victim.task_id = 0;
        assert!(victim.is_heavy());
        split_heavy(&victim, &mut state).unwrap();
        let refs = &state.placements[&0];
        assert_eq!(refs.len(), 1);
        assert_eq!((refs[0].exec, refs[0].deadline), (30, 50));
    }

    #[test]
    fn splitting_detects_deadline_exhaustion() {
        // five width-2 clusters, each holding a (22, 40, 40) gang task;
        // three 20-tick parallel nodes with deadline 21 cannot complete
        // before their budget chain reaches the deadline
        let mut tasks: Vec<DagTask> = (0..5).map(|i| heavy_pair_task(i, 22, 40)).collect();
        let mut v = task(&[20, 20, 20], &[], 21, 21);
        v.task_id = 5;
        tasks.push(v);
        let plan = sfs_assign(&tasks, 10, TestMode::Fast);
        assert_eq!(
            plan.outcome,
            Outcome::Failure {
                task_id: 5,
                reason: FailureReason::DeadlineExhausted
            }
        );
    }

    #[test]
    fn light_task_splits_across_bins() {
        // three partly full bins; the last task fits none whole and splits
        let mut tasks = Vec::new();
        for (id, w) in [(0, 80), (1, 70), (2, 50)] {
            let mut t = task(&[w], &[], 100, 100);
            t.task_id = id;
            tasks.push(t);
        }
        let mut light = task(&[30, 30], &[(1, 2)], 100, 100);
        light.task_id = 3;
        tasks.push(light);
        let plan = sfs_assign(&tasks, 3, TestMode::Fast);
        assert!(plan.is_success());
        let refs = &plan.placements[&3];
        assert_eq!(refs.len(), 3);
        // fullest bin first, zero-laxity budgets 11 and 17, remainder whole
        assert_eq!(refs[0].target, Target::Bin(0));
        assert_eq!((refs[0].exec, refs[0].deadline), (11, 11));
        assert_eq!(refs[1].target, Target::Bin(1));
        assert_eq!((refs[1].exec, refs[1].deadline), (17, 17));
        assert_eq!(refs[2].target, Target::Bin(2));
        assert_eq!((refs[2].exec, refs[2].deadline), (32, 72));
        assert_eq!(refs[2].release_offset, 28);
        // budgets cover the volume, deadlines telescope
        assert_eq!(refs.iter().map(|r| r.exec).sum::<Tick>(), 60);
        assert_eq!(refs[0].exec + refs[1].exec + refs[2].deadline, 100);
        assert!(plan.bins[0].closed && plan.bins[1].closed && !plan.bins[2].closed);
    }

    #[test]
    fn federated_fails_on_deadline_within_longest_path() {
        let mut dag = task(&[60, 60], &[(1, 2)], 100, 100);
        dag.task_id = 0;
        assert!(dag.is_heavy());
        let plan = federated_assign(&[dag], 8);
        assert_eq!(
            plan.outcome,
            Outcome::Failure {
                task_id: 0,
                reason: FailureReason::SerialBoundExceedsDeadline
            }
        );
    }

    #[test]
    fn federated_first_fit_packs_lights() {
        let mut tasks = Vec::new();
        for id in 0..6 {
            let mut t = task(&[25, 25], &[], 100, 100);
            t.task_id = id;
            tasks.push(t);
        }
        let plan = federated_assign(&tasks, 3);
        assert!(plan.is_success());
        assert_eq!(plan.bins.len(), 3);
    }

    #[test]
    fn federated_sizes_clusters_by_graham() {
        let mut dag = task(&[1, 59, 59, 1], &[(1, 3), (2, 4)], 85, 100);
        dag.task_id = 0;
        let plan = federated_assign(&[dag], 8);
        assert!(plan.is_success());
        assert_eq!(plan.clusters[0].width, 3);
        assert_eq!(plan.clusters[0].members[0].exec, 80);
    }

    #[test]
    fn accepted_plans_pass_the_exact_test_everywhere() {
        use crate::generator::{gen_taskset, GenConfig};
        let mut checked = 0;
        for seed in 0..120 {
            let cfg = GenConfig::new(8, 10, 0.6, seed);
            let tasks = gen_taskset(&cfg).unwrap();
            for plan in [
                sfs_assign(&tasks, 8, TestMode::Fast),
                federated_assign(&tasks, 8),
            ] {
                if !plan.is_success() {
                    continue;
                }
                checked += 1;
                for cluster in &plan.clusters {
                    let seqs: Vec<SeqTask> =
                        cluster.members.iter().map(GangPiece::seq).collect();
                    assert!(exact_edf_schedulable(&seqs), "cluster {cluster:?}");
                }
                for bin in &plan.bins {
                    let seqs: Vec<SeqTask> = bin.members.iter().map(GangPiece::seq).collect();
                    assert!(exact_edf_schedulable(&seqs), "bin {bin:?}");
                }
            }
        }
        assert!(checked > 50, "only {checked} accepted plans checked");
    }

    #[test]
    fn piece_budgets_cover_each_accepted_task() {
        use crate::generator::{gen_taskset, GenConfig};
        for seed in 200..260 {
            let cfg = GenConfig::new(8, 10, 0.7, seed);
            let tasks = gen_taskset(&cfg).unwrap();
            let plan = sfs_assign(&tasks, 8, TestMode::Fast);
            if !plan.is_success() {
                continue;
            }
            for dag in &tasks {
                let refs = &plan.placements[&dag.task_id];
                // zero-laxity budgets plus the final deadline telescope to D
                let zl_total: Tick = refs
                    .iter()
                    .filter(|r| r.zero_laxity)
                    .map(|r| r.exec)
                    .sum();
                let last = refs.last().unwrap();
                if !last.zero_laxity {
                    assert_eq!(zl_total + last.deadline, dag.deadline);
                } else {
                    assert_eq!(zl_total, last.release_offset + last.exec);
                }
                // flattened payloads cover the full volume; a lone
                // work-conserving gang task covers it by construction
                let mut covered: Tick = 0;
                let mut work_conserving = false;
                for (target, rec) in refs.iter().map(|r| (r.target, r)) {
                    let members = match target {
                        Target::Cluster(ci) => &plan.clusters[ci].members,
                        Target::Bin(bi) => &plan.bins[bi].members,
                    };
                    let piece = members
                        .iter()
                        .find(|p| {
                            p.origin == dag.task_id && p.release_offset == rec.release_offset
                        })
                        .unwrap();
                    match &piece.payload {
                        PiecePayload::Flattened(fs) => {
                            covered += fs.per_node_time().values().sum::<Tick>();
                        }
                        PiecePayload::WorkConserving => work_conserving = true,
                    }
                }
                if work_conserving {
                    assert_eq!(refs.len(), 1, "task {}", dag.task_id);
                } else {
                    assert_eq!(covered, dag.volume(), "task {}", dag.task_id);
                }
            }
        }
    }

    #[test]
    fn assignment_is_deterministic() {
        use crate::generator::{gen_taskset, GenConfig};
        let tasks = gen_taskset(&GenConfig::new(16, 10, 0.65, 42)).unwrap();
        let a = sfs_assign(&tasks, 16, TestMode::Fast);
        let b = sfs_assign(&tasks, 16, TestMode::Fast);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
