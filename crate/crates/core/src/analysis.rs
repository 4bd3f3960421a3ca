//! Uniprocessor EDF schedulability tests and C=D sensitivity analysis.
//!
//! Clusters in this toolkit only ever hold gang tasks whose degree of
//! parallelism equals the cluster width, so gang EDF on a cluster behaves
//! exactly like uniprocessor EDF over the members viewed as sequential
//! `(C, D, T)` tasks. Everything here therefore works on [`SeqTask`]s:
//!
//! - [`dbf`] and [`exact_edf_schedulable`] implement the processor-demand
//!   criterion over one hyperperiod of synchronous releases;
//! - [`density_schedulable`] is the cheap sufficient test used for whole-task
//!   admission;
//! - [`augusto_bound`] is Santos-Jr's closed-form bound on the density a
//!   highest-priority zero-laxity task may add, restated with member
//!   deadlines so it stays safe for constrained-deadline members;
//! - [`cd_sensitivity`] turns either bound into the largest C=D execution
//!   budget a target can accept.
//!
//! All fractions are exact rationals and conversions to ticks always round
//! down, so the tests never over-admit through rounding.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::{frac, Frac, Tick};

/// A sequential task or task view: execution budget, relative deadline,
/// minimum inter-arrival time, with `0 < exec <= deadline <= period`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqTask {
    pub exec: Tick,
    pub deadline: Tick,
    pub period: Tick,
}

impl SeqTask {
    pub fn new(exec: Tick, deadline: Tick, period: Tick) -> Self {
        assert!(
            exec > 0 && exec <= deadline && deadline <= period,
            "invalid task parameters ({exec}, {deadline}, {period})"
        );
        SeqTask { exec, deadline, period }
    }

    /// Density: execution over the shorter of deadline and period.
    pub fn density(&self) -> Frac {
        frac(self.exec, self.deadline.min(self.period))
    }

    /// Utilisation: execution over period.
    pub fn utilisation(&self) -> Frac {
        frac(self.exec, self.period)
    }

    /// A zero-laxity task: deadline equal to the budget.
    pub fn is_zero_laxity(&self) -> bool {
        self.exec == self.deadline
    }
}

/// Which admission machinery the assignment algorithms run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMode {
    /// Density test for whole-task admission, closed-form bound for
    /// sensitivity analysis. Slightly pessimistic, very fast.
    Fast,
    /// Processor-demand test for admission, binary search over it for
    /// sensitivity analysis.
    Exact,
}

/// Demand bound function: the largest execution demand of jobs of `task`
/// with both release and deadline inside any interval of length `t`.
pub fn dbf(task: &SeqTask, t: Tick) -> Tick {
    if t < task.deadline {
        0
    } else {
        ((t - task.deadline) / task.period + 1) * task.exec
    }
}

/// Least common multiple of all periods (1 for an empty set).
pub fn hyperperiod(tasks: &[SeqTask]) -> Tick {
    tasks.iter().fold(1, |acc, t| acc.lcm(&t.period))
}

/// Exact uniprocessor EDF test: total utilisation at most one and total
/// demand at most `t` at every absolute deadline in one hyperperiod of a
/// synchronous release pattern.
pub fn exact_edf_schedulable(tasks: &[SeqTask]) -> bool {
    if tasks.is_empty() {
        return true;
    }
    let total_util: Frac = tasks.iter().map(SeqTask::utilisation).sum();
    if total_util > Frac::from_integer(1) {
        return false;
    }
    let horizon = hyperperiod(tasks);
    let mut deadlines: Vec<Tick> = Vec::new();
    for task in tasks {
        let mut t = task.deadline;
        while t <= horizon {
            deadlines.push(t);
            t += task.period;
        }
    }
    deadlines.sort_unstable();
    deadlines.dedup();
    deadlines
        .into_iter()
        .all(|t| tasks.iter().map(|task| dbf(task, t)).sum::<Tick>() <= t)
}

/// Sufficient density test: total density at most one. Exact when every
/// deadline is implicit.
pub fn density_schedulable(tasks: &[SeqTask]) -> bool {
    let total: Frac = tasks.iter().map(SeqTask::density).sum();
    total <= Frac::from_integer(1)
}

/// Largest density `C_s / T_s` a zero-laxity task with period `t_s` may add
/// to `existing` without compromising schedulability, as an exact fraction.
///
/// With no existing members the bound is 1. With `k = floor(min D_i / t_s)`
/// equal to zero the closed form would divide by zero, and no safe budget
/// can be claimed, so the bound is 0. Otherwise the bound is
/// `(1 - total_density) / (1 + total_density / k)`, clamped at zero.
pub fn augusto_bound(existing: &[SeqTask], t_s: Tick) -> Frac {
    assert!(t_s >= 1);
    if existing.is_empty() {
        return Frac::from_integer(1);
    }
    let total: Frac = existing.iter().map(SeqTask::density).sum();
    let min_deadline = existing.iter().map(|t| t.deadline).min().unwrap();
    let k = min_deadline / t_s;
    if k == 0 {
        return Frac::from_integer(0);
    }
    let one = Frac::from_integer(1);
    if total >= one {
        return Frac::from_integer(0);
    }
    (one - total) / (one + total / Frac::from_integer(k as i128))
}

/// Largest zero-laxity budget `C_s` (with deadline `C_s` and period `t_s`)
/// that the target holding `existing` accepts, at most `cap`.
///
/// Fast mode floors the closed-form bound into ticks; exact mode binary
/// searches the processor-demand test, which is monotone in `C_s`. Zero
/// means the target accepts nothing.
pub fn cd_sensitivity(existing: &[SeqTask], t_s: Tick, cap: Tick, mode: TestMode) -> Tick {
    let limit = cap.min(t_s);
    match mode {
        TestMode::Fast => {
            let bound = augusto_bound(existing, t_s) * Frac::from_integer(t_s as i128);
            let ticks = bound.floor().to_integer();
            debug_assert!(ticks >= 0);
            limit.min(ticks as Tick)
        }
        TestMode::Exact => {
            let fits = |c: Tick| {
                let mut with_piece = existing.to_vec();
                with_piece.push(SeqTask::new(c, c, t_s));
                exact_edf_schedulable(&with_piece)
            };
            let (mut lo, mut hi) = (0, limit);
            while lo < hi {
                let mid = lo + (hi - lo + 1) / 2;
                if fits(mid) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            lo
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dbf_steps_at_deadlines() {
        let t = SeqTask::new(2, 5, 10);
        assert_eq!(dbf(&t, 4), 0);
        assert_eq!(dbf(&t, 5), 2);
        assert_eq!(dbf(&t, 14), 2);
        assert_eq!(dbf(&t, 15), 4);
    }

    #[test]
    fn dbf_is_periodic_after_the_deadline() {
        let t = SeqTask::new(3, 7, 9);
        for x in 7..60 {
            assert_eq!(dbf(&t, x + t.period), dbf(&t, x) + t.exec);
        }
    }

    #[test]
    fn exact_test_examples() {
        let a = SeqTask::new(5, 5, 10);
        let b = SeqTask::new(5, 10, 10);
        assert!(exact_edf_schedulable(&[a, b]));
        let c = SeqTask::new(6, 10, 10);
        assert!(!exact_edf_schedulable(&[a, c]));
        assert!(exact_edf_schedulable(&[]));
    }

    #[test]
    fn density_test_examples() {
        let half = SeqTask::new(5, 10, 10);
        assert!(density_schedulable(&[half, half]));
        assert!(!density_schedulable(&[SeqTask::new(6, 10, 10), half]));
        assert!(density_schedulable(&[SeqTask::new(2, 4, 10)]));
    }

    #[test]
    fn augusto_bound_examples() {
        let existing = [SeqTask::new(50, 100, 100)];
        assert_eq!(augusto_bound(&existing, 50), Frac::new(2, 5));
        assert_eq!(augusto_bound(&[], 1000), Frac::from_integer(1));
        // floor(40 / 50) = 0 guards the division
        assert_eq!(augusto_bound(&[SeqTask::new(10, 40, 100)], 50), Frac::from_integer(0));
    }

    #[test]
    fn sensitivity_examples() {
        let existing = [SeqTask::new(50, 100, 100)];
        assert_eq!(cd_sensitivity(&existing, 50, 100, TestMode::Fast), 20);
        // the fast-mode budget must survive the exact test
        assert!(exact_edf_schedulable(&[
            SeqTask::new(50, 100, 100),
            SeqTask::new(20, 20, 50)
        ]));
        assert_eq!(cd_sensitivity(&[], 130, 98, TestMode::Fast), 98);
    }

    fn random_members(rng: &mut ChaCha8Rng, max_tasks: usize) -> Vec<SeqTask> {
        let n = rng.gen_range(0..=max_tasks);
        let mut out = Vec::new();
        for _ in 0..n {
            let period = rng.gen_range(4u64..30);
            let deadline = rng.gen_range(2..=period);
            let exec = rng.gen_range(1..=deadline);
            out.push(SeqTask::new(exec, deadline, period));
        }
        out
    }

    #[test]
    fn exact_sensitivity_dominates_fast() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let members = random_members(&mut rng, 3);
            let t_s = rng.gen_range(2u64..30);
            let cap = rng.gen_range(1u64..40);
            let fast = cd_sensitivity(&members, t_s, cap, TestMode::Fast);
            let exact = cd_sensitivity(&members, t_s, cap, TestMode::Exact);
            assert!(
                exact >= fast,
                "exact {exact} < fast {fast} for {members:?}, T_s={t_s}, cap={cap}"
            );
        }
    }

    #[test]
    fn fast_sensitivity_is_sound_against_the_exact_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let members = random_members(&mut rng, 4);
            if !exact_edf_schedulable(&members) {
                continue;
            }
            let t_s = rng.gen_range(2u64..30);
            let budget = cd_sensitivity(&members, t_s, t_s, TestMode::Fast);
            if budget == 0 {
                continue;
            }
            let mut with_piece = members.clone();
            with_piece.push(SeqTask::new(budget, budget, t_s));
            assert!(
                exact_edf_schedulable(&with_piece),
                "fast budget {budget} over-admits on {members:?}, T_s={t_s}"
            );
        }
    }

    #[test]
    fn density_admission_implies_exact_schedulability() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let members = random_members(&mut rng, 4);
            if density_schedulable(&members) {
                assert!(exact_edf_schedulable(&members), "density over-admits {members:?}");
            }
        }
    }

    #[test]
    fn fast_sensitivity_monotone_in_existing_density() {
        // same min deadline (so the same k), growing density
        let base = SeqTask::new(10, 90, 100);
        let mut members = vec![base];
        let mut last = cd_sensitivity(&members, 30, 1000, TestMode::Fast);
        for exec in [5u64, 10, 20, 40] {
            members.push(SeqTask::new(exec, 100, 100));
            let next = cd_sensitivity(&members, 30, 1000, TestMode::Fast);
            assert!(next <= last);
            last = next;
        }
    }
}
