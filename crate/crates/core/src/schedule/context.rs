//! Completion weeks, gates and the dependency-plus-gate ordering shared by the
//! validator and the auto-scheduler.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use crate::graph::{GraphError, MilestoneId};
use crate::plan::PlanView;

use super::{ConstraintKind, NotBefore, Schedule, ScheduleError, WorkPackageConstraint};

/// Week in which each milestone counts as reached, `None` while its work
/// package is not completely placed (or a predecessor it inherits from is not).
///
/// * hard: the later of its anchor week and its package's due week
/// * soft with work: the due week
/// * soft without work: its commitment week, else the latest predecessor, else week 1
///
/// Weeks are signed because commitment and hard dates may sit outside the horizon.
pub fn completion_weeks(view: &PlanView<'_>, schedule: &Schedule) -> Result<BTreeMap<MilestoneId, Option<i64>>, GraphError> {
    let order = view.graph.topological_order()?;
    let mut out: BTreeMap<MilestoneId, Option<i64>> = BTreeMap::new();
    for id in &order {
        let m = view.graph.get(id).expect("ordered ids exist");
        let effort = view.matrix.column_total(id);
        let due = if effort.is_positive() {
            if schedule.placed_total(id) == effort {
                schedule.due_week(id).map(i64::from)
            } else {
                None
            }
        } else {
            None
        };
        let c = if let Some(date) = m.hard_date {
            let anchor = view.calendar.week_of(date);
            if effort.is_positive() {
                due.map(|d| d.max(anchor))
            } else {
                Some(anchor)
            }
        } else if effort.is_positive() {
            due
        } else if let Some(date) = m.commitment_date {
            Some(view.calendar.week_of(date))
        } else {
            let mut c = Some(1i64);
            for p in view.graph.predecessors(id) {
                c = match (c, out.get(p).copied().flatten()) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                };
            }
            c
        };
        out.insert(id.clone(), c);
    }
    Ok(out)
}

/// Latest completion among direct predecessors; `Err(())` if any is unknown.
pub(crate) fn predecessor_finish(
    view: &PlanView<'_>,
    completions: &BTreeMap<MilestoneId, Option<i64>>,
    id: &MilestoneId,
) -> Result<Option<i64>, ()> {
    let mut best = None;
    for p in view.graph.predecessors(id) {
        let c = completions.get(p).copied().flatten().ok_or(())?;
        best = Some(best.map_or(c, |b: i64| b.max(c)));
    }
    Ok(best)
}

/// First week in which work of the constrained package may happen.
pub(crate) fn gate_week(
    view: &PlanView<'_>,
    completions: &BTreeMap<MilestoneId, Option<i64>>,
    c: &WorkPackageConstraint,
) -> Result<Option<i64>, ConstraintKind> {
    match &c.not_before {
        None => Ok(None),
        Some(NotBefore::Date(d)) => Ok(Some(view.calendar.week_of(*d))),
        Some(NotBefore::Milestone(g)) => match completions.get(g).copied().flatten() {
            Some(w) => Ok(Some(w + 1)),
            None => Err(ConstraintKind::UnresolvedGate { gate: g.clone() }),
        },
    }
}

/// Kahn's order over dependency edges plus `gate -> package` edges, ready
/// milestones released by smallest `key`.
pub(crate) fn augmented_order<K: Ord>(
    view: &PlanView<'_>,
    mut key: impl FnMut(usize, &MilestoneId) -> K,
) -> Result<Vec<MilestoneId>, ScheduleError> {
    let ms = view.graph.milestones();
    let pos: HashMap<&MilestoneId, usize> = ms.iter().enumerate().map(|(i, m)| (&m.id, i)).collect();
    let n = ms.len();
    let mut indegree = vec![0usize; n];
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (p, s) in augmented_edges(view) {
        let (Some(&p), Some(&s)) = (pos.get(&p), pos.get(&s)) else { continue };
        indegree[s] += 1;
        out_edges[p].push(s);
    }
    let keys: Vec<K> = ms.iter().enumerate().map(|(i, m)| key(i, &m.id)).collect();
    let mut ready: BinaryHeap<Reverse<(&K, usize)>> =
        (0..n).filter(|&i| indegree[i] == 0).map(|i| Reverse((&keys[i], i))).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, i))) = ready.pop() {
        order.push(ms[i].id.clone());
        for &s in &out_edges[i] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse((&keys[s], s)));
            }
        }
    }
    if order.len() < n {
        if let Some(path) = view.graph.find_cycle() {
            return Err(GraphError::CyclicGraph { path }.into());
        }
        let stuck = (0..n).find(|&i| indegree[i] > 0).expect("some milestone was not released");
        return Err(ScheduleError::ConstraintViolation { milestone: ms[stuck].id.clone(), kind: ConstraintKind::GateCycle });
    }
    Ok(order)
}

pub(crate) fn augmented_edges(view: &PlanView<'_>) -> Vec<(MilestoneId, MilestoneId)> {
    let mut edges: Vec<(MilestoneId, MilestoneId)> =
        view.graph.dependencies().iter().map(|d| (d.predecessor.clone(), d.successor.clone())).collect();
    for c in view.constraints {
        if let Some(NotBefore::Milestone(g)) = &c.not_before {
            edges.push((g.clone(), c.milestone_id.clone()));
        }
    }
    edges
}
