use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::Week;
use crate::graph::MilestoneId;
use crate::hours::Hours;
use crate::plan::PlanView;

use super::context::{completion_weeks, gate_week, predecessor_finish};
use super::{timebox, ConstraintKind, Schedule, ScheduleError, WeekHours, WorkPackageConstraint};

/// One broken rule in a schedule. `milestone` is `None` for the crosscutting
/// profile and buffers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum ScheduleViolation {
    UnknownMilestone { milestone: MilestoneId },
    OutOfHorizon { milestone: Option<MilestoneId>, week: Week },
    NonPositiveHours { milestone: Option<MilestoneId>, week: Week },
    BlackoutViolation { milestone: Option<MilestoneId>, week: Week },
    CapacityExceeded { week: Week, overflow: Hours },
    /// Hours placed for a milestone whose work package is empty.
    UnexpectedPlacement { milestone: MilestoneId },
    IncompletePlacement { milestone: MilestoneId, placed: Hours, effort: Hours },
    ConstraintViolation { milestone: MilestoneId, kind: ConstraintKind },
    AnchorViolation { milestone: MilestoneId, due_week: Week, anchor_week: i64 },
    HardDateOutsideHorizon { milestone: MilestoneId, date: NaiveDate },
    DependencyOrderViolation { predecessor: MilestoneId, successor: MilestoneId, predecessor_week: i64, successor_week: i64 },
    CrosscuttingMismatch { pool: Hours, profiled: Hours },
}

/// Every rule the schedule breaks. Empty means all grid, capacity, anchor and
/// constraint rules hold, every work package is completely placed, the
/// crosscutting pool is fully profiled and every finish-to-finish edge holds.
pub fn validate_schedule(view: &PlanView<'_>, schedule: &Schedule) -> Result<Vec<ScheduleViolation>, ScheduleError> {
    let cal = view.calendar;
    let mut out = Vec::new();

    let grid = |m: Option<&MilestoneId>, hours: &WeekHours, out: &mut Vec<ScheduleViolation>| {
        for (&week, h) in hours {
            let milestone = m.cloned();
            if !cal.contains(week) {
                out.push(ScheduleViolation::OutOfHorizon { milestone, week });
            } else if !h.is_positive() {
                out.push(ScheduleViolation::NonPositiveHours { milestone, week });
            } else if cal.is_blackout(week) {
                out.push(ScheduleViolation::BlackoutViolation { milestone, week });
            }
        }
    };
    for (m, hours) in &schedule.placements {
        grid(Some(m), hours, &mut out);
    }
    grid(None, &schedule.crosscutting_profile, &mut out);
    for b in &schedule.buffers {
        grid(None, &b.hours_by_week, &mut out);
    }

    let mut weeks: Vec<Week> = schedule.placements.values().flat_map(|h| h.keys().copied()).collect();
    weeks.extend(schedule.crosscutting_profile.keys());
    weeks.extend(schedule.buffers.iter().flat_map(|b| b.hours_by_week.keys().copied()));
    weeks.sort_unstable();
    weeks.dedup();
    for week in weeks.into_iter().filter(|w| cal.contains(*w) && !cal.is_blackout(*w)) {
        let over = schedule.load(week) - cal.capacity_unchecked(week);
        if over.is_positive() {
            out.push(ScheduleViolation::CapacityExceeded { week, overflow: over });
        }
    }

    for m in schedule.placements.keys() {
        if !view.graph.contains(m) {
            out.push(ScheduleViolation::UnknownMilestone { milestone: m.clone() });
        }
    }

    for m in view.graph.milestones() {
        let effort = view.matrix.column_total(&m.id);
        let placed = schedule.placed_total(&m.id);
        if !effort.is_positive() {
            if schedule.placements.get(&m.id).is_some_and(|h| !h.is_empty()) {
                out.push(ScheduleViolation::UnexpectedPlacement { milestone: m.id.clone() });
            }
        } else if placed != effort {
            out.push(ScheduleViolation::IncompletePlacement { milestone: m.id.clone(), placed, effort });
        }
        if let Some(date) = m.hard_date {
            let anchor = cal.week_of(date);
            if anchor < 1 || anchor > cal.horizon_weeks as i64 {
                out.push(ScheduleViolation::HardDateOutsideHorizon { milestone: m.id.clone(), date });
            }
            if let Some(due) = schedule.due_week(&m.id) {
                if due as i64 > anchor {
                    out.push(ScheduleViolation::AnchorViolation { milestone: m.id.clone(), due_week: due, anchor_week: anchor });
                }
            }
        }
    }

    let completions = completion_weeks(view, schedule)?;
    for c in view.constraints {
        if let Some(hours) = schedule.placements.get(&c.milestone_id) {
            for kind in breaches(view, &completions, c, hours) {
                out.push(ScheduleViolation::ConstraintViolation { milestone: c.milestone_id.clone(), kind });
            }
        }
    }

    for d in view.graph.dependencies() {
        let (Some(Some(p)), Some(Some(s))) = (completions.get(&d.predecessor), completions.get(&d.successor)) else {
            continue;
        };
        if s < p {
            out.push(ScheduleViolation::DependencyOrderViolation {
                predecessor: d.predecessor.clone(),
                successor: d.successor.clone(),
                predecessor_week: *p,
                successor_week: *s,
            });
        }
    }

    let pool = view.matrix.crosscutting_pool(view.backlog);
    let profiled: Hours = schedule.crosscutting_profile.values().sum();
    if pool != profiled {
        out.push(ScheduleViolation::CrosscuttingMismatch { pool, profiled });
    }
    Ok(out)
}

/// All ways `hours` breaks constraint `c`, given the completions of the rest
/// of the schedule.
pub(crate) fn breaches(
    view: &PlanView<'_>,
    completions: &BTreeMap<MilestoneId, Option<i64>>,
    c: &WorkPackageConstraint,
    hours: &WeekHours,
) -> Vec<ConstraintKind> {
    let mut out = Vec::new();
    if let Some(cap) = c.max_weekly_hours {
        for (&week, &h) in hours {
            if h > cap {
                out.push(ConstraintKind::MaxWeeklyHours { week, hours: h, cap });
            }
        }
    }
    if let Some((first, last)) = timebox(hours) {
        match gate_week(view, completions, c) {
            Ok(Some(earliest)) if (first as i64) < earliest => {
                out.push(ConstraintKind::NotBefore { week: first, earliest });
            }
            Ok(_) => {}
            Err(kind) => out.push(kind),
        }
        if c.contiguous {
            let gap = (first..=last)
                .find(|w| !view.calendar.is_blackout(*w) && !hours.get(w).is_some_and(|h| h.is_positive()));
            if let Some(gap_week) = gap {
                out.push(ConstraintKind::NotContiguous { gap_week });
            }
        }
    }
    out
}

pub(crate) fn constraint_breach(
    view: &PlanView<'_>,
    trial: &Schedule,
    c: &WorkPackageConstraint,
    hours: &WeekHours,
) -> Result<Option<ConstraintKind>, ScheduleError> {
    let completions = completion_weeks(view, trial)?;
    Ok(breaches(view, &completions, c, hours).into_iter().next())
}

/// Finish-to-finish check for one milestone: its completion against the
/// latest of its predecessors.
pub(crate) fn ff_breach(
    view: &PlanView<'_>,
    completions: &BTreeMap<MilestoneId, Option<i64>>,
    id: &MilestoneId,
) -> bool {
    match (predecessor_finish(view, completions, id), completions.get(id).copied().flatten()) {
        (Ok(Some(p)), Some(own)) => own < p,
        _ => false,
    }
}
