//! The work packages schedule: a weeks-by-hours canvas on which each
//! milestone's work package is laid out, together with the crosscutting
//! profile and any planner-inserted buffers.
//!
//! The engine stores hours per week rather than individual sticky notes. A
//! placement's timebox is the span of weeks it touches and its due week is the
//! last of them. Timeboxes may have holes (a package can be split around a
//! holiday) unless its constraint asks for a contiguous run.

mod auto;
mod context;
mod dates;
mod render;
mod validate;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, CalendarError, Week};
use crate::graph::{GraphError, MilestoneGraph, MilestoneId};
use crate::hours::Hours;
use crate::plan::PlanView;

pub use auto::{auto_schedule, earliest_completion, AutoSchedule, CancelToken, Diagnostic};
pub use context::completion_weeks;
pub use dates::derive_due_dates;
pub use render::{render_canvas_svg, CanvasOptions};
pub(crate) use render::escape as escape_xml;
pub use validate::{validate_schedule, ScheduleViolation};

pub type WeekHours = BTreeMap<Week, Hours>;

/// Earliest point at which any work of a package may happen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotBefore {
    /// Not before the week after this milestone completes.
    Milestone(MilestoneId),
    /// Not before the week containing this date.
    Date(NaiveDate),
}

/// How a work package may be laid out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkPackageConstraint {
    pub milestone_id: MilestoneId,
    /// Parallelism cap: at most this many hours of the package in any week.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_weekly_hours: Option<Hours>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub not_before: Option<NotBefore>,
    #[serde(default)]
    pub contiguous: bool,
}

impl WorkPackageConstraint {
    pub fn new(milestone_id: impl Into<MilestoneId>) -> Self {
        WorkPackageConstraint {
            milestone_id: milestone_id.into(),
            max_weekly_hours: None,
            not_before: None,
            contiguous: false,
        }
    }

    pub fn cap(mut self, hours: impl Into<Hours>) -> Self {
        self.max_weekly_hours = Some(hours.into());
        self
    }

    pub fn after(mut self, milestone: impl Into<MilestoneId>) -> Self {
        self.not_before = Some(NotBefore::Milestone(milestone.into()));
        self
    }

    pub fn not_before_date(mut self, date: NaiveDate) -> Self {
        self.not_before = Some(NotBefore::Date(date));
        self
    }

    pub fn contiguous(mut self) -> Self {
        self.contiguous = true;
        self
    }
}

/// The hours of one work package, week by week.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub milestone_id: MilestoneId,
    pub hours_by_week: WeekHours,
}

impl Placement {
    pub fn total(&self) -> Hours {
        self.hours_by_week.values().sum()
    }

    /// `(first week, due week)` of the weeks carrying hours.
    pub fn timebox(&self) -> Option<(Week, Week)> {
        timebox(&self.hours_by_week)
    }
}

pub(crate) fn timebox(hours: &WeekHours) -> Option<(Week, Week)> {
    let mut weeks = hours.iter().filter(|(_, h)| h.is_positive()).map(|(w, _)| *w);
    let first = weeks.next()?;
    let last = weeks.next_back().unwrap_or(first);
    Some((first, last))
}

/// Reserved capacity protecting a milestone. Scheduled like a placement but
/// carries no work.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Buffer {
    pub after_milestone_id: MilestoneId,
    pub hours_by_week: WeekHours,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(default)]
    pub placements: BTreeMap<MilestoneId, WeekHours>,
    #[serde(default)]
    pub crosscutting_profile: WeekHours,
    #[serde(default)]
    pub buffers: Vec<Buffer>,
    /// Week of each hard milestone's date.
    #[serde(default)]
    pub anchors: BTreeMap<MilestoneId, Week>,
}

/// Which part of a [`WorkPackageConstraint`] a layout breaks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintKind {
    MaxWeeklyHours { week: Week, hours: Hours, cap: Hours },
    NotBefore { week: Week, earliest: i64 },
    /// The gating milestone has not been scheduled yet.
    UnresolvedGate { gate: MilestoneId },
    /// Packages gate each other in a loop.
    GateCycle,
    NotContiguous { gap_week: Week },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum ScheduleError {
    #[error(transparent)]
    Calendar(#[from] CalendarError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unknown milestone {0}")]
    UnknownMilestone(MilestoneId),
    #[error("milestone {0} has no work package to place")]
    NoWorkPackage(MilestoneId),
    #[error("hard date {date} of {milestone} is beyond the horizon")]
    HardDateBeyondHorizon { milestone: MilestoneId, date: NaiveDate },
    #[error("hard date {date} of {milestone} is before the project start")]
    HardDateInPast { milestone: MilestoneId, date: NaiveDate },
    #[error("crosscutting pool of {pool} h does not fit: {per_week} h/week against {available} h free in week {week}")]
    PoolExceedsCapacity { pool: Hours, per_week: Hours, available: Hours, week: Week },
    #[error("hours in week {week} must be positive")]
    NonPositiveHours { week: Week },
    #[error("week {week} is over capacity by {overflow} h")]
    CapacityExceeded { week: Week, overflow: Hours },
    #[error("week {week} is a blackout week")]
    BlackoutViolation { week: Week },
    #[error("placement of {milestone} breaks its constraint: {kind:?}")]
    ConstraintViolation { milestone: MilestoneId, kind: ConstraintKind },
    #[error("{milestone} would be due in week {due_week}, after its anchor week {anchor_week}")]
    AnchorViolation { milestone: MilestoneId, due_week: Week, anchor_week: Week },
    #[error("{milestone}: {placed} h placed for a {effort} h work package")]
    EffortMismatch { milestone: MilestoneId, placed: Hours, effort: Hours },
    #[error("milestone {0} is not scheduled")]
    UnscheduledMilestone(MilestoneId),
    #[error("{milestone} cannot meet its anchor week {anchor_week}: {shortfall_hours} h late, earliest feasible week {earliest_feasible_week}")]
    Infeasible { milestone: MilestoneId, shortfall_hours: Hours, earliest_feasible_week: Week, anchor_week: Week },
    #[error("{0} h of {1} do not fit in the horizon")]
    Unplaced(Hours, MilestoneId),
    #[error("scheduling was cancelled")]
    Cancelled,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn placement(&self, milestone: &MilestoneId) -> Option<Placement> {
        self.placements
            .get(milestone)
            .map(|h| Placement { milestone_id: milestone.clone(), hours_by_week: h.clone() })
    }

    pub fn placed_total(&self, milestone: &MilestoneId) -> Hours {
        self.placements.get(milestone).map(|h| h.values().sum()).unwrap_or(Hours::ZERO)
    }

    /// Last week with hours for the milestone's package.
    pub fn due_week(&self, milestone: &MilestoneId) -> Option<Week> {
        self.placements.get(milestone).and_then(timebox).map(|(_, last)| last)
    }

    /// Hours committed in `week` by placements, crosscutting work and buffers.
    pub fn load(&self, week: Week) -> Hours {
        let placed: Hours = self.placements.values().filter_map(|h| h.get(&week)).sum();
        let buffered: Hours = self.buffers.iter().filter_map(|b| b.hours_by_week.get(&week)).sum();
        placed + buffered + self.crosscutting_profile.get(&week).copied().unwrap_or(Hours::ZERO)
    }

    fn load_excluding(&self, week: Week, milestone: &MilestoneId) -> Hours {
        self.load(week) - self.placements.get(milestone).and_then(|h| h.get(&week)).copied().unwrap_or(Hours::ZERO)
    }

    /// Free capacity in `week`; negative when over-committed.
    pub fn residual(&self, calendar: &Calendar, week: Week) -> Hours {
        calendar.capacity_unchecked(week) - self.load(week)
    }

    /// Last week touched by any placement, or by the anchors.
    pub fn span_end(&self) -> Option<Week> {
        let placed = self.placements.values().filter_map(timebox).map(|(_, last)| last);
        placed.chain(self.anchors.values().copied()).max()
    }

    /// Pins every hard milestone to the week containing its date.
    pub fn anchor_hard_milestones(&mut self, graph: &MilestoneGraph, calendar: &Calendar) -> Result<(), ScheduleError> {
        self.anchors = compute_anchors(graph, calendar)?;
        Ok(())
    }

    /// Spreads `pool` evenly over the working weeks from week 1 through
    /// [`span_end`](Self::span_end) (the whole horizon when nothing is
    /// anchored or placed yet), replacing any previous profile.
    pub fn spread_crosscutting(&mut self, calendar: &Calendar, pool: Hours) -> Result<(), ScheduleError> {
        let last = self.span_end().unwrap_or(calendar.horizon_weeks);
        self.spread_crosscutting_through(calendar, pool, last)
    }

    pub fn spread_crosscutting_through(&mut self, calendar: &Calendar, pool: Hours, last: Week) -> Result<(), ScheduleError> {
        let previous = std::mem::take(&mut self.crosscutting_profile);
        if pool.is_zero() {
            return Ok(());
        }
        let weeks: Vec<Week> = calendar.working_weeks_through(last).collect();
        if weeks.is_empty() {
            self.crosscutting_profile = previous;
            return Err(ScheduleError::PoolExceedsCapacity {
                pool,
                per_week: pool,
                available: Hours::ZERO,
                week: last.min(calendar.horizon_weeks).max(1),
            });
        }
        let share = pool / weeks.len() as i64;
        for &w in &weeks {
            let available = self.residual(calendar, w);
            if share > available {
                self.crosscutting_profile = previous;
                return Err(ScheduleError::PoolExceedsCapacity { pool, per_week: share, available, week: w });
            }
        }
        self.crosscutting_profile = weeks.into_iter().map(|w| (w, share)).collect();
        Ok(())
    }

    /// Puts (or replaces) the layout of one work package. Every rule is checked
    /// before anything changes, so a rejected placement leaves the schedule as
    /// it was. A layout may hold fewer hours than the package; see
    /// [`check_complete`](Self::check_complete).
    pub fn place(&mut self, view: &PlanView<'_>, milestone: &MilestoneId, hours_by_week: WeekHours) -> Result<(), ScheduleError> {
        let cal = view.calendar;
        let effort = view
            .matrix
            .work_package_effort(view.graph, milestone)
            .map_err(|_| ScheduleError::UnknownMilestone(milestone.clone()))?;
        if !effort.is_positive() {
            return Err(ScheduleError::NoWorkPackage(milestone.clone()));
        }
        for (&week, &h) in &hours_by_week {
            if !cal.contains(week) {
                return Err(CalendarError::WeekOutOfHorizon { week: week as i64, horizon: cal.horizon_weeks }.into());
            }
            if !h.is_positive() {
                return Err(ScheduleError::NonPositiveHours { week });
            }
            if cal.is_blackout(week) {
                return Err(ScheduleError::BlackoutViolation { week });
            }
        }
        let placed: Hours = hours_by_week.values().sum();
        if placed > effort {
            return Err(ScheduleError::EffortMismatch { milestone: milestone.clone(), placed, effort });
        }
        for (&week, &h) in &hours_by_week {
            let free = cal.capacity_unchecked(week) - self.load_excluding(week, milestone);
            if h > free {
                return Err(ScheduleError::CapacityExceeded { week, overflow: h - free.max(Hours::ZERO) });
            }
        }
        if let Some(c) = view.constraint(milestone) {
            let mut trial = self.clone();
            trial.placements.insert(milestone.clone(), hours_by_week.clone());
            if let Some(kind) = validate::constraint_breach(view, &trial, c, &hours_by_week)? {
                return Err(ScheduleError::ConstraintViolation { milestone: milestone.clone(), kind });
            }
        }
        if let Some(m) = view.graph.get(milestone) {
            if let (Some(date), Some((_, due))) = (m.hard_date, timebox(&hours_by_week)) {
                let anchor = cal.week_of(date);
                if due as i64 > anchor {
                    return Err(ScheduleError::AnchorViolation {
                        milestone: milestone.clone(),
                        due_week: due,
                        anchor_week: anchor.max(0) as Week,
                    });
                }
            }
        }
        if hours_by_week.is_empty() {
            self.placements.remove(milestone);
        } else {
            self.placements.insert(milestone.clone(), hours_by_week);
        }
        Ok(())
    }

    pub fn remove_placement(&mut self, milestone: &MilestoneId) -> Option<WeekHours> {
        self.placements.remove(milestone)
    }

    /// Errors unless the placed hours equal the work package exactly.
    pub fn check_complete(&self, view: &PlanView<'_>, milestone: &MilestoneId) -> Result<(), ScheduleError> {
        let effort = view
            .matrix
            .work_package_effort(view.graph, milestone)
            .map_err(|_| ScheduleError::UnknownMilestone(milestone.clone()))?;
        let placed = self.placed_total(milestone);
        if placed != effort {
            return Err(ScheduleError::EffortMismatch { milestone: milestone.clone(), placed, effort });
        }
        Ok(())
    }

    /// Reserves capacity after a milestone. Same grid rules as placements.
    pub fn add_buffer(&mut self, view: &PlanView<'_>, buffer: Buffer) -> Result<(), ScheduleError> {
        let cal = view.calendar;
        if !view.graph.contains(&buffer.after_milestone_id) {
            return Err(ScheduleError::UnknownMilestone(buffer.after_milestone_id));
        }
        for (&week, &h) in &buffer.hours_by_week {
            if !cal.contains(week) {
                return Err(CalendarError::WeekOutOfHorizon { week: week as i64, horizon: cal.horizon_weeks }.into());
            }
            if !h.is_positive() {
                return Err(ScheduleError::NonPositiveHours { week });
            }
            if cal.is_blackout(week) {
                return Err(ScheduleError::BlackoutViolation { week });
            }
            let free = self.residual(cal, week);
            if h > free {
                return Err(ScheduleError::CapacityExceeded { week, overflow: h - free.max(Hours::ZERO) });
            }
        }
        self.buffers.push(buffer);
        Ok(())
    }

    /// Per-milestone `{week -> hours}` records, crosscutting work under `"*crosscutting"`.
    pub fn export_records(&self) -> BTreeMap<String, WeekHours> {
        let mut out: BTreeMap<String, WeekHours> =
            self.placements.iter().map(|(m, h)| (m.0.clone(), h.clone())).collect();
        if !self.crosscutting_profile.is_empty() {
            out.insert("*crosscutting".to_string(), self.crosscutting_profile.clone());
        }
        out
    }
}

pub(crate) fn compute_anchors(graph: &MilestoneGraph, calendar: &Calendar) -> Result<BTreeMap<MilestoneId, Week>, ScheduleError> {
    let mut anchors = BTreeMap::new();
    for m in graph.milestones() {
        let Some(date) = m.hard_date else { continue };
        if date < calendar.start_date {
            return Err(ScheduleError::HardDateInPast { milestone: m.id.clone(), date });
        }
        let week = calendar.week_of(date);
        if week > calendar.horizon_weeks as i64 {
            return Err(ScheduleError::HardDateBeyondHorizon { milestone: m.id.clone(), date });
        }
        anchors.insert(m.id.clone(), week as Week);
    }
    Ok(anchors)
}
