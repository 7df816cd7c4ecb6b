use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::graph::MilestoneId;
use crate::plan::PlanView;

use super::{Schedule, ScheduleError};

/// Planned date of every milestone.
///
/// Soft milestones with work are due on the last day of their due week, hard
/// ones on their hard date. A milestone without work takes its commitment
/// date, else the latest date among everything before it, else the start of
/// the project.
pub fn derive_due_dates(view: &PlanView<'_>, schedule: &Schedule) -> Result<BTreeMap<MilestoneId, NaiveDate>, ScheduleError> {
    let order = view.graph.topological_order()?;
    let mut out: BTreeMap<MilestoneId, NaiveDate> = BTreeMap::new();
    for id in &order {
        let m = view.graph.get(id).expect("ordered ids exist");
        let effort = view.matrix.column_total(id);
        let date = if let Some(d) = m.hard_date {
            d
        } else if effort.is_positive() {
            schedule.check_complete(view, id).map_err(|_| ScheduleError::UnscheduledMilestone(id.clone()))?;
            let due = schedule.due_week(id).ok_or_else(|| ScheduleError::UnscheduledMilestone(id.clone()))?;
            view.calendar.week_end(due)
        } else if let Some(d) = m.commitment_date {
            d
        } else {
            view.graph
                .transitive_predecessors(id)?
                .iter()
                .filter_map(|p| out.get(p).copied())
                .max()
                .unwrap_or(view.calendar.start_date)
        };
        out.insert(id.clone(), date);
    }
    Ok(out)
}
