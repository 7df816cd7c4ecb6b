//! Plan edits as data, so the HTTP API, sessions and tests all go through one
//! code path. An edit either applies completely or leaves the plan untouched.

use chrono::NaiveDate;
use milestone_core::backlog::{BacklogError, BacklogItem};
use milestone_core::calendar::CalendarError;
use milestone_core::document::DocumentError;
use milestone_core::graph::{Dependency, GraphError, Milestone};
use milestone_core::matrix::MatrixError;
use milestone_core::schedule::{Buffer, CancelToken, WeekHours};
use milestone_core::{Calendar, Hours, ItemId, MilestoneId, MilestoneStatus, Plan, ScheduleError, WorkPackageConstraint};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// In JSON, `{"<op>": {fields}}`, or just `"<op>"` for edits without fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    AddItem {
        #[serde(default)]
        parent: Option<ItemId>,
        item: BacklogItem,
    },
    SetEffort { item: ItemId, effort: Option<Hours> },
    SetCrosscutting { item: ItemId, crosscutting: bool },
    RemoveItem { item: ItemId },
    AddMilestone { milestone: Milestone },
    UpdateMilestone { milestone: Milestone },
    RemoveMilestone { milestone: MilestoneId },
    AddDependency { dependency: Dependency },
    RemoveDependency { dependency: Dependency },
    Allocate { item: ItemId, milestone: MilestoneId, hours: Hours },
    Deallocate { item: ItemId, milestone: MilestoneId, hours: Hours },
    SetCalendar { calendar: Calendar },
    SetConstraints { constraints: Vec<WorkPackageConstraint> },
    Place { milestone: MilestoneId, hours_by_week: WeekHours },
    RemovePlacement { milestone: MilestoneId },
    AddBuffer { buffer: Buffer },
    SpreadCrosscutting,
    AutoSchedule,
    ClearSchedule,
    AssembleDocument { as_of: NaiveDate },
    UpdateStatus {
        milestone: MilestoneId,
        status: MilestoneStatus,
        #[serde(default)]
        forecast_date: Option<NaiveDate>,
        on: NaiveDate,
    },
}

/// Why an edit was refused. Serializes as the engine's own error value.
#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize)]
#[serde(untagged)]
pub enum OpError {
    #[error(transparent)]
    Backlog(#[from] BacklogError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("invalid calendar: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Calendar(Vec<CalendarError>),
    #[error("milestone {0} is still referenced by the matrix or the constraints")]
    #[serde(serialize_with = "still_allocated")]
    StillAllocated(MilestoneId),
    #[error("the plan has no document yet")]
    #[serde(serialize_with = "no_document")]
    NoDocument,
}

fn still_allocated<S: serde::Serializer>(m: &MilestoneId, s: S) -> Result<S::Ok, S::Error> {
    json!({"error": "still_allocated", "detail": m}).serialize(s)
}

fn no_document<S: serde::Serializer>(s: S) -> Result<S::Ok, S::Error> {
    json!({"error": "no_document"}).serialize(s)
}

/// Applies `op` to `plan`. On error the plan is unchanged. The returned value
/// carries anything the edit produced besides the new plan (diagnostics of an
/// automatic layout, for instance); it is `null` otherwise.
pub fn apply(plan: &mut Plan, op: &Op, cancel: Option<&CancelToken>) -> Result<Value, OpError> {
    let mut next = plan.clone();
    let out = apply_in_place(&mut next, op, cancel)?;
    *plan = next;
    Ok(out)
}

fn apply_in_place(plan: &mut Plan, op: &Op, cancel: Option<&CancelToken>) -> Result<Value, OpError> {
    match op {
        Op::AddItem { parent, item } => {
            plan.backlog.add_item(parent.as_ref(), item.clone())?;
        }
        Op::SetEffort { item, effort } => plan.backlog.set_effort(item, *effort)?,
        Op::SetCrosscutting { item, crosscutting } => plan.backlog.set_crosscutting(item, *crosscutting)?,
        Op::RemoveItem { item } => {
            plan.backlog.remove_item(item)?;
            plan.matrix.clear_item(item);
        }
        Op::AddMilestone { milestone } => {
            plan.graph.add_milestone(milestone.clone())?;
        }
        Op::UpdateMilestone { milestone } => plan.graph.update_milestone(milestone.clone())?,
        Op::RemoveMilestone { milestone } => {
            let referenced = plan.matrix.allocations().any(|a| &a.milestone_id == milestone)
                || plan.constraints.iter().any(|c| &c.milestone_id == milestone);
            if referenced {
                return Err(OpError::StillAllocated(milestone.clone()));
            }
            plan.graph.remove_milestone(milestone)?;
            if let Some(s) = plan.schedule.as_mut() {
                s.placements.remove(milestone);
                s.anchors.remove(milestone);
            }
        }
        Op::AddDependency { dependency } => plan.graph.add_dependency(dependency.clone())?,
        Op::RemoveDependency { dependency } => {
            if !plan.graph.remove_dependency(dependency) {
                return Err(GraphError::UnknownMilestone(dependency.successor.clone()).into());
            }
        }
        Op::Allocate { item, milestone, hours } => {
            plan.matrix.allocate(&plan.backlog, &plan.graph, item, milestone, *hours)?
        }
        Op::Deallocate { item, milestone, hours } => plan.matrix.deallocate(item, milestone, *hours)?,
        Op::SetCalendar { calendar } => {
            let errors = calendar.validate();
            if !errors.is_empty() {
                return Err(OpError::Calendar(errors));
            }
            plan.calendar = calendar.clone();
            if let Some(s) = plan.schedule.as_mut() {
                s.anchors.clear();
                s.anchor_hard_milestones(&plan.graph, &plan.calendar)?;
            }
        }
        Op::SetConstraints { constraints } => {
            if let Some(c) = constraints.iter().find(|c| !plan.graph.contains(&c.milestone_id)) {
                return Err(GraphError::UnknownMilestone(c.milestone_id.clone()).into());
            }
            plan.constraints = constraints.clone();
        }
        Op::Place { milestone, hours_by_week } => plan.place(milestone, hours_by_week.clone())?,
        Op::RemovePlacement { milestone } => {
            let removed = plan.schedule.as_mut().and_then(|s| s.remove_placement(milestone));
            if removed.is_none() {
                return Err(ScheduleError::UnscheduledMilestone(milestone.clone()).into());
            }
        }
        Op::AddBuffer { buffer } => {
            let mut schedule = plan.schedule.clone().unwrap_or_default();
            schedule.add_buffer(&plan.view(), buffer.clone())?;
            plan.schedule = Some(schedule);
        }
        Op::SpreadCrosscutting => plan.spread_crosscutting()?,
        Op::AutoSchedule => {
            let diagnostics = plan.auto_schedule(cancel)?;
            return Ok(json!({ "diagnostics": diagnostics }));
        }
        Op::ClearSchedule => plan.schedule = None,
        Op::AssembleDocument { as_of } => {
            plan.assemble_document(*as_of)?;
        }
        Op::UpdateStatus { milestone, status, forecast_date, on } => {
            let doc = plan.document.as_mut().ok_or(OpError::NoDocument)?;
            doc.update_status(milestone, *status, *forecast_date, *on)?;
        }
    }
    Ok(Value::Null)
}
