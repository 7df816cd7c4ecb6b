//! A whole plan: backlog, milestones, matrix, calendar, layout constraints and
//! optionally a schedule and the assembled document. This is also the on-disk
//! JSON format.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backlog::{Backlog, BacklogViolation};
use crate::calendar::{Calendar, CalendarError};
use crate::document::{DocumentError, MilestonePlanDocument};
use crate::graph::{GraphError, MilestoneGraph, MilestoneId};
use crate::matrix::{AllocationMatrix, MatrixLint, MatrixViolation};
use crate::schedule::{
    auto_schedule, derive_due_dates, validate_schedule, CancelToken, Diagnostic, Schedule, ScheduleError,
    ScheduleViolation, WeekHours, WorkPackageConstraint,
};

pub const PLAN_SCHEMA: &str = "milestone-plan/v1";

fn schema_id() -> String {
    PLAN_SCHEMA.to_string()
}

/// Borrowed pieces of a plan that the scheduler and document builders read.
#[derive(Debug, Clone, Copy)]
pub struct PlanView<'a> {
    pub backlog: &'a Backlog,
    pub graph: &'a MilestoneGraph,
    pub matrix: &'a AllocationMatrix,
    pub calendar: &'a Calendar,
    pub constraints: &'a [WorkPackageConstraint],
}

impl<'a> PlanView<'a> {
    /// First constraint recorded for the milestone.
    pub fn constraint(&self, milestone: &MilestoneId) -> Option<&'a WorkPackageConstraint> {
        self.constraints.iter().find(|c| &c.milestone_id == milestone)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    #[serde(default = "schema_id")]
    pub schema: String,
    pub name: String,
    pub backlog: Backlog,
    #[serde(flatten)]
    pub graph: MilestoneGraph,
    #[serde(rename = "allocations", default)]
    pub matrix: AllocationMatrix,
    pub calendar: Calendar,
    #[serde(default)]
    pub constraints: Vec<WorkPackageConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<MilestonePlanDocument>,
}

#[derive(Debug, thiserror::Error)]
pub enum PlanFileError {
    #[error("not a plan file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported plan schema {0:?}")]
    Schema(String),
}

/// Everything wrong with a plan, grouped by where it was found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PlanReport {
    pub backlog: Vec<BacklogViolation>,
    pub graph: Vec<GraphError>,
    pub calendar: Vec<CalendarError>,
    pub matrix: Vec<MatrixViolation>,
    pub lints: Vec<MatrixLint>,
    pub schedule: Vec<ScheduleViolation>,
}

impl PlanReport {
    /// No violations of any kind. Lints do not count.
    pub fn is_clean(&self) -> bool {
        self.backlog.is_empty()
            && self.graph.is_empty()
            && self.calendar.is_empty()
            && self.matrix.is_empty()
            && self.schedule.is_empty()
    }

    /// Problems that make the plan inconsistent, as opposed to unfinished.
    /// Under-allocated items and a stale or partial schedule are unfinished.
    pub fn has_errors(&self) -> bool {
        !self.backlog.is_empty()
            || !self.graph.is_empty()
            || !self.calendar.is_empty()
            || self.matrix.iter().any(|v| !v.is_warning())
    }
}

impl Plan {
    pub fn new(name: impl Into<String>, calendar: Calendar) -> Self {
        Plan {
            schema: schema_id(),
            name: name.into(),
            backlog: Backlog::new(),
            graph: MilestoneGraph::new(),
            matrix: AllocationMatrix::new(),
            calendar,
            constraints: Vec::new(),
            schedule: None,
            document: None,
        }
    }

    pub fn view(&self) -> PlanView<'_> {
        PlanView {
            backlog: &self.backlog,
            graph: &self.graph,
            matrix: &self.matrix,
            calendar: &self.calendar,
            constraints: &self.constraints,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PlanFileError> {
        let plan: Plan = serde_json::from_str(text)?;
        if plan.schema != PLAN_SCHEMA {
            return Err(PlanFileError::Schema(plan.schema));
        }
        Ok(plan)
    }

    /// Pretty JSON with a trailing newline. Same plan, same bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plans serialize");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> PlanReport {
        let mut graph = self.graph.validate();
        for c in &self.constraints {
            if !self.graph.contains(&c.milestone_id) {
                graph.push(GraphError::UnknownMilestone(c.milestone_id.clone()));
            }
        }
        let mut report = PlanReport {
            backlog: self.backlog.validate(),
            calendar: self.calendar.validate(),
            matrix: self.matrix.validate(&self.backlog, &self.graph),
            lints: self.matrix.lint(&self.backlog),
            graph,
            schedule: Vec::new(),
        };
        if let Some(s) = &self.schedule {
            if report.graph.is_empty() {
                match validate_schedule(&self.view(), s) {
                    Ok(v) => report.schedule = v,
                    Err(ScheduleError::Graph(e)) => report.graph.push(e),
                    Err(_) => {}
                }
            }
        }
        report
    }

    fn schedule_mut(&mut self) -> Result<&mut Schedule, ScheduleError> {
        if self.schedule.is_none() {
            let mut s = Schedule::new();
            s.anchor_hard_milestones(&self.graph, &self.calendar)?;
            self.schedule = Some(s);
        }
        Ok(self.schedule.as_mut().expect("just set"))
    }

    /// Places one work package by hand (see [`Schedule::place`]).
    pub fn place(&mut self, milestone: &MilestoneId, hours: WeekHours) -> Result<(), ScheduleError> {
        let mut schedule = self.schedule_mut()?.clone();
        schedule.place(&self.view(), milestone, hours)?;
        self.schedule = Some(schedule);
        Ok(())
    }

    /// Spreads the crosscutting pool over the current schedule's span.
    pub fn spread_crosscutting(&mut self) -> Result<(), ScheduleError> {
        let pool = self.matrix.crosscutting_pool(&self.backlog);
        let mut schedule = self.schedule_mut()?.clone();
        schedule.spread_crosscutting(&self.calendar, pool)?;
        self.schedule = Some(schedule);
        Ok(())
    }

    /// Replaces the schedule with an automatic layout, keeping buffers. The
    /// layout is stored even when some diagnostics come back.
    pub fn auto_schedule(&mut self, cancel: Option<&CancelToken>) -> Result<Vec<Diagnostic>, ScheduleError> {
        let buffers = self.schedule.as_ref().map(|s| s.buffers.clone()).unwrap_or_default();
        let out = auto_schedule(&self.view(), &buffers, cancel)?;
        self.schedule = Some(out.schedule);
        Ok(out.diagnostics)
    }

    pub fn due_dates(&self) -> Result<BTreeMap<MilestoneId, NaiveDate>, ScheduleError> {
        let schedule = self.schedule.clone().unwrap_or_default();
        derive_due_dates(&self.view(), &schedule)
    }

    /// Rebuilds the document from the current schedule.
    pub fn assemble_document(&mut self, as_of: NaiveDate) -> Result<&MilestonePlanDocument, DocumentError> {
        let schedule = self.schedule.clone().unwrap_or_default();
        let doc = MilestonePlanDocument::assemble(&self.view(), &schedule, as_of)?;
        Ok(self.document.insert(doc))
    }
}
