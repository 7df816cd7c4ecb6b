//! Milestone planning: turn a hierarchical backlog and a set of milestones
//! into work packages, lay the packages out on a weekly capacity calendar, and
//! read the milestone plan off the layout.
//!
//! The pieces, in the order a plan is usually built:
//!
//! * [`backlog`]: the scope, as a WBS tree with hour estimates on the leaves
//! * [`graph`]: milestones and finish-to-finish dependencies between them
//! * [`matrix`]: which hours of which leaf go towards which milestone
//! * [`calendar`]: weeks, team size and blackout weeks
//! * [`schedule`]: the week-by-week layout of every work package
//! * [`document`]: the dated milestone table handed to stakeholders
//!
//! [`Plan`] bundles all of them and is what gets saved to disk.
//!
//! ```
//! use milestone_core::fixture;
//!
//! let plan = fixture::amazonlight();
//! let table = plan.matrix.table(&plan.backlog, &plan.graph).unwrap();
//! assert_eq!(table.total_effort, 2600);
//! assert_eq!(table.crosscutting_pool, 600);
//! ```

pub mod backlog;
pub mod calendar;
pub mod document;
pub mod fixture;
pub mod graph;
pub mod hours;
pub mod matrix;
pub mod plan;
pub mod schedule;

pub use backlog::{Backlog, BacklogItem, ItemId, ItemKind};
pub use calendar::{Calendar, Week};
pub use document::{MilestonePlanDocument, MilestoneStatus, RenderFormat};
pub use graph::{Dependency, Milestone, MilestoneGraph, MilestoneId, MilestoneKind, Responsible};
pub use hours::Hours;
pub use matrix::AllocationMatrix;
pub use plan::{Plan, PlanReport, PlanView, PLAN_SCHEMA};
pub use schedule::{Schedule, ScheduleError, WorkPackageConstraint};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/backlog.md")]
    struct Backlog;
    #[doc = include_str!("../../../book/src/milestones.md")]
    struct Milestones;
    #[doc = include_str!("../../../book/src/matrix.md")]
    struct Matrix;
    #[doc = include_str!("../../../book/src/scheduling.md")]
    struct Scheduling;
    #[doc = include_str!("../../../book/src/document.md")]
    struct Document;
    #[doc = include_str!("../../../book/src/plan-files.md")]
    struct PlanFiles;
}
