//! The milestone planning matrix: backlog leaves by milestones, each cell the
//! hours of that leaf that go towards that milestone. Column sums are the work
//! packages the scheduler places.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::backlog::{Backlog, ItemId};
use crate::graph::{GraphError, MilestoneGraph, MilestoneId};
use crate::hours::Hours;

/// Splitting one item over more milestones than this raises a lint.
pub const SPLIT_LINT_THRESHOLD: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub item_id: ItemId,
    pub milestone_id: MilestoneId,
    pub hours: Hours,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum MatrixError {
    #[error("unknown backlog item {0}")]
    UnknownItem(ItemId),
    #[error("unknown milestone {0}")]
    UnknownMilestone(MilestoneId),
    #[error("item {0} is not a leaf")]
    NotALeaf(ItemId),
    #[error("allocated hours must be positive")]
    NonPositiveHours,
    #[error("item {item} has only {remaining} h left to allocate")]
    OverAllocation { item: ItemId, remaining: Hours },
    #[error("item {item} has only {allocated} h allocated to {milestone}")]
    NothingToRelease { item: ItemId, milestone: MilestoneId, allocated: Hours },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum MatrixViolation {
    UnknownItem { item: ItemId },
    UnknownMilestone { milestone: MilestoneId },
    NotALeaf { item: ItemId },
    NonPositiveHours { item: ItemId, milestone: MilestoneId },
    OverAllocated { item: ItemId, excess: Hours },
    /// A non-crosscutting leaf with unallocated hours.
    UnderAllocated { item: ItemId, missing: Hours },
    /// Column sums plus the crosscutting pool differ from the backlog total.
    ConservationMismatch { backlog_total: Hours, accounted: Hours },
}

impl MatrixViolation {
    /// Incompleteness rather than inconsistency; a plan under construction may
    /// still be saved with these.
    pub fn is_warning(&self) -> bool {
        matches!(self, MatrixViolation::UnderAllocated { .. })
    }
}

impl fmt::Display for MatrixViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixViolation::UnknownItem { item } => write!(f, "unknown item {item}"),
            MatrixViolation::UnknownMilestone { milestone } => write!(f, "unknown milestone {milestone}"),
            MatrixViolation::NotALeaf { item } => write!(f, "{item} is not a leaf"),
            MatrixViolation::NonPositiveHours { item, milestone } => {
                write!(f, "{item} -> {milestone}: hours must be positive")
            }
            MatrixViolation::OverAllocated { item, excess } => write!(f, "{item} over-allocated by {excess} h"),
            MatrixViolation::UnderAllocated { item, missing } => write!(f, "{item} under-allocated by {missing} h"),
            MatrixViolation::ConservationMismatch { backlog_total, accounted } => {
                write!(f, "backlog total {backlog_total} h but matrix accounts for {accounted} h")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "lint", rename_all = "snake_case")]
pub enum MatrixLint {
    /// Item spread over more than [`SPLIT_LINT_THRESHOLD`] milestones.
    ExcessiveSplit { item: ItemId, milestones: usize },
    /// Crosscutting item that also has milestone allocations.
    MixedCrosscutting { item: ItemId, allocated: Hours },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<Allocation>", into = "Vec<Allocation>")]
pub struct AllocationMatrix {
    cells: BTreeMap<(ItemId, MilestoneId), Hours>,
}

impl From<Vec<Allocation>> for AllocationMatrix {
    fn from(list: Vec<Allocation>) -> Self {
        let mut cells = BTreeMap::new();
        for a in list {
            *cells.entry((a.item_id, a.milestone_id)).or_insert(Hours::ZERO) += a.hours;
        }
        AllocationMatrix { cells }
    }
}

impl From<AllocationMatrix> for Vec<Allocation> {
    fn from(m: AllocationMatrix) -> Self {
        m.allocations().collect()
    }
}

impl AllocationMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocations(&self) -> impl Iterator<Item = Allocation> + '_ {
        self.cells.iter().map(|((i, m), h)| Allocation { item_id: i.clone(), milestone_id: m.clone(), hours: *h })
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, item: &ItemId, milestone: &MilestoneId) -> Hours {
        self.cells.get(&(item.clone(), milestone.clone())).copied().unwrap_or(Hours::ZERO)
    }

    /// Hours of `item` allocated across all milestones.
    pub fn row_total(&self, item: &ItemId) -> Hours {
        self.cells.iter().filter(|((i, _), _)| i == item).map(|(_, h)| *h).sum()
    }

    /// Records `hours` of `item` against `milestone`, adding to any existing cell.
    pub fn allocate(
        &mut self,
        backlog: &Backlog,
        graph: &MilestoneGraph,
        item: &ItemId,
        milestone: &MilestoneId,
        hours: Hours,
    ) -> Result<(), MatrixError> {
        if !hours.is_positive() {
            return Err(MatrixError::NonPositiveHours);
        }
        let leaf = backlog.get(item).ok_or_else(|| MatrixError::UnknownItem(item.clone()))?;
        if !graph.contains(milestone) {
            return Err(MatrixError::UnknownMilestone(milestone.clone()));
        }
        if backlog.has_children(item) {
            return Err(MatrixError::NotALeaf(item.clone()));
        }
        let budget = leaf.effort_hours.unwrap_or(Hours::ZERO);
        let remaining = budget - self.row_total(item);
        if hours > remaining {
            return Err(MatrixError::OverAllocation { item: item.clone(), remaining: remaining.max(Hours::ZERO) });
        }
        *self.cells.entry((item.clone(), milestone.clone())).or_insert(Hours::ZERO) += hours;
        Ok(())
    }

    /// Inverse of [`allocate`](Self::allocate).
    pub fn deallocate(&mut self, item: &ItemId, milestone: &MilestoneId, hours: Hours) -> Result<(), MatrixError> {
        if !hours.is_positive() {
            return Err(MatrixError::NonPositiveHours);
        }
        let key = (item.clone(), milestone.clone());
        let allocated = self.cells.get(&key).copied().unwrap_or(Hours::ZERO);
        if hours > allocated {
            return Err(MatrixError::NothingToRelease { item: item.clone(), milestone: milestone.clone(), allocated });
        }
        if hours == allocated {
            self.cells.remove(&key);
        } else {
            self.cells.insert(key, allocated - hours);
        }
        Ok(())
    }

    /// Drops every cell that refers to `milestone`.
    pub fn clear_milestone(&mut self, milestone: &MilestoneId) {
        self.cells.retain(|(_, m), _| m != milestone);
    }

    /// Drops every cell of `item`.
    pub fn clear_item(&mut self, item: &ItemId) {
        self.cells.retain(|(i, _), _| i != item);
    }

    /// Column sum for `milestone`: the size of its work package.
    pub fn work_package_effort(&self, graph: &MilestoneGraph, milestone: &MilestoneId) -> Result<Hours, MatrixError> {
        if !graph.contains(milestone) {
            return Err(MatrixError::UnknownMilestone(milestone.clone()));
        }
        Ok(self.column_total(milestone))
    }

    pub(crate) fn column_total(&self, milestone: &MilestoneId) -> Hours {
        self.cells.iter().filter(|((_, m), _)| m == milestone).map(|(_, h)| *h).sum()
    }

    /// Work package size per milestone, for every milestone in the graph.
    pub fn work_packages(&self, graph: &MilestoneGraph) -> BTreeMap<MilestoneId, Hours> {
        graph.milestones().iter().map(|m| (m.id.clone(), self.column_total(&m.id))).collect()
    }

    /// Unallocated hours of crosscutting leaves, to be spread over the project.
    pub fn crosscutting_pool(&self, backlog: &Backlog) -> Hours {
        backlog
            .items()
            .iter()
            .filter(|it| it.crosscutting && !backlog.has_children(&it.id))
            .map(|it| (it.effort_hours.unwrap_or(Hours::ZERO) - self.row_total(&it.id)).max(Hours::ZERO))
            .sum()
    }

    pub fn validate(&self, backlog: &Backlog, graph: &MilestoneGraph) -> Vec<MatrixViolation> {
        let mut out = Vec::new();
        let mut rows: BTreeMap<&ItemId, Hours> = BTreeMap::new();
        let mut reported = BTreeSet::new();
        for ((item, milestone), hours) in &self.cells {
            if !graph.contains(milestone) && reported.insert(milestone.as_str()) {
                out.push(MatrixViolation::UnknownMilestone { milestone: milestone.clone() });
            }
            if !hours.is_positive() {
                out.push(MatrixViolation::NonPositiveHours { item: item.clone(), milestone: milestone.clone() });
            }
            *rows.entry(item).or_insert(Hours::ZERO) += *hours;
        }
        for (&item, &allocated) in &rows {
            match backlog.get(item) {
                None => out.push(MatrixViolation::UnknownItem { item: item.clone() }),
                Some(_) if backlog.has_children(item) => out.push(MatrixViolation::NotALeaf { item: item.clone() }),
                Some(leaf) => {
                    let budget = leaf.effort_hours.unwrap_or(Hours::ZERO);
                    if allocated > budget {
                        out.push(MatrixViolation::OverAllocated { item: item.clone(), excess: allocated - budget });
                    }
                }
            }
        }
        for leaf in backlog.leaves() {
            let budget = leaf.effort_hours.unwrap_or(Hours::ZERO);
            let allocated = rows.get(&leaf.id).copied().unwrap_or(Hours::ZERO);
            if !leaf.crosscutting && allocated < budget {
                out.push(MatrixViolation::UnderAllocated { item: leaf.id.clone(), missing: budget - allocated });
            }
        }
        let backlog_total = backlog.total_effort();
        let columns: Hours = graph.milestones().iter().map(|m| self.column_total(&m.id)).sum();
        let accounted = columns + self.crosscutting_pool(backlog);
        // Only meaningful once every leaf is fully placed somewhere.
        let complete = !out.iter().any(|v| matches!(v, MatrixViolation::UnderAllocated { .. }));
        if complete && accounted != backlog_total {
            out.push(MatrixViolation::ConservationMismatch { backlog_total, accounted });
        }
        out
    }

    pub fn lint(&self, backlog: &Backlog) -> Vec<MatrixLint> {
        let mut per_item: BTreeMap<&ItemId, (usize, Hours)> = BTreeMap::new();
        for ((item, _), h) in &self.cells {
            let e = per_item.entry(item).or_insert((0, Hours::ZERO));
            e.0 += 1;
            e.1 += *h;
        }
        let mut out = Vec::new();
        for (item, (count, hours)) in per_item {
            if count > SPLIT_LINT_THRESHOLD {
                out.push(MatrixLint::ExcessiveSplit { item: item.clone(), milestones: count });
            }
            if backlog.get(item).is_some_and(|it| it.crosscutting) {
                out.push(MatrixLint::MixedCrosscutting { item: item.clone(), allocated: hours });
            }
        }
        out
    }

    /// The matrix laid out for display: leaf rows, milestone columns in
    /// topological order and a closing row of column totals.
    pub fn table(&self, backlog: &Backlog, graph: &MilestoneGraph) -> Result<MatrixTable, GraphError> {
        let order = graph.topological_order()?;
        let columns: Vec<(MilestoneId, String)> = order
            .iter()
            .map(|id| (id.clone(), graph.get(id).map(|m| m.name.clone()).unwrap_or_default()))
            .collect();
        let rows = backlog
            .leaves()
            .into_iter()
            .map(|leaf| MatrixRow {
                item_id: leaf.id.clone(),
                wbs_code: leaf.wbs_code.clone(),
                name: leaf.name.clone(),
                effort: leaf.effort_hours.unwrap_or(Hours::ZERO),
                cells: order.iter().map(|m| self.cells.get(&(leaf.id.clone(), m.clone())).copied()).collect(),
            })
            .collect();
        let column_totals = order.iter().map(|m| self.column_total(m)).collect();
        Ok(MatrixTable {
            columns,
            rows,
            total_effort: backlog.total_effort(),
            column_totals,
            crosscutting_pool: self.crosscutting_pool(backlog),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub item_id: ItemId,
    pub wbs_code: String,
    pub name: String,
    pub effort: Hours,
    pub cells: Vec<Option<Hours>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixTable {
    pub columns: Vec<(MilestoneId, String)>,
    pub rows: Vec<MatrixRow>,
    pub total_effort: Hours,
    pub column_totals: Vec<Hours>,
    pub crosscutting_pool: Hours,
}

impl MatrixTable {
    /// Delimited text: a header line, one line per leaf with empty cells left
    /// blank, and a final `Work Packages` line of totals.
    pub fn to_delimited(&self, sep: char) -> String {
        let clean = |s: &str| s.replace([sep, '\n', '\r'], " ");
        let mut out = String::new();
        let mut header = vec!["WBS Code".to_string(), "Item".to_string(), "Total Effort".to_string()];
        header.extend(self.columns.iter().map(|(_, name)| clean(name)));
        push_line(&mut out, &header, sep);
        for row in &self.rows {
            let mut line = vec![clean(&row.wbs_code), clean(&row.name), row.effort.to_string()];
            line.extend(row.cells.iter().map(|c| c.map(|h| h.to_string()).unwrap_or_default()));
            push_line(&mut out, &line, sep);
        }
        let mut totals = vec![String::new(), "Work Packages".to_string(), self.total_effort.to_string()];
        totals.extend(self.column_totals.iter().map(Hours::to_string));
        push_line(&mut out, &totals, sep);
        out
    }
}

fn push_line(out: &mut String, fields: &[String], sep: char) {
    let mut first = true;
    for f in fields {
        if !first {
            out.push(sep);
        }
        first = false;
        out.push_str(f);
    }
    out.push('\n');
}
