//! Milestone catalog and the finish-to-finish dependency diagram.
//!
//! An edge `a -> b` means `b` cannot complete until `a` has completed. It says
//! nothing about when work towards `b` may start. The graph is kept acyclic on
//! every mutation; loading a file can still produce a cycle, which
//! [`MilestoneGraph::topological_order`] and [`MilestoneGraph::find_cycle`]
//! report.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MilestoneId(pub String);

impl MilestoneId {
    pub fn new(id: impl Into<String>) -> Self {
        MilestoneId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MilestoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MilestoneId {
    fn from(s: &str) -> Self {
        MilestoneId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilestoneKind {
    /// Externally dated; loses its value if missed.
    Hard,
    /// Dated by planning.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Responsible {
    Team,
    Client,
    Joint,
}

/// A state the project should reach, not an activity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub id: MilestoneId,
    pub name: String,
    pub kind: MilestoneKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_date: Option<NaiveDate>,
    #[serde(default)]
    pub completion_criteria: String,
    #[serde(default)]
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responsible: Option<Responsible>,
    /// Date promised by someone outside the team, for milestones that carry
    /// no work package of their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commitment_date: Option<NaiveDate>,
}

impl Milestone {
    pub fn soft(id: impl Into<String>, name: impl Into<String>) -> Self {
        Milestone {
            id: MilestoneId::new(id),
            name: name.into(),
            kind: MilestoneKind::Soft,
            hard_date: None,
            completion_criteria: String::new(),
            rationale: String::new(),
            responsible: None,
            commitment_date: None,
        }
    }

    pub fn hard(id: impl Into<String>, name: impl Into<String>, date: NaiveDate) -> Self {
        Milestone { kind: MilestoneKind::Hard, hard_date: Some(date), ..Milestone::soft(id, name) }
    }

    pub fn criteria(mut self, text: impl Into<String>) -> Self {
        self.completion_criteria = text.into();
        self
    }

    pub fn rationale(mut self, text: impl Into<String>) -> Self {
        self.rationale = text.into();
        self
    }

    pub fn responsible(mut self, r: Responsible) -> Self {
        self.responsible = Some(r);
        self
    }

    pub fn committed_on(mut self, date: NaiveDate) -> Self {
        self.commitment_date = Some(date);
        self
    }

    pub fn is_hard(&self) -> bool {
        self.kind == MilestoneKind::Hard
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dependency {
    pub predecessor: MilestoneId,
    pub successor: MilestoneId,
}

impl Dependency {
    pub fn new(predecessor: impl Into<MilestoneId>, successor: impl Into<MilestoneId>) -> Self {
        Dependency { predecessor: predecessor.into(), successor: successor.into() }
    }
}

impl From<String> for MilestoneId {
    fn from(s: String) -> Self {
        MilestoneId(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum GraphError {
    #[error("unknown milestone {0}")]
    UnknownMilestone(MilestoneId),
    #[error("milestone {0} already exists")]
    DuplicateMilestone(MilestoneId),
    #[error("milestone name {0:?} is empty or already used")]
    BadName(String),
    #[error("hard milestones need a hard date and soft ones must not have one ({0})")]
    HardDateMismatch(MilestoneId),
    #[error("dependency would create the cycle {}", fmt_path(.path))]
    WouldCreateCycle { path: Vec<MilestoneId> },
    #[error("dependency graph contains the cycle {}", fmt_path(.path))]
    CyclicGraph { path: Vec<MilestoneId> },
    #[error("milestone {0} still has dependencies")]
    StillReferenced(MilestoneId),
}

fn fmt_path(path: &[MilestoneId]) -> String {
    path.iter().map(|m| m.0.as_str()).collect::<Vec<_>>().join(" -> ")
}

/// Milestones in insertion order plus finish-to-finish edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilestoneGraph {
    milestones: Vec<Milestone>,
    dependencies: Vec<Dependency>,
}

impl MilestoneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from loaded records without checking anything.
    pub fn from_parts(milestones: Vec<Milestone>, dependencies: Vec<Dependency>) -> Self {
        MilestoneGraph { milestones, dependencies }
    }

    pub fn milestones(&self) -> &[Milestone] {
        &self.milestones
    }

    pub fn dependencies(&self) -> &[Dependency] {
        &self.dependencies
    }

    pub fn len(&self) -> usize {
        self.milestones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.milestones.is_empty()
    }

    pub fn get(&self, id: &MilestoneId) -> Option<&Milestone> {
        self.milestones.iter().find(|m| &m.id == id)
    }

    pub fn get_mut(&mut self, id: &MilestoneId) -> Option<&mut Milestone> {
        self.milestones.iter_mut().find(|m| &m.id == id)
    }

    pub fn contains(&self, id: &MilestoneId) -> bool {
        self.get(id).is_some()
    }

    fn position(&self, id: &MilestoneId) -> Option<usize> {
        self.milestones.iter().position(|m| &m.id == id)
    }

    fn require(&self, id: &MilestoneId) -> Result<usize, GraphError> {
        self.position(id).ok_or_else(|| GraphError::UnknownMilestone(id.clone()))
    }

    pub fn add_milestone(&mut self, m: Milestone) -> Result<MilestoneId, GraphError> {
        if self.contains(&m.id) {
            return Err(GraphError::DuplicateMilestone(m.id));
        }
        if m.name.trim().is_empty() || self.milestones.iter().any(|o| o.name == m.name) {
            return Err(GraphError::BadName(m.name));
        }
        if m.is_hard() != m.hard_date.is_some() {
            return Err(GraphError::HardDateMismatch(m.id));
        }
        let id = m.id.clone();
        self.milestones.push(m);
        Ok(id)
    }

    /// Replaces a milestone's attributes, keeping its id and edges.
    pub fn update_milestone(&mut self, m: Milestone) -> Result<(), GraphError> {
        let pos = self.require(&m.id)?;
        if m.name.trim().is_empty() || self.milestones.iter().any(|o| o.id != m.id && o.name == m.name) {
            return Err(GraphError::BadName(m.name));
        }
        if m.is_hard() != m.hard_date.is_some() {
            return Err(GraphError::HardDateMismatch(m.id));
        }
        self.milestones[pos] = m;
        Ok(())
    }

    /// Removes a milestone that no edge refers to.
    pub fn remove_milestone(&mut self, id: &MilestoneId) -> Result<Milestone, GraphError> {
        let pos = self.require(id)?;
        if self.dependencies.iter().any(|d| &d.predecessor == id || &d.successor == id) {
            return Err(GraphError::StillReferenced(id.clone()));
        }
        Ok(self.milestones.remove(pos))
    }

    /// Adds a finish-to-finish edge, refusing any edge that would close a cycle.
    /// Re-adding an existing edge is a no-op.
    pub fn add_dependency(&mut self, dep: Dependency) -> Result<(), GraphError> {
        self.require(&dep.predecessor)?;
        self.require(&dep.successor)?;
        if self.dependencies.contains(&dep) {
            return Ok(());
        }
        if dep.predecessor == dep.successor {
            return Err(GraphError::WouldCreateCycle {
                path: vec![dep.predecessor.clone(), dep.successor.clone()],
            });
        }
        // The new edge closes a cycle iff the predecessor is reachable from the successor.
        if let Some(mut path) = self.path(&dep.successor, &dep.predecessor) {
            path.push(dep.successor.clone());
            return Err(GraphError::WouldCreateCycle { path });
        }
        self.dependencies.push(dep);
        Ok(())
    }

    pub fn remove_dependency(&mut self, dep: &Dependency) -> bool {
        let before = self.dependencies.len();
        self.dependencies.retain(|d| d != dep);
        before != self.dependencies.len()
    }

    pub fn predecessors<'a>(&'a self, id: &'a MilestoneId) -> impl Iterator<Item = &'a MilestoneId> + 'a {
        self.dependencies.iter().filter(move |d| &d.successor == id).map(|d| &d.predecessor)
    }

    pub fn successors<'a>(&'a self, id: &'a MilestoneId) -> impl Iterator<Item = &'a MilestoneId> + 'a {
        self.dependencies.iter().filter(move |d| &d.predecessor == id).map(|d| &d.successor)
    }

    /// A path of successor edges from `from` to `to`, both included.
    fn path(&self, from: &MilestoneId, to: &MilestoneId) -> Option<Vec<MilestoneId>> {
        let mut came_from: HashMap<&MilestoneId, &MilestoneId> = HashMap::new();
        let mut stack = vec![from];
        let mut visited = BTreeSet::new();
        visited.insert(from);
        while let Some(cur) = stack.pop() {
            if cur == to {
                let mut path = vec![cur.clone()];
                let mut at = cur;
                while let Some(prev) = came_from.get(at) {
                    path.push((*prev).clone());
                    at = prev;
                }
                path.reverse();
                return Some(path);
            }
            for next in self.successors(cur) {
                if visited.insert(next) {
                    came_from.insert(next, cur);
                    stack.push(next);
                }
            }
        }
        None
    }

    /// Kahn's algorithm, always releasing the earliest-inserted ready milestone.
    pub fn topological_order(&self) -> Result<Vec<MilestoneId>, GraphError> {
        self.topological_order_by(|i, _| i)
    }

    /// Topological order with ties among ready milestones broken by the
    /// smallest `key(insertion_index, milestone)`.
    pub fn topological_order_by<K: Ord>(
        &self,
        mut key: impl FnMut(usize, &Milestone) -> K,
    ) -> Result<Vec<MilestoneId>, GraphError> {
        let n = self.milestones.len();
        let pos: HashMap<&MilestoneId, usize> = self.milestones.iter().enumerate().map(|(i, m)| (&m.id, i)).collect();
        let mut indegree = vec![0usize; n];
        let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
        for d in &self.dependencies {
            let (Some(&p), Some(&s)) = (pos.get(&d.predecessor), pos.get(&d.successor)) else {
                let missing = if pos.contains_key(&d.predecessor) { &d.successor } else { &d.predecessor };
                return Err(GraphError::UnknownMilestone(missing.clone()));
            };
            indegree[s] += 1;
            out_edges[p].push(s);
        }
        let keys: Vec<K> = self.milestones.iter().enumerate().map(|(i, m)| key(i, m)).collect();
        let mut ready: BinaryHeap<Reverse<(&K, usize)>> =
            (0..n).filter(|&i| indegree[i] == 0).map(|i| Reverse((&keys[i], i))).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((_, i))) = ready.pop() {
            order.push(self.milestones[i].id.clone());
            for &s in &out_edges[i] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push(Reverse((&keys[s], s)));
                }
            }
        }
        if order.len() < n {
            let path = self.find_cycle().unwrap_or_default();
            return Err(GraphError::CyclicGraph { path });
        }
        Ok(order)
    }

    /// Some cycle in the graph as a closed path, if one exists.
    pub fn find_cycle(&self) -> Option<Vec<MilestoneId>> {
        for d in &self.dependencies {
            if let Some(mut path) = self.path(&d.successor, &d.predecessor) {
                path.push(d.successor.clone());
                return Some(path);
            }
        }
        None
    }

    /// Every milestone that must complete before `id` can.
    pub fn transitive_predecessors(&self, id: &MilestoneId) -> Result<BTreeSet<MilestoneId>, GraphError> {
        self.require(id)?;
        let mut out = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            for p in self.predecessors(cur) {
                if out.insert(p.clone()) {
                    stack.push(p);
                }
            }
        }
        out.remove(id);
        Ok(out)
    }

    pub fn transitive_successors(&self, id: &MilestoneId) -> Result<BTreeSet<MilestoneId>, GraphError> {
        self.require(id)?;
        let mut out = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            for s in self.successors(cur) {
                if out.insert(s.clone()) {
                    stack.push(s);
                }
            }
        }
        out.remove(id);
        Ok(out)
    }

    /// Name and hard-date consistency problems plus any cycle.
    pub fn validate(&self) -> Vec<GraphError> {
        let mut out = Vec::new();
        let mut ids = BTreeSet::new();
        let mut names = BTreeSet::new();
        for m in &self.milestones {
            if !ids.insert(&m.id) {
                out.push(GraphError::DuplicateMilestone(m.id.clone()));
            }
            if m.name.trim().is_empty() || !names.insert(&m.name) {
                out.push(GraphError::BadName(m.name.clone()));
            }
            if m.is_hard() != m.hard_date.is_some() {
                out.push(GraphError::HardDateMismatch(m.id.clone()));
            }
        }
        for d in &self.dependencies {
            for end in [&d.predecessor, &d.successor] {
                if !self.contains(end) {
                    out.push(GraphError::UnknownMilestone(end.clone()));
                }
            }
        }
        if let Some(path) = self.find_cycle() {
            out.push(GraphError::CyclicGraph { path });
        }
        out
    }
}
