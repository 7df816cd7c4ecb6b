//! The hierarchical product backlog.
//!
//! Items form a forest addressed by dotted WBS codes (`1`, `1.c`, `1.c.2.1`).
//! Effort estimates live on leaves only; every internal total is a rollup.
//! The backlog is stored as flat records with a parent pointer, which is also
//! its serialized shape, so that a hand-edited plan file can be loaded and
//! then checked with [`Backlog::validate`] rather than refused outright.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hours::Hours;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub String);

impl ItemId {
    pub fn new(id: impl Into<String>) -> Self {
        ItemId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        ItemId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Deliverable,
    Epic,
    Feature,
    Story,
    TechnicalStory,
    /// A budget reserve with a purpose but no decided content yet.
    PlanningPackage,
}

/// One backlog record. `effort_hours` is set on leaves only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacklogItem {
    pub id: ItemId,
    pub wbs_code: String,
    pub name: String,
    pub kind: ItemKind,
    pub effort_hours: Option<Hours>,
    #[serde(default)]
    pub parent: Option<ItemId>,
    /// Spread over the project span instead of being allocated to milestones.
    #[serde(default)]
    pub crosscutting: bool,
}

impl BacklogItem {
    pub fn new(id: impl Into<String>, wbs_code: impl Into<String>, name: impl Into<String>) -> Self {
        BacklogItem {
            id: ItemId::new(id),
            wbs_code: wbs_code.into(),
            name: name.into(),
            kind: ItemKind::Story,
            effort_hours: None,
            parent: None,
            crosscutting: false,
        }
    }

    pub fn kind(mut self, kind: ItemKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn effort(mut self, hours: impl Into<Hours>) -> Self {
        self.effort_hours = Some(hours.into());
        self
    }

    pub fn crosscutting(mut self) -> Self {
        self.crosscutting = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum BacklogError {
    #[error("item {0} already exists")]
    DuplicateId(ItemId),
    #[error("parent item {0} not found")]
    ParentNotFound(ItemId),
    #[error("item {0} not found")]
    ItemNotFound(ItemId),
    #[error("wbs code {code:?} must extend {parent_code:?} by one segment")]
    BadWbsCode { code: String, parent_code: Option<String> },
    #[error("parent {0} carries leaf effort; remove it before adding children")]
    ParentHasLeafEffort(ItemId),
    #[error("item {0} has children and cannot carry effort or be removed")]
    HasChildren(ItemId),
    #[error("effort of item {0} must be non-negative (positive for planning packages)")]
    InvalidEffort(ItemId),
    #[error("item {0} is part of a parent cycle")]
    CycleDetected(ItemId),
}

/// Which backlog invariant an item breaks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BacklogRule {
    DuplicateId,
    DanglingParent { parent: ItemId },
    CycleDetected,
    LeafEffortOnInternal,
    MissingLeafEffort,
    NegativeEffort,
    EmptyPlanningPackage,
    BadWbsCode { parent_code: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BacklogViolation {
    pub item: ItemId,
    #[serde(flatten)]
    pub rule: BacklogRule,
}

impl fmt::Display for BacklogViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}", self.item, self.rule)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<BacklogItem>", into = "Vec<BacklogItem>")]
pub struct Backlog {
    items: Vec<BacklogItem>,
    index: HashMap<ItemId, usize>,
}

impl From<Vec<BacklogItem>> for Backlog {
    fn from(items: Vec<BacklogItem>) -> Self {
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            index.entry(item.id.clone()).or_insert(i);
        }
        Backlog { items, index }
    }
}

impl From<Backlog> for Vec<BacklogItem> {
    fn from(b: Backlog) -> Self {
        b.items
    }
}

fn wbs_extends(parent: &str, child: &str) -> bool {
    match child.strip_prefix(parent).and_then(|rest| rest.strip_prefix('.')) {
        Some(seg) => !seg.is_empty() && !seg.contains('.'),
        None => false,
    }
}

fn wbs_well_formed(code: &str) -> bool {
    !code.is_empty() && code.split('.').all(|seg| !seg.is_empty())
}

impl Backlog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[BacklogItem] {
        &self.items
    }

    pub fn get(&self, id: &ItemId) -> Option<&BacklogItem> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    pub fn contains(&self, id: &ItemId) -> bool {
        self.index.contains_key(id)
    }

    pub fn children(&self, id: &ItemId) -> impl Iterator<Item = &BacklogItem> + '_ {
        let id = id.clone();
        self.items.iter().filter(move |it| it.parent.as_ref() == Some(&id))
    }

    pub fn has_children(&self, id: &ItemId) -> bool {
        self.items.iter().any(|it| it.parent.as_ref() == Some(id))
    }

    pub fn is_leaf(&self, id: &ItemId) -> bool {
        self.contains(id) && !self.has_children(id)
    }

    pub fn roots(&self) -> impl Iterator<Item = &BacklogItem> + '_ {
        self.items.iter().filter(|it| it.parent.is_none())
    }

    /// Inserts `item` under `parent` (or as a new root) and returns its id.
    pub fn add_item(&mut self, parent: Option<&ItemId>, mut item: BacklogItem) -> Result<ItemId, BacklogError> {
        if self.contains(&item.id) {
            return Err(BacklogError::DuplicateId(item.id));
        }
        let parent_code = match parent {
            Some(pid) => {
                let p = self.get(pid).ok_or_else(|| BacklogError::ParentNotFound(pid.clone()))?;
                if p.effort_hours.is_some() {
                    return Err(BacklogError::ParentHasLeafEffort(pid.clone()));
                }
                Some(p.wbs_code.clone())
            }
            None => None,
        };
        let code_ok = match &parent_code {
            Some(pc) => wbs_extends(pc, &item.wbs_code),
            None => wbs_well_formed(&item.wbs_code),
        };
        if !code_ok {
            return Err(BacklogError::BadWbsCode { code: item.wbs_code, parent_code });
        }
        if let Some(h) = item.effort_hours {
            let bad = h.is_negative() || (item.kind == ItemKind::PlanningPackage && !h.is_positive());
            if bad {
                return Err(BacklogError::InvalidEffort(item.id));
            }
        }
        item.parent = parent.cloned();
        let id = item.id.clone();
        self.index.insert(id.clone(), self.items.len());
        self.items.push(item);
        Ok(id)
    }

    /// Sets or clears the effort of a leaf.
    pub fn set_effort(&mut self, id: &ItemId, effort: Option<Hours>) -> Result<(), BacklogError> {
        let &i = self.index.get(id).ok_or_else(|| BacklogError::ItemNotFound(id.clone()))?;
        if effort.is_some() && self.has_children(id) {
            return Err(BacklogError::HasChildren(id.clone()));
        }
        if let Some(h) = effort {
            let item = &self.items[i];
            if h.is_negative() || (item.kind == ItemKind::PlanningPackage && !h.is_positive()) {
                return Err(BacklogError::InvalidEffort(id.clone()));
            }
        }
        self.items[i].effort_hours = effort;
        Ok(())
    }

    pub fn set_crosscutting(&mut self, id: &ItemId, crosscutting: bool) -> Result<(), BacklogError> {
        let &i = self.index.get(id).ok_or_else(|| BacklogError::ItemNotFound(id.clone()))?;
        self.items[i].crosscutting = crosscutting;
        Ok(())
    }

    /// Removes a leaf item.
    pub fn remove_item(&mut self, id: &ItemId) -> Result<BacklogItem, BacklogError> {
        let &i = self.index.get(id).ok_or_else(|| BacklogError::ItemNotFound(id.clone()))?;
        if self.has_children(id) {
            return Err(BacklogError::HasChildren(id.clone()));
        }
        let removed = self.items.remove(i);
        *self = Backlog::from(std::mem::take(&mut self.items));
        Ok(removed)
    }

    /// Leaf effort for leaves, the sum over children otherwise.
    pub fn rollup_effort(&self, id: &ItemId) -> Result<Hours, BacklogError> {
        if !self.contains(id) {
            return Err(BacklogError::ItemNotFound(id.clone()));
        }
        let children = self.children_map();
        let mut total = Hours::ZERO;
        let mut stack = vec![id];
        let mut seen = HashSet::new();
        while let Some(cur) = stack.pop() {
            if !seen.insert(cur) {
                return Err(BacklogError::CycleDetected(cur.clone()));
            }
            match children.get(cur) {
                Some(kids) => stack.extend(kids.iter().map(|&k| &self.items[k].id)),
                None => total += self.get(cur).and_then(|it| it.effort_hours).unwrap_or(Hours::ZERO),
            }
        }
        Ok(total)
    }

    /// Sum of all root rollups.
    pub fn total_effort(&self) -> Hours {
        self.roots()
            .map(|r| self.rollup_effort(&r.id).unwrap_or(Hours::ZERO))
            .sum()
    }

    /// Depth-first pre-order over the forest, children in record order.
    pub fn preorder(&self) -> Vec<&BacklogItem> {
        let children = self.children_map();
        let mut out = Vec::with_capacity(self.items.len());
        let mut seen = HashSet::new();
        let mut stack: Vec<usize> = self
            .items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.parent.is_none())
            .map(|(i, _)| i)
            .rev()
            .collect();
        while let Some(i) = stack.pop() {
            if !seen.insert(i) {
                continue;
            }
            out.push(&self.items[i]);
            if let Some(kids) = children.get(&self.items[i].id) {
                stack.extend(kids.iter().rev());
            }
        }
        out
    }

    /// Leaves in pre-order; this is the row order of the planning matrix.
    pub fn leaves(&self) -> Vec<&BacklogItem> {
        let children = self.children_map();
        self.preorder()
            .into_iter()
            .filter(|it| !children.contains_key(&it.id))
            .collect()
    }

    fn children_map(&self) -> HashMap<&ItemId, Vec<usize>> {
        let mut map: HashMap<&ItemId, Vec<usize>> = HashMap::new();
        for (i, it) in self.items.iter().enumerate() {
            if let Some(p) = &it.parent {
                map.entry(p).or_default().push(i);
            }
        }
        map
    }

    /// Every invariant violation, in record order. Empty means valid.
    pub fn validate(&self) -> Vec<BacklogViolation> {
        let mut out = Vec::new();
        let children = self.children_map();
        let mut seen_ids = HashSet::new();
        let n = self.items.len();

        for item in &self.items {
            let violation = |rule| BacklogViolation { item: item.id.clone(), rule };
            if !seen_ids.insert(&item.id) {
                out.push(violation(BacklogRule::DuplicateId));
                continue;
            }

            if let Some(p) = &item.parent {
                if !self.contains(p) {
                    out.push(violation(BacklogRule::DanglingParent { parent: p.clone() }));
                }
            }

            // Walk the parent chain; more than n steps means a loop.
            let mut cur = item.parent.as_ref();
            let mut steps = 0;
            while let Some(p) = cur {
                if p == &item.id {
                    out.push(violation(BacklogRule::CycleDetected));
                    break;
                }
                steps += 1;
                if steps > n {
                    break;
                }
                cur = self.get(p).and_then(|pi| pi.parent.as_ref());
            }

            let is_internal = children.contains_key(&item.id);
            match (is_internal, item.effort_hours) {
                (true, Some(_)) => out.push(violation(BacklogRule::LeafEffortOnInternal)),
                (false, None) => out.push(violation(BacklogRule::MissingLeafEffort)),
                (false, Some(h)) if h.is_negative() => out.push(violation(BacklogRule::NegativeEffort)),
                (false, Some(h)) if item.kind == ItemKind::PlanningPackage && !h.is_positive() => {
                    out.push(violation(BacklogRule::EmptyPlanningPackage))
                }
                _ => {}
            }

            let parent_code = item.parent.as_ref().and_then(|p| self.get(p)).map(|p| p.wbs_code.clone());
            let code_ok = match &parent_code {
                Some(pc) => wbs_extends(pc, &item.wbs_code),
                None => wbs_well_formed(&item.wbs_code),
            };
            if !code_ok {
                out.push(violation(BacklogRule::BadWbsCode { parent_code }));
            }
        }
        out
    }
}
