//! Selections over a feature model: validation, exhaustive enumeration,
//! and set-difference between two selections.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{ConstraintKind, FeatureModel, FeatureNode, GroupKind};

/// A set of selected feature names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Selection {
    selected: BTreeSet<String>,
}

impl Selection {
    pub fn new<I, S>(features: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            selected: features.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, feature: &str) -> bool {
        self.selected.contains(feature)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.selected.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn insert(&mut self, feature: impl Into<String>) {
        self.selected.insert(feature.into());
    }

    pub fn remove(&mut self, feature: &str) {
        self.selected.remove(feature);
    }

    /// Feature names in sorted order.
    pub fn sorted(&self) -> Vec<String> {
        self.selected.iter().cloned().collect()
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for name in &self.selected {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{name}")?;
            first = false;
        }
        Ok(())
    }
}

/// One broken rule, naming the rule and the features involved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RuleViolation {
    /// The root feature is not selected.
    RootMissing { root: String },
    /// A selected child whose parent is not selected.
    Orphan { parent: String, child: String },
    /// A mandatory child missing while its parent is selected.
    Mandatory { parent: String, child: String },
    /// An alternative group with not exactly one selected child.
    Alternative {
        parent: String,
        selected: Vec<String>,
    },
    /// An or group with no selected child.
    Or { parent: String },
    /// `from` selected without `to`.
    Requires { from: String, to: String },
    /// Both endpoints of an excludes constraint selected.
    Excludes { from: String, to: String },
}

impl fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RootMissing { root } => write!(f, "root `{root}` not selected"),
            Self::Orphan { parent, child } => {
                write!(f, "`{child}` selected without its parent `{parent}`")
            }
            Self::Mandatory { parent, child } => {
                write!(f, "mandatory `{child}` missing under `{parent}`")
            }
            Self::Alternative { parent, selected } => write!(
                f,
                "alternative group under `{parent}` needs exactly one child, got [{}]",
                selected.join(",")
            ),
            Self::Or { parent } => write!(f, "or group under `{parent}` has no selected child"),
            Self::Requires { from, to } => write!(f, "`{from}` requires `{to}`"),
            Self::Excludes { from, to } => write!(f, "`{from}` excludes `{to}`"),
        }
    }
}

/// Outcome of validating a selection against a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid { violations: Vec<RuleViolation> },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    pub fn violations(&self) -> &[RuleViolation] {
        match self {
            Verdict::Valid => &[],
            Verdict::Invalid { violations } => violations,
        }
    }
}

/// Errors from selection-level operations.
#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("model has {count} features; enumeration is capped at {max}")]
    ModelTooLarge { count: usize, max: usize },
}

/// Most features a model may have before `enumerate_configurations` refuses.
pub const ENUMERATION_MAX_FEATURES: usize = 20;

fn check_node(node: &FeatureNode, sel: &Selection, out: &mut Vec<RuleViolation>) {
    let parent_selected = sel.contains(&node.name);
    for group in &node.groups {
        let selected_children: Vec<&FeatureNode> = group
            .children
            .iter()
            .filter(|c| sel.contains(&c.name))
            .collect();
        if !parent_selected {
            for child in &selected_children {
                out.push(RuleViolation::Orphan {
                    parent: node.name.clone(),
                    child: child.name.clone(),
                });
            }
        } else {
            match group.kind {
                GroupKind::Mandatory => {
                    for child in &group.children {
                        if !sel.contains(&child.name) {
                            out.push(RuleViolation::Mandatory {
                                parent: node.name.clone(),
                                child: child.name.clone(),
                            });
                        }
                    }
                }
                GroupKind::Optional => {}
                GroupKind::Alternative => {
                    if selected_children.len() != 1 {
                        out.push(RuleViolation::Alternative {
                            parent: node.name.clone(),
                            selected: selected_children
                                .iter()
                                .map(|c| c.name.clone())
                                .collect(),
                        });
                    }
                }
                GroupKind::Or => {
                    if selected_children.is_empty() {
                        out.push(RuleViolation::Or {
                            parent: node.name.clone(),
                        });
                    }
                }
            }
        }
        for child in &group.children {
            check_node(child, sel, out);
        }
    }
}

/// Validates a selection against the model's tree rules and cross-tree
/// constraints. Fails with `UnknownFeature` if the selection names a
/// feature the model does not have; otherwise returns a verdict listing
/// every violated rule.
pub fn check_selection(model: &FeatureModel, sel: &Selection) -> Result<Verdict, SelectionError> {
    for feature in sel.iter() {
        if !model.contains(feature) {
            return Err(SelectionError::UnknownFeature(feature.to_string()));
        }
    }
    let mut violations = Vec::new();
    if !sel.contains(&model.root.name) {
        violations.push(RuleViolation::RootMissing {
            root: model.root.name.clone(),
        });
    }
    check_node(&model.root, sel, &mut violations);
    for c in &model.constraints {
        match c.kind {
            ConstraintKind::Requires => {
                if sel.contains(&c.from) && !sel.contains(&c.to) {
                    violations.push(RuleViolation::Requires {
                        from: c.from.clone(),
                        to: c.to.clone(),
                    });
                }
            }
            ConstraintKind::Excludes => {
                if sel.contains(&c.from) && sel.contains(&c.to) {
                    violations.push(RuleViolation::Excludes {
                        from: c.from.clone(),
                        to: c.to.clone(),
                    });
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(Verdict::Valid)
    } else {
        Ok(Verdict::Invalid { violations })
    }
}

/// The result of enumerating all valid selections.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// Valid selections in lexicographic order of their sorted feature
    /// lists, truncated to the requested limit.
    pub selections: Vec<Selection>,
    /// Count of all valid selections, ignoring the limit.
    pub total: usize,
    /// Whether `selections` was cut short by the limit.
    pub truncated: bool,
}

/// Exhaustively enumerates every valid selection of the model. Refuses
/// models with more than [`ENUMERATION_MAX_FEATURES`] features.
pub fn enumerate_configurations(
    model: &FeatureModel,
    limit: usize,
) -> Result<Enumeration, SelectionError> {
    let names = model.feature_names();
    let n = names.len();
    if n > ENUMERATION_MAX_FEATURES {
        return Err(SelectionError::ModelTooLarge {
            count: n,
            max: ENUMERATION_MAX_FEATURES,
        });
    }
    let root_bit = names
        .iter()
        .position(|name| *name == model.root.name)
        .expect("root is always among the feature names");
    let mut valid: Vec<Selection> = Vec::new();
    for mask in 0u32..(1u32 << n) {
        // Every valid selection contains the root; skip the other half.
        if mask & (1 << root_bit) == 0 {
            continue;
        }
        let sel = Selection::new(
            names
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, name)| name.clone()),
        );
        let verdict = check_selection(model, &sel).expect("enumerated features all exist");
        if verdict.is_valid() {
            valid.push(sel);
        }
    }
    // Selections sort by their sorted feature lists, which is exactly the
    // BTreeSet ordering Selection derives.
    valid.sort();
    let total = valid.len();
    let truncated = total > limit;
    valid.truncate(limit);
    Ok(Enumeration {
        selections: valid,
        total,
        truncated,
    })
}

/// Features to add and remove to turn one selection into another.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SelectionDiff {
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
}

impl SelectionDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }

    pub fn change_count(&self) -> usize {
        self.added.len() + self.removed.len()
    }

    /// Applies this diff to a base selection.
    pub fn apply(&self, base: &Selection) -> Selection {
        let mut out = base.clone();
        for f in &self.removed {
            out.remove(f);
        }
        for f in &self.added {
            out.insert(f.clone());
        }
        out
    }
}

/// Set difference between two selections: what `to` adds over `from` and
/// what it drops.
pub fn diff_selections(from: &Selection, to: &Selection) -> SelectionDiff {
    SelectionDiff {
        added: to
            .iter()
            .filter(|f| !from.contains(f))
            .map(str::to_string)
            .collect(),
        removed: from
            .iter()
            .filter(|f| !to.contains(f))
            .map(str::to_string)
            .collect(),
    }
}
