//! Feature-model types and the JSON model-file parser.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How a group of child features relates to its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    /// Child selected iff parent selected.
    Mandatory,
    /// Child selectable only if parent selected.
    Optional,
    /// Exactly one child selected when parent selected.
    Alternative,
    /// At least one child selected when parent selected.
    Or,
}

impl GroupKind {
    fn from_str(s: &str) -> Option<Self> {
        match s {
            "mandatory" => Some(Self::Mandatory),
            "optional" => Some(Self::Optional),
            "alternative" => Some(Self::Alternative),
            "or" => Some(Self::Or),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mandatory => "mandatory",
            Self::Optional => "optional",
            Self::Alternative => "alternative",
            Self::Or => "or",
        }
    }
}

/// A group of children under one parent feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub kind: GroupKind,
    pub children: Vec<FeatureNode>,
}

/// One feature in the tree, with its child groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNode {
    pub name: String,
    #[serde(default)]
    pub groups: Vec<Group>,
}

impl FeatureNode {
    pub fn leaf(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            groups: Vec::new(),
        }
    }
}

/// The two cross-tree constraint forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Requires,
    Excludes,
}

/// A cross-tree constraint between two named features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossTreeConstraint {
    pub kind: ConstraintKind,
    pub from: String,
    pub to: String,
}

/// A full variability model: feature tree, cross-tree constraints, and the
/// capability tags each feature needs from a device at derivation time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureModel {
    pub name: String,
    pub root: FeatureNode,
    pub constraints: Vec<CrossTreeConstraint>,
    pub capabilities: BTreeMap<String, Vec<String>>,
}

/// Parse or construction failure for a model file.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("semantic error: duplicate feature `{0}`")]
    DuplicateFeature(String),
    #[error("semantic error: constraint references unknown feature `{0}`")]
    DanglingConstraint(String),
    #[error("semantic error: constraint from `{0}` to itself")]
    SelfConstraint(String),
    #[error("semantic error: capability entry for unknown feature `{0}`")]
    DanglingCapability(String),
    #[error("semantic error: unknown group kind `{0}`")]
    UnknownGroupKind(String),
    #[error("semantic error: unknown constraint kind `{0}`")]
    UnknownConstraintKind(String),
}

impl FeatureModel {
    /// Builds a model and checks every structural invariant: unique feature
    /// names, constraint endpoints and capability keys that exist, no
    /// self-referential constraints.
    pub fn new(
        name: impl Into<String>,
        root: FeatureNode,
        constraints: Vec<CrossTreeConstraint>,
        capabilities: BTreeMap<String, Vec<String>>,
    ) -> Result<Self, ModelError> {
        let model = Self {
            name: name.into(),
            root,
            constraints,
            capabilities,
        };
        let mut seen = BTreeSet::new();
        for node in model.nodes() {
            if !seen.insert(node.name.clone()) {
                return Err(ModelError::DuplicateFeature(node.name.clone()));
            }
        }
        for c in &model.constraints {
            if c.from == c.to {
                return Err(ModelError::SelfConstraint(c.from.clone()));
            }
            for endpoint in [&c.from, &c.to] {
                if !seen.contains(endpoint) {
                    return Err(ModelError::DanglingConstraint(endpoint.clone()));
                }
            }
        }
        for feature in model.capabilities.keys() {
            if !seen.contains(feature) {
                return Err(ModelError::DanglingCapability(feature.clone()));
            }
        }
        Ok(model)
    }

    /// All nodes in depth-first order starting at the root.
    pub fn nodes(&self) -> Vec<&FeatureNode> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            out.push(node);
            for group in &node.groups {
                for child in &group.children {
                    stack.push(child);
                }
            }
        }
        out
    }

    /// Sorted list of every feature name in the model.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.nodes().iter().map(|n| n.name.clone()).collect();
        names.sort();
        names
    }

    pub fn feature_count(&self) -> usize {
        self.nodes().len()
    }

    pub fn contains(&self, feature: &str) -> bool {
        self.nodes().iter().any(|n| n.name == feature)
    }

    /// Capability tags the feature needs from its bound device; empty slice
    /// when the feature is abstract.
    pub fn capability_needs(&self, feature: &str) -> &[String] {
        self.capabilities
            .get(feature)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    root: RawNode,
    #[serde(default)]
    constraints: Vec<RawConstraint>,
    #[serde(default)]
    capabilities: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    name: String,
    #[serde(default)]
    groups: Vec<RawGroup>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    kind: String,
    #[serde(default)]
    children: Vec<RawNode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    kind: String,
    from: String,
    to: String,
}

fn convert_node(raw: RawNode) -> Result<FeatureNode, ModelError> {
    let mut groups = Vec::with_capacity(raw.groups.len());
    for g in raw.groups {
        let kind =
            GroupKind::from_str(&g.kind).ok_or_else(|| ModelError::UnknownGroupKind(g.kind))?;
        let children = g
            .children
            .into_iter()
            .map(convert_node)
            .collect::<Result<Vec<_>, _>>()?;
        groups.push(Group { kind, children });
    }
    Ok(FeatureNode {
        name: raw.name,
        groups,
    })
}

fn convert_constraint(raw: RawConstraint) -> Result<CrossTreeConstraint, ModelError> {
    let kind = match raw.kind.as_str() {
        "requires" => ConstraintKind::Requires,
        "excludes" => ConstraintKind::Excludes,
        other => return Err(ModelError::UnknownConstraintKind(other.to_string())),
    };
    Ok(CrossTreeConstraint {
        kind,
        from: raw.from,
        to: raw.to,
    })
}

/// Parses a UTF-8 JSON model file. Unknown keys are rejected as syntax
/// errors; semantic problems (duplicates, dangling references, unknown
/// group kinds) name the offending element.
pub fn parse_model(text: &str) -> Result<FeatureModel, ModelError> {
    let raw: RawModel = serde_json::from_str(text).map_err(|e| ModelError::Syntax(e.to_string()))?;
    let root = convert_node(raw.root)?;
    let constraints = raw
        .constraints
        .into_iter()
        .map(convert_constraint)
        .collect::<Result<Vec<_>, _>>()?;
    FeatureModel::new(raw.name, root, constraints, raw.capabilities)
}
