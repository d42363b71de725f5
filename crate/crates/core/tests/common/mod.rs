//! Shared test machinery: a seeded random-model generator and an
//! independent semantic evaluator for selections.
//!
//! The evaluator deliberately does not call into the library's checker —
//! it interprets standard feature-model semantics straight off the tree,
//! so the two can be compared subset by subset.

// Each integration-test binary compiles its own copy; not all of them use
// every helper.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::Rng;

use fleetline::variability::{
    ConstraintKind, CrossTreeConstraint, FeatureModel, FeatureNode, Group, GroupKind,
};

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Flattened view of a model for the semantic evaluator.
pub struct FlatModel {
    pub root: String,
    pub names: Vec<String>,
    parent: BTreeMap<String, String>,
    /// (parent, kind, children) for every group.
    groups: Vec<(String, GroupKind, Vec<String>)>,
    constraints: Vec<(ConstraintKind, String, String)>,
}

pub fn flatten(model: &FeatureModel) -> FlatModel {
    let mut flat = FlatModel {
        root: model.root.name.clone(),
        names: Vec::new(),
        parent: BTreeMap::new(),
        groups: Vec::new(),
        constraints: model
            .constraints
            .iter()
            .map(|c| (c.kind, c.from.clone(), c.to.clone()))
            .collect(),
    };
    fn walk(node: &FeatureNode, flat: &mut FlatModel) {
        flat.names.push(node.name.clone());
        for group in &node.groups {
            let children: Vec<String> = group.children.iter().map(|c| c.name.clone()).collect();
            for child in &group.children {
                flat.parent.insert(child.name.clone(), node.name.clone());
                walk(child, flat);
            }
            flat.groups.push((node.name.clone(), group.kind, children));
        }
    }
    walk(&model.root, &mut flat);
    flat.names.sort();
    flat
}

/// Textbook feature-model semantics, evaluated directly:
/// root in, parents of everything in, group cardinalities per kind when the
/// parent is in, and both cross-tree constraint forms.
pub fn semantically_valid(flat: &FlatModel, selection: &BTreeSet<&str>) -> bool {
    if !selection.contains(flat.root.as_str()) {
        return false;
    }
    for feature in selection {
        if *feature == flat.root {
            continue;
        }
        match flat.parent.get(*feature) {
            Some(parent) if selection.contains(parent.as_str()) => {}
            _ => return false,
        }
    }
    for (parent, kind, children) in &flat.groups {
        if !selection.contains(parent.as_str()) {
            continue;
        }
        let picked = children
            .iter()
            .filter(|c| selection.contains(c.as_str()))
            .count();
        let ok = match kind {
            GroupKind::Mandatory => picked == children.len(),
            GroupKind::Optional => true,
            GroupKind::Alternative => picked == 1,
            GroupKind::Or => picked >= 1,
        };
        if !ok {
            return false;
        }
    }
    for (kind, from, to) in &flat.constraints {
        let has_from = selection.contains(from.as_str());
        let has_to = selection.contains(to.as_str());
        let ok = match kind {
            ConstraintKind::Requires => !has_from || has_to,
            ConstraintKind::Excludes => !(has_from && has_to),
        };
        if !ok {
            return false;
        }
    }
    true
}

/// All semantically valid selections of a model, by brute force over every
/// subset, in the same order the library enumerates (lexicographic over
/// sorted feature lists).
pub fn brute_force_valid(flat: &FlatModel) -> Vec<BTreeSet<&str>> {
    let names: Vec<&str> = flat.names.iter().map(String::as_str).collect();
    let mut valid = Vec::new();
    for mask in 0u32..(1 << names.len()) {
        let subset: BTreeSet<&str> = names
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, n)| *n)
            .collect();
        if semantically_valid(flat, &subset) {
            valid.push(subset);
        }
    }
    valid.sort();
    valid
}

const KINDS: [GroupKind; 4] = [
    GroupKind::Mandatory,
    GroupKind::Optional,
    GroupKind::Alternative,
    GroupKind::Or,
];

/// Generates a random well-formed model: a random tree over `F0..Fn`,
/// random group kinds, and up to `max_constraints` random constraints.
/// Optionally sprinkles capability needs from `cap_pool` over features.
pub fn random_model(
    rng: &mut impl Rng,
    max_features: usize,
    max_constraints: usize,
    cap_pool: &[&str],
) -> FeatureModel {
    let n = rng.gen_range(1..=max_features);
    let mut children_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        children_of[parent].push(i);
    }

    fn build(idx: usize, children_of: &[Vec<usize>], rng: &mut impl Rng) -> FeatureNode {
        let mut node = FeatureNode::leaf(format!("F{idx}"));
        let mut remaining = children_of[idx].as_slice();
        while !remaining.is_empty() {
            let take = rng.gen_range(1..=remaining.len().min(3));
            let (batch, rest) = remaining.split_at(take);
            remaining = rest;
            node.groups.push(Group {
                kind: KINDS[rng.gen_range(0..KINDS.len())],
                children: batch
                    .iter()
                    .map(|&c| build(c, children_of, rng))
                    .collect(),
            });
        }
        node
    }
    let root = build(0, &children_of, rng);

    let mut constraints = Vec::new();
    if n >= 2 {
        for _ in 0..rng.gen_range(0..=max_constraints) {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n);
            while b == a {
                b = rng.gen_range(0..n);
            }
            constraints.push(CrossTreeConstraint {
                kind: if rng.gen_bool(0.5) {
                    ConstraintKind::Requires
                } else {
                    ConstraintKind::Excludes
                },
                from: format!("F{a}"),
                to: format!("F{b}"),
            });
        }
    }

    let mut capabilities = BTreeMap::new();
    for i in 0..n {
        if !cap_pool.is_empty() && rng.gen_bool(0.4) {
            let count = rng.gen_range(1..=cap_pool.len().min(2));
            let mut caps = BTreeSet::new();
            while caps.len() < count {
                caps.insert(cap_pool[rng.gen_range(0..cap_pool.len())].to_string());
            }
            capabilities.insert(format!("F{i}"), caps.into_iter().collect::<Vec<_>>());
        }
    }

    FeatureModel::new("generated", root, constraints, capabilities)
        .expect("generator only builds well-formed models")
}
