//! Variability modeling: feature models, selection validation and
//! enumeration, and derivation of deployable configurations.
//!
//! A [`FeatureModel`] is a tree of named features connected by mandatory,
//! optional, alternative, and or groups, plus requires/excludes cross-tree
//! constraints. A [`Selection`] picks a feature subset;
//! [`check_selection`] judges it, [`enumerate_configurations`] lists every
//! valid one, and [`derive_fconfig`] binds capability-bearing features to
//! concrete devices to produce an [`FConfig`].

mod derive;
mod model;
mod selection;

pub use derive::{derive_fconfig, DConfig, DeriveError, FConfig, ParamValue};
pub use model::{
    parse_model, ConstraintKind, CrossTreeConstraint, FeatureModel, FeatureNode, Group, GroupKind,
    ModelError,
};
pub use selection::{
    check_selection, diff_selections, enumerate_configurations, Enumeration, RuleViolation,
    Selection, SelectionDiff, SelectionError, Verdict, ENUMERATION_MAX_FEATURES,
};
