//! Property tests: structural invariants that must hold for arbitrary
//! inputs, complementing the example-based unit tests.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use fleetline::knowledge::{
    DeviceDescriptor, Dimension, DimensionMap, Fact, KnowledgeBase, Reading, BASE_MODE,
};
use fleetline::trace::{read_trace, write_trace, TraceEvent, TraceKind};
use fleetline::variability::{
    check_selection, derive_fconfig, diff_selections, enumerate_configurations, DConfig,
    FeatureModel, Selection,
};

fn model_from_seed(seed: u64, cap_pool: &[&str]) -> FeatureModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_model(&mut rng, 9, 3, cap_pool)
}

fn subset_from_mask(names: &[String], mask: u32) -> BTreeSet<&str> {
    names
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1u32 << (i % 32)) != 0)
        .map(|(_, n)| n.as_str())
        .collect()
}

proptest! {
    /// check_selection is total over known features and its verdict agrees
    /// with the independent semantics; Valid means exactly "no violations".
    #[test]
    fn check_selection_total_and_consistent(seed in any::<u64>(), mask in any::<u32>()) {
        let model = model_from_seed(seed, &[]);
        let flat = common::flatten(&model);
        let subset = subset_from_mask(&flat.names, mask);
        let selection = Selection::new(subset.iter().copied());

        let verdict = check_selection(&model, &selection).expect("known features");
        prop_assert_eq!(verdict.is_valid(), verdict.violations().is_empty());
        prop_assert_eq!(verdict.is_valid(), common::semantically_valid(&flat, &subset));
    }

    /// Unknown feature names are rejected as errors, not verdicts.
    #[test]
    fn check_selection_rejects_unknown_features(seed in any::<u64>()) {
        let model = model_from_seed(seed, &[]);
        let selection = Selection::new([model.root.name.as_str(), "no-such-feature"]);
        prop_assert!(check_selection(&model, &selection).is_err());
    }

    /// Every enumerated selection re-validates; the list is sorted and
    /// duplicate-free; a limit is a strict prefix with the same total.
    #[test]
    fn enumeration_sound_and_prefix_stable(seed in any::<u64>(), limit in 0usize..40) {
        let model = model_from_seed(seed, &[]);
        let full = enumerate_configurations(&model, usize::MAX).expect("small model");
        prop_assert_eq!(full.total, full.selections.len());
        prop_assert!(!full.truncated);
        for sel in &full.selections {
            prop_assert!(check_selection(&model, sel).expect("known features").is_valid());
        }
        prop_assert!(full.selections.windows(2).all(|w| w[0] < w[1]));

        let limited = enumerate_configurations(&model, limit).expect("small model");
        prop_assert_eq!(limited.total, full.total);
        prop_assert_eq!(limited.truncated, full.total > limit);
        let take = limit.min(full.selections.len());
        prop_assert_eq!(&limited.selections[..], &full.selections[..take]);
    }

    /// diff(a, b) applied to a reconstructs b exactly, and a self-diff is
    /// empty.
    #[test]
    fn diff_apply_roundtrip(seed in any::<u64>(), mask_a in any::<u32>(), mask_b in any::<u32>()) {
        let model = model_from_seed(seed, &[]);
        let flat = common::flatten(&model);
        let a = Selection::new(subset_from_mask(&flat.names, mask_a).into_iter());
        let b = Selection::new(subset_from_mask(&flat.names, mask_b).into_iter());

        let diff = diff_selections(&a, &b);
        prop_assert_eq!(diff.apply(&a), b.clone());
        prop_assert_eq!(diff.change_count(), diff.added.len() + diff.removed.len());

        let self_diff = diff_selections(&b, &b);
        prop_assert_eq!(self_diff.change_count(), 0);
        prop_assert_eq!(self_diff.apply(&b), b);
    }

    /// Derivation binds exactly the capability-needing features, always to
    /// the least-id reachable device whose capability set covers the need.
    #[test]
    fn derive_binds_min_feasible_device(
        seed in any::<u64>(),
        device_bits in proptest::collection::vec(any::<u8>(), 1..5),
    ) {
        const CAPS: [&str; 3] = ["sense.m", "act.a", "act.b"];
        let model = model_from_seed(seed, &CAPS);
        let devices: Vec<DeviceDescriptor> = device_bits
            .iter()
            .enumerate()
            .map(|(i, bits)| DeviceDescriptor {
                id: format!("d{i}"),
                capabilities: CAPS
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| bits & (1 << c) != 0)
                    .map(|(_, cap)| cap.to_string())
                    .collect(),
                battery: 50.0,
                reachable: bits & 0b1000 != 0,
                params: DConfig::default(),
            })
            .collect();
        let defaults = BTreeMap::new();

        for sel in enumerate_configurations(&model, 64).expect("small model").selections {
            match derive_fconfig(&model, &sel, &devices, &defaults) {
                Ok(config) => {
                    for feature in sel.iter() {
                        let needs = model.capability_needs(feature);
                        if needs.is_empty() {
                            prop_assert!(!config.bindings.contains_key(feature));
                            continue;
                        }
                        let expected = devices
                            .iter()
                            .filter(|d| {
                                d.reachable && needs.iter().all(|c| d.capabilities.contains(c))
                            })
                            .map(|d| d.id.as_str())
                            .min()
                            .expect("derivation succeeded, so a device serves this");
                        prop_assert_eq!(config.bindings.get(feature).map(String::as_str), Some(expected));
                    }
                    prop_assert!(config
                        .bindings
                        .keys()
                        .all(|f| !model.capability_needs(f).is_empty()));
                }
                Err(_) => {
                    // Failure is only legitimate when some needed capability
                    // has no reachable provider.
                    let unservable = sel.iter().any(|feature| {
                        let needs = model.capability_needs(feature);
                        !needs.is_empty()
                            && !devices.iter().any(|d| {
                                d.reachable && needs.iter().all(|c| d.capabilities.contains(c))
                            })
                    });
                    prop_assert!(unservable);
                }
            }
        }
    }
}

fn three_var_map() -> DimensionMap {
    DimensionMap::new(
        BTreeMap::from([
            ("m".to_string(), Dimension::Context),
            ("t".to_string(), Dimension::Context),
            ("e".to_string(), Dimension::Environment),
        ]),
        BTreeMap::new(),
        BASE_MODE,
    )
    .expect("static map is well-formed")
}

#[derive(Debug, Clone)]
struct FactSpec {
    variable: &'static str,
    predicted_value: f64,
    valid_at: u64,
    issued_lag: u64,
}

fn fact_strategy() -> impl Strategy<Value = FactSpec> {
    (
        prop_oneof![Just("m"), Just("t"), Just("e")],
        -50.0f64..50.0,
        0u64..80,
        0u64..10,
    )
        .prop_map(|(variable, predicted_value, valid_at, issued_lag)| FactSpec {
            variable,
            predicted_value,
            valid_at,
            issued_lag,
        })
}

fn reading_strategy() -> impl Strategy<Value = (&'static str, f64, u64, &'static str)> {
    (
        prop_oneof![Just("m"), Just("t"), Just("e")],
        -50.0f64..50.0,
        0u64..60,
        prop_oneof![Just("s1"), Just("s2")],
    )
}

proptest! {
    /// Snapshot invariants: staleness is exactly age > window, environment
    /// variables never surface in the current view, facts act only inside
    /// [now, now+horizon], and fact ingestion order is irrelevant.
    #[test]
    fn kb_snapshot_invariants(
        readings in proptest::collection::vec(reading_strategy(), 0..12),
        facts in proptest::collection::vec(fact_strategy(), 0..8),
        now in 0u64..60,
        horizon in 0u64..30,
        window in 0u64..10,
    ) {
        let mut readings = readings;
        readings.sort_by_key(|(_, _, tick, _)| *tick);

        let mut kb = KnowledgeBase::new(three_var_map(), 10.0);
        for (variable, value, tick, source) in &readings {
            kb.ingest_reading(Reading {
                variable: variable.to_string(),
                value: *value,
                tick: *tick,
                source: source.to_string(),
            })
            .expect("readings ingested in tick order");
        }
        for f in &facts {
            kb.ingest_fact(Fact {
                variable: f.variable.to_string(),
                predicted_value: f.predicted_value,
                valid_at: f.valid_at,
                issued_at: f.valid_at.saturating_sub(f.issued_lag),
            })
            .expect("valid_at >= issued_at by construction");
        }

        let ec = kb.snapshot(now, horizon, window);
        prop_assert_eq!(ec.now, now);
        prop_assert!(!ec.current.contains_key("e"));

        for variable in ["m", "t"] {
            let latest = readings
                .iter()
                .rev()
                .find(|(v, _, _, _)| *v == variable)
                .map(|(_, value, tick, _)| (*value, *tick));
            match (latest, ec.current.get(variable)) {
                (None, None) => {}
                (Some((value, tick)), Some(entry)) => {
                    prop_assert_eq!(entry.value, value);
                    prop_assert_eq!(entry.age, now.saturating_sub(tick));
                    prop_assert_eq!(entry.stale, entry.age > window);
                }
                (expected, got) => {
                    return Err(TestCaseError::fail(format!(
                        "{variable}: reading {expected:?} vs entry {got:?}"
                    )));
                }
            }
        }

        // Environment variables reach the predicted view only through an
        // in-window fact.
        let e_in_window = facts
            .iter()
            .any(|f| f.variable == "e" && f.valid_at >= now && f.valid_at <= now + horizon);
        prop_assert_eq!(ec.predicted.contains_key("e"), e_in_window);

        // Ingestion order of facts must not matter.
        let mut kb_rev = KnowledgeBase::new(three_var_map(), 10.0);
        for (variable, value, tick, source) in &readings {
            kb_rev
                .ingest_reading(Reading {
                    variable: variable.to_string(),
                    value: *value,
                    tick: *tick,
                    source: source.to_string(),
                })
                .expect("same readings as above");
        }
        for f in facts.iter().rev() {
            kb_rev
                .ingest_fact(Fact {
                    variable: f.variable.to_string(),
                    predicted_value: f.predicted_value,
                    valid_at: f.valid_at,
                    issued_at: f.valid_at.saturating_sub(f.issued_lag),
                })
                .expect("same facts as above");
        }
        prop_assert_eq!(kb_rev.snapshot(now, horizon, window), ec);
    }

    /// Feasibility is exactly reachable ∧ battery above the floor.
    #[test]
    fn kb_feasibility_matches_definition(
        batteries in proptest::collection::vec((0.0f64..100.0, any::<bool>()), 1..6),
        floor in 0.0f64..40.0,
    ) {
        let mut kb = KnowledgeBase::new(three_var_map(), floor);
        for (i, (battery, reachable)) in batteries.iter().enumerate() {
            kb.register_device(DeviceDescriptor {
                id: format!("d{i}"),
                capabilities: BTreeSet::new(),
                battery: *battery,
                reachable: *reachable,
                params: DConfig::default(),
            })
            .expect("battery in range");
        }
        let ec = kb.snapshot(0, 0, 0);
        for (i, (battery, reachable)) in batteries.iter().enumerate() {
            let id = format!("d{i}");
            prop_assert_eq!(
                ec.feasible_devices.contains(&id),
                *reachable && *battery > floor,
                "device {} battery {} reachable {}", id, battery, reachable
            );
        }
    }

    /// JSONL round-trip: whatever is written is read back verbatim, and
    /// every line is self-contained.
    #[test]
    fn trace_roundtrip(specs in proptest::collection::vec(
        (any::<u64>(), 0usize..10, ".{0,12}", any::<i64>()),
        0..20,
    )) {
        const KINDS: [TraceKind; 10] = [
            TraceKind::Reading,
            TraceKind::Fact,
            TraceKind::ModeSwitch,
            TraceKind::Analyze,
            TraceKind::Plan,
            TraceKind::NoChange,
            TraceKind::Command,
            TraceKind::Ack,
            TraceKind::Adapt,
            TraceKind::Warning,
        ];
        let events: Vec<TraceEvent> = specs
            .iter()
            .map(|(t, kind, text, number)| {
                TraceEvent::new(*t, KINDS[*kind], json!({ "text": text, "n": number }))
            })
            .collect();

        let mut buf = Vec::new();
        write_trace(&mut buf, &events).expect("vec sink");
        let decoded = read_trace(buf.as_slice()).expect("own output parses");
        prop_assert_eq!(&decoded, &events);
        for event in &events {
            prop_assert!(!event.to_line().contains('\n'));
        }
    }
}
