mod common;

use std::collections::BTreeMap;

use cohist::models::{build_cat, build_kochen_specker, build_single_spin, build_stern_gerlach};
use cohist::scenario::{
    rows_of, vector_of, DecompositionSpec, FamilySpec, InitialSpec, LabeledProjector, Scenario,
    ScenarioError, ScenarioFile, SegmentSpec, SlotSpec, FORMAT_VERSION,
};
use cohist::tolerance::ToleranceOverrides;
use cohist::{decoherence_matrix, Family};
use common::*;
use proptest::prelude::*;

/// Writes a random family out as an explicit scenario file.
fn file_for(f: &Family) -> ScenarioFile {
    let initial = match f.initial().as_pure() {
        Some(s) => InitialSpec::State(vector_of(s.entries())),
        None => InitialSpec::Density(rows_of(&f.initial().matrix())),
    };
    let dynamics = f
        .dynamics()
        .segments()
        .iter()
        .map(|s| SegmentSpec {
            duration: s.duration,
            unitary: Some(rows_of(s.unitary.as_operator())),
            hamiltonian: None,
        })
        .collect();
    let mut decompositions = BTreeMap::new();
    let mut slots = Vec::new();
    for (k, s) in f.slots().iter().enumerate() {
        let name = format!("d{k}");
        let projectors = s
            .decomposition
            .projectors()
            .iter()
            .zip(s.decomposition.labels())
            .map(|(p, l)| LabeledProjector { label: l.clone(), matrix: rows_of(p.op()) })
            .collect();
        decompositions.insert(name.clone(), DecompositionSpec::Projectors(projectors));
        slots.push(SlotSpec { step: s.step, decomposition: name });
    }
    ScenarioFile {
        format_version: FORMAT_VERSION,
        name: "random".into(),
        dimension: f.dim(),
        initial,
        dynamics,
        decompositions,
        families: BTreeMap::from([("f".to_string(), FamilySpec { slots })]),
        tolerances: ToleranceOverrides::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_scenarios_round_trip(seed in any::<u64>()) {
        let f = random_family(&mut rng(seed));
        let text = file_for(&f).to_json();
        let loaded = Scenario::parse(&text).unwrap();
        prop_assert_eq!(loaded.to_json(), text);
        let d0 = decoherence_matrix(&f).unwrap();
        let d1 = decoherence_matrix(loaded.family("f").unwrap()).unwrap();
        prop_assert!(d0.max_abs_diff(&d1).unwrap() < 1e-12);
    }
}

#[test]
fn built_in_scenarios_round_trip_through_disk() {
    let dir = std::env::temp_dir().join(format!("cohist-roundtrip-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for s in [
        build_single_spin([0.0, 0.6, 0.8]).unwrap(),
        build_stern_gerlach([0.6, 0.0, 0.8], 3).unwrap(),
        build_cat(3, 0.3).unwrap(),
        build_kochen_specker().unwrap(),
    ] {
        let path = dir.join(format!("{}.json", s.name()));
        std::fs::write(&path, s.to_json()).unwrap();
        let loaded = Scenario::load(&path).unwrap();
        assert_eq!(loaded.to_json(), s.to_json());
        assert_eq!(loaded.families().len(), s.families().len());
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(Scenario::load("/nonexistent/scenario.json"), Err(ScenarioError::Io { .. })));
}

#[test]
fn tolerance_overrides_reach_the_scenario() {
    let mut file = build_single_spin([0.0, 0.0, 1.0]).unwrap().file().clone();
    file.tolerances.consistency = Some(0.3);
    file.tolerances.orth = Some(1e-6);
    let text = file.to_json();
    assert!(text.contains("\"consistency\": 0.3"));
    let s = Scenario::parse(&text).unwrap();
    assert_eq!(s.consistency_options().tol, Some(0.3));
    assert_eq!(s.tolerances().orth, 1e-6);
}

#[test]
fn dimension_cap_is_enforced() {
    let mut file = build_single_spin([0.0, 0.0, 1.0]).unwrap().file().clone();
    file.dimension = 1 << 20;
    let err = Scenario::from_file(file).unwrap_err().to_string();
    assert!(err.contains("exceeds the configured cap"), "{err}");
}
