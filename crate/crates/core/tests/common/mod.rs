#![allow(dead_code)]

use std::path::{Path, PathBuf};

use lakeflow_core::annealer::AnnealConfig;
use lakeflow_core::scenario::{Scenario, ScenarioOptions, ScenarioPaths};
use lakeflow_core::synthetic::{generate, SyntheticConfig, SyntheticScenario};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn bundled_dir() -> PathBuf {
    repo_root().join("scenarios/synthetic-2017")
}

pub fn bundled_paths() -> ScenarioPaths {
    ScenarioPaths {
        history: "history.csv".into(),
        evaluation: "evaluation.csv".into(),
        topology: "topology.json".into(),
        constraints: "constraints.json".into(),
        coefficients: None,
    }
    .resolved(&bundled_dir())
}

pub fn bundled_scenario() -> Scenario {
    bundled_paths().load(None).expect("bundled scenario loads")
}

pub fn synthetic(seed: u64) -> SyntheticScenario {
    generate(&SyntheticConfig { seed, ..Default::default() }).unwrap()
}

pub fn build(s: &SyntheticScenario) -> Scenario {
    Scenario::build(&s.history, &s.evaluation, &s.topology, &s.constraints, &ScenarioOptions::default()).unwrap()
}

/// A short schedule for tests that only need a plausible plan.
pub fn quick_anneal(seed: u64) -> AnnealConfig {
    AnnealConfig {
        initial_temperature: 0.5,
        min_temperature: 1e-3,
        cooling_rate: 0.9,
        iterations_per_temperature: 10,
        restarts: 2,
        seed,
        ..Default::default()
    }
}

/// Compare `actual` with the stored golden file, or rewrite it when
/// LAKEFLOW_BLESS=1.
pub fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var("LAKEFLOW_BLESS").as_deref() == Ok("1") {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e}; rerun with LAKEFLOW_BLESS=1", path.display()));
    assert!(expected == actual, "{} differs from the stored golden output", path.display());
}
