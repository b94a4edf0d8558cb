#![allow(dead_code)]

use std::path::{Path, PathBuf};

use netdiff_core::dgp;
use netdiff_core::montecarlo::{rep_seed, CellSetup, GraphSpec, McConfig};
use netdiff_core::DirectedGraph;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn schema(name: &str) -> serde_json::Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Validates `instance` against a schema file, panicking with every violation.
pub fn assert_schema(name: &str, instance: &serde_json::Value) {
    let validator = jsonschema::validator_for(&schema(name)).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{e} at {}", e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

/// A simulated panel on an ER graph with permuted, sparse node ids.
pub fn simulated(n: usize, seed: u64) -> (dgp::Panel, DirectedGraph) {
    let config = McConfig::new(GraphSpec::ErdosRenyi { lambda: 1.0 }, n, 1.0);
    let mut setup = CellSetup::new(&McConfig { seed, ..config }).unwrap();
    setup.spec.irreversible = true;
    let mut panel =
        dgp::simulate_panel(&setup.true_graph, &setup.x, &setup.spec, rep_seed(seed, 0)).unwrap();
    panel.ids = (0..n as u64)
        .map(|i| 1000 + 7 * ((i * 13 + seed) % n as u64))
        .collect();
    (panel, setup.true_graph)
}
