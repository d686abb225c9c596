#![allow(dead_code)]

use serde_json::Value;

/// Reference values produced by `tools/oracles.py`.
pub fn oracles() -> Value {
    serde_json::from_str(include_str!("../fixtures/oracles.json")).expect("fixture parses")
}

pub fn f(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("fixture field {key}"))
}

/// Asserts `|estimate - target| <= k·se + slack`.
pub fn assert_within(label: &str, estimate: f64, target: f64, se: f64, k: f64, slack: f64) {
    let d = (estimate - target).abs();
    assert!(
        d <= k * se + slack,
        "{label}: estimate {estimate} vs {target} (|d|={d}, se={se}, k={k}, slack={slack})"
    );
}
