//! Scenario reports and expectation files.
//!
//! An expectation names the winner and, optionally, closed ranges for the
//! per-server means:
//!
//! ```toml
//! selectedServerId = "upboard"
//!
//! [servers.upboard]
//! meanLatencyMs = [245.77, 300.39]
//! meanCpu = [1.0, 3.0]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenario::ScenarioError;
use crate::contracts::SelectionEntry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServerReport {
    pub server_id: String,
    pub name: String,
    pub connection: String,
    /// Mean successful probe latency inside the selection window.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_latency_ms: Option<f64>,
    pub latency_samples: u64,
    /// Failed probes over the whole run.
    pub failed_probes: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_cpu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_mem: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_containers: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioReport {
    pub name: String,
    pub target_id: String,
    pub window_minutes: u32,
    /// Ledger time the selection and the per-server means were computed at.
    pub now_ms: i64,
    pub servers: Vec<ServerReport>,
    /// Head of the selection output; absent when no server was eligible.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selected_server_id: Option<String>,
    pub ranking: Vec<SelectionEntry>,
    pub read_count: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub read_mean_ms: Option<f64>,
    pub write_count: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub write_mean_ms: Option<f64>,
    pub elapsed_seconds: f64,
}

impl ScenarioReport {
    pub fn server(&self, id: &str) -> Option<&ServerReport> {
        self.servers.iter().find(|s| s.server_id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ServerExpectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_latency_ms: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_cpu: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_mem: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Expectation {
    pub selected_server_id: String,
    #[serde(default)]
    pub servers: BTreeMap<String, ServerExpectation>,
}

pub fn load_expectation(path: impl AsRef<Path>) -> Result<Expectation, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_expectation(&text)
}

pub fn parse_expectation(text: &str) -> Result<Expectation, ScenarioError> {
    let e: Expectation = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    for (id, s) in &e.servers {
        for r in [s.mean_latency_ms, s.mean_cpu, s.mean_mem].into_iter().flatten() {
            if r[0].is_nan() || r[1].is_nan() || r[0] > r[1] {
                return Err(ScenarioError::Invalid(format!(
                    "server {id}: range [{}, {}] is empty",
                    r[0], r[1]
                )));
            }
        }
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub pass: bool,
    pub diffs: Vec<String>,
}

fn check_range(diffs: &mut Vec<String>, what: String, range: Option<[f64; 2]>, actual: Option<f64>) {
    let Some([lo, hi]) = range else { return };
    match actual {
        Some(v) if v >= lo && v <= hi => {}
        Some(v) => diffs.push(format!("{what}: {v} outside [{lo}, {hi}]")),
        None => diffs.push(format!("{what}: no value, expected [{lo}, {hi}]")),
    }
}

pub fn compare_to_expectation(report: &ScenarioReport, expected: &Expectation) -> Comparison {
    let mut diffs = Vec::new();
    let actual = report.selected_server_id.as_deref();
    if actual != Some(expected.selected_server_id.as_str()) {
        diffs.push(format!(
            "selectedServerId: expected {}, got {}",
            expected.selected_server_id,
            actual.unwrap_or("none")
        ));
    }
    for (id, exp) in &expected.servers {
        let Some(s) = report.server(id) else {
            diffs.push(format!("server {id}: not in report"));
            continue;
        };
        check_range(&mut diffs, format!("{id}.meanLatencyMs"), exp.mean_latency_ms, s.mean_latency_ms);
        check_range(&mut diffs, format!("{id}.meanCpu"), exp.mean_cpu, s.mean_cpu);
        check_range(&mut diffs, format!("{id}.meanMem"), exp.mean_mem, s.mean_mem);
    }
    Comparison {
        pass: diffs.is_empty(),
        diffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(selected: Option<&str>, latency: f64) -> ScenarioReport {
        ScenarioReport {
            name: "t".into(),
            target_id: "s".into(),
            window_minutes: 10,
            now_ms: 0,
            servers: vec![ServerReport {
                server_id: "a".into(),
                name: "A".into(),
                connection: String::new(),
                mean_latency_ms: Some(latency),
                latency_samples: 20,
                failed_probes: 0,
                mean_cpu: Some(5.0),
                mean_mem: Some(20.0),
                mean_containers: Some(0.0),
            }],
            selected_server_id: selected.map(String::from),
            ranking: vec![],
            read_count: 0,
            read_mean_ms: None,
            write_count: 0,
            write_mean_ms: None,
            elapsed_seconds: 0.0,
        }
    }

    const EXPECT: &str = r#"
selectedServerId = "a"
[servers.a]
meanLatencyMs = [270.0, 280.0]
"#;

    #[test]
    fn in_range_passes() {
        let e = parse_expectation(EXPECT).unwrap();
        let c = compare_to_expectation(&report(Some("a"), 273.1), &e);
        assert!(c.pass, "{:?}", c.diffs);
    }

    #[test]
    fn wrong_winner_names_both() {
        let e = parse_expectation(EXPECT).unwrap();
        let c = compare_to_expectation(&report(Some("b"), 273.1), &e);
        assert!(!c.pass);
        assert!(c.diffs[0].contains("expected a") && c.diffs[0].contains("got b"));
    }

    #[test]
    fn out_of_range_fails() {
        let e = parse_expectation(EXPECT).unwrap();
        let c = compare_to_expectation(&report(Some("a"), 281.0), &e);
        assert_eq!(c.diffs.len(), 1);
        assert!(c.diffs[0].starts_with("a.meanLatencyMs"));
    }

    #[test]
    fn empty_range_is_rejected() {
        assert!(parse_expectation("selectedServerId = \"a\"\n[servers.a]\nmeanCpu = [2.0, 1.0]\n").is_err());
    }
}
