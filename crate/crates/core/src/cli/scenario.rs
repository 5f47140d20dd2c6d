//! The scenario file: one JSON document describing a graph library, its
//! switching schedule, the record span and the initial state.
//!
//! ```json
//! {
//!   "graphs": [{"n": 2, "edges": [[1, 2, -1.0], [2, 1, -1.0]]}],
//!   "schedule": {"periodic": {"pattern": [[0.5, 1]], "repeats": 20}},
//!   "tau_min": 0.5,
//!   "t0": 0.0,
//!   "horizon": 10.0,
//!   "x0": [1.0, 0.0],
//!   "sample_dt": 0.1,
//!   "tolerances": {"limit": 1e-6, "zero": 1e-6}
//! }
//! ```
//!
//! Edges are 1-based `[src, dst, weight]` triples, schedule labels are
//! 1-based graph positions. Everything except `graphs` and `horizon` may be
//! omitted. The schedule then defaults to graph 1 on the whole record,
//! `tau_min` to the shortest dwell, `t0` to 0, `x0` to `e_1`, `sample_dt`
//! to 0.1 and both tolerances to 1e-6.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, SignedDigraph};
use crate::switching::{GraphLibrary, Schedule, SignalError, SwitchingSignal};

const DEFAULT_SAMPLE_DT: f64 = 0.1;
const DEFAULT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n: usize,
    #[serde(default)]
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicSpec {
    pub pattern: Vec<(f64, usize)>,
    pub repeats: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// `[t_k, label]` entries.
    Explicit(Vec<(f64, usize)>),
    Periodic(PeriodicSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    /// Gauge-fit tolerance for a consensus verdict.
    #[serde(default = "default_tol")]
    pub limit: f64,
    /// Norm below which `Phi` counts as zero.
    #[serde(default = "default_tol")]
    pub zero: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { limit: DEFAULT_TOL, zero: DEFAULT_TOL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub graphs: Vec<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read: {0}")]
    Io(#[source] std::io::Error),
    #[error("parse error at `{field}`: {message} (line {line}, column {column})")]
    Parse { field: String, message: String, line: usize, column: usize },
    #[error("graph {index}: {source}")]
    Graph { index: usize, source: GraphError },
    #[error("schedule: {0}")]
    Signal(#[from] SignalError),
    #[error("x0 has length {found}, graphs have {expected} nodes")]
    Dimension { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Simulation and classification settings with defaults applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Options {
    pub sample_dt: f64,
    pub tolerances: ToleranceSpec,
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedScenario {
    pub signal: SwitchingSignal<f64>,
    pub x0: Vec<f64>,
    pub options: Options,
    /// The input with every default written out.
    pub resolved: ScenarioFile,
}

impl LoadedScenario {
    pub fn library(&self) -> &GraphLibrary<f64> {
        self.signal.library()
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = match e.path().to_string() {
                p if p == "." => "<root>".to_string(),
                p => p,
            };
            let inner = e.inner();
            ScenarioError::Parse { field, message: inner.to_string(), line: inner.line(), column: inner.column() }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files serialize")
    }

    pub fn to_json_compact(&self) -> String {
        serde_json::to_string(self).expect("scenario files serialize")
    }

    /// Validates the file and fills in every default.
    pub fn load(&self) -> Result<LoadedScenario, ScenarioError> {
        let graphs = self
            .graphs
            .iter()
            .enumerate()
            .map(|(k, g)| {
                SignedDigraph::new(g.n, &g.edges).map_err(|source| ScenarioError::Graph { index: k + 1, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let library = GraphLibrary::new(graphs)?;
        let n = library.n();
        let t0 = self.t0.unwrap_or(0.0);
        let horizon = self.horizon;
        let schedule = match &self.schedule {
            Some(ScheduleSpec::Explicit(e)) => Schedule::Explicit(e.clone()),
            Some(ScheduleSpec::Periodic(p)) => Schedule::Periodic { pattern: p.pattern.clone(), repeats: p.repeats },
            None => Schedule::Explicit(vec![(t0, 1)]),
        };
        let tau_min = match self.tau_min {
            Some(tau) => tau,
            None => shortest_dwell(&schedule.expand(t0, horizon)?, horizon),
        };
        let signal = SwitchingSignal::new(library, &schedule, t0, tau_min, horizon)?;
        let x0 = match &self.x0 {
            Some(x) if x.len() != n => return Err(ScenarioError::Dimension { expected: n, found: x.len() }),
            Some(x) if x.iter().any(|v| !v.is_finite()) => {
                return Err(ScenarioError::Invalid("x0 has non-finite entries".into()))
            }
            Some(x) => x.clone(),
            None => (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
        };
        let sample_dt = self.sample_dt.unwrap_or(DEFAULT_SAMPLE_DT);
        if !(sample_dt > 0.0 && sample_dt.is_finite()) {
            return Err(ScenarioError::Invalid(format!("sample_dt must be positive, got {sample_dt}")));
        }
        let tolerances = self.tolerances.unwrap_or_default();
        if !(tolerances.limit > 0.0 && tolerances.zero > 0.0) {
            return Err(ScenarioError::Invalid("tolerances must be positive".into()));
        }
        let resolved = ScenarioFile {
            graphs: self.graphs.clone(),
            schedule: Some(match schedule {
                Schedule::Explicit(e) => ScheduleSpec::Explicit(e),
                Schedule::Periodic { pattern, repeats } => ScheduleSpec::Periodic(PeriodicSpec { pattern, repeats }),
            }),
            tau_min: Some(tau_min),
            t0: Some(t0),
            horizon,
            x0: Some(x0.clone()),
            sample_dt: Some(sample_dt),
            tolerances: Some(tolerances),
        };
        Ok(LoadedScenario { signal, x0, options: Options { sample_dt, tolerances }, resolved })
    }
}

fn shortest_dwell(entries: &[(f64, usize)], horizon: f64) -> f64 {
    let ends = entries.iter().skip(1).map(|&(t, _)| t).chain(std::iter::once(horizon));
    entries.iter().zip(ends).map(|(&(t, _), end)| end - t).fold(f64::INFINITY, f64::min)
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(ScenarioError::Io)?;
    ScenarioFile::from_json(&text)?.load()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"graphs": [{"n": 2, "edges": [[1, 2, -1.0], [2, 1, -1.0]]}], "horizon": 5}"#;

    #[test]
    fn minimal_file_fills_defaults() {
        let s = ScenarioFile::from_json(MINIMAL).unwrap().load().unwrap();
        assert_eq!(s.x0, vec![1.0, 0.0]);
        assert_eq!(s.signal.tau_min(), 5.0);
        assert_eq!(s.options.sample_dt, 0.1);
        assert_eq!(s.resolved.schedule, Some(ScheduleSpec::Explicit(vec![(0.0, 1)])));
    }

    #[test]
    fn resolved_round_trips() {
        let s = ScenarioFile::from_json(MINIMAL).unwrap().load().unwrap();
        let again = ScenarioFile::from_json(&s.resolved.to_json()).unwrap();
        assert_eq!(again, s.resolved);
        assert_eq!(again.load().unwrap(), s);
    }

    #[test]
    fn unknown_key_names_field() {
        let text = r#"{"graphs": [{"n": 2, "edgez": []}], "horizon": 5}"#;
        match ScenarioFile::from_json(text) {
            Err(ScenarioError::Parse { field, line, .. }) => {
                assert_eq!(field, "graphs[0].edgez");
                assert_eq!(line, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dwell_violation_names_interval() {
        let text =
            r#"{"graphs": [{"n": 2}], "schedule": {"explicit": [[0, 1], [0.5, 1]]}, "tau_min": 1, "horizon": 3}"#;
        let e = ScenarioFile::from_json(text).unwrap().load().unwrap_err();
        assert!(matches!(e, ScenarioError::Signal(SignalError::DwellViolation { k: 0, .. })), "{e}");
    }

    #[test]
    fn x0_dimension_checked() {
        let text = r#"{"graphs": [{"n": 2}], "horizon": 3, "x0": [1, 2, 3]}"#;
        let e = ScenarioFile::from_json(text).unwrap().load().unwrap_err();
        assert!(matches!(e, ScenarioError::Dimension { expected: 2, found: 3 }));
    }

    #[test]
    fn bad_edge_reports_graph() {
        let text = r#"{"graphs": [{"n": 2}, {"n": 2, "edges": [[1, 3, 1.0]]}], "horizon": 3}"#;
        let e = ScenarioFile::from_json(text).unwrap().load().unwrap_err();
        assert!(matches!(e, ScenarioError::Graph { index: 2, .. }), "{e}");
    }
}
