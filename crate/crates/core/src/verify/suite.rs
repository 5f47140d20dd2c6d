use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{evaluate, registry, Check, CheckResult, Status, Tolerances};
use super::{generate_scenario, ConnectivityPolicy, ScenarioSpec, SignPolicy, VerifyError};
use crate::json::Num;

/// `count` consecutive seeds drawn from one spec template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSet {
    #[serde(default)]
    pub template: ScenarioSpec,
    #[serde(default)]
    pub first_seed: u64,
    pub count: usize,
}

impl ScenarioSet {
    pub fn specs(&self) -> impl Iterator<Item = ScenarioSpec> + '_ {
        (0..self.count as u64).map(move |k| self.template.with_seed(self.first_seed + k))
    }
}

/// Suite file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub sets: Vec<ScenarioSet>,
    /// Check ids to run; all registered checks when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
    /// Tolerance overrides keyed by `check` or `check.residual`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
}

impl SuiteConfig {
    /// 200 seeds: balanced, unbalanced and free signs over strongly connected
    /// unions, plus a free-connectivity tail that exercises the skips.
    pub fn default_suite() -> Self {
        let set = |signs, connectivity, first_seed, count| ScenarioSet {
            template: ScenarioSpec { signs, connectivity, ..ScenarioSpec::default() },
            first_seed,
            count,
        };
        Self {
            sets: vec![
                set(SignPolicy::BalancedForced, ConnectivityPolicy::StrongUnion, 0, 60),
                set(SignPolicy::UnbalancedForced, ConnectivityPolicy::StrongUnion, 60, 60),
                set(SignPolicy::Free, ConnectivityPolicy::StrongUnion, 120, 50),
                set(SignPolicy::Free, ConnectivityPolicy::Free, 170, 30),
            ],
            checks: None,
            tolerances: BTreeMap::new(),
        }
    }

    pub fn specs(&self) -> Vec<ScenarioSpec> {
        self.sets.iter().flat_map(ScenarioSet::specs).collect()
    }

    pub fn selected_checks(&self) -> Result<Vec<&'static Check>, VerifyError> {
        match &self.checks {
            None => Ok(registry().iter().collect()),
            Some(ids) => ids
                .iter()
                .map(|id| registry().iter().find(|c| c.id == id).ok_or_else(|| VerifyError::UnknownCheck(id.clone())))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

impl Summary {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    /// Sorted by check id, then seed.
    pub results: Vec<CheckResult>,
    pub summary: Summary,
}

#[derive(Serialize)]
struct ResultLine<'a> {
    check: &'a str,
    seed: u64,
    status: Status,
    pass: bool,
    residuals: BTreeMap<&'a str, Num>,
    tolerances: BTreeMap<&'a str, Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'a str>,
    elapsed_ms: Num,
}

#[derive(Serialize)]
struct SummaryLine {
    summary: Summary,
}

impl SuiteReport {
    /// One JSON object per result, then the summary object.
    pub fn write_json_lines(&self, mut w: impl Write) -> io::Result<()> {
        for r in &self.results {
            let line = ResultLine {
                check: &r.check,
                seed: r.seed,
                status: r.status,
                pass: r.passed(),
                residuals: r.residuals.iter().map(|x| (x.name, Num(x.value))).collect(),
                tolerances: r.residuals.iter().map(|x| (x.name, Num(x.tol))).collect(),
                reason: r.reason.as_deref(),
                elapsed_ms: Num(r.elapsed_ms),
            };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w)?;
        }
        serde_json::to_writer(&mut w, &SummaryLine { summary: self.summary })?;
        writeln!(w)
    }
}

fn run_scenario(spec: &ScenarioSpec, checks: &[&Check], tol: &Tolerances) -> Vec<CheckResult> {
    if checks.is_empty() {
        return Vec::new();
    }
    match generate_scenario(spec) {
        Ok(s) => checks.iter().map(|c| evaluate(c, &s, tol)).collect(),
        Err(e) => vec![CheckResult {
            check: "generate".to_string(),
            seed: spec.seed,
            status: Status::Fail,
            residuals: Vec::new(),
            reason: Some(e.to_string()),
            elapsed_ms: 0.0,
        }],
    }
}

/// Every check on every scenario, fanned out across at most `threads`
/// workers (all cores when `None`).
pub fn run_suite(specs: &[ScenarioSpec], checks: &[&Check], tol: &Tolerances, threads: Option<usize>) -> SuiteReport {
    let run = || -> Vec<CheckResult> { specs.par_iter().flat_map_iter(|s| run_scenario(s, checks, tol)).collect() };
    let mut results = match threads {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    };
    results.sort_by(|a, b| (&a.check, a.seed).cmp(&(&b.check, b.seed)));
    let mut summary = Summary { total: results.len(), ..Summary::default() };
    for r in &results {
        match r.status {
            Status::Pass => summary.passed += 1,
            Status::Fail => summary.failed += 1,
            Status::Skip => summary.skipped += 1,
        }
    }
    SuiteReport { results, summary }
}
