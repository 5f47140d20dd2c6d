//! Seeded scenario generation and the check harness.
//!
//! Every scenario is drawn from a [`ScenarioSpec`] with a `ChaCha8` stream
//! seeded by the spec's 64-bit seed, so one seed always yields the same
//! library and schedule. Checks draw their own evaluation times from a
//! second stream seeded by the scenario seed mixed with the check id.

mod checks;
mod suite;

pub use checks::{registry, run_check, Check, CheckResult, Residual, Status, Tolerances};
pub use suite::{run_suite, ScenarioSet, SuiteConfig, SuiteReport, Summary};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Gauge, GraphError, SignedDigraph};
use crate::switching::{GraphLibrary, Schedule, SignalError, SwitchingSignal};
use crate::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
    #[error("seed {seed}: no scenario satisfied the {policy} policy in {draws} draws ({last})")]
    Unsatisfiable { seed: u64, policy: &'static str, draws: usize, last: String },
    #[error("unknown check id `{0}`")]
    UnknownCheck(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignPolicy {
    /// Signs follow a random planted gauge, so the library is s.s.b.
    BalancedForced,
    /// A sign conflict is planted and any accidentally balanced draw rejected.
    UnbalancedForced,
    Free,
}

impl SignPolicy {
    fn name(self) -> &'static str {
        match self {
            SignPolicy::BalancedForced => "balanced-forced",
            SignPolicy::UnbalancedForced => "unbalanced-forced",
            SignPolicy::Free => "free",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectivityPolicy {
    /// A random Hamiltonian cycle is spread over the library.
    StrongUnion,
    Free,
}

/// Recipe for one random scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub seed: u64,
    /// Inclusive node-count range.
    pub n: [usize; 2],
    /// Inclusive library-size range.
    pub m: [usize; 2],
    /// Range of edge-weight magnitudes.
    pub weight: [f64; 2],
    /// Probability of each extra ordered pair being an edge in each graph.
    pub edge_prob: f64,
    /// Probability of a negative sign under the free and unbalanced policies.
    pub negative_prob: f64,
    pub signs: SignPolicy,
    pub connectivity: ConnectivityPolicy,
    pub tau_min: f64,
    /// Range of dwell times in the periodic pattern.
    pub dwell: [f64; 2],
    /// Record length to fill with whole periods (at least one).
    pub horizon: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n: [2, 6],
            m: [1, 4],
            weight: [0.5, 3.0],
            edge_prob: 0.3,
            negative_prob: 0.4,
            signs: SignPolicy::Free,
            connectivity: ConnectivityPolicy::StrongUnion,
            tau_min: 0.2,
            dwell: [0.2, 1.0],
            horizon: 1000.0,
        }
    }
}

impl ScenarioSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        let bad = |m: &str| Err(VerifyError::InvalidSpec(m.to_string()));
        if self.n[0] < 2 || self.n[0] > self.n[1] {
            return bad("node range must satisfy 2 <= lo <= hi");
        }
        if self.m[0] < 1 || self.m[0] > self.m[1] {
            return bad("library range must satisfy 1 <= lo <= hi");
        }
        if !(self.weight[0] > 0.0 && self.weight[0] <= self.weight[1] && self.weight[1].is_finite()) {
            return bad("weight range must satisfy 0 < lo <= hi < inf");
        }
        if !(0.0..=1.0).contains(&self.edge_prob) || !(0.0..=1.0).contains(&self.negative_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        if !(self.tau_min > 0.0 && self.dwell[0] >= self.tau_min && self.dwell[0] <= self.dwell[1]) {
            return bad("dwell range must satisfy 0 < tau_min <= lo <= hi");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        Ok(())
    }
}

/// A generated library with its periodic signal on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub signal: SwitchingSignal<f64>,
    /// Length of one period of the schedule.
    pub period: f64,
    /// Gauge used to sign the edges under the balanced policy, with `+1` on
    /// node 0.
    pub planted: Option<Gauge>,
}

impl Scenario {
    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn library(&self) -> &GraphLibrary<f64> {
        self.signal.library()
    }

    pub fn n(&self) -> usize {
        self.signal.n()
    }
}

const MAX_DRAWS: usize = 1000;

/// Draws a scenario satisfying the spec's policies, retrying up to 1000
/// times.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario, VerifyError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut last = String::new();
    for _ in 0..MAX_DRAWS {
        match draw(spec, &mut rng)? {
            Ok(s) => return Ok(s),
            Err(why) => last = why,
        }
    }
    Err(VerifyError::Unsatisfiable { seed: spec.seed, policy: spec.signs.name(), draws: MAX_DRAWS, last })
}

/// Magnitudes per graph, `mags[g][i][j]` nonzero for an edge `j -> i`.
type Magnitudes = Vec<Vec<Vec<f64>>>;

fn draw(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Result<Result<Scenario, String>, VerifyError> {
    let n = rng.gen_range(spec.n[0]..=spec.n[1]);
    let m = rng.gen_range(spec.m[0]..=spec.m[1]);
    let mut weight = |rng: &mut ChaCha8Rng| rng.gen_range(spec.weight[0]..=spec.weight[1]);

    let mut mags: Magnitudes = vec![vec![vec![0.0; n]; n]; m];
    for g in mags.iter_mut() {
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.gen_bool(spec.edge_prob) {
                    g[i][j] = weight(rng);
                }
            }
        }
    }
    if spec.connectivity == ConnectivityPolicy::StrongUnion {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        for k in 0..n {
            let (src, dst) = (order[k], order[(k + 1) % n]);
            let g = rng.gen_range(0..m);
            if mags[g][dst][src] == 0.0 {
                mags[g][dst][src] = weight(rng);
            }
        }
    }

    let mut signs = vec![vec![vec![1.0f64; n]; n]; m];
    let mut planted = None;
    match spec.signs {
        SignPolicy::BalancedForced => {
            let d: Vec<i8> = (0..n).map(|i| if i == 0 || rng.gen_bool(0.5) { 1 } else { -1 }).collect();
            for g in signs.iter_mut() {
                for i in 0..n {
                    for j in 0..n {
                        g[i][j] = f64::from(d[i] * d[j]);
                    }
                }
            }
            planted = Some(Gauge::new(d));
        }
        SignPolicy::Free | SignPolicy::UnbalancedForced => {
            for g in signs.iter_mut() {
                for row in g.iter_mut() {
                    for v in row.iter_mut() {
                        if rng.gen_bool(spec.negative_prob) {
                            *v = -1.0;
                        }
                    }
                }
            }
        }
    }
    if spec.signs == SignPolicy::UnbalancedForced {
        plant_conflict(&mut mags, &mut signs, rng, &mut weight);
    }

    let graphs = mags
        .iter()
        .zip(&signs)
        .map(|(mg, sg)| SignedDigraph::from_adjacency(Matrix::from_fn(n, n, |i, j| mg[i][j] * sg[i][j])))
        .collect::<Result<Vec<_>, _>>()?;
    let library = GraphLibrary::new(graphs)?;

    let balance = library.simultaneous_balance();
    match spec.signs {
        SignPolicy::BalancedForced if balance.is_none() => return Ok(Err("planted gauge not recovered".into())),
        SignPolicy::UnbalancedForced if balance.is_some() => return Ok(Err("draw came out balanced".into())),
        _ => {}
    }
    if spec.connectivity == ConnectivityPolicy::StrongUnion && !library.union().is_strongly_connected() {
        return Ok(Err("union not strongly connected".into()));
    }

    let mut order: Vec<usize> = (1..=m).collect();
    order.shuffle(rng);
    let pattern: Vec<(f64, usize)> =
        order.into_iter().map(|g| (rng.gen_range(spec.dwell[0]..=spec.dwell[1]), g)).collect();
    let period: f64 = pattern.iter().map(|p| p.0).sum();
    let repeats = ((spec.horizon / period).floor() as usize).max(1);
    let horizon = period * repeats as f64;
    let signal = SwitchingSignal::new(library, &Schedule::Periodic { pattern, repeats }, 0.0, spec.tau_min, horizon)?;
    Ok(Ok(Scenario { spec: spec.clone(), signal, period, planted }))
}

/// Plants one of three sign conflicts no gauge can satisfy: a digon with
/// opposite signs, a pair signed differently in two graphs, or a triangle
/// with one negative edge.
fn plant_conflict(
    mags: &mut Magnitudes,
    signs: &mut [Vec<Vec<f64>>],
    rng: &mut ChaCha8Rng,
    weight: &mut impl FnMut(&mut ChaCha8Rng) -> f64,
) {
    let m = mags.len();
    let n = mags[0].len();
    let variants = 1 + usize::from(m >= 2) + usize::from(n >= 3);
    let mut pick = rng.gen_range(0..variants);
    let mut set = |g: usize, i: usize, j: usize, sign: f64, rng: &mut ChaCha8Rng| {
        if mags[g][i][j] == 0.0 {
            mags[g][i][j] = weight(rng);
        }
        signs[g][i][j] = sign;
    };
    let (i, j) = distinct_pair(n, rng);
    if pick == 0 {
        let g = rng.gen_range(0..m);
        set(g, i, j, 1.0, rng);
        set(g, j, i, -1.0, rng);
        return;
    }
    if m < 2 {
        pick += 1;
    }
    if pick == 1 {
        let g1 = rng.gen_range(0..m);
        let g2 = (g1 + rng.gen_range(1..m)) % m;
        set(g1, i, j, 1.0, rng);
        set(g2, i, j, -1.0, rng);
        return;
    }
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    let g = rng.gen_range(0..m);
    let neg = rng.gen_range(0..3);
    for k in 0..3 {
        let sign = if k == neg { -1.0 } else { 1.0 };
        set(g, nodes[(k + 1) % 3], nodes[k], sign, rng);
    }
}

fn distinct_pair(n: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let i = rng.gen_range(0..n);
    let j = (i + rng.gen_range(1..n)) % n;
    (i, j)
}
