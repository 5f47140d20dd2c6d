use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Scenario, VerifyError};
use crate::dynamics::{
    classify, fit_decay, predicted_even_odd, simulate, simulate_flow, stationary_vector, Hypotheses, RateFit, Verdict,
};
use crate::graph::Gauge;
use crate::switching::LiftedGraph;
use crate::transition::{
    derivative_residual, even_odd, lifted_transition, peano_baker_truncated, transition_matrix, unsigned_transition,
    volterra_residual, Flow, Propagator,
};
use crate::Matrix;

/// Longest span the algebraic identities are evaluated over.
const IDENTITY_SPAN: f64 = 10.0;
/// Residual level down to which convergence fits collect samples.
const MIN_FIT_POINTS: usize = 4;
const FIT_FLOOR: f64 = 1e-11;
/// Residual the settle time is extrapolated to.
const SETTLE_TARGET: f64 = 1e-7;

/// Outcome of one check on one scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

/// One named scalar and the bound it must stay strictly below.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
}

impl Residual {
    pub fn passes(&self) -> bool {
        self.value < self.tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub check: String,
    pub seed: u64,
    pub status: Status,
    pub residuals: Vec<Residual>,
    /// Skip reason, or the error that stopped the check.
    pub reason: Option<String>,
    pub elapsed_ms: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.name == name).map(|r| r.value)
    }
}

/// Tolerance overrides: `"check.residual"`, then `"check"`, then the global
/// value, then the check's own default.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tolerances {
    pub global: Option<f64>,
    pub overrides: BTreeMap<String, f64>,
}

impl Tolerances {
    fn lookup(&self, check: &str, name: &str, default: f64) -> f64 {
        self.overrides
            .get(&format!("{check}.{name}"))
            .or_else(|| self.overrides.get(check))
            .copied()
            .or(self.global)
            .unwrap_or(default)
    }
}

enum Outcome {
    Measured(Vec<Residual>),
    Skip(String),
}

fn measured(items: &[(&'static str, f64, f64)]) -> Result<Outcome, String> {
    Ok(Outcome::Measured(items.iter().map(|&(name, value, tol)| Residual { name, value, tol }).collect()))
}

fn skip(reason: impl Into<String>) -> Result<Outcome, String> {
    Ok(Outcome::Skip(reason.into()))
}

type CheckFn = fn(&Scenario, &mut ChaCha8Rng) -> Result<Outcome, String>;

/// A registered check: an id and the function evaluating it.
pub struct Check {
    pub id: &'static str,
    pub about: &'static str,
    run: CheckFn,
}

impl std::fmt::Debug for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Check").field("id", &self.id).finish()
    }
}

static REGISTRY: &[Check] = &[
    Check { id: "eq4-split", about: "L = (L_plus + delta_minus) + abs_minus per graph", run: eq4_split },
    Check { id: "eq23-decomposition", about: "Phi = Phi_even - Phi_odd", run: eq23_decomposition },
    Check { id: "eq26-sum", about: "Phi_even + Phi_odd = Phi_abs", run: eq26_sum },
    Check { id: "eq27-bound", about: "|Phi| <= Phi_abs entrywise", run: eq27_bound },
    Check { id: "eq11-norm", about: "||Phi||_inf <= 1", run: eq11_norm },
    Check { id: "eq28-block-structure", about: "Psi = [[even, odd], [odd, even]]", run: eq28_blocks },
    Check { id: "lemma8-substochastic", about: "Phi_base nonnegative and substochastic", run: lemma8_substochastic },
    Check {
        id: "cor1-substochastic",
        about: "Phi_even and Phi_odd nonnegative and substochastic",
        run: cor1_substochastic,
    },
    Check { id: "stochastic-abs", about: "Phi_abs is stochastic", run: stochastic_abs },
    Check { id: "semigroup", about: "Phi(t2, t0) = Phi(t2, t1) Phi(t1, t0)", run: semigroup },
    Check { id: "gauge-identity", about: "Phi = D Phi_abs D under balance", run: gauge_identity },
    Check { id: "derivative", about: "coupled derivative identities of Phi_even and Phi_odd", run: derivative },
    Check { id: "series-oracle", about: "truncated series matches the lift", run: series_oracle },
    Check { id: "volterra", about: "Volterra identity with second-order quadrature", run: volterra },
    Check { id: "uniform-stability", about: "||x(t)||_inf <= ||x0||_inf", run: uniform_stability },
    Check {
        id: "gauge-covariance",
        about: "signed trajectory = D (unsigned trajectory of D x0)",
        run: gauge_covariance,
    },
    Check { id: "lemma1-block-unions", about: "every h-block union equals the total union", run: lemma1_blocks },
    Check { id: "lemma9-lifted-connectivity", about: "lifted schedule jointly strongly connected", run: lemma9_lifted },
    Check { id: "thm3-bipartite-consensus", about: "Phi -> (D 1)(nu^T D) exponentially", run: thm3 },
    Check { id: "thm6-stability", about: "Phi -> 0 exponentially", run: thm6 },
    Check { id: "eq14-limits", about: "even/odd limits under simultaneous balance", run: eq14_limits },
    Check { id: "eq15-limits", about: "even/odd limits without simultaneous balance", run: eq15_limits },
    Check { id: "thm5-classifier", about: "numeric verdict matches the graph-side verdict", run: thm5_classifier },
];

pub fn registry() -> &'static [Check] {
    REGISTRY
}

fn find(id: &str) -> Result<&'static Check, VerifyError> {
    REGISTRY.iter().find(|c| c.id == id).ok_or_else(|| VerifyError::UnknownCheck(id.to_string()))
}

fn check_rng(seed: u64, id: &str) -> ChaCha8Rng {
    // FNV-1a of the id keeps the per-check stream independent of registry order
    let salt = id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3));
    ChaCha8Rng::seed_from_u64(seed ^ salt)
}

/// Runs one registered check. Errors inside the check count as failures.
pub fn run_check(id: &str, scenario: &Scenario, tol: &Tolerances) -> Result<CheckResult, VerifyError> {
    let check = find(id)?;
    Ok(evaluate(check, scenario, tol))
}

pub(crate) fn evaluate(check: &Check, scenario: &Scenario, tol: &Tolerances) -> CheckResult {
    let start = Instant::now();
    let mut rng = check_rng(scenario.seed(), check.id);
    let outcome = (check.run)(scenario, &mut rng);
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let (status, residuals, reason) = match outcome {
        Ok(Outcome::Measured(mut rs)) => {
            for r in rs.iter_mut() {
                r.tol = tol.lookup(check.id, r.name, r.tol);
            }
            let status = if rs.iter().all(Residual::passes) { Status::Pass } else { Status::Fail };
            (status, rs, None)
        }
        Ok(Outcome::Skip(why)) => (Status::Skip, Vec::new(), Some(why)),
        Err(e) => (Status::Fail, Vec::new(), Some(e)),
    };
    CheckResult { check: check.id.to_string(), seed: scenario.seed(), status, residuals, reason, elapsed_ms }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn identity_end(s: &Scenario) -> f64 {
    s.signal.horizon().min(s.signal.t0() + IDENTITY_SPAN)
}

/// Spans `[a, b]` the bundle identities are measured on: the full identity
/// span plus two random subspans.
fn identity_spans(s: &Scenario, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let (t0, end) = (s.signal.t0(), identity_end(s));
    let mut spans = vec![(t0, end)];
    for _ in 0..2 {
        let a = rng.gen_range(t0..end);
        let b = rng.gen_range(a..=end);
        spans.push((a, b));
    }
    spans
}

fn max_over_spans(
    s: &Scenario,
    rng: &mut ChaCha8Rng,
    f: impl Fn(&crate::transition::TransitionBundle<f64>) -> f64,
) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for (a, b) in identity_spans(s, rng) {
        let bundle = lifted_transition(&s.signal, a, b).map_err(err)?;
        worst = worst.max(f(&bundle));
    }
    Ok(worst)
}

fn eq4_split(s: &Scenario, _: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let (mut split, mut direct) = (0.0f64, 0.0f64);
    for g in s.library().graphs() {
        let p = g.laplacian_parts();
        let adj = g.adjacency();
        let n = g.n();
        let deg: Vec<f64> = (0..n).map(|i| adj.row(i).iter().map(|a| a.abs()).sum()).collect();
        let independent = Matrix::from_fn(n, n, |i, j| if i == j { deg[i] } else { -adj[(i, j)] });
        split = split.max(p.laplacian.dist_inf(&(&p.base() + &p.abs_minus)));
        let scale = deg.iter().fold(1.0f64, |m, &d| m.max(d));
        direct = direct.max(p.laplacian.dist_inf(&independent) / scale);
    }
    measured(&[("split", split, 1e-14), ("direct_relative", direct, 1e-14)])
}

fn eq23_decomposition(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    measured(&[("decomposition", max_over_spans(s, rng, |b| b.residuals.decomposition)?, 1e-8)])
}

fn eq26_sum(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    measured(&[("sum", max_over_spans(s, rng, |b| b.residuals.sum)?, 1e-8)])
}

fn eq27_bound(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    measured(&[("bound_excess", max_over_spans(s, rng, |b| b.residuals.bound)?, 1e-10)])
}

fn eq11_norm(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    measured(&[("norm_excess", max_over_spans(s, rng, |b| b.residuals.norm)?, 1e-10)])
}

fn eq28_blocks(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    measured(&[("block_asymmetry", max_over_spans(s, rng, |b| b.residuals.block_symmetry)?, 1e-10)])
}

fn lemma8_substochastic(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let v = max_over_spans(s, rng, |b| crate::transition::substochastic_violation(&b.phi_base))?;
    measured(&[("violation", v, 1e-10)])
}

fn cor1_substochastic(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let v = max_over_spans(s, rng, |b| {
        crate::transition::substochastic_violation(&b.phi_even)
            .max(crate::transition::substochastic_violation(&b.phi_odd))
    })?;
    measured(&[("violation", v, 1e-10)])
}

fn stochastic_abs(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    measured(&[("defect", max_over_spans(s, rng, |b| b.stochastic_defect())?, 1e-10)])
}

fn semigroup(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let (t0, end) = (s.signal.t0(), identity_end(s));
    let t2 = rng.gen_range(t0..=end);
    let mut mids = vec![rng.gen_range(t0..=t2)];
    mids.extend(s.signal.switch_times().iter().copied().filter(|&t| t > t0 && t < t2).take(1));
    let full = transition_matrix(&s.signal, t0, t2).map_err(err)?;
    let mut worst = 0.0f64;
    for t1 in mids {
        let a = transition_matrix(&s.signal, t0, t1).map_err(err)?;
        let b = transition_matrix(&s.signal, t1, t2).map_err(err)?;
        worst = worst.max(full.dist_inf(&(&b * &a)));
    }
    measured(&[("semigroup", worst, 1e-9)])
}

fn gauge_identity(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let Some(d) = s.library().simultaneous_balance() else {
        return skip("library not simultaneously structurally balanced");
    };
    let mut worst = 0.0f64;
    for (a, b) in identity_spans(s, rng) {
        let phi = transition_matrix(&s.signal, a, b).map_err(err)?;
        let abs = unsigned_transition(&s.signal, a, b).map_err(err)?;
        worst = worst.max(phi.dist_inf(&d.conjugate(&abs)));
    }
    measured(&[("gauge", worst, 1e-9)])
}

const FD_STEP: f64 = 1e-5;

fn derivative(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let (t0, end) = (s.signal.t0(), identity_end(s));
    let usable: Vec<_> = s.signal.segments(t0, end).map_err(err)?.into_iter().filter(|iv| iv.len() > 1e-3).collect();
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let iv = usable[rng.gen_range(0..usable.len())];
        let margin = 1e-4;
        let t = rng.gen_range(iv.start + margin..iv.end - margin);
        worst = worst.max(derivative_residual(&s.signal, t0, t, FD_STEP).map_err(err)?);
    }
    measured(&[("derivative", worst, 1e-4)])
}

/// Largest row sum of `|A⁻|` over the library.
fn negative_degree(s: &Scenario) -> f64 {
    s.library().graphs().iter().map(|g| g.laplacian_parts().abs_minus.norm_inf()).fold(0.0, f64::max)
}

/// Largest diagonal entry of `L_{|A|}` over the library.
fn abs_degree(s: &Scenario) -> f64 {
    s.library()
        .graphs()
        .iter()
        .map(|g| g.laplacian_parts().abs_laplacian.diagonal().into_iter().fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn series_oracle(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    // the order-k term carries roughly the mass of k Poisson jumps at rate
    // equal to the negative in-degree, so the span keeps that rate times the
    // span at 1.5, where the tail past order 12 is below 1e-8
    let lambda = negative_degree(s);
    let span = (if lambda > 0.0 { 0.5f64.min(1.5 / lambda) } else { 0.5 }).min(s.signal.horizon() - s.signal.t0());
    let t0 = s.signal.t0() + rng.gen_range(0.0..=(identity_end(s) - s.signal.t0() - span).max(0.0));
    let t = t0 + span;
    let tr = peano_baker_truncated(&s.signal, t0, t, 12, 1e-3).map_err(err)?;
    let phi = transition_matrix(&s.signal, t0, t).map_err(err)?;
    let (_, even, odd) = even_odd(&s.signal, t0, t).map_err(err)?;
    let (pk, ek, ok) = tr.partial(12);
    measured(&[("phi", pk.dist_inf(&phi), 1e-6), ("even", ek.dist_inf(&even), 1e-6), ("odd", ok.dist_inf(&odd), 1e-6)])
}

fn volterra(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let kappa = abs_degree(s);
    let span = (if kappa > 0.0 { 1.0f64.min(2.0 / kappa) } else { 1.0 }).min(s.signal.horizon() - s.signal.t0());
    let t0 = s.signal.t0() + rng.gen_range(0.0..=(identity_end(s) - s.signal.t0() - span).max(0.0));
    let t = t0 + span;
    let fine = volterra_residual(&s.signal, t0, t, 1e-3).map_err(err)?;
    let coarse = volterra_residual(&s.signal, t0, t, 2e-3).map_err(err)?;
    // below the rounding floor there is no quadrature error left to order
    let order = if fine > 1e-13 { (coarse / fine).log2() } else { 2.0 };
    measured(&[("residual", fine, 1e-4), ("order_deficit", 1.9 - order, 0.0)])
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

fn uniform_stability(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let x0 = random_state(s.n(), rng);
    let tr = simulate(&s.signal, &x0, s.signal.t0(), identity_end(s), 0.05).map_err(err)?;
    measured(&[("norm_growth", tr.max_norm_growth(), 1e-9)])
}

fn gauge_covariance(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let Some(d) = s.library().simultaneous_balance() else {
        return skip("library not simultaneously structurally balanced");
    };
    let x0 = random_state(s.n(), rng);
    let (t0, end) = (s.signal.t0(), identity_end(s));
    let signed = simulate(&s.signal, &x0, t0, end, 0.05).map_err(err)?;
    let unsigned = simulate_flow(&s.signal, Flow::Unsigned, &d.apply(&x0), t0, end, 0.05).map_err(err)?;
    let worst = signed
        .states
        .iter()
        .zip(&unsigned.states)
        .map(|(a, b)| a.iter().zip(d.apply(b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    measured(&[("covariance", worst, 1e-9)])
}

fn lemma1_blocks(s: &Scenario, _: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let hyp = Hypotheses::assess(&s.signal);
    let (Some(h), true) = (hyp.block_len, hyp.recurrence_verified) else {
        return skip("recurrence of every graph not verified on record");
    };
    let total = s.library().union();
    let blocks = s.signal.block_unions(h).map_err(err)?;
    let mismatched = blocks.iter().filter(|u| u.support() != total.support()).count();
    measured(&[("mismatched_blocks", mismatched as f64, 0.5)])
}

fn lemma9_lifted(s: &Scenario, _: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let hyp = Hypotheses::assess(&s.signal);
    if let Some(reason) = hyp.failure() {
        return skip(reason);
    }
    if hyp.is_ssb() {
        return skip("library simultaneously structurally balanced");
    }
    let h = hyp.block_len.expect("recurrence verified");
    let supports = s.signal.lifted_block_supports(h).map_err(err)?;
    let total = supports.iter().fold(crate::graph::Support::empty(2 * s.n()), |mut acc, b| {
        acc.union_with(b);
        acc
    });
    let disconnected = supports.iter().filter(|b| !b.is_strongly_connected()).count();
    let whole = s.library().graphs().iter().fold(crate::graph::Support::empty(2 * s.n()), |mut acc, g| {
        acc.union_with(&LiftedGraph::new(g).support());
        acc
    });
    measured(&[
        ("disconnected_blocks", disconnected as f64, 0.5),
        ("support_mismatch", f64::from(u8::from(total != whole)), 0.5),
    ])
}

/// Convergence of one flow towards `limit`, sampled every quarter period
/// until the residual drops below [`FIT_FLOOR`].
struct Settled {
    fit: RateFit<f64>,
    /// Extrapolated time of [`SETTLE_TARGET`], capped at the horizon.
    t: f64,
}

fn settle(s: &Scenario, flow: Flow, limit: &Matrix<f64>) -> Result<Settled, String> {
    // whole periods first, where the decay is geometric; quarter periods
    // when that leaves too few points above the floor
    let mut pts = decay_samples(s, flow, limit, s.period)?;
    if pts.len() < MIN_FIT_POINTS {
        pts = decay_samples(s, flow, limit, s.period / 4.0)?;
    }
    let fit = fit_decay(&pts).map_err(err)?;
    let (t0, horizon) = (s.signal.t0(), s.signal.horizon());
    let t = if fit.rate > 0.0 { fit.time_to(SETTLE_TARGET).clamp(t0, horizon) } else { horizon };
    Ok(Settled { fit, t })
}

/// `(t, ||Phi(t, t0) - limit||)` every `step` until the distance drops
/// below the fit floor.
fn decay_samples(s: &Scenario, flow: Flow, limit: &Matrix<f64>, step: f64) -> Result<Vec<(f64, f64)>, String> {
    let (t0, horizon) = (s.signal.t0(), s.signal.horizon());
    let mut prop = Propagator::new(&s.signal, flow);
    let mut pts = Vec::new();
    let mut at = t0;
    let mut phi = Matrix::identity(prop.dim());
    for t in (1..).map(|k| t0 + step * k as f64).take_while(|&t| t <= horizon) {
        phi = &prop.transition(at, t).map_err(err)? * &phi;
        at = t;
        let r = phi.dist_inf(limit);
        if r < FIT_FLOOR {
            break;
        }
        pts.push((t, r));
    }
    Ok(pts)
}

/// The stationary vector read at the end of the record.
fn nu_on_record(s: &Scenario) -> Result<Vec<f64>, String> {
    stationary_vector(&s.signal, s.signal.t0(), s.signal.horizon(), 1e-9).map_err(err)
}

fn limit_of(gauge: Option<&Gauge>, nu: &[f64]) -> Matrix<f64> {
    let (even, odd) = predicted_even_odd(gauge, nu);
    &even - &odd
}

fn convergence(s: &Scenario, want_ssb: bool) -> Result<Outcome, String> {
    let hyp = Hypotheses::assess(&s.signal);
    if let Some(reason) = hyp.failure() {
        return skip(reason);
    }
    if hyp.is_ssb() != want_ssb {
        return skip(if want_ssb {
            "library not simultaneously structurally balanced"
        } else {
            "library simultaneously structurally balanced"
        });
    }
    let limit = if want_ssb { limit_of(hyp.gauge.as_ref(), &nu_on_record(s)?) } else { Matrix::zeros(s.n(), s.n()) };
    let settled = settle(s, Flow::Signed, &limit)?;
    let residual = transition_matrix(&s.signal, s.signal.t0(), settled.t).map_err(err)?.dist_inf(&limit);
    measured(&[
        ("limit_residual", residual, 1e-6),
        ("fit_unexplained", 1.0 - settled.fit.r2, 0.01),
        ("rate_nonpositive", if settled.fit.rate > 0.0 { 0.0 } else { 1.0 }, 0.5),
    ])
}

fn thm3(s: &Scenario, _: &mut ChaCha8Rng) -> Result<Outcome, String> {
    convergence(s, true)
}

fn thm6(s: &Scenario, _: &mut ChaCha8Rng) -> Result<Outcome, String> {
    convergence(s, false)
}

fn even_odd_limits(s: &Scenario, want_ssb: bool) -> Result<Outcome, String> {
    let hyp = Hypotheses::assess(&s.signal);
    if let Some(reason) = hyp.failure() {
        return skip(reason);
    }
    if hyp.is_ssb() != want_ssb {
        return skip(if want_ssb {
            "library not simultaneously structurally balanced"
        } else {
            "library simultaneously structurally balanced"
        });
    }
    let nu = nu_on_record(s)?;
    let (even_lim, odd_lim) = predicted_even_odd(hyp.gauge.as_ref(), &nu);
    let ones = vec![1.0; s.n()];
    let t_phi = settle(s, Flow::Signed, &(&even_lim - &odd_lim))?.t;
    let t_abs = settle(s, Flow::Unsigned, &Matrix::outer(&ones, &nu))?.t;
    let t = t_phi.max(t_abs);
    let (_, even, odd) = even_odd(&s.signal, s.signal.t0(), t).map_err(err)?;
    measured(&[("even", even.dist_inf(&even_lim), 1e-5), ("odd", odd.dist_inf(&odd_lim), 1e-5)])
}

fn eq14_limits(s: &Scenario, _: &mut ChaCha8Rng) -> Result<Outcome, String> {
    even_odd_limits(s, true)
}

fn eq15_limits(s: &Scenario, _: &mut ChaCha8Rng) -> Result<Outcome, String> {
    even_odd_limits(s, false)
}

fn thm5_classifier(s: &Scenario, _: &mut ChaCha8Rng) -> Result<Outcome, String> {
    let hyp = Hypotheses::assess(&s.signal);
    if let Some(reason) = hyp.failure() {
        return skip(reason);
    }
    let r = classify(&s.signal, s.signal.t0(), None, 1e-6, 1e-6, None).map_err(err)?;
    let truth = if hyp.is_ssb() { Verdict::BipartiteConsensus } else { Verdict::Stable };
    measured(&[
        ("disagreement", f64::from(u8::from(r.numeric_verdict != truth)), 0.5),
        ("flagged_inconsistency", f64::from(u8::from(r.inconsistency.is_some())), 0.5),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{generate_scenario, ScenarioSpec, SignPolicy};

    fn scenario(signs: SignPolicy, seed: u64) -> Scenario {
        generate_scenario(&ScenarioSpec { seed, signs, ..ScenarioSpec::default() }).unwrap()
    }

    #[test]
    fn ids_are_unique() {
        let mut ids: Vec<_> = registry().iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), registry().len());
    }

    #[test]
    fn unknown_check_rejected() {
        let s = scenario(SignPolicy::Free, 0);
        assert!(matches!(run_check("no-such-check", &s, &Tolerances::default()), Err(VerifyError::UnknownCheck(_))));
    }

    #[test]
    fn identities_pass_on_random_scenario() {
        let s = scenario(SignPolicy::Free, 11);
        for id in ["eq23-decomposition", "eq26-sum", "eq27-bound", "eq11-norm", "semigroup", "eq4-split"] {
            let r = run_check(id, &s, &Tolerances::default()).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn hypothesis_mismatch_skips_with_reason() {
        let s = scenario(SignPolicy::BalancedForced, 2);
        let r = run_check("thm6-stability", &s, &Tolerances::default()).unwrap();
        assert_eq!(r.status, Status::Skip);
        assert_eq!(r.reason.as_deref(), Some("library simultaneously structurally balanced"));
        let r =
            run_check("gauge-identity", &scenario(SignPolicy::UnbalancedForced, 2), &Tolerances::default()).unwrap();
        assert_eq!(r.status, Status::Skip);
    }

    #[test]
    fn zero_tolerance_forces_failure() {
        let s = scenario(SignPolicy::UnbalancedForced, 5);
        let tol = Tolerances { global: None, overrides: [("eq23-decomposition".to_string(), 0.0)].into() };
        let r = run_check("eq23-decomposition", &s, &tol).unwrap();
        assert_eq!(r.status, Status::Fail);
        assert!(run_check("eq26-sum", &s, &tol).unwrap().passed());
    }

    #[test]
    fn nonnegative_scenario_has_exact_bound() {
        let spec = ScenarioSpec { seed: 3, negative_prob: 0.0, ..ScenarioSpec::default() };
        let s = generate_scenario(&spec).unwrap();
        let r = run_check("eq27-bound", &s, &Tolerances::default()).unwrap();
        assert_eq!(r.residual("bound_excess"), Some(0.0));
    }

    #[test]
    fn reruns_are_identical() {
        let s = scenario(SignPolicy::Free, 9);
        for check in registry() {
            let a = evaluate(check, &s, &Tolerances::default());
            let b = evaluate(check, &s, &Tolerances::default());
            assert_eq!((a.status, &a.residuals, &a.reason), (b.status, &b.residuals, &b.reason), "{}", check.id);
        }
    }
}
