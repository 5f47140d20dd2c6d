//! Opinion trajectories, limits and asymptotic classification.

mod classify;

pub use classify::{
    classify, default_t_long, estimate_rate, fit_decay, predicted_even_odd, predicted_limit, stationary_vector,
    ConvergenceReport, RateFit, Verdict,
};

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::Gauge;
use crate::switching::{default_block_len, SignalError, SwitchingSignal};
use crate::transition::{expm, Flow, TransitionError};
use crate::{Matrix, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("initial state has length {found}, graph has {expected} nodes")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sample step must be positive and finite, got {0}")]
    InvalidSampleStep(f64),
    #[error("rows of the unsigned transition matrix still differ by {spread:e}")]
    NotConverged { spread: f64 },
    #[error("rate fit needs at least 3 samples above the rounding floor, got {usable}")]
    TooFewSamples { usable: usize },
    #[error("hypotheses not met: {0}")]
    HypothesesUnmet(&'static str),
}

/// Sampled solution of `x' = -L(t) x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub x0: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[T] {
        self.states.last().map_or(&self.x0, |s| s)
    }

    /// Largest `||x(t)||_inf - ||x0||_inf` over the samples.
    pub fn max_norm_growth(&self) -> T {
        let x0 = inf_norm(&self.x0);
        self.states.iter().map(|s| inf_norm(s) - x0).fold(T::neg_infinity(), T::max)
    }

    /// CSV with header `t,x1..xn`, every number at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.x0.len() {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t:.16e}");
            for v in x {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn inf_norm<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Sample instants `t0, t0 + dt, ..., tf` (with `tf` always present) merged
/// with every switch instant strictly inside `(t0, tf)`.
pub fn sample_times<T: Scalar>(s: &SwitchingSignal<T>, t0: T, tf: T, dt: T) -> Result<Vec<T>, DynamicsError> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(DynamicsError::InvalidSampleStep(dt.to_f64_lossy()));
    }
    s.check_time(t0)?;
    s.check_time(tf)?;
    if tf < t0 {
        return Err(TransitionError::Reversed { t0: t0.to_f64_lossy(), t: tf.to_f64_lossy() }.into());
    }
    let mut times: Vec<T> = (0..)
        .map(|k| t0 + dt * T::from_usize(k).unwrap())
        .take_while(|&t| t < tf)
        .chain(std::iter::once(tf))
        .chain(s.switch_times().iter().copied().filter(|&t| t > t0 && t < tf))
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    Ok(times)
}

/// `x(t) = Phi(t, t0) x0` on the sample grid of [`sample_times`], propagated
/// one sample at a time with cached interval exponentials.
pub fn simulate<T: Scalar>(
    s: &SwitchingSignal<T>,
    x0: &[T],
    t0: T,
    tf: T,
    sample_dt: T,
) -> Result<Trajectory<T>, DynamicsError> {
    simulate_flow(s, Flow::Signed, x0, t0, tf, sample_dt)
}

/// Same as [`simulate`] for any of the `n`-dimensional flows.
pub fn simulate_flow<T: Scalar>(
    s: &SwitchingSignal<T>,
    flow: Flow,
    x0: &[T],
    t0: T,
    tf: T,
    sample_dt: T,
) -> Result<Trajectory<T>, DynamicsError> {
    let n = flow.dim(s.n());
    if x0.len() != n {
        return Err(DynamicsError::DimensionMismatch { expected: n, found: x0.len() });
    }
    let times = sample_times(s, t0, tf, sample_dt)?;
    let generators: Vec<Matrix<T>> = s.library().graphs().iter().map(|g| flow.state_matrix(g)).collect();
    let mut cache: HashMap<(usize, u64), Matrix<T>> = HashMap::new();
    let mut states = Vec::with_capacity(times.len());
    let mut x = x0.to_vec();
    let mut at = t0;
    for &t in &times {
        for seg in s.segments(at, t)? {
            let dt = seg.len();
            let key = (seg.graph, dt.to_f64_lossy().to_bits());
            let e = match cache.entry(key) {
                Entry::Occupied(o) => o.into_mut(),
                Entry::Vacant(v) => v.insert(expm(&generators[seg.graph].scale(dt)).map_err(TransitionError::from)?),
            };
            x = e.mul_vec(&x);
        }
        states.push(x.clone());
        at = t;
    }
    Ok(Trajectory { times, states, x0: x0.to_vec() })
}

/// Graph-side hypotheses of the convergence results, evaluated on record.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypotheses<T> {
    /// The union of all library graphs is strongly connected.
    pub union_strongly_connected: bool,
    /// Smallest recurrence window on record, if every graph recurs.
    pub recurrence_window: Option<T>,
    /// A recurrence window exists and fits at least twice into the record.
    pub recurrence_verified: bool,
    /// Common gauge of the whole library; `None` when the library is not
    /// simultaneously balanced.
    pub gauge: Option<Gauge>,
    /// Lemma-style block length `floor(T / tau) + 1` for the recurrence window.
    pub block_len: Option<usize>,
}

impl<T: Scalar> Hypotheses<T> {
    pub fn assess(s: &SwitchingSignal<T>) -> Self {
        let union_strongly_connected = s.library().union().is_strongly_connected();
        let recurrence_window = s.minimal_recurrence_window();
        let span = s.horizon() - s.t0();
        let recurrence_verified = recurrence_window.is_some_and(|w| w + w <= span);
        let block_len = recurrence_window.map(|w| default_block_len(w, s.tau_min()));
        Self {
            union_strongly_connected,
            recurrence_window,
            recurrence_verified,
            gauge: s.library().simultaneous_balance(),
            block_len,
        }
    }

    pub fn satisfied(&self) -> bool {
        self.failure().is_none()
    }

    /// First failed hypothesis, as a human-readable reason.
    pub fn failure(&self) -> Option<&'static str> {
        if !self.union_strongly_connected {
            Some("union not strongly connected")
        } else if !self.recurrence_verified {
            Some("recurrence of every graph not verified on record")
        } else {
            None
        }
    }

    pub fn is_ssb(&self) -> bool {
        self.gauge.is_some()
    }

    /// Verdict predicted from the graphs alone.
    pub fn verdict(&self) -> Verdict {
        match (self.satisfied(), self.is_ssb()) {
            (false, _) => Verdict::Undetermined,
            (true, true) => Verdict::BipartiteConsensus,
            (true, false) => Verdict::Stable,
        }
    }
}
