//! Switching signals over a finite library of signed digraphs.
//!
//! A recorded signal covers `[t0, horizon]`. The active graph is constant on
//! each dwell interval `[t_k, t_{k+1})` (right-continuous at switch instants)
//! and consecutive switches are at least `tau_min` apart. Every verdict about
//! recurrence or joint connectivity is "on record": it concerns the recorded
//! span only.
//!
//! Schedule entries name library graphs with 1-based labels, the same
//! convention node indices use in edge lists. Query results such as
//! [`SwitchingSignal::graph_index_at`] return 0-based indices into the
//! library.

mod lift;

pub use lift::LiftedGraph;

use thiserror::Error;

use crate::graph::{union_graphs, Gauge, SignedDigraph, Support, UnionGraph};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("graph library is empty")]
    EmptyLibrary,
    #[error("library graph {index} has {found} nodes, expected {expected}")]
    NodeCountMismatch { index: usize, expected: usize, found: usize },
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("schedule must start at t0 = {t0}, first switch is at {first}")]
    StartMismatch { t0: f64, first: f64 },
    #[error("switch times must be strictly increasing (entry {k})")]
    NotIncreasing { k: usize },
    #[error("dwell violation on interval {k}: {gap} < tau_min = {tau}")]
    DwellViolation { k: usize, gap: f64, tau: f64 },
    #[error("schedule entry {k} names graph {label}, library has {len} graphs (labels are 1-based)")]
    IndexOutOfRange { k: usize, label: usize, len: usize },
    #[error("tau_min must be positive and finite, got {0}")]
    InvalidDwell(f64),
    #[error("horizon {horizon} must exceed the last switch time {last}")]
    HorizonTooShort { horizon: f64, last: f64 },
    #[error("non-finite time in schedule")]
    NonFinite,
    #[error("periodic pattern must be nonempty with positive dwells and at least one repeat")]
    InvalidPattern,
    #[error("time {t} is outside the recorded span [{t0}, {horizon}]")]
    OutOfRecord { t: f64, t0: f64, horizon: f64 },
    #[error("window length must be positive, got {0}")]
    InvalidWindow(f64),
    #[error("window length {window} exceeds the recorded span {span}")]
    WindowTooLong { window: f64, span: f64 },
    #[error("block length must be at least 1")]
    InvalidBlock,
}

/// Ordered family of signed digraphs over the same node set.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphLibrary<T> {
    graphs: Vec<SignedDigraph<T>>,
}

impl<T: Scalar> GraphLibrary<T> {
    pub fn new(graphs: Vec<SignedDigraph<T>>) -> Result<Self, SignalError> {
        let first = graphs.first().ok_or(SignalError::EmptyLibrary)?;
        let n = first.n();
        if let Some((index, g)) = graphs.iter().enumerate().find(|(_, g)| g.n() != n) {
            return Err(SignalError::NodeCountMismatch { index, expected: n, found: g.n() });
        }
        Ok(Self { graphs })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.graphs[0].n()
    }

    pub fn get(&self, index: usize) -> &SignedDigraph<T> {
        &self.graphs[index]
    }

    pub fn graphs(&self) -> &[SignedDigraph<T>] {
        &self.graphs
    }

    /// Union of every library graph.
    pub fn union(&self) -> UnionGraph {
        union_graphs(&self.graphs).expect("library is nonempty with consistent n")
    }

    /// Simultaneous structural balance: one constant gauge `D` with
    /// `D A_p D = |A_p|` for every member `p`.
    pub fn simultaneous_balance(&self) -> Option<Gauge> {
        self.union().gauge()
    }
}

/// Switching schedule as given by the user; graph labels are 1-based.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule<T> {
    /// `(t_k, label)` entries; the first time must equal `t0`.
    Explicit(Vec<(T, usize)>),
    /// `(dwell, label)` pattern repeated `repeats` times from `t0`.
    Periodic { pattern: Vec<(T, usize)>, repeats: usize },
}

impl<T: Scalar> Schedule<T> {
    /// Explicit `(t_k, label)` list. Periodic entries starting at or after
    /// `horizon` are dropped.
    pub fn expand(&self, t0: T, horizon: T) -> Result<Vec<(T, usize)>, SignalError> {
        match self {
            Schedule::Explicit(entries) => Ok(entries.clone()),
            Schedule::Periodic { pattern, repeats } => {
                if pattern.is_empty() || *repeats == 0 || pattern.iter().any(|&(d, _)| !(d > T::zero())) {
                    return Err(SignalError::InvalidPattern);
                }
                let period: T = pattern.iter().map(|&(d, _)| d).sum();
                let mut out = Vec::with_capacity(pattern.len() * repeats);
                'outer: for r in 0..*repeats {
                    // anchor every period separately to keep rounding drift bounded
                    let mut t = t0 + period * T::from_usize(r).unwrap();
                    for &(dwell, label) in pattern {
                        if !out.is_empty() && t >= horizon {
                            break 'outer;
                        }
                        out.push((t, label));
                        t += dwell;
                    }
                }
                Ok(out)
            }
        }
    }
}

/// One dwell interval `[start, end)` with its 0-based library index. The
/// last interval ends at the horizon and includes it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<T> {
    pub start: T,
    pub end: T,
    pub graph: usize,
}

impl<T: Scalar> Interval<T> {
    pub fn len(&self) -> T {
        self.end - self.start
    }
}

/// A validated piecewise-constant switching signal on `[t0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingSignal<T> {
    library: GraphLibrary<T>,
    switch_times: Vec<T>,
    indices: Vec<usize>,
    tau_min: T,
    horizon: T,
}

fn f<T: Scalar>(x: T) -> f64 {
    x.to_f64_lossy()
}

impl<T: Scalar> SwitchingSignal<T> {
    pub fn new(
        library: GraphLibrary<T>,
        schedule: &Schedule<T>,
        t0: T,
        tau_min: T,
        horizon: T,
    ) -> Result<Self, SignalError> {
        if !(tau_min > T::zero()) || !tau_min.is_finite() {
            return Err(SignalError::InvalidDwell(f(tau_min)));
        }
        if !t0.is_finite() || !horizon.is_finite() {
            return Err(SignalError::NonFinite);
        }
        let entries = schedule.expand(t0, horizon)?;
        let (first, _) = *entries.first().ok_or(SignalError::EmptySchedule)?;
        if entries.iter().any(|(t, _)| !t.is_finite()) {
            return Err(SignalError::NonFinite);
        }
        if first != t0 {
            return Err(SignalError::StartMismatch { t0: f(t0), first: f(first) });
        }
        for (k, w) in entries.windows(2).enumerate() {
            let gap = w[1].0 - w[0].0;
            if !(gap > T::zero()) {
                return Err(SignalError::NotIncreasing { k: k + 1 });
            }
            // periodic expansion accumulates dwells; forgive rounding at the last few ulps
            let slack = T::epsilon() * T::lit(64.0) * w[1].0.abs().max(T::one());
            if gap < tau_min - slack {
                return Err(SignalError::DwellViolation { k, gap: f(gap), tau: f(tau_min) });
            }
        }
        let mut indices = Vec::with_capacity(entries.len());
        for (k, &(_, label)) in entries.iter().enumerate() {
            if label == 0 || label > library.len() {
                return Err(SignalError::IndexOutOfRange { k, label, len: library.len() });
            }
            indices.push(label - 1);
        }
        let last = entries.last().unwrap().0;
        if !(horizon > last) {
            return Err(SignalError::HorizonTooShort { horizon: f(horizon), last: f(last) });
        }
        Ok(Self { library, switch_times: entries.iter().map(|&(t, _)| t).collect(), indices, tau_min, horizon })
    }

    /// A single graph active on the whole record.
    pub fn fixed(graph: SignedDigraph<T>, t0: T, horizon: T) -> Result<Self, SignalError> {
        let span = horizon - t0;
        let tau = if span > T::zero() { span } else { T::one() };
        Self::new(GraphLibrary::new(vec![graph])?, &Schedule::Explicit(vec![(t0, 1)]), t0, tau, horizon)
    }

    pub fn library(&self) -> &GraphLibrary<T> {
        &self.library
    }

    pub fn n(&self) -> usize {
        self.library.n()
    }

    pub fn t0(&self) -> T {
        self.switch_times[0]
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn tau_min(&self) -> T {
        self.tau_min
    }

    pub fn switch_times(&self) -> &[T] {
        &self.switch_times
    }

    /// 0-based library index of every dwell interval.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn interval_count(&self) -> usize {
        self.indices.len()
    }

    pub fn interval(&self, k: usize) -> Interval<T> {
        let end = self.switch_times.get(k + 1).copied().unwrap_or(self.horizon);
        Interval { start: self.switch_times[k], end, graph: self.indices[k] }
    }

    pub fn intervals(&self) -> impl Iterator<Item = Interval<T>> + '_ {
        (0..self.interval_count()).map(move |k| self.interval(k))
    }

    /// Schedule entries with 1-based labels, as accepted by [`Self::new`].
    pub fn explicit_schedule(&self) -> Vec<(T, usize)> {
        self.switch_times.iter().zip(&self.indices).map(|(&t, &i)| (t, i + 1)).collect()
    }

    pub fn check_time(&self, t: T) -> Result<(), SignalError> {
        if t >= self.t0() && t <= self.horizon {
            Ok(())
        } else {
            Err(SignalError::OutOfRecord { t: f(t), t0: f(self.t0()), horizon: f(self.horizon) })
        }
    }

    /// Interval containing `t`; switch instants belong to the interval they
    /// open.
    pub fn interval_index_at(&self, t: T) -> Result<usize, SignalError> {
        self.check_time(t)?;
        Ok(self.switch_times.partition_point(|&s| s <= t) - 1)
    }

    pub fn graph_index_at(&self, t: T) -> Result<usize, SignalError> {
        Ok(self.indices[self.interval_index_at(t)?])
    }

    pub fn graph_at(&self, t: T) -> Result<&SignedDigraph<T>, SignalError> {
        Ok(self.library.get(self.graph_index_at(t)?))
    }

    /// Dwell intervals clipped to `[a, b]`, dropping empty pieces.
    pub fn segments(&self, a: T, b: T) -> Result<Vec<Interval<T>>, SignalError> {
        self.check_time(a)?;
        self.check_time(b)?;
        let mut out = Vec::new();
        if b <= a {
            return Ok(out);
        }
        for k in self.interval_index_at(a)?..self.interval_count() {
            let iv = self.interval(k);
            if iv.start >= b {
                break;
            }
            let start = iv.start.max(a);
            let end = iv.end.min(b);
            if end > start {
                out.push(Interval { start, end, graph: iv.graph });
            }
        }
        Ok(out)
    }

    /// Library graphs active somewhere in the closed window `[a, a + window]`.
    fn seen_in_window(&self, a: T, window: T) -> Vec<bool> {
        let mut seen = vec![false; self.library.len()];
        let b = a + window;
        let first = self.switch_times.partition_point(|&s| s <= a).saturating_sub(1);
        for k in first..self.interval_count() {
            let iv = self.interval(k);
            if iv.start > b {
                break;
            }
            if iv.end > a {
                seen[iv.graph] = true;
            }
        }
        seen
    }

    /// Recurrence on record: every library graph is active somewhere in
    /// every closed window `[s, s + window]` inside `[t0, horizon]`.
    ///
    /// The set of graphs seen by a sliding window only shrinks when the
    /// window start passes a switch instant, so anchoring at `t0`, at every
    /// switch instant and at `horizon - window` is exhaustive.
    pub fn check_recurrence(&self, window: T) -> Result<bool, SignalError> {
        if !(window > T::zero()) {
            return Err(SignalError::InvalidWindow(f(window)));
        }
        let span = self.horizon - self.t0();
        if window > span {
            return Err(SignalError::WindowTooLong { window: f(window), span: f(span) });
        }
        let last_anchor = self.horizon - window;
        let anchors =
            self.switch_times.iter().copied().filter(|&a| a <= last_anchor).chain(std::iter::once(last_anchor));
        for a in anchors {
            if self.seen_in_window(a, window).iter().any(|&s| !s) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Smallest window (to relative precision ~1e-9 of the span) for which
    /// [`Self::check_recurrence`] holds, or `None` if some graph never
    /// recurs on record.
    pub fn minimal_recurrence_window(&self) -> Option<T> {
        let span = self.horizon - self.t0();
        if !self.check_recurrence(span).unwrap_or(false) {
            return None;
        }
        let (mut lo, mut hi) = (T::zero(), span);
        let two = T::lit(2.0);
        for _ in 0..40 {
            let mid = (lo + hi) / two;
            if !(mid > T::zero()) {
                break;
            }
            if self.check_recurrence(mid).unwrap_or(false) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Consecutive blocks of `h` dwell intervals, as index ranges. A
    /// trailing incomplete block is dropped unless it is the only block.
    #[allow(clippy::single_range_in_vec_init)]
    pub fn blocks(&self, h: usize) -> Result<Vec<std::ops::Range<usize>>, SignalError> {
        if h == 0 {
            return Err(SignalError::InvalidBlock);
        }
        let k = self.interval_count();
        if k < h {
            return Ok(vec![0..k]);
        }
        Ok((0..k / h).map(|j| j * h..(j + 1) * h).collect())
    }

    /// Union graph of every block of `h` consecutive dwell intervals.
    pub fn block_unions(&self, h: usize) -> Result<Vec<UnionGraph>, SignalError> {
        Ok(self
            .blocks(h)?
            .into_iter()
            .map(|r| union_graphs(r.map(|k| self.library.get(self.indices[k]))).expect("nonempty block"))
            .collect())
    }

    /// Joint strong connectivity on record with blocks of `h` intervals.
    pub fn jointly_strongly_connected(&self, h: usize) -> Result<bool, SignalError> {
        Ok(self.block_unions(h)?.iter().all(UnionGraph::is_strongly_connected))
    }

    /// Union supports of the lifted graphs over blocks of `h` intervals.
    pub fn lifted_block_supports(&self, h: usize) -> Result<Vec<Support>, SignalError> {
        let lifted: Vec<Support> = self.library.graphs().iter().map(|g| LiftedGraph::new(g).support()).collect();
        Ok(self
            .blocks(h)?
            .into_iter()
            .map(|r| {
                let mut s = Support::empty(2 * self.n());
                for k in r {
                    s.union_with(&lifted[self.indices[k]]);
                }
                s
            })
            .collect())
    }

    /// Joint strong connectivity of the lifted `2n`-node signal.
    pub fn lifted_jointly_strongly_connected(&self, h: usize) -> Result<bool, SignalError> {
        Ok(self.lifted_block_supports(h)?.iter().all(Support::is_strongly_connected))
    }
}

/// Block length `int[window / tau] + 1` guaranteeing that `h` consecutive
/// dwell intervals cover more than `window`.
pub fn default_block_len<T: Scalar>(window: T, tau_min: T) -> usize {
    (window / tau_min).floor().to_usize().unwrap_or(0) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;

    type G = SignedDigraph<f64>;

    fn fwd() -> G {
        G::from_adjacency(Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]])).unwrap()
    }

    fn back() -> G {
        G::from_adjacency(Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]])).unwrap()
    }

    fn alternating(periods: usize) -> SwitchingSignal<f64> {
        let lib = GraphLibrary::new(vec![fwd(), back()]).unwrap();
        let sched = Schedule::Periodic { pattern: vec![(1.0, 1), (1.0, 2)], repeats: periods };
        SwitchingSignal::new(lib, &sched, 0.0, 1.0, 2.0 * periods as f64).unwrap()
    }

    #[test]
    fn build_examples() {
        let lib = GraphLibrary::new(vec![fwd(), back()]).unwrap();
        let s =
            SwitchingSignal::new(lib.clone(), &Schedule::Explicit(vec![(0.0, 1), (1.0, 2)]), 0.0, 1.0, 2.0).unwrap();
        assert_eq!(s.indices(), &[0, 1]);

        let err =
            SwitchingSignal::new(lib.clone(), &Schedule::Explicit(vec![(0.0, 1), (0.5, 2), (1.0, 1)]), 0.0, 1.0, 2.0);
        assert_eq!(err, Err(SignalError::DwellViolation { k: 0, gap: 0.5, tau: 1.0 }));

        let err = SwitchingSignal::new(lib.clone(), &Schedule::Explicit(vec![(0.0, 3)]), 0.0, 1.0, 2.0);
        assert_eq!(err, Err(SignalError::IndexOutOfRange { k: 0, label: 3, len: 2 }));

        let fixed = SwitchingSignal::new(lib, &Schedule::Explicit(vec![(0.0, 1)]), 0.0, 1.0, 10.0).unwrap();
        assert_eq!(fixed.interval_count(), 1);
        assert_eq!(fixed.interval(0).end, 10.0);
    }

    #[test]
    fn build_rejects_bad_input() {
        let lib = GraphLibrary::new(vec![fwd()]).unwrap();
        let explicit = |v: Vec<(f64, usize)>| Schedule::Explicit(v);
        assert_eq!(
            SwitchingSignal::new(lib.clone(), &explicit(vec![]), 0.0, 1.0, 1.0),
            Err(SignalError::EmptySchedule)
        );
        assert!(matches!(
            SwitchingSignal::new(lib.clone(), &explicit(vec![(1.0, 1)]), 0.0, 1.0, 3.0),
            Err(SignalError::StartMismatch { .. })
        ));
        assert!(matches!(
            SwitchingSignal::new(lib.clone(), &explicit(vec![(0.0, 1), (0.0, 1)]), 0.0, 1.0, 3.0),
            Err(SignalError::NotIncreasing { k: 1 })
        ));
        assert!(matches!(
            SwitchingSignal::new(lib.clone(), &explicit(vec![(0.0, 1)]), 0.0, 0.0, 3.0),
            Err(SignalError::InvalidDwell(_))
        ));
        assert!(matches!(
            SwitchingSignal::new(lib.clone(), &explicit(vec![(0.0, 1), (2.0, 1)]), 0.0, 1.0, 2.0),
            Err(SignalError::HorizonTooShort { .. })
        ));
        assert_eq!(
            GraphLibrary::new(vec![fwd(), G::empty(3).unwrap()]),
            Err(SignalError::NodeCountMismatch { index: 1, expected: 2, found: 3 })
        );
        assert_eq!(GraphLibrary::<f64>::new(vec![]), Err(SignalError::EmptyLibrary));
    }

    #[test]
    fn periodic_expansion() {
        let s = alternating(3);
        assert_eq!(s.switch_times(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.indices(), &[0, 1, 0, 1, 0, 1]);
        // horizon cuts the expansion short
        let lib = GraphLibrary::new(vec![fwd(), back()]).unwrap();
        let sched = Schedule::Periodic { pattern: vec![(1.0, 1), (1.0, 2)], repeats: 10 };
        let s = SwitchingSignal::new(lib, &sched, 0.0, 1.0, 2.5).unwrap();
        assert_eq!(s.switch_times(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn graph_at_is_right_continuous() {
        let s = alternating(2);
        assert_eq!(s.graph_index_at(1.0).unwrap(), 1);
        assert_eq!(s.graph_index_at(0.5).unwrap(), 0);
        assert_eq!(s.graph_index_at(4.0).unwrap(), 1);
        assert!(matches!(s.graph_at(4.5), Err(SignalError::OutOfRecord { .. })));
        let fixed = SwitchingSignal::fixed(fwd(), 0.0, 10.0).unwrap();
        assert_eq!(fixed.graph_at(7.3).unwrap(), &fwd());
    }

    #[test]
    fn recurrence_examples() {
        let s = alternating(5);
        assert!(s.check_recurrence(2.0).unwrap());
        assert!(!s.check_recurrence(0.5).unwrap());
        assert!(matches!(s.check_recurrence(11.0), Err(SignalError::WindowTooLong { .. })));
        assert!(matches!(s.check_recurrence(0.0), Err(SignalError::InvalidWindow(_))));
        let fixed = SwitchingSignal::fixed(fwd(), 0.0, 10.0).unwrap();
        assert!(fixed.check_recurrence(0.01).unwrap());
        assert!(fixed.check_recurrence(10.0).unwrap());
        let w = s.minimal_recurrence_window().unwrap();
        assert!((w - 1.0).abs() < 1e-9, "{w}");
    }

    #[test]
    fn recurrence_fails_when_graph_stops() {
        let lib = GraphLibrary::new(vec![fwd(), back()]).unwrap();
        let s = SwitchingSignal::new(lib, &Schedule::Explicit(vec![(0.0, 1), (1.0, 2)]), 0.0, 1.0, 10.0).unwrap();
        assert!(!s.check_recurrence(3.0).unwrap());
        assert!(s.check_recurrence(10.0).unwrap());
    }

    #[test]
    fn ssb_examples() {
        let a = G::from_adjacency(Matrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]])).unwrap();
        let b = G::from_adjacency(Matrix::from_rows(&[[0.0, -2.0], [0.0, 0.0]])).unwrap();
        let lib = GraphLibrary::new(vec![a.clone(), b]).unwrap();
        assert_eq!(lib.simultaneous_balance(), Some(Gauge::new(vec![1, -1])));

        let p = G::from_adjacency(Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        assert_eq!(GraphLibrary::new(vec![p, a.clone()]).unwrap().simultaneous_balance(), None);

        let single = GraphLibrary::new(vec![a.clone()]).unwrap();
        assert_eq!(single.simultaneous_balance(), a.structural_balance());
    }

    #[test]
    fn joint_connectivity_examples() {
        let s = alternating(3);
        assert!(s.jointly_strongly_connected(2).unwrap());
        assert!(!s.jointly_strongly_connected(1).unwrap());
        assert_eq!(s.jointly_strongly_connected(0), Err(SignalError::InvalidBlock));
        let digon = G::from_adjacency(Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]])).unwrap();
        let fixed = SwitchingSignal::fixed(digon, 0.0, 5.0).unwrap();
        assert!(fixed.jointly_strongly_connected(1).unwrap());
    }

    #[test]
    fn default_block_len_matches_floor_plus_one() {
        assert_eq!(default_block_len(2.0, 1.0), 3);
        assert_eq!(default_block_len(2.5, 1.0), 3);
        assert_eq!(default_block_len(0.5, 1.0), 1);
    }
}
