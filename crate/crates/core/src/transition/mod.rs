//! State transition matrices of the signed Laplacian flow `x' = -L(t) x`.
//!
//! Topologies are piecewise constant, so every transition matrix is an
//! ordered product of matrix exponentials, one per dwell interval, latest
//! interval on the left. Four flows share that machinery:
//!
//! * [`Flow::Signed`]: `-L(t)`, giving `Phi(t, t0)`;
//! * [`Flow::Unsigned`]: `-L_{|A(t)|}`, the stochastic flow of the unsigned graph;
//! * [`Flow::Base`]: `-(L_{A⁺(t)} + Δ_{|A⁻(t)|})`, the substochastic cooperative part;
//! * [`Flow::Lifted`]: the `2n`-node flow whose transition matrix is
//!   `Psi = [[Phi_even, Phi_odd], [Phi_odd, Phi_even]]`.
//!
//! `Phi_even` and `Phi_odd` are read off the lifted blocks. The nested-integral
//! series for the same quantities lives in [`series`] and serves as an
//! independent check.

mod expm;
pub mod series;

pub use expm::{expm, ExpmError};
pub use series::{peano_baker_truncated, volterra_residual, SeriesTruncation};

use std::collections::HashMap;

use thiserror::Error;

use crate::graph::SignedDigraph;
use crate::switching::{LiftedGraph, SignalError, SwitchingSignal};
use crate::{Matrix, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error(transparent)]
    Expm(#[from] ExpmError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("final time {t} precedes initial time {t0}")]
    Reversed { t0: f64, t: f64 },
    #[error("lifted transition matrix lost its block structure (asymmetry {0:e})")]
    BlockAsymmetry(f64),
    #[error("step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("finite-difference stencil around t = {0} crosses a switch instant or the record boundary")]
    StencilCrossesSwitch(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flow {
    Signed,
    Unsigned,
    Base,
    Lifted,
}

impl Flow {
    /// The state matrix of this flow for one topology.
    pub fn state_matrix<T: Scalar>(self, g: &SignedDigraph<T>) -> Matrix<T> {
        match self {
            Flow::Signed => -&g.laplacian(),
            Flow::Unsigned => -&g.laplacian_parts().abs_laplacian,
            Flow::Base => -&g.laplacian_parts().base(),
            Flow::Lifted => -&LiftedGraph::new(g).laplacian(),
        }
    }

    pub fn dim(self, n: usize) -> usize {
        match self {
            Flow::Lifted => 2 * n,
            _ => n,
        }
    }
}

/// Computes transition matrices of one flow over one signal, caching the
/// exponential of every `(graph, duration)` pair it has seen. Periodic
/// signals reuse a handful of such pairs over and over.
pub struct Propagator<'s, T> {
    signal: &'s SwitchingSignal<T>,
    flow: Flow,
    generators: Vec<Matrix<T>>,
    cache: HashMap<(usize, u64), Matrix<T>>,
}

impl<'s, T: Scalar> Propagator<'s, T> {
    pub fn new(signal: &'s SwitchingSignal<T>, flow: Flow) -> Self {
        let generators = signal.library().graphs().iter().map(|g| flow.state_matrix(g)).collect();
        Self { signal, flow, generators, cache: HashMap::new() }
    }

    pub fn signal(&self) -> &'s SwitchingSignal<T> {
        self.signal
    }

    pub fn dim(&self) -> usize {
        self.flow.dim(self.signal.n())
    }

    /// `exp(S_graph * dt)` for the flow's state matrix `S`.
    pub fn step(&mut self, graph: usize, dt: T) -> Result<&Matrix<T>, TransitionError> {
        let key = (graph, dt.to_f64_lossy().to_bits());
        if !self.cache.contains_key(&key) {
            let e = expm(&self.generators[graph].scale(dt))?;
            self.cache.insert(key, e);
        }
        Ok(&self.cache[&key])
    }

    /// Transition matrix from `t0` to `t` on this flow.
    pub fn transition(&mut self, t0: T, t: T) -> Result<Matrix<T>, TransitionError> {
        check_span(self.signal, t0, t)?;
        let mut phi = Matrix::identity(self.dim());
        for seg in self.signal.segments(t0, t)? {
            phi = self.step(seg.graph, seg.len())? * &phi;
        }
        Ok(phi)
    }

    /// Transition matrices at every time in `times` (ascending, all `>= t0`),
    /// extending one running product instead of restarting from `t0`.
    pub fn transitions_at(&mut self, t0: T, times: &[T]) -> Result<Vec<Matrix<T>>, TransitionError> {
        let mut out = Vec::with_capacity(times.len());
        let mut phi = Matrix::identity(self.dim());
        let mut at = t0;
        for &t in times {
            check_span(self.signal, at, t)?;
            for seg in self.signal.segments(at, t)? {
                phi = self.step(seg.graph, seg.len())? * &phi;
            }
            out.push(phi.clone());
            at = t;
        }
        Ok(out)
    }
}

pub(crate) fn check_span<T: Scalar>(s: &SwitchingSignal<T>, t0: T, t: T) -> Result<(), TransitionError> {
    s.check_time(t0)?;
    s.check_time(t)?;
    if t < t0 {
        return Err(TransitionError::Reversed { t0: t0.to_f64_lossy(), t: t.to_f64_lossy() });
    }
    Ok(())
}

/// `Phi(t, t0)` of the signed flow.
pub fn transition_matrix<T: Scalar>(s: &SwitchingSignal<T>, t0: T, t: T) -> Result<Matrix<T>, TransitionError> {
    Propagator::new(s, Flow::Signed).transition(t0, t)
}

/// Stochastic transition matrix of the unsigned flow `-L_{|A(t)|}`.
pub fn unsigned_transition<T: Scalar>(s: &SwitchingSignal<T>, t0: T, t: T) -> Result<Matrix<T>, TransitionError> {
    Propagator::new(s, Flow::Unsigned).transition(t0, t)
}

/// Substochastic transition matrix of `-(L_{A⁺} + Δ_{|A⁻|})`.
pub fn base_transition<T: Scalar>(s: &SwitchingSignal<T>, t0: T, t: T) -> Result<Matrix<T>, TransitionError> {
    Propagator::new(s, Flow::Base).transition(t0, t)
}

/// Residuals of the identities tying the bundle's matrices together.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BundleResiduals<T> {
    /// `|| Phi - (Phi_even - Phi_odd) ||_inf`.
    pub decomposition: T,
    /// `|| (Phi_even + Phi_odd) - Phi_abs ||_inf`.
    pub sum: T,
    /// Largest entrywise excess of `|Phi|` over `Phi_abs`, clamped at zero.
    pub bound: T,
    /// Excess of `|| Phi ||_inf` over one, clamped at zero.
    pub norm: T,
    /// `max(|| Psi_TL - Psi_BR ||_inf, || Psi_TR - Psi_BL ||_inf)`.
    pub block_symmetry: T,
}

/// Every transition matrix of the signal over one span `[t0, t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionBundle<T> {
    pub t0: T,
    pub t: T,
    pub phi: Matrix<T>,
    pub phi_even: Matrix<T>,
    pub phi_odd: Matrix<T>,
    pub phi_abs: Matrix<T>,
    pub psi: Matrix<T>,
    pub phi_base: Matrix<T>,
    pub residuals: BundleResiduals<T>,
}

impl<T: Scalar> TransitionBundle<T> {
    /// Worst violation of nonnegativity or of row sums at most one across
    /// `Phi_even`, `Phi_odd` and `Phi_base`. Zero when all three are
    /// substochastic.
    pub fn substochastic_violation(&self) -> T {
        [&self.phi_even, &self.phi_odd, &self.phi_base]
            .into_iter()
            .map(|m| substochastic_violation(m))
            .fold(T::zero(), T::max)
    }

    /// Worst deviation of `Phi_abs` from a stochastic matrix.
    pub fn stochastic_defect(&self) -> T {
        let neg = (-self.phi_abs.min_entry()).max(T::zero());
        let rows = self.phi_abs.row_sums().into_iter().map(|s| (s - T::one()).abs()).fold(T::zero(), T::max);
        neg.max(rows)
    }
}

/// `max(0, -min entry, max row sum - 1)`.
pub fn substochastic_violation<T: Scalar>(m: &Matrix<T>) -> T {
    let neg = (-m.min_entry()).max(T::zero());
    let rows = m.row_sums().into_iter().map(|s| s - T::one()).fold(T::zero(), T::max);
    neg.max(rows)
}

fn split_lifted<T: Scalar>(psi: &Matrix<T>, n: usize) -> Result<(Matrix<T>, Matrix<T>, T), TransitionError> {
    let tl = psi.block(0, 0, n, n);
    let tr = psi.block(0, n, n, n);
    let bl = psi.block(n, 0, n, n);
    let br = psi.block(n, n, n, n);
    let asym = tl.dist_inf(&br).max(tr.dist_inf(&bl));
    if !(asym < T::consistency_tol()) {
        return Err(TransitionError::BlockAsymmetry(asym.to_f64_lossy()));
    }
    Ok((tl, tr, asym))
}

/// `(Psi, Phi_even, Phi_odd)`.
pub type Triple<T> = (Matrix<T>, Matrix<T>, Matrix<T>);

/// `Psi(t, t0)` and its blocks `(Phi_even, Phi_odd)`.
pub fn even_odd<T: Scalar>(s: &SwitchingSignal<T>, t0: T, t: T) -> Result<Triple<T>, TransitionError> {
    let psi = Propagator::new(s, Flow::Lifted).transition(t0, t)?;
    let (even, odd, _) = split_lifted(&psi, s.n())?;
    Ok((psi, even, odd))
}

/// Full bundle over `[t0, t]`: `Psi` from the lifted flow, its blocks as
/// `Phi_even`/`Phi_odd`, and `Phi`, `Phi_abs`, `Phi_base` from their own
/// flows, with every identity residual.
pub fn lifted_transition<T: Scalar>(
    s: &SwitchingSignal<T>,
    t0: T,
    t: T,
) -> Result<TransitionBundle<T>, TransitionError> {
    let psi = Propagator::new(s, Flow::Lifted).transition(t0, t)?;
    let (phi_even, phi_odd, block_symmetry) = split_lifted(&psi, s.n())?;
    let phi = transition_matrix(s, t0, t)?;
    let phi_abs = unsigned_transition(s, t0, t)?;
    let phi_base = base_transition(s, t0, t)?;

    let decomposition = phi.dist_inf(&(&phi_even - &phi_odd));
    let sum = (&phi_even + &phi_odd).dist_inf(&phi_abs);
    let bound = (&phi.abs() - &phi_abs).as_slice().iter().fold(T::zero(), |m, &x| m.max(x));
    let norm = (phi.norm_inf() - T::one()).max(T::zero());
    Ok(TransitionBundle {
        t0,
        t,
        phi,
        phi_even,
        phi_odd,
        phi_abs,
        psi,
        phi_base,
        residuals: BundleResiduals { decomposition, sum, bound, norm, block_symmetry },
    })
}

/// Central-difference check of the coupled equations
/// `d/dt Phi_even = -B Phi_even + |A⁻| Phi_odd` and
/// `d/dt Phi_odd = -B Phi_odd + |A⁻| Phi_even`, with `B = L_{A⁺} + Δ_{|A⁻|}`
/// of the graph active at `t`. Returns the larger of the two `inf`-norm
/// mismatches. The stencil `[t - step, t + step]` must lie inside one dwell
/// interval.
pub fn derivative_residual<T: Scalar>(s: &SwitchingSignal<T>, t0: T, t: T, step: T) -> Result<T, TransitionError> {
    if !(step > T::zero()) {
        return Err(TransitionError::InvalidStep(step.to_f64_lossy()));
    }
    let (lo, hi) = (t - step, t + step);
    if lo < t0 || hi > s.horizon() {
        return Err(TransitionError::StencilCrossesSwitch(t.to_f64_lossy()));
    }
    let k = s.interval_index_at(lo)?;
    if s.interval_index_at(hi)? != k {
        return Err(TransitionError::StencilCrossesSwitch(t.to_f64_lossy()));
    }
    let mut prop = Propagator::new(s, Flow::Lifted);
    let psis = prop.transitions_at(t0, &[lo, t, hi])?;
    let n = s.n();
    let (e_lo, o_lo, _) = split_lifted(&psis[0], n)?;
    let (e, o, _) = split_lifted(&psis[1], n)?;
    let (e_hi, o_hi, _) = split_lifted(&psis[2], n)?;

    let parts = s.library().get(s.indices()[k]).laplacian_parts();
    let base = parts.base();
    let two_step = step + step;
    let de = (&e_hi - &e_lo).scale(T::one() / two_step);
    let d_o = (&o_hi - &o_lo).scale(T::one() / two_step);
    let rhs_e = &(&parts.abs_minus * &o) - &(&base * &e);
    let rhs_o = &(&parts.abs_minus * &e) - &(&base * &o);
    Ok(de.dist_inf(&rhs_e).max(d_o.dist_inf(&rhs_o)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switching::{GraphLibrary, Schedule};

    type G = SignedDigraph<f64>;

    fn fixed(rows: &[[f64; 2]; 2], horizon: f64) -> SwitchingSignal<f64> {
        SwitchingSignal::fixed(G::from_adjacency(Matrix::from_rows(rows)).unwrap(), 0.0, horizon).unwrap()
    }

    fn balanced_closed_form(t: f64) -> Matrix<f64> {
        let e = (-2.0 * t).exp();
        Matrix::from_rows(&[[1.0 + e, -1.0 + e], [-1.0 + e, 1.0 + e]]).scale(0.5)
    }

    fn switching() -> SwitchingSignal<f64> {
        let a = G::new(3, &[(1, 2, 1.0), (2, 3, -2.0), (3, 1, 0.5)]).unwrap();
        let b = G::new(3, &[(2, 1, -1.0), (3, 2, 1.5), (1, 3, -0.7)]).unwrap();
        let lib = GraphLibrary::new(vec![a, b]).unwrap();
        let sched = Schedule::Periodic { pattern: vec![(0.7, 1), (1.1, 2)], repeats: 4 };
        SwitchingSignal::new(lib, &sched, 0.0, 0.5, 7.2).unwrap()
    }

    #[test]
    fn identity_at_initial_time() {
        let s = switching();
        assert_eq!(transition_matrix(&s, 1.3, 1.3).unwrap(), Matrix::identity(3));
        let b = lifted_transition(&s, 2.0, 2.0).unwrap();
        assert_eq!(b.phi_even, Matrix::identity(3));
        assert_eq!(b.phi_odd, Matrix::zeros(3, 3));
    }

    #[test]
    fn balanced_digon_closed_form() {
        let s = fixed(&[[0.0, -1.0], [-1.0, 0.0]], 10.0);
        for t in [0.1, 1.0, 3.7, 10.0] {
            let phi = transition_matrix(&s, 0.0, t).unwrap();
            assert!(phi.dist_inf(&balanced_closed_form(t)) < 1e-14, "t = {t}");
        }
    }

    #[test]
    fn conflicting_digon_closed_form() {
        let s = fixed(&[[0.0, -1.0], [1.0, 0.0]], 10.0);
        for t in [0.3, 2.0, 9.0] {
            let phi = transition_matrix(&s, 0.0, t).unwrap();
            let expected = Matrix::from_rows(&[[t.cos(), -t.sin()], [t.sin(), t.cos()]]).scale((-t).exp());
            assert!(phi.dist_inf(&expected) < 1e-14, "t = {t}");
        }
    }

    #[test]
    fn unsigned_examples() {
        let s = fixed(&[[0.0, 1.0], [1.0, 0.0]], 5.0);
        let t = 1.7f64;
        let e = (-2.0 * t).exp();
        let expected = Matrix::from_rows(&[[1.0 + e, 1.0 - e], [1.0 - e, 1.0 + e]]).scale(0.5);
        assert!(unsigned_transition(&s, 0.0, t).unwrap().dist_inf(&expected) < 1e-14);
        assert_eq!(unsigned_transition(&s, 0.0, 0.0).unwrap(), Matrix::identity(2));
        let z = SwitchingSignal::fixed(G::empty(3).unwrap(), 0.0, 4.0).unwrap();
        assert_eq!(unsigned_transition(&z, 0.0, 4.0).unwrap(), Matrix::identity(3));
    }

    #[test]
    fn nonnegative_graph_has_no_odd_part() {
        let g = G::new(3, &[(1, 2, 1.0), (2, 3, 2.0), (3, 1, 0.5)]).unwrap();
        let s = SwitchingSignal::fixed(g, 0.0, 3.0).unwrap();
        let b = lifted_transition(&s, 0.0, 2.5).unwrap();
        assert_eq!(b.phi_odd.max_abs(), 0.0);
        assert!(b.phi_even.dist_inf(&b.phi) < 1e-14);
        assert!(b.stochastic_defect() < 1e-14);
    }

    #[test]
    fn balanced_digon_even_odd_via_gauge() {
        let s = fixed(&[[0.0, -1.0], [-1.0, 0.0]], 2.0);
        let b = lifted_transition(&s, 0.0, 1.0).unwrap();
        let d = crate::graph::Gauge::new(vec![1, -1]);
        // balance gives Phi = D Phi_abs D
        let gauged = d.conjugate(&b.phi_abs);
        assert!(gauged.dist_inf(&b.phi) < 1e-14);
        let even = (&b.phi_abs + &gauged).scale(0.5);
        let odd = (&b.phi_abs - &gauged).scale(0.5);
        assert!(b.phi_even.dist_inf(&even) < 1e-14);
        assert!(b.phi_odd.dist_inf(&odd) < 1e-14);
        // e^{-2} = 0.1353..., so Phi_even = [[1+e, 0], [0, 1+e]] / 2
        let e = (-2.0f64).exp();
        assert!(b.phi_even.dist_inf(&Matrix::from_diagonal(&[0.5 * (1.0 + e), 0.5 * (1.0 + e)])) < 1e-14);
    }

    #[test]
    fn bundle_identities_on_switching_signal() {
        let s = switching();
        let b = lifted_transition(&s, 0.2, 6.9).unwrap();
        let r = b.residuals;
        assert!(r.decomposition < 1e-12 && r.sum < 1e-12, "{r:?}");
        assert!(r.bound < 1e-12 && r.norm < 1e-12 && r.block_symmetry < 1e-12, "{r:?}");
        assert!(b.substochastic_violation() < 1e-12);
        assert!(b.stochastic_defect() < 1e-12);
    }

    #[test]
    fn semigroup_across_switch() {
        let s = switching();
        let full = transition_matrix(&s, 0.0, 6.0).unwrap();
        for mid in [0.7, 1.8, 3.3] {
            let split = &transition_matrix(&s, mid, 6.0).unwrap() * &transition_matrix(&s, 0.0, mid).unwrap();
            assert!(full.dist_inf(&split) < 1e-13);
        }
    }

    #[test]
    fn incremental_products_match_fresh_ones() {
        let s = switching();
        let times = [0.5, 0.7, 2.0, 5.5];
        let mut p = Propagator::new(&s, Flow::Signed);
        let many = p.transitions_at(0.1, &times).unwrap();
        for (t, m) in times.iter().zip(&many) {
            assert!(m.dist_inf(&transition_matrix(&s, 0.1, *t).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn derivative_identity_holds() {
        let s = switching();
        for t in [0.35, 1.2, 4.0] {
            let r = derivative_residual(&s, 0.0, t, 1e-5).unwrap();
            assert!(r < 1e-6, "t = {t}: {r}");
        }
        assert!(matches!(derivative_residual(&s, 0.0, 0.7, 1e-5), Err(TransitionError::StencilCrossesSwitch(_))));
    }

    #[test]
    fn errors() {
        let s = switching();
        assert!(matches!(transition_matrix(&s, 2.0, 1.0), Err(TransitionError::Reversed { .. })));
        assert!(matches!(transition_matrix(&s, 0.0, 100.0), Err(TransitionError::Signal(_))));
    }

    #[test]
    fn single_precision_bundle() {
        let g = SignedDigraph::<f32>::new(3, &[(1, 2, 1.0), (2, 3, -2.0), (3, 1, 0.5)]).unwrap();
        let s = SwitchingSignal::fixed(g, 0.0, 3.0).unwrap();
        let b = lifted_transition(&s, 0.0, 3.0).unwrap();
        assert!(b.residuals.decomposition < 1e-5 && b.residuals.sum < 1e-5);
    }
}
