//! Nested-integral expansions around the substochastic base flow.
//!
//! With `B(t) = L_{A⁺(t)} + Δ_{|A⁻(t)|}` and `N(t) = |A⁻(t)|`, define
//!
//! ```text
//! T_0(t) = Phi_B(t, t0)
//! T_k(t) = ∫_{t0}^{t} Phi_B(t, θ) N(θ) T_{k-1}(θ) dθ
//! ```
//!
//! Then `Phi = Σ (-1)^k T_k`, `Phi_even = Σ T_{2k}` and `Phi_odd = Σ T_{2k+1}`.
//! Every term is computed on one time grid that contains all switch
//! instants. Across a grid step of length `h` inside one dwell interval,
//! `Phi_B(s + h, θ) = exp(-B h) Phi_B(s, θ)`, so
//!
//! ```text
//! T_k(s + h) = E T_k(s) + ∫_0^h exp(-B (h - u)) N T_{k-1}(s + u) du,   E = exp(-B h)
//! ```
//!
//! The series marches this with the trapezoid rule plus the endpoint
//! derivative correction `h²/12 (f'(0) - f'(h))`, where the derivatives come
//! from `T_j' = -B T_j + N T_{j-1}`. That keeps the oracle fourth order at
//! the same grid. The Volterra residual uses the plain trapezoid rule.

use std::collections::HashMap;

use super::{check_span, expm, Flow, TransitionError};
use crate::switching::SwitchingSignal;
use crate::{Matrix, Scalar};

/// One grid step: the active graph and the step length.
#[derive(Clone, Copy)]
struct Step<T> {
    graph: usize,
    h: T,
}

fn grid<T: Scalar>(s: &SwitchingSignal<T>, t0: T, t: T, dt: T) -> Result<Vec<Step<T>>, TransitionError> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(TransitionError::InvalidStep(dt.to_f64_lossy()));
    }
    check_span(s, t0, t)?;
    let mut steps = Vec::new();
    for seg in s.segments(t0, t)? {
        let len = seg.len();
        let count = (len / dt).ceil().to_usize().unwrap_or(1).max(1);
        let h = len / T::from_usize(count).unwrap();
        steps.extend(std::iter::repeat_n(Step { graph: seg.graph, h }, count));
    }
    Ok(steps)
}

/// Per-graph matrices used while marching: `N = |A⁻|` and the cached
/// exponentials of `-B h` and `-L h`.
struct Kernels<'s, T> {
    signal: &'s SwitchingSignal<T>,
    abs_minus: Vec<Matrix<T>>,
    base_gen: Vec<Matrix<T>>,
    signed_gen: Vec<Matrix<T>>,
    cache: HashMap<(Flow, usize, u64), Matrix<T>>,
}

impl<'s, T: Scalar> Kernels<'s, T> {
    fn new(signal: &'s SwitchingSignal<T>) -> Self {
        let graphs = signal.library().graphs();
        Self {
            signal,
            abs_minus: graphs.iter().map(|g| g.laplacian_parts().abs_minus).collect(),
            base_gen: graphs.iter().map(|g| Flow::Base.state_matrix(g)).collect(),
            signed_gen: graphs.iter().map(|g| Flow::Signed.state_matrix(g)).collect(),
            cache: HashMap::new(),
        }
    }

    fn exp(&mut self, flow: Flow, st: Step<T>) -> Result<Matrix<T>, TransitionError> {
        let key = (flow, st.graph, st.h.to_f64_lossy().to_bits());
        if let Some(m) = self.cache.get(&key) {
            return Ok(m.clone());
        }
        let gen = match flow {
            Flow::Signed => &self.signed_gen[st.graph],
            _ => &self.base_gen[st.graph],
        };
        let e = expm(&gen.scale(st.h))?;
        self.cache.insert(key, e.clone());
        Ok(e)
    }

    fn n(&self) -> usize {
        self.signal.n()
    }
}

/// Partial sums of the expansion truncated after `T_K`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTruncation<T> {
    terms: Vec<Matrix<T>>,
}

impl<T: Scalar> SeriesTruncation<T> {
    /// `T_0 .. T_K` evaluated at the final time.
    pub fn terms(&self) -> &[Matrix<T>] {
        &self.terms
    }

    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    /// `(phi_k, even_k, odd_k)` using terms up to `T_k`.
    pub fn partial(&self, k: usize) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
        let n = self.terms[0].nrows();
        let mut even = Matrix::zeros(n, n);
        let mut odd = Matrix::zeros(n, n);
        for (j, term) in self.terms.iter().take(k + 1).enumerate() {
            if j % 2 == 0 {
                even = &even + term;
            } else {
                odd = &odd + term;
            }
        }
        (&even - &odd, even, odd)
    }

    pub fn phi(&self) -> Matrix<T> {
        self.partial(self.order()).0
    }

    pub fn even(&self) -> Matrix<T> {
        self.partial(self.order()).1
    }

    pub fn odd(&self) -> Matrix<T> {
        self.partial(self.order()).2
    }
}

/// Expansion of `Phi(t, t0)` truncated after order `k_max`, with outer
/// integrals by the corrected trapezoid rule on a grid of step at most `dt`.
pub fn peano_baker_truncated<T: Scalar>(
    s: &SwitchingSignal<T>,
    t0: T,
    t: T,
    k_max: usize,
    dt: T,
) -> Result<SeriesTruncation<T>, TransitionError> {
    let steps = grid(s, t0, t, dt)?;
    let mut kern = Kernels::new(s);
    let n = kern.n();
    let half = T::lit(0.5);
    let twelfth = T::one() / T::lit(12.0);
    let mut terms: Vec<Matrix<T>> = std::iter::once(Matrix::identity(n))
        .chain(std::iter::repeat_with(|| Matrix::zeros(n, n)).take(k_max))
        .collect();
    for st in steps {
        let e = kern.exp(Flow::Base, st)?;
        let nm = &kern.abs_minus[st.graph];
        let neg_b = &kern.base_gen[st.graph];
        let hh = st.h * half;
        let corr = st.h * st.h * twelfth;
        // f(u) = exp(-B (h - u)) N T_{k-1}(s + u) and
        // f'(u) = exp(-B (h - u)) (B N T_{k-1} + N T_{k-1}')(s + u)
        let slope = |ts: &[Matrix<T>], j: usize| -> Matrix<T> {
            let d = neg_b * &ts[j];
            if j == 0 {
                d
            } else {
                &d + &(nm * &ts[j - 1])
            }
        };
        let df = |ts: &[Matrix<T>], j: usize| -> Matrix<T> { &(nm * &slope(ts, j)) - &(neg_b * &(nm * &ts[j])) };
        let prev: Vec<Matrix<T>> = terms.clone();
        terms[0] = &e * &prev[0];
        for k in 1..=k_max {
            let left = &e * &(nm * &prev[k - 1]);
            let right = nm * &terms[k - 1];
            let dleft = &e * &df(&prev, k - 1);
            let dright = df(&terms, k - 1);
            let trap = (&left + &right).scale(hh);
            let end = (&dleft - &dright).scale(corr);
            terms[k] = &(&(&e * &prev[k]) + &trap) + &end;
        }
    }
    Ok(SeriesTruncation { terms })
}

/// `|| Phi(t, t0) - Phi_B(t, t0) + ∫ Phi_B(t, θ) |A⁻(θ)| Phi(θ, t0) dθ ||_inf`
/// with the outer integral by the trapezoid rule on a grid of step at most
/// `dt` and `Phi`, `Phi_B` exact at every node.
pub fn volterra_residual<T: Scalar>(s: &SwitchingSignal<T>, t0: T, t: T, dt: T) -> Result<T, TransitionError> {
    let steps = grid(s, t0, t, dt)?;
    let mut kern = Kernels::new(s);
    let n = kern.n();
    let half = T::lit(0.5);
    let mut phi = Matrix::identity(n);
    let mut base = Matrix::identity(n);
    let mut integral = Matrix::zeros(n, n);
    for st in steps {
        let eb = kern.exp(Flow::Base, st)?;
        let es = kern.exp(Flow::Signed, st)?;
        let nm = &kern.abs_minus[st.graph];
        let next_phi = &es * &phi;
        let left = &eb * &(nm * &phi);
        let right = nm * &next_phi;
        integral = &(&eb * &integral) + &(&left + &right).scale(st.h * half);
        base = &eb * &base;
        phi = next_phi;
    }
    Ok((&(&phi - &base) + &integral).norm_inf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SignedDigraph;
    use crate::switching::{GraphLibrary, Schedule};
    use crate::transition::{base_transition, even_odd, transition_matrix};

    fn fixed(rows: &[[f64; 2]; 2], horizon: f64) -> SwitchingSignal<f64> {
        let g = SignedDigraph::from_adjacency(Matrix::from_rows(rows)).unwrap();
        SwitchingSignal::fixed(g, 0.0, horizon).unwrap()
    }

    fn switching() -> SwitchingSignal<f64> {
        let a = SignedDigraph::new(3, &[(1, 2, 1.0), (2, 3, -2.0), (3, 1, 0.5)]).unwrap();
        let b = SignedDigraph::new(3, &[(2, 1, -1.0), (3, 2, 1.5), (1, 3, -0.7)]).unwrap();
        let lib = GraphLibrary::new(vec![a, b]).unwrap();
        let sched = Schedule::Periodic { pattern: vec![(0.15, 1), (0.2, 2)], repeats: 4 };
        SwitchingSignal::new(lib, &sched, 0.0, 0.1, 1.4).unwrap()
    }

    #[test]
    fn order_zero_is_base_flow() {
        let s = switching();
        let tr = peano_baker_truncated(&s, 0.0, 0.5, 0, 1e-2).unwrap();
        let base = base_transition(&s, 0.0, 0.5).unwrap();
        assert!(tr.phi().dist_inf(&base) < 1e-13);
        assert!(tr.even().dist_inf(&base) < 1e-13);
        assert_eq!(tr.odd(), Matrix::zeros(3, 3));
    }

    #[test]
    fn nonnegative_graph_has_no_corrections() {
        let s = fixed(&[[0.0, 1.0], [2.0, 0.0]], 1.0);
        let tr = peano_baker_truncated(&s, 0.0, 0.7, 6, 1e-2).unwrap();
        assert!(tr.terms()[1..].iter().all(|m| m.max_abs() == 0.0));
        assert!(tr.phi().dist_inf(&base_transition(&s, 0.0, 0.7).unwrap()) < 1e-14);
    }

    #[test]
    fn balanced_digon_converges_in_order() {
        let s = fixed(&[[0.0, -1.0], [-1.0, 0.0]], 1.0);
        let tr = peano_baker_truncated(&s, 0.0, 0.5, 12, 1e-3).unwrap();
        let exact = transition_matrix(&s, 0.0, 0.5).unwrap();
        let errs: Vec<f64> = (0..=12).map(|k| tr.partial(k).0.dist_inf(&exact)).collect();
        // truncation error shrinks until it meets the quadrature floor
        let floor = errs[12];
        assert!(errs.windows(2).take_while(|w| w[0] > 2.0 * floor).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[12] < 1e-11, "{errs:?}");
    }

    #[test]
    fn switching_signal_matches_lift() {
        let s = switching();
        let tr = peano_baker_truncated(&s, 0.1, 0.6, 12, 1e-3).unwrap();
        let (_, even, odd) = even_odd(&s, 0.1, 0.6).unwrap();
        assert!(tr.even().dist_inf(&even) < 1e-6);
        assert!(tr.odd().dist_inf(&odd) < 1e-6);
    }

    #[test]
    fn series_quadrature_is_fourth_order() {
        let s = switching();
        let exact = transition_matrix(&s, 0.0, 0.6).unwrap();
        let err = |dt: f64| peano_baker_truncated(&s, 0.0, 0.6, 20, dt).unwrap().phi().dist_inf(&exact);
        let (e1, e2) = (err(2e-2), err(1e-2));
        assert!((e1 / e2).log2() > 3.8, "{e1} {e2}");
    }

    #[test]
    fn volterra_is_second_order() {
        let s = fixed(&[[0.0, -1.0], [-1.0, 0.0]], 1.0);
        assert_eq!(volterra_residual(&s, 0.3, 0.3, 1e-3).unwrap(), 0.0);
        let r1 = volterra_residual(&s, 0.0, 1.0, 1e-2).unwrap();
        let r2 = volterra_residual(&s, 0.0, 1.0, 5e-3).unwrap();
        let r3 = volterra_residual(&s, 0.0, 1.0, 1e-3).unwrap();
        assert!(r3 < 1e-4, "{r3}");
        assert!((r1 / r2).log2() > 1.9, "{r1} {r2}");
        let pos = fixed(&[[0.0, 1.0], [1.0, 0.0]], 1.0);
        assert!(volterra_residual(&pos, 0.0, 1.0, 1e-2).unwrap() < 1e-14);
    }

    #[test]
    fn rejects_bad_step() {
        let s = switching();
        assert!(matches!(peano_baker_truncated(&s, 0.0, 0.5, 3, 0.0), Err(TransitionError::InvalidStep(_))));
        assert!(matches!(volterra_residual(&s, 0.0, 0.5, -1.0), Err(TransitionError::InvalidStep(_))));
    }
}
