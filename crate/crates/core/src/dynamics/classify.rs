use std::fmt;

use serde::Serialize;

use super::{DynamicsError, Hypotheses};
use crate::graph::Gauge;
use crate::switching::SwitchingSignal;
use crate::transition::{transition_matrix, unsigned_transition, Flow, Propagator};
use crate::{Matrix, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    BipartiteConsensus,
    Stable,
    Undetermined,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::BipartiteConsensus => "BipartiteConsensus",
            Verdict::Stable => "Stable",
            Verdict::Undetermined => "Undetermined",
        })
    }
}

/// Least-squares fit `ln r(t) ≈ intercept - rate * t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit<T> {
    pub rate: T,
    pub intercept: T,
    pub r2: T,
    pub samples: usize,
}

impl<T: Scalar> RateFit<T> {
    /// Time at which the fitted residual reaches `target`.
    pub fn time_to(&self, target: T) -> T {
        (self.intercept - target.ln()) / self.rate
    }
}

fn fit_line<T: Scalar>(pts: &[(T, T)]) -> Result<RateFit<T>, DynamicsError> {
    if pts.len() < 3 {
        return Err(DynamicsError::TooFewSamples { usable: pts.len() });
    }
    let m = T::from_usize(pts.len()).unwrap();
    let mx = pts.iter().map(|p| p.0).sum::<T>() / m;
    let my = pts.iter().map(|p| p.1).sum::<T>() / m;
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: T = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: T = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > T::zero() { T::one() - sse / syy } else { T::one() };
    Ok(RateFit { rate: -slope, intercept, r2, samples: pts.len() })
}

/// Fits `ln r ≈ intercept - rate * t` to `(t, r)` samples, ignoring
/// residuals within `100 eps` of zero.
pub fn fit_decay<T: Scalar>(samples: &[(T, T)]) -> Result<RateFit<T>, DynamicsError> {
    let floor = T::lit(100.0) * T::epsilon();
    let pts: Vec<(T, T)> = samples.iter().filter(|&&(_, r)| r > floor).map(|&(t, r)| (t, r.ln())).collect();
    fit_line(&pts)
}

/// Fits the exponential decay of `||Phi(t, t0) - limit||_inf` over the
/// sample times.
pub fn estimate_rate<T: Scalar>(
    s: &SwitchingSignal<T>,
    t0: T,
    limit: &Matrix<T>,
    samples: &[T],
) -> Result<RateFit<T>, DynamicsError> {
    let phis = Propagator::new(s, Flow::Signed).transitions_at(t0, samples)?;
    let pts: Vec<(T, T)> = samples.iter().zip(&phis).map(|(&t, p)| (t, p.dist_inf(limit))).collect();
    fit_decay(&pts)
}

/// Common row of a matrix whose rows agree to within `tol` per column,
/// clamped at zero and renormalized to sum one.
fn common_row<T: Scalar>(m: &Matrix<T>, tol: T) -> Result<Vec<T>, DynamicsError> {
    let n = m.nrows();
    let count = T::from_usize(n).unwrap();
    let mut spread = T::zero();
    let mut row = Vec::with_capacity(n);
    for j in 0..m.ncols() {
        let col = (0..n).map(|i| m[(i, j)]);
        let (lo, hi) = col.clone().fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
        spread = spread.max(hi - lo);
        row.push((col.sum::<T>() / count).max(T::zero()));
    }
    if !(spread < tol) {
        return Err(DynamicsError::NotConverged { spread: spread.to_f64_lossy() });
    }
    let total: T = row.iter().copied().sum();
    Ok(row.into_iter().map(|v| v / total).collect())
}

/// Stationary vector of the unsigned flow: the common row of
/// `Phi_abs(t_long, t0)`.
pub fn stationary_vector<T: Scalar>(s: &SwitchingSignal<T>, t0: T, t_long: T, tol: T) -> Result<Vec<T>, DynamicsError> {
    if let Some(reason) = Hypotheses::assess(s).failure() {
        return Err(DynamicsError::HypothesesUnmet(reason));
    }
    common_row(&unsigned_transition(s, t0, t_long)?, tol)
}

/// `(D 1)(nu^T D)`.
fn gauge_limit<T: Scalar>(d: &Gauge, nu: &[T]) -> Matrix<T> {
    let dv: Vec<T> = d.to_vector();
    let dnu: Vec<T> = dv.iter().zip(nu).map(|(&a, &b)| a * b).collect();
    Matrix::outer(&dv, &dnu)
}

/// Limit of `Phi(t, t0)` predicted from the graphs: the gauge rank-one
/// matrix when the library is simultaneously balanced, zero otherwise.
/// `None` when the hypotheses fail on record. `nu` is read off
/// `Phi_abs(t_long, t0)` to within `tol`.
pub fn predicted_limit<T: Scalar>(
    s: &SwitchingSignal<T>,
    t0: T,
    t_long: T,
    tol: T,
) -> Result<Option<Matrix<T>>, DynamicsError> {
    let hyp = Hypotheses::assess(s);
    if !hyp.satisfied() {
        return Ok(None);
    }
    Ok(Some(match &hyp.gauge {
        Some(d) => gauge_limit(d, &stationary_vector(s, t0, t_long, tol)?),
        None => Matrix::zeros(s.n(), s.n()),
    }))
}

/// Limits of `(Phi_even, Phi_odd)`: `½(1 nu^T ± (D 1)(nu^T D))` with a gauge,
/// both `½ 1 nu^T` without.
pub fn predicted_even_odd<T: Scalar>(gauge: Option<&Gauge>, nu: &[T]) -> (Matrix<T>, Matrix<T>) {
    let ones = vec![T::one(); nu.len()];
    let avg = Matrix::outer(&ones, nu);
    let half = T::lit(0.5);
    match gauge {
        Some(d) => {
            let dd = gauge_limit(d, nu);
            ((&avg + &dd).scale(half), (&avg - &dd).scale(half))
        }
        None => (avg.scale(half), avg.scale(half)),
    }
}

/// Pilot estimate of a time by which `Phi` has settled: fits the decay of
/// successive increments over a short run and returns `t0 + 60 / rate`,
/// capped at the horizon.
pub fn default_t_long<T: Scalar>(s: &SwitchingSignal<T>, t0: T) -> T {
    let horizon = s.horizon();
    let pilot_end = horizon.min(t0 + T::lit(20.0));
    let steps = 40;
    let dt = (pilot_end - t0) / T::from_usize(steps).unwrap();
    if !(dt > T::zero()) {
        return horizon;
    }
    let times: Vec<T> = (0..=steps).map(|k| t0 + dt * T::from_usize(k).unwrap()).collect();
    let Ok(phis) = Propagator::new(s, Flow::Signed).transitions_at(t0, &times) else {
        return horizon;
    };
    let pts: Vec<(T, T)> = phis.windows(2).zip(&times[1..]).map(|(w, &t)| (t, w[1].dist_inf(&w[0]))).collect();
    match fit_decay(&pts) {
        Ok(fit) if fit.rate > T::zero() => horizon.min(t0 + T::lit(60.0) / fit.rate),
        _ => horizon,
    }
}

/// Outcome of [`classify`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport<T> {
    pub verdict: Verdict,
    /// Verdict predicted from balance, connectivity and recurrence alone.
    pub graph_verdict: Verdict,
    /// Verdict read off `Phi(t_long, t0)` alone.
    pub numeric_verdict: Verdict,
    /// Why the verdict is `Undetermined`, when it is.
    pub reason: Option<String>,
    /// Set when the graph-side and numeric verdicts disagree.
    pub inconsistency: Option<String>,
    pub gauge: Option<Gauge>,
    pub nu: Option<Vec<T>>,
    /// `nu^T D x0` for the supplied initial state.
    pub c: Option<T>,
    pub phi_limit: Matrix<T>,
    pub rate: Option<RateFit<T>>,
    /// `||Phi(t_long, t0) - phi_limit||_inf`.
    pub residual: T,
    pub t_long: T,
}

/// Best rank-one sign pattern `(d 1)(nu^T d)` for `phi`: `d` follows the signs
/// of the column with the largest absolute sum, `nu_j` averages
/// `d_i d_j phi_ij` over `i`.
fn gauge_fit<T: Scalar>(phi: &Matrix<T>) -> (Gauge, Vec<T>, T) {
    let n = phi.nrows();
    let col = (0..n)
        .map(|j| ((0..n).map(|i| phi[(i, j)].abs()).sum::<T>(), j))
        .fold((T::neg_infinity(), 0), |best, c| if c.0 > best.0 { c } else { best })
        .1;
    let sign = |v: T| if v < T::zero() { -1i8 } else { 1 };
    let s0 = sign(phi[(0, col)]);
    let d = Gauge::new((0..n).map(|i| sign(phi[(i, col)]) * s0).collect());
    let dv: Vec<T> = d.to_vector();
    let count = T::from_usize(n).unwrap();
    let nu: Vec<T> = (0..n).map(|j| (0..n).map(|i| dv[i] * dv[j] * phi[(i, j)]).sum::<T>() / count).collect();
    let residual = phi.dist_inf(&gauge_limit(&d, &nu));
    (d, nu, residual)
}

/// Classifies the asymptotic behaviour of `Phi(·, t0)` from
/// `Phi(t_long, t0)`, and cross-checks it against the graph-side
/// prediction. `t_long` defaults to [`default_t_long`].
pub fn classify<T: Scalar>(
    s: &SwitchingSignal<T>,
    t0: T,
    t_long: Option<T>,
    tol_limit: T,
    tol_zero: T,
    x0: Option<&[T]>,
) -> Result<ConvergenceReport<T>, DynamicsError> {
    let hyp = Hypotheses::assess(s);
    let t_long = t_long.unwrap_or_else(|| default_t_long(s, t0));
    let phi = transition_matrix(s, t0, t_long)?;
    let n = s.n();

    let (numeric_verdict, fit) = if phi.norm_inf() < tol_zero {
        (Verdict::Stable, None)
    } else {
        let (d, nu, residual) = gauge_fit(&phi);
        if residual < tol_limit {
            (Verdict::BipartiteConsensus, Some((d, nu)))
        } else {
            (Verdict::Undetermined, None)
        }
    };
    let graph_verdict = hyp.verdict();

    let mut inconsistency = None;
    if graph_verdict != Verdict::Undetermined && numeric_verdict != graph_verdict {
        inconsistency = Some(format!("graph side predicts {graph_verdict}, numeric side finds {numeric_verdict}"));
    } else if let (Some(g), Some((d, _))) = (&hyp.gauge, &fit) {
        if graph_verdict == Verdict::BipartiteConsensus && g != d {
            inconsistency = Some("numeric gauge differs from the library gauge".to_string());
        }
    }

    let verdict = if graph_verdict == Verdict::Undetermined { Verdict::Undetermined } else { numeric_verdict };
    let reason = match (hyp.failure(), numeric_verdict) {
        (Some(r), _) => Some(r.to_string()),
        (None, Verdict::Undetermined) => Some("transition matrix not settled at t_long".to_string()),
        _ => None,
    };

    // graph-side nu when it is available and converged
    let graph_nu =
        if hyp.satisfied() { common_row(&unsigned_transition(s, t0, t_long)?, tol_limit).ok() } else { None };

    let (gauge, nu, phi_limit) = match (numeric_verdict, fit) {
        (Verdict::BipartiteConsensus, Some((d, nu_fit))) => {
            let nu = graph_nu.clone().unwrap_or(nu_fit);
            let limit = gauge_limit(&d, &nu);
            (Some(d), Some(nu), limit)
        }
        (Verdict::Stable, _) => (None, graph_nu.clone(), Matrix::zeros(n, n)),
        _ => (hyp.gauge.clone(), graph_nu.clone(), phi.clone()),
    };
    let residual = phi.dist_inf(&phi_limit);

    let c = match (&gauge, &nu, x0, numeric_verdict) {
        (Some(d), Some(nu), Some(x0), Verdict::BipartiteConsensus) if x0.len() == n => {
            let dx = d.apply(x0);
            Some(nu.iter().zip(&dx).map(|(&a, &b)| a * b).sum())
        }
        _ => None,
    };

    let rate = if numeric_verdict == Verdict::Undetermined {
        None
    } else {
        let m = 40;
        let step = (t_long - t0) / T::from_usize(m).unwrap();
        let samples: Vec<T> = (1..=m).map(|k| t0 + step * T::from_usize(k).unwrap()).collect();
        estimate_rate(s, t0, &phi_limit, &samples).ok()
    };

    Ok(ConvergenceReport {
        verdict,
        graph_verdict,
        numeric_verdict,
        reason,
        inconsistency,
        gauge,
        nu,
        c,
        phi_limit,
        rate,
        residual,
        t_long,
    })
}
