//! The L2(pi) spectral gap and the mixing/coupling inequalities built on it.
//!
//! The gap of a chain `P` with stationary distribution `pi` is
//!
//! ```text
//! gamma(P) = 1 - sup { ||P f||_{2,pi} / ||f||_{2,pi} : E_pi[f] = 0, f != 0 }
//! ```
//!
//! Conjugating by `D^{1/2}` with `D = diag(pi)` turns the weighted operator
//! norm into a plain singular value: with `A = D^{1/2} P D^{-1/2}` and `s =
//! sqrt(pi)` (a unit vector fixed by both `A` and `A^T` when `pi` is
//! stationary), the sup equals the largest singular value of `Pi A Pi`,
//! where `Pi = I - s s^T` projects out the constants. This also makes the
//! adjoint identity `gamma(P*) = gamma(P)` exact in floating point up to
//! rounding: conjugating `P*` gives exactly `A^T`.
//!
//! States outside the support of `pi` are excluded from the conjugation;
//! L2(pi) never sees them, and stationarity forces the support to be closed
//! under the dynamics anyway.
//!
//! Everything downstream consumes the gap through two inequalities, both
//! exposed as checkers that report `(t, lhs, rhs, holds)` rows instead of
//! asserting:
//!
//! ```text
//! mixing:    ||pi - mu P^t||_1  <=  (1 - gamma)^t sqrt(2 ||mu/pi||_inf)
//! coupling:  ||pi - nu||_1      <=  ||pi - nu P^t||_1 + t ||nu - nu P||_1
//! ```

use crate::chain::{
    l1_diff, smoothness, Dist, MarkovChain, DENSE_LIMIT, ITERATION_CAP, STATIONARY_GATE,
};
use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

/// Additive slack applied when deciding whether a checked inequality holds.
pub const BOUND_SLACK: f64 = 1e-10;

/// Which algorithm produced a spectral gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    /// Full SVD of the projected conjugated matrix (dense, up to
    /// [`DENSE_LIMIT`] states).
    DenseSvd,
    /// Deflated power iteration on `M^T M`, matrix-free.
    Iterative,
}

/// A computed spectral gap.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapResult {
    /// `1 - top_singular_value`, clamped into `[0, 1]`.
    pub gamma: f64,
    /// The raw largest singular value of the projected conjugated matrix.
    pub top_singular_value: f64,
    /// Algorithm used.
    pub method: GapMethod,
    /// Set when the raw gap was negative before clamping. Stationarity
    /// keeps the singular value at most 1 up to rounding, so anything
    /// noticeably above 1 means a periodic or near-periodic structure
    /// interacting badly with the numerics.
    pub periodic_suspect: bool,
}

/// One row of a checked inequality: at time `t`, `lhs <= rhs` up to
/// [`BOUND_SLACK`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundCheck {
    /// Number of chain steps the row refers to.
    pub t: u64,
    /// Left-hand side of the inequality.
    pub lhs: f64,
    /// Right-hand side of the inequality.
    pub rhs: f64,
    /// Whether `lhs <= rhs + BOUND_SLACK`.
    pub holds: bool,
}

impl BoundCheck {
    fn new(t: u64, lhs: f64, rhs: f64) -> Self {
        BoundCheck { t, lhs, rhs, holds: lhs <= rhs + BOUND_SLACK }
    }
}

/// Computes the spectral gap, picking the dense SVD up to [`DENSE_LIMIT`]
/// states and the matrix-free iterative estimate above.
pub fn spectral_gap(chain: &MarkovChain, pi: &Dist) -> Result<GapResult> {
    let method =
        if chain.n() <= DENSE_LIMIT { GapMethod::DenseSvd } else { GapMethod::Iterative };
    spectral_gap_with_method(chain, pi, method)
}

/// Computes the spectral gap with an explicit method choice.
pub fn spectral_gap_with_method(
    chain: &MarkovChain,
    pi: &Dist,
    method: GapMethod,
) -> Result<GapResult> {
    if pi.len() != chain.n() {
        return Err(Error::LengthMismatch { expected: chain.n(), got: pi.len() });
    }
    let residual = chain.stationary_residual(pi)?;
    if residual > STATIONARY_GATE {
        return Err(Error::NotStationary { residual });
    }
    let support: Vec<usize> =
        (0..chain.n()).filter(|&x| pi.get(x) > 0.0).collect();
    let top_singular_value = if support.len() <= 1 {
        // L2(pi) on a single atom has no mean-zero directions.
        0.0
    } else {
        match method {
            GapMethod::DenseSvd => dense_top_sv(chain, pi, &support)?,
            GapMethod::Iterative => iterative_top_sv(chain, pi, &support)?,
        }
    };
    let raw = 1.0 - top_singular_value;
    Ok(GapResult {
        gamma: raw.clamp(0.0, 1.0),
        top_singular_value,
        method,
        periodic_suspect: raw < 0.0,
    })
}

/// Largest singular value of `Pi A Pi` by dense SVD, on the support of pi.
fn dense_top_sv(chain: &MarkovChain, pi: &Dist, support: &[usize]) -> Result<f64> {
    let m = support.len();
    if chain.n() > DENSE_LIMIT {
        return Err(Error::DenseLimitExceeded { n: chain.n(), limit: DENSE_LIMIT });
    }
    let s: Vec<f64> = support.iter().map(|&x| pi.get(x).sqrt()).collect();
    let mut a = DMatrix::zeros(m, m);
    for (i, &x) in support.iter().enumerate() {
        let row = chain.row(x);
        for (j, &y) in support.iter().enumerate() {
            a[(i, j)] = s[i] * row[y] / s[j];
        }
    }
    // Pi A Pi = A - s (A^T s)^T - (A s) s^T + (s^T A s) s s^T, rank-one
    // updates instead of two dense products.
    let sv = DMatrix::from_column_slice(m, 1, &s);
    let a_s = &a * &sv;
    let at_s = a.transpose() * &sv;
    let c = (sv.transpose() * &a_s)[(0, 0)];
    let mut mmat = a;
    for i in 0..m {
        for j in 0..m {
            mmat[(i, j)] += -sv[i] * at_s[j] - a_s[i] * sv[j] + c * sv[i] * sv[j];
        }
    }
    let svd = mmat.svd(false, false);
    Ok(svd.singular_values.iter().fold(0.0f64, |acc, &x| acc.max(x)))
}

/// Largest singular value of `Pi A Pi` by deflated power iteration on
/// `M^T M`, using only matrix-vector products with the chain.
fn iterative_top_sv(chain: &MarkovChain, pi: &Dist, support: &[usize]) -> Result<f64> {
    const REL_TOL: f64 = 1e-12;
    const WINDOW: usize = 5;
    const CAP: usize = 500_000;

    let n = chain.n();
    let m = support.len();
    let s: Vec<f64> = support.iter().map(|&x| pi.get(x).sqrt()).collect();
    let project = |v: &mut [f64]| {
        let dot: f64 = v.iter().zip(&s).map(|(&a, &b)| a * b).sum();
        for (vi, &si) in v.iter_mut().zip(&s) {
            *vi -= dot * si;
        }
    };
    // A v = sqrt(pi) . P (v / sqrt(pi)), restricted to the support.
    let a_mul = |v: &[f64]| -> Vec<f64> {
        let mut full = vec![0.0; n];
        for ((&x, &vi), &si) in support.iter().zip(v).zip(&s) {
            full[x] = vi / si;
        }
        let image = chain.mul_right(&full);
        support.iter().zip(&s).map(|(&x, &si)| si * image[x]).collect()
    };
    // A^T w = (P^T (sqrt(pi) . w)) / sqrt(pi); the left product nu -> nu P
    // is exactly the transpose action.
    let at_mul = |w: &[f64]| -> Vec<f64> {
        let mut full = vec![0.0; n];
        for ((&x, &wi), &si) in support.iter().zip(w).zip(&s) {
            full[x] = wi * si;
        }
        let image = chain.mul_left(&full);
        support.iter().zip(&s).map(|(&x, &si)| image[x] / si).collect()
    };

    // Deterministic start: all-ones deflated against sqrt(pi); when that is
    // degenerate (uniform pi), fall back to alternating signs, then to
    // deflated basis vectors.
    let mut v = vec![1.0; m];
    project(&mut v);
    if norm2(&v) < 1e-12 {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        project(&mut v);
    }
    let mut basis = 0;
    while norm2(&v) < 1e-12 && basis < m {
        v = vec![0.0; m];
        v[basis] = 1.0;
        project(&mut v);
        basis += 1;
    }
    let nv = norm2(&v);
    if nv < 1e-12 {
        return Ok(0.0);
    }
    for vi in v.iter_mut() {
        *vi /= nv;
    }

    let mut sigma_prev = f64::NEG_INFINITY;
    let mut streak = 0usize;
    for it in 0..CAP {
        let mut pv = v.clone();
        project(&mut pv);
        let w = a_mul(&pv);
        let sigma = norm2(&w);
        let mut next = at_mul(&w);
        project(&mut next);
        let nn = norm2(&next);
        if nn < 1e-300 {
            return Ok(0.0);
        }
        for vi in next.iter_mut() {
            *vi /= nn;
        }
        v = next;
        if (sigma - sigma_prev).abs() <= REL_TOL * sigma.max(1e-300) {
            streak += 1;
            if streak >= WINDOW {
                return Ok(sigma);
            }
        } else {
            streak = 0;
        }
        sigma_prev = sigma;
        let _ = it;
    }
    Err(Error::IterativeNoConvergence { iterations: CAP })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

/// Checks the mixing inequality
/// `||pi - mu P^t||_1 <= (1 - gamma)^t sqrt(2 ||mu/pi||_inf)` at each `t`.
///
/// `gamma` may be any certified lower bound on the gap; passing something
/// larger than the computed gap (plus 1e-10) is refused, because the
/// inequality is only guaranteed below the true gap. `mu` must live on the
/// support of `pi`.
pub fn check_mixing_bound(
    chain: &MarkovChain,
    pi: &Dist,
    mu: &Dist,
    gamma: f64,
    t_values: &[u64],
) -> Result<Vec<BoundCheck>> {
    if mu.len() != chain.n() {
        return Err(Error::LengthMismatch { expected: chain.n(), got: mu.len() });
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!("gamma = {gamma} outside [0, 1]")));
    }
    let computed = spectral_gap(chain, pi)?;
    if gamma > computed.gamma + 1e-10 {
        return Err(Error::OutOfRange(format!(
            "gamma = {gamma} exceeds the computed spectral gap {}",
            computed.gamma
        )));
    }
    let sup_ratio = smoothness(mu, pi, f64::INFINITY)?;
    let front = (2.0 * sup_ratio).sqrt();
    let lhs_at = iterate_l1_to_pi(chain, pi, mu, t_values)?;
    Ok(t_values
        .iter()
        .zip(lhs_at)
        .map(|(&t, lhs)| BoundCheck::new(t, lhs, (1.0 - gamma).powf(t as f64) * front))
        .collect())
}

/// Checks the coupling inequality
/// `||pi - nu||_1 <= ||pi - nu P^t||_1 + t ||nu - nu P||_1` at each `t`.
///
/// Holds for every distribution `nu` and every `t`; the slack in the bound
/// shrinks as `nu P^t` mixes while the drift term grows linearly.
pub fn check_coupling_bound(
    chain: &MarkovChain,
    pi: &Dist,
    nu: &Dist,
    t_values: &[u64],
) -> Result<Vec<BoundCheck>> {
    if nu.len() != chain.n() {
        return Err(Error::LengthMismatch { expected: chain.n(), got: nu.len() });
    }
    let lhs = l1_diff(pi.values(), nu.values());
    let drift = l1_diff(nu.values(), &chain.mul_left(nu.values()));
    let mixed = iterate_l1_to_pi(chain, pi, nu, t_values)?;
    Ok(t_values
        .iter()
        .zip(mixed)
        .map(|(&t, m)| BoundCheck::new(t, lhs, m + t as f64 * drift))
        .collect())
}

/// `||pi - start P^t||_1` for each requested `t`, sharing one trajectory.
///
/// Also gates on `pi` being stationary; both checkers need that.
fn iterate_l1_to_pi(
    chain: &MarkovChain,
    pi: &Dist,
    start: &Dist,
    t_values: &[u64],
) -> Result<Vec<f64>> {
    let residual = chain.stationary_residual(pi)?;
    if residual > STATIONARY_GATE {
        return Err(Error::NotStationary { residual });
    }
    let max_t = t_values.iter().copied().max().unwrap_or(0);
    if max_t > ITERATION_CAP as u64 {
        return Err(Error::OutOfRange(format!(
            "t = {max_t} exceeds the iteration cap {ITERATION_CAP}"
        )));
    }
    let mut by_t = std::collections::BTreeMap::new();
    let mut nu = start.values().to_vec();
    let mut t = 0u64;
    loop {
        if t_values.contains(&t) {
            by_t.insert(t, l1_diff(pi.values(), &nu));
        }
        if t == max_t {
            break;
        }
        nu = chain.mul_left(&nu);
        t += 1;
    }
    Ok(t_values.iter().map(|t| by_t[t]).collect())
}
