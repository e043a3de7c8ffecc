//! Restart-regularized chains, their fixed points, and the closeness
//! inequalities that make the regularization useful.
//!
//! Given a base chain `P`, a restart distribution `mu`, and a restart rate
//! `delta`, the regularized chain is
//!
//! ```text
//! P(delta) = (1 - delta) P + delta 1 mu^T
//! ```
//!
//! Its unique stationary distribution `pi_delta` satisfies the fixed-point
//! equation `pi_delta = delta mu + (1 - delta) pi_delta P`, equivalently the
//! resolvent form `pi_delta = delta mu (I - (1 - delta) P)^{-1}` and the
//! series `pi_delta = delta sum_t (1 - delta)^t mu P^t`. Three solvers are
//! provided, one per formulation; they are interchangeable up to their
//! tolerances and cross-checked in the tests.
//!
//! Two facts about `pi_delta` carry the whole recovery argument. It stays
//! close to `pi` when the base chain mixes (`check_pr_close`), and it moves
//! only a controlled amount when the base chain is corrupted
//! (`check_corrupted_close`). Both are reported row by row as
//! [`BoundCheck`]s rather than asserted. `tune_delta` balances the two
//! effects against each other.

use crate::chain::{
    dual_exponent, l1_diff, smoothness, weighted_lp_norm, Dist, MarkovChain, DENSE_LIMIT,
    ITERATION_CAP, STATIONARY_GATE,
};
use crate::spectral::{spectral_gap, BoundCheck, BOUND_SLACK};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Algorithm for computing the regularized fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Direct LU solve of `(I - (1 - delta) P^T) x = delta mu^T`. Exact up
    /// to conditioning, which degrades like `1/delta`; dense only.
    Resolvent,
    /// Truncated restart series, renormalized. The tail after `T` terms has
    /// mass `(1 - delta)^T`, so the truncation error is transparent.
    Series,
    /// Fixed-point iteration `nu <- delta mu + (1 - delta) nu P`, which
    /// contracts in l1 at rate at least `1 - delta` per step.
    Power,
}

/// How to compute a regularized fixed point.
#[derive(Debug, Clone)]
pub struct PageRankConfig {
    /// Restart distribution `mu`.
    pub restart: Dist,
    /// Restart rate in `[0, 1]`. `0` is the base chain itself, `1` restarts
    /// every step.
    pub delta: f64,
    /// Solver choice.
    pub solver: Solver,
    /// Target l1 accuracy of the returned fixed point.
    pub tol: f64,
    /// Iteration or term cap for the series and power solvers.
    pub max_terms: usize,
}

impl PageRankConfig {
    /// Resolvent solver with tolerance `1e-12`, the configuration used for
    /// every internal bound evaluation on dense-sized chains.
    pub fn tight(restart: Dist, delta: f64) -> Self {
        PageRankConfig { restart, delta, solver: Solver::Resolvent, tol: 1e-12, max_terms: ITERATION_CAP }
    }
}

/// A computed regularized fixed point.
#[derive(Debug, Clone, Serialize)]
pub struct PageRankResult {
    /// The fixed point `pi_delta`.
    pub pi_delta: Dist,
    /// Measured l1 fixed-point residual
    /// `||x - delta mu - (1 - delta) x P||_1`.
    pub residual: f64,
    /// Series terms consumed, when the series solver ran.
    pub terms_used: Option<usize>,
}

/// Materializes `P(delta) = (1 - delta) P + delta 1 mu^T` as a chain.
///
/// Dense bases get an explicit dense matrix. Sparse bases keep their
/// structure and compose with the restart lazily, since the rank-one part
/// would otherwise fill every row.
pub fn build_pagerank(base: &MarkovChain, delta: f64, restart: &Dist) -> Result<MarkovChain> {
    if restart.len() != base.n() {
        return Err(Error::LengthMismatch { expected: base.n(), got: restart.len() });
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange(format!("delta = {delta} outside [0, 1]")));
    }
    let n = base.n();
    if base.is_sparse() {
        return Ok(MarkovChain::restart_composite(base.clone(), delta, restart.clone()));
    }
    let data = base.to_dense_data()?;
    let mut mixed = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            mixed[x * n + y] = (1.0 - delta) * data[x * n + y] + delta * restart.get(y);
        }
    }
    MarkovChain::from_dense(n, mixed, 1e-9)
}

/// Computes the fixed point of the regularized chain.
///
/// `delta = 0` falls back to the base chain's stationary solver; the other
/// formulations are degenerate there.
pub fn pagerank_stationary(base: &MarkovChain, config: &PageRankConfig) -> Result<PageRankResult> {
    let mu = &config.restart;
    let delta = config.delta;
    if mu.len() != base.n() {
        return Err(Error::LengthMismatch { expected: base.n(), got: mu.len() });
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange(format!("delta = {delta} outside [0, 1]")));
    }
    if !(config.tol > 0.0 && config.tol.is_finite()) {
        return Err(Error::OutOfRange(format!("tol = {} must be positive", config.tol)));
    }
    if delta == 0.0 {
        let pi = base.stationary_auto()?;
        let residual = base.stationary_residual(&pi)?;
        return Ok(PageRankResult { pi_delta: pi, residual, terms_used: None });
    }
    let (values, terms_used) = match config.solver {
        Solver::Resolvent => (resolvent_solve(base, delta, mu)?, None),
        Solver::Series => {
            let (v, t) = series_solve(base, delta, mu, config.tol, config.max_terms)?;
            (v, Some(t))
        }
        Solver::Power => (power_solve(base, delta, mu, config.tol, config.max_terms)?, None),
    };
    let residual = fixed_point_residual(base, delta, mu, &values);
    if residual > config.tol {
        return Err(Error::SolveFailure(format!(
            "fixed-point residual {residual} exceeds the requested tolerance {}",
            config.tol
        )));
    }
    Ok(PageRankResult { pi_delta: Dist::new(values)?, residual, terms_used })
}

/// `||x - delta mu - (1 - delta) x P||_1`.
fn fixed_point_residual(base: &MarkovChain, delta: f64, mu: &Dist, x: &[f64]) -> f64 {
    let step = base.mul_left(x);
    x.iter()
        .zip(step.iter())
        .zip(mu.values())
        .map(|((&xi, &si), &mi)| (xi - delta * mi - (1.0 - delta) * si).abs())
        .sum()
}

fn resolvent_solve(base: &MarkovChain, delta: f64, mu: &Dist) -> Result<Vec<f64>> {
    let n = base.n();
    let data = base.to_dense_data()?;
    let mut system = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            // (I - (1 - delta) P^T)[y][x]
            system[(y, x)] = -(1.0 - delta) * data[x * n + y];
        }
    }
    for d in 0..n {
        system[(d, d)] += 1.0;
    }
    let rhs = DVector::from_iterator(n, mu.values().iter().map(|&m| delta * m));
    let solved = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("resolvent system is singular".to_string()))?;
    let mut values: Vec<f64> = solved.iter().copied().collect();
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-12 {
                return Err(Error::SolveFailure(format!(
                    "resolvent produced a negative mass {v}"
                )));
            }
            *v = 0.0;
        }
    }
    let sum: f64 = values.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return Err(Error::SolveFailure(format!("resolvent mass {sum} is unusable")));
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
    Ok(values)
}

/// Renormalized partial sum of the restart series, exactly `terms` terms.
///
/// The unnormalized sum `delta sum_{t < terms} (1 - delta)^t mu P^t` has
/// mass `1 - (1 - delta)^terms`; dividing by that keeps the iterate a
/// distribution at every truncation point, and
/// `||series(terms) - pi_delta||_1 <= 2 (1 - delta)^terms`. Exists to let
/// the tests pin that truncation bound at chosen cutoffs.
#[cfg(test)]
fn series_partial(
    base: &MarkovChain,
    delta: f64,
    mu: &Dist,
    terms: usize,
) -> Vec<f64> {
    let n = base.n();
    let mut acc = vec![0.0; n];
    let mut current = mu.values().to_vec();
    let mut weight = delta;
    for t in 0..terms {
        for (a, &c) in acc.iter_mut().zip(&current) {
            *a += weight * c;
        }
        if t + 1 < terms {
            current = base.mul_left(&current);
            weight *= 1.0 - delta;
        }
    }
    let mass = 1.0 - (1.0 - delta).powi(terms as i32);
    if mass > 0.0 {
        for a in acc.iter_mut() {
            *a /= mass;
        }
    }
    acc
}

fn series_solve(
    base: &MarkovChain,
    delta: f64,
    mu: &Dist,
    tol: f64,
    max_terms: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = base.n();
    let mut acc = vec![0.0; n];
    let mut current = mu.values().to_vec();
    let mut weight = delta;
    let mut tail = 1.0 - delta; // (1 - delta)^{t+1} after adding term t
    let mut terms = 0usize;
    loop {
        for (a, &c) in acc.iter_mut().zip(&current) {
            *a += weight * c;
        }
        terms += 1;
        // Truncation error after renormalization is at most twice the tail
        // mass; stopping at tol/4 leaves room for the fixed-point residual
        // measured afterwards to meet tol.
        if tail < tol / 4.0 {
            break;
        }
        if terms >= max_terms {
            return Err(Error::NoConvergence { iterations: terms, residual: tail });
        }
        current = base.mul_left(&current);
        weight *= 1.0 - delta;
        tail *= 1.0 - delta;
    }
    let mass: f64 = acc.iter().sum();
    for a in acc.iter_mut() {
        *a /= mass;
    }
    Ok((acc, terms))
}

fn power_solve(
    base: &MarkovChain,
    delta: f64,
    mu: &Dist,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = base.n();
    let mut nu = vec![1.0 / n as f64; n];
    for it in 0..max_iter {
        let step = base.mul_left(&nu);
        let next: Vec<f64> = step
            .iter()
            .zip(mu.values())
            .map(|(&s, &m)| (1.0 - delta) * s + delta * m)
            .collect();
        let change = l1_diff(&next, &nu);
        nu = next;
        // One more application moves the iterate by at most (1 - delta) of
        // the last change, so a small step certifies a small residual.
        if change <= tol / 4.0 {
            return Ok(nu);
        }
        let _ = it;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Fixed point at the accuracy every bound evaluation uses: resolvent when
/// the chain is dense-sized and `delta` is large enough for the system to
/// be well conditioned, power iteration otherwise, both at l1 tolerance
/// `1e-12`.
pub(crate) fn solve_tight_full(
    base: &MarkovChain,
    delta: f64,
    mu: &Dist,
) -> Result<(PageRankResult, Solver)> {
    let solver = if base.n() <= DENSE_LIMIT && delta >= 1e-6 {
        Solver::Resolvent
    } else {
        Solver::Power
    };
    let config = PageRankConfig {
        restart: mu.clone(),
        delta,
        solver,
        tol: 1e-12,
        max_terms: ITERATION_CAP,
    };
    Ok((pagerank_stationary(base, &config)?, solver))
}

/// [`solve_tight_full`] reduced to the fixed point itself.
pub(crate) fn solve_tight(base: &MarkovChain, delta: f64, mu: &Dist) -> Result<Dist> {
    Ok(solve_tight_full(base, delta, mu)?.0.pi_delta)
}

/// Picks a restart rate balancing regularization bias against corruption
/// sensitivity.
///
/// The bias of the regularized fixed point scales like
/// `delta log(sup_ratio) / gamma` while its sensitivity to an
/// `epsilon`-corruption scales like `epsilon^{1/q} beta log(1/epsilon) /
/// delta`; equating the two gives
///
/// ```text
/// delta* = sqrt( gamma epsilon^{1/q} max(log(1/epsilon), 1) beta
///                / max(log(sup_ratio), 1) )
/// ```
///
/// clamped into `[1e-12, 1]`. `q` is the dual exponent of `p`, `beta` the
/// restart smoothness `||mu/pi||_{p,pi}`, and `sup_ratio` a bound on
/// `||mu/pi||_inf`. Requires `gamma` in `(0, 1]`, `epsilon` in `(0, 1)`,
/// `beta >= 1`, `p > 1`, and `sup_ratio >= 1`.
pub fn tune_delta(gamma: f64, epsilon: f64, beta: f64, p: f64, sup_ratio: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::OutOfRange(format!("gamma = {gamma} outside (0, 1]")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::OutOfRange(format!("epsilon = {epsilon} outside (0, 1)")));
    }
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::OutOfRange(format!("beta = {beta} must be finite and >= 1")));
    }
    if p.is_nan() || p <= 1.0 {
        return Err(Error::InvalidExponent { p });
    }
    if !(sup_ratio >= 1.0 && sup_ratio.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "sup_ratio = {sup_ratio} must be finite and >= 1"
        )));
    }
    let q = dual_exponent(p)?;
    let eps_pow = epsilon.powf(1.0 / q);
    let log_eps = (1.0 / epsilon).ln().max(1.0);
    let log_sup = sup_ratio.ln().max(1.0);
    let delta = (gamma * eps_pow * log_eps * beta / log_sup).sqrt();
    Ok(delta.clamp(1e-12, 1.0))
}

/// Checks `||pi - pi_delta||_1 <= sqrt(2 ||mu/pi||_inf) e^{-t gamma} + 2
/// delta t` at each `t`.
///
/// The left side is constant in `t`; each `t` trades how long the restart
/// series is allowed to mix against how much restart mass accumulates, and
/// every row is a valid bound on its own. `gamma` is validated against the
/// computed spectral gap like in the mixing check.
pub fn check_pr_close(
    chain: &MarkovChain,
    pi: &Dist,
    mu: &Dist,
    gamma: f64,
    delta: f64,
    t_values: &[u64],
) -> Result<Vec<BoundCheck>> {
    if mu.len() != chain.n() {
        return Err(Error::LengthMismatch { expected: chain.n(), got: mu.len() });
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange(format!("delta = {delta} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!("gamma = {gamma} outside [0, 1]")));
    }
    let residual = chain.stationary_residual(pi)?;
    if residual > STATIONARY_GATE {
        return Err(Error::NotStationary { residual });
    }
    let computed = spectral_gap(chain, pi)?;
    if gamma > computed.gamma + 1e-10 {
        return Err(Error::OutOfRange(format!(
            "gamma = {gamma} exceeds the computed spectral gap {}",
            computed.gamma
        )));
    }
    let front = (2.0 * smoothness(mu, pi, f64::INFINITY)?).sqrt();
    let pi_delta = solve_tight(chain, delta, mu)?;
    let lhs = l1_diff(pi.values(), pi_delta.values());
    Ok(t_values
        .iter()
        .map(|&t| {
            let rhs = front * (-(t as f64) * gamma).exp() + 2.0 * delta * t as f64;
            BoundCheck { t, lhs, rhs, holds: lhs <= rhs + BOUND_SLACK }
        })
        .collect())
}

/// One density-contraction comparison at a fixed exponent.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DensityCheck {
    /// Exponent of the weighted norm; `inf` for the essential sup.
    pub p: f64,
    /// `||pi_delta / pi||_{p,pi}`.
    pub lhs: f64,
    /// `||mu / pi||_{p,pi}`.
    pub rhs: f64,
    /// Whether the contraction holds up to rounding slack.
    pub holds: bool,
}

/// Result of [`check_density_contraction`].
#[derive(Debug, Clone, Serialize)]
pub struct DensityContraction {
    /// The essential-sup comparison.
    pub sup: DensityCheck,
    /// Finite-exponent comparisons, at `p = 2` and `p = 4`.
    pub lp: Vec<DensityCheck>,
    /// All comparisons hold.
    pub holds: bool,
}

/// Checks `||pi_delta / pi||_{p,pi} <= ||mu / pi||_{p,pi}` for the
/// essential sup and for `p` in `{2, 4}`.
///
/// The regularized fixed point averages push-forwards of `mu`, and each
/// push-forward contracts the density norm, so the average cannot exceed
/// the norm of `mu` itself. The slack here is relative as well as
/// absolute: both sides divide by entries of `pi`, which inflates rounding
/// when `pi` has tiny atoms.
pub fn check_density_contraction(
    chain: &MarkovChain,
    pi: &Dist,
    mu: &Dist,
    delta: f64,
) -> Result<DensityContraction> {
    if mu.len() != chain.n() {
        return Err(Error::LengthMismatch { expected: chain.n(), got: mu.len() });
    }
    let residual = chain.stationary_residual(pi)?;
    if residual > STATIONARY_GATE {
        return Err(Error::NotStationary { residual });
    }
    let pi_delta = solve_tight(chain, delta, mu)?;
    // mu living on supp(pi) forces pi_delta onto supp(pi) too, but rounding
    // can leave stray mass of solver-tolerance size on null states; the
    // norm below would call that infinite. Gate explicitly instead.
    for x in 0..chain.n() {
        if pi.get(x) == 0.0 && pi_delta.get(x) > 1e-9 {
            return Err(Error::UnsupportedMass { state: x });
        }
    }
    let ratio: Vec<f64> = (0..chain.n())
        .map(|x| if pi.get(x) > 0.0 { pi_delta.get(x) / pi.get(x) } else { 0.0 })
        .collect();
    let check_at = |p: f64| -> Result<DensityCheck> {
        let lhs = weighted_lp_norm(&ratio, pi, p)?;
        let rhs = smoothness(mu, pi, p)?;
        Ok(DensityCheck { p, lhs, rhs, holds: lhs <= rhs + BOUND_SLACK + 1e-12 * rhs })
    };
    let sup = check_at(f64::INFINITY)?;
    let lp = vec![check_at(2.0)?, check_at(4.0)?];
    let holds = sup.holds && lp.iter().all(|c| c.holds);
    Ok(DensityContraction { sup, lp, holds })
}

/// Checks `||pi_delta - pi_delta~||_1 <= 2 e^{-delta t} + 2 epsilon^{1/q}
/// beta t` at each `t`, where the two fixed points come from regularizing
/// the original and the corrupted chain with the same restart.
///
/// `epsilon` is the corruption size measured against `pi`, the stationary
/// distribution of the original chain; `beta = ||mu/pi||_{p,pi}` and `q` is
/// the dual exponent of `p`. With `p = 1` the factor `epsilon^{1/q}`
/// degenerates to `1` and the rows are typically vacuous. A restart with
/// mass on a `pi`-null state has infinite `beta` and is refused
/// (`UnsupportedMass`); that refusal is load-bearing, because a corruption
/// confined to `pi`-null rows is invisible to `epsilon` yet moves the fixed
/// point exactly when the restart feeds those rows. With the restart
/// supported inside `supp(pi)`, stationarity closes the support and
/// `epsilon = 0` really does pin the two fixed points together.
#[allow(clippy::too_many_arguments)]
pub fn check_corrupted_close(
    original: &MarkovChain,
    corrupted: &MarkovChain,
    pi: &Dist,
    mu: &Dist,
    p: f64,
    epsilon: f64,
    delta: f64,
    t_values: &[u64],
) -> Result<Vec<BoundCheck>> {
    if original.n() != corrupted.n() {
        return Err(Error::SizeMismatch { left: original.n(), right: corrupted.n() });
    }
    if mu.len() != original.n() {
        return Err(Error::LengthMismatch { expected: original.n(), got: mu.len() });
    }
    if !(0.0..=2.0).contains(&epsilon) {
        return Err(Error::OutOfRange(format!("epsilon = {epsilon} outside [0, 2]")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange(format!("delta = {delta} outside [0, 1]")));
    }
    let residual = original.stationary_residual(pi)?;
    if residual > STATIONARY_GATE {
        return Err(Error::NotStationary { residual });
    }
    let q = dual_exponent(p)?;
    let eps_pow = if q.is_infinite() { 1.0 } else { epsilon.powf(1.0 / q) };
    let beta = smoothness(mu, pi, p)?;
    let fixed = solve_tight(original, delta, mu)?;
    let fixed_corrupted = solve_tight(corrupted, delta, mu)?;
    let lhs = l1_diff(fixed.values(), fixed_corrupted.values());
    Ok(t_values
        .iter()
        .map(|&t| {
            let rhs = 2.0 * (-delta * t as f64).exp() + 2.0 * eps_pow * beta * t as f64;
            BoundCheck { t, lhs, rhs, holds: lhs <= rhs + BOUND_SLACK }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{measure_corruption, StationaryMethod};
    use crate::spectral::spectral_gap;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lazy_complete(n: usize) -> MarkovChain {
        let u = 1.0 / n as f64;
        let rows = (0..n)
            .map(|x| (0..n).map(|y| 0.5 * u + if x == y { 0.5 } else { 0.0 }).collect())
            .collect();
        MarkovChain::from_rows(rows).unwrap()
    }

    fn random_dense(n: usize, seed: u64) -> (MarkovChain, Dist) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / sum).collect()
            })
            .collect();
        let chain = MarkovChain::from_rows(rows).unwrap();
        let pi = chain.stationary(StationaryMethod::Direct, 1e-12, 0).unwrap();
        (chain, pi)
    }

    fn random_reversible(n: usize, seed: u64) -> (MarkovChain, Dist) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.1).collect();
        let sum: f64 = raw.iter().sum();
        let pi: Vec<f64> = raw.into_iter().map(|v| v / sum).collect();
        let mut rows = vec![vec![0.0; n]; n];
        for x in 0..n {
            for y in 0..n {
                if y != x {
                    rows[x][y] = 0.5 * (pi[y] / pi[x]).min(1.0) / n as f64;
                }
            }
            let moved: f64 = rows[x].iter().sum();
            rows[x][x] = 1.0 - moved;
        }
        (MarkovChain::from_rows(rows).unwrap(), Dist::new(pi).unwrap())
    }

    fn config(restart: Dist, delta: f64, solver: Solver) -> PageRankConfig {
        PageRankConfig { restart, delta, solver, tol: 1e-10, max_terms: ITERATION_CAP }
    }

    #[test]
    fn identity_base_with_uniform_restart_mixes_explicitly() {
        let base = MarkovChain::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let pr = build_pagerank(&base, 0.5, &Dist::uniform(2)).unwrap();
        assert_eq!(pr.row(0), vec![0.75, 0.25]);
        assert_eq!(pr.row(1), vec![0.25, 0.75]);
    }

    #[test]
    fn sparse_bases_compose_lazily_and_match_the_dense_build() {
        let base = MarkovChain::from_triplets(
            3,
            vec![(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)],
            1e-10,
        )
        .unwrap();
        let mu = Dist::new(vec![0.5, 0.25, 0.25]).unwrap();
        let pr = build_pagerank(&base, 0.3, &mu).unwrap();
        assert!(pr.restart_parts().is_some());
        let dense = MarkovChain::from_dense(3, base.to_dense_data().unwrap(), 1e-10).unwrap();
        let pr_dense = build_pagerank(&dense, 0.3, &mu).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert!((pr.get(x, y) - pr_dense.get(x, y)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn all_solvers_agree() {
        let (base, _) = random_dense(12, 3);
        let mu = Dist::uniform(12);
        for delta in [0.05, 0.3, 0.9] {
            let r = pagerank_stationary(&base, &config(mu.clone(), delta, Solver::Resolvent))
                .unwrap();
            let s =
                pagerank_stationary(&base, &config(mu.clone(), delta, Solver::Series)).unwrap();
            let p =
                pagerank_stationary(&base, &config(mu.clone(), delta, Solver::Power)).unwrap();
            assert!(s.terms_used.is_some());
            assert!(l1_diff(r.pi_delta.values(), s.pi_delta.values()) < 1e-9);
            assert!(l1_diff(r.pi_delta.values(), p.pi_delta.values()) < 1e-9);
            assert!(r.residual < 1e-10);
        }
    }

    #[test]
    fn full_restart_returns_the_restart_distribution() {
        let (base, _) = random_dense(6, 8);
        let mu = Dist::new(vec![0.4, 0.1, 0.1, 0.1, 0.1, 0.2]).unwrap();
        for solver in [Solver::Resolvent, Solver::Series, Solver::Power] {
            let r = pagerank_stationary(&base, &config(mu.clone(), 1.0, solver)).unwrap();
            assert!(l1_diff(r.pi_delta.values(), mu.values()) < 1e-12, "{solver:?}");
        }
    }

    #[test]
    fn zero_restart_rate_recovers_the_base_stationary() {
        let (base, pi) = random_dense(7, 21);
        let r = pagerank_stationary(&base, &config(Dist::uniform(7), 0.0, Solver::Series))
            .unwrap();
        assert!(l1_diff(r.pi_delta.values(), pi.values()) < 1e-9);
        assert!(r.terms_used.is_none());
    }

    #[test]
    fn fixed_point_satisfies_its_equation_on_the_composite_chain() {
        let base = MarkovChain::from_triplets(
            4,
            vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)],
            1e-10,
        )
        .unwrap();
        let mu = Dist::uniform(4);
        let r = pagerank_stationary(&base, &config(mu.clone(), 0.2, Solver::Power)).unwrap();
        let pr = build_pagerank(&base, 0.2, &mu).unwrap();
        let stepped = pr.mul_left(r.pi_delta.values());
        assert!(l1_diff(&stepped, r.pi_delta.values()) < 1e-10);
    }

    #[test]
    fn series_truncation_error_is_bounded_by_twice_the_tail_mass() {
        let (base, _) = random_dense(9, 17);
        let mu = Dist::uniform(9);
        for delta in [0.1, 0.4] {
            let exact = resolvent_solve(&base, delta, &mu).unwrap();
            for terms in [1usize, 2, 5, 10, 30] {
                let truncated = series_partial(&base, delta, &mu, terms);
                let err = l1_diff(&truncated, &exact);
                let tail = 2.0 * (1.0 - delta).powi(terms as i32);
                assert!(
                    err <= tail + 1e-9,
                    "delta {delta}, {terms} terms: error {err} > {tail}"
                );
            }
        }
    }

    #[test]
    fn tuned_delta_matches_the_closed_form() {
        let d = tune_delta(0.5, 0.01, 1.0, f64::INFINITY, std::f64::consts::E).unwrap();
        let expected = (0.5 * 0.01 * (100.0f64).ln()).sqrt();
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.151_742_7).abs() < 1e-6, "d = {d}");
    }

    #[test]
    fn tuned_delta_is_monotone_in_each_rate_parameter() {
        let gammas = [0.05, 0.1, 0.3, 0.7, 1.0];
        let epsilons = [1e-4, 1e-3, 1e-2, 0.05, 0.1];
        let betas = [1.0, 2.0, 5.0, 20.0];
        let mut prev = 0.0;
        for &g in &gammas {
            let d = tune_delta(g, 0.01, 2.0, f64::INFINITY, 4.0).unwrap();
            assert!(d >= prev);
            prev = d;
        }
        prev = 0.0;
        for &e in &epsilons {
            let d = tune_delta(0.4, e, 2.0, f64::INFINITY, 4.0).unwrap();
            assert!(d >= prev, "epsilon = {e}");
            prev = d;
        }
        prev = 0.0;
        for &b in &betas {
            let d = tune_delta(0.4, 0.01, b, f64::INFINITY, 4.0).unwrap();
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn weaker_norm_exponents_tune_larger_restart_rates() {
        let at_2 = tune_delta(0.5, 0.01, 1.5, 2.0, 4.0).unwrap();
        let at_inf = tune_delta(0.5, 0.01, 1.5, f64::INFINITY, 4.0).unwrap();
        assert!(at_2 > at_inf);
    }

    #[test]
    fn tune_delta_rejects_out_of_range_inputs() {
        assert!(tune_delta(0.0, 0.01, 1.0, 2.0, 1.0).is_err());
        assert!(tune_delta(0.5, 0.0, 1.0, 2.0, 1.0).is_err());
        assert!(tune_delta(0.5, 1.0, 1.0, 2.0, 1.0).is_err());
        assert!(tune_delta(0.5, 0.01, 0.5, 2.0, 1.0).is_err());
        assert!(matches!(
            tune_delta(0.5, 0.01, 1.0, 1.0, 1.0).unwrap_err(),
            Error::InvalidExponent { .. }
        ));
        assert!(tune_delta(0.5, 0.01, 1.0, 2.0, 0.9).is_err());
    }

    #[test]
    fn regularization_bias_bound_holds_row_by_row() {
        for n in [8, 24] {
            let base = lazy_complete(n);
            let pi = Dist::uniform(n);
            let mu = Dist::point_mass(n, 0).unwrap();
            for delta in [0.01, 0.1, 0.4] {
                let ts: Vec<u64> = (0..=40).collect();
                let rows = check_pr_close(&base, &pi, &mu, 0.5, delta, &ts).unwrap();
                for row in rows {
                    assert!(
                        row.holds,
                        "n {n}, delta {delta}, t {}: lhs {} > rhs {}",
                        row.t, row.lhs, row.rhs
                    );
                }
            }
        }
    }

    #[test]
    fn bias_bound_rejects_overstated_gamma() {
        let (base, pi) = random_reversible(6, 5);
        let err = check_pr_close(&base, &pi, &Dist::uniform(6), 0.9999, 0.1, &[1]).unwrap_err();
        assert!(matches!(err, Error::OutOfRange(_)), "{err:?}");
    }

    #[test]
    fn density_contraction_holds_for_skewed_restarts() {
        for seed in [2, 12] {
            let (base, pi) = random_reversible(10, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
            let raw: Vec<f64> = (0..10).map(|_| rng.gen::<f64>().powi(3) + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            let mu = Dist::new(raw.into_iter().map(|v| v / sum).collect()).unwrap();
            for delta in [0.05, 0.5] {
                let res = check_density_contraction(&base, &pi, &mu, delta).unwrap();
                assert!(
                    res.holds,
                    "seed {seed}, delta {delta}: sup {}/{}, lp {:?}",
                    res.sup.lhs, res.sup.rhs, res.lp
                );
                assert_eq!(res.lp.len(), 2);
            }
        }
    }

    #[test]
    fn stationary_restart_has_no_bias_and_unit_density() {
        let (base, pi) = random_dense(8, 30);
        let rows = check_pr_close(&base, &pi, &pi, 0.0, 0.3, &[0, 5]).unwrap();
        assert!(rows[0].lhs < 1e-10, "restarting at pi moved the fixed point");
        let res = check_density_contraction(&base, &pi, &pi, 0.3).unwrap();
        assert!((res.sup.lhs - 1.0).abs() < 1e-9);
        assert!((res.sup.rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corruption_sensitivity_bound_holds_for_a_measured_corruption() {
        let (base, pi) = random_dense(8, 14);
        // Push 4% of row 2's mass toward state 0 and renormalize.
        let mut rows: Vec<Vec<f64>> = (0..8).map(|x| base.row(x)).collect();
        rows[2][0] += 0.04;
        let sum: f64 = rows[2].iter().sum();
        for v in rows[2].iter_mut() {
            *v /= sum;
        }
        let corrupted = MarkovChain::from_rows(rows).unwrap();
        let report = measure_corruption(&base, &corrupted, &pi).unwrap();
        assert!(report.epsilon > 0.0);
        let mu = Dist::uniform(8);
        let ts: Vec<u64> = (0..=30).collect();
        for p in [2.0, f64::INFINITY] {
            let rows =
                check_corrupted_close(&base, &corrupted, &pi, &mu, p, report.epsilon, 0.2, &ts)
                    .unwrap();
            for row in rows {
                assert!(
                    row.holds,
                    "p {p}, t {}: lhs {} > rhs {}",
                    row.t, row.lhs, row.rhs
                );
            }
        }
    }

    #[test]
    fn corruption_on_null_rows_is_invisible_to_epsilon_and_refused() {
        // State 2 is unreachable: pi = (2/3, 1/3, 0). The corruption only
        // rewrites row 2, so the measured epsilon is exactly zero.
        let original = MarkovChain::from_rows(vec![
            vec![0.5, 0.5, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let corrupted = MarkovChain::from_rows(vec![
            vec![0.5, 0.5, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let pi = Dist::new(vec![2.0 / 3.0, 1.0 / 3.0, 0.0]).unwrap();
        let report = measure_corruption(&original, &corrupted, &pi).unwrap();
        assert_eq!(report.epsilon, 0.0);

        // A uniform restart routes mass through the rewritten row, so the
        // fixed points genuinely differ even though epsilon is zero. That
        // restart has infinite density against pi, and the checker refuses
        // it rather than certifying a bound whose hypotheses fail.
        let mu = Dist::uniform(3);
        let a = solve_tight(&original, 0.3, &mu).unwrap();
        let b = solve_tight(&corrupted, 0.3, &mu).unwrap();
        assert!(l1_diff(a.values(), b.values()) > 1e-3);
        let err =
            check_corrupted_close(&original, &corrupted, &pi, &mu, 2.0, 0.0, 0.3, &[0, 200])
                .unwrap_err();
        assert!(matches!(err, Error::UnsupportedMass { .. }), "{err:?}");

        // Restricted to the support of pi the hypothesis holds, the null-row
        // corruption is unreachable, and epsilon zero pins the fixed points.
        let mu_in = Dist::new(vec![0.5, 0.5, 0.0]).unwrap();
        let rows = check_corrupted_close(
            &original, &corrupted, &pi, &mu_in, 2.0, 0.0, 0.3, &[0, 50],
        )
        .unwrap();
        for row in rows {
            assert!(row.lhs < 1e-10, "supported restart still moved: {}", row.lhs);
            assert!(row.holds);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn regularized_gap_is_at_least_the_general_floor(
            seed in 0u64..1000, n in 2usize..10, delta in 0.05f64..0.95
        ) {
            let (base, _) = random_dense(n, seed);
            let mu = Dist::uniform(n);
            let pr = build_pagerank(&base, delta, &mu).unwrap();
            let pi_delta = solve_tight(&base, delta, &mu).unwrap();
            let gap = spectral_gap(&pr, &pi_delta).unwrap();
            // The regularized chain contracts l2(pi_delta) at least as fast
            // as the square root of its per-step restart retention.
            let floor = 1.0 - (1.0 - delta).sqrt();
            prop_assert!(
                gap.gamma >= floor - 1e-9,
                "gamma {} below floor {} at delta {}", gap.gamma, floor, delta
            );
        }

        #[test]
        fn regularized_gap_of_a_reversible_base_is_at_least_delta(
            seed in 0u64..1000, n in 2usize..10, delta in 0.05f64..0.95
        ) {
            let (base, _) = random_reversible(n, seed);
            let mu = Dist::uniform(n);
            let pr = build_pagerank(&base, delta, &mu).unwrap();
            let pi_delta = solve_tight(&base, delta, &mu).unwrap();
            let gap = spectral_gap(&pr, &pi_delta).unwrap();
            prop_assert!(
                gap.gamma >= delta - 1e-9,
                "gamma {} below delta {}", gap.gamma, delta
            );
        }

        #[test]
        fn solvers_agree_within_tolerance(
            seed in 0u64..1000, n in 2usize..12, delta in 0.02f64..1.0
        ) {
            let (base, _) = random_dense(n, seed);
            let mu = Dist::uniform(n);
            let r = pagerank_stationary(&base, &config(mu.clone(), delta, Solver::Resolvent))?;
            let s = pagerank_stationary(&base, &config(mu.clone(), delta, Solver::Series))?;
            let p = pagerank_stationary(&base, &config(mu, delta, Solver::Power))?;
            prop_assert!(l1_diff(r.pi_delta.values(), s.pi_delta.values()) < 1e-9);
            prop_assert!(l1_diff(r.pi_delta.values(), p.pi_delta.values()) < 1e-9);
        }

        #[test]
        fn density_contraction_holds_generically(
            seed in 0u64..500, n in 2usize..9, delta in 0.05f64..1.0
        ) {
            let (base, pi) = random_reversible(n, seed);
            let res = check_density_contraction(&base, &pi, &Dist::uniform(n), delta)?;
            prop_assert!(res.holds, "sup {}/{} lp {:?}", res.sup.lhs, res.sup.rhs, res.lp);
        }
    }
}
