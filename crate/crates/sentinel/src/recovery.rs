//! End-to-end recovery of a stationary distribution from a corrupted chain.
//!
//! The recovery algorithm never sees the uncorrupted chain. It takes the
//! corrupted transition matrix, a restart distribution, and four numbers the
//! caller asserts about the hidden original (spectral gap, corruption level,
//! restart smoothness, smoothness exponent), picks a restart weight from
//! them, and returns the regularized fixed point together with a certificate:
//! an explicit bound on the total variation distance to the hidden stationary
//! distribution that is valid whenever the caller's assertions are.
//!
//! The certificate is the sum of two closed-form curves, each minimized over
//! an integer horizon: a regularization-bias term that grows with the restart
//! weight and a corruption-sensitivity term that shrinks with it. Both are
//! computable from the inputs alone, so candidate restart weights can be
//! compared without solving anything; the fixed point is solved once, at the
//! winner.

use serde::{Deserialize, Serialize};

use crate::chain::{dual_exponent, Dist, MarkovChain};
use crate::error::{Error, Result};
use crate::pagerank::{solve_tight_full, tune_delta, Solver};

/// Restart weight used when the corruption level is exactly zero, and the
/// smallest weight the candidate grid will consider. Small enough that the
/// bias term is negligible, large enough to keep the weight strictly
/// positive so the regularized fixed point stays unique.
const DELTA_FLOOR: f64 = 1e-12;

/// Largest horizon considered when minimizing a certified-bound curve over
/// the integers. Beyond this the linear term of either curve dominates any
/// regime where the bound is worth reporting.
const T_MAX: u64 = 1_000_000;

/// How [`recover`] searches for the restart weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refine {
    /// Use the tuned weight directly.
    None,
    /// Evaluate this many log-spaced candidates spanning a decade on each
    /// side of the tuned weight and keep the smallest certified bound.
    Grid(usize),
}

/// The parameters a recovery ran with, echoed for the record.
///
/// All of these are caller assertions about the hidden uncorrupted chain;
/// the certificate in [`RecoveryResult`] is conditional on them.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RecoveryInputs {
    /// Asserted lower bound on the spectral gap of the uncorrupted chain.
    pub gamma: f64,
    /// Asserted upper bound on the pi-weighted l1 row corruption.
    pub epsilon: f64,
    /// Asserted upper bound on the restart smoothness `||mu/pi||_{p,pi}`.
    pub beta: f64,
    /// Smoothness exponent. Serialized as the string `"inf"` when infinite,
    /// since JSON has no literal for it.
    #[serde(serialize_with = "ser_exponent")]
    pub p: f64,
    /// Dual exponent `q = p / (p - 1)`.
    pub q: f64,
    /// Asserted upper bound on `||mu/pi||_inf`, which enters the bias term
    /// and the tuner's logarithm.
    pub sup_ratio: f64,
}

/// One evaluated restart weight and the certificate it yields.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeltaCandidate {
    /// The restart weight.
    pub delta: f64,
    /// Certified total variation bound at this weight.
    pub certified_bound: f64,
}

/// Everything [`recover`] measured on the way to its answer.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryDiagnostics {
    /// Solver used for the final fixed point.
    pub solver: Solver,
    /// l1 fixed-point residual of `pi_hat` under the regularized chain.
    pub residual: f64,
    /// Regularization-bias half of the certificate, in l1, at the winning
    /// weight.
    pub bias_term: f64,
    /// Corruption-sensitivity half of the certificate, in l1, at the
    /// winning weight.
    pub corruption_term: f64,
    /// Horizon minimizing the bias term.
    pub t_bias: u64,
    /// Horizon minimizing the corruption term; 0 when `epsilon` is 0 and
    /// the term vanishes without a horizon.
    pub t_corruption: u64,
    /// Every candidate evaluated, in ascending weight order.
    pub delta_candidates: Vec<DeltaCandidate>,
    /// True when the certified bound is at least 1, in which case it says
    /// nothing: total variation never exceeds 1.
    pub vacuous: bool,
    /// Realized distance to the true stationary distribution, filled in by
    /// [`RecoveryResult::with_realized`] when a caller holds ground truth.
    /// [`recover`] itself never sees the true chain and always leaves this
    /// empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realized_tv: Option<f64>,
}

/// A recovered stationary distribution with its certificate.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryResult {
    /// The recovered distribution: the regularized fixed point of the
    /// corrupted chain at `delta_used`.
    pub pi_hat: Dist,
    /// Restart weight the final solve used.
    pub delta_used: f64,
    /// Bound on the total variation distance between `pi_hat` and the
    /// hidden stationary distribution, certified from the inputs alone.
    pub certified_bound: f64,
    /// Echo of the caller-asserted parameters.
    pub inputs: RecoveryInputs,
    /// Solver and certificate internals.
    pub diagnostics: RecoveryDiagnostics,
}

impl RecoveryResult {
    /// Attaches a realized distance measured against ground truth.
    ///
    /// Only harnesses that know the true stationary distribution can call
    /// this; it exists so experiment output can carry the certified and
    /// realized numbers side by side.
    pub fn with_realized(mut self, tv: f64) -> Self {
        self.diagnostics.realized_tv = Some(tv);
        self
    }
}

fn ser_exponent<S: serde::Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

/// Minimizes a convex curve over integer horizons in `[1, T_MAX]`.
///
/// Ternary search; both certificate curves are sums of a decaying
/// exponential and an increasing linear term, so they are convex and the
/// bracket always contains a minimizer.
fn min_over_horizon(f: impl Fn(u64) -> f64) -> (u64, f64) {
    let mut lo = 1u64;
    let mut hi = T_MAX;
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut best = (lo, f(lo));
    for t in lo + 1..=hi {
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

/// Smallest l1 bias bound over horizons: `front e^{-t gamma} + 2 delta t`
/// with `front = sqrt(2 sup_ratio)`.
fn bias_bound_l1(front: f64, gamma: f64, delta: f64) -> (u64, f64) {
    min_over_horizon(|t| {
        let tf = t as f64;
        front * (-tf * gamma).exp() + 2.0 * delta * tf
    })
}

/// Smallest l1 corruption-sensitivity bound over horizons:
/// `2 e^{-delta t} + slope t` with `slope = 2 epsilon^{1/q} beta`.
fn corruption_bound_l1(slope: f64, delta: f64) -> (u64, f64) {
    min_over_horizon(|t| {
        let tf = t as f64;
        2.0 * (-delta * tf).exp() + slope * tf
    })
}

/// Log-spaced candidate weights spanning `[delta_star / 10, 10 delta_star]`.
///
/// Spacing happens before clamping, so with odd `k` the tuned weight itself
/// sits in the middle of the grid (up to log/exp roundoff) even when the
/// ends clamp to the valid range. Clamp collisions are deduplicated; the
/// result is strictly increasing and never empty.
fn candidate_grid(delta_star: f64, k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![delta_star];
    }
    let lo = (delta_star / 10.0).ln();
    let hi = (delta_star * 10.0).ln();
    let mut out: Vec<f64> = Vec::with_capacity(k);
    for i in 0..k {
        let frac = i as f64 / (k - 1) as f64;
        let d = (lo + (hi - lo) * frac).exp().clamp(DELTA_FLOOR, 1.0);
        if out.last().map(|&prev| d > prev).unwrap_or(true) {
            out.push(d);
        }
    }
    out
}

/// Recovers the stationary distribution hidden behind a corrupted chain.
///
/// The caller asserts four facts about the uncorrupted chain and the
/// restart `mu`: `gamma` lower-bounds its spectral gap, `epsilon`
/// upper-bounds the pi-weighted l1 row corruption, `beta` upper-bounds
/// `||mu/pi||_{p,pi}`, and `sup_ratio` upper-bounds `||mu/pi||_inf`. When
/// those hold, the returned `certified_bound` is a valid bound on
/// `d_TV(pi_hat, pi)`. None of them are estimated or checked here; garbage
/// assertions yield a garbage certificate.
///
/// `sup_ratio` defaults to `beta` when `p` is infinite (they bound the same
/// norm) and to `e` otherwise, the value at which the tuner's logarithm
/// bottoms out. Callers with finite `p` should pass a real sup bound when
/// they have one; the default is an assertion like any other.
///
/// With `Refine::Grid(k)`, `k` log-spaced weights around the tuned one are
/// compared by certified bound, which costs no solves; ties go to the
/// smallest weight. The fixed point is solved only at the winner. The
/// output is a deterministic function of the arguments, byte for byte, and
/// `epsilon = 0` short-circuits the corruption term: the weight drops to a
/// floor and the certificate is pure bias.
#[allow(clippy::too_many_arguments)]
pub fn recover(
    corrupted: &MarkovChain,
    mu: &Dist,
    gamma: f64,
    epsilon: f64,
    beta: f64,
    p: f64,
    sup_ratio: Option<f64>,
    refine: Refine,
) -> Result<RecoveryResult> {
    let inputs = validated_inputs(corrupted, mu, gamma, epsilon, beta, p, sup_ratio)?;
    let delta_star = if epsilon == 0.0 {
        DELTA_FLOOR
    } else {
        tune_delta(gamma, epsilon, beta, p, inputs.sup_ratio)?
    };
    let candidates = match refine {
        Refine::None => vec![delta_star],
        Refine::Grid(k) => candidate_grid(delta_star, k),
    };
    run_at_candidates(corrupted, mu, inputs, &candidates)
}

/// [`recover`] pinned to one caller-chosen restart weight instead of the
/// tuned one. The certificate is evaluated at exactly that weight, so sweep
/// harnesses can chart how the bound and the realized error move with it.
#[allow(clippy::too_many_arguments)]
pub(crate) fn recover_at(
    corrupted: &MarkovChain,
    mu: &Dist,
    gamma: f64,
    epsilon: f64,
    beta: f64,
    p: f64,
    sup_ratio: Option<f64>,
    delta: f64,
) -> Result<RecoveryResult> {
    let inputs = validated_inputs(corrupted, mu, gamma, epsilon, beta, p, sup_ratio)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::OutOfRange(format!("delta = {delta} outside (0, 1]")));
    }
    run_at_candidates(corrupted, mu, inputs, &[delta])
}

fn validated_inputs(
    corrupted: &MarkovChain,
    mu: &Dist,
    gamma: f64,
    epsilon: f64,
    beta: f64,
    p: f64,
    sup_ratio: Option<f64>,
) -> Result<RecoveryInputs> {
    if mu.len() != corrupted.n() {
        return Err(Error::LengthMismatch { expected: corrupted.n(), got: mu.len() });
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::OutOfRange(format!("gamma = {gamma} outside (0, 1]")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::OutOfRange(format!("epsilon = {epsilon} outside [0, 1)")));
    }
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::OutOfRange(format!("beta = {beta} must be finite and >= 1")));
    }
    if p.is_nan() || p <= 1.0 {
        return Err(Error::InvalidExponent { p });
    }
    let q = dual_exponent(p)?;
    let sup_ratio = match sup_ratio {
        Some(s) => {
            if !(s >= 1.0 && s.is_finite()) {
                return Err(Error::OutOfRange(format!("sup_ratio = {s} must be finite and >= 1")));
            }
            s
        }
        None if p.is_infinite() => beta,
        None => std::f64::consts::E,
    };
    Ok(RecoveryInputs { gamma, epsilon, beta, p, q, sup_ratio })
}

fn run_at_candidates(
    corrupted: &MarkovChain,
    mu: &Dist,
    inputs: RecoveryInputs,
    candidates: &[f64],
) -> Result<RecoveryResult> {
    let front = (2.0 * inputs.sup_ratio).sqrt();
    let no_corruption = inputs.epsilon == 0.0;
    let slope =
        if no_corruption { 0.0 } else { 2.0 * inputs.epsilon.powf(1.0 / inputs.q) * inputs.beta };

    let evaluated: Vec<DeltaCandidate> = candidates
        .iter()
        .map(|&delta| {
            let bias = bias_bound_l1(front, inputs.gamma, delta).1;
            let corr = if no_corruption { 0.0 } else { corruption_bound_l1(slope, delta).1 };
            DeltaCandidate { delta, certified_bound: (bias + corr) / 2.0 }
        })
        .collect();
    // Strict comparison plus ascending candidate order makes ties resolve
    // to the smallest weight.
    let mut best = 0;
    for (i, c) in evaluated.iter().enumerate() {
        if c.certified_bound < evaluated[best].certified_bound {
            best = i;
        }
    }
    let delta_used = evaluated[best].delta;
    let certified_bound = evaluated[best].certified_bound;
    let (t_bias, bias_term) = bias_bound_l1(front, inputs.gamma, delta_used);
    let (t_corruption, corruption_term) =
        if no_corruption { (0, 0.0) } else { corruption_bound_l1(slope, delta_used) };

    let (solved, solver) = solve_tight_full(corrupted, delta_used, mu)?;

    Ok(RecoveryResult {
        pi_hat: solved.pi_delta,
        delta_used,
        certified_bound,
        inputs,
        diagnostics: RecoveryDiagnostics {
            solver,
            residual: solved.residual,
            bias_term,
            corruption_term,
            t_bias,
            t_corruption,
            delta_candidates: evaluated,
            vacuous: certified_bound >= 1.0,
            realized_tv: None,
        },
    })
}

/// Recovery specialized to spread-out chains with a uniform restart.
///
/// The caller asserts that the hidden stationary distribution satisfies
/// `alpha / n <= pi(x) <= 1 / (alpha n)` for every state, and that the
/// average l1 row change of the corruption, `(1/n) sum_x ||P(x,.) -
/// P~(x,.)||_1`, is at most `epsilon_rows`. A rewrite of a `rho`-fraction
/// of rows changes each by l1 at most 2, so `epsilon_rows = 2 rho` covers
/// it. Under those assertions the uniform restart has `||mu/pi||_inf <=
/// 1/alpha` and the pi-weighted corruption is at most `epsilon_rows /
/// alpha`, so this delegates to [`recover`] with `mu` uniform, `p`
/// infinite, `beta = 1/alpha`, and a 9-point refinement grid.
pub fn recover_spread(
    corrupted: &MarkovChain,
    alpha: f64,
    epsilon_rows: f64,
    gamma: f64,
) -> Result<RecoveryResult> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} outside (0, 1]")));
    }
    if !(epsilon_rows >= 0.0 && epsilon_rows.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "epsilon_rows = {epsilon_rows} must be finite and >= 0"
        )));
    }
    let mu = Dist::uniform(corrupted.n());
    recover(
        corrupted,
        &mu,
        gamma,
        epsilon_rows / alpha,
        1.0 / alpha,
        f64::INFINITY,
        None,
        Refine::Grid(9),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{corrupt, make_test_chain, CorruptionKind, CorruptionSpec, TestChainKind};
    use crate::chain::{smoothness, tv_distance};
    use crate::spectral::spectral_gap;

    fn absorbing_spec(row: usize, seed: u64) -> CorruptionSpec {
        CorruptionSpec {
            kind: CorruptionKind::Absorbing,
            budget: 2.0,
            target_rows: Some(vec![row]),
            seed,
        }
    }

    #[test]
    fn horizon_search_matches_brute_force() {
        let bias_params = [
            (std::f64::consts::SQRT_2, 1e-6, 1e-12),
            (std::f64::consts::SQRT_2, 0.01, 1e-4),
            (std::f64::consts::SQRT_2, 0.5, 0.1),
            (3.0, 1.0, 1.0),
            (3.0, 0.5, 1e-12),
            (1.5, 1e-4, 1e-7),
        ];
        for &(front, gamma, delta) in &bias_params {
            let f = |t: u64| {
                let tf = t as f64;
                front * (-tf * gamma).exp() + 2.0 * delta * tf
            };
            let brute = (1..=T_MAX).map(&f).fold(f64::INFINITY, f64::min);
            let (t, v) = bias_bound_l1(front, gamma, delta);
            assert_eq!(v, brute, "bias params ({front}, {gamma}, {delta})");
            assert_eq!(f(t), v);
        }
        let corr_params =
            [(1e-9, 1e-12), (1e-4, 1e-4), (0.3, 0.1), (2.0, 1.0), (1e-4, 0.5), (0.05, 1e-6)];
        for &(slope, delta) in &corr_params {
            let f = |t: u64| {
                let tf = t as f64;
                2.0 * (-delta * tf).exp() + slope * tf
            };
            let brute = (1..=T_MAX).map(&f).fold(f64::INFINITY, f64::min);
            let (t, v) = corruption_bound_l1(slope, delta);
            assert_eq!(v, brute, "corr params ({slope}, {delta})");
            assert_eq!(f(t), v);
        }
    }

    #[test]
    fn candidate_grid_spans_a_decade_each_way() {
        let grid = candidate_grid(0.05, 9);
        assert_eq!(grid.len(), 9);
        assert!((grid[0] - 0.005).abs() < 1e-12);
        assert!((grid[8] - 0.5).abs() < 1e-12);
        assert!((grid[4] - 0.05).abs() < 1e-12 * 0.05);
        for w in grid.windows(2) {
            assert!(w[1] > w[0]);
        }

        // Candidates above 1 collapse onto the clamp; the tuned weight
        // stays at the middle index of whatever survives.
        let clamped = candidate_grid(0.5, 9);
        assert!(clamped.len() < 9);
        assert!(clamped.iter().all(|&d| d <= 1.0));
        assert_eq!(*clamped.last().unwrap(), 1.0);
        assert!((clamped[4] - 0.5).abs() < 1e-12);
        for w in clamped.windows(2) {
            assert!(w[1] > w[0]);
        }

        let floor = candidate_grid(DELTA_FLOOR, 9);
        assert_eq!(floor[0], DELTA_FLOOR);
        for w in floor.windows(2) {
            assert!(w[1] > w[0]);
        }

        assert_eq!(candidate_grid(0.3, 1), vec![0.3]);
        assert_eq!(candidate_grid(0.3, 0), vec![0.3]);
    }

    #[test]
    fn unrefined_delta_is_the_tuned_one() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 32, 1).unwrap();
        let spec = CorruptionSpec {
            kind: CorruptionKind::PerRowTv,
            budget: 0.02,
            target_rows: None,
            seed: 7,
        };
        let (corrupted, report) = corrupt(&chain, &pi, &spec).unwrap();
        let mu = Dist::uniform(32);
        let result = recover(
            &corrupted,
            &mu,
            0.5,
            report.epsilon,
            1.0,
            f64::INFINITY,
            None,
            Refine::None,
        )
        .unwrap();
        let tuned = tune_delta(0.5, report.epsilon, 1.0, f64::INFINITY, 1.0).unwrap();
        assert_eq!(result.delta_used, tuned);
        assert_eq!(result.diagnostics.delta_candidates.len(), 1);
        assert_eq!(result.inputs.q, 1.0);
        assert_eq!(result.inputs.sup_ratio, 1.0);
    }

    #[test]
    fn certificate_holds_on_seeded_corruptions() {
        let cases = [
            (TestChainKind::LazyComplete, 64, CorruptionKind::PerRowTv, 0.01),
            (TestChainKind::LazyComplete, 48, CorruptionKind::RowReplacement, 0.05),
            (TestChainKind::RandomReversible, 30, CorruptionKind::PerRowTv, 0.01),
            (TestChainKind::RandomReversible, 24, CorruptionKind::RowReplacement, 0.04),
            (TestChainKind::LazyCycle, 16, CorruptionKind::PerRowTv, 0.02),
        ];
        for (i, &(kind, n, ckind, budget)) in cases.iter().enumerate() {
            let seed = 100 + i as u64;
            let (chain, pi) = make_test_chain(kind, n, seed).unwrap();
            let spec =
                CorruptionSpec { kind: ckind, budget, target_rows: None, seed: seed ^ 0xabcd };
            let (corrupted, report) = corrupt(&chain, &pi, &spec).unwrap();
            let gamma = spectral_gap(&chain, &pi).unwrap().gamma;
            let mu = Dist::uniform(n);
            let beta = smoothness(&mu, &pi, f64::INFINITY).unwrap();
            let result = recover(
                &corrupted,
                &mu,
                gamma,
                report.epsilon,
                beta,
                f64::INFINITY,
                None,
                Refine::Grid(9),
            )
            .unwrap();
            let realized = tv_distance(&result.pi_hat, &pi).unwrap();
            assert!(
                realized <= result.certified_bound + 1e-8,
                "case {i}: realized {realized} above certificate {}",
                result.certified_bound
            );
            assert!(result.diagnostics.residual <= 1e-11);
        }
    }

    #[test]
    fn absorbing_row_defeats_naive_stationary_but_not_recovery() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 128, 3).unwrap();
        let (corrupted, report) = corrupt(&chain, &pi, &absorbing_spec(5, 11)).unwrap();
        assert!(report.epsilon <= 0.01);

        let naive = corrupted.stationary_auto().unwrap();
        let naive_tv = tv_distance(&naive, &pi).unwrap();
        assert!(naive_tv >= 0.9, "naive stationary survived: tv = {naive_tv}");

        let mu = Dist::uniform(128);
        let result = recover(
            &corrupted,
            &mu,
            0.5,
            report.epsilon,
            1.0,
            f64::INFINITY,
            None,
            Refine::Grid(9),
        )
        .unwrap();
        assert!(!result.diagnostics.vacuous);
        assert!(result.certified_bound < 0.9);
        let realized = tv_distance(&result.pi_hat, &pi).unwrap();
        assert!(realized <= result.certified_bound + 1e-8);
        assert!(realized < 0.35, "recovered distribution too far: tv = {realized}");
    }

    #[test]
    fn zero_corruption_with_exact_restart_recovers_pi() {
        let (chain, pi) = make_test_chain(TestChainKind::RandomReversible, 12, 9).unwrap();
        let gamma = spectral_gap(&chain, &pi).unwrap().gamma;
        let result =
            recover(&chain, &pi, gamma, 0.0, 1.0, f64::INFINITY, None, Refine::None).unwrap();
        assert_eq!(result.delta_used, DELTA_FLOOR);
        assert_eq!(result.diagnostics.corruption_term, 0.0);
        assert_eq!(result.diagnostics.t_corruption, 0);
        assert!(result.certified_bound <= 1e-9);
        assert!(!result.diagnostics.vacuous);
        let realized = tv_distance(&result.pi_hat, &pi).unwrap();
        assert!(realized <= 1e-8, "realized {realized}");
    }

    #[test]
    fn hopeless_inputs_raise_the_vacuous_flag() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 16, 2).unwrap();
        let spec = CorruptionSpec {
            kind: CorruptionKind::PerRowTv,
            budget: 0.5,
            target_rows: None,
            seed: 4,
        };
        let (corrupted, report) = corrupt(&chain, &pi, &spec).unwrap();
        let mu = Dist::uniform(16);
        let result = recover(
            &corrupted,
            &mu,
            0.01,
            report.epsilon,
            1.0,
            f64::INFINITY,
            None,
            Refine::Grid(9),
        )
        .unwrap();
        assert!(result.certified_bound >= 1.0);
        assert!(result.diagnostics.vacuous);
    }

    #[test]
    fn grid_refinement_never_certifies_worse() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 64, 5).unwrap();
        let (corrupted, report) = corrupt(&chain, &pi, &absorbing_spec(3, 5)).unwrap();
        let mu = Dist::uniform(64);
        let run = |refine| {
            recover(&corrupted, &mu, 0.5, report.epsilon, 1.0, f64::INFINITY, None, refine)
                .unwrap()
        };
        let plain = run(Refine::None);
        let refined = run(Refine::Grid(9));
        assert!(refined.certified_bound <= plain.certified_bound + 1e-12);
        // Top-of-grid candidates past 1 collapse onto the clamp, so up to 9
        // survive; the tuned weight itself is always among them.
        let survivors = refined.diagnostics.delta_candidates.len();
        assert!((5..=9).contains(&survivors));
        assert!(refined
            .diagnostics
            .delta_candidates
            .iter()
            .any(|c| (c.delta - plain.delta_used).abs() <= 1e-12 * plain.delta_used));
        let best = refined
            .diagnostics
            .delta_candidates
            .iter()
            .map(|c| c.certified_bound)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(refined.certified_bound, best);
        let first_argmin = refined
            .diagnostics
            .delta_candidates
            .iter()
            .find(|c| c.certified_bound == best)
            .unwrap();
        assert_eq!(refined.delta_used, first_argmin.delta);
    }

    #[test]
    fn pinned_delta_is_used_verbatim() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 32, 4).unwrap();
        let (corrupted, report) = corrupt(&chain, &pi, &absorbing_spec(1, 4)).unwrap();
        let mu = Dist::uniform(32);
        let result = recover_at(
            &corrupted,
            &mu,
            0.5,
            report.epsilon,
            1.0,
            f64::INFINITY,
            None,
            0.25,
        )
        .unwrap();
        assert_eq!(result.delta_used, 0.25);
        assert_eq!(result.diagnostics.delta_candidates.len(), 1);
        assert_eq!(
            result.certified_bound,
            (result.diagnostics.bias_term + result.diagnostics.corruption_term) / 2.0
        );
        assert!(matches!(
            recover_at(&corrupted, &mu, 0.5, 0.1, 1.0, f64::INFINITY, None, 0.0),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(
            recover_at(&corrupted, &mu, 0.5, 0.1, 1.0, f64::INFINITY, None, 1.5),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn recovery_output_is_byte_deterministic() {
        let (chain, pi) = make_test_chain(TestChainKind::RandomDense, 20, 17).unwrap();
        let spec = CorruptionSpec {
            kind: CorruptionKind::RowReplacement,
            budget: 0.05,
            target_rows: Some(vec![4, 9]),
            seed: 21,
        };
        let (corrupted, report) = corrupt(&chain, &pi, &spec).unwrap();
        let mu = Dist::uniform(20);
        let run = || {
            let r = recover(
                &corrupted,
                &mu,
                0.2,
                report.epsilon,
                2.0,
                4.0,
                Some(3.0),
                Refine::Grid(9),
            )
            .unwrap();
            serde_json::to_string(&r).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn realized_distance_is_attached_only_by_the_builder() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 8, 1).unwrap();
        let result =
            recover(&chain, &pi, 0.5, 0.0, 1.0, f64::INFINITY, None, Refine::None).unwrap();
        assert!(result.diagnostics.realized_tv.is_none());
        let json = serde_json::to_string(&result).unwrap();
        assert!(!json.contains("realized_tv"));
        let tagged = result.with_realized(0.125);
        assert_eq!(tagged.diagnostics.realized_tv, Some(0.125));
        assert!(serde_json::to_string(&tagged).unwrap().contains("\"realized_tv\":0.125"));
    }

    #[test]
    fn exponent_serializes_as_inf_string_when_infinite() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 8, 1).unwrap();
        let result =
            recover(&chain, &pi, 0.5, 0.0, 1.0, f64::INFINITY, None, Refine::None).unwrap();
        let json = serde_json::to_string(&result).unwrap();
        assert!(json.contains("\"p\":\"inf\""));
        assert!(json.contains("\"q\":1.0"));
    }

    #[test]
    fn spread_recovery_with_alpha_one_passes_epsilon_through() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 32, 6).unwrap();
        let (corrupted, report) = corrupt(&chain, &pi, &absorbing_spec(2, 6)).unwrap();
        let result = recover_spread(&corrupted, 1.0, report.epsilon, 0.5).unwrap();
        assert_eq!(result.inputs.epsilon, report.epsilon);
        assert_eq!(result.inputs.beta, 1.0);
        assert_eq!(result.inputs.sup_ratio, 1.0);
        assert!(result.inputs.p.is_infinite());
        assert!((5..=9).contains(&result.diagnostics.delta_candidates.len()));
        let realized = tv_distance(&result.pi_hat, &pi).unwrap();
        assert!(realized <= result.certified_bound + 1e-8);
    }

    #[test]
    fn spread_recovery_without_corruption_is_pure_bias() {
        let (chain, _) = make_test_chain(TestChainKind::LazyComplete, 16, 8).unwrap();
        let result = recover_spread(&chain, 1.0, 0.0, 0.5).unwrap();
        assert_eq!(result.diagnostics.corruption_term, 0.0);
        assert_eq!(result.certified_bound, result.diagnostics.bias_term / 2.0);
        assert!(result.certified_bound <= 1e-9);
    }

    #[test]
    fn parameter_domains_are_enforced() {
        let (chain, _) = make_test_chain(TestChainKind::LazyComplete, 8, 1).unwrap();
        let mu = Dist::uniform(8);
        let run = |gamma, epsilon, beta, p, sup_ratio| {
            recover(&chain, &mu, gamma, epsilon, beta, p, sup_ratio, Refine::None)
        };
        assert!(matches!(run(0.0, 0.1, 1.0, f64::INFINITY, None), Err(Error::OutOfRange(_))));
        assert!(matches!(run(1.5, 0.1, 1.0, f64::INFINITY, None), Err(Error::OutOfRange(_))));
        assert!(matches!(run(f64::NAN, 0.1, 1.0, f64::INFINITY, None), Err(Error::OutOfRange(_))));
        assert!(matches!(run(0.5, -0.1, 1.0, f64::INFINITY, None), Err(Error::OutOfRange(_))));
        assert!(matches!(run(0.5, 1.0, 1.0, f64::INFINITY, None), Err(Error::OutOfRange(_))));
        assert!(matches!(run(0.5, 0.1, 0.9, f64::INFINITY, None), Err(Error::OutOfRange(_))));
        assert!(matches!(
            run(0.5, 0.1, f64::INFINITY, f64::INFINITY, None),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(run(0.5, 0.1, 1.0, 1.0, None), Err(Error::InvalidExponent { .. })));
        assert!(matches!(run(0.5, 0.1, 1.0, f64::NAN, None), Err(Error::InvalidExponent { .. })));
        assert!(matches!(
            run(0.5, 0.1, 1.0, f64::INFINITY, Some(0.5)),
            Err(Error::OutOfRange(_))
        ));
        let short = Dist::uniform(4);
        assert!(matches!(
            recover(&chain, &short, 0.5, 0.1, 1.0, f64::INFINITY, None, Refine::None),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(recover_spread(&chain, 0.0, 0.1, 0.5), Err(Error::OutOfRange(_))));
        assert!(matches!(recover_spread(&chain, 1.2, 0.1, 0.5), Err(Error::OutOfRange(_))));
        assert!(matches!(recover_spread(&chain, 1.0, -0.1, 0.5), Err(Error::OutOfRange(_))));
        // epsilon_rows / alpha lands in recover's own domain check.
        assert!(matches!(recover_spread(&chain, 0.5, 0.6, 0.5), Err(Error::OutOfRange(_))));
    }
}
