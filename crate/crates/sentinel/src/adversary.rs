//! Corruption generators, the two counterexample chain families, and the
//! seeded test-chain constructors.
//!
//! A corruption here is a pure function of `(chain, pi, spec)`: the seed is
//! part of the spec, so an adversarial experiment is reproducible down to
//! the bit pattern of the corrupted matrix. Every generator returns the
//! corrupted chain together with a [`CorruptionReport`] whose `epsilon` is
//! measured from the actual matrices, never assumed from the budget.
//!
//! The budget is spent in the pi-weighted l1 sense: a corruption of the
//! rows in `C` costs `sum_{x in C} pi(x) ||P(x,.) - P~(x,.)||_1 <= 2 pi(C)`.
//! That weighting is the point of the two counterexample families.
//! [`star_pair`] shows mass-1/2 rows are expensive for a reason: rewriting
//! one such row moves the stationary distribution as far as the corruption
//! notion says it may. [`product_chain`] shows the budget interacts with
//! the spectral gap: two product chains at bias distance `delta` are
//! mutual corruptions of size `2 delta / n` with gap `1/n`, so their
//! stationary distance `delta` meets the `epsilon / (2 gamma)` recovery
//! floor exactly.

use crate::chain::{measure_corruption, CorruptionReport, Dist, MarkovChain, STATIONARY_GATE};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The attack classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    /// Move a fixed amount of mass inside every targeted row, from its
    /// largest entries toward one seeded random recipient entry.
    PerRowTv,
    /// Replace each targeted row with a seeded uniform-on-the-simplex row.
    RowReplacement,
    /// Make each targeted row a point mass on itself.
    Absorbing,
}

/// A reproducible corruption request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorruptionSpec {
    /// Attack class.
    pub kind: CorruptionKind,
    /// Total pi-weighted l1 budget, in `[0, 2]`.
    pub budget: f64,
    /// Rows the adversary touches. When absent, `per_row_tv` targets every
    /// row, and the other kinds pick rows greedily by ascending `pi` while
    /// the targeted mass stays within `budget / 2`. Explicit targets are
    /// taken as-is and may overspend the budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rows: Option<Vec<usize>>,
    /// Seed for all randomness in the corruption.
    pub seed: u64,
}

/// Applies `spec` to `chain` and measures what actually changed.
///
/// `pi` must be stationary for `chain`; it prices the rows. A zero budget
/// is the empty corruption. For `per_row_tv` and for the auto-targeted
/// kinds the measured `epsilon` never exceeds `spec.budget + 1e-10` by
/// construction.
pub fn corrupt(
    chain: &MarkovChain,
    pi: &Dist,
    spec: &CorruptionSpec,
) -> Result<(MarkovChain, CorruptionReport)> {
    let n = chain.n();
    if pi.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: pi.len() });
    }
    if !(spec.budget.is_finite() && (0.0..=2.0).contains(&spec.budget)) {
        return Err(Error::OutOfRange(format!(
            "corruption budget {} outside [0, 2]",
            spec.budget
        )));
    }
    let residual = chain.stationary_residual(pi)?;
    if residual > STATIONARY_GATE {
        return Err(Error::NotStationary { residual });
    }
    let auto_targets = spec.target_rows.is_none();
    let targets = resolve_targets(chain, pi, spec)?;
    if targets.is_empty() {
        let untouched = chain.clone();
        let report = measure_corruption(chain, &untouched, pi)?;
        return Ok((untouched, report));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut new_rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(targets.len());
    for &x in &targets {
        let row = match spec.kind {
            CorruptionKind::PerRowTv => {
                per_row_tv_move(&chain.row(x), spec.budget / 2.0, &mut rng)
            }
            CorruptionKind::RowReplacement => random_simplex_row(n, &mut rng),
            CorruptionKind::Absorbing => {
                let mut r = vec![0.0; n];
                r[x] = 1.0;
                r
            }
        };
        new_rows.push((x, row));
    }
    let corrupted = rebuild(chain, &new_rows)?;
    let report = measure_corruption(chain, &corrupted, pi)?;
    if matches!(spec.kind, CorruptionKind::PerRowTv) || auto_targets {
        debug_assert!(
            report.epsilon <= spec.budget + 1e-10,
            "construction overspent: measured {} vs budget {}",
            report.epsilon,
            spec.budget
        );
    }
    Ok((corrupted, report))
}

/// Validated, sorted, deduplicated target rows for a spec.
fn resolve_targets(chain: &MarkovChain, pi: &Dist, spec: &CorruptionSpec) -> Result<Vec<usize>> {
    let n = chain.n();
    if let Some(rows) = &spec.target_rows {
        let mut targets = rows.clone();
        for &x in &targets {
            if x >= n {
                return Err(Error::OutOfRange(format!(
                    "target row {x} out of bounds for a chain on {n} states"
                )));
            }
        }
        targets.sort_unstable();
        targets.dedup();
        return Ok(targets);
    }
    if spec.budget == 0.0 {
        return Ok(Vec::new());
    }
    match spec.kind {
        CorruptionKind::PerRowTv => Ok((0..n).collect()),
        CorruptionKind::RowReplacement | CorruptionKind::Absorbing => {
            // Cheapest rows first; rewriting row x costs at most 2 pi(x),
            // so keeping pi(C) <= budget/2 keeps the measured epsilon
            // within budget.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                pi.get(a).partial_cmp(&pi.get(b)).unwrap().then(a.cmp(&b))
            });
            let mut targets = Vec::new();
            let mut spent = 0.0;
            for x in order {
                if spent + pi.get(x) <= spec.budget / 2.0 + 1e-15 {
                    spent += pi.get(x);
                    targets.push(x);
                }
            }
            if targets.is_empty() {
                return Err(Error::BudgetInfeasible(format!(
                    "no row fits: the smallest stationary mass exceeds budget/2 = {}",
                    spec.budget / 2.0
                )));
            }
            targets.sort_unstable();
            Ok(targets)
        }
    }
}

/// Moves `min(m, 1 - min entry)` of mass within one row: a seeded recipient
/// entry gains, the largest entries drain first. The row's TV displacement
/// is exactly the moved amount, so it never exceeds `m`.
fn per_row_tv_move(row: &[f64], m: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = row.len();
    let mut out = row.to_vec();
    let min_entry = row.iter().copied().fold(f64::INFINITY, f64::min);
    let moved = m.min(1.0 - min_entry);
    if moved <= 0.0 {
        return out;
    }
    // Any entry at most 1 - moved can absorb the mass. The minimum always
    // qualifies mathematically, but 1 - (1 - min) can round below min, so
    // admit it explicitly to keep the candidate set nonempty.
    let candidates: Vec<usize> =
        (0..n).filter(|&y| row[y] <= 1.0 - moved || row[y] == min_entry).collect();
    let recipient = candidates[rng.gen_range(0..candidates.len())];
    let mut donors: Vec<usize> = (0..n).filter(|&y| y != recipient).collect();
    donors.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
    let mut need = moved;
    for d in donors {
        if need <= 0.0 {
            break;
        }
        let take = need.min(out[d]);
        out[d] -= take;
        out[recipient] += take;
        need -= take;
    }
    out
}

/// A seeded point of the uniform distribution on the simplex, via
/// normalized exponential draws.
fn random_simplex_row(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let sum: f64 = raw.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return raw.into_iter().map(|v| v / sum).collect();
        }
    }
}

/// The input chain with the listed rows replaced and untouched rows kept
/// byte-identical, so the corruption report sees only the targeted rows.
fn rebuild(chain: &MarkovChain, new_rows: &[(usize, Vec<f64>)]) -> Result<MarkovChain> {
    chain.with_replaced_rows(new_rows)
}

/// The lazy star chain and its cheapest devastating corruption.
#[derive(Debug, Clone)]
pub struct StarPair {
    /// Lazy star on `n + 1` states: every state holds with probability
    /// 1/2, outer states move to the center, the center spreads uniformly
    /// over the outer states.
    pub original: MarkovChain,
    /// Its stationary distribution: 1/2 at the center, `1/(2n)` per outer
    /// state.
    pub pi: Dist,
    /// The same star with only the center row rewritten: half of its
    /// outflow now favors outer state 1, the rest is spread over the
    /// others.
    pub corrupted: MarkovChain,
    /// Stationary distribution of the corrupted star: 1/2 at the center,
    /// 1/4 at state 1, `1/(4(n-1))` per remaining outer state.
    pub pi_corrupted: Dist,
}

/// Builds the star pair on `n + 1` states, `n >= 2`.
///
/// Both chains mix in constant time and look alike spectrally, yet
/// `||pi - pi_corrupted||_1 = (n-2)/(2n)`, approaching 1/2, while the
/// corruption itself costs only the center row. The measured corruption
/// size works out to `(n-2)/(4n)`: the center's mass of 1/2 prices the
/// rewrite at exactly the stationary displacement it buys, which is why
/// corruption budgets must be weighted by `pi` at all. At `n = 2` the two
/// chains coincide.
pub fn star_pair(n: usize) -> Result<StarPair> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("star_pair needs n >= 2, got {n}")));
    }
    let states = n + 1;
    let nf = n as f64;
    let mut original = Vec::new();
    let mut corrupted = Vec::new();
    original.push((0, 0, 0.5));
    corrupted.push((0, 0, 0.5));
    for y in 1..=n {
        original.push((0, y, 0.5 / nf));
        let p = if y == 1 { 0.25 } else { 0.25 / (nf - 1.0) };
        corrupted.push((0, y, p));
        for t in [(y, 0, 0.5), (y, y, 0.5)] {
            original.push(t);
            corrupted.push(t);
        }
    }
    let original = MarkovChain::from_triplets(states, original, 1e-12)?;
    let corrupted = MarkovChain::from_triplets(states, corrupted, 1e-12)?;
    let mut pi = vec![0.5 / nf; states];
    pi[0] = 0.5;
    let pi = Dist::new(pi)?;
    let mut pi_c = vec![0.25 / (nf - 1.0); states];
    pi_c[0] = 0.5;
    pi_c[1] = 0.25;
    let pi_corrupted = Dist::new(pi_c)?;
    for (chain, dist) in [(&original, &pi), (&corrupted, &pi_corrupted)] {
        let residual = chain.stationary_residual(dist)?;
        if residual > 1e-12 {
            return Err(Error::NotStationary { residual });
        }
    }
    Ok(StarPair { original, pi, corrupted, pi_corrupted })
}

/// Cap on product-chain coordinates; the state space is `2^n`.
pub const PRODUCT_COORD_LIMIT: usize = 20;

/// The coordinate-resampling product chain on `{-1, +1}^n`.
///
/// One step picks a coordinate `i` uniformly and resamples it to `+1` with
/// probability `p_vec[i]`, independently of its current value. State `s`
/// encodes a configuration by its binary digits: bit `i` of `s` set means
/// coordinate `i` is `+1`. The stationary distribution is the product
/// measure of the biases and the spectral gap is exactly `1/n` for any
/// biases: the chain acts on each coordinate independently at rate `1/n`.
pub fn product_chain(n: usize, p_vec: &[f64]) -> Result<MarkovChain> {
    validate_biases(n, p_vec)?;
    let states = 1usize << n;
    let nf = n as f64;
    let mut triplets = Vec::with_capacity(states * (n + 1));
    for s in 0..states {
        let mut hold = 0.0;
        for (i, &p) in p_vec.iter().enumerate() {
            let bit = 1usize << i;
            let (stay_weight, flip_weight) =
                if s & bit != 0 { (p / nf, (1.0 - p) / nf) } else { ((1.0 - p) / nf, p / nf) };
            hold += stay_weight;
            triplets.push((s, s ^ bit, flip_weight));
        }
        triplets.push((s, s, hold));
    }
    MarkovChain::from_triplets(states, triplets, 1e-10)
}

/// The product measure on `{-1, +1}^n` matching [`product_chain`]'s state
/// encoding.
pub fn product_measure(p_vec: &[f64]) -> Result<Dist> {
    validate_biases(p_vec.len(), p_vec)?;
    let states = 1usize << p_vec.len();
    let mut values = Vec::with_capacity(states);
    for s in 0..states {
        let mut mass = 1.0;
        for (i, &p) in p_vec.iter().enumerate() {
            mass *= if s & (1 << i) != 0 { p } else { 1.0 - p };
        }
        values.push(mass);
    }
    Dist::new(values)
}

fn validate_biases(n: usize, p_vec: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("a product chain needs at least one coordinate".into()));
    }
    if n > PRODUCT_COORD_LIMIT {
        return Err(Error::StateSpaceTooLarge { bits: n });
    }
    if p_vec.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: p_vec.len() });
    }
    for &p in p_vec {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::OutOfRange(format!("coordinate bias {p} outside (0, 1)")));
        }
    }
    Ok(())
}

/// Families of well-understood chains for tests and experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestChainKind {
    /// Hold with probability 1/2, else jump uniformly; gap exactly 1/2.
    LazyComplete,
    /// Hold with probability 1/2, else step to a uniform neighbor on the
    /// cycle; sparse, slow-mixing.
    LazyCycle,
    /// Lazy Metropolis chain for a seeded random positive target, exactly
    /// reversible.
    RandomReversible,
    /// Seeded dense rows with entries bounded away from zero; generally
    /// non-reversible.
    RandomDense,
}

/// Builds a chain of the requested family together with its stationary
/// distribution. The same `(kind, n, seed)` reproduces the chain
/// byte-for-byte.
pub fn make_test_chain(kind: TestChainKind, n: usize, seed: u64) -> Result<(MarkovChain, Dist)> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("test chains need n >= 2, got {n}")));
    }
    match kind {
        TestChainKind::LazyComplete => {
            let u = 0.5 / n as f64;
            let rows = (0..n)
                .map(|x| (0..n).map(|y| u + if x == y { 0.5 } else { 0.0 }).collect())
                .collect();
            Ok((MarkovChain::from_rows(rows)?, Dist::uniform(n)))
        }
        TestChainKind::LazyCycle => {
            let mut triplets = Vec::with_capacity(3 * n);
            for x in 0..n {
                if n == 2 {
                    triplets.push((x, x, 0.5));
                    triplets.push((x, x ^ 1, 0.5));
                } else {
                    triplets.push((x, x, 0.5));
                    triplets.push((x, (x + 1) % n, 0.25));
                    triplets.push((x, (x + n - 1) % n, 0.25));
                }
            }
            Ok((MarkovChain::from_triplets(n, triplets, 1e-12)?, Dist::uniform(n)))
        }
        TestChainKind::RandomReversible => {
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
            Ok((MarkovChain::from_rows(rows)?, Dist::new(pi)?))
        }
        TestChainKind::RandomDense => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
                    let sum: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / sum).collect()
                })
                .collect();
            let chain = MarkovChain::from_rows(rows)?;
            let pi = chain.stationary(crate::chain::StationaryMethod::Direct, 1e-12, 0)?;
            Ok((chain, pi))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{l1_distance, tv_distance};
    use crate::spectral::spectral_gap;
    use proptest::prelude::*;

    fn spec(kind: CorruptionKind, budget: f64, seed: u64) -> CorruptionSpec {
        CorruptionSpec { kind, budget, target_rows: None, seed }
    }

    #[test]
    fn zero_budget_is_the_empty_corruption() {
        let (chain, pi) = make_test_chain(TestChainKind::RandomDense, 9, 4).unwrap();
        for kind in
            [CorruptionKind::PerRowTv, CorruptionKind::RowReplacement, CorruptionKind::Absorbing]
        {
            let (corrupted, report) = corrupt(&chain, &pi, &spec(kind, 0.0, 1)).unwrap();
            assert_eq!(report.epsilon, 0.0, "{kind:?}");
            assert!(report.corrupted_rows.is_empty());
            assert_eq!(chain.to_dense_data().unwrap(), corrupted.to_dense_data().unwrap());
        }
    }

    #[test]
    fn per_row_tv_spends_the_budget_exactly_when_rows_allow_it() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 100, 0).unwrap();
        let (_, report) = corrupt(&chain, &pi, &spec(CorruptionKind::PerRowTv, 0.1, 7)).unwrap();
        // Every row can host a 0.05 move, so each contributes exactly its
        // pi-share of the budget.
        assert!((report.epsilon - 0.1).abs() < 1e-12, "epsilon = {}", report.epsilon);
        assert_eq!(report.corrupted_rows.len(), 100);
        for &tv in &report.per_row_tv {
            assert!((tv - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn per_row_tv_with_explicit_targets_scales_by_their_mass() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 50, 0).unwrap();
        let spec = CorruptionSpec {
            kind: CorruptionKind::PerRowTv,
            budget: 0.2,
            target_rows: Some(vec![3, 7, 7, 11]),
            seed: 5,
        };
        let (_, report) = corrupt(&chain, &pi, &spec).unwrap();
        assert_eq!(report.corrupted_rows, vec![3, 7, 11]);
        assert!((report.epsilon - 0.2 * 3.0 / 50.0).abs() < 1e-12);
    }

    #[test]
    fn per_row_tv_caps_the_move_at_what_a_row_can_host() {
        // Nearly uniform rows cannot host a 0.9 move: at most
        // 1 - min_entry = 1 - 1/3 fits.
        let row = vec![1.0 / 3.0; 3];
        let chain = MarkovChain::from_rows(vec![row.clone(), row.clone(), row]).unwrap();
        let pi = Dist::uniform(3);
        let (_, report) = corrupt(&chain, &pi, &spec(CorruptionKind::PerRowTv, 1.9, 2)).unwrap();
        for &tv in &report.per_row_tv {
            assert!((tv - 2.0 / 3.0).abs() < 1e-12, "tv = {tv}");
        }
        assert!(report.epsilon <= 1.9 + 1e-10);
    }

    #[test]
    fn corruptions_are_deterministic_in_the_seed() {
        let (chain, pi) = make_test_chain(TestChainKind::RandomDense, 40, 9).unwrap();
        for kind in [CorruptionKind::PerRowTv, CorruptionKind::RowReplacement] {
            let (a, _) = corrupt(&chain, &pi, &spec(kind, 0.3, 123)).unwrap();
            let (b, _) = corrupt(&chain, &pi, &spec(kind, 0.3, 123)).unwrap();
            assert_eq!(a.to_dense_data().unwrap(), b.to_dense_data().unwrap(), "{kind:?}");
            let (c, _) = corrupt(&chain, &pi, &spec(kind, 0.3, 124)).unwrap();
            assert_ne!(a.to_dense_data().unwrap(), c.to_dense_data().unwrap(), "{kind:?}");
        }
    }

    #[test]
    fn row_replacement_auto_targets_stay_within_budget() {
        let (chain, pi) = make_test_chain(TestChainKind::RandomReversible, 30, 3).unwrap();
        let (_, report) =
            corrupt(&chain, &pi, &spec(CorruptionKind::RowReplacement, 0.2, 11)).unwrap();
        assert!(report.epsilon <= 0.2 + 1e-10, "epsilon = {}", report.epsilon);
        assert!(!report.corrupted_rows.is_empty());
        let targeted_mass: f64 = report.corrupted_rows.iter().map(|&x| pi.get(x)).sum();
        assert!(targeted_mass <= 0.1 + 1e-12);
    }

    #[test]
    fn auto_targeting_fails_when_even_the_cheapest_row_is_too_expensive() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 2, 0).unwrap();
        let err = corrupt(&chain, &pi, &spec(CorruptionKind::RowReplacement, 0.1, 0)).unwrap_err();
        assert!(matches!(err, Error::BudgetInfeasible(_)), "{err:?}");
        let err = corrupt(&chain, &pi, &spec(CorruptionKind::Absorbing, 0.1, 0)).unwrap_err();
        assert!(matches!(err, Error::BudgetInfeasible(_)), "{err:?}");
    }

    #[test]
    fn absorbing_a_single_row_costs_its_escape_mass() {
        let n = 128;
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, n, 0).unwrap();
        let spec = CorruptionSpec {
            kind: CorruptionKind::Absorbing,
            budget: 2.0,
            target_rows: Some(vec![5]),
            seed: 0,
        };
        let (corrupted, report) = corrupt(&chain, &pi, &spec).unwrap();
        assert_eq!(corrupted.get(5, 5), 1.0);
        assert_eq!(report.corrupted_rows, vec![5]);
        // 2 pi(x) (1 - P(x, x)) = (n - 1) / n^2.
        let expected = (n as f64 - 1.0) / (n as f64 * n as f64);
        assert!((report.epsilon - expected).abs() < 1e-12, "epsilon = {}", report.epsilon);
    }

    #[test]
    fn corrupt_validates_its_inputs() {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, 5, 0).unwrap();
        let bad_budget = CorruptionSpec {
            kind: CorruptionKind::PerRowTv,
            budget: 2.5,
            target_rows: None,
            seed: 0,
        };
        assert!(matches!(corrupt(&chain, &pi, &bad_budget).unwrap_err(), Error::OutOfRange(_)));
        let bad_target = CorruptionSpec {
            kind: CorruptionKind::Absorbing,
            budget: 1.0,
            target_rows: Some(vec![5]),
            seed: 0,
        };
        assert!(matches!(corrupt(&chain, &pi, &bad_target).unwrap_err(), Error::OutOfRange(_)));
        let err = corrupt(&chain, &Dist::point_mass(5, 0).unwrap(), &spec(CorruptionKind::PerRowTv, 0.1, 0))
            .unwrap_err();
        assert!(matches!(err, Error::NotStationary { .. }), "{err:?}");
    }

    #[test]
    fn corruption_specs_round_trip_through_json() {
        let spec = CorruptionSpec {
            kind: CorruptionKind::RowReplacement,
            budget: 0.05,
            target_rows: None,
            seed: 99,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("row_replacement"));
        assert!(!text.contains("target_rows"), "absent targets stay absent: {text}");
        let back: CorruptionSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.kind, spec.kind);
        assert_eq!(back.seed, 99);
    }

    #[test]
    fn star_pair_matches_its_analytic_formulas() {
        for n in [2usize, 10, 100] {
            let star = star_pair(n).unwrap();
            let nf = n as f64;
            assert_eq!(star.pi.get(0), 0.5);
            assert!((star.pi.get(1) - 0.5 / nf).abs() < 1e-15);
            assert!((star.pi_corrupted.get(1) - 0.25).abs() < 1e-15);
            let l1 = l1_distance(&star.pi, &star.pi_corrupted).unwrap();
            assert!(
                (l1 - (nf - 2.0) / (2.0 * nf)).abs() < 1e-12,
                "n = {n}: l1 = {l1}"
            );
            let tv = tv_distance(&star.pi, &star.pi_corrupted).unwrap();
            assert!((tv - (nf - 2.0) / (4.0 * nf)).abs() < 1e-12);
            let report = measure_corruption(&star.original, &star.corrupted, &star.pi).unwrap();
            assert!(
                (report.epsilon - (nf - 2.0) / (4.0 * nf)).abs() < 1e-12,
                "n = {n}: epsilon = {}",
                report.epsilon
            );
            if n == 2 {
                assert!(report.corrupted_rows.is_empty(), "n = 2 is the vacuous pair");
            } else {
                assert_eq!(report.corrupted_rows, vec![0], "only the center row changes");
            }
        }
    }

    #[test]
    fn star_pair_rejects_tiny_stars() {
        assert!(matches!(star_pair(1).unwrap_err(), Error::OutOfRange(_)));
    }

    #[test]
    fn single_coordinate_product_chain_resamples_every_step() {
        let chain = product_chain(1, &[0.5]).unwrap();
        assert_eq!(chain.row(0), vec![0.5, 0.5]);
        assert_eq!(chain.row(1), vec![0.5, 0.5]);
        let gap = spectral_gap(&chain, &Dist::uniform(2)).unwrap();
        assert!((gap.gamma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_measure_is_stationary_and_the_gap_is_one_over_n() {
        for (n, biases) in [
            (3usize, vec![0.5, 0.5, 0.5]),
            (3, vec![0.2, 0.7, 0.55]),
            (6, vec![0.1, 0.9, 0.5, 0.33, 0.66, 0.5]),
        ] {
            let chain = product_chain(n, &biases).unwrap();
            let pi = product_measure(&biases).unwrap();
            assert!(chain.stationary_residual(&pi).unwrap() < 1e-12);
            let gap = spectral_gap(&chain, &pi).unwrap();
            assert!(
                (gap.gamma - 1.0 / n as f64).abs() < 1e-8,
                "n = {n}: gamma = {}",
                gap.gamma
            );
        }
        let uniform = product_measure(&[0.5, 0.5, 0.5]).unwrap();
        for x in 0..8 {
            assert!((uniform.get(x) - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn biased_coordinate_pairs_sit_exactly_on_the_recovery_floor() {
        // Two product chains whose first bias differs by delta are mutual
        // corruptions of measured size 2 delta / n, their stationary
        // distributions are at TV distance delta, and the gap is 1/n, so
        // d_tv = epsilon / (2 gamma) with equality.
        let n = 3usize;
        let delta = 0.1;
        let up = vec![0.5 + delta / 2.0, 0.5, 0.5];
        let down = vec![0.5 - delta / 2.0, 0.5, 0.5];
        let chain_up = product_chain(n, &up).unwrap();
        let chain_down = product_chain(n, &down).unwrap();
        let pi_up = product_measure(&up).unwrap();
        let pi_down = product_measure(&down).unwrap();
        let report = measure_corruption(&chain_up, &chain_down, &pi_up).unwrap();
        assert!(
            (report.epsilon - 2.0 * delta / n as f64).abs() < 1e-12,
            "epsilon = {}",
            report.epsilon
        );
        let tv = tv_distance(&pi_up, &pi_down).unwrap();
        assert!((tv - delta).abs() < 1e-12, "tv = {tv}");
        let gamma = spectral_gap(&chain_up, &pi_up).unwrap().gamma;
        assert!((tv - report.epsilon / (2.0 * gamma)).abs() < 1e-8);
    }

    #[test]
    fn product_chain_validation() {
        assert!(matches!(
            product_chain(21, &[0.5; 21]).unwrap_err(),
            Error::StateSpaceTooLarge { bits: 21 }
        ));
        assert!(product_chain(0, &[]).is_err());
        assert!(product_chain(2, &[0.5]).is_err());
        assert!(product_chain(2, &[0.5, 1.0]).is_err());
        assert!(product_measure(&[0.0, 0.5]).is_err());
    }

    #[test]
    fn test_chains_come_with_their_stationary_distributions() {
        for kind in [
            TestChainKind::LazyComplete,
            TestChainKind::LazyCycle,
            TestChainKind::RandomReversible,
            TestChainKind::RandomDense,
        ] {
            let (chain, pi) = make_test_chain(kind, 17, 42).unwrap();
            assert!(
                chain.stationary_residual(&pi).unwrap() < 1e-10,
                "{kind:?} returned a non-stationary pair"
            );
        }
        assert!(make_test_chain(TestChainKind::LazyCycle, 1, 0).is_err());
    }

    #[test]
    fn lazy_families_have_their_known_gaps() {
        let (complete, pi) = make_test_chain(TestChainKind::LazyComplete, 32, 0).unwrap();
        let gap = spectral_gap(&complete, &pi).unwrap();
        assert!((gap.gamma - 0.5).abs() < 1e-12);
        let (cycle, pi) = make_test_chain(TestChainKind::LazyCycle, 16, 0).unwrap();
        assert!(cycle.is_sparse());
        // Lazy cycle gap: (1 - cos(2 pi / n)) / 2.
        let expected = (1.0 - (2.0 * std::f64::consts::PI / 16.0).cos()) / 2.0;
        let gap = spectral_gap(&cycle, &pi).unwrap();
        assert!((gap.gamma - expected).abs() < 1e-10, "gamma = {}", gap.gamma);
    }

    #[test]
    fn random_reversible_satisfies_detailed_balance() {
        let (chain, pi) = make_test_chain(TestChainKind::RandomReversible, 25, 7).unwrap();
        for x in 0..25 {
            for y in 0..25 {
                let fwd = pi.get(x) * chain.get(x, y);
                let back = pi.get(y) * chain.get(y, x);
                assert!((fwd - back).abs() < 1e-12, "({x}, {y}): {fwd} vs {back}");
            }
        }
    }

    #[test]
    fn generators_are_seed_deterministic() {
        for kind in [TestChainKind::RandomReversible, TestChainKind::RandomDense] {
            let (a, pa) = make_test_chain(kind, 12, 5).unwrap();
            let (b, pb) = make_test_chain(kind, 12, 5).unwrap();
            assert_eq!(a.to_dense_data().unwrap(), b.to_dense_data().unwrap());
            assert_eq!(pa.values(), pb.values());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn per_row_tv_never_overspends(
            n in 2usize..30, budget in 0.0f64..2.0, seed in 0u64..10_000
        ) {
            let (chain, pi) = make_test_chain(TestChainKind::RandomDense, n, seed).unwrap();
            let (corrupted, report) =
                corrupt(&chain, &pi, &spec(CorruptionKind::PerRowTv, budget, seed)).unwrap();
            prop_assert!(report.epsilon <= budget + 1e-10);
            prop_assert_eq!(corrupted.n(), n);
        }

        #[test]
        fn auto_replacement_never_overspends(
            n in 4usize..30, budget in 0.05f64..1.0, seed in 0u64..10_000
        ) {
            let (chain, pi) = make_test_chain(TestChainKind::RandomReversible, n, seed).unwrap();
            match corrupt(&chain, &pi, &spec(CorruptionKind::RowReplacement, budget, seed)) {
                Ok((_, report)) => prop_assert!(report.epsilon <= budget + 1e-10),
                Err(Error::BudgetInfeasible(_)) => {
                    // Legitimate when every row is too heavy; verify that.
                    let min_mass =
                        (0..n).map(|x| pi.get(x)).fold(f64::INFINITY, f64::min);
                    prop_assert!(min_mass > budget / 2.0);
                }
                Err(e) => return Err(TestCaseError::fail(format!("{e:?}"))),
            }
        }

        #[test]
        fn absorbing_rows_absorb(
            n in 3usize..20, seed in 0u64..10_000, row in 0usize..20
        ) {
            let row = row % n;
            let (chain, pi) = make_test_chain(TestChainKind::RandomDense, n, seed).unwrap();
            let spec = CorruptionSpec {
                kind: CorruptionKind::Absorbing,
                budget: 2.0,
                target_rows: Some(vec![row]),
                seed,
            };
            let (corrupted, report) = corrupt(&chain, &pi, &spec).unwrap();
            prop_assert_eq!(corrupted.get(row, row), 1.0);
            let expected = 2.0 * pi.get(row) * (1.0 - chain.get(row, row));
            prop_assert!((report.epsilon - expected).abs() < 1e-12);
        }
    }
}
