//! How far restart regularization drags the fixed point.
//!
//! Mixing the chain with a restart distribution at weight delta moves its
//! fixed point away from the true stationary distribution. The l1 gap is
//! bounded by min over t of sqrt(2 ||mu/pi||_inf) e^{-t gamma} + 2 delta t,
//! which shrinks to zero with delta. This prints the measured gap next to
//! that bound over a sweep of weights.

use sentinel::adversary::{make_test_chain, TestChainKind};
use sentinel::chain::{l1_distance, smoothness};
use sentinel::pagerank::{pagerank_stationary, PageRankConfig};
use sentinel::spectral::spectral_gap;
use sentinel::Dist;

fn main() -> sentinel::Result<()> {
    let n = 32;
    // A chain whose stationary distribution is far from uniform, so the
    // uniform restart actually pulls the fixed point somewhere else.
    let (chain, pi) = make_test_chain(TestChainKind::RandomReversible, n, 7)?;
    let mu = Dist::uniform(n);
    let gamma = spectral_gap(&chain, &pi)?.gamma;
    let sup_ratio = smoothness(&mu, &pi, f64::INFINITY)?;

    println!("random_reversible({n}), gamma = {gamma:.3}, sup mu/pi = {sup_ratio:.3}");
    println!("{:>8}  {:>12}  {:>12}", "delta", "l1 gap", "bound");
    for delta in [0.3, 0.1, 0.03, 0.01, 0.003, 0.001] {
        let result = pagerank_stationary(&chain, &PageRankConfig::tight(mu.clone(), delta))?;
        let gap = l1_distance(&result.pi_delta, &pi)?;
        let bound = (1..=10_000u64)
            .map(|t| (2.0 * sup_ratio).sqrt() * (-(t as f64) * gamma).exp() + 2.0 * delta * t as f64)
            .fold(f64::INFINITY, f64::min);
        println!("{delta:>8}  {gap:>12.3e}  {bound:>12.3e}");
        assert!(gap <= bound + 1e-10);
    }
    Ok(())
}
