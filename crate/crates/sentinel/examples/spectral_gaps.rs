//! Spectral gaps of the built-in chain families.
//!
//! The gap is computed as one minus the second singular value of the
//! pi-conjugated transition matrix restricted to the orthogonal complement
//! of the stationary direction. For the lazy complete graph it is exactly
//! 1/2 at any size; for the lazy cycle it decays like 1/n^2; a plain
//! two-cycle is periodic and its gap collapses to zero, which the result
//! flags rather than hides.

use sentinel::adversary::{make_test_chain, TestChainKind};
use sentinel::spectral::spectral_gap;
use sentinel::{Dist, MarkovChain};

fn main() -> sentinel::Result<()> {
    for n in [8, 32, 128] {
        let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, n, 0)?;
        let gap = spectral_gap(&chain, &pi)?;
        println!("lazy_complete({n:>3}): gamma = {:.6}  ({:?})", gap.gamma, gap.method);
    }
    for n in [8, 32, 128] {
        let (chain, pi) = make_test_chain(TestChainKind::LazyCycle, n, 0)?;
        let gap = spectral_gap(&chain, &pi)?;
        println!("lazy_cycle({n:>3}):    gamma = {:.6}", gap.gamma);
    }

    // A deterministic two-cycle never forgets its phase.
    let two_cycle = MarkovChain::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]])?;
    let pi = Dist::uniform(2);
    let gap = spectral_gap(&two_cycle, &pi)?;
    println!(
        "two-cycle:         gamma = {:.6}, periodic_suspect = {}",
        gap.gamma, gap.periodic_suspect
    );
    Ok(())
}
