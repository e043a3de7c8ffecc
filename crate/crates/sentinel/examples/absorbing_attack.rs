//! A cheap corruption that destroys the naive estimate.
//!
//! Making a single row absorbing costs the adversary almost nothing under
//! the pi-weighted budget (one row of a 64-state chain carries mass 1/64),
//! but the corrupted chain now funnels everything into the trap state: its
//! own stationary distribution is a point mass there, total variation
//! 63/64 from the truth. Anyone who answers "the stationary distribution
//! of the matrix I was given" loses to a budget of about 0.03.

use sentinel::adversary::{corrupt, make_test_chain, CorruptionKind, CorruptionSpec, TestChainKind};
use sentinel::chain::tv_distance;

fn main() -> sentinel::Result<()> {
    let n = 64;
    let (chain, pi) = make_test_chain(TestChainKind::LazyComplete, n, 0)?;

    let spec = CorruptionSpec {
        kind: CorruptionKind::Absorbing,
        budget: 2.0, // cap, not a target: one row costs far less
        target_rows: Some(vec![17]),
        seed: 0,
    };
    let (corrupted, report) = corrupt(&chain, &pi, &spec)?;

    println!("corrupted rows:     {:?}", report.corrupted_rows);
    println!("measured epsilon:   {:.6}", report.epsilon);

    let naive = corrupted.stationary_auto()?;
    println!("naive tv from pi:   {:.6}", tv_distance(&naive, &pi)?);
    println!("naive mass on trap: {:.6}", naive.get(17));

    assert!(report.epsilon < 0.035);
    assert!(tv_distance(&naive, &pi)? > 0.98);
    Ok(())
}
