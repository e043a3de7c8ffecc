//! The inequality checkers, one by one.
//!
//! Every bound the library relies on is also exposed as a checker that
//! reports (t, lhs, rhs, holds) rows instead of asserting. This runs each
//! checker once on a small chain and prints a few rows, which is the same
//! machinery the `verify` subcommand drives at scale.

use sentinel::adversary::{corrupt, make_test_chain, CorruptionKind, CorruptionSpec, TestChainKind};
use sentinel::pagerank::{check_corrupted_close, check_density_contraction, check_pr_close};
use sentinel::spectral::{check_coupling_bound, check_mixing_bound, spectral_gap, BoundCheck};
use sentinel::Dist;

fn show(name: &str, checks: &[BoundCheck]) {
    let worst = checks
        .iter()
        .filter(|c| c.rhs.is_finite())
        .map(|c| c.lhs - c.rhs)
        .fold(f64::NEG_INFINITY, f64::max);
    let all_hold = checks.iter().all(|c| c.holds);
    println!("{name}: {} rows, all hold = {all_hold}, worst slack = {worst:.3e}", checks.len());
    for c in checks.iter().take(3) {
        println!("   t = {:>3}  lhs = {:.6e}  rhs = {:.6e}", c.t, c.lhs, c.rhs);
    }
}

fn main() -> sentinel::Result<()> {
    let n = 24;
    let (chain, pi) = make_test_chain(TestChainKind::RandomReversible, n, 11)?;
    let gamma = spectral_gap(&chain, &pi)?.gamma;
    println!("random reversible chain, n = {n}, gamma = {gamma:.4}\n");

    let start = Dist::point_mass(n, 0)?;
    let ts: Vec<u64> = (0..=30).collect();
    show("mixing", &check_mixing_bound(&chain, &pi, &start, gamma, &ts)?);

    show("coupling", &check_coupling_bound(&chain, &pi, &start, &ts)?);

    let mu = Dist::uniform(n);
    let delta = 0.05;
    show("pr_close", &check_pr_close(&chain, &pi, &mu, gamma, delta, &ts)?);

    let contraction = check_density_contraction(&chain, &pi, &mu, delta)?;
    println!(
        "density contraction: sup {:.6} <= {:.6}, holds = {}",
        contraction.sup.lhs, contraction.sup.rhs, contraction.holds
    );

    let spec =
        CorruptionSpec { kind: CorruptionKind::PerRowTv, budget: 0.02, target_rows: None, seed: 3 };
    let (corrupted, report) = corrupt(&chain, &pi, &spec)?;
    show(
        "corrupted_close",
        &check_corrupted_close(&chain, &corrupted, &pi, &mu, 2.0, report.epsilon, delta, &ts)?,
    );
    Ok(())
}
