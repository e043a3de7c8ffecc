//! An in-process experiment sweep.
//!
//! Drives the same runner as the `experiment` subcommand: a grid of
//! corruption budgets by trials, auto-tuned restart weights, certified
//! bounds checked against ground truth in every cell. The CSV is printed
//! as is; the summary at the end aggregates realized error by budget to
//! show degradation is monotone on average.

use sentinel::adversary::{CorruptionKind, TestChainKind};
use sentinel::harness::{run_experiment, rows_to_csv, ChainSource, CorruptionGrid, ExperimentConfig, RecoverySettings, RestartSpec};

fn main() -> sentinel::Result<()> {
    let budgets = vec![0.0, 0.005, 0.02, 0.05];
    let config = ExperimentConfig {
        chain: ChainSource::Generator { kind: TestChainKind::LazyComplete, n: 64 },
        restart: RestartSpec::Uniform,
        corruption: CorruptionGrid {
            kind: CorruptionKind::PerRowTv,
            budgets: budgets.clone(),
            target_rows: None,
        },
        recovery: RecoverySettings::default(),
        deltas: None, // let recovery tune the weight per cell
        trials: 5,
        master_seed: 2024,
        output: None,
        record_runtime: false,
    };

    let rows = run_experiment(&config)?;
    print!("{}", rows_to_csv(&rows));

    println!();
    println!("{:>10}  {:>14}  {:>14}", "eps", "mean realized", "mean certified");
    for &budget in &budgets {
        let cells: Vec<_> = rows.iter().filter(|r| r.eps_target == budget).collect();
        let mean = |f: fn(&&sentinel::harness::ExperimentRow) -> f64| {
            cells.iter().map(f).sum::<f64>() / cells.len() as f64
        };
        println!(
            "{budget:>10}  {:>14.6e}  {:>14.6e}",
            mean(|r| r.tv_realized.unwrap()),
            mean(|r| r.certified_bound.unwrap())
        );
    }
    Ok(())
}
