//! The smallest possible chain, solved both ways.
//!
//! A two-state chain with asymmetric switching rates has the closed-form
//! stationary distribution (b, a) / (a + b) for switch rates a (state 0
//! to 1) and b (state 1 to 0). Both solvers should land on it.

use sentinel::{MarkovChain, StationaryMethod};

fn main() -> sentinel::Result<()> {
    let a = 0.3; // 0 -> 1
    let b = 0.1; // 1 -> 0
    let chain = MarkovChain::from_rows(vec![vec![1.0 - a, a], vec![b, 1.0 - b]])?;

    let exact = [b / (a + b), a / (a + b)];
    let direct = chain.stationary(StationaryMethod::Direct, 1e-12, 10_000)?;
    let power = chain.stationary(StationaryMethod::Power, 1e-12, 1_000_000)?;

    println!("exact:  [{:.12}, {:.12}]", exact[0], exact[1]);
    println!("direct: [{:.12}, {:.12}]", direct.get(0), direct.get(1));
    println!("power:  [{:.12}, {:.12}]", power.get(0), power.get(1));
    println!("direct residual: {:.3e}", chain.stationary_residual(&direct)?);
    println!("power residual:  {:.3e}", chain.stationary_residual(&power)?);

    assert!((direct.get(0) - exact[0]).abs() < 1e-10);
    assert!((power.get(0) - exact[0]).abs() < 1e-10);
    Ok(())
}
