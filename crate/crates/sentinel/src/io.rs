//! JSON file formats for chains and distributions.
//!
//! Chain files:
//!
//! ```json
//! {"n": 2, "format": "dense",    "data": [[0.7, 0.3], [0.1, 0.9]]}
//! {"n": 2, "format": "triplets", "data": [[0, 0, 0.7], [0, 1, 0.3], [1, 0, 0.1], [1, 1, 0.9]]}
//! ```
//!
//! Distribution files: `{"n": 2, "values": [0.25, 0.75]}`.
//!
//! Values are written with serde_json's shortest-roundtrip float encoding,
//! so any value representable in at most 17 significant decimal digits
//! survives a write/read cycle bit for bit. Reading validates as strictly
//! as the in-memory constructors do.

use crate::chain::{Dist, MarkovChain, DEFAULT_ROW_TOLERANCE};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct ChainFile {
    n: usize,
    format: String,
    data: serde_json::Value,
}

/// Parses a chain from its JSON document.
pub fn chain_from_json(text: &str) -> Result<MarkovChain> {
    let file: ChainFile = serde_json::from_str(text)?;
    match file.format.as_str() {
        "dense" => {
            let rows: Vec<Vec<f64>> = serde_json::from_value(file.data)?;
            if rows.len() != file.n {
                return Err(Error::InvalidInput(format!(
                    "declared n = {} but found {} rows",
                    file.n,
                    rows.len()
                )));
            }
            MarkovChain::from_rows(rows)
        }
        "triplets" => {
            let triplets: Vec<(usize, usize, f64)> = serde_json::from_value(file.data)?;
            MarkovChain::from_triplets(file.n, triplets, DEFAULT_ROW_TOLERANCE)
        }
        other => Err(Error::InvalidInput(format!(
            "unknown chain format {other:?}; expected \"dense\" or \"triplets\""
        ))),
    }
}

/// Serializes a chain to its JSON document.
///
/// Dense and restart-composite chains are written in the dense format
/// (composites are materialized first, which requires `n <=`
/// [`crate::chain::DENSE_LIMIT`]);
/// sparse chains are written as triplets.
pub fn chain_to_json(chain: &MarkovChain) -> Result<String> {
    let n = chain.n();
    let file = if chain.is_sparse() && chain.restart_parts().is_none() {
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for x in 0..n {
            for (y, v) in chain.row_entries(x) {
                triplets.push((x, y, v));
            }
        }
        ChainFile {
            n,
            format: "triplets".into(),
            data: serde_json::to_value(&triplets)?,
        }
    } else {
        let data = chain.to_dense_data()?;
        let rows: Vec<&[f64]> = (0..n).map(|x| &data[x * n..(x + 1) * n]).collect();
        ChainFile { n, format: "dense".into(), data: serde_json::to_value(rows)? }
    };
    Ok(serde_json::to_string(&file)?)
}

/// Reads a chain file from disk.
pub fn read_chain(path: impl AsRef<Path>) -> Result<MarkovChain> {
    chain_from_json(&std::fs::read_to_string(path)?)
}

/// Writes a chain file to disk.
pub fn write_chain(path: impl AsRef<Path>, chain: &MarkovChain) -> Result<()> {
    std::fs::write(path, chain_to_json(chain)?)?;
    Ok(())
}

/// Parses a distribution from its JSON document.
pub fn dist_from_json(text: &str) -> Result<Dist> {
    Ok(serde_json::from_str(text)?)
}

/// Serializes a distribution to its JSON document.
pub fn dist_to_json(dist: &Dist) -> Result<String> {
    Ok(serde_json::to_string(dist)?)
}

/// Reads a distribution file from disk.
pub fn read_dist(path: impl AsRef<Path>) -> Result<Dist> {
    dist_from_json(&std::fs::read_to_string(path)?)
}

/// Writes a distribution file to disk.
pub fn write_dist(path: impl AsRef<Path>, dist: &Dist) -> Result<()> {
    std::fs::write(path, dist_to_json(dist)?)?;
    Ok(())
}
