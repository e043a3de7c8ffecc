//! Finite Markov chains and the pi-weighted geometry every bound here runs on.
//!
//! A [`MarkovChain`] is a validated row-stochastic matrix `P` over states
//! `0..n`: `P[x][y]` is the probability of stepping from `x` to `y`. Rows are
//! renormalized exactly to 1 when they land within the construction tolerance
//! (default [`DEFAULT_ROW_TOLERANCE`]) and rejected otherwise. Storage is
//! either dense row-major, sorted sparse triplets, or a lazily applied
//! restart composite `(1-delta) P + delta 1^T mu` that never materializes
//! the rank-one part.
//!
//! Weighted norms follow the convention
//!
//! ```text
//! ||f||_{p,pi} = (sum_x pi(x) |f(x)|^p)^(1/p),    ||f||_{inf,pi} = max_{pi(x)>0} |f(x)|
//! ```
//!
//! so the essential sup ignores states outside the support of `pi`. Density
//! ratios `mu/pi` use the convention `0 * (a/0) = a`: a state with
//! `pi(x) = 0 = mu(x)` contributes nothing, while `mu`-mass on a `pi`-null
//! state makes the ratio genuinely infinite and is reported as
//! [`Error::UnsupportedMass`] rather than as a number.
//!
//! Two distances appear side by side on purpose. Corruption sizes and the
//! closeness bounds are stated in the raw l1 norm `||p - q||_1`; reported
//! recovery errors use total variation `d_TV = ||p - q||_1 / 2`. Both are
//! exposed ([`l1_distance`], [`tv_distance`]) and nothing converts silently
//! between them.

use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Default tolerance for row sums at construction time.
pub const DEFAULT_ROW_TOLERANCE: f64 = 1e-10;

/// Tolerance for distribution sums.
pub const DIST_TOLERANCE: f64 = 1e-10;

/// Largest state space handled by dense algorithms (direct solves, SVD).
pub const DENSE_LIMIT: usize = 2048;

/// Hard cap on iteration counts for the power-iteration solvers.
pub const ITERATION_CAP: usize = 1_000_000;

/// Residual tolerance below which a distribution counts as stationary.
///
/// Used as the gate for every operation whose contract requires a
/// stationary `pi` as input (adjoints, corruption measurement, bounds).
pub const STATIONARY_GATE: f64 = 1e-8;

/// Singular values of `P - I` below this count as zero when deciding
/// whether the stationary distribution is unique. Row-stochastic matrices
/// have unit infinity-norm, so the threshold is absolute.
const NULLSPACE_SV_TOL: f64 = 1e-8;

/// A probability distribution over `0..n`.
///
/// Entries are finite, nonnegative, and sum to 1 within [`DIST_TOLERANCE`].
/// Values are stored exactly as given; construction never renormalizes, so
/// distributions round-trip through files bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    values: Vec<f64>,
}

impl Dist {
    /// Validates and wraps a probability vector.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::LengthMismatch { expected: 1, got: 0 });
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { index: i, value: v });
            }
            if v < 0.0 {
                return Err(Error::DistNegativeEntry { index: i, value: v });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > DIST_TOLERANCE {
            return Err(Error::DistSumOutOfTolerance { sum, tolerance: DIST_TOLERANCE });
        }
        Ok(Dist { values })
    }

    /// The uniform distribution on `n` states.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "empty state space");
        Dist { values: vec![1.0 / n as f64; n] }
    }

    /// The point mass at state `x`.
    pub fn point_mass(n: usize, x: usize) -> Result<Self> {
        if x >= n {
            return Err(Error::EntryOutOfBounds { row: x, col: 0, n });
        }
        let mut values = vec![0.0; n];
        values[x] = 1.0;
        Ok(Dist { values })
    }

    /// Number of states.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; distributions are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Probability of state `x`.
    pub fn get(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// The underlying probability vector.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Consumes the distribution, returning its vector.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Serialize for Dist {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct File<'a> {
            n: usize,
            values: &'a [f64],
        }
        File { n: self.values.len(), values: &self.values }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dist {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct File {
            n: usize,
            values: Vec<f64>,
        }
        let file = File::deserialize(deserializer)?;
        if file.values.len() != file.n {
            return Err(serde::de::Error::custom(format!(
                "declared n = {} but found {} values",
                file.n,
                file.values.len()
            )));
        }
        Dist::new(file.values).map_err(serde::de::Error::custom)
    }
}

/// A real-valued function on the state space, used with the weighted norms.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFn {
    values: Vec<f64>,
}

impl WeightedFn {
    /// Validates that every entry is finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { index: i, value: v });
            }
        }
        Ok(WeightedFn { values })
    }

    /// The underlying values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of states.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the function has no entries.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How a chain's entries are held in memory.
#[derive(Debug, Clone)]
enum Storage {
    /// Row-major `n * n` probabilities.
    Dense(Vec<f64>),
    /// Compressed rows: entries of row `x` live in
    /// `cols[row_start[x]..row_start[x+1]]`, sorted by column.
    Sparse {
        row_start: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
    /// `(1 - delta) * base + delta * 1^T restart`, applied lazily.
    Restart {
        base: Box<MarkovChain>,
        delta: f64,
        restart: Dist,
    },
}

/// Which solver computes the stationary distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryMethod {
    /// Repeated application of `nu -> nu P` from the uniform start.
    Power,
    /// Nullspace extraction from an SVD of `P - I` (dense, `n <=`
    /// [`DENSE_LIMIT`]); also detects non-uniqueness.
    Direct,
}

/// A validated row-stochastic transition matrix.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    n: usize,
    storage: Storage,
    row_tolerance: f64,
}

impl MarkovChain {
    /// Builds a dense chain from explicit rows with the default tolerance.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows_with_tolerance(rows, DEFAULT_ROW_TOLERANCE)
    }

    /// Builds a dense chain from explicit rows.
    ///
    /// Rows whose sums lie within `row_tolerance` of 1 are renormalized
    /// exactly; anything further off is rejected.
    pub fn from_rows_with_tolerance(rows: Vec<Vec<f64>>, row_tolerance: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::NonSquare { rows: 0, cols: 0 });
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NonSquare { rows: n, cols: row.len().max(if i == 0 { 0 } else { n }) });
            }
            data.extend_from_slice(row);
        }
        Self::from_dense(n, data, row_tolerance)
    }

    /// Builds a dense chain from a row-major buffer of length `n * n`.
    pub fn from_dense(n: usize, mut data: Vec<f64>, row_tolerance: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::NonSquare { rows: 0, cols: 0 });
        }
        if data.len() != n * n {
            return Err(Error::NonSquare { rows: n, cols: data.len() / n });
        }
        for x in 0..n {
            validate_and_renormalize_row(&mut data[x * n..(x + 1) * n], x, row_tolerance, |y| y)?;
        }
        Ok(MarkovChain { n, storage: Storage::Dense(data), row_tolerance })
    }

    /// Builds a sparse chain from `(row, col, prob)` triplets.
    ///
    /// Triplets may arrive in any order but keys must be unique and in
    /// bounds. Unmentioned entries are zero, so every row still needs
    /// explicit entries summing to 1 within `row_tolerance`.
    pub fn from_triplets(
        n: usize,
        triplets: Vec<(usize, usize, f64)>,
        row_tolerance: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::NonSquare { rows: 0, cols: 0 });
        }
        let mut triplets = triplets;
        for &(r, c, _) in &triplets {
            if r >= n || c >= n {
                return Err(Error::EntryOutOfBounds { row: r, col: c, n });
            }
        }
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        for w in triplets.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::DuplicateTriplet { row: w[0].0, col: w[0].1 });
            }
        }
        let mut row_start = vec![0usize; n + 1];
        for &(r, _, _) in &triplets {
            row_start[r + 1] += 1;
        }
        for x in 0..n {
            row_start[x + 1] += row_start[x];
        }
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        for &(_, c, v) in &triplets {
            cols.push(c);
            vals.push(v);
        }
        for x in 0..n {
            let lo = row_start[x];
            let hi = row_start[x + 1];
            let cols_x = &cols[lo..hi];
            validate_and_renormalize_row(&mut vals[lo..hi], x, row_tolerance, |k| cols_x[k])?;
        }
        Ok(MarkovChain { n, storage: Storage::Sparse { row_start, cols, vals }, row_tolerance })
    }

    /// Wraps `(1 - delta) * base + delta * 1^T restart` without
    /// materializing it. Callers guarantee `0 <= delta <= 1` and matching
    /// dimensions; rows sum to 1 because both parts do.
    pub(crate) fn restart_composite(base: MarkovChain, delta: f64, restart: Dist) -> Self {
        debug_assert_eq!(base.n, restart.len());
        debug_assert!((0.0..=1.0).contains(&delta));
        let n = base.n;
        let row_tolerance = base.row_tolerance;
        MarkovChain {
            n,
            storage: Storage::Restart { base: Box::new(base), delta, restart },
            row_tolerance,
        }
    }

    /// The same chain with the listed rows replaced and every other row's
    /// bytes untouched. Replacement rows are validated and renormalized
    /// exactly like in the constructors; re-running the constructors on the
    /// full matrix would instead re-divide the untouched rows and drift
    /// them by an ulp, which downstream diffing would count as corruption.
    /// Restart composites are materialized first, since their rows are
    /// computed rather than stored.
    pub(crate) fn with_replaced_rows(&self, new_rows: &[(usize, Vec<f64>)]) -> Result<MarkovChain> {
        for (x, row) in new_rows {
            if *x >= self.n {
                return Err(Error::EntryOutOfBounds { row: *x, col: 0, n: self.n });
            }
            if row.len() != self.n {
                return Err(Error::LengthMismatch { expected: self.n, got: row.len() });
            }
        }
        match &self.storage {
            Storage::Dense(data) => {
                let mut data = data.clone();
                for (x, row) in new_rows {
                    let slice = &mut data[x * self.n..(x + 1) * self.n];
                    slice.copy_from_slice(row);
                    validate_and_renormalize_row(slice, *x, self.row_tolerance, |y| y)?;
                }
                Ok(MarkovChain {
                    n: self.n,
                    storage: Storage::Dense(data),
                    row_tolerance: self.row_tolerance,
                })
            }
            Storage::Sparse { .. } => {
                let mut replacement: Vec<Option<&Vec<f64>>> = vec![None; self.n];
                for (x, row) in new_rows {
                    replacement[*x] = Some(row);
                }
                let mut row_start = vec![0usize; self.n + 1];
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                for x in 0..self.n {
                    if let Some(row) = replacement[x] {
                        let start = vals.len();
                        for (y, &v) in row.iter().enumerate() {
                            if v != 0.0 {
                                cols.push(y);
                                vals.push(v);
                            }
                        }
                        let cols_x = cols[start..].to_vec();
                        validate_and_renormalize_row(
                            &mut vals[start..],
                            x,
                            self.row_tolerance,
                            |k| cols_x[k],
                        )?;
                    } else {
                        for (y, v) in self.row_entries(x) {
                            cols.push(y);
                            vals.push(v);
                        }
                    }
                    row_start[x + 1] = vals.len();
                }
                Ok(MarkovChain {
                    n: self.n,
                    storage: Storage::Sparse { row_start, cols, vals },
                    row_tolerance: self.row_tolerance,
                })
            }
            Storage::Restart { .. } => {
                let dense =
                    MarkovChain::from_dense(self.n, self.to_dense_data()?, self.row_tolerance)?;
                dense.with_replaced_rows(new_rows)
            }
        }
    }

    /// Number of states.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The row-sum tolerance this chain was validated with.
    pub fn row_tolerance(&self) -> f64 {
        self.row_tolerance
    }

    /// True when the chain is held as sparse triplets (a restart composite
    /// over a sparse base counts).
    pub fn is_sparse(&self) -> bool {
        match &self.storage {
            Storage::Dense(_) => false,
            Storage::Sparse { .. } => true,
            Storage::Restart { base, .. } => base.is_sparse(),
        }
    }

    /// Transition probability `P[x][y]`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        assert!(x < self.n && y < self.n, "state out of bounds");
        match &self.storage {
            Storage::Dense(data) => data[x * self.n + y],
            Storage::Sparse { row_start, cols, vals } => {
                let lo = row_start[x];
                let hi = row_start[x + 1];
                match cols[lo..hi].binary_search(&y) {
                    Ok(k) => vals[lo + k],
                    Err(_) => 0.0,
                }
            }
            Storage::Restart { base, delta, restart } => {
                (1.0 - delta) * base.get(x, y) + delta * restart.get(y)
            }
        }
    }

    /// Materializes row `x` as a dense vector.
    pub fn row(&self, x: usize) -> Vec<f64> {
        assert!(x < self.n, "state out of bounds");
        match &self.storage {
            Storage::Dense(data) => data[x * self.n..(x + 1) * self.n].to_vec(),
            Storage::Sparse { row_start, cols, vals } => {
                let mut out = vec![0.0; self.n];
                for k in row_start[x]..row_start[x + 1] {
                    out[cols[k]] = vals[k];
                }
                out
            }
            Storage::Restart { base, delta, restart } => {
                let mut out = base.row(x);
                for (o, &m) in out.iter_mut().zip(restart.values()) {
                    *o = (1.0 - delta) * *o + delta * m;
                }
                out
            }
        }
    }

    /// Distribution step `nu -> nu P` (row vector times matrix).
    pub fn mul_left(&self, nu: &[f64]) -> Vec<f64> {
        assert_eq!(nu.len(), self.n, "vector length mismatch");
        match &self.storage {
            Storage::Dense(data) => {
                let mut out = vec![0.0; self.n];
                for (x, &w) in nu.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let row = &data[x * self.n..(x + 1) * self.n];
                    for (o, &p) in out.iter_mut().zip(row) {
                        *o += w * p;
                    }
                }
                out
            }
            Storage::Sparse { row_start, cols, vals } => {
                let mut out = vec![0.0; self.n];
                for (x, &w) in nu.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for k in row_start[x]..row_start[x + 1] {
                        out[cols[k]] += w * vals[k];
                    }
                }
                out
            }
            Storage::Restart { base, delta, restart } => {
                let mut out = base.mul_left(nu);
                let mass: f64 = nu.iter().sum();
                for (o, &m) in out.iter_mut().zip(restart.values()) {
                    *o = (1.0 - delta) * *o + delta * mass * m;
                }
                out
            }
        }
    }

    /// Function step `f -> P f` (matrix times column vector).
    pub fn mul_right(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n, "vector length mismatch");
        match &self.storage {
            Storage::Dense(data) => (0..self.n)
                .map(|x| {
                    let row = &data[x * self.n..(x + 1) * self.n];
                    row.iter().zip(f).map(|(&p, &v)| p * v).sum()
                })
                .collect(),
            Storage::Sparse { row_start, cols, vals } => (0..self.n)
                .map(|x| {
                    (row_start[x]..row_start[x + 1]).map(|k| vals[k] * f[cols[k]]).sum()
                })
                .collect(),
            Storage::Restart { base, delta, restart } => {
                let mut out = base.mul_right(f);
                let rf: f64 = restart.values().iter().zip(f).map(|(&m, &v)| m * v).sum();
                for o in out.iter_mut() {
                    *o = (1.0 - delta) * *o + delta * rf;
                }
                out
            }
        }
    }

    /// Densifies the chain into a row-major buffer.
    ///
    /// Refused above [`DENSE_LIMIT`]; sparse algorithms never densify
    /// implicitly, this is for the dense solvers and serialization.
    pub fn to_dense_data(&self) -> Result<Vec<f64>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::DenseLimitExceeded { n: self.n, limit: DENSE_LIMIT });
        }
        Ok(match &self.storage {
            Storage::Dense(data) => data.clone(),
            Storage::Sparse { row_start, cols, vals } => {
                let mut data = vec![0.0; self.n * self.n];
                for x in 0..self.n {
                    for k in row_start[x]..row_start[x + 1] {
                        data[x * self.n + cols[k]] = vals[k];
                    }
                }
                data
            }
            Storage::Restart { base, delta, restart } => {
                let mut data = base.to_dense_data()?;
                for x in 0..self.n {
                    for (y, &m) in restart.values().iter().enumerate() {
                        let e = &mut data[x * self.n + y];
                        *e = (1.0 - delta) * *e + delta * m;
                    }
                }
                data
            }
        })
    }

    /// If this chain is a restart composite, its `(base, delta, restart)`.
    pub fn restart_parts(&self) -> Option<(&MarkovChain, f64, &Dist)> {
        match &self.storage {
            Storage::Restart { base, delta, restart } => Some((base, *delta, restart)),
            _ => None,
        }
    }

    /// Nonzero entries of row `x` as `(col, prob)` pairs sorted by column.
    pub(crate) fn row_entries(&self, x: usize) -> Vec<(usize, f64)> {
        match &self.storage {
            Storage::Sparse { row_start, cols, vals } => (row_start[x]..row_start[x + 1])
                .map(|k| (cols[k], vals[k]))
                .collect(),
            _ => self
                .row(x)
                .into_iter()
                .enumerate()
                .filter(|&(_, v)| v != 0.0)
                .collect(),
        }
    }

    /// l1 residual `||pi P - pi||_1` of a claimed stationary distribution.
    pub fn stationary_residual(&self, pi: &Dist) -> Result<f64> {
        if pi.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: pi.len() });
        }
        let step = self.mul_left(pi.values());
        Ok(l1_diff(&step, pi.values()))
    }

    /// Computes the stationary distribution.
    ///
    /// `Power` iterates `nu -> nu P` from the uniform start until the l1
    /// step difference drops below `tol` (capped at `max_iter` and
    /// [`ITERATION_CAP`]). `Direct` extracts the nullspace of `P - I` from a
    /// dense SVD, detecting non-uniqueness at threshold 1e-8, and checks the
    /// residual against `tol`.
    pub fn stationary(&self, method: StationaryMethod, tol: f64, max_iter: usize) -> Result<Dist> {
        if !tol.is_finite() || tol <= 0.0 {
            return Err(Error::OutOfRange(format!("stationary tol must be positive, got {tol}")));
        }
        match method {
            StationaryMethod::Power => self.stationary_power(tol, max_iter),
            StationaryMethod::Direct => self.stationary_direct(tol),
        }
    }

    /// Stationary distribution with defaults: direct up to [`DENSE_LIMIT`]
    /// states, power iteration above, residual tolerance 1e-10.
    pub fn stationary_auto(&self) -> Result<Dist> {
        if self.n <= DENSE_LIMIT {
            self.stationary(StationaryMethod::Direct, 1e-10, ITERATION_CAP)
        } else {
            self.stationary(StationaryMethod::Power, 1e-10, ITERATION_CAP)
        }
    }

    fn stationary_power(&self, tol: f64, max_iter: usize) -> Result<Dist> {
        let cap = max_iter.min(ITERATION_CAP);
        let mut nu = vec![1.0 / self.n as f64; self.n];
        let mut residual = f64::INFINITY;
        for it in 0..cap {
            let mut next = self.mul_left(&nu);
            let sum: f64 = next.iter().sum();
            // Row sums are exact to fp, so this only removes rounding drift.
            for v in next.iter_mut() {
                *v /= sum;
            }
            residual = l1_diff(&next, &nu);
            nu = next;
            if residual <= tol {
                let _ = it;
                return Dist::new(nu);
            }
        }
        Err(Error::NoConvergence { iterations: cap, residual })
    }

    fn stationary_direct(&self, tol: f64) -> Result<Dist> {
        let n = self.n;
        let data = self.to_dense_data()?;
        // Nullspace of B = (P - I)^T; right singular vectors of (P - I).
        let mut b = DMatrix::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                b[(y, x)] = data[x * n + y] - if x == y { 1.0 } else { 0.0 };
            }
        }
        let svd = b.svd(false, true);
        let sv = &svd.singular_values;
        let null_dim = sv.iter().filter(|&&s| s < NULLSPACE_SV_TOL).count();
        if null_dim > 1 {
            return Err(Error::NonUniqueStationary { nullspace_dim: null_dim });
        }
        let mut argmin = 0;
        for (i, &s) in sv.iter().enumerate() {
            if s < sv[argmin] {
                argmin = i;
            }
        }
        let v_t = svd.v_t.expect("v_t requested");
        let mut pi: Vec<f64> = v_t.row(argmin).iter().copied().collect();
        let sum: f64 = pi.iter().sum();
        if sum.abs() < 1e-12 {
            return Err(Error::SingularSystem(
                "stationary null vector sums to zero; cannot normalize".into(),
            ));
        }
        for v in pi.iter_mut() {
            *v /= sum;
        }
        let floor = -1e-9;
        for v in pi.iter_mut() {
            if *v < 0.0 {
                if *v < floor {
                    return Err(Error::SingularSystem(format!(
                        "stationary null vector has a negative entry {v} beyond rounding"
                    )));
                }
                *v = 0.0;
            }
        }
        let total: f64 = pi.iter().sum();
        for v in pi.iter_mut() {
            *v /= total;
        }
        let pi = Dist::new(pi)?;
        let residual = self.stationary_residual(&pi)?;
        if residual > tol {
            return Err(Error::SolveFailure(format!(
                "direct stationary residual {residual} exceeds tol {tol}"
            )));
        }
        Ok(pi)
    }

    /// The time-reversal (adjoint) chain `P*(x, y) = pi(y) P(y, x) / pi(x)`.
    ///
    /// Needs `pi > 0` everywhere and `||pi P - pi||_1 <=` [`STATIONARY_GATE`].
    /// Rows of the result are renormalized (their raw sums equal
    /// `(pi P)(x) / pi(x)`, which is 1 only up to the stationarity residual)
    /// and `pi` is verified stationary for the result at the same gate.
    pub fn adjoint(&self, pi: &Dist) -> Result<MarkovChain> {
        if pi.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: pi.len() });
        }
        for (x, &p) in pi.values().iter().enumerate() {
            if p <= 0.0 {
                return Err(Error::ZeroMassState { state: x });
            }
        }
        let residual = self.stationary_residual(pi)?;
        if residual > STATIONARY_GATE {
            return Err(Error::NotStationary { residual });
        }
        let adj = match &self.storage {
            Storage::Sparse { row_start, cols, vals } => {
                let mut triplets = Vec::with_capacity(vals.len());
                for y in 0..self.n {
                    for k in row_start[y]..row_start[y + 1] {
                        let x = cols[k];
                        triplets.push((x, y, pi.get(y) * vals[k] / pi.get(x)));
                    }
                }
                renormalize_triplet_rows(self.n, &mut triplets)?;
                MarkovChain::from_triplets(self.n, triplets, self.row_tolerance)?
            }
            _ => {
                let data = self.to_dense_data()?;
                let n = self.n;
                let mut out = vec![0.0; n * n];
                for x in 0..n {
                    let mut sum = 0.0;
                    for y in 0..n {
                        let v = pi.get(y) * data[y * n + x] / pi.get(x);
                        out[x * n + y] = v;
                        sum += v;
                    }
                    if !(0.5..=1.5).contains(&sum) {
                        return Err(Error::NotStationary { residual });
                    }
                    for y in 0..n {
                        out[x * n + y] /= sum;
                    }
                }
                MarkovChain::from_dense(n, out, self.row_tolerance)?
            }
        };
        let adj_residual = adj.stationary_residual(pi)?;
        if adj_residual > STATIONARY_GATE {
            return Err(Error::NotStationary { residual: adj_residual });
        }
        Ok(adj)
    }
}

/// Renormalizes the rows encoded in a triplet list in place.
fn renormalize_triplet_rows(n: usize, triplets: &mut [(usize, usize, f64)]) -> Result<()> {
    let mut sums = vec![0.0; n];
    for &(r, _, v) in triplets.iter() {
        sums[r] += v;
    }
    for (r, &s) in sums.iter().enumerate() {
        if !(0.5..=1.5).contains(&s) {
            return Err(Error::RowSumOutOfTolerance { row: r, sum: s, tolerance: 0.5 });
        }
    }
    for t in triplets.iter_mut() {
        t.2 /= sums[t.0];
    }
    Ok(())
}

/// Validates one row and renormalizes it exactly when its sum is within
/// `tolerance` of 1. `col_of` maps slice positions to column indices for
/// error reporting (identity for dense rows).
fn validate_and_renormalize_row(
    row: &mut [f64],
    x: usize,
    tolerance: f64,
    col_of: impl Fn(usize) -> usize,
) -> Result<()> {
    let mut sum = 0.0;
    for (k, &v) in row.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteEntry { row: x, col: col_of(k), value: v });
        }
        if v < 0.0 {
            return Err(Error::NegativeEntry { row: x, col: col_of(k), value: v });
        }
        sum += v;
    }
    if (sum - 1.0).abs() > tolerance {
        return Err(Error::RowSumOutOfTolerance { row: x, sum, tolerance });
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
    Ok(())
}

/// Raw l1 distance `||p - q||_1` between two distributions.
pub fn l1_distance(p: &Dist, q: &Dist) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { expected: p.len(), got: q.len() });
    }
    Ok(l1_diff(p.values(), q.values()))
}

/// Total variation distance `d_TV(p, q) = ||p - q||_1 / 2`.
pub fn tv_distance(p: &Dist, q: &Dist) -> Result<f64> {
    Ok(0.5 * l1_distance(p, q)?)
}

/// l1 distance between two same-length slices; panics on length mismatch.
pub(crate) fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "slice length mismatch");
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum()
}

/// Weighted norm `||f||_{p,pi}` for `1 <= p <= infinity`.
///
/// `p = infinity` is the pi-essential sup: states with `pi(x) = 0` are
/// ignored. Entries of `f` must be finite.
pub fn weighted_lp_norm(f: &[f64], pi: &Dist, p: f64) -> Result<f64> {
    if f.len() != pi.len() {
        return Err(Error::LengthMismatch { expected: pi.len(), got: f.len() });
    }
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent { p });
    }
    for (i, &v) in f.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { index: i, value: v });
        }
    }
    if p == f64::INFINITY {
        let mut sup = 0.0f64;
        for (&v, &w) in f.iter().zip(pi.values()) {
            if w > 0.0 {
                sup = sup.max(v.abs());
            }
        }
        return Ok(sup);
    }
    let sum: f64 = f
        .iter()
        .zip(pi.values())
        .map(|(&v, &w)| if w == 0.0 { 0.0 } else { w * v.abs().powf(p) })
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// Smoothness `||mu/pi||_{p,pi}` of a restart distribution against `pi`.
///
/// States with `pi(x) = 0 = mu(x)` contribute nothing; `mu`-mass on a
/// `pi`-null state makes the quantity genuinely infinite and is reported as
/// [`Error::UnsupportedMass`] rather than as a float. The uniform `mu`
/// against uniform `pi` gives exactly 1 for every `p`.
pub fn smoothness(mu: &Dist, pi: &Dist, p: f64) -> Result<f64> {
    if mu.len() != pi.len() {
        return Err(Error::LengthMismatch { expected: pi.len(), got: mu.len() });
    }
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent { p });
    }
    for (x, (&m, &w)) in mu.values().iter().zip(pi.values()).enumerate() {
        if w == 0.0 && m > 0.0 {
            return Err(Error::UnsupportedMass { state: x });
        }
    }
    if p == f64::INFINITY {
        let mut sup = 0.0f64;
        for (&m, &w) in mu.values().iter().zip(pi.values()) {
            if w > 0.0 {
                sup = sup.max(m / w);
            }
        }
        return Ok(sup);
    }
    let sum: f64 = mu
        .values()
        .iter()
        .zip(pi.values())
        .map(|(&m, &w)| if w == 0.0 { 0.0 } else { w * (m / w).powf(p) })
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// The dual exponent `q = p / (p - 1)`, with `q(1) = infinity` and
/// `q(infinity) = 1`.
pub fn dual_exponent(p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent { p });
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    if p == f64::INFINITY {
        return Ok(1.0);
    }
    Ok(p / (p - 1.0))
}

/// Applies the adjoint to the centered density `f = mu/pi - 1`.
///
/// Returns `P* f` and cross-checks it against the direct evaluation
/// `(mu P)/pi - 1`, which must agree within 1e-10; a larger gap means `pi`
/// was not accurate enough to be treated as stationary. Also asserts
/// `E_pi[f] = 0`, which holds for any two distributions on the support of
/// `pi`.
pub fn apply_adjoint_density(chain: &MarkovChain, pi: &Dist, mu: &Dist) -> Result<WeightedFn> {
    if mu.len() != chain.n() {
        return Err(Error::LengthMismatch { expected: chain.n(), got: mu.len() });
    }
    let adj = chain.adjoint(pi)?;
    let f: Vec<f64> = mu
        .values()
        .iter()
        .zip(pi.values())
        .map(|(&m, &w)| m / w - 1.0)
        .collect();
    let mean: f64 = f.iter().zip(pi.values()).map(|(&v, &w)| v * w).sum();
    assert!(
        mean.abs() <= 1e-9,
        "centered density has pi-mean {mean}; distributions failed validation"
    );
    let image = adj.mul_right(&f);
    let mu_step = chain.mul_left(mu.values());
    let mut worst = 0.0f64;
    for ((&g, &m), &w) in image.iter().zip(&mu_step).zip(pi.values()) {
        worst = worst.max((g - (m / w - 1.0)).abs());
    }
    if worst > 1e-10 {
        return Err(Error::NotStationary { residual: worst });
    }
    WeightedFn::new(image)
}

/// How far a corrupted chain sits from an original, weighted by the
/// original's stationary distribution.
#[derive(Debug, Clone, Serialize)]
pub struct CorruptionReport {
    /// `sum_x pi(x) ||P(x,.) - Q(x,.)||_1`, the pi-weighted l1 corruption
    /// size. Lives in `[0, 2]`; twice the pi-weighted mean row TV.
    pub epsilon: f64,
    /// Per-row total variation `d_TV(P(x,.), Q(x,.))`.
    pub per_row_tv: Vec<f64>,
    /// Rows whose TV perturbation is nonzero.
    pub corrupted_rows: Vec<usize>,
}

/// Measures the corruption of `corrupted` relative to `original`.
///
/// `pi` must be stationary for the **original** chain (gate
/// [`STATIONARY_GATE`]); the weighting deliberately uses the original's
/// stationary mass, so swapping the arguments changes the answer. Rows the
/// original never visits (`pi(x) = 0`) cost nothing no matter how badly
/// they are corrupted.
pub fn measure_corruption(
    original: &MarkovChain,
    corrupted: &MarkovChain,
    pi: &Dist,
) -> Result<CorruptionReport> {
    if original.n() != corrupted.n() {
        return Err(Error::SizeMismatch { left: original.n(), right: corrupted.n() });
    }
    if pi.len() != original.n() {
        return Err(Error::LengthMismatch { expected: original.n(), got: pi.len() });
    }
    let residual = original.stationary_residual(pi)?;
    if residual > STATIONARY_GATE {
        return Err(Error::NotStationary { residual });
    }
    let n = original.n();
    let mut per_row_tv = Vec::with_capacity(n);
    let mut corrupted_rows = Vec::new();
    let mut epsilon = 0.0;
    for x in 0..n {
        let l1 = row_l1_diff(original, corrupted, x);
        let tv = 0.5 * l1;
        if tv > 0.0 {
            corrupted_rows.push(x);
        }
        per_row_tv.push(tv);
        epsilon += pi.get(x) * l1;
    }
    Ok(CorruptionReport { epsilon, per_row_tv, corrupted_rows })
}

/// l1 distance between row `x` of two chains, sparse-aware.
fn row_l1_diff(a: &MarkovChain, b: &MarkovChain, x: usize) -> f64 {
    if a.is_sparse() && b.is_sparse() && a.restart_parts().is_none() && b.restart_parts().is_none() {
        let ra = a.row_entries(x);
        let rb = b.row_entries(x);
        let mut i = 0;
        let mut j = 0;
        let mut sum = 0.0;
        while i < ra.len() || j < rb.len() {
            match (ra.get(i), rb.get(j)) {
                (Some(&(ca, va)), Some(&(cb, vb))) => {
                    if ca == cb {
                        sum += (va - vb).abs();
                        i += 1;
                        j += 1;
                    } else if ca < cb {
                        sum += va.abs();
                        i += 1;
                    } else {
                        sum += vb.abs();
                        j += 1;
                    }
                }
                (Some(&(_, va)), None) => {
                    sum += va.abs();
                    i += 1;
                }
                (None, Some(&(_, vb))) => {
                    sum += vb.abs();
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        sum
    } else {
        l1_diff(&a.row(x), &b.row(x))
    }
}
