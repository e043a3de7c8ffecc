//! Experiment sweeps and randomized verification suites.
//!
//! Two consumers live here. `run_experiment` drives the full pipeline
//! (generate or load a chain, corrupt it, recover, compare against ground
//! truth) over a grid of trials, corruption budgets, and restart weights,
//! and renders the outcome as CSV for plotting. `run_verify` points the
//! inequality checkers at a single chain with seeded random inputs and
//! reports every `(lhs, rhs, holds)` row, so a violated bound surfaces as
//! data rather than a panic.
//!
//! Determinism is a contract: every random choice derives from the master
//! seed through a fixed mixing function, cells are computed independently
//! (in parallel when `SENTINEL_THREADS` allows), and rows are canonicalized
//! by (trial, budget, weight) before rendering. The same config yields the
//! same bytes. Cell runtimes are the one exception, so the `runtime_ms`
//! column stays empty unless explicitly requested.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{corrupt, make_test_chain, CorruptionKind, CorruptionSpec, TestChainKind};
use crate::chain::{smoothness, tv_distance, weighted_lp_norm, Dist, MarkovChain};
use crate::error::{Error, Result};
use crate::io::{read_chain, read_dist};
use crate::pagerank::{check_corrupted_close, check_density_contraction, check_pr_close};
use crate::recovery::{recover, recover_at, Refine};
use crate::spectral::{
    check_coupling_bound, check_mixing_bound, spectral_gap, BoundCheck, BOUND_SLACK,
};

/// Where the experiment's ground-truth chain comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainSource {
    /// Load a chain file; its own stationary distribution is the ground
    /// truth, computed once.
    File {
        /// Path to the chain JSON.
        path: PathBuf,
    },
    /// Build a fresh test chain per trial from the trial's seed.
    Generator {
        /// Which family to draw from.
        kind: TestChainKind,
        /// Number of states.
        n: usize,
    },
}

/// The restart distribution handed to recovery.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartSpec {
    /// Uniform over all states.
    #[default]
    Uniform,
    /// A point mass.
    Point {
        /// The state carrying all restart mass.
        state: usize,
    },
    /// Load a distribution file.
    File {
        /// Path to the distribution JSON.
        path: PathBuf,
    },
}

/// The corruption sweep: one kind, a grid of budgets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorruptionGrid {
    /// Corruption family applied in every cell.
    pub kind: CorruptionKind,
    /// Budget grid; each entry becomes the `eps_target` column of its rows.
    pub budgets: Vec<f64>,
    /// Explicit rows to corrupt; omitted means automatic selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rows: Option<Vec<usize>>,
}

/// Where recovery's asserted parameters come from.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    /// Measure everything from ground truth: the spectral gap of the
    /// uncorrupted chain, the measured corruption, and the restart
    /// smoothness.
    #[default]
    Auto,
    /// Trust these values instead.
    Explicit {
        /// Asserted spectral gap.
        gamma: f64,
        /// Asserted corruption level.
        epsilon: f64,
        /// Asserted restart smoothness.
        beta: f64,
        /// Asserted sup-norm density bound; omitted uses recovery's
        /// defaults.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sup_ratio: Option<f64>,
    },
}

/// Recovery knobs shared by every cell.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RecoverySettings {
    /// Smoothness exponent; accepts a number above 1 or the string
    /// `"inf"`.
    #[serde(
        default = "default_exponent",
        serialize_with = "ser_exponent",
        deserialize_with = "de_exponent"
    )]
    pub p: f64,
    /// Weight search used when the sweep leaves the restart weight
    /// automatic; defaults to a 9-point grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<Refine>,
    /// Parameter source; defaults to ground-truth measurement.
    #[serde(default)]
    pub params: ParamSource,
}

impl Default for RecoverySettings {
    fn default() -> Self {
        RecoverySettings { p: f64::INFINITY, refine: None, params: ParamSource::Auto }
    }
}

fn default_exponent() -> f64 {
    f64::INFINITY
}

fn ser_exponent<S: serde::Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

fn de_exponent<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    struct ExponentVisitor;
    impl serde::de::Visitor<'_> for ExponentVisitor {
        type Value = f64;
        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            write!(f, "a number or the string \"inf\"")
        }
        fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<f64, E> {
            Ok(v)
        }
        fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<f64, E> {
            match v {
                "inf" | "infinity" => Ok(f64::INFINITY),
                _ => Err(E::custom(format!("unrecognized exponent {v:?}"))),
            }
        }
    }
    d.deserialize_any(ExponentVisitor)
}

/// Everything one experiment sweep needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Ground-truth chain source.
    pub chain: ChainSource,
    /// Restart distribution; defaults to uniform.
    #[serde(default)]
    pub restart: RestartSpec,
    /// Corruption kind and budget grid.
    pub corruption: CorruptionGrid,
    /// Recovery settings; defaults to auto parameters with `p` infinite.
    #[serde(default)]
    pub recovery: RecoverySettings,
    /// Explicit restart-weight grid; omitted lets recovery tune the weight
    /// per cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    /// Independent repetitions; each gets its own derived seed.
    pub trials: usize,
    /// Root of all randomness in the sweep.
    pub master_seed: u64,
    /// Where the CLI writes the CSV; absent prints to stdout. The library
    /// runner ignores it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Fill the `runtime_ms` column. Off by default because wall-clock
    /// times break byte-for-byte output determinism.
    #[serde(default)]
    pub record_runtime: bool,
}

/// One CSV row of an experiment sweep.
///
/// Optional fields stay empty when their cell failed before producing
/// them; `status` then names the error instead of `ok`.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRow {
    /// Trial index.
    pub trial: usize,
    /// Seed the trial derived from the master seed.
    pub seed: u64,
    /// Number of states.
    pub n: Option<usize>,
    /// Chain family label, or `file`.
    pub kind: String,
    /// Spectral gap handed to recovery.
    pub gamma: Option<f64>,
    /// Corruption budget requested.
    pub eps_target: f64,
    /// Corruption actually measured.
    pub eps_measured: Option<f64>,
    /// Restart smoothness handed to recovery.
    pub beta: Option<f64>,
    /// Smoothness exponent.
    pub p: f64,
    /// Restart weight the cell solved at.
    pub delta: Option<f64>,
    /// Regularization-bias half of the certificate, as total variation.
    pub tv_pagerank_bias: Option<f64>,
    /// Corruption-sensitivity half of the certificate, as total variation.
    pub tv_corruption_gap: Option<f64>,
    /// Realized distance to ground truth.
    pub tv_realized: Option<f64>,
    /// The certificate itself.
    pub certified_bound: Option<f64>,
    /// Wall-clock cell time; empty unless the config opts in.
    pub runtime_ms: Option<u128>,
    /// `ok`, or the name of the error that stopped the cell.
    pub status: String,
}

/// The CSV header row, matching [`ExperimentRow::to_csv_line`] field for
/// field.
pub const CSV_HEADER: &str = "trial,seed,n,kind,gamma,eps_target,eps_measured,beta,p,delta,\
                              tv_pagerank_bias,tv_corruption_gap,tv_realized,certified_bound,\
                              runtime_ms,status";

fn fmt_float(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt<T, F: Fn(T) -> String>(v: Option<T>, f: F) -> String {
    v.map(f).unwrap_or_default()
}

impl ExperimentRow {
    /// Renders the row in the column order of [`CSV_HEADER`], floats with
    /// 17 significant digits, absent values as empty fields.
    pub fn to_csv_line(&self) -> String {
        [
            self.trial.to_string(),
            self.seed.to_string(),
            fmt_opt(self.n, |n| n.to_string()),
            self.kind.clone(),
            fmt_opt(self.gamma, fmt_float),
            fmt_float(self.eps_target),
            fmt_opt(self.eps_measured, fmt_float),
            fmt_opt(self.beta, fmt_float),
            fmt_float(self.p),
            fmt_opt(self.delta, fmt_float),
            fmt_opt(self.tv_pagerank_bias, fmt_float),
            fmt_opt(self.tv_corruption_gap, fmt_float),
            fmt_opt(self.tv_realized, fmt_float),
            fmt_opt(self.certified_bound, fmt_float),
            fmt_opt(self.runtime_ms, |ms| ms.to_string()),
            self.status.clone(),
        ]
        .join(",")
    }
}

/// Renders header plus rows as one CSV document.
pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

/// Derives the seed for one trial from the master seed.
///
/// The splitmix64 finalizer over a golden-ratio stream; consecutive trials
/// land far apart, and trial 0 does not collapse onto the master seed
/// itself. Also used to derive per-budget corruption seeds from trial
/// seeds, so every cell's randomness has a unique, stable root.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    let mut z = master_seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn error_label(e: &Error) -> &'static str {
    match e {
        Error::NonSquare { .. } => "non_square",
        Error::NonFiniteEntry { .. } => "non_finite_entry",
        Error::NonFiniteValue { .. } => "non_finite_value",
        Error::NegativeEntry { .. } => "negative_entry",
        Error::RowSumOutOfTolerance { .. } => "row_sum_out_of_tolerance",
        Error::DuplicateTriplet { .. } => "duplicate_triplet",
        Error::EntryOutOfBounds { .. } => "entry_out_of_bounds",
        Error::LengthMismatch { .. } => "length_mismatch",
        Error::SizeMismatch { .. } => "size_mismatch",
        Error::InvalidExponent { .. } => "invalid_exponent",
        Error::DistNegativeEntry { .. } => "dist_negative_entry",
        Error::DistSumOutOfTolerance { .. } => "dist_sum_out_of_tolerance",
        Error::UnsupportedMass { .. } => "unsupported_mass",
        Error::ZeroMassState { .. } => "zero_mass_state",
        Error::NotStationary { .. } => "not_stationary",
        Error::NoConvergence { .. } => "no_convergence",
        Error::IterativeNoConvergence { .. } => "iterative_no_convergence",
        Error::NonUniqueStationary { .. } => "non_unique_stationary",
        Error::SingularSystem(_) => "singular_system",
        Error::SolveFailure(_) => "solve_failure",
        Error::DenseLimitExceeded { .. } => "dense_limit_exceeded",
        Error::StateSpaceTooLarge { .. } => "state_space_too_large",
        Error::BudgetInfeasible(_) => "budget_infeasible",
        Error::OutOfRange(_) => "out_of_range",
        Error::InvalidInput(_) => "invalid_input",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

/// Ground truth realized once per sweep (file sources) or per trial
/// (generators).
enum SourceData {
    Generator { kind: TestChainKind, n: usize },
    Loaded { chain: MarkovChain, pi: Dist },
}

impl SourceData {
    fn realize(&self, seed: u64) -> Result<(MarkovChain, Dist)> {
        match self {
            SourceData::Generator { kind, n } => make_test_chain(*kind, *n, seed),
            SourceData::Loaded { chain, pi } => Ok((chain.clone(), pi.clone())),
        }
    }

    fn kind_label(&self) -> String {
        match self {
            SourceData::Generator { kind, .. } => match serde_json::to_value(kind) {
                Ok(serde_json::Value::String(s)) => s,
                _ => "generator".into(),
            },
            SourceData::Loaded { .. } => "file".into(),
        }
    }
}

enum RestartData {
    Uniform,
    Point(usize),
    Loaded(Dist),
}

impl RestartData {
    fn realize(&self, n: usize) -> Result<Dist> {
        match self {
            RestartData::Uniform => Ok(Dist::uniform(n)),
            RestartData::Point(state) => Dist::point_mass(n, *state),
            RestartData::Loaded(mu) => {
                if mu.len() != n {
                    return Err(Error::LengthMismatch { expected: n, got: mu.len() });
                }
                Ok(mu.clone())
            }
        }
    }
}

struct Cell {
    trial: usize,
    eps_idx: usize,
    delta_idx: usize,
    eps_target: f64,
    delta: Option<f64>,
}

fn validate_config(config: &ExperimentConfig) -> Result<()> {
    if config.trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if config.corruption.budgets.is_empty() {
        return Err(Error::InvalidInput("corruption budget grid is empty".into()));
    }
    for &b in &config.corruption.budgets {
        if !(b.is_finite() && (0.0..=2.0).contains(&b)) {
            return Err(Error::OutOfRange(format!("corruption budget {b} outside [0, 2]")));
        }
    }
    if let Some(deltas) = &config.deltas {
        if deltas.is_empty() {
            return Err(Error::InvalidInput("delta grid is empty".into()));
        }
        for &d in deltas {
            if !(d.is_finite() && d > 0.0 && d <= 1.0) {
                return Err(Error::OutOfRange(format!("delta {d} outside (0, 1]")));
            }
        }
    }
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = std::env::var("SENTINEL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool construction failed: {e}")))
}

/// Runs the full sweep: trials x budgets x weights, each cell generating,
/// corrupting, recovering, and scoring against ground truth.
///
/// Cells are isolated: a failure becomes that row's `status` label and the
/// sweep continues. Rows come back sorted by (trial, budget index, weight
/// index) no matter how the cells were scheduled. Config-level problems
/// (unreadable files, empty grids, a ground-truth chain whose stationary
/// distribution cannot be computed at all) fail the whole run instead.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    validate_config(config)?;

    let source = match &config.chain {
        ChainSource::Generator { kind, n } => SourceData::Generator { kind: *kind, n: *n },
        ChainSource::File { path } => {
            let chain = read_chain(path)?;
            let pi = chain.stationary_auto()?;
            SourceData::Loaded { chain, pi }
        }
    };
    let restart = match &config.restart {
        RestartSpec::Uniform => RestartData::Uniform,
        RestartSpec::Point { state } => RestartData::Point(*state),
        RestartSpec::File { path } => RestartData::Loaded(read_dist(path)?),
    };

    let delta_grid: Vec<Option<f64>> = match &config.deltas {
        None => vec![None],
        Some(ds) => ds.iter().copied().map(Some).collect(),
    };
    let mut cells = Vec::new();
    for trial in 0..config.trials {
        for (eps_idx, &eps_target) in config.corruption.budgets.iter().enumerate() {
            for (delta_idx, &delta) in delta_grid.iter().enumerate() {
                cells.push(Cell { trial, eps_idx, delta_idx, eps_target, delta });
            }
        }
    }

    let pool = thread_pool()?;
    let mut keyed: Vec<((usize, usize, usize), ExperimentRow)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let key = (cell.trial, cell.eps_idx, cell.delta_idx);
                (key, run_cell(config, &source, &restart, cell))
            })
            .collect()
    });
    keyed.sort_by_key(|(key, _)| *key);
    Ok(keyed.into_iter().map(|(_, row)| row).collect())
}

/// [`run_experiment`] rendered straight to CSV.
pub fn experiment_csv(config: &ExperimentConfig) -> Result<String> {
    Ok(rows_to_csv(&run_experiment(config)?))
}

fn run_cell(
    config: &ExperimentConfig,
    source: &SourceData,
    restart: &RestartData,
    cell: &Cell,
) -> ExperimentRow {
    let seed = trial_seed(config.master_seed, cell.trial as u64);
    let mut row = ExperimentRow {
        trial: cell.trial,
        seed,
        n: None,
        kind: source.kind_label(),
        gamma: None,
        eps_target: cell.eps_target,
        eps_measured: None,
        beta: None,
        p: config.recovery.p,
        delta: cell.delta,
        tv_pagerank_bias: None,
        tv_corruption_gap: None,
        tv_realized: None,
        certified_bound: None,
        runtime_ms: None,
        status: "ok".into(),
    };
    let started = Instant::now();
    if let Err(e) = cell_body(config, source, restart, cell, seed, &mut row) {
        row.status = error_label(&e).into();
    }
    if config.record_runtime {
        row.runtime_ms = Some(started.elapsed().as_millis());
    }
    row
}

fn cell_body(
    config: &ExperimentConfig,
    source: &SourceData,
    restart: &RestartData,
    cell: &Cell,
    seed: u64,
    row: &mut ExperimentRow,
) -> Result<()> {
    let (chain, pi) = source.realize(seed)?;
    row.n = Some(chain.n());
    let mu = restart.realize(chain.n())?;

    let spec = CorruptionSpec {
        kind: config.corruption.kind,
        budget: cell.eps_target,
        target_rows: config.corruption.target_rows.clone(),
        seed: trial_seed(seed, cell.eps_idx as u64),
    };
    let (corrupted, report) = corrupt(&chain, &pi, &spec)?;
    row.eps_measured = Some(report.epsilon);

    let p = config.recovery.p;
    let (gamma, epsilon, beta, sup_ratio) = match config.recovery.params {
        ParamSource::Auto => {
            let gamma = spectral_gap(&chain, &pi)?.gamma;
            let beta = smoothness(&mu, &pi, p)?;
            let sup = smoothness(&mu, &pi, f64::INFINITY)?;
            (gamma, report.epsilon, beta, Some(sup))
        }
        ParamSource::Explicit { gamma, epsilon, beta, sup_ratio } => {
            (gamma, epsilon, beta, sup_ratio)
        }
    };
    row.gamma = Some(gamma);
    row.beta = Some(beta);

    let refine = config.recovery.refine.unwrap_or(Refine::Grid(9));
    let result = match cell.delta {
        None => recover(&corrupted, &mu, gamma, epsilon, beta, p, sup_ratio, refine)?,
        Some(delta) => recover_at(&corrupted, &mu, gamma, epsilon, beta, p, sup_ratio, delta)?,
    };
    row.delta = Some(result.delta_used);
    row.tv_pagerank_bias = Some(result.diagnostics.bias_term / 2.0);
    row.tv_corruption_gap = Some(result.diagnostics.corruption_term / 2.0);
    row.certified_bound = Some(result.certified_bound);
    row.tv_realized = Some(tv_distance(&result.pi_hat, &pi)?);
    Ok(())
}

/// The randomized verification suites the CLI exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerifySuite {
    /// Norm contraction plus adjoint identities.
    #[serde(rename = "contract")]
    Contract,
    /// The gap-driven mixing inequality on random starts.
    #[serde(rename = "mixing")]
    Mixing,
    /// The coupling inequality on random starts.
    #[serde(rename = "coupling")]
    Coupling,
    /// Closeness of the regularized fixed point to the stationary
    /// distribution, plus density contraction.
    #[serde(rename = "prclose")]
    PrClose,
    /// Closeness of the regularized fixed points of a chain and its seeded
    /// corruptions.
    #[serde(rename = "corruptclose")]
    CorruptClose,
}

impl FromStr for VerifySuite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contract" => Ok(VerifySuite::Contract),
            "mixing" => Ok(VerifySuite::Mixing),
            "coupling" => Ok(VerifySuite::Coupling),
            "prclose" => Ok(VerifySuite::PrClose),
            "corruptclose" => Ok(VerifySuite::CorruptClose),
            other => Err(Error::InvalidInput(format!(
                "unknown suite {other:?}; expected contract, mixing, coupling, prclose, or corruptclose"
            ))),
        }
    }
}

/// One checked comparison from a verify suite.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    /// What was compared, with enough detail to reproduce it.
    pub case: String,
    /// Horizon, for the time-indexed inequalities.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    /// Left side of the inequality.
    pub lhs: f64,
    /// Right side of the inequality.
    pub rhs: f64,
    /// Whether the comparison held within its tolerance.
    pub holds: bool,
}

impl VerifyRow {
    fn from_checks(prefix: &str, checks: Vec<BoundCheck>) -> impl Iterator<Item = VerifyRow> + '_ {
        checks.into_iter().map(move |c| VerifyRow {
            case: prefix.to_string(),
            t: Some(c.t),
            lhs: c.lhs,
            rhs: c.rhs,
            holds: c.holds,
        })
    }
}

/// Outcome of one verify run.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    /// Which suite ran.
    pub suite: VerifySuite,
    /// Root seed of the run.
    pub seed: u64,
    /// Requested trial count.
    pub trials: usize,
    /// Every checked comparison.
    pub rows: Vec<VerifyRow>,
    /// How many rows failed to hold. Zero means every inequality survived.
    pub violations: usize,
}

/// Points one suite's checkers at a chain with seeded random inputs.
///
/// The chain must have a computable stationary distribution; everything
/// else (start distributions, corruption budgets, restart weights) derives
/// from the seed. Violations are rows with `holds = false`, counted in the
/// report, never panics.
pub fn run_verify(
    chain: &MarkovChain,
    suite: VerifySuite,
    seed: u64,
    trials: usize,
) -> Result<VerifyReport> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let pi = chain.stationary_auto()?;
    let rows = match suite {
        VerifySuite::Contract => contract_rows(chain, &pi, seed, trials)?,
        VerifySuite::Mixing => mixing_rows(chain, &pi, seed, trials)?,
        VerifySuite::Coupling => coupling_rows(chain, &pi, seed, trials)?,
        VerifySuite::PrClose => prclose_rows(chain, &pi, seed, trials)?,
        VerifySuite::CorruptClose => corruptclose_rows(chain, &pi, seed, trials)?,
    };
    let violations = rows.iter().filter(|r| !r.holds).count();
    Ok(VerifyReport { suite, seed, trials, rows, violations })
}

fn seeded_simplex(rng: &mut ChaCha8Rng, n: usize) -> Dist {
    loop {
        let weights: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let sum: f64 = weights.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            let values = weights.iter().map(|&w| w / sum).collect();
            return Dist::new(values).expect("normalized exponential weights form a distribution");
        }
    }
}

fn fmt_exponent(p: f64) -> String {
    if p.is_infinite() { "inf".into() } else { format!("{p}") }
}

const EXPONENT_CHOICES: [f64; 5] = [1.0, 1.5, 2.0, 4.0, f64::INFINITY];

fn contract_rows(
    chain: &MarkovChain,
    pi: &Dist,
    seed: u64,
    trials: usize,
) -> Result<Vec<VerifyRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = chain.n();
    let mut rows = Vec::new();

    for trial in 0..trials {
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let p = EXPONENT_CHOICES[trial % EXPONENT_CHOICES.len()];
        let lhs = weighted_lp_norm(&chain.mul_right(&f), pi, p)?;
        let rhs = weighted_lp_norm(&f, pi, p)?;
        rows.push(VerifyRow {
            case: format!("contraction trial {trial} p {}", fmt_exponent(p)),
            t: None,
            lhs,
            rhs,
            holds: lhs <= rhs + BOUND_SLACK,
        });
    }

    let constant = vec![0.75; n];
    for &p in &EXPONENT_CHOICES {
        let lhs = weighted_lp_norm(&chain.mul_right(&constant), pi, p)?;
        let rhs = weighted_lp_norm(&constant, pi, p)?;
        rows.push(VerifyRow {
            case: format!("constant function norm equality p {}", fmt_exponent(p)),
            t: None,
            lhs: (lhs - rhs).abs(),
            rhs: 1e-12,
            holds: (lhs - rhs).abs() <= 1e-12,
        });
    }

    let adj = chain.adjoint(pi)?;
    let ones = vec![1.0; n];
    let worst_row_sum = adj
        .mul_right(&ones)
        .iter()
        .map(|&s| (s - 1.0).abs())
        .fold(0.0, f64::max);
    rows.push(VerifyRow {
        case: "adjoint rows sum to 1".into(),
        t: None,
        lhs: worst_row_sum,
        rhs: BOUND_SLACK,
        holds: worst_row_sum <= BOUND_SLACK,
    });
    let adj_residual = adj.stationary_residual(pi)?;
    rows.push(VerifyRow {
        case: "pi stationary under adjoint".into(),
        t: None,
        lhs: adj_residual,
        rhs: BOUND_SLACK,
        holds: adj_residual <= BOUND_SLACK,
    });

    for k in 0..3 {
        let mu = seeded_simplex(&mut rng, n);
        let image = adj.mul_right(
            &mu.values()
                .iter()
                .zip(pi.values())
                .map(|(&m, &w)| m / w - 1.0)
                .collect::<Vec<f64>>(),
        );
        let mu_step = chain.mul_left(mu.values());
        let worst = image
            .iter()
            .zip(&mu_step)
            .zip(pi.values())
            .map(|((&g, &m), &w)| (g - (m / w - 1.0)).abs())
            .fold(0.0, f64::max);
        rows.push(VerifyRow {
            case: format!("adjoint moves density mu/pi to (mu P)/pi, draw {k}"),
            t: None,
            lhs: worst,
            rhs: BOUND_SLACK,
            holds: worst <= BOUND_SLACK,
        });
    }
    Ok(rows)
}

fn mixing_rows(chain: &MarkovChain, pi: &Dist, seed: u64, trials: usize) -> Result<Vec<VerifyRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = spectral_gap(chain, pi)?.gamma;
    let ts: Vec<u64> = (0..=100).collect();
    let mut rows = Vec::new();
    for trial in 0..trials {
        let (label, mu) = if trial % 2 == 0 {
            let state = rng.gen_range(0..chain.n());
            (format!("mixing from point mass at {state}"), Dist::point_mass(chain.n(), state)?)
        } else {
            (format!("mixing from random start, trial {trial}"), seeded_simplex(&mut rng, chain.n()))
        };
        let checks = check_mixing_bound(chain, pi, &mu, gamma, &ts)?;
        rows.extend(VerifyRow::from_checks(&label, checks));
    }
    Ok(rows)
}

fn coupling_rows(
    chain: &MarkovChain,
    pi: &Dist,
    seed: u64,
    trials: usize,
) -> Result<Vec<VerifyRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts = [0, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 100];
    let mut rows = Vec::new();
    for trial in 0..trials {
        let nu = seeded_simplex(&mut rng, chain.n());
        let checks = check_coupling_bound(chain, pi, &nu, &ts)?;
        rows.extend(VerifyRow::from_checks(&format!("coupling trial {trial}"), checks));
    }
    Ok(rows)
}

const PRCLOSE_DELTAS: [f64; 4] = [0.01, 0.05, 0.1, 0.3];

fn prclose_rows(chain: &MarkovChain, pi: &Dist, seed: u64, trials: usize) -> Result<Vec<VerifyRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = spectral_gap(chain, pi)?.gamma;
    let ts: Vec<u64> = (0..=50).collect();
    let mut rows = Vec::new();
    for trial in 0..trials {
        let (label, mu) = if trial == 0 {
            ("uniform restart".to_string(), Dist::uniform(chain.n()))
        } else {
            (format!("random restart trial {trial}"), seeded_simplex(&mut rng, chain.n()))
        };
        for &delta in &PRCLOSE_DELTAS {
            let checks = check_pr_close(chain, pi, &mu, gamma, delta, &ts)?;
            rows.extend(VerifyRow::from_checks(
                &format!("closeness, {label}, delta {delta}"),
                checks,
            ));
            let contraction = check_density_contraction(chain, pi, &mu, delta)?;
            rows.push(VerifyRow {
                case: format!("density contraction sup, {label}, delta {delta}"),
                t: None,
                lhs: contraction.sup.lhs,
                rhs: contraction.sup.rhs,
                holds: contraction.sup.holds,
            });
            for check in contraction.lp {
                rows.push(VerifyRow {
                    case: format!("density contraction p {}, {label}, delta {delta}", check.p),
                    t: None,
                    lhs: check.lhs,
                    rhs: check.rhs,
                    holds: check.holds,
                });
            }
        }
    }
    Ok(rows)
}

fn corruptclose_rows(
    chain: &MarkovChain,
    pi: &Dist,
    seed: u64,
    trials: usize,
) -> Result<Vec<VerifyRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts: Vec<u64> = (0..=40).collect();
    let mu = Dist::uniform(chain.n());
    let mut rows = Vec::new();
    for trial in 0..trials {
        let budget = rng.gen_range(0.005..0.05);
        let delta = rng.gen_range(0.02..0.3);
        let corruption_seed = rng.gen::<u64>();
        let spec = CorruptionSpec {
            kind: CorruptionKind::PerRowTv,
            budget,
            target_rows: None,
            seed: corruption_seed,
        };
        let (corrupted, report) = corrupt(chain, pi, &spec)?;
        let p = if trial % 2 == 0 { f64::INFINITY } else { 2.0 };
        let checks =
            check_corrupted_close(chain, &corrupted, pi, &mu, p, report.epsilon, delta, &ts)?;
        rows.extend(VerifyRow::from_checks(
            &format!(
                "corrupted closeness trial {trial}, measured eps {:.6}, delta {delta:.6}, p {}",
                report.epsilon,
                fmt_exponent(p)
            ),
            checks,
        ));
    }
    Ok(rows)
}
