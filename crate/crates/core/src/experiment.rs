//! Randomized hint-subset experiments: seeded sampling from a hint pool,
//! batch runs, per-size means and sorted series.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::str::FromStr;

use num_rational::Ratio;
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::Proof;
use crate::problem::Problem;
use crate::strategy::{saturate, HintList, MatchMode, SearchConfig};
use crate::term::Term;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed: splitmix64 of the master seed xor the splitmix64 of the
/// packed `(size, trial)` pair. Independent of execution order.
pub fn derive_seed(master: u64, size: u32, trial: u32) -> u64 {
    let packed = (u64::from(size) << 32) | u64::from(trial);
    splitmix64(master ^ splitmix64(packed))
}

/// Uniform integer in `0..bound` by rejection, so no residue is favoured.
fn below(rng: &mut impl Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let r = rng.next_u64();
        if r >= threshold {
            return r % bound;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExperimentError {
    #[error("sample size {k} is outside 1..={pool}")]
    SampleSize { k: usize, pool: usize },
    #[error("hint pool is empty")]
    EmptyPool,
    #[error("no sizes given")]
    NoSizes,
    #[error("trials per size must be at least 1")]
    NoTrials,
    #[error("parallelism must be at least 1")]
    NoWorkers,
    #[error("could not start worker pool: {0}")]
    Workers(String),
}

/// `k` distinct pool entries chosen uniformly: a partial Fisher–Yates
/// shuffle of pool indices driven by xoshiro256** seeded through splitmix64.
/// The result lists the entries in the order they were drawn.
pub fn sample_indices(pool_len: usize, k: usize, seed: u64) -> Result<Vec<usize>, ExperimentError> {
    if k == 0 || k > pool_len {
        return Err(ExperimentError::SampleSize { k, pool: pool_len });
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..pool_len).collect();
    for i in 0..k {
        let j = i + below(&mut rng, (pool_len - i) as u64) as usize;
        order.swap(i, j);
    }
    order.truncate(k);
    Ok(order)
}

pub fn sample_hints(
    pool: &[Term],
    k: usize,
    seed: u64,
    mode: MatchMode,
) -> Result<HintList, ExperimentError> {
    let picked = sample_indices(pool.len(), k, seed)?;
    Ok(HintList::new(picked.into_iter().map(|i| pool[i].clone()), mode))
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub pool: Vec<Term>,
    pub sizes: Vec<usize>,
    pub trials_per_size: u32,
    pub master_seed: u64,
    pub search: SearchConfig,
    pub parallelism: usize,
    pub match_mode: MatchMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.pool.is_empty() {
            return Err(ExperimentError::EmptyPool);
        }
        if self.sizes.is_empty() {
            return Err(ExperimentError::NoSizes);
        }
        if let Some(&k) = self.sizes.iter().find(|&&k| k == 0 || k > self.pool.len()) {
            return Err(ExperimentError::SampleSize {
                k,
                pool: self.pool.len(),
            });
        }
        if self.trials_per_size == 0 {
            return Err(ExperimentError::NoTrials);
        }
        if self.parallelism == 0 {
            return Err(ExperimentError::NoWorkers);
        }
        Ok(())
    }
}

/// One trial. A faulted trial carries zero counters and a `fault` note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub size: u32,
    pub trial: u32,
    pub seed: u64,
    pub proof_found: bool,
    pub clauses_given: u64,
    pub clauses_generated: u64,
    pub forward_subsumed: u64,
    pub clauses_kept: u64,
    pub sos_size: u64,
    pub wall_millis: u64,
    pub fault: Option<String>,
}

impl ExperimentRow {
    fn faulted(size: u32, trial: u32, seed: u64, note: String) -> ExperimentRow {
        ExperimentRow {
            size,
            trial,
            seed,
            proof_found: false,
            clauses_given: 0,
            clauses_generated: 0,
            forward_subsumed: 0,
            clauses_kept: 0,
            sos_size: 0,
            wall_millis: 0,
            fault: Some(note),
        }
    }

    pub fn without_timing(&self) -> ExperimentRow {
        ExperimentRow {
            wall_millis: 0,
            ..self.clone()
        }
    }
}

fn panic_note(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic".to_string()
    }
}

fn run_trial(problem: &Problem, config: &ExperimentConfig, size: usize, trial: u32) -> ExperimentRow {
    let size32 = size as u32;
    let seed = derive_seed(config.master_seed, size32, trial);
    let attempt = panic::catch_unwind(AssertUnwindSafe(|| {
        let hints = sample_hints(&config.pool, size, seed, config.match_mode)
            .map_err(|e| e.to_string())?;
        let problem = Problem {
            hints,
            ..problem.clone()
        };
        saturate(&problem, &config.search).map_err(|e| e.to_string())
    }));
    let run = match attempt {
        Ok(Ok(run)) => run,
        Ok(Err(message)) => return ExperimentRow::faulted(size32, trial, seed, message),
        Err(payload) => return ExperimentRow::faulted(size32, trial, seed, panic_note(&*payload)),
    };
    let stats = run.stats;
    ExperimentRow {
        size: size32,
        trial,
        seed,
        proof_found: run.outcome.proof().is_some(),
        clauses_given: stats.clauses_given,
        clauses_generated: stats.clauses_generated,
        forward_subsumed: stats.forward_subsumed,
        clauses_kept: stats.clauses_kept,
        sos_size: stats.sos_size,
        wall_millis: stats.wall_millis,
        fault: None,
    }
}

/// Runs every `(size, trial)` pair on `parallelism` workers. Rows come back
/// in size order, then trial order (trials count from 1).
pub fn run_experiment(
    problem: &Problem,
    config: &ExperimentConfig,
) -> Result<Vec<ExperimentRow>, ExperimentError> {
    config.validate()?;
    let jobs: Vec<(usize, u32)> = config
        .sizes
        .iter()
        .flat_map(|&size| (1..=config.trials_per_size).map(move |trial| (size, trial)))
        .collect();
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| ExperimentError::Workers(e.to_string()))?;
    Ok(workers.install(|| {
        jobs.par_iter()
            .map(|&(size, trial)| run_trial(problem, config, size, trial))
            .collect()
    }))
}

pub fn write_rows(rows: &[ExperimentRow]) -> Result<String, csv::Error> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    if rows.is_empty() {
        writer.write_record(ROW_HEADER)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const ROW_HEADER: [&str; 11] = [
    "size",
    "trial",
    "seed",
    "proof_found",
    "clauses_given",
    "clauses_generated",
    "forward_subsumed",
    "clauses_kept",
    "sos_size",
    "wall_millis",
    "fault",
];

pub fn read_rows(text: &str) -> Result<Vec<ExperimentRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

/// Per-size means of sos size and generated clauses over all trials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregate {
    pub size: u32,
    pub n: u64,
    pub mean_sos_size: Ratio<u64>,
    pub mean_generated: Ratio<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("no rows to aggregate")]
    Empty,
    #[error("size {size} has {found} trials, expected {expected}")]
    Unbalanced { size: u32, found: u64, expected: u64 },
}

pub fn aggregate(rows: &[ExperimentRow]) -> Result<Vec<Aggregate>, AggregateError> {
    let mut groups: BTreeMap<u32, (u64, u64, u64)> = BTreeMap::new();
    for row in rows {
        let entry = groups.entry(row.size).or_default();
        entry.0 += 1;
        entry.1 += row.sos_size;
        entry.2 += row.clauses_generated;
    }
    let expected = groups.values().next().ok_or(AggregateError::Empty)?.0;
    groups
        .into_iter()
        .map(|(size, (n, sos, generated))| {
            if n != expected {
                return Err(AggregateError::Unbalanced {
                    size,
                    found: n,
                    expected,
                });
            }
            Ok(Aggregate {
                size,
                n,
                mean_sos_size: Ratio::new(sos, n),
                mean_generated: Ratio::new(generated, n),
            })
        })
        .collect()
}

/// Decimal rendering with `places` digits, rounding half away from zero.
pub fn render_ratio(value: &Ratio<u64>, places: u32) -> String {
    let scale = 10u128.pow(places);
    let numer = u128::from(*value.numer());
    let denom = u128::from(*value.denom());
    let scaled = (numer * scale * 2 + denom) / (denom * 2);
    let whole = scaled / scale;
    if places == 0 {
        return whole.to_string();
    }
    format!("{whole}.{:0width$}", scaled % scale, width = places as usize)
}

pub const MEAN_PLACES: u32 = 6;

pub fn write_aggregates(aggregates: &[Aggregate]) -> String {
    let mut out = String::from("size,n,mean_sos_size,mean_clauses_generated\n");
    for a in aggregates {
        out.push_str(&format!(
            "{},{},{},{}\n",
            a.size,
            a.n,
            render_ratio(&a.mean_sos_size, MEAN_PLACES),
            render_ratio(&a.mean_generated, MEAN_PLACES)
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortKey {
    SosSize,
    ClausesGenerated,
}

impl SortKey {
    fn value(self, row: &ExperimentRow) -> u64 {
        match self {
            SortKey::SosSize => row.sos_size,
            SortKey::ClausesGenerated => row.clauses_generated,
        }
    }
}

impl FromStr for SortKey {
    type Err = String;

    fn from_str(s: &str) -> Result<SortKey, String> {
        match s {
            "sos_size" => Ok(SortKey::SosSize),
            "clauses_generated" => Ok(SortKey::ClausesGenerated),
            other => Err(format!(
                "unknown sort key `{other}` (expected sos_size or clauses_generated)"
            )),
        }
    }
}

impl fmt::Display for SortKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SortKey::SosSize => "sos_size",
            SortKey::ClausesGenerated => "clauses_generated",
        })
    }
}

/// Per size, trial values sorted ascending (ties by trial) with 1-based
/// ranks: `size,rank,trial,value`.
pub fn export_sorted(rows: &[ExperimentRow], key: SortKey) -> String {
    let mut groups: BTreeMap<u32, Vec<(u64, u32)>> = BTreeMap::new();
    for row in rows {
        groups
            .entry(row.size)
            .or_default()
            .push((key.value(row), row.trial));
    }
    let mut out = format!("size,rank,trial,{key}\n");
    for (size, mut series) in groups {
        series.sort_unstable();
        for (rank, (value, trial)) in series.into_iter().enumerate() {
            out.push_str(&format!("{size},{},{trial},{value}\n", rank + 1));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("the run kept no clauses")]
    NoKeptClauses,
}

/// Hint pool from a finished run: proof-line terms first, then every other
/// kept term in the given order, without duplicate variants.
pub fn bootstrap_pool(proof: &Proof, kept: &[Term]) -> Result<Vec<Term>, PoolError> {
    if kept.is_empty() {
        return Err(PoolError::NoKeptClauses);
    }
    // normalized variants are syntactically equal
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    for term in proof.terms().chain(kept) {
        let term = term.normalize_variables();
        if seen.insert(term.clone()) {
            pool.push(term);
        }
    }
    Ok(pool)
}
