use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lukhints_core::experiment::{
    aggregate, bootstrap_pool, export_sorted, read_rows, run_experiment, write_aggregates,
    write_rows, ExperimentConfig, SortKey,
};
use lukhints_core::inference::{check_proof, ProofRecord};
use lukhints_core::problem::{load_hint_pool, load_problem, write_hint_pool, Problem};
use lukhints_core::semantics::{
    eval_falsity, grid_counterexample, truth_table3, Rational, Valuation, DEFAULT_BUDGET,
};
use lukhints_core::strategy::{saturate, HintList, MatchMode, Outcome, SearchConfig};
use lukhints_core::term::{parse_functional, parse_polish, variable_name, Term};

/// Condensed-detachment prover for Łukasiewicz logic with hint-guided search.
#[derive(Parser)]
#[command(name = "lukhints", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a proof of the passive goal of a problem file.
    Prove(ProveArgs),
    /// Run a randomized hint-subset sweep and write one CSV row per trial.
    Experiment(ExperimentArgs),
    /// Per-size means of sos size and generated clauses.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-size sorted series of one column.
    Sorted {
        #[arg(long = "in")]
        input: PathBuf,
        /// sos_size or clauses_generated
        #[arg(long)]
        key: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truth-value semantics of single formulas.
    #[command(subcommand)]
    Semantics(SemanticsCommand),
    /// Replay a proof file written by `prove`.
    CheckProof {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Build a hint pool from the run directory of a successful `prove`.
    BootstrapPool {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep at most this many terms (proof lines come first).
        #[arg(long)]
        limit: Option<usize>,
    },
}

#[derive(Subcommand)]
enum SemanticsCommand {
    /// Check validity on the grid {0, 1/m, ..., 1}.
    Taut {
        #[arg(long)]
        formula: String,
        #[arg(long)]
        m: u32,
    },
    /// Three-valued truth table.
    Table3 {
        #[arg(long)]
        formula: String,
    },
    /// Falsity degree under an assignment such as `x=1/2,y=0.3`.
    Eval {
        #[arg(long)]
        formula: String,
        #[arg(long)]
        assign: String,
    },
}

#[derive(Args, Clone)]
struct SearchArgs {
    #[arg(long, env = "LUKHINTS_MAX_WEIGHT")]
    max_weight: Option<i64>,
    #[arg(long, env = "LUKHINTS_MAX_GIVEN")]
    max_given: Option<u64>,
    #[arg(long, env = "LUKHINTS_MAX_KEPT")]
    max_kept: Option<u64>,
    #[arg(long, env = "LUKHINTS_HINT_BONUS")]
    hint_bonus: Option<i64>,
    /// Every (N+1)-th given clause is the oldest instead of the lightest.
    #[arg(long)]
    pick_given_ratio: Option<u64>,
    /// Stop after this many seconds of wall-clock time.
    #[arg(long, env = "LUKHINTS_MAX_SECONDS")]
    max_seconds: Option<u64>,
    #[arg(long)]
    no_back_sub: bool,
    /// forward, backward or both
    #[arg(long, default_value_t = MatchMode::Both)]
    hint_mode: MatchMode,
}

impl SearchArgs {
    /// Defaults, then settings from the problem file, then flags and
    /// environment.
    fn config(&self, problem: &Problem) -> SearchConfig {
        let mut config = problem.search_config(&SearchConfig::default());
        if let Some(v) = self.max_weight {
            config.max_weight = v;
        }
        if let Some(v) = self.max_given {
            config.max_given = v;
        }
        if let Some(v) = self.max_kept {
            config.max_kept = v;
        }
        if let Some(v) = self.hint_bonus {
            config.hint_bonus = v;
        }
        if let Some(v) = self.pick_given_ratio {
            config.pick_given_ratio = Some(v);
        }
        if let Some(v) = self.max_seconds {
            config.max_seconds = Some(v);
        }
        if self.no_back_sub {
            config.back_subsumption = false;
        }
        config
    }
}

#[derive(Args)]
struct ProveArgs {
    problem: PathBuf,
    /// Hint pool replacing any hints in the problem file.
    #[arg(long)]
    hints: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
    /// Directory for proof.json, proof.txt, kept.txt and stats.txt.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Print only the outcome line and statistics.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "30,35,40,45,50,55")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 150)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[command(flatten)]
    search: SearchArgs,
}

/// Failures that map to exit code 2.
#[derive(Debug)]
struct UsageError(anyhow::Error);

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_problem_file(path: &Path) -> Result<Problem> {
    let problem = load_problem(&read(path)?).with_context(|| format!("in {}", path.display()))?;
    for warning in &problem.warnings {
        eprintln!("{}:{}: warning: {}", path.display(), warning.line, warning.message);
    }
    Ok(problem)
}

fn load_pool_file(path: &Path) -> Result<Vec<Term>> {
    load_hint_pool(&read(path)?).with_context(|| format!("in {}", path.display()))
}

/// Functional syntax when the text has parentheses, Polish otherwise.
fn parse_formula(text: &str) -> Result<Term> {
    let text = text.trim();
    let parsed = if text.contains('(') {
        parse_functional(text)
    } else {
        parse_polish(text)
    };
    parsed.with_context(|| format!("cannot parse formula `{text}`"))
}

fn parse_value(text: &str) -> Result<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: i64 = n.trim().parse().context("numerator")?;
        let d: i64 = d.trim().parse().context("denominator")?;
        if d == 0 {
            bail!("zero denominator in `{text}`");
        }
        return Ok(Rational::new(n, d));
    }
    let (whole, fraction) = text.split_once('.').unwrap_or((text, ""));
    if !fraction.chars().all(|c| c.is_ascii_digit()) || fraction.len() > 15 {
        bail!("cannot read `{text}` as a number");
    }
    let scale = 10i64.pow(fraction.len() as u32);
    let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().with_context(|| format!("cannot read `{text}`"))? };
    let fraction: i64 = if fraction.is_empty() { 0 } else { fraction.parse()? };
    Ok(Rational::new(whole * scale + fraction, scale))
}

fn prove(args: &ProveArgs) -> Result<ExitCode, UsageError> {
    let mut problem = load_problem_file(&args.problem).map_err(UsageError)?;
    if let Some(path) = &args.hints {
        let pool = load_pool_file(path).map_err(UsageError)?;
        problem.hints = HintList::new(pool, args.search.hint_mode);
    } else {
        problem.hints.match_mode = args.search.hint_mode;
    }
    let config = args.search.config(&problem);
    let run = saturate(&problem, &config).map_err(|e| UsageError(e.into()))?;
    let proof_text = run.outcome.proof().map(ToString::to_string);
    match &run.outcome {
        Outcome::Proof(proof) => {
            println!("proof found: {} steps, {} by condensed detachment", proof.len(), proof.cd_steps());
            if !args.quiet {
                print!("{}", proof_text.as_deref().unwrap_or_default());
            }
        }
        Outcome::Saturated => println!("no proof: search space exhausted"),
        Outcome::LimitHit(limit) => println!("no proof: {limit} limit reached"),
    }
    print!("{}", run.stats);
    if let Some(dir) = &args.run_dir {
        save_run(dir, &problem, &run).map_err(UsageError)?;
    }
    Ok(if run.outcome.proof().is_some() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn save_run(dir: &Path, problem: &Problem, run: &lukhints_core::SearchRun) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let kept: Vec<&Term> = run.kept.iter().map(|c| &c.term).collect();
    fs::write(dir.join("kept.txt"), write_hint_pool(kept))?;
    fs::write(dir.join("stats.txt"), run.stats.to_string())?;
    if let Some(proof) = run.outcome.proof() {
        fs::write(dir.join("proof.json"), ProofRecord::new(proof, &problem.sos).to_json())?;
        fs::write(dir.join("proof.txt"), proof.to_string())?;
    }
    Ok(())
}

fn experiment(args: &ExperimentArgs) -> Result<ExitCode, UsageError> {
    let problem = load_problem_file(&args.problem).map_err(UsageError)?;
    let config = ExperimentConfig {
        pool: load_pool_file(&args.pool).map_err(UsageError)?,
        sizes: args.sizes.clone(),
        trials_per_size: args.trials,
        master_seed: args.seed,
        search: args.search.config(&problem),
        parallelism: args.parallel,
        match_mode: args.search.hint_mode,
    };
    let rows = run_experiment(&problem, &config).map_err(|e| UsageError(e.into()))?;
    let text = write_rows(&rows).map_err(|e| UsageError(e.into()))?;
    write_or_print(Some(&args.out), &text).map_err(UsageError)?;
    let proofs = rows.iter().filter(|r| r.proof_found).count();
    let faults = rows.iter().filter(|r| r.fault.is_some()).count();
    eprintln!("{} rows, {proofs} with a proof, {faults} faulted", rows.len());
    Ok(ExitCode::SUCCESS)
}

fn semantics(command: &SemanticsCommand) -> Result<ExitCode> {
    match command {
        SemanticsCommand::Taut { formula, m } => {
            let term = parse_formula(formula)?;
            match grid_counterexample(&term, *m, DEFAULT_BUDGET)? {
                None => {
                    println!("tautology on the grid of {} values", m + 1);
                    Ok(ExitCode::SUCCESS)
                }
                Some(cx) => {
                    let cells: Vec<String> = cx
                        .assignment
                        .iter()
                        .map(|(v, value)| format!("{}={value}", variable_name(*v)))
                        .collect();
                    println!("not a tautology: {} gives falsity {}", cells.join(","), cx.falsity);
                    Ok(ExitCode::from(1))
                }
            }
        }
        SemanticsCommand::Table3 { formula } => {
            let term = parse_formula(formula)?;
            let vars = term.variables();
            let mut header: Vec<String> = vars.iter().map(|v| variable_name(*v)).collect();
            header.push(term.to_string());
            println!("{}", header.join(" | "));
            for (inputs, value) in truth_table3(&term)? {
                let mut cells: Vec<String> = inputs.iter().map(ToString::to_string).collect();
                cells.push(value.to_string());
                println!("{}", cells.join(" | "));
            }
            Ok(ExitCode::SUCCESS)
        }
        SemanticsCommand::Eval { formula, assign } => {
            let term = parse_formula(formula)?;
            let names: BTreeMap<String, u32> = term
                .variables()
                .into_iter()
                .map(|v| (variable_name(v), v))
                .collect();
            let mut valuation = Valuation::new();
            for part in assign.split(',').filter(|p| !p.trim().is_empty()) {
                let (name, value) = part
                    .split_once('=')
                    .with_context(|| format!("expected name=value, found `{part}`"))?;
                let Some(&var) = names.get(name.trim()) else {
                    bail!("`{}` is not a variable of the formula", name.trim());
                };
                valuation.set(var, parse_value(value)?)?;
            }
            println!("{}", eval_falsity(&term, &valuation)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn check_proof_file(path: &Path) -> Result<ExitCode, UsageError> {
    let text = read(path).map_err(UsageError)?;
    let record = ProofRecord::from_json(&text)
        .with_context(|| format!("in {}", path.display()))
        .map_err(UsageError)?;
    let parsed = record
        .to_proof()
        .and_then(|proof| Ok((proof, record.axioms()?, record.goal()?)));
    let (proof, axioms, goal) = parsed.map_err(|e| UsageError(e.into()))?;
    match check_proof(&proof, &axioms, &goal) {
        Ok(()) => {
            println!("proof ok: {} steps", proof.len());
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            println!("proof rejected: {e}");
            Ok(ExitCode::from(1))
        }
    }
}

fn bootstrap(run: &Path, out: Option<&Path>, limit: Option<usize>) -> Result<ExitCode> {
    let record = ProofRecord::from_json(&read(&run.join("proof.json"))?)
        .context("the run directory holds no readable proof.json")?;
    let proof = record.to_proof()?;
    let kept = load_pool_file(&run.join("kept.txt"))?;
    let mut pool = bootstrap_pool(&proof, &kept)?;
    if let Some(limit) = limit {
        pool.truncate(limit);
    }
    write_or_print(out, &write_hint_pool(&pool))?;
    eprintln!("{} hints", pool.len());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, UsageError> {
    match &cli.command {
        Command::Prove(args) => prove(args),
        Command::Experiment(args) => experiment(args),
        Command::Aggregate { input, out } => (|| {
            let rows = read_rows(&read(input)?)?;
            write_or_print(out.as_deref(), &write_aggregates(&aggregate(&rows)?))?;
            Ok(ExitCode::SUCCESS)
        })()
        .map_err(UsageError),
        Command::Sorted { input, key, out } => (|| {
            let key: SortKey = key.parse().map_err(anyhow::Error::msg)?;
            let rows = read_rows(&read(input)?)?;
            if rows.is_empty() {
                bail!("{} holds no rows", input.display());
            }
            write_or_print(out.as_deref(), &export_sorted(&rows, key))?;
            Ok(ExitCode::SUCCESS)
        })()
        .map_err(UsageError),
        Command::Semantics(command) => semantics(command).map_err(UsageError),
        Command::CheckProof { input } => check_proof_file(input),
        Command::BootstrapPool { run, out, limit } => {
            bootstrap(run, out.as_deref(), *limit).map_err(UsageError)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(UsageError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
