//! `primequo`: sieve, class membership, empirical checks, formula emission
//! and evaluation from the command line.
//!
//! Exit codes: 0 pass, 1 fail, 2 inconclusive (or could not finish),
//! 64 usage error.

mod config;

use std::cell::OnceCell;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use primequo_core::definability::{
    define_c_n_squared, define_f_tilde, define_multiplication, with_deep_stack,
};
use primequo_core::formula::{parse_formula, EvalError, Evaluator};
use primequo_core::prime::check_estimates;
use primequo_core::verifier::{self, RelationOptions};
use primequo_core::{
    Assignment, ClassParams, DefinedRelation, FunctionOracle, InverseTable, Outcome, PrimeTable,
    Threshold, VerificationReport,
};

use config::{default_params, Convention, OracleSpec, Profile, Range, RunConfig};

pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] primequo_core::Error),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(primequo_core::Error::Domain(_)) => EXIT_USAGE,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "primequo",
    version,
    about = "Checks on the prime quotient floor(p_n/n) and its existential definitions"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Default sizes of sieve and ranges.
    #[arg(
        long,
        global = true,
        value_enum,
        env = "PRIMEQUO_PROFILE",
        default_value = "test"
    )]
    profile: Profile,
    /// Sieve limit for the prime table (overrides the profile).
    #[arg(long, global = true, env = "PRIMEQUO_SIEVE_LIMIT")]
    sieve_limit: Option<u64>,
    /// Prime table cache: read when it matches the sieve limit, written otherwise.
    #[arg(long, global = true, env = "PRIMEQUO_PRIME_CACHE")]
    prime_cache: Option<PathBuf>,
    /// prime | sqrt-like:D | table:PATH
    #[arg(long, global = true)]
    oracle: Option<OracleSpec>,
    /// Class parameters k,d,n0.
    #[arg(long, global = true)]
    params: Option<ClassParams>,
    /// Argument range A..B (inclusive).
    #[arg(long, global = true)]
    range: Option<Range>,
    /// Largest n for pseudo-inverse based checks.
    #[arg(long = "nmax", global = true)]
    n_max: Option<u64>,
    #[arg(long, global = true, env = "PRIMEQUO_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for relation checks.
    #[arg(long, global = true, env = "PRIMEQUO_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Prime indexing of the max-quotient and estimate checks.
    #[arg(long, global = true, value_enum, default_value = "one-based")]
    convention: Convention,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Zero every runtime_ms, so identical runs give identical bytes.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sieve primes up to a limit; prints the count and the largest prime.
    Sieve {
        #[arg(long)]
        limit: u64,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Membership of the oracle in C(k,d,n0) over finite ranges.
    CheckClass,
    /// Run one check (or all of them) and print its JSON report.
    Verify(VerifyArgs),
    /// Print a defined relation in the formula text format.
    EmitFormula {
        #[arg(value_enum)]
        relation: RelationName,
        /// Print the JSON envelope (roles, domain, sizes, text) instead.
        #[arg(long)]
        envelope: bool,
    },
    /// Evaluate a formula file under an assignment.
    Eval {
        #[arg(long)]
        formula: PathBuf,
        /// x=..,y=..
        #[arg(long, default_value = "")]
        assign: Assignment,
        /// Largest argument scanned when resolving f^-1.
        #[arg(long)]
        search_limit: Option<u64>,
        /// Largest number of candidates for one quantifier.
        #[arg(long)]
        budget: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    check: CheckId,
    /// Exhaustive pair range of quotient-almost-increasing.
    #[arg(long)]
    pair_bound: Option<u64>,
    /// End of the tail comparison of quotient-almost-increasing.
    #[arg(long)]
    tail_bound: Option<u64>,
    /// First n of quotient-inverse-gaps.
    #[arg(long, default_value_t = verifier::GAP_START)]
    from: u64,
    /// Sweep every c <= f(x) up to this value of f(x), sample above it.
    #[arg(long, default_value_t = 256)]
    sweep_cap: u64,
    /// Sampled c per argument above the sweep cap.
    #[arg(long, default_value_t = 32)]
    samples: usize,
    /// Input tuples of relation checks (per axis for mult).
    #[arg(long)]
    count: Option<u64>,
    /// Skip the solution-set sweep of relation checks.
    #[arg(long)]
    no_uniqueness: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum CheckId {
    MaxQuotient,
    QuotientAlmostIncreasing,
    QuotientInverseGaps,
    Estimates,
    Class,
    InverseGrowth,
    ShortRangeDrift,
    FtildeIngredients,
    Ftilde,
    Csquare,
    Mult,
    /// Every check above, in this order.
    All,
}

impl CheckId {
    fn name(self) -> String {
        self.to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string()
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RelationName {
    Ftilde,
    Csquare,
    Mult,
}

struct Context {
    global: Global,
    config: RunConfig,
    table: OnceCell<Arc<PrimeTable>>,
}

impl Context {
    fn new(global: Global, command: &str) -> Self {
        let config = RunConfig {
            command: command.to_string(),
            profile: global.profile,
            sieve_limit: global
                .sieve_limit
                .unwrap_or(global.profile.defaults().sieve_limit),
            oracle: global.oracle.clone(),
            params: global.params,
            range: global.range,
            n_max: global.n_max,
            seed: global.seed,
            jobs: global.jobs,
            convention: global.convention,
            out: global.out.clone(),
        };
        Context {
            global,
            config,
            table: OnceCell::new(),
        }
    }

    fn table(&self) -> Result<Arc<PrimeTable>> {
        if let Some(t) = self.table.get() {
            return Ok(t.clone());
        }
        let limit = self.config.sieve_limit;
        let cached = match &self.global.prime_cache {
            Some(path) if path.exists() => {
                let file = fs::File::open(path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                Some(PrimeTable::read_cache(BufReader::new(file))?).filter(|t| t.limit() == limit)
            }
            _ => None,
        };
        let table = match cached {
            Some(t) => t,
            None => {
                let t = PrimeTable::sieve(limit)?;
                if let Some(path) = &self.global.prime_cache {
                    write_cache(&t, path)?;
                }
                t
            }
        };
        Ok(self.table.get_or_init(|| Arc::new(table)).clone())
    }

    fn oracle_spec(&self) -> OracleSpec {
        self.config.oracle.clone().unwrap_or(OracleSpec::Prime)
    }

    fn oracle(&self) -> Result<FunctionOracle> {
        Ok(match self.oracle_spec() {
            OracleSpec::Prime => FunctionOracle::prime_quotient(self.table()?),
            OracleSpec::SqrtLike(d) => FunctionOracle::sqrt_like(d)?,
            OracleSpec::Table(path) => {
                let text =
                    fs::read_to_string(&path).map_err(|source| CliError::Io { path, source })?;
                FunctionOracle::table_from_text(1, &text)?
            }
        })
    }

    fn params(&self) -> Result<ClassParams> {
        match self.config.params {
            Some(p) => Ok(p),
            None => default_params(&self.oracle_spec()),
        }
    }

    fn is_synthetic(&self) -> bool {
        matches!(self.oracle_spec(), OracleSpec::SqrtLike(_))
    }

    fn search_limit(&self, f: &FunctionOracle) -> u64 {
        f.max_arg().unwrap_or(u64::MAX).min(1 << 40)
    }

    fn x_range(&self) -> Range {
        let d = self.config.profile.defaults();
        self.config.range.unwrap_or(if self.is_synthetic() {
            d.synthetic_x
        } else {
            d.prime_x
        })
    }

    /// Stamps the configuration into a finished report.
    fn seal(&self, mut report: VerificationReport) -> VerificationReport {
        report.config = Some(serde_json::to_value(&self.config).expect("config serializes"));
        if self.global.no_timing {
            report.strip_timing();
        }
        report
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.global.out {
            Some(path) => fs::write(path, format!("{text}\n")).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            }),
            None => {
                let mut out = std::io::stdout().lock();
                writeln!(out, "{text}").map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
            }
        }
    }
}

fn write_cache(t: &PrimeTable, path: &PathBuf) -> Result<()> {
    let file = fs::File::create(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    t.write_cache(&mut w)?;
    w.flush().map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })
}

/// Largest `n` whose pseudo-inverse resolves within the oracle's reach.
fn largest_resolvable(f: &FunctionOracle, search_limit: u64) -> Result<u64> {
    let mut inv = InverseTable::new(f);
    let mut n = f.eval(f.n_start())?;
    loop {
        match inv.get(n + 1, search_limit) {
            Ok(_) => n += 1,
            Err(primequo_core::Error::SearchExhausted { .. }) => return Ok(n),
            Err(e) => return Err(e.into()),
        }
    }
}

fn run_check(ctx: &Context, args: &VerifyArgs, id: CheckId) -> Result<VerificationReport> {
    let defaults = ctx.config.profile.defaults();
    let convention = ctx.config.convention.into();
    let report = match id {
        CheckId::MaxQuotient => verifier::verify_max_quotient(&*ctx.table()?, convention)?,
        CheckId::QuotientAlmostIncreasing => {
            let f = FunctionOracle::prime_quotient(ctx.table()?);
            verifier::verify_quotient_almost_increasing(
                &f,
                args.pair_bound.unwrap_or(defaults.pair_bound),
                args.tail_bound.unwrap_or(defaults.tail_bound),
            )?
        }
        CheckId::QuotientInverseGaps => {
            verifier::verify_quotient_inverse_gaps(&ctx.table()?, args.from, ctx.config.n_max)?
        }
        CheckId::Estimates => {
            let table = ctx.table()?;
            let range = ctx.config.range.unwrap_or(Range {
                start: 2,
                end: defaults.estimates_end.min(table.max_index(convention)),
            });
            check_estimates(&table, range.start, range.end, convention)?
        }
        CheckId::Class => check_class(ctx)?,
        CheckId::InverseGrowth => {
            let f = ctx.oracle()?;
            let params = ctx.params()?;
            let limit = ctx.search_limit(&f);
            let n_max = match ctx.config.n_max {
                Some(n) => n,
                None if ctx.is_synthetic() => 1000,
                None => largest_resolvable(&f, limit)?.saturating_sub(params.k),
            };
            verifier::verify_inverse_growth(&f, &params, n_max, limit)?
        }
        CheckId::ShortRangeDrift => {
            let f = ctx.oracle()?;
            let r = ctx.x_range();
            verifier::verify_short_range_drift(
                &f,
                &ctx.params()?,
                r.start,
                r.end,
                ctx.config.seed,
                args.sweep_cap,
                args.samples,
            )?
        }
        CheckId::FtildeIngredients => {
            let f = ctx.oracle()?;
            let params = ctx.params()?;
            let threshold = Threshold::resolve(&f, &params, ctx.search_limit(&f))?;
            let r = match (ctx.config.range, &threshold) {
                (Some(r), _) => r,
                (None, Threshold::Finite { value }) if ctx.is_synthetic() => Range {
                    start: value + 1,
                    end: defaults.synthetic_x.end,
                },
                (None, _) => ctx.x_range(),
            };
            verifier::verify_ftilde_ingredients(&f, &params, r.start, r.end, &threshold)?
        }
        CheckId::Ftilde | CheckId::Csquare | CheckId::Mult => relation_check(ctx, args, id)?,
        CheckId::All => unreachable!("expanded by the caller"),
    };
    Ok(ctx.seal(report))
}

fn check_class(ctx: &Context) -> Result<VerificationReport> {
    let f = ctx.oracle()?;
    let params = ctx.params()?;
    let limit = ctx.search_limit(&f);
    let range_end = match (ctx.config.range, f.max_arg()) {
        (Some(r), _) => r.end,
        (None, Some(m)) if !ctx.is_synthetic() => m,
        (None, _) => 1_000_000,
    };
    let n_max = match ctx.config.n_max {
        Some(n) => n,
        None if ctx.is_synthetic() => 10_000,
        None => largest_resolvable(&f, limit)?,
    };
    let mut report = primequo_core::class::class_check(&f, &params, range_end, n_max, limit)?;
    if let Some(r) = ctx.config.range.filter(|r| r.start != f.n_start()) {
        report.note(format!(
            "pairs are checked from the first argument {}; the range start {} is ignored",
            f.n_start(),
            r.start
        ));
    }
    Ok(report)
}

fn build_relation(
    name: RelationName,
    params: &ClassParams,
    threshold: Threshold,
) -> DefinedRelation {
    match name {
        RelationName::Ftilde => define_f_tilde(params, threshold),
        RelationName::Csquare => define_c_n_squared(params, threshold),
        RelationName::Mult => define_multiplication(params, threshold),
    }
}

fn relation_check(ctx: &Context, args: &VerifyArgs, id: CheckId) -> Result<VerificationReport> {
    let (name, default_count) = match id {
        CheckId::Ftilde => (RelationName::Ftilde, 500),
        CheckId::Csquare => (RelationName::Csquare, 200),
        _ => (RelationName::Mult, 50),
    };
    let f = ctx.oracle()?;
    let params = ctx.params()?;
    let limit = ctx.search_limit(&f);
    let threshold = Threshold::resolve(&f, &params, limit)?;
    let rel = build_relation(name, &params, threshold);
    let ev = Evaluator::new(&f).with_search_limit(limit);
    let inputs = match verifier::default_inputs(&rel, args.count.unwrap_or(default_count)) {
        Ok(inputs) => inputs,
        Err(primequo_core::Error::Domain(why)) => {
            let mut report = VerificationReport::new(rel.name.clone(), rel.note.clone(), f.id())
                .with_params(params);
            report.inconclusive(why);
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    let opts = RelationOptions {
        seed: ctx.config.seed,
        uniqueness: !args.no_uniqueness,
        jobs: ctx.config.jobs,
        ..RelationOptions::default()
    };
    Ok(verifier::verify_defined_relation(
        &rel, &ev, &inputs, &opts,
    )?)
}

fn outcome_code(outcome: Outcome) -> u8 {
    outcome.exit_code() as u8
}

fn run(cli: Cli) -> Result<u8> {
    let command = match &cli.command {
        Command::Sieve { .. } => "sieve".to_string(),
        Command::CheckClass => "check-class".to_string(),
        Command::Verify(v) => format!("verify {}", v.check.name()),
        Command::EmitFormula { relation, .. } => format!(
            "emit-formula {}",
            relation.to_possible_value().expect("named").get_name()
        ),
        Command::Eval { .. } => "eval".to_string(),
    };
    let ctx = Context::new(cli.global, &command);
    match cli.command {
        Command::Sieve { limit, cache } => {
            if limit < 2 {
                return Err(CliError::Usage(format!(
                    "--limit must be at least 2, got {limit}"
                )));
            }
            let table = PrimeTable::sieve(limit)?;
            if let Some(path) = &cache {
                write_cache(&table, path)?;
            }
            let summary = serde_json::json!({
                "limit": limit,
                "count": table.count(),
                "last": table.last(),
            });
            ctx.emit(&serde_json::to_string_pretty(&summary).expect("serializes"))?;
            Ok(0)
        }
        Command::CheckClass => {
            let report = ctx.seal(check_class(&ctx)?);
            ctx.emit(&report.to_json())?;
            Ok(outcome_code(report.result))
        }
        Command::Verify(args) => {
            if args.check == CheckId::All {
                let mut reports = Vec::new();
                let mut outcome = Outcome::Pass;
                for id in CheckId::value_variants()
                    .iter()
                    .filter(|c| **c != CheckId::All)
                {
                    let report = run_check(&ctx, &args, *id)?;
                    outcome = outcome.and(report.result);
                    reports.push(report);
                }
                ctx.emit(&serde_json::to_string_pretty(&reports).expect("reports serialize"))?;
                Ok(outcome_code(outcome))
            } else {
                let report = run_check(&ctx, &args, args.check)?;
                ctx.emit(&report.to_json())?;
                Ok(outcome_code(report.result))
            }
        }
        Command::EmitFormula { relation, envelope } => {
            let params = ctx
                .config
                .params
                .ok_or_else(|| CliError::Usage("emit-formula needs --params k,d,n0".into()))?;
            let threshold = match ctx.config.oracle {
                Some(_) => {
                    let f = ctx.oracle()?;
                    Threshold::resolve(&f, &params, ctx.search_limit(&f))?
                }
                None => Threshold::symbolic(&params),
            };
            let rel = build_relation(relation, &params, threshold);
            let text = if envelope {
                serde_json::to_string_pretty(&rel.envelope()).expect("envelope serializes")
            } else {
                rel.formula.to_string()
            };
            ctx.emit(&text)?;
            Ok(0)
        }
        Command::Eval {
            formula,
            assign,
            search_limit,
            budget,
        } => {
            let text = fs::read_to_string(&formula).map_err(|source| CliError::Io {
                path: formula.clone(),
                source,
            })?;
            let phi = parse_formula(&text)
                .map_err(|e| CliError::Usage(format!("{}:{e}", formula.display())))?;
            let f = ctx.oracle()?;
            let mut ev =
                Evaluator::new(&f).with_search_limit(search_limit.unwrap_or(ctx.search_limit(&f)));
            if let Some(b) = budget {
                ev = ev.with_candidate_budget(b);
            }
            let result = ev.evaluate(&phi, &assign)?;
            let mut lines = vec![result.is_some().to_string()];
            for (var, value) in result.iter().flatten() {
                lines.push(format!("{var}={value}"));
            }
            ctx.emit(&lines.join("\n"))?;
            Ok(if result.is_some() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match with_deep_stack(move || run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("primequo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
