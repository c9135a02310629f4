//! `solgroup`: batch front end over the library.
//!
//! Every command reads JSON files, prints one JSON document on stdout and
//! exits 0 on success, 1 when a check fails, 2 on usage or parse errors and
//! 3 when a resource cap is hit. Errors go to stderr as JSON lines.

mod io;

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use solgroup::correlations::{
    check_perfect, correlation_from_strategy, is_nonsignalling, is_synchronous, validate, Correlation, Strategy,
};
use solgroup::coxeter::{parse_word, CoxeterContext};
use solgroup::dihedral::{build_cp, build_cp_prime, canonical_strategy, semidirect_witness, verify_fcp};
use solgroup::fnfamily::{FnContext, FnModel, TraceFunction};
use solgroup::kms::{command_relator, input_word, machine_presentation, to_named, GeneratorTable, StatedRelations};
use solgroup::minsky::{MinskyMachine, RunOutcome};
use solgroup::numerics::{approx_defect, delta, op_norm, perturb, random_pvm, round_to_pvm, OperatorFamily};
use solgroup::presentations::{normalize_rows_to_three, solution_group, BinaryLinearSystem, Presentation};
use solgroup::{CyclotomicNumber, Scalar};

use io::{read_json, write_json, CliResult, Failure, Outcome};

#[derive(Parser)]
#[command(name = "solgroup", version, about = "Solution groups, Minsky machines and constant-sized correlations")]
struct Cli {
    /// Value encoding for correlations and strategies.
    #[arg(long, global = true, value_enum, default_value_t = Format::Exact)]
    format: Format,
    /// Write the result here instead of stdout. For `fn enumerate`, the
    /// directory that receives one file pair per member.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Exact,
    Float,
}

#[derive(Subcommand)]
enum Command {
    /// Minsky machines.
    #[command(subcommand)]
    Minsky(MinskyCmd),
    /// Words of the machine group.
    #[command(subcommand)]
    Kms(KmsCmd),
    /// Binary linear systems and solution groups.
    #[command(subcommand)]
    Linsys(LinsysCmd),
    /// Coxeter rewriting.
    #[command(subcommand)]
    Coxeter(CoxeterCmd),
    /// The dihedral correlation family.
    #[command(subcommand)]
    Dihedral(DihedralCmd),
    /// Correlation checks.
    #[command(subcommand)]
    Corr(CorrCmd),
    /// Correlations from trace-like functions.
    #[command(subcommand)]
    Fn(FnCmd),
    /// Approximate representations and rounding.
    #[command(subcommand)]
    Num(NumCmd),
}

#[derive(Subcommand)]
enum MinskyCmd {
    /// Runs from (1; n, 0, …); exits 1 unless the machine accepts.
    Run {
        #[arg(long)]
        machine: PathBuf,
        #[arg(long)]
        input: u64,
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: u64,
    },
    /// Adds the extra glass that preserves the input.
    ExtendGlass {
        #[arg(long)]
        machine: PathBuf,
    },
    /// Adds the accept-state p-cycle.
    ExtendCycle {
        #[arg(long)]
        machine: PathBuf,
        #[arg(long)]
        p: usize,
    },
}

#[derive(Subcommand)]
enum KmsCmd {
    /// Relator of one command.
    Relator {
        #[arg(long)]
        machine: PathBuf,
        #[arg(long)]
        command: usize,
    },
    /// The input word w(n).
    InputWord {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        glasses: usize,
    },
    /// Presentation with the relations stated explicitly.
    Presentation {
        #[arg(long)]
        machine: PathBuf,
    },
}

#[derive(Subcommand)]
enum LinsysCmd {
    /// Rewrites every row to exactly three entries.
    Normalize {
        #[arg(long)]
        linsys: PathBuf,
    },
    /// Presentation of the homogeneous solution group.
    SolutionGroup {
        #[arg(long)]
        linsys: PathBuf,
    },
}

#[derive(Subcommand)]
enum CoxeterCmd {
    /// Normal form of a space-separated word.
    NormalForm {
        #[arg(long)]
        ctx: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        word: String,
        /// Overrides the context's node cap.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Whether two words are equal; exits 1 when they differ.
    Equal {
        #[arg(long)]
        ctx: PathBuf,
        #[arg(long)]
        w1: String,
        #[arg(long)]
        w2: String,
        #[arg(long)]
        cap: Option<usize>,
    },
}

#[derive(Subcommand)]
enum DihedralCmd {
    /// The seven-question correlation.
    BuildCp {
        #[arg(long)]
        p: usize,
    },
    /// The three-question restricted correlation.
    BuildCpPrime {
        #[arg(long)]
        p: usize,
    },
    /// The commuting-operator strategy on ℓ²D_p.
    CanonicalStrategy {
        #[arg(long)]
        p: usize,
    },
    /// Checks the order-p theorem on a witness strategy; exits 1 on failure.
    VerifyFcp {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum CorrCmd {
    /// Nonnegativity, normalization, nonsignalling and synchronicity.
    Validate {
        #[arg(long)]
        corr: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// The six perfect-correlation conditions against a linear system.
    CheckPerfect {
        #[arg(long)]
        corr: PathBuf,
        #[arg(long)]
        linsys: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Correlation induced by a strategy.
    FromStrategy {
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Args)]
struct FnCtxArgs {
    #[arg(long)]
    ctx: PathBuf,
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Subcommand)]
enum FnCmd {
    /// The support set W_n and its forced and free parts.
    Wn {
        #[command(flatten)]
        ctx: FnCtxArgs,
    },
    /// Streams members of F_n into a directory.
    Enumerate {
        #[command(flatten)]
        ctx: FnCtxArgs,
        #[arg(long, default_value_t = 16)]
        limit: usize,
        /// First candidate index (decimal).
        #[arg(long, default_value = "0")]
        start: String,
    },
    /// C_f and its perfect-correlation report; exits 1 unless f ∈ F_n.
    Eval {
        #[command(flatten)]
        ctx: FnCtxArgs,
        #[arg(long)]
        f: PathBuf,
    },
}

#[derive(Subcommand)]
enum NumCmd {
    /// Rounds a near-projective measurement.
    RoundPvm {
        #[arg(long)]
        family: PathBuf,
        /// Operator-norm bound; defaults to max(1, largest norm).
        #[arg(long)]
        c: Option<f64>,
    },
    /// Relator defects of a unitary assignment.
    Defect {
        #[arg(long)]
        presentation: PathBuf,
        #[arg(long)]
        assignment: PathBuf,
    },
    /// Seeded rounding trials against the Δ(c, n) bound; exits 1 if any exceeds it.
    Trials {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 16)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long)]
        seed: u64,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

/// Either value encoding.
#[derive(Deserialize)]
#[serde(untagged)]
enum AnyCorrelation {
    Exact(Correlation<CyclotomicNumber>),
    Float(Correlation<Complex64>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyStrategy {
    Exact(Strategy<CyclotomicNumber>),
    Float(Strategy<Complex64>),
}

fn tol_for(exact: bool, tol: Option<f64>) -> f64 {
    tol.unwrap_or(if exact { 0.0 } else { 1e-9 })
}

fn emit_corr<T: Scalar + Serialize>(kind: &str, c: &Correlation<T>, format: Format) -> CliResult<Outcome> {
    match format {
        Format::Exact => Outcome::ok(kind, c),
        Format::Float => Outcome::ok(kind, c.to_complex()),
    }
}

fn emit_strategy<T: Scalar + Serialize>(kind: &str, s: &Strategy<T>, format: Format) -> CliResult<Outcome> {
    match format {
        Format::Exact => Outcome::ok(kind, s),
        Format::Float => Outcome::ok(kind, s.to_complex()),
    }
}

fn load_fn_model(args: &FnCtxArgs) -> CliResult<FnModel> {
    let mut ctx: FnContext = read_json(&args.ctx)?;
    if let Some(cap) = args.cap {
        ctx = ctx.with_cap(cap);
    }
    Ok(FnModel::new(ctx)?)
}

fn load_coxeter(path: &PathBuf, cap: Option<usize>) -> CliResult<CoxeterContext> {
    let ctx: CoxeterContext = read_json(path)?;
    Ok(match cap {
        Some(c) => ctx.with_cap(c),
        None => ctx,
    })
}

fn run_minsky(cmd: MinskyCmd) -> CliResult<Outcome> {
    match cmd {
        MinskyCmd::Run { machine, input, max_steps } => {
            let m: MinskyMachine = read_json(&machine)?;
            m.validate()?;
            let (data, pass) = match m.run(input, max_steps)? {
                RunOutcome::Accepted(steps) => (json!({ "outcome": "accepted", "steps": steps }), true),
                RunOutcome::Stuck(c) => (json!({ "outcome": "stuck", "configuration": c }), false),
                RunOutcome::Timeout => (json!({ "outcome": "timeout", "max_steps": max_steps }), false),
            };
            Outcome::check("minsky-run", data, pass)
        }
        MinskyCmd::ExtendGlass { machine } => {
            let m: MinskyMachine = read_json(&machine)?;
            Outcome::ok("minsky-machine", m.add_glass_extension()?)
        }
        MinskyCmd::ExtendCycle { machine, p } => {
            let m: MinskyMachine = read_json(&machine)?;
            Outcome::ok("minsky-machine", m.p_cycle_extension(p)?)
        }
    }
}

fn run_kms(cmd: KmsCmd) -> CliResult<Outcome> {
    match cmd {
        KmsCmd::Relator { machine, command } => {
            let m: MinskyMachine = read_json(&machine)?;
            m.validate()?;
            let cmd = m
                .commands
                .get(command)
                .ok_or_else(|| Failure::usage(format!("machine has {} commands", m.commands.len())))?;
            Outcome::ok("kms-word", to_named(&command_relator(cmd)))
        }
        KmsCmd::InputWord { n, glasses } => Outcome::ok("kms-word", to_named(&input_word(n, glasses))),
        KmsCmd::Presentation { machine } => {
            let m: MinskyMachine = read_json(&machine)?;
            let pres = machine_presentation(&m, &StatedRelations, &mut GeneratorTable::new())?;
            Outcome::ok("presentation", pres)
        }
    }
}

fn run_linsys(cmd: LinsysCmd) -> CliResult<Outcome> {
    match cmd {
        LinsysCmd::Normalize { linsys } => {
            let a: BinaryLinearSystem = read_json(&linsys)?;
            let (sys, map) = normalize_rows_to_three(&a);
            Outcome::ok("linsys-normalized", json!({ "system": sys, "column_map": map }))
        }
        LinsysCmd::SolutionGroup { linsys } => {
            let a: BinaryLinearSystem = read_json(&linsys)?;
            Outcome::ok("presentation", solution_group(&a))
        }
    }
}

fn run_coxeter(cmd: CoxeterCmd) -> CliResult<Outcome> {
    match cmd {
        CoxeterCmd::NormalForm { ctx, word, cap } => {
            let cx = load_coxeter(&ctx, cap)?;
            let w = parse_word(&word)?;
            let nf = cx.normal_form(&w)?;
            Outcome::ok("coxeter-normal-form", json!({ "word": w, "normal_form": nf }))
        }
        CoxeterCmd::Equal { ctx, w1, w2, cap } => {
            let cx = load_coxeter(&ctx, cap)?;
            let eq = cx.equal(&parse_word(&w1)?, &parse_word(&w2)?)?;
            Outcome::check("coxeter-equal", json!({ "equal": eq }), eq)
        }
    }
}

fn run_dihedral(cmd: DihedralCmd, format: Format) -> CliResult<Outcome> {
    match cmd {
        DihedralCmd::BuildCp { p } => emit_corr("correlation", &build_cp(p)?, format),
        DihedralCmd::BuildCpPrime { p } => emit_corr("correlation", &build_cp_prime(p)?, format),
        DihedralCmd::CanonicalStrategy { p } => emit_strategy("strategy", &canonical_strategy(p)?, format),
        DihedralCmd::VerifyFcp { p, r, tol } => {
            let w = semidirect_witness(p, r)?;
            let report = verify_fcp(&w.strategy, &w.u_a, &w.u_b, p, r, tol)?;
            let pass = report.hypotheses_hold && report.conclusion_holds;
            Outcome::check("fcp-report", report, pass)
        }
    }
}

fn validity<T: Scalar>(c: &Correlation<T>, tol: f64) -> CliResult<Outcome> {
    let v = validate(c, tol);
    let ns = is_nonsignalling(c, tol);
    let sync = if c.scenario.is_symmetric() { Some(is_synchronous(c, tol)?) } else { None };
    let pass = v.ok && ns.ok;
    Outcome::check("correlation-checks", json!({ "validity": v, "nonsignalling": ns, "synchronous": sync, "tolerance": tol }), pass)
}

fn perfect<T: Scalar>(c: &Correlation<T>, a: &BinaryLinearSystem, tol: f64) -> CliResult<Outcome> {
    let r = check_perfect(c, a, tol)?;
    let pass = r.passes();
    Outcome::check("perfect-report", json!({ "passes": pass, "violations": r.violation_count(), "report": r }), pass)
}

fn run_corr(cmd: CorrCmd, format: Format) -> CliResult<Outcome> {
    match cmd {
        CorrCmd::Validate { corr, tol } => match read_json::<AnyCorrelation>(&corr)? {
            AnyCorrelation::Exact(c) => validity(&c, tol_for(true, tol)),
            AnyCorrelation::Float(c) => validity(&c, tol_for(false, tol)),
        },
        CorrCmd::CheckPerfect { corr, linsys, tol } => {
            let a: BinaryLinearSystem = read_json(&linsys)?;
            match read_json::<AnyCorrelation>(&corr)? {
                AnyCorrelation::Exact(c) => perfect(&c, &a, tol_for(true, tol)),
                AnyCorrelation::Float(c) => perfect(&c, &a, tol_for(false, tol)),
            }
        }
        CorrCmd::FromStrategy { strategy, tol } => match read_json::<AnyStrategy>(&strategy)? {
            AnyStrategy::Exact(s) => emit_corr("correlation", &correlation_from_strategy(&s, tol_for(true, tol))?, format),
            AnyStrategy::Float(s) => emit_corr("correlation", &correlation_from_strategy(&s, tol_for(false, tol))?, Format::Exact),
        },
    }
}

fn run_fn(cmd: FnCmd, format: Format, out: Option<&PathBuf>) -> CliResult<Outcome> {
    match cmd {
        FnCmd::Wn { ctx } => {
            let model = load_fn_model(&ctx)?;
            Outcome::ok("fn-wn", json!({ "wn": model.wn(), "constraints": model.constraints() }))
        }
        FnCmd::Enumerate { ctx, limit, start } => {
            let dir = out.ok_or_else(|| Failure::usage("fn enumerate needs --out <dir>"))?;
            let model = load_fn_model(&ctx)?;
            let start: BigUint = start.parse().map_err(|_| Failure::usage(format!("bad start index {start:?}")))?;
            fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
            let mut members = Vec::new();
            let mut last = None;
            for m in model.enumerate(&start).take(limit) {
                let c = model.correlation(&m.f)?;
                let f_path = dir.join(format!("f_{}.json", m.index));
                let c_path = dir.join(format!("corr_{}.json", m.index));
                write_json(&f_path, &io::envelope("trace-function", &m.f)?)?;
                let cdoc = match format {
                    Format::Exact => io::envelope("correlation", &c)?,
                    Format::Float => io::envelope("correlation", c.to_complex())?,
                };
                write_json(&c_path, &cdoc)?;
                members.push(json!({ "index": m.index.to_string(), "f": f_path, "correlation": c_path }));
                last = Some(m.index);
            }
            let next = last.map(|i| (i + 1u32).to_string());
            let free = model.constraints().free.len();
            Outcome::ok("fn-enumeration", json!({ "free_words": free, "members": members, "resume_from": next }))
        }
        FnCmd::Eval { ctx, f } => {
            let model = load_fn_model(&ctx)?;
            let f: TraceFunction = read_json(&f)?;
            let c = model.correlation(&f)?;
            let report = model.perfect_report(&f)?;
            let pass = report.passes();
            let corr = match format {
                Format::Exact => serde_json::to_value(&c),
                Format::Float => serde_json::to_value(c.to_complex()),
            }
            .expect("correlations serialize");
            Outcome::check("fn-eval", json!({ "in_fn": pass, "report": report, "correlation": corr }), pass)
        }
    }
}

#[derive(Serialize)]
struct TrialSummary {
    seed: u64,
    trials: usize,
    d: usize,
    n: usize,
    eps: f64,
    worst_ratio: f64,
    max_pvm_defect: f64,
    failures: Vec<usize>,
}

fn rounding_trial(seed: u64, t: usize, d: usize, n: usize, eps: f64) -> CliResult<(f64, f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    let pvm = random_pvm(d, n, &mut rng);
    let noisy: Vec<_> = pvm.iter().map(|p| perturb(p, eps, &mut rng)).collect();
    let c = noisy.iter().map(op_norm).fold(1.0, f64::max);
    let r = round_to_pvm(&noisy, c)?;
    let worst = r.distances.iter().copied().fold(0.0, f64::max);
    let ratio = worst / (delta(c, n) * r.input.epsilon());
    Ok((ratio, r.pvm_defect, worst <= r.bound && r.pvm_defect <= 1e-12))
}

fn run_num(cmd: NumCmd) -> CliResult<Outcome> {
    match cmd {
        NumCmd::RoundPvm { family, c } => {
            let fam: OperatorFamily = read_json(&family)?;
            let mats = fam.matrices();
            let c = c.unwrap_or_else(|| mats.iter().map(op_norm).fold(1.0, f64::max));
            let r = round_to_pvm(&mats, c)?;
            Outcome::ok("rounding-report", r)
        }
        NumCmd::Defect { presentation, assignment } => {
            let pres: Presentation = read_json(&presentation)?;
            let fam: OperatorFamily = read_json(&assignment)?;
            Outcome::ok("defect-report", approx_defect(&pres, &fam)?)
        }
        NumCmd::Trials { trials, d, n, eps, seed, jobs } => {
            if d == 0 || n == 0 || !(eps > 0.0) {
                return Err(Failure::usage("d, n and eps must be positive"));
            }
            let jobs = jobs.clamp(1, trials.max(1));
            let results: Vec<CliResult<(f64, f64, bool)>> = std::thread::scope(|scope| {
                let handles: Vec<_> = (0..jobs)
                    .map(|j| {
                        scope.spawn(move || {
                            (j..trials).step_by(jobs).map(|t| (t, rounding_trial(seed, t, d, n, eps))).collect::<Vec<_>>()
                        })
                    })
                    .collect();
                let mut all: Vec<_> = handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect();
                all.sort_by_key(|(t, _)| *t);
                all.into_iter().map(|(_, r)| r).collect()
            });
            let mut summary = TrialSummary { seed, trials, d, n, eps, worst_ratio: 0.0, max_pvm_defect: 0.0, failures: Vec::new() };
            for (t, r) in results.into_iter().enumerate() {
                let (ratio, defect, ok) = r?;
                summary.worst_ratio = summary.worst_ratio.max(ratio);
                summary.max_pvm_defect = summary.max_pvm_defect.max(defect);
                if !ok {
                    summary.failures.push(t);
                }
            }
            let pass = summary.failures.is_empty();
            Outcome::check("rounding-trials", summary, pass)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<Outcome> {
    let format = cli.format;
    let out = cli.out.as_ref();
    match cli.command {
        Command::Minsky(c) => run_minsky(c),
        Command::Kms(c) => run_kms(c),
        Command::Linsys(c) => run_linsys(c),
        Command::Coxeter(c) => run_coxeter(c),
        Command::Dihedral(c) => run_dihedral(c, format),
        Command::Corr(c) => run_corr(c, format),
        Command::Fn(c) => run_fn(c, format, out),
        Command::Num(c) => run_num(c),
    }
}

fn fail(f: &Failure) -> ExitCode {
    eprintln!("{}", f.to_json());
    ExitCode::from(f.exit as u8)
}

/// Prints a document; a closed pipe (`| head`) is not an error.
fn print_stdout(doc: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(doc).expect("values serialize");
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::usage(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&Failure::usage(e.to_string().trim().to_string())),
    };
    let enumerating = matches!(cli.command, Command::Fn(FnCmd::Enumerate { .. }));
    let out = cli.out.clone().filter(|_| !enumerating);
    match dispatch(cli) {
        Ok(o) => {
            let written = match &out {
                Some(path) => write_json(path, &o.doc),
                None => print_stdout(&o.doc),
            };
            match written {
                Ok(()) => ExitCode::from(o.exit as u8),
                Err(f) => fail(&f),
            }
        }
        Err(f) => fail(&f),
    }
}
