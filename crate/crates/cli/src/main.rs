use std::fmt::Write as _;
use std::io::Read as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fewclean::circuit::{Circuit, CleanSpec, RegisterLayout};
use fewclean::format::{emit_circuit_with_layout, parse_circuit, ParsedCircuit};
use fewclean::lowering::{lower_with_layout, AncillaPool, LoweringPlan, Strategy};
use fewclean::procedures::pipeline::{pipeline, PipelineSchedule, StageTrace, TwoSidedFront};
use fewclean::procedures::{self, ProcedureOutput};
use fewclean::simulator::{pacc_exact_auto_with, pacc_sampled_with, SimConfig};
use fewclean::structured::{self, RoundModel};
use fewclean::trest::{decide_trest, TrestInstance, TrestMode};
use num_rational::Ratio;
use serde_json::json;

mod verify;

#[derive(Parser)]
#[command(name = "fewclean", version, about = "Few-clean-qubit circuit toolkit")]
struct Cli {
    /// Seed for every sampled quantity.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Simulation budget: qubits in superposition, log2 of enumerated
    /// strings, and twice the density-matrix qubits.
    #[arg(long, global = true)]
    budget_qubits: Option<usize>,
    /// Overrides the per-case tolerances of `verify`.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower macro gates to H, T and CNOT.
    Lower {
        file: String,
        #[arg(long, value_enum, default_value_t = StrategyArg::Linear)]
        strategy: StrategyArg,
        /// Where borrowed ancillas come from: idle qubits (appending fresh
        /// ones if needed) or only the mixed qubits `clean..width`.
        #[arg(long, value_enum, default_value_t = PoolArg::Idle)]
        pool: PoolArg,
        /// Clean qubits, excluded from the `mixed` pool.
        #[arg(long, default_value_t = 0)]
        clean: usize,
    },
    /// Acceptance probability with the first `clean` qubits clean.
    Pacc {
        file: String,
        #[arg(long)]
        clean: usize,
        #[arg(long, conflicts_with = "samples")]
        exact: bool,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Build a procedure circuit from a source circuit.
    Build(BuildArgs),
    /// Structured (Markov-chain or closed-form) evaluation.
    Eval(EvalArgs),
    /// Decide a trace-estimation instance.
    Trest {
        file: String,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Oracle)]
        mode: ModeArg,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long)]
        json: bool,
    },
    /// Run a verification suite and print its JSON report.
    Verify {
        #[arg(long, value_parser = suite_names())]
        suite: String,
        /// Omit wall-clock fields so reports are byte-identical across runs.
        #[arg(long)]
        no_timestamp: bool,
    },
}

fn suite_names() -> clap::builder::PossibleValuesParser {
    let mut names: Vec<&'static str> = verify::SUITES.to_vec();
    names.push("all");
    clap::builder::PossibleValuesParser::new(names)
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Linear,
    Split,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Linear => Strategy::Linear,
            StrategyArg::Split => Strategy::Split,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolArg {
    Idle,
    Mixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Oracle,
    Dqc1Exact,
    Dqc1Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProcArg {
    Ocqs,
    Ramp,
    Stab1,
    Stab2,
    Orrep,
    Parthr,
    PipelineT1,
    PipelineT2,
    PipelineT3,
    PipelineT4,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long = "proc", value_enum)]
    procedure: ProcArg,
    file: String,
    /// Clean qubits of the source circuit.
    #[arg(long, default_value_t = 1)]
    clean: usize,
    /// Repetition parameter of single-procedure builds.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Threshold fraction `a/b` for `parthr`.
    #[arg(long, default_value = "1/2")]
    fraction: String,
    #[arg(long, default_value_t = 2)]
    ramp_n: usize,
    #[arg(long, default_value_t = 1)]
    stab_n: usize,
    #[arg(long, default_value_t = 1)]
    copies: usize,
    #[arg(long, default_value_t = 1)]
    amp_n: usize,
    #[arg(long, default_value_t = 1)]
    second_copies: usize,
    #[arg(long, default_value = "1/2")]
    second_fraction: String,
    #[arg(long, default_value_t = 1)]
    or_n: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalKind {
    Ramp,
    Stab1,
    Stab2,
    Ocqs,
    Orrep,
    Parthr,
    Even,
    Hoeffding,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(value_enum)]
    kind: EvalKind,
    /// Source circuit; `ramp`, `stab1`, `stab2` and `parthr` accept `--p`
    /// instead.
    file: Option<String>,
    /// Keep (acceptance) probability of one round.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 1)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    clean: usize,
    /// Threshold count for `parthr`.
    #[arg(long)]
    t: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
}

/// A failure reported on stderr with exit status 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure(e.to_string())
    }
}

fn read_input(path: &str) -> Result<String, Failure> {
    if path == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| Failure(format!("{path}: {e}")))
    }
}

fn read_circuit(path: &str) -> Result<ParsedCircuit, Failure> {
    parse_circuit(&read_input(path)?).map_err(|e| Failure(format!("{path}: {e}")))
}

fn parse_fraction(s: &str) -> Result<(u64, u64), Failure> {
    let bad = || Failure(format!("malformed fraction `{s}`, expected a/b"));
    let (a, b) = s.split_once('/').ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

fn sim_config(budget: Option<usize>) -> SimConfig {
    match budget {
        Some(n) => SimConfig {
            max_active_qubits: n,
            max_enumeration_log2: n,
            max_density_qubits: n / 2,
        },
        None => SimConfig::default(),
    }
}

fn lower_cmd(file: &str, strategy: StrategyArg, pool: PoolArg, clean: usize) -> Result<String, Failure> {
    let parsed = read_circuit(file)?;
    let c = &parsed.circuit;
    if clean > c.width() {
        return Err(Failure(format!("--clean {clean} exceeds width {}", c.width())));
    }
    let pool = match pool {
        PoolArg::Idle => AncillaPool::Idle { allow_extension: true },
        PoolArg::Mixed => AncillaPool::Registers((clean..c.width()).collect()),
    };
    let lowered = lower_with_layout(
        c,
        &LoweringPlan {
            pool,
            strategy: strategy.into(),
        },
    )?;
    let layout = if lowered.borrowed.is_empty() {
        parsed.layout
    } else {
        let mut l = parsed.layout.unwrap_or_else(|| {
            let mut l = RegisterLayout::new();
            l.alloc("main", c.width());
            l
        });
        l.insert("borrowed", lowered.borrowed.start, lowered.borrowed.len());
        Some(l)
    };
    Ok(emit_circuit_with_layout(&lowered.circuit, layout.as_ref()))
}

fn pacc_cmd(
    file: &str,
    clean: usize,
    samples: Option<u64>,
    json: bool,
    seed: u64,
    cfg: &SimConfig,
) -> Result<String, Failure> {
    let c = read_circuit(file)?.circuit;
    let spec = CleanSpec::new(clean, c.width())?;
    let report = match samples {
        Some(s) => pacc_sampled_with(&c, spec, s, seed, cfg)?,
        None => pacc_exact_auto_with(&c, spec, cfg)?,
    };
    if json {
        return Ok(format!("{}\n", serde_json::to_string_pretty(&report)?));
    }
    Ok(match samples {
        Some(_) => format!("{:.12} +/- {:.12}\n", report.value, report.half_width_95),
        None => format!("{:.12}\n", report.value),
    })
}

fn trace_json(trace: &[StageTrace]) -> serde_json::Value {
    serde_json::to_value(trace).unwrap_or_default()
}

fn build_cmd(args: &BuildArgs) -> Result<String, Failure> {
    let q = read_circuit(&args.file)?.circuit;
    let k = args.clean;
    let n = args.n;
    let front = || -> Result<TwoSidedFront, Failure> {
        Ok(TwoSidedFront {
            copies: args.copies,
            fraction: parse_fraction(&args.fraction)?,
            amplification_n: args.amp_n,
            second_copies: args.second_copies,
            second_fraction: parse_fraction(&args.second_fraction)?,
            or_n: args.or_n,
        })
    };
    let single = |out: Result<ProcedureOutput, procedures::ProcedureError>| -> Result<_, Failure> {
        Ok((out?, Vec::new(), None))
    };
    let (out, trace, source_pacc): (ProcedureOutput, Vec<StageTrace>, Option<f64>) = match args.procedure {
        ProcArg::Ocqs => single(procedures::one_clean_simulation(&q, k))?,
        ProcArg::Ramp => single(procedures::randomness_amplification(&q, n))?,
        ProcArg::Stab1 => single(procedures::one_clean_stability(&q, n))?,
        ProcArg::Stab2 => single(procedures::two_clean_stability(&q, n))?,
        ProcArg::Orrep => single(procedures::or_repetition(&q, k, n))?,
        ProcArg::Parthr => {
            let (a, b) = parse_fraction(&args.fraction)?;
            single(procedures::parallel_threshold(&q, k, n, Ratio::new(a, b)))?
        }
        ProcArg::PipelineT1 | ProcArg::PipelineT2 | ProcArg::PipelineT3 | ProcArg::PipelineT4 => {
            let (r, s) = (args.ramp_n, args.stab_n);
            let schedule = match args.procedure {
                ProcArg::PipelineT1 => PipelineSchedule::one_sided_two_clean(r, s),
                ProcArg::PipelineT2 => PipelineSchedule::one_sided_one_clean(r, s),
                ProcArg::PipelineT3 => PipelineSchedule::two_sided_two_clean(front()?, r, s),
                _ => PipelineSchedule::two_sided_one_clean(front()?, r, s),
            };
            let p = pipeline(&q, k, &schedule)?;
            (p.output, p.trace, p.source_pacc)
        }
    };
    let text = emit_circuit_with_layout(&out.circuit, Some(&out.layout));
    if args.json {
        let v = json!({
            "width": out.circuit.width(),
            "clean": out.clean.k(),
            "gates": out.circuit.len(),
            "source_pacc": source_pacc,
            "trace": trace_json(&trace),
            "circuit": text,
        });
        return Ok(format!("{}\n", serde_json::to_string_pretty(&v)?));
    }
    let mut s = String::new();
    let _ = writeln!(s, "# clean {}", out.clean.k());
    if let Some(p) = source_pacc {
        let _ = writeln!(s, "# source p_acc {p:.12}");
    }
    for t in &trace {
        let _ = write!(
            s,
            "# stage {} ({}) width {} clean {} window [{:.6}, {:.6}]",
            t.name, t.parameters, t.width, t.clean, t.window.lo, t.window.hi
        );
        if let Some(e) = t.exact {
            let _ = write!(s, " value {e:.12}");
        }
        if !t.preconditions_met {
            let _ = write!(s, " (bound preconditions not met)");
        }
        s.push('\n');
    }
    s.push_str(&text);
    Ok(s)
}

fn eval_cmd(args: &EvalArgs, cfg: &SimConfig) -> Result<String, Failure> {
    let need_file = || -> Result<Circuit, Failure> {
        let f = args
            .file
            .as_deref()
            .ok_or_else(|| Failure("this evaluation needs a circuit file".into()))?;
        Ok(read_circuit(f)?.circuit)
    };
    // Keep probability and round model from `--p` or from a source circuit.
    let source = || -> Result<(f64, RoundModel), Failure> {
        match (args.p, &args.file) {
            (Some(p), None) => Ok((p, RoundModel::from_keep_probability(p)?)),
            (None, Some(_)) => {
                let q = need_file()?;
                let model = RoundModel::from_circuit(&q)?;
                Ok((model.keep_probability(), model))
            }
            _ => Err(Failure("give exactly one of a circuit file and --p".into())),
        }
    };
    let n = args.n;
    let v = match args.kind {
        EvalKind::Ramp => {
            let (p, model) = source()?;
            json!({ "kind": "ramp", "p": p, "n": n, "value": structured::ramp_chain(model, n),
                    "closed_form": structured::ramp_closed_form(p, n) })
        }
        EvalKind::Stab1 | EvalKind::Stab2 => {
            let (p, model) = source()?;
            let (name, value, b) = if matches!(args.kind, EvalKind::Stab1) {
                (
                    "stab1",
                    structured::stab1_chain(model, n)?,
                    structured::stab1_bounds(p, n),
                )
            } else {
                (
                    "stab2",
                    structured::stab2_chain(model, n)?,
                    structured::stab2_bounds(p, n),
                )
            };
            json!({ "kind": name, "p": p, "n": n, "value": value, "lower": b.lower, "upper": b.upper,
                    "upper_applicable": b.upper_applicable })
        }
        EvalKind::Ocqs => {
            let q = need_file()?;
            let k = args.clean;
            let p = pacc_exact_auto_with(&q, CleanSpec::new(k, q.width())?, cfg)?.value;
            let (lo, hi) = structured::one_clean_simulation_bounds(p, k);
            json!({ "kind": "ocqs", "k": k, "p": p, "value": structured::one_clean_simulation_value(&q, k)?,
                    "lower": lo, "upper": hi })
        }
        EvalKind::Orrep => {
            let q = need_file()?;
            let e = structured::or_repetition(&q, args.clean, n)?;
            json!({ "kind": "orrep", "k": args.clean, "n": n, "value": e.exact, "lower": e.lower, "upper": e.upper,
                    "unbounded_counter": e.unbounded_counter })
        }
        EvalKind::Parthr => {
            let (p, _) = source()?;
            let t = args.t.ok_or_else(|| Failure("parthr needs --t".into()))?;
            json!({ "kind": "parthr", "p": p, "n": n, "t": t, "value": structured::parallel_threshold_value(p, n, t) })
        }
        EvalKind::Even => {
            let p = args.p.ok_or_else(|| Failure("even needs --p".into()))?;
            json!({ "kind": "even", "p": p, "n": n, "value": structured::binomial_even_probability(n, p) })
        }
        EvalKind::Hoeffding => {
            let d = args.delta.ok_or_else(|| Failure("hoeffding needs --delta".into()))?;
            json!({ "kind": "hoeffding", "n": n, "delta": d, "value": structured::hoeffding_bound(n, d) })
        }
    };
    Ok(format!("{}\n", serde_json::to_string_pretty(&v)?))
}

#[allow(clippy::too_many_arguments)]
fn trest_cmd(
    file: &str,
    a: f64,
    b: f64,
    mode: ModeArg,
    samples: u64,
    seed: u64,
    json: bool,
) -> Result<String, Failure> {
    let u = read_circuit(file)?.circuit;
    let inst = TrestInstance::new(u, a, b)?;
    let mode = match mode {
        ModeArg::Oracle => TrestMode::Oracle,
        ModeArg::Dqc1Exact => TrestMode::Dqc1Exact,
        ModeArg::Dqc1Sampled => TrestMode::Dqc1Sampled { samples, seed },
    };
    let d = decide_trest(&inst, mode)?;
    if json {
        let v = json!({ "a": a, "b": b, "mode": mode, "decision": d });
        return Ok(format!("{}\n", serde_json::to_string_pretty(&v)?));
    }
    Ok(format!(
        "{}\n",
        serde_json::to_value(d.verdict)?.as_str().unwrap_or_default()
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = sim_config(cli.budget_qubits);
    let result = match &cli.command {
        Command::Lower {
            file,
            strategy,
            pool,
            clean,
        } => lower_cmd(file, *strategy, *pool, *clean),
        Command::Pacc {
            file,
            clean,
            exact: _,
            samples,
            json,
        } => pacc_cmd(file, *clean, *samples, *json, cli.seed, &cfg),
        Command::Build(args) => build_cmd(args),
        Command::Eval(args) => eval_cmd(args, &cfg),
        Command::Trest {
            file,
            a,
            b,
            mode,
            samples,
            json,
        } => trest_cmd(file, *a, *b, *mode, *samples, cli.seed, *json),
        Command::Verify { suite, no_timestamp } => {
            let opts = verify::Options {
                seed: cli.seed,
                tolerance: cli.tolerance,
                timings: !no_timestamp,
                config: cfg,
            };
            let Some(report) = verify::run(suite, opts) else {
                eprintln!("error: unknown suite `{suite}`");
                return ExitCode::from(2);
            };
            match serde_json::to_string_pretty(&report) {
                Ok(s) => println!("{s}"),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            return if report.overall {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
