use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use spical::eoi;
use spical::equivalence::{self, CheckConfig, Context, ContextMode, Game, SuspensionKind, Verdict};
use spical::interpreter::{self, Policy, RunConfig, RunResult};
use spical::lts::{Bounds, ExploreError, Explorer, Universe};
use spical::random::Generator;
use spical::typecheck::{self, TypeEnv, TypedFile};

const OK: u8 = 0;
const NEGATIVE: u8 = 1;
const BOUND: u8 = 2;
const USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "spical", version, about = "Tools for the synchronous pi-calculus")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Opts {
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for every randomized choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximal constructor depth of input values.
    #[arg(long, global = true, default_value_t = 2)]
    universe_depth: usize,
    /// Fresh signal names offered per input.
    #[arg(long, global = true, default_value_t = 1)]
    fresh_quota: usize,
    #[arg(long, global = true, default_value_t = 20_000)]
    state_bound: usize,
    #[arg(long, global = true, value_enum, default_value_t = Susp::Labelled)]
    susp: Susp,
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Emission contexts tried at the end of the instant.
    #[arg(long, global = true, value_enum, default_value_t = Contexts::Full)]
    contexts: Contexts,
}

#[derive(Clone, Copy, ValueEnum)]
enum Susp {
    Immediate,
    Weak,
    Labelled,
}

impl From<Susp> for SuspensionKind {
    fn from(s: Susp) -> Self {
        match s {
            Susp::Immediate => SuspensionKind::Immediate,
            Susp::Weak => SuspensionKind::Weak,
            Susp::Labelled => SuspensionKind::Labelled,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Contexts {
    Full,
    Empty,
}

#[derive(Clone, Copy, ValueEnum)]
enum GameArg {
    Strong,
    Labelled,
    Barbed,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a file and print it back.
    Parse { file: PathBuf },
    /// Infer and print the types of a file.
    CheckTypes { file: PathBuf },
    /// Execute a program over several instants.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_instants: usize,
        #[arg(long, default_value_t = 10_000)]
        tau_budget: usize,
        /// Emissions to inject, one line per instant.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Follow every choice instead of one.
        #[arg(long)]
        enumerate: bool,
    },
    /// Dump the reachable labelled transition graph.
    LtsDump { file: PathBuf },
    /// Programs reachable at the start of the next instant.
    NextInstants { file: PathBuf },
    /// Decide the suspension predicate selected by --susp.
    Suspends { file: PathBuf },
    /// Compare two programs.
    Check {
        #[arg(value_enum)]
        game: GameArg,
        left: PathBuf,
        right: PathBuf,
    },
    /// Compare two programs inside sampled static contexts.
    ProbeCongruence {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, value_enum, default_value_t = GameArg::Labelled)]
        game: GameArg,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn load(path: &Path) -> Result<TypedFile, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(USAGE, format!("{}: {e}", path.display())))?;
    let file = spical::surface::parse(&text).map_err(|e| fail(USAGE, format!("{}:{e}", path.display())))?;
    typecheck::check(&file).map_err(|e| fail(USAGE, format!("{}: {e}", path.display())))
}

fn load_pair(left: &Path, right: &Path) -> Result<(TypedFile, TypedFile, TypeEnv, spical::ast::Definitions), Failure> {
    let (a, b) = (load(left)?, load(right)?);
    let (env, defs) = a.merge_with(&b).map_err(|e| fail(USAGE, e))?;
    Ok((a, b, env, defs))
}

impl Opts {
    fn universe(&self, env: TypeEnv) -> Universe {
        Universe::new(env).with_depth(self.universe_depth).with_fresh_quota(self.fresh_quota)
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            max_states: self.state_bound,
            ..Bounds::default()
        }
    }

    fn check_config(&self) -> CheckConfig {
        CheckConfig {
            bounds: self.bounds(),
            contexts: match self.contexts {
                Contexts::Full => ContextMode::Full,
                Contexts::Empty => ContextMode::EmptyOnly,
            },
            ..CheckConfig::default()
        }
    }

    fn game(&self, g: GameArg) -> Game {
        match g {
            GameArg::Strong => Game::Strong,
            GameArg::Labelled => Game::Labelled(self.susp.into()),
            GameArg::Barbed => Game::Barbed(self.susp.into()),
        }
    }

    fn emit(&self, value: serde_json::Value, human: impl FnOnce() -> String) {
        let text = if self.json {
            format!("{}\n", serde_json::to_string_pretty(&value).expect("json"))
        } else {
            human()
        };
        let _ = std::io::stdout().lock().write_all(text.as_bytes());
    }
}

fn explore_failure(e: ExploreError) -> Failure {
    match e {
        ExploreError::Lts(e) => fail(USAGE, e.to_string()),
        other => fail(BOUND, other.to_string()),
    }
}

fn verdict_code(v: &Verdict) -> u8 {
    match v {
        Verdict::Equivalent { .. } => OK,
        Verdict::Inequivalent { .. } => NEGATIVE,
        Verdict::BoundExceeded { .. } => BOUND,
    }
}

fn dispatch(opts: &Opts, command: Command) -> Result<u8, Failure> {
    match command {
        Command::Parse { file } => {
            let text = std::fs::read_to_string(&file).map_err(|e| fail(USAGE, format!("{}: {e}", file.display())))?;
            let parsed = spical::surface::parse(&text).map_err(|e| fail(USAGE, format!("{}:{e}", file.display())))?;
            let printed = parsed.to_string();
            opts.emit(json!({ "file": file.display().to_string(), "program": printed }), || format!("{printed}\n"));
            Ok(OK)
        }
        Command::CheckTypes { file } => {
            let text = std::fs::read_to_string(&file).map_err(|e| fail(USAGE, format!("{}: {e}", file.display())))?;
            let parsed = spical::surface::parse(&text).map_err(|e| fail(USAGE, format!("{}:{e}", file.display())))?;
            let typed = match typecheck::check(&parsed) {
                Ok(t) => t,
                Err(e) => {
                    opts.emit(json!({ "well_typed": false, "error": e.to_string() }), || format!("ill-typed: {e}\n"));
                    return Ok(NEGATIVE);
                }
            };
            let signals: serde_json::Map<String, serde_json::Value> = typed
                .env
                .globals
                .iter()
                .map(|(n, t)| (n.to_string(), json!(t.to_string())))
                .collect();
            let defs: serde_json::Map<String, serde_json::Value> = typed
                .env
                .defs
                .iter()
                .map(|(d, ts)| (d.to_string(), json!(ts.iter().map(|t| t.to_string()).collect::<Vec<_>>())))
                .collect();
            opts.emit(json!({ "well_typed": true, "signals": signals, "definitions": defs }), || {
                let mut out = String::new();
                for (n, t) in &typed.env.globals {
                    out += &format!("signal {n} : {t}\n");
                }
                for (d, ts) in &typed.env.defs {
                    let ts: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
                    out += &format!("def {d}({})\n", ts.join(", "));
                }
                out
            });
            Ok(OK)
        }
        Command::Run {
            file,
            max_instants,
            tau_budget,
            script,
            enumerate,
        } => {
            let typed = load(&file)?;
            let script = match script {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| fail(USAGE, format!("{}: {e}", path.display())))?;
                    interpreter::parse_script(&text, &typed.env).map_err(|e| fail(USAGE, format!("{}: {e}", path.display())))?
                }
                None => Vec::new(),
            };
            let policy = match (enumerate, opts.seed) {
                (true, _) => Policy::Enumerate,
                (false, Some(seed)) => Policy::Random(seed),
                (false, None) => Policy::First,
            };
            let cfg = RunConfig {
                max_instants,
                tau_budget,
                policy,
                script,
            };
            if tau_budget == 0 {
                return Err(fail(USAGE, "--tau-budget must be positive"));
            }
            let result = interpreter::run(&typed.run, &typed.defs, &cfg).map_err(|e| fail(BOUND, e.to_string()))?;
            opts.emit(serde_json::to_value(&result).expect("json"), || human_run(&result));
            Ok(OK)
        }
        Command::LtsDump { file } => {
            let typed = load(&file)?;
            let mut ex = Explorer::new(typed.defs, opts.universe(typed.env), opts.bounds());
            let root = ex.intern(&typed.run).map_err(explore_failure)?;
            let dump = ex.dump(root).map_err(explore_failure)?;
            opts.emit(serde_json::to_value(&dump).expect("json"), || {
                let mut out = String::new();
                for n in &dump.nodes {
                    let mark = if n.suspended { " (suspended)" } else { "" };
                    out += &format!("{}: {}{mark}\n", n.id, n.program);
                }
                for e in &dump.edges {
                    let label = match (&e.action.signal, &e.action.value) {
                        (Some(s), Some(v)) => format!("{} {s} {v}", e.action.kind),
                        _ => e.action.kind.to_string(),
                    };
                    out += &format!("{} --{label}--> {}\n", e.from, e.to);
                }
                out
            });
            Ok(OK)
        }
        Command::NextInstants { file } => {
            let typed = load(&file)?;
            let mut ex = Explorer::new(typed.defs, opts.universe(typed.env), opts.bounds());
            let root = ex.intern(&typed.run).map_err(explore_failure)?;
            let closure = ex.tau_closure(root).map_err(explore_failure)?;
            let mut report = Vec::new();
            for &id in closure.iter().filter(|&&id| ex.is_suspended(id)) {
                let p = ex.program(id).clone();
                let next = eoi::next_instants(&p).map_err(|e| fail(BOUND, e.to_string()))?;
                report.push((p, next));
            }
            let value = json!(report
                .iter()
                .map(|(p, next)| json!({
                    "suspended": p.to_string(),
                    "next": next.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
                }))
                .collect::<Vec<_>>());
            opts.emit(value, || {
                let mut out = String::new();
                for (p, next) in &report {
                    out += &format!("{p}\n");
                    for q in next {
                        out += &format!("  => {q}\n");
                    }
                }
                out
            });
            Ok(if report.is_empty() { NEGATIVE } else { OK })
        }
        Command::Suspends { file } => {
            let typed = load(&file)?;
            let kind: SuspensionKind = opts.susp.into();
            let u = opts.universe(typed.env);
            let holds = equivalence::suspends(&typed.run, kind, &typed.defs, &u, opts.bounds()).map_err(explore_failure)?;
            opts.emit(json!({ "kind": kind, "suspends": holds }), || format!("{kind}: {holds}\n"));
            Ok(if holds { OK } else { NEGATIVE })
        }
        Command::Check { game, left, right } => {
            let (a, b, env, defs) = load_pair(&left, &right)?;
            let game = opts.game(game);
            let u = opts.universe(env);
            let verdict = equivalence::check(game, &a.run, &b.run, &defs, &u, opts.check_config()).map_err(|e| fail(USAGE, e.to_string()))?;
            opts.emit(verdict.to_json(), || verdict.to_string());
            Ok(verdict_code(&verdict))
        }
        Command::ProbeCongruence {
            left,
            right,
            game,
            samples,
        } => {
            let (a, b, env, defs) = load_pair(&left, &right)?;
            let game = opts.game(game);
            let mut generator = Generator::new(env.clone(), opts.seed.unwrap_or(0));
            let mut contexts = vec![Context::Hole];
            contexts.extend((1..samples).map(|_| generator.context()));
            let u = opts.universe(env);
            let report = equivalence::congruence_probe(game, &a.run, &b.run, &contexts, &defs, &u, opts.check_config(), opts.jobs)
                .map_err(|e| fail(USAGE, e.to_string()))?;
            opts.emit(serde_json::to_value(&report).expect("json"), || {
                let mut out = format!(
                    "{} contexts: {} equivalent, {} alarm(s), {} bound exceeded\n",
                    report.checked,
                    report.equivalent,
                    report.alarms.len(),
                    report.bound_exceeded
                );
                for a in &report.alarms {
                    out += &format!("  alarm: {} ({})\n", a.context, a.clause.as_deref().unwrap_or("?"));
                }
                out
            });
            Ok(if !report.alarms.is_empty() {
                NEGATIVE
            } else if report.bound_exceeded > 0 {
                BOUND
            } else {
                OK
            })
        }
    }
}

fn human_run(result: &RunResult) -> String {
    let mut out = String::new();
    match result {
        RunResult::Trace(t) => {
            for i in &t.instants {
                out += &format!("instant {}\n", i.index);
                for e in &i.injected {
                    out += &format!("  inject {e}\n");
                }
                if let Some(s) = &i.suspended {
                    out += &format!("  suspended after {} step(s): {s}\n", i.steps.len());
                }
                if let (Some(v), Some(n)) = (&i.choice, &i.next) {
                    out += &format!("  with {v} next {n}\n");
                }
            }
            out += &format!("{:?}: {}\n", t.outcome, t.final_state);
        }
        RunResult::Enumeration(e) => {
            for i in &e.instants {
                out += &format!("instant {}\n", i.index);
                for s in &i.suspended {
                    out += &format!("  suspended {s}\n");
                }
                for s in &i.diverging {
                    out += &format!("  diverging {s}\n");
                }
                for n in &i.next {
                    out += &format!("  next {n}\n");
                }
            }
            out += &format!("{:?}\n", e.outcome);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli.opts, cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
