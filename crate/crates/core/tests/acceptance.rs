//! Acceptance criteria, one line each.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use spical::ast::{alpha_equal, Definitions, Expr, Name, Program, Type, Value};
use spical::eoi::{self, EmissionMap, ValueChoice};
use spical::equivalence::{
    congruence_probe, suspends, witness_from_path, CheckConfig, Checker, Clause, Context, ContextMode, Game,
    SuspensionKind, Verdict,
};
use spical::lts::{canonical, tau_steps, Action, Bounds, CanonMode, Explorer, Universe};
use spical::random::{vocabulary, Generator, Limits};
use spical::typecheck::{self, check_program, TypeEnv, TypedFile};

type Outcome = Result<String, String>;

fn examples() -> String {
    format!("{}/examples", env!("CARGO_MANIFEST_DIR"))
}

fn source(name: &str) -> String {
    std::fs::read_to_string(format!("{}/{name}.spi", examples())).expect("example exists")
}

fn compile(text: &str) -> TypedFile {
    typecheck::check(&spical::surface::parse(text).expect("parses")).expect("typechecks")
}

fn load(name: &str) -> TypedFile {
    compile(&source(name))
}

/// The declarations of an example followed by another `run` line.
fn with_run(name: &str, run: &str) -> Program {
    let text = source(name);
    let header: String = text
        .split("\nrun ")
        .next()
        .expect("has header")
        .to_string();
    compile(&format!("{header}\nrun {run}\n")).run
}

fn pair(l: &str, r: &str) -> (TypedFile, TypedFile, TypeEnv, Definitions) {
    let (a, b) = (load(l), load(r));
    let (env, defs) = a.merge_with(&b).expect("compatible files");
    (a, b, env, defs)
}

fn structural(p: &Program) -> Program {
    canonical(p, CanonMode::Structural)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// States gathered for the predicate checks.
#[derive(Default)]
struct Observed {
    states: usize,
    outputs: usize,
    equivalent_pairs: usize,
    violations: Vec<String>,
}

impl Observed {
    fn scan(&mut self, ex: &mut Explorer) {
        for id in 0..ex.len() {
            self.states += 1;
            let now = ex.is_suspended(id);
            let (Ok(weak), Ok(lab)) = (ex.weakly_suspends(id), ex.l_suspends(id)) else { continue };
            if (now && !weak) || (weak && !lab) {
                self.violations.push(format!("suspension chain fails at {}", ex.program(id)));
            }
            let scope = ex.free_names(id).clone();
            let Ok(edges) = ex.output_edges(id, &scope) else { continue };
            for (_, t) in edges.iter() {
                self.outputs += 1;
                if ex.l_suspends(*t).ok() != Some(lab) {
                    self.violations.push(format!("output changes L-suspension at {}", ex.program(id)));
                }
            }
        }
    }

    fn transfer(&mut self, verdict: &Verdict, ex: &mut Explorer) {
        if let Verdict::Equivalent { relation, .. } = verdict {
            for (l, r) in &relation.pairs {
                self.equivalent_pairs += 1;
                let (Ok(a), Ok(b)) = (ex.intern(l), ex.intern(r)) else { continue };
                if ex.l_suspends(a).ok() != ex.l_suspends(b).ok() {
                    self.violations.push(format!("L-suspension not transferred between {l} and {r}"));
                }
            }
        }
    }
}

fn run_checker(game: Game, p: &Program, q: &Program, defs: &Definitions, u: &Universe, cfg: CheckConfig, seen: &mut Observed) -> Verdict {
    let mut ch = Checker::new(defs.clone(), u.clone(), cfg, game);
    let v = ch.run(p, q).expect("well-formed programs");
    seen.scan(&mut ch.ex);
    if matches!(game, Game::Strong | Game::Labelled(SuspensionKind::Labelled)) {
        seen.transfer(&v, &mut ch.ex);
    }
    v
}

fn criterion_1() -> Outcome {
    let f = load("instant");
    let mut ex = Explorer::new(f.defs.clone(), Universe::new(f.env.clone()), Bounds::default());
    let root = ex.intern(&f.run).map_err(|e| e.to_string())?;
    let closure = ex.tau_closure(root).map_err(|e| e.to_string())?;
    let reached: BTreeSet<Program> = closure.iter().filter(|&&id| ex.is_suspended(id)).map(|&id| ex.program(id).clone()).collect();
    let mut expected = BTreeSet::new();
    for x in ["v1", "v2"] {
        for y in ["v1", "v2"] {
            let p2 = with_run(
                "instant",
                &format!("new s1, s2 in (s1!v1 | s1!v2 | when s2(z) do A({x}, {y}) else B(!s1))"),
            );
            expected.insert(structural(&p2));
        }
    }
    ensure(reached == expected, || format!("suspended states {reached:?}"))?;
    let next_expected: BTreeSet<Program> = ["new s1, s2 in B([v1; v2])", "new s1, s2 in B([v2; v1])"]
        .iter()
        .map(|r| structural(&with_run("instant", r)))
        .collect();
    for p2 in &reached {
        let next = eoi::next_instants(p2).map_err(|e| e.to_string())?;
        ensure(next == next_expected, || format!("next instants of {p2}: {next:?}"))?;
    }
    Ok(format!("{} suspended P2 variants, each with exactly 2 successors", reached.len()))
}

fn criterion_2() -> Outcome {
    let f = load("judgement");
    let e = eoi::emissions(&f.run).map_err(|e| e.to_string())?;
    let val = |c: &str| Value::con(c, vec![]);
    let mut expected = EmissionMap::new();
    expected.insert(Name::src("s1"), val("v1"));
    expected.insert(Name::src("s2"), val("v2"));
    expected.insert(Name::src("s2"), val("v3"));
    ensure(e == expected, || format!("emissions {e}"))?;
    let v: ValueChoice = [
        (Name::src("s1"), vec![val("v1")]),
        (Name::src("s2"), vec![val("v3"), val("v2")]),
    ]
    .into_iter()
    .collect();
    ensure(v.represents(&e), || "V does not represent E".into())?;
    let next = eoi::eoi_step(&f.run, &v).map_err(|e| e.to_string())?;
    let displayed = with_run("judgement", "(new s1 : sig(val) in (A([v3; v2]) | 0)) | (0 | 0)");
    ensure(alpha_equal(&next, &displayed), || format!("successor {next}"))?;
    ensure(eoi::derives(&f.run, &e, &v, &next), || "judgement not derivable".into())?;
    Ok(format!("E = {e}, successor {next}"))
}

fn criterion_3() -> Outcome {
    let defs = Definitions::new();
    let (s, s2) = (Name::src("s"), Name::src("s'"));
    let unit = |n: &Name| Program::Emit(n.clone(), Expr::unit());
    let p1 = unit(&s2);
    let p2 = Program::emit("other", Expr::unit());
    let sig = Program::match_sig(s.clone(), s2.clone(), p1.clone(), p2.clone());
    let got = tau_steps(&sig, &defs).map_err(|e| e.to_string())?;
    ensure(got == vec![p2.clone()], || format!("signal match gave {got:?}"))?;
    let ind = Program::match_val(
        Expr::list([Expr::Name(s.clone())]),
        Expr::list([Expr::Name(s2.clone())]),
        p1,
        p2,
    );
    let got = tau_steps(&ind, &defs).map_err(|e| e.to_string())?;
    ensure(got == vec![unit(&s)], || format!("pattern match gave {got:?}"))?;
    Ok("[s=s']P1,P2 -> P2 and [[s]|>[s']]P1,P2 -> [s/s']P1".into())
}

fn law_config() -> CheckConfig {
    CheckConfig {
        bounds: Bounds {
            mode: CanonMode::Alpha,
            ..Bounds::default()
        },
        ..CheckConfig::default()
    }
}

fn criterion_4(seen: &mut Observed) -> Outcome {
    let voc = vocabulary();
    let u = Universe::new(voc.env.clone()).with_depth(2);
    let mut g = Generator::new(voc.env.clone(), 4).with_limits(Limits {
        max_par: 2,
        max_new: 1,
        depth: 2,
    });
    let cfg = law_config();
    let mut slowest = Duration::ZERO;
    let mut checks = 0;
    for i in 0..200 {
        let p = g.program();
        let (p1, p2, p3) = (g.component(), g.component(), g.component());
        let globals: Vec<(Name, Type)> = voc.env.globals.iter().map(|(n, t)| (n.clone(), t.clone())).collect();
        let (x, tx) = globals[i % globals.len()].clone();
        let (y, ty) = globals[(i + 1) % globals.len()].clone();
        let hidden = globals
            .iter()
            .find(|(n, _)| !p2.has_free(n))
            .cloned()
            .unwrap_or((Name::src("z"), Type::sig(Type::Unit)));
        let laws = [
            ("unit", Program::par(p.clone(), Program::Nil), p.clone()),
            (
                "associativity",
                Program::par(Program::par(p1.clone(), p2.clone()), p3.clone()),
                Program::par(p1.clone(), Program::par(p2.clone(), p3.clone())),
            ),
            ("commutativity", Program::par(p1.clone(), p2.clone()), Program::par(p2.clone(), p1.clone())),
            (
                "restriction swap",
                Program::new_sig(x.clone(), tx.clone(), Program::new_sig(y.clone(), ty.clone(), p1.clone())),
                Program::new_sig(y, ty, Program::new_sig(x, tx, p1.clone())),
            ),
            (
                "scope extrusion",
                Program::new_sig(hidden.0.clone(), hidden.1.clone(), Program::par(p1.clone(), p2.clone())),
                Program::par(Program::new_sig(hidden.0, hidden.1, p1.clone()), p2.clone()),
            ),
        ];
        for (law, l, r) in laws {
            let start = Instant::now();
            let v = run_checker(Game::Strong, &l, &r, &voc.defs, &u, cfg, seen);
            let took = start.elapsed();
            slowest = slowest.max(took);
            checks += 1;
            ensure(v.is_equivalent(), || format!("{law} fails on {l} vs {r}: {v}"))?;
            ensure(took < Duration::from_secs(1), || format!("{law} took {took:?} on {l}"))?;
        }
    }
    Ok(format!("{checks} law instances over 200 programs, slowest {slowest:?}"))
}

fn criterion_5(seen: &mut Observed) -> Outcome {
    let cfg = CheckConfig::default();
    let mut notes = Vec::new();

    let (a, b, env, defs) = pair("choice_left", "choice_right");
    let u = Universe::new(env);
    let imm = run_checker(Game::Labelled(SuspensionKind::Immediate), &a.run, &b.run, &defs, &u, cfg, seen);
    let weak = run_checker(Game::Labelled(SuspensionKind::Weak), &a.run, &b.run, &defs, &u, cfg, seen);
    let bweak = run_checker(Game::Barbed(SuspensionKind::Weak), &a.run, &b.run, &defs, &u, cfg, seen);
    ensure(imm.is_equivalent(), || format!("(a) immediate: {imm}"))?;
    ensure(weak.is_inequivalent() && weak.clauses().contains(&Clause::L2), || format!("(a) weak: {weak}"))?;
    ensure(bweak.is_inequivalent() && bweak.clauses().contains(&Clause::B2), || format!("(a) barbed weak: {bweak}"))?;
    notes.push("(a) ok".to_string());

    let (a, b, env, defs) = pair("extrusion_left", "extrusion_right");
    let u = Universe::new(env.clone());
    let bounds = Bounds::default();
    for p in [&a.run, &b.run] {
        let lab = suspends(p, SuspensionKind::Labelled, &defs, &u, bounds).map_err(|e| e.to_string())?;
        let weak = suspends(p, SuspensionKind::Weak, &defs, &u, bounds).map_err(|e| e.to_string())?;
        ensure(lab && !weak, || format!("(b) suspension of {p}: labelled {lab}, weak {weak}"))?;
    }
    let weak = run_checker(Game::Labelled(SuspensionKind::Weak), &a.run, &b.run, &defs, &u, cfg, seen);
    let full = run_checker(Game::Labelled(SuspensionKind::Labelled), &a.run, &b.run, &defs, &u, cfg, seen);
    ensure(weak.is_equivalent(), || format!("(b) weak: {weak}"))?;
    ensure(full.is_inequivalent(), || format!("(b) labelled: {full}"))?;
    notes.push(format!("(b) ok, {} pairs", full.stats().pairs));

    let (c, d, env2, defs2) = pair("barbed_left", "barbed_right");
    let u2 = Universe::new(env2);
    let barbed = Game::Barbed(SuspensionKind::Labelled);
    let v = run_checker(barbed, &c.run, &d.run, &defs2, &u2, cfg, seen);
    ensure(v.is_equivalent(), || format!("(c) {v}"))?;
    let ctx = Context::par(Context::Hole, Program::emit("s", Expr::unit()));
    let probe = congruence_probe(barbed, &c.run, &d.run, &[ctx], &defs2, &u2, cfg, 2).map_err(|e| e.to_string())?;
    ensure(probe.alarms.len() == 1, || format!("(c) probe {:?}", probe.results))?;
    notes.push("(c) ok".to_string());

    let r = load("extrusion_observer");
    let env3 = env.merge(&r.env)?;
    let ctx = Context::par(Context::Hole, r.run.clone());
    let probe = congruence_probe(
        Game::Labelled(SuspensionKind::Weak),
        &a.run,
        &b.run,
        &[Context::Hole, ctx],
        &defs,
        &Universe::new(env3),
        cfg,
        2,
    )
    .map_err(|e| e.to_string())?;
    ensure(probe.equivalent == 1 && probe.alarms.len() == 1, || format!("(d) probe {:?}", probe.results))?;
    notes.push(format!("(d) ok, alarm on {}", probe.alarms[0].context));

    let (p, q, env4, defs4) = pair("reader", "nil");
    let game = Game::Labelled(SuspensionKind::Labelled);
    let u4 = Universe::new(env4.clone());
    let v = run_checker(game, &p.run, &q.run, &defs4, &u4, cfg, seen);
    ensure(v.is_equivalent(), || format!("reader vs nil: {v}"))?;
    let mut g = Generator::new(env4, 5);
    let mut contexts = vec![Context::Hole];
    contexts.extend((1..50).map(|_| g.context()));
    let probe = congruence_probe(game, &p.run, &q.run, &contexts, &defs4, &u4, cfg, 4).map_err(|e| e.to_string())?;
    ensure(probe.alarms.is_empty(), || format!("congruence alarms {:?}", probe.alarms))?;
    notes.push(format!("probe {} contexts, {} alarms", probe.checked, probe.alarms.len()));
    Ok(notes.join("; "))
}

fn criterion_6(seen: &mut Observed) -> Outcome {
    let (a, b, env, defs) = pair("deref_left", "deref_right");
    let u = Universe::new(env);
    let game = Game::Labelled(SuspensionKind::Labelled);
    let full = run_checker(game, &a.run, &b.run, &defs, &u, CheckConfig::default(), seen);
    let s2 = Program::emit("s2", Expr::unit());
    let Verdict::Inequivalent { play, .. } = &full else {
        return Err(format!("full contexts: {full}"));
    };
    ensure(play.iter().any(|r| r.clause == Clause::L4 && r.context.as_ref() == Some(&s2)), || format!("no L4 round under s2!: {full}"))?;
    let empty = CheckConfig {
        contexts: ContextMode::EmptyOnly,
        ..CheckConfig::default()
    };
    let v = run_checker(game, &a.run, &b.run, &defs, &u, empty, seen);
    ensure(v.is_equivalent(), || format!("empty context only: {v}"))?;
    Ok("Inequivalent via S = s2!, Equivalent with S = 0 only".into())
}

/// A component that diverges unless an input supplies the value its reader expects.
fn gate(list: bool, then: Program) -> Program {
    let x = Name::src("g");
    let looping = Program::call("Loop", vec![]);
    if list {
        let reader = Program::match_val(Expr::Name(x.clone()), Expr::nil(), then, looping);
        Program::par(
            Program::emit("d", Expr::list([Expr::unit()])),
            Program::present(Name::src("d"), x, reader, spical::ast::Cont::Nil),
        )
    } else {
        let reader = Program::match_sig(x.clone(), Name::src("b"), then, looping);
        Program::par(
            Program::emit("e", Expr::name("a")),
            Program::present(Name::src("e"), x, reader, spical::ast::Cont::Nil),
        )
    }
}

fn criterion_7(seen: &mut Observed) -> Outcome {
    let voc = vocabulary();
    let u = Universe::new(voc.env.clone());
    let bounds = Bounds {
        max_states: 2000,
        ..Bounds::default()
    };
    let mut g = Generator::new(voc.env.clone(), 7).with_limits(Limits {
        max_par: 2,
        max_new: 1,
        depth: 1,
    });
    let (mut passed, mut tried, mut visible) = (0, 0, 0);
    while passed < 100 {
        tried += 1;
        ensure(tried < 5000, || format!("only {passed} candidates found"))?;
        let p = match tried % 3 {
            0 => g.program(),
            _ => Program::par(g.component(), gate(tried % 2 == 0, g.component())),
        };
        let mut ex = Explorer::new(voc.defs.clone(), u.clone(), bounds);
        let Ok(root) = ex.intern(&p) else { continue };
        let Ok(Some(path)) = ex.l_suspension_path(root) else { continue };
        if path.len() > 4 {
            continue;
        }
        seen.scan(&mut ex);
        let actions: Vec<Action> = path.into_iter().map(|(a, _)| a).collect();
        if actions.iter().any(|a| *a != Action::Tau) {
            visible += 1;
        }
        let q = witness_from_path(&actions);
        let both = Program::par(p.clone(), q.clone());
        let ok = suspends(&both, SuspensionKind::Weak, &voc.defs, &u, bounds).map_err(|e| e.to_string())?;
        ensure(ok, || format!("witness {q} fails for {p}"))?;
        passed += 1;
    }
    Ok(format!("100/100 witnesses ({visible} with visible actions, {tried} programs sampled)"))
}

fn criterion_8(seen: &Observed) -> Outcome {
    ensure(seen.violations.is_empty(), || seen.violations[..seen.violations.len().min(3)].join("; "))?;
    Ok(format!(
        "{} states, {} output edges, {} equivalent pairs, 0 violations",
        seen.states, seen.outputs, seen.equivalent_pairs
    ))
}

fn spical(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spical"))
        .args(args)
        .current_dir(examples())
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok(out.stdout)
}

fn criterion_9() -> Outcome {
    let args = ["run", "instant.spi", "--seed", "42", "--json", "--max-instants", "3"];
    let first = spical(&args)?;
    let second = spical(&args)?;
    ensure(first == second, || "seeded traces differ".into())?;
    let args = ["run", "instant.spi", "--enumerate", "--json", "--max-instants", "2"];
    let first = spical(&args)?;
    ensure(first == spical(&args)?, || "enumerations differ".into())?;
    let e: serde_json::Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    let instants = e["instants"].as_array().ok_or("no instants")?;
    for (n, i) in instants.iter().enumerate() {
        for key in ["start", "suspended", "diverging", "next"] {
            let list: Vec<&str> = i[key].as_array().ok_or("missing list")?.iter().filter_map(|x| x.as_str()).collect();
            ensure(list.windows(2).all(|w| w[0] < w[1]), || format!("instant {n} {key} not sorted"))?;
        }
    }
    Ok(format!("{} identical trace bytes; enumeration sorted", first.len()))
}

fn criterion_10() -> Outcome {
    let voc = vocabulary();
    let u = Universe::new(voc.env.clone());
    let bounds = Bounds {
        max_states: 200,
        ..Bounds::default()
    };
    let mut g = Generator::new(voc.env.clone(), 10);
    let mut successors = 0;
    for _ in 0..1000 {
        let p = g.program();
        check_program(&p, &voc.env).map_err(|e| format!("generated {p}: {e}"))?;
        let mut ex = Explorer::new(voc.defs.clone(), u.clone(), bounds);
        let root = ex.intern(&p).map_err(|e| e.to_string())?;
        let mut queue = vec![root];
        let mut seen = BTreeSet::from([root]);
        while let Some(id) = queue.pop() {
            let mut next = Vec::new();
            match ex.transitions(id) {
                Ok(edges) => next.extend(edges.into_iter().map(|(_, t)| t)),
                Err(_) => break,
            }
            if ex.is_suspended(id) {
                let Ok(ps) = eoi::next_instants(ex.program(id)) else { continue };
                for q in ps {
                    match ex.intern(&q) {
                        Ok(t) => next.push(t),
                        Err(_) => break,
                    }
                }
            }
            for t in next {
                if seen.insert(t) {
                    successors += 1;
                    let q = ex.program(t);
                    check_program(q, &voc.env).map_err(|e| format!("successor {q} of {}: {e}", ex.program(id)))?;
                    queue.push(t);
                }
            }
        }
    }
    Ok(format!("1000 programs, {successors} successors re-typechecked"))
}

fn report(n: usize, r: Outcome, failed: &mut usize) {
    match r {
        Ok(detail) => println!("criterion {n:>2}: PASS  {detail}"),
        Err(detail) => {
            *failed += 1;
            println!("criterion {n:>2}: FAIL  {detail}");
        }
    }
}

fn main() {
    let only: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let want = |n: usize| only.is_none_or(|o| o == n);
    let mut seen = Observed::default();
    let mut failed = 0;
    if want(1) {
        report(1, criterion_1(), &mut failed);
    }
    if want(2) {
        report(2, criterion_2(), &mut failed);
    }
    if want(3) {
        report(3, criterion_3(), &mut failed);
    }
    if want(4) || want(8) {
        report(4, criterion_4(&mut seen), &mut failed);
    }
    if want(5) || want(8) {
        report(5, criterion_5(&mut seen), &mut failed);
    }
    if want(6) || want(8) {
        report(6, criterion_6(&mut seen), &mut failed);
    }
    if want(7) || want(8) {
        report(7, criterion_7(&mut seen), &mut failed);
    }
    if want(8) {
        report(8, criterion_8(&seen), &mut failed);
    }
    if want(9) {
        report(9, criterion_9(), &mut failed);
    }
    if want(10) {
        report(10, criterion_10(), &mut failed);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
