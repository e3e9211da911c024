//! Acceptance checks shared by the core integration tests and the CLI
//! `acceptance` target. Each check returns `Err` with a readable reason.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use dcbound_core::abstractor::{
    abstract_program, parse_program, AbstractOptions, Abstraction, LinExpr,
};
use dcbound_core::engine::{analyze, AnalysisMode, AnalysisOptions, BoundEngine, Report};
use dcbound_core::expr::{self, evaluate, normalize, BoundExpr, Valuation};
use dcbound_core::local_bounds::{local_bound_map, DEFAULT_MAX_CYCLES};
use dcbound_core::oracle::{self, check_soundness, explore, VerdictKind, DEFAULT_STEP_CAP};
use dcbound_core::reset_graph::{is_sound, ResetGraph, ResetPath, DEFAULT_MAX_RESET_PATHS};
use dcbound_core::{parse_dcp, Atom, Dcp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn sample_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../samples")
        .join(name)
}

pub fn sample_text(name: &str) -> String {
    std::fs::read_to_string(sample_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn sample(name: &str) -> Dcp {
    parse_dcp(&sample_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn abstracted_example_3() -> Abstraction {
    let p = parse_program(&sample_text("example3.prog")).expect("example3.prog parses");
    abstract_program(&p, &AbstractOptions::default()).expect("example3.prog abstracts")
}

/// Every DCP the examples talk about, by display name.
pub fn example_dcps() -> Vec<(String, Dcp)> {
    let mut out: Vec<(String, Dcp)> = [
        "example_a.dcp",
        "example_b.dcp",
        "example_c.dcp",
        "example1.dcp",
        "example2.dcp",
        "example3.dcp",
    ]
    .iter()
    .map(|n| (n.to_string(), sample(n)))
    .collect();
    out.push((
        "example3.prog (abstracted)".into(),
        abstracted_example_3().dcp,
    ));
    out
}

pub fn report(dcp: &Dcp, mode: AnalysisMode) -> Report {
    analyze(dcp, &AnalysisOptions::with_mode(mode)).expect("analysis within caps")
}

/// Renames the constant `l` to `n` so Example 3 results can be compared
/// with the `n`-based expectations.
pub fn l_to_n(e: &BoundExpr) -> String {
    normalize(&e.rename(&|s: &str| {
        if s == "l" {
            "n".to_string()
        } else {
            s.to_string()
        }
    }))
    .to_string()
}

fn expect(label: &str, got: impl ToString, want: &str) -> Check {
    let got = got.to_string();
    if got == want {
        Ok(())
    } else {
        Err(format!("{label}: got `{got}`, want `{want}`"))
    }
}

fn tb(r: &Report, id: &str) -> String {
    r.tb_of(id).map_or("<missing>".into(), ToString::to_string)
}

fn vb(r: &Report, v: &str) -> String {
    r.vb_of(v).map_or("<missing>".into(), ToString::to_string)
}

fn all(checks: impl IntoIterator<Item = Check>) -> Check {
    let errs: Vec<String> = checks.into_iter().filter_map(Result::err).collect();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs.join("; "))
    }
}

fn grid(dcp: &Dcp, values: &[u64]) -> Vec<Valuation> {
    let ranges: Vec<(String, Vec<u64>)> = dcp
        .consts()
        .iter()
        .map(|k| (k.clone(), values.to_vec()))
        .collect();
    oracle::valuation_grid(&ranges)
}

// ---------------------------------------------------------------------------
// Criteria 1-6: golden values

pub fn criterion_1() -> Check {
    let d = sample("example_a.dcp");
    all(AnalysisMode::ALL.iter().flat_map(|&m| {
        let r = report(&d, m);
        [
            expect(&format!("A {m} TB(t1)"), tb(&r, "t1"), "n"),
            expect(&format!("A {m} TB(t2)"), tb(&r, "t2"), "n"),
            expect(&format!("A {m} complexity"), &r.complexity, "2*n"),
        ]
    }))
}

pub fn criterion_2() -> Check {
    let d = sample("example_b.dcp");
    let free = report(&d, AnalysisMode::Free);
    let ctx = report(&d, AnalysisMode::Ctx);
    let sound = check_soundness(&d, &ctx, &grid(&d, &[0, 1, 2, 3]), DEFAULT_STEP_CAP)
        .map_err(|e| e.to_string())
        .and_then(|v| match v.kind {
            VerdictKind::Pass => Ok(()),
            k => Err(format!("B ctx oracle verdict {k}")),
        });
    all([
        expect("B free TB(t1)", tb(&free, "t1"), "n"),
        expect("B free TB(t2)", tb(&free, "t2"), "n"),
        expect("B free TB(t3)", tb(&free, "t3"), "n*n"),
        expect("B free complexity", &free.complexity, "2*n + n*n"),
        expect("B free VB(k)", vb(&free, "k"), "n"),
        expect("B ctx TB(t3)", tb(&ctx, "t3"), "n + n*n"),
        sound,
    ])
}

pub fn criterion_3() -> Check {
    let d = sample("example_c.dcp");
    let free = report(&d, AnalysisMode::Free);
    let ctx = report(&d, AnalysisMode::Ctx);
    let opt = report(&d, AnalysisMode::Opt);
    all([
        expect("C free TB(t2)", tb(&free, "t2"), "n*n"),
        expect("C ctx TB(t2)", tb(&ctx, "t2"), "n"),
        expect("C ctx complexity", &ctx.complexity, "2*n"),
        expect("C opt complexity", &opt.complexity, "2*n"),
    ])
}

pub fn criterion_4() -> Check {
    let d = sample("example1.dcp");
    let ctx = report(&d, AnalysisMode::Ctx);
    let opt = report(&d, AnalysisMode::Opt);
    all([
        expect("Ex1 ctx TB(t3)", tb(&ctx, "t3"), "2*n"),
        expect("Ex1 opt TB(t3)", tb(&opt, "t3"), "n"),
        expect("Ex1 opt complexity", &opt.complexity, "2*n"),
    ])
}

pub fn criterion_5() -> Check {
    let d = sample("example2.dcp");
    let free = report(&d, AnalysisMode::Free);
    all([
        expect("Ex2 free TB(t3)", tb(&free, "t3"), "2*n + max(m1,m2)"),
        expect("Ex2 free VB(x)", vb(&free, "x"), "2*n + max(m1,m2)"),
        expect("Ex2 free complexity", &free.complexity, "3*n + max(m1,m2)"),
    ])
}

/// A transition as a comparable value: id, endpoints, guard and the set of
/// printed constraints.
type Shape = (String, String, String, BTreeSet<String>, BTreeSet<String>);

fn shapes(d: &Dcp) -> BTreeMap<String, Shape> {
    d.transitions()
        .iter()
        .map(|t| {
            (
                t.id.0.clone(),
                (
                    t.id.0.clone(),
                    t.source.clone(),
                    t.target.clone(),
                    t.guard.clone(),
                    t.updates.iter().map(ToString::to_string).collect(),
                ),
            )
        })
        .collect()
}

/// The abstraction of `example3.prog` renamed with the figure's names.
pub fn renamed_example_3() -> Result<Dcp, String> {
    let a = abstracted_example_3();
    let wanted: BTreeMap<&str, &str> = [
        ("(e-k)", "p"),
        ("(e-b)", "q"),
        ("(i-b)", "r"),
        ("(l-i)", "x"),
    ]
    .into();
    let mut names = BTreeMap::new();
    for (v, n) in &a.norms {
        let fig = wanted
            .get(n.name().as_str())
            .ok_or_else(|| format!("unexpected norm {n}"))?;
        names.insert(v.clone(), fig.to_string());
    }
    let text = a.dcp.to_string();
    let renamed = names
        .iter()
        .fold(text, |t, (from, to)| rename_word(&t, from, to));
    parse_dcp(&renamed).map_err(|e| e.to_string())
}

fn rename_word(text: &str, from: &str, to: &str) -> String {
    let mut out = String::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        out.push_str(if word == from { to } else { word });
        word.clear();
    };
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            word.push(ch);
        } else {
            flush(&mut word, &mut out);
            out.push(ch);
        }
    }
    flush(&mut word, &mut out);
    out
}

pub fn criterion_6() -> Check {
    let mut checks = Vec::new();
    let a = abstracted_example_3();
    let got = renamed_example_3()?;
    let want = sample("example3.dcp");
    let (gs, ws) = (shapes(&got), shapes(&want));
    if gs != ws {
        let diff: Vec<String> = ws
            .keys()
            .chain(gs.keys())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|k| gs.get(*k) != ws.get(*k))
            .map(|k| format!("{k}: got {:?}, want {:?}", gs.get(k), ws.get(k)))
            .collect();
        checks.push(Err(format!("abstraction differs: {}", diff.join(", "))));
    }

    let zeta = local_bound_map(&got, DEFAULT_MAX_CYCLES).map_err(|e| e.to_string())?;
    for (t, z) in got.transitions().iter().zip(&zeta) {
        let want = match t.id.0.as_str() {
            "t0" | "te" => "1",
            "t4" => "p",
            _ => "x",
        };
        checks.push(expect(&format!("zeta({})", t.id), z, want));
    }

    let engine = BoundEngine::new(&got, &AnalysisOptions::with_mode(AnalysisMode::Ctx))
        .map_err(|e| e.to_string())?;
    let paths: BTreeSet<String> = engine
        .optimal_paths("p")
        .unwrap_or_default()
        .iter()
        .map(|p| p.display(engine.working_dcp()).to_string())
        .collect();
    let want_paths: BTreeSet<String> = [
        "0 --t0--> r --t2a--> q --t3a--> p",
        "0 --t5--> r --t2a--> q --t3a--> p",
        "0 --t0--> q --t3a--> p",
        "0 --t5--> q --t3a--> p",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if paths != want_paths {
        checks.push(Err(format!("R(p) = {paths:?}")));
    }

    let ctx = report(&a.dcp, AnalysisMode::Ctx);
    let opt = report(&a.dcp, AnalysisMode::Opt);
    let t4 = |r: &Report| r.tb_of("t4").map_or("<missing>".into(), l_to_n);
    checks.push(expect("Ex3 ctx TB(t4)", t4(&ctx), "2*n"));
    checks.push(expect("Ex3 opt TB(t4)", t4(&opt), "n"));
    all(checks)
}

// ---------------------------------------------------------------------------
// Criteria 7-8: oracle

pub fn criterion_7() -> Check {
    let mut checks = Vec::new();
    for (name, d) in example_dcps() {
        let vals = grid(&d, &[0, 1, 2, 3, 4]);
        for mode in AnalysisMode::ALL {
            let r = report(&d, mode);
            match check_soundness(&d, &r, &vals, DEFAULT_STEP_CAP) {
                Ok(v) if v.kind == VerdictKind::Pass => {}
                Ok(v) => {
                    let cex: Vec<String> = v
                        .counterexamples()
                        .take(3)
                        .map(|(val, row)| {
                            format!(
                                "{val} {} observed {:?} bound {:?}",
                                row.subject, row.observed, row.bound
                            )
                        })
                        .collect();
                    checks.push(Err(format!("{name} {mode}: {} {}", v.kind, cex.join(", "))));
                }
                Err(e) => checks.push(Err(format!("{name} {mode}: {e}"))),
            }
        }
    }
    all(checks)
}

fn observed_and_bound(
    file: &str,
    mode: AnalysisMode,
    n: u64,
    t: &str,
) -> Result<(u64, String), String> {
    let d = sample(file);
    let r = report(&d, mode);
    let val = Valuation::new().with("n", n);
    let s = explore(&d, &val, DEFAULT_STEP_CAP).map_err(|e| e.to_string())?;
    if !s.exhausted {
        return Err(format!("{file} not exhausted"));
    }
    let bound = r
        .tb_of(t)
        .and_then(|e| evaluate(e, &val).ok().flatten())
        .map_or("undef".into(), |b| b.to_string());
    Ok((s.count_of(&d, t).unwrap_or(0), bound))
}

pub fn criterion_8() -> Check {
    let tight = |file: &str, mode, n, t: &str, want: u64| -> Check {
        let (obs, bound) = observed_and_bound(file, mode, n, t)?;
        if obs == want && bound == want.to_string() {
            Ok(())
        } else {
            Err(format!(
                "{file} {mode} n={n}: observed #({t}) = {obs}, bound {bound}, want both {want}"
            ))
        }
    };
    all([
        tight("example_a.dcp", AnalysisMode::Ctx, 3, "t2", 3),
        tight("example_b.dcp", AnalysisMode::Free, 2, "t3", 4),
        tight("example1.dcp", AnalysisMode::Opt, 3, "t3", 3),
    ])
}

// ---------------------------------------------------------------------------
// Criterion 9: property suites

const SYMS: [&str; 3] = ["n", "m", "k"];

pub fn random_expr(rng: &mut impl Rng, depth: u32) -> BoundExpr {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return match rng.gen_range(0..20) {
            0 => BoundExpr::Undefined,
            1..=8 => BoundExpr::int(rng.gen_range(-3..=5)),
            _ => BoundExpr::sym(SYMS[rng.gen_range(0..SYMS.len())]),
        };
    }
    let n = rng.gen_range(1..=3);
    let args: Vec<BoundExpr> = (0..n).map(|_| random_expr(rng, depth - 1)).collect();
    match rng.gen_range(0..4) {
        0 => BoundExpr::Sum(args),
        1 => BoundExpr::Product(args),
        2 => BoundExpr::Max(args),
        _ => BoundExpr::Min(args),
    }
}

/// Idempotence, semantic preservation and print/parse round trip of
/// `normalize` on `count` random expressions.
pub fn expr_properties(count: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let e = random_expr(&mut rng, 4);
        let n = normalize(&e);
        if normalize(&n) != n {
            return Err(format!(
                "not idempotent on `{e}`: `{n}` then `{}`",
                normalize(&n)
            ));
        }
        let reparsed =
            expr::parse(&n.to_string()).map_err(|err| format!("`{n}` does not parse: {err}"))?;
        if normalize(&reparsed) != n {
            return Err(format!(
                "round trip of `{n}` gave `{}`",
                normalize(&reparsed)
            ));
        }
        for _ in 0..5 {
            let val: Valuation = SYMS
                .iter()
                .map(|s| (s.to_string(), rng.gen_range(0..6)))
                .collect();
            let (a, b) = (evaluate(&e, &val), evaluate(&n, &val));
            if a != b {
                return Err(format!(
                    "`{e}` -> `{n}` changes the value at {val}: {a:?} vs {b:?}"
                ));
            }
        }
    }
    Ok(())
}

/// Soundness of every suffix, maximality, and coverage of every reset edge
/// for the optimal reset paths of every variable of every example.
pub fn reset_path_properties() -> Check {
    let mut checks = Vec::new();
    for (name, d) in example_dcps() {
        let full = ResetGraph::build(&d);
        let work = d.without_vars(full.removed());
        let g = ResetGraph::build(&work);
        for v in work.vars() {
            let paths = match g.optimal_reset_paths(&work, v, DEFAULT_MAX_RESET_PATHS) {
                Ok(p) => p,
                Err(e) => {
                    checks.push(Err(format!("{name}: {e}")));
                    continue;
                }
            };
            for p in &paths {
                checks.push(path_properties(&name, &work, &g, v, p));
            }
            let covered: BTreeSet<usize> =
                paths.iter().map(|p| p.steps().last().unwrap().0).collect();
            for (t, _, _) in work.resets(v).unwrap() {
                if !covered.contains(&t) {
                    checks.push(Err(format!(
                        "{name}: reset of {v} on {} not covered",
                        work.transition(t).id
                    )));
                }
            }
        }
    }
    all(checks)
}

fn path_properties(name: &str, d: &Dcp, g: &ResetGraph, v: &str, p: &ResetPath) -> Check {
    let shown = p.display(d).to_string();
    if p.target() != v {
        return Err(format!("{name}: {shown} does not end in {v}"));
    }
    for len in 1..=p.len() {
        if !is_sound(d, &p.suffix(len)) {
            return Err(format!("{name}: suffix {len} of {shown} is unsound"));
        }
    }
    if let Atom::Var(head) = p.input() {
        for e in g.edges().iter().filter(|e| e.dst == *head) {
            let mut atoms = vec![e.src.clone()];
            atoms.extend(p.atoms().iter().cloned());
            let mut steps = vec![(e.trans, e.offset)];
            steps.extend(p.steps().iter().copied());
            let longer = ResetPath::new(atoms, steps).expect("well-formed extension");
            if is_sound(d, &longer) {
                return Err(format!(
                    "{name}: {shown} extends soundly to {}",
                    longer.display(d)
                ));
            }
        }
    }
    Ok(())
}

/// Sampled invariance of every emitted constraint and guard of the
/// abstraction of each program sample.
pub fn abstraction_invariance(samples_per_transition: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for file in ["example3.prog", "countdown.prog"] {
        let p = parse_program(&sample_text(file)).map_err(|e| e.to_string())?;
        let a = abstract_program(&p, &AbstractOptions::default()).map_err(|e| e.to_string())?;
        let names: Vec<&String> = p.params.iter().chain(&p.vars).collect();
        let norm = |v: &str| {
            a.norm_of(v)
                .map(|n| n.expr().clone())
                .expect("abstract variable")
        };
        for ct in &p.transitions {
            let at = a
                .dcp
                .transition(a.dcp.index_of(ct.id.as_str()).expect("same ids"));
            let mut accepted = 0;
            for _ in 0..samples_per_transition * 200 {
                if accepted == samples_per_transition {
                    break;
                }
                let s1: BTreeMap<String, i64> = names
                    .iter()
                    .map(|n| ((*n).clone(), rng.gen_range(-8..=8)))
                    .collect();
                if !ct.guard_holds(&s1) {
                    continue;
                }
                accepted += 1;
                let s2 = ct
                    .step(&s1, |_| rng.gen_range(-8..=8))
                    .expect("small values");
                for c in &at.updates {
                    let lhs = norm(&c.lhs).eval(&s2);
                    let rhs = match &c.rhs {
                        Atom::Var(v) => norm(v).eval(&s1),
                        Atom::Const(k) => LinExpr::var(k.clone()).eval(&s1),
                        Atom::Int(i) => i128::from(*i),
                    } + i128::from(c.offset);
                    if lhs > rhs {
                        checks.push(Err(format!("{file} {}: {c} fails at {s1:?}", ct.id)));
                    }
                }
                for g in &at.guard {
                    if norm(g).eval(&s1) <= 0 {
                        checks.push(Err(format!("{file} {}: guard {g} fails at {s1:?}", ct.id)));
                    }
                }
            }
            if !ct.guard.is_empty() && accepted == 0 {
                checks.push(Err(format!("{file} {}: no guard-satisfying sample", ct.id)));
            }
        }
    }
    all(checks.into_iter().take(10))
}

/// Random sub-maximal runs never exceed the exhaustive maximal counts, and
/// no run that reaches the exit contradicts the local bound mapping.
pub fn submaximal_dominance(runs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for (name, d) in example_dcps() {
        let mut complete = 0usize;
        let zeta = local_bound_map(&d, DEFAULT_MAX_CYCLES).map_err(|e| e.to_string())?;
        for val in grid(&d, &[0, 1, 2, 3]) {
            let stats = explore(&d, &val, DEFAULT_STEP_CAP).map_err(|e| e.to_string())?;
            if !stats.exhausted {
                checks.push(Err(format!(
                    "{name} {val}: maximal exploration not exhausted"
                )));
                continue;
            }
            for i in 0..runs {
                let slack = if i == 0 { 0 } else { 4 };
                let trace = oracle::random_run(&d, &val, &mut rng, slack, 10_000)
                    .map_err(|e| e.to_string())?;
                if !trace.complete {
                    continue;
                }
                complete += 1;
                let counts = trace.counts(d.transitions().len());
                for (t, (&c, &max)) in counts.iter().zip(&stats.counts).enumerate() {
                    if c > max {
                        checks.push(Err(format!(
                            "{name} {val}: random run executes {} {c} times, maximal {max}",
                            d.transition(t).id
                        )));
                    }
                }
                for t in oracle::check_local_bounds(&d, &zeta, &trace) {
                    checks.push(Err(format!("{name} {val}: local bound of {t} violated")));
                }
            }
        }
        if complete == 0 {
            checks.push(Err(format!("{name}: no random run reached the exit")));
        }
    }
    all(checks.into_iter().take(10))
}

pub fn criterion_9() -> Check {
    all([
        expr_properties(1_000, 9),
        reset_path_properties(),
        abstraction_invariance(1_000, 9),
        submaximal_dominance(500, 9),
    ])
}

// ---------------------------------------------------------------------------
// Criterion 10: negative cases that need no binary

pub fn criterion_10_library() -> Check {
    let mut checks = Vec::new();
    let nondet = "dcp\nvars: x\nentry: a\nexit: z\ntrans t0: a -> z { x' <= 1; x' <= 2; }\n";
    match parse_dcp(nondet) {
        Ok(_) => checks.push(Err("non-deterministic DCP accepted".into())),
        Err(e) => checks.push(expect(
            "determinism diagnostic",
            &e.diagnostics[0],
            "5:29: transition `t0`: more than one constraint for `x` (not deterministic)",
        )),
    }
    let undefined = "dcp\nvars: x\nentry: a\nexit: z\ntrans t0: a -> b { }\ntrans t1: b -> z guard(x) { x' <= x; }\n";
    match parse_dcp(undefined) {
        Ok(_) => checks.push(Err("ill-defined DCP accepted".into())),
        Err(e) => {
            let want = "6:7: `x` is live at `b` (read via transition `t1`) but not defined on every incoming transition";
            if !e.diagnostics.iter().any(|d| d.to_string() == want) {
                checks.push(Err(format!("well-definedness diagnostics: {e}")));
            }
        }
    }
    let cyclic = sample("cyclic.dcp");
    for mode in AnalysisMode::ALL {
        let r = report(&cyclic, mode);
        checks.push(expect(
            &format!("cyclic {mode} complexity"),
            &r.complexity,
            "undef",
        ));
    }
    let a = sample("example_a.dcp");
    let bad =
        Report::parse("TB(t1) = n\nTB(t2) = 0\ncomplexity = n\n").map_err(|e| e.to_string())?;
    let v = check_soundness(&a, &bad, &[Valuation::new().with("n", 1)], DEFAULT_STEP_CAP)
        .map_err(|e| e.to_string())?;
    checks.push(expect("injected fault verdict", v.kind, "FAIL"));
    all(checks)
}

/// Runs `f`, turning a panic into a failed check.
pub fn guarded(f: impl FnOnce() -> Check + std::panic::UnwindSafe) -> Check {
    std::panic::catch_unwind(f).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

pub fn assert_check(c: Check) {
    if let Err(e) = c {
        panic!("{e}");
    }
}
