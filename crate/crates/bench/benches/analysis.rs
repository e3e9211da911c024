use std::fmt::Write as _;
use std::path::PathBuf;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dcbound_core::abstractor::{abstract_program, parse_program, AbstractOptions};
use dcbound_core::engine::{analyze, AnalysisMode, AnalysisOptions};
use dcbound_core::expr::Valuation;
use dcbound_core::oracle::{explore, DEFAULT_STEP_CAP};
use dcbound_core::{parse_dcp, Dcp};

fn sample(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../samples")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// `depth` nested loops where each inner counter is reset to the counter
/// of the loop around it, giving a bound of degree `depth`.
fn nested(depth: usize) -> Dcp {
    let vars: Vec<String> = (0..depth).map(|i| format!("x{i}")).collect();
    let keep = |upto: usize| -> String { (0..upto).map(|j| format!("x{j}' <= x{j}; ")).collect() };
    let mut s = format!(
        "dcp\nconsts: n\nvars: {}\nentry: lb\nexit: le\n",
        vars.join(", ")
    );
    writeln!(s, "trans t0: lb -> l0 {{ x0' <= n; }}").unwrap();
    for i in 0..depth {
        let (target, reset) = if i + 1 < depth {
            (format!("l{}", i + 1), format!("x{}' <= x{i}; ", i + 1))
        } else {
            (format!("l{i}"), String::new())
        };
        writeln!(
            s,
            "trans d{i}: l{i} -> {target} guard(x{i}) {{ {}x{i}' <= x{i} - 1; {reset}}}",
            keep(i)
        )
        .unwrap();
        if i > 0 {
            writeln!(s, "trans b{i}: l{i} -> l{} {{ {}}}", i - 1, keep(i)).unwrap();
        }
    }
    writeln!(s, "trans te: l0 -> le {{ }}").unwrap();
    parse_dcp(&s).unwrap_or_else(|e| panic!("generated DCP invalid: {e}\n{s}"))
}

fn bench_samples(c: &mut Criterion) {
    let mut g = c.benchmark_group("analyze");
    for name in [
        "example_a.dcp",
        "example_b.dcp",
        "example_c.dcp",
        "example1.dcp",
        "example2.dcp",
        "example3.dcp",
    ] {
        let dcp = parse_dcp(&sample(name)).unwrap();
        for mode in AnalysisMode::ALL {
            let opts = AnalysisOptions::with_mode(mode);
            g.bench_with_input(BenchmarkId::new(name, mode), &dcp, |b, d| {
                b.iter(|| analyze(black_box(d), &opts).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_nested(c: &mut Criterion) {
    let mut g = c.benchmark_group("nested");
    for depth in [2, 4, 6, 8] {
        let dcp = nested(depth);
        g.bench_with_input(BenchmarkId::from_parameter(depth), &dcp, |b, d| {
            b.iter(|| {
                analyze(black_box(d), &AnalysisOptions::with_mode(AnalysisMode::Opt)).unwrap()
            })
        });
    }
    g.finish();
}

fn bench_abstraction(c: &mut Criterion) {
    let program = parse_program(&sample("example3.prog")).unwrap();
    c.bench_function("abstract/example3.prog", |b| {
        b.iter(|| abstract_program(black_box(&program), &AbstractOptions::default()).unwrap())
    });
}

fn bench_oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("explore");
    let dcp = parse_dcp(&sample("example_b.dcp")).unwrap();
    for n in [2u64, 4, 6] {
        let val = Valuation::new().with("n", n);
        g.bench_with_input(BenchmarkId::new("example_b.dcp", n), &val, |b, v| {
            b.iter(|| explore(black_box(&dcp), v, DEFAULT_STEP_CAP).unwrap())
        });
    }
    g.finish();
}

criterion_group!(
    benches,
    bench_samples,
    bench_nested,
    bench_abstraction,
    bench_oracle
);
criterion_main!(benches);
