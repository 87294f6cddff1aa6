//! Seeded generators for guard expressions, systems, machines, and job
//! batches. Everything is valid by construction so tests exercise the
//! interesting paths instead of input rejection.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use snp::regmachine::parse_machine;
use snp::snpos::{JobSpec, Scope};
use snp::SpikeExpr;

/// Random guard expression with expanded cost roughly within `budget`.
pub fn random_expr(rng: &mut ChaCha8Rng, budget: u64) -> SpikeExpr {
    if budget <= 1 {
        return SpikeExpr::Atom;
    }
    match rng.random_range(0..10u32) {
        0..=2 => SpikeExpr::Atom,
        3 => SpikeExpr::star(random_expr(rng, budget - 1)),
        4 => SpikeExpr::plus(random_expr(rng, budget - 1)),
        5 | 6 => {
            let k = rng.random_range(0..=4u64);
            let inner_budget = (budget - 1).checked_div(k).unwrap_or(1);
            SpikeExpr::power(random_expr(rng, inner_budget.max(1)), k)
        }
        _ => {
            let left = random_expr(rng, (budget - 1) / 2);
            let right = random_expr(rng, (budget - 1) / 2);
            if rng.random_bool(0.5) {
                SpikeExpr::concat(left, right)
            } else {
                SpikeExpr::union(left, right)
            }
        }
    }
}

/// Random deterministic register machine source: a chain of ADD/SUB over up
/// to three registers, every label resolvable, exactly one HALT, starting
/// with an ADD.
pub fn random_machine_text(rng: &mut ChaCha8Rng, max_body: usize) -> String {
    let body = rng.random_range(1..=max_body.max(1));
    let labels: Vec<String> = (0..body)
        .map(|i| format!("l{i}"))
        .chain(["end".to_string()])
        .collect();
    let mut out = String::new();
    for i in 0..body {
        let reg = rng.random_range(1..=3u32);
        let target = |rng: &mut ChaCha8Rng| labels[rng.random_range(0..labels.len())].clone();
        if i == 0 || rng.random_bool(0.5) {
            writeln!(out, "l{i}: ADD {reg} {}", target(rng)).unwrap();
        } else {
            writeln!(out, "l{i}: SUB {reg} {} {}", target(rng), target(rng)).unwrap();
        }
    }
    out.push_str("end: HALT\n");
    out
}

/// Random system source text, valid by construction. Neurons either carry
/// singleton-guard rules with pairwise distinct exponents (so the classic
/// forgetting constraint can never trip) or firing-only rules with richer
/// guards.
pub fn random_system_text(rng: &mut ChaCha8Rng, ordinal: usize) -> String {
    let neuron_count = rng.random_range(1..=5usize);
    let mut out = String::new();
    writeln!(out, "system gen{ordinal}").unwrap();
    writeln!(
        out,
        "mode {}",
        if rng.random_bool(0.2) {
            "exhaustive"
        } else {
            "standard"
        }
    )
    .unwrap();

    for n in 0..neuron_count {
        writeln!(out, "neuron n{n} spikes {}", rng.random_range(0..=3u32)).unwrap();
        let singleton_style = rng.random_bool(0.7);
        let rule_count = rng.random_range(0..=3usize);
        if singleton_style {
            let mut exponents: Vec<u64> = (1..=8).collect();
            for _ in 0..rule_count {
                let pick = rng.random_range(0..exponents.len());
                let e = exponents.remove(pick);
                let produce = match rng.random_range(0..4u32) {
                    0 => "lambda".to_string(),
                    1 => "a^2".to_string(),
                    _ => "a".to_string(),
                };
                let delay = if rng.random_bool(0.25) {
                    format!(" ; {}", rng.random_range(1..=3u32))
                } else {
                    String::new()
                };
                writeln!(out, "  rule a^{e} -> {produce}{delay}").unwrap();
            }
        } else {
            for _ in 0..rule_count {
                let guard =
                    ["a+", "a(aa)*", "(aa)+", "a^2(a^3)*", "a|a^3"][rng.random_range(0..5usize)];
                let consume = rng.random_range(1..=2u32);
                writeln!(out, "  rule {guard} / a^{consume} -> a").unwrap();
            }
        }
    }
    for from in 0..neuron_count {
        for to in 0..neuron_count {
            if from != to && rng.random_bool(0.3) {
                writeln!(out, "syn n{from} n{to}").unwrap();
            }
        }
    }
    let input_count = rng.random_range(0..=neuron_count);
    if input_count > 0 {
        let names: Vec<String> = (0..input_count).map(|i| format!("n{i}")).collect();
        writeln!(out, "input {}", names.join(" ")).unwrap();
    }
    if rng.random_bool(0.8) {
        writeln!(out, "output n{}", rng.random_range(0..neuron_count)).unwrap();
    }
    out
}

/// Random job batch: up to `max_jobs` jobs over a cpu/mem pool, bodies from
/// [`random_machine_text`], zero-padded ids so lexicographic order matches
/// numeric order.
pub fn random_batch(
    rng: &mut ChaCha8Rng,
    max_jobs: usize,
) -> (BTreeMap<String, u64>, Vec<JobSpec>) {
    let pool: BTreeMap<String, u64> = [
        ("cpu".to_string(), rng.random_range(2..=8u64)),
        ("mem".to_string(), rng.random_range(2..=8u64)),
    ]
    .into_iter()
    .collect();
    let count = rng.random_range(1..=max_jobs.max(1));
    let jobs = (0..count)
        .map(|i| {
            let body = parse_machine(&random_machine_text(rng, 6)).expect("generated machine");
            let mut resources = BTreeMap::new();
            if rng.random_bool(0.7) {
                resources.insert("cpu".to_string(), rng.random_range(0..=3u64));
            }
            if rng.random_bool(0.4) {
                resources.insert("mem".to_string(), rng.random_range(0..=3u64));
            }
            let scope = if rng.random_bool(0.5) {
                Scope::Foreground
            } else {
                Scope::Background
            };
            JobSpec::new(
                format!("j{i:02}"),
                body,
                resources,
                scope,
                rng.random_range(0..=16u64),
            )
        })
        .collect();
    (pool, jobs)
}
