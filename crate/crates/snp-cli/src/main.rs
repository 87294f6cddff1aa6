//! Command-line front end: validate, run, trace, and explore systems from
//! `.snp` files, exercise the built-in devices, export DOT, and drive the
//! scheduling demo.
//!
//! Exit codes are a contract: 0 success, 1 usage/parse/validation errors,
//! 2 runtime errors, 3 exploration bound exceeded.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;

use snp::chooser::Chooser;
use snp::devices::{
    add_numbers, adder_device, and_gate, equality_device, eval_gate, not_gate, numbers_equal,
    or_gate, sort_numbers, sorter_device, DeviceHandle,
};
use snp::engine::{explore, render_trace, run, EngineError, Mode, SpikeTrain, System};
use snp::lang::{export_dot, parse_system};
use snp::snpos::{default_pool, parse_jobs_file, run_os, Environment, OsConfig};

const USAGE: &str = "\
usage: snp <command> [args]

commands:
  check <file>                              parse and validate a system
  run <file> [--inN <train>]... [--steps N] [--seed S] [--trace]
             [--mode standard|exhaustive]   run a system and print its output
  explore <file> [--inN <train>]... [--steps N] [--bound N]
                                            enumerate reachable output trains
  dot <file>                                print the topology as DOT
  device <name> <args>... [--emit <path>]   run a built-in device
         names: add eq and or not sort
  os <jobsfile> [--ticks N] [--quantum Q]   run the scheduling demo

input trains are 0/1 strings (LSB first) or comma-separated spike counts.
";

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_BOUND: u8 = 3;

struct Failure {
    code: u8,
    message: String,
}

fn usage_err(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn runtime_err(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        print!("{USAGE}");
        return if args.is_empty() {
            ExitCode::from(EXIT_USAGE)
        } else {
            ExitCode::SUCCESS
        };
    }
    let result = match args[0].as_str() {
        "check" => cmd_check(&args[1..]),
        "run" => cmd_run(&args[1..]),
        "explore" => cmd_explore(&args[1..]),
        "dot" => cmd_dot(&args[1..]),
        "device" => cmd_device(&args[1..]),
        "os" => cmd_os(&args[1..]),
        other => Err(usage_err(format!("unknown command '{other}'"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_system(path: &str) -> Result<System, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage_err(format!("cannot read {path}: {e}")))?;
    parse_system(&text)
        .map(|s| s.system)
        .map_err(|e| usage_err(format!("{path}: {e}")))
}

fn parse_train(text: &str) -> Result<SpikeTrain, Failure> {
    if text.contains(',') {
        let counts = text
            .split(',')
            .map(|t| t.trim().parse::<u64>())
            .collect::<Result<Vec<u64>, _>>()
            .map_err(|_| usage_err(format!("invalid spike count in train '{text}'")))?;
        return Ok(SpikeTrain::from(counts));
    }
    let bits = text
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(usage_err(format!(
                "invalid character '{other}' in train '{text}' \
                 (use 0/1 or comma-separated counts)"
            ))),
        })
        .collect::<Result<Vec<u64>, Failure>>()?;
    Ok(SpikeTrain::from(bits))
}

// Flags shared by run and explore: --inN trains plus numeric options.
struct RunArgs {
    file: String,
    trains: Vec<(usize, SpikeTrain)>,
    steps: u64,
    seed: Option<u64>,
    trace: bool,
    mode: Option<Mode>,
    bound: usize,
}

fn parse_run_args(args: &[String], default_steps: u64) -> Result<RunArgs, Failure> {
    let mut parsed = RunArgs {
        file: String::new(),
        trains: Vec::new(),
        steps: default_steps,
        seed: None,
        trace: false,
        mode: None,
        bound: 10_000,
    };
    let mut it = args.iter();
    let mut positional = Vec::new();
    while let Some(arg) = it.next() {
        if let Some(rest) = arg.strip_prefix("--in") {
            if let Ok(slot) = rest.parse::<usize>() {
                if slot == 0 {
                    return Err(usage_err("input trains are numbered from --in1"));
                }
                let value = it
                    .next()
                    .ok_or_else(|| usage_err(format!("{arg} needs a train argument")))?;
                parsed.trains.push((slot - 1, parse_train(value)?));
                continue;
            }
        }
        match arg.as_str() {
            "--steps" => {
                let value = it
                    .next()
                    .ok_or_else(|| usage_err("--steps needs a number"))?;
                parsed.steps = value
                    .parse()
                    .map_err(|_| usage_err(format!("invalid step count '{value}'")))?;
            }
            "--seed" => {
                let value = it
                    .next()
                    .ok_or_else(|| usage_err("--seed needs a number"))?;
                parsed.seed = Some(
                    value
                        .parse()
                        .map_err(|_| usage_err(format!("invalid seed '{value}'")))?,
                );
            }
            "--bound" => {
                let value = it
                    .next()
                    .ok_or_else(|| usage_err("--bound needs a number"))?;
                parsed.bound = value
                    .parse()
                    .map_err(|_| usage_err(format!("invalid bound '{value}'")))?;
            }
            "--trace" => parsed.trace = true,
            "--mode" => {
                let value = it.next().ok_or_else(|| usage_err("--mode needs a value"))?;
                parsed.mode = Some(match value.as_str() {
                    "standard" => Mode::Standard,
                    "exhaustive" => Mode::Exhaustive,
                    other => return Err(usage_err(format!("unknown mode '{other}'"))),
                });
            }
            other if other.starts_with("--") => {
                return Err(usage_err(format!("unknown flag '{other}'")));
            }
            _ => positional.push(arg.clone()),
        }
    }
    match positional.as_slice() {
        [file] => parsed.file = file.clone(),
        [] => return Err(usage_err("missing system file")),
        _ => return Err(usage_err("expected exactly one system file")),
    }
    Ok(parsed)
}

fn assemble_trains(
    sys: &System,
    given: &[(usize, SpikeTrain)],
) -> Result<Vec<SpikeTrain>, Failure> {
    let mut trains = vec![SpikeTrain::new(); sys.inputs.len()];
    for (slot, train) in given {
        if *slot >= trains.len() {
            return Err(usage_err(format!(
                "--in{} given but the system has {} input neuron(s)",
                slot + 1,
                trains.len()
            )));
        }
        trains[*slot] = train.clone();
    }
    Ok(trains)
}

fn engine_failure(err: EngineError) -> Failure {
    let code = match err {
        EngineError::StateBoundExceeded { .. } => EXIT_BOUND,
        _ => EXIT_RUNTIME,
    };
    Failure {
        code,
        message: err.to_string(),
    }
}

fn cmd_check(args: &[String]) -> Result<(), Failure> {
    let [file] = args else {
        return Err(usage_err("usage: snp check <file>"));
    };
    let sys = load_system(file)?;
    for warning in &sys.warnings {
        println!("warning: {warning}");
    }
    println!(
        "ok: {}: {} neurons, {} synapses, mode {}, {}",
        sys.name,
        sys.neurons.len(),
        sys.synapses.len(),
        sys.mode,
        sys.kind
    );
    Ok(())
}

fn cmd_run(args: &[String]) -> Result<(), Failure> {
    let parsed = parse_run_args(args, 64)?;
    let mut sys = load_system(&parsed.file)?;
    if let Some(mode) = parsed.mode {
        sys.mode = mode;
    }
    let trains = assemble_trains(&sys, &parsed.trains)?;
    let mut chooser = match parsed.seed {
        Some(seed) => Chooser::seeded(seed),
        None => Chooser::first_declared(),
    };
    let result = run(&sys, &trains, parsed.steps, &mut chooser).map_err(engine_failure)?;
    println!("output: {}", result.output_train);
    println!("quiescent: {}", result.quiescent);
    println!("peak_spikes: {}", result.peak_spikes);
    if parsed.trace {
        print!("{}", render_trace(&sys, &result.trace));
    }
    Ok(())
}

fn cmd_explore(args: &[String]) -> Result<(), Failure> {
    let parsed = parse_run_args(args, 32)?;
    let mut sys = load_system(&parsed.file)?;
    if let Some(mode) = parsed.mode {
        sys.mode = mode;
    }
    let trains = assemble_trains(&sys, &parsed.trains)?;
    let results = explore(&sys, &trains, parsed.steps, parsed.bound).map_err(engine_failure)?;
    for train in &results {
        println!("{train}");
    }
    Ok(())
}

fn cmd_dot(args: &[String]) -> Result<(), Failure> {
    let [file] = args else {
        return Err(usage_err("usage: snp dot <file>"));
    };
    let sys = load_system(file)?;
    print!("{}", export_dot(&sys));
    Ok(())
}

fn parse_bool(text: &str) -> Result<bool, Failure> {
    match text {
        "0" | "false" => Ok(false),
        "1" | "true" => Ok(true),
        other => Err(usage_err(format!(
            "expected a boolean (0/1), found '{other}'"
        ))),
    }
}

fn parse_number(text: &str) -> Result<u64, Failure> {
    text.parse()
        .map_err(|_| usage_err(format!("expected a number, found '{text}'")))
}

fn cmd_device(args: &[String]) -> Result<(), Failure> {
    let mut positional = Vec::new();
    let mut emit: Option<String> = None;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--emit" => {
                let path = it.next().ok_or_else(|| usage_err("--emit needs a path"))?;
                emit = Some(path.clone());
            }
            other if other.starts_with("--") => {
                return Err(usage_err(format!("unknown flag '{other}'")));
            }
            _ => positional.push(arg.as_str()),
        }
    }
    let (&name, rest) = positional
        .split_first()
        .ok_or_else(|| usage_err("usage: snp device <add|eq|and|or|not|sort> <args>..."))?;

    let emit_device = |device: &DeviceHandle| -> Result<(), Failure> {
        if let Some(path) = &emit {
            std::fs::write(path, device.emit_source())
                .map_err(|e| usage_err(format!("cannot write {path}: {e}")))?;
        }
        Ok(())
    };

    match name {
        "add" => {
            let [a, b] = rest else {
                return Err(usage_err("usage: snp device add <a> <b>"));
            };
            emit_device(&adder_device())?;
            println!("{}", add_numbers(parse_number(a)?, parse_number(b)?));
        }
        "eq" => {
            let [a, b] = rest else {
                return Err(usage_err("usage: snp device eq <a> <b>"));
            };
            emit_device(&equality_device())?;
            println!("{}", numbers_equal(parse_number(a)?, parse_number(b)?));
        }
        "and" | "or" => {
            let [x, y] = rest else {
                return Err(usage_err(format!("usage: snp device {name} <x> <y>")));
            };
            let device = if name == "and" { and_gate() } else { or_gate() };
            emit_device(&device)?;
            let answer = eval_gate(&device, &[parse_bool(x)?, parse_bool(y)?])
                .map_err(|e| runtime_err(e.to_string()))?;
            println!("{answer}");
        }
        "not" => {
            let [x] = rest else {
                return Err(usage_err("usage: snp device not <x>"));
            };
            let device = not_gate();
            emit_device(&device)?;
            let answer =
                eval_gate(&device, &[parse_bool(x)?]).map_err(|e| runtime_err(e.to_string()))?;
            println!("{answer}");
        }
        "sort" => {
            if rest.is_empty() {
                return Err(usage_err("usage: snp device sort <v1> [v2 ...]"));
            }
            let values = rest
                .iter()
                .map(|v| parse_number(v))
                .collect::<Result<Vec<u64>, Failure>>()?;
            emit_device(&sorter_device(
                values.len(),
                snp::devices::DEFAULT_SORTER_VMAX,
            ))?;
            let sorted = sort_numbers(&values).map_err(|e| runtime_err(e.to_string()))?;
            let parts: Vec<String> = sorted.iter().map(|v| v.to_string()).collect();
            println!("{}", parts.join(" "));
        }
        other => return Err(usage_err(format!("unknown device '{other}'"))),
    }
    Ok(())
}

fn cmd_os(args: &[String]) -> Result<(), Failure> {
    let mut file = None;
    let mut ticks = 100u64;
    let mut quantum = 8u64;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--ticks" => {
                let value = it
                    .next()
                    .ok_or_else(|| usage_err("--ticks needs a number"))?;
                ticks = parse_number(value)?;
            }
            "--quantum" => {
                let value = it
                    .next()
                    .ok_or_else(|| usage_err("--quantum needs a number"))?;
                quantum = parse_number(value)?;
            }
            other if other.starts_with("--") => {
                return Err(usage_err(format!("unknown flag '{other}'")));
            }
            _ => {
                if file.replace(arg.clone()).is_some() {
                    return Err(usage_err("expected exactly one jobs file"));
                }
            }
        }
    }
    let file =
        file.ok_or_else(|| usage_err("usage: snp os <jobsfile> [--ticks N] [--quantum Q]"))?;
    let text = std::fs::read_to_string(&file)
        .map_err(|e| usage_err(format!("cannot read {file}: {e}")))?;
    let base_dir = Path::new(&file).parent().unwrap_or(Path::new("."));
    let (declared_pool, jobs) =
        parse_jobs_file(&text, base_dir).map_err(|e| usage_err(e.to_string()))?;
    let pool: BTreeMap<String, u64> = declared_pool.unwrap_or_else(|| default_pool(&jobs));
    let total_jobs = jobs.len();

    let env = Environment::new(pool, OsConfig { vmax: 64, quantum });
    let (env, trace) = run_os(env, jobs, ticks).map_err(|e| runtime_err(e.to_string()))?;

    for (id, verdict) in &trace.submissions {
        match verdict {
            snp::snpos::Admission::Admitted => println!("submit {id} admitted"),
            snp::snpos::Admission::Rejected { resource } => {
                println!("submit {id} rejected {resource}")
            }
        }
    }
    println!("tick\torder\tchosen\tsteps\ttotal");
    for record in &trace.records {
        println!(
            "{}\t{}\t{}\t{}\t{}",
            record.tick,
            record.order.join(","),
            record.chosen,
            record.steps,
            record.total_after
        );
    }
    println!(
        "completed {}/{} jobs in {} ticks, total steps {}",
        env.completed().len(),
        total_jobs,
        env.tick(),
        env.account_total()
    );
    Ok(())
}
