//! The device library: small computing systems and their run harnesses.
//!
//! Numbers enter the adder and the equality checker as binary spike trains,
//! least significant bit first — one bit per step, a spike meaning 1. Gate
//! inputs are loaded directly into the input neuron as spikes (false ↦ one
//! spike, true ↦ two), and the gate's answer is the total it emits: two
//! spikes mean true, one means false. The sorter takes its values as
//! initial spike loads and leaves the result in its accumulator layer.

use thiserror::Error;

use crate::chooser::Chooser;
use crate::engine::{run, Mode, RunResult, SpikeTrain, System};
use crate::lang::{parse_system, render_system};

/// How a device's answer is read off a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadConvention {
    /// Decode the output train as a binary number (with the device latency).
    BinaryTrain,
    /// Count every spike the system ever emits.
    SpikeTotal,
    /// Read spike counts out of the final configuration.
    FinalConfiguration,
}

/// A ready-to-run device: its system, the step offset between input
/// position i and the matching output position, how many logical inputs it
/// takes, and how to read the result.
#[derive(Debug, Clone)]
pub struct DeviceHandle {
    pub system: System,
    pub latency: u64,
    pub mode: Mode,
    pub arity: usize,
    pub convention: ReadConvention,
    /// Largest value the device is built for (sorter only).
    pub vmax: Option<u64>,
}

impl DeviceHandle {
    /// The device's own source text, suitable for writing to a `.snp` file.
    pub fn emit_source(&self) -> String {
        render_system(&self.system)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("width {width} cannot hold {value}")]
    WidthTooSmall { value: u64, width: usize },
    #[error("spike train entry {count} at position {position} is not binary")]
    NonBinaryEntry { position: usize, count: u64 },
    #[error("gate expects {expected} inputs, got {got}")]
    GateArity { expected: usize, got: usize },
    #[error("gate emitted {got} spikes in total; a sound gate emits 1 or 2")]
    BadGateEmission { got: u64 },
    #[error("value {value} exceeds the sorter's capacity of {vmax}")]
    ValueExceedsVmax { value: u64, vmax: u64 },
    #[error("spike train holds fewer than two spikes")]
    TooFewSpikes,
}

fn bit_length(n: u64) -> usize {
    (64 - n.leading_zeros()) as usize
}

/// Encode `n` as a binary spike train of exactly `width` positions, least
/// significant bit first.
pub fn encode_number_lsb(n: u64, width: usize) -> Result<SpikeTrain, DeviceError> {
    if bit_length(n) > width {
        return Err(DeviceError::WidthTooSmall { value: n, width });
    }
    Ok(SpikeTrain((0..width).map(|i| (n >> i) & 1).collect()))
}

/// Decode a binary output train, skipping the first `latency` positions:
/// bit i of the result is the entry at position `latency + i`.
pub fn decode_train_lsb(train: &SpikeTrain, latency: u64) -> Result<u64, DeviceError> {
    let mut value = 0u64;
    for (position, &count) in train.0.iter().enumerate() {
        if count > 1 {
            return Err(DeviceError::NonBinaryEntry { position, count });
        }
        if (position as u64) >= latency && count == 1 {
            let bit = position as u64 - latency;
            if bit < 64 {
                value |= 1 << bit;
            }
        }
    }
    Ok(value)
}

/// Steps between the first and the second spike of a train — the classic
/// interval reading of an output neuron. None of the shipped devices use
/// it; they read trains, totals, or final configurations instead.
pub fn decode_interval(train: &SpikeTrain) -> Result<u64, DeviceError> {
    let mut nonzero = train
        .0
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, _)| i as u64);
    match (nonzero.next(), nonzero.next()) {
        (Some(first), Some(second)) => Ok(second - first),
        _ => Err(DeviceError::TooFewSpikes),
    }
}

const ADDER_SRC: &str = "\
system adder
mode standard
neuron in1 spikes 0
  rule a -> a
neuron in2 spikes 0
  rule a -> a
neuron add spikes 0
  rule a -> a
  rule a^2 / a^1 -> lambda
  rule a^3 / a^2 -> a
syn in1 add
syn in2 add
input in1 in2
output add
";

const EQUALITY_SRC: &str = "\
system equality
mode standard
neuron in1 spikes 0
  rule a -> a
neuron in2 spikes 0
  rule a -> a
neuron check spikes 0
  rule a^2 -> lambda
  rule a -> a
syn in1 check
syn in2 check
input in1 in2
output check
";

const AND_SRC: &str = "\
system and_gate
mode standard
neuron g spikes 0
  rule a^2 -> a
  rule a^3 -> a
  rule a^4 / a^2 -> a
input g
output g
";

const OR_SRC: &str = "\
system or_gate
mode standard
neuron g spikes 0
  rule a^2 -> a
  rule a^3 -> a^2
  rule a^4 / a^2 -> a
input g
output g
";

const NOT_SRC: &str = "\
system not_gate
mode exhaustive
neuron n1 spikes 1
  rule a^2 / a^1 -> a
  rule a^3 -> a
neuron n2 spikes 0
  rule a -> a
  rule a^2 -> a
syn n1 n2
syn n2 n1
input n1
output n1
";

fn built_in(src: &str, latency: u64, arity: usize, convention: ReadConvention) -> DeviceHandle {
    let system = parse_system(src)
        .expect("built-in device source must parse")
        .system;
    let mode = system.mode;
    DeviceHandle {
        system,
        latency,
        mode,
        arity,
        convention,
        vmax: None,
    }
}

/// Three neurons: two forwarders feeding an accumulator whose rules emit
/// the sum bit and keep the carry as a retained spike. A bit fed at step i
/// is forwarded during step i, lands at the end of it, and is answered at
/// step i + 1 — latency 1.
pub fn adder_device() -> DeviceHandle {
    built_in(ADDER_SRC, 1, 2, ReadConvention::BinaryTrain)
}

/// Add two naturals by running the adder on their binary encodings. The
/// width leaves one spare position so the final carry can emerge.
pub fn add_numbers(a: u64, b: u64) -> u64 {
    add_numbers_with(&adder_device(), a, b)
}

/// [`add_numbers`] through an existing adder handle.
pub fn add_numbers_with(device: &DeviceHandle, a: u64, b: u64) -> u64 {
    let width = bit_length(a).max(bit_length(b)) + 1;
    let trains = [
        encode_number_lsb(a, width).expect("width covers a"),
        encode_number_lsb(b, width).expect("width covers b"),
    ];
    let max_steps = width as u64 + device.latency + 1;
    let result = run(
        &device.system,
        &trains,
        max_steps,
        &mut Chooser::first_declared(),
    )
    .expect("adder inputs are binary");
    decode_train_lsb(&result.output_train, device.latency).expect("adder output is binary")
}

/// Two forwarders feeding a checker that erases equal-bit pairs and lets a
/// lone spike through: the output train is all-zero exactly when the inputs
/// agree at every position.
pub fn equality_device() -> DeviceHandle {
    built_in(EQUALITY_SRC, 1, 2, ReadConvention::BinaryTrain)
}

/// Compare two naturals bitwise through the equality device.
pub fn numbers_equal(a: u64, b: u64) -> bool {
    numbers_equal_with(&equality_device(), a, b)
}

/// [`numbers_equal`] through an existing equality handle.
pub fn numbers_equal_with(device: &DeviceHandle, a: u64, b: u64) -> bool {
    let width = bit_length(a).max(bit_length(b));
    let trains = [
        encode_number_lsb(a, width).expect("width covers a"),
        encode_number_lsb(b, width).expect("width covers b"),
    ];
    let result = run(
        &device.system,
        &trains,
        width as u64 + 4,
        &mut Chooser::first_declared(),
    )
    .expect("equality inputs are binary");
    result.output_train.total() == 0
}

/// Single neuron with rules keyed to the input total: 2 or 3 spikes answer
/// false, 4 answer true across two steps.
pub fn and_gate() -> DeviceHandle {
    built_in(AND_SRC, 0, 2, ReadConvention::SpikeTotal)
}

/// The AND gate with the three-spike rule producing two spikes instead of
/// one, which flips that case to true.
pub fn or_gate() -> DeviceHandle {
    built_in(OR_SRC, 0, 2, ReadConvention::SpikeTotal)
}

/// Two neurons in a cycle, run with exhaustive rule use. Neuron 1 holds one
/// resident spike; neuron 2 refills it after the answer goes out, so the
/// device returns to its initial configuration after every evaluation.
pub fn not_gate() -> DeviceHandle {
    built_in(NOT_SRC, 0, 1, ReadConvention::SpikeTotal)
}

/// Evaluate a gate on Boolean inputs. Each input contributes its encoding
/// (false ↦ 1 spike, true ↦ 2) and the sum is loaded into the input neuron
/// for the first step.
pub fn eval_gate(gate: &DeviceHandle, inputs: &[bool]) -> Result<bool, DeviceError> {
    if inputs.len() != gate.arity {
        return Err(DeviceError::GateArity {
            expected: gate.arity,
            got: inputs.len(),
        });
    }
    let loaded: u64 = inputs.iter().map(|&b| if b { 2 } else { 1 }).sum();
    let mut system = gate.system.clone();
    let input_idx = system.inputs[0];
    system.neurons[input_idx].initial_spikes += loaded;
    let trains = vec![SpikeTrain::new(); system.inputs.len()];
    let result = run(&system, &trains, 6, &mut Chooser::first_declared())
        .expect("gate systems run without input trains");
    match result.output_train.total() {
        2 => Ok(true),
        1 => Ok(false),
        got => Err(DeviceError::BadGateEmission { got }),
    }
}

/// Run a gate and hand back the full result, for inspecting emission
/// timing and the final configuration.
pub fn eval_gate_run(gate: &DeviceHandle, inputs: &[bool]) -> Result<RunResult, DeviceError> {
    if inputs.len() != gate.arity {
        return Err(DeviceError::GateArity {
            expected: gate.arity,
            got: inputs.len(),
        });
    }
    let loaded: u64 = inputs.iter().map(|&b| if b { 2 } else { 1 }).sum();
    let mut system = gate.system.clone();
    let input_idx = system.inputs[0];
    system.neurons[input_idx].initial_spikes += loaded;
    let trains = vec![SpikeTrain::new(); system.inputs.len()];
    Ok(run(&system, &trains, 6, &mut Chooser::first_declared())
        .expect("gate systems run without input trains"))
}

/// Default sorter capacity used by [`sort_numbers`].
pub const DEFAULT_SORTER_VMAX: u64 = 64;

/// Three layers. Input neurons drain one spike per step and broadcast to
/// every threshold neuron; threshold neuron j fires exactly when m ≥ j
/// inputs are still draining and feeds accumulator j. Since the number of
/// non-empty inputs never increases, accumulator j ends up holding the
/// j-th largest value.
pub fn sorter_device(n: usize, vmax: u64) -> DeviceHandle {
    assert!(n >= 1, "sorter needs at least one lane");
    assert!(vmax >= 1, "sorter capacity must be positive");
    let mut src = String::new();
    src.push_str(&format!("system sorter_{n}\nmode standard\n"));
    for i in 1..=n {
        src.push_str(&format!("neuron i{i} spikes 0\n  rule a+ / a^1 -> a\n"));
    }
    for j in 1..=n {
        src.push_str(&format!("neuron t{j} spikes 0\n"));
        for m in 1..=n {
            if m >= j {
                src.push_str(&format!("  rule a^{m} -> a\n"));
            } else {
                src.push_str(&format!("  rule a^{m} -> lambda\n"));
            }
        }
    }
    for j in 1..=n {
        src.push_str(&format!("neuron o{j} spikes 0\n"));
    }
    for i in 1..=n {
        for j in 1..=n {
            src.push_str(&format!("syn i{i} t{j}\n"));
        }
    }
    for j in 1..=n {
        src.push_str(&format!("syn t{j} o{j}\n"));
    }
    let inputs: Vec<String> = (1..=n).map(|i| format!("i{i}")).collect();
    src.push_str(&format!("input {}\n", inputs.join(" ")));
    src.push_str("output o1\n");

    let system = parse_system(&src)
        .expect("generated sorter source must parse")
        .system;
    DeviceHandle {
        mode: system.mode,
        system,
        latency: 0,
        arity: n,
        convention: ReadConvention::FinalConfiguration,
        vmax: Some(vmax),
    }
}

/// Sort naturals into descending order through a sorter sized for the
/// input, capped at [`DEFAULT_SORTER_VMAX`].
pub fn sort_numbers(values: &[u64]) -> Result<Vec<u64>, DeviceError> {
    assert!(!values.is_empty(), "sort_numbers needs at least one value");
    let device = sorter_device(values.len(), DEFAULT_SORTER_VMAX);
    sort_numbers_with(&device, values)
}

/// Sort through an existing sorter device: load each value as the initial
/// spikes of its input lane, run to quiescence, read the accumulators.
pub fn sort_numbers_with(device: &DeviceHandle, values: &[u64]) -> Result<Vec<u64>, DeviceError> {
    let n = device.arity;
    assert_eq!(values.len(), n, "value count must match the sorter's lanes");
    let vmax = device.vmax.unwrap_or(u64::MAX);
    for &v in values {
        if v > vmax {
            return Err(DeviceError::ValueExceedsVmax { value: v, vmax });
        }
    }
    let mut system = device.system.clone();
    for (lane, &v) in values.iter().enumerate() {
        let idx = system.inputs[lane];
        system.neurons[idx].initial_spikes = v;
    }
    let trains = vec![SpikeTrain::new(); n];
    let max_steps = values.iter().copied().max().unwrap_or(0) + 2;
    let result = run(
        &system,
        &trains,
        max_steps.max(1),
        &mut Chooser::first_declared(),
    )
    .expect("sorter runs without input trains");
    Ok((1..=n)
        .map(|j| {
            let idx = system
                .neuron_index(&format!("o{j}"))
                .expect("sorter has one accumulator per lane");
            result.final_config.spikes[idx]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{explore, RuleForm, SystemKind};

    #[test]
    fn encode_examples() {
        assert_eq!(encode_number_lsb(0, 3).unwrap().0, vec![0, 0, 0]);
        assert_eq!(encode_number_lsb(5, 4).unwrap().0, vec![1, 0, 1, 0]);
        assert_eq!(encode_number_lsb(6, 3).unwrap().0, vec![0, 1, 1]);
        assert!(matches!(
            encode_number_lsb(8, 3),
            Err(DeviceError::WidthTooSmall { .. })
        ));
    }

    #[test]
    fn decode_examples() {
        assert_eq!(
            decode_train_lsb(&SpikeTrain::from_bits(&[0, 0, 1, 0, 1]), 2).unwrap(),
            5
        );
        assert_eq!(
            decode_train_lsb(&SpikeTrain::from_bits(&[0, 0, 0]), 1).unwrap(),
            0
        );
        assert!(matches!(
            decode_train_lsb(&SpikeTrain::from_bits(&[0, 2]), 0),
            Err(DeviceError::NonBinaryEntry { .. })
        ));
    }

    #[test]
    fn adder_structure() {
        let device = adder_device();
        let sys = &device.system;
        assert_eq!(sys.neurons.len(), 3);
        assert_eq!(sys.synapses.len(), 2);
        assert_eq!(sys.neurons[2].rules.len(), 3);
        assert_eq!(sys.kind, SystemKind::Extended);
        assert_eq!(device.latency, 1);
    }

    #[test]
    fn adder_small_sums() {
        assert_eq!(add_numbers(0, 0), 0);
        assert_eq!(add_numbers(1, 1), 2);
        assert_eq!(add_numbers(5, 9), 14);
        assert_eq!(add_numbers(0, 7), 7);
        assert_eq!(add_numbers(255, 1), 256);
    }

    #[test]
    fn equality_structure_and_examples() {
        let device = equality_device();
        assert_eq!(device.system.neurons.len(), 3);
        assert_eq!(device.system.neurons[2].rules.len(), 2);
        assert_eq!(device.system.kind, SystemKind::Classic);
        assert!(numbers_equal(7, 7));
        assert!(!numbers_equal(2, 3));
        assert!(!numbers_equal(4, 1));
        assert!(numbers_equal(0, 0));
    }

    #[test]
    fn equality_emits_spike_per_differing_bit() {
        let device = equality_device();
        // 2 = 01, 3 = 11 (LSB first): only bit 0 differs.
        let trains = [
            encode_number_lsb(2, 2).unwrap(),
            encode_number_lsb(3, 2).unwrap(),
        ];
        let result = run(&device.system, &trains, 8, &mut Chooser::first_declared()).unwrap();
        assert_eq!(result.output_train.total(), 1);
    }

    #[test]
    fn gate_truth_tables() {
        let and = and_gate();
        let or = or_gate();
        let not = not_gate();
        for (x, y) in [(false, false), (false, true), (true, false), (true, true)] {
            assert_eq!(eval_gate(&and, &[x, y]).unwrap(), x && y, "AND {x} {y}");
            assert_eq!(eval_gate(&or, &[x, y]).unwrap(), x || y, "OR {x} {y}");
        }
        for x in [false, true] {
            assert_eq!(eval_gate(&not, &[x]).unwrap(), !x, "NOT {x}");
        }
    }

    #[test]
    fn and_gate_structure_and_or_delta() {
        let and = and_gate();
        let or = or_gate();
        assert_eq!(and.system.neurons[0].rules.len(), 3);
        let and_rules = &and.system.neurons[0].rules;
        let or_rules = &or.system.neurons[0].rules;
        assert_eq!(and_rules[0], or_rules[0]);
        assert_eq!(and_rules[2], or_rules[2]);
        assert_eq!(and_rules[1].produce, 1);
        assert_eq!(or_rules[1].produce, 2);
        assert_eq!(and_rules[1].guard_expr, or_rules[1].guard_expr);
    }

    #[test]
    fn and_true_case_spans_two_steps() {
        let result = eval_gate_run(&and_gate(), &[true, true]).unwrap();
        assert_eq!(result.output_train.0, vec![1, 1]);
        assert_eq!(result.peak_spikes, 4);
    }

    #[test]
    fn not_gate_restores_initial_configuration() {
        let not = not_gate();
        let initial = not.system.initial_configuration();
        for x in [false, true] {
            let result = eval_gate_run(&not, &[x]).unwrap();
            assert_eq!(result.final_config.spikes, initial.spikes);
            assert!(result.final_config.pending.iter().all(|p| p.is_none()));
        }
    }

    #[test]
    fn not_gate_is_deterministic_under_exploration() {
        let not = not_gate();
        let mut system = not.system.clone();
        system.neurons[system.inputs[0]].initial_spikes += 1; // NOT(false)
        let trains = vec![SpikeTrain::new()];
        let set = explore(&system, &trains, 6, 10_000).unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn and_gate_applicability_is_keyed_to_content() {
        let and = and_gate();
        let rules = &and.system.neurons[0].rules;
        use crate::engine::applicable_rules;
        // Four spikes enable only the a^4-guarded rule.
        assert_eq!(applicable_rules(4, None, rules, 0), vec![2]);
        assert_eq!(applicable_rules(3, None, rules, 0), vec![1]);
        assert_eq!(applicable_rules(2, None, rules, 0), vec![0]);
        assert_eq!(applicable_rules(0, None, rules, 0), Vec::<usize>::new());
    }

    #[test]
    fn adder_on_empty_trains_is_quiescent_immediately() {
        let device = adder_device();
        let trains = [SpikeTrain::new(), SpikeTrain::new()];
        let result = run(&device.system, &trains, 8, &mut Chooser::first_declared()).unwrap();
        assert_eq!(result.steps_executed, 0);
        assert!(result.quiescent);
        assert!(result.output_train.is_empty());
        assert_eq!(result.output_train.total(), 0);
    }

    #[test]
    fn tampered_gate_reports_bad_emission() {
        // Preloading a stray spike pushes the content outside every guard,
        // so nothing fires and the total is neither 1 nor 2.
        let mut broken = and_gate();
        broken.system.neurons[0].initial_spikes = 1;
        assert!(matches!(
            eval_gate(&broken, &[true, true]),
            Err(DeviceError::BadGateEmission { got: 0 })
        ));
    }

    #[test]
    fn gate_arity_is_checked() {
        assert!(matches!(
            eval_gate(&and_gate(), &[true]),
            Err(DeviceError::GateArity { .. })
        ));
        assert!(matches!(
            eval_gate(&not_gate(), &[true, false]),
            Err(DeviceError::GateArity { .. })
        ));
    }

    #[test]
    fn sorter_structure() {
        let device = sorter_device(3, 16);
        let sys = &device.system;
        assert_eq!(sys.neurons.len(), 9);
        assert_eq!(sys.synapses.len(), 12);
        for j in 0..3 {
            assert_eq!(sys.neurons[3 + j].rules.len(), 3);
        }
        assert_eq!(sys.kind, SystemKind::Classic);
        // Threshold rules are disjoint singletons, so the classic
        // forgetting constraint holds without warnings.
        assert!(sys.warnings.is_empty());
        assert!(sys.neurons[3]
            .rules
            .iter()
            .all(|r| r.form() != RuleForm::Extended));
    }

    #[test]
    fn sorter_examples() {
        assert_eq!(sort_numbers(&[5]).unwrap(), vec![5]);
        assert_eq!(sort_numbers(&[1, 1, 1]).unwrap(), vec![1, 1, 1]);
        assert_eq!(sort_numbers(&[3, 1, 4, 1, 5]).unwrap(), vec![5, 4, 3, 1, 1]);
        assert_eq!(sort_numbers(&[0, 2, 0]).unwrap(), vec![2, 0, 0]);
    }

    #[test]
    fn sorter_rejects_values_over_capacity() {
        let device = sorter_device(2, 4);
        assert!(matches!(
            sort_numbers_with(&device, &[5, 1]),
            Err(DeviceError::ValueExceedsVmax { value: 5, vmax: 4 })
        ));
    }

    #[test]
    fn interval_decoding() {
        assert_eq!(
            decode_interval(&SpikeTrain::from_bits(&[0, 1, 0, 0, 1])).unwrap(),
            3
        );
        assert_eq!(decode_interval(&SpikeTrain::from_bits(&[1, 1])).unwrap(), 1);
        assert!(matches!(
            decode_interval(&SpikeTrain::from_bits(&[0, 0, 0])),
            Err(DeviceError::TooFewSpikes)
        ));
    }

    #[test]
    fn devices_emit_parseable_sources() {
        for device in [
            adder_device(),
            equality_device(),
            and_gate(),
            or_gate(),
            not_gate(),
            sorter_device(3, 16),
        ] {
            let text = device.emit_source();
            let reparsed = parse_system(&text).unwrap().system;
            assert!(device.system.same_structure(&reparsed));
            assert_eq!(device.mode, device.system.mode);
        }
    }
}
