//! The synchronous SN P execution engine.
//!
//! A step at time `t` runs four phases:
//!
//! 1. **input delivery** — each open input neuron gains its train entry for
//!    `t`; closed input neurons drop the spikes;
//! 2. **matured firings** — every pending delayed rule with `fire_at == t`
//!    emits along all outgoing synapses (and to the environment for the
//!    output neuron) and the neuron reopens;
//! 3. **rule selection** — every open neuron that did not just fire and has
//!    at least one applicable rule must select one. Guards see the neuron's
//!    full content after phase 1 and before any delivery. Zero-delay rules
//!    emit within the same step; a delay `d ≥ 1` closes the neuron until it
//!    fires at `t + d`;
//! 4. **delivery** — everything emitted this step lands on open targets at
//!    the end of the step; spikes sent to closed neurons are lost.
//!
//! Spikes emitted at step `t` are therefore first visible to guards at step
//! `t + 1`. A neuron that fires at `t` receives spikes again at `t` but
//! selects its next rule no earlier than `t + 1`.
//!
//! In exhaustive mode a selected rule with consume `b` applies as many times
//! as the content `k` allows: `k = b·g + u` with `u < b`, consuming `b·g`
//! and emitting `g·p`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::chooser::Chooser;
use crate::regex::{compile, CompileError, SpikeExpr, SpikeSet};

/// Rule application discipline for a whole system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Standard,
    Exhaustive,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Standard => "standard",
            Mode::Exhaustive => "exhaustive",
        })
    }
}

/// Whether a system sticks to the classic rule forms (firing rules produce
/// exactly one spike, forgetting rules erase their whole content) or uses
/// the extended generalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Classic,
    Extended,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemKind::Classic => "classic",
            SystemKind::Extended => "extended",
        })
    }
}

/// Shape of a single rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleForm {
    /// Produces exactly one spike.
    ClassicFiring,
    /// Singleton guard `{e}`, consumes all `e`, produces nothing, no delay.
    PlainForgetting,
    /// Anything else (multi-spike production, partial erasure, ...).
    Extended,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("rule must consume at least one spike")]
    ZeroConsume,
    #[error(transparent)]
    Guard(#[from] CompileError),
}

/// A firing or forgetting rule: guard, consumed amount, produced amount,
/// and delay in steps. `produce == 0` makes it an erasing rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDef {
    pub guard_expr: SpikeExpr,
    pub guard: SpikeSet,
    pub consume: u64,
    pub produce: u64,
    pub delay: u64,
}

impl RuleDef {
    pub fn new(
        guard_expr: SpikeExpr,
        consume: u64,
        produce: u64,
        delay: u64,
    ) -> Result<RuleDef, RuleError> {
        if consume == 0 {
            return Err(RuleError::ZeroConsume);
        }
        let guard = compile(&guard_expr)?;
        Ok(RuleDef {
            guard_expr,
            guard,
            consume,
            produce,
            delay,
        })
    }

    pub fn form(&self) -> RuleForm {
        if self.produce == 1 {
            return RuleForm::ClassicFiring;
        }
        if self.produce == 0 && self.delay == 0 && self.guard.as_singleton() == Some(self.consume) {
            return RuleForm::PlainForgetting;
        }
        RuleForm::Extended
    }

    /// True when the rule can render without an explicit consume part:
    /// the guard is `a`/`a^k` and the rule consumes the whole match.
    pub fn is_bare(&self) -> bool {
        self.guard_expr.as_exact_power() == Some(self.consume)
    }
}

/// A neuron: name, initial spikes, and an ordered rule list. Order matters
/// only to the first-declared choice policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronDef {
    pub name: String,
    pub initial_spikes: u64,
    pub rules: Vec<RuleDef>,
}

/// An unchecked system description, as produced by a parser or builder.
/// `validate_system` turns it into a runnable [`System`].
#[derive(Debug, Clone, Default)]
pub struct SystemDef {
    pub name: String,
    pub mode: Option<Mode>,
    pub declared_kind: Option<SystemKind>,
    pub neurons: Vec<NeuronDef>,
    pub synapses: Vec<(String, String)>,
    pub inputs: Vec<String>,
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidateError {
    #[error("duplicate neuron name '{0}'")]
    DuplicateNeuron(String),
    #[error("unknown neuron '{name}' referenced by {context}")]
    UnknownNeuron { name: String, context: &'static str },
    #[error("self-synapse on neuron '{0}'")]
    SelfSynapse(String),
    #[error("duplicate input neuron '{0}'")]
    DuplicateInput(String),
    #[error("neuron '{neuron}': forgetting rule erasing {erased} overlaps a firing rule guard")]
    ForgettingOverlap { neuron: String, erased: u64 },
    #[error("system is declared classic but neuron '{0}' carries an extended rule")]
    DeclaredClassicButExtended(String),
}

/// A validated, runnable system: names resolved, guards compiled, topology
/// indexed. Immutable during runs and freely shareable between them.
#[derive(Debug, Clone)]
pub struct System {
    pub name: String,
    pub mode: Mode,
    pub kind: SystemKind,
    pub declared_kind: Option<SystemKind>,
    pub neurons: Vec<NeuronDef>,
    pub synapses: BTreeSet<(usize, usize)>,
    pub outgoing: Vec<Vec<usize>>,
    pub inputs: Vec<usize>,
    pub output: Option<usize>,
    pub warnings: Vec<String>,
}

impl System {
    pub fn neuron_name(&self, idx: usize) -> &str {
        &self.neurons[idx].name
    }

    pub fn neuron_index(&self, name: &str) -> Option<usize> {
        self.neurons.iter().position(|n| n.name == name)
    }

    pub fn initial_configuration(&self) -> Configuration {
        Configuration {
            spikes: self.neurons.iter().map(|n| n.initial_spikes).collect(),
            pending: vec![None; self.neurons.len()],
            step: 0,
        }
    }

    /// Structural equality: everything that the text format round-trips.
    /// Warnings and guard compilation artifacts are not part of it.
    pub fn same_structure(&self, other: &System) -> bool {
        self.name == other.name
            && self.mode == other.mode
            && self.kind == other.kind
            && self.neurons == other.neurons
            && self.synapses == other.synapses
            && self.inputs == other.inputs
            && self.output == other.output
    }
}

/// Check names, topology, and the classic forgetting-rule constraint.
///
/// The constraint applies to plain forgetting rules only: the erased amount
/// must lie outside every firing-rule guard of the same neuron. Violations
/// are an error for classic systems and a recorded warning for extended
/// ones, since generalized erasing rules fall outside the classic notion.
pub fn validate_system(def: SystemDef) -> Result<System, ValidateError> {
    let mut index = std::collections::HashMap::new();
    for (i, n) in def.neurons.iter().enumerate() {
        if index.insert(n.name.clone(), i).is_some() {
            return Err(ValidateError::DuplicateNeuron(n.name.clone()));
        }
    }
    let resolve = |name: &str, context: &'static str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| ValidateError::UnknownNeuron {
                name: name.to_string(),
                context,
            })
    };

    let mut synapses = BTreeSet::new();
    for (from, to) in &def.synapses {
        let f = resolve(from, "a synapse")?;
        let t = resolve(to, "a synapse")?;
        if f == t {
            return Err(ValidateError::SelfSynapse(from.clone()));
        }
        synapses.insert((f, t));
    }

    let mut inputs = Vec::new();
    for name in &def.inputs {
        let idx = resolve(name, "the input list")?;
        if inputs.contains(&idx) {
            return Err(ValidateError::DuplicateInput(name.clone()));
        }
        inputs.push(idx);
    }
    let output = def
        .output
        .as_deref()
        .map(|name| resolve(name, "the output declaration"))
        .transpose()?;

    let inferred = if def
        .neurons
        .iter()
        .flat_map(|n| &n.rules)
        .any(|r| r.form() == RuleForm::Extended)
    {
        SystemKind::Extended
    } else {
        SystemKind::Classic
    };
    let kind = match def.declared_kind {
        Some(SystemKind::Classic) if inferred == SystemKind::Extended => {
            let culprit = def
                .neurons
                .iter()
                .find(|n| n.rules.iter().any(|r| r.form() == RuleForm::Extended))
                .map(|n| n.name.clone())
                .unwrap_or_default();
            return Err(ValidateError::DeclaredClassicButExtended(culprit));
        }
        Some(k) => k,
        None => inferred,
    };

    let mut warnings = Vec::new();
    for n in &def.neurons {
        for rule in &n.rules {
            // Amplifying rules fall outside even the extended form, which
            // keeps produce within consume; allowed, but flagged.
            if rule.produce > rule.consume {
                warnings.push(format!(
                    "neuron '{}': rule produces {} from {} consumed spikes",
                    n.name, rule.produce, rule.consume
                ));
            }
            if rule.form() != RuleForm::PlainForgetting {
                continue;
            }
            let erased = rule.consume;
            let overlaps = n
                .rules
                .iter()
                .any(|r| r.produce >= 1 && r.guard.contains(erased));
            if overlaps {
                if kind == SystemKind::Classic {
                    return Err(ValidateError::ForgettingOverlap {
                        neuron: n.name.clone(),
                        erased,
                    });
                }
                warnings.push(format!(
                    "neuron '{}': forgetting rule erasing {} overlaps a firing rule guard",
                    n.name, erased
                ));
            }
        }
    }

    let mut outgoing = vec![Vec::new(); def.neurons.len()];
    for &(f, t) in &synapses {
        outgoing[f].push(t);
    }

    Ok(System {
        name: def.name,
        mode: def.mode.unwrap_or(Mode::Standard),
        kind,
        declared_kind: def.declared_kind,
        neurons: def.neurons,
        synapses,
        outgoing,
        inputs,
        output,
        warnings,
    })
}

/// A delayed firing: the neuron is closed until `fire_at`, when it emits
/// `emit` spikes and reopens.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pending {
    pub emit: u64,
    pub fire_at: u64,
}

/// Dynamic state of a system: spike counts, pending firings, next step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub spikes: Vec<u64>,
    pub pending: Vec<Option<Pending>>,
    pub step: u64,
}

impl Configuration {
    pub fn total_spikes(&self) -> u64 {
        self.spikes.iter().sum()
    }

    /// Closed for reception at `at_step`: strictly before the pending fire
    /// time. At the fire step itself the neuron receives again.
    pub fn is_closed(&self, neuron: usize, at_step: u64) -> bool {
        matches!(&self.pending[neuron], Some(p) if at_step < p.fire_at)
    }

    /// Step-independent state key: pendings expressed relative to `step`.
    fn relative_key(&self) -> (Vec<u64>, Vec<Option<(u64, u64)>>) {
        (
            self.spikes.clone(),
            self.pending
                .iter()
                .map(|p| p.as_ref().map(|p| (p.emit, p.fire_at - self.step)))
                .collect(),
        )
    }
}

/// Per-timestep spike counts entering or leaving the system.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpikeTrain(pub Vec<u64>);

impl SpikeTrain {
    pub fn new() -> Self {
        SpikeTrain(Vec::new())
    }

    pub fn from_bits(bits: &[u64]) -> Self {
        SpikeTrain(bits.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entry at step `t`; positions past the end read as zero.
    pub fn get(&self, t: u64) -> u64 {
        usize::try_from(t)
            .ok()
            .and_then(|i| self.0.get(i).copied())
            .unwrap_or(0)
    }

    pub fn push(&mut self, count: u64) {
        self.0.push(count);
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn is_binary(&self) -> bool {
        self.0.iter().all(|&c| c <= 1)
    }

    fn appended(&self, count: u64) -> Self {
        let mut next = self.clone();
        next.push(count);
        next
    }
}

impl From<Vec<u64>> for SpikeTrain {
    fn from(v: Vec<u64>) -> Self {
        SpikeTrain(v)
    }
}

impl fmt::Display for SpikeTrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("(empty)");
        }
        if self.is_binary() {
            for &c in &self.0 {
                write!(f, "{c}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
            f.write_str(&parts.join(","))
        }
    }
}

/// One observable event during a step. Events of a step are totally ordered
/// by (step, neuron name, kind).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepEvent {
    pub step: u64,
    pub neuron: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    InputReceived {
        count: u64,
    },
    InputDroppedClosed {
        count: u64,
    },
    RuleSelected {
        rule: usize,
        consumed: u64,
        fire_at: u64,
    },
    Fired {
        emitted: u64,
    },
    Forgot {
        count: u64,
    },
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::InputReceived { .. } => 0,
            EventKind::InputDroppedClosed { .. } => 1,
            EventKind::RuleSelected { .. } => 2,
            EventKind::Fired { .. } => 3,
            EventKind::Forgot { .. } => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::InputReceived { .. } => "input-received",
            EventKind::InputDroppedClosed { .. } => "input-dropped-closed",
            EventKind::RuleSelected { .. } => "rule-selected",
            EventKind::Fired { .. } => "fired",
            EventKind::Forgot { .. } => "forgot",
        }
    }

    pub fn details(&self) -> String {
        match self {
            EventKind::InputReceived { count } | EventKind::InputDroppedClosed { count } => {
                format!("count={count}")
            }
            EventKind::RuleSelected {
                rule,
                consumed,
                fire_at,
            } => format!("rule={rule} consumed={consumed} fire_at={fire_at}"),
            EventKind::Fired { emitted } => format!("emitted={emitted}"),
            EventKind::Forgot { count } => format!("count={count}"),
        }
    }
}

/// Line-oriented trace export: `step<TAB>neuron<TAB>kind<TAB>details`.
pub fn render_trace(sys: &System, events: &[StepEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            ev.step,
            sys.neuron_name(ev.neuron),
            ev.kind.name(),
            ev.kind.details()
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(
        "step {step}: non-binary input of {count} spikes for neuron '{neuron}' \
         in a standard-mode classic system"
    )]
    NonBinaryInput {
        step: u64,
        neuron: String,
        count: u64,
    },
    #[error("expected {expected} input trains, got {got}")]
    InputArity { expected: usize, got: usize },
    #[error("max_steps must be positive")]
    ZeroMaxSteps,
    #[error("exploration exceeded the bound of {bound} distinct configurations")]
    StateBoundExceeded { bound: usize },
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub output_train: SpikeTrain,
    pub final_config: Configuration,
    pub steps_executed: u64,
    pub quiescent: bool,
    /// Maximum total spike count observed in any configuration, including
    /// the post-input moment inside each step. Pending emissions count as
    /// already consumed.
    pub peak_spikes: u64,
    pub trace: Vec<StepEvent>,
}

/// Space metric accessor: the maximum total spike count of the run.
pub fn peak_spikes(result: &RunResult) -> u64 {
    result.peak_spikes
}

/// Rules applicable to a neuron holding `spikes` at `step`, given the fire
/// time of a pending rule if one exists. Empty while the neuron is closed,
/// which includes the step it fires at: selection resumes one step later.
pub fn applicable_rules(
    spikes: u64,
    pending_fire_at: Option<u64>,
    rules: &[RuleDef],
    step: u64,
) -> Vec<usize> {
    if matches!(pending_fire_at, Some(f) if f >= step) {
        return Vec::new();
    }
    applicable_of(spikes, rules)
}

fn applicable_of(spikes: u64, rules: &[RuleDef]) -> Vec<usize> {
    rules
        .iter()
        .enumerate()
        .filter(|(_, r)| spikes >= r.consume && r.guard.contains(spikes))
        .map(|(i, _)| i)
        .collect()
}

// Working state of one step; explore clones it mid-way to branch on rule
// choices without redoing phases 1 and 2.
#[derive(Clone)]
struct StepCtx<'a> {
    sys: &'a System,
    cfg: Configuration,
    now: u64,
    deliver: Vec<u64>,
    env_out: u64,
    fired_now: Vec<bool>,
    events: Vec<StepEvent>,
}

impl<'a> StepCtx<'a> {
    fn new(sys: &'a System, cfg: Configuration) -> Self {
        let n = sys.neurons.len();
        let now = cfg.step;
        StepCtx {
            sys,
            cfg,
            now,
            deliver: vec![0; n],
            env_out: 0,
            fired_now: vec![false; n],
            events: Vec::new(),
        }
    }

    fn event(&mut self, neuron: usize, kind: EventKind) {
        self.events.push(StepEvent {
            step: self.now,
            neuron,
            kind,
        });
    }

    fn phase_inputs(&mut self, inputs: &[u64]) -> Result<(), EngineError> {
        if inputs.len() != self.sys.inputs.len() {
            return Err(EngineError::InputArity {
                expected: self.sys.inputs.len(),
                got: inputs.len(),
            });
        }
        for (slot, &idx) in self.sys.inputs.iter().enumerate() {
            let count = inputs[slot];
            if count == 0 {
                continue;
            }
            if count > 1 && self.sys.mode == Mode::Standard && self.sys.kind == SystemKind::Classic
            {
                return Err(EngineError::NonBinaryInput {
                    step: self.now,
                    neuron: self.sys.neuron_name(idx).to_string(),
                    count,
                });
            }
            if self.cfg.is_closed(idx, self.now) {
                self.event(idx, EventKind::InputDroppedClosed { count });
            } else {
                self.cfg.spikes[idx] += count;
                self.event(idx, EventKind::InputReceived { count });
            }
        }
        Ok(())
    }

    fn phase_mature(&mut self) {
        for idx in 0..self.sys.neurons.len() {
            let fire = match &self.cfg.pending[idx] {
                Some(p) if p.fire_at == self.now => p.emit,
                _ => continue,
            };
            self.cfg.pending[idx] = None;
            self.fired_now[idx] = true;
            self.emit_from(idx, fire);
            self.event(idx, EventKind::Fired { emitted: fire });
        }
    }

    fn emit_from(&mut self, idx: usize, amount: u64) {
        for &tgt in &self.sys.outgoing[idx] {
            self.deliver[tgt] += amount;
        }
        if self.sys.output == Some(idx) {
            self.env_out += amount;
        }
    }

    /// Neurons that must select a rule this step, with their options.
    fn decision_sets(&self) -> Vec<(usize, Vec<usize>)> {
        let mut out = Vec::new();
        for idx in 0..self.sys.neurons.len() {
            if self.cfg.pending[idx].is_some() || self.fired_now[idx] {
                continue;
            }
            let app = applicable_of(self.cfg.spikes[idx], &self.sys.neurons[idx].rules);
            if !app.is_empty() {
                out.push((idx, app));
            }
        }
        out
    }

    fn apply_choice(&mut self, idx: usize, rule_idx: usize) {
        let rule = &self.sys.neurons[idx].rules[rule_idx];
        let content = self.cfg.spikes[idx];
        let (consumed, emit) = match self.sys.mode {
            Mode::Standard => (rule.consume, rule.produce),
            Mode::Exhaustive => {
                let times = content / rule.consume;
                (rule.consume * times, rule.produce * times)
            }
        };
        let (produce, delay) = (rule.produce, rule.delay);
        self.cfg.spikes[idx] -= consumed;
        self.event(
            idx,
            EventKind::RuleSelected {
                rule: rule_idx,
                consumed,
                fire_at: self.now + delay,
            },
        );
        if delay == 0 {
            if produce == 0 {
                self.event(idx, EventKind::Forgot { count: consumed });
            } else {
                self.emit_from(idx, emit);
                self.event(idx, EventKind::Fired { emitted: emit });
            }
        } else {
            self.cfg.pending[idx] = Some(Pending {
                emit,
                fire_at: self.now + delay,
            });
        }
    }

    fn phase_select(&mut self, chooser: &mut Chooser) {
        for (idx, options) in self.decision_sets() {
            let picked = options[chooser.pick(options.len())];
            self.apply_choice(idx, picked);
        }
    }

    fn finish(mut self) -> (Configuration, u64, Vec<StepEvent>) {
        for idx in 0..self.sys.neurons.len() {
            if self.deliver[idx] == 0 {
                continue;
            }
            // A pending present here was scheduled for a later step, so the
            // neuron is closed and the delivery is lost.
            if self.cfg.pending[idx].is_none() {
                self.cfg.spikes[idx] += self.deliver[idx];
            }
        }
        self.cfg.step = self.now + 1;
        let sys = self.sys;
        self.events.sort_by(|a, b| {
            (sys.neuron_name(a.neuron), a.kind.rank())
                .cmp(&(sys.neuron_name(b.neuron), b.kind.rank()))
        });
        (self.cfg, self.env_out, self.events)
    }
}

/// Execute one synchronous step. `inputs` carries one count per declared
/// input neuron. Returns the successor configuration, the spikes the output
/// neuron sent to the environment, and the step's events.
pub fn step(
    sys: &System,
    config: &Configuration,
    inputs: &[u64],
    chooser: &mut Chooser,
) -> Result<(Configuration, u64, Vec<StepEvent>), EngineError> {
    let mut ctx = StepCtx::new(sys, config.clone());
    ctx.phase_inputs(inputs)?;
    ctx.phase_mature();
    ctx.phase_select(chooser);
    Ok(ctx.finish())
}

fn is_quiescent(sys: &System, cfg: &Configuration, trains: &[SpikeTrain]) -> bool {
    if cfg.pending.iter().any(|p| p.is_some()) {
        return false;
    }
    if trains.iter().any(|t| (t.len() as u64) > cfg.step) {
        return false;
    }
    sys.neurons
        .iter()
        .enumerate()
        .all(|(i, n)| applicable_of(cfg.spikes[i], &n.rules).is_empty())
}

/// Run a system on one input train per declared input neuron, feeding train
/// position `t` at step `t`. Stops at `max_steps` or as soon as the system
/// is quiescent: all trains exhausted, no pending firings, no applicable
/// rule anywhere.
pub fn run(
    sys: &System,
    input_trains: &[SpikeTrain],
    max_steps: u64,
    chooser: &mut Chooser,
) -> Result<RunResult, EngineError> {
    if max_steps == 0 {
        return Err(EngineError::ZeroMaxSteps);
    }
    if input_trains.len() != sys.inputs.len() {
        return Err(EngineError::InputArity {
            expected: sys.inputs.len(),
            got: input_trains.len(),
        });
    }

    let mut cfg = sys.initial_configuration();
    let mut peak = cfg.total_spikes();
    let mut output_train = SpikeTrain::new();
    let mut trace = Vec::new();
    let mut quiescent = false;

    while cfg.step < max_steps {
        if is_quiescent(sys, &cfg, input_trains) {
            quiescent = true;
            break;
        }
        let t = cfg.step;
        let inputs: Vec<u64> = input_trains.iter().map(|tr| tr.get(t)).collect();
        let mut ctx = StepCtx::new(sys, cfg);
        ctx.phase_inputs(&inputs)?;
        peak = peak.max(ctx.cfg.total_spikes());
        ctx.phase_mature();
        ctx.phase_select(chooser);
        let (next, out, events) = ctx.finish();
        peak = peak.max(next.total_spikes());
        output_train.push(out);
        trace.extend(events);
        cfg = next;
    }
    if !quiescent {
        quiescent = is_quiescent(sys, &cfg, input_trains);
    }

    Ok(RunResult {
        steps_executed: cfg.step,
        output_train,
        final_config: cfg,
        quiescent,
        peak_spikes: peak,
        trace,
    })
}

/// Enumerate every output train reachable within `max_steps` over all
/// nondeterministic rule choices. Each train appears exactly once. Errors
/// out when the number of distinct visited configurations (pendings taken
/// relative to the current step) exceeds `state_bound`.
pub fn explore(
    sys: &System,
    input_trains: &[SpikeTrain],
    max_steps: u64,
    state_bound: usize,
) -> Result<BTreeSet<SpikeTrain>, EngineError> {
    if max_steps == 0 {
        return Err(EngineError::ZeroMaxSteps);
    }
    if input_trains.len() != sys.inputs.len() {
        return Err(EngineError::InputArity {
            expected: sys.inputs.len(),
            got: input_trains.len(),
        });
    }

    let mut results = BTreeSet::new();
    let mut distinct = HashSet::new();
    let mut stack = vec![(sys.initial_configuration(), SpikeTrain::new())];

    while let Some((cfg, prefix)) = stack.pop() {
        if distinct.insert(cfg.relative_key()) && distinct.len() > state_bound {
            return Err(EngineError::StateBoundExceeded { bound: state_bound });
        }
        if cfg.step >= max_steps || is_quiescent(sys, &cfg, input_trains) {
            results.insert(prefix);
            continue;
        }
        let t = cfg.step;
        let inputs: Vec<u64> = input_trains.iter().map(|tr| tr.get(t)).collect();
        let mut pre = StepCtx::new(sys, cfg);
        pre.phase_inputs(&inputs)?;
        pre.phase_mature();
        let decisions = pre.decision_sets();

        // Mixed-radix walk over the per-neuron choice product. Distinct
        // choices often land in the same state; deduplicate successors so
        // symmetric rules do not multiply paths.
        let mut successors: HashSet<(Configuration, u64)> = HashSet::new();
        let mut counter = vec![0usize; decisions.len()];
        loop {
            let mut ctx = pre.clone();
            for (d, (idx, options)) in counter.iter().zip(&decisions) {
                ctx.apply_choice(*idx, options[*d]);
            }
            let (next, out, _) = ctx.finish();
            successors.insert((next, out));

            let mut digit = 0;
            loop {
                if digit == counter.len() {
                    break;
                }
                counter[digit] += 1;
                if counter[digit] < decisions[digit].1.len() {
                    break;
                }
                counter[digit] = 0;
                digit += 1;
            }
            if digit == counter.len() {
                break;
            }
        }
        for (next, out) in successors {
            stack.push((next, prefix.appended(out)));
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::parse_spike_expr;

    fn rule(guard: &str, consume: u64, produce: u64, delay: u64) -> RuleDef {
        RuleDef::new(parse_spike_expr(guard).unwrap(), consume, produce, delay).unwrap()
    }

    fn single(name: &str, spikes: u64, rules: Vec<RuleDef>) -> SystemDef {
        SystemDef {
            name: "test".into(),
            mode: Some(Mode::Standard),
            declared_kind: None,
            neurons: vec![NeuronDef {
                name: name.into(),
                initial_spikes: spikes,
                rules,
            }],
            synapses: vec![],
            inputs: vec![],
            output: Some(name.into()),
        }
    }

    #[test]
    fn rejects_self_synapse() {
        let mut def = single("n1", 0, vec![]);
        def.synapses.push(("n1".into(), "n1".into()));
        assert_eq!(
            validate_system(def).err(),
            Some(ValidateError::SelfSynapse("n1".into()))
        );
    }

    #[test]
    fn rejects_duplicate_neuron() {
        let mut def = single("n1", 0, vec![]);
        def.neurons.push(NeuronDef {
            name: "n1".into(),
            initial_spikes: 0,
            rules: vec![],
        });
        assert!(matches!(
            validate_system(def),
            Err(ValidateError::DuplicateNeuron(_))
        ));
    }

    #[test]
    fn rejects_unknown_references() {
        let mut def = single("n1", 0, vec![]);
        def.output = Some("nope".into());
        assert!(matches!(
            validate_system(def),
            Err(ValidateError::UnknownNeuron { .. })
        ));
    }

    #[test]
    fn classic_forgetting_overlap_is_an_error() {
        let def = single("n1", 0, vec![rule("a", 1, 1, 0), rule("a", 1, 0, 0)]);
        assert_eq!(
            validate_system(def).err(),
            Some(ValidateError::ForgettingOverlap {
                neuron: "n1".into(),
                erased: 1
            })
        );
    }

    #[test]
    fn extended_forgetting_overlap_is_a_warning() {
        let mut def = single("n1", 0, vec![rule("a", 1, 1, 0), rule("a", 1, 0, 0)]);
        def.declared_kind = Some(SystemKind::Extended);
        let sys = validate_system(def).unwrap();
        assert_eq!(sys.warnings.len(), 1);
    }

    #[test]
    fn declared_classic_with_extended_rules_is_rejected() {
        let mut def = single("n1", 0, vec![rule("a^3", 3, 2, 0)]);
        def.declared_kind = Some(SystemKind::Classic);
        assert!(matches!(
            validate_system(def),
            Err(ValidateError::DeclaredClassicButExtended(_))
        ));
    }

    #[test]
    fn amplifying_rules_validate_with_a_warning() {
        let sys = validate_system(single("n1", 0, vec![rule("a", 1, 3, 0)])).unwrap();
        assert_eq!(sys.warnings.len(), 1);
        assert!(sys.warnings[0].contains("produces 3"));
        let sound = validate_system(single("n1", 0, vec![rule("a^3", 3, 2, 0)])).unwrap();
        assert!(sound.warnings.is_empty());
    }

    #[test]
    fn rule_forms_classify() {
        assert_eq!(rule("a", 1, 1, 0).form(), RuleForm::ClassicFiring);
        assert_eq!(rule("a^2", 2, 0, 0).form(), RuleForm::PlainForgetting);
        // Partial erasure is the adder's generalized rule, not plain form.
        assert_eq!(rule("a^2", 1, 0, 0).form(), RuleForm::Extended);
        assert_eq!(rule("a^3", 3, 2, 0).form(), RuleForm::Extended);
    }

    #[test]
    fn applicable_respects_guard_and_threshold() {
        let rules = vec![rule("a^2", 1, 0, 0), rule("a^3", 2, 1, 0)];
        assert_eq!(applicable_rules(2, None, &rules, 0), vec![0]);
        assert_eq!(applicable_rules(0, None, &rules, 0), Vec::<usize>::new());
        assert_eq!(applicable_rules(3, None, &rules, 0), vec![1]);
    }

    #[test]
    fn applicable_empty_while_closed() {
        let rules = vec![rule("a", 1, 1, 0)];
        assert!(applicable_rules(1, Some(5), &rules, 3).is_empty());
        assert!(applicable_rules(1, Some(5), &rules, 5).is_empty());
        assert_eq!(applicable_rules(1, Some(5), &rules, 6), vec![0]);
    }

    #[test]
    fn single_firing_then_quiescent() {
        let sys = validate_system(single("n1", 1, vec![rule("a", 1, 1, 0)])).unwrap();
        let res = run(&sys, &[], 10, &mut Chooser::first_declared()).unwrap();
        assert_eq!(res.output_train, SpikeTrain::from_bits(&[1]));
        assert_eq!(res.steps_executed, 1);
        assert!(res.quiescent);
        assert_eq!(res.peak_spikes, 1);
    }

    #[test]
    fn no_rules_quiescent_immediately_with_initial_spikes() {
        let sys = validate_system(single("n1", 3, vec![])).unwrap();
        let res = run(&sys, &[], 10, &mut Chooser::first_declared()).unwrap();
        assert_eq!(res.steps_executed, 0);
        assert!(res.quiescent);
        assert_eq!(peak_spikes(&res), 3);
        assert!(res.output_train.is_empty());
    }

    #[test]
    fn empty_system_runs_to_zero_peak() {
        let def = SystemDef {
            name: "empty".into(),
            ..SystemDef::default()
        };
        let sys = validate_system(def).unwrap();
        let res = run(&sys, &[], 5, &mut Chooser::first_declared()).unwrap();
        assert_eq!(res.peak_spikes, 0);
        assert!(res.quiescent);
    }

    #[test]
    fn delay_contract_hand_trace() {
        // One neuron, one spike, `a -> a ; 3`: the rule is selected at step
        // 0, the neuron stays closed through steps 0..2, fires at step 3,
        // and could select again at step 4.
        let sys = validate_system(single("n1", 1, vec![rule("a", 1, 1, 3)])).unwrap();
        let mut cfg = sys.initial_configuration();
        let mut chooser = Chooser::first_declared();

        let (c1, out0, ev0) = step(&sys, &cfg, &[], &mut chooser).unwrap();
        assert_eq!(out0, 0);
        assert!(matches!(
            ev0[0].kind,
            EventKind::RuleSelected { fire_at: 3, .. }
        ));
        assert_eq!(
            c1.pending[0],
            Some(Pending {
                emit: 1,
                fire_at: 3
            })
        );
        cfg = c1;

        for expect_step in 1..=2u64 {
            assert!(cfg.is_closed(0, expect_step));
            let (c, out, ev) = step(&sys, &cfg, &[], &mut chooser).unwrap();
            assert_eq!(out, 0);
            assert!(ev.is_empty());
            cfg = c;
        }

        assert!(!cfg.is_closed(0, 3));
        let (c4, out3, ev3) = step(&sys, &cfg, &[], &mut chooser).unwrap();
        assert_eq!(out3, 1);
        assert!(matches!(ev3[0].kind, EventKind::Fired { emitted: 1 }));
        assert_eq!(c4.pending[0], None);
        assert_eq!(c4.spikes[0], 0);
    }

    #[test]
    fn closed_input_neuron_drops_spikes() {
        let mut def = single("n1", 1, vec![rule("a", 1, 1, 4)]);
        def.inputs = vec!["n1".into()];
        let sys = validate_system(def).unwrap();
        let trains = [SpikeTrain::from_bits(&[0, 1, 1])];
        let res = run(&sys, &trains, 10, &mut Chooser::first_declared()).unwrap();
        let drops: Vec<_> = res
            .trace
            .iter()
            .filter(|e| matches!(e.kind, EventKind::InputDroppedClosed { .. }))
            .collect();
        assert_eq!(drops.len(), 2);
        // Both inputs were lost, so after firing the neuron is empty.
        assert_eq!(res.final_config.spikes[0], 0);
    }

    #[test]
    fn input_received_at_fire_step_is_kept() {
        let mut def = single("n1", 1, vec![rule("a", 1, 1, 2)]);
        def.inputs = vec!["n1".into()];
        let sys = validate_system(def).unwrap();
        // Fire is scheduled for step 2; the input at position 2 arrives the
        // step the neuron reopens and must be received.
        let trains = [SpikeTrain::from_bits(&[0, 0, 1])];
        let res = run(&sys, &trains, 10, &mut Chooser::first_declared()).unwrap();
        assert!(res
            .trace
            .iter()
            .any(|e| e.step == 2 && matches!(e.kind, EventKind::InputReceived { count: 1 })));
        // That spike enables the rule again at step 3.
        assert_eq!(res.output_train.0, vec![0, 0, 1, 0, 0, 1]);
    }

    #[test]
    fn non_binary_input_rejected_in_standard_classic() {
        let mut def = single("n1", 0, vec![rule("a", 1, 1, 0)]);
        def.inputs = vec!["n1".into()];
        let sys = validate_system(def).unwrap();
        let trains = [SpikeTrain::from_bits(&[2])];
        assert!(matches!(
            run(&sys, &trains, 5, &mut Chooser::first_declared()),
            Err(EngineError::NonBinaryInput { .. })
        ));
    }

    #[test]
    fn exhaustive_mode_applies_rule_maximally() {
        // Content 2, rule consuming 1 producing 1: g = 2, emits 2.
        let mut def = single("n1", 2, vec![rule("a^2", 1, 1, 0)]);
        def.mode = Some(Mode::Exhaustive);
        let sys = validate_system(def).unwrap();
        let res = run(&sys, &[], 5, &mut Chooser::first_declared()).unwrap();
        assert_eq!(res.output_train.0, vec![2]);
        assert_eq!(res.final_config.spikes[0], 0);
    }

    #[test]
    fn exhaustive_mode_keeps_remainder() {
        let mut def = single("n1", 7, vec![rule("a^7", 3, 2, 0)]);
        def.mode = Some(Mode::Exhaustive);
        let sys = validate_system(def).unwrap();
        let res = run(&sys, &[], 5, &mut Chooser::first_declared()).unwrap();
        // 7 = 3*2 + 1: consumes 6, emits 2*2 = 4, keeps 1.
        assert_eq!(res.output_train.0, vec![4]);
        assert_eq!(res.final_config.spikes[0], 1);
    }

    #[test]
    fn explore_branching_neuron_two_trains() {
        let mut def = single("n1", 1, vec![rule("a", 1, 1, 0), rule("a", 1, 0, 0)]);
        def.declared_kind = Some(SystemKind::Extended);
        let sys = validate_system(def).unwrap();
        let trains = explore(&sys, &[], 8, 1000).unwrap();
        let want: BTreeSet<SpikeTrain> = [SpikeTrain::from_bits(&[0]), SpikeTrain::from_bits(&[1])]
            .into_iter()
            .collect();
        assert_eq!(trains, want);
    }

    #[test]
    fn explore_deterministic_system_matches_run() {
        let sys = validate_system(single("n1", 1, vec![rule("a", 1, 1, 0)])).unwrap();
        let trains = explore(&sys, &[], 8, 1000).unwrap();
        let res = run(&sys, &[], 8, &mut Chooser::first_declared()).unwrap();
        assert_eq!(trains.len(), 1);
        assert!(trains.contains(&res.output_train));
    }

    #[test]
    fn explore_state_bound_errors() {
        let mut def = single("n1", 1, vec![rule("a", 1, 1, 0), rule("a", 1, 0, 0)]);
        def.declared_kind = Some(SystemKind::Extended);
        let sys = validate_system(def).unwrap();
        assert!(matches!(
            explore(&sys, &[], 8, 1),
            Err(EngineError::StateBoundExceeded { bound: 1 })
        ));
    }

    #[test]
    fn zero_max_steps_is_an_error() {
        let sys = validate_system(single("n1", 0, vec![])).unwrap();
        assert!(matches!(
            run(&sys, &[], 0, &mut Chooser::first_declared()),
            Err(EngineError::ZeroMaxSteps)
        ));
        assert!(matches!(
            explore(&sys, &[], 0, 10),
            Err(EngineError::ZeroMaxSteps)
        ));
    }

    #[test]
    fn trace_lines_are_tab_separated_and_ordered() {
        let mut def = single("n1", 0, vec![rule("a", 1, 1, 0)]);
        def.inputs = vec!["n1".into()];
        let sys = validate_system(def).unwrap();
        let trains = [SpikeTrain::from_bits(&[1])];
        let res = run(&sys, &trains, 4, &mut Chooser::first_declared()).unwrap();
        let text = render_trace(&sys, &res.trace);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            vec![
                "0\tn1\tinput-received\tcount=1",
                "0\tn1\trule-selected\trule=0 consumed=1 fire_at=0",
                "0\tn1\tfired\temitted=1",
            ]
        );
    }
}
