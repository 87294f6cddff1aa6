//! Register machines: labeled ADD/SUB/HALT programs over non-negative
//! registers, used as the reference computation model and as the job
//! bodies the scheduler executes.
//!
//! Text format, one instruction per line, `#` comments:
//!
//! ```text
//! l0: ADD 1 l1        # one target: deterministic
//! l1: ADD 1 l2 l3     # two targets: nondeterministic choice
//! l2: SUB 1 l2 l3     # positive branch, zero branch
//! l3: HALT
//! ```
//!
//! The first instruction is the start; registers are numbered from 1 and
//! register 1 carries the generated result.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::chooser::Chooser;

/// An instruction with resolved label indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instruction {
    /// Increment the register, then continue at one of the two targets.
    Add {
        reg: usize,
        targets: (usize, usize),
    },
    /// Decrement if positive and continue at `on_positive`, otherwise leave
    /// the register alone and continue at `on_zero`.
    Sub {
        reg: usize,
        on_positive: usize,
        on_zero: usize,
    },
    Halt,
}

/// An instruction as written, with label names still unresolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceInstruction {
    Add(usize, String, Option<String>),
    Sub(usize, String, String),
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate label '{0}'")]
    DuplicateLabel(String),
    #[error("instruction '{at}' references unknown label '{target}'")]
    DanglingLabel { at: String, target: String },
    #[error("the start instruction must be an ADD, '{0}' is not")]
    StartNotAdd(String),
    #[error("a machine needs exactly one HALT instruction")]
    HaltCountNotOne,
    #[error("register {reg} out of range 1..={max}")]
    RegisterOutOfRange { reg: usize, max: usize },
    #[error("machine is empty")]
    Empty,
    #[error("max_steps must be positive")]
    ZeroMaxSteps,
    #[error("cannot step a halted machine")]
    SteppedHalted,
    #[error("accepting mode needs a deterministic machine; '{0}' has a two-target ADD")]
    Nondeterministic(String),
    #[error("{got} initial registers supplied, machine has {max}")]
    TooManyRegisters { got: usize, max: usize },
}

/// A validated machine: register count, interned labels, start and halt
/// indices, one instruction per label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterMachine {
    pub register_count: usize,
    labels: Vec<String>,
    instructions: Vec<Instruction>,
    start: usize,
    halt: usize,
}

impl RegisterMachine {
    /// Build and validate a machine from labeled source instructions. The
    /// first instruction is the start and must be an ADD; exactly one HALT
    /// is required; every referenced label must exist and every register
    /// must lie in `1..=register_count`.
    pub fn new(
        register_count: usize,
        source: Vec<(String, SourceInstruction)>,
    ) -> Result<RegisterMachine, MachineError> {
        if source.is_empty() {
            return Err(MachineError::Empty);
        }
        let mut index = HashMap::new();
        for (i, (label, _)) in source.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(MachineError::DuplicateLabel(label.clone()));
            }
        }
        let resolve = |at: &str, target: &str| {
            index
                .get(target)
                .copied()
                .ok_or_else(|| MachineError::DanglingLabel {
                    at: at.to_string(),
                    target: target.to_string(),
                })
        };
        let check_reg = |reg: usize| {
            if reg == 0 || reg > register_count {
                Err(MachineError::RegisterOutOfRange {
                    reg,
                    max: register_count,
                })
            } else {
                Ok(reg)
            }
        };

        let mut instructions = Vec::with_capacity(source.len());
        let mut halt = None;
        for (label, instr) in &source {
            let resolved = match instr {
                SourceInstruction::Add(reg, a, b) => {
                    let first = resolve(label, a)?;
                    let second = match b {
                        Some(b) => resolve(label, b)?,
                        None => first,
                    };
                    Instruction::Add {
                        reg: check_reg(*reg)?,
                        targets: (first, second),
                    }
                }
                SourceInstruction::Sub(reg, pos, zero) => Instruction::Sub {
                    reg: check_reg(*reg)?,
                    on_positive: resolve(label, pos)?,
                    on_zero: resolve(label, zero)?,
                },
                SourceInstruction::Halt => {
                    if halt.replace(instructions.len()).is_some() {
                        return Err(MachineError::HaltCountNotOne);
                    }
                    Instruction::Halt
                }
            };
            instructions.push(resolved);
        }
        let halt = halt.ok_or(MachineError::HaltCountNotOne)?;
        if !matches!(instructions[0], Instruction::Add { .. }) {
            return Err(MachineError::StartNotAdd(source[0].0.clone()));
        }

        Ok(RegisterMachine {
            register_count,
            labels: source.into_iter().map(|(l, _)| l).collect(),
            instructions,
            start: 0,
            halt,
        })
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    pub fn start_label(&self) -> &str {
        &self.labels[self.start]
    }

    pub fn halt_label(&self) -> &str {
        &self.labels[self.halt]
    }

    pub fn instruction_count(&self) -> usize {
        self.instructions.len()
    }

    /// Every ADD has a single effective target.
    pub fn is_deterministic(&self) -> bool {
        self.instructions
            .iter()
            .all(|i| !matches!(i, Instruction::Add { targets: (a, b), .. } if a != b))
    }

    pub fn fresh_state(&self) -> MachineState {
        MachineState {
            registers: vec![0; self.register_count],
            current: self.start,
            steps: 0,
        }
    }
}

/// Register contents, current label, and the number of executed steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    pub registers: Vec<u64>,
    pub current: usize,
    pub steps: u64,
}

impl MachineState {
    pub fn is_halted(&self, machine: &RegisterMachine) -> bool {
        self.current == machine.halt
    }
}

/// Execute one instruction. ADD branches are resolved by the chooser; a
/// SUB on an empty register takes the zero branch without decrementing.
pub fn step_machine(
    machine: &RegisterMachine,
    state: &mut MachineState,
    chooser: &mut Chooser,
) -> Result<(), MachineError> {
    match machine.instructions[state.current] {
        Instruction::Halt => return Err(MachineError::SteppedHalted),
        Instruction::Add { reg, targets } => {
            state.registers[reg - 1] += 1;
            state.current = if targets.0 == targets.1 {
                targets.0
            } else {
                [targets.0, targets.1][chooser.pick(2)]
            };
        }
        Instruction::Sub {
            reg,
            on_positive,
            on_zero,
        } => {
            if state.registers[reg - 1] > 0 {
                state.registers[reg - 1] -= 1;
                state.current = on_positive;
            } else {
                state.current = on_zero;
            }
        }
    }
    state.steps += 1;
    Ok(())
}

/// Generating mode: start from empty registers, run until HALT, and return
/// register 1. `None` when the step budget runs out first.
pub fn run_generate(
    machine: &RegisterMachine,
    max_steps: u64,
    chooser: &mut Chooser,
) -> Result<Option<u64>, MachineError> {
    if max_steps == 0 {
        return Err(MachineError::ZeroMaxSteps);
    }
    let mut state = machine.fresh_state();
    while !state.is_halted(machine) {
        if state.steps >= max_steps {
            return Ok(None);
        }
        step_machine(machine, &mut state, chooser)?;
    }
    Ok(Some(state.registers[0]))
}

/// Accepting-mode verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptVerdict {
    Accepted,
    /// Halted, but registers were not all empty and strict mode was on.
    RejectedLeftover,
    /// The step budget ran out before the halt label.
    NotHalted,
}

impl AcceptVerdict {
    pub fn accepted(self) -> bool {
        self == AcceptVerdict::Accepted
    }
}

/// Accepting mode: load the given register contents, run deterministically,
/// and accept when the halt label is reached within the budget. With
/// `strict` the halting configuration must also have every register empty.
pub fn run_accept(
    machine: &RegisterMachine,
    initial_registers: &[u64],
    max_steps: u64,
    strict: bool,
) -> Result<AcceptVerdict, MachineError> {
    if max_steps == 0 {
        return Err(MachineError::ZeroMaxSteps);
    }
    if !machine.is_deterministic() {
        let culprit = machine
            .instructions
            .iter()
            .position(|i| matches!(i, Instruction::Add { targets: (a, b), .. } if a != b))
            .expect("nondeterministic machine has a two-target ADD");
        return Err(MachineError::Nondeterministic(
            machine.labels[culprit].clone(),
        ));
    }
    if initial_registers.len() > machine.register_count {
        return Err(MachineError::TooManyRegisters {
            got: initial_registers.len(),
            max: machine.register_count,
        });
    }
    let mut state = machine.fresh_state();
    state.registers[..initial_registers.len()].copy_from_slice(initial_registers);
    let mut chooser = Chooser::first_declared();
    while !state.is_halted(machine) {
        if state.steps >= max_steps {
            return Ok(AcceptVerdict::NotHalted);
        }
        step_machine(machine, &mut state, &mut chooser)?;
    }
    if strict && state.registers.iter().any(|&r| r > 0) {
        return Ok(AcceptVerdict::RejectedLeftover);
    }
    Ok(AcceptVerdict::Accepted)
}

/// Parse the text format. The register count is the largest register
/// mentioned (at least 1).
pub fn parse_machine(text: &str) -> Result<RegisterMachine, MachineError> {
    let mut source = Vec::new();
    let mut max_reg = 1usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| MachineError::Parse {
            line: line_no,
            message,
        };
        let (label, rest) = line
            .split_once(':')
            .ok_or_else(|| parse_err("missing ':' after label".into()))?;
        let label = label.trim();
        if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(parse_err(format!("invalid label '{label}'")));
        }
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        let reg_of = |tok: &str| {
            tok.parse::<usize>()
                .ok()
                .filter(|&r| r >= 1)
                .ok_or_else(|| parse_err(format!("invalid register '{tok}'")))
        };
        let instr = match tokens.as_slice() {
            ["ADD", reg, l2] => SourceInstruction::Add(reg_of(reg)?, l2.to_string(), None),
            ["ADD", reg, l2, l3] => {
                SourceInstruction::Add(reg_of(reg)?, l2.to_string(), Some(l3.to_string()))
            }
            ["SUB", reg, l2, l3] => {
                SourceInstruction::Sub(reg_of(reg)?, l2.to_string(), l3.to_string())
            }
            ["HALT"] => SourceInstruction::Halt,
            _ => return Err(parse_err(format!("unrecognized instruction '{rest}'"))),
        };
        if let SourceInstruction::Add(reg, ..) | SourceInstruction::Sub(reg, ..) = &instr {
            max_reg = max_reg.max(*reg);
        }
        source.push((label.to_string(), instr));
    }
    RegisterMachine::new(max_reg, source)
}

/// Canonical text; reparsing yields an equal machine. Deterministic ADDs
/// render with a single target.
pub fn render_machine(machine: &RegisterMachine) -> String {
    let mut out = String::new();
    for (idx, instr) in machine.instructions.iter().enumerate() {
        let label = &machine.labels[idx];
        match instr {
            Instruction::Add { reg, targets } => {
                if targets.0 == targets.1 {
                    writeln!(out, "{label}: ADD {reg} {}", machine.labels[targets.0]).unwrap();
                } else {
                    writeln!(
                        out,
                        "{label}: ADD {reg} {} {}",
                        machine.labels[targets.0], machine.labels[targets.1]
                    )
                    .unwrap();
                }
            }
            Instruction::Sub {
                reg,
                on_positive,
                on_zero,
            } => {
                writeln!(
                    out,
                    "{label}: SUB {reg} {} {}",
                    machine.labels[*on_positive], machine.labels[*on_zero]
                )
                .unwrap();
            }
            Instruction::Halt => writeln!(out, "{label}: HALT").unwrap(),
        }
    }
    out
}
