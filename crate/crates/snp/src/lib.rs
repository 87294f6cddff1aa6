//! Spiking neural P systems: a synchronous simulation engine, a text format,
//! a library of small computing devices built from them (binary addition,
//! equality checking, Boolean gates, sorting), a register machine model, and
//! a toy job scheduler that routes its ordering, accounting, and completion
//! checks through those devices.
//!
//! Neurons hold counts of identical spikes and fire by rules guarded with
//! unary regular expressions. Guards are compiled once to eventually
//! periodic sets ([`regex`]), so the engine's hot loop ([`engine`]) does
//! constant-time membership tests. Systems can be written and round-tripped
//! in a line-oriented format ([`lang`]) and explored exhaustively over
//! nondeterministic rule choices.

#![forbid(unsafe_code)]

pub mod chooser;
pub mod devices;
pub mod engine;
pub mod lang;
pub mod regex;
pub mod regmachine;
pub mod snpos;

pub use chooser::Chooser;
pub use engine::{
    applicable_rules, explore, peak_spikes, render_trace, run, step, validate_system,
    Configuration, EngineError, EventKind, Mode, NeuronDef, RuleDef, RunResult, SpikeTrain,
    StepEvent, System, SystemDef, SystemKind, ValidateError,
};
pub use regex::{compile, compile_with_cap, parse_spike_expr, SpikeExpr, SpikeSet};
