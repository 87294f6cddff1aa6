//! Text format for systems: parser, canonical renderer, and DOT export.
//!
//! The format is line-oriented:
//!
//! ```text
//! system <name>
//! mode (standard|exhaustive)
//! kind (classic|extended)          # optional, inferred from rules if absent
//! neuron <name> spikes <n>
//!   rule <guard> [/ a^<b>] -> (a^<p>|a|lambda) [; <d>]
//! syn <from> <to>
//! input <name> [<name> ...]
//! output <name>
//! ```
//!
//! `#` starts a comment. A rule without the `/ a^<b>` part is the bare
//! consume-all shorthand and is only valid for `a`/`a^k` guards. `lambda`
//! produces nothing, and a missing `; <d>` means zero delay.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::{
    validate_system, Mode, NeuronDef, RuleDef, RuleError, System, SystemDef, SystemKind,
    ValidateError,
};
use crate::regex::parse_spike_expr;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Validate(#[from] ValidateError),
}

fn syntax(line: usize, message: impl Into<String>) -> LangError {
    LangError::Syntax {
        line,
        message: message.into(),
    }
}

/// A parsed system plus the source line of each neuron declaration, kept
/// for diagnostics.
#[derive(Debug, Clone)]
pub struct SourceSystem {
    pub system: System,
    pub neuron_lines: BTreeMap<String, usize>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_count(token: &str, line: usize, what: &str) -> Result<u64, LangError> {
    token
        .parse::<u64>()
        .map_err(|_| syntax(line, format!("invalid {what} '{token}'")))
}

// `a` or `a^<n>`.
fn parse_spike_amount(token: &str, line: usize, what: &str) -> Result<u64, LangError> {
    if token == "a" {
        return Ok(1);
    }
    if let Some(exp) = token.strip_prefix("a^") {
        return parse_count(exp, line, what);
    }
    Err(syntax(
        line,
        format!("expected a or a^<n> for {what}, found '{token}'"),
    ))
}

fn parse_rule(body: &str, line: usize) -> Result<RuleDef, LangError> {
    let (lhs, rhs) = body
        .split_once("->")
        .ok_or_else(|| syntax(line, "rule is missing '->'"))?;

    let (guard_text, consume_text) = match lhs.split_once('/') {
        Some((g, c)) => (g.trim(), Some(c.trim())),
        None => (lhs.trim(), None),
    };
    let guard = parse_spike_expr(guard_text).map_err(|e| syntax(line, e.to_string()))?;
    let consume = match consume_text {
        Some(tok) => parse_spike_amount(tok, line, "consume amount")?,
        None => guard.as_exact_power().ok_or_else(|| {
            syntax(
                line,
                "a rule with a non-power guard needs an explicit '/ a^<b>' consume part",
            )
        })?,
    };

    let (produce_text, delay_text) = match rhs.split_once(';') {
        Some((p, d)) => (p.trim(), Some(d.trim())),
        None => (rhs.trim(), None),
    };
    let produce = if produce_text == "lambda" {
        0
    } else {
        parse_spike_amount(produce_text, line, "produce amount")?
    };
    let delay = match delay_text {
        Some(tok) => parse_count(tok, line, "delay")?,
        None => 0,
    };

    RuleDef::new(guard, consume, produce, delay).map_err(|e| match e {
        RuleError::ZeroConsume => syntax(line, "rule must consume at least one spike"),
        RuleError::Guard(g) => syntax(line, g.to_string()),
    })
}

/// Parse and validate a system source. Guards are compiled along the way,
/// so the result is ready to run.
pub fn parse_system(text: &str) -> Result<SourceSystem, LangError> {
    let mut def = SystemDef::default();
    let mut neuron_lines = BTreeMap::new();
    let mut saw_system = false;
    let mut current_neuron: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (head, rest) = match line.split_once(char::is_whitespace) {
            Some((h, r)) => (h, r.trim()),
            None => (line, ""),
        };
        match head {
            "system" => {
                if saw_system {
                    return Err(syntax(line_no, "duplicate 'system' line"));
                }
                if !is_identifier(rest) {
                    return Err(syntax(line_no, format!("invalid system name '{rest}'")));
                }
                def.name = rest.to_string();
                saw_system = true;
            }
            "mode" => {
                def.mode = Some(match rest {
                    "standard" => Mode::Standard,
                    "exhaustive" => Mode::Exhaustive,
                    other => {
                        return Err(syntax(line_no, format!("unknown mode '{other}'")));
                    }
                });
            }
            "kind" => {
                def.declared_kind = Some(match rest {
                    "classic" => SystemKind::Classic,
                    "extended" => SystemKind::Extended,
                    other => {
                        return Err(syntax(line_no, format!("unknown kind '{other}'")));
                    }
                });
            }
            "neuron" => {
                let mut parts = rest.split_whitespace();
                let name = parts.next().unwrap_or("");
                if !is_identifier(name) {
                    return Err(syntax(line_no, format!("invalid neuron name '{name}'")));
                }
                if parts.next() != Some("spikes") {
                    return Err(syntax(line_no, "expected 'spikes <n>' after neuron name"));
                }
                let count = parse_count(parts.next().unwrap_or(""), line_no, "spike count")?;
                if parts.next().is_some() {
                    return Err(syntax(line_no, "trailing tokens after neuron declaration"));
                }
                if neuron_lines.contains_key(name) {
                    return Err(syntax(line_no, format!("duplicate neuron name '{name}'")));
                }
                neuron_lines.insert(name.to_string(), line_no);
                def.neurons.push(NeuronDef {
                    name: name.to_string(),
                    initial_spikes: count,
                    rules: Vec::new(),
                });
                current_neuron = Some(def.neurons.len() - 1);
            }
            "rule" => {
                let target = current_neuron
                    .ok_or_else(|| syntax(line_no, "rule outside of a neuron declaration"))?;
                def.neurons[target].rules.push(parse_rule(rest, line_no)?);
            }
            "syn" => {
                let mut parts = rest.split_whitespace();
                let (from, to) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(f), Some(t), None) => (f, t),
                    _ => return Err(syntax(line_no, "expected 'syn <from> <to>'")),
                };
                def.synapses.push((from.to_string(), to.to_string()));
            }
            "input" => {
                if rest.is_empty() {
                    return Err(syntax(line_no, "input line needs at least one neuron"));
                }
                def.inputs.extend(rest.split_whitespace().map(String::from));
            }
            "output" => {
                if def.output.is_some() {
                    return Err(syntax(line_no, "duplicate 'output' line"));
                }
                if !is_identifier(rest) {
                    return Err(syntax(line_no, format!("invalid output name '{rest}'")));
                }
                def.output = Some(rest.to_string());
            }
            other => {
                return Err(syntax(line_no, format!("unknown directive '{other}'")));
            }
        }
    }

    if !saw_system {
        return Err(syntax(1, "missing 'system <name>' line"));
    }
    let system = validate_system(def)?;
    Ok(SourceSystem {
        system,
        neuron_lines,
    })
}

fn render_rule(rule: &RuleDef) -> String {
    let mut out = String::new();
    write!(out, "{}", rule.guard_expr).unwrap();
    if !rule.is_bare() {
        write!(out, " / a^{}", rule.consume).unwrap();
    }
    match rule.produce {
        0 => out.push_str(" -> lambda"),
        1 => out.push_str(" -> a"),
        p => write!(out, " -> a^{p}").unwrap(),
    }
    if rule.delay > 0 {
        write!(out, " ; {}", rule.delay).unwrap();
    }
    out
}

/// Canonical text for a validated system; parsing it back yields a
/// structurally equal system.
pub fn render_system(sys: &System) -> String {
    let mut out = String::new();
    writeln!(out, "system {}", sys.name).unwrap();
    writeln!(out, "mode {}", sys.mode).unwrap();
    // The kind line is only needed when the rules alone would infer the
    // other classification.
    let inferred_extended = sys
        .neurons
        .iter()
        .flat_map(|n| &n.rules)
        .any(|r| r.form() == crate::engine::RuleForm::Extended);
    if sys.kind == SystemKind::Extended && !inferred_extended {
        writeln!(out, "kind extended").unwrap();
    }
    for neuron in &sys.neurons {
        writeln!(
            out,
            "neuron {} spikes {}",
            neuron.name, neuron.initial_spikes
        )
        .unwrap();
        for rule in &neuron.rules {
            writeln!(out, "  rule {}", render_rule(rule)).unwrap();
        }
    }
    for &(from, to) in &sys.synapses {
        writeln!(out, "syn {} {}", sys.neuron_name(from), sys.neuron_name(to)).unwrap();
    }
    if !sys.inputs.is_empty() {
        let names: Vec<&str> = sys.inputs.iter().map(|&i| sys.neuron_name(i)).collect();
        writeln!(out, "input {}", names.join(" ")).unwrap();
    }
    if let Some(output) = sys.output {
        writeln!(out, "output {}", sys.neuron_name(output)).unwrap();
    }
    out
}

/// DOT graph of the topology: one node per neuron in declaration order, one
/// edge per synapse. Input neurons render as invhouse, the output neuron as
/// doublecircle, an input-output neuron as doubleoctagon.
pub fn export_dot(sys: &System) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {} {{", sys.name).unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    for (idx, neuron) in sys.neurons.iter().enumerate() {
        let is_input = sys.inputs.contains(&idx);
        let is_output = sys.output == Some(idx);
        let shape = match (is_input, is_output) {
            (true, true) => "doubleoctagon",
            (true, false) => "invhouse",
            (false, true) => "doublecircle",
            (false, false) => "circle",
        };
        writeln!(
            out,
            "  \"{}\" [shape={shape}, label=\"{}\\n{}\"];",
            neuron.name, neuron.name, neuron.initial_spikes
        )
        .unwrap();
    }
    for &(from, to) in &sys.synapses {
        writeln!(
            out,
            "  \"{}\" -> \"{}\";",
            sys.neuron_name(from),
            sys.neuron_name(to)
        )
        .unwrap();
    }
    writeln!(out, "}}").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ADDER: &str = "\
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

    #[test]
    fn parses_the_adder_source() {
        let src = parse_system(ADDER).unwrap();
        let sys = &src.system;
        assert_eq!(sys.neurons.len(), 3);
        assert_eq!(sys.synapses.len(), 2);
        assert_eq!(sys.inputs.len(), 2);
        assert_eq!(sys.mode, Mode::Standard);
        assert_eq!(sys.kind, SystemKind::Extended);
        assert_eq!(src.neuron_lines["add"], 7);
    }

    #[test]
    fn mode_flag_is_plumbed() {
        let src = "system t\nmode exhaustive\nneuron n spikes 0\noutput n\n";
        assert_eq!(parse_system(src).unwrap().system.mode, Mode::Exhaustive);
    }

    #[test]
    fn duplicate_neuron_is_rejected_with_line() {
        let src = "system t\nneuron n spikes 0\nneuron n spikes 1\n";
        match parse_system(src) {
            Err(LangError::Syntax { line: 3, message }) => {
                assert!(message.contains("duplicate neuron"));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn bare_rule_requires_power_guard() {
        let src = "system t\nneuron n spikes 0\n  rule a(aa)* -> a\n";
        assert!(matches!(
            parse_system(src),
            Err(LangError::Syntax { line: 3, .. })
        ));
        let ok = "system t\nneuron n spikes 0\n  rule a(aa)* / a^1 -> a\n";
        assert!(parse_system(ok).is_ok());
    }

    #[test]
    fn rule_with_delay_and_lambda() {
        let src = "system t\nneuron n spikes 0\n  rule a^4 -> lambda\n  rule a^2 -> a ; 3\n";
        let sys = parse_system(src).unwrap().system;
        let rules = &sys.neurons[0].rules;
        assert_eq!(
            (rules[0].consume, rules[0].produce, rules[0].delay),
            (4, 0, 0)
        );
        assert_eq!(
            (rules[1].consume, rules[1].produce, rules[1].delay),
            (2, 1, 3)
        );
    }

    #[test]
    fn adder_round_trips() {
        let sys = parse_system(ADDER).unwrap().system;
        let rendered = render_system(&sys);
        let reparsed = parse_system(&rendered).unwrap().system;
        assert!(sys.same_structure(&reparsed));
    }

    #[test]
    fn render_emits_kind_line_only_when_needed() {
        let src = "system t\nkind extended\nneuron n spikes 1\n  rule a -> a\n  rule a -> lambda\noutput n\n";
        let sys = parse_system(src).unwrap().system;
        assert_eq!(sys.kind, SystemKind::Extended);
        let rendered = render_system(&sys);
        assert!(rendered.contains("kind extended"));
        let reparsed = parse_system(&rendered).unwrap().system;
        assert!(sys.same_structure(&reparsed));

        let adder = parse_system(ADDER).unwrap().system;
        assert!(!render_system(&adder).contains("kind"));
    }

    #[test]
    fn neuron_without_rules_renders_header_only() {
        let src = "system t\nneuron lone spikes 2\n";
        let sys = parse_system(src).unwrap().system;
        let rendered = render_system(&sys);
        assert!(rendered.contains("neuron lone spikes 2\n"));
        assert!(!rendered.contains("rule"));
        assert!(sys.same_structure(&parse_system(&rendered).unwrap().system));
    }

    #[test]
    fn dot_export_counts_and_stability() {
        let sys = parse_system(ADDER).unwrap().system;
        let dot = export_dot(&sys);
        assert_eq!(dot.matches("[shape=").count(), 3);
        assert_eq!(dot.matches(" -> ").count(), 2);
        assert_eq!(dot, export_dot(&sys));
    }

    #[test]
    fn dot_export_empty_system_is_header_only() {
        let sys = parse_system("system hollow\n").unwrap().system;
        let dot = export_dot(&sys);
        assert_eq!(dot, "digraph hollow {\n  rankdir=LR;\n}\n");
    }

    #[test]
    fn unknown_directive_is_an_error() {
        assert!(matches!(
            parse_system("system t\nneurons n spikes 0\n"),
            Err(LangError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let src = "# a file\nsystem t\n\n  # indented comment\nneuron n spikes 0 # trailing\n";
        assert!(parse_system(src).is_ok());
    }
}
