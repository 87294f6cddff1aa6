//! Independent oracles.
//!
//! The guard oracle builds its own epsilon-NFA from the expression tree and
//! answers membership by stepping the subset construction, with no cycle
//! detection and nothing shared with the compiled eventually-periodic form.
//! A second route computes the set of matchable lengths bottom-up as a
//! bitset. The machine oracle interprets register machine source text
//! directly, bypassing the library's parser and state types.

use std::collections::HashMap;

use snp::SpikeExpr;

/// Epsilon-NFA over the one-letter alphabet, built naively.
pub struct OracleNfa {
    eps: Vec<Vec<usize>>,
    step: Vec<Vec<usize>>,
    start: usize,
    accept: usize,
}

fn build_into(nfa: &mut OracleNfa, expr: &SpikeExpr) -> (usize, usize) {
    let mut fresh = || {
        nfa.eps.push(Vec::new());
        nfa.step.push(Vec::new());
        nfa.eps.len() - 1
    };
    match expr {
        SpikeExpr::Atom => {
            let a = fresh();
            let b = fresh();
            nfa.step[a].push(b);
            (a, b)
        }
        SpikeExpr::Power(base, k) => {
            let entry = fresh();
            let mut exit = entry;
            for _ in 0..*k {
                let (s, t) = build_into(nfa, base);
                nfa.eps[exit].push(s);
                exit = t;
            }
            (entry, exit)
        }
        SpikeExpr::Concat(l, r) => {
            let (ls, lt) = build_into(nfa, l);
            let (rs, rt) = build_into(nfa, r);
            nfa.eps[lt].push(rs);
            (ls, rt)
        }
        SpikeExpr::Union(l, r) => {
            let entry = fresh();
            let exit = fresh();
            let (ls, lt) = build_into(nfa, l);
            let (rs, rt) = build_into(nfa, r);
            nfa.eps[entry].push(ls);
            nfa.eps[entry].push(rs);
            nfa.eps[lt].push(exit);
            nfa.eps[rt].push(exit);
            (entry, exit)
        }
        SpikeExpr::Star(base) => {
            let hub = fresh();
            let (s, t) = build_into(nfa, base);
            nfa.eps[hub].push(s);
            nfa.eps[t].push(hub);
            (hub, hub)
        }
        SpikeExpr::Plus(base) => {
            let (s, t) = build_into(nfa, base);
            nfa.eps[t].push(s);
            (s, t)
        }
    }
}

pub fn oracle_nfa(expr: &SpikeExpr) -> OracleNfa {
    let mut nfa = OracleNfa {
        eps: Vec::new(),
        step: Vec::new(),
        start: 0,
        accept: 0,
    };
    let (start, accept) = build_into(&mut nfa, expr);
    nfa.start = start;
    nfa.accept = accept;
    nfa
}

fn eps_close(nfa: &OracleNfa, set: &mut [bool]) {
    let mut work: Vec<usize> = (0..set.len()).filter(|&s| set[s]).collect();
    while let Some(s) = work.pop() {
        for &q in &nfa.eps[s] {
            if !set[q] {
                set[q] = true;
                work.push(q);
            }
        }
    }
}

/// Membership of the single count `n`, by stepping the NFA n times.
pub fn nfa_membership(nfa: &OracleNfa, n: u64) -> bool {
    nfa_memberships_up_to(nfa, n)[n as usize]
}

/// Membership for every count in `0..=max`, stepping once per count.
pub fn nfa_memberships_up_to(nfa: &OracleNfa, max: u64) -> Vec<bool> {
    let states = nfa.eps.len();
    let mut current = vec![false; states];
    current[nfa.start] = true;
    eps_close(nfa, &mut current);
    let mut out = Vec::with_capacity(max as usize + 1);
    out.push(current[nfa.accept]);
    for _ in 0..max {
        let mut next = vec![false; states];
        for (s, &live) in current.iter().enumerate() {
            if live {
                for &q in &nfa.step[s] {
                    next[q] = true;
                }
            }
        }
        eps_close(nfa, &mut next);
        out.push(next[nfa.accept]);
        current = next;
    }
    out
}

/// Second route: the set of matchable lengths in `0..=max`, computed
/// bottom-up over the expression with sumset arithmetic.
pub fn lengths_up_to(expr: &SpikeExpr, max: usize) -> Vec<bool> {
    match expr {
        SpikeExpr::Atom => {
            let mut v = vec![false; max + 1];
            if max >= 1 {
                v[1] = true;
            }
            v
        }
        SpikeExpr::Power(base, k) => {
            let inner = lengths_up_to(base, max);
            let mut acc = vec![false; max + 1];
            acc[0] = true;
            for _ in 0..*k {
                acc = sumset(&acc, &inner, max);
                if acc.iter().all(|&b| !b) {
                    break;
                }
            }
            acc
        }
        SpikeExpr::Concat(l, r) => sumset(&lengths_up_to(l, max), &lengths_up_to(r, max), max),
        SpikeExpr::Union(l, r) => {
            let a = lengths_up_to(l, max);
            let b = lengths_up_to(r, max);
            (0..=max).map(|i| a[i] || b[i]).collect()
        }
        SpikeExpr::Star(base) => closure(&lengths_up_to(base, max), max),
        SpikeExpr::Plus(base) => {
            let inner = lengths_up_to(base, max);
            sumset(&inner, &closure(&inner, max), max)
        }
    }
}

fn sumset(a: &[bool], b: &[bool], max: usize) -> Vec<bool> {
    let mut out = vec![false; max + 1];
    for (i, &ai) in a.iter().enumerate() {
        if !ai {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if bj && i + j <= max {
                out[i + j] = true;
            }
        }
    }
    out
}

fn closure(set: &[bool], max: usize) -> Vec<bool> {
    let mut out = vec![false; max + 1];
    out[0] = true;
    for i in 0..=max {
        if !out[i] {
            continue;
        }
        for (s, &present) in set.iter().enumerate() {
            if present && s >= 1 && i + s <= max {
                out[i + s] = true;
            }
        }
    }
    out
}

/// Straight-line register machine interpreter working on the source text.
/// Returns `Ok(Some(register 1))` at HALT, `Ok(None)` when fuel runs out.
/// Deterministic machines only (two-target ADDs are an error here).
pub fn interpret_machine_text(src: &str, fuel: u64) -> Result<Option<u64>, String> {
    enum Line {
        Add(usize, String),
        Sub(usize, String, String),
        Halt,
    }
    let mut program: HashMap<String, Line> = HashMap::new();
    let mut first = None;
    for raw in src.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (label, rest) = line.split_once(':').ok_or("missing label")?;
        let label = label.trim().to_string();
        let toks: Vec<&str> = rest.split_whitespace().collect();
        let parsed = match toks.as_slice() {
            ["ADD", r, l2] => Line::Add(r.parse().map_err(|_| "bad register")?, l2.to_string()),
            ["ADD", ..] => return Err("oracle handles deterministic ADDs only".into()),
            ["SUB", r, l2, l3] => Line::Sub(
                r.parse().map_err(|_| "bad register")?,
                l2.to_string(),
                l3.to_string(),
            ),
            ["HALT"] => Line::Halt,
            _ => return Err(format!("bad line: {line}")),
        };
        if first.is_none() {
            first = Some(label.clone());
        }
        if program.insert(label, parsed).is_some() {
            return Err("duplicate label".into());
        }
    }
    let mut registers: HashMap<usize, u64> = HashMap::new();
    let mut at = first.ok_or("empty program")?;
    for _ in 0..fuel {
        match program
            .get(&at)
            .ok_or_else(|| format!("dangling label {at}"))?
        {
            Line::Halt => return Ok(Some(registers.get(&1).copied().unwrap_or(0))),
            Line::Add(r, l2) => {
                *registers.entry(*r).or_default() += 1;
                at = l2.clone();
            }
            Line::Sub(r, l2, l3) => {
                let cell = registers.entry(*r).or_default();
                if *cell > 0 {
                    *cell -= 1;
                    at = l2.clone();
                } else {
                    at = l3.clone();
                }
            }
        }
    }
    if matches!(program.get(&at), Some(Line::Halt)) {
        return Ok(Some(registers.get(&1).copied().unwrap_or(0)));
    }
    Ok(None)
}
