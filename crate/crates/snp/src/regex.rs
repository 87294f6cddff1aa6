//! Unary regular expression guards and their compiled membership form.
//!
//! Every regular language over a one-letter alphabet is an eventually
//! periodic set of word lengths: past some threshold `T`, membership repeats
//! with period `P`. A guard is therefore compiled once — expression →
//! Thompson NFA → reachable-subset sequence → `(T, P, table)` — and every
//! membership query during simulation is a constant-time table lookup.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Default cap on the expanded size of a guard expression. `a^k` counts as
/// k copies of its base, so the cap bounds the NFA that compilation builds.
pub const DEFAULT_EXPR_COST_CAP: u64 = 256;

/// Hard ceiling on the subset-sequence search. The sequence over the
/// powerset of NFA states must cycle, but unions of coprime loops can push
/// the period far beyond anything a sane guard needs.
const PERIOD_SEARCH_LIMIT: usize = 1 << 20;

/// Syntax tree of a guard expression over the single spike symbol `a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpikeExpr {
    /// One spike: `a`.
    Atom,
    /// `e^k`: exactly k copies of e. `e^0` is the empty word.
    Power(Box<SpikeExpr>, u64),
    /// Juxtaposition.
    Concat(Box<SpikeExpr>, Box<SpikeExpr>),
    /// `l|r`.
    Union(Box<SpikeExpr>, Box<SpikeExpr>),
    /// Zero or more copies.
    Star(Box<SpikeExpr>),
    /// One or more copies.
    Plus(Box<SpikeExpr>),
}

impl SpikeExpr {
    pub fn atom() -> Self {
        SpikeExpr::Atom
    }

    pub fn power(base: SpikeExpr, k: u64) -> Self {
        SpikeExpr::Power(Box::new(base), k)
    }

    pub fn concat(l: SpikeExpr, r: SpikeExpr) -> Self {
        SpikeExpr::Concat(Box::new(l), Box::new(r))
    }

    pub fn union(l: SpikeExpr, r: SpikeExpr) -> Self {
        SpikeExpr::Union(Box::new(l), Box::new(r))
    }

    pub fn star(e: SpikeExpr) -> Self {
        SpikeExpr::Star(Box::new(e))
    }

    pub fn plus(e: SpikeExpr) -> Self {
        SpikeExpr::Plus(Box::new(e))
    }

    /// Expanded node count: powers count as repeated copies of their base.
    pub fn cost(&self) -> u64 {
        match self {
            SpikeExpr::Atom => 1,
            SpikeExpr::Power(e, k) => e.cost().saturating_mul(*k).saturating_add(1),
            SpikeExpr::Concat(l, r) | SpikeExpr::Union(l, r) => {
                l.cost().saturating_add(r.cost()).saturating_add(1)
            }
            SpikeExpr::Star(e) | SpikeExpr::Plus(e) => e.cost().saturating_add(1),
        }
    }

    /// `Some(k)` when the expression is literally `a` or `a^k` — the only
    /// shapes the rule syntax accepts as bare consume-all guards.
    pub fn as_exact_power(&self) -> Option<u64> {
        match self {
            SpikeExpr::Atom => Some(1),
            SpikeExpr::Power(base, k) if **base == SpikeExpr::Atom => Some(*k),
            _ => None,
        }
    }
}

// Rendering uses three precedence levels: union < concat < postfix. A right
// operand of a binary node needs strictly higher precedence than the node
// itself so that left-associative reparsing reproduces the tree.
fn prec(e: &SpikeExpr) -> u8 {
    match e {
        SpikeExpr::Union(..) => 0,
        SpikeExpr::Concat(..) => 1,
        SpikeExpr::Power(..) | SpikeExpr::Star(..) | SpikeExpr::Plus(..) => 2,
        SpikeExpr::Atom => 3,
    }
}

fn write_prec(e: &SpikeExpr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let need_parens = prec(e) < min;
    if need_parens {
        f.write_str("(")?;
    }
    match e {
        SpikeExpr::Atom => f.write_str("a")?,
        SpikeExpr::Power(base, k) => {
            write_prec(base, 2, f)?;
            write!(f, "^{k}")?;
        }
        SpikeExpr::Concat(l, r) => {
            write_prec(l, 1, f)?;
            write_prec(r, 2, f)?;
        }
        SpikeExpr::Union(l, r) => {
            write_prec(l, 0, f)?;
            f.write_str("|")?;
            write_prec(r, 1, f)?;
        }
        SpikeExpr::Star(base) => {
            write_prec(base, 2, f)?;
            f.write_str("*")?;
        }
        SpikeExpr::Plus(base) => {
            write_prec(base, 2, f)?;
            f.write_str("+")?;
        }
    }
    if need_parens {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for SpikeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, 0, f)
    }
}

/// Position-annotated guard syntax error.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("guard syntax error at byte {pos}: {message}")]
pub struct GuardSyntaxError {
    pub pos: usize,
    pub message: String,
}

fn err(pos: usize, message: impl Into<String>) -> GuardSyntaxError {
    GuardSyntaxError {
        pos,
        message: message.into(),
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn union(&mut self) -> Result<SpikeExpr, GuardSyntaxError> {
        let mut left = self.concat()?;
        while self.peek() == Some(b'|') {
            self.pos += 1;
            let right = self.concat()?;
            left = SpikeExpr::union(left, right);
        }
        Ok(left)
    }

    fn concat(&mut self) -> Result<SpikeExpr, GuardSyntaxError> {
        let mut left = self.postfix()?;
        while matches!(self.peek(), Some(b'a') | Some(b'(')) {
            let right = self.postfix()?;
            left = SpikeExpr::concat(left, right);
        }
        Ok(left)
    }

    fn postfix(&mut self) -> Result<SpikeExpr, GuardSyntaxError> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    e = SpikeExpr::star(e);
                }
                Some(b'+') => {
                    self.pos += 1;
                    e = SpikeExpr::plus(e);
                }
                Some(b'^') => {
                    self.pos += 1;
                    let k = self.exponent()?;
                    e = SpikeExpr::power(e, k);
                }
                _ => return Ok(e),
            }
        }
    }

    fn primary(&mut self) -> Result<SpikeExpr, GuardSyntaxError> {
        match self.peek() {
            Some(b'a') => {
                self.pos += 1;
                Ok(SpikeExpr::Atom)
            }
            Some(b'(') => {
                let open = self.pos;
                self.pos += 1;
                let inner = self.union()?;
                if self.peek() != Some(b')') {
                    return Err(err(open, "unbalanced parenthesis"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) => Err(err(
                self.pos,
                format!("unexpected character '{}'", c as char),
            )),
            None => Err(err(self.pos, "unexpected end of expression")),
        }
    }

    fn exponent(&mut self) -> Result<u64, GuardSyntaxError> {
        self.skip_ws();
        let start = self.pos;
        let mut value: u64 = 0;
        let mut any = false;
        while let Some(d) = self.bytes.get(self.pos).filter(|b| b.is_ascii_digit()) {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(d - b'0')))
                .ok_or_else(|| err(start, "exponent too large"))?;
            self.pos += 1;
            any = true;
        }
        if !any {
            return Err(err(self.pos, "expected exponent digits after '^'"));
        }
        Ok(value)
    }
}

/// Parse a guard from the rule syntax: atom `a`, postfix `*` `+` `^k`,
/// infix `|`, juxtaposition, and parentheses.
pub fn parse_spike_expr(text: &str) -> Result<SpikeExpr, GuardSyntaxError> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
    };
    if p.peek().is_none() {
        return Err(err(0, "empty guard expression"));
    }
    let e = p.union()?;
    if let Some(c) = p.peek() {
        return Err(err(p.pos, format!("unexpected character '{}'", c as char)));
    }
    Ok(e)
}

/// Error from guard compilation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("guard expression too large: expanded size {cost} exceeds cap {cap}")]
    TooLarge { cost: u64, cap: u64 },
    #[error("guard period search exceeded {limit} subset states")]
    PeriodSearchOverflow { limit: usize },
}

/// Compiled guard: an eventually periodic subset of the naturals.
///
/// Membership of `n < threshold` is stored explicitly; membership of larger
/// `n` depends only on `(n - threshold) mod period`. Neither value is
/// required to be minimal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeSet {
    threshold: usize,
    period: usize,
    table: Vec<bool>,
}

impl SpikeSet {
    /// Constant-time membership test.
    pub fn contains(&self, n: u64) -> bool {
        let t = self.threshold as u64;
        if n < t {
            self.table[n as usize]
        } else {
            let p = self.period as u64;
            self.table[self.threshold + ((n - t) % p) as usize]
        }
    }

    pub fn threshold(&self) -> u64 {
        self.threshold as u64
    }

    pub fn period(&self) -> u64 {
        self.period as u64
    }

    /// All members when the set is finite, `None` when the periodic tail is
    /// inhabited.
    pub fn finite_members(&self) -> Option<Vec<u64>> {
        if self.table[self.threshold..].iter().any(|&b| b) {
            return None;
        }
        Some(
            (0..self.threshold)
                .filter(|&i| self.table[i])
                .map(|i| i as u64)
                .collect(),
        )
    }

    /// `Some(e)` when the set is exactly `{e}`.
    pub fn as_singleton(&self) -> Option<u64> {
        match self.finite_members() {
            Some(m) if m.len() == 1 => Some(m[0]),
            _ => None,
        }
    }
}

// Thompson NFA over the one-letter alphabet.
struct Nfa {
    eps: Vec<Vec<usize>>,
    on_spike: Vec<Vec<usize>>,
}

impl Nfa {
    fn state(&mut self) -> usize {
        self.eps.push(Vec::new());
        self.on_spike.push(Vec::new());
        self.eps.len() - 1
    }

    fn frag(&mut self, e: &SpikeExpr) -> (usize, usize) {
        match e {
            SpikeExpr::Atom => {
                let s = self.state();
                let t = self.state();
                self.on_spike[s].push(t);
                (s, t)
            }
            SpikeExpr::Power(base, k) => {
                if *k == 0 {
                    let s = self.state();
                    return (s, s);
                }
                let (start, mut end) = self.frag(base);
                for _ in 1..*k {
                    let (s, t) = self.frag(base);
                    self.eps[end].push(s);
                    end = t;
                }
                (start, end)
            }
            SpikeExpr::Concat(l, r) => {
                let (ls, lt) = self.frag(l);
                let (rs, rt) = self.frag(r);
                self.eps[lt].push(rs);
                (ls, rt)
            }
            SpikeExpr::Union(l, r) => {
                let s = self.state();
                let t = self.state();
                let (ls, lt) = self.frag(l);
                let (rs, rt) = self.frag(r);
                self.eps[s].push(ls);
                self.eps[s].push(rs);
                self.eps[lt].push(t);
                self.eps[rt].push(t);
                (s, t)
            }
            SpikeExpr::Star(base) => {
                let s = self.state();
                let t = self.state();
                let (is, it) = self.frag(base);
                self.eps[s].push(is);
                self.eps[s].push(t);
                self.eps[it].push(is);
                self.eps[it].push(t);
                (s, t)
            }
            SpikeExpr::Plus(base) => {
                let (is, it) = self.frag(base);
                let t = self.state();
                self.eps[it].push(is);
                self.eps[it].push(t);
                (is, t)
            }
        }
    }
}

// State sets as fixed-width bitsets so they hash cheaply.
fn closure(nfa: &Nfa, set: &mut [u64]) {
    let mut work: Vec<usize> = Vec::new();
    for s in 0..nfa.eps.len() {
        if set[s / 64] & (1 << (s % 64)) != 0 {
            work.push(s);
        }
    }
    while let Some(s) = work.pop() {
        for &q in &nfa.eps[s] {
            let (w, b) = (q / 64, 1u64 << (q % 64));
            if set[w] & b == 0 {
                set[w] |= b;
                work.push(q);
            }
        }
    }
}

fn advance(nfa: &Nfa, set: &[u64], words: usize) -> Vec<u64> {
    let mut next = vec![0u64; words];
    for s in 0..nfa.eps.len() {
        if set[s / 64] & (1 << (s % 64)) != 0 {
            for &q in &nfa.on_spike[s] {
                next[q / 64] |= 1 << (q % 64);
            }
        }
    }
    closure(nfa, &mut next);
    next
}

/// Compile under the default expression size cap.
pub fn compile(expr: &SpikeExpr) -> Result<SpikeSet, CompileError> {
    compile_with_cap(expr, DEFAULT_EXPR_COST_CAP)
}

/// Compile a guard to its eventually periodic set.
///
/// Builds a Thompson NFA and iterates the reachable subset of states over
/// the single letter; the sequence lives in a finite powerset, so it must
/// enter a cycle, which gives the threshold and period directly.
pub fn compile_with_cap(expr: &SpikeExpr, cap: u64) -> Result<SpikeSet, CompileError> {
    let cost = expr.cost();
    if cost > cap {
        return Err(CompileError::TooLarge { cost, cap });
    }

    let mut nfa = Nfa {
        eps: Vec::new(),
        on_spike: Vec::new(),
    };
    let (start, accept) = nfa.frag(expr);
    let words = nfa.eps.len().div_ceil(64);

    let mut cur = vec![0u64; words];
    cur[start / 64] |= 1 << (start % 64);
    closure(&nfa, &mut cur);

    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut accepts: Vec<bool> = Vec::new();
    loop {
        if let Some(&first) = seen.get(&cur) {
            let threshold = first;
            let period = accepts.len() - first;
            accepts.truncate(threshold + period);
            return Ok(SpikeSet {
                threshold,
                period,
                table: accepts,
            });
        }
        if accepts.len() >= PERIOD_SEARCH_LIMIT {
            return Err(CompileError::PeriodSearchOverflow {
                limit: PERIOD_SEARCH_LIMIT,
            });
        }
        seen.insert(cur.clone(), accepts.len());
        accepts.push(cur[accept / 64] & (1 << (accept % 64)) != 0);
        cur = advance(&nfa, &cur, words);
    }
}
