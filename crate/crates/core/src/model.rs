//! Monomer words, heads and the transition structure of the growth process.
//!
//! A microtubule is an infinite word `... m2 m1 m0` of PLUS/MINUS monomers
//! whose active end `m0` sits at an integer position `x`. Everything to the
//! left of the left-most PLUS monomer is MINUS, so the state is captured by
//! the position and the *head*: the shortest suffix containing every PLUS.
//!
//! Index `0` always denotes the active end. Textual notation is written the
//! usual way, left to right, so `"⊕⊖"` is a head whose index-1 symbol is PLUS
//! and whose active end is MINUS. ASCII `+`/`-` are accepted as well.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One of the two monomer types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Monomer {
    Plus,
    Minus,
}

impl Monomer {
    pub fn is_plus(self) -> bool {
        matches!(self, Monomer::Plus)
    }

    fn glyph(self) -> char {
        match self {
            Monomer::Plus => '⊕',
            Monomer::Minus => '⊖',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseWordError {
    #[error("unexpected character {0:?} in monomer word")]
    BadSymbol(char),
    #[error("word {0:?} is not a head: its left-most symbol must be PLUS")]
    NotAHead(String),
}

/// Parses a word written left to right (highest index first) and returns it in
/// index order, i.e. element 0 is the active end.
///
/// `∅` or the empty string denote the empty word. Whitespace is ignored.
pub fn parse_word(text: &str) -> Result<Vec<Monomer>, ParseWordError> {
    let mut symbols = Vec::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '+' | '⊕' => symbols.push(Monomer::Plus),
            '-' | '⊖' => symbols.push(Monomer::Minus),
            '∅' => {}
            c if c.is_whitespace() => {}
            c => return Err(ParseWordError::BadSymbol(c)),
        }
    }
    symbols.reverse();
    Ok(symbols)
}

/// Formats a word given in index order using the left-to-right notation.
pub fn format_word(symbols: &[Monomer]) -> String {
    if symbols.is_empty() {
        return "∅".to_string();
    }
    symbols.iter().rev().map(|m| m.glyph()).collect()
}

/// The populated zone of a microtubule.
///
/// Either empty, or a finite word whose highest-index symbol is PLUS. The
/// number of PLUS monomers is cached so that [`Head::norm`] is O(1).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Head {
    // front = index 0 = active end
    symbols: VecDeque<Monomer>,
    plus: usize,
}

impl Head {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The single-monomer head `⊕`.
    pub fn single_plus() -> Self {
        let mut h = Self::empty();
        h.attach();
        h
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Symbol at index `j`; indices beyond the head are MINUS.
    pub fn symbol(&self, j: usize) -> Monomer {
        self.symbols.get(j).copied().unwrap_or(Monomer::Minus)
    }

    /// Number of PLUS monomers.
    pub fn norm(&self) -> usize {
        self.plus
    }

    /// `true` when the active end is PLUS (the head belongs to `W+`).
    pub fn is_plus_ended(&self) -> bool {
        self.symbols.front().is_some_and(|m| m.is_plus())
    }

    /// Symbols in index order.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = Monomer> + '_ {
        self.symbols.iter().copied()
    }

    /// Indices of PLUS monomers, ascending.
    pub fn plus_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.symbols
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_plus())
            .map(|(j, _)| j)
    }

    /// Index of the `k`-th PLUS monomer counted from the active end.
    pub fn nth_plus(&self, k: usize) -> Option<usize> {
        self.plus_indices().nth(k)
    }

    pub fn to_word(&self) -> Vec<Monomer> {
        self.symbols.iter().copied().collect()
    }

    /// Appends a PLUS monomer at the active end.
    pub(crate) fn attach(&mut self) {
        self.symbols.push_front(Monomer::Plus);
        self.plus += 1;
    }

    /// Removes the active-end monomer. Caller guarantees it is MINUS (or the
    /// head is empty, in which case nothing happens).
    pub(crate) fn detach(&mut self) {
        if let Some(m) = self.symbols.pop_front() {
            debug_assert!(!m.is_plus());
        }
    }

    /// Converts the PLUS monomer at index `j` and re-normalizes.
    pub(crate) fn hydrolyze(&mut self, j: usize) {
        debug_assert!(self.symbols[j].is_plus());
        self.symbols[j] = Monomer::Minus;
        self.plus -= 1;
        self.trim();
    }

    fn trim(&mut self) {
        while self.symbols.back() == Some(&Monomer::Minus) {
            self.symbols.pop_back();
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word: Vec<Monomer> = self.to_word();
        f.write_str(&format_word(&word))
    }
}

impl FromStr for Head {
    type Err = ParseWordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let word = parse_word(s)?;
        let head = normalize(&word);
        if head.len() != word.len() {
            return Err(ParseWordError::NotAHead(s.to_string()));
        }
        Ok(head)
    }
}

/// Strips every MINUS monomer to the left of the left-most PLUS.
///
/// `word` is in index order (element 0 is the active end).
pub fn normalize(word: &[Monomer]) -> Head {
    let keep = word
        .iter()
        .rposition(|m| m.is_plus())
        .map_or(0, |last| last + 1);
    let symbols: VecDeque<Monomer> = word[..keep].iter().copied().collect();
    let plus = symbols.iter().filter(|m| m.is_plus()).count();
    Head { symbols, plus }
}

/// Count of PLUS monomers.
pub fn head_norm(head: &Head) -> usize {
    head.norm()
}

/// A fixed-length word of `m + 1` symbols, bit `j` set iff symbol `j` is PLUS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProjectedState {
    pub m: usize,
    pub bits: u64,
}

/// Largest order whose words fit in the `u64` encoding.
pub const MAX_ENCODABLE_ORDER: usize = 62;

impl ProjectedState {
    pub fn new(m: usize, bits: u64) -> Self {
        assert!(m <= MAX_ENCODABLE_ORDER, "order {m} does not fit in 64 bits");
        Self {
            m,
            bits: bits & Self::mask(m),
        }
    }

    pub fn empty(m: usize) -> Self {
        Self::new(m, 0)
    }

    pub fn mask(m: usize) -> u64 {
        (1u64 << (m + 1)) - 1
    }

    pub fn symbol(&self, j: usize) -> Monomer {
        if j <= self.m && self.bits >> j & 1 == 1 {
            Monomer::Plus
        } else {
            Monomer::Minus
        }
    }

    pub fn is_plus_ended(&self) -> bool {
        self.bits & 1 == 1
    }

    pub fn to_word(&self) -> Vec<Monomer> {
        (0..=self.m).map(|j| self.symbol(j)).collect()
    }
}

impl fmt::Display for ProjectedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_word(&self.to_word()))
    }
}

/// The `m + 1` right-most symbols of `head`, padded on the left with MINUS.
pub fn project(head: &Head, m: usize) -> ProjectedState {
    let bits = head
        .plus_indices()
        .take_while(|&j| j <= m)
        .fold(0u64, |acc, j| acc | 1 << j);
    ProjectedState::new(m, bits)
}

/// Position of the active end together with the head.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MtState {
    pub x: i64,
    pub head: Head,
}

impl MtState {
    pub fn new(x: i64, head: Head) -> Self {
        Self { x, head }
    }

    /// `(0, ∅)`.
    pub fn origin() -> Self {
        Self::default()
    }

    /// Applies `event` in place. The event must be enabled in this state.
    pub(crate) fn apply(&mut self, event: Event) {
        match event {
            Event::Attach => {
                self.head.attach();
                self.x += 1;
            }
            Event::Detach => {
                self.head.detach();
                self.x -= 1;
            }
            Event::Hydrolyze(j) => self.head.hydrolyze(j),
        }
    }
}

impl fmt::Display for MtState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.head)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatesError {
    #[error("rate {name} = {value} must be strictly positive and finite")]
    NonPositive { name: &'static str, value: f64 },
}

/// Attachment and detachment rates. Hydrolysis happens at rate 1 per PLUS
/// monomer, which fixes the time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub mu: f64,
}

/// Per-monomer hydrolysis rate.
pub const HYDROLYSIS_RATE: f64 = 1.0;

impl Rates {
    pub fn new(lambda_plus: f64, lambda_minus: f64, mu: f64) -> Result<Self, RatesError> {
        for (name, value) in [
            ("lambda_plus", lambda_plus),
            ("lambda_minus", lambda_minus),
            ("mu", mu),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(RatesError::NonPositive { name, value });
            }
        }
        Ok(Self {
            lambda_plus,
            lambda_minus,
            mu,
        })
    }

    /// Re-checks the invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<(), RatesError> {
        Self::new(self.lambda_plus, self.lambda_minus, self.mu).map(|_| ())
    }

    /// Attachment rate given the type of the active end.
    pub fn attach_rate(&self, plus_ended: bool) -> f64 {
        if plus_ended {
            self.lambda_plus
        } else {
            self.lambda_minus
        }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..*self }
    }
}

/// A single transition of the full process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Event {
    Attach,
    Detach,
    /// Conversion of the PLUS monomer at the given index.
    Hydrolyze(usize),
}

impl Event {
    /// Displacement of the active end.
    pub fn dx(self) -> i64 {
        match self {
            Event::Attach => 1,
            Event::Detach => -1,
            Event::Hydrolyze(_) => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub event: Event,
    pub rate: f64,
    pub next: MtState,
}

/// Total exit rate of `state`.
pub fn total_rate(state: &MtState, rates: &Rates) -> f64 {
    let plus_ended = state.head.is_plus_ended();
    let detach = if plus_ended { 0.0 } else { rates.mu };
    rates.attach_rate(plus_ended) + detach + state.head.norm() as f64 * HYDROLYSIS_RATE
}

/// Every transition out of `state`: one ATTACH, a DETACH iff the active end
/// is MINUS (the empty head included), and one HYDROLYZE per PLUS monomer in
/// ascending index order.
pub fn enabled_transitions(state: &MtState, rates: &Rates) -> Vec<Transition> {
    let plus_ended = state.head.is_plus_ended();
    let mut out = Vec::with_capacity(2 + state.head.norm());
    let mut push = |event: Event, rate: f64| {
        let mut next = state.clone();
        next.apply(event);
        out.push(Transition { event, rate, next });
    };
    push(Event::Attach, rates.attach_rate(plus_ended));
    if !plus_ended {
        push(Event::Detach, rates.mu);
    }
    for j in state.head.plus_indices() {
        push(Event::Hydrolyze(j), HYDROLYSIS_RATE);
    }
    out
}
