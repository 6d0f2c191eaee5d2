//! The two monotone couplings, run with their ordering properties checked
//! after every event.
//!
//! **Birth–death domination.** The growth process is paired with a
//! birth–death population `y` (birth rate `λ = max(λ⁺, λ⁻)`, death rate 1
//! per individual) so that the number of PLUS monomers never exceeds `y`.
//! Each PLUS monomer is matched with one individual. With `a` the current
//! attachment rate of the growth process, the clocks are
//!
//! | clock        | rate         | effect                                   |
//! |--------------|--------------|------------------------------------------|
//! | joint attach | `a`          | attach, `y += 1`                         |
//! | birth only   | `λ − a`      | `y += 1`                                 |
//! | detach       | `μ`          | detach (MINUS-ended heads only)          |
//! | joint decay  | `‖w‖`        | hydrolyze a uniform PLUS, `y −= 1`       |
//! | death only   | `y − ‖w‖`    | `y −= 1`                                 |
//!
//! On a MINUS-ended head (case I) `a = λ⁻`, on a PLUS-ended head (case II)
//! `a = λ⁺`; depending on the sign of `λ⁻ − λ⁺` one of the two cases has
//! `a = λ` and no birth-only clock, the other has `a = λ₀ = min(λ⁺, λ⁻)`
//! and a birth-only clock of rate `δλ = |λ⁺ − λ⁻|`.
//!
//! **Finite-strip pair.** Order-`m` and order-`m+1` word chains run together
//! with the lower word PLUS only where the upper word is PLUS (indices
//! aligned at the active end, the lower word read with one extra MINUS on the
//! left).

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Event, MtState, ProjectedState, Rates, HYDROLYSIS_RATE};
use crate::projected::{attach_word, detach_word, hydrolyze_word};
use crate::rng::RngSeed;
use crate::sim::exp_holding;
use crate::stats::{chi_square, ChiSquareTest};

/// Parameter points of the default suites: `λ⁻ > λ⁺`, `λ⁺ > λ⁻`, equal
/// attachment rates, and a point with `λ⁻ ≥ μ + λ⁺`.
pub const REFERENCE_POINTS: [Rates; 4] = [
    Rates {
        lambda_plus: 0.5,
        lambda_minus: 2.0,
        mu: 1.0,
    },
    Rates {
        lambda_plus: 2.0,
        lambda_minus: 0.5,
        mu: 1.0,
    },
    Rates {
        lambda_plus: 1.0,
        lambda_minus: 1.0,
        mu: 1.0,
    },
    Rates {
        lambda_plus: 1.5,
        lambda_minus: 3.0,
        mu: 0.5,
    },
];

/// Significance level of the marginal goodness-of-fit tests.
pub const MARGINAL_LEVEL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CouplingError {
    #[error("coupling invariant violated: {0}")]
    InvariantViolation(String),
}

/// Growth process paired with its dominating population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BdCoupledState {
    pub mt: MtState,
    pub y: u64,
}

impl BdCoupledState {
    pub fn origin() -> Self {
        Self {
            mt: MtState::origin(),
            y: 0,
        }
    }

    pub fn check(&self) -> Result<(), CouplingError> {
        let n = self.mt.head.norm() as u64;
        if n > self.y {
            return Err(CouplingError::InvariantViolation(format!(
                "head norm {n} exceeds population {} at {}",
                self.y, self.mt
            )));
        }
        Ok(())
    }
}

/// What one coupled step did to each component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BdMove {
    pub mt: Option<Event>,
    /// `+1` birth, `−1` death.
    pub dy: i8,
}

/// Advances in place and returns `(dt, move)`.
pub fn bd_coupled_step_in_place<R: Rng + ?Sized>(
    state: &mut BdCoupledState,
    rates: &Rates,
    rng: &mut R,
) -> Result<(f64, BdMove), CouplingError> {
    state.check()?;
    let lambda = rates.lambda_plus.max(rates.lambda_minus);
    let plus_ended = state.mt.head.is_plus_ended();
    let a = rates.attach_rate(plus_ended);
    let mu = if plus_ended { 0.0 } else { rates.mu };
    let norm = state.mt.head.norm();
    let unmatched = state.y - norm as u64;
    let total = lambda + mu + (norm as f64 + unmatched as f64) * HYDROLYSIS_RATE;
    let dt = exp_holding(total, rng);

    let mut u = rng.random::<f64>() * total;
    let mv = if u < a {
        state.mt.apply(Event::Attach);
        state.y += 1;
        BdMove {
            mt: Some(Event::Attach),
            dy: 1,
        }
    } else if {
        u -= a;
        u < lambda - a
    } {
        state.y += 1;
        BdMove { mt: None, dy: 1 }
    } else if {
        u -= lambda - a;
        u < mu
    } {
        state.mt.apply(Event::Detach);
        BdMove {
            mt: Some(Event::Detach),
            dy: 0,
        }
    } else {
        u -= mu;
        let k = (u / HYDROLYSIS_RATE) as usize;
        state.y -= 1;
        if k < norm {
            let j = state.mt.head.nth_plus(k).expect("k < norm");
            state.mt.apply(Event::Hydrolyze(j));
            BdMove {
                mt: Some(Event::Hydrolyze(j)),
                dy: -1,
            }
        } else {
            BdMove { mt: None, dy: -1 }
        }
    };
    state.check()?;
    Ok((dt, mv))
}

pub fn bd_coupled_step<R: Rng + ?Sized>(
    state: &BdCoupledState,
    rates: &Rates,
    rng: &mut R,
) -> Result<(BdCoupledState, f64), CouplingError> {
    let mut next = state.clone();
    let (dt, _) = bd_coupled_step_in_place(&mut next, rates, rng)?;
    Ok((next, dt))
}

/// Order-`m` and order-`m+1` word chains with their positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCoupledState {
    pub m: usize,
    pub lower: u64,
    pub upper: u64,
    pub x_lower: i64,
    pub x_upper: i64,
}

impl PairCoupledState {
    pub fn origin(m: usize) -> Self {
        Self {
            m,
            lower: 0,
            upper: 0,
            x_lower: 0,
            x_upper: 0,
        }
    }

    pub fn ordered(&self) -> bool {
        self.lower & !self.upper == 0
    }

    pub fn check(&self) -> Result<(), CouplingError> {
        if !self.ordered() {
            return Err(CouplingError::InvariantViolation(format!(
                "ordering broken: lower {} upper {}",
                ProjectedState::new(self.m + 1, self.lower),
                ProjectedState::new(self.m + 1, self.upper)
            )));
        }
        Ok(())
    }

    pub fn lower_state(&self) -> ProjectedState {
        ProjectedState::new(self.m, self.lower)
    }

    pub fn upper_state(&self) -> ProjectedState {
        ProjectedState::new(self.m + 1, self.upper)
    }
}

/// Move of one word-chain component, including detachment from the
/// all-MINUS word (which moves only the position).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordMove {
    Attach,
    Detach,
    Hydrolyze(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairMove {
    pub lower: Option<WordMove>,
    pub upper: Option<WordMove>,
}

/// Which of the constructions applies in a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairCase {
    /// Both words MINUS-ended.
    BothMinus,
    /// Lower (hence upper) PLUS-ended.
    BothPlus,
    /// Lower MINUS-ended, upper PLUS-ended, `λ⁻ ≥ λ⁺`.
    MixedMinusFaster,
    /// Same configuration, `λ⁺ > λ⁻`.
    MixedPlusFaster,
}

pub fn pair_case(state: &PairCoupledState, rates: &Rates) -> PairCase {
    match (state.lower & 1 == 1, state.upper & 1 == 1) {
        (true, _) => PairCase::BothPlus,
        (false, false) => PairCase::BothMinus,
        (false, true) if rates.lambda_minus >= rates.lambda_plus => PairCase::MixedMinusFaster,
        (false, true) => PairCase::MixedPlusFaster,
    }
}

fn apply_word(m: usize, w: &mut u64, x: &mut i64, mv: WordMove) {
    match mv {
        WordMove::Attach => {
            *w = attach_word(m, *w);
            *x += 1;
        }
        WordMove::Detach => {
            *w = detach_word(*w);
            *x -= 1;
        }
        WordMove::Hydrolyze(j) => *w = hydrolyze_word(*w, j),
    }
}

/// `k`-th set bit of `bits` (from index 0).
fn nth_bit(bits: u64, k: usize) -> usize {
    let mut b = bits;
    for _ in 0..k {
        b &= b - 1;
    }
    b.trailing_zeros() as usize
}

pub fn pair_coupled_step_in_place<R: Rng + ?Sized>(
    state: &mut PairCoupledState,
    rates: &Rates,
    rng: &mut R,
) -> Result<(f64, PairMove), CouplingError> {
    state.check()?;
    let j0 = state.lower & state.upper;
    let j1 = state.upper & !state.lower;
    let (n0, n1) = (j0.count_ones() as usize, j1.count_ones() as usize);
    let lambda0 = rates.lambda_plus.min(rates.lambda_minus);
    let dlambda = (rates.lambda_plus - rates.lambda_minus).abs();
    let case = pair_case(state, rates);

    use WordMove::*;
    let both = |mv| PairMove {
        lower: Some(mv),
        upper: Some(mv),
    };
    let lower_only = |mv| PairMove {
        lower: Some(mv),
        upper: None,
    };
    let upper_only = |mv| PairMove {
        lower: None,
        upper: Some(mv),
    };
    // (rate, move) for every clock other than hydrolysis
    let clocks: Vec<(f64, PairMove)> = match case {
        PairCase::BothMinus => vec![(rates.lambda_minus, both(Attach)), (rates.mu, both(Detach))],
        PairCase::BothPlus => vec![(rates.lambda_plus, both(Attach))],
        PairCase::MixedMinusFaster => vec![
            (rates.mu, lower_only(Detach)),
            (lambda0, both(Attach)),
            (dlambda, lower_only(Attach)),
        ],
        PairCase::MixedPlusFaster => vec![
            (rates.mu, lower_only(Detach)),
            (lambda0, both(Attach)),
            (dlambda, upper_only(Attach)),
        ],
    };
    let total: f64 = clocks.iter().map(|c| c.0).sum::<f64>() + (n0 + n1) as f64 * HYDROLYSIS_RATE;
    let dt = exp_holding(total, rng);
    let mut u = rng.random::<f64>() * total;
    let mut chosen = None;
    for &(rate, mv) in &clocks {
        if u < rate {
            chosen = Some(mv);
            break;
        }
        u -= rate;
    }
    let mv = match chosen {
        Some(mv) => mv,
        None => {
            let k = ((u / HYDROLYSIS_RATE) as usize).min(n0 + n1 - 1);
            if k < n0 {
                both(Hydrolyze(nth_bit(j0, k)))
            } else {
                upper_only(Hydrolyze(nth_bit(j1, k - n0)))
            }
        }
    };
    let m = state.m;
    if let Some(l) = mv.lower {
        apply_word(m, &mut state.lower, &mut state.x_lower, l);
    }
    if let Some(h) = mv.upper {
        apply_word(m + 1, &mut state.upper, &mut state.x_upper, h);
    }
    state.check()?;
    Ok((dt, mv))
}

pub fn pair_coupled_step<R: Rng + ?Sized>(
    state: &PairCoupledState,
    rates: &Rates,
    rng: &mut R,
) -> Result<(PairCoupledState, f64), CouplingError> {
    let mut next = *state;
    let (dt, _) = pair_coupled_step_in_place(&mut next, rates, rng)?;
    Ok((next, dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// `λ⁻ ≥ λ⁺`.
    MinusDominant,
    /// `λ⁺ ≥ λ⁻`.
    PlusDominant,
}

impl Regime {
    /// Regimes whose structure must hold at these rates (both when equal).
    pub fn applicable(rates: &Rates) -> Vec<Regime> {
        let mut out = Vec::with_capacity(2);
        if rates.lambda_minus >= rates.lambda_plus {
            out.push(Regime::MinusDominant);
        }
        if rates.lambda_plus >= rates.lambda_minus {
            out.push(Regime::PlusDominant);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Discrepancy {
    Equal,
    Single { j0: usize },
    Interval { j0: usize, j1: usize },
    Malformed,
}

impl Discrepancy {
    pub fn label(&self) -> &'static str {
        match self {
            Discrepancy::Equal => "EQUAL",
            Discrepancy::Single { .. } => "SINGLE",
            Discrepancy::Interval { .. } => "INTERVAL",
            Discrepancy::Malformed => "MALFORMED",
        }
    }
}

fn top_bit(w: u64) -> usize {
    63 - w.leading_zeros() as usize
}

/// Shape of the difference between the aligned words.
///
/// Minus-dominant: the words agree except, possibly, at the left-most PLUS
/// of the upper word, where the lower word is MINUS. Plus-dominant: below
/// some `j₀` the words agree, the lower word is all MINUS from `j₀` on, and
/// the upper word is PLUS at `j₀` and at its left-most PLUS `j₁`.
pub fn check_discrepancy_structure(lower: u64, upper: u64, regime: Regime) -> Discrepancy {
    if lower == upper {
        return Discrepancy::Equal;
    }
    if lower & !upper != 0 {
        return Discrepancy::Malformed;
    }
    let diff = upper & !lower;
    let j0 = diff.trailing_zeros() as usize;
    let j1 = top_bit(upper);
    match regime {
        Regime::MinusDominant => {
            if diff.count_ones() == 1 && j0 == j1 {
                Discrepancy::Single { j0 }
            } else {
                Discrepancy::Malformed
            }
        }
        Regime::PlusDominant => {
            if lower >> j0 != 0 {
                Discrepancy::Malformed
            } else if j0 == j1 {
                Discrepancy::Single { j0 }
            } else {
                Discrepancy::Interval { j0, j1 }
            }
        }
    }
}

/// Per-category conditional-expectation counts for one component.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MarginalTally {
    pub categories: Vec<String>,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
}

impl MarginalTally {
    fn new(categories: &[&str]) -> Self {
        Self {
            categories: categories.iter().map(|s| s.to_string()).collect(),
            observed: vec![0.0; categories.len()],
            expected: vec![0.0; categories.len()],
        }
    }

    /// Records one move of the component: `probs` are the standalone
    /// chain's jump probabilities in the pre-move state.
    fn record(&mut self, which: usize, probs: &[f64]) {
        self.observed[which] += 1.0;
        for (e, p) in self.expected.iter_mut().zip(probs) {
            *e += p;
        }
    }

    fn merge(&mut self, other: &MarginalTally) {
        for (a, b) in self.observed.iter_mut().zip(&other.observed) {
            *a += b;
        }
        for (a, b) in self.expected.iter_mut().zip(&other.expected) {
            *a += b;
        }
    }

    pub fn test(&self) -> ChiSquareTest {
        chi_square(&self.observed, &self.expected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalResult {
    pub component: String,
    pub test: ChiSquareTest,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub suite: String,
    pub rates: Rates,
    pub m: Option<usize>,
    pub events: u64,
    pub seeds: u64,
    pub violations: u64,
    pub first_violation: Option<String>,
    pub verdict_histogram: BTreeMap<String, u64>,
    pub marginals: Vec<MarginalResult>,
    /// Time fraction with the lower word MINUS-ended and the upper word
    /// PLUS-ended (pair suite only).
    pub mixed_occupation: Option<f64>,
    /// Time fractions with each word PLUS-ended (pair suite only).
    pub plus_occupation: Option<(f64, f64)>,
}

impl CouplingReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.marginals.iter().all(|r| r.passed)
    }
}

fn mt_probs(s: &MtState, rates: &Rates) -> [f64; 3] {
    let plus = s.head.is_plus_ended();
    let a = rates.attach_rate(plus);
    let d = if plus { 0.0 } else { rates.mu };
    let h = s.head.norm() as f64 * HYDROLYSIS_RATE;
    let t = a + d + h;
    [a / t, d / t, h / t]
}

#[derive(Default)]
struct BdPart {
    violations: u64,
    first: Option<String>,
    mt: Option<MarginalTally>,
    y: Option<MarginalTally>,
}

fn bd_run(rates: &Rates, events: u64, seed: RngSeed) -> BdPart {
    let mut rng = seed.rng();
    let lambda = rates.lambda_plus.max(rates.lambda_minus);
    let mut s = BdCoupledState::origin();
    let mut mt = MarginalTally::new(&["ATTACH", "DETACH", "HYDROLYZE"]);
    let mut y = MarginalTally::new(&["BIRTH", "DEATH"]);
    let mut part = BdPart::default();
    for _ in 0..events {
        let pm = mt_probs(&s.mt, rates);
        let pb = lambda / (lambda + s.y as f64);
        match bd_coupled_step_in_place(&mut s, rates, &mut rng) {
            Ok((_, mv)) => {
                if let Some(e) = mv.mt {
                    let idx = match e {
                        Event::Attach => 0,
                        Event::Detach => 1,
                        Event::Hydrolyze(_) => 2,
                    };
                    mt.record(idx, &pm);
                }
                match mv.dy {
                    1 => y.record(0, &[pb, 1.0 - pb]),
                    -1 => y.record(1, &[pb, 1.0 - pb]),
                    _ => {}
                }
            }
            Err(e) => {
                part.violations += 1;
                part.first = Some(e.to_string());
                break;
            }
        }
    }
    part.mt = Some(mt);
    part.y = Some(y);
    part
}

fn finish_marginals(tallies: Vec<(String, MarginalTally)>) -> Vec<MarginalResult> {
    tallies
        .into_iter()
        .map(|(component, t)| {
            let test = t.test();
            MarginalResult {
                component,
                passed: !test.rejects(MARGINAL_LEVEL),
                test,
            }
        })
        .collect()
}

/// Runs `seeds` independent coupled trajectories of `events` steps each from
/// `(0, ∅, y = 0)`.
pub fn run_bd_suite(rates: &Rates, events: u64, seeds: u64, base: RngSeed) -> CouplingReport {
    let parts: Vec<BdPart> = (0..seeds)
        .into_par_iter()
        .map(|i| bd_run(rates, events, base.replica(i)))
        .collect();
    let mut mt = MarginalTally::new(&["ATTACH", "DETACH", "HYDROLYZE"]);
    let mut y = MarginalTally::new(&["BIRTH", "DEATH"]);
    let mut violations = 0;
    let mut first = None;
    for p in &parts {
        violations += p.violations;
        if first.is_none() {
            first.clone_from(&p.first);
        }
        mt.merge(p.mt.as_ref().unwrap());
        y.merge(p.y.as_ref().unwrap());
    }
    CouplingReport {
        suite: "bd".into(),
        rates: *rates,
        m: None,
        events,
        seeds,
        violations,
        first_violation: first,
        verdict_histogram: BTreeMap::new(),
        marginals: finish_marginals(vec![("mt".into(), mt), ("y".into(), y)]),
        mixed_occupation: None,
        plus_occupation: None,
    }
}

fn word_probs(w: u64, rates: &Rates) -> [f64; 3] {
    let plus = w & 1 == 1;
    let a = rates.attach_rate(plus);
    let d = if plus { 0.0 } else { rates.mu };
    let h = w.count_ones() as f64 * HYDROLYSIS_RATE;
    let t = a + d + h;
    [a / t, d / t, h / t]
}

fn word_index(mv: WordMove) -> usize {
    match mv {
        WordMove::Attach => 0,
        WordMove::Detach => 1,
        WordMove::Hydrolyze(_) => 2,
    }
}

#[derive(Default)]
struct PairPart {
    violations: u64,
    first: Option<String>,
    histogram: BTreeMap<String, u64>,
    lower: Option<MarginalTally>,
    upper: Option<MarginalTally>,
    time: f64,
    time_mixed: f64,
    time_lower_plus: f64,
    time_upper_plus: f64,
}

fn pair_run(rates: &Rates, m: usize, events: u64, seed: RngSeed) -> PairPart {
    let mut rng = seed.rng();
    let regimes = Regime::applicable(rates);
    let mut s = PairCoupledState::origin(m);
    let cats = ["ATTACH", "DETACH", "HYDROLYZE"];
    let mut lower = MarginalTally::new(&cats);
    let mut upper = MarginalTally::new(&cats);
    let mut part = PairPart::default();
    for _ in 0..events {
        let pl = word_probs(s.lower, rates);
        let pu = word_probs(s.upper, rates);
        let (lo_plus, up_plus) = (s.lower & 1 == 1, s.upper & 1 == 1);
        match pair_coupled_step_in_place(&mut s, rates, &mut rng) {
            Ok((dt, mv)) => {
                part.time += dt;
                if lo_plus {
                    part.time_lower_plus += dt;
                }
                if up_plus {
                    part.time_upper_plus += dt;
                    if !lo_plus {
                        part.time_mixed += dt;
                    }
                }
                if let Some(l) = mv.lower {
                    lower.record(word_index(l), &pl);
                }
                if let Some(u) = mv.upper {
                    upper.record(word_index(u), &pu);
                }
                for &r in &regimes {
                    let d = check_discrepancy_structure(s.lower, s.upper, r);
                    *part.histogram.entry(d.label().to_string()).or_insert(0) += 1;
                    if d == Discrepancy::Malformed {
                        part.violations += 1;
                        if part.first.is_none() {
                            part.first = Some(format!(
                                "{r:?} structure broken: lower {} upper {}",
                                ProjectedState::new(m + 1, s.lower),
                                s.upper_state()
                            ));
                        }
                    }
                }
            }
            Err(e) => {
                part.violations += 1;
                part.first.get_or_insert(e.to_string());
                break;
            }
        }
    }
    part.lower = Some(lower);
    part.upper = Some(upper);
    part
}

/// Runs `seeds` coupled order-`m` / order-`m+1` trajectories of `events`
/// steps each from `(∅, ∅)`. The histogram counts one verdict per event and
/// applicable regime.
pub fn run_pair_suite(rates: &Rates, m: usize, events: u64, seeds: u64, base: RngSeed) -> CouplingReport {
    let parts: Vec<PairPart> = (0..seeds)
        .into_par_iter()
        .map(|i| pair_run(rates, m, events, base.replica(i)))
        .collect();
    let cats = ["ATTACH", "DETACH", "HYDROLYZE"];
    let mut lower = MarginalTally::new(&cats);
    let mut upper = MarginalTally::new(&cats);
    let mut hist = BTreeMap::new();
    let (mut violations, mut first) = (0, None);
    let (mut t, mut t_mixed, mut t_lo, mut t_up) = (0.0, 0.0, 0.0, 0.0);
    for p in &parts {
        violations += p.violations;
        if first.is_none() {
            first.clone_from(&p.first);
        }
        for (k, v) in &p.histogram {
            *hist.entry(k.clone()).or_insert(0) += v;
        }
        lower.merge(p.lower.as_ref().unwrap());
        upper.merge(p.upper.as_ref().unwrap());
        t += p.time;
        t_mixed += p.time_mixed;
        t_lo += p.time_lower_plus;
        t_up += p.time_upper_plus;
    }
    CouplingReport {
        suite: "pair".into(),
        rates: *rates,
        m: Some(m),
        events,
        seeds,
        violations,
        first_violation: first,
        verdict_histogram: hist,
        marginals: finish_marginals(vec![("lower".into(), lower), ("upper".into(), upper)]),
        mixed_occupation: Some(t_mixed / t),
        plus_occupation: Some((t_lo / t, t_up / t)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Head;
    use crate::projected::{build_generator, stationary, DEFAULT_TOL};
    use proptest::prelude::*;

    fn rates(lp: f64, lm: f64, mu: f64) -> Rates {
        Rates::new(lp, lm, mu).unwrap()
    }

    fn word(m: usize, text: &str) -> u64 {
        let w = crate::model::parse_word(text).unwrap();
        assert_eq!(w.len(), m + 1);
        w.iter().enumerate().fold(0, |acc, (j, s)| acc | (u64::from(s.is_plus()) << j))
    }

    #[test]
    fn bd_first_step_from_origin() {
        let r = rates(0.5, 1.5, 1.0);
        let mut rng = RngSeed::new(1).rng();
        for _ in 0..200 {
            let mut s = BdCoupledState::origin();
            let (_, mv) = bd_coupled_step_in_place(&mut s, &r, &mut rng).unwrap();
            match mv.mt {
                Some(Event::Attach) => assert_eq!((s.mt.head.norm(), s.y), (1, 1)),
                Some(Event::Detach) => assert_eq!((s.mt.x, s.y), (-1, 0)),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn bd_detects_a_broken_invariant() {
        let s = BdCoupledState {
            mt: MtState::new(0, "⊕⊕".parse::<Head>().unwrap()),
            y: 1,
        };
        let r = rates(1.0, 1.0, 1.0);
        assert!(bd_coupled_step(&s, &r, &mut RngSeed::new(0).rng()).is_err());
    }

    #[test]
    fn pair_first_attach_from_empty() {
        let r = rates(1.0, 1.0, 1.0);
        let mut rng = RngSeed::new(3).rng();
        loop {
            let mut s = PairCoupledState::origin(2);
            let (_, mv) = pair_coupled_step_in_place(&mut s, &r, &mut rng).unwrap();
            if mv.lower == Some(WordMove::Attach) {
                assert_eq!(mv.upper, Some(WordMove::Attach));
                assert_eq!((s.lower, s.upper), (1, 1));
                assert!(s.ordered());
                break;
            }
        }
    }

    #[test]
    fn discrepancy_shapes() {
        use Discrepancy::*;
        let m = 1;
        let up = |t| word(m + 1, t);
        for r in [Regime::MinusDominant, Regime::PlusDominant] {
            assert_eq!(check_discrepancy_structure(up("⊖⊕⊕"), up("⊖⊕⊕"), r), Equal);
            assert_eq!(check_discrepancy_structure(up("⊖⊖⊖"), up("⊖⊕⊖"), r), Single { j0: 1 });
            assert_eq!(check_discrepancy_structure(up("⊖⊖⊕"), up("⊕⊖⊕"), r), Single { j0: 2 });
            // lower PLUS where upper is MINUS
            assert_eq!(check_discrepancy_structure(up("⊖⊕⊖"), up("⊖⊖⊕"), r), Malformed);
        }
        assert_eq!(
            check_discrepancy_structure(up("⊖⊖⊖"), up("⊕⊖⊕"), Regime::PlusDominant),
            Interval { j0: 0, j1: 2 }
        );
        assert_eq!(
            check_discrepancy_structure(up("⊖⊖⊖"), up("⊕⊖⊕"), Regime::MinusDominant),
            Malformed
        );
        // difference not at the left-most PLUS of the upper word
        assert_eq!(
            check_discrepancy_structure(up("⊕⊖⊖"), up("⊕⊕⊖"), Regime::MinusDominant),
            Malformed
        );
        // lower PLUS above j0
        assert_eq!(
            check_discrepancy_structure(up("⊕⊖⊖"), up("⊕⊖⊕"), Regime::PlusDominant),
            Malformed
        );
    }

    #[test]
    fn bd_suite_small() {
        for r in [rates(0.5, 2.0, 1.0), rates(2.0, 0.5, 1.0)] {
            let rep = run_bd_suite(&r, 20_000, 4, RngSeed::new(9));
            assert_eq!(rep.violations, 0, "{:?}", rep.first_violation);
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn pair_suite_small() {
        for r in [rates(0.5, 2.0, 1.0), rates(2.0, 1.0, 1.0), rates(1.0, 1.0, 1.5)] {
            let rep = run_pair_suite(&r, 3, 20_000, 4, RngSeed::new(9));
            assert_eq!(rep.violations, 0, "{:?}", rep.first_violation);
            assert!(rep.passed(), "{rep:?}");
            let (lo, up) = rep.plus_occupation.unwrap();
            assert!((rep.mixed_occupation.unwrap() - (up - lo)).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_occupation_tracks_stationary_gap() {
        let r = rates(1.0, 1.0, 1.0);
        let m = 2;
        let rep = run_pair_suite(&r, m, 50_000, 8, RngSeed::new(4));
        let lo = stationary(&build_generator(m, r), DEFAULT_TOL).unwrap().pi_plus;
        let hi = stationary(&build_generator(m + 1, r), DEFAULT_TOL).unwrap().pi_plus;
        let (a, b) = rep.plus_occupation.unwrap();
        assert!((a - lo).abs() < 0.02, "{a} vs {lo}");
        assert!((b - hi).abs() < 0.02, "{b} vs {hi}");
        assert!((rep.mixed_occupation.unwrap() - (hi - lo)).abs() < 0.01);
    }

    #[test]
    fn suites_are_reproducible() {
        let r = rates(1.3, 0.7, 1.0);
        assert_eq!(
            run_pair_suite(&r, 2, 2000, 3, RngSeed::new(1)),
            run_pair_suite(&r, 2, 2000, 3, RngSeed::new(1))
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn bd_domination_holds(lp in 0.1f64..3.0, lm in 0.1f64..3.0, mu in 0.1f64..3.0, seed in any::<u64>()) {
            let r = rates(lp, lm, mu);
            let mut rng = RngSeed::new(seed).rng();
            let mut s = BdCoupledState::origin();
            for _ in 0..2000 {
                bd_coupled_step_in_place(&mut s, &r, &mut rng).unwrap();
                prop_assert!(s.mt.head.norm() as u64 <= s.y);
            }
        }

        #[test]
        fn pair_structure_holds(lp in 0.1f64..3.0, lm in 0.1f64..3.0, mu in 0.1f64..3.0, m in 0usize..5, seed in any::<u64>()) {
            let r = rates(lp, lm, mu);
            let mut rng = RngSeed::new(seed).rng();
            let mut s = PairCoupledState::origin(m);
            for _ in 0..2000 {
                pair_coupled_step_in_place(&mut s, &r, &mut rng).unwrap();
                for reg in Regime::applicable(&r) {
                    prop_assert_ne!(check_discrepancy_structure(s.lower, s.upper, reg), Discrepancy::Malformed);
                }
            }
        }
    }
}
