//! Exact event-driven simulation of the full process.
//!
//! Each step draws one exponential holding time from the total exit rate and
//! then picks the event with probability proportional to its rate (the
//! direct method). Renewal cycles run from `(0, ∅)` to the next empty-head
//! state; their increments are i.i.d., so the velocity is the ratio
//! `E dx / E dtau`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{total_rate, Event, Head, MtState, Rates, HYDROLYSIS_RATE};
use crate::rng::RngSeed;

/// Default jump cap for one renewal cycle.
pub const DEFAULT_CYCLE_CAP: u64 = 1_000_000_000;
/// Default time cap for one lifetime draw.
pub const DEFAULT_LIFETIME_TIME_CAP: f64 = 1.0e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("renewal cycle exceeded {cap} jumps without emptying the head")]
    CycleOverflow { cap: u64 },
    #[error("velocity estimation needs at least 2 cycles, got {0}")]
    TooFewCycles(u64),
}

/// Result of one simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next: MtState,
    pub dt: f64,
    pub event: Event,
}

pub(crate) fn exp_holding<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Advances `state` by one event in place and returns `(dt, event)`.
pub fn step_in_place<R: Rng + ?Sized>(
    state: &mut MtState,
    rates: &Rates,
    rng: &mut R,
) -> (f64, Event) {
    let total = total_rate(state, rates);
    let dt = exp_holding(total, rng);
    let event = choose_event(&state.head, rates, total, rng);
    state.apply(event);
    (dt, event)
}

/// Categorical draw over the list produced by
/// [`enabled_transitions`](crate::model::enabled_transitions), in the same
/// order.
fn choose_event<R: Rng + ?Sized>(head: &Head, rates: &Rates, total: f64, rng: &mut R) -> Event {
    let plus_ended = head.is_plus_ended();
    let mut u = rng.random::<f64>() * total;
    let attach = rates.attach_rate(plus_ended);
    if u < attach {
        return Event::Attach;
    }
    u -= attach;
    if !plus_ended {
        if u < rates.mu {
            return Event::Detach;
        }
        u -= rates.mu;
    }
    let n = head.norm();
    if n == 0 {
        // only reachable through rounding at the top of the range
        return if plus_ended { Event::Attach } else { Event::Detach };
    }
    let k = ((u / HYDROLYSIS_RATE) as usize).min(n - 1);
    Event::Hydrolyze(head.nth_plus(k).expect("k < norm"))
}

/// One step from `state`; the input is left untouched.
pub fn step<R: Rng + ?Sized>(state: &MtState, rates: &Rates, rng: &mut R) -> Step {
    let mut next = state.clone();
    let (dt, event) = step_in_place(&mut next, rates, rng);
    Step { next, dt, event }
}

/// One renewal increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSample {
    pub dx: i64,
    pub dtau: f64,
    pub jumps: u64,
}

/// Simulates from `(0, ∅)` until the head is empty again.
pub fn run_cycle<R: Rng + ?Sized>(rates: &Rates, rng: &mut R) -> Result<CycleSample, SimError> {
    run_cycle_capped(rates, DEFAULT_CYCLE_CAP, rng)
}

pub fn run_cycle_capped<R: Rng + ?Sized>(
    rates: &Rates,
    cap: u64,
    rng: &mut R,
) -> Result<CycleSample, SimError> {
    let mut state = MtState::origin();
    let mut dtau = 0.0;
    let mut jumps = 0u64;
    loop {
        let (dt, _) = step_in_place(&mut state, rates, rng);
        dtau += dt;
        jumps += 1;
        if state.head.is_empty() {
            return Ok(CycleSample {
                dx: state.x,
                dtau,
                jumps,
            });
        }
        if jumps >= cap {
            return Err(SimError::CycleOverflow { cap });
        }
    }
}

/// Ratio estimate of the velocity from renewal cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityEstimate {
    pub v_hat: f64,
    pub std_err: f64,
    pub n_cycles: u64,
    pub mean_dx: f64,
    pub mean_dtau: f64,
}

impl VelocityEstimate {
    /// Whether `v` lies within `z` standard errors of the estimate.
    pub fn covers(&self, v: f64, z: f64) -> bool {
        (self.v_hat - v).abs() <= z * self.std_err
    }
}

/// Running sums of cycle statistics. Merging is exact for the integer parts
/// and associative up to floating-point rounding, so callers that need
/// bit-reproducibility merge in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CycleAccumulator {
    pub n: u64,
    pub sum_dx: f64,
    pub sum_dtau: f64,
    pub sum_dx2: f64,
    pub sum_dtau2: f64,
    pub sum_dx_dtau: f64,
}

impl CycleAccumulator {
    pub fn push(&mut self, c: &CycleSample) {
        let dx = c.dx as f64;
        self.n += 1;
        self.sum_dx += dx;
        self.sum_dtau += c.dtau;
        self.sum_dx2 += dx * dx;
        self.sum_dtau2 += c.dtau * c.dtau;
        self.sum_dx_dtau += dx * c.dtau;
    }

    pub fn merge(&mut self, other: &CycleAccumulator) {
        self.n += other.n;
        self.sum_dx += other.sum_dx;
        self.sum_dtau += other.sum_dtau;
        self.sum_dx2 += other.sum_dx2;
        self.sum_dtau2 += other.sum_dtau2;
        self.sum_dx_dtau += other.sum_dx_dtau;
    }

    /// Ratio estimator with a delta-method standard error:
    /// `Var(v) ≈ Var(dx − v·dtau) / (n · mean_dtau²)`.
    pub fn estimate(&self) -> Result<VelocityEstimate, SimError> {
        if self.n < 2 {
            return Err(SimError::TooFewCycles(self.n));
        }
        let n = self.n as f64;
        let mean_dx = self.sum_dx / n;
        let mean_dtau = self.sum_dtau / n;
        let v = mean_dx / mean_dtau;
        let var_x = (self.sum_dx2 - n * mean_dx * mean_dx) / (n - 1.0);
        let var_t = (self.sum_dtau2 - n * mean_dtau * mean_dtau) / (n - 1.0);
        let cov = (self.sum_dx_dtau - n * mean_dx * mean_dtau) / (n - 1.0);
        let var_resid = (var_x - 2.0 * v * cov + v * v * var_t).max(0.0);
        Ok(VelocityEstimate {
            v_hat: v,
            std_err: (var_resid / n).sqrt() / mean_dtau,
            n_cycles: self.n,
            mean_dx,
            mean_dtau,
        })
    }
}

/// Runs `n_cycles` independent cycles on one stream.
pub fn estimate_velocity<R: Rng + ?Sized>(
    rates: &Rates,
    n_cycles: u64,
    rng: &mut R,
) -> Result<VelocityEstimate, SimError> {
    if n_cycles < 2 {
        return Err(SimError::TooFewCycles(n_cycles));
    }
    let mut acc = CycleAccumulator::default();
    for _ in 0..n_cycles {
        acc.push(&run_cycle(rates, rng)?);
    }
    acc.estimate()
}

/// Number of replicas the parallel estimator splits its budget into. Fixed so
/// that results do not depend on the worker count.
pub const VELOCITY_REPLICAS: u64 = 64;

/// Same estimator, with the budget split over [`VELOCITY_REPLICAS`] streams
/// derived from `seed` and run on the current rayon pool.
pub fn estimate_velocity_parallel(
    rates: &Rates,
    n_cycles: u64,
    seed: RngSeed,
) -> Result<VelocityEstimate, SimError> {
    if n_cycles < 2 {
        return Err(SimError::TooFewCycles(n_cycles));
    }
    let replicas = VELOCITY_REPLICAS.min(n_cycles);
    let parts: Vec<Result<CycleAccumulator, SimError>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let share = n_cycles / replicas + u64::from(i < n_cycles % replicas);
            let mut rng = seed.replica(i).rng();
            let mut acc = CycleAccumulator::default();
            for _ in 0..share {
                acc.push(&run_cycle(rates, &mut rng)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = CycleAccumulator::default();
    for p in parts {
        total.merge(&p?);
    }
    total.estimate()
}

/// Where a lifetime draw starts: a lone PLUS monomer at the active end, or an
/// empty head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LifetimeStart {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeCap {
    pub max_time: f64,
    pub max_jumps: u64,
}

impl Default for LifetimeCap {
    fn default() -> Self {
        Self {
            max_time: DEFAULT_LIFETIME_TIME_CAP,
            max_jumps: DEFAULT_CYCLE_CAP,
        }
    }
}

/// One completed lifetime draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeSample {
    pub t_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LifetimeOutcome {
    Finite(LifetimeSample),
    /// The cap was hit before the monomer departed.
    Censored { cap: LifetimeCap, elapsed: f64, jumps: u64 },
}

impl LifetimeOutcome {
    pub fn finite(&self) -> Option<f64> {
        match self {
            LifetimeOutcome::Finite(s) => Some(s.t_plus),
            LifetimeOutcome::Censored { .. } => None,
        }
    }
}

/// Draws `T⊕`: the time from `(0, ⊕)` until `(−1, ∅)`.
pub fn sample_lifetime<R: Rng + ?Sized>(rates: &Rates, rng: &mut R) -> LifetimeOutcome {
    sample_lifetime_from(rates, LifetimeStart::Plus, LifetimeCap::default(), rng)
}

/// Draws the time from `(0, ⊕)` or `(0, ∅)` until the state `(−1, ∅)`.
pub fn sample_lifetime_from<R: Rng + ?Sized>(
    rates: &Rates,
    start: LifetimeStart,
    cap: LifetimeCap,
    rng: &mut R,
) -> LifetimeOutcome {
    let head = match start {
        LifetimeStart::Plus => Head::single_plus(),
        LifetimeStart::Minus => Head::empty(),
    };
    let mut state = MtState::new(0, head);
    let mut t = 0.0;
    let mut jumps = 0u64;
    loop {
        let (dt, _) = step_in_place(&mut state, rates, rng);
        t += dt;
        jumps += 1;
        if state.x == -1 && state.head.is_empty() {
            return LifetimeOutcome::Finite(LifetimeSample { t_plus: t });
        }
        if t >= cap.max_time || jumps >= cap.max_jumps {
            return LifetimeOutcome::Censored {
                cap,
                elapsed: t,
                jumps,
            };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    MaxTime(f64),
    MaxEvents(u64),
}

/// One row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub t: f64,
    pub x: i64,
    pub head_len: usize,
    pub head_norm: usize,
}

impl PathRecord {
    fn of(t: f64, s: &MtState) -> Self {
        Self {
            t,
            x: s.x,
            head_len: s.head.len(),
            head_norm: s.head.norm(),
        }
    }
}

/// Trajectory from `(0, ∅)`, one record per event plus the initial state.
/// With a time horizon the last event is the final one occurring before it.
pub fn simulate_path<R: Rng + ?Sized>(
    rates: &Rates,
    horizon: Horizon,
    rng: &mut R,
) -> Vec<PathRecord> {
    let mut state = MtState::origin();
    let mut t = 0.0;
    let mut out = vec![PathRecord::of(t, &state)];
    match horizon {
        Horizon::MaxEvents(n) => {
            for _ in 0..n {
                let (dt, _) = step_in_place(&mut state, rates, rng);
                t += dt;
                out.push(PathRecord::of(t, &state));
            }
        }
        Horizon::MaxTime(t_max) => loop {
            let mut next = state.clone();
            let (dt, _) = step_in_place(&mut next, rates, rng);
            if t + dt > t_max {
                break;
            }
            t += dt;
            state = next;
            out.push(PathRecord::of(t, &state));
        },
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::enabled_transitions;

    fn rates(lp: f64, lm: f64, mu: f64) -> Rates {
        Rates::new(lp, lm, mu).unwrap()
    }

    #[test]
    fn step_is_deterministic_for_a_seed() {
        let r = rates(1.0, 1.0, 1.0);
        let s = MtState::new(2, "⊕⊖⊕".parse().unwrap());
        let a = step(&s, &r, &mut RngSeed::new(11).rng());
        let b = step(&s, &r, &mut RngSeed::new(11).rng());
        assert_eq!(a, b);
    }

    #[test]
    fn step_targets_are_enabled_transitions() {
        let r = rates(0.4, 1.7, 0.9);
        let mut rng = RngSeed::new(5).rng();
        let mut s = MtState::origin();
        for _ in 0..2000 {
            let st = step(&s, &r, &mut rng);
            let ts = enabled_transitions(&s, &r);
            let t = ts.iter().find(|t| t.event == st.event).expect("enabled");
            assert_eq!(t.next, st.next);
            assert!(st.dt > 0.0);
            s = st.next;
        }
    }

    #[test]
    fn step_frequencies_from_empty_head() {
        // two clocks of rate 1: ATTACH/DETACH with probability 1/2, dt ~ Exp(2)
        let r = rates(1.0, 1.0, 1.0);
        let mut rng = RngSeed::new(99).rng();
        let n = 100_000;
        let mut attach = 0u32;
        let mut sum_dt = 0.0;
        for _ in 0..n {
            let st = step(&MtState::origin(), &r, &mut rng);
            attach += u32::from(st.event == Event::Attach);
            sum_dt += st.dt;
        }
        let p = attach as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() + 1e-3);
        let mean = sum_dt / n as f64;
        assert!((mean - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt() + 1e-3);
    }

    #[test]
    fn step_frequencies_plus_plus_head() {
        let lp = 1.5;
        let r = rates(lp, 1.0, 1.0);
        let s = MtState::new(2, "⊕⊕".parse().unwrap());
        let mut rng = RngSeed::new(3).rng();
        let n = 60_000;
        let mut counts = [0u32; 3];
        for _ in 0..n {
            match step(&s, &r, &mut rng).event {
                Event::Attach => counts[0] += 1,
                Event::Hydrolyze(0) => counts[1] += 1,
                Event::Hydrolyze(1) => counts[2] += 1,
                e => panic!("unexpected {e:?}"),
            }
        }
        let probs = [lp / (lp + 2.0), 1.0 / (lp + 2.0), 1.0 / (lp + 2.0)];
        for (c, p) in counts.iter().zip(probs) {
            let f = *c as f64 / n as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
        }
    }

    #[test]
    fn cycle_invariants() {
        let r = rates(1.0, 1.0, 1.0);
        let mut rng = RngSeed::new(1).rng();
        for _ in 0..5000 {
            let c = run_cycle(&r, &mut rng).unwrap();
            assert!(c.dtau > 0.0 && c.jumps >= 1);
            assert!(c.dx >= -1 && c.dx <= c.jumps as i64);
            if c.dx == -1 {
                assert_eq!(c.jumps, 1);
            }
        }
    }

    #[test]
    fn cycle_cap_reports_overflow() {
        let r = rates(5.0, 5.0, 0.1);
        let mut rng = RngSeed::new(2).rng();
        let mut overflowed = false;
        for _ in 0..100 {
            if let Err(SimError::CycleOverflow { cap }) = run_cycle_capped(&r, 2, &mut rng) {
                assert_eq!(cap, 2);
                overflowed = true;
            }
        }
        assert!(overflowed);
    }

    #[test]
    fn estimator_needs_two_cycles() {
        let r = rates(1.0, 1.0, 1.0);
        assert!(matches!(
            estimate_velocity(&r, 1, &mut RngSeed::new(0).rng()),
            Err(SimError::TooFewCycles(1))
        ));
    }

    #[test]
    fn parallel_estimate_is_reproducible() {
        let r = rates(1.0, 1.0, 1.0);
        let a = estimate_velocity_parallel(&r, 5000, RngSeed::new(8)).unwrap();
        let b = estimate_velocity_parallel(&r, 5000, RngSeed::new(8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_cycles, 5000);
    }

    #[test]
    fn lifetime_stops_at_minus_one_with_empty_head() {
        let r = rates(0.1, 0.1, 2.0);
        let mut rng = RngSeed::new(4).rng();
        for _ in 0..2000 {
            let t = sample_lifetime(&r, &mut rng).finite().unwrap();
            assert!(t > 0.0 && t.is_finite());
        }
    }

    #[test]
    fn lifetime_is_censored_in_growing_phase() {
        let r = rates(1.0, 3.0, 1.0);
        let mut rng = RngSeed::new(4).rng();
        let cap = LifetimeCap {
            max_time: 200.0,
            max_jumps: u64::MAX,
        };
        let censored = (0..200)
            .filter(|_| {
                matches!(
                    sample_lifetime_from(&r, LifetimeStart::Plus, cap, &mut rng),
                    LifetimeOutcome::Censored { .. }
                )
            })
            .count();
        assert!(censored > 50, "censored = {censored}");
    }

    #[test]
    fn path_horizons() {
        let r = rates(1.0, 3.0, 1.0);
        let p = simulate_path(&r, Horizon::MaxEvents(0), &mut RngSeed::new(1).rng());
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].t, p[0].x, p[0].head_len), (0.0, 0, 0));

        let p = simulate_path(&r, Horizon::MaxTime(50.0), &mut RngSeed::new(1).rng());
        assert!(p.last().unwrap().t <= 50.0);
        for w in p.windows(2) {
            let dx = w[1].x - w[0].x;
            let dn = w[1].head_norm as i64 - w[0].head_norm as i64;
            // position moves iff attach/detach; attach also adds a PLUS
            match dx {
                1 => assert_eq!(dn, 1),
                -1 => assert_eq!(dn, 0),
                0 => assert_eq!(dn, -1),
                _ => panic!("jump {dx}"),
            }
        }
    }

    #[test]
    fn long_run_growth_is_positive_when_minus_attachment_dominates() {
        let r = rates(1.0, 3.0, 1.0);
        let p = simulate_path(&r, Horizon::MaxTime(2000.0), &mut RngSeed::new(21).rng());
        let last = p.last().unwrap();
        assert!(last.x as f64 / last.t > 0.5);
    }
}
