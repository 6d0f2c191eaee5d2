//! Phase classification and zero-velocity boundaries in `μ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Rates, RatesError};
use crate::projected::{self, SolverError};
use crate::rng::RngSeed;
use crate::sim::{self, SimError, VelocityEstimate};

pub const DEFAULT_ORDER: usize = 12;
pub const DEFAULT_MC_CYCLES: u64 = 1_000_000;
/// Width of the Monte Carlo confidence interval in standard errors.
pub const DEFAULT_Z: f64 = 3.0;
/// Largest factor by which the initial bracket is grown or shrunk.
pub const MAX_BRACKET_DOUBLINGS: u32 = 10;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("no sign change of the velocity for mu in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    TransientPlus,
    TransientMinus,
    NearBoundary,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::TransientPlus => "TRANSIENT_PLUS",
            Verdict::TransientMinus => "TRANSIENT_MINUS",
            Verdict::NearBoundary => "NEAR_BOUNDARY",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Criterion {
    /// `λ⁻ ≥ μ + λ⁺`.
    Shortcut,
    ExactVelocity,
    MonteCarloInterval,
}

/// One piece of evidence: the quantity inspected and the threshold it was
/// compared with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub criterion: Criterion,
    pub value: f64,
    pub tolerance: f64,
    /// Standard error for Monte Carlo evidence, order for exact evidence.
    pub aux: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Order of the exact check; `None` skips it.
    pub m: Option<usize>,
    pub tol: f64,
    /// Monte Carlo budget in cycles; 0 skips the check.
    pub mc_cycles: u64,
    pub z: f64,
    pub seed: RngSeed,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            m: Some(DEFAULT_ORDER),
            tol: 1e-9,
            mc_cycles: DEFAULT_MC_CYCLES,
            z: DEFAULT_Z,
            seed: RngSeed::default(),
        }
    }
}

/// Zero of `λ⁺π₊ + (λ⁻ − μ)π₋` with the order-0 law.
pub fn closed_form_boundary_m0(lambda_plus: f64, lambda_minus: f64) -> f64 {
    lambda_minus * (1.0 + lambda_plus)
}

/// Applies, in order: the shortcut, the exact finite-order velocity (which
/// can only certify growth), and a Monte Carlo interval.
pub fn classify(rates: &Rates, cfg: &ClassifyConfig) -> Result<Classification, PhaseError> {
    rates.validate()?;
    let mut evidence = Vec::new();
    let margin = rates.lambda_minus - rates.mu - rates.lambda_plus;
    evidence.push(Evidence {
        criterion: Criterion::Shortcut,
        value: margin,
        tolerance: 0.0,
        aux: None,
    });
    if margin >= 0.0 {
        return Ok(Classification {
            verdict: Verdict::TransientPlus,
            evidence,
        });
    }
    if let Some(m) = cfg.m {
        let v = projected::exact_velocity(m, *rates)?;
        evidence.push(Evidence {
            criterion: Criterion::ExactVelocity,
            value: v,
            tolerance: cfg.tol,
            aux: Some(m as f64),
        });
        if v > cfg.tol {
            return Ok(Classification {
                verdict: Verdict::TransientPlus,
                evidence,
            });
        }
    }
    if cfg.mc_cycles >= 2 {
        let est = sim::estimate_velocity_parallel(rates, cfg.mc_cycles, cfg.seed)?;
        let half = cfg.z * est.std_err;
        evidence.push(Evidence {
            criterion: Criterion::MonteCarloInterval,
            value: est.v_hat,
            tolerance: half,
            aux: Some(est.std_err),
        });
        if est.v_hat - half > 0.0 {
            return Ok(Classification {
                verdict: Verdict::TransientPlus,
                evidence,
            });
        }
        if est.v_hat + half < 0.0 {
            return Ok(Classification {
                verdict: Verdict::TransientMinus,
                evidence,
            });
        }
    }
    Ok(Classification {
        verdict: Verdict::NearBoundary,
        evidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundaryMethod {
    M0ClosedForm,
    ExactM { m: usize },
    MonteCarlo { cycles: u64, seed: RngSeed },
}

impl BoundaryMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryMethod::M0ClosedForm => "M0_CLOSED_FORM",
            BoundaryMethod::ExactM { .. } => "EXACT_M",
            BoundaryMethod::MonteCarlo { .. } => "MONTE_CARLO",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub mu_star: f64,
    pub method: BoundaryMethod,
    pub tol: f64,
    /// Velocity at `mu_star` under the method.
    pub velocity: f64,
    /// Standard error of the velocity (Monte Carlo only).
    pub velocity_std_err: Option<f64>,
    /// Standard error of `mu_star` propagated through the local slope
    /// (Monte Carlo only).
    pub mu_std_err: Option<f64>,
    pub evaluations: usize,
}

struct Probe<'a> {
    lp: f64,
    lm: f64,
    method: &'a BoundaryMethod,
    evaluations: usize,
}

impl Probe<'_> {
    fn eval(&mut self, mu: f64) -> Result<(f64, Option<VelocityEstimate>), PhaseError> {
        self.evaluations += 1;
        let rates = Rates::new(self.lp, self.lm, mu)?;
        match *self.method {
            BoundaryMethod::M0ClosedForm => Ok((projected::exact_velocity(0, rates)?, None)),
            BoundaryMethod::ExactM { m } => Ok((projected::exact_velocity(m, rates)?, None)),
            BoundaryMethod::MonteCarlo { cycles, seed } => {
                // the same seed at every μ: common random numbers keep the
                // estimated velocity curve nearly monotone
                let est = sim::estimate_velocity_parallel(&rates, cycles, seed)?;
                Ok((est.v_hat, Some(est)))
            }
        }
    }
}

/// Root in `μ` of the velocity at fixed `(λ⁺, λ⁻)`.
///
/// The bracket starts at the order-0 boundary and is doubled (or halved)
/// at most [`MAX_BRACKET_DOUBLINGS`] times; the sign change is verified, not
/// assumed. Bisection stops when `|v| ≤ tol` or the bracket is narrower
/// than `tol·μ`.
pub fn find_boundary(
    lambda_plus: f64,
    lambda_minus: f64,
    method: BoundaryMethod,
    tol: f64,
) -> Result<BoundaryPoint, PhaseError> {
    Rates::new(lambda_plus, lambda_minus, 1.0)?;
    if !(tol > 0.0) {
        return Err(PhaseError::InvalidConfig(format!("tol = {tol}")));
    }
    let mu0 = closed_form_boundary_m0(lambda_plus, lambda_minus);
    let mut probe = Probe {
        lp: lambda_plus,
        lm: lambda_minus,
        method: &method,
        evaluations: 0,
    };
    if let BoundaryMethod::M0ClosedForm = method {
        let (v, _) = probe.eval(mu0)?;
        return Ok(BoundaryPoint {
            lambda_plus,
            lambda_minus,
            mu_star: mu0,
            method,
            tol,
            velocity: v,
            velocity_std_err: None,
            mu_std_err: None,
            evaluations: probe.evaluations,
        });
    }

    let (v0, e0) = probe.eval(mu0)?;
    if v0.abs() <= tol {
        return finish(&mut probe, lambda_plus, lambda_minus, mu0, v0, e0, None, tol);
    }
    // (lo, v_lo ≥ 0) and (hi, v_hi < 0)
    let (mut lo, mut hi) = (mu0, mu0);
    let (mut v_lo, mut v_hi) = (v0, v0);
    let grow = v0 > 0.0;
    let mut found = false;
    for _ in 0..MAX_BRACKET_DOUBLINGS {
        if grow {
            lo = hi;
            v_lo = v_hi;
            hi *= 2.0;
            v_hi = probe.eval(hi)?.0;
            if v_hi <= 0.0 {
                found = true;
                break;
            }
        } else {
            hi = lo;
            v_hi = v_lo;
            lo /= 2.0;
            v_lo = probe.eval(lo)?.0;
            if v_lo >= 0.0 {
                found = true;
                break;
            }
        }
    }
    if !found {
        let f = f64::from(1u32 << MAX_BRACKET_DOUBLINGS);
        let (a, b) = if grow { (mu0, mu0 * f) } else { (mu0 / f, mu0) };
        return Err(PhaseError::BracketFailure { lo: a, hi: b });
    }
    if v_hi == 0.0 {
        return finish(&mut probe, lambda_plus, lambda_minus, hi, 0.0, None, Some((lo, v_lo, hi, v_hi)), tol);
    }
    if v_lo == 0.0 {
        return finish(&mut probe, lambda_plus, lambda_minus, lo, 0.0, None, Some((lo, v_lo, hi, v_hi)), tol);
    }

    let mut best = (0.5 * (lo + hi), f64::INFINITY, None);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let (v, est) = probe.eval(mid)?;
        best = (mid, v, est);
        if v.abs() <= tol || hi - lo <= tol * mid {
            break;
        }
        if v > 0.0 {
            lo = mid;
            v_lo = v;
        } else {
            hi = mid;
            v_hi = v;
        }
    }
    let (mu, v, est) = best;
    finish(&mut probe, lambda_plus, lambda_minus, mu, v, est, Some((lo, v_lo, hi, v_hi)), tol)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    probe: &mut Probe<'_>,
    lambda_plus: f64,
    lambda_minus: f64,
    mu: f64,
    v: f64,
    est: Option<VelocityEstimate>,
    bracket: Option<(f64, f64, f64, f64)>,
    tol: f64,
) -> Result<BoundaryPoint, PhaseError> {
    let method = *probe.method;
    let mut mu_std_err = None;
    if let Some(e) = est {
        // local slope over a ±5% span; the bracket itself may be too narrow
        // for the Monte Carlo noise
        let span = 0.05 * mu;
        let (up, _) = probe.eval(mu + span)?;
        let (down, _) = probe.eval(mu - span)?;
        let slope = (up - down) / (2.0 * span);
        let slope = if slope < 0.0 {
            slope
        } else if let Some((lo, vl, hi, vh)) = bracket {
            (vh - vl) / (hi - lo)
        } else {
            slope
        };
        mu_std_err = Some(if slope < 0.0 { e.std_err / -slope } else { f64::INFINITY });
    }
    Ok(BoundaryPoint {
        lambda_plus,
        lambda_minus,
        mu_star: mu,
        method,
        tol,
        velocity: v,
        velocity_std_err: est.map(|e| e.std_err),
        mu_std_err,
        evaluations: probe.evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub result: Result<BoundaryPoint, String>,
}

impl SweepRow {
    pub fn status(&self) -> String {
        match &self.result {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error: {e}"),
        }
    }
}

/// One boundary point per `(λ⁺, λ⁻)` node, rows in `λ⁺`-major order. Rows
/// run in parallel; Monte Carlo rows use replica streams of the method's
/// seed indexed by row, so output does not depend on scheduling. A
/// single-node grid keeps the seed unchanged and reproduces
/// [`find_boundary`].
pub fn sweep(lambda_plus: &[f64], lambda_minus: &[f64], method: BoundaryMethod, tol: f64) -> Vec<SweepRow> {
    let nodes: Vec<(usize, f64, f64)> = lambda_plus
        .iter()
        .flat_map(|&lp| lambda_minus.iter().map(move |&lm| (lp, lm)))
        .enumerate()
        .map(|(i, (lp, lm))| (i, lp, lm))
        .collect();
    let single = nodes.len() == 1;
    nodes
        .into_par_iter()
        .map(|(i, lp, lm)| {
            let row_method = match method {
                BoundaryMethod::MonteCarlo { cycles, seed } if !single => {
                    BoundaryMethod::MonteCarlo {
                        cycles,
                        seed: seed.replica(i as u64),
                    }
                }
                other => other,
            };
            SweepRow {
                lambda_plus: lp,
                lambda_minus: lm,
                result: find_boundary(lp, lm, row_method, tol).map_err(|e| e.to_string()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rates(lp: f64, lm: f64, mu: f64) -> Rates {
        Rates::new(lp, lm, mu).unwrap()
    }

    fn no_mc() -> ClassifyConfig {
        ClassifyConfig {
            mc_cycles: 0,
            ..Default::default()
        }
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(closed_form_boundary_m0(1.0, 1.0), 2.0);
        assert_eq!(closed_form_boundary_m0(2.0, 0.5), 1.5);
        assert!((closed_form_boundary_m0(1e-12, 0.7) - 0.7).abs() < 1e-11);
    }

    #[test]
    fn shortcut_dominates() {
        let c = classify(&rates(1.0, 3.0, 1.0), &no_mc()).unwrap();
        assert_eq!(c.verdict, Verdict::TransientPlus);
        assert_eq!(c.evidence.len(), 1);
        assert_eq!(c.evidence[0].criterion, Criterion::Shortcut);
    }

    #[test]
    fn exact_velocity_certifies_growth() {
        let c = classify(&rates(1.0, 1.0, 2.0), &no_mc()).unwrap();
        assert_eq!(c.verdict, Verdict::TransientPlus);
        assert_eq!(c.evidence.last().unwrap().criterion, Criterion::ExactVelocity);
    }

    #[test]
    fn negative_exact_velocity_alone_is_not_a_verdict() {
        let c = classify(&rates(0.1, 0.1, 5.0), &no_mc()).unwrap();
        assert_eq!(c.verdict, Verdict::NearBoundary);
        let mut cfg = no_mc();
        cfg.mc_cycles = 20_000;
        let c = classify(&rates(0.1, 0.1, 5.0), &cfg).unwrap();
        assert_eq!(c.verdict, Verdict::TransientMinus);
        assert!(c.evidence[1].value < 0.0);
    }

    #[test]
    fn m0_method_is_the_closed_form() {
        let b = find_boundary(1.0, 1.0, BoundaryMethod::M0ClosedForm, 1e-10).unwrap();
        assert_eq!(b.mu_star, 2.0);
        assert!(b.velocity.abs() < 1e-12);
    }

    #[test]
    fn exact_boundary_lies_above_order0() {
        let b = find_boundary(1.0, 1.0, BoundaryMethod::ExactM { m: 10 }, 1e-10).unwrap();
        assert!(b.mu_star > 2.0);
        let v = projected::exact_velocity(10, rates(1.0, 1.0, b.mu_star)).unwrap();
        assert!(v.abs() < 1e-8);
    }

    #[test]
    fn exact_order1_agrees_with_independent_root() {
        // order 1 has four states; v(μ) from the same generator is checked
        // against a grid sign change
        let b = find_boundary(0.6, 1.3, BoundaryMethod::ExactM { m: 1 }, 1e-12).unwrap();
        let left = projected::exact_velocity(1, rates(0.6, 1.3, b.mu_star * (1.0 - 1e-9))).unwrap();
        let right = projected::exact_velocity(1, rates(0.6, 1.3, b.mu_star * (1.0 + 1e-9))).unwrap();
        assert!(left > 0.0 && right < 0.0);
    }

    #[test]
    fn sweep_single_node_matches_find_boundary() {
        let m = BoundaryMethod::ExactM { m: 4 };
        let rows = sweep(&[0.7], &[1.1], m, 1e-10);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].result, Ok(find_boundary(0.7, 1.1, m, 1e-10).unwrap()));
    }

    #[test]
    fn sweep_orderings() {
        let lp = [0.5, 1.0, 2.0];
        let lm = [0.25, 0.5, 1.0, 2.0];
        let m0 = sweep(&lp, &lm, BoundaryMethod::M0ClosedForm, 1e-10);
        let ex = sweep(&lp, &lm, BoundaryMethod::ExactM { m: 3 }, 1e-10);
        for row in m0.chunks(lm.len()) {
            for w in row.windows(2) {
                assert!(w[1].result.as_ref().unwrap().mu_star > w[0].result.as_ref().unwrap().mu_star);
            }
        }
        for (a, b) in m0.iter().zip(&ex) {
            assert!(a.result.as_ref().unwrap().mu_star <= b.result.as_ref().unwrap().mu_star);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(find_boundary(-1.0, 1.0, BoundaryMethod::M0ClosedForm, 1e-6).is_err());
        assert!(find_boundary(1.0, 1.0, BoundaryMethod::M0ClosedForm, 0.0).is_err());
        let rows = sweep(&[1.0, -1.0], &[1.0], BoundaryMethod::M0ClosedForm, 1e-6);
        assert!(rows[0].result.is_ok() && rows[1].result.is_err());
    }

    #[test]
    fn monte_carlo_boundary_is_reproducible() {
        let m = BoundaryMethod::MonteCarlo {
            cycles: 4000,
            seed: RngSeed::new(5),
        };
        let a = find_boundary(1.0, 1.0, m, 1e-2).unwrap();
        let b = find_boundary(1.0, 1.0, m, 1e-2).unwrap();
        assert_eq!(a, b);
        assert!(a.mu_std_err.unwrap() > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn shortcut_points_have_positive_exact_velocity(lp in 0.05f64..3.0, mu in 0.05f64..3.0, extra in 0.0f64..3.0) {
            let r = rates(lp, lp + mu + extra, mu);
            let c = classify(&r, &no_mc()).unwrap();
            prop_assert_eq!(c.verdict, Verdict::TransientPlus);
            for m in [0usize, 2, 5] {
                prop_assert!(projected::exact_velocity(m, r).unwrap() > 0.0);
            }
        }

        #[test]
        fn boundary_nondecreasing_in_order(lp in 0.1f64..2.0, lm in 0.1f64..2.0) {
            let mut prev = closed_form_boundary_m0(lp, lm);
            for m in [1usize, 3, 5] {
                let b = find_boundary(lp, lm, BoundaryMethod::ExactM { m }, 1e-11).unwrap();
                prop_assert!(b.mu_star >= prev * (1.0 - 1e-9));
                prev = b.mu_star;
            }
        }
    }
}
