//! Laplace transforms of the lifetimes `T⊕` and `T⊖`.
//!
//! `φ(s) = E e^{−sT⊕}` and `φ⊖(s) = E e^{−sT⊖}` satisfy the first-step system
//!
//! ```text
//! (1 + λ⁺ + s) φ(s)  = (1 + λ⁺ φ(s)) φ⊖(s) + λ⁺ (φ(s) − φ⊖(s)) φ(s+1)
//! (μ + λ⁻ + s) φ⊖(s) = μ + λ⁻ φ(s) φ⊖(s)
//! ```
//!
//! Eliminating `φ⊖` leaves a quadratic in `φ(s)` whose coefficients depend on
//! `c = φ(s+1)`. Seeding `φ(s+N) = 0` and solving backwards along the unit
//! chain `s, s+1, …, s+N` converges very fast because the dependence on `c`
//! is damped by `λ⁺/(1+λ⁺+s)` at each step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Rates;

pub const DEFAULT_DEPTH: usize = 40;
pub const MAX_DEPTH: usize = 40 << 8;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_STEP_H: f64 = 1e-3;
/// `φ(0)` below `1 − DEFECTIVE_THRESHOLD` means `T⊕ = ∞` with positive
/// probability.
pub const DEFECTIVE_THRESHOLD: f64 = 1e-8;
const ROOT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LaplaceError {
    #[error("no root of the lifetime quadratic in [0, 1] at s = {s} (c = {c})")]
    NoRootInUnitInterval { s: f64, c: f64 },
    #[error("backward recursion still moved by {change:e} at depth {depth}")]
    NonConvergence { depth: usize, change: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Uniform grid `0, step, 2·step, …, s_max` with `step = 1/points_per_unit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SGrid {
    pub s_max: f64,
    pub points_per_unit: usize,
}

impl SGrid {
    pub fn new(s_max: f64, points_per_unit: usize) -> Result<Self, LaplaceError> {
        if !(s_max.is_finite() && s_max >= 0.0) {
            return Err(LaplaceError::InvalidGrid(format!("s_max = {s_max}")));
        }
        if points_per_unit == 0 {
            return Err(LaplaceError::InvalidGrid("points_per_unit = 0".into()));
        }
        Ok(Self {
            s_max,
            points_per_unit,
        })
    }

    pub fn step(&self) -> f64 {
        1.0 / self.points_per_unit as f64
    }

    pub fn len(&self) -> usize {
        (self.s_max * self.points_per_unit as f64 + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> f64 {
        i as f64 / self.points_per_unit as f64
    }
}

/// Coefficients `(A, B, C)` of `Aφ² + Bφ + C = 0` given `c = φ(s+1)`.
pub fn quadratic(rates: &Rates, s: f64, c: f64) -> (f64, f64, f64) {
    let (lp, lm, mu) = (rates.lambda_plus, rates.lambda_minus, rates.mu);
    let d = (1.0 + lp + s) * (mu + lm + s);
    let a = lm * (1.0 + lp + s) - lp * lm * c;
    let b = lp * mu + lp * c * (mu + lm + s) - d;
    let cc = mu * (1.0 - lp * c);
    (a, b, cc)
}

/// Selected root in `[0, 1]` and whether both roots were admissible.
fn unit_root(rates: &Rates, s: f64, c: f64) -> Result<(f64, bool), LaplaceError> {
    let (a, b, cc) = quadratic(rates, s, c);
    let disc = (b * b - 4.0 * a * cc).max(0.0);
    let q = -0.5 * (b + disc.sqrt().copysign(b));
    let roots = [q / a, cc / q];
    let inside: Vec<f64> = roots
        .iter()
        .copied()
        .filter(|r| r.is_finite() && (-ROOT_SLACK..=1.0 + ROOT_SLACK).contains(r))
        .collect();
    let ambiguous = inside.len() == 2 && (inside[0] - inside[1]).abs() > ROOT_SLACK;
    inside
        .into_iter()
        .min_by(f64::total_cmp)
        .map(|r| (r.clamp(0.0, 1.0), ambiguous))
        .ok_or(LaplaceError::NoRootInUnitInterval { s, c })
}

/// `φ⊖(s)` from `φ⊕(s)`.
pub fn phi_minus_from_plus(rates: &Rates, s: f64, phi_plus: f64) -> f64 {
    (rates.mu / (rates.mu + rates.lambda_minus + s - rates.lambda_minus * phi_plus)).min(1.0)
}

/// Right-hand side of the first-step equation for `φ(s)`, evaluated with
/// `φ⊖` eliminated.
pub fn system_map(rates: &Rates, s: f64, phi: f64, c: f64) -> f64 {
    let lp = rates.lambda_plus;
    let pm = phi_minus_from_plus(rates, s, phi);
    ((1.0 + lp * phi) * pm + lp * (phi - pm) * c) / (1.0 + lp + s)
}

/// `|φ − F(φ, φ(s+1))|`.
pub fn equation_defect(rates: &Rates, s: f64, phi: f64, c: f64) -> f64 {
    (phi - system_map(rates, s, phi, c)).abs()
}

/// One backward sweep along `s0, s0+1, …, s0+len−1+depth`. Returns the
/// values at the first `len + 1` chain points.
fn sweep(rates: &Rates, s0: f64, len: usize, depth: usize) -> Result<(Vec<f64>, bool), LaplaceError> {
    let top = len + depth;
    let mut out = vec![0.0; len + 1];
    let mut c = 0.0;
    let mut ambiguous = false;
    for k in (0..top).rev() {
        let (phi, amb) = unit_root(rates, s0 + k as f64, c)?;
        ambiguous |= amb && k <= len;
        if k <= len {
            out[k] = phi;
        }
        c = phi;
    }
    Ok((out, ambiguous))
}

/// Chain values at `s0 + k`, `k = 0..=len`, with depth doubled until the
/// values stop moving by more than `tol`.
fn chain(
    rates: &Rates,
    s0: f64,
    len: usize,
    depth: usize,
    tol: f64,
) -> Result<(Vec<f64>, usize, bool), LaplaceError> {
    let mut n = depth.max(1);
    let (mut prev, mut amb) = sweep(rates, s0, len, n)?;
    loop {
        let next_n = n * 2;
        if next_n > MAX_DEPTH {
            let (cur, _) = sweep(rates, s0, len, n / 2)?;
            let change = max_diff(&prev, &cur);
            return Err(LaplaceError::NonConvergence { depth: n, change });
        }
        let (cur, a) = sweep(rates, s0, len, next_n)?;
        let change = max_diff(&prev, &cur);
        amb |= a;
        if change < tol {
            return Ok((cur, next_n, amb));
        }
        prev = cur;
        n = next_n;
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `φ(s)` at a single point.
pub fn phi_at(rates: &Rates, s: f64, depth: usize, tol: f64) -> Result<f64, LaplaceError> {
    Ok(chain(rates, s, 0, depth, tol)?.0[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceGrid {
    pub s_values: Vec<f64>,
    pub phi_plus: Vec<f64>,
    pub phi_minus: Vec<f64>,
    /// Seed depth at which the recursion was accepted (largest over chains).
    pub depth: usize,
    /// Largest equation defect over the grid.
    pub residual: f64,
    /// Whether both roots were admissible anywhere on the grid.
    pub ambiguous_root: bool,
}

/// Solves on every grid point. Each residue class `s mod 1` is one chain.
pub fn solve_phi(rates: &Rates, grid: &SGrid, depth: usize, tol: f64) -> Result<LaplaceGrid, LaplaceError> {
    let n = grid.len();
    let ppu = grid.points_per_unit;
    let mut phi_plus = vec![0.0; n];
    let mut residual = 0.0f64;
    let mut used = 0;
    let mut ambiguous = false;
    for r in 0..ppu.min(n) {
        let s0 = grid.value(r);
        let len = (n - 1 - r) / ppu;
        let (vals, d, amb) = chain(rates, s0, len, depth, tol)?;
        used = used.max(d);
        ambiguous |= amb;
        for k in 0..=len {
            let s = s0 + k as f64;
            phi_plus[r + k * ppu] = vals[k];
            if k < len {
                residual = residual.max(equation_defect(rates, s, vals[k], vals[k + 1]));
            }
        }
        // last chain point: its successor is one step beyond the grid
        let s_last = s0 + len as f64;
        let next = phi_at(rates, s_last + 1.0, depth, tol)?;
        residual = residual.max(equation_defect(rates, s_last, vals[len], next));
    }
    let s_values: Vec<f64> = (0..n).map(|i| grid.value(i)).collect();
    let phi_minus = s_values
        .iter()
        .zip(&phi_plus)
        .map(|(&s, &p)| phi_minus_from_plus(rates, s, p))
        .collect();
    Ok(LaplaceGrid {
        s_values,
        phi_plus,
        phi_minus,
        depth: used,
        residual,
        ambiguous_root: ambiguous,
    })
}

/// A mean that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mean {
    Finite(f64),
    Infinite,
}

impl Mean {
    pub fn value(&self) -> Option<f64> {
        match self {
            Mean::Finite(v) => Some(*v),
            Mean::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Mean::Infinite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeMeans {
    pub e_t_plus: Mean,
    pub e_t_minus: Mean,
    /// `|μ·E T⊖ − 1 − λ⁻·E T⊕|` when both means are finite.
    pub identity_defect: Option<f64>,
    pub phi0: f64,
    pub depth: usize,
    /// Largest equation defect at the evaluation points.
    pub residual: f64,
}

impl LifetimeMeans {
    /// `−1/E T⊖`, the drift of the end in the compact phase.
    pub fn velocity(&self) -> Option<f64> {
        self.e_t_minus.value().map(|e| -1.0 / e)
    }
}

/// Number of halvings in the Richardson table for the derivatives at 0.
pub const RICHARDSON_LEVELS: usize = 4;

/// `E T⊕` and `E T⊖` from one-sided differences at 0 with steps `h`, `h/2`,
/// `h/4`, `h/8`, combined by Richardson extrapolation.
pub fn mean_lifetimes(rates: &Rates, tol: f64) -> Result<LifetimeMeans, LaplaceError> {
    mean_lifetimes_with(rates, DEFAULT_DEPTH, tol, DEFAULT_STEP_H)
}

pub fn mean_lifetimes_with(rates: &Rates, depth: usize, tol: f64, h: f64) -> Result<LifetimeMeans, LaplaceError> {
    let steps: Vec<f64> = (0..RICHARDSON_LEVELS).map(|k| h / f64::from(1u32 << k)).collect();
    let mut used = 0;
    let mut residual = 0.0f64;
    let mut eval = |s: f64| -> Result<f64, LaplaceError> {
        let (vals, d, _) = chain(rates, s, 1, depth, tol)?;
        used = used.max(d);
        residual = residual.max(equation_defect(rates, s, vals[0], vals[1]));
        Ok(vals[0])
    };
    let phi0 = eval(0.0)?;
    let values = steps.iter().map(|&s| eval(s)).collect::<Result<Vec<_>, _>>()?;
    if phi0 < 1.0 - DEFECTIVE_THRESHOLD {
        return Ok(LifetimeMeans {
            e_t_plus: Mean::Infinite,
            e_t_minus: Mean::Infinite,
            identity_defect: None,
            phi0,
            depth: used,
            residual,
        });
    }
    let slopes = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        let f0 = f(0.0, phi0);
        steps
            .iter()
            .zip(&values)
            .map(|(&s, &p)| (f0 - f(s, p)) / s)
            .collect()
    };
    let e_plus = richardson(slopes(&|_, p| p));
    let e_minus = richardson(slopes(&|s, p| phi_minus_from_plus(rates, s, p)));
    let defect = (rates.mu * e_minus - 1.0 - rates.lambda_minus * e_plus).abs();
    Ok(LifetimeMeans {
        e_t_plus: Mean::Finite(e_plus),
        e_t_minus: Mean::Finite(e_minus),
        identity_defect: Some(defect),
        phi0,
        depth: used,
        residual,
    })
}

/// Extrapolates one-sided difference quotients taken at steps `h, h/2, …`
/// to step 0, eliminating the error terms `h, h², …` in turn.
pub fn richardson(mut d: Vec<f64>) -> f64 {
    for level in 1..d.len() {
        let w = f64::from(1u32 << level);
        for i in 0..d.len() - level {
            d[i] = (w * d[i + 1] - d[i]) / (w - 1.0);
        }
    }
    d[0]
}
