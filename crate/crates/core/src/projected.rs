//! The finite-strip chain: only the `m + 1` right-most symbols are tracked.
//!
//! Words are `(m+1)`-bit integers, bit `j` set iff symbol `j` is PLUS.
//! The generator is never stored: its rows and columns are recomputed from
//! the bit rules on demand, which keeps a solve at order 22 (2^23 states)
//! down to a few vectors of `f64`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ProjectedState, Rates, HYDROLYSIS_RATE};

/// Largest order accepted by the solvers.
pub const MAX_ORDER: usize = 22;
/// Largest order solved with dense LU.
pub const DENSE_MAX_ORDER: usize = 8;
pub const DEFAULT_TOL: f64 = 1e-12;
/// Gauss–Seidel sweep budget before falling back to uniformized power
/// iteration.
pub const GS_MAX_SWEEPS: usize = 20_000;
pub const POWER_MAX_ITERS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("stationary solve did not reach residual {tol:e} (got {residual:e} after {iterations} iterations)")]
    SolverDivergence {
        tol: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("order {m} exceeds the supported maximum {max}")]
    OrderTooLarge { m: usize, max: usize },
}

/// Kind of a word-chain move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    Attach,
    Detach,
    Hydrolyze(usize),
}

/// Generator of the word chain at order `m`. Self-loops are omitted; the
/// diagonal is the negative row sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    pub m: usize,
    pub rates: Rates,
}

/// Target of an attachment at order `m`.
#[inline]
pub fn attach_word(m: usize, w: u64) -> u64 {
    ((w << 1) | 1) & ProjectedState::mask(m)
}

/// Target of a detachment; only meaningful when bit 0 is clear.
#[inline]
pub fn detach_word(w: u64) -> u64 {
    w >> 1
}

#[inline]
pub fn hydrolyze_word(w: u64, j: usize) -> u64 {
    w & !(1u64 << j)
}

impl GeneratorMatrix {
    pub fn n_states(&self) -> usize {
        1usize << (self.m + 1)
    }

    /// Off-diagonal moves out of `w` with their rates.
    pub fn row(&self, w: u64) -> impl Iterator<Item = (Move, u64, f64)> + '_ {
        let m = self.m;
        let plus = w & 1 == 1;
        let a = attach_word(m, w);
        let attach = (a != w).then(|| (Move::Attach, a, self.rates.attach_rate(plus)));
        let detach = (!plus && w != 0).then(|| (Move::Detach, detach_word(w), self.rates.mu));
        let hyd = (0..=m)
            .filter(move |&j| w >> j & 1 == 1)
            .map(move |j| (Move::Hydrolyze(j), hydrolyze_word(w, j), HYDROLYSIS_RATE));
        attach.into_iter().chain(detach).chain(hyd)
    }

    /// Total exit rate of `w`, the negated diagonal entry.
    #[inline]
    pub fn exit_rate(&self, w: u64) -> f64 {
        let plus = w & 1 == 1;
        let mut d = w.count_ones() as f64 * HYDROLYSIS_RATE;
        if attach_word(self.m, w) != w {
            d += self.rates.attach_rate(plus);
        }
        if !plus && w != 0 {
            d += self.rates.mu;
        }
        d
    }

    /// Calls `f(i, rate)` for every off-diagonal entry in column `j`.
    #[inline]
    pub fn for_each_incoming(&self, j: u64, mut f: impl FnMut(u64, f64)) {
        let m = self.m;
        let top = 1u64 << m;
        if j & 1 == 1 {
            for i in [j >> 1, (j >> 1) | top] {
                if i != j {
                    f(i, self.rates.attach_rate(i & 1 == 1));
                }
            }
        }
        if j != 0 && j & top == 0 {
            f(j << 1, self.rates.mu);
        }
        let mut free = !j & ProjectedState::mask(m);
        while free != 0 {
            let k = free.trailing_zeros();
            f(j | 1 << k, HYDROLYSIS_RATE);
            free &= free - 1;
        }
    }

    /// All off-diagonal entries `(i, j, rate)`.
    pub fn entries(&self) -> Vec<(u64, u64, f64)> {
        (0..self.n_states() as u64)
            .flat_map(|i| self.row(i).map(move |(_, j, r)| (i, j, r)))
            .collect()
    }

    /// Dense `Q` with the diagonal filled in.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_states();
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n as u64 {
            for (_, j, r) in self.row(i) {
                q[(i as usize, j as usize)] += r;
            }
            q[(i as usize, i as usize)] = -self.exit_rate(i);
        }
        q
    }

    /// `‖πQ‖∞`.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..pi.len() as u64 {
            let mut acc = -pi[j as usize] * self.exit_rate(j);
            self.for_each_incoming(j, |i, r| acc += pi[i as usize] * r);
            worst = worst.max(acc.abs());
        }
        worst
    }
}

pub fn build_generator(m: usize, rates: Rates) -> GeneratorMatrix {
    assert!(m <= crate::model::MAX_ENCODABLE_ORDER);
    GeneratorMatrix { m, rates }
}

/// Stationary law of the word chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDist {
    pub m: usize,
    pub pi: Vec<f64>,
    pub pi_plus: f64,
    pub pi_minus: f64,
    pub residual: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    DenseLu,
    GaussSeidel,
    Power,
}

impl StationaryDist {
    fn finish(gen: &GeneratorMatrix, mut pi: Vec<f64>, method: SolveMethod, iterations: usize) -> Self {
        for p in pi.iter_mut() {
            *p = p.max(0.0);
        }
        normalize(&mut pi);
        let pi_plus: f64 = pi.iter().skip(1).step_by(2).sum();
        let residual = gen.residual(&pi);
        Self {
            m: gen.m,
            pi,
            pi_plus,
            pi_minus: 1.0 - pi_plus,
            residual,
            method,
            iterations,
        }
    }

    /// `π₊λ⁺ + π₋(λ⁻ − μ)`.
    pub fn velocity(&self, rates: &Rates) -> f64 {
        self.pi_plus * rates.lambda_plus + self.pi_minus * (rates.lambda_minus - rates.mu)
    }
}

fn normalize(pi: &mut [f64]) {
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
}

pub fn stationary(gen: &GeneratorMatrix, tol: f64) -> Result<StationaryDist, SolverError> {
    stationary_from(gen, tol, None)
}

/// Like [`stationary`], optionally warm-started from an initial guess (only
/// used by the iterative solvers).
pub fn stationary_from(
    gen: &GeneratorMatrix,
    tol: f64,
    init: Option<Vec<f64>>,
) -> Result<StationaryDist, SolverError> {
    if gen.m > MAX_ORDER {
        return Err(SolverError::OrderTooLarge {
            m: gen.m,
            max: MAX_ORDER,
        });
    }
    if gen.m <= DENSE_MAX_ORDER {
        let d = dense_lu(gen);
        if d.residual <= tol {
            return Ok(d);
        }
        // ill-conditioned dense solve: polish iteratively
        return iterate(gen, tol, Some(d.pi));
    }
    iterate(gen, tol, init)
}

fn dense_lu(gen: &GeneratorMatrix) -> StationaryDist {
    let n = gen.n_states();
    // πQ = 0 ⇔ Qᵀπᵀ = 0; the last equation is replaced by Σπ = 1
    let mut a = gen.to_dense().transpose();
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).expect("generator is irreducible");
    StationaryDist::finish(gen, x.iter().copied().collect(), SolveMethod::DenseLu, 1)
}

fn iterate(gen: &GeneratorMatrix, tol: f64, init: Option<Vec<f64>>) -> Result<StationaryDist, SolverError> {
    let n = gen.n_states();
    let mut pi = match init {
        Some(v) if v.len() == n => v,
        _ => vec![1.0 / n as f64; n],
    };
    let diag: Vec<f64> = (0..n as u64).map(|w| gen.exit_rate(w)).collect();

    const CHECK_EVERY: usize = 5;
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    while sweeps < GS_MAX_SWEEPS {
        for j in 0..n {
            let mut acc = 0.0;
            gen.for_each_incoming(j as u64, |i, r| acc += pi[i as usize] * r);
            pi[j] = acc / diag[j];
        }
        sweeps += 1;
        if sweeps % CHECK_EVERY == 0 {
            normalize(&mut pi);
            residual = gen.residual(&pi);
            if residual <= tol {
                return Ok(StationaryDist::finish(gen, pi, SolveMethod::GaussSeidel, sweeps));
            }
            if residual < 0.999 * best {
                best = residual;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 20 {
                    break;
                }
            }
        }
    }
    normalize(&mut pi);
    power(gen, tol, pi, &diag, sweeps, residual)
}

fn power(
    gen: &GeneratorMatrix,
    tol: f64,
    mut pi: Vec<f64>,
    diag: &[f64],
    done: usize,
    mut residual: f64,
) -> Result<StationaryDist, SolverError> {
    let n = pi.len();
    let lambda = diag.iter().cloned().fold(0.0, f64::max) * 1.05;
    let mut next = vec![0.0; n];
    let budget = POWER_MAX_ITERS.min(1 + 2_000_000_000 / n.max(1));
    for it in 1..=budget {
        for j in 0..n {
            let mut acc = pi[j] * (lambda - diag[j]);
            gen.for_each_incoming(j as u64, |i, r| acc += pi[i as usize] * r);
            next[j] = acc / lambda;
        }
        std::mem::swap(&mut pi, &mut next);
        if it % 50 == 0 {
            normalize(&mut pi);
            residual = gen.residual(&pi);
            if residual <= tol {
                return Ok(StationaryDist::finish(gen, pi, SolveMethod::Power, done + it));
            }
        }
    }
    Err(SolverError::SolverDivergence {
        tol,
        residual,
        iterations: done + budget,
    })
}

/// Velocity of the order-`m` chain with its stationary summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySummary {
    pub m: usize,
    pub pi_plus: f64,
    pub pi_minus: f64,
    pub velocity: f64,
    pub residual: f64,
}

impl VelocitySummary {
    fn of(d: &StationaryDist, rates: &Rates) -> Self {
        Self {
            m: d.m,
            pi_plus: d.pi_plus,
            pi_minus: d.pi_minus,
            velocity: d.velocity(rates),
            residual: d.residual,
        }
    }
}

pub fn exact_velocity(m: usize, rates: Rates) -> Result<f64, SolverError> {
    Ok(velocity_summary(m, rates, DEFAULT_TOL)?.velocity)
}

pub fn velocity_summary(m: usize, rates: Rates, tol: f64) -> Result<VelocitySummary, SolverError> {
    let d = stationary(&build_generator(m, rates), tol)?;
    Ok(VelocitySummary::of(&d, &rates))
}

/// Rows `(m, π₊ᵐ, vₘ)` for `m = 0..=m_max`. Each solve above the dense range
/// is warm-started from the previous order.
pub fn plus_marginal_table(m_max: usize, rates: Rates, tol: f64) -> Result<Vec<VelocitySummary>, SolverError> {
    if m_max > MAX_ORDER {
        return Err(SolverError::OrderTooLarge {
            m: m_max,
            max: MAX_ORDER,
        });
    }
    let mut out = Vec::with_capacity(m_max + 1);
    let mut prev: Option<Vec<f64>> = None;
    for m in 0..=m_max {
        let gen = build_generator(m, rates);
        let init = prev.take().map(|p| lift(&p));
        let d = stationary_from(&gen, tol, init)?;
        out.push(VelocitySummary::of(&d, &rates));
        prev = Some(d.pi);
    }
    Ok(out)
}

/// Extends a law on order-`m` words to order `m+1` by splitting mass evenly
/// on the new top symbol.
fn lift(pi: &[f64]) -> Vec<f64> {
    let n = pi.len();
    (0..2 * n).map(|w| pi[w % n] / 2.0).collect()
}

/// `π₊` at order 0.
pub fn pi_plus_order0(rates: &Rates) -> f64 {
    rates.lambda_minus / (1.0 + rates.lambda_minus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{format_word, parse_word, Monomer};
    use proptest::prelude::*;

    fn rates(lp: f64, lm: f64, mu: f64) -> Rates {
        Rates::new(lp, lm, mu).unwrap()
    }

    fn w(m: usize, text: &str) -> u64 {
        let word = parse_word(text).unwrap();
        assert_eq!(word.len(), m + 1);
        word.iter()
            .enumerate()
            .fold(0, |acc, (j, s)| acc | (u64::from(s.is_plus()) << j))
    }

    fn moves(g: &GeneratorMatrix, text: &str) -> Vec<(Move, String, f64)> {
        g.row(w(g.m, text))
            .map(|(mv, t, r)| (mv, ProjectedState::new(g.m, t).to_string(), r))
            .collect()
    }

    /// Dense generator from symbolic word rules, independent of the bit
    /// tricks above.
    fn symbolic_dense(m: usize, r: &Rates) -> DMatrix<f64> {
        let n = 1usize << (m + 1);
        let enc = |word: &[Monomer]| -> usize {
            word.iter().enumerate().map(|(j, s)| usize::from(s.is_plus()) << j).sum()
        };
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            let word: Vec<Monomer> = (0..=m)
                .map(|j| if i >> j & 1 == 1 { Monomer::Plus } else { Monomer::Minus })
                .collect();
            let plus = word[0] == Monomer::Plus;
            // attach: new PLUS at index 0, drop index m
            let mut a = vec![Monomer::Plus];
            a.extend_from_slice(&word[..m]);
            q[(i, enc(&a))] += if plus { r.lambda_plus } else { r.lambda_minus };
            if !plus {
                let mut d = word[1..].to_vec();
                d.push(Monomer::Minus);
                q[(i, enc(&d))] += r.mu;
            }
            for j in 0..=m {
                if word[j] == Monomer::Plus {
                    let mut h = word.clone();
                    h[j] = Monomer::Minus;
                    q[(i, enc(&h))] += 1.0;
                }
            }
            q[(i, i)] = 0.0;
            let s: f64 = q.row(i).sum();
            q[(i, i)] = -s;
        }
        q
    }

    /// Null space of `Qᵀ` from the SVD.
    fn svd_stationary(q: &DMatrix<f64>) -> Vec<f64> {
        let svd = q.transpose().svd(false, true);
        let v_t = svd.v_t.unwrap();
        let (k, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let v: Vec<f64> = v_t.row(k).iter().copied().collect();
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    }

    #[test]
    fn order0_moves() {
        let g = build_generator(0, rates(0.7, 1.3, 2.0));
        assert_eq!(moves(&g, "⊖"), vec![(Move::Attach, "⊕".into(), 1.3)]);
        assert_eq!(moves(&g, "⊕"), vec![(Move::Hydrolyze(0), "⊖".into(), 1.0)]);
    }

    #[test]
    fn order1_moves() {
        let g = build_generator(1, rates(0.7, 1.3, 2.0));
        assert_eq!(
            moves(&g, "⊖⊕"),
            vec![
                (Move::Attach, "⊕⊕".into(), 0.7),
                (Move::Hydrolyze(0), "⊖⊖".into(), 1.0)
            ]
        );
        assert_eq!(
            moves(&g, "⊕⊖"),
            vec![
                (Move::Attach, "⊖⊕".into(), 1.3),
                (Move::Detach, "⊖⊕".into(), 2.0),
                (Move::Hydrolyze(1), "⊖⊖".into(), 1.0)
            ]
        );
        // the all-MINUS word detaches onto itself
        assert_eq!(moves(&g, "⊖⊖"), vec![(Move::Attach, "⊖⊕".into(), 1.3)]);
    }

    #[test]
    fn generator_matches_symbolic_rules() {
        let r = rates(0.4, 1.9, 0.6);
        for m in 0..=5 {
            let mut a = build_generator(m, r).to_dense();
            let mut b = symbolic_dense(m, &r);
            // the symbolic form keeps word self-loops on the diagonal; both
            // must agree once the diagonal is taken as the negated row sum
            for q in [&mut a, &mut b] {
                for i in 0..q.nrows() {
                    q[(i, i)] = 0.0;
                }
            }
            assert_eq!(a, b, "m = {m}");
        }
    }

    #[test]
    fn incoming_is_transpose_of_rows() {
        let g = build_generator(4, rates(0.4, 1.9, 0.6));
        let mut from_rows = g.entries();
        let mut from_cols = Vec::new();
        for j in 0..g.n_states() as u64 {
            g.for_each_incoming(j, |i, r| from_cols.push((i, j, r)));
        }
        let key = |e: &(u64, u64, f64)| (e.0, e.1);
        from_rows.sort_by_key(key);
        from_cols.sort_by_key(key);
        assert_eq!(from_rows, from_cols);
    }

    #[test]
    fn out_degree_bound() {
        let g = build_generator(6, rates(1.0, 1.0, 1.0));
        for i in 0..g.n_states() as u64 {
            assert!(g.row(i).count() <= g.m + 3);
        }
    }

    #[test]
    fn order0_closed_form() {
        for lm in [0.3, 1.0, 2.5] {
            let r = rates(0.8, lm, 1.7);
            let d = stationary(&build_generator(0, r), DEFAULT_TOL).unwrap();
            assert!((d.pi_plus - lm / (1.0 + lm)).abs() < 1e-14);
            assert!((d.pi_minus - 1.0 / (1.0 + lm)).abs() < 1e-14);
        }
        let d = stationary(&build_generator(0, rates(3.0, 1.0, 9.0)), DEFAULT_TOL).unwrap();
        assert!((d.pi_plus - 0.5).abs() < 1e-15);
    }

    #[test]
    fn order0_velocities() {
        assert!(exact_velocity(0, rates(1.0, 1.0, 2.0)).unwrap().abs() < 1e-14);
        assert!((exact_velocity(0, rates(1.0, 1.0, 1.0)).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn transient_plus_point_has_positive_velocity_at_order_10() {
        assert!(exact_velocity(10, rates(1.0, 3.0, 1.0)).unwrap() > 0.0);
    }

    #[test]
    fn dense_matches_svd_oracle() {
        for r in [rates(1.0, 1.0, 1.0), rates(0.3, 0.7, 1.2), rates(2.0, 0.1, 5.0)] {
            for m in 0..=3 {
                let d = stationary(&build_generator(m, r), DEFAULT_TOL).unwrap();
                let o = svd_stationary(&symbolic_dense(m, &r));
                for (a, b) in d.pi.iter().zip(&o) {
                    assert!((a - b).abs() < 1e-10, "m={m} {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn iterative_matches_dense() {
        let r = rates(0.6, 1.1, 1.4);
        for m in [3, 6, 8] {
            let g = build_generator(m, r);
            let a = dense_lu(&g);
            let b = iterate(&g, 1e-13, None).unwrap();
            assert_eq!(b.method, SolveMethod::GaussSeidel);
            for (x, y) in a.pi.iter().zip(&b.pi) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn power_iteration_agrees() {
        let g = build_generator(3, rates(0.6, 1.1, 1.4));
        let n = g.n_states();
        let diag: Vec<f64> = (0..n as u64).map(|w| g.exit_rate(w)).collect();
        let p = power(&g, 1e-12, vec![1.0 / n as f64; n], &diag, 0, f64::INFINITY).unwrap();
        let a = dense_lu(&g);
        for (x, y) in a.pi.iter().zip(&p.pi) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn order_cap() {
        let g = build_generator(MAX_ORDER + 1, rates(1.0, 1.0, 1.0));
        assert!(matches!(stationary(&g, 1e-12), Err(SolverError::OrderTooLarge { .. })));
    }

    #[test]
    fn plus_marginal_is_increasing() {
        let t = plus_marginal_table(12, rates(1.0, 1.0, 1.0), DEFAULT_TOL).unwrap();
        for pair in t.windows(2) {
            assert!(pair[1].pi_plus - pair[0].pi_plus > 10.0 * DEFAULT_TOL, "{pair:?}");
        }
        assert!((t[8].pi_plus - t[7].pi_plus).abs() < (t[1].pi_plus - t[0].pi_plus).abs());
        let one = plus_marginal_table(0, rates(1.0, 1.0, 1.0), DEFAULT_TOL).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0].pi_plus - 0.5).abs() < 1e-15);
    }

    #[test]
    fn occupation_time_matches_stationary_law() {
        use crate::rng::RngSeed;
        use rand::Rng;
        use rand_distr::{Distribution, Exp1};
        let r = rates(1.0, 1.0, 1.0);
        let m = 2;
        let g = build_generator(m, r);
        let d = stationary(&g, DEFAULT_TOL).unwrap();
        let n = g.n_states();
        // batch means of occupation fractions
        let batches = 40;
        let per_batch = 400.0;
        let mut rng = RngSeed::new(17).rng();
        let mut fr = vec![vec![0.0; n]; batches];
        let mut s = 0u64;
        for b in 0..batches {
            let mut t = 0.0;
            while t < per_batch {
                let rows: Vec<_> = g.row(s).collect();
                let total: f64 = rows.iter().map(|x| x.2).sum();
                let e: f64 = Exp1.sample(&mut rng);
                let dt = (e / total).min(per_batch - t);
                fr[b][s as usize] += dt / per_batch;
                t += dt;
                let mut u = rng.random::<f64>() * total;
                for (_, tgt, rate) in &rows {
                    if u < *rate {
                        s = *tgt;
                        break;
                    }
                    u -= rate;
                }
            }
        }
        for w in 0..n {
            let xs: Vec<f64> = fr.iter().map(|f| f[w]).collect();
            let mean = xs.iter().sum::<f64>() / batches as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
            let se = (var / batches as f64).sqrt();
            assert!((mean - d.pi[w]).abs() <= 3.5 * se + 1e-3, "{} {mean} {}", format_word(&ProjectedState::new(m, w as u64).to_word()), d.pi[w]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rows_sum_to_zero(m in 0usize..7, lp in 0.05f64..5.0, lm in 0.05f64..5.0, mu in 0.05f64..5.0) {
            let g = build_generator(m, rates(lp, lm, mu));
            for i in 0..g.n_states() as u64 {
                let off: f64 = g.row(i).map(|x| x.2).sum();
                prop_assert!((off - g.exit_rate(i)).abs() <= 1e-12 * off.max(1.0));
                prop_assert!(g.row(i).all(|x| x.2 > 0.0 && x.1 != i));
            }
        }

        #[test]
        fn stationary_is_a_probability_vector(m in 0usize..7, lp in 0.05f64..5.0, lm in 0.05f64..5.0, mu in 0.05f64..5.0) {
            let d = stationary(&build_generator(m, rates(lp, lm, mu)), DEFAULT_TOL).unwrap();
            prop_assert!(d.pi.iter().all(|&p| p >= 0.0));
            prop_assert!((d.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(d.residual <= DEFAULT_TOL);
        }

        #[test]
        fn plus_marginal_monotone(lp in 0.1f64..3.0, lm in 0.1f64..3.0, mu in 0.1f64..3.0) {
            let t = plus_marginal_table(6, rates(lp, lm, mu), DEFAULT_TOL).unwrap();
            for pair in t.windows(2) {
                prop_assert!(pair[1].pi_plus - pair[0].pi_plus > 10.0 * DEFAULT_TOL);
            }
        }
    }
}
