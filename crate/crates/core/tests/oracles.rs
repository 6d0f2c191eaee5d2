//! Cross-module checks: each quantity is computed by two independent routes.

use mtphase::laplace::{self, SGrid};
use mtphase::phase::{self, BoundaryMethod};
use mtphase::projected;
use mtphase::sim::{self, LifetimeCap, LifetimeStart};
use mtphase::stats::{dkw_epsilon, lag1_autocorrelation, mean_se, survival};
use mtphase::{Rates, RngSeed};

fn rates(lp: f64, lm: f64, mu: f64) -> Rates {
    Rates::new(lp, lm, mu).unwrap()
}

fn lifetimes(r: &Rates, start: LifetimeStart, n: u64, seed: u64) -> Vec<f64> {
    let base = RngSeed::new(seed);
    (0..n)
        .map(|i| {
            sim::sample_lifetime_from(r, start, LifetimeCap::default(), &mut base.replica(i).rng())
                .finite()
                .expect("compact phase")
        })
        .collect()
}

#[test]
fn single_detach_cycles() {
    for (i, r) in [rates(1.0, 1.0, 1.0), rates(0.4, 2.0, 0.7)].iter().enumerate() {
        let mut rng = RngSeed::new(i as u64).rng();
        let n = 100_000;
        let mut hits = 0;
        let mut dt = Vec::new();
        for _ in 0..n {
            let c = sim::run_cycle(r, &mut rng).unwrap();
            if c.jumps == 1 {
                assert_eq!(c.dx, -1);
                hits += 1;
                dt.push(c.dtau);
            }
        }
        let p = r.mu / (r.mu + r.lambda_minus);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * se);
        let (m, se) = mean_se(&dt);
        assert!((m - 1.0 / (r.mu + r.lambda_minus)).abs() < 3.0 * se);
    }
}

#[test]
fn cycles_are_uncorrelated() {
    let r = rates(1.0, 1.0, 1.0);
    let mut rng = RngSeed::new(21).rng();
    let dx: Vec<f64> = (0..50_000).map(|_| sim::run_cycle(&r, &mut rng).unwrap().dx as f64).collect();
    let (rho, se) = lag1_autocorrelation(&dx);
    assert!(rho.abs() < 3.0 * se, "{rho} vs {se}");
}

#[test]
fn transform_matches_simulated_lifetimes() {
    let r = rates(0.5, 0.5, 3.0);
    let t = lifetimes(&r, LifetimeStart::Plus, 40_000, 2);
    for s in [0.5, 1.0, 2.0] {
        let phi = laplace::phi_at(&r, s, laplace::DEFAULT_DEPTH, laplace::DEFAULT_TOL).unwrap();
        let w: Vec<f64> = t.iter().map(|x| (-s * x).exp()).collect();
        let (m, se) = mean_se(&w);
        assert!((m - phi).abs() < 3.0 * se, "s={s}: {phi} vs {m} +- {se}");
    }
}

#[test]
fn minus_start_is_stochastically_smaller() {
    let r = rates(0.5, 0.5, 3.0);
    let g = laplace::solve_phi(&r, &SGrid::new(5.0, 10).unwrap(), laplace::DEFAULT_DEPTH, laplace::DEFAULT_TOL).unwrap();
    for (p, m) in g.phi_plus.iter().zip(&g.phi_minus) {
        assert!(m >= p);
    }
    let n = 20_000;
    let mut tp = lifetimes(&r, LifetimeStart::Plus, n, 3);
    let mut tm = lifetimes(&r, LifetimeStart::Minus, n, 4);
    tp.sort_by(f64::total_cmp);
    tm.sort_by(f64::total_cmp);
    let eps = dkw_epsilon(n as usize, 0.001);
    for k in 0..200 {
        let t = k as f64 * 0.05;
        assert!(survival(&tm, t) <= survival(&tp, t) + 2.0 * eps, "t={t}");
    }
    let m = laplace::mean_lifetimes(&r, laplace::DEFAULT_TOL).unwrap();
    let (mean, se) = mean_se(&tm);
    assert!((mean - m.e_t_minus.value().unwrap()).abs() < 3.0 * se);
}

#[test]
fn monte_carlo_sign_agrees_with_exact() {
    let seed = RngSeed::new(30);
    for r in [rates(1.0, 1.0, 1.0), rates(0.3, 0.7, 1.2), rates(0.5, 2.0, 4.0), rates(2.0, 1.0, 1.0)] {
        let v = projected::exact_velocity(12, r).unwrap();
        let est = sim::estimate_velocity_parallel(&r, 100_000, seed).unwrap();
        assert!(v.abs() > 3.0 * est.std_err, "point too close to the boundary for this test");
        assert_eq!(v > 0.0, est.v_hat > 0.0, "{r:?}");
    }
}

#[test]
fn monte_carlo_boundary_brackets_exact() {
    let (lp, lm) = (1.0, 1.0);
    let exact = phase::find_boundary(lp, lm, BoundaryMethod::ExactM { m: 12 }, 1e-10).unwrap();
    let mc = phase::find_boundary(
        lp,
        lm,
        BoundaryMethod::MonteCarlo {
            cycles: 100_000,
            seed: RngSeed::new(31),
        },
        1e-4,
    )
    .unwrap();
    let se = mc.mu_std_err.unwrap();
    assert!((mc.mu_star - exact.mu_star).abs() < 3.0 * se + 1e-3, "{} vs {} (se {se})", mc.mu_star, exact.mu_star);
}

#[test]
fn lifetime_velocity_matches_exact_chain() {
    for r in [rates(0.5, 0.5, 3.0), rates(1.0, 1.0, 4.0)] {
        let v_lap = laplace::mean_lifetimes(&r, laplace::DEFAULT_TOL).unwrap().velocity().unwrap();
        let v = projected::exact_velocity(14, r).unwrap();
        assert!((v_lap - v).abs() < 1e-6 * v.abs(), "{v_lap} vs {v}");
    }
}

#[test]
fn transient_phase_has_infinite_means_and_positive_velocity() {
    let r = rates(1.0, 3.0, 1.0);
    let m = laplace::mean_lifetimes(&r, laplace::DEFAULT_TOL).unwrap();
    assert!(m.e_t_plus.is_infinite() && m.e_t_minus.is_infinite());
    assert!(projected::exact_velocity(12, r).unwrap() > 0.0);
}
