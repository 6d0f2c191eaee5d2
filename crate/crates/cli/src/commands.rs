use std::fmt;

use clap::ValueEnum;
use rayon::prelude::*;
use serde_json::json;

use mtphase::bd::{self, OracleCheck};
use mtphase::config::{ConfigError, RunConfig};
use mtphase::coupling::{self, CouplingReport, REFERENCE_POINTS};
use mtphase::io::{cycle_row, fmt_f64, parse_range, path_row, Metadata, CYCLE_HEADER, PATH_HEADER};
use mtphase::laplace::{self, Mean, SGrid};
use mtphase::phase::{self, BoundaryMethod, ClassifyConfig, SweepRow};
use mtphase::projected;
use mtphase::sim::{self, Horizon, LifetimeCap, LifetimeOutcome, LifetimeStart};
use mtphase::{Rates, RngSeed};

use crate::args::{Cli, Command, Format, Method, Mode, Suite, What};
use crate::output::{Report, Sink};

const DEFAULT_CLI_CYCLES: u64 = 200_000;
const DEFAULT_LIFETIME_SAMPLES: u64 = 2_000;
const DEFAULT_LIFETIME_MAX_TIME: f64 = 1.0e3;
const DEFAULT_BD_SAMPLES: u64 = 200_000;
const DEFAULT_EVENTS: u64 = 100_000;
const DEFAULT_SEEDS: u64 = 8;
const DEFAULT_PAIR_ORDER: usize = 3;
const DEFAULT_PATH_EVENTS: u64 = 1_000;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Solver(_) | CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Solver(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "output: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn solver<E: fmt::Display>(e: E) -> CliError {
    CliError::Solver(e.to_string())
}

fn pick<T: ValueEnum>(name: &str, value: &Option<String>, default: T) -> Result<T, CliError> {
    match value {
        None => Ok(default),
        Some(s) => T::from_str(s, true).map_err(|_| CliError::Config(format!("--{name}: unknown value {s:?}"))),
    }
}

fn positive<T: PartialOrd + Default + fmt::Display>(name: &str, v: T) -> Result<T, CliError> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("--{name} must be positive, got {v}")))
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn mean_str(m: Mean) -> String {
    match m {
        Mean::Finite(v) => fmt_f64(v),
        Mean::Infinite => "inf".into(),
    }
}

/// Parses, resolves and runs; returns the process exit code.
pub fn run(cli: Cli) -> Result<u8, CliError> {
    let mut cfg = cli.flag_config();
    if let Some(path) = &cli.common.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
        cfg = cfg.merged_over(RunConfig::from_json(&text)?);
    }
    let seed = cfg.seed.unwrap_or(RngSeed::default().seed);
    cfg.seed = Some(seed);
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(positive("jobs", n)?)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let sink = Sink {
        format: pick("format", &cfg.format, Format::Csv)?,
        out: cfg.out.clone(),
        meta: Metadata {
            command: cli.command.name().to_string(),
            config_hash: cfg.hash(),
            config_json: cfg.to_json(),
            seed: Some(seed),
            extra: Vec::new(),
        },
    };
    let seed = RngSeed::new(seed);
    let (report, code) = match &cli.command {
        Command::Velocity { .. } => (velocity(&cfg, seed)?, 0),
        Command::Phase { .. } => phase_cmd(&cfg, seed)?,
        Command::Lifetime { .. } => (lifetime(&cfg, seed)?, 0),
        Command::Laplace { .. } => (laplace_cmd(&cfg)?, 0),
        Command::Simulate { .. } => (simulate(&cfg, seed)?, 0),
        Command::Check {
            suite: Suite::Couplings,
            ..
        } => check_couplings(&cfg, seed)?,
        Command::Check { suite: Suite::Bd, .. } => check_bd(&cfg, seed)?,
    };
    sink.emit(report)?;
    Ok(code)
}

fn velocity(cfg: &RunConfig, seed: RngSeed) -> Result<Report, CliError> {
    let rates = cfg.rates()?;
    let m = cfg.m.unwrap_or(phase::DEFAULT_ORDER);
    if m > projected::MAX_ORDER {
        return Err(CliError::Config(format!("--m {m} exceeds {}", projected::MAX_ORDER)));
    }
    if cfg.table == Some(true) {
        let t = projected::plus_marginal_table(m, rates, projected::DEFAULT_TOL).map_err(solver)?;
        return Ok(Report {
            header: vec!["m", "pi_plus", "velocity"],
            rows: t
                .iter()
                .map(|r| vec![r.m.to_string(), fmt_f64(r.pi_plus), fmt_f64(r.velocity)])
                .collect(),
            extra: Vec::new(),
            json: json!(t),
        });
    }
    let mode = pick("mode", &cfg.mode, Mode::Exact)?;
    let cycles = positive("cycles", cfg.cycles.unwrap_or(DEFAULT_CLI_CYCLES))?;
    let exact = match mode {
        Mode::Exact | Mode::Both => Some(projected::velocity_summary(m, rates, projected::DEFAULT_TOL).map_err(solver)?),
        Mode::Mc => None,
    };
    let mc = match mode {
        Mode::Mc | Mode::Both => Some(sim::estimate_velocity_parallel(&rates, cycles, seed).map_err(solver)?),
        Mode::Exact => None,
    };
    let agree = match (&exact, &mc) {
        (Some(e), Some(s)) => Some(s.covers(e.velocity, phase::DEFAULT_Z)),
        _ => None,
    };
    let agree_str = agree.map(|a| a.to_string()).unwrap_or_default();
    let mut rows = Vec::new();
    if let Some(e) = &exact {
        rows.push(vec![
            "exact".into(),
            m.to_string(),
            fmt_f64(e.velocity),
            String::new(),
            String::new(),
            fmt_f64(e.pi_plus),
            fmt_f64(e.pi_minus),
            fmt_f64(e.residual),
            agree_str.clone(),
        ]);
    }
    if let Some(s) = &mc {
        rows.push(vec![
            "mc".into(),
            String::new(),
            fmt_f64(s.v_hat),
            fmt_f64(s.std_err),
            s.n_cycles.to_string(),
            String::new(),
            String::new(),
            String::new(),
            agree_str.clone(),
        ]);
    }
    Ok(Report {
        header: vec![
            "source", "m", "velocity", "std_err", "n_cycles", "pi_plus", "pi_minus", "residual", "agree",
        ],
        rows,
        extra: Vec::new(),
        json: json!({ "exact": exact, "mc": mc, "agree": agree }),
    })
}

fn range_or(name: &str, range: &Option<String>, single: Option<f64>) -> Result<Vec<f64>, CliError> {
    match (range, single) {
        (Some(r), _) => parse_range(r).map_err(|e| CliError::Config(e.to_string())),
        (None, Some(v)) => Ok(vec![v]),
        (None, None) => Err(CliError::Config(format!("missing required option --{name}-range"))),
    }
}

fn phase_cmd(cfg: &RunConfig, seed: RngSeed) -> Result<(Report, u8), CliError> {
    let m = cfg.m.unwrap_or(phase::DEFAULT_ORDER);
    let cycles = positive("cycles", cfg.cycles.unwrap_or(DEFAULT_CLI_CYCLES))?;
    if cfg.classify == Some(true) {
        let rates = cfg.rates()?;
        let c = phase::classify(
            &rates,
            &ClassifyConfig {
                m: Some(m),
                tol: cfg.tol.unwrap_or(1e-9),
                mc_cycles: cycles,
                z: phase::DEFAULT_Z,
                seed,
            },
        )
        .map_err(solver)?;
        let rows = c
            .evidence
            .iter()
            .map(|e| {
                vec![
                    c.verdict.as_str().to_string(),
                    serde_json::to_value(e.criterion).unwrap().as_str().unwrap().to_string(),
                    fmt_f64(e.value),
                    fmt_f64(e.tolerance),
                    opt_f64(e.aux),
                ]
            })
            .collect();
        return Ok((
            Report {
                header: vec!["verdict", "criterion", "value", "tolerance", "aux"],
                rows,
                extra: Vec::new(),
                json: json!(c),
            },
            0,
        ));
    }
    let lps = range_or("lp", &cfg.lp_range, cfg.lp)?;
    let lms = range_or("lm", &cfg.lm_range, cfg.lm)?;
    for &v in lps.iter().chain(&lms) {
        positive("lp-range/--lm-range values", v)?;
    }
    let tol = positive("tol", cfg.tol.unwrap_or(1e-10))?;
    let method = match pick("method", &cfg.method, Method::Exact)? {
        Method::M0 => BoundaryMethod::M0ClosedForm,
        Method::Exact => BoundaryMethod::ExactM { m },
        Method::Mc => BoundaryMethod::MonteCarlo { cycles, seed },
    };
    let rows: Vec<SweepRow> = phase::sweep(&lps, &lms, method, tol);
    let any_ok = rows.iter().any(|r| r.result.is_ok());
    let csv = rows
        .iter()
        .map(|r| {
            let mu = r.result.as_ref().map(|p| fmt_f64(p.mu_star)).unwrap_or_default();
            vec![
                fmt_f64(r.lambda_plus),
                fmt_f64(r.lambda_minus),
                mu,
                method.name().to_string(),
                fmt_f64(tol),
                r.status(),
            ]
        })
        .collect();
    Ok((
        Report {
            header: vec!["lambda_plus", "lambda_minus", "mu_star", "method", "tol", "status"],
            rows: csv,
            extra: Vec::new(),
            json: json!(rows),
        },
        if any_ok { 0 } else { 2 },
    ))
}

fn lifetime(cfg: &RunConfig, seed: RngSeed) -> Result<Report, CliError> {
    let rates = cfg.rates()?;
    let samples = positive("samples", cfg.samples.unwrap_or(DEFAULT_LIFETIME_SAMPLES))?;
    let cap = LifetimeCap {
        max_time: positive("max-time", cfg.max_time.unwrap_or(DEFAULT_LIFETIME_MAX_TIME))?,
        ..LifetimeCap::default()
    };
    let outcomes: Vec<LifetimeOutcome> = (0..samples)
        .into_par_iter()
        .map(|i| sim::sample_lifetime_from(&rates, LifetimeStart::Plus, cap, &mut seed.replica(i).rng()))
        .collect();
    let finite: Vec<f64> = outcomes.iter().filter_map(|o| o.finite()).collect();
    let censored = samples - finite.len() as u64;
    let frac = censored as f64 / samples as f64;
    let (mc_mean, mc_se) = if finite.len() >= 2 {
        let (m, s) = mtphase::stats::mean_se(&finite);
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    let means = laplace::mean_lifetimes(&rates, laplace::DEFAULT_TOL).map_err(solver)?;
    let verdict = if means.e_t_plus.is_infinite() {
        "INFINITE"
    } else if frac > 0.5 {
        "CENSORED_DOMINATED"
    } else {
        "FINITE"
    };
    Ok(Report {
        header: vec![
            "samples",
            "finite",
            "censored",
            "censored_fraction",
            "mc_mean_finite",
            "mc_std_err",
            "e_t_plus",
            "e_t_minus",
            "verdict",
        ],
        rows: vec![vec![
            samples.to_string(),
            finite.len().to_string(),
            censored.to_string(),
            fmt_f64(frac),
            opt_f64(mc_mean),
            opt_f64(mc_se),
            mean_str(means.e_t_plus),
            mean_str(means.e_t_minus),
            verdict.into(),
        ]],
        extra: Vec::new(),
        json: json!({
            "samples": samples,
            "finite": finite.len(),
            "censored": censored,
            "censored_fraction": frac,
            "max_time": cap.max_time,
            "mc_mean_finite": mc_mean,
            "mc_std_err": mc_se,
            "laplace": means,
            "verdict": verdict,
        }),
    })
}

fn laplace_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let rates = cfg.rates()?;
    let grid = SGrid::new(
        cfg.s_max.unwrap_or(5.0),
        cfg.points_per_unit.unwrap_or(20),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let depth = positive("depth", cfg.depth.unwrap_or(laplace::DEFAULT_DEPTH))?;
    let tol = positive("tol", cfg.tol.unwrap_or(laplace::DEFAULT_TOL))?;
    let g = laplace::solve_phi(&rates, &grid, depth, tol).map_err(solver)?;
    let means = laplace::mean_lifetimes(&rates, tol).map_err(solver)?;
    let identity_tol = means
        .e_t_plus
        .value()
        .map(|e| 1e-6 * (1.0 + rates.lambda_minus * e));
    let identity_ok = match (means.identity_defect, identity_tol) {
        (Some(d), Some(t)) => Some(d <= t),
        _ => None,
    };
    let extra = vec![
        ("e_t_plus".into(), mean_str(means.e_t_plus)),
        ("e_t_minus".into(), mean_str(means.e_t_minus)),
        ("identity_defect".into(), opt_f64(means.identity_defect)),
        ("identity_tolerance".into(), opt_f64(identity_tol)),
        ("identity_ok".into(), identity_ok.map(|b| b.to_string()).unwrap_or_default()),
        ("phi0".into(), fmt_f64(means.phi0)),
        ("depth".into(), means.depth.to_string()),
        ("residual".into(), fmt_f64(means.residual)),
        ("grid_residual".into(), fmt_f64(g.residual)),
    ];
    let rows = (0..g.s_values.len())
        .map(|i| vec![fmt_f64(g.s_values[i]), fmt_f64(g.phi_plus[i]), fmt_f64(g.phi_minus[i])])
        .collect();
    Ok(Report {
        header: vec!["s", "phi_plus", "phi_minus"],
        rows,
        extra,
        json: json!({
            "e_t_plus": means.e_t_plus,
            "e_t_minus": means.e_t_minus,
            "identity_defect": means.identity_defect,
            "identity_tolerance": identity_tol,
            "identity_ok": identity_ok,
            "phi0": means.phi0,
            "depth": means.depth,
            "residual": means.residual,
            "grid": g,
        }),
    })
}

fn simulate(cfg: &RunConfig, seed: RngSeed) -> Result<Report, CliError> {
    let rates = cfg.rates()?;
    let mut rng = seed.rng();
    match pick("what", &cfg.what, What::Cycles)? {
        What::Cycles => {
            let n = positive("cycles", cfg.cycles.unwrap_or(1_000))?;
            let cycles = (0..n)
                .map(|_| sim::run_cycle(&rates, &mut rng))
                .collect::<Result<Vec<_>, _>>()
                .map_err(solver)?;
            Ok(Report {
                header: CYCLE_HEADER.to_vec(),
                rows: cycles.iter().map(cycle_row).collect(),
                extra: Vec::new(),
                json: json!(cycles),
            })
        }
        What::Path => {
            let horizon = match (cfg.max_time, cfg.max_events) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Config("give at most one of --max-time and --max-events".into()))
                }
                (Some(t), None) => Horizon::MaxTime(positive("max-time", t)?),
                (None, e) => Horizon::MaxEvents(positive("max-events", e.unwrap_or(DEFAULT_PATH_EVENTS))?),
            };
            let path = sim::simulate_path(&rates, horizon, &mut rng);
            Ok(Report {
                header: PATH_HEADER.to_vec(),
                rows: path.iter().map(path_row).collect(),
                extra: Vec::new(),
                json: json!(path),
            })
        }
    }
}

fn coupling_row(r: &CouplingReport) -> Vec<String> {
    let min_p = r.marginals.iter().map(|t| t.test.p_value).fold(1.0, f64::min);
    vec![
        r.suite.clone(),
        fmt_f64(r.rates.lambda_plus),
        fmt_f64(r.rates.lambda_minus),
        fmt_f64(r.rates.mu),
        r.m.map(|m| m.to_string()).unwrap_or_default(),
        r.events.to_string(),
        r.seeds.to_string(),
        r.violations.to_string(),
        fmt_f64(min_p),
        opt_f64(r.mixed_occupation),
        r.passed().to_string(),
    ]
}

fn check_couplings(cfg: &RunConfig, seed: RngSeed) -> Result<(Report, u8), CliError> {
    let points: Vec<Rates> = if cfg.lp.is_none() && cfg.lm.is_none() && cfg.mu.is_none() {
        REFERENCE_POINTS.to_vec()
    } else {
        vec![cfg.rates()?]
    };
    let events = positive("events", cfg.events.unwrap_or(DEFAULT_EVENTS))?;
    let seeds = positive("seeds", cfg.seeds.unwrap_or(DEFAULT_SEEDS))?;
    let m = cfg.m.unwrap_or(DEFAULT_PAIR_ORDER);
    if m + 1 > mtphase::model::MAX_ENCODABLE_ORDER {
        return Err(CliError::Config(format!("--m {m} is too large")));
    }
    let mut reports = Vec::new();
    for (i, r) in points.iter().enumerate() {
        let base = seed.replica(i as u64);
        reports.push(coupling::run_bd_suite(r, events, seeds, base.replica(0)));
        reports.push(coupling::run_pair_suite(r, m, events, seeds, base.replica(1)));
    }
    let ok = reports.iter().all(|r| r.passed());
    Ok((
        Report {
            header: vec![
                "suite",
                "lambda_plus",
                "lambda_minus",
                "mu",
                "m",
                "events",
                "seeds",
                "violations",
                "min_p_value",
                "mixed_occupation",
                "passed",
            ],
            rows: reports.iter().map(coupling_row).collect(),
            extra: Vec::new(),
            json: json!(reports),
        },
        if ok { 0 } else { 1 },
    ))
}

fn check_bd(cfg: &RunConfig, seed: RngSeed) -> Result<(Report, u8), CliError> {
    let samples = cfg.samples.unwrap_or(DEFAULT_BD_SAMPLES);
    if samples < bd::MC_BATCHES {
        return Err(CliError::Config(format!("--samples must be at least {}", bd::MC_BATCHES)));
    }
    let checks: Vec<OracleCheck> = bd::oracle_suite(samples, seed).map_err(solver)?;
    let ok = checks.iter().all(|c| c.passed);
    Ok((
        Report {
            header: vec!["check", "value", "reference", "tolerance", "passed"],
            rows: checks
                .iter()
                .map(|c| {
                    vec![
                        c.name.clone(),
                        fmt_f64(c.value),
                        fmt_f64(c.reference),
                        fmt_f64(c.tolerance),
                        c.passed.to_string(),
                    ]
                })
                .collect(),
            extra: Vec::new(),
            json: json!(checks),
        },
        if ok { 0 } else { 1 },
    ))
}
