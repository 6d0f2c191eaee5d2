use clap::{Args, Parser, Subcommand, ValueEnum};

use mtphase::config::RunConfig;

/// Two-monomer microtubule growth: velocities, phase boundaries, lifetimes
/// and coupling checks.
#[derive(Debug, Parser)]
#[command(name = "mtphase", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Attachment rate on a PLUS-ended head.
    #[arg(long, global = true)]
    pub lp: Option<f64>,
    /// Attachment rate on a MINUS-ended head.
    #[arg(long, global = true)]
    pub lm: Option<f64>,
    /// Detachment rate of a terminal MINUS monomer.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true, env = "MTPHASE_SEED")]
    pub seed: Option<u64>,
    /// Write here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: available CPUs).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// JSON file with any of the long options; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Mc,
    Exact,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    M0,
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    Cycles,
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Couplings,
    Bd,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Velocity from Monte Carlo cycles, the exact order-m chain, or both.
    Velocity {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        cycles: Option<u64>,
        /// Emit m, pi_plus, velocity for every order up to --m.
        #[arg(long)]
        table: bool,
    },
    /// Boundary mu* over a (lp, lm) grid, or the phase of one point.
    Phase {
        /// "a", "a,b,c" or "start:stop:count"; defaults to --lp.
        #[arg(long)]
        lp_range: Option<String>,
        #[arg(long)]
        lm_range: Option<String>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        cycles: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Classify (--lp, --lm, --mu) instead of sweeping.
        #[arg(long)]
        classify: bool,
    },
    /// Monte Carlo lifetimes next to the transform means.
    Lifetime {
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        max_time: Option<f64>,
    },
    /// Lifetime transforms on an s grid and the mean identities.
    Laplace {
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long)]
        points_per_unit: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Raw cycles or a trajectory.
    Simulate {
        #[arg(long, value_enum)]
        what: Option<What>,
        #[arg(long)]
        cycles: Option<u64>,
        #[arg(long)]
        max_events: Option<u64>,
        #[arg(long)]
        max_time: Option<f64>,
    },
    /// Invariant suites; exits 1 on any failure.
    Check {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long)]
        events: Option<u64>,
        #[arg(long)]
        seeds: Option<u64>,
        /// Lower order of the pair coupling.
        #[arg(long)]
        m: Option<usize>,
        /// Monte Carlo samples per estimate (bd suite).
        #[arg(long)]
        samples: Option<u64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Velocity { .. } => "velocity",
            Command::Phase { .. } => "phase",
            Command::Lifetime { .. } => "lifetime",
            Command::Laplace { .. } => "laplace",
            Command::Simulate { .. } => "simulate",
            Command::Check {
                suite: Suite::Couplings,
                ..
            } => "check couplings",
            Command::Check { suite: Suite::Bd, .. } => "check bd",
        }
    }
}

fn name_of<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

impl Cli {
    /// The flags as a [`RunConfig`], before merging with a file.
    pub fn flag_config(&self) -> RunConfig {
        let c = &self.common;
        let mut rc = RunConfig {
            lp: c.lp,
            lm: c.lm,
            mu: c.mu,
            seed: c.seed,
            out: c.out.clone(),
            format: c.format.map(name_of),
            jobs: c.jobs,
            ..Default::default()
        };
        match &self.command {
            Command::Velocity { mode, m, cycles, table } => {
                rc.table = table.then_some(true);
                rc.mode = mode.map(name_of);
                rc.m = *m;
                rc.cycles = *cycles;
            }
            Command::Phase {
                lp_range,
                lm_range,
                method,
                m,
                cycles,
                tol,
                classify,
            } => {
                rc.classify = classify.then_some(true);
                rc.lp_range.clone_from(lp_range);
                rc.lm_range.clone_from(lm_range);
                rc.method = method.map(name_of);
                rc.m = *m;
                rc.cycles = *cycles;
                rc.tol = *tol;
            }
            Command::Lifetime { samples, max_time } => {
                rc.samples = *samples;
                rc.max_time = *max_time;
            }
            Command::Laplace {
                s_max,
                points_per_unit,
                depth,
                tol,
            } => {
                rc.s_max = *s_max;
                rc.points_per_unit = *points_per_unit;
                rc.depth = *depth;
                rc.tol = *tol;
            }
            Command::Simulate {
                what,
                cycles,
                max_events,
                max_time,
            } => {
                rc.what = what.map(name_of);
                rc.cycles = *cycles;
                rc.max_events = *max_events;
                rc.max_time = *max_time;
            }
            Command::Check {
                events,
                seeds,
                m,
                samples,
                ..
            } => {
                rc.events = *events;
                rc.seeds = *seeds;
                rc.m = *m;
                rc.samples = *samples;
            }
        }
        rc
    }
}
