//! `tocq` command-line interface.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tocq::experiments::{
    refined_optimum, retention_scan, sweep_tf, zero_control_baseline, RefineOptions, SweepOptions,
};
use tocq::geometry::{quantum_speed_limit, singular_arc_curve, SingularLaw};
use tocq::io::{
    canonical_json, controls_csv, emit, parse_bloch, parse_grid, parse_time, read_schedule,
    singular_arc_csv, sweep_csv, trajectory_csv, GridValue, RunConfig, ScenarioSelector, TimeValue,
};
use tocq::model::{Channel, PureState, SystemSpec};
use tocq::optimize::{
    gradient_descent_control, search_structures, GradientMethod, GradientOptions, OptimizeResult,
};
use tocq::pmp::{extremal, verify, OptimalityReport};
use tocq::propagate::{ControlSchedule, CostKind};

#[derive(Parser, Debug)]
#[command(name = "tocq", version, about = "Time-optimal control of a dissipative qubit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    xi: Option<f64>,
    /// none, uniform, x, y or z.
    #[arg(long, global = true)]
    channel: Option<Channel>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    u_bound: Option<f64>,
    /// Final time, e.g. 0.42pi.
    #[arg(long, global = true)]
    tf: Option<String>,
    /// `lo:hi:n` or a comma-separated list of times.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Comma-separated structure labels.
    #[arg(long, global = true)]
    catalog: Option<String>,
    /// overlap or frobenius.
    #[arg(long, global = true)]
    cost: Option<CostKind>,
    /// Initial Bloch vector `x,y,z` (requires --target).
    #[arg(long, global = true, allow_hyphen_values = true)]
    initial: Option<String>,
    /// Target Bloch vector `x,y,z` (requires --initial).
    #[arg(long, global = true, allow_hyphen_values = true)]
    target: Option<String>,
    /// Output file; a manifest is written next to it. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: number of processors).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    tol_hc: Option<f64>,
    #[arg(long, global = true)]
    tol_phi: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimum time between two pure states for unbounded control at ξ = 0.
    SpeedLimit {
        /// Amplitudes `c0,c1` (default: the preparation initial state).
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        /// Amplitudes `c0,c1` (default: the preparation target state).
        #[arg(long, allow_hyphen_values = true)]
        to: Option<String>,
    },
    /// Propagates a schedule and writes `t,u,rx,ry,rz` (plus the costate).
    Simulate {
        /// Schedule JSON, or `@path`. Without one the control is zero on [0, tf].
        #[arg(long)]
        schedule: Option<String>,
        /// Adds `lx,ly,lz` columns.
        #[arg(long)]
        costate: bool,
    },
    /// Best protocol over the structure catalog at one final time.
    Optimize {
        /// Also runs gradient descent and refines the structures it suggests.
        #[arg(long)]
        refine: bool,
    },
    /// Optimized overlap over a grid of final times.
    Sweep,
    /// Sweep of the state-retention problem plus the zero-control baseline.
    Retain {
        /// Where to write the baseline table.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Checks the necessary conditions along a schedule.
    Verify {
        #[arg(long)]
        schedule: Option<String>,
    },
    /// Projected gradient descent on a sampled control.
    Grad {
        /// Number of samples.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value = "steepest")]
        method: String,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Singular arc of the closed system with the singular feedback of the
    /// configured system along it.
    SingularArc {
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
}

enum Failure {
    Usage(String),
    Run(tocq::Error),
}

impl From<tocq::Error> for Failure {
    fn from(e: tocq::Error) -> Self {
        match e {
            tocq::Error::Parse(_)
            | tocq::Error::InvalidSpec(_)
            | tocq::Error::InvalidState(_)
            | tocq::Error::InvalidSchedule(_)
            | tocq::Error::InvalidStructure { .. }
            | tocq::Error::Json(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn build_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if c.xi.is_some() || c.channel.is_some() || c.gamma.is_some() || c.u_bound.is_some() {
        let s = cfg.spec;
        cfg.spec = SystemSpec::new(
            c.xi.unwrap_or(s.xi),
            c.channel.unwrap_or(s.channel),
            c.gamma.unwrap_or(if c.channel == Some(Channel::None) { 0.0 } else { s.gamma }),
            c.u_bound.unwrap_or(s.u_bound),
        )?;
    }
    if let Some(t) = &c.tf {
        cfg.tf = Some(TimeValue(parse_time(t)?));
    }
    if let Some(g) = &c.grid {
        cfg.grid = Some(GridValue(parse_grid(g)?));
    }
    if let Some(l) = &c.catalog {
        cfg.catalog = Some(l.split(',').map(|s| s.trim().to_string()).collect());
    }
    if let Some(k) = c.cost {
        cfg.cost = k;
    }
    match (&c.initial, &c.target) {
        (Some(i), Some(t)) => {
            cfg.scenario = ScenarioSelector::Custom {
                initial: parse_bloch(i)?,
                target: parse_bloch(t)?,
            }
        }
        (None, None) => {}
        _ => return Err(usage("--initial and --target go together")),
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(v) = c.tol_hc {
        cfg.tol_hc = v;
    }
    if let Some(v) = c.tol_phi {
        cfg.tol_phi = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require_tf(cfg: &RunConfig) -> Result<f64, Failure> {
    cfg.tf.map(|t| t.0).ok_or_else(|| usage("--tf is required"))
}

fn check_duration(cfg: &RunConfig, tf: f64) -> Result<(), Failure> {
    match cfg.tf {
        Some(TimeValue(t)) if (t - tf).abs() > 1e-9 * tf.max(1.0) => Err(usage(format!(
            "--tf {t} disagrees with the schedule duration {tf}"
        ))),
        _ => Ok(()),
    }
}

fn grid_of(cfg: &RunConfig) -> Vec<f64> {
    cfg.grid
        .as_ref()
        .map(|g| g.0.clone())
        .unwrap_or_else(tocq::experiments::default_grid)
}

fn verify_steps(cfg: &RunConfig) -> f64 {
    cfg.search.verify_steps.max(1) as f64
}

fn result_line(r: &OptimizeResult) -> String {
    format!(
        "{} tf={:.6}pi overlap={:.9} {}",
        r.label(),
        r.t_f / PI,
        r.overlap,
        r.report.summary()
    )
}

fn run(cli: Cli) -> Outcome {
    if let Some(w) = cli.common.workers {
        if w == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let mut cfg = build_config(&cli.common)?;
    let out = cfg.out.clone();
    let out = out.as_deref();
    let to_stdout = out.is_none();
    // Summaries go to stderr when the data itself goes to stdout.
    let say = |s: String| {
        if to_stdout {
            eprintln!("{s}");
        } else {
            println!("{s}");
        }
    };

    match cli.command {
        Command::SpeedLimit { from, to } => {
            let parse = |s: Option<String>, d: PureState| -> Result<PureState, Failure> {
                s.map_or(Ok(d), |s| s.parse::<PureState>().map_err(Failure::from))
            };
            let a = parse(from, PureState::preparation_initial())?;
            let b = parse(to, PureState::preparation_target())?;
            let t = quantum_speed_limit(&a, &b);
            println!("T_min = {:.9}pi ({t:.12})", t / PI);
            Ok(true)
        }
        Command::Simulate { schedule, costate } => {
            let sched = match schedule {
                Some(s) => read_schedule(&s)?,
                None => match cfg.schedule.clone() {
                    Some(s) => s,
                    None => ControlSchedule::sampled(require_tf(&cfg)?, vec![0.0], cfg.spec.u_bound)?,
                },
            };
            let tf = sched.duration();
            check_duration(&cfg, tf)?;
            cfg.schedule = Some(sched.clone());
            let sc = cfg.scenario()?;
            let dt = tf / verify_steps(&cfg);
            let ex = extremal(sc.initial, &sc.target, sc.cost_kind, &sched, &sc.spec, dt)?;
            let csv = trajectory_csv(&ex.trajectory, costate.then_some(&ex.costates))?;
            emit(out, &csv, "simulate", &cfg)?;
            let r = ex.trajectory.final_state();
            say(format!(
                "tf={:.6}pi overlap={:.12} norm={:.12} rho=[{}, {}, {}]",
                tf / PI,
                sc.target.dot(&r),
                r.norm(),
                r.x(),
                r.y(),
                r.z()
            ));
            Ok(true)
        }
        Command::Optimize { refine } => {
            let tf = require_tf(&cfg)?;
            let sc = cfg.scenario()?;
            let catalog = cfg.catalog()?;
            let r = if refine {
                let opts = RefineOptions {
                    search: cfg.search_options(),
                    gradient: GradientOptions {
                        tol_hc: cfg.tol_hc,
                        tol_phi: cfg.tol_phi,
                        ..RefineOptions::default().gradient
                    },
                    ..RefineOptions::default()
                };
                refined_optimum(&sc, tf, &catalog, &opts)?
            } else {
                search_structures(&sc, tf, &catalog, &cfg.search_options())?
            };
            emit(out, canonical_json(&r)?.as_bytes(), "optimize", &cfg)?;
            say(result_line(&r));
            Ok(r.report.passed)
        }
        Command::Sweep => {
            let sc = cfg.scenario()?;
            let opts = SweepOptions {
                search: cfg.search_options(),
                ..SweepOptions::default()
            };
            let records = sweep_tf(&sc, &grid_of(&cfg), &cfg.catalog()?, &opts)?;
            emit(out, &sweep_csv(&records)?, "sweep", &cfg)?;
            let bad = records.iter().filter(|r| !r.verified).count();
            say(format!("{} records, {} unverified", records.len(), bad));
            Ok(bad == 0)
        }
        Command::Retain { baseline } => {
            cfg.scenario = ScenarioSelector::Retain;
            let opts = SweepOptions {
                search: cfg.search_options(),
                ..SweepOptions::default()
            };
            let grid = grid_of(&cfg);
            let records = retention_scan(cfg.spec, &grid, &cfg.catalog()?, &opts)?;
            emit(out, &sweep_csv(&records)?, "retain", &cfg)?;
            let base = zero_control_baseline(&cfg.scenario()?, &grid, cfg.search.verify_steps)?;
            if let Some(p) = baseline {
                tocq::io::write_with_manifest(&p, &sweep_csv(&base)?, "retain", &cfg)?;
            }
            let below = grid
                .iter()
                .filter(|t| {
                    let opt = records.iter().find(|r| r.t_f == **t).map(|r| r.overlap);
                    let b = base.iter().find(|r| r.t_f == **t).map(|r| r.overlap);
                    matches!((opt, b), (Some(o), Some(b)) if o < b - 1e-9)
                })
                .count();
            let bad = records.iter().filter(|r| !r.verified).count();
            say(format!(
                "{} records, {} unverified, {} below the zero-control baseline",
                records.len(),
                bad,
                below
            ));
            Ok(bad == 0)
        }
        Command::Verify { schedule } => {
            let sched = match schedule {
                Some(s) => read_schedule(&s)?,
                None => cfg.schedule.clone().ok_or_else(|| usage("--schedule is required"))?,
            };
            check_duration(&cfg, sched.duration())?;
            cfg.schedule = Some(sched.clone());
            let sc = cfg.scenario()?;
            let report = verify_schedule(&sched, &sc, &cfg)?;
            emit(out, canonical_json(&report)?.as_bytes(), "verify", &cfg)?;
            say(report.summary());
            Ok(report.passed)
        }
        Command::Grad {
            samples,
            method,
            max_iter,
        } => {
            let tf = require_tf(&cfg)?;
            if let Some(n) = samples {
                cfg.samples = n;
            }
            let method = match method.as_str() {
                "steepest" => GradientMethod::Steepest,
                "cg" | "conjugate_gradient" => GradientMethod::ConjugateGradient,
                m => return Err(usage(format!("unknown method {m:?} (steepest or cg)"))),
            };
            let mut opts = GradientOptions {
                method,
                tol_hc: cfg.tol_hc,
                tol_phi: cfg.tol_phi,
                ..GradientOptions::default()
            };
            if let Some(m) = max_iter {
                opts.max_iter = m;
            }
            let sc = cfg.scenario()?;
            let r = gradient_descent_control(cfg.samples, tf, &sc, None, &opts)?;
            let u = r.controls.clone().unwrap_or_default();
            emit(out, &controls_csv(tf, &u)?, "grad", &cfg)?;
            say(result_line(&r));
            Ok(r.report.passed)
        }
        Command::SingularArc { points } => {
            if points == 0 {
                return Err(usage("--points must be at least 1"));
            }
            let curve = singular_arc_curve(cfg.spec.xi, points);
            let csv = singular_arc_csv(&curve, &SingularLaw::new(&cfg.spec))?;
            emit(out, &csv, "singular-arc", &cfg)?;
            say(format!("{} points", curve.len()));
            Ok(true)
        }
    }
}

fn verify_schedule(
    sched: &ControlSchedule,
    sc: &tocq::optimize::Scenario,
    cfg: &RunConfig,
) -> Result<OptimalityReport, Failure> {
    let dt = sched.duration() / verify_steps(cfg);
    let ex = extremal(sc.initial, &sc.target, sc.cost_kind, sched, &sc.spec, dt)?;
    Ok(verify(&ex.trajectory, &ex.costates, sched, &sc.spec, cfg.tol_hc, cfg.tol_phi)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
