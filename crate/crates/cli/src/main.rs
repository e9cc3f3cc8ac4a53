use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use biot_hdiv::forms::{BiotProblem, Parameters, ZeroData};
use biot_hdiv::linalg::compose;
use biot_hdiv::stepper::{initial_state, mass_audit, steps_to_reach, BiotState, Discretization, Stepper};
use biot_hdiv::verification::{
    coercivity_scan, convergence_study, div_compat_residual, max_pde_residual, solve_level, table_time_step,
    ConvergenceTable, ExactSolution, StudyConfig, DEFAULT_END_TIME, DEFAULT_THETA,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod config;

use config::{parse_levels, parse_list, ConfigFile};

/// H(div)-conforming finite elements for Biot consolidation on the unit square.
#[derive(Debug, Parser)]
#[command(name = "biot-hdiv", version)]
struct Cli {
    /// Plain-text `key = value` file; command-line flags win over its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the manufactured problem on one level and write the final-state errors.
    Solve {
        #[command(flatten)]
        opts: Options,
        /// Mesh level; h = 2^-level.
        #[arg(long)]
        level: Option<i64>,
        /// Time step (defaults to the tabulated step for k and level).
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run a convergence study and write the error table and plot.
    Convergence {
        #[command(flatten)]
        opts: Options,
        /// Levels, e.g. `2..5` (inclusive) or `2,3,4`.
        #[arg(long)]
        levels: Option<String>,
        /// Comma-separated time steps, one per level.
        #[arg(long)]
        dt: Option<String>,
    },
    /// Audit the discrete mass balance and write the ledger.
    Conserve {
        #[command(flatten)]
        opts: Options,
        #[arg(long)]
        level: Option<i64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run the structural checks and report pass/fail.
    Check {
        #[command(flatten)]
        opts: Options,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    MatrixDump,
}

#[derive(Debug, Args)]
struct Options {
    /// Polynomial degree of the pressure space.
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    /// Storage coefficient c_s.
    #[arg(long)]
    storage: Option<f64>,
    /// Biot-Willis constant.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Interior penalty parameter (default 4(k+1)(k+2)).
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    end_time: Option<f64>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Artifacts to write.
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Option<Vec<Format>>,
}

/// Options after merging flags, config file and defaults.
#[derive(Debug, Clone)]
struct Settings {
    k: usize,
    theta: f64,
    params: Parameters,
    /// Whether any of c_s, alpha or lambda was set explicitly.
    custom_material: bool,
    end_time: f64,
    out: PathBuf,
    formats: Vec<Format>,
}

impl Settings {
    fn resolve(o: Options, cfg: &ConfigFile) -> Result<Self> {
        let storage = cfg.pick(o.storage, "storage")?;
        let alpha = cfg.pick(o.alpha, "alpha")?;
        let lambda = cfg.pick(o.lambda, "lambda")?;
        let defaults = Parameters::default();
        let params = Parameters {
            storage: storage.unwrap_or(defaults.storage),
            biot_willis: alpha.unwrap_or(defaults.biot_willis),
            lambda: lambda.unwrap_or(defaults.lambda),
            mu: cfg.pick(o.mu, "mu")?.unwrap_or(defaults.mu),
            penalty: cfg.pick(o.penalty, "penalty")?,
            ..defaults
        };
        let formats = match o.format {
            Some(f) => f,
            None => match cfg.raw("format") {
                Some(s) => s
                    .split(',')
                    .map(|t| Format::from_str(t.trim(), true).map_err(|e| anyhow::anyhow!("config key `format`: {e}")))
                    .collect::<Result<_>>()?,
                None => vec![Format::Csv, Format::Svg],
            },
        };
        let s = Self {
            k: cfg.pick(o.k, "k")?.unwrap_or(1),
            theta: cfg.pick(o.theta, "theta")?.unwrap_or(DEFAULT_THETA),
            params,
            custom_material: storage.is_some() || alpha.is_some() || lambda.is_some(),
            end_time: cfg.pick(o.end_time, "end_time")?.unwrap_or(DEFAULT_END_TIME),
            out: cfg.pick(o.out, "out")?.unwrap_or_else(|| PathBuf::from(".")),
            formats,
        };
        if !(1..=3).contains(&s.k) {
            bail!("k must be 1, 2 or 3, got {}", s.k);
        }
        if !(s.theta > 0.0 && s.theta <= 1.0) {
            bail!("theta must lie in (0, 1], got {}", s.theta);
        }
        if !(s.end_time > 0.0 && s.end_time.is_finite()) {
            bail!("end time must be positive, got {}", s.end_time);
        }
        // surfaces parameter errors before any assembly
        BiotProblem::new(s.params, ExactSolution::boundary(), Arc::new(ZeroData))?;
        Ok(s)
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn warn_penalty(&self) -> Result<()> {
        let problem = BiotProblem::new(self.params, ExactSolution::boundary(), Arc::new(ZeroData))?;
        if let Some(w) = problem.penalty_warning(self.k) {
            eprintln!("warning: {w}");
        }
        Ok(())
    }
}

fn default_dt(k: usize, level: i64) -> Result<f64> {
    table_time_step(k, level).with_context(|| format!("no default time step for k = {k} at level {level}; pass --dt"))
}

fn solve(s: &Settings, level: i64, dt: Option<f64>) -> Result<bool> {
    s.warn_penalty()?;
    let exact = ExactSolution::new(&s.params)?;
    let dt = match dt {
        Some(dt) => dt,
        None => default_dt(s.k, level)?,
    };
    let row = solve_level(&exact, s.params, s.k, level, dt, s.theta, s.end_time)?;
    println!(
        "k={} level={} dofs={} steps={} dt={:.6e}: |p|={:.3e} |w|={:.3e} |u|={:.3e} |u|_1h={:.3e} |div u|={:.3e}",
        s.k,
        level,
        row.dofs,
        row.steps,
        row.dt,
        row.errors.p,
        row.errors.w,
        row.errors.u,
        row.errors.u_broken,
        row.errors.div_u
    );
    println!("max conservation residual {:.3e}", row.max_conservation_residual);
    if s.wants(Format::Csv) {
        let table = ConvergenceTable {
            k: s.k,
            rows: vec![row.clone()],
            warnings: Vec::new(),
        };
        s.write("errors.csv", &table.to_csv())?;
    }
    if s.wants(Format::MatrixDump) {
        let disc = Discretization::new(exact.problem(s.params)?, level, s.k)?;
        let stepper = Stepper::new(&disc, row.dt, s.theta)?;
        let mut buf = Vec::new();
        stepper.system().matrix().write_matrix_market(&mut buf)?;
        s.write("system.mtx", std::str::from_utf8(&buf)?)?;
    }
    Ok(true)
}

fn convergence(s: &Settings, levels: Vec<i64>, dts: Option<Vec<f64>>) -> Result<bool> {
    s.warn_penalty()?;
    if s.params.storage != 0.0 || s.params.biot_willis != 1.0 {
        bail!("convergence studies use the manufactured solution, which needs c_s = 0 and alpha = 1");
    }
    if s.wants(Format::MatrixDump) {
        bail!("matrix-dump is only available for `solve`");
    }
    let cfg = StudyConfig {
        time_steps: dts,
        theta: s.theta,
        lambda: s.params.lambda,
        end_time: s.end_time,
        penalty: s.params.penalty,
        ..StudyConfig::new(s.k, levels)
    };
    let table = convergence_study(&cfg)?;
    for r in &table.rows {
        println!(
            "level {} dofs {} dt {:.3e}: |p| {:.3e} |w| {:.3e} |u| {:.3e} |u|_1h {:.3e} |div u| {:.3e}",
            r.level, r.dofs, r.dt, r.errors.p, r.errors.w, r.errors.u, r.errors.u_broken, r.errors.div_u
        );
    }
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    if s.wants(Format::Csv) {
        s.write(&format!("convergence_k{}.csv", s.k), &table.to_csv())?;
    }
    if s.wants(Format::Svg) {
        s.write(&format!("convergence_k{}.svg", s.k), &table.to_svg())?;
    }
    Ok(true)
}

const MASS_TOLERANCE: f64 = 1e-11;

fn conserve(s: &Settings, level: i64, dt: f64) -> Result<bool> {
    if s.wants(Format::MatrixDump) {
        bail!("matrix-dump is only available for `solve`");
    }
    let sets: Vec<Parameters> = if s.custom_material {
        vec![s.params]
    } else {
        [(0.0, 1.0, 1.0), (0.0, 0.9, 1.0), (0.1, 0.9, 1.0), (0.1, 0.9, 1000.0)]
            .into_iter()
            .map(|(storage, biot_willis, lambda)| Parameters {
                storage,
                biot_willis,
                lambda,
                ..s.params
            })
            .collect()
    };
    let (steps, dt) = steps_to_reach(s.end_time, dt)?;
    let mut csv = String::from("storage,alpha,lambda,mu,level,dt,steps,theta,delta_m,max_pointwise_residual\n");
    let mut ok = true;
    for params in sets {
        let problem = ExactSolution::sources(&params).problem(params)?;
        let disc = Discretization::new(problem, level, s.k)?;
        let stepper = Stepper::new(&disc, dt, s.theta)?;
        let (history, reports) = stepper.run(initial_state(&disc, 0.0)?, steps as f64 * dt)?;
        let ledger = mass_audit(&disc, &history, s.theta)?;
        let delta_m = ledger.final_norm();
        let pointwise = reports.iter().map(|r| r.conservation_residual).fold(0.0, f64::max);
        let pass = delta_m <= MASS_TOLERANCE;
        ok &= pass;
        println!(
            "[{}] c_s={} alpha={} lambda={}: |dm(T)| = {:.3e}",
            if pass { "PASS" } else { "FAIL" },
            params.storage,
            params.biot_willis,
            params.lambda,
            delta_m
        );
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{},{:.16e},{:.16e},{:.16e}\n",
            params.storage,
            params.biot_willis,
            params.lambda,
            params.mu,
            level,
            dt,
            steps,
            s.theta,
            delta_m,
            pointwise
        ));
    }
    if s.wants(Format::Csv) {
        s.write("mass_balance.csv", &csv)?;
    }
    Ok(ok)
}

fn report(name: &str, pass: bool, detail: String) -> bool {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn check(s: &Settings) -> Result<bool> {
    let mut ok = true;

    let mut worst: f64 = 0.0;
    for k in [1, 2] {
        worst = worst.max(div_compat_residual(k, &[2, 3, 4])?);
    }
    ok &= report("div-compatibility", worst <= 1e-13, format!("max residual {worst:.2e} (<= 1e-13)"));

    for k in [1, 2] {
        let kappas: Vec<f64> = coercivity_scan(k, &[2, 3, 4], s.params.penalty)?.into_iter().map(|x| x.1).collect();
        let max = kappas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = kappas.iter().copied().fold(f64::INFINITY, f64::min);
        let variation = (max - min) / max.abs();
        ok &= report(
            &format!("coercivity k={k}"),
            min > 0.0 && variation < 0.2,
            format!(
                "kappa {} on levels 2-4, variation {:.1}%",
                kappas.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("/"),
                100.0 * variation
            ),
        );
    }

    let oracle_params = Parameters {
        storage: 0.0,
        biot_willis: 1.0,
        ..s.params
    };
    let residual = max_pde_residual(&ExactSolution::new(&oracle_params)?, 1000);
    ok &= report(
        "manufactured solution",
        residual <= 1e-10,
        format!("max PDE residual {residual:.2e} at 1000 samples (<= 1e-10)"),
    );

    let problem = BiotProblem::new(s.params, ExactSolution::boundary(), Arc::new(ZeroData))?;
    let disc = Discretization::new(problem, 3, s.k)?;
    let mut failures = Vec::new();
    for sigma in [1.0, 10.0, 1000.0] {
        if let Err(e) = compose(disc.blocks(), disc.problem(), 1.0 / sigma, 1.0) {
            failures.push(format!("sigma={sigma}: {e}"));
        }
    }
    let (next, _) = Stepper::new(&disc, 0.1, 1.0)?.step(&BiotState::zero(&disc, 0.0))?;
    let max = next
        .p
        .iter()
        .chain(next.w.as_deref().unwrap_or_default())
        .chain(&next.u)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    ok &= report(
        "solvability pencil",
        failures.is_empty() && max <= 1e-12,
        if failures.is_empty() {
            format!("factorized for sigma in {{1, 10, 1000}}, zero-data step max {max:.1e}")
        } else {
            failures.join("; ")
        },
    );
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Solve { opts, level, dt } => {
            let s = Settings::resolve(opts, &cfg)?;
            let level = cfg.pick(level, "level")?.unwrap_or(3);
            solve(&s, level, cfg.pick(dt, "dt")?)
        }
        Command::Convergence { opts, levels, dt } => {
            let s = Settings::resolve(opts, &cfg)?;
            let levels = parse_levels(cfg.pick(levels, "levels")?.as_deref().unwrap_or("2..5"))?;
            let dts = cfg.pick(dt, "dt")?.as_deref().map(parse_list).transpose()?;
            convergence(&s, levels, dts)
        }
        Command::Conserve { opts, level, dt } => {
            let s = Settings::resolve(opts, &cfg)?;
            let level = cfg.pick(level, "level")?.unwrap_or(3);
            conserve(&s, level, cfg.pick(dt, "dt")?.unwrap_or(0.1))
        }
        Command::Check { opts } => check(&Settings::resolve(opts, &cfg)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
