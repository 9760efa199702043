//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::analysis::{
    convergence_study_1d, convergence_study_2d, ConvergenceTable, RATE_FLOOR_1D, RATE_FLOOR_CONSTANT_COEFFICIENT,
};
use crate::config::RunConfig;
use crate::error::{Error, MonitorItem, Result};
use crate::grid::{Grid1d, Grid2d};
use crate::io::{
    diagnostics_table, snapshot_file_name, snapshot_table_1d, snapshot_table_2d, write_convergence_csv,
    write_convergence_dat, RunMetadata,
};
use crate::model::ModelSpec;
use crate::monitor::{
    check_convolution_bounds, check_entropy, check_stability, DiagnosticBounds, StepDiagnostics, ENTROPY_TOLERANCE,
};
use crate::solver1d::{next_step, RunOutput, Solver1d};
use crate::solver2d::{Run2dOutput, Solver2d};

#[derive(Debug, Parser)]
#[command(
    name = "nonlocal-fv",
    version,
    about = "Finite-volume solver for nonlocal conservation laws"
)]
pub struct Cli {
    /// Use a built-in configuration instead of a file (paper-1d, paper-2d).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory, overriding the config's.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// TOML configuration file.
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// March to the final time, writing snapshots, diagnostics and metadata.
    Run(ConfigArg),
    /// Grid-refinement study: error table, rates and log-log data.
    Converge {
        #[command(flatten)]
        config: ConfigArg,
        /// Override the number of table rows.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Audit the discrete entropy inequality at every step.
    EntropyCheck {
        #[command(flatten)]
        config: ConfigArg,
        /// Number of equispaced levels in [0, 1.2 max sigma U].
        #[arg(long)]
        alphas: usize,
    },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(cli: &Cli, arg: &ConfigArg) -> Result<RunConfig> {
    match (&cli.preset, &arg.config) {
        (Some(_), Some(_)) => Err(Error::Config("give either a config file or --preset, not both".into())),
        (Some(p), None) => RunConfig::preset(p),
        (None, Some(path)) => RunConfig::load(path),
        (None, None) => Err(Error::Config("no config file or --preset given".into())),
    }
}

fn prepare_dir(config: &RunConfig, cli: &Cli) -> Result<PathBuf> {
    let dir = config.output_dir(cli.out.as_deref());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(arg) => {
            let config = load(cli, arg)?;
            cmd_run(&config, &prepare_dir(&config, cli)?)
        }
        Command::Converge { config: arg, levels } => {
            let mut config = load(cli, arg)?;
            if let (Some(l), Some(c)) = (levels, config.converge.as_mut()) {
                c.levels = *l;
            }
            cmd_converge(&config, &prepare_dir(&config, cli)?).map(|_| ())
        }
        Command::EntropyCheck { config: arg, alphas } => {
            let config = load(cli, arg)?;
            cmd_entropy_check(&config, *alphas, &prepare_dir(&config, cli)?).map(|_| ())
        }
    }
}

fn metadata(config: &RunConfig, dimension: usize, dx: f64, lambda: f64, cells: Vec<usize>) -> RunMetadata {
    RunMetadata {
        model: config.model.id.clone(),
        dimension,
        dx,
        lambda,
        theta: config.scheme.theta,
        flux: config.scheme.flux.name().into(),
        // the 2D convolution samples cell values directly
        quadrature: if dimension == 1 {
            config.scheme.quadrature.name().into()
        } else {
            "cell".into()
        },
        t_final: config.run.t_final,
        cells,
        snapshot_times: config.run.snapshots.clone(),
        seed: config.run.seed,
    }
}

/// Result of marching one configuration to its final time.
#[derive(Debug, Clone)]
pub enum Simulation {
    OneD {
        model: ModelSpec,
        grid: Grid1d,
        lambda: f64,
        derivative_norms: (f64, f64),
        output: RunOutput,
    },
    TwoD {
        grid: Grid2d,
        lambda: f64,
        bounds: Option<DiagnosticBounds>,
        output: Run2dOutput,
    },
}

impl Simulation {
    pub fn dimension(&self) -> usize {
        match self {
            Simulation::OneD { .. } => 1,
            Simulation::TwoD { .. } => 2,
        }
    }

    /// Final cell values, one vector per component.
    pub fn final_cells(&self) -> &[Vec<f64>] {
        match self {
            Simulation::OneD { output, .. } => &output.state.u,
            Simulation::TwoD { output, .. } => &output.state.u,
        }
    }

    pub fn final_time(&self) -> f64 {
        match self {
            Simulation::OneD { output, .. } => output.state.t,
            Simulation::TwoD { output, .. } => output.state.t,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            Simulation::OneD { output, .. } => output.state.step,
            Simulation::TwoD { output, .. } => output.state.step,
        }
    }

    /// Cells per axis; `ny` is 1 in one dimension.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Simulation::OneD { grid, .. } => (grid.n_cells, 1),
            Simulation::TwoD { grid, .. } => (grid.nx, grid.ny),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Simulation::OneD { lambda, .. } | Simulation::TwoD { lambda, .. } => *lambda,
        }
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        match self {
            Simulation::OneD { output, .. } => &output.diagnostics,
            Simulation::TwoD { output, .. } => &output.diagnostics,
        }
    }
}

/// Marches `config` to its final time without checking any monitor.
pub fn simulate(config: &RunConfig) -> Result<Simulation> {
    let model = config.build_model()?;
    let opts = config.run_options()?;
    let data = config.initial_data()?;
    if model.dimension() == 1 {
        let grid = config.grid_1d()?;
        let solver = Solver1d::new(model.clone(), grid, config.scheme)?;
        let output = solver.run(solver.project(&data)?, &opts)?;
        Ok(Simulation::OneD {
            model,
            grid,
            lambda: solver.lambda(),
            derivative_norms: solver.bank().derivative_norms,
            output,
        })
    } else {
        let grid = config.grid_2d()?;
        let solver = Solver2d::new(model, grid, config.scheme)?;
        let output = solver.run(solver.project(&data)?, &opts)?;
        if output.boundary_fraction > 0.0 {
            info!("boundary band holds {:e} of the mass", output.boundary_fraction);
        }
        let bounds = opts.monitor.then(|| solver.diagnostic_bounds(&output.diagnostics));
        Ok(Simulation::TwoD {
            grid,
            lambda: solver.lambda(),
            bounds,
            output,
        })
    }
}

/// Checks every monitor enabled in `config` against a finished run and
/// returns one summary line per check.
pub fn check_monitors(config: &RunConfig, sim: &Simulation) -> Result<Vec<String>> {
    let opts = config.run_options()?;
    let mut lines = Vec::new();
    if !opts.monitor {
        return Ok(lines);
    }
    match sim {
        Simulation::OneD {
            model,
            derivative_norms,
            output,
            ..
        } => {
            let bounds = DiagnosticBounds::one_d(model, *derivative_norms, &output.diagnostics);
            let report = check_stability(&output.diagnostics, &bounds, true)?;
            lines.push(format!(
                "monitors passed: min {:e}, L1 drift {:e}, Linf/bound {:.3}, TV/bound {:.3}",
                report.min_value,
                report.l1_drift,
                report.linf_ratio,
                report.tv_ratio.unwrap_or(0.0)
            ));
            if opts.convolution_bounds {
                let (first, second) = check_convolution_bounds(&output.diagnostics)?;
                lines.push(format!("convolution bounds passed: excess {first:e}, {second:e}"));
            }
            if opts.entropy_alphas > 0 {
                let worst = check_entropy(&output.diagnostics, ENTROPY_TOLERANCE)?;
                lines.push(format!("entropy inequality passed: max residual {worst:e}"));
            }
        }
        Simulation::TwoD { bounds, output, .. } => {
            let bounds = bounds.as_ref().expect("bounds are computed when monitoring");
            let report = check_stability(&output.diagnostics, bounds, false)?;
            lines.push(format!(
                "monitors passed: min {:e}, L1 drift {:e}, Linf/bound {:.3}",
                report.min_value, report.l1_drift, report.linf_ratio
            ));
        }
    }
    Ok(lines)
}

/// Runs one configuration, writes its snapshots, metadata and diagnostics
/// into `dir`, then checks every enabled monitor.
pub fn cmd_run(config: &RunConfig, dir: &Path) -> Result<()> {
    let sim = simulate(config)?;
    let (nx, ny) = sim.shape();
    match &sim {
        Simulation::OneD { grid, output, .. } => {
            for s in &output.snapshots {
                snapshot_table_1d(grid, s).write(&dir.join(snapshot_file_name(s.t)))?;
            }
            metadata(config, 1, grid.dx(), sim.lambda(), vec![nx]).write(&dir.join("metadata.toml"))?;
        }
        Simulation::TwoD { grid, output, .. } => {
            for s in &output.snapshots {
                snapshot_table_2d(grid, s).write(&dir.join(snapshot_file_name(s.t)))?;
            }
            metadata(config, 2, grid.dx(), sim.lambda(), vec![nx, ny]).write(&dir.join("metadata.toml"))?;
        }
    }
    if config.run.monitor {
        diagnostics_table(sim.diagnostics()).write(&dir.join("diagnostics.csv"))?;
    }
    for line in check_monitors(config, &sim)? {
        println!("{line}");
    }
    Ok(())
}

/// Rate the measured rates must exceed for `config`'s model.
pub fn rate_floor(config: &RunConfig) -> Result<f64> {
    if let Some(f) = config.converge.as_ref().and_then(|c| c.floor) {
        return Ok(f);
    }
    let model = config.build_model()?;
    let constant = model.components.iter().all(|c| c.sigma.bv_seminorm() == 0.0);
    Ok(if constant {
        RATE_FLOOR_CONSTANT_COEFFICIENT
    } else {
        RATE_FLOOR_1D
    })
}

/// Runs the refinement study, writes `table.csv`, `table.dat` and
/// `table.toml`, then checks the rate floor.
pub fn cmd_converge(config: &RunConfig, dir: &Path) -> Result<ConvergenceTable> {
    let settings = config.converge_settings()?;
    let model = config.build_model()?;
    let data = config.initial_data()?;
    let t = config.run.t_final;
    let table = if model.dimension() == 1 {
        let g = &config.grid;
        convergence_study_1d(
            &model,
            (g.lo, g.hi),
            &data,
            &config.scheme,
            settings.base_dx,
            settings.levels,
            t,
        )?
    } else {
        let domain = config.square_domain()?;
        convergence_study_2d(
            &model,
            domain,
            &data,
            &config.scheme,
            settings.base_dx,
            settings.levels,
            t,
        )?
    };
    write_convergence_csv(&table, &dir.join("table.csv"))?;
    write_convergence_dat(&table, &dir.join("table.dat"))?;
    let meta = toml::to_string(&TableMetadata {
        model: table.model.clone(),
        flux: table.flux.clone(),
        t_final: table.t_final,
        theta: table.theta,
        levels: table.levels,
        base_dx: settings.base_dx,
    })
    .map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join("table.toml"), meta)?;
    println!("{:>12} {:>12} {:>6}", "dx", "e", "alpha");
    for row in &table.rows {
        let alpha = row.rate.map(|a| format!("{a:.2}")).unwrap_or_default();
        println!("{:>12.4e} {:>12.4e} {:>6}", row.dx, row.error, alpha);
    }
    table.check_floor(rate_floor(config)?, settings.margin)?;
    Ok(table)
}

#[derive(serde::Serialize)]
struct TableMetadata {
    model: String,
    flux: String,
    t_final: f64,
    theta: f64,
    levels: usize,
    base_dx: f64,
}

/// Marches the configured 1D run and evaluates the entropy residual over
/// `alphas` levels after every step; stops at the first violation.
/// Returns the largest residual seen.
pub fn cmd_entropy_check(config: &RunConfig, alphas: usize, dir: &Path) -> Result<f64> {
    if alphas == 0 {
        return Err(Error::Config("--alphas must be at least 1".into()));
    }
    let model = config.build_model()?;
    if model.dimension() != 1 {
        return Err(Error::Config("the entropy audit is one-dimensional".into()));
    }
    let grid = config.grid_1d()?;
    let t_final = config.run_options()?.t_final;
    let solver = Solver1d::new(model, grid, config.scheme)?;
    let mut state = solver.project(&config.initial_data()?)?;
    let mut worst = f64::NEG_INFINITY;
    let mut log = String::from("step,t,entropy_residual\n");
    let result = loop {
        if state.t >= t_final {
            break Ok(worst);
        }
        let (dt, lands) = next_step(state.t, solver.dt(), t_final);
        let conv = solver.convolution(&state)?;
        let mut next = solver.advance(&state, &conv, dt)?;
        if lands {
            next.t = t_final;
        }
        let r = solver.entropy_residual_sweep(&state, &next, &conv, alphas);
        log.push_str(&format!("{},{:e},{:e}\n", next.step, next.t, r));
        worst = worst.max(r);
        if r > ENTROPY_TOLERANCE {
            break Err(Error::MonitorViolation {
                item: MonitorItem::EntropyInequality,
                step: next.step,
                margin: r - ENTROPY_TOLERANCE,
            });
        }
        state = next;
    };
    std::fs::write(dir.join("entropy.csv"), log)?;
    let worst = result?;
    println!("entropy inequality passed over {alphas} levels: max residual {worst:e}");
    Ok(worst)
}
