//! Subcommand execution: validated config in, CSV files and a manifest out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use layerfold::elastica::{ElasticaProblem, Mode};
use layerfold::error::{InvariantViolation, MultilayerError, SolveError};
use layerfold::kinkband::KinkBandParams;
use layerfold::linearized::LinearizedContact;
use layerfold::multilayer::{
    optimal_packet, packet_energy, solve_multilayer, MultilayerOptions, MultilayerProblem,
    PacketCoeffs, PacketParams,
};
use layerfold::obstacle::ObstacleProfile;
use layerfold::scaling::{fit_exponent, geometric_range, run_sweep, Independent, SweepTemplate};
use layerfold::solver::{self, solve, SolverOptions};
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig, Subcommand};
use crate::csv::Table;

pub enum RunError {
    /// Exit 3: bad configuration; nothing was written.
    Config(ConfigError),
    /// Exit 1: a solver failed to converge or an output could not be
    /// written.
    Solver(String),
    /// Exit 2: a certified model invariant failed on computed output.
    Invariant(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 3,
            RunError::Solver(_) => 1,
            RunError::Invariant(_) => 2,
        }
    }

    pub fn message(&self) -> String {
        match self {
            RunError::Config(e) => e.to_string(),
            RunError::Solver(m) => format!("solver failure: {m}"),
            RunError::Invariant(m) => format!("invariant violation: {m}"),
        }
    }
}

impl From<SolveError> for RunError {
    fn from(e: SolveError) -> Self {
        RunError::Solver(e.to_string())
    }
}

impl From<MultilayerError> for RunError {
    fn from(e: MultilayerError) -> Self {
        RunError::Solver(e.to_string())
    }
}

impl From<InvariantViolation> for RunError {
    fn from(e: InvariantViolation) -> Self {
        RunError::Invariant(e.to_string())
    }
}

/// Cross-key range checks that the flat schema cannot express.
pub fn validate_extra(cfg: &RunConfig) -> Result<(), ConfigError> {
    let mut problems = Vec::new();
    match cfg.subcommand {
        Subcommand::SweepScaling => {
            let lo = cfg.number("q_min").unwrap_or(1.0);
            let hi = cfg.number("q_max").unwrap_or(100.0);
            if lo >= hi {
                problems.push(format!("q_min = {lo} must be below q_max = {hi}"));
            }
        }
        Subcommand::KinkbandPath => {
            let lo = cfg.number("alpha_min").unwrap_or(0.01);
            let hi = cfg.number("alpha_max").unwrap_or(1.4);
            if lo >= hi {
                problems.push(format!("alpha_min = {lo} must be below alpha_max = {hi}"));
            }
            if hi >= std::f64::consts::FRAC_PI_2 {
                problems.push(format!("alpha_max = {hi} must stay below pi/2"));
            }
        }
        _ => {}
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(ConfigError { problems })
    }
}

/// Execute a validated config: write the CSV outputs and the manifest into
/// `out_dir`, returning the output names.
pub fn execute(
    cfg: &mut RunConfig,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<Vec<PathBuf>, RunError> {
    let start = Instant::now();
    let (tables, summary) = match cfg.subcommand {
        Subcommand::SolveSingle => solve_single(cfg)?,
        Subcommand::SweepScaling => sweep_scaling(cfg, threads)?,
        Subcommand::KinkbandPath => kinkband_path(cfg)?,
        Subcommand::KinkbandMaxwell => kinkband_maxwell(cfg)?,
        Subcommand::MultilayerSolve => multilayer_solve(cfg)?,
        Subcommand::PacketOptimum => packet_optimum(cfg)?,
    };

    std::fs::create_dir_all(out_dir)
        .map_err(|e| RunError::Solver(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut written = Vec::new();
    for (name, table) in &tables {
        let path = out_dir.join(name);
        table
            .write_to(&path)
            .map_err(|e| RunError::Solver(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
    }

    let manifest = json!({
        "subcommand": cfg.subcommand.name(),
        "config": Value::Object(cfg.effective().clone().into_iter().collect()),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "wall_ms": start.elapsed().as_secs_f64() * 1e3,
        "outputs": tables.iter().map(|(name, _)| json!(name)).collect::<Vec<_>>(),
        "summary": summary,
        "status": "ok",
    });
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest encodes"),
    )
    .map_err(|e| RunError::Solver(format!("cannot write manifest: {e}")))?;
    written.push(manifest_path);
    Ok(written)
}

type Output = (Vec<(&'static str, Table)>, Value);

/// Domain half-width and node count defaults sized from the linearized
/// contact scale.
fn domain_defaults(cfg: &mut RunConfig, b: f64, q: f64, m: f64) -> (f64, usize) {
    let half_width = cfg.number("half_width").unwrap_or_else(|| {
        if m > 0.0 {
            let l0 = LinearizedContact::new(b, q, m)
                .expect("validated")
                .half_length();
            3.0 * l0
        } else {
            1.0
        }
    });
    let n_nodes = cfg
        .integer("n_nodes")
        .map(|n| n as usize)
        .unwrap_or_else(|| {
            if m > 0.0 {
                let l0 = LinearizedContact::new(b, q, m)
                    .expect("validated")
                    .half_length();
                solver::nodes_for(half_width, l0, 80)
            } else {
                401
            }
        });
    cfg.record_default("half_width", json!(half_width));
    cfg.record_default("n_nodes", json!(n_nodes));
    (half_width, n_nodes)
}

fn record_mode(cfg: &mut RunConfig) -> Mode {
    let mode = cfg.mode();
    cfg.record_default(
        "mode",
        json!(match mode {
            Mode::Nonlinear => "nonlinear",
            Mode::Linearized => "linearized",
        }),
    );
    mode
}

fn solve_single(cfg: &mut RunConfig) -> Result<Output, RunError> {
    let b = cfg.number("B").expect("validated");
    let q = cfg.number("q").expect("validated");
    let m = cfg.number("m").expect("validated");
    let mode = record_mode(cfg);
    let (half_width, n_nodes) = domain_defaults(cfg, b, q, m);

    let obstacle = ObstacleProfile::new(m, half_width).map_err(SolveError::from)?;
    let problem = ElasticaProblem::new(b, q, obstacle, n_nodes, mode).map_err(SolveError::from)?;
    let threshold = cfg
        .number("gap_threshold")
        .unwrap_or_else(|| solver::default_gap_threshold(&problem));
    cfg.record_default("gap_threshold", json!(threshold));

    let sol = solve(&problem, &SolverOptions::default())?;
    let void = sol.void_interval(threshold)?;
    let grid = problem.grid();
    let corner_gap = sol.gaps()[grid.mid()];

    let mut summary = Table::new(&[
        "B",
        "q",
        "m",
        "void_length",
        "corner_gap",
        "energy",
        "converged",
    ]);
    summary.row(&[
        b.into(),
        q.into(),
        m.into(),
        void.length.into(),
        corner_gap.into(),
        sol.energy().total.into(),
        sol.converged().into(),
    ]);

    let mut field = Table::new(&["x", "w", "f", "gap", "lambda"]);
    let floor = problem.obstacle_heights();
    #[allow(clippy::needless_range_loop)]
    for i in 0..grid.len() {
        field.row(&[
            grid.x(i).into(),
            sol.displacement().values()[i].into(),
            floor[i].into(),
            sol.gaps()[i].into(),
            sol.multipliers()[i].into(),
        ]);
    }

    let info = json!({
        "void_length": void.length,
        "void_left": void.left,
        "void_right": void.right,
        "corner_gap": corner_gap,
        "energy": sol.energy().total,
        "iterations": sol.iterations(),
    });
    Ok((
        vec![("summary.csv", summary), ("solution.csv", field)],
        info,
    ))
}

fn sweep_scaling(cfg: &mut RunConfig, threads: Option<usize>) -> Result<Output, RunError> {
    let b = cfg.number("B").expect("validated");
    let m = cfg.number("m").expect("validated");
    let mode = record_mode(cfg);
    let q_min = cfg.number("q_min").unwrap_or(1.0);
    let q_max = cfg.number("q_max").unwrap_or(100.0);
    let n_q = cfg.integer("n_q").unwrap_or(9) as usize;
    let min_void_nodes = cfg.integer("min_void_nodes").unwrap_or(80) as usize;
    cfg.record_default("q_min", json!(q_min));
    cfg.record_default("q_max", json!(q_max));
    cfg.record_default("n_q", json!(n_q));
    cfg.record_default("min_void_nodes", json!(min_void_nodes));
    let independent = match cfg.text("independent").unwrap_or("q") {
        "B" => Independent::Stiffness,
        "B_over_q" => Independent::StiffnessOverPressure,
        _ => Independent::Pressure,
    };
    cfg.record_default("independent", json!("q"));

    let mut template = SweepTemplate::new(b, m, mode);
    template.min_void_nodes = min_void_nodes;
    template.half_width = cfg.number("half_width");
    let q_values = if n_q == 1 {
        vec![q_min]
    } else {
        geometric_range(q_min, q_max, n_q)
    };
    let records =
        run_sweep(&template, &q_values, threads).map_err(|e| RunError::Solver(e.to_string()))?;

    let mut sweep = Table::new(&[
        "B",
        "q",
        "m",
        "void_length",
        "corner_gap",
        "energy",
        "converged",
    ]);
    for r in &records {
        sweep.row(&[
            r.stiffness.into(),
            r.pressure.into(),
            r.slope.into(),
            r.void_length.into(),
            r.corner_gap.into(),
            r.total_energy.into(),
            r.converged.into(),
        ]);
    }

    let mut tables = vec![("sweep.csv", sweep)];
    let summary = match fit_exponent(&records, independent) {
        Ok(fit) => {
            let mut table = Table::new(&["exponent", "stderr", "r2", "n_points"]);
            table.row(&[
                fit.exponent.into(),
                fit.stderr.into(),
                fit.r_squared.into(),
                fit.n_points.into(),
            ]);
            tables.push(("fit.csv", table));
            json!({
                "exponent": fit.exponent,
                "stderr": fit.stderr,
                "r2": fit.r_squared,
                "n_points": fit.n_points,
                "converged_runs": records.iter().filter(|r| r.converged).count(),
            })
        }
        Err(e) => json!({
            "fit": format!("refused: {e}"),
            "converged_runs": records.iter().filter(|r| r.converged).count(),
        }),
    };
    Ok((tables, summary))
}

fn kink_params(cfg: &RunConfig) -> Result<KinkBandParams, RunError> {
    KinkBandParams::new(
        cfg.number("b").expect("validated"),
        cfg.number("t").expect("validated"),
        cfg.integer("n_layers").expect("validated") as usize,
        cfg.number("k").expect("validated"),
        cfg.number("q").expect("validated"),
        cfg.number("mu").expect("validated"),
    )
    .map_err(|e| {
        RunError::Config(ConfigError {
            problems: vec![e.to_string()],
        })
    })
}

fn kinkband_path(cfg: &mut RunConfig) -> Result<Output, RunError> {
    let params = kink_params(cfg)?;
    let alpha_min = cfg.number("alpha_min").unwrap_or(0.01);
    let alpha_max = cfg.number("alpha_max").unwrap_or(1.4);
    let n_alpha = cfg.integer("n_alpha").unwrap_or(200) as usize;
    cfg.record_default("alpha_min", json!(alpha_min));
    cfg.record_default("alpha_max", json!(alpha_max));
    cfg.record_default("n_alpha", json!(n_alpha));

    let grid: Vec<f64> = (0..n_alpha)
        .map(|i| alpha_min + (alpha_max - alpha_min) * i as f64 / (n_alpha - 1) as f64)
        .collect();
    let path = params
        .equilibrium_path(&grid)
        .map_err(|e| RunError::Solver(e.to_string()))?;

    let mut table = Table::new(&["alpha", "beta", "Delta", "P", "energy"]);
    for p in &path {
        table.row(&[
            p.alpha.into(),
            p.beta.into(),
            p.shortening.into(),
            p.load.into(),
            p.energy.into(),
        ]);
    }
    let min_load = params.min_load();
    Ok((
        vec![("path.csv", table)],
        json!({
            "min_load": min_load,
            "min_load_angle": params.min_load_angle(),
            "points": path.len(),
        }),
    ))
}

fn kinkband_maxwell(cfg: &mut RunConfig) -> Result<Output, RunError> {
    let params = kink_params(cfg)?;
    let maxwell = params
        .maxwell_displacement()
        .map_err(|e| RunError::Solver(e.to_string()))?;
    let beta = params
        .predicted_band_angle()
        .map_err(|e| RunError::Solver(e.to_string()))?;

    let mut table = Table::new(&[
        "b",
        "t",
        "n_layers",
        "k",
        "q",
        "mu",
        "Delta_M",
        "alpha_M",
        "beta_predicted",
    ]);
    table.row(&[
        params.band_width().into(),
        params.layer_thickness().into(),
        params.n_layers().into(),
        params.spring_stiffness().into(),
        params.pressure().into(),
        params.friction().into(),
        maxwell.shortening.into(),
        maxwell.alpha.into(),
        beta.into(),
    ]);
    Ok((
        vec![("maxwell.csv", table)],
        json!({
            "Delta_M": maxwell.shortening,
            "alpha_M": maxwell.alpha,
            "beta_predicted_degrees": beta.to_degrees(),
        }),
    ))
}

fn multilayer_solve(cfg: &mut RunConfig) -> Result<Output, RunError> {
    let layers = cfg.integer("layers").expect("validated") as usize;
    let b = cfg.number("B").expect("validated");
    let t = cfg.number("t").expect("validated");
    let q = cfg.number("q").expect("validated");
    let m = cfg.number("m").expect("validated");
    let mode = record_mode(cfg);
    // a stack deforming collectively behaves like one layer of stiffness
    // K·B, so the default domain is sized from the collective void scale
    let (half_width, n_nodes) = domain_defaults(cfg, layers as f64 * b, q, m);

    let obstacle = ObstacleProfile::new(m, half_width).map_err(SolveError::from)?;
    let problem =
        MultilayerProblem::new(layers, b, t, q, obstacle, n_nodes, mode).map_err(|e| {
            RunError::Config(ConfigError {
                problems: vec![e.to_string()],
            })
        })?;
    let single = ElasticaProblem::new(b, q, obstacle, n_nodes, mode).map_err(SolveError::from)?;
    let threshold = cfg
        .number("gap_threshold")
        .unwrap_or_else(|| solver::default_gap_threshold(&single));
    cfg.record_default("gap_threshold", json!(threshold));

    let sol = solve_multilayer(&problem, &MultilayerOptions::default())?;
    let census = sol.void_census(threshold);

    let mut census_table = Table::new(&["interface", "void_length", "void_area", "runs"]);
    for row in &census.rows {
        census_table.row(&[
            row.interface.into(),
            row.void_length.into(),
            row.void_area.into(),
            row.runs.into(),
        ]);
    }

    let grid = problem.grid();
    let mut stack = Table::new(&["layer", "x", "w", "gap"]);
    for (j, field) in sol.fields().iter().enumerate() {
        let gaps = sol.interface_gaps(j);
        #[allow(clippy::needless_range_loop)]
        for i in 0..grid.len() {
            stack.row(&[
                (j + 1).into(),
                grid.x(i).into(),
                field.values()[i].into(),
                gaps[i].into(),
            ]);
        }
    }

    Ok((
        vec![("census.csv", census_table), ("stack.csv", stack)],
        json!({
            "energy": sol.energy(),
            "converged": sol.converged(),
            "outer_rounds": sol.outer_rounds(),
            "iterations": sol.iterations(),
            "pattern": format!("{:?}", census.pattern),
        }),
    ))
}

fn packet_optimum(cfg: &mut RunConfig) -> Result<Output, RunError> {
    let coeffs = PacketCoeffs {
        void_coeff: cfg.number("c_void").expect("validated"),
        bend_coeff: cfg.number("c_bend").expect("validated"),
    };
    let params = PacketParams {
        stiffness: cfg.number("B").expect("validated"),
        pressure: cfg.number("q").expect("validated"),
        slope: cfg.number("m").expect("validated"),
    };
    let n_max = cfg.integer("n_max").unwrap_or(1000) as usize;
    cfg.record_default("n_max", json!(n_max));

    let mut scan = Table::new(&["n", "energy"]);
    for n in 1..=n_max {
        let e = packet_energy(n, &coeffs, &params).map_err(|e| RunError::Solver(e.to_string()))?;
        scan.row(&[n.into(), e.into()]);
    }
    let best =
        optimal_packet(&coeffs, &params, n_max).map_err(|e| RunError::Solver(e.to_string()))?;
    let mut table = Table::new(&["n_star", "energy", "interior"]);
    table.row(&[
        best.n_star.into(),
        best.energy.into(),
        best.is_interior().into(),
    ]);

    Ok((
        vec![("packet_scan.csv", scan), ("packet_optimum.csv", table)],
        json!({
            "n_star": best.n_star,
            "energy": best.energy,
            "interior": best.is_interior(),
        }),
    ))
}
