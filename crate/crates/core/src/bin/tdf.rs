//! Command-line front end.
//!
//! Exit codes: 0 success, 2 I/O, 3 malformed input or shape mismatch,
//! 4 solver failure, 5 rank degeneracy, 6 falsified invariant.

use clap::{Args, Parser, Subcommand};
use tdf_core::config::{ConfigError, ExperimentConfig};
use tdf_core::dynamics::{
    hartree_lambda_consistency, integrate_hartree, integrate_tucker_dlra, reference_solve,
    DynamicsError, KroneckerSumOperator, TangentProjector, TrajectoryRecord,
};
use tdf_core::geometry::{make_base, GeometryError};
use tdf_core::projection::{
    injective_norm, project_generalized_lp, project_hilbert, project_metric_lp, InjectiveOptions,
    ProjectionError, SolveOptions,
};
use tdf_core::tensor::{read_tensor, AmbientNorm, TensorError};
use tdf_core::tucker::{
    alpha_rank, hosvd_truncate, read_tucker, to_tucker, tucker_to_json, Rank, TuckerError,
    DEFAULT_RANK_TOL,
};

const EXIT_IO: i32 = 2;
const EXIT_FORMAT: i32 = 3;
const EXIT_SOLVER: i32 = 4;
const EXIT_RANK: i32 = 5;
const EXIT_INVARIANT: i32 = 6;

#[derive(Parser)]
#[command(
    name = "tdf",
    about = "Fixed-rank Tucker tensor geometry and reduced-order dynamics",
    long_about = None,
    after_help = "Trajectory CSV columns: step, t, lambda, rayleigh, renorm_drift, \
projection_residual, min_core_sv_rel, reference_error (empty when no reference ran). \
All JSON goes to stdout, logs to stderr. Exit codes: 0 success, 2 I/O, 3 malformed \
input, 4 solver failure, 5 rank degeneracy, 6 falsified invariant."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the per-mode ranks of a tensor file as JSON.
    Rank(RankArgs),
    /// Higher-order SVD of a tensor file, optionally truncated to a rank.
    Hosvd(HosvdArgs),
    /// Project a tensor onto the tangent space at a Tucker base point.
    Project(ProjectArgs),
    /// Integrate a reduced-order model from a config file.
    Evolve(EvolveArgs),
    /// Ambient norm and certified injective-norm lower bound.
    Norms(NormsArgs),
}

#[derive(Args)]
struct RankArgs {
    /// Tensor file ({"dims": [...], "data": [...]}).
    input: String,
    /// Relative singular-value threshold.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    tol: f64,
}

#[derive(Args)]
struct HosvdArgs {
    input: String,
    /// Target rank, comma separated (full detected rank when omitted).
    #[arg(long, value_delimiter = ',')]
    rank: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    tol: f64,
    /// Write the Tucker JSON here instead of stdout.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ProjectArgs {
    /// Ambient tensor to project.
    input: String,
    /// Tucker file with the (minimal) base point.
    #[arg(long)]
    base: String,
    #[arg(long, default_value = "hilbert")]
    projector: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
}

#[derive(Args)]
struct EvolveArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: String,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the time horizon.
    #[arg(long)]
    t_final: Option<f64>,
    /// Override the step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the projector (hilbert | metric | generalized).
    #[arg(long)]
    projector: Option<String>,
    /// Also run dt/2 and dt/4 and report the observed convergence order.
    #[arg(long)]
    dt_sweep: bool,
    /// Dump full states as JSON next to the CSV.
    #[arg(long)]
    dump_states: bool,
}

#[derive(Args)]
struct NormsArgs {
    input: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Rank(args) => cmd_rank(&args),
        Command::Hosvd(args) => cmd_hosvd(&args),
        Command::Project(args) => cmd_project(&args),
        Command::Evolve(args) => cmd_evolve(&args),
        Command::Norms(args) => cmd_norms(&args),
    };
    std::process::exit(code);
}

fn fail(code: i32, message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    code
}

fn tensor_exit(e: &TensorError) -> i32 {
    match e {
        TensorError::Io(_) => EXIT_IO,
        _ => EXIT_FORMAT,
    }
}

fn tucker_exit(e: &TuckerError) -> i32 {
    match e {
        TuckerError::Io(_) => EXIT_IO,
        TuckerError::Tensor(t) => tensor_exit(t),
        TuckerError::RankUnreachable { .. } => EXIT_RANK,
        _ => EXIT_FORMAT,
    }
}

fn geometry_exit(e: &GeometryError) -> i32 {
    match e {
        GeometryError::Tensor(t) => tensor_exit(t),
        GeometryError::Tucker(t) => tucker_exit(t),
        GeometryError::SingularCore { .. } => EXIT_RANK,
        _ => EXIT_FORMAT,
    }
}

fn dynamics_exit(e: &DynamicsError) -> i32 {
    match e {
        DynamicsError::Io(_) => EXIT_IO,
        DynamicsError::Tensor(t) => tensor_exit(t),
        DynamicsError::Tucker(t) => tucker_exit(t),
        DynamicsError::Geometry(g) => geometry_exit(g),
        DynamicsError::RankDegeneracy { .. } => EXIT_RANK,
        DynamicsError::ProjectorFailure { .. } => EXIT_SOLVER,
        _ => EXIT_FORMAT,
    }
}

fn config_exit(e: &ConfigError) -> i32 {
    match e {
        ConfigError::Io(_) => EXIT_IO,
        ConfigError::Tensor(t) => tensor_exit(t),
        ConfigError::Tucker(t) => tucker_exit(t),
        ConfigError::Dynamics(d) => dynamics_exit(d),
        _ => EXIT_FORMAT,
    }
}

fn cmd_rank(args: &RankArgs) -> i32 {
    let t = match read_tensor(&args.input) {
        Ok(t) => t,
        Err(e) => return fail(tensor_exit(&e), e),
    };
    let mut ranks = Vec::with_capacity(t.order());
    for mu in 0..t.order() {
        match alpha_rank(&t, mu, args.tol) {
            Ok(r) => ranks.push(r),
            Err(e) => return fail(tucker_exit(&e), e),
        }
    }
    println!("{}", serde_json::json!({"ranks": ranks, "tol": args.tol}));
    0
}

fn cmd_hosvd(args: &HosvdArgs) -> i32 {
    let t = match read_tensor(&args.input) {
        Ok(t) => t,
        Err(e) => return fail(tensor_exit(&e), e),
    };
    let result = match &args.rank {
        None => to_tucker(&t, args.tol),
        Some(r) => Rank::new(r.clone(), t.shape())
            .and_then(|rank| hosvd_truncate(&t, &rank).map(|(u, _)| u)),
    };
    let u = match result {
        Ok(u) => u,
        Err(e) => return fail(tucker_exit(&e), e),
    };
    let json = tucker_to_json(&u);
    match &args.out {
        None => println!("{json}"),
        Some(path) => {
            if let Err(e) = std::fs::write(path, json) {
                return fail(EXIT_IO, e);
            }
        }
    }
    0
}

fn cmd_project(args: &ProjectArgs) -> i32 {
    let g = match read_tensor(&args.input) {
        Ok(t) => t,
        Err(e) => return fail(tensor_exit(&e), e),
    };
    let base_tucker = match read_tucker(&args.base) {
        Ok(u) => u,
        Err(e) => return fail(tucker_exit(&e), e),
    };
    if base_tucker.ambient_shape() != *g.shape() {
        return fail(
            EXIT_FORMAT,
            format!(
                "base point lives in shape {:?} but the input has shape {:?}",
                base_tucker.ambient_shape().dims(),
                g.shape().dims()
            ),
        );
    }
    let b = match make_base(&base_tucker) {
        Ok(b) => b,
        Err(e) => return fail(geometry_exit(&e), e),
    };
    let opts = SolveOptions {
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let nrm = match AmbientNorm::uniform(args.p, g.shape()) {
        Ok(n) => n,
        Err(e) => return fail(EXIT_FORMAT, e),
    };
    let result = match args.projector.as_str() {
        "hilbert" => project_hilbert(&b, &g),
        "metric" => project_metric_lp(&b, &g, &nrm, &opts),
        "generalized" => project_generalized_lp(&b, &g, &nrm, &opts),
        other => return fail(EXIT_FORMAT, format!("unknown projector {other:?}")),
    };
    match result {
        Ok(report) => {
            println!("{}", report.to_json());
            if report.duality_residual <= args.tol {
                0
            } else {
                fail(EXIT_SOLVER, "projection residual above tolerance")
            }
        }
        Err(ProjectionError::MaxIterationsExceeded { report, tol }) => {
            println!("{}", report.to_json());
            fail(
                EXIT_SOLVER,
                format!(
                    "solver stopped with residual {} above tolerance {tol}",
                    report.duality_residual
                ),
            )
        }
        Err(ProjectionError::Geometry(e)) => fail(geometry_exit(&e), e),
        Err(ProjectionError::Tensor(e)) => fail(tensor_exit(&e), e),
        Err(e) => fail(EXIT_FORMAT, e),
    }
}

fn cmd_norms(args: &NormsArgs) -> i32 {
    let t = match read_tensor(&args.input) {
        Ok(t) => t,
        Err(e) => return fail(tensor_exit(&e), e),
    };
    let nrm = match AmbientNorm::uniform(args.p, t.shape()) {
        Ok(n) => n,
        Err(e) => return fail(EXIT_FORMAT, e),
    };
    let ambient = match nrm.eval(&t) {
        Ok(a) => a,
        Err(e) => return fail(EXIT_FORMAT, e),
    };
    let seed = std::env::var("TDF_SEED")
        .ok()
        .and_then(|s| s.parse::<u64>().ok())
        .unwrap_or(args.seed);
    let opts = InjectiveOptions {
        restarts: args.restarts,
        seed,
        ..InjectiveOptions::default()
    };
    let injective_lb = match injective_norm(&t, &nrm, &opts) {
        Ok((v, _)) => v,
        Err(ProjectionError::ZeroTensor) => 0.0,
        Err(e) => return fail(EXIT_FORMAT, e),
    };
    let dominated = injective_lb <= ambient + 1e-12;
    println!(
        "{}",
        serde_json::json!({
            "ambient": ambient,
            "injective_lb": injective_lb,
            "dominated": dominated,
        })
    );
    if dominated {
        0
    } else {
        fail(
            EXIT_INVARIANT,
            "injective lower bound exceeds the ambient crossnorm",
        )
    }
}

struct EvolveOutcome {
    record: TrajectoryRecord,
    terminal_lambda: Option<f64>,
    lambda_closed_form_rel_err: Option<f64>,
    terminal_reference_error: Option<f64>,
}

fn run_evolve(
    config: &ExperimentConfig,
    operator: &KroneckerSumOperator,
    t_final: f64,
    dt: f64,
) -> Result<EvolveOutcome, DynamicsError> {
    let reference = if config.integrator.reference {
        let u0 = config
            .dense_initial()
            .map_err(|e| DynamicsError::Format(e.to_string()))?;
        Some(reference_solve(operator, &u0, t_final, dt)?)
    } else {
        None
    };

    let mut outcome = match config.integrator.mode.as_str() {
        "hartree" => {
            let s0 = config
                .hartree_initial()
                .map_err(|e| DynamicsError::Format(e.to_string()))?;
            let record = integrate_hartree(operator, &s0, t_final, dt)?;
            let consistency = hartree_lambda_consistency(operator, &record)?;
            let terminal_lambda = record.steps.last().map(|s| s.lambda);
            EvolveOutcome {
                record,
                terminal_lambda,
                lambda_closed_form_rel_err: Some(consistency),
                terminal_reference_error: None,
            }
        }
        _ => {
            let v0 = config
                .tucker_initial()
                .map_err(|e| DynamicsError::Format(e.to_string()))?;
            let projector = match config.integrator.projector.as_str() {
                "hilbert" => TangentProjector::Hilbert,
                "metric" => TangentProjector::Metric {
                    nrm: config
                        .ambient_norm()
                        .map_err(|e| DynamicsError::Format(e.to_string()))?,
                    opts: config.solve_options(),
                },
                _ => TangentProjector::Generalized {
                    nrm: config
                        .ambient_norm()
                        .map_err(|e| DynamicsError::Format(e.to_string()))?,
                    opts: config.solve_options(),
                },
            };
            let record = integrate_tucker_dlra(operator, &v0, t_final, dt, &projector)?;
            EvolveOutcome {
                record,
                terminal_lambda: None,
                lambda_closed_form_rel_err: None,
                terminal_reference_error: None,
            }
        }
    };

    if let Some(reference) = reference {
        outcome.record.attach_reference_errors(&reference)?;
        outcome.terminal_reference_error = outcome
            .record
            .steps
            .last()
            .and_then(|s| s.reference_error);
    }
    Ok(outcome)
}

fn cmd_evolve(args: &EvolveArgs) -> i32 {
    let mut config = match ExperimentConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(config_exit(&e), e),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(t_final) = args.t_final {
        config.integrator.t_final = t_final;
    }
    if let Some(dt) = args.dt {
        config.integrator.dt = dt;
    }
    if let Some(projector) = &args.projector {
        config.integrator.projector = projector.clone();
    }
    if let Err(e) = config.validate() {
        return fail(config_exit(&e), e);
    }

    let operator = match config.operator() {
        Ok(a) => a,
        Err(e) => return fail(config_exit(&e), e),
    };
    let t_final = config.integrator.t_final;
    let dt = config.integrator.dt;

    let outcome = match run_evolve(&config, &operator, t_final, dt) {
        Ok(o) => o,
        Err(e) => return fail(dynamics_exit(&e), e),
    };

    if let Err(e) = std::fs::write(&config.output.csv, outcome.record.to_csv()) {
        return fail(EXIT_IO, e);
    }
    if args.dump_states {
        let path = config
            .output
            .states_json
            .clone()
            .unwrap_or_else(|| "states.json".into());
        if let Err(e) = std::fs::write(&path, outcome.record.states_to_json()) {
            return fail(EXIT_IO, e);
        }
    }

    let observed_order = if args.dt_sweep {
        match dt_sweep_order(&config, &operator, t_final, dt) {
            Ok(order) => Some(order),
            Err(e) => return fail(dynamics_exit(&e), e),
        }
    } else {
        None
    };

    let summary = serde_json::json!({
        "mode": config.integrator.mode,
        "projector": config.integrator.projector,
        "steps": outcome.record.steps.len(),
        "t_final": t_final,
        "dt": dt,
        "seed": config.effective_seed(),
        "csv": config.output.csv,
        "terminal_lambda": outcome.terminal_lambda,
        "lambda_closed_form_rel_err": outcome.lambda_closed_form_rel_err,
        "terminal_reference_error": outcome.terminal_reference_error,
        "observed_order": observed_order,
    });
    println!("{summary}");
    0
}

/// Terminal errors against a fine-grid full-space reference for dt, dt/2,
/// dt/4; the reported order is the mean of the two dyadic ratios.
fn dt_sweep_order(
    config: &ExperimentConfig,
    operator: &KroneckerSumOperator,
    t_final: f64,
    dt: f64,
) -> Result<f64, DynamicsError> {
    let u0 = config
        .dense_initial()
        .map_err(|e| DynamicsError::Format(e.to_string()))?;
    let fine = reference_solve(operator, &u0, t_final, dt / 8.0)?;
    let exact = fine.terminal_dense()?;
    let mut errors = Vec::new();
    for k in 0..3 {
        let step = dt / 2f64.powi(k);
        let outcome = run_evolve(config, operator, t_final, step)?;
        let terminal = outcome.record.terminal_dense()?;
        errors.push(terminal.sub(&exact).norm2());
    }
    let o1 = (errors[0] / errors[1]).log2();
    let o2 = (errors[1] / errors[2]).log2();
    Ok(0.5 * (o1 + o2))
}
