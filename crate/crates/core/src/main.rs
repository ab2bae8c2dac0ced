use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use cram::data::{fmt_f64, read_table, write_atomic, write_dataset, write_table};
use cram::experiments::{
    generate_synthetic, kfold_cv, risk_scaling_study, with_thread_limit, RiskSettings,
    SelectionRule, SyntheticSpec,
};
use cram::path::{default_lambda_grid, DEFAULT_GRID_SIZE};
use cram::{
    export_curves, fit, load_csv, load_model, rank_path, save_model, standardize,
    stationarity_certificate, CramError, Dataset, FitConfig, Kernel, LambdaScale, Penalty,
    PenaltyKind, Result, SmootherSpec,
};

#[derive(Parser)]
#[command(name = "cram", version, about = "Constrained rank additive models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write it to a model file
    Fit(FitCmd),
    /// Predict responses (original scale) for new covariates
    Predict(PredictCmd),
    /// K-fold cross-validation over a lambda grid
    Cv(CvCmd),
    /// Rank and objective along a warm-started lambda path
    RankPath(PathCmd),
    /// Draw the synthetic four-covariate, three-response dataset
    Simulate(SimulateCmd),
    /// Held-out risk of the cross-validated joint fit versus sample size
    RiskStudy(RiskCmd),
    /// Check the stationarity conditions of a single-covariate fit
    Certify(CertifyCmd),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row
    #[arg(long)]
    data: PathBuf,
    /// Covariate columns, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<String>,
    /// Response columns, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    y: Vec<String>,
}

#[derive(Args)]
struct SmoothArgs {
    /// Smoothing kernel: gaussian or epanechnikov
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    /// Bandwidth in standardized covariate units; one value or one per covariate
    /// [default: 1.06 * sd * n^(-1/5) per covariate]
    #[arg(long, value_delimiter = ',')]
    bandwidth: Vec<f64>,
    /// Convergence tolerance on the relative change of fitted components
    #[arg(long, default_value_t = cram::config::DEFAULT_TOL)]
    tol: f64,
    /// Maximum number of backfitting sweeps
    #[arg(long, default_value_t = cram::config::DEFAULT_MAX_SWEEPS)]
    max_sweeps: usize,
    /// Relative tolerance for numerical rank
    #[arg(long, default_value_t = cram::linalg::DEFAULT_RANK_TOL)]
    rank_tol: f64,
}

#[derive(Args)]
struct PenaltyArgs {
    /// Penalty: per-component or joint
    #[arg(long, default_value = "joint")]
    penalty: String,
    /// Scale of --lambda / --grid: normalized ((1/2n)||Y-M||^2 + lambda ||M||_*/sqrt(n))
    /// or unnormalized ((1/2)||Y-M||^2 + lambda ||M||_*)
    #[arg(long, default_value = "normalized")]
    lambda_scale: String,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    /// Regularization weight: a scalar, or one value per covariate (per-component)
    #[arg(long, value_delimiter = ',', default_value = "0")]
    lambda: Vec<f64>,
    #[command(flatten)]
    smooth: SmoothArgs,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
    /// Directory for per-covariate component curves (curve_<j>.csv)
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Number of grid points per exported curve
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
}

#[derive(Args)]
struct PredictCmd {
    /// Model file written by `fit`
    #[arg(long)]
    model: PathBuf,
    /// CSV holding the model's covariate columns (original scale)
    #[arg(long)]
    data: PathBuf,
    /// Output CSV [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Explicit ascending lambda grid, comma separated
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// Size of the default log-spaced grid from 1e-3 to the smallest zero-fit lambda
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid_size: usize,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CvCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[command(flatten)]
    smooth: SmoothArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Number of folds
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Seed for the fold assignment
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Selection rule: min or 1se
    #[arg(long, default_value = "min")]
    rule: String,
    /// Report CSV (lambda,cv_error,cv_se)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct PathCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[command(flatten)]
    smooth: SmoothArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Output CSV (lambda,rank,objective)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimulateCmd {
    /// Sample size
    #[arg(long, default_value_t = 150)]
    n: usize,
    /// Noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lower end of the uniform covariate range
    #[arg(long, default_value_t = -2.0)]
    x_low: f64,
    /// Upper end of the uniform covariate range
    #[arg(long, default_value_t = 2.0)]
    x_high: f64,
    /// Output CSV (x1..x4,y1..y3)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct RiskCmd {
    /// Ascending training sample sizes
    #[arg(long, value_delimiter = ',', default_value = "50,150")]
    n_list: Vec<usize>,
    /// Repetitions per sample size
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Base seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cross-validation folds per fit
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Lambda grid size per fit
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid_size: usize,
    /// Output CSV (n,mean_risk,se)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CertifyCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Regularization weight (> 0)
    #[arg(long)]
    lambda: f64,
    /// Scale of --lambda: normalized or unnormalized
    #[arg(long, default_value = "normalized")]
    lambda_scale: String,
    #[command(flatten)]
    smooth: SmoothArgs,
    /// Tolerance for the stationarity conditions
    #[arg(long, default_value_t = 1e-6)]
    cert_tol: f64,
}

fn load_standardized(args: &DataArgs) -> Result<Dataset> {
    standardize(&load_csv(&args.data, &args.x, &args.y)?)
}

fn build_config(data: &Dataset, penalty: Penalty, smooth: &SmoothArgs) -> Result<FitConfig> {
    let kernel: Kernel = smooth.kernel.parse()?;
    let p = data.p();
    let smoothers = match smooth.bandwidth.len() {
        0 => (0..p)
            .map(|j| {
                let spec = SmootherSpec::default_for(&data.covariate(j))?;
                SmootherSpec::new(kernel, spec.bandwidth)
            })
            .collect::<Result<Vec<_>>>()?,
        1 => vec![SmootherSpec::new(kernel, smooth.bandwidth[0])?; p],
        m if m == p => smooth
            .bandwidth
            .iter()
            .map(|&h| SmootherSpec::new(kernel, h))
            .collect::<Result<Vec<_>>>()?,
        m => {
            return Err(CramError::InvalidArgument(format!(
                "--bandwidth has {m} values for {p} covariates"
            )))
        }
    };
    let mut config = FitConfig::new(penalty, smoothers);
    config.tol = smooth.tol;
    config.max_sweeps = smooth.max_sweeps;
    config.rank_tol = smooth.rank_tol;
    config.validate(p)?;
    Ok(config)
}

fn build_penalty(
    kind: PenaltyKind,
    lambda: &[f64],
    scale: LambdaScale,
    data: &Dataset,
) -> Result<Penalty> {
    let conv = |l: f64| scale.to_normalized(l, data.n());
    match kind {
        PenaltyKind::Joint => match lambda {
            [l] => Ok(Penalty::Joint { lambda: conv(*l) }),
            _ => Err(CramError::InvalidArgument(
                "joint penalty takes a single --lambda".into(),
            )),
        },
        PenaltyKind::PerComponent => {
            let lambdas = match lambda.len() {
                1 => vec![conv(lambda[0]); data.p()],
                m if m == data.p() => lambda.iter().map(|&l| conv(l)).collect(),
                m => {
                    return Err(CramError::InvalidArgument(format!(
                        "--lambda has {m} values for {} covariates",
                        data.p()
                    )))
                }
            };
            Ok(Penalty::PerComponent { lambdas })
        }
    }
}

fn join<T: ToString>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn resolve_grid(
    data: &Dataset,
    config: &FitConfig,
    grid: &GridArgs,
    scale: LambdaScale,
) -> Result<Vec<f64>> {
    if grid.grid.is_empty() {
        default_lambda_grid(data, config, grid.grid_size)
    } else {
        Ok(grid
            .grid
            .iter()
            .map(|&l| scale.to_normalized(l, data.n()))
            .collect())
    }
}

fn run_fit(cmd: FitCmd) -> Result<()> {
    let data = load_standardized(&cmd.data)?;
    let kind: PenaltyKind = cmd.penalty.penalty.parse()?;
    let scale: LambdaScale = cmd.penalty.lambda_scale.parse()?;
    let penalty = build_penalty(kind, &cmd.lambda, scale, &data)?;
    let config = build_config(&data, penalty, &cmd.smooth)?;
    let model = fit(&data, &config)?;
    save_model(&model, &cmd.out)?;
    if let Some(dir) = &cmd.curves {
        export_curves(&model, cmd.grid_size, dir)?;
    }
    let d = &model.diagnostics;
    println!("penalty={}", cmd.penalty.penalty);
    match &model.config.penalty {
        Penalty::PerComponent { lambdas } => {
            println!("lambda={}", join(lambdas.iter().map(|&l| fmt_f64(l))))
        }
        Penalty::Joint { lambda } => println!("lambda={}", fmt_f64(*lambda)),
    }
    println!("sweeps={}", d.sweeps_run);
    println!("converged={}", d.converged);
    println!("component_ranks={}", join(&d.component_ranks));
    println!("joint_rank={}", d.joint_rank);
    println!(
        "objective_trace={}",
        join(d.objective_trace.iter().map(|&v| fmt_f64(v)))
    );
    Ok(())
}

fn run_predict(cmd: PredictCmd) -> Result<()> {
    let model = load_model(&cmd.model)?;
    let x = read_table(&cmd.data, &model.x_names)?;
    let pred = model.predict_original(&x)?;
    match &cmd.out {
        Some(path) => write_table(path, &model.y_names, &pred),
        None => {
            let mut out = String::new();
            out.push_str(&model.y_names.join(","));
            out.push('\n');
            for r in pred.row_iter() {
                out.push_str(&join(r.iter().map(|&v| fmt_f64(v))));
                out.push('\n');
            }
            let mut stdout = std::io::stdout().lock();
            match stdout
                .write_all(out.as_bytes())
                .and_then(|_| stdout.flush())
            {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CramError::io("<stdout>", e))
                }
                _ => Ok(()),
            }
        }
    }
}

fn run_cv(cmd: CvCmd) -> Result<()> {
    let data = load_standardized(&cmd.data)?;
    let kind: PenaltyKind = cmd.penalty.penalty.parse()?;
    let scale: LambdaScale = cmd.penalty.lambda_scale.parse()?;
    let rule: SelectionRule = cmd.rule.parse()?;
    let config = build_config(
        &data,
        build_penalty(kind, &[0.0], scale, &data)?,
        &cmd.smooth,
    )?;
    let grid = resolve_grid(&data, &config, &cmd.grid, scale)?;
    let report = with_thread_limit(|| kfold_cv(&data, &config, &grid, cmd.k, cmd.seed, rule))?;
    let rows = DMatrix::from_fn(grid.len(), 3, |i, c| match c {
        0 => report.lambda_grid[i],
        1 => report.cv_error[i],
        _ => report.cv_se[i],
    });
    write_table(
        &cmd.out,
        &["lambda".into(), "cv_error".into(), "cv_se".into()],
        &rows,
    )?;
    println!("selected_lambda={}", fmt_f64(report.selected_lambda));
    Ok(())
}

fn run_rank_path(cmd: PathCmd) -> Result<()> {
    let data = load_standardized(&cmd.data)?;
    let kind: PenaltyKind = cmd.penalty.penalty.parse()?;
    let scale: LambdaScale = cmd.penalty.lambda_scale.parse()?;
    let config = build_config(
        &data,
        build_penalty(kind, &[0.0], scale, &data)?,
        &cmd.smooth,
    )?;
    let grid = resolve_grid(&data, &config, &cmd.grid, scale)?;
    let path = rank_path(&data, &config, &grid)?;
    let mut out = String::from("lambda,rank,objective\n");
    for pt in &path {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(pt.lambda),
            pt.rank,
            fmt_f64(pt.objective)
        ));
    }
    write_atomic(&cmd.out, out.as_bytes())
}

fn run_simulate(cmd: SimulateCmd) -> Result<()> {
    let spec = SyntheticSpec {
        n: cmd.n,
        sigma: cmd.sigma,
        seed: cmd.seed,
        x_low: cmd.x_low,
        x_high: cmd.x_high,
    };
    write_dataset(&cmd.out, &generate_synthetic(&spec)?)
}

fn run_risk(cmd: RiskCmd) -> Result<()> {
    let base = SyntheticSpec {
        sigma: cmd.sigma,
        seed: cmd.seed,
        ..Default::default()
    };
    let settings = RiskSettings {
        folds: cmd.k,
        grid_size: cmd.grid_size,
        ..Default::default()
    };
    let rows = with_thread_limit(|| risk_scaling_study(&base, &cmd.n_list, cmd.reps, &settings))?;
    let mut out = String::from("n,mean_risk,se\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.n,
            fmt_f64(r.mean_risk),
            fmt_f64(r.se)
        ));
    }
    write_atomic(&cmd.out, out.as_bytes())
}

fn run_certify(cmd: CertifyCmd) -> Result<()> {
    if cmd.data.x.len() != 1 {
        return Err(CramError::InvalidArgument(
            "certify needs exactly one --x column".into(),
        ));
    }
    let data = load_standardized(&cmd.data)?;
    let scale: LambdaScale = cmd.lambda_scale.parse()?;
    let lambda = scale.to_normalized(cmd.lambda, data.n());
    let config = build_config(&data, Penalty::Joint { lambda }, &cmd.smooth)?;
    let model = fit(&data, &config)?;
    // the certificate checks the final shrinkage step P -> P T, before centering
    let smoothed = cram::build_smoother(&data.covariate(0), &config.smoothers[0])?
        .smooth(&model.residual_targets[0]);
    let shrunk = model.shrinkage[0].apply(&smoothed);
    let report = stationarity_certificate(&smoothed, &shrunk, lambda, cmd.cert_tol)?;
    for (name, c) in [
        ("spectral", report.spectral),
        ("orthogonality", report.orthogonality),
        ("range", report.range),
    ] {
        println!(
            "{name}={} bound={} pass={}",
            fmt_f64(c.value),
            fmt_f64(c.bound),
            c.passed
        );
    }
    println!("stationary={}", report.passed());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(c) => run_fit(c),
        Command::Predict(c) => run_predict(c),
        Command::Cv(c) => run_cv(c),
        Command::RankPath(c) => run_rank_path(c),
        Command::Simulate(c) => run_simulate(c),
        Command::RiskStudy(c) => run_risk(c),
        Command::Certify(c) => run_certify(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let family = e.family();
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", family.as_str());
            ExitCode::from(family.exit_code() as u8)
        }
    }
}
