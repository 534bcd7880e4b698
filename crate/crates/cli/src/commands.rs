use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use gapsafe::bench::{budget_profile, default_budgets, write_bench_rows};
use gapsafe::dataio::{
    read_csv, read_libsvm, result_rows, standardize, write_coefficients, write_result_rows, ColumnScaling,
    Dataset, StandardizeOptions, Task,
};
use gapsafe::screening::RuleKind;
use gapsafe::synth::{self, SynthSpec};
use gapsafe::{
    make_grid, run_path, solve, Error, Grid, GroupPartition, PathConfig, Penalty, Problem, SolverConfig,
    WarmStart, WeightScheme,
};
use serde::Serialize;

use crate::args::{BenchArgs, DataArgs, Format, GridArgs, Model, Normalize, PathArgs, SolveArgs, SolverArgs, Weights};
use crate::{EX_DATAERR, EX_IOERR, EX_SOFTWARE, EX_UNCONVERGED, EX_USAGE};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    Io(io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EX_USAGE,
            CliError::Io(_) => EX_IOERR,
            CliError::Core(e) => match e {
                Error::Io(_) => EX_IOERR,
                Error::Csv(c) if c.is_io_error() => EX_IOERR,
                Error::Csv(_)
                | Error::Parse { .. }
                | Error::InvalidLabels(_)
                | Error::InvalidMatrix(_)
                | Error::DegenerateProblem => EX_DATAERR,
                Error::InvalidConfig(_)
                | Error::InvalidPenalty(_)
                | Error::InvalidPartition(_)
                | Error::DimensionMismatch { .. }
                | Error::UnknownGroup(_)
                | Error::UnsupportedRule(_) => EX_USAGE,
                Error::InfeasibleDual { .. } | Error::Diverged { .. } => EX_SOFTWARE,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn task(model: Model) -> Task {
    match model {
        Model::Lasso | Model::GroupLasso | Model::Sgl => Task::Regression,
        Model::Logistic => Task::Binary,
        Model::Multitask => Task::MultiTask,
        Model::Multinomial => Task::Multiclass,
    }
}

fn is_multi_output(model: Model) -> bool {
    matches!(model, Model::Multitask | Model::Multinomial)
}

fn validate_data(a: &DataArgs) -> CliResult<()> {
    let grouped = a.groups.is_some() || a.group_size.is_some();
    match a.model {
        Model::Lasso if grouped || a.tau.is_some() => {
            return usage("--model lasso takes no --groups, --group-size or --tau");
        }
        Model::GroupLasso if !grouped => return usage("--model group-lasso needs --groups or --group-size"),
        Model::GroupLasso if a.tau.is_some() => return usage("--tau is only valid for sgl"),
        Model::Sgl if !grouped || a.tau.is_none() => {
            return usage("--model sgl needs --tau and --groups or --group-size");
        }
        Model::Logistic if a.tau.is_some() && !grouped => return usage("--tau with logistic needs groups"),
        Model::Multitask | Model::Multinomial if a.tau.is_some() => {
            return usage("--tau is not available for multi-output models");
        }
        _ => {}
    }
    if let Some(tau) = a.tau {
        if !(0.0..=1.0).contains(&tau) {
            return usage("--tau must lie in [0, 1]");
        }
    }
    if a.group_size == Some(0) {
        return usage("--group-size must be positive");
    }
    if a.label_columns == 0 {
        return usage("--label-columns must be positive");
    }
    if (a.center_y || a.scale_y) && matches!(a.model, Model::Logistic | Model::Multinomial) {
        return usage("--center-y/--scale-y apply to regression models only");
    }
    if a.synthetic {
        if a.n_samples == 0 || a.n_features == 0 {
            return usage("--n-samples and --n-features must be positive");
        }
        if !(0.0..=1.0).contains(&a.support) || !(a.snr > 0.0) {
            return usage("--support must lie in [0, 1] and --snr must be positive");
        }
        match (is_multi_output(a.model), a.n_outputs) {
            (false, Some(q)) if q != 1 => return usage("--n-outputs needs --model multitask or multinomial"),
            (true, Some(q)) if q < 2 => return usage("--n-outputs must be at least 2"),
            _ => {}
        }
    } else if a.n_outputs.is_some() {
        return usage("--n-outputs only applies to --synthetic");
    }
    Ok(())
}

fn solver_config(s: &SolverArgs, seed: u64, rule: RuleKind) -> CliResult<SolverConfig> {
    let cfg = SolverConfig {
        eps: s.eps,
        max_epochs: s.max_epochs,
        screen_every: s.screen_every,
        rule,
        scale_tolerance: !s.no_scale_eps,
        shuffle_seed: s.shuffle.then_some(seed),
        ..SolverConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn validate_grid(g: &GridArgs) -> CliResult<()> {
    match &g.lambdas {
        Some(l) if l.is_empty() => usage("--lambdas is empty"),
        Some(l) if l.iter().any(|v| !(*v > 0.0 && v.is_finite())) => usage("--lambdas must be positive"),
        Some(l) if l.windows(2).any(|w| w[1] >= w[0]) => usage("--lambdas must be strictly decreasing"),
        Some(_) => Ok(()),
        None if g.n_lambdas < 2 => usage("--n-lambdas must be at least 2"),
        None if !(g.delta > 0.0 && g.delta.is_finite()) => usage("--delta must be positive"),
        None => Ok(()),
    }
}

/// `all` expands to every rule the model supports.
fn rules(name: &str, model: Model) -> CliResult<Vec<RuleKind>> {
    let supported = |r: RuleKind| match r {
        RuleKind::Dst3 => matches!(model, Model::Lasso | Model::GroupLasso | Model::Sgl),
        RuleKind::Sis => !matches!(model, Model::Logistic | Model::Multinomial),
        _ => true,
    };
    if name == "all" {
        return Ok(RuleKind::ALL.into_iter().filter(|&r| supported(r)).collect());
    }
    let rule = RuleKind::from_name(name).ok_or_else(|| CliError::Usage(format!("unknown rule {name:?}")))?;
    if !supported(rule) {
        return usage(format!("rule {name} is not available for this model"));
    }
    Ok(vec![rule])
}

fn load_dataset(a: &DataArgs) -> CliResult<Dataset> {
    if a.synthetic {
        let q = match a.model {
            Model::Multitask | Model::Multinomial => a.n_outputs.unwrap_or(3),
            _ => 1,
        };
        let spec = SynthSpec {
            n: a.n_samples,
            p: a.n_features,
            q,
            group_size: a.group_size.unwrap_or(1),
            support: a.support,
            snr: a.snr,
            seed: a.seed,
        };
        let s = match a.model {
            Model::Logistic => synth::logistic(&spec),
            Model::Multinomial => synth::multinomial(&spec),
            _ => synth::regression(&spec),
        }
        .map_err(|e| CliError::Usage(e.to_string()))?;
        return Ok(s.dataset);
    }
    let path = a.data.as_deref().expect("clap requires --data without --synthetic");
    let format = a.format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Libsvm,
    });
    let ds = match format {
        Format::Libsvm => read_libsvm(path)?,
        Format::Csv => read_csv(path, a.label_columns, a.header)?,
    };
    Ok(ds)
}

fn load_partition(a: &DataArgs, p: usize) -> CliResult<GroupPartition> {
    let scheme = match a.weights {
        Weights::Ones => WeightScheme::Ones,
        Weights::SqrtSize => WeightScheme::SqrtSize,
    };
    if let Some(file) = &a.groups {
        let text = fs::read_to_string(file)?;
        let labels: Vec<&str> = text.split_whitespace().collect();
        if labels.len() != p {
            return usage(format!("{}: {} group labels for {p} features", file.display(), labels.len()));
        }
        return Ok(GroupPartition::from_labels(&labels, scheme)?);
    }
    if let Some(size) = a.group_size {
        return Ok(GroupPartition::contiguous(p, size, scheme)?);
    }
    Ok(GroupPartition::singletons(p))
}

fn build_problem(a: &DataArgs) -> CliResult<Problem> {
    let ds = load_dataset(a)?;
    let opts = StandardizeOptions {
        center_y: a.center_y,
        unit_variance_y: a.scale_y,
        center_columns: a.center_columns,
        columns: match a.normalize {
            Normalize::None => ColumnScaling::None,
            Normalize::UnitNorm => ColumnScaling::UnitNorm,
            Normalize::UnitVariance => ColumnScaling::UnitVariance,
        },
    };
    let ds = if opts == StandardizeOptions::default() {
        ds
    } else {
        let (ds, tr) = standardize(&ds, &opts)?;
        if !tr.zero_columns.is_empty() {
            eprintln!("gapsafe: {} constant column(s) left at zero", tr.zero_columns.len());
        }
        ds
    };
    let loss = ds.to_loss(task(a.model))?;
    let part = load_partition(a, ds.n_features())?;
    let penalty = match (a.model, a.tau) {
        (Model::Lasso, _) => Penalty::lasso(ds.n_features()),
        (Model::Sgl | Model::Logistic, Some(tau)) => Penalty::sparse_group_lasso(tau, part)?,
        (Model::Logistic, None) if part.is_singletons() => Penalty::lasso(ds.n_features()),
        _ => Penalty::group_lasso(part)?,
    };
    Ok(Problem::new(ds.x, loss, penalty)?)
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct SolveSummary {
    lambda: f64,
    gap: f64,
    epochs: usize,
    nnz: usize,
    active_groups: usize,
}

pub fn cmd_solve(a: &SolveArgs) -> CliResult<ExitCode> {
    validate_data(&a.data)?;
    let rule = rules(&a.rule, a.data.model)?[0];
    let cfg = solver_config(&a.solver, a.data.seed, rule)?;
    match (a.lambda, a.lambda_ratio) {
        (Some(l), _) if !(l > 0.0 && l.is_finite()) => return usage("--lambda must be positive"),
        (_, Some(r)) if !(r > 0.0 && r.is_finite()) => return usage("--lambda-ratio must be positive"),
        _ => {}
    }
    let prob = build_problem(&a.data)?;
    let lambda = a.lambda.unwrap_or_else(|| a.lambda_ratio.unwrap_or(1.0) * prob.lambda_max());
    let res = solve(&prob, lambda, None, &cfg)?;
    if let Some(path) = &a.coef_out {
        write_coefficients(path, &res.beta, prob.n_outputs())?;
    }
    let summary = SolveSummary {
        lambda,
        gap: res.gap,
        epochs: res.epochs,
        nnz: res.nnz(),
        active_groups: res.active.n_active_groups(),
    };
    let json = serde_json::to_string(&summary).map_err(io::Error::from)?;
    println!("{json}");
    Ok(if res.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EX_UNCONVERGED)
    })
}

pub fn cmd_path(a: &PathArgs) -> CliResult<ExitCode> {
    validate_data(&a.data)?;
    validate_grid(&a.grid)?;
    let rules = rules(&a.rule, a.data.model)?;
    let warm_start = WarmStart::from_name(&a.warm_start)
        .ok_or_else(|| CliError::Usage(format!("unknown warm start {:?}", a.warm_start)))?;
    let configs = rules
        .iter()
        .map(|&r| solver_config(&a.solver, a.data.seed, r))
        .collect::<CliResult<Vec<_>>>()?;
    let grid = match &a.grid.lambdas {
        Some(l) => Grid::Explicit(l.clone()),
        None => Grid::Geometric {
            count: a.grid.n_lambdas,
            decades: a.grid.delta,
        },
    };
    let prob = build_problem(&a.data)?;
    let mut rows = Vec::new();
    let mut converged = true;
    for solver in configs {
        let res = run_path(
            &prob,
            &PathConfig {
                grid: grid.clone(),
                warm_start,
                solver,
            },
        )?;
        for pt in &res.points {
            if let Err(e) = &pt.outcome {
                eprintln!("gapsafe: {} at lambda {:e}: {e}", res.rule, pt.lambda);
            }
        }
        converged &= res.all_converged();
        rows.extend(result_rows(&res));
    }
    write_result_rows(open_out(a.out.as_deref())?, &rows)?;
    Ok(if converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EX_UNCONVERGED)
    })
}

pub fn cmd_bench(a: &BenchArgs) -> CliResult<ExitCode> {
    validate_data(&a.data)?;
    validate_grid(&a.grid)?;
    let rules = rules(&a.rule, a.data.model)?;
    let budgets = a.budgets.clone().unwrap_or_else(default_budgets);
    if budgets.is_empty() || budgets.contains(&0) {
        return usage("--budgets must be positive");
    }
    let base = solver_config(&a.solver, a.data.seed, RuleKind::NoScreening)?;
    let prob = build_problem(&a.data)?;
    let lambdas = match &a.grid.lambdas {
        Some(l) => l.clone(),
        None => make_grid(prob.lambda_max(), a.grid.n_lambdas, a.grid.delta)?,
    };
    let mut rows = Vec::new();
    for rule in rules {
        rows.extend(budget_profile(&prob, &lambdas, rule, &budgets, &base)?);
    }
    write_bench_rows(open_out(a.out.as_deref())?, &rows)?;
    Ok(ExitCode::SUCCESS)
}
