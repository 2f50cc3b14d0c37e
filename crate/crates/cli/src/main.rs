// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use croc::density::DensityModel;
use croc::io::{self as cio, Truth};
use croc::permute::DEFAULT_GROUP_CAP;
use croc::scores::{Additive, ConstantScore, OracleOptScore};
use croc::simgen::{gen_correlated, gen_setting, CorrelatedSpec, GaussianShiftSpec};
use croc::{
    run_conch_agg, run_croc, run_croc_dep, AnalysisResult, ConstraintSet, CrocError,
    GroupPartition, LearnedScore, RunOptions, StreamPanel, StreamScore,
};

mod coverage;
mod report;
mod spec;

use spec::{parse_partition, AlgoArg, ConstraintSpec, Format, Preset, ScoreArg, ScoreKind};

#[derive(Parser, Debug)]
#[command(
    name = "croc",
    version,
    about = "Conformal root-cause localization for changepoint panels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a preset panel and its truth file.
    Simulate(SimulateArgs),
    /// Compute p-values and the root-cause confidence set for one panel.
    Analyze(AnalyzeArgs),
    /// Run seeded replications of a preset and summarize coverage.
    Coverage(CoverageArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "setting1")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives panel.csv (or panel.json) and truth.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write a header line to the CSV panel.
    #[arg(long)]
    header: bool,
}

#[derive(Args, Debug, Clone)]
struct MethodArgs {
    #[arg(long, value_enum, default_value = "croc")]
    algo: AlgoArg,
    /// Significance level in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Monte Carlo permutations per configuration; 0 enumerates exactly.
    #[arg(long, default_value_t = 100)]
    mc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stream groups for croc-dep, 1-based, e.g. "1,3,5;2,4,6".
    #[arg(long)]
    partition: Option<String>,
    /// Largest permutation group enumerated in exact mode.
    #[arg(long, default_value_t = DEFAULT_GROUP_CAP)]
    cap: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Panel file: CSV (n rows, K columns) or JSON.
    #[arg(long)]
    input: PathBuf,
    /// The CSV panel starts with a header line.
    #[arg(long)]
    header: bool,
    /// Truth JSON, needed by the oracle and optimal scores.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// oracle | optimal | gaussian | kde | logits | logits:PATH | constant
    #[arg(long, default_value = "gaussian")]
    score: ScoreArg,
    /// Logit table (stream,index,logit) for the logits score.
    #[arg(long)]
    logits: Option<PathBuf>,
    /// grid | common | one-early:EARLY,LATE | file:PATH
    #[arg(long, default_value = "grid")]
    constraint: ConstraintSpec,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args, Debug)]
struct CoverageArgs {
    #[arg(long, value_enum, default_value = "setting1")]
    preset: Preset,
    /// Override the root stream's changepoint.
    #[arg(long)]
    early: Option<usize>,
    /// Override the other streams' changepoint.
    #[arg(long)]
    late: Option<usize>,
    #[arg(long, value_enum, default_value = "oracle")]
    score: ScoreKind,
    /// Defaults to the preset's one-early constraint.
    #[arg(long)]
    constraint: Option<ConstraintSpec>,
    #[arg(long, default_value_t = 300)]
    reps: usize,
    #[command(flatten)]
    method: MethodArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Coverage(a) => coverage::run(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CrocError>() {
            return match e {
                CrocError::EnumerationTooLarge { .. } => 4,
                e if e.is_io() => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 3;
        }
    }
    2
}

fn create_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .map_err(CrocError::from)
                .with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    fs::create_dir_all(&args.out)
        .map_err(CrocError::from)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let (sim, truth) = match args.preset {
        Preset::Setting1 | Preset::Setting2 => {
            let spec = if args.preset == Preset::Setting1 {
                GaussianShiftSpec::setting1(args.seed)
            } else {
                GaussianShiftSpec::setting2(args.seed)
            };
            let sim = gen_setting(&spec)?;
            let truth = shift_truth(&spec, &sim.truth)?;
            (sim, truth)
        }
        Preset::AppendixB => {
            let spec = CorrelatedSpec::appendix_b(args.seed);
            let (sim, partition) = gen_correlated(&spec)?;
            let mut truth = shift_truth(&spec.base, &sim.truth)?;
            truth.rho = Some(spec.rho);
            truth.groups = Some(
                partition
                    .groups()
                    .iter()
                    .map(|g| g.iter().map(|k| k + 1).collect())
                    .collect(),
            );
            (sim, truth)
        }
    };
    let panel_path = match args.format {
        Format::Csv => {
            let p = args.out.join("panel.csv");
            cio::write_panel_csv(&p, &sim.panel, args.header)?;
            p
        }
        Format::Json => {
            let p = args.out.join("panel.json");
            cio::write_panel_json(&p, &sim.panel)?;
            p
        }
    };
    let truth_path = args.out.join("truth.json");
    cio::write_truth(&truth_path, &truth)?;
    eprintln!(
        "wrote {} ({}x{}) and {}; root stream {}",
        panel_path.display(),
        sim.panel.n(),
        sim.panel.num_streams(),
        truth_path.display(),
        truth.k_star
    );
    Ok(())
}

fn shift_truth(spec: &GaussianShiftSpec, xi: &croc::ChangepointConfig) -> anyhow::Result<Truth> {
    let mut t = Truth::from_config(xi)?;
    t.pre_means = Some(spec.pre_means());
    t.post_means = Some(spec.post_means());
    t.delta_root = Some(spec.delta_root);
    t.delta_other = Some(spec.delta_other);
    Ok(t)
}

/// Oracle densities recorded in a truth file.
fn truth_model(truth: &Truth, k: usize) -> anyhow::Result<DensityModel> {
    let (Some(pre), Some(post)) = (&truth.pre_means, &truth.post_means) else {
        return Err(CrocError::InvalidInput(
            "truth file has no pre_means/post_means for the oracle densities".into(),
        )
        .into());
    };
    if pre.len() != k || post.len() != k {
        return Err(CrocError::DimensionMismatch(format!(
            "truth file describes {} streams, panel has {k}",
            pre.len()
        ))
        .into());
    }
    Ok(DensityModel::gaussian_oracle(pre, post)?)
}

fn require_truth(truth: Option<&Truth>, score: ScoreKind) -> anyhow::Result<&Truth> {
    truth.ok_or_else(|| {
        CrocError::InvalidInput(format!("score {} needs --truth", score.name())).into()
    })
}

/// Builds the per-stream score, replacing the panel with the logit panel
/// for the logits score.
fn resolve_score(
    kind: ScoreKind,
    panel: StreamPanel,
    truth: Option<&Truth>,
    logits: Option<&Path>,
) -> anyhow::Result<(Arc<dyn StreamScore>, StreamPanel)> {
    let k = panel.num_streams();
    let score: Arc<dyn StreamScore> = match kind {
        ScoreKind::Oracle => {
            let t = require_truth(truth, kind)?;
            Arc::new(LearnedScore::with_model(truth_model(t, k)?))
        }
        ScoreKind::Optimal => {
            let t = require_truth(truth, kind)?;
            let xi = t.config();
            xi.validate(panel.n())?;
            Arc::new(OracleOptScore::new(truth_model(t, k)?, xi)?)
        }
        ScoreKind::Gaussian => Arc::new(LearnedScore::gaussian()),
        ScoreKind::Kde => Arc::new(LearnedScore::kde()),
        ScoreKind::Constant => Arc::new(ConstantScore),
        ScoreKind::Logits => {
            let Some(path) = logits else {
                return Err(CrocError::InvalidInput(
                    "the logits score needs --logits PATH or --score logits:PATH".into(),
                )
                .into());
            };
            let table = cio::read_logits(path, panel.n(), k)
                .with_context(|| format!("reading {}", path.display()))?;
            return Ok((
                Arc::new(LearnedScore::with_model(DensityModel::direct(k))),
                table,
            ));
        }
    };
    Ok((score, panel))
}

fn resolve_partition(
    method: &MethodArgs,
    truth: Option<&Truth>,
    k: usize,
) -> anyhow::Result<GroupPartition> {
    let groups = match (&method.partition, truth.and_then(|t| t.groups.as_ref())) {
        (Some(s), _) => {
            parse_partition(s).map_err(|e| CrocError::InvalidInput(format!("{e:#}")))?
        }
        (None, Some(g)) => g
            .iter()
            .map(|grp| {
                grp.iter()
                    .map(|&s| s.checked_sub(1))
                    .collect::<Option<Vec<_>>>()
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| CrocError::InvalidInput("truth groups are 1-based".into()))?,
        (None, None) => {
            return Err(CrocError::InvalidInput("croc-dep needs --partition".into()).into())
        }
    };
    Ok(GroupPartition::new(groups, k)?)
}

pub(crate) fn run_algorithm(
    algo: AlgoArg,
    panel: &StreamPanel,
    constraint: &ConstraintSet,
    score: Arc<dyn StreamScore>,
    partition: Option<&GroupPartition>,
    opts: &RunOptions,
) -> croc::Result<AnalysisResult> {
    match algo {
        AlgoArg::Croc => run_croc(panel, constraint, &Additive(score), opts),
        AlgoArg::ConchAgg => run_conch_agg(panel, constraint, score.as_ref(), opts),
        AlgoArg::CrocDep => {
            let partition = partition.expect("partition resolved for croc-dep");
            run_croc_dep(panel, constraint, partition, score.as_ref(), opts)
        }
    }
}

fn run_options(m: &MethodArgs) -> anyhow::Result<RunOptions> {
    if !(m.alpha > 0.0 && m.alpha < 1.0) {
        bail!(CrocError::InvalidInput(format!(
            "--alpha must lie in (0, 1), got {}",
            m.alpha
        )));
    }
    let mut opts = RunOptions::new(m.alpha, m.mc, m.seed);
    opts.enumeration_cap = m.cap;
    Ok(opts)
}

fn analyze(args: &AnalyzeArgs) -> anyhow::Result<()> {
    let opts = run_options(&args.method)?;
    let panel = cio::read_panel(&args.input, args.header)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let truth = args
        .truth
        .as_deref()
        .map(|p| cio::read_truth(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let logits = args.score.logits.as_deref().or(args.logits.as_deref());
    let (score, panel) = resolve_score(args.score.kind, panel, truth.as_ref(), logits)?;
    let constraint = args.constraint.build(panel.n(), panel.num_streams())?;
    let partition = match args.method.algo {
        AlgoArg::CrocDep => Some(resolve_partition(
            &args.method,
            truth.as_ref(),
            panel.num_streams(),
        )?),
        _ => None,
    };
    let res = run_algorithm(
        args.method.algo,
        &panel,
        &constraint,
        score,
        partition.as_ref(),
        &opts,
    )?;

    let invocation = report::Invocation {
        input: args.input.display().to_string(),
        header: args.header,
        truth: args.truth.as_ref().map(|p| p.display().to_string()),
        score: args.score.kind.name().to_string(),
        logits: logits.map(|p| p.display().to_string()),
        algo: res.algorithm.to_string(),
        constraint: args.constraint.to_string(),
        alpha: opts.alpha,
        mc: opts.draws,
        seed: opts.seed,
        partition: partition.as_ref().map(|p| {
            p.groups()
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|k| (k + 1).to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join(";")
        }),
    };
    let rep = report::Report::new(&invocation, panel.n(), &res);
    let mut out = create_output(args.method.out.as_deref())?;
    match args.method.format {
        Format::Json => rep.write_json(&mut out)?,
        Format::Csv => rep.write_csv(&mut out)?,
    }
    out.flush().map_err(CrocError::from)?;
    let set: Vec<String> = res
        .set_members()
        .iter()
        .map(|k| (k + 1).to_string())
        .collect();
    eprintln!(
        "{} with {} score: confidence set {{{}}} at alpha = {} ({:.3} s)",
        res.algorithm,
        args.score.kind.name(),
        set.join(", "),
        opts.alpha,
        res.elapsed.as_secs_f64()
    );
    Ok(())
}
