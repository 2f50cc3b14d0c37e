// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded replication study over a generator preset.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use croc::permute::RngSeed;
use croc::scores::{ConstantScore, OracleOptScore};
use croc::simgen::{gen_correlated, gen_setting, CorrelatedSpec, GaussianShiftSpec, Simulated};
use croc::{CrocError, GroupPartition, LearnedScore, StreamScore};
use rayon::prelude::*;
use serde::Serialize;

use crate::spec::{parse_partition, AlgoArg, Format, Preset, ScoreKind};
use crate::{create_output, run_algorithm, run_options, CoverageArgs};

const MIN_REPS: usize = 50;

#[derive(Debug, Serialize)]
struct Timing {
    total_seconds: f64,
    mean_seconds: f64,
    median_seconds: f64,
    max_seconds: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    preset: &'static str,
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    xi: Vec<usize>,
    k_star: usize,
    score: &'static str,
    algo: String,
    constraint: String,
    alpha: f64,
    mc: usize,
    seed: u64,
    reps: usize,
    coverage: f64,
    mean_set_size: f64,
    singleton_frequency: f64,
    per_stream_inclusion: Vec<f64>,
    timing: Timing,
}

struct Design {
    base: GaussianShiftSpec,
    correlated: Option<CorrelatedSpec>,
}

impl Design {
    fn new(args: &CoverageArgs) -> croc::Result<Self> {
        let (mut base, mut correlated) = match args.preset {
            Preset::Setting1 => (GaussianShiftSpec::setting1(0), None),
            Preset::Setting2 => (GaussianShiftSpec::setting2(0), None),
            Preset::AppendixB => {
                let c = CorrelatedSpec::appendix_b(0);
                (c.base.clone(), Some(c))
            }
        };
        if let Some(e) = args.early {
            base.early = e;
        }
        if let Some(l) = args.late {
            base.late = l;
        }
        base.validate()?;
        if let Some(c) = correlated.as_mut() {
            c.base = base.clone();
        }
        Ok(Self { base, correlated })
    }

    fn generate(&self, seed: u64) -> croc::Result<Simulated> {
        match &self.correlated {
            Some(c) => {
                let spec = CorrelatedSpec {
                    base: GaussianShiftSpec {
                        seed,
                        ..c.base.clone()
                    },
                    ..c.clone()
                };
                gen_correlated(&spec).map(|(sim, _)| sim)
            }
            None => gen_setting(&GaussianShiftSpec {
                seed,
                ..self.base.clone()
            }),
        }
    }
}

fn score_for(kind: ScoreKind, sim: &Simulated) -> croc::Result<Arc<dyn StreamScore>> {
    Ok(match kind {
        ScoreKind::Oracle => Arc::new(LearnedScore::with_model(sim.model.clone())),
        ScoreKind::Optimal => Arc::new(OracleOptScore::new(sim.model.clone(), sim.truth.clone())?),
        ScoreKind::Gaussian => Arc::new(LearnedScore::gaussian()),
        ScoreKind::Kde => Arc::new(LearnedScore::kde()),
        ScoreKind::Constant => Arc::new(ConstantScore),
        ScoreKind::Logits => {
            return Err(CrocError::InvalidInput(
                "the logits score is not available for simulated replications".into(),
            ))
        }
    })
}

pub fn run(args: &CoverageArgs) -> anyhow::Result<()> {
    if args.reps < MIN_REPS {
        return Err(CrocError::InvalidInput(format!(
            "--reps must be at least {MIN_REPS}, got {}",
            args.reps
        ))
        .into());
    }
    let mut opts = run_options(&args.method)?;
    opts.parallel = false;
    let design = Design::new(args)?;
    let base = &design.base;
    let root = base.root;
    let constraint = match &args.constraint {
        Some(c) => c.build(base.n, base.k)?,
        None => base.constraint()?,
    };
    let partition = match args.method.algo {
        AlgoArg::CrocDep => Some(match (&args.method.partition, &design.correlated) {
            (Some(s), _) => GroupPartition::new(
                parse_partition(s).map_err(|e| CrocError::InvalidInput(format!("{e:#}")))?,
                base.k,
            )?,
            (None, Some(c)) => GroupPartition::new(c.groups.clone(), base.k)?,
            (None, None) => GroupPartition::singletons(base.k),
        }),
        _ => None,
    };

    let master = RngSeed::new(args.method.seed);
    let started = Instant::now();
    let outcomes = (0..args.reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = master.child(rep as u64);
            let sim = design.generate(rep_seed.derived_u64())?;
            let score = score_for(args.score, &sim)?;
            let mut rep_opts = opts.clone();
            rep_opts.seed = rep_seed.child(1).derived_u64();
            let t0 = Instant::now();
            let res = run_algorithm(
                args.method.algo,
                &sim.panel,
                &constraint,
                score,
                partition.as_ref(),
                &rep_opts,
            )?;
            Ok((res.set_members(), t0.elapsed().as_secs_f64()))
        })
        .collect::<croc::Result<Vec<_>>>()
        .context("replication failed")?;
    let total = started.elapsed().as_secs_f64();

    let reps = args.reps as f64;
    let mut inclusion = vec![0usize; base.k];
    let mut covered = 0usize;
    let mut singletons = 0usize;
    let mut size_sum = 0usize;
    for (set, _) in &outcomes {
        for &k in set {
            inclusion[k] += 1;
        }
        covered += set.contains(&root) as usize;
        singletons += (set.as_slice() == [root]) as usize;
        size_sum += set.len();
    }
    let mut times: Vec<f64> = outcomes.iter().map(|(_, t)| *t).collect();
    times.sort_by(f64::total_cmp);
    let summary = Summary {
        preset: args.preset.name(),
        n: base.n,
        k: base.k,
        xi: base.truth().as_slice().to_vec(),
        k_star: root + 1,
        score: args.score.name(),
        algo: croc::Algorithm::from(args.method.algo).to_string(),
        constraint: args.constraint.as_ref().map_or_else(
            || format!("one-early:{},{}", base.early, base.late),
            |c| c.to_string(),
        ),
        alpha: opts.alpha,
        mc: opts.draws,
        seed: args.method.seed,
        reps: args.reps,
        coverage: covered as f64 / reps,
        mean_set_size: size_sum as f64 / reps,
        singleton_frequency: singletons as f64 / reps,
        per_stream_inclusion: inclusion.iter().map(|&c| c as f64 / reps).collect(),
        timing: Timing {
            total_seconds: total,
            mean_seconds: times.iter().sum::<f64>() / reps,
            median_seconds: times[times.len() / 2],
            max_seconds: times[times.len() - 1],
        },
    };

    let mut out = create_output(args.method.out.as_deref())?;
    match args.method.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &summary)?;
            out.write_all(b"\n").map_err(CrocError::from)?;
        }
        Format::Csv => {
            writeln!(out, "stream,inclusion_frequency,is_root").map_err(CrocError::from)?;
            for (k, f) in summary.per_stream_inclusion.iter().enumerate() {
                writeln!(out, "{},{},{}", k + 1, f, k == root).map_err(CrocError::from)?;
            }
        }
    }
    out.flush().map_err(CrocError::from)?;
    eprintln!(
        "{} reps: coverage {:.3}, mean set size {:.2}, singleton {:.3}, {:.1} s",
        args.reps, summary.coverage, summary.mean_set_size, summary.singleton_frequency, total
    );
    Ok(())
}
