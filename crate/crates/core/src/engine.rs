// SPDX-License-Identifier: MIT OR Apache-2.0

//! The three root-cause procedures: CROC for independent streams, CONCH-agg
//! (Bonferroni over single-stream p-values) for arbitrary dependence, and
//! CROC-dep (CROC inside independent groups, Bonferroni across groups).
//!
//! Configurations without a unique earliest stream belong to no `I_k` and
//! cannot affect the confidence set; they are listed as skipped rather than
//! scored.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{
    aggregate_root, pvalue_exact, pvalue_mc, PValueEntry, PValueMethod, PValueTable, RootPValues,
    StreamTerms,
};
use crate::error::{CrocError, Result};
use crate::model::{ChangepointConfig, ConfidenceSet, ConstraintSet, StreamPanel};
use crate::permute::{checked_group_size, RngSeed, DEFAULT_GROUP_CAP};
use crate::scores::{CppScore, StreamScore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Croc,
    ConchAgg,
    CrocDep,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Croc => "croc",
            Self::ConchAgg => "conch-agg",
            Self::CrocDep => "croc-dep",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub alpha: f64,
    /// Monte Carlo draws per configuration; 0 enumerates every group.
    pub draws: usize,
    pub seed: u64,
    pub enumeration_cap: u64,
    pub parallel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            draws: 100,
            seed: 0,
            enumeration_cap: DEFAULT_GROUP_CAP,
            parallel: true,
        }
    }
}

impl RunOptions {
    pub fn new(alpha: f64, draws: usize, seed: u64) -> Self {
        Self {
            alpha,
            draws,
            seed,
            ..Self::default()
        }
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CrocError::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn method(&self) -> PValueMethod {
        PValueMethod::from_draws(self.draws)
    }
}

/// Disjoint groups of streams covering `0..K`; streams inside a group are
/// mutually independent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    /// Members of each group are sorted; group order is kept.
    pub fn new(groups: Vec<Vec<usize>>, num_streams: usize) -> Result<Self> {
        let mut seen = vec![false; num_streams];
        let mut normalized = Vec::with_capacity(groups.len());
        for g in groups {
            if g.is_empty() {
                return Err(CrocError::invalid("partition contains an empty group"));
            }
            let mut g = g;
            g.sort_unstable();
            for &k in &g {
                if k >= num_streams {
                    return Err(CrocError::invalid(format!(
                        "stream {} out of range for {num_streams} streams",
                        k + 1
                    )));
                }
                if std::mem::replace(&mut seen[k], true) {
                    return Err(CrocError::invalid(format!(
                        "stream {} appears in more than one group",
                        k + 1
                    )));
                }
            }
            normalized.push(g);
        }
        if let Some(k) = seen.iter().position(|&s| !s) {
            return Err(CrocError::invalid(format!(
                "stream {} is not covered by the partition",
                k + 1
            )));
        }
        Ok(Self { groups: normalized })
    }

    pub fn single(num_streams: usize) -> Self {
        Self {
            groups: vec![(0..num_streams).collect()],
        }
    }

    pub fn singletons(num_streams: usize) -> Self {
        Self {
            groups: (0..num_streams).map(|k| vec![k]).collect(),
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn num_streams(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

/// Group-level p-values behind each combined CROC-dep p-value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPValues {
    pub groups: Vec<Vec<usize>>,
    /// `p_values[i][m]` belongs to the `i`-th scored configuration and group `m`.
    pub p_values: Vec<Vec<f64>>,
}

/// Single-stream p-value `p^[k]_{t}` used by CONCH-agg.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamPValue {
    pub stream: usize,
    pub changepoint: usize,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub algorithm: Algorithm,
    pub score: String,
    pub alpha: f64,
    pub draws: usize,
    pub seed: u64,
    pub pvalues: PValueTable,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_pvalues: Option<GroupPValues>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream_pvalues: Option<Vec<StreamPValue>>,
    pub root: RootPValues,
    pub confidence_set: ConfidenceSet,
    pub skipped_configs: Vec<ChangepointConfig>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl AnalysisResult {
    pub fn set_members(&self) -> Vec<usize> {
        self.confidence_set.members().iter().copied().collect()
    }
}

fn check_inputs(panel: &StreamPanel, constraint: &ConstraintSet) -> Result<()> {
    if constraint.n() != panel.n() || constraint.num_streams() != panel.num_streams() {
        return Err(CrocError::DimensionMismatch(format!(
            "constraint set is for n={}, K={} but the panel is {}x{}",
            constraint.n(),
            constraint.num_streams(),
            panel.n(),
            panel.num_streams()
        )));
    }
    if constraint.is_empty() {
        return Err(CrocError::invalid("constraint set is empty"));
    }
    Ok(())
}

/// Configurations in some `I_k`, in constraint order, plus the rest.
fn split_configs(constraint: &ConstraintSet) -> (Vec<ChangepointConfig>, Vec<ChangepointConfig>) {
    constraint
        .configs()
        .iter()
        .cloned()
        .partition(|c| c.unique_argmin().is_some())
}

fn map_configs<T, F>(configs: &[ChangepointConfig], parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&ChangepointConfig) -> Result<T> + Sync + Send,
{
    if parallel {
        configs.par_iter().map(f).collect()
    } else {
        configs.iter().map(f).collect()
    }
}

type TermCache = BTreeMap<(usize, usize), StreamTerms>;

/// Per-(stream, changepoint) terms for every pair the configurations need.
fn term_cache(
    panel: &StreamPanel,
    score: &dyn StreamScore,
    configs: &[ChangepointConfig],
    opts: &RunOptions,
) -> Result<TermCache> {
    let pairs: BTreeSet<(usize, usize)> = configs
        .iter()
        .flat_map(|c| c.as_slice().iter().copied().enumerate())
        .collect();
    let pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
    let seed = RngSeed::new(opts.seed);
    let compute = |&(k, t): &(usize, usize)| {
        StreamTerms::compute(
            score,
            k,
            panel.stream(k),
            t,
            opts.draws,
            &seed,
            opts.enumeration_cap,
        )
        .map(|terms| ((k, t), terms))
    };
    if opts.parallel {
        pairs.par_iter().map(compute).collect()
    } else {
        pairs.iter().map(compute).collect()
    }
}

fn group_pvalue(
    cache: &TermCache,
    config: &ChangepointConfig,
    group: &[usize],
    n: usize,
    opts: &RunOptions,
) -> Result<f64> {
    if opts.draws == 0 {
        checked_group_size(&config.restrict(group), n, opts.enumeration_cap)?;
    }
    let parts: Vec<&StreamTerms> = group.iter().map(|&k| &cache[&(k, config.get(k))]).collect();
    StreamTerms::group_pvalue(&parts, opts.draws)
}

fn bonferroni(p_values: &[f64]) -> f64 {
    let min = p_values.iter().copied().fold(f64::INFINITY, f64::min);
    (p_values.len() as f64 * min).min(1.0)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    algorithm: Algorithm,
    score: String,
    constraint: &ConstraintSet,
    scored: Vec<ChangepointConfig>,
    p_values: Vec<f64>,
    skipped: Vec<ChangepointConfig>,
    opts: &RunOptions,
    started: Instant,
) -> Result<AnalysisResult> {
    let entries = scored
        .into_iter()
        .zip(p_values)
        .map(|(config, p_value)| PValueEntry { config, p_value })
        .collect();
    let seed = (opts.draws > 0).then_some(opts.seed);
    let table = PValueTable::new(opts.method(), seed, entries);
    let root = aggregate_root(&table, &constraint.root_index_sets())?;
    let confidence_set = ConfidenceSet::from_pvalues(&root.p_values, opts.alpha);
    Ok(AnalysisResult {
        algorithm,
        score,
        alpha: opts.alpha,
        draws: opts.draws,
        seed: opts.seed,
        pvalues: table,
        group_pvalues: None,
        stream_pvalues: None,
        root,
        confidence_set,
        skipped_configs: skipped,
        elapsed: started.elapsed(),
    })
}

/// CROC: conformal p-value per configuration, max over each `I_k`,
/// threshold at `alpha`.
pub fn run_croc(
    panel: &StreamPanel,
    constraint: &ConstraintSet,
    score: &dyn CppScore,
    opts: &RunOptions,
) -> Result<AnalysisResult> {
    let started = Instant::now();
    opts.validate()?;
    check_inputs(panel, constraint)?;
    let (scored, skipped) = split_configs(constraint);
    let p_values = match score.as_stream_score() {
        Some(stream_score) => {
            let cache = term_cache(panel, stream_score, &scored, opts)?;
            let all: Vec<usize> = (0..panel.num_streams()).collect();
            map_configs(&scored, opts.parallel, |c| {
                group_pvalue(&cache, c, &all, panel.n(), opts)
            })?
        }
        None => {
            let seed = RngSeed::new(opts.seed);
            map_configs(&scored, opts.parallel, |c| {
                if opts.draws == 0 {
                    pvalue_exact(score, panel, c, opts.enumeration_cap)
                } else {
                    pvalue_mc(score, panel, c, opts.draws, &seed)
                }
            })?
        }
    };
    finish(
        Algorithm::Croc,
        score.descriptor(),
        constraint,
        scored,
        p_values,
        skipped,
        opts,
        started,
    )
}

/// CONCH-agg: `p_t = min(1, K min_k p^[k]_{t_k})` from single-stream
/// p-values, each computed once per (stream, changepoint) pair.
pub fn run_conch_agg(
    panel: &StreamPanel,
    constraint: &ConstraintSet,
    score: &dyn StreamScore,
    opts: &RunOptions,
) -> Result<AnalysisResult> {
    let started = Instant::now();
    opts.validate()?;
    check_inputs(panel, constraint)?;
    let (scored, skipped) = split_configs(constraint);
    let cache = term_cache(panel, score, &scored, opts)?;
    let marginal: BTreeMap<(usize, usize), f64> = cache
        .iter()
        .map(|(&key, terms)| StreamTerms::group_pvalue(&[terms], opts.draws).map(|p| (key, p)))
        .collect::<Result<_>>()?;
    let p_values = scored
        .iter()
        .map(|c| {
            let per_stream: Vec<f64> = c
                .as_slice()
                .iter()
                .enumerate()
                .map(|(k, &t)| marginal[&(k, t)])
                .collect();
            bonferroni(&per_stream)
        })
        .collect();
    let mut result = finish(
        Algorithm::ConchAgg,
        score.descriptor(),
        constraint,
        scored,
        p_values,
        skipped,
        opts,
        started,
    )?;
    result.stream_pvalues = Some(
        marginal
            .into_iter()
            .map(|((stream, changepoint), p_value)| StreamPValue {
                stream,
                changepoint,
                p_value,
            })
            .collect(),
    );
    Ok(result)
}

/// CROC-dep: CROC p-value of each group's sub-panel, combined by
/// `min(1, M min_m p^[G_m]_t)` over the `M` groups.
pub fn run_croc_dep(
    panel: &StreamPanel,
    constraint: &ConstraintSet,
    partition: &GroupPartition,
    score: &dyn StreamScore,
    opts: &RunOptions,
) -> Result<AnalysisResult> {
    let started = Instant::now();
    opts.validate()?;
    check_inputs(panel, constraint)?;
    if partition.num_streams() != panel.num_streams() {
        return Err(CrocError::DimensionMismatch(format!(
            "partition covers {} streams, panel has {}",
            partition.num_streams(),
            panel.num_streams()
        )));
    }
    let (scored, skipped) = split_configs(constraint);
    let cache = term_cache(panel, score, &scored, opts)?;
    let per_group: Vec<Vec<f64>> = map_configs(&scored, opts.parallel, |c| {
        partition
            .groups()
            .iter()
            .map(|g| group_pvalue(&cache, c, g, panel.n(), opts))
            .collect()
    })?;
    let p_values = per_group.iter().map(|ps| bonferroni(ps)).collect();
    let mut result = finish(
        Algorithm::CrocDep,
        score.descriptor(),
        constraint,
        scored,
        p_values,
        skipped,
        opts,
        started,
    )?;
    result.group_pvalues = Some(GroupPValues {
        groups: partition.groups().to_vec(),
        p_values: per_group,
    });
    Ok(result)
}
