// SPDX-License-Identifier: MIT OR Apache-2.0

//! Conformal p-values over split-permutation groups.
//!
//! For a configuration `t` and score `S`,
//!
//! * exact:      `p_t = #{pi in Pi_t : S(pi X, t) <= S(X, t)} / |Pi_t|`
//! * Monte Carlo: `p_t = (1 + #{m : S(pi_m X, t) <= S(X, t)}) / (1 + M)`
//! * randomized: `(#{<} + U * #{=}) / |Pi_t|`, exactly uniform under the null.
//!
//! Monte Carlo draws for stream `k` always come from the sub-stream
//! `seed.for_stream(k, t_k)`, so two scores evaluated with the same seed see
//! the same permutations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CrocError, Result};
use crate::model::{ChangepointConfig, RootIndexSets, StreamPanel};
use crate::permute::{
    apply, checked_group_size, enumerate_group, enumerate_stream, permute_into, sample_many,
    sample_stream, RngSeed,
};
use crate::scores::{check_config, CppScore, StreamScore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PValueMethod {
    Exact,
    MonteCarlo { draws: usize },
    Randomized,
}

impl PValueMethod {
    /// `M = 0` selects full enumeration.
    pub fn from_draws(draws: usize) -> Self {
        if draws == 0 {
            Self::Exact
        } else {
            Self::MonteCarlo { draws }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValueEntry {
    pub config: ChangepointConfig,
    pub p_value: f64,
}

/// Per-configuration p-values in a fixed configuration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValueTable {
    pub method: PValueMethod,
    pub seed: Option<u64>,
    pub entries: Vec<PValueEntry>,
    #[serde(skip)]
    index: HashMap<ChangepointConfig, usize>,
}

impl PValueTable {
    pub fn new(method: PValueMethod, seed: Option<u64>, entries: Vec<PValueEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.config.clone(), i))
            .collect();
        Self {
            method,
            seed,
            entries,
            index,
        }
    }

    pub fn get(&self, config: &ChangepointConfig) -> Option<f64> {
        self.index.get(config).map(|&i| self.entries[i].p_value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.p_value).collect()
    }
}

/// Aggregated per-stream p-values `p_(k) = max_{t in I_k} p_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootPValues {
    pub p_values: Vec<f64>,
    /// Set when `I_k` is empty: the constraint set rules stream `k` out and
    /// `p_(k)` is reported as 0.
    pub excluded_by_constraint: Vec<bool>,
}

pub fn aggregate_root(table: &PValueTable, sets: &RootIndexSets) -> Result<RootPValues> {
    let mut p_values = Vec::with_capacity(sets.num_streams());
    let mut excluded = Vec::with_capacity(sets.num_streams());
    for set in sets.iter() {
        if set.is_empty() {
            p_values.push(0.0);
            excluded.push(true);
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        for cfg in set {
            let p = table
                .get(cfg)
                .ok_or_else(|| CrocError::MissingConfig(cfg.to_string()))?;
            best = best.max(p);
        }
        p_values.push(best);
        excluded.push(false);
    }
    Ok(RootPValues {
        p_values,
        excluded_by_constraint: excluded,
    })
}

/// Tallies of permuted scores against the observed one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RankCounts {
    pub less: u64,
    pub equal: u64,
    pub total: u64,
}

impl RankCounts {
    fn record(&mut self, permuted: f64, observed: f64) {
        self.total += 1;
        if permuted < observed {
            self.less += 1;
        } else if permuted == observed {
            self.equal += 1;
        }
    }

    pub fn exact(&self) -> f64 {
        (self.less + self.equal) as f64 / self.total as f64
    }

    /// `(1 + #{<=}) / (1 + M)` where `total = M` counts the random draws only.
    pub fn monte_carlo(&self) -> f64 {
        (1 + self.less + self.equal) as f64 / (1 + self.total) as f64
    }

    pub fn randomized(&self, u: f64) -> f64 {
        (self.less as f64 + u * self.equal as f64) / self.total as f64
    }
}

/// Exact rank counts over the whole group, by explicit enumeration.
pub fn exact_counts(
    score: &dyn CppScore,
    panel: &StreamPanel,
    config: &ChangepointConfig,
    cap: u64,
) -> Result<RankCounts> {
    check_config(panel, config)?;
    let observed = score.score(panel, config)?;
    let mut counts = RankCounts::default();
    for pi in enumerate_group(config, panel.n(), cap)? {
        counts.record(score.score(&apply(&pi, panel)?, config)?, observed);
    }
    Ok(counts)
}

pub fn pvalue_exact(
    score: &dyn CppScore,
    panel: &StreamPanel,
    config: &ChangepointConfig,
    cap: u64,
) -> Result<f64> {
    Ok(exact_counts(score, panel, config, cap)?.exact())
}

pub fn pvalue_mc(
    score: &dyn CppScore,
    panel: &StreamPanel,
    config: &ChangepointConfig,
    draws: usize,
    seed: &RngSeed,
) -> Result<f64> {
    check_config(panel, config)?;
    if draws == 0 {
        return Ok(1.0);
    }
    let observed = score.score(panel, config)?;
    let mut counts = RankCounts::default();
    for pi in sample_many(config, panel.n(), seed, draws) {
        counts.record(score.score(&apply(&pi, panel)?, config)?, observed);
    }
    Ok(counts.monte_carlo())
}

pub fn pvalue_randomized(
    score: &dyn CppScore,
    panel: &StreamPanel,
    config: &ChangepointConfig,
    u: f64,
    cap: u64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(CrocError::invalid(format!(
            "randomization level {u} outside [0, 1]"
        )));
    }
    Ok(exact_counts(score, panel, config, cap)?.randomized(u))
}

/// Single-stream p-value for changepoint `t` of stream `stream`. `draws = 0`
/// enumerates the stream's group; otherwise Monte Carlo from
/// `seed.for_stream(stream, t)`.
pub fn conch_pvalue(
    score: &dyn StreamScore,
    stream: usize,
    xs: &[f64],
    t: usize,
    draws: usize,
    seed: &RngSeed,
    cap: u64,
) -> Result<f64> {
    let terms = StreamTerms::compute(score, stream, xs, t, draws, seed, cap)?;
    StreamTerms::group_pvalue(&[&terms], draws)
}

/// Observed and permuted values of one stream's score term at one
/// changepoint. In Monte Carlo mode `permuted[m]` is draw `m`; in exact mode
/// it runs over the whole stream group, identity first.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct StreamTerms {
    pub observed: f64,
    pub permuted: Vec<f64>,
}

impl StreamTerms {
    pub fn compute(
        score: &dyn StreamScore,
        stream: usize,
        xs: &[f64],
        t: usize,
        draws: usize,
        seed: &RngSeed,
        cap: u64,
    ) -> Result<Self> {
        let n = xs.len();
        if t == 0 || t > n {
            return Err(CrocError::invalid(format!(
                "changepoint {t} outside [1, {n}]"
            )));
        }
        let observed = score.stream_term(stream, xs, t)?;
        let mut buf = vec![0.0; n];
        let mut permuted;
        if draws == 0 {
            checked_group_size(&ChangepointConfig::new(vec![t]), n, cap)?;
            let maps = enumerate_stream(n, t);
            permuted = Vec::with_capacity(maps.len());
            for map in maps {
                permute_into(&map, xs, &mut buf);
                permuted.push(score.stream_term(stream, &buf, t)?);
            }
        } else {
            let mut rng = seed.for_stream(stream, t).rng();
            permuted = Vec::with_capacity(draws);
            for _ in 0..draws {
                let map = sample_stream(&mut rng, n, t);
                permute_into(&map, xs, &mut buf);
                permuted.push(score.stream_term(stream, &buf, t)?);
            }
        }
        Ok(Self { observed, permuted })
    }

    /// p-value of the summed score over a group of streams (in the given
    /// order). Monte Carlo draws are paired by index; exact mode runs over
    /// the product of the stream groups.
    pub fn group_pvalue(parts: &[&StreamTerms], draws: usize) -> Result<f64> {
        let observed = parts.iter().fold(0.0, |acc, p| acc + p.observed);
        let mut counts = RankCounts::default();
        if draws > 0 {
            for m in 0..draws {
                let s = parts.iter().fold(0.0, |acc, p| acc + p.permuted[m]);
                counts.record(s, observed);
            }
            return Ok(counts.monte_carlo());
        }
        let sizes: Vec<usize> = parts.iter().map(|p| p.permuted.len()).collect();
        let mut idx = vec![0usize; parts.len()];
        loop {
            let s = parts
                .iter()
                .zip(&idx)
                .fold(0.0, |acc, (p, &i)| acc + p.permuted[i]);
            counts.record(s, observed);
            // odometer, last stream fastest
            let mut pos = parts.len();
            loop {
                if pos == 0 {
                    return Ok(counts.exact());
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < sizes[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }
}
