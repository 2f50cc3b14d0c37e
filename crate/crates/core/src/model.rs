// SPDX-License-Identifier: MIT OR Apache-2.0

//! Data panel, changepoint configurations, constraint sets and the
//! root-hypothesis index sets derived from them.
//!
//! Streams are indexed from 0 inside the library. Changepoints are pre-change
//! segment lengths in `1..=n`, so `t_k = n` means stream `k` never changes.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CrocError, Result};

/// Default cap on the number of configurations a full grid may enumerate.
pub const DEFAULT_GRID_CAP: u64 = 1_000_000;

/// An `n x K` array of scalar observations, stored stream-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamPanel {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl StreamPanel {
    /// Builds a panel from one vector per stream.
    pub fn from_streams(streams: Vec<Vec<f64>>) -> Result<Self> {
        let k = streams.len();
        if k == 0 {
            return Err(CrocError::invalid("panel needs at least one stream"));
        }
        let n = streams[0].len();
        if n == 0 {
            return Err(CrocError::invalid("panel needs at least one observation"));
        }
        let mut values = Vec::with_capacity(n * k);
        for (idx, s) in streams.into_iter().enumerate() {
            if s.len() != n {
                return Err(CrocError::DimensionMismatch(format!(
                    "stream {} has {} observations, expected {n}",
                    idx + 1,
                    s.len()
                )));
            }
            values.extend(s);
        }
        Self::from_stream_major(n, k, values)
    }

    /// Builds a panel from rows (time-major), as read from a CSV file.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(CrocError::invalid("panel needs at least one observation"));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(CrocError::invalid("panel needs at least one stream"));
        }
        let mut values = vec![0.0; n * k];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(CrocError::DimensionMismatch(format!(
                    "row {} has {} columns, expected {k}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                values[j * n + i] = v;
            }
        }
        Self::from_stream_major(n, k, values)
    }

    pub fn from_stream_major(n: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(CrocError::invalid("panel dimensions must be positive"));
        }
        if values.len() != n * k {
            return Err(CrocError::DimensionMismatch(format!(
                "{} values supplied for a {n}x{k} panel",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CrocError::invalid(format!(
                "non-finite value at row {}, stream {}",
                pos % n + 1,
                pos / n + 1
            )));
        }
        Ok(Self { n, k, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_streams(&self) -> usize {
        self.k
    }

    pub fn stream(&self, k: usize) -> &[f64] {
        &self.values[k * self.n..(k + 1) * self.n]
    }

    pub fn streams(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n)
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[k * self.n + i]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.k).map(|k| self.get(i, k)).collect())
            .collect()
    }

    /// Sub-panel made of the given streams, in the given order.
    pub fn select_streams(&self, streams: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(self.n * streams.len());
        for &k in streams {
            if k >= self.k {
                return Err(CrocError::DimensionMismatch(format!(
                    "stream {} out of range for a panel with {} streams",
                    k + 1,
                    self.k
                )));
            }
            values.extend_from_slice(self.stream(k));
        }
        Self::from_stream_major(self.n, streams.len(), values)
    }

    pub(crate) fn from_parts_unchecked(n: usize, k: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * k);
        Self { n, k, values }
    }
}

/// A candidate (or true) per-stream changepoint vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChangepointConfig(Vec<usize>);

impl ChangepointConfig {
    pub fn new(t: Vec<usize>) -> Self {
        Self(t)
    }

    /// Builds a config and checks `1 <= t_k <= n` for every coordinate.
    pub fn checked(t: Vec<usize>, n: usize) -> Result<Self> {
        let cfg = Self(t);
        cfg.validate(n)?;
        Ok(cfg)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.0.is_empty() {
            return Err(CrocError::invalid("configuration has no coordinates"));
        }
        if let Some(&bad) = self.0.iter().find(|&&t| t == 0 || t > n) {
            return Err(CrocError::invalid(format!(
                "changepoint {bad} in {self} outside [1, {n}]"
            )));
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> usize {
        self.0[k]
    }

    /// True when at least one stream changes before `n`.
    pub fn has_change(&self, n: usize) -> bool {
        self.0.iter().any(|&t| t < n)
    }

    /// The stream holding the strict unique minimum, if any.
    pub fn unique_argmin(&self) -> Option<usize> {
        let (idx, &min) = self.0.iter().enumerate().min_by_key(|&(_, t)| *t)?;
        let ties = self.0.iter().filter(|&&t| t == min).count();
        (ties == 1).then_some(idx)
    }

    pub fn restrict(&self, streams: &[usize]) -> Self {
        Self(streams.iter().map(|&k| self.0[k]).collect())
    }
}

impl fmt::Display for ChangepointConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstraintBuilder {
    FullGrid,
    Common,
    OneEarly { early: usize, late: usize },
    Explicit,
}

/// A finite, duplicate-free, ordered set of admissible configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    n: usize,
    k: usize,
    configs: Vec<ChangepointConfig>,
    builder: ConstraintBuilder,
}

impl ConstraintSet {
    /// All `n^K` configurations in lexicographic order.
    pub fn full_grid(n: usize, k: usize) -> Result<Self> {
        Self::full_grid_with_cap(n, k, DEFAULT_GRID_CAP)
    }

    pub fn full_grid_with_cap(n: usize, k: usize, cap: u64) -> Result<Self> {
        check_dims(n, k)?;
        let size = (n as u128).checked_pow(k as u32);
        match size {
            Some(s) if s <= cap as u128 => {}
            _ => {
                return Err(CrocError::EnumerationTooLarge {
                    what: "full constraint grid",
                    size: size.map_or_else(|| format!("{n}^{k}"), |s| s.to_string()),
                    cap,
                    hint: "",
                })
            }
        }
        let configs = itertools::Itertools::multi_cartesian_product((0..k).map(|_| 1..=n))
            .map(ChangepointConfig)
            .collect::<Vec<_>>();
        Ok(Self {
            n,
            k,
            configs,
            builder: ConstraintBuilder::FullGrid,
        })
    }

    /// The synchronized set `{(t, ..., t) : t in [n]}`.
    pub fn common(n: usize, k: usize) -> Result<Self> {
        check_dims(n, k)?;
        let configs = (1..=n).map(|t| ChangepointConfig(vec![t; k])).collect();
        Ok(Self {
            n,
            k,
            configs,
            builder: ConstraintBuilder::Common,
        })
    }

    /// One stream changes at `early`, every other stream at `late`.
    /// The `k`-th config (0-based) has stream `k` early.
    pub fn one_early(n: usize, k: usize, early: usize, late: usize) -> Result<Self> {
        check_dims(n, k)?;
        if early == 0 || late > n {
            return Err(CrocError::invalid(format!(
                "changepoints ({early}, {late}) must lie in [1, {n}]"
            )));
        }
        if early >= late {
            return Err(CrocError::invalid(format!(
                "early changepoint {early} must precede late changepoint {late}"
            )));
        }
        let configs = (0..k)
            .map(|root| {
                let mut t = vec![late; k];
                t[root] = early;
                ChangepointConfig(t)
            })
            .collect();
        Ok(Self {
            n,
            k,
            configs,
            builder: ConstraintBuilder::OneEarly { early, late },
        })
    }

    /// Arbitrary list of configurations. Rejects duplicates and out-of-range
    /// coordinates; order is preserved.
    pub fn from_configs(n: usize, k: usize, configs: Vec<ChangepointConfig>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(CrocError::invalid(
                "constraint set dimensions must be positive",
            ));
        }
        if configs.is_empty() {
            return Err(CrocError::invalid("constraint set is empty"));
        }
        let mut seen = HashSet::with_capacity(configs.len());
        for cfg in &configs {
            if cfg.len() != k {
                return Err(CrocError::DimensionMismatch(format!(
                    "configuration {cfg} has {} coordinates, expected {k}",
                    cfg.len()
                )));
            }
            cfg.validate(n)?;
            if !seen.insert(cfg) {
                return Err(CrocError::invalid(format!("duplicate configuration {cfg}")));
            }
        }
        Ok(Self {
            n,
            k,
            configs,
            builder: ConstraintBuilder::Explicit,
        })
    }

    /// Union of several sets over the same dimensions, keeping first-seen
    /// order and dropping repeats.
    pub fn union(sets: &[ConstraintSet]) -> Result<Self> {
        let first = sets
            .first()
            .ok_or_else(|| CrocError::invalid("union of zero constraint sets"))?;
        let mut seen = HashSet::new();
        let mut configs = Vec::new();
        for s in sets {
            if s.n != first.n || s.k != first.k {
                return Err(CrocError::DimensionMismatch(
                    "constraint sets disagree on (n, K)".into(),
                ));
            }
            for c in &s.configs {
                if seen.insert(c.clone()) {
                    configs.push(c.clone());
                }
            }
        }
        Self::from_configs(first.n, first.k, configs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_streams(&self) -> usize {
        self.k
    }

    pub fn configs(&self) -> &[ChangepointConfig] {
        &self.configs
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn builder(&self) -> &ConstraintBuilder {
        &self.builder
    }

    pub fn contains(&self, cfg: &ChangepointConfig) -> bool {
        self.configs.contains(cfg)
    }

    /// The sets `I_k` of configurations whose strict unique minimum sits at `k`.
    pub fn root_index_sets(&self) -> RootIndexSets {
        let mut sets = vec![Vec::new(); self.k];
        for cfg in &self.configs {
            if let Some(root) = cfg.unique_argmin() {
                sets[root].push(cfg.clone());
            }
        }
        RootIndexSets { sets }
    }
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if n < 2 {
        return Err(CrocError::invalid(format!(
            "need n >= 2 observations, got {n}"
        )));
    }
    if k == 0 {
        return Err(CrocError::invalid("need at least one stream"));
    }
    Ok(())
}

/// Per-stream lists of configurations under which that stream is the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootIndexSets {
    sets: Vec<Vec<ChangepointConfig>>,
}

impl RootIndexSets {
    pub fn get(&self, k: usize) -> &[ChangepointConfig] {
        &self.sets[k]
    }

    pub fn num_streams(&self) -> usize {
        self.sets.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[ChangepointConfig]> {
        self.sets.iter().map(Vec::as_slice)
    }

    /// Every configuration that belongs to some `I_k`.
    pub fn all_configs(&self) -> impl Iterator<Item = &ChangepointConfig> {
        self.sets.iter().flatten()
    }
}

/// The thresholded set `{k : p_(k) > alpha}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    members: BTreeSet<usize>,
    alpha: f64,
}

impl ConfidenceSet {
    pub fn from_pvalues(pvalues: &[f64], alpha: f64) -> Self {
        let members = pvalues
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > alpha)
            .map(|(k, _)| k)
            .collect();
        Self { members, alpha }
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn contains(&self, k: usize) -> bool {
        self.members.contains(&k)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_subset(&self, other: &ConfidenceSet) -> bool {
        self.members.is_subset(&other.members)
    }
}
