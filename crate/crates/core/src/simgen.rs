// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded Gaussian mean-shift generators.
//!
//! Normal variates are produced by inverse-CDF sampling: each draw takes one
//! `u64` from `ChaCha8Rng::seed_from_u64(seed)`, maps it to the open interval
//! by `u = ((bits >> 11) + 0.5) / 2^53` and returns `Phi^{-1}(u)`. Independent
//! panels draw stream by stream, each stream in time order. Correlated panels
//! draw time index by time index: at each `i`, every pair takes two variates
//! (first member first), then the unpaired streams take one each in index
//! order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::density::DensityModel;
use crate::engine::GroupPartition;
use crate::error::{CrocError, Result};
use crate::model::{ChangepointConfig, ConstraintSet, StreamPanel};

/// Independent unit-variance streams with one mean shift each. The root
/// stream changes at `early`, every other stream at `late`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianShiftSpec {
    pub n: usize,
    pub k: usize,
    /// 0-based index of the root stream.
    pub root: usize,
    pub early: usize,
    pub late: usize,
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub delta_root: f64,
    pub delta_other: f64,
    pub seed: u64,
}

impl GaussianShiftSpec {
    /// Moderate signal: n = 80, K = 10, root 2 at 20, others at 50,
    /// pre-change means on [-2, 3], shifts 1 (root) and 2 (others).
    pub fn setting1(seed: u64) -> Self {
        Self {
            n: 80,
            k: 10,
            root: 1,
            early: 20,
            late: 50,
            mean_lo: -2.0,
            mean_hi: 3.0,
            delta_root: 1.0,
            delta_other: 2.0,
            seed,
        }
    }

    /// Weak signal: as [`Self::setting1`] with shifts 0.25 and 0.75.
    pub fn setting2(seed: u64) -> Self {
        Self {
            delta_root: 0.25,
            delta_other: 0.75,
            ..Self::setting1(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n < 2 {
            return Err(CrocError::invalid("need K >= 1 and n >= 2"));
        }
        if self.root >= self.k {
            return Err(CrocError::invalid(format!(
                "root stream {} out of range for K = {}",
                self.root + 1,
                self.k
            )));
        }
        if !(1 <= self.early && self.early < self.late && self.late <= self.n) {
            return Err(CrocError::invalid(format!(
                "need 1 <= early < late <= n, got early={}, late={}, n={}",
                self.early, self.late, self.n
            )));
        }
        Ok(())
    }

    /// Equi-spaced grid on `[mean_lo, mean_hi]`, assigned to streams in order;
    /// a single stream gets `mean_lo`.
    pub fn pre_means(&self) -> Vec<f64> {
        if self.k == 1 {
            return vec![self.mean_lo];
        }
        (0..self.k)
            .map(|k| self.mean_lo + (self.mean_hi - self.mean_lo) * k as f64 / (self.k - 1) as f64)
            .collect()
    }

    pub fn post_means(&self) -> Vec<f64> {
        self.pre_means()
            .iter()
            .enumerate()
            .map(|(k, m)| {
                m + if k == self.root {
                    self.delta_root
                } else {
                    self.delta_other
                }
            })
            .collect()
    }

    pub fn truth(&self) -> ChangepointConfig {
        let mut t = vec![self.late; self.k];
        t[self.root] = self.early;
        ChangepointConfig::new(t)
    }

    pub fn oracle_model(&self) -> DensityModel {
        DensityModel::gaussian_oracle(&self.pre_means(), &self.post_means())
            .expect("pre and post means have equal length")
    }

    /// The one-early constraint set matching this design.
    pub fn constraint(&self) -> Result<ConstraintSet> {
        ConstraintSet::one_early(self.n, self.k, self.early, self.late)
    }

    fn mean_at(
        &self,
        pre: &[f64],
        post: &[f64],
        truth: &ChangepointConfig,
        i: usize,
        k: usize,
    ) -> f64 {
        if i < truth.get(k) {
            pre[k]
        } else {
            post[k]
        }
    }
}

/// A generated panel together with its ground truth.
#[derive(Clone, Debug)]
pub struct Simulated {
    pub panel: StreamPanel,
    pub truth: ChangepointConfig,
    pub model: DensityModel,
}

/// Inverse-CDF standard normal sampler over a seeded ChaCha8 stream.
pub struct NormalStream {
    rng: ChaCha8Rng,
    normal: Normal,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::standard(),
        }
    }

    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn next_normal(&mut self) -> f64 {
        let u = self.next_uniform();
        self.normal.inverse_cdf(u)
    }
}

pub fn gen_setting(spec: &GaussianShiftSpec) -> Result<Simulated> {
    spec.validate()?;
    let pre = spec.pre_means();
    let post = spec.post_means();
    let truth = spec.truth();
    let mut noise = NormalStream::new(spec.seed);
    let streams = (0..spec.k)
        .map(|k| {
            (0..spec.n)
                .map(|i| spec.mean_at(&pre, &post, &truth, i, k) + noise.next_normal())
                .collect()
        })
        .collect();
    Ok(Simulated {
        panel: StreamPanel::from_streams(streams)?,
        truth,
        model: spec.oracle_model(),
    })
}

/// Gaussian shift design with pairwise-correlated noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedSpec {
    pub base: GaussianShiftSpec,
    /// 0-based stream pairs sharing correlated noise.
    pub pairs: Vec<(usize, usize)>,
    pub rho: f64,
    /// Groups of mutually independent streams.
    pub groups: Vec<Vec<usize>>,
}

impl CorrelatedSpec {
    /// K = 6, n = 50, root 2 at 15, others at 30, means on [-3, 3], shifts
    /// 1 and 1.5, pairs (1,2), (3,4), (5,6) with rho = 0.65, independent
    /// groups {1,3,5} and {2,4,6}.
    pub fn appendix_b(seed: u64) -> Self {
        Self {
            base: GaussianShiftSpec {
                n: 50,
                k: 6,
                root: 1,
                early: 15,
                late: 30,
                mean_lo: -3.0,
                mean_hi: 3.0,
                delta_root: 1.0,
                delta_other: 1.5,
                seed,
            },
            pairs: vec![(0, 1), (2, 3), (4, 5)],
            rho: 0.65,
            groups: vec![vec![0, 2, 4], vec![1, 3, 5]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(CrocError::invalid(format!(
                "rho = {} outside (-1, 1)",
                self.rho
            )));
        }
        let mut used = vec![false; self.base.k];
        for &(a, b) in &self.pairs {
            if a == b || a >= self.base.k || b >= self.base.k {
                return Err(CrocError::invalid(format!(
                    "invalid pair ({}, {})",
                    a + 1,
                    b + 1
                )));
            }
            for s in [a, b] {
                if std::mem::replace(&mut used[s], true) {
                    return Err(CrocError::invalid(format!(
                        "stream {} appears in two correlated pairs",
                        s + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn gen_correlated(spec: &CorrelatedSpec) -> Result<(Simulated, GroupPartition)> {
    spec.validate()?;
    let base = &spec.base;
    let partition = GroupPartition::new(spec.groups.clone(), base.k)?;
    let pre = base.pre_means();
    let post = base.post_means();
    let truth = base.truth();
    let mut paired = vec![false; base.k];
    for &(a, b) in &spec.pairs {
        paired[a] = true;
        paired[b] = true;
    }
    let loading = (1.0 - spec.rho * spec.rho).sqrt();
    let mut noise = NormalStream::new(base.seed);
    let mut values = vec![0.0; base.n * base.k];
    for i in 0..base.n {
        for &(a, b) in &spec.pairs {
            let z1 = noise.next_normal();
            let z2 = noise.next_normal();
            values[a * base.n + i] = z1;
            values[b * base.n + i] = spec.rho * z1 + loading * z2;
        }
        for k in (0..base.k).filter(|&k| !paired[k]) {
            values[k * base.n + i] = noise.next_normal();
        }
    }
    for k in 0..base.k {
        for i in 0..base.n {
            values[k * base.n + i] += base.mean_at(&pre, &post, &truth, i, k);
        }
    }
    let panel = StreamPanel::from_stream_major(base.n, base.k, values)?;
    Ok((
        Simulated {
            panel,
            truth,
            model: base.oracle_model(),
        },
        partition,
    ))
}
