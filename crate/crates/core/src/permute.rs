// SPDX-License-Identifier: MIT OR Apache-2.0

//! Split-permutation groups: permutations that shuffle each stream's pre- and
//! post-change segments independently.
//!
//! A stream permutation is stored as its map `pi` on `0..n`; applying it moves
//! the observation at position `i` to position `pi[i]`, so
//! `out[i] = x[pi^{-1}(i)]`.

use itertools::Itertools;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CrocError, Result};
use crate::model::{ChangepointConfig, StreamPanel};

/// Default cap on the size of a fully enumerated group.
pub const DEFAULT_GROUP_CAP: u64 = 100_000;

/// A 64-bit seed plus a derivation path naming a reproducible sub-stream.
///
/// The generator for `(seed, [p1, .., pm])` is `ChaCha8Rng::seed_from_u64(h)`
/// where `h = mix(seed)` and then `h = mix(h ^ mix(p_j + GOLDEN))` for each
/// path element, `mix` being the SplitMix64 finalizer. Draws depend only on
/// the seed and path, never on scheduling.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngSeed {
    seed: u64,
    path: Vec<u64>,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            path: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self {
            seed: self.seed,
            path,
        }
    }

    pub fn derived_u64(&self) -> u64 {
        self.path.iter().fold(splitmix(self.seed), |h, &p| {
            splitmix(h ^ splitmix(p.wrapping_add(GOLDEN)))
        })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.derived_u64())
    }

    /// Sub-stream used for stream `k` whose candidate changepoint is `t`.
    /// Every engine draws permutations for a stream from this path, which is
    /// what makes p-value tables comparable across engines and scores.
    pub fn for_stream(&self, k: usize, t: usize) -> Self {
        self.child(k as u64).child(t as u64)
    }
}

/// An element of the split-permutation group of a configuration.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SplitPermutation {
    config: ChangepointConfig,
    maps: Vec<Vec<usize>>,
}

impl SplitPermutation {
    pub fn identity(config: &ChangepointConfig, n: usize) -> Self {
        Self {
            config: config.clone(),
            maps: vec![(0..n).collect(); config.len()],
        }
    }

    /// Checks bijectivity and the split property for every stream.
    pub fn new(config: ChangepointConfig, maps: Vec<Vec<usize>>) -> Result<Self> {
        if maps.len() != config.len() {
            return Err(CrocError::DimensionMismatch(format!(
                "{} stream maps for a {}-stream configuration",
                maps.len(),
                config.len()
            )));
        }
        for (k, map) in maps.iter().enumerate() {
            let n = map.len();
            let mut seen = vec![false; n];
            for &j in map {
                if j >= n || std::mem::replace(&mut seen[j], true) {
                    return Err(CrocError::invalid(format!(
                        "stream {} map is not a bijection",
                        k + 1
                    )));
                }
            }
            if !respects_split(map, config.get(k)) {
                return Err(CrocError::invalid(format!(
                    "stream {} map crosses the changepoint {}",
                    k + 1,
                    config.get(k)
                )));
            }
        }
        Ok(Self { config, maps })
    }

    pub fn config(&self) -> &ChangepointConfig {
        &self.config
    }

    pub fn map(&self, k: usize) -> &[usize] {
        &self.maps[k]
    }

    pub fn maps(&self) -> &[Vec<usize>] {
        &self.maps
    }

    /// `(self ∘ other)(i) = self(other(i))`, per stream.
    pub fn compose(&self, other: &SplitPermutation) -> Result<Self> {
        if self.maps.len() != other.maps.len() {
            return Err(CrocError::DimensionMismatch(
                "cannot compose permutations over different stream counts".into(),
            ));
        }
        let maps = self
            .maps
            .iter()
            .zip(&other.maps)
            .map(|(a, b)| b.iter().map(|&j| a[j]).collect())
            .collect();
        Ok(Self {
            config: self.config.clone(),
            maps,
        })
    }

    pub fn satisfies_split(&self) -> bool {
        self.maps
            .iter()
            .enumerate()
            .all(|(k, m)| respects_split(m, self.config.get(k)))
    }
}

fn respects_split(map: &[usize], t: usize) -> bool {
    map.iter().enumerate().all(|(i, &j)| (i < t) == (j < t))
}

/// `prod_k t_k! (n - t_k)!`
pub fn group_size(config: &ChangepointConfig, n: usize) -> BigUint {
    config
        .as_slice()
        .iter()
        .map(|&t| stream_group_size(t, n))
        .product()
}

pub(crate) fn stream_group_size(t: usize, n: usize) -> BigUint {
    factorial(t) * factorial(n - t)
}

fn factorial(m: usize) -> BigUint {
    (1..=m as u64).fold(BigUint::one(), |acc, v| acc * v)
}

/// Size of the group as a `u64`, or an enumeration error if it exceeds `cap`.
pub fn checked_group_size(config: &ChangepointConfig, n: usize, cap: u64) -> Result<u64> {
    let size = group_size(config, n);
    match size.to_u64() {
        Some(s) if s <= cap => Ok(s),
        _ => Err(CrocError::EnumerationTooLarge {
            what: "split-permutation group",
            size: size.to_string(),
            cap,
            hint: "; use Monte Carlo p-values instead",
        }),
    }
}

/// All permutations of one stream that respect changepoint `t`, in
/// lexicographic order of the map (identity first).
pub fn enumerate_stream(n: usize, t: usize) -> Vec<Vec<usize>> {
    let left: Vec<Vec<usize>> = (0..t).permutations(t).collect();
    let right: Vec<Vec<usize>> = (t..n).permutations(n - t).collect();
    let mut out = Vec::with_capacity(left.len() * right.len());
    for l in &left {
        for r in &right {
            let mut map = Vec::with_capacity(n);
            map.extend_from_slice(l);
            map.extend_from_slice(r);
            out.push(map);
        }
    }
    out
}

/// Every element of the group, identity first, with the last stream varying
/// fastest.
pub fn enumerate_group(
    config: &ChangepointConfig,
    n: usize,
    cap: u64,
) -> Result<Vec<SplitPermutation>> {
    checked_group_size(config, n, cap)?;
    let per_stream: Vec<Vec<Vec<usize>>> = config
        .as_slice()
        .iter()
        .map(|&t| enumerate_stream(n, t))
        .collect();
    Ok(per_stream
        .into_iter()
        .multi_cartesian_product()
        .map(|maps| SplitPermutation {
            config: config.clone(),
            maps,
        })
        .collect())
}

/// A uniformly random stream permutation respecting `t`: Fisher-Yates on each
/// segment of the identity map.
pub fn sample_stream<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, t: usize) -> Vec<usize> {
    let mut map: Vec<usize> = (0..n).collect();
    let (left, right) = map.split_at_mut(t);
    left.shuffle(rng);
    right.shuffle(rng);
    map
}

/// `count` consecutive draws for stream `k` at changepoint `t`, taken from
/// the sub-stream `seed.for_stream(k, t)`.
pub fn sample_stream_draws(
    seed: &RngSeed,
    k: usize,
    n: usize,
    t: usize,
    count: usize,
) -> Vec<Vec<usize>> {
    let mut rng = seed.for_stream(k, t).rng();
    (0..count).map(|_| sample_stream(&mut rng, n, t)).collect()
}

/// One uniform draw from the group, each stream from its own sub-stream of
/// `seed`.
pub fn sample_uniform(config: &ChangepointConfig, n: usize, seed: &RngSeed) -> SplitPermutation {
    let maps = config
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &t)| sample_stream(&mut seed.for_stream(k, t).rng(), n, t))
        .collect();
    SplitPermutation {
        config: config.clone(),
        maps,
    }
}

/// `count` i.i.d. uniform group elements. Draw `m` uses the `m`-th stream
/// permutation of every per-stream sub-stream.
pub fn sample_many(
    config: &ChangepointConfig,
    n: usize,
    seed: &RngSeed,
    count: usize,
) -> Vec<SplitPermutation> {
    let per_stream: Vec<Vec<Vec<usize>>> = config
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &t)| sample_stream_draws(seed, k, n, t, count))
        .collect();
    (0..count)
        .map(|m| SplitPermutation {
            config: config.clone(),
            maps: per_stream.iter().map(|d| d[m].clone()).collect(),
        })
        .collect()
}

pub(crate) fn permute_into(map: &[usize], x: &[f64], out: &mut [f64]) {
    for (i, &j) in map.iter().enumerate() {
        out[j] = x[i];
    }
}

/// Realizes `pi(X)`.
pub fn apply(pi: &SplitPermutation, panel: &StreamPanel) -> Result<StreamPanel> {
    let n = panel.n();
    let k = panel.num_streams();
    if pi.maps.len() != k || pi.maps.iter().any(|m| m.len() != n) {
        return Err(CrocError::DimensionMismatch(format!(
            "permutation over {} streams cannot act on a {n}x{k} panel",
            pi.maps.len()
        )));
    }
    let mut values = vec![0.0; n * k];
    for (s, chunk) in values.chunks_exact_mut(n).enumerate() {
        permute_into(&pi.maps[s], panel.stream(s), chunk);
    }
    Ok(StreamPanel::from_parts_unchecked(n, k, values))
}
