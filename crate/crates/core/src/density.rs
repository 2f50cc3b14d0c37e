// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-stream pre/post-change density models and their log-likelihood
//! ratios, plus the two fitting procedures used by the learned scores.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CrocError, Result};
use crate::model::StreamPanel;

/// Density values are floored here before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-300;
pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

fn log_floor() -> f64 {
    DENSITY_FLOOR.ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Density {
    Gaussian { mean: f64, var: f64 },
    Kde { points: Vec<f64>, bandwidth: f64 },
}

impl Density {
    pub fn gaussian(mean: f64, var: f64) -> Self {
        Self::Gaussian {
            mean,
            var: var.max(VARIANCE_FLOOR),
        }
    }

    /// Gaussian-kernel KDE with Silverman's rule-of-thumb bandwidth.
    pub fn kde(points: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(CrocError::invalid("KDE needs at least one point"));
        }
        Ok(Self::Kde {
            points: points.to_vec(),
            bandwidth: silverman_bandwidth(points),
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { mean, var } => {
                (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
            }
            Self::Kde { points, bandwidth } => {
                let h = *bandwidth;
                let norm = 1.0 / ((2.0 * PI).sqrt() * h * points.len() as f64);
                points
                    .iter()
                    .map(|p| (-0.5 * ((x - p) / h).powi(2)).exp())
                    .sum::<f64>()
                    * norm
            }
        }
    }

    /// `log max(f(x), DENSITY_FLOOR)`, computed in closed form for Gaussians
    /// so tail values keep their precision down to the floor.
    pub fn log_pdf(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { mean, var } => {
                let lp = -0.5 * (2.0 * PI * var).ln() - (x - mean).powi(2) / (2.0 * var);
                lp.max(log_floor())
            }
            Self::Kde { .. } => self.pdf(x).max(DENSITY_FLOOR).ln(),
        }
    }
}

/// `0.9 * min(sd, IQR / 1.34) * m^(-1/5)`, floored at [`BANDWIDTH_FLOOR`].
/// A zero spread (constant segment) lands on the floor.
pub fn silverman_bandwidth(points: &[f64]) -> f64 {
    let m = points.len();
    if m < 2 {
        return BANDWIDTH_FLOOR;
    }
    let mean = points.iter().sum::<f64>() / m as f64;
    let sd = (points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * (m as f64).powf(-0.2)).max(BANDWIDTH_FLOOR)
}

// linear interpolation between order statistics (type 7)
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// How a stream's log-likelihood ratio is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StreamLlr {
    /// `log f0(x) - log f1(x)` from explicit densities.
    Densities { pre: Density, post: Density },
    /// The observation already is the log-likelihood ratio (classifier logit).
    Direct,
}

impl StreamLlr {
    pub fn llr(&self, x: f64) -> f64 {
        match self {
            Self::Densities { pre, post } => pre.log_pdf(x) - post.log_pdf(x),
            Self::Direct => x,
        }
    }

    pub fn fill_llr(&self, xs: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(xs.iter().map(|&x| self.llr(x)));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Oracle,
    GaussianLearned,
    KdeLearned,
    Table,
}

/// Pre- and post-change log-densities for every stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub streams: Vec<StreamLlr>,
    pub provenance: Provenance,
}

impl DensityModel {
    pub fn new(streams: Vec<StreamLlr>, provenance: Provenance) -> Self {
        Self {
            streams,
            provenance,
        }
    }

    /// Unit-variance Gaussian mean shift per stream.
    pub fn gaussian_oracle(pre_means: &[f64], post_means: &[f64]) -> Result<Self> {
        if pre_means.len() != post_means.len() {
            return Err(CrocError::DimensionMismatch(
                "pre/post mean vectors differ in length".into(),
            ));
        }
        let streams = pre_means
            .iter()
            .zip(post_means)
            .map(|(&m0, &m1)| StreamLlr::Densities {
                pre: Density::gaussian(m0, 1.0),
                post: Density::gaussian(m1, 1.0),
            })
            .collect();
        Ok(Self::new(streams, Provenance::Oracle))
    }

    /// Every stream's observations are log-likelihood ratios already.
    pub fn direct(num_streams: usize) -> Self {
        Self::new(vec![StreamLlr::Direct; num_streams], Provenance::Table)
    }

    pub fn num_streams(&self) -> usize {
        self.streams.len()
    }

    pub fn stream(&self, k: usize) -> &StreamLlr {
        &self.streams[k]
    }

    /// `log f0_k(x) - log f1_k(x)` with floored densities.
    pub fn llr(&self, k: usize, x: f64) -> f64 {
        self.streams[k].llr(x)
    }

    pub fn check_streams(&self, panel: &StreamPanel) -> Result<()> {
        if self.streams.len() != panel.num_streams() {
            return Err(CrocError::DimensionMismatch(format!(
                "density model has {} streams, panel has {}",
                self.streams.len(),
                panel.num_streams()
            )));
        }
        Ok(())
    }
}

/// Result of the Gaussian profile-likelihood split of one stream.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSplit {
    pub split: usize,
    pub pre: Density,
    pub post: Density,
}

/// Profile-likelihood split of one stream: for each `t` in `[2, n-2]` fit a
/// Normal to each side with its own mean and a common variance (floored),
/// and keep the `t` with the largest log-likelihood, smallest `t` on ties.
pub fn fit_gaussian_stream(xs: &[f64]) -> Result<GaussianSplit> {
    let n = xs.len();
    if n < 4 {
        return Err(CrocError::invalid(format!(
            "Gaussian split needs n >= 4, got {n}"
        )));
    }
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, &x) in xs.iter().enumerate() {
        s1[i + 1] = s1[i] + x;
        s2[i + 1] = s2[i] + x * x;
    }
    let mean = |a: usize, b: usize| (s1[b] - s1[a]) / (b - a) as f64;
    let rss = |a: usize, b: usize| {
        let m = mean(a, b);
        ((s2[b] - s2[a]) - (b - a) as f64 * m * m).max(0.0)
    };
    let pooled_var = |t: usize| ((rss(0, t) + rss(t, n)) / n as f64).max(VARIANCE_FLOOR);
    // the profile likelihood is decreasing in the pooled residual sum of
    // squares, floored or not
    let mut best = (f64::INFINITY, 2);
    for t in 2..=n - 2 {
        let r = rss(0, t) + rss(t, n);
        if r < best.0 {
            best = (r, t);
        }
    }
    let split = best.1;
    let var = pooled_var(split);
    Ok(GaussianSplit {
        split,
        pre: Density::gaussian(mean(0, split), var),
        post: Density::gaussian(mean(split, n), var),
    })
}

/// Gaussian profile-likelihood fit of every stream.
pub fn fit_gaussian_model(panel: &StreamPanel) -> Result<DensityModel> {
    let streams = panel
        .streams()
        .map(|xs| {
            fit_gaussian_stream(xs).map(|g| StreamLlr::Densities {
                pre: g.pre,
                post: g.post,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityModel::new(streams, Provenance::GaussianLearned))
}

/// KDE of each side of a given split of one stream.
pub fn fit_kde_stream(xs: &[f64], split: usize) -> Result<StreamLlr> {
    if split < 3 || xs.len() < split + 3 {
        return Err(CrocError::invalid(format!(
            "KDE segments need >= 3 points each; split {split} of {} observations",
            xs.len()
        )));
    }
    Ok(StreamLlr::Densities {
        pre: Density::kde(&xs[..split])?,
        post: Density::kde(&xs[split..])?,
    })
}

/// KDE fit of every stream given per-stream splits (pre-change lengths).
pub fn fit_kde_model(panel: &StreamPanel, splits: &[usize]) -> Result<DensityModel> {
    if splits.len() != panel.num_streams() {
        return Err(CrocError::DimensionMismatch(format!(
            "{} splits for {} streams",
            splits.len(),
            panel.num_streams()
        )));
    }
    let streams = panel
        .streams()
        .zip(splits)
        .map(|(xs, &s)| fit_kde_stream(xs, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityModel::new(streams, Provenance::KdeLearned))
}

/// Split used for KDE learning: the Gaussian profile split clamped so both
/// sides keep at least three points.
pub fn kde_split(xs: &[f64]) -> Result<usize> {
    let n = xs.len();
    if n < 6 {
        return Err(CrocError::invalid(format!(
            "KDE learning needs n >= 6, got {n}"
        )));
    }
    Ok(fit_gaussian_stream(xs)?.split.clamp(3, n - 3))
}
