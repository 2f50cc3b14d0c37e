// SPDX-License-Identifier: MIT OR Apache-2.0

//! Changepoint-plausibility (CPP) scores.
//!
//! A [`CppScore`] maps a panel and a candidate configuration to a real number,
//! larger meaning more plausible. Most useful scores are sums of per-stream
//! terms; those implement [`StreamScore`] and are lifted to full-panel scores
//! with [`Additive`]. The engines exploit the decomposition to cache
//! per-stream work and to restrict a score to a group of streams.
//!
//! The log-likelihood-ratio scores work with the partial sums
//! `L_k(s) = sum_{i <= s} llr_k(x_{i,k})`, `s` in `1..=n`.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::density::{self, DensityModel, StreamLlr};
use crate::error::{CrocError, Result};
use crate::model::{ChangepointConfig, StreamPanel};

pub trait CppScore: Send + Sync {
    fn score(&self, panel: &StreamPanel, config: &ChangepointConfig) -> Result<f64>;

    fn descriptor(&self) -> String;

    /// The per-stream decomposition, when the score is a sum of stream terms.
    fn as_stream_score(&self) -> Option<&dyn StreamScore> {
        None
    }
}

/// A score of the form `S(x, t) = sum_k term_k(x_k, t_k)`.
///
/// `stream` is the stream's index in the full panel, so restricted groups keep
/// using the right per-stream model.
pub trait StreamScore: Send + Sync {
    fn stream_term(&self, stream: usize, values: &[f64], t: usize) -> Result<f64>;

    fn descriptor(&self) -> String;
}

impl<S: StreamScore + ?Sized> StreamScore for &S {
    fn stream_term(&self, stream: usize, values: &[f64], t: usize) -> Result<f64> {
        (**self).stream_term(stream, values, t)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

impl<S: StreamScore + ?Sized> StreamScore for Arc<S> {
    fn stream_term(&self, stream: usize, values: &[f64], t: usize) -> Result<f64> {
        (**self).stream_term(stream, values, t)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

/// Lifts a [`StreamScore`] to a full-panel score. Terms are accumulated from
/// `0.0` in stream order, which the engines reproduce exactly.
#[derive(Clone, Debug)]
pub struct Additive<S>(pub S);

impl<S: StreamScore> CppScore for Additive<S> {
    fn score(&self, panel: &StreamPanel, config: &ChangepointConfig) -> Result<f64> {
        check_config(panel, config)?;
        let mut total = 0.0;
        for (k, xs) in panel.streams().enumerate() {
            total += self.0.stream_term(k, xs, config.get(k))?;
        }
        Ok(total)
    }

    fn descriptor(&self) -> String {
        self.0.descriptor()
    }

    fn as_stream_score(&self) -> Option<&dyn StreamScore> {
        Some(&self.0)
    }
}

pub(crate) fn check_config(panel: &StreamPanel, config: &ChangepointConfig) -> Result<()> {
    if config.len() != panel.num_streams() {
        return Err(CrocError::DimensionMismatch(format!(
            "configuration {config} has {} coordinates, panel has {} streams",
            config.len(),
            panel.num_streams()
        )));
    }
    config.validate(panel.n())
}

/// `L(s)` for `s = 0..=n`; index 0 is the empty sum.
pub fn partial_sums(llr: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(llr.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &v in llr {
        acc += v;
        out.push(acc);
    }
    out
}

/// Smallest `s` in `1..=n` maximizing `L(s)`.
pub fn argmax_partial_sum(sums: &[f64]) -> usize {
    let mut best = 1;
    for s in 2..sums.len() {
        if sums[s] > sums[best] {
            best = s;
        }
    }
    best
}

/// MLE changepoint of each stream together with the profile curves.
#[derive(Clone, Debug, PartialEq)]
pub struct MleEstimate {
    pub xi_hat: Vec<usize>,
    /// `profiles[k][s - 1] = L_k(s)`: the profile log-likelihood up to an
    /// additive constant.
    pub profiles: Vec<Vec<f64>>,
}

impl MleEstimate {
    pub fn as_config(&self) -> ChangepointConfig {
        ChangepointConfig::new(self.xi_hat.clone())
    }
}

/// `xi_hat_k = argmax_{t in [n]} sum_{i <= t} llr_k(x_{i,k})`, smallest on ties.
pub fn mle_changepoints(panel: &StreamPanel, model: &DensityModel) -> Result<MleEstimate> {
    model.check_streams(panel)?;
    let mut xi_hat = Vec::with_capacity(panel.num_streams());
    let mut profiles = Vec::with_capacity(panel.num_streams());
    let mut buf = Vec::new();
    for (k, xs) in panel.streams().enumerate() {
        model.stream(k).fill_llr(xs, &mut buf);
        let sums = partial_sums(&buf);
        xi_hat.push(argmax_partial_sum(&sums));
        profiles.push(sums[1..].to_vec());
    }
    Ok(MleEstimate { xi_hat, profiles })
}

/// Where a score's per-stream log-likelihood ratio comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum LlrSource {
    /// Densities fixed in advance (oracle or externally learned).
    Fixed(Arc<DensityModel>),
    /// Gaussian profile-likelihood fit redone on every evaluated stream.
    RefitGaussian,
    /// Profile split followed by a KDE of each side, redone on every
    /// evaluated stream.
    RefitKde,
}

impl LlrSource {
    fn fill(&self, stream: usize, xs: &[f64], out: &mut Vec<f64>) -> Result<()> {
        match self {
            Self::Fixed(model) => {
                let llr = model.streams.get(stream).ok_or_else(|| {
                    CrocError::DimensionMismatch(format!(
                        "density model has no stream {}",
                        stream + 1
                    ))
                })?;
                llr.fill_llr(xs, out);
            }
            Self::RefitGaussian => {
                let g = density::fit_gaussian_stream(xs)?;
                StreamLlr::Densities {
                    pre: g.pre,
                    post: g.post,
                }
                .fill_llr(xs, out);
            }
            Self::RefitKde => {
                let split = density::kde_split(xs)?;
                density::fit_kde_stream(xs, split)?.fill_llr(xs, out);
            }
        }
        Ok(())
    }

    fn label(&self) -> &'static str {
        match self {
            Self::Fixed(m) => match m.provenance {
                density::Provenance::Oracle => "oracle",
                density::Provenance::GaussianLearned => "gaussian-fixed",
                density::Provenance::KdeLearned => "kde-fixed",
                density::Provenance::Table => "logits",
            },
            Self::RefitGaussian => "gaussian",
            Self::RefitKde => "kde",
        }
    }

    fn sums(&self, stream: usize, xs: &[f64]) -> Result<Vec<f64>> {
        let mut buf = Vec::with_capacity(xs.len());
        self.fill(stream, xs, &mut buf)?;
        Ok(partial_sums(&buf))
    }
}

/// Optimal score for known densities and a known true configuration:
/// `sum_k L_k(t_k) - L_k(xi_k)`.
#[derive(Clone, Debug)]
pub struct OracleOptScore {
    model: Arc<DensityModel>,
    xi: ChangepointConfig,
}

impl OracleOptScore {
    pub fn new(model: DensityModel, xi: ChangepointConfig) -> Result<Self> {
        if model.num_streams() != xi.len() {
            return Err(CrocError::DimensionMismatch(
                "true configuration and density model disagree on K".into(),
            ));
        }
        Ok(Self {
            model: Arc::new(model),
            xi,
        })
    }
}

impl StreamScore for OracleOptScore {
    fn stream_term(&self, stream: usize, values: &[f64], t: usize) -> Result<f64> {
        let sums = LlrSource::Fixed(self.model.clone()).sums(stream, values)?;
        Ok(sums[t] - sums[self.xi.get(stream)])
    }

    fn descriptor(&self) -> String {
        format!("optimal-llr(xi={})", self.xi)
    }
}

/// Learned (or, with true densities, oracle) score
/// `sum_k L_k(t_k) - max_s L_k(s)`. The MLE is re-estimated on whatever panel
/// the score is evaluated on, so permuted panels get their own estimate.
#[derive(Clone, Debug)]
pub struct LearnedScore {
    source: LlrSource,
}

impl LearnedScore {
    pub fn new(source: LlrSource) -> Self {
        Self { source }
    }

    pub fn with_model(model: DensityModel) -> Self {
        Self::new(LlrSource::Fixed(Arc::new(model)))
    }

    pub fn gaussian() -> Self {
        Self::new(LlrSource::RefitGaussian)
    }

    pub fn kde() -> Self {
        Self::new(LlrSource::RefitKde)
    }

    pub fn source(&self) -> &LlrSource {
        &self.source
    }
}

impl StreamScore for LearnedScore {
    fn stream_term(&self, stream: usize, values: &[f64], t: usize) -> Result<f64> {
        let sums = self.source.sums(stream, values)?;
        Ok(sums[t] - sums[argmax_partial_sum(&sums)])
    }

    fn descriptor(&self) -> String {
        format!("learned-llr({})", self.source.label())
    }
}

/// Same form as [`LearnedScore`] but with the MLE frozen at the estimate from
/// the original panel.
#[derive(Clone, Debug)]
pub struct FrozenScore {
    model: Arc<DensityModel>,
    xi_hat: Vec<usize>,
}

impl FrozenScore {
    pub fn new(model: DensityModel, xi_hat: &MleEstimate) -> Result<Self> {
        if model.num_streams() != xi_hat.xi_hat.len() {
            return Err(CrocError::DimensionMismatch(
                "frozen estimate and density model disagree on K".into(),
            ));
        }
        Ok(Self {
            model: Arc::new(model),
            xi_hat: xi_hat.xi_hat.clone(),
        })
    }

    /// Fits the MLE on `panel` once and freezes it.
    pub fn from_panel(model: DensityModel, panel: &StreamPanel) -> Result<Self> {
        let est = mle_changepoints(panel, &model)?;
        Self::new(model, &est)
    }
}

impl StreamScore for FrozenScore {
    fn stream_term(&self, stream: usize, values: &[f64], t: usize) -> Result<f64> {
        let sums = LlrSource::Fixed(self.model.clone()).sums(stream, values)?;
        Ok(sums[t] - sums[self.xi_hat[stream]])
    }

    fn descriptor(&self) -> String {
        format!(
            "frozen-llr(xi_hat={})",
            ChangepointConfig::new(self.xi_hat.clone())
        )
    }
}

/// A set-valued localization procedure: panel -> subset of streams.
pub trait SetProcedure: Send + Sync {
    fn select(&self, panel: &StreamPanel) -> BTreeSet<usize>;
}

impl<F> SetProcedure for F
where
    F: Fn(&StreamPanel) -> BTreeSet<usize> + Send + Sync,
{
    fn select(&self, panel: &StreamPanel) -> BTreeSet<usize> {
        self(panel)
    }
}

/// `S(x, t) = 1{argmin_k t_k in C(x)}` for an arbitrary procedure `C`.
pub struct WrapperScore<C> {
    procedure: C,
    label: String,
}

impl<C: SetProcedure> WrapperScore<C> {
    pub fn new(procedure: C, label: impl Into<String>) -> Self {
        Self {
            procedure,
            label: label.into(),
        }
    }
}

impl<C: SetProcedure> CppScore for WrapperScore<C> {
    fn score(&self, panel: &StreamPanel, config: &ChangepointConfig) -> Result<f64> {
        check_config(panel, config)?;
        let root = config
            .unique_argmin()
            .ok_or_else(|| CrocError::TiedArgmin(config.to_string()))?;
        Ok(if self.procedure.select(panel).contains(&root) {
            1.0
        } else {
            0.0
        })
    }

    fn descriptor(&self) -> String {
        format!("wrapper({})", self.label)
    }
}

/// A score given by a closure; used for debugging and for symmetric scores.
pub struct FnScore<F> {
    f: F,
    label: String,
}

impl<F> FnScore<F>
where
    F: Fn(&StreamPanel, &ChangepointConfig) -> f64 + Send + Sync,
{
    pub fn new(f: F, label: impl Into<String>) -> Self {
        Self {
            f,
            label: label.into(),
        }
    }
}

impl<F> CppScore for FnScore<F>
where
    F: Fn(&StreamPanel, &ChangepointConfig) -> f64 + Send + Sync,
{
    fn score(&self, panel: &StreamPanel, config: &ChangepointConfig) -> Result<f64> {
        check_config(panel, config)?;
        Ok((self.f)(panel, config))
    }

    fn descriptor(&self) -> String {
        self.label.clone()
    }
}

/// Constant score; every p-value it produces is 1.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantScore;

impl StreamScore for ConstantScore {
    fn stream_term(&self, _stream: usize, _values: &[f64], _t: usize) -> Result<f64> {
        Ok(0.0)
    }

    fn descriptor(&self) -> String {
        "constant".into()
    }
}

/// `f(S)` for a scalar map `f`.
pub struct Transformed<S, F> {
    inner: S,
    f: F,
    label: String,
}

impl<S, F> Transformed<S, F>
where
    S: CppScore,
    F: Fn(f64) -> f64 + Send + Sync,
{
    pub fn new(inner: S, f: F, label: impl Into<String>) -> Self {
        Self {
            inner,
            f,
            label: label.into(),
        }
    }
}

impl<S, F> CppScore for Transformed<S, F>
where
    S: CppScore,
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn score(&self, panel: &StreamPanel, config: &ChangepointConfig) -> Result<f64> {
        Ok((self.f)(self.inner.score(panel, config)?))
    }

    fn descriptor(&self) -> String {
        format!("{}({})", self.label, self.inner.descriptor())
    }
}
