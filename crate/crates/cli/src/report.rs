// SPDX-License-Identifier: MIT OR Apache-2.0

//! Report layout. Streams are 1-based here; changepoints are pre-change
//! lengths as everywhere else.

use std::io::Write;

use croc::{AnalysisResult, PValueMethod};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Invocation {
    pub input: String,
    pub header: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
    pub score: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logits: Option<String>,
    pub algo: String,
    pub constraint: String,
    pub alpha: f64,
    pub mc: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
}

#[derive(Debug, Serialize)]
struct Method {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    draws: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ConfigRow {
    config: Vec<usize>,
    /// 1-based stream with the unique earliest changepoint.
    root: usize,
    p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    group_p_values: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct StreamRow {
    stream: usize,
    p_value: f64,
    in_set: bool,
    excluded_by_constraint: bool,
}

#[derive(Debug, Serialize)]
struct SingleStreamRow {
    stream: usize,
    changepoint: usize,
    p_value: f64,
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    invocation: &'a Invocation,
    algorithm: String,
    score: &'a str,
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    alpha: f64,
    seed: u64,
    method: Method,
    confidence_set: Vec<usize>,
    streams: Vec<StreamRow>,
    configs: Vec<ConfigRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    groups: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    single_stream_p_values: Option<Vec<SingleStreamRow>>,
    skipped_configs: Vec<Vec<usize>>,
}

impl<'a> Report<'a> {
    pub fn new(invocation: &'a Invocation, n: usize, res: &'a AnalysisResult) -> Self {
        let method = match res.pvalues.method {
            PValueMethod::Exact => Method {
                kind: "exact",
                draws: None,
            },
            PValueMethod::MonteCarlo { draws } => Method {
                kind: "monte-carlo",
                draws: Some(draws),
            },
            PValueMethod::Randomized => Method {
                kind: "randomized",
                draws: None,
            },
        };
        let configs = res
            .pvalues
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| ConfigRow {
                config: e.config.as_slice().to_vec(),
                root: e.config.unique_argmin().map_or(0, |k| k + 1),
                p_value: e.p_value,
                group_p_values: res.group_pvalues.as_ref().map(|g| g.p_values[i].clone()),
            })
            .collect();
        let streams = res
            .root
            .p_values
            .iter()
            .enumerate()
            .map(|(k, &p)| StreamRow {
                stream: k + 1,
                p_value: p,
                in_set: res.confidence_set.contains(k),
                excluded_by_constraint: res.root.excluded_by_constraint[k],
            })
            .collect();
        Self {
            invocation,
            algorithm: res.algorithm.to_string(),
            score: &res.score,
            n,
            k: res.root.p_values.len(),
            alpha: res.alpha,
            seed: res.seed,
            method,
            confidence_set: res.set_members().iter().map(|k| k + 1).collect(),
            streams,
            configs,
            groups: res.group_pvalues.as_ref().map(|g| {
                g.groups
                    .iter()
                    .map(|grp| grp.iter().map(|k| k + 1).collect())
                    .collect()
            }),
            single_stream_p_values: res.stream_pvalues.as_ref().map(|rows| {
                rows.iter()
                    .map(|r| SingleStreamRow {
                        stream: r.stream + 1,
                        changepoint: r.changepoint,
                        p_value: r.p_value,
                    })
                    .collect()
            }),
            skipped_configs: res
                .skipped_configs
                .iter()
                .map(|c| c.as_slice().to_vec())
                .collect(),
        }
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> anyhow::Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// One row per stream: `stream,p_value,in_set,flag_excluded_by_R`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> anyhow::Result<()> {
        writeln!(w, "stream,p_value,in_set,flag_excluded_by_R")?;
        for row in &self.streams {
            writeln!(
                w,
                "{},{},{},{}",
                row.stream, row.p_value, row.in_set, row.excluded_by_constraint
            )?;
        }
        Ok(())
    }
}
