// SPDX-License-Identifier: MIT OR Apache-2.0

//! Parsing of the compound command-line values.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use croc::io::read_constraint_file;
use croc::model::DEFAULT_GRID_CAP;
use croc::ConstraintSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConstraintSpec {
    Grid,
    Common,
    OneEarly { early: usize, late: usize },
    File(PathBuf),
}

impl FromStr for ConstraintSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        if s == "grid" {
            return Ok(Self::Grid);
        }
        if s == "common" {
            return Ok(Self::Common);
        }
        if let Some(rest) = s.strip_prefix("one-early:") {
            let (e, l) = rest
                .split_once(',')
                .ok_or_else(|| anyhow!("expected one-early:EARLY,LATE, got {s:?}"))?;
            let early = e
                .trim()
                .parse()
                .with_context(|| format!("bad early index {e:?}"))?;
            let late = l
                .trim()
                .parse()
                .with_context(|| format!("bad late index {l:?}"))?;
            return Ok(Self::OneEarly { early, late });
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(Self::File(PathBuf::from(path)));
        }
        bail!("unknown constraint {s:?}; use grid, common, one-early:E,L or file:PATH")
    }
}

impl fmt::Display for ConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Grid => f.write_str("grid"),
            Self::Common => f.write_str("common"),
            Self::OneEarly { early, late } => write!(f, "one-early:{early},{late}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl ConstraintSpec {
    pub fn build(&self, n: usize, k: usize) -> croc::Result<ConstraintSet> {
        match self {
            Self::Grid => ConstraintSet::full_grid_with_cap(n, k, DEFAULT_GRID_CAP),
            Self::Common => ConstraintSet::common(n, k),
            Self::OneEarly { early, late } => ConstraintSet::one_early(n, k, *early, *late),
            Self::File(p) => read_constraint_file(p, n, k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ScoreKind {
    /// Likelihood score with the true densities from the truth file.
    Oracle,
    /// Likelihood score centred at the true changepoints.
    Optimal,
    /// Gaussian densities refit on every scored panel.
    Gaussian,
    /// Kernel densities refit on every scored panel.
    Kde,
    /// Per-observation log-likelihood ratios read from --logits.
    Logits,
    /// Score that ignores the data.
    Constant,
}

impl ScoreKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Optimal => "optimal",
            Self::Gaussian => "gaussian",
            Self::Kde => "kde",
            Self::Logits => "logits",
            Self::Constant => "constant",
        }
    }
}

/// `--score` value: a kind, or `logits:PATH`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreArg {
    pub kind: ScoreKind,
    pub logits: Option<PathBuf>,
}

impl FromStr for ScoreArg {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        if let Some(path) = s.strip_prefix("logits:") {
            return Ok(Self {
                kind: ScoreKind::Logits,
                logits: Some(PathBuf::from(path)),
            });
        }
        let kind = <ScoreKind as clap::ValueEnum>::from_str(s, true)
            .map_err(|_| anyhow!("unknown score {s:?}"))?;
        Ok(Self { kind, logits: None })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AlgoArg {
    Croc,
    ConchAgg,
    CrocDep,
}

impl From<AlgoArg> for croc::Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Croc => Self::Croc,
            AlgoArg::ConchAgg => Self::ConchAgg,
            AlgoArg::CrocDep => Self::CrocDep,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Setting1,
    Setting2,
    AppendixB,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Setting1 => "setting1",
            Self::Setting2 => "setting2",
            Self::AppendixB => "appendix-b",
        }
    }
}

/// Parses `1,3,5;2,4,6` into 0-based groups.
pub fn parse_partition(s: &str) -> anyhow::Result<Vec<Vec<usize>>> {
    s.split(';')
        .map(|group| {
            group
                .split(',')
                .map(|tok| {
                    let k: usize = tok
                        .trim()
                        .parse()
                        .with_context(|| format!("bad stream index {tok:?} in partition"))?;
                    if k == 0 {
                        bail!("stream indices in a partition start at 1");
                    }
                    Ok(k - 1)
                })
                .collect()
        })
        .collect()
}
