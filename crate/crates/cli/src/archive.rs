//! Posterior archives: `run.toml`, `transform.csv`, one `chain_<c>.json` and
//! `trace_<c>.csv` per chain, and `summary.toml`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use mtf_core::diag::{structure_of, summarize_run, RunSummary};
use mtf_core::io::{read_json, read_transform, write_json, write_transform};
use mtf_core::mtf::ComponentStructure;
use mtf_core::{Error, HyperParams, Trace, MtfState, PosteriorSamples, PreprocessTransform, Result, RmtfState};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Mtf,
    Rmtf,
    Gfa,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mtf" => Ok(Self::Mtf),
            "rmtf" => Ok(Self::Rmtf),
            "gfa" => Ok(Self::Gfa),
            o => Err(Error::InvalidParameter(format!("unknown model '{o}' (mtf, rmtf or gfa)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mtf => "mtf",
            Self::Rmtf => "rmtf",
            Self::Gfa => "gfa",
        })
    }
}

/// Preprocessing applied before fitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    None,
    Feature,
    Fiber,
}

impl FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "feature" => Ok(Self::Feature),
            "fiber" => Ok(Self::Fiber),
            o => Err(Error::InvalidParameter(format!("unknown scaling '{o}' (none, feature or fiber)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewInfo {
    pub name: String,
    pub d: usize,
    pub l: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
}

/// Settings of a fit, stored as `run.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub model: ModelKind,
    pub k: usize,
    pub chains: usize,
    pub burnin: usize,
    pub samples: usize,
    pub thin: usize,
    pub seed: u64,
    pub preset: String,
    pub scaling: Scaling,
    pub input: String,
    /// Views of the input collection.
    pub views: Vec<ViewInfo>,
    /// GFA only: `(view, slab)` of every unfolded matrix the sampler saw.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub origin: Vec<(usize, usize)>,
    pub hyper: HyperParams<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Chains {
    Strict(Vec<PosteriorSamples<MtfState<f64>, f64>>),
    Relaxed(Vec<PosteriorSamples<RmtfState<f64>, f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Archive {
    pub info: RunInfo,
    pub transform: PreprocessTransform<f64>,
    pub chains: Chains,
}

fn parse_err(p: &Path, e: impl ToString) -> Error {
    Error::Parse {
        path: p.display().to_string(),
        msg: e.to_string(),
    }
}

fn write_trace<S>(path: &Path, ps: &PosteriorSamples<S, f64>) -> Result<()> {
    let n_views = ps.trace.mse.first().map_or(0, Vec::len);
    let mut out = String::from("sweep,log_joint");
    for t in 0..n_views {
        out.push_str(&format!(",mse_view{t}"));
    }
    out.push('\n');
    for i in 0..ps.trace.len() {
        out.push_str(&format!("{},{:e}", ps.trace.sweeps[i], ps.trace.log_joint[i]));
        for m in &ps.trace.mse[i] {
            out.push_str(&format!(",{m:e}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

impl Archive {
    /// Origin view of every sampler view (identity unless GFA).
    pub fn origin_views(&self) -> Option<Vec<usize>> {
        (!self.info.origin.is_empty()).then(|| self.info.origin.iter().map(|o| o.0).collect())
    }

    /// Per-chain shared / specific / empty counts in terms of the input
    /// collection's views.
    pub fn chain_structures(&self) -> Vec<ComponentStructure> {
        let origin = self.origin_views();
        match &self.chains {
            Chains::Strict(c) => c.iter().map(|p| structure_of(&p.snapshots, 0.5, origin.as_deref())).collect(),
            Chains::Relaxed(c) => c.iter().map(|p| structure_of(&p.snapshots, 0.5, origin.as_deref())).collect(),
        }
    }

    /// Index of the chain with the highest mean log joint after burn-in.
    pub fn best_chain(&self) -> usize {
        let score = |tr: &Trace<f64>, burn: usize| {
            let kept: Vec<f64> = (0..tr.len()).filter(|&i| tr.sweeps[i] > burn).map(|i| tr.log_joint[i]).collect();
            if kept.is_empty() {
                f64::NEG_INFINITY
            } else {
                kept.iter().sum::<f64>() / kept.len() as f64
            }
        };
        let scores: Vec<f64> = match &self.chains {
            Chains::Strict(c) => c.iter().map(|p| score(&p.trace, p.schedule.burn_in)).collect(),
            Chains::Relaxed(c) => c.iter().map(|p| score(&p.trace, p.schedule.burn_in)).collect(),
        };
        (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b })
    }

    /// Structure of the best chain. Component labels are not comparable
    /// across chains, so counts are never pooled.
    pub fn structure(&self) -> ComponentStructure {
        self.chain_structures().swap_remove(self.best_chain())
    }

    pub fn summaries(&self) -> Vec<RunSummary> {
        match &self.chains {
            Chains::Strict(c) => c.iter().map(summarize_run).collect(),
            Chains::Relaxed(c) => c.iter().map(summarize_run).collect(),
        }
    }

    pub fn n_snapshots(&self) -> usize {
        match &self.chains {
            Chains::Strict(c) => c.iter().map(|p| p.len()).sum(),
            Chains::Relaxed(c) => c.iter().map(|p| p.len()).sum(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let run = toml::to_string(&self.info).map_err(|e| parse_err(&dir.join("run.toml"), e))?;
        fs::write(dir.join("run.toml"), run)?;
        write_transform(&dir.join("transform.csv"), &self.transform)?;
        match &self.chains {
            Chains::Strict(c) => {
                for ps in c {
                    write_json(&dir.join(format!("chain_{}.json", ps.chain)), ps)?;
                    write_trace(&dir.join(format!("trace_{}.csv", ps.chain)), ps)?;
                }
            }
            Chains::Relaxed(c) => {
                for ps in c {
                    write_json(&dir.join(format!("chain_{}.json", ps.chain)), ps)?;
                    write_trace(&dir.join(format!("trace_{}.csv", ps.chain)), ps)?;
                }
            }
        }
        let mut summary = format!("model = \"{}\"\n", self.info.model);
        let s = self.structure();
        summary.push_str(&format!(
            "shared = {}\nspecific = {:?}\nempty = {}\n\n",
            s.shared, s.specific, s.empty
        ));
        for r in self.summaries() {
            summary.push_str(&r.to_string());
            summary.push('\n');
        }
        fs::write(dir.join("summary.toml"), summary)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let run_path = dir.join("run.toml");
        let text = fs::read_to_string(&run_path)?;
        let info: RunInfo = toml::from_str(&text).map_err(|e| parse_err(&run_path, e))?;
        let dims: Vec<(usize, usize)> = info.views.iter().map(|v| (v.d, v.l)).collect();
        let transform = read_transform(&dir.join("transform.csv"), &dims)?;
        let paths: Vec<_> = (0..info.chains).map(|c| dir.join(format!("chain_{c}.json"))).collect();
        let chains = match info.model {
            ModelKind::Rmtf => Chains::Relaxed(paths.iter().map(|p| read_json(p)).collect::<Result<_>>()?),
            _ => Chains::Strict(paths.iter().map(|p| read_json(p)).collect::<Result<_>>()?),
        };
        Ok(Self {
            info,
            transform,
            chains,
        })
    }
}
