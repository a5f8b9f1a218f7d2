//! Fit and predict on in-memory collections.

use mtf_core::data::center_and_normalize;
use mtf_core::predict::{
    match_components, posterior_mean_loadings, sign_aligned_mean, two_stage_predict, Prediction, PredictionTask,
    ReportSummary, Target,
};
use mtf_core::simgen::SimTruth;
use mtf_core::{
    run_chains, Collection, Error, HyperParams, Mat, MtfSampler, MtfState, PreprocessTransform, Result, RmtfSampler,
    RmtfState, RngStream, ScaleMode, Schedule,
};

use crate::archive::{Archive, Chains, ModelKind, RunInfo, Scaling, ViewInfo};

/// Everything `fit` needs besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub model: ModelKind,
    pub chains: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub jobs: usize,
    pub preset: String,
    pub scaling: Scaling,
    pub hyper: HyperParams<f64>,
    /// Recorded in the archive.
    pub input: String,
}

/// Preprocesses `raw` as requested.
pub fn preprocess(raw: &Collection<f64>, scaling: Scaling) -> Result<(Collection<f64>, PreprocessTransform<f64>)> {
    match scaling {
        Scaling::None => {
            let dims = raw.views().iter().map(|v| (v.data.n_features(), v.data.n_slabs())).collect();
            Ok((raw.clone(), PreprocessTransform::identity(dims)))
        }
        Scaling::Feature => center_and_normalize(raw, ScaleMode::Feature),
        Scaling::Fiber => center_and_normalize(raw, ScaleMode::Fiber),
    }
}

/// Runs the chains on `raw` and packages them as an archive.
pub fn fit(raw: &Collection<f64>, opts: &FitOptions) -> Result<Archive> {
    let (data, transform) = preprocess(raw, opts.scaling)?;
    let groups = raw.group_index();
    let views = raw
        .views()
        .iter()
        .zip(&groups)
        .map(|(v, &group)| ViewInfo {
            name: v.name.clone(),
            d: v.data.n_features(),
            l: v.data.n_slabs(),
            group,
        })
        .collect();
    let hp = opts.hyper.clone();
    let (chains, origin) = match opts.model {
        ModelKind::Mtf => (
            Chains::Strict(run_chains(opts.chains, opts.jobs, opts.seed, 0, opts.schedule, || {
                MtfSampler::new(&data, hp.clone())
            })?),
            Vec::new(),
        ),
        ModelKind::Gfa => {
            let (flat, origin) = data.unfold_tensors();
            (
                Chains::Strict(run_chains(opts.chains, opts.jobs, opts.seed, 0, opts.schedule, || {
                    MtfSampler::new(&flat, hp.clone())
                })?),
                origin,
            )
        }
        ModelKind::Rmtf => (
            Chains::Relaxed(run_chains(opts.chains, opts.jobs, opts.seed, 0, opts.schedule, || {
                RmtfSampler::new(&data, hp.clone())
            })?),
            Vec::new(),
        ),
    };
    Ok(Archive {
        info: RunInfo {
            model: opts.model,
            k: hp.k,
            chains: opts.chains,
            burnin: opts.schedule.burn_in,
            samples: opts.schedule.n_samples,
            thin: opts.schedule.thin,
            seed: opts.seed,
            preset: opts.preset.clone(),
            scaling: opts.scaling,
            input: opts.input.clone(),
            views,
            origin,
            hyper: hp,
        },
        transform,
        chains,
    })
}

/// Predictions on the original data scale plus the error summary on the
/// preprocessed scale.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictOutput {
    pub prediction: Prediction<f64>,
    pub summary: ReportSummary,
}

/// Two-stage prediction of the masked entries of `test` (original scale).
pub fn predict(
    archive: &Archive,
    test: &Collection<f64>,
    truth: Option<&Collection<f64>>,
    n_stage2_samples: usize,
    seed: u64,
) -> Result<PredictOutput> {
    let tr = &archive.transform;
    let test_pre = tr.apply(test)?;
    let truth_pre = truth.map(|c| tr.apply(c)).transpose()?;
    let gfa = archive.info.model == ModelKind::Gfa;
    let (sampler_test, origin) = if gfa {
        let (flat, origin) = test_pre.unfold_tensors();
        (flat, Some(origin))
    } else {
        (test_pre, None)
    };
    let mut rng = RngStream::new(seed, 0);
    let mut pred = match &archive.chains {
        Chains::Strict(c) => two_stage_predict(&PredictionTask::from_chains(c, &sampler_test, n_stage2_samples), &mut rng)?,
        Chains::Relaxed(c) => two_stage_predict(&PredictionTask::from_chains(c, &sampler_test, n_stage2_samples), &mut rng)?,
    };
    if let Some(origin) = origin {
        for t in pred.targets.iter_mut() {
            let (view, slab) = origin[t.view];
            *t = Target { view, slab, ..*t };
        }
    }
    let summary = ReportSummary::compute(&pred, truth_pre.as_ref())?;
    Ok(PredictOutput {
        prediction: pred.inverse_transform(tr),
        summary,
    })
}

/// Rejects a test collection whose views do not match the archive.
pub fn check_test_views(archive: &Archive, test: &Collection<f64>) -> Result<()> {
    let info = &archive.info;
    if test.n_views() != info.views.len() {
        return Err(Error::Shape(format!(
            "archive has {} views, test collection {}",
            info.views.len(),
            test.n_views()
        )));
    }
    for (t, (v, g)) in test.views().iter().zip(test.group_index()).enumerate() {
        let vi = &info.views[t];
        if (v.data.n_features(), v.data.n_slabs(), g) != (vi.d, vi.l, vi.group) {
            return Err(Error::Shape(format!("test view {t} does not match the trained view")));
        }
    }
    Ok(())
}

/// Posterior mean loadings of input view `t` from one chain, on the original
/// data scale. GFA slab loadings are sign-aligned and averaged over slabs.
pub fn chain_loadings(archive: &Archive, chain: usize, t: usize) -> Result<Mat<f64>> {
    let tr = &archive.transform;
    let unscale = |m: Mat<f64>, l: usize| {
        let mut m = m;
        for d in 0..m.rows() {
            let s = tr.scale(t, d, l);
            for c in 0..m.cols() {
                m[(d, c)] *= s;
            }
        }
        m
    };
    match &archive.chains {
        Chains::Strict(c) => {
            let snaps: Vec<&MtfState<f64>> = c[chain].snapshots.iter().collect();
            if archive.info.origin.is_empty() {
                return Ok(unscale(posterior_mean_loadings(&snaps, t)?, 0));
            }
            let mut slabs = Vec::new();
            for (s, &(view, l)) in archive.info.origin.iter().enumerate() {
                if view == t {
                    slabs.push(unscale(posterior_mean_loadings(&snaps, s)?, l));
                }
            }
            let first = slabs.first().ok_or_else(|| Error::InvalidParameter(format!("no view {t} in archive")))?;
            let mut out = Mat::zeros(first.rows(), first.cols());
            for k in 0..first.cols() {
                let cols: Vec<Vec<f64>> = slabs.iter().map(|m| m.col(k)).collect();
                out.set_col(k, &sign_aligned_mean(&cols));
            }
            Ok(out)
        }
        Chains::Relaxed(c) => {
            let snaps: Vec<&RmtfState<f64>> = c[chain].snapshots.iter().collect();
            Ok(unscale(posterior_mean_loadings(&snaps, t)?, 0))
        }
    }
}

/// Best absolute correlation of every tensor-specific true component with the
/// best chain's loadings in the tensor view(s) it is active in.
pub fn tensor_specific_correlations(archive: &Archive, truth: &SimTruth<f64>) -> Result<Vec<f64>> {
    let chain = archive.best_chain();
    let n_views = truth.h.len();
    if n_views != archive.info.views.len() {
        return Err(Error::Shape("truth and archive differ in view count".into()));
    }
    let mut out = Vec::new();
    for (t, vi) in archive.info.views.iter().enumerate() {
        if vi.l < 2 {
            continue;
        }
        let ks: Vec<usize> = (0..truth.h[t].len())
            .filter(|&k| truth.h[t][k] && (0..n_views).all(|s| s == t || !truth.h[s][k]))
            .collect();
        if ks.is_empty() {
            continue;
        }
        let loadings = chain_loadings(archive, chain, t)?;
        let true_vs: Vec<Vec<f64>> = ks.iter().map(|&k| truth.loading(t, k)).collect();
        out.extend(match_components(&true_vs, &loadings)?);
    }
    Ok(out)
}
