//! Two-stage out-of-sample prediction.
//!
//! Loading-side parameters are frozen at each stored training snapshot. The
//! test latents are then drawn from their exact Gaussian conditional given the
//! observed test entries, and every target entry is predicted by its mean
//! given those latents. Predictions are averaged over snapshots and draws.

mod report;
#[cfg(test)]
mod tests;

use std::borrow::Cow;

use rand::RngCore;

use crate::chain::PosteriorSamples;
use crate::data::{Collection, PreprocessTransform};
use crate::dist::MvnPrecision;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::mtf::MtfState;
use crate::rmtf::RmtfState;
use crate::scalar::Scalar;

pub use report::{write_report, ReportSummary};

/// Loading-side view of a posterior snapshot.
pub trait LoadingProvider<F: Scalar> {
    fn n_components(&self) -> usize;
    fn n_views(&self) -> usize;
    fn n_features(&self, t: usize) -> usize;
    fn n_slabs(&self, t: usize) -> usize;
    fn group_of(&self, t: usize) -> Option<usize>;
    /// `D_t × K` loadings of slab `l`.
    fn slab_loadings(&self, t: usize, l: usize) -> Cow<'_, Mat<F>>;
    fn noise_precision(&self, t: usize, l: usize) -> F;
    /// One `D_t × K` loading matrix summarizing the view.
    fn view_loadings(&self, t: usize) -> Mat<F>;
}

impl<F: Scalar> LoadingProvider<F> for MtfState<F> {
    fn n_components(&self) -> usize {
        MtfState::n_components(self)
    }
    fn n_views(&self) -> usize {
        MtfState::n_views(self)
    }
    fn n_features(&self, t: usize) -> usize {
        self.v[t].rows()
    }
    fn n_slabs(&self, t: usize) -> usize {
        self.group_of[t].map_or(1, |g| self.u[g].rows())
    }
    fn group_of(&self, t: usize) -> Option<usize> {
        self.group_of[t]
    }
    fn slab_loadings(&self, t: usize, l: usize) -> Cow<'_, Mat<F>> {
        match self.group_of[t] {
            Some(_) => Cow::Owned(MtfState::slab_loadings(self, t, l)),
            None => Cow::Borrowed(&self.v[t]),
        }
    }
    fn noise_precision(&self, t: usize, _l: usize) -> F {
        self.tau[t]
    }
    fn view_loadings(&self, t: usize) -> Mat<F> {
        self.v[t].clone()
    }
}

impl<F: Scalar> LoadingProvider<F> for RmtfState<F> {
    fn n_components(&self) -> usize {
        RmtfState::n_components(self)
    }
    fn n_views(&self) -> usize {
        RmtfState::n_views(self)
    }
    fn n_features(&self, t: usize) -> usize {
        self.w[t][0].rows()
    }
    fn n_slabs(&self, t: usize) -> usize {
        self.w[t].len()
    }
    fn group_of(&self, t: usize) -> Option<usize> {
        self.group_of[t]
    }
    fn slab_loadings(&self, t: usize, l: usize) -> Cow<'_, Mat<F>> {
        Cow::Borrowed(&self.w[t][l])
    }
    fn noise_precision(&self, t: usize, l: usize) -> F {
        self.tau[t][l]
    }
    /// Sign-aligned slab average of `W`.
    fn view_loadings(&self, t: usize) -> Mat<F> {
        let ws = &self.w[t];
        let (d, k) = (ws[0].rows(), ws[0].cols());
        let mut out = Mat::zeros(d, k);
        for c in 0..k {
            let cols: Vec<Vec<F>> = ws.iter().map(|w| w.col(c)).collect();
            out.set_col(c, &sign_aligned_mean(&cols));
        }
        out
    }
}

/// One target entry: `x[view][sample, feature, slab]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Target {
    pub view: usize,
    pub sample: usize,
    pub feature: usize,
    pub slab: usize,
}

/// Frozen training snapshots plus the test collection whose masked entries
/// are the targets.
#[derive(Clone, Debug)]
pub struct PredictionTask<'a, S, F> {
    pub trained: Vec<&'a S>,
    pub test: &'a Collection<F>,
    /// Latent draws per snapshot.
    pub n_stage2_samples: usize,
}

impl<'a, S, F> PredictionTask<'a, S, F> {
    /// Pools the snapshots of all chains.
    pub fn from_chains(
        chains: &'a [PosteriorSamples<S, F>],
        test: &'a Collection<F>,
        n_stage2_samples: usize,
    ) -> Self {
        Self {
            trained: chains.iter().flat_map(|c| c.snapshots.iter()).collect(),
            test,
            n_stage2_samples,
        }
    }
}

/// Predicted mean and posterior predictive std of every target.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<F> {
    pub targets: Vec<Target>,
    pub mean: Vec<F>,
    pub std: Vec<F>,
}

impl<F: Scalar> Prediction<F> {
    /// Target values looked up in a fully observed collection.
    pub fn truth(&self, truth: &Collection<F>) -> Result<Vec<F>> {
        self.targets
            .iter()
            .map(|t| {
                let v = truth.views().get(t.view).ok_or_else(|| {
                    Error::Shape(format!("truth has no view {}", t.view))
                })?;
                let (n, d, l) = v.data.dims();
                if t.sample >= n || t.feature >= d || t.slab >= l {
                    return Err(Error::Shape(format!(
                        "target ({}, {}, {}) outside a {n}x{d}x{l} view",
                        t.sample, t.feature, t.slab
                    )));
                }
                Ok(v.data.tensor().get(t.sample, t.feature, t.slab))
            })
            .collect()
    }

    pub fn mse(&self, truth: &Collection<F>) -> Result<F> {
        let y = self.truth(truth)?;
        mse(&self.mean, &y, &vec![true; y.len()])
    }

    pub fn rmse(&self, truth: &Collection<F>) -> Result<F> {
        Ok(self.mse(truth)?.sqrt())
    }

    /// Maps means and stds back to the original data scale.
    pub fn inverse_transform(&self, tr: &PreprocessTransform<F>) -> Self {
        let mut out = self.clone();
        for (i, t) in self.targets.iter().enumerate() {
            out.mean[i] = tr.inverse_value(t.view, t.feature, t.slab, self.mean[i]);
            out.std[i] = self.std[i] * tr.scale(t.view, t.feature, t.slab).abs();
        }
        out
    }
}

fn check_compatible<F: Scalar, S: LoadingProvider<F>>(s: &S, test: &Collection<F>) -> Result<()> {
    if s.n_views() != test.n_views() {
        return Err(Error::Shape(format!(
            "trained on {} views, test has {}",
            s.n_views(),
            test.n_views()
        )));
    }
    let groups = test.group_index();
    for (t, view) in test.views().iter().enumerate() {
        let (_, d, l) = view.data.dims();
        if d != s.n_features(t) || l != s.n_slabs(t) {
            return Err(Error::Shape(format!(
                "view {t}: trained {}x{}, test {d}x{l}",
                s.n_features(t),
                s.n_slabs(t)
            )));
        }
        if groups[t] != s.group_of(t) {
            return Err(Error::Shape(format!("view {t}: third-mode grouping differs")));
        }
    }
    Ok(())
}

/// Two-stage prediction of every masked test entry.
pub fn two_stage_predict<F, S, R>(task: &PredictionTask<'_, S, F>, rng: &mut R) -> Result<Prediction<F>>
where
    F: Scalar,
    S: LoadingProvider<F>,
    R: RngCore + ?Sized,
{
    let test = task.test;
    if task.trained.is_empty() {
        return Err(Error::InvalidParameter("no training snapshots".into()));
    }
    if task.n_stage2_samples == 0 {
        return Err(Error::InvalidParameter("stage-2 sample count must be >= 1".into()));
    }
    let k = task.trained[0].n_components();
    for s in &task.trained {
        if s.n_components() != k {
            return Err(Error::Shape("snapshots differ in component count".into()));
        }
        check_compatible(*s, test)?;
    }
    let n = test.n_samples();
    let mut targets = Vec::new();
    let mut by_sample: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, view) in test.views().iter().enumerate() {
        for (i, d, l) in view.data.masked_entries() {
            by_sample[i].push(targets.len());
            targets.push(Target {
                view: t,
                sample: i,
                feature: d,
                slab: l,
            });
        }
    }
    if targets.is_empty() {
        return Err(Error::InvalidParameter("test collection has no masked targets".into()));
    }
    let mut masked_count = vec![0usize; n];
    let mut observed_count = vec![0usize; n];
    for view in test.views() {
        let m = &view.data;
        for i in 0..n {
            let obs = m.sample_mask(i).iter().filter(|&&o| o).count();
            observed_count[i] += obs;
            masked_count[i] += m.sample_mask(i).len() - obs;
        }
    }

    let mut sum = vec![0.0f64; targets.len()];
    let mut sumsq = vec![0.0f64; targets.len()];
    let mut noise_var = vec![0.0f64; targets.len()];
    let mut z = vec![F::zero(); k];
    for s in &task.trained {
        let n_views = test.n_views();
        let loads: Vec<Vec<Cow<'_, Mat<F>>>> = (0..n_views)
            .map(|t| (0..s.n_slabs(t)).map(|l| s.slab_loadings(t, l)).collect())
            .collect();
        let taus: Vec<Vec<F>> = (0..n_views)
            .map(|t| (0..s.n_slabs(t)).map(|l| s.noise_precision(t, l)).collect())
            .collect();
        let mut full = Mat::identity(k);
        for t in 0..n_views {
            for (l, b) in loads[t].iter().enumerate() {
                full.add_scaled(taus[t][l], &b.gram());
            }
        }
        for i in 0..n {
            let subtract = masked_count[i] < observed_count[i];
            let mut prec = if subtract { full.clone() } else { Mat::identity(k) };
            let mut h = vec![F::zero(); k];
            for (t, view) in test.views().iter().enumerate() {
                let m = &view.data;
                for (l, b) in loads[t].iter().enumerate() {
                    let tau = taus[t][l];
                    let x = m.tensor().fiber(i, l);
                    for (d, &o) in m.fiber_mask(i, l).iter().enumerate() {
                        let row = b.row(d);
                        if o {
                            for c in 0..k {
                                h[c] += tau * x[d] * row[c];
                            }
                        }
                        if o != subtract {
                            let sign = if subtract { -tau } else { tau };
                            for a in 0..k {
                                let ra = sign * row[a];
                                for c in 0..=a {
                                    prec[(a, c)] += ra * row[c];
                                }
                            }
                        }
                    }
                }
            }
            let mvn = MvnPrecision::new(&prec)?;
            for &j in &by_sample[i] {
                let tg = targets[j];
                noise_var[j] += 1.0 / taus[tg.view][tg.slab].to_f64_lossy();
            }
            for _ in 0..task.n_stage2_samples {
                mvn.draw_into(&h, rng, &mut z);
                for &j in &by_sample[i] {
                    let tg = targets[j];
                    let row = loads[tg.view][tg.slab].row(tg.feature);
                    let p: F = (0..k).map(|c| z[c] * row[c]).sum();
                    let p = p.to_f64_lossy();
                    sum[j] += p;
                    sumsq[j] += p * p;
                }
            }
        }
    }
    let n_snap = task.trained.len() as f64;
    let n_draws = n_snap * task.n_stage2_samples as f64;
    let mut mean = Vec::with_capacity(targets.len());
    let mut std = Vec::with_capacity(targets.len());
    for j in 0..targets.len() {
        let m = sum[j] / n_draws;
        let var = (sumsq[j] / n_draws - m * m).max(0.0);
        mean.push(F::of(m));
        std.push(F::of((var + noise_var[j] / n_snap).sqrt()));
    }
    Ok(Prediction { targets, mean, std })
}

/// Mean squared error over entries with `mask` set.
pub fn mse<F: Scalar>(pred: &[F], truth: &[F], mask: &[bool]) -> Result<F> {
    if pred.len() != truth.len() || pred.len() != mask.len() {
        return Err(Error::Shape(format!(
            "prediction {}, truth {}, mask {}",
            pred.len(),
            truth.len(),
            mask.len()
        )));
    }
    let mut s = F::zero();
    let mut m = 0usize;
    for ((&p, &y), &on) in pred.iter().zip(truth).zip(mask) {
        if on {
            s += (p - y) * (p - y);
            m += 1;
        }
    }
    if m == 0 {
        return Err(Error::InvalidParameter("empty mask".into()));
    }
    Ok(s / F::of(m as f64))
}

/// Root mean squared error over entries with `mask` set.
pub fn rmse<F: Scalar>(pred: &[F], truth: &[F], mask: &[bool]) -> Result<F> {
    Ok(mse(pred, truth, mask)?.sqrt())
}

/// Elementwise mean of vectors after flipping each to agree in sign with the
/// one of largest norm.
pub fn sign_aligned_mean<F: Scalar>(cols: &[Vec<F>]) -> Vec<F> {
    let Some(first) = cols.first() else {
        return Vec::new();
    };
    let dot = |a: &[F], b: &[F]| -> F { a.iter().zip(b).map(|(&x, &y)| x * y).sum() };
    let reference = cols
        .iter()
        .max_by(|a, b| dot(a, a).partial_cmp(&dot(b, b)).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(first);
    let mut out = vec![F::zero(); first.len()];
    for c in cols {
        let sign = if dot(c, reference) < F::zero() { -F::one() } else { F::one() };
        for (o, &x) in out.iter_mut().zip(c) {
            *o += sign * x;
        }
    }
    let inv = F::one() / F::of(cols.len() as f64);
    out.iter_mut().for_each(|o| *o *= inv);
    out
}

/// Posterior mean of the view's loadings, each component sign-aligned across
/// snapshots.
pub fn posterior_mean_loadings<F: Scalar, S: LoadingProvider<F>>(snapshots: &[&S], t: usize) -> Result<Mat<F>> {
    let Some(first) = snapshots.first() else {
        return Err(Error::InvalidParameter("no snapshots".into()));
    };
    let mats: Vec<Mat<F>> = snapshots.iter().map(|s| s.view_loadings(t)).collect();
    let (d, k) = (first.n_features(t), first.n_components());
    let mut out = Mat::zeros(d, k);
    for c in 0..k {
        let cols: Vec<Vec<F>> = mats.iter().map(|m| m.col(c)).collect();
        out.set_col(c, &sign_aligned_mean(&cols));
    }
    Ok(out)
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Best absolute Pearson correlation of every true loading vector with the
/// columns of `inferred`. Zero-variance inferred columns are skipped.
pub fn match_components<F: Scalar>(true_loadings: &[Vec<F>], inferred: &Mat<F>) -> Result<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..inferred.cols())
        .map(|c| inferred.col(c).iter().map(|x| x.to_f64_lossy()).collect())
        .collect();
    true_loadings
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if v.len() != inferred.rows() {
                return Err(Error::Shape(format!(
                    "true loading {i} has length {}, inferred has {} rows",
                    v.len(),
                    inferred.rows()
                )));
            }
            let v: Vec<f64> = v.iter().map(|x| x.to_f64_lossy()).collect();
            if pearson(&v, &v).is_none() {
                return Err(Error::InvalidParameter(format!("true loading {i} has zero variance")));
            }
            Ok(cols
                .iter()
                .filter_map(|c| pearson(&v, c))
                .fold(0.0f64, |m, r| m.max(r.abs())))
        })
        .collect()
}
