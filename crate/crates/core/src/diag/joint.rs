//! Joint-distribution test of a Gibbs sampler: moments of parameters and
//! data drawn forward from the model (marginal-conditional) are compared
//! with those visited by alternating one sweep of the sampler with a fresh
//! data draw (successive-conditional). Both simulators target the same joint
//! distribution exactly when every conditional is correct.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::{HyperParams, NoisePrior};
use crate::data::{Collection, MaskedTensor3, Tensor3, View};
use crate::diag::geweke::batch_means_variance;
use crate::dist::RngStream;
use crate::error::Result;
use crate::scalar::Scalar;

/// Model whose prior can be simulated and whose sampler can be stepped.
pub trait JointModel {
    type State;

    fn prior_draw(&self, rng: &mut RngStream) -> Result<Self::State>;
    fn data_draw(&self, state: &Self::State, rng: &mut RngStream) -> Result<Collection<f64>>;
    fn gibbs_step(&self, state: &mut Self::State, data: &Collection<f64>, rng: &mut RngStream) -> Result<()>;
    fn statistic_names(&self) -> Vec<String>;
    fn statistics(&self, state: &Self::State, data: &Collection<f64>) -> Vec<f64>;
}

/// Sizes of the tiny test collection: one `N × D` matrix and one
/// `N × D × L` tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointSizes {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    /// Mask a fixed, row-varying subset of entries in both views.
    pub masked: bool,
}

impl Default for JointSizes {
    fn default() -> Self {
        Self {
            n: 4,
            d: 3,
            l: 2,
            masked: false,
        }
    }
}

impl JointSizes {
    /// Observation pattern of view `t`.
    pub fn observed(&self, t: usize, n: usize, d: usize, l: usize) -> bool {
        !self.masked || (n + 2 * d + 3 * l + t) % 4 != 0
    }

    pub(crate) fn collection(&self, values: [Tensor3<f64>; 2]) -> Collection<f64> {
        let [m, t] = values;
        Collection::ungrouped(vec![
            View::new("matrix", MaskedTensor3::with_mask_fn(m, |n, d, l| self.observed(0, n, d, l))),
            View::new("tensor", MaskedTensor3::with_mask_fn(t, |n, d, l| self.observed(1, n, d, l))),
        ])
    }
}

/// Informative priors under which every tested moment is finite.
pub fn joint_test_hypers(k: usize) -> HyperParams<f64> {
    HyperParams {
        a_pi: 3.0,
        b_pi: 2.0,
        a_alpha: 6.0,
        b_alpha: 5.0,
        a_beta: 6.0,
        b_beta: 5.0,
        a_lambda: 6.0,
        b_lambda: 5.0,
        noise: NoisePrior::Fixed { shape: 6.0, rate: 5.0 },
        ..HyperParams::new(k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointStatistic {
    pub name: String,
    pub forward_mean: f64,
    pub gibbs_mean: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub statistics: Vec<JointStatistic>,
    /// Two-sided Bonferroni-corrected critical value.
    pub threshold: f64,
    pub n_iter: usize,
}

impl JointReport {
    pub fn passed(&self) -> bool {
        self.statistics.iter().all(|s| s.z.abs() < self.threshold)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.statistics.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<&JointStatistic> {
        self.statistics.iter().find(|s| s.name == name)
    }
}

/// Critical `|z|` for family-wise level `alpha` over `m` two-sided tests.
pub fn bonferroni_threshold(alpha: f64, m: usize) -> f64 {
    let norm = Normal::new(0.0, 1.0).expect("standard normal");
    norm.inverse_cdf(1.0 - alpha / (2.0 * m as f64))
}

/// Runs both simulators for `n_iter` draws each and scores every statistic.
pub fn joint_distribution_test<M: JointModel>(
    model: &M,
    n_iter: usize,
    seed: u64,
) -> Result<JointReport> {
    let names = model.statistic_names();
    let m = names.len();
    let mut rng = RngStream::new(seed, 0);
    let mut forward: Vec<Vec<f64>> = vec![Vec::with_capacity(n_iter); m];
    for _ in 0..n_iter {
        let st = model.prior_draw(&mut rng)?;
        let data = model.data_draw(&st, &mut rng)?;
        for (acc, g) in forward.iter_mut().zip(model.statistics(&st, &data)) {
            acc.push(g);
        }
    }
    let mut rng = RngStream::new(seed, 1);
    let mut gibbs: Vec<Vec<f64>> = vec![Vec::with_capacity(n_iter); m];
    let mut st = model.prior_draw(&mut rng)?;
    let mut data = model.data_draw(&st, &mut rng)?;
    for _ in 0..n_iter {
        model.gibbs_step(&mut st, &data, &mut rng)?;
        data = model.data_draw(&st, &mut rng)?;
        for (acc, g) in gibbs.iter_mut().zip(model.statistics(&st, &data)) {
            acc.push(g);
        }
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let statistics = names
        .into_iter()
        .zip(forward.iter().zip(&gibbs))
        .map(|(name, (f, g))| {
            let (mf, mg) = (mean(f), mean(g));
            let vf = f.iter().map(|x| (x - mf).powi(2)).sum::<f64>() / (f.len() - 1) as f64;
            let se = (vf / f.len() as f64 + batch_means_variance(g) / g.len() as f64).sqrt();
            let z = if se > 0.0 {
                (mf - mg) / se
            } else if mf == mg {
                0.0
            } else {
                f64::INFINITY
            };
            JointStatistic {
                name,
                forward_mean: mf,
                gibbs_mean: mg,
                z,
            }
        })
        .collect();
    Ok(JointReport {
        statistics,
        threshold: bonferroni_threshold(0.005, m),
        n_iter,
    })
}

/// Mean and mean square of a block of values.
pub(crate) fn moments(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut s, mut s2, mut n) = (0.0, 0.0, 0usize);
    for x in xs {
        s += x;
        s2 += x * x;
        n += 1;
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (s / n as f64, s2 / n as f64)
    }
}

/// Draws `x ~ N(mean, 1/τ)` at every entry of a view.
pub(crate) fn noisy(mean: &Tensor3<f64>, tau: impl Fn(usize) -> f64, rng: &mut RngStream) -> Tensor3<f64> {
    let (n, d, l) = mean.dims();
    Tensor3::from_fn(n, d, l, |i, j, s| mean.get(i, j, s) + f64::standard_normal(rng) / tau(s).sqrt())
}
