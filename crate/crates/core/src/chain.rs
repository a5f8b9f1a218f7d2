//! Hyperparameters, the sweep schedule and the generic chain driver shared by
//! both samplers.

use serde::{Deserialize, Serialize};

use crate::dist::RngStream;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Prior on the per-view (or per-slab) noise precision `τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoisePrior<F> {
    /// `Gamma(shape, rate)` with the rate chosen so the prior mean of `τ`
    /// equals `(1 + snr) / var`, where `var` is the observed per-element
    /// variance of the view. `snr = 1` puts half the variance in noise.
    Snr { shape: F, snr: F },
    /// As `Snr`, with shape `conf · n_obs / 2` so the prior carries `conf`
    /// times the weight of the view's own observations.
    SnrScaled { conf: F, snr: F },
    /// Fixed `Gamma(shape, rate)`.
    Fixed { shape: F, rate: F },
}

impl<F: Scalar> NoisePrior<F> {
    /// `(shape, rate)` for a view with `n_obs` observed entries of variance
    /// `var`.
    pub fn resolve(&self, var: F, n_obs: usize) -> (F, F) {
        let var = if var > F::zero() { var } else { F::one() };
        match *self {
            NoisePrior::Snr { shape, snr } => (shape, shape * var / (F::one() + snr)),
            NoisePrior::SnrScaled { conf, snr } => {
                let shape = (conf * F::of(n_obs as f64) / F::of(2.0)).max(F::min_positive_value());
                (shape, shape * var / (F::one() + snr))
            }
            NoisePrior::Fixed { shape, rate } => (shape, rate),
        }
    }
}

/// Granularity of the rMTF slab-similarity precision `λ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    #[default]
    Global,
    PerComponent,
    PerSlab,
}

/// Deliberate sampler defects used to show the joint-distribution test has
/// power. Never enable outside of diagnostics.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Noise precision drawn with half the correct rate.
    HalvedTauRate,
    /// Spike-and-slab log-odds missing the `½ log α` normalizer.
    DroppedSlabNormalizer,
    /// Third-mode conditional missing the `N(0, 1)` prior precision.
    DroppedUPrior,
    /// rMTF `λ` drawn with twice the correct shape increment.
    DoubledLambdaShape,
}

/// Model priors and the component budget `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams<F> {
    pub k: usize,
    pub a_pi: F,
    pub b_pi: F,
    pub a_alpha: F,
    pub b_alpha: F,
    /// rMTF ARD prior on tensor-view `V`. A vague prior lets `V` of a
    /// component that is off in every slab drift without bound.
    pub a_beta: F,
    pub b_beta: F,
    /// rMTF slab-similarity prior.
    pub a_lambda: F,
    pub b_lambda: F,
    pub noise: NoisePrior<F>,
    pub lambda_mode: LambdaMode,
    #[serde(skip)]
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

impl<F: Scalar> HyperParams<F> {
    /// Symmetric uninformative `π` and `λ` priors, a `10⁻³` ARD prior on
    /// matrix loadings, a unit ARD prior on tensor `V` and a shape-1 noise
    /// prior centered at SNR 1.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            a_pi: F::one(),
            b_pi: F::one(),
            a_alpha: F::of(1e-3),
            b_alpha: F::of(1e-3),
            a_beta: F::one(),
            b_beta: F::one(),
            a_lambda: F::one(),
            b_lambda: F::one(),
            noise: NoisePrior::Snr {
                shape: F::one(),
                snr: F::one(),
            },
            lambda_mode: LambdaMode::Global,
            fault: None,
        }
    }

    /// Strong regularization: `a^π = 1/b^π = 10⁻³` and a peaked SNR-1 noise
    /// prior.
    pub fn strong_regularization(k: usize) -> Self {
        Self {
            a_pi: F::of(1e-3),
            b_pi: F::of(1e3),
            noise: NoisePrior::Snr {
                shape: F::of(100.0),
                snr: F::one(),
            },
            ..Self::new(k)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParameter("component budget K must be >= 1".into()));
        }
        let named = [
            ("a_pi", self.a_pi),
            ("b_pi", self.b_pi),
            ("a_alpha", self.a_alpha),
            ("b_alpha", self.b_alpha),
            ("a_beta", self.a_beta),
            ("b_beta", self.b_beta),
            ("a_lambda", self.a_lambda),
            ("b_lambda", self.b_lambda),
        ];
        for (name, x) in named {
            if !(x > F::zero() && x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")));
            }
        }
        let (a, b) = match self.noise {
            NoisePrior::Snr { shape, snr } => (shape, snr + F::one()),
            NoisePrior::SnrScaled { conf, snr } => (conf, snr + F::one()),
            NoisePrior::Fixed { shape, rate } => (shape, rate),
        };
        if !(a > F::zero() && b > F::zero()) {
            return Err(Error::InvalidParameter("noise prior must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn has_fault(&self, f: Fault) -> bool {
        self.fault == Some(f)
    }
}

/// Burn-in, retained snapshot count and thinning of one chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub burn_in: usize,
    pub n_samples: usize,
    pub thin: usize,
}

impl Schedule {
    pub fn new(burn_in: usize, n_samples: usize, thin: usize) -> Result<Self> {
        if thin == 0 {
            return Err(Error::InvalidParameter("thinning must be >= 1".into()));
        }
        Ok(Self {
            burn_in,
            n_samples,
            thin,
        })
    }

    pub fn total_sweeps(&self) -> usize {
        self.burn_in + self.n_samples * self.thin
    }

    /// 1-based sweep index after which snapshot `i` is stored.
    pub fn snapshot_sweep(&self, i: usize) -> usize {
        self.burn_in + (i + 1) * self.thin
    }

    pub fn is_snapshot(&self, sweep: usize) -> bool {
        sweep > self.burn_in && (sweep - self.burn_in) % self.thin == 0
    }
}

impl Default for Schedule {
    /// 3000 burn-in sweeps, 40 snapshots, thinning 10.
    fn default() -> Self {
        Self {
            burn_in: 3000,
            n_samples: 40,
            thin: 10,
        }
    }
}

/// Quantities recorded after every sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord<F> {
    pub log_joint: F,
    /// Training mean squared error per view over observed entries.
    pub mse: Vec<F>,
}

/// Per-sweep traces of one chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
pub struct Trace<F> {
    pub sweeps: Vec<usize>,
    pub log_joint: Vec<F>,
    /// `mse[sweep][view]`.
    pub mse: Vec<Vec<F>>,
}

impl<F: Scalar> Trace<F> {
    pub fn push(&mut self, sweep: usize, rec: SweepRecord<F>) {
        self.sweeps.push(sweep);
        self.log_joint.push(rec.log_joint);
        self.mse.push(rec.mse);
    }

    pub fn len(&self) -> usize {
        self.sweeps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sweeps.is_empty()
    }

    pub fn n_views(&self) -> usize {
        self.mse.first().map_or(0, Vec::len)
    }

    /// MSE trace of view `t`.
    pub fn mse_of(&self, t: usize) -> Vec<F> {
        self.mse.iter().map(|row| row[t]).collect()
    }
}

/// Thinned post-burn-in snapshots of one chain plus its traces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: serde::de::DeserializeOwned, F: Scalar"))]
pub struct PosteriorSamples<S, F> {
    pub chain: usize,
    pub schedule: Schedule,
    pub snapshots: Vec<S>,
    /// Sweep index of each snapshot.
    pub sweeps: Vec<usize>,
    pub trace: Trace<F>,
}

impl<S, F> PosteriorSamples<S, F> {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

/// A Gibbs sampler over some state type.
pub trait GibbsSampler<F: Scalar> {
    type State: Clone + Send;

    fn init(&mut self, rng: &mut RngStream) -> Result<Self::State>;

    /// One full scan; returns the post-sweep log joint and training MSEs.
    fn sweep(&mut self, state: &mut Self::State, rng: &mut RngStream) -> Result<SweepRecord<F>>;
}

/// Runs one chain: `schedule.total_sweeps()` sweeps from a fresh state,
/// keeping a snapshot every `thin` sweeps after burn-in.
pub fn run_chain<F, S>(
    sampler: &mut S,
    schedule: Schedule,
    rng: &mut RngStream,
    chain: usize,
) -> Result<PosteriorSamples<S::State, F>>
where
    F: Scalar,
    S: GibbsSampler<F>,
{
    let mut state = sampler.init(rng)?;
    let total = schedule.total_sweeps();
    let mut out = PosteriorSamples {
        chain,
        schedule,
        snapshots: Vec::with_capacity(schedule.n_samples),
        sweeps: Vec::with_capacity(schedule.n_samples),
        trace: Trace::default(),
    };
    for sweep in 1..=total {
        let rec = sampler
            .sweep(&mut state, rng)
            .map_err(|e| e.at_sweep(sweep, format!("chain {chain}")))?;
        out.trace.push(sweep, rec);
        if schedule.is_snapshot(sweep) {
            out.snapshots.push(state.clone());
            out.sweeps.push(sweep);
        }
    }
    Ok(out)
}

/// Runs `n_chains` independent chains on up to `jobs` threads. Chain `c`
/// draws from stream `(seed, rep, c)`, so results do not depend on `jobs`.
pub fn run_chains<F, S, M>(
    n_chains: usize,
    jobs: usize,
    seed: u64,
    rep: u32,
    schedule: Schedule,
    make_sampler: M,
) -> Result<Vec<PosteriorSamples<S::State, F>>>
where
    F: Scalar,
    S: GibbsSampler<F>,
    M: Fn() -> Result<S> + Sync,
{
    use rayon::prelude::*;
    let run = |c: usize| -> Result<PosteriorSamples<S::State, F>> {
        let mut rng = RngStream::for_chain(seed, rep, c as u32);
        let mut sampler = make_sampler()?;
        run_chain(&mut sampler, schedule, &mut rng, c)
    };
    if jobs <= 1 || n_chains <= 1 {
        return (0..n_chains).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| (0..n_chains).into_par_iter().map(run).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_schedule_without_burn_in() {
        let s = Schedule::new(0, 3, 2).unwrap();
        assert_eq!(s.total_sweeps(), 6);
        let snaps: Vec<usize> = (1..=6).filter(|&i| s.is_snapshot(i)).collect();
        assert_eq!(snaps, vec![2, 4, 6]);
        assert_eq!((0..3).map(|i| s.snapshot_sweep(i)).collect::<Vec<_>>(), snaps);
    }

    #[test]
    fn zero_thinning_rejected() {
        assert!(Schedule::new(1, 1, 0).is_err());
    }

    #[test]
    fn snr_prior_centers_on_half_noise() {
        let p = NoisePrior::Snr { shape: 1.0, snr: 1.0 };
        let (a, b) = p.resolve(1.0f64, 100);
        assert_eq!((a, b), (1.0, 0.5));
        assert_eq!(a / b, 2.0);
        let p = NoisePrior::SnrScaled { conf: 1.0, snr: 1.0 };
        assert_eq!(p.resolve(1.0f64, 100), (50.0, 25.0));
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(HyperParams::<f64>::new(0).validate().is_err());
        assert!(HyperParams::<f64>::new(3).validate().is_ok());
        let mut hp = HyperParams::<f64>::new(3);
        hp.b_alpha = 0.0;
        assert!(hp.validate().is_err());
        let s = HyperParams::<f64>::strong_regularization(3);
        assert_eq!(s.a_pi * s.b_pi, 1.0);
    }
}
