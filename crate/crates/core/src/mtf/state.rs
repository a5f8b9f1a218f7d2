use crate::chain::HyperParams;
use crate::data::{Collection, Tensor3};
use crate::dist::{beta_ln_pdf, gamma_ln_pdf, normal_ln_pdf};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// All latent variables of one strict-trilinear chain.
///
/// `v[t]` columns with `h[t][k] == false` are exactly zero. Matrix views have
/// no third-mode factor; their `u` is implicitly the constant 1.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
pub struct MtfState<F> {
    /// `N × K` sample latents.
    pub z: Mat<F>,
    /// Per view, `D_t × K` loadings.
    pub v: Vec<Mat<F>>,
    /// Per third-mode group, `L_g × K` slab latents.
    pub u: Vec<Mat<F>>,
    /// Per view, component activity.
    pub h: Vec<Vec<bool>>,
    pub pi: Vec<F>,
    /// Per view, `D_t × K` ARD precisions.
    pub alpha: Vec<Mat<F>>,
    /// Per view noise precision.
    pub tau: Vec<F>,
    /// Third-mode group of every view (`None` for matrices).
    pub group_of: Vec<Option<usize>>,
}

impl<F: Scalar> MtfState<F> {
    pub fn n_components(&self) -> usize {
        self.z.cols()
    }

    pub fn n_views(&self) -> usize {
        self.v.len()
    }

    /// Third-mode factor of view `t`, or a `1 × K` matrix of ones for a
    /// matrix view.
    pub fn u_of(&self, t: usize) -> std::borrow::Cow<'_, Mat<F>> {
        match self.group_of[t] {
            Some(g) => std::borrow::Cow::Borrowed(&self.u[g]),
            None => std::borrow::Cow::Owned(Mat::filled(1, self.n_components(), F::one())),
        }
    }

    /// `Σ_k z_{:,k} ∘ v^(t)_{:,k} ∘ u^(t)_{:,k}`.
    pub fn reconstruct_mean(&self, t: usize) -> Tensor3<F> {
        let u = self.u_of(t);
        let v = &self.v[t];
        let k = self.n_components();
        Tensor3::from_fn(self.z.rows(), v.rows(), u.rows(), |n, d, l| {
            (0..k).map(|c| self.z[(n, c)] * v[(d, c)] * u[(l, c)]).sum()
        })
    }

    /// Every inactive column is all-zero (and every active one is a slab draw).
    pub fn spike_exact(&self) -> bool {
        self.v.iter().zip(&self.h).all(|(v, h)| {
            (0..v.cols()).all(|k| h[k] || (0..v.rows()).all(|d| v[(d, k)] == F::zero()))
        })
    }

    /// Slab loading matrix `v ∗ u_l` of slab `l` in view `t`.
    pub fn slab_loadings(&self, t: usize, l: usize) -> Mat<F> {
        let u = self.u_of(t);
        let v = &self.v[t];
        Mat::from_fn(v.rows(), v.cols(), |d, k| v[(d, k)] * u[(l, k)])
    }
}

/// Sum of squared residuals and observed count of view `t`.
pub fn training_sse<F: Scalar>(state: &MtfState<F>, c: &Collection<F>, t: usize) -> (F, usize) {
    let recon = state.reconstruct_mean(t);
    let data = &c.view(t).data;
    let mut sse = F::zero();
    for ((n, d, l), x) in data.observed_entries() {
        let r = x - recon.get(n, d, l);
        sse += r * r;
    }
    (sse, data.n_observed())
}

/// Log joint density of the data and every latent variable.
///
/// Inactive loading columns sit on the spike and contribute only their
/// Bernoulli term. `tau_prior[t]` is the resolved `(shape, rate)` of view `t`.
pub fn log_joint<F: Scalar>(
    state: &MtfState<F>,
    c: &Collection<F>,
    hp: &HyperParams<F>,
    tau_prior: &[(F, F)],
) -> F {
    let (sse, n_obs): (Vec<F>, Vec<usize>) =
        (0..state.n_views()).map(|t| training_sse(state, c, t)).unzip();
    log_joint_given_sse(state, &sse, &n_obs, hp, tau_prior)
}

pub(crate) fn log_joint_given_sse<F: Scalar>(
    state: &MtfState<F>,
    sse: &[F],
    n_obs: &[usize],
    hp: &HyperParams<F>,
    tau_prior: &[(F, F)],
) -> F {
    let half = F::of(0.5);
    let ln2pi = F::of((2.0 * std::f64::consts::PI).ln());
    let mut lp = F::zero();
    for t in 0..state.n_views() {
        let tau = state.tau[t];
        lp += half * F::of(n_obs[t] as f64) * (tau.ln() - ln2pi) - half * tau * sse[t];
        let (a, b) = tau_prior[t];
        lp += gamma_ln_pdf(tau, a, b);
    }
    for &z in state.z.as_slice() {
        lp += normal_ln_pdf(z, F::zero(), F::one());
    }
    for u in &state.u {
        for &x in u.as_slice() {
            lp += normal_ln_pdf(x, F::zero(), F::one());
        }
    }
    for (k, &pi) in state.pi.iter().enumerate() {
        lp += beta_ln_pdf(pi, hp.a_pi, hp.b_pi);
        for t in 0..state.n_views() {
            lp += if state.h[t][k] { pi.ln() } else { (-pi).ln_1p() };
        }
    }
    for t in 0..state.n_views() {
        let (v, alpha) = (&state.v[t], &state.alpha[t]);
        for d in 0..v.rows() {
            for k in 0..v.cols() {
                let a = alpha[(d, k)];
                lp += gamma_ln_pdf(a, hp.a_alpha, hp.b_alpha);
                if state.h[t][k] {
                    lp += normal_ln_pdf(v[(d, k)], F::zero(), a);
                }
            }
        }
    }
    lp
}

/// Counts of components by sharing pattern.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ComponentStructure {
    /// Active in two or more views.
    pub shared: usize,
    /// Active in exactly one view, per view.
    pub specific: Vec<usize>,
    /// Active nowhere.
    pub empty: usize,
}

impl ComponentStructure {
    /// `K` minus the number of empty components.
    pub fn effective_cardinality(&self) -> usize {
        self.shared + self.specific.iter().sum::<usize>()
    }
}

/// Classifies components from an activity matrix `active[t][k]`.
pub fn classify_components(active: &[Vec<bool>]) -> ComponentStructure {
    let t_count = active.len();
    let k_count = active.first().map_or(0, Vec::len);
    let mut out = ComponentStructure {
        specific: vec![0; t_count],
        ..Default::default()
    };
    for k in 0..k_count {
        let on: Vec<usize> = (0..t_count).filter(|&t| active[t][k]).collect();
        match on.len() {
            0 => out.empty += 1,
            1 => out.specific[on[0]] += 1,
            _ => out.shared += 1,
        }
    }
    out
}

/// Posterior mean of `H` over snapshots, `[view][component]`.
pub fn activity_mean<F: Scalar>(snapshots: &[MtfState<F>]) -> Vec<Vec<f64>> {
    let first = &snapshots[0];
    let mut mean = vec![vec![0.0; first.n_components()]; first.n_views()];
    for s in snapshots {
        for (t, row) in s.h.iter().enumerate() {
            for (k, &on) in row.iter().enumerate() {
                if on {
                    mean[t][k] += 1.0;
                }
            }
        }
    }
    let n = snapshots.len() as f64;
    mean.iter_mut().flatten().for_each(|x| *x /= n);
    mean
}

/// Shared / view-specific / empty counts from the posterior mean of `H`.
///
/// A component is active in a view when its posterior activity exceeds
/// `threshold`. `origin`, when given, maps each sampler view to an original
/// view (as produced by [`Collection::unfold_tensors`]); a component is then
/// active in an original view when it is active in any of its parts.
pub fn component_structure<F: Scalar>(
    snapshots: &[MtfState<F>],
    threshold: f64,
    origin: Option<&[usize]>,
) -> ComponentStructure {
    let mean = activity_mean(snapshots);
    let active: Vec<Vec<bool>> = mean
        .iter()
        .map(|row| row.iter().map(|&p| p > threshold).collect())
        .collect();
    classify_components(&merge_activity(&active, origin))
}

pub(crate) fn merge_activity(active: &[Vec<bool>], origin: Option<&[usize]>) -> Vec<Vec<bool>> {
    let Some(origin) = origin else {
        return active.to_vec();
    };
    let n_orig = origin.iter().max().map_or(0, |m| m + 1);
    let k = active.first().map_or(0, Vec::len);
    let mut out = vec![vec![false; k]; n_orig];
    for (t, row) in active.iter().enumerate() {
        for (c, &on) in row.iter().enumerate() {
            out[origin[t]][c] |= on;
        }
    }
    out
}
