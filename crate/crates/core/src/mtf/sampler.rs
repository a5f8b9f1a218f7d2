use log::warn;

use crate::chain::{Fault, GibbsSampler, HyperParams, NoisePrior, SweepRecord};
use crate::data::{Collection, MaskedTensor3};
use crate::dist::{draw_beta, draw_gamma, draw_normal_precision, MvnPrecision, RngStream};
use crate::error::{Error, Result};
use crate::kernels::{
    add_masked_outer, contract_features_slabs, contract_samples_features, contract_samples_slabs,
    masked_residual, sum_of_squares,
};
use crate::linalg::Mat;
use crate::mtf::state::{log_joint_given_sse, MtfState};
use crate::scalar::Scalar;
use crate::spike::{logit, ColumnEvidence};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum MaskKind {
    Full,
    /// Every sample observes the same `(d, l)` entries.
    Shared,
    PerRow,
}

#[derive(Clone, Debug)]
pub(crate) struct ViewCache<F> {
    /// Data with masked entries set to zero.
    pub x: Vec<F>,
    pub dims: (usize, usize, usize),
    pub kind: MaskKind,
    pub sumsq: F,
    pub n_obs: usize,
}

impl<F: Scalar> ViewCache<F> {
    pub fn new(data: &MaskedTensor3<F>) -> Self {
        let x = data.zero_filled();
        let kind = if data.is_fully_observed() {
            MaskKind::Full
        } else if data.samples_share_mask() {
            MaskKind::Shared
        } else {
            MaskKind::PerRow
        };
        Self {
            sumsq: sum_of_squares(&x),
            x,
            dims: data.dims(),
            kind,
            n_obs: data.n_observed(),
        }
    }
}

/// Mean over `(d, l)` fibers of the unbiased variance of the observed
/// entries; 1 when no fiber has two observations.
pub(crate) fn observed_variance<F: Scalar>(data: &MaskedTensor3<F>) -> F {
    slab_variance(data, 0..data.n_slabs())
}

/// As [`observed_variance`], restricted to the given slabs.
pub(crate) fn slab_variance<F: Scalar>(data: &MaskedTensor3<F>, slabs: std::ops::Range<usize>) -> F {
    let (n, d, _) = data.dims();
    let mut total = 0.0;
    let mut fibers = 0usize;
    for s in slabs {
        for j in 0..d {
            let xs: Vec<f64> = (0..n)
                .filter(|&i| data.is_observed(i, j, s))
                .map(|i| data.tensor().get(i, j, s).to_f64_lossy())
                .collect();
            if xs.len() < 2 {
                continue;
            }
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            total += xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            fibers += 1;
        }
    }
    if fibers == 0 || total <= 0.0 {
        F::one()
    } else {
        F::of(total / fibers as f64)
    }
}

/// Noise prior of one view; only the SNR form looks at the data.
pub(crate) fn resolve_noise<F: Scalar>(hp: &HyperParams<F>, data: &MaskedTensor3<F>) -> (F, F) {
    match hp.noise {
        NoisePrior::Fixed { shape, rate } => (shape, rate),
        _ => hp.noise.resolve(observed_variance(data), data.n_observed()),
    }
}

/// Gibbs sampler for the strict trilinear model over a borrowed collection.
///
/// A sweep updates `Z`, then `(V, H)` view by view, then `U` group by group,
/// then `π`, `α` and `τ`. Fully observed views use Gram-matrix identities,
/// so no residual tensor is ever stored for them.
#[derive(Clone, Debug)]
pub struct MtfSampler<'a, F: Scalar> {
    data: &'a Collection<F>,
    hp: HyperParams<F>,
    views: Vec<ViewCache<F>>,
    tau_prior: Vec<(F, F)>,
    groups: Vec<Vec<usize>>,
    group_of: Vec<Option<usize>>,
    ones: Mat<F>,
    sse_cache: Vec<Option<F>>,
}

impl<'a, F: Scalar> MtfSampler<'a, F> {
    pub fn new(data: &'a Collection<F>, hp: HyperParams<F>) -> Result<Self> {
        let violations = data.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidCollection(violations));
        }
        Self::new_unvalidated(data, hp)
    }

    /// Skips collection validation, so views may have no observed entries.
    pub(crate) fn new_unvalidated(data: &'a Collection<F>, hp: HyperParams<F>) -> Result<Self> {
        hp.validate()?;
        if data.n_samples() < hp.k {
            warn!("fewer samples ({}) than components ({})", data.n_samples(), hp.k);
        }
        let views: Vec<_> = data.views().iter().map(|v| ViewCache::new(&v.data)).collect();
        let tau_prior = data.views().iter().map(|v| resolve_noise(&hp, &v.data)).collect();
        Ok(Self {
            data,
            ones: Mat::filled(1, hp.k, F::one()),
            sse_cache: vec![None; views.len()],
            views,
            tau_prior,
            groups: data.u_groups(),
            group_of: data.group_index(),
            hp,
        })
    }

    pub fn hyper_params(&self) -> &HyperParams<F> {
        &self.hp
    }

    pub fn collection(&self) -> &Collection<F> {
        self.data
    }

    /// Resolved `(shape, rate)` of the noise prior per view.
    pub fn tau_prior(&self) -> &[(F, F)] {
        &self.tau_prior
    }

    fn u_of<'s>(&'s self, st: &'s MtfState<F>, t: usize) -> &'s Mat<F> {
        match self.group_of[t] {
            Some(g) => &st.u[g],
            None => &self.ones,
        }
    }

    /// A fresh state: standard-normal `Z` and `U`, every component active,
    /// `π` from its prior, `α` at its prior mean, `V` from the slab and `τ` at
    /// its prior mean.
    pub fn init_state(&self, rng: &mut RngStream) -> Result<MtfState<F>> {
        let hp = &self.hp;
        let k = hp.k;
        let n = self.data.n_samples();
        let normal = |r, c, rng: &mut RngStream| Mat::from_fn(r, c, |_, _| F::standard_normal(rng));
        let z = normal(n, k, rng);
        let u = self
            .groups
            .iter()
            .map(|g| normal(self.views[g[0]].dims.2, k, rng))
            .collect();
        let pi = (0..k).map(|_| draw_beta(hp.a_pi, hp.b_pi, rng)).collect::<Result<_>>()?;
        let alpha0 = hp.a_alpha / hp.b_alpha;
        let alpha: Vec<Mat<F>> = self.views.iter().map(|vc| Mat::filled(vc.dims.1, k, alpha0)).collect();
        let v = alpha
            .iter()
            .map(|a| Mat::from_fn(a.rows(), k, |d, c| draw_normal_precision(F::zero(), a[(d, c)], rng)))
            .collect();
        Ok(MtfState {
            z,
            v,
            u,
            h: vec![vec![true; k]; self.views.len()],
            pi,
            alpha,
            tau: self.tau_prior.iter().map(|&(a, b)| a / b).collect(),
            group_of: self.group_of.clone(),
        })
    }

    /// Draws every row of `Z` from its Gaussian full conditional.
    pub fn update_z(&mut self, st: &mut MtfState<F>, rng: &mut RngStream) -> Result<()> {
        self.sse_cache.iter_mut().for_each(|c| *c = None);
        let k = self.hp.k;
        let n = self.data.n_samples();
        let mut base = Mat::identity(k);
        let mut lin = Mat::zeros(n, k);
        let mut per_row = Vec::new();
        for (t, vc) in self.views.iter().enumerate() {
            let (u, v, tau) = (self.u_of(st, t), &st.v[t], st.tau[t]);
            contract_features_slabs(&vc.x, vc.dims, v, u, tau, &mut lin);
            match vc.kind {
                MaskKind::Full => {
                    let mut g = v.gram();
                    g.hadamard_assign(&u.gram());
                    base.add_scaled(tau, &g);
                }
                MaskKind::Shared => {
                    add_masked_outer(self.data.view(t).data.sample_mask(0), v, u, tau, &mut base)
                }
                MaskKind::PerRow => per_row.push(t),
            }
        }
        if per_row.is_empty() {
            let mvn = MvnPrecision::new(&base)?;
            for i in 0..n {
                mvn.draw_into(lin.row(i), rng, st.z.row_mut(i));
            }
        } else {
            for i in 0..n {
                let mut lam = base.clone();
                for &t in &per_row {
                    let mask = self.data.view(t).data.sample_mask(i);
                    add_masked_outer(mask, &st.v[t], self.u_of(st, t), st.tau[t], &mut lam);
                }
                MvnPrecision::new(&lam)?.draw_into(lin.row(i), rng, st.z.row_mut(i));
            }
        }
        Ok(())
    }

    /// Collapsed spike-and-slab update of every column of `V^(t)` and `H_t`.
    pub fn update_vh(&mut self, st: &mut MtfState<F>, t: usize, rng: &mut RngStream) -> Result<()> {
        self.sse_cache[t] = None;
        let k = self.hp.k;
        let drop_norm = self.hp.has_fault(Fault::DroppedSlabNormalizer);
        let vc = &self.views[t];
        let u = self.u_of(st, t).clone();
        let tau = st.tau[t];
        let d = vc.dims.1;
        let mut m = vec![F::zero(); d];
        let mut s = vec![F::zero(); d];
        let mut col = vec![F::zero(); d];
        if vc.kind == MaskKind::Full {
            let gz = st.z.gram();
            let gu = u.gram();
            let p = contract_samples_slabs(&vc.x, vc.dims, &st.z, &u);
            for c in 0..k {
                let v = &st.v[t];
                let prec = tau * gz[(c, c)] * gu[(c, c)];
                for j in 0..d {
                    let mut acc = p[(j, c)];
                    for c2 in (0..k).filter(|&c2| c2 != c) {
                        acc -= v[(j, c2)] * gz[(c, c2)] * gu[(c, c2)];
                    }
                    m[j] = tau * acc;
                    s[j] = prec;
                }
                let alpha = st.alpha[t].col(c);
                let ev = ColumnEvidence {
                    m: &m,
                    s: &s,
                    prior_mean: None,
                    prior_prec: &alpha,
                };
                st.h[t][c] = ev.sample(logit(st.pi[c]), drop_norm, rng, &mut col)?;
                st.v[t].set_col(c, &col);
            }
        } else {
            let mask = self.data.view(t).data.mask();
            let (n, _, l) = vc.dims;
            let mut r = masked_residual(&vc.x, mask, vc.dims, &st.z, &st.v[t], &u);
            for c in 0..k {
                let old = st.v[t].col(c);
                add_component(&mut r, mask, vc.dims, &st.z, &old, &u, c, F::one());
                m.iter_mut().for_each(|x| *x = F::zero());
                s.iter_mut().for_each(|x| *x = F::zero());
                for i in 0..n {
                    let zc = st.z[(i, c)];
                    for sl in 0..l {
                        let a = zc * u[(sl, c)];
                        let base = (i * l + sl) * d;
                        for j in 0..d {
                            if mask[base + j] {
                                m[j] += a * r[base + j];
                                s[j] += a * a;
                            }
                        }
                    }
                }
                m.iter_mut().for_each(|x| *x *= tau);
                s.iter_mut().for_each(|x| *x *= tau);
                let alpha = st.alpha[t].col(c);
                let ev = ColumnEvidence {
                    m: &m,
                    s: &s,
                    prior_mean: None,
                    prior_prec: &alpha,
                };
                st.h[t][c] = ev.sample(logit(st.pi[c]), drop_norm, rng, &mut col)?;
                st.v[t].set_col(c, &col);
                add_component(&mut r, mask, vc.dims, &st.z, &col, &u, c, -F::one());
            }
        }
        Ok(())
    }

    /// Draws every row of the shared third-mode factor of group `g`.
    pub fn update_u(&mut self, st: &mut MtfState<F>, g: usize, rng: &mut RngStream) -> Result<()> {
        let k = self.hp.k;
        let members = self.groups[g].clone();
        let l = self.views[members[0]].dims.2;
        let prior = if self.hp.has_fault(Fault::DroppedUPrior) {
            F::zero()
        } else {
            F::one()
        };
        let gz = st.z.gram();
        let mut lin = Mat::zeros(l, k);
        let mut shared = Mat::identity(k).map(|x| x * prior);
        let mut per_slab: Option<Vec<Mat<F>>> = None;
        let mut qs = Vec::with_capacity(members.len());
        for &t in &members {
            let vc = &self.views[t];
            let tau = st.tau[t];
            let v = &st.v[t];
            if vc.kind == MaskKind::Full {
                let q = contract_samples_features(&vc.x, vc.dims, &st.z, v);
                lin.add_scaled(tau, &q);
                let mut c = gz.clone();
                c.hadamard_assign(&v.gram());
                shared.add_scaled(tau, &c);
                qs.push(Some(q));
            } else {
                let slabs = per_slab.get_or_insert_with(|| vec![Mat::zeros(k, k); l]);
                masked_u_stats(&vc.x, self.data.view(t).data.mask(), vc.dims, &st.z, v, tau, slabs, &mut lin);
                qs.push(None);
            }
        }
        let u = &mut st.u[g];
        match per_slab {
            None => {
                let mvn = MvnPrecision::new(&shared)?;
                for s in 0..l {
                    mvn.draw_into(lin.row(s), rng, u.row_mut(s));
                }
            }
            Some(slabs) => {
                for (s, extra) in slabs.iter().enumerate() {
                    let mut lam = shared.clone();
                    lam.add_scaled(F::one(), extra);
                    MvnPrecision::new(&lam)?.draw_into(lin.row(s), rng, u.row_mut(s));
                }
            }
        }
        // Z and V are fixed for the rest of the sweep, so Q gives the SSE.
        for (&t, q) in members.iter().zip(qs) {
            if let Some(q) = q {
                self.sse_cache[t] = Some(gram_sse(self.views[t].sumsq, &q, &st.u[g], &gz, &st.v[t]));
            }
        }
        Ok(())
    }

    /// Training sum of squared residuals of view `t` in the current state.
    pub fn sse(&self, st: &MtfState<F>, t: usize) -> F {
        if let Some(s) = self.sse_cache[t] {
            return s;
        }
        let vc = &self.views[t];
        let u = self.u_of(st, t);
        if vc.kind == MaskKind::Full {
            let q = contract_samples_features(&vc.x, vc.dims, &st.z, &st.v[t]);
            gram_sse(vc.sumsq, &q, u, &st.z.gram(), &st.v[t])
        } else {
            let r = masked_residual(&vc.x, self.data.view(t).data.mask(), vc.dims, &st.z, &st.v[t], u);
            sum_of_squares(&r)
        }
    }

    /// Draws `π`, then `α`, then `τ`. Returns the per-view SSE used for `τ`.
    pub fn update_hypers(&mut self, st: &mut MtfState<F>, rng: &mut RngStream) -> Result<Vec<F>> {
        let hp = &self.hp;
        let n_views = self.views.len();
        for c in 0..hp.k {
            let on = (0..n_views).filter(|&t| st.h[t][c]).count();
            st.pi[c] = draw_beta(hp.a_pi + F::of(on as f64), hp.b_pi + F::of((n_views - on) as f64), rng)?;
        }
        let half = F::of(0.5);
        for t in 0..n_views {
            let (v, alpha) = (&st.v[t], &mut st.alpha[t]);
            for j in 0..v.rows() {
                for c in 0..hp.k {
                    let a = alpha.row_mut(j);
                    a[c] = if st.h[t][c] {
                        let x = v[(j, c)];
                        draw_gamma(hp.a_alpha + half, hp.b_alpha + half * x * x, rng)?
                    } else {
                        draw_gamma(hp.a_alpha, hp.b_alpha, rng)?
                    };
                }
            }
        }
        let sse: Vec<F> = (0..n_views).map(|t| self.sse(st, t)).collect();
        let halve = hp.has_fault(Fault::HalvedTauRate);
        for t in 0..n_views {
            let (a, b) = self.tau_prior[t];
            let mut rate = b + half * sse[t];
            if halve {
                rate = rate * half;
            }
            st.tau[t] = draw_gamma(a + half * F::of(self.views[t].n_obs as f64), rate, rng)?;
        }
        Ok(sse)
    }

    /// Log joint of the current state.
    pub fn log_joint(&self, st: &MtfState<F>) -> F {
        let sse: Vec<F> = (0..self.views.len()).map(|t| self.sse(st, t)).collect();
        let n_obs: Vec<usize> = self.views.iter().map(|v| v.n_obs).collect();
        log_joint_given_sse(st, &sse, &n_obs, &self.hp, &self.tau_prior)
    }
}

/// `r += sign · o ∘ (z_c ∘ v ∘ u_c)` for one component.
#[allow(clippy::too_many_arguments)]
fn add_component<F: Scalar>(
    r: &mut [F],
    mask: &[bool],
    dims: (usize, usize, usize),
    z: &Mat<F>,
    v: &[F],
    u: &Mat<F>,
    c: usize,
    sign: F,
) {
    if v.iter().all(|&x| x == F::zero()) {
        return;
    }
    let (n, d, l) = dims;
    for i in 0..n {
        let zc = sign * z[(i, c)];
        for s in 0..l {
            let a = zc * u[(s, c)];
            let base = (i * l + s) * d;
            for j in 0..d {
                if mask[base + j] {
                    r[base + j] += a * v[j];
                }
            }
        }
    }
}

/// Per-slab precision increments `τ Σ_{n,d obs} b bᵀ` and linear terms
/// `τ Σ x b`, with `b = z_n ∗ v_d`.
#[allow(clippy::too_many_arguments)]
fn masked_u_stats<F: Scalar>(
    x: &[F],
    mask: &[bool],
    dims: (usize, usize, usize),
    z: &Mat<F>,
    v: &Mat<F>,
    tau: F,
    slabs: &mut [Mat<F>],
    lin: &mut Mat<F>,
) {
    let (n, d, l) = dims;
    let k = z.cols();
    let mut b = vec![F::zero(); k];
    for i in 0..n {
        for s in 0..l {
            let base = (i * l + s) * d;
            for j in 0..d {
                if !mask[base + j] {
                    continue;
                }
                for ((bb, &zz), &vv) in b.iter_mut().zip(z.row(i)).zip(v.row(j)) {
                    *bb = zz * vv;
                }
                let xv = tau * x[base + j];
                for (o, &bb) in lin.row_mut(s).iter_mut().zip(&b) {
                    *o += xv * bb;
                }
                let m = &mut slabs[s];
                for a in 0..k {
                    let ba = tau * b[a];
                    if ba == F::zero() {
                        continue;
                    }
                    let row = m.row_mut(a);
                    for c in a..k {
                        row[c] += ba * b[c];
                    }
                }
            }
        }
    }
    for m in slabs.iter_mut() {
        m.symmetrize_upper();
    }
}

/// `Σx² − 2 Σ U∘Q + Σ Gz∘Gv∘Gu`, clamped at zero.
fn gram_sse<F: Scalar>(sumsq: F, q: &Mat<F>, u: &Mat<F>, gz: &Mat<F>, v: &Mat<F>) -> F {
    let cross = q.frobenius_dot(u);
    let mut g = gz.clone();
    g.hadamard_assign(&v.gram());
    let quad = g.frobenius_dot(&u.gram());
    (sumsq - F::of(2.0) * cross + quad).max(F::zero())
}

impl<F: Scalar> GibbsSampler<F> for MtfSampler<'_, F> {
    type State = MtfState<F>;

    fn init(&mut self, rng: &mut RngStream) -> Result<MtfState<F>> {
        self.init_state(rng)
    }

    fn sweep(&mut self, st: &mut MtfState<F>, rng: &mut RngStream) -> Result<SweepRecord<F>> {
        self.update_z(st, rng).map_err(|e| e.at_sweep(0, "Z"))?;
        for t in 0..self.views.len() {
            self.update_vh(st, t, rng).map_err(|e| e.at_sweep(0, format!("V/H of view {t}")))?;
        }
        for g in 0..self.groups.len() {
            self.update_u(st, g, rng).map_err(|e| e.at_sweep(0, format!("U of group {g}")))?;
        }
        let sse = self.update_hypers(st, rng).map_err(|e| e.at_sweep(0, "hyperparameters"))?;
        let n_obs: Vec<usize> = self.views.iter().map(|v| v.n_obs).collect();
        let log_joint = log_joint_given_sse(st, &sse, &n_obs, &self.hp, &self.tau_prior);
        let mse = sse
            .iter()
            .zip(&n_obs)
            .map(|(&s, &n)| if n == 0 { F::zero() } else { s / F::of(n as f64) })
            .collect();
        Ok(SweepRecord { log_joint, mse })
    }
}
