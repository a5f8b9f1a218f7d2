use log::warn;

use crate::chain::{Fault, GibbsSampler, HyperParams, SweepRecord};
use crate::data::Collection;
use crate::dist::{draw_beta, draw_gamma, draw_normal_precision, MvnPrecision, RngStream};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::mtf::{slab_variance, MaskKind, ViewCache};
use crate::rmtf::state::{log_joint_given_sse, LambdaIndex, RmtfState};
use crate::scalar::Scalar;
use crate::spike::{logit, ColumnEvidence};

/// Gibbs sampler for the relaxed model over a borrowed collection.
///
/// A sweep updates `Z`, then `(W, H)` view by view, then `V` of every tensor
/// view, then `U` group by group, then `λ`, `β`, `α`, `τ` and `π`.
#[derive(Clone, Debug)]
pub struct RmtfSampler<'a, F: Scalar> {
    data: &'a Collection<F>,
    hp: HyperParams<F>,
    views: Vec<ViewCache<F>>,
    /// `[t][l]` resolved noise prior.
    tau_prior: Vec<Vec<(F, F)>>,
    slab_sumsq: Vec<Vec<F>>,
    slab_obs: Vec<Vec<usize>>,
    groups: Vec<Vec<usize>>,
    group_of: Vec<Option<usize>>,
    lidx: LambdaIndex,
    /// Per fully observed view, `X_lᵀ Z` of the current `Z`.
    p_cache: Vec<Option<Vec<Mat<F>>>>,
}

impl<'a, F: Scalar> RmtfSampler<'a, F> {
    pub fn new(data: &'a Collection<F>, hp: HyperParams<F>) -> Result<Self> {
        let violations = data.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidCollection(violations));
        }
        Self::new_unvalidated(data, hp)
    }

    pub(crate) fn new_unvalidated(data: &'a Collection<F>, hp: HyperParams<F>) -> Result<Self> {
        hp.validate()?;
        if data.n_samples() < hp.k {
            warn!("fewer samples ({}) than components ({})", data.n_samples(), hp.k);
        }
        let views: Vec<ViewCache<F>> = data.views().iter().map(|v| ViewCache::new(&v.data)).collect();
        let group_of = data.group_index();
        let mut tau_prior = Vec::with_capacity(views.len());
        let mut slab_sumsq = Vec::with_capacity(views.len());
        let mut slab_obs = Vec::with_capacity(views.len());
        for (t, vc) in views.iter().enumerate() {
            let md = &data.view(t).data;
            let (n, d, l) = vc.dims;
            let mut ss = vec![F::zero(); l];
            let mut cnt = vec![0usize; l];
            for i in 0..n {
                for s in 0..l {
                    let base = (i * l + s) * d;
                    for j in 0..d {
                        if md.mask()[base + j] {
                            ss[s] += vc.x[base + j] * vc.x[base + j];
                            cnt[s] += 1;
                        }
                    }
                }
            }
            tau_prior.push(
                (0..l)
                    .map(|s| hp.noise.resolve(slab_variance(md, s..s + 1), cnt[s]))
                    .collect(),
            );
            slab_sumsq.push(ss);
            slab_obs.push(cnt);
        }
        let slabs: Vec<Option<usize>> =
            views.iter().zip(&group_of).map(|(vc, g)| g.map(|_| vc.dims.2)).collect();
        Ok(Self {
            data,
            lidx: LambdaIndex::new(hp.lambda_mode, hp.k, &slabs),
            p_cache: vec![None; views.len()],
            views,
            tau_prior,
            slab_sumsq,
            slab_obs,
            groups: data.u_groups(),
            group_of,
            hp,
        })
    }

    pub fn hyper_params(&self) -> &HyperParams<F> {
        &self.hp
    }

    pub fn collection(&self) -> &Collection<F> {
        self.data
    }

    pub fn lambda_index(&self) -> &LambdaIndex {
        &self.lidx
    }

    /// Resolved `(shape, rate)` of the noise prior per view and slab.
    pub fn tau_prior(&self) -> &[Vec<(F, F)>] {
        &self.tau_prior
    }

    /// A fresh state: standard-normal `Z` and `U`, every slab active, `π` and
    /// `λ` from their priors, `α` and `β` at their prior means, `V` and `W`
    /// from their priors given those, `τ` at its prior mean.
    pub fn init_state(&self, rng: &mut RngStream) -> Result<RmtfState<F>> {
        let hp = &self.hp;
        let k = hp.k;
        let normal = |r, c, rng: &mut RngStream| Mat::from_fn(r, c, |_, _| F::standard_normal(rng));
        let z = normal(self.data.n_samples(), k, rng);
        let u: Vec<Mat<F>> = self
            .groups
            .iter()
            .map(|g| normal(self.views[g[0]].dims.2, k, rng))
            .collect();
        let pi = (0..k).map(|_| draw_beta(hp.a_pi, hp.b_pi, rng)).collect::<Result<_>>()?;
        let lambda: Vec<F> = (0..self.lidx.len())
            .map(|_| draw_gamma(hp.a_lambda, hp.b_lambda, rng))
            .collect::<Result<_>>()?;
        let n_views = self.views.len();
        let (mut w, mut v, mut alpha, mut beta, mut h) = (
            Vec::with_capacity(n_views),
            Vec::with_capacity(n_views),
            Vec::with_capacity(n_views),
            Vec::with_capacity(n_views),
            Vec::with_capacity(n_views),
        );
        for (t, vc) in self.views.iter().enumerate() {
            let (_, d, l) = vc.dims;
            h.push(vec![vec![true; k]; l]);
            match self.group_of[t] {
                Some(g) => {
                    let b = Mat::filled(d, k, hp.a_beta / hp.b_beta);
                    let vv = Mat::from_fn(d, k, |j, c| draw_normal_precision(F::zero(), b[(j, c)], rng));
                    let ws = (0..l)
                        .map(|s| {
                            Mat::from_fn(d, k, |j, c| {
                                let lam = lambda[self.lidx.get(t, s, c)];
                                draw_normal_precision(u[g][(s, c)] * vv[(j, c)], lam, rng)
                            })
                        })
                        .collect();
                    w.push(ws);
                    v.push(vv);
                    beta.push(b);
                    alpha.push(Mat::zeros(0, k));
                }
                None => {
                    let a = Mat::filled(d, k, hp.a_alpha / hp.b_alpha);
                    w.push(vec![Mat::from_fn(d, k, |j, c| draw_normal_precision(F::zero(), a[(j, c)], rng))]);
                    v.push(Mat::zeros(d, k));
                    alpha.push(a);
                    beta.push(Mat::zeros(0, k));
                }
            }
        }
        Ok(RmtfState {
            z,
            w,
            v,
            u,
            h,
            pi,
            alpha,
            beta,
            lambda,
            tau: self
                .tau_prior
                .iter()
                .map(|p| p.iter().map(|&(a, b)| a / b).collect())
                .collect(),
            group_of: self.group_of.clone(),
        })
    }

    /// Draws every row of `Z` from its Gaussian full conditional.
    pub fn update_z(&mut self, st: &mut RmtfState<F>, rng: &mut RngStream) -> Result<()> {
        self.p_cache.iter_mut().for_each(|p| *p = None);
        let k = self.hp.k;
        let n = self.data.n_samples();
        let mut base = Mat::identity(k);
        let mut lin = Mat::zeros(n, k);
        let mut per_row = Vec::new();
        for (t, vc) in self.views.iter().enumerate() {
            let (_, d, l) = vc.dims;
            for s in 0..l {
                let (w, tau) = (&st.w[t][s], st.tau[t][s]);
                for i in 0..n {
                    let fib = &vc.x[(i * l + s) * d..(i * l + s + 1) * d];
                    let out = lin.row_mut(i);
                    for (j, &x) in fib.iter().enumerate() {
                        if x != F::zero() {
                            for (o, &ww) in out.iter_mut().zip(w.row(j)) {
                                *o += tau * x * ww;
                            }
                        }
                    }
                }
                match vc.kind {
                    MaskKind::Full => base.add_scaled(tau, &w.gram()),
                    MaskKind::Shared => {
                        let mask = self.data.view(t).data.fiber_mask(0, s);
                        add_rows_outer(mask, w, tau, &mut base);
                    }
                    MaskKind::PerRow => {}
                }
            }
            if vc.kind == MaskKind::PerRow {
                per_row.push(t);
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
                    for s in 0..self.views[t].dims.2 {
                        let mask = self.data.view(t).data.fiber_mask(i, s);
                        add_rows_outer(mask, &st.w[t][s], st.tau[t][s], &mut lam);
                    }
                }
                MvnPrecision::new(&lam)?.draw_into(lin.row(i), rng, st.z.row_mut(i));
            }
        }
        Ok(())
    }

    /// Collapsed spike-and-slab update of every `(l, k)` column of `W^(t)`.
    pub fn update_wh(&mut self, st: &mut RmtfState<F>, t: usize, rng: &mut RngStream) -> Result<()> {
        let k = self.hp.k;
        let drop_norm = self.hp.has_fault(Fault::DroppedSlabNormalizer);
        let vc = &self.views[t];
        let (n, d, l) = vc.dims;
        let mut m = vec![F::zero(); d];
        let mut s = vec![F::zero(); d];
        let mut mu = vec![F::zero(); d];
        let mut rho = vec![F::zero(); d];
        let mut col = vec![F::zero(); d];
        let full = vc.kind == MaskKind::Full;
        let gz = st.z.gram();
        let mut ps = Vec::with_capacity(if full { l } else { 0 });
        let mask = self.data.view(t).data.mask();
        for sl in 0..l {
            let p = if full {
                Some(slab_times_z(&vc.x, vc.dims, sl, &st.z))
            } else {
                None
            };
            let mut r = if full {
                Vec::new()
            } else {
                slab_residual(&vc.x, mask, vc.dims, sl, &st.z, &st.w[t][sl])
            };
            let tau = st.tau[t][sl];
            for c in 0..k {
                let w = &st.w[t][sl];
                match &p {
                    Some(p) => {
                        for j in 0..d {
                            let mut acc = p[(j, c)];
                            for c2 in (0..k).filter(|&c2| c2 != c) {
                                acc -= w[(j, c2)] * gz[(c, c2)];
                            }
                            m[j] = tau * acc;
                            s[j] = tau * gz[(c, c)];
                        }
                    }
                    None => {
                        let old = w.col(c);
                        add_slab_component(&mut r, mask, vc.dims, sl, &st.z, &old, c, F::one());
                        m.iter_mut().for_each(|x| *x = F::zero());
                        s.iter_mut().for_each(|x| *x = F::zero());
                        for i in 0..n {
                            let zc = st.z[(i, c)];
                            let base = (i * l + sl) * d;
                            for j in 0..d {
                                if mask[base + j] {
                                    m[j] += zc * r[i * d + j];
                                    s[j] += zc * zc;
                                }
                            }
                        }
                        m.iter_mut().for_each(|x| *x *= tau);
                        s.iter_mut().for_each(|x| *x *= tau);
                    }
                }
                let prior_mean = match self.group_of[t] {
                    Some(g) => {
                        let lam = st.lambda[self.lidx.get(t, sl, c)];
                        let uc = st.u[g][(sl, c)];
                        for j in 0..d {
                            mu[j] = uc * st.v[t][(j, c)];
                            rho[j] = lam;
                        }
                        Some(&mu[..])
                    }
                    None => {
                        for j in 0..d {
                            rho[j] = st.alpha[t][(j, c)];
                        }
                        None
                    }
                };
                let ev = ColumnEvidence {
                    m: &m,
                    s: &s,
                    prior_mean,
                    prior_prec: &rho,
                };
                st.h[t][sl][c] = ev.sample(logit(st.pi[c]), drop_norm, rng, &mut col)?;
                st.w[t][sl].set_col(c, &col);
                if p.is_none() {
                    add_slab_component(&mut r, mask, vc.dims, sl, &st.z, &col, c, -F::one());
                }
            }
            if let Some(p) = p {
                ps.push(p);
            }
        }
        self.p_cache[t] = if full { Some(ps) } else { None };
        Ok(())
    }

    /// Draws the slab means `V` of tensor view `t`.
    pub fn update_v(&mut self, st: &mut RmtfState<F>, t: usize, rng: &mut RngStream) -> Result<()> {
        let Some(g) = self.group_of[t] else {
            return Ok(());
        };
        let (_, d, l) = self.views[t].dims;
        for c in 0..self.hp.k {
            for j in 0..d {
                let mut prec = st.beta[t][(j, c)];
                let mut lin = F::zero();
                for s in (0..l).filter(|&s| st.h[t][s][c]) {
                    let lam = st.lambda[self.lidx.get(t, s, c)];
                    let uc = st.u[g][(s, c)];
                    prec += lam * uc * uc;
                    lin += lam * uc * st.w[t][s][(j, c)];
                }
                st.v[t][(j, c)] = draw_normal_precision(lin / prec, prec, rng);
            }
        }
        Ok(())
    }

    /// Draws every entry of the third-mode factor of group `g`.
    pub fn update_u(&mut self, st: &mut RmtfState<F>, g: usize, rng: &mut RngStream) -> Result<()> {
        let prior = if self.hp.has_fault(Fault::DroppedUPrior) {
            F::zero()
        } else {
            F::one()
        };
        let l = st.u[g].rows();
        for c in 0..self.hp.k {
            for s in 0..l {
                let mut prec = prior;
                let mut lin = F::zero();
                for &t in &self.groups[g] {
                    if !st.h[t][s][c] {
                        continue;
                    }
                    let lam = st.lambda[self.lidx.get(t, s, c)];
                    let (v, w) = (&st.v[t], &st.w[t][s]);
                    for j in 0..v.rows() {
                        prec += lam * v[(j, c)] * v[(j, c)];
                        lin += lam * v[(j, c)] * w[(j, c)];
                    }
                }
                if !(prec > F::zero()) {
                    return Err(Error::NotPositiveDefinite { minor: 0 });
                }
                st.u[g][(s, c)] = draw_normal_precision(lin / prec, prec, rng);
            }
        }
        Ok(())
    }

    /// Training SSE of every slab of view `t`.
    pub fn sse(&self, st: &RmtfState<F>, t: usize) -> Vec<F> {
        let vc = &self.views[t];
        let l = vc.dims.2;
        if vc.kind == MaskKind::Full {
            let gz = st.z.gram();
            (0..l)
                .map(|s| {
                    let w = &st.w[t][s];
                    let cross = match &self.p_cache[t] {
                        Some(ps) => ps[s].frobenius_dot(w),
                        None => slab_times_z(&vc.x, vc.dims, s, &st.z).frobenius_dot(w),
                    };
                    let quad = gz.frobenius_dot(&w.gram());
                    (self.slab_sumsq[t][s] - F::of(2.0) * cross + quad).max(F::zero())
                })
                .collect()
        } else {
            let mask = self.data.view(t).data.mask();
            (0..l)
                .map(|s| {
                    let r = slab_residual(&vc.x, mask, vc.dims, s, &st.z, &st.w[t][s]);
                    r.iter().fold(F::zero(), |a, &x| a + x * x)
                })
                .collect()
        }
    }

    /// Draws `λ`, `β`, `α`, `τ` and `π`. Returns the per-slab SSE used for `τ`.
    pub fn update_hypers(&mut self, st: &mut RmtfState<F>, rng: &mut RngStream) -> Result<Vec<Vec<F>>> {
        let hp = &self.hp;
        let k = hp.k;
        let half = F::of(0.5);
        let n_views = self.views.len();
        let mut shape = vec![F::zero(); self.lidx.len()];
        let mut rate = vec![F::zero(); self.lidx.len()];
        let doubled = hp.has_fault(Fault::DoubledLambdaShape);
        for t in 0..n_views {
            let Some(g) = self.group_of[t] else {
                continue;
            };
            let (v, u) = (&st.v[t], &st.u[g]);
            for (s, w) in st.w[t].iter().enumerate() {
                for c in (0..k).filter(|&c| st.h[t][s][c]) {
                    let i = self.lidx.get(t, s, c);
                    shape[i] += F::of(w.rows() as f64);
                    for j in 0..w.rows() {
                        let e = w[(j, c)] - u[(s, c)] * v[(j, c)];
                        rate[i] += e * e;
                    }
                }
            }
        }
        for (i, lam) in st.lambda.iter_mut().enumerate() {
            let inc = if doubled { shape[i] } else { half * shape[i] };
            *lam = draw_gamma(hp.a_lambda + inc, hp.b_lambda + half * rate[i], rng)?;
        }
        for t in 0..n_views {
            if self.group_of[t].is_some() {
                let (v, beta) = (&st.v[t], &mut st.beta[t]);
                for j in 0..v.rows() {
                    for c in 0..k {
                        let x = v[(j, c)];
                        beta[(j, c)] = draw_gamma(hp.a_beta + half, hp.b_beta + half * x * x, rng)?;
                    }
                }
            } else {
                let (w, alpha) = (&st.w[t][0], &mut st.alpha[t]);
                for j in 0..w.rows() {
                    for c in 0..k {
                        alpha[(j, c)] = if st.h[t][0][c] {
                            let x = w[(j, c)];
                            draw_gamma(hp.a_alpha + half, hp.b_alpha + half * x * x, rng)?
                        } else {
                            draw_gamma(hp.a_alpha, hp.b_alpha, rng)?
                        };
                    }
                }
            }
        }
        let sse: Vec<Vec<F>> = (0..n_views).map(|t| self.sse(st, t)).collect();
        let halve = hp.has_fault(Fault::HalvedTauRate);
        for t in 0..n_views {
            for (s, tau) in st.tau[t].iter_mut().enumerate() {
                let (a, b) = self.tau_prior[t][s];
                let mut r = b + half * sse[t][s];
                if halve {
                    r = r * half;
                }
                *tau = draw_gamma(a + half * F::of(self.slab_obs[t][s] as f64), r, rng)?;
            }
        }
        let total: usize = st.h.iter().map(Vec::len).sum();
        for c in 0..k {
            let on = st.h.iter().flatten().filter(|h| h[c]).count();
            st.pi[c] = draw_beta(hp.a_pi + F::of(on as f64), hp.b_pi + F::of((total - on) as f64), rng)?;
        }
        Ok(sse)
    }

    /// Log joint of the current state.
    pub fn log_joint(&self, st: &RmtfState<F>) -> F {
        let sse: Vec<Vec<F>> = (0..self.views.len()).map(|t| self.sse(st, t)).collect();
        self.log_joint_given_sse(st, &sse)
    }

    fn log_joint_given_sse(&self, st: &RmtfState<F>, sse: &[Vec<F>]) -> F {
        log_joint_given_sse(st, sse, &self.slab_obs, &self.hp, &self.tau_prior, &self.lidx)
    }
}

/// `out += scale · Σ_{d observed} w_d w_dᵀ` over the rows of `w`.
fn add_rows_outer<F: Scalar>(mask: &[bool], w: &Mat<F>, scale: F, out: &mut Mat<F>) {
    let k = w.cols();
    for (j, _) in mask.iter().enumerate().filter(|(_, &o)| o) {
        let r = w.row(j);
        for a in 0..k {
            let ra = scale * r[a];
            if ra == F::zero() {
                continue;
            }
            let row = out.row_mut(a);
            for b in 0..k {
                row[b] += ra * r[b];
            }
        }
    }
}

/// `P[d, k] = Σ_n x[n, l, d] z[n, k]` for one slab.
fn slab_times_z<F: Scalar>(x: &[F], dims: (usize, usize, usize), sl: usize, z: &Mat<F>) -> Mat<F> {
    let (n, d, l) = dims;
    let mut p = Mat::zeros(d, z.cols());
    for i in 0..n {
        let zr = z.row(i);
        let fib = &x[(i * l + sl) * d..(i * l + sl + 1) * d];
        for (j, &xv) in fib.iter().enumerate() {
            if xv == F::zero() {
                continue;
            }
            for (o, &zz) in p.row_mut(j).iter_mut().zip(zr) {
                *o += xv * zz;
            }
        }
    }
    p
}

/// Masked residual of one slab, laid out `[n][d]`.
fn slab_residual<F: Scalar>(
    x: &[F],
    mask: &[bool],
    dims: (usize, usize, usize),
    sl: usize,
    z: &Mat<F>,
    w: &Mat<F>,
) -> Vec<F> {
    let (n, d, l) = dims;
    let mut r = vec![F::zero(); n * d];
    for i in 0..n {
        let base = (i * l + sl) * d;
        let zr = z.row(i);
        for j in 0..d {
            if mask[base + j] {
                let fit: F = zr.iter().zip(w.row(j)).fold(F::zero(), |a, (&zz, &ww)| a + zz * ww);
                r[i * d + j] = x[base + j] - fit;
            }
        }
    }
    r
}

/// `r += sign · o ∘ (z_c w_cᵀ)` for one slab component.
#[allow(clippy::too_many_arguments)]
fn add_slab_component<F: Scalar>(
    r: &mut [F],
    mask: &[bool],
    dims: (usize, usize, usize),
    sl: usize,
    z: &Mat<F>,
    w: &[F],
    c: usize,
    sign: F,
) {
    if w.iter().all(|&x| x == F::zero()) {
        return;
    }
    let (n, d, l) = dims;
    for i in 0..n {
        let zc = sign * z[(i, c)];
        let base = (i * l + sl) * d;
        for j in 0..d {
            if mask[base + j] {
                r[i * d + j] += zc * w[j];
            }
        }
    }
}

impl<F: Scalar> GibbsSampler<F> for RmtfSampler<'_, F> {
    type State = RmtfState<F>;

    fn init(&mut self, rng: &mut RngStream) -> Result<RmtfState<F>> {
        self.init_state(rng)
    }

    fn sweep(&mut self, st: &mut RmtfState<F>, rng: &mut RngStream) -> Result<SweepRecord<F>> {
        self.update_z(st, rng).map_err(|e| e.at_sweep(0, "Z"))?;
        for t in 0..self.views.len() {
            self.update_wh(st, t, rng).map_err(|e| e.at_sweep(0, format!("W/H of view {t}")))?;
        }
        for t in 0..self.views.len() {
            self.update_v(st, t, rng).map_err(|e| e.at_sweep(0, format!("V of view {t}")))?;
        }
        for g in 0..self.groups.len() {
            self.update_u(st, g, rng).map_err(|e| e.at_sweep(0, format!("U of group {g}")))?;
        }
        let sse = self.update_hypers(st, rng).map_err(|e| e.at_sweep(0, "hyperparameters"))?;
        let mse = sse
            .iter()
            .zip(&self.slab_obs)
            .map(|(s, o)| {
                let n: usize = o.iter().sum();
                let total = s.iter().fold(F::zero(), |a, &b| a + b);
                if n == 0 {
                    F::zero()
                } else {
                    total / F::of(n as f64)
                }
            })
            .collect();
        Ok(SweepRecord {
            log_joint: self.log_joint_given_sse(st, &sse),
            mse,
        })
    }
}
