use crate::chain::{HyperParams, LambdaMode};
use crate::data::Tensor3;
use crate::dist::{beta_ln_pdf, gamma_ln_pdf, normal_ln_pdf};
use crate::linalg::Mat;
use crate::mtf::MtfState;
use crate::scalar::Scalar;

/// All latent variables of one relaxed chain.
///
/// `w[t][l]` is the `D_t × K` loading matrix of slab `l`; its column `k` is
/// exactly zero iff `h[t][l][k]` is false. Matrix views have a single slab,
/// an all-zero `v` and no `β`; tensor views have no `α`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
pub struct RmtfState<F> {
    pub z: Mat<F>,
    pub w: Vec<Vec<Mat<F>>>,
    /// Per view, `D_t × K` slab means (zero for matrices).
    pub v: Vec<Mat<F>>,
    /// Per third-mode group, `L_g × K`.
    pub u: Vec<Mat<F>>,
    /// `h[t][l][k]`.
    pub h: Vec<Vec<Vec<bool>>>,
    pub pi: Vec<F>,
    /// `D_t × K` for matrix views, `0 × K` for tensors.
    pub alpha: Vec<Mat<F>>,
    /// `D_t × K` for tensor views, `0 × K` for matrices.
    pub beta: Vec<Mat<F>>,
    /// Slab-similarity precisions, laid out by [`LambdaIndex`].
    pub lambda: Vec<F>,
    /// `tau[t][l]`.
    pub tau: Vec<Vec<F>>,
    pub group_of: Vec<Option<usize>>,
}

/// Maps `(view, slab, component)` of a tensor view to its `λ` entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaIndex {
    mode: LambdaMode,
    k: usize,
    /// First per-slab entry of every view (`None` for matrices).
    offsets: Vec<Option<usize>>,
    len: usize,
}

impl LambdaIndex {
    /// `slabs[t]` is `Some(L_t)` for tensor views and `None` for matrices.
    pub fn new(mode: LambdaMode, k: usize, slabs: &[Option<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(slabs.len());
        let mut next = 0;
        for s in slabs {
            offsets.push(s.map(|l| {
                let o = next;
                next += l;
                o
            }));
        }
        let len = match mode {
            LambdaMode::Global => 1,
            LambdaMode::PerComponent => k,
            LambdaMode::PerSlab => next.max(1),
        };
        Self { mode, k, offsets, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mode(&self) -> LambdaMode {
        self.mode
    }

    pub fn get(&self, t: usize, l: usize, k: usize) -> usize {
        debug_assert!(k < self.k);
        match self.mode {
            LambdaMode::Global => 0,
            LambdaMode::PerComponent => k,
            LambdaMode::PerSlab => self.offsets[t].expect("tensor view") + l,
        }
    }
}

impl<F: Scalar> RmtfState<F> {
    pub fn n_components(&self) -> usize {
        self.z.cols()
    }

    pub fn n_views(&self) -> usize {
        self.w.len()
    }

    pub fn is_tensor(&self, t: usize) -> bool {
        self.group_of[t].is_some()
    }

    /// Slab `l` of the mean: `Z W_lᵀ`.
    pub fn reconstruct_mean(&self, t: usize) -> Tensor3<F> {
        let w = &self.w[t];
        let k = self.n_components();
        Tensor3::from_fn(self.z.rows(), w[0].rows(), w.len(), |n, d, l| {
            let zr = self.z.row(n);
            (0..k).map(|c| zr[c] * w[l][(d, c)]).sum()
        })
    }

    /// Every inactive `(t, l, k)` column is all-zero.
    pub fn spike_exact(&self) -> bool {
        self.w.iter().zip(&self.h).all(|(ws, hs)| {
            ws.iter().zip(hs).all(|(w, h)| {
                (0..w.cols()).all(|k| h[k] || (0..w.rows()).all(|d| w[(d, k)] == F::zero()))
            })
        })
    }

    /// Component activity per view: active when any slab is.
    pub fn activity(&self) -> Vec<Vec<bool>> {
        self.h
            .iter()
            .map(|hs| (0..self.n_components()).map(|k| hs.iter().any(|h| h[k])).collect())
            .collect()
    }

    /// Relaxed embedding of a strict state: `w_l = v ∗ u_l`, every slab
    /// inheriting its view's activity, `β = 1` and the given `λ` everywhere.
    pub fn from_mtf(m: &MtfState<F>, lambda: Vec<F>) -> Self {
        let k = m.n_components();
        let n_views = m.n_views();
        let mut w = Vec::with_capacity(n_views);
        let mut v = Vec::with_capacity(n_views);
        let mut h = Vec::with_capacity(n_views);
        let mut alpha = Vec::with_capacity(n_views);
        let mut beta = Vec::with_capacity(n_views);
        let mut tau = Vec::with_capacity(n_views);
        for t in 0..n_views {
            let u = m.u_of(t);
            let d = m.v[t].rows();
            w.push((0..u.rows()).map(|l| m.slab_loadings(t, l)).collect());
            h.push(vec![m.h[t].clone(); u.rows()]);
            tau.push(vec![m.tau[t]; u.rows()]);
            if m.group_of[t].is_some() {
                v.push(m.v[t].clone());
                alpha.push(Mat::zeros(0, k));
                beta.push(Mat::filled(d, k, F::one()));
            } else {
                v.push(Mat::zeros(d, k));
                alpha.push(m.alpha[t].clone());
                beta.push(Mat::zeros(0, k));
            }
        }
        Self {
            z: m.z.clone(),
            w,
            v,
            u: m.u.clone(),
            h,
            pi: m.pi.clone(),
            alpha,
            beta,
            lambda,
            tau,
            group_of: m.group_of.clone(),
        }
    }
}

/// Log joint given the per-slab training SSE and observed counts.
pub(crate) fn log_joint_given_sse<F: Scalar>(
    st: &RmtfState<F>,
    sse: &[Vec<F>],
    n_obs: &[Vec<usize>],
    hp: &HyperParams<F>,
    tau_prior: &[Vec<(F, F)>],
    lidx: &LambdaIndex,
) -> F {
    let half = F::of(0.5);
    let ln2pi = F::of((2.0 * std::f64::consts::PI).ln());
    let k = st.n_components();
    let mut lp = F::zero();
    for t in 0..st.n_views() {
        for (l, &tau) in st.tau[t].iter().enumerate() {
            lp += half * F::of(n_obs[t][l] as f64) * (tau.ln() - ln2pi) - half * tau * sse[t][l];
            let (a, b) = tau_prior[t][l];
            lp += gamma_ln_pdf(tau, a, b);
        }
    }
    for &z in st.z.as_slice() {
        lp += normal_ln_pdf(z, F::zero(), F::one());
    }
    for u in &st.u {
        for &x in u.as_slice() {
            lp += normal_ln_pdf(x, F::zero(), F::one());
        }
    }
    for &lam in &st.lambda {
        lp += gamma_ln_pdf(lam, hp.a_lambda, hp.b_lambda);
    }
    for (c, &pi) in st.pi.iter().enumerate() {
        lp += beta_ln_pdf(pi, hp.a_pi, hp.b_pi);
        for hs in &st.h {
            for h in hs {
                lp += if h[c] { pi.ln() } else { (-pi).ln_1p() };
            }
        }
    }
    for t in 0..st.n_views() {
        if let Some(g) = st.group_of[t] {
            let (v, beta, u) = (&st.v[t], &st.beta[t], &st.u[g]);
            for d in 0..v.rows() {
                for c in 0..k {
                    lp += gamma_ln_pdf(beta[(d, c)], hp.a_beta, hp.b_beta);
                    lp += normal_ln_pdf(v[(d, c)], F::zero(), beta[(d, c)]);
                }
            }
            for (l, w) in st.w[t].iter().enumerate() {
                for c in (0..k).filter(|&c| st.h[t][l][c]) {
                    let lam = st.lambda[lidx.get(t, l, c)];
                    for d in 0..w.rows() {
                        lp += normal_ln_pdf(w[(d, c)], u[(l, c)] * v[(d, c)], lam);
                    }
                }
            }
        } else {
            let (w, alpha) = (&st.w[t][0], &st.alpha[t]);
            for d in 0..w.rows() {
                for c in 0..k {
                    lp += gamma_ln_pdf(alpha[(d, c)], hp.a_alpha, hp.b_alpha);
                    if st.h[t][0][c] {
                        lp += normal_ln_pdf(w[(d, c)], F::zero(), alpha[(d, c)]);
                    }
                }
            }
        }
    }
    lp
}
