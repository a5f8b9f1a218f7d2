use crate::chain::{GibbsSampler, HyperParams, NoisePrior};
use crate::data::{Collection, Tensor3};
use crate::diag::joint::{moments, noisy, JointModel, JointSizes};
use crate::dist::{draw_bernoulli_logodds, draw_beta, draw_gamma, draw_normal_precision, RngStream};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rmtf::{LambdaIndex, RmtfSampler, RmtfState};
use crate::scalar::Scalar;
use crate::spike::logit;

/// The relaxed model on a matrix plus one tensor.
#[derive(Clone, Debug)]
pub struct RmtfJoint {
    pub sizes: JointSizes,
    pub hp: HyperParams<f64>,
    lidx: LambdaIndex,
}

impl RmtfJoint {
    pub fn new(sizes: JointSizes, hp: HyperParams<f64>) -> Self {
        let lidx = LambdaIndex::new(hp.lambda_mode, hp.k, &[None, Some(sizes.l)]);
        Self { sizes, hp, lidx }
    }
}

impl JointModel for RmtfJoint {
    type State = RmtfState<f64>;

    fn prior_draw(&self, rng: &mut RngStream) -> Result<RmtfState<f64>> {
        let hp = &self.hp;
        let (k, s) = (hp.k, &self.sizes);
        let (a_tau, b_tau) = match hp.noise {
            NoisePrior::Fixed { shape, rate } => (shape, rate),
            _ => return Err(Error::InvalidParameter("the joint test needs a fixed noise prior".into())),
        };
        let gamma = |a, b, rng: &mut RngStream| draw_gamma(a, b, rng).expect("valid prior");
        let z = Mat::from_fn(s.n, k, |_, _| f64::standard_normal(rng));
        let u = Mat::from_fn(s.l, k, |_, _| f64::standard_normal(rng));
        let pi: Vec<f64> = (0..k).map(|_| draw_beta(hp.a_pi, hp.b_pi, rng)).collect::<Result<_>>()?;
        let lambda: Vec<f64> = (0..self.lidx.len()).map(|_| gamma(hp.a_lambda, hp.b_lambda, rng)).collect();
        let draw_h = |rng: &mut RngStream| -> Result<Vec<bool>> {
            (0..k).map(|c| draw_bernoulli_logodds(logit(pi[c]), rng)).collect()
        };
        let hm = vec![draw_h(rng)?];
        let ht: Vec<Vec<bool>> = (0..s.l).map(|_| draw_h(rng)).collect::<Result<_>>()?;
        let alpha = Mat::from_fn(s.d, k, |_, _| gamma(hp.a_alpha, hp.b_alpha, rng));
        let wm = Mat::from_fn(s.d, k, |d, c| {
            if hm[0][c] {
                draw_normal_precision(0.0, alpha[(d, c)], rng)
            } else {
                0.0
            }
        });
        let beta = Mat::from_fn(s.d, k, |_, _| gamma(hp.a_beta, hp.b_beta, rng));
        let v = Mat::from_fn(s.d, k, |d, c| draw_normal_precision(0.0, beta[(d, c)], rng));
        let wt: Vec<Mat<f64>> = (0..s.l)
            .map(|l| {
                Mat::from_fn(s.d, k, |d, c| {
                    if ht[l][c] {
                        let lam = lambda[self.lidx.get(1, l, c)];
                        draw_normal_precision(u[(l, c)] * v[(d, c)], lam, rng)
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        let tau = vec![
            vec![gamma(a_tau, b_tau, rng)],
            (0..s.l).map(|_| gamma(a_tau, b_tau, rng)).collect(),
        ];
        Ok(RmtfState {
            z,
            w: vec![vec![wm], wt],
            v: vec![Mat::zeros(s.d, k), v],
            u: vec![u],
            h: vec![hm, ht],
            pi,
            alpha: vec![alpha, Mat::zeros(0, k)],
            beta: vec![Mat::zeros(0, k), beta],
            lambda,
            tau,
            group_of: vec![None, Some(0)],
        })
    }

    fn data_draw(&self, st: &RmtfState<f64>, rng: &mut RngStream) -> Result<Collection<f64>> {
        let m = noisy(&st.reconstruct_mean(0), |_| st.tau[0][0], rng);
        let t = noisy(&st.reconstruct_mean(1), |l| st.tau[1][l], rng);
        Ok(self.sizes.collection([m, t]))
    }

    fn gibbs_step(&self, st: &mut RmtfState<f64>, data: &Collection<f64>, rng: &mut RngStream) -> Result<()> {
        let mut s = RmtfSampler::new_unvalidated(data, self.hp.clone())?;
        s.sweep(st, rng)?;
        Ok(())
    }

    fn statistic_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for p in [
            "z", "w_matrix", "w_tensor", "v", "u", "pi", "lambda", "tau_matrix", "tau_tensor", "x_matrix",
            "x_tensor",
        ] {
            names.push(format!("mean {p}"));
            names.push(format!("mean {p}^2"));
        }
        names.extend(
            ["h_matrix", "h_tensor", "alpha", "beta", "lambda*dev^2", "x*fit_matrix", "x*fit_tensor", "tau*res^2"]
                .iter()
                .map(|p| format!("mean {p}")),
        );
        names
    }

    fn statistics(&self, st: &RmtfState<f64>, data: &Collection<f64>) -> Vec<f64> {
        let mut out = Vec::new();
        let mut push = |(a, b): (f64, f64)| {
            out.push(a);
            out.push(b);
        };
        push(moments(st.z.as_slice().iter().copied()));
        push(moments(st.w[0][0].as_slice().iter().copied()));
        push(moments(st.w[1].iter().flat_map(|w| w.as_slice().iter().copied())));
        push(moments(st.v[1].as_slice().iter().copied()));
        push(moments(st.u[0].as_slice().iter().copied()));
        push(moments(st.pi.iter().copied()));
        push(moments(st.lambda.iter().copied()));
        push(moments(st.tau[0].iter().copied()));
        push(moments(st.tau[1].iter().copied()));
        let fits: Vec<Tensor3<f64>> = (0..2).map(|t| st.reconstruct_mean(t)).collect();
        for t in 0..2 {
            push(moments(data.view(t).data.observed_entries().map(|(_, x)| x)));
        }
        let k = self.hp.k as f64;
        out.push(st.h[0][0].iter().filter(|&&b| b).count() as f64 / k);
        out.push(st.h[1].iter().flatten().filter(|&&b| b).count() as f64 / (k * self.sizes.l as f64));
        out.push(moments(st.alpha[0].as_slice().iter().copied()).0);
        out.push(moments(st.beta[1].as_slice().iter().copied()).0);
        let dev = (0..self.sizes.l).flat_map(|l| {
            (0..self.hp.k).filter(move |&c| st.h[1][l][c]).flat_map(move |c| {
                let lam = st.lambda[self.lidx.get(1, l, c)];
                (0..self.sizes.d).map(move |d| {
                    let e = st.w[1][l][(d, c)] - st.u[0][(l, c)] * st.v[1][(d, c)];
                    lam * e * e
                })
            })
        });
        out.push(moments(dev).0);
        for (t, fit) in fits.iter().enumerate() {
            out.push(moments(data.view(t).data.observed_entries().map(|((n, d, l), x)| x * fit.get(n, d, l))).0);
        }
        let res = (0..2).flat_map(|t| {
            let fit = &fits[t];
            data.view(t)
                .data
                .observed_entries()
                .map(move |((n, d, l), x)| st.tau[t][if t == 0 { 0 } else { l }] * (x - fit.get(n, d, l)).powi(2))
        });
        out.push(moments(res).0);
        out
    }
}
