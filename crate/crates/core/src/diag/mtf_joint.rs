use crate::chain::{GibbsSampler, HyperParams};
use crate::data::{Collection, Tensor3};
use crate::diag::joint::{moments, noisy, JointModel, JointSizes};
use crate::dist::{draw_bernoulli_logodds, draw_beta, draw_gamma, draw_normal_precision, RngStream};
use crate::error::Result;
use crate::linalg::Mat;
use crate::mtf::{MtfSampler, MtfState};
use crate::scalar::Scalar;
use crate::spike::logit;

/// The strict trilinear model on a matrix plus one tensor.
#[derive(Clone, Debug)]
pub struct MtfJoint {
    pub sizes: JointSizes,
    pub hp: HyperParams<f64>,
}

impl MtfJoint {
    pub fn new(sizes: JointSizes, hp: HyperParams<f64>) -> Self {
        Self { sizes, hp }
    }

    fn dims(&self, t: usize) -> (usize, usize, usize) {
        let s = &self.sizes;
        (s.n, s.d, if t == 0 { 1 } else { s.l })
    }
}

impl JointModel for MtfJoint {
    type State = MtfState<f64>;

    fn prior_draw(&self, rng: &mut RngStream) -> Result<MtfState<f64>> {
        let hp = &self.hp;
        let (k, s) = (hp.k, &self.sizes);
        let normal = |r, c, rng: &mut RngStream| Mat::from_fn(r, c, |_, _| f64::standard_normal(rng));
        let z = normal(s.n, k, rng);
        let u = vec![normal(s.l, k, rng)];
        let pi: Vec<f64> = (0..k).map(|_| draw_beta(hp.a_pi, hp.b_pi, rng)).collect::<Result<_>>()?;
        let mut h = vec![vec![false; k]; 2];
        let mut alpha = Vec::new();
        let mut v = Vec::new();
        for row in h.iter_mut() {
            for (c, on) in row.iter_mut().enumerate() {
                *on = draw_bernoulli_logodds(logit(pi[c]), rng)?;
            }
            let a = Mat::from_fn(s.d, k, |_, _| draw_gamma(hp.a_alpha, hp.b_alpha, rng).expect("valid prior"));
            let vv = Mat::from_fn(s.d, k, |d, c| {
                if row[c] {
                    draw_normal_precision(0.0, a[(d, c)], rng)
                } else {
                    0.0
                }
            });
            alpha.push(a);
            v.push(vv);
        }
        let (a_tau, b_tau) = match hp.noise {
            crate::chain::NoisePrior::Fixed { shape, rate } => (shape, rate),
            _ => {
                return Err(crate::error::Error::InvalidParameter(
                    "the joint test needs a fixed noise prior".into(),
                ))
            }
        };
        let tau = (0..2).map(|_| draw_gamma(a_tau, b_tau, rng)).collect::<Result<_>>()?;
        Ok(MtfState {
            z,
            v,
            u,
            h,
            pi,
            alpha,
            tau,
            group_of: vec![None, Some(0)],
        })
    }

    fn data_draw(&self, st: &MtfState<f64>, rng: &mut RngStream) -> Result<Collection<f64>> {
        let m = noisy(&st.reconstruct_mean(0), |_| st.tau[0], rng);
        let t = noisy(&st.reconstruct_mean(1), |_| st.tau[1], rng);
        debug_assert_eq!(m.dims(), self.dims(0));
        Ok(self.sizes.collection([m, t]))
    }

    fn gibbs_step(&self, st: &mut MtfState<f64>, data: &Collection<f64>, rng: &mut RngStream) -> Result<()> {
        let mut s = MtfSampler::new_unvalidated(data, self.hp.clone())?;
        s.sweep(st, rng)?;
        Ok(())
    }

    fn statistic_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for p in ["z", "v_matrix", "v_tensor", "u", "pi", "tau_matrix", "tau_tensor", "x_matrix", "x_tensor"] {
            names.push(format!("mean {p}"));
            names.push(format!("mean {p}^2"));
        }
        names.extend(
            ["h_matrix", "h_tensor", "alpha", "z0*z1", "x*fit_matrix", "x*fit_tensor", "tau*res^2"]
                .iter()
                .map(|p| format!("mean {p}")),
        );
        names
    }

    fn statistics(&self, st: &MtfState<f64>, data: &Collection<f64>) -> Vec<f64> {
        let mut out = Vec::new();
        let mut push = |(a, b): (f64, f64)| {
            out.push(a);
            out.push(b);
        };
        push(moments(st.z.as_slice().iter().copied()));
        push(moments(st.v[0].as_slice().iter().copied()));
        push(moments(st.v[1].as_slice().iter().copied()));
        push(moments(st.u[0].as_slice().iter().copied()));
        push(moments(st.pi.iter().copied()));
        push(moments(std::iter::once(st.tau[0])));
        push(moments(std::iter::once(st.tau[1])));
        let fits: Vec<Tensor3<f64>> = (0..2).map(|t| st.reconstruct_mean(t)).collect();
        for t in 0..2 {
            push(moments(data.view(t).data.observed_entries().map(|(_, x)| x)));
        }
        let k = self.hp.k;
        for t in 0..2 {
            out.push(st.h[t].iter().filter(|&&b| b).count() as f64 / k as f64);
        }
        out.push(moments(st.alpha.iter().flat_map(|a| a.as_slice().iter().copied())).0);
        out.push(if k > 1 {
            moments((0..st.z.rows()).map(|i| st.z[(i, 0)] * st.z[(i, 1)])).0
        } else {
            0.0
        });
        for (t, fit) in fits.iter().enumerate() {
            out.push(moments(data.view(t).data.observed_entries().map(|((n, d, l), x)| x * fit.get(n, d, l))).0);
        }
        let res = (0..2).flat_map(|t| {
            let tau = st.tau[t];
            let fit = &fits[t];
            data.view(t)
                .data
                .observed_entries()
                .map(move |((n, d, l), x)| tau * (x - fit.get(n, d, l)).powi(2))
        });
        out.push(moments(res).0);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Fault;
    use crate::diag::joint::{joint_distribution_test, joint_test_hypers};

    fn show(r: &crate::diag::JointReport) {
        for s in &r.statistics {
            eprintln!("{:>16} {:>10.4} {:>10.4} {:>7.2}", s.name, s.forward_mean, s.gibbs_mean, s.z);
        }
        eprintln!("threshold {:.3}", r.threshold);
    }

    #[test]
    fn quick_mtf_joint_test() {
        for masked in [false, true] {
            let model = MtfJoint::new(JointSizes { masked, ..Default::default() }, joint_test_hypers(2));
            let r = joint_distribution_test(&model, 20_000, 7).unwrap();
            show(&r);
            assert!(r.passed(), "max |z| {}", r.max_abs_z());
        }
    }

    #[test]
    fn quick_mtf_faults() {
        for f in [Fault::HalvedTauRate, Fault::DroppedSlabNormalizer, Fault::DroppedUPrior] {
            let mut hp = joint_test_hypers(2);
            hp.fault = Some(f);
            let model = MtfJoint::new(JointSizes::default(), hp);
            match joint_distribution_test(&model, 20_000, 7) {
                Ok(r) => {
                    eprintln!("{f:?}: max |z| {}", r.max_abs_z());
                    assert!(!r.passed());
                }
                Err(e) => eprintln!("{f:?}: sampler error {e}"),
            }
        }
    }
}
