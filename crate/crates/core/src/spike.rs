//! Collapsed spike-and-slab update of one loading column.
//!
//! For a column `w ∈ R^D` with independent slab priors `N(μ_d, 1/ρ_d)` and a
//! Gaussian likelihood whose log is `Σ_d (m_d w_d − ½ s_d w_d²)` up to a
//! constant, the slab marginal relative to the spike (`w = 0`) is
//!
//! `Σ_d ½ log ρ_d − ½ log(ρ_d + s_d) + (m_d + ρ_d μ_d)² / (2(ρ_d + s_d)) − ½ ρ_d μ_d²`,
//!
//! and the slab posterior is `N((m_d + ρ_d μ_d)/(ρ_d + s_d), 1/(ρ_d + s_d))`.

use rand::RngCore;

use crate::dist::{draw_bernoulli_logodds, draw_normal_precision};
use crate::error::Result;
use crate::scalar::Scalar;

/// Per-feature sufficient statistics and prior of one column.
pub(crate) struct ColumnEvidence<'a, F> {
    /// Likelihood linear term `m_d`.
    pub m: &'a [F],
    /// Likelihood precision `s_d`.
    pub s: &'a [F],
    /// Slab mean `μ_d`; zero when `None`.
    pub prior_mean: Option<&'a [F]>,
    /// Slab precision `ρ_d`.
    pub prior_prec: &'a [F],
}

impl<F: Scalar> ColumnEvidence<'_, F> {
    /// Log Bayes factor of slab versus spike.
    pub fn log_bayes_factor(&self, drop_normalizer: bool) -> F {
        let half = F::of(0.5);
        let mut lo = F::zero();
        for d in 0..self.m.len() {
            let rho = self.prior_prec[d];
            let mu = self.prior_mean.map_or(F::zero(), |p| p[d]);
            let prec = rho + self.s[d];
            let m = self.m[d];
            if !drop_normalizer {
                lo += half * rho.ln();
            }
            // (m + ρμ)²/(2(ρ+s)) − ½ρμ², rearranged so a huge μ gives −∞, not NaN.
            let quad = m * m - rho * mu * (self.s[d] * mu - F::of(2.0) * m);
            lo += -half * prec.ln() + quad / (F::of(2.0) * prec);
        }
        lo
    }

    /// Draws the indicator with prior log-odds `logit_pi` and writes the
    /// column into `out` (exact zeros under the spike).
    pub fn sample<R: RngCore + ?Sized>(
        &self,
        logit_pi: F,
        drop_normalizer: bool,
        rng: &mut R,
        out: &mut [F],
    ) -> Result<bool> {
        let lo = logit_pi + self.log_bayes_factor(drop_normalizer);
        let on = draw_bernoulli_logodds(lo, rng)?;
        if on {
            for d in 0..self.m.len() {
                let rho = self.prior_prec[d];
                let mu = self.prior_mean.map_or(F::zero(), |p| p[d]);
                let prec = rho + self.s[d];
                out[d] = draw_normal_precision((self.m[d] + rho * mu) / prec, prec, rng);
            }
        } else {
            out.iter_mut().for_each(|x| *x = F::zero());
        }
        Ok(on)
    }
}

/// `log(π / (1 − π))`, infinite at the endpoints.
pub(crate) fn logit<F: Scalar>(p: F) -> F {
    p.ln() - (-p).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trapezoid quadrature of `∫ exp(m w − s w²/2) N(w; μ, 1/ρ) dw` for one
    /// coordinate.
    fn quad_log_marginal(m: f64, s: f64, mu: f64, rho: f64) -> f64 {
        let sd = (1.0 / (rho + s)).sqrt();
        let center = (m + rho * mu) / (rho + s);
        let (lo, hi) = (center - 12.0 * sd, center + 12.0 * sd);
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let f = |w: f64| {
            let prior = (rho / (2.0 * std::f64::consts::PI)).sqrt() * (-0.5 * rho * (w - mu).powi(2)).exp();
            (m * w - 0.5 * s * w * w).exp() * prior
        };
        let mut acc = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            acc += f(lo + i as f64 * h);
        }
        (acc * h).ln()
    }

    #[test]
    fn bayes_factor_matches_quadrature_zero_mean() {
        let m = [0.7, -0.4];
        let s = [0.3, 0.5];
        let rho = [1.5, 0.8];
        let ev = ColumnEvidence { m: &m, s: &s, prior_mean: None, prior_prec: &rho };
        let oracle: f64 = (0..2).map(|d| quad_log_marginal(m[d], s[d], 0.0, rho[d])).sum();
        assert!((ev.log_bayes_factor(false) - oracle).abs() < 1e-8);
    }

    #[test]
    fn bayes_factor_matches_quadrature_nonzero_mean() {
        let m = [0.2, 1.1];
        let s = [0.4, 0.05];
        let mu = [0.9, -0.6];
        let rho = [2.0, 3.0];
        let ev = ColumnEvidence { m: &m, s: &s, prior_mean: Some(&mu), prior_prec: &rho };
        let oracle: f64 = (0..2).map(|d| quad_log_marginal(m[d], s[d], mu[d], rho[d])).sum();
        assert!((ev.log_bayes_factor(false) - oracle).abs() < 1e-8);
    }

    #[test]
    fn no_evidence_means_no_preference() {
        let ev = ColumnEvidence { m: &[0.0f64; 3], s: &[0.0; 3], prior_mean: None, prior_prec: &[2.0; 3] };
        assert_eq!(ev.log_bayes_factor(false), 0.0);
    }

    #[test]
    fn overflowing_prior_mean_switches_off() {
        let (m, s, mu, rho) = ([0.5f64], [3.0], [1e160], [1.5]);
        let ev = ColumnEvidence { m: &m, s: &s, prior_mean: Some(&mu), prior_prec: &rho };
        assert_eq!(ev.log_bayes_factor(false), f64::NEG_INFINITY);
        let mut out = [1.0];
        let mut rng = crate::dist::RngStream::new(0, 0);
        assert!(!ev.sample(-2.0, false, &mut rng, &mut out).unwrap());
        assert_eq!(out, [0.0]);
    }

    #[test]
    fn logit_endpoints() {
        assert_eq!(logit(0.5f64), 0.0);
        assert_eq!(logit(1.0f64), f64::INFINITY);
        assert_eq!(logit(0.0f64), f64::NEG_INFINITY);
    }
}
