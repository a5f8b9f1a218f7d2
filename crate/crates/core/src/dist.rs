//! Seeded random streams and the primitive draws used by the Gibbs
//! conditionals.
//!
//! Gamma draws use the shape–rate parameterization throughout:
//! `Gamma(a, b)` has mean `a / b` and variance `a / b²`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};
use crate::scalar::Scalar;

/// Reproducible random stream owned by a single chain.
///
/// Streams with the same seed and different `stream_id`s are independent
/// ChaCha keystreams; the same `(seed, stream_id)` always reproduces the same
/// sequence.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    /// Stream for chain `chain` of repetition `rep`.
    pub fn for_chain(seed: u64, rep: u32, chain: u32) -> Self {
        Self::new(seed, (u64::from(rep) << 32) | u64::from(chain))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn check_positive<F: Scalar>(name: &str, x: F) -> Result<()> {
    if x > F::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

/// Draw from `Gamma(shape, rate)`.
///
/// Draws that underflow (small shapes produce them routinely) are clamped to
/// the smallest positive normal value so downstream logarithms stay finite.
pub fn draw_gamma<F: Scalar, R: RngCore + ?Sized>(shape: F, rate: F, rng: &mut R) -> Result<F> {
    check_positive("gamma shape", shape)?;
    check_positive("gamma rate", rate)?;
    let x = F::unit_gamma(shape, rng) / rate;
    Ok(if x.is_finite() {
        x.max(F::min_positive_value())
    } else {
        F::max_value()
    })
}

/// Draw from `Beta(a, b)`.
pub fn draw_beta<F: Scalar, R: RngCore + ?Sized>(a: F, b: F, rng: &mut R) -> Result<F> {
    check_positive("beta a", a)?;
    check_positive("beta b", b)?;
    Ok(F::beta(a, b, rng))
}

/// Draw from `N(mean, 1 / precision)`.
#[inline]
pub fn draw_normal_precision<F: Scalar, R: RngCore + ?Sized>(
    mean: F,
    precision: F,
    rng: &mut R,
) -> F {
    mean + F::standard_normal(rng) / precision.sqrt()
}

/// Overflow-safe logistic function.
pub fn logistic<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Draw `1` with probability `logistic(log_odds)`. Infinite log-odds are
/// deterministic; NaN is rejected.
pub fn draw_bernoulli_logodds<F: Scalar, R: RngCore + ?Sized>(
    log_odds: F,
    rng: &mut R,
) -> Result<bool> {
    if log_odds.is_nan() {
        return Err(Error::InvalidParameter("bernoulli log-odds is NaN".into()));
    }
    if log_odds == F::infinity() {
        return Ok(true);
    }
    if log_odds == F::neg_infinity() {
        return Ok(false);
    }
    Ok(F::open01(rng) < logistic(log_odds))
}

/// Gaussian in information form: precision `Λ` and `h = Λ μ`.
///
/// The precision is factored once; [`MvnPrecision::draw`] can then be called
/// for any number of `h` vectors sharing that precision.
#[derive(Clone, Debug)]
pub struct MvnPrecision<F> {
    chol: Cholesky<F>,
}

impl<F: Scalar> MvnPrecision<F> {
    /// Factors `Λ` with the single jitter retry policy of
    /// [`Cholesky::factor_with_jitter`].
    pub fn new(precision: &Mat<F>) -> Result<Self> {
        Ok(Self {
            chol: Cholesky::factor_with_jitter(precision)?,
        })
    }

    /// Factors `Λ` without any jitter rescue.
    pub fn new_exact(precision: &Mat<F>) -> Result<Self> {
        Ok(Self {
            chol: Cholesky::factor(precision)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.chol.dim()
    }

    pub fn cholesky(&self) -> &Cholesky<F> {
        &self.chol
    }

    /// `Λ⁻¹ h`.
    pub fn mean(&self, h: &[F]) -> Vec<F> {
        self.chol.solve(h)
    }

    /// Overwrites `out` with a draw from `N(Λ⁻¹h, Λ⁻¹)`.
    pub fn draw_into<R: RngCore + ?Sized>(&self, h: &[F], rng: &mut R, out: &mut [F]) {
        let k = self.dim();
        debug_assert_eq!(h.len(), k);
        debug_assert_eq!(out.len(), k);
        // mean = L⁻ᵀ L⁻¹ h, noise = L⁻ᵀ ε; share the backward solve.
        out.copy_from_slice(h);
        self.chol.forward_in_place(out);
        for o in out.iter_mut() {
            *o += F::standard_normal(rng);
        }
        self.chol.backward_in_place(out);
    }

    pub fn draw<R: RngCore + ?Sized>(&self, h: &[F], rng: &mut R) -> Vec<F> {
        let mut out = vec![F::zero(); self.dim()];
        self.draw_into(h, rng, &mut out);
        out
    }
}

/// One draw from the Gaussian with precision `Λ` and linear term `h`.
pub fn draw_mvn_precision<F: Scalar, R: RngCore + ?Sized>(
    h: &[F],
    precision: &Mat<F>,
    rng: &mut R,
) -> Result<Vec<F>> {
    if h.len() != precision.rows() {
        return Err(Error::Shape(format!(
            "linear term of length {} for a {}x{} precision",
            h.len(),
            precision.rows(),
            precision.cols()
        )));
    }
    Ok(MvnPrecision::new(precision)?.draw(h, rng))
}

/// `ln Γ(x)` for positive `x`.
pub fn ln_gamma<F: Scalar>(x: F) -> F {
    F::of(statrs::function::gamma::ln_gamma(x.to_f64_lossy()))
}

/// Log density of `Gamma(shape, rate)` at `x`.
pub fn gamma_ln_pdf<F: Scalar>(x: F, shape: F, rate: F) -> F {
    shape * rate.ln() - ln_gamma(shape) + (shape - F::one()) * x.ln() - rate * x
}

/// Log density of `Beta(a, b)` at `x`.
pub fn beta_ln_pdf<F: Scalar>(x: F, a: F, b: F) -> F {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
        + (a - F::one()) * x.ln()
        + (b - F::one()) * (-x).ln_1p()
}

/// Log density of `N(mean, 1 / precision)` at `x`.
pub fn normal_ln_pdf<F: Scalar>(x: F, mean: F, precision: F) -> F {
    let d = x - mean;
    F::of(0.5) * (precision.ln() - F::of((2.0 * std::f64::consts::PI).ln())) - F::of(0.5) * precision * d * d
}
