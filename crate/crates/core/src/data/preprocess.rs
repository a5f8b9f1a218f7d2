//! Centering and unit normalization of observed entries, with the fitted
//! statistics kept so the same transform can be applied to test data and
//! inverted on predictions.

use serde::{Deserialize, Serialize};

use crate::data::collection::{Collection, View};
use crate::data::tensor::MaskedTensor3;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Granularity of the scale estimate. Centering is always per
/// `(feature, slab)` fiber.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// One scale per `(feature, slab)` fiber.
    Fiber,
    /// One scale per feature, pooled over slabs. Keeps trilinear structure
    /// intact because the rescaling factors into the feature loadings.
    #[default]
    Feature,
}

/// Per-view, per-`(feature, slab)` center and scale, laid out `[l][d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessTransform<F> {
    center: Vec<Vec<F>>,
    scale: Vec<Vec<F>>,
    dims: Vec<(usize, usize)>,
}

impl<F: Scalar> PreprocessTransform<F> {
    /// `dims[t] = (D_t, L_t)`; `center[t]` and `scale[t]` hold `D_t · L_t`
    /// values laid out `[l][d]`.
    pub fn new(dims: Vec<(usize, usize)>, center: Vec<Vec<F>>, scale: Vec<Vec<F>>) -> Result<Self> {
        if center.len() != dims.len() || scale.len() != dims.len() {
            return Err(Error::Shape("transform view count mismatch".into()));
        }
        for (t, &(d, l)) in dims.iter().enumerate() {
            if center[t].len() != d * l || scale[t].len() != d * l {
                return Err(Error::Shape(format!("transform for view {t} is not {d}x{l}")));
            }
            if let Some(i) = scale[t].iter().position(|&s| !(s > F::zero() && s.is_finite())) {
                return Err(Error::InvalidParameter(format!(
                    "scale of view {t}, feature {}, slab {} must be positive",
                    i % d,
                    i / d
                )));
            }
        }
        Ok(Self { center, scale, dims })
    }

    /// Identity transform for the given shapes.
    pub fn identity(dims: Vec<(usize, usize)>) -> Self {
        let center = dims.iter().map(|&(d, l)| vec![F::zero(); d * l]).collect();
        let scale = dims.iter().map(|&(d, l)| vec![F::one(); d * l]).collect();
        Self { center, scale, dims }
    }

    pub fn n_views(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[(usize, usize)] {
        &self.dims
    }

    pub fn center(&self, t: usize, d: usize, l: usize) -> F {
        self.center[t][l * self.dims[t].0 + d]
    }

    pub fn scale(&self, t: usize, d: usize, l: usize) -> F {
        self.scale[t][l * self.dims[t].0 + d]
    }

    #[inline]
    pub fn forward_value(&self, t: usize, d: usize, l: usize, x: F) -> F {
        (x - self.center(t, d, l)) / self.scale(t, d, l)
    }

    #[inline]
    pub fn inverse_value(&self, t: usize, d: usize, l: usize, y: F) -> F {
        y * self.scale(t, d, l) + self.center(t, d, l)
    }

    fn check(&self, c: &Collection<F>) -> Result<()> {
        if c.n_views() != self.dims.len() {
            return Err(Error::Shape(format!(
                "transform has {} views, collection {}",
                self.dims.len(),
                c.n_views()
            )));
        }
        for (t, v) in c.views().iter().enumerate() {
            let (_, d, l) = v.data.dims();
            if (d, l) != self.dims[t] {
                return Err(Error::Shape(format!(
                    "view {t} is {d}x{l}, transform expects {:?}",
                    self.dims[t]
                )));
            }
        }
        Ok(())
    }

    fn map(&self, c: &Collection<F>, f: impl Fn(usize, usize, usize, F) -> F) -> Result<Collection<F>> {
        self.check(c)?;
        let views = c
            .views()
            .iter()
            .enumerate()
            .map(|(t, v)| {
                let mut data = v.data.clone();
                let (n, _, l) = data.dims();
                for i in 0..n {
                    for s in 0..l {
                        let fiber = data.tensor_mut().fiber_mut(i, s);
                        for (j, x) in fiber.iter_mut().enumerate() {
                            *x = f(t, j, s, *x);
                        }
                    }
                }
                View::new(v.name.clone(), data)
            })
            .collect();
        Ok(Collection::new(views, c.declared_groups().to_vec()))
    }

    /// Applies the stored statistics to every entry (masked entries are
    /// transformed too; they stay ignored downstream).
    pub fn apply(&self, c: &Collection<F>) -> Result<Collection<F>> {
        self.map(c, |t, d, l, x| self.forward_value(t, d, l, x))
    }

    pub fn inverse(&self, c: &Collection<F>) -> Result<Collection<F>> {
        self.map(c, |t, d, l, y| self.inverse_value(t, d, l, y))
    }
}

/// Centers every `(view, feature, slab)` fiber over its observed samples and
/// scales to unit (unbiased) variance at the requested granularity.
pub fn center_and_normalize<F: Scalar>(
    c: &Collection<F>,
    mode: ScaleMode,
) -> Result<(Collection<F>, PreprocessTransform<F>)> {
    let mut centers = Vec::with_capacity(c.n_views());
    let mut scales = Vec::with_capacity(c.n_views());
    let mut dims = Vec::with_capacity(c.n_views());
    for (t, v) in c.views().iter().enumerate() {
        let (center, scale) = fit_view(t, &v.data, mode)?;
        let (_, d, l) = v.data.dims();
        dims.push((d, l));
        centers.push(center);
        scales.push(scale);
    }
    let transform = PreprocessTransform::new(dims, centers, scales)?;
    Ok((transform.apply(c)?, transform))
}

fn fit_view<F: Scalar>(t: usize, x: &MaskedTensor3<F>, mode: ScaleMode) -> Result<(Vec<F>, Vec<F>)> {
    let (n, d, l) = x.dims();
    let mut sum = vec![F::zero(); d * l];
    let mut count = vec![0usize; d * l];
    for i in 0..n {
        let vals = x.tensor().sample(i);
        let mask = x.sample_mask(i);
        for k in 0..d * l {
            if mask[k] {
                sum[k] += vals[k];
                count[k] += 1;
            }
        }
    }
    if let Some(k) = count.iter().position(|&c| c < 2) {
        return Err(Error::SparseFiber {
            view: t,
            feature: k % d,
            slab: k / d,
        });
    }
    let center: Vec<F> = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| s / F::of(c as f64))
        .collect();
    let mut ss = vec![F::zero(); d * l];
    for i in 0..n {
        let vals = x.tensor().sample(i);
        let mask = x.sample_mask(i);
        for k in 0..d * l {
            if mask[k] {
                let r = vals[k] - center[k];
                ss[k] += r * r;
            }
        }
    }
    let scale = match mode {
        ScaleMode::Fiber => {
            let mut scale = Vec::with_capacity(d * l);
            for k in 0..d * l {
                let var = ss[k] / F::of((count[k] - 1) as f64);
                if !(var > F::zero()) {
                    return Err(Error::ConstantFiber {
                        view: t,
                        feature: k % d,
                        slab: k / d,
                    });
                }
                scale.push(var.sqrt());
            }
            scale
        }
        ScaleMode::Feature => {
            let mut scale = vec![F::zero(); d * l];
            for j in 0..d {
                if let Some(s) = (0..l).find(|&s| !(ss[s * d + j] > F::zero())) {
                    return Err(Error::ConstantFiber {
                        view: t,
                        feature: j,
                        slab: s,
                    });
                }
                // Pooled within-fiber variance: each fiber loses one degree
                // of freedom to its own center.
                let total: F = (0..l).map(|s| ss[s * d + j]).sum();
                let dof: usize = (0..l).map(|s| count[s * d + j] - 1).sum();
                let var = total / F::of(dof as f64);
                for s in 0..l {
                    scale[s * d + j] = var.sqrt();
                }
            }
            scale
        }
    };
    Ok((center, scale))
}
