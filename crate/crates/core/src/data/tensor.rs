use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense `N × D × L` array. A matrix is the `L = 1` case.
///
/// Storage is sample-major with each `(n, l)` feature row contiguous, which
/// is the access pattern of every contraction in the samplers.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RawTensor<F>", bound(deserialize = "F: Scalar"))]
pub struct Tensor3<F> {
    n: usize,
    d: usize,
    l: usize,
    values: Vec<F>,
}

#[derive(serde::Deserialize)]
struct RawTensor<F> {
    n: usize,
    d: usize,
    l: usize,
    values: Vec<F>,
}

impl<F: Scalar> TryFrom<RawTensor<F>> for Tensor3<F> {
    type Error = Error;

    fn try_from(r: RawTensor<F>) -> Result<Self> {
        Tensor3::from_raw(r.n, r.d, r.l, r.values)
    }
}

impl<F: Scalar> Tensor3<F> {
    pub fn zeros(n: usize, d: usize, l: usize) -> Self {
        Self {
            n,
            d,
            l,
            values: vec![F::zero(); n * d * l],
        }
    }

    pub fn from_fn(n: usize, d: usize, l: usize, mut f: impl FnMut(usize, usize, usize) -> F) -> Self {
        let mut values = Vec::with_capacity(n * d * l);
        for i in 0..n {
            for s in 0..l {
                for j in 0..d {
                    values.push(f(i, j, s));
                }
            }
        }
        Self { n, d, l, values }
    }

    /// Builds a tensor from values laid out `[n][l][d]`, checking extents and
    /// finiteness.
    pub fn from_raw(n: usize, d: usize, l: usize, values: Vec<F>) -> Result<Self> {
        if n == 0 || d == 0 || l == 0 {
            return Err(Error::Shape(format!("tensor extents must be >= 1, got {n}x{d}x{l}")));
        }
        if values.len() != n * d * l {
            return Err(Error::Shape(format!(
                "{} values for a {n}x{d}x{l} tensor",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite tensor entry at flat index {pos}"
            )));
        }
        Ok(Self { n, d, l, values })
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn n_slabs(&self) -> usize {
        self.l
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.d, self.l)
    }

    pub fn is_matrix(&self) -> bool {
        self.l == 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn offset(&self, n: usize, d: usize, l: usize) -> usize {
        (n * self.l + l) * self.d + d
    }

    #[inline]
    pub fn get(&self, n: usize, d: usize, l: usize) -> F {
        self.values[self.offset(n, d, l)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, d: usize, l: usize, value: F) {
        let o = self.offset(n, d, l);
        self.values[o] = value;
    }

    /// Feature row `x[n, :, l]`.
    #[inline]
    pub fn fiber(&self, n: usize, l: usize) -> &[F] {
        let start = (n * self.l + l) * self.d;
        &self.values[start..start + self.d]
    }

    #[inline]
    pub fn fiber_mut(&mut self, n: usize, l: usize) -> &mut [F] {
        let start = (n * self.l + l) * self.d;
        &mut self.values[start..start + self.d]
    }

    /// All `(l, d)` entries of sample `n`, laid out `[l][d]`.
    #[inline]
    pub fn sample(&self, n: usize) -> &[F] {
        let len = self.l * self.d;
        &self.values[n * len..(n + 1) * len]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn into_raw(self) -> Vec<F> {
        self.values
    }

    /// Slab `l` as an `N × D × 1` matrix.
    pub fn slab(&self, l: usize) -> Tensor3<F> {
        Tensor3::from_fn(self.n, self.d, 1, |i, j, _| self.get(i, j, l))
    }
}

/// A tensor plus a mask of observed entries. Masked entries never enter a
/// likelihood computation; their stored values are arbitrary finite numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedTensor3<F> {
    tensor: Tensor3<F>,
    observed: Vec<bool>,
    n_observed: usize,
}

impl<F: Scalar> MaskedTensor3<F> {
    pub fn new(tensor: Tensor3<F>, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != tensor.len() {
            return Err(Error::Shape(format!(
                "mask of length {} for a tensor with {} entries",
                observed.len(),
                tensor.len()
            )));
        }
        let n_observed = observed.iter().filter(|&&o| o).count();
        Ok(Self {
            tensor,
            observed,
            n_observed,
        })
    }

    pub fn fully_observed(tensor: Tensor3<F>) -> Self {
        let len = tensor.len();
        Self {
            tensor,
            observed: vec![true; len],
            n_observed: len,
        }
    }

    /// Builds the mask from a predicate over `(n, d, l)`.
    pub fn with_mask_fn(tensor: Tensor3<F>, mut observed: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let (n, d, l) = tensor.dims();
        let mut mask = Vec::with_capacity(tensor.len());
        for i in 0..n {
            for s in 0..l {
                for j in 0..d {
                    mask.push(observed(i, j, s));
                }
            }
        }
        Self::new(tensor, mask).expect("mask built to tensor shape")
    }

    pub fn tensor(&self) -> &Tensor3<F> {
        &self.tensor
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor3<F> {
        &mut self.tensor
    }

    pub fn mask(&self) -> &[bool] {
        &self.observed
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.tensor.dims()
    }

    pub fn n_samples(&self) -> usize {
        self.tensor.n_samples()
    }

    pub fn n_features(&self) -> usize {
        self.tensor.n_features()
    }

    pub fn n_slabs(&self) -> usize {
        self.tensor.n_slabs()
    }

    pub fn is_matrix(&self) -> bool {
        self.tensor.is_matrix()
    }

    #[inline]
    pub fn is_observed(&self, n: usize, d: usize, l: usize) -> bool {
        self.observed[self.tensor.offset(n, d, l)]
    }

    pub fn set_observed(&mut self, n: usize, d: usize, l: usize, observed: bool) {
        let o = self.tensor.offset(n, d, l);
        if self.observed[o] != observed {
            self.observed[o] = observed;
            if observed {
                self.n_observed += 1;
            } else {
                self.n_observed -= 1;
            }
        }
    }

    pub fn n_observed(&self) -> usize {
        self.n_observed
    }

    pub fn is_fully_observed(&self) -> bool {
        self.n_observed == self.observed.len()
    }

    /// Mask of sample `n`, laid out `[l][d]`.
    pub fn sample_mask(&self, n: usize) -> &[bool] {
        let len = self.n_slabs() * self.n_features();
        &self.observed[n * len..(n + 1) * len]
    }

    /// Mask of fiber `x[n, :, l]`.
    pub fn fiber_mask(&self, n: usize, l: usize) -> &[bool] {
        let d = self.n_features();
        let start = (n * self.n_slabs() + l) * d;
        &self.observed[start..start + d]
    }

    /// True when every sample has the same observation pattern.
    pub fn samples_share_mask(&self) -> bool {
        let first = self.sample_mask(0);
        (1..self.n_samples()).all(|n| self.sample_mask(n) == first)
    }

    /// Values with every masked entry replaced by zero.
    pub fn zero_filled(&self) -> Vec<F> {
        self.tensor
            .as_slice()
            .iter()
            .zip(&self.observed)
            .map(|(&x, &o)| if o { x } else { F::zero() })
            .collect()
    }

    /// Observed entries as `((n, d, l), value)`.
    pub fn observed_entries(&self) -> impl Iterator<Item = ((usize, usize, usize), F)> + '_ {
        let (n, d, l) = self.dims();
        (0..n).flat_map(move |i| {
            (0..l).flat_map(move |s| {
                (0..d).filter_map(move |j| {
                    self.is_observed(i, j, s).then(|| ((i, j, s), self.tensor.get(i, j, s)))
                })
            })
        })
    }

    /// Masked entries as `(n, d, l)`.
    pub fn masked_entries(&self) -> Vec<(usize, usize, usize)> {
        let (n, d, l) = self.dims();
        let mut out = Vec::with_capacity(self.observed.len() - self.n_observed);
        for i in 0..n {
            for s in 0..l {
                for j in 0..d {
                    if !self.is_observed(i, j, s) {
                        out.push((i, j, s));
                    }
                }
            }
        }
        out
    }
}

/// Splits a view into its `L` slabs, each an `N × D` matrix with its mask.
pub fn unfold_to_matrices<F: Scalar>(v: &MaskedTensor3<F>) -> Vec<MaskedTensor3<F>> {
    let (n, d, l) = v.dims();
    (0..l)
        .map(|s| {
            let t = Tensor3::from_fn(n, d, 1, |i, j, _| v.tensor().get(i, j, s));
            MaskedTensor3::with_mask_fn(t, |i, j, _| v.is_observed(i, j, s))
        })
        .collect()
}

/// Inverse of [`unfold_to_matrices`].
pub fn restack_matrices<F: Scalar>(slabs: &[MaskedTensor3<F>]) -> Result<MaskedTensor3<F>> {
    let first = slabs
        .first()
        .ok_or_else(|| Error::Shape("no slabs to stack".into()))?;
    let (n, d, _) = first.dims();
    if let Some(bad) = slabs.iter().find(|s| s.dims() != (n, d, 1)) {
        return Err(Error::Shape(format!(
            "slab of shape {:?} stacked with {n}x{d}x1",
            bad.dims()
        )));
    }
    let l = slabs.len();
    let t = Tensor3::from_fn(n, d, l, |i, j, s| slabs[s].tensor().get(i, j, 0));
    Ok(MaskedTensor3::with_mask_fn(t, |i, j, s| slabs[s].is_observed(i, j, 0)))
}
