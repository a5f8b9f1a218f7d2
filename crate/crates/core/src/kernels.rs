//! Tensor–matrix contractions shared by the samplers and the predictor.
//!
//! Data slices are laid out `[n][l][d]` (see [`crate::data::Tensor3`]);
//! factor matrices are row-major with `K` columns. Masked entries must be
//! zero in `x` for the linear contractions to ignore them.

use crate::linalg::Mat;
use crate::scalar::Scalar;

/// `out[n, k] += scale · Σ_l u[l, k] Σ_d x[n, l, d] v[d, k]`.
pub(crate) fn contract_features_slabs<F: Scalar>(
    x: &[F],
    dims: (usize, usize, usize),
    v: &Mat<F>,
    u: &Mat<F>,
    scale: F,
    out: &mut Mat<F>,
) {
    let (n, d, l) = dims;
    let k = v.cols();
    let mut y = vec![F::zero(); k];
    for i in 0..n {
        let row_out = out.row_mut(i);
        for s in 0..l {
            y.iter_mut().for_each(|a| *a = F::zero());
            let fib = &x[(i * l + s) * d..(i * l + s + 1) * d];
            for (j, &xv) in fib.iter().enumerate() {
                if xv == F::zero() {
                    continue;
                }
                for (a, &vv) in y.iter_mut().zip(v.row(j)) {
                    *a += xv * vv;
                }
            }
            for ((o, &a), &uu) in row_out.iter_mut().zip(&y).zip(u.row(s)) {
                *o += scale * a * uu;
            }
        }
    }
}

/// `P[d, k] = Σ_n Σ_l x[n, l, d] z[n, k] u[l, k]`.
pub(crate) fn contract_samples_slabs<F: Scalar>(
    x: &[F],
    dims: (usize, usize, usize),
    z: &Mat<F>,
    u: &Mat<F>,
) -> Mat<F> {
    let (n, d, l) = dims;
    let k = z.cols();
    let mut p = Mat::zeros(d, k);
    let mut c = vec![F::zero(); k];
    for i in 0..n {
        let zr = z.row(i);
        for s in 0..l {
            for ((cc, &zz), &uu) in c.iter_mut().zip(zr).zip(u.row(s)) {
                *cc = zz * uu;
            }
            let fib = &x[(i * l + s) * d..(i * l + s + 1) * d];
            for (j, &xv) in fib.iter().enumerate() {
                if xv == F::zero() {
                    continue;
                }
                for (pp, &cc) in p.row_mut(j).iter_mut().zip(&c) {
                    *pp += xv * cc;
                }
            }
        }
    }
    p
}

/// `Q[l, k] = Σ_n z[n, k] Σ_d x[n, l, d] v[d, k]`.
pub(crate) fn contract_samples_features<F: Scalar>(
    x: &[F],
    dims: (usize, usize, usize),
    z: &Mat<F>,
    v: &Mat<F>,
) -> Mat<F> {
    let (n, d, l) = dims;
    let k = z.cols();
    let mut q = Mat::zeros(l, k);
    let mut y = vec![F::zero(); k];
    for i in 0..n {
        let zr = z.row(i);
        for s in 0..l {
            y.iter_mut().for_each(|a| *a = F::zero());
            let fib = &x[(i * l + s) * d..(i * l + s + 1) * d];
            for (j, &xv) in fib.iter().enumerate() {
                if xv == F::zero() {
                    continue;
                }
                for (a, &vv) in y.iter_mut().zip(v.row(j)) {
                    *a += xv * vv;
                }
            }
            for ((qq, &a), &zz) in q.row_mut(s).iter_mut().zip(&y).zip(zr) {
                *qq += a * zz;
            }
        }
    }
    q
}

/// `out += scale · Σ_{(l, d) observed} b bᵀ` with `b = v[d, :] ∗ u[l, :]`,
/// for one sample's mask laid out `[l][d]`.
pub(crate) fn add_masked_outer<F: Scalar>(
    mask: &[bool],
    v: &Mat<F>,
    u: &Mat<F>,
    scale: F,
    out: &mut Mat<F>,
) {
    let d = v.rows();
    let k = v.cols();
    let mut b = vec![F::zero(); k];
    for s in 0..u.rows() {
        for j in 0..d {
            if !mask[s * d + j] {
                continue;
            }
            for ((bb, &vv), &uu) in b.iter_mut().zip(v.row(j)).zip(u.row(s)) {
                *bb = vv * uu;
            }
            for a in 0..k {
                let ba = scale * b[a];
                if ba == F::zero() {
                    continue;
                }
                let row = out.row_mut(a);
                for c in a..k {
                    row[c] += ba * b[c];
                }
            }
        }
    }
    out.symmetrize_upper();
}

/// Residual `o ∘ (x − Σ_k z v u)` laid out like `x`.
pub(crate) fn masked_residual<F: Scalar>(
    x: &[F],
    mask: &[bool],
    dims: (usize, usize, usize),
    z: &Mat<F>,
    v: &Mat<F>,
    u: &Mat<F>,
) -> Vec<F> {
    let (n, d, l) = dims;
    let k = z.cols();
    let mut r = x.to_vec();
    let mut c = vec![F::zero(); k];
    for i in 0..n {
        for s in 0..l {
            for ((cc, &zz), &uu) in c.iter_mut().zip(z.row(i)).zip(u.row(s)) {
                *cc = zz * uu;
            }
            let base = (i * l + s) * d;
            for j in 0..d {
                if !mask[base + j] {
                    r[base + j] = F::zero();
                    continue;
                }
                let fit: F = c.iter().zip(v.row(j)).fold(F::zero(), |a, (&cc, &vv)| a + cc * vv);
                r[base + j] -= fit;
            }
        }
    }
    r
}

pub(crate) fn sum_of_squares<F: Scalar>(x: &[F]) -> F {
    x.iter().fold(F::zero(), |a, &v| a + v * v)
}
