//! Synthetic coupled matrix–tensor data: strict CP, relaxed CP with a
//! distorted shared component, and a bilinear–trilinear blend for held-out
//! slab prediction.
//!
//! Every generator returns a matrix view (`D1 × 1`) and a tensor view
//! (`D2 × L`) coupled on `N` samples. Components are ordered shared, then
//! matrix-specific, then tensor-specific.

use serde::{Deserialize, Serialize};

use crate::data::{Collection, MaskedTensor3, Tensor3, View};
use crate::dist::RngStream;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Cp,
    RelaxedCp,
    Continuum,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cp" => Ok(Scenario::Cp),
            "relaxed_cp" | "relaxed-cp" => Ok(Scenario::RelaxedCp),
            "continuum" => Ok(Scenario::Continuum),
            other => Err(Error::InvalidParameter(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Sizes, component counts and noise of a simulated collection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub scenario: Scenario,
    pub n: usize,
    /// Test samples (continuum only).
    pub n_test: usize,
    pub d1: usize,
    pub d2: usize,
    pub l: usize,
    pub k_shared: usize,
    pub k_matrix: usize,
    pub k_tensor: usize,
    /// Fraction of trilinear signal (continuum only).
    pub rho: f64,
    /// Per-element signal variance (continuum only; CP signals keep the
    /// natural scale of standard-normal factors).
    pub signal_var: f64,
    pub noise_var: f64,
    pub seed: u64,
}

impl SimSpec {
    /// 300 samples, `D1 = D2 = 50`, `L = 30`, one shared, two matrix- and
    /// eight tensor-specific components, unit noise.
    pub fn cp() -> Self {
        Self {
            scenario: Scenario::Cp,
            n: 300,
            n_test: 0,
            d1: 50,
            d2: 50,
            l: 30,
            k_shared: 1,
            k_matrix: 2,
            k_tensor: 8,
            rho: 1.0,
            signal_var: 8.0,
            noise_var: 1.0,
            seed: 0,
        }
    }

    pub fn relaxed_cp() -> Self {
        Self {
            scenario: Scenario::RelaxedCp,
            ..Self::cp()
        }
    }

    /// 15 training and 100 test samples at trilinearity `rho`, signal
    /// variance 8 and unit noise.
    pub fn continuum(rho: f64) -> Self {
        Self {
            scenario: Scenario::Continuum,
            n: 15,
            n_test: 100,
            rho,
            ..Self::cp()
        }
    }

    pub fn for_scenario(scenario: Scenario) -> Self {
        match scenario {
            Scenario::Cp => Self::cp(),
            Scenario::RelaxedCp => Self::relaxed_cp(),
            Scenario::Continuum => Self::continuum(1.0),
        }
    }

    pub fn n_components(&self) -> usize {
        self.k_shared + self.k_matrix + self.k_tensor
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n == 0 || self.d1 == 0 || self.d2 == 0 || self.l == 0 {
            return bad("sizes must be >= 1");
        }
        if self.n_components() == 0 {
            return bad("at least one component is required");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return bad("noise_var must be >= 0");
        }
        if !(self.signal_var > 0.0 && self.signal_var.is_finite()) {
            return bad("signal_var must be > 0");
        }
        match self.scenario {
            Scenario::RelaxedCp if self.l < 2 => bad("relaxed CP needs L >= 2"),
            Scenario::RelaxedCp if self.k_shared == 0 => bad("relaxed CP needs a shared component"),
            Scenario::Continuum if self.n_test == 0 => bad("continuum needs test samples"),
            _ => Ok(()),
        }
    }
}

/// Generating factors, kept for scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
pub struct SimTruth<F> {
    /// `N × K`; for the continuum, training rows then test rows.
    pub z: Mat<F>,
    /// Matrix and tensor loadings, `D_t × K`.
    pub v: Vec<Mat<F>>,
    /// `L × K`.
    pub u: Mat<F>,
    /// `[view][component]` activity.
    pub h: Vec<Vec<bool>>,
    /// Relaxed CP: per-slab distortion powers.
    pub powers: Vec<f64>,
    /// Relaxed CP: per-slab loading vector of the first shared component.
    pub slab_weights: Vec<Vec<F>>,
    /// Continuum: independent per-slab tensor loadings `D2 × K`.
    pub bilinear_v: Vec<Mat<F>>,
    /// Noise added to each view (training samples only).
    pub noise: Vec<Tensor3<F>>,
}

impl<F: Scalar> SimTruth<F> {
    /// Loading vector of component `k` in view `t`.
    pub fn loading(&self, t: usize, k: usize) -> Vec<F> {
        self.v[t].col(k)
    }

    /// Indices of the tensor-specific components.
    pub fn tensor_specific(&self) -> Vec<usize> {
        (0..self.h[0].len()).filter(|&k| !self.h[0][k] && self.h[1][k]).collect()
    }
}

/// Output of the generators.
#[derive(Clone, Debug)]
pub struct SimData<F> {
    pub train: Collection<F>,
    /// Continuum only: test samples with the first tensor slab masked.
    pub test: Option<Collection<F>>,
    /// Continuum only: fully observed test samples.
    pub test_truth: Option<Collection<F>>,
    pub truth: SimTruth<F>,
}

/// `sign(x)·|x|^p`.
pub fn signed_power(x: f64, p: f64) -> f64 {
    x.signum() * x.abs().powf(p)
}

/// Distortion powers of the relaxed scenario: 0.5 and 1.5 for the first two
/// slabs, then evenly spaced on `[0.3, 1.7]`.
pub fn relaxed_powers(l: usize) -> Vec<f64> {
    let mut p = vec![0.5, 1.5];
    let rest = l.saturating_sub(2);
    p.extend((0..rest).map(|i| {
        if rest == 1 {
            1.0
        } else {
            0.3 + 1.4 * i as f64 / (rest - 1) as f64
        }
    }));
    p.truncate(l);
    p
}

/// One full sine period over `d` features, standardized to zero mean and unit
/// variance.
pub fn sine_loading(d: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..d)
        .map(|j| (2.0 * std::f64::consts::PI * j as f64 / d as f64).sin())
        .collect();
    standardize(&raw)
}

fn standardize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        x.iter().map(|a| (a - m) / sd).collect()
    } else {
        x.iter().map(|a| a - m).collect()
    }
}

fn normal_mat(r: usize, c: usize, rng: &mut RngStream) -> Mat<f64> {
    Mat::from_fn(r, c, |_, _| f64::standard_normal(rng))
}

fn cast_mat<F: Scalar>(m: &Mat<f64>) -> Mat<F> {
    Mat::from_fn(m.rows(), m.cols(), |i, j| F::of(m[(i, j)]))
}

fn cast_tensor<F: Scalar>(t: &Tensor3<f64>) -> Tensor3<F> {
    let (n, d, l) = t.dims();
    Tensor3::from_fn(n, d, l, |i, j, s| F::of(t.get(i, j, s)))
}

struct Factors {
    z: Mat<f64>,
    v: [Mat<f64>; 2],
    u: Mat<f64>,
    h: Vec<Vec<bool>>,
}

fn draw_factors(spec: &SimSpec, n: usize, rng: &mut RngStream) -> Factors {
    let k = spec.n_components();
    let z = normal_mat(n, k, rng);
    let u = normal_mat(spec.l, k, rng);
    let mut v1 = normal_mat(spec.d1, k, rng);
    let mut v2 = normal_mat(spec.d2, k, rng);
    let mut h = vec![vec![false; k]; 2];
    for c in 0..k {
        let (m, t) = if c < spec.k_shared {
            (true, true)
        } else if c < spec.k_shared + spec.k_matrix {
            (true, false)
        } else {
            (false, true)
        };
        h[0][c] = m;
        h[1][c] = t;
        if !m {
            v1.set_col(c, &vec![0.0; spec.d1]);
        }
        if !t {
            v2.set_col(c, &vec![0.0; spec.d2]);
        }
    }
    if spec.k_shared > 0 {
        v1.set_col(0, &sine_loading(spec.d1));
        v2.set_col(0, &sine_loading(spec.d2));
    }
    Factors {
        z,
        v: [v1, v2],
        u,
        h,
    }
}

fn add_noise(x: &mut Tensor3<f64>, sd: f64, rng: &mut RngStream) -> Tensor3<f64> {
    let (n, d, l) = x.dims();
    let noise = Tensor3::from_fn(n, d, l, |_, _, _| sd * f64::standard_normal(rng));
    for (a, e) in x.as_mut_slice().iter_mut().zip(noise.as_slice()) {
        *a += e;
    }
    noise
}

/// Per-slab loading matrices `D2 × K` of the tensor view.
fn cp_slabs(f: &Factors) -> Vec<Mat<f64>> {
    let v = &f.v[1];
    (0..f.u.rows())
        .map(|l| Mat::from_fn(v.rows(), v.cols(), |d, k| v[(d, k)] * f.u[(l, k)]))
        .collect()
}

fn matrix_signal(z: &Mat<f64>, v: &Mat<f64>) -> Tensor3<f64> {
    let k = z.cols();
    Tensor3::from_fn(z.rows(), v.rows(), 1, |n, d, _| (0..k).map(|c| z[(n, c)] * v[(d, c)]).sum())
}

fn tensor_signal(z: &Mat<f64>, slabs: &[Mat<f64>]) -> Tensor3<f64> {
    let k = z.cols();
    let d = slabs[0].rows();
    Tensor3::from_fn(z.rows(), d, slabs.len(), |n, j, l| {
        (0..k).map(|c| z[(n, c)] * slabs[l][(j, c)]).sum()
    })
}

fn collection<F: Scalar>(m: &Tensor3<f64>, t: &Tensor3<f64>) -> Collection<F> {
    Collection::ungrouped(vec![
        View::new("matrix", MaskedTensor3::fully_observed(cast_tensor(m))),
        View::new("tensor", MaskedTensor3::fully_observed(cast_tensor(t))),
    ])
}

fn truth<F: Scalar>(f: &Factors, noise: Vec<Tensor3<f64>>) -> SimTruth<F> {
    SimTruth {
        z: cast_mat(&f.z),
        v: f.v.iter().map(cast_mat).collect(),
        u: cast_mat(&f.u),
        h: f.h.clone(),
        powers: Vec::new(),
        slab_weights: Vec::new(),
        bilinear_v: Vec::new(),
        noise: noise.iter().map(cast_tensor).collect(),
    }
}

/// Strict CP data: the collection equals the trilinear reconstruction of the
/// returned factors plus the returned noise.
pub fn gen_cp<F: Scalar>(spec: &SimSpec) -> Result<SimData<F>> {
    spec.validate()?;
    let mut rng = RngStream::new(spec.seed, 0);
    let f = draw_factors(spec, spec.n, &mut rng);
    let sd = spec.noise_var.sqrt();
    let mut m = matrix_signal(&f.z, &f.v[0]);
    let mut t = tensor_signal(&f.z, &cp_slabs(&f));
    let noise = vec![add_noise(&mut m, sd, &mut rng), add_noise(&mut t, sd, &mut rng)];
    Ok(SimData {
        train: collection(&m, &t),
        test: None,
        test_truth: None,
        truth: truth(&f, noise),
    })
}

/// CP data whose first shared component has per-slab tensor loadings
/// `u_l · sign(v)|v|^{p_l}` instead of `u_l · v`.
pub fn gen_relaxed_cp<F: Scalar>(spec: &SimSpec) -> Result<SimData<F>> {
    spec.validate()?;
    if spec.l < 2 || spec.k_shared == 0 {
        return Err(Error::InvalidParameter(
            "relaxed CP needs L >= 2 and a shared component".into(),
        ));
    }
    let mut rng = RngStream::new(spec.seed, 0);
    let f = draw_factors(spec, spec.n, &mut rng);
    let powers = relaxed_powers(spec.l);
    let base = f.v[1].col(0);
    let weights: Vec<Vec<f64>> = powers
        .iter()
        .map(|&p| base.iter().map(|&x| signed_power(x, p)).collect())
        .collect();
    let mut slabs = cp_slabs(&f);
    for (l, w) in weights.iter().enumerate() {
        let scaled: Vec<f64> = w.iter().map(|&x| x * f.u[(l, 0)]).collect();
        slabs[l].set_col(0, &scaled);
    }
    let sd = spec.noise_var.sqrt();
    let mut m = matrix_signal(&f.z, &f.v[0]);
    let mut t = tensor_signal(&f.z, &slabs);
    let noise = vec![add_noise(&mut m, sd, &mut rng), add_noise(&mut t, sd, &mut rng)];
    let mut tr = truth(&f, noise);
    tr.powers = powers;
    tr.slab_weights = weights.iter().map(|w| w.iter().map(|&x| F::of(x)).collect()).collect();
    Ok(SimData {
        train: collection(&m, &t),
        test: None,
        test_truth: None,
        truth: tr,
    })
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n
}

fn rescale(x: &mut Tensor3<f64>, target_var: f64) {
    let v = variance(x.as_slice());
    if v > 0.0 {
        let s = (target_var / v).sqrt();
        x.as_mut_slice().iter_mut().for_each(|a| *a *= s);
    }
}

fn take_rows(x: &Tensor3<f64>, rows: std::ops::Range<usize>) -> Tensor3<f64> {
    let (_, d, l) = x.dims();
    let start = rows.start;
    Tensor3::from_fn(rows.len(), d, l, |n, j, s| x.get(start + n, j, s))
}

/// Blend of trilinear and bilinear tensor signal at trilinearity `rho`.
///
/// Both signals are standardized to equal variance before blending and the
/// blend is rescaled to `signal_var` (over training and test samples
/// together), as is the matrix view. The test collection masks tensor slab 0
/// for every test sample.
pub fn gen_continuum<F: Scalar>(spec: &SimSpec) -> Result<SimData<F>> {
    spec.validate()?;
    let mut rng = RngStream::new(spec.seed, 0);
    let total = spec.n + spec.n_test;
    let f = draw_factors(spec, total, &mut rng);
    let bilinear: Vec<Mat<f64>> = (0..spec.l)
        .map(|_| {
            let mut v = normal_mat(spec.d2, spec.n_components(), &mut rng);
            for c in 0..spec.n_components() {
                if !f.h[1][c] {
                    v.set_col(c, &vec![0.0; spec.d2]);
                }
            }
            v
        })
        .collect();
    let mut tri = tensor_signal(&f.z, &cp_slabs(&f));
    let mut bi = tensor_signal(&f.z, &bilinear);
    rescale(&mut tri, 1.0);
    rescale(&mut bi, 1.0);
    let mut t = tri.clone();
    for (a, b) in t.as_mut_slice().iter_mut().zip(bi.as_slice()) {
        *a = spec.rho * *a + (1.0 - spec.rho) * b;
    }
    rescale(&mut t, spec.signal_var);
    let mut m = matrix_signal(&f.z, &f.v[0]);
    rescale(&mut m, spec.signal_var);
    let sd = spec.noise_var.sqrt();
    let noise = vec![add_noise(&mut m, sd, &mut rng), add_noise(&mut t, sd, &mut rng)];
    let train = collection(&take_rows(&m, 0..spec.n), &take_rows(&t, 0..spec.n));
    let test_m = take_rows(&m, spec.n..total);
    let test_t = take_rows(&t, spec.n..total);
    let test_truth: Collection<F> = collection(&test_m, &test_t);
    let test = Collection::ungrouped(vec![
        View::new("matrix", MaskedTensor3::fully_observed(cast_tensor(&test_m))),
        View::new(
            "tensor",
            MaskedTensor3::with_mask_fn(cast_tensor(&test_t), |_, _, l| l != 0),
        ),
    ]);
    let mut tr = truth(
        &f,
        noise.iter().map(|e| take_rows(e, 0..spec.n)).collect(),
    );
    tr.bilinear_v = bilinear.iter().map(cast_mat).collect();
    Ok(SimData {
        train,
        test: Some(test),
        test_truth: Some(test_truth),
        truth: tr,
    })
}

/// Dispatches on `spec.scenario`.
pub fn generate<F: Scalar>(spec: &SimSpec) -> Result<SimData<F>> {
    match spec.scenario {
        Scenario::Cp => gen_cp(spec),
        Scenario::RelaxedCp => gen_relaxed_cp(spec),
        Scenario::Continuum => gen_continuum(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario) -> SimSpec {
        SimSpec {
            n: 20,
            n_test: 10,
            d1: 6,
            d2: 7,
            l: 5,
            ..SimSpec::for_scenario(scenario)
        }
    }

    #[test]
    fn cp_activity_pattern() {
        let s = gen_cp::<f64>(&SimSpec::cp()).unwrap();
        let h = &s.truth.h;
        assert_eq!((h.len(), h[0].len()), (2, 11));
        assert_eq!(h[0].iter().filter(|&&x| x).count(), 3);
        assert_eq!(h[1].iter().filter(|&&x| x).count(), 9);
        assert_eq!((0..11).filter(|&k| h[0][k] && h[1][k]).count(), 1);
        assert_eq!(s.truth.tensor_specific(), (3..11).collect::<Vec<_>>());
        let dims: Vec<_> = s.train.views().iter().map(|v| v.data.dims()).collect();
        assert_eq!(dims, vec![(300, 50, 1), (300, 50, 30)]);
    }

    #[test]
    fn cp_data_is_reconstruction_plus_noise() {
        let spec = small(Scenario::Cp);
        let s = gen_cp::<f64>(&spec).unwrap();
        let tr = &s.truth;
        for (t, view) in s.train.views().iter().enumerate() {
            let (n, d, l) = view.data.dims();
            for i in 0..n {
                for j in 0..d {
                    for sl in 0..l {
                        let fit: f64 = (0..tr.z.cols())
                            .map(|k| {
                                let u = if t == 0 { 1.0 } else { tr.u[(sl, k)] };
                                tr.z[(i, k)] * tr.v[t][(j, k)] * u
                            })
                            .sum();
                        let x = view.data.tensor().get(i, j, sl);
                        assert!((x - fit - tr.noise[t].get(i, j, sl)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for sc in [Scenario::Cp, Scenario::RelaxedCp, Scenario::Continuum] {
            let a = generate::<f64>(&small(sc)).unwrap();
            let b = generate::<f64>(&small(sc)).unwrap();
            assert_eq!(a.truth, b.truth);
            for (x, y) in a.train.views().iter().zip(b.train.views()) {
                assert_eq!(x.data, y.data);
            }
        }
    }

    #[test]
    fn noiseless_cp_is_exact() {
        let spec = SimSpec {
            noise_var: 0.0,
            ..small(Scenario::Cp)
        };
        let s = gen_cp::<f64>(&spec).unwrap();
        assert!(s.truth.noise.iter().all(|e| e.as_slice().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn sine_is_standardized_single_period() {
        let v = sine_loading(50);
        let m = v.iter().sum::<f64>() / 50.0;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 50.0;
        assert!(m.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        let sign_changes = v.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        assert!(sign_changes <= 2);
    }

    #[test]
    fn relaxed_powers_grid() {
        let p = relaxed_powers(30);
        assert_eq!(p.len(), 30);
        assert_eq!((p[0], p[1]), (0.5, 1.5));
        assert!((p[2] - 0.3).abs() < 1e-12 && (p[29] - 1.7).abs() < 1e-12);
        // Odd L puts p = 1 on the grid, and that slab is the undistorted sine.
        let spec = SimSpec {
            l: 7,
            ..small(Scenario::RelaxedCp)
        };
        let s = gen_relaxed_cp::<f64>(&spec).unwrap();
        let at_one = s.truth.powers.iter().position(|&p| (p - 1.0).abs() < 1e-12).unwrap();
        assert_eq!(s.truth.slab_weights[at_one], sine_loading(spec.d2));
    }

    #[test]
    fn distorted_slabs_differ() {
        let s = gen_relaxed_cp::<f64>(&SimSpec::relaxed_cp()).unwrap();
        let (a, b) = (&s.truth.slab_weights[0], &s.truth.slab_weights[1]);
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r = dot / (na * nb);
        assert!(r < 0.999 && r > 0.5, "{r}");
    }

    #[test]
    fn continuum_rejects_bad_rho() {
        assert!(gen_continuum::<f64>(&SimSpec::continuum(1.2)).is_err());
        assert!(gen_continuum::<f64>(&SimSpec::continuum(-0.1)).is_err());
    }

    #[test]
    fn continuum_extremes() {
        let spec = SimSpec {
            noise_var: 0.0,
            ..small(Scenario::Continuum)
        };
        // rho = 1: every slab is a scaled copy of the CP slab loading.
        let s = gen_continuum::<f64>(&SimSpec { rho: 1.0, ..spec.clone() }).unwrap();
        let tr = &s.truth;
        let x = s.train.view(1).data.tensor();
        let c = x.get(0, 0, 0) / (0..tr.z.cols()).map(|k| tr.z[(0, k)] * tr.v[1][(0, k)] * tr.u[(0, k)]).sum::<f64>();
        for l in 0..spec.l {
            for j in 0..spec.d2 {
                let fit: f64 = (0..tr.z.cols()).map(|k| tr.z[(3, k)] * tr.v[1][(j, k)] * tr.u[(l, k)]).sum();
                assert!((x.get(3, j, l) - c * fit).abs() < 1e-9);
            }
        }
        // rho = 0: slab l is driven by its own loading matrix.
        let s = gen_continuum::<f64>(&SimSpec { rho: 0.0, ..spec.clone() }).unwrap();
        let tr = &s.truth;
        let x = s.train.view(1).data.tensor();
        let c = x.get(0, 0, 2) / (0..tr.z.cols()).map(|k| tr.z[(0, k)] * tr.bilinear_v[2][(0, k)]).sum::<f64>();
        for j in 0..spec.d2 {
            let fit: f64 = (0..tr.z.cols()).map(|k| tr.z[(5, k)] * tr.bilinear_v[2][(j, k)]).sum();
            assert!((x.get(5, j, 2) - c * fit).abs() < 1e-9);
        }
    }

    #[test]
    fn continuum_masks_first_slab_and_matches_variance() {
        let spec = SimSpec {
            rho: 0.6,
            ..SimSpec::continuum(0.6)
        };
        let s = gen_continuum::<f64>(&spec).unwrap();
        let test = s.test.unwrap();
        let tv = &test.view(1).data;
        assert_eq!(tv.n_samples(), 100);
        for n in 0..100 {
            for d in 0..50 {
                assert!(!tv.is_observed(n, d, 0));
                assert!(tv.is_observed(n, d, 1));
            }
        }
        assert!(test.view(0).data.is_fully_observed());
        // Signal plus unit noise over all samples: variance near 9.
        let truth = s.test_truth.unwrap();
        let vals: Vec<f64> = truth.view(1).data.tensor().as_slice().to_vec();
        let v = variance(&vals);
        assert!((v - 9.0).abs() < 0.45, "{v}");
    }

    #[test]
    fn null_predictor_rmse_is_three() {
        let mut rmses = Vec::new();
        for seed in 0..10 {
            let s = gen_continuum::<f64>(&SimSpec { seed, ..SimSpec::continuum(0.5) }).unwrap();
            let truth = s.test_truth.unwrap();
            let t = truth.view(1).data.tensor();
            let mut ss = 0.0;
            for n in 0..100 {
                for d in 0..50 {
                    ss += t.get(n, d, 0).powi(2);
                }
            }
            rmses.push((ss / 5000.0).sqrt());
        }
        let m = rmses.iter().sum::<f64>() / 10.0;
        assert!((m - 3.0).abs() < 0.15, "{m}");
    }
}
