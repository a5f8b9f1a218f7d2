use approx::assert_relative_eq;
use mtf_core::data::center_and_normalize;
use mtf_core::io::{read_collection, write_collection};
use mtf_core::predict::{mse, two_stage_predict, PredictionTask};
use mtf_core::simgen::{generate, SimSpec};
use mtf_core::{
    run_chains, Collection, HyperParams, MaskedTensor3, MtfSampler, NoisePrior, RmtfSampler, RngStream, ScaleMode,
    Scalar, Schedule, Tensor3, View,
};
use proptest::prelude::*;

fn small_spec(seed: u64) -> SimSpec {
    SimSpec {
        seed,
        n: 25,
        d1: 6,
        d2: 5,
        l: 4,
        ..SimSpec::cp()
    }
}

fn hypers<F: Scalar>(k: usize) -> HyperParams<F> {
    let mut hp = HyperParams::new(k);
    hp.noise = NoisePrior::SnrScaled {
        conf: F::one(),
        snr: F::one(),
    };
    hp
}

/// Masks slab 0 of the tensor view for every other sample.
fn mask_slab0<F: Scalar>(c: &Collection<F>) -> Collection<F> {
    let mut out = c.clone();
    let t = out.views()[1].data.tensor().clone();
    out.views_mut()[1].data = MaskedTensor3::with_mask_fn(t, |n, _, l| !(l == 0 && n % 2 == 0));
    out
}

fn fit_and_predict<F: Scalar>() -> (Vec<F>, Vec<F>, usize) {
    let sim = generate::<F>(&small_spec(4)).unwrap();
    let (train, _) = center_and_normalize(&sim.train, ScaleMode::Feature).unwrap();
    let schedule = Schedule::new(150, 10, 3).unwrap();
    let chains = run_chains(2, 1, 8, 0, schedule, || MtfSampler::new(&train, hypers::<F>(5))).unwrap();
    assert!(chains.iter().flat_map(|c| &c.snapshots).all(|s| s.spike_exact()));
    let test = mask_slab0(&train);
    let task = PredictionTask::from_chains(&chains, &test, 3);
    let p = two_stage_predict(&task, &mut RngStream::new(1, 0)).unwrap();
    let truth = p.truth(&train).unwrap();
    (p.mean, truth, p.targets.len())
}

#[test]
fn f32_and_f64_pipelines_predict_held_out_slab() {
    let (m64, t64, n64) = fit_and_predict::<f64>();
    let (m32, t32, n32) = fit_and_predict::<f32>();
    assert_eq!(n64, n32);
    let mask = vec![true; n64];
    let e64 = mse(&m64, &t64, &mask).unwrap();
    let e32 = mse(&m32, &t32, &mask).unwrap();
    assert!(e64 < 0.6, "f64 mse {e64}");
    assert!(e32 < 0.6, "f32 mse {e32}");
    assert!(m32.iter().all(|x| x.is_finite()));
}

#[test]
fn relaxed_sampler_runs_in_f32() {
    let sim = generate::<f32>(&small_spec(2)).unwrap();
    let (train, _) = center_and_normalize(&sim.train, ScaleMode::Feature).unwrap();
    let schedule = Schedule::new(60, 5, 2).unwrap();
    let chains = run_chains(1, 1, 3, 0, schedule, || RmtfSampler::new(&train, hypers::<f32>(4))).unwrap();
    assert_eq!(chains[0].snapshots.len(), 5);
    assert!(chains[0].snapshots.iter().all(|s| s.spike_exact()));
    assert!(chains[0].trace.log_joint.iter().all(|x| x.is_finite()));
}

#[test]
fn collections_round_trip_through_files() {
    let sim = generate::<f64>(&small_spec(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_collection(dir.path(), &sim.train).unwrap();
    let back: Collection<f64> = read_collection(dir.path()).unwrap();
    assert_eq!(back.n_views(), 2);
    for (a, b) in sim.train.views().iter().zip(back.views()) {
        assert_eq!(a.name, b.name);
        for (x, y) in a.data.tensor().as_slice().iter().zip(b.data.tensor().as_slice()) {
            assert_relative_eq!(*x, *y, max_relative = 1e-15);
        }
    }
}

fn collection_from(values: &[f64], n: usize) -> Collection<f64> {
    let m = Tensor3::from_fn(n, 2, 1, |i, d, _| values[(i * 2 + d) % values.len()] + (i * d) as f64);
    let t = Tensor3::from_fn(n, 2, 3, |i, d, l| values[(i + 3 * d + 5 * l) % values.len()] * (1 + l) as f64 + i as f64);
    Collection::ungrouped(vec![
        View::new("m", MaskedTensor3::fully_observed(m)),
        View::new("t", MaskedTensor3::fully_observed(t)),
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn preprocessing_inverts(values in proptest::collection::vec(-50.0f64..50.0, 7..20), fiber in any::<bool>()) {
        let c = collection_from(&values, 6);
        let mode = if fiber { ScaleMode::Fiber } else { ScaleMode::Feature };
        let (pre, tr) = center_and_normalize(&c, mode).unwrap();
        let back = tr.inverse(&pre).unwrap();
        for (a, b) in c.views().iter().zip(back.views()) {
            for (x, y) in a.data.tensor().as_slice().iter().zip(b.data.tensor().as_slice()) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn mse_is_symmetric_and_zero_on_identity(a in proptest::collection::vec(-10.0f64..10.0, 1..30), shift in -3.0f64..3.0) {
        let b: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let mask = vec![true; a.len()];
        prop_assert_eq!(mse(&a, &a, &mask).unwrap(), 0.0);
        let e = mse(&a, &b, &mask).unwrap();
        prop_assert!((e - mse(&b, &a, &mask).unwrap()).abs() < 1e-12);
        prop_assert!((e - shift * shift).abs() < 1e-9);
    }
}
