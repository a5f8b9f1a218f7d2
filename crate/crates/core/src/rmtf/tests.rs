use super::*;
use crate::chain::{run_chain, HyperParams, LambdaMode, Schedule};
use crate::data::{Collection, MaskedTensor3, Tensor3, View};
use crate::dist::RngStream;
use crate::linalg::Mat;
use crate::mtf::{MtfSampler, MtfState};
use crate::scalar::Scalar;
use crate::GibbsSampler;

fn random_tensor(n: usize, d: usize, l: usize, seed: u64) -> Tensor3<f64> {
    let mut rng = RngStream::new(seed, 0);
    Tensor3::from_fn(n, d, l, |_, _, _| f64::standard_normal(&mut rng))
}

fn two_view(n: usize, d: usize, l: usize, seed: u64) -> Collection<f64> {
    Collection::ungrouped(vec![
        View::new("m", MaskedTensor3::fully_observed(random_tensor(n, d, 1, seed))),
        View::new("t", MaskedTensor3::fully_observed(random_tensor(n, d, l, seed + 1))),
    ])
}

fn masked_two_view(n: usize, d: usize, l: usize, seed: u64) -> Collection<f64> {
    let obs = |t: usize| move |i: usize, j: usize, s: usize| (i + 2 * j + 3 * s + t) % 3 != 0;
    Collection::ungrouped(vec![
        View::new("m", MaskedTensor3::with_mask_fn(random_tensor(n, d, 1, seed), obs(0))),
        View::new("t", MaskedTensor3::with_mask_fn(random_tensor(n, d, l, seed + 1), obs(1))),
    ])
}

fn all_masked(n: usize, d: usize, l: usize) -> Collection<f64> {
    Collection::ungrouped(vec![
        View::new("m", MaskedTensor3::with_mask_fn(Tensor3::zeros(n, d, 1), |_, _, _| false)),
        View::new("t", MaskedTensor3::with_mask_fn(Tensor3::zeros(n, d, l), |_, _, _| false)),
    ])
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn brute_sse(st: &RmtfState<f64>, c: &Collection<f64>, t: usize) -> Vec<f64> {
    let fit = st.reconstruct_mean(t);
    let mut out = vec![0.0; st.w[t].len()];
    for ((n, d, l), x) in c.view(t).data.observed_entries() {
        out[l] += (x - fit.get(n, d, l)).powi(2);
    }
    out
}

#[test]
fn zero_components_rejected() {
    let c = two_view(5, 3, 2, 1);
    assert!(RmtfSampler::new(&c, HyperParams::new(0)).is_err());
}

#[test]
fn init_is_deterministic_and_spike_exact() {
    let c = two_view(6, 3, 2, 1);
    let s = RmtfSampler::new(&c, HyperParams::new(3)).unwrap();
    let a = s.init_state(&mut RngStream::new(9, 0)).unwrap();
    let b = s.init_state(&mut RngStream::new(9, 0)).unwrap();
    assert_eq!(a, b);
    assert!(a.spike_exact());
    assert_eq!(a.w[0].len(), 1);
    assert_eq!(a.w[1].len(), 2);
    assert_eq!(a.alpha[1].rows(), 0);
    assert_eq!(a.beta[0].rows(), 0);
    assert!(a.v[0].as_slice().iter().all(|&x| x == 0.0));
}

#[test]
fn initial_tensor_loadings_center_on_trilinear_mean() {
    let c = two_view(4, 3, 2, 1);
    let s = RmtfSampler::new(&c, HyperParams::new(2)).unwrap();
    let mut rng = RngStream::new(3, 0);
    let mut scaled = Vec::new();
    for _ in 0..4000 {
        let st = s.init_state(&mut rng).unwrap();
        for l in 0..2 {
            for d in 0..3 {
                for k in 0..2 {
                    let e = st.w[1][l][(d, k)] - st.u[0][(l, k)] * st.v[1][(d, k)];
                    scaled.push(e * st.lambda[0].sqrt());
                }
            }
        }
    }
    let (m, v) = mean_var(&scaled);
    assert!(m.abs() < 0.03 && (v - 1.0).abs() < 0.05, "{m} {v}");
}

#[test]
fn matrix_loadings_have_slab_variance_one_over_alpha() {
    let c = all_masked(4, 3, 2);
    let mut hp = HyperParams::new(2);
    hp.a_pi = 1e6;
    hp.b_pi = 1e-6;
    let mut s = RmtfSampler::new_unvalidated(&c, hp).unwrap();
    let mut rng = RngStream::new(5, 0);
    let mut st = s.init_state(&mut rng).unwrap();
    st.pi = vec![1.0 - 1e-12; 2];
    st.alpha[0] = Mat::from_fn(3, 2, |d, k| 0.5 + d as f64 + k as f64);
    let mut xs = vec![Vec::new(); 6];
    for _ in 0..20_000 {
        s.update_wh(&mut st, 0, &mut rng).unwrap();
        for d in 0..3 {
            for k in 0..2 {
                xs[d * 2 + k].push(st.w[0][0][(d, k)]);
            }
        }
    }
    for d in 0..3 {
        for k in 0..2 {
            let (m, v) = mean_var(&xs[d * 2 + k]);
            let want = 1.0 / st.alpha[0][(d, k)];
            assert!(m.abs() < 4.0 * (want / 20_000.0).sqrt(), "{m}");
            assert!((v / want - 1.0).abs() < 0.05, "{v} {want}");
        }
    }
}

#[test]
fn tensor_loadings_without_data_follow_slab_prior() {
    let c = all_masked(4, 3, 2);
    let mut s = RmtfSampler::new_unvalidated(&c, HyperParams::new(2)).unwrap();
    let mut rng = RngStream::new(6, 0);
    let mut st = s.init_state(&mut rng).unwrap();
    st.pi = vec![1.0 - 1e-12; 2];
    st.lambda = vec![4.0];
    let mut dev = Vec::new();
    for _ in 0..5000 {
        s.update_wh(&mut st, 1, &mut rng).unwrap();
        for l in 0..2 {
            for d in 0..3 {
                for k in 0..2 {
                    dev.push(st.w[1][l][(d, k)] - st.u[0][(l, k)] * st.v[1][(d, k)]);
                }
            }
        }
    }
    let (m, v) = mean_var(&dev);
    assert!(m.abs() < 4.0 * (0.25 / dev.len() as f64).sqrt(), "{m}");
    assert!((v - 0.25).abs() < 0.01, "{v}");
}

#[test]
fn huge_lambda_pins_slabs_to_trilinear_mean() {
    let c = two_view(20, 4, 3, 2);
    let mut s = RmtfSampler::new(&c, HyperParams::new(2)).unwrap();
    let mut rng = RngStream::new(7, 0);
    let mut st = s.init_state(&mut rng).unwrap();
    st.lambda = vec![1e14];
    st.pi = vec![1.0 - 1e-12; 2];
    s.update_wh(&mut st, 1, &mut rng).unwrap();
    for l in 0..3 {
        for d in 0..4 {
            for k in 0..2 {
                if st.h[1][l][k] {
                    let e = st.w[1][l][(d, k)] - st.u[0][(l, k)] * st.v[1][(d, k)];
                    assert!(e.abs() < 1e-5, "{e}");
                }
            }
        }
    }
}

#[test]
fn cp_embedding_reproduces_strict_reconstruction() {
    let c = two_view(7, 4, 3, 3);
    let s = MtfSampler::new(&c, HyperParams::new(3)).unwrap();
    let m: MtfState<f64> = s.init_state(&mut RngStream::new(1, 0)).unwrap();
    let r = RmtfState::from_mtf(&m, vec![1.0]);
    for t in 0..2 {
        let (a, b) = (m.reconstruct_mean(t), r.reconstruct_mean(t));
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    assert!(r.spike_exact());
}

#[test]
fn reconstruction_cases() {
    let c = two_view(5, 3, 2, 4);
    let s = RmtfSampler::new(&c, HyperParams::new(2)).unwrap();
    let mut st = s.init_state(&mut RngStream::new(2, 0)).unwrap();
    let fit = st.reconstruct_mean(1);
    for n in 0..5 {
        for d in 0..3 {
            for l in 0..2 {
                let mut want = 0.0;
                for k in 0..2 {
                    want += st.z[(n, k)] * st.w[1][l][(d, k)];
                }
                assert!((fit.get(n, d, l) - want).abs() < 1e-12);
            }
        }
    }
    for w in st.w.iter_mut().flatten() {
        w.fill(0.0);
    }
    assert!(st.reconstruct_mean(1).as_slice().iter().all(|&x| x == 0.0));
}

#[test]
fn gram_and_masked_sse_match_brute_force() {
    for c in [two_view(9, 4, 3, 5), masked_two_view(9, 4, 3, 5)] {
        let mut s = RmtfSampler::new(&c, HyperParams::new(3)).unwrap();
        let mut rng = RngStream::new(8, 0);
        let mut st = s.init_state(&mut rng).unwrap();
        for _ in 0..3 {
            s.sweep(&mut st, &mut rng).unwrap();
            for t in 0..2 {
                for (a, b) in s.sse(&st, t).iter().zip(brute_sse(&st, &c, t)) {
                    assert!((a - b).abs() < 1e-9 * (1.0 + b), "{a} {b}");
                }
            }
        }
    }
}

#[test]
fn lambda_conditional_matches_conjugate_posterior() {
    let c = two_view(6, 5, 4, 6);
    let mut s = RmtfSampler::new(&c, HyperParams::new(3)).unwrap();
    let mut rng = RngStream::new(9, 0);
    let mut st = s.init_state(&mut rng).unwrap();
    st.h[1][2][1] = false;
    st.w[1][2].set_col(1, &[0.0; 5]);
    let mut active = 0.0;
    let mut ss = 0.0;
    for l in 0..4 {
        for k in (0..3).filter(|&k| st.h[1][l][k]) {
            for d in 0..5 {
                active += 1.0;
                ss += (st.w[1][l][(d, k)] - st.u[0][(l, k)] * st.v[1][(d, k)]).powi(2);
            }
        }
    }
    let (a, b) = (1.0 + 0.5 * active, 1.0 + 0.5 * ss);
    let frozen = st.clone();
    let mut xs = Vec::new();
    for _ in 0..20_000 {
        let mut tmp = frozen.clone();
        s.update_hypers(&mut tmp, &mut rng).unwrap();
        xs.push(tmp.lambda[0]);
    }
    let (m, v) = mean_var(&xs);
    assert!((m / (a / b) - 1.0).abs() < 0.01, "{m} {}", a / b);
    assert!((v / (a / (b * b)) - 1.0).abs() < 0.05, "{v}");
}

#[test]
fn lambda_modes_have_expected_sizes() {
    let c = two_view(6, 3, 4, 7);
    for (mode, len) in [(LambdaMode::Global, 1), (LambdaMode::PerComponent, 3), (LambdaMode::PerSlab, 4)] {
        let mut hp = HyperParams::new(3);
        hp.lambda_mode = mode;
        let s = RmtfSampler::new(&c, hp).unwrap();
        let st = s.init_state(&mut RngStream::new(1, 0)).unwrap();
        assert_eq!(st.lambda.len(), len);
        assert_eq!(s.lambda_index().get(1, 3, 2), match mode {
            LambdaMode::Global => 0,
            LambdaMode::PerComponent => 2,
            LambdaMode::PerSlab => 3,
        });
    }
}

#[test]
fn lambda_without_data_recovers_prior() {
    let c = all_masked(3, 2, 2);
    let mut hp = HyperParams::new(1);
    hp.a_beta = 1.0;
    hp.b_beta = 1.0;
    hp.a_alpha = 1.0;
    hp.b_alpha = 1.0;
    let mut s = RmtfSampler::new_unvalidated(&c, hp).unwrap();
    let mut rng = RngStream::new(10, 0);
    let mut st = s.init_state(&mut rng).unwrap();
    let mut xs = Vec::new();
    for _ in 0..60_000 {
        s.sweep(&mut st, &mut rng).unwrap();
        xs.push(st.lambda[0]);
    }
    let n = xs.len() as f64;
    let (m, _) = mean_var(&xs);
    let se = (crate::diag::batch_means_variance(&xs) / n).sqrt();
    assert!((m - 1.0).abs() < 4.0 * se, "{m} ± {se}");
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let se2 = (crate::diag::batch_means_variance(&sq) / n).sqrt();
    assert!((m2 - 2.0).abs() < 4.0 * se2, "{m2} ± {se2}");
}

#[test]
fn u_conditional_without_active_slabs_is_prior() {
    let c = two_view(5, 3, 2, 8);
    let mut s = RmtfSampler::new(&c, HyperParams::new(2)).unwrap();
    let mut rng = RngStream::new(11, 0);
    let mut st = s.init_state(&mut rng).unwrap();
    for l in 0..2 {
        st.h[1][l] = vec![false; 2];
        st.w[1][l].fill(0.0);
    }
    let mut xs = Vec::new();
    for _ in 0..20_000 {
        s.update_u(&mut st, 0, &mut rng).unwrap();
        xs.extend_from_slice(st.u[0].as_slice());
    }
    let (m, v) = mean_var(&xs);
    assert!(m.abs() < 0.02 && (v - 1.0).abs() < 0.03, "{m} {v}");
}

#[test]
fn chain_is_deterministic_and_spike_exact() {
    let c = masked_two_view(10, 4, 3, 9);
    let sched = Schedule::new(4, 3, 2).unwrap();
    let run = |seed| {
        let mut s = RmtfSampler::new(&c, HyperParams::new(3)).unwrap();
        run_chain(&mut s, sched, &mut RngStream::new(seed, 0), 0).unwrap()
    };
    let (a, b) = (run(3), run(3));
    assert_eq!(a.snapshots, b.snapshots);
    assert_eq!(a.sweeps, vec![6, 8, 10]);
    assert!(a.snapshots.iter().all(|s| s.spike_exact()));
    for (st, row) in a.snapshots.iter().zip(a.sweeps.iter().map(|&i| &a.trace.mse[i - 1])) {
        for t in 0..2 {
            let n = c.view(t).data.n_observed() as f64;
            let mse = brute_sse(st, &c, t).iter().sum::<f64>() / n;
            assert!((mse - row[t]).abs() < 1e-10);
        }
    }
}

#[test]
fn relaxed_activity_counts_any_slab() {
    let c = two_view(5, 3, 3, 10);
    let s = RmtfSampler::new(&c, HyperParams::new(2)).unwrap();
    let mut st = s.init_state(&mut RngStream::new(1, 0)).unwrap();
    st.h[1] = vec![vec![false, false], vec![true, false], vec![false, false]];
    st.h[0][0] = vec![false, true];
    assert_eq!(st.activity(), vec![vec![false, true], vec![true, false]]);
}
