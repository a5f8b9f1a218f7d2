use super::*;
use crate::chain::{run_chain, HyperParams, Schedule};
use crate::data::{MaskedTensor3, Tensor3, View};
use crate::dist::RngStream;
use crate::mtf::MtfSampler;
use crate::rmtf::RmtfState;

fn normals(n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| f64::standard_normal(rng)).collect()
}

/// Matrix view plus a tensor view, all entries `z_i · v_d · u_l` per view.
fn rank_one_pair(n: usize, d: usize, l: usize, seed: u64) -> (Collection<f64>, Collection<f64>) {
    let mut rng = RngStream::new(seed, 0);
    let vm = normals(d, &mut rng);
    let vt = normals(d, &mut rng);
    let u: Vec<f64> = normals(l, &mut rng).iter().map(|x| x + 1.5).collect();
    let build = |z: &[f64], mask_slab0: bool| {
        let n = z.len();
        let m = Tensor3::from_fn(n, d, 1, |i, j, _| z[i] * vm[j]);
        let t = Tensor3::from_fn(n, d, l, |i, j, s| z[i] * vt[j] * u[s]);
        Collection::ungrouped(vec![
            View::new("m", MaskedTensor3::fully_observed(m)),
            View::new("t", MaskedTensor3::with_mask_fn(t, |_, _, s| !(mask_slab0 && s == 0))),
        ])
    };
    let z_train = normals(n, &mut rng);
    let z_test = normals(10, &mut rng);
    (build(&z_train, false), build(&z_test, true))
}

fn fitted_snapshots(train: &Collection<f64>, seed: u64) -> Vec<MtfState<f64>> {
    let mut s = MtfSampler::new(train, HyperParams::new(2)).unwrap();
    let mut rng = RngStream::new(seed, 0);
    run_chain(&mut s, Schedule::new(300, 20, 5).unwrap(), &mut rng, 0)
        .unwrap()
        .snapshots
}

fn random_state(seed: u64) -> (MtfState<f64>, Collection<f64>) {
    let (train, test) = rank_one_pair(12, 5, 3, seed);
    let s = MtfSampler::new(&train, HyperParams::new(3)).unwrap();
    let mut st = s.init_state(&mut RngStream::new(seed, 1)).unwrap();
    st.h = vec![vec![true, false, true], vec![true, true, true]];
    st.v[0].set_col(1, &[0.0; 5]);
    st.tau = vec![2.0, 3.0];
    (st, test)
}

#[test]
fn mse_trivial_cases() {
    let x = [1.0, -2.0, 3.5, 0.25];
    assert_eq!(mse(&x, &x, &[true; 4]).unwrap(), 0.0);
    let y: Vec<f64> = x.iter().map(|v| v + 0.7).collect();
    let r = rmse(&x, &y, &[true, false, true, true]).unwrap();
    assert!((r - 0.7).abs() < 1e-12);
    assert!(mse(&x, &y, &[false; 4]).is_err());
    assert!(mse(&x, &y[..3], &[true; 3]).is_err());
}

#[test]
fn mse_agrees_with_direct_recomputation() {
    let mut rng = RngStream::new(5, 0);
    let p = normals(200, &mut rng);
    let y = normals(200, &mut rng);
    let mask: Vec<bool> = (0..200).map(|i| i % 3 != 1).collect();
    let sq: Vec<f64> = (0..200).filter(|&i| mask[i]).map(|i| (p[i] - y[i]).powi(2)).collect();
    let oracle = sq.iter().sum::<f64>() / sq.len() as f64;
    assert!((mse(&p, &y, &mask).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn match_components_cases() {
    let mut rng = RngStream::new(9, 0);
    let d = 20_000;
    let a = normals(d, &mut rng);
    let b = normals(d, &mut rng);
    let m = Mat::from_fn(d, 2, |i, c| if c == 0 { -2.0 * a[i] + 1.0 } else { 0.0 });
    let r = match_components(&[a.clone(), b.clone()], &m).unwrap();
    assert!((r[0] - 1.0).abs() < 1e-12);
    assert!(r[1] < 0.05, "{}", r[1]);
    assert!(match_components(&[vec![1.0; d]], &m).is_err());
    assert!(match_components(&[vec![1.0, 2.0]], &m).is_err());
}

#[test]
fn sign_alignment_undoes_flips() {
    let cols: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![-1.2, -1.8], vec![0.8, 2.2]];
    let m = sign_aligned_mean(&cols);
    assert!((m[0] - 1.0).abs() < 1e-12 && (m[1] - 2.0).abs() < 1e-12);
}

#[test]
fn single_snapshot_matches_closed_form() {
    let (st, test) = random_state(3);
    let task = PredictionTask {
        trained: vec![&st],
        test: &test,
        n_stage2_samples: 40_000,
    };
    let p = two_stage_predict(&task, &mut RngStream::new(1, 0)).unwrap();
    // Closed form for sample 0: Λ = I + Σ τ b bᵀ over observed entries.
    let k = 3;
    let mut prec = Mat::identity(k);
    let mut h = vec![0.0; k];
    for t in 0..2 {
        let m = &test.view(t).data;
        for l in 0..m.n_slabs() {
            let b = LoadingProvider::slab_loadings(&st, t, l);
            for d in 0..m.n_features() {
                if m.is_observed(0, d, l) {
                    let tau = st.tau[t];
                    for a in 0..k {
                        h[a] += tau * m.tensor().get(0, d, l) * b[(d, a)];
                        for c in 0..k {
                            prec[(a, c)] += tau * b[(d, a)] * b[(d, c)];
                        }
                    }
                }
            }
        }
    }
    let chol = crate::linalg::Cholesky::factor(&prec).unwrap();
    let mu = chol.solve(&h);
    let b = LoadingProvider::slab_loadings(&st, 1, 0);
    let mut checked = 0;
    for (j, tg) in p.targets.iter().enumerate().filter(|(_, t)| t.sample == 0) {
        let row = b.row(tg.feature);
        let mean: f64 = (0..k).map(|c| mu[c] * row[c]).sum();
        let cov_row = chol.solve(row);
        let var: f64 = (0..k).map(|c| cov_row[c] * row[c]).sum::<f64>() + 1.0 / st.tau[1];
        let se = (var / 40_000.0).sqrt();
        assert!((p.mean[j] - mean).abs() < 5.0 * se, "{} {mean}", p.mean[j]);
        assert!((p.std[j] - var.sqrt()).abs() < 0.02 * var.sqrt());
        checked += 1;
    }
    assert_eq!(checked, 5);
}

#[test]
fn prediction_is_invariant_to_slab_gauge() {
    let (st, test) = random_state(4);
    let mut g = st.clone();
    for (c, scale) in [(0, 3.0), (1, -0.25), (2, 1.7)] {
        for d in 0..g.v[1].rows() {
            g.v[1][(d, c)] *= scale;
        }
        for l in 0..g.u[0].rows() {
            g.u[0][(l, c)] /= scale;
        }
    }
    let run = |s: &MtfState<f64>| {
        let task = PredictionTask {
            trained: vec![s],
            test: &test,
            n_stage2_samples: 10,
        };
        two_stage_predict(&task, &mut RngStream::new(2, 0)).unwrap()
    };
    let (a, b) = (run(&st), run(&g));
    for j in 0..a.mean.len() {
        assert!((a.mean[j] - b.mean[j]).abs() < 1e-10);
        assert!((a.std[j] - b.std[j]).abs() < 1e-10);
    }
}

#[test]
fn more_stage2_samples_reduce_monte_carlo_spread() {
    let (st, test) = random_state(5);
    let spread = |n: usize| {
        let runs: Vec<f64> = (0..40)
            .map(|seed| {
                let task = PredictionTask {
                    trained: vec![&st],
                    test: &test,
                    n_stage2_samples: n,
                };
                two_stage_predict(&task, &mut RngStream::new(seed, 0)).unwrap().mean[0]
            })
            .collect();
        let m = runs.iter().sum::<f64>() / runs.len() as f64;
        runs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (runs.len() - 1) as f64
    };
    let (s2, s10, s50) = (spread(2), spread(10), spread(50));
    assert!(s2 > s10 && s10 > s50, "{s2} {s10} {s50}");
}

#[test]
fn noise_free_rank_one_slab_is_recovered() {
    let (train, test) = rank_one_pair(40, 8, 4, 11);
    let snaps = fitted_snapshots(&train, 12);
    let task = PredictionTask {
        trained: snaps.iter().collect(),
        test: &test,
        n_stage2_samples: 5,
    };
    let p = two_stage_predict(&task, &mut RngStream::new(3, 0)).unwrap();
    let (_, truth) = rank_one_pair(40, 8, 4, 11);
    let mut full = truth.clone();
    for v in full.views_mut() {
        let t = v.data.tensor().clone();
        v.data = MaskedTensor3::fully_observed(t);
    }
    assert_eq!(p.targets.len(), 10 * 8);
    let r = p.rmse(&full).unwrap();
    assert!(r < 0.05, "{r}");
}

#[test]
fn fully_masked_test_predicts_prior_mean() {
    let (st, mut test) = random_state(6);
    for v in test.views_mut() {
        let (n, d, l) = v.data.dims();
        for i in 0..n {
            for j in 0..d {
                for s in 0..l {
                    v.data.set_observed(i, j, s, false);
                }
            }
        }
    }
    let task = PredictionTask {
        trained: vec![&st],
        test: &test,
        n_stage2_samples: 20_000,
    };
    let p = two_stage_predict(&task, &mut RngStream::new(4, 0)).unwrap();
    for (j, tg) in p.targets.iter().enumerate() {
        let b = LoadingProvider::slab_loadings(&st, tg.view, tg.slab);
        let signal: f64 = b.row(tg.feature).iter().map(|x| x * x).sum();
        let total = (signal + 1.0 / st.tau[tg.view]).sqrt();
        assert!(p.mean[j].abs() < 5.0 * (signal / 20_000.0).sqrt() + 1e-12);
        assert!((p.std[j] - total).abs() < 0.03 * total);
    }
}

#[test]
fn empty_targets_and_mismatches_are_rejected() {
    let (st, test) = random_state(7);
    let mut full = test.clone();
    for v in full.views_mut() {
        let t = v.data.tensor().clone();
        v.data = MaskedTensor3::fully_observed(t);
    }
    let task = PredictionTask {
        trained: vec![&st],
        test: &full,
        n_stage2_samples: 1,
    };
    assert!(two_stage_predict(&task, &mut RngStream::new(0, 0)).is_err());
    let (_, other) = rank_one_pair(12, 6, 3, 1);
    let task = PredictionTask {
        trained: vec![&st],
        test: &other,
        n_stage2_samples: 1,
    };
    assert!(two_stage_predict(&task, &mut RngStream::new(0, 0)).is_err());
    let grouped = Collection::new(test.views().to_vec(), vec![vec![1]]);
    let task = PredictionTask {
        trained: vec![&st],
        test: &grouped,
        n_stage2_samples: 1,
    };
    assert!(two_stage_predict(&task, &mut RngStream::new(0, 0)).is_ok());
    let none: Vec<&MtfState<f64>> = Vec::new();
    let task = PredictionTask {
        trained: none,
        test: &test,
        n_stage2_samples: 1,
    };
    assert!(two_stage_predict(&task, &mut RngStream::new(0, 0)).is_err());
}

#[test]
fn relaxed_embedding_predicts_like_strict_state() {
    let (st, test) = random_state(8);
    let r = RmtfState::from_mtf(&st, vec![1e12]);
    let a = two_stage_predict(
        &PredictionTask {
            trained: vec![&st],
            test: &test,
            n_stage2_samples: 10,
        },
        &mut RngStream::new(5, 0),
    )
    .unwrap();
    let b = two_stage_predict(
        &PredictionTask {
            trained: vec![&r],
            test: &test,
            n_stage2_samples: 10,
        },
        &mut RngStream::new(5, 0),
    )
    .unwrap();
    for j in 0..a.mean.len() {
        assert!((a.mean[j] - b.mean[j]).abs() < 1e-12);
    }
}

#[test]
fn report_lists_targets_and_summary() {
    let (st, test) = random_state(9);
    let task = PredictionTask {
        trained: vec![&st],
        test: &test,
        n_stage2_samples: 2,
    };
    let p = two_stage_predict(&task, &mut RngStream::new(6, 0)).unwrap();
    let mut buf = Vec::new();
    let names = vec!["m".to_string(), "t".to_string()];
    let s = ReportSummary::compute(&p, Some(&test)).unwrap();
    write_report(&mut buf, &p, &names, Some(&test), &s).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + p.targets.len() + 3);
    assert!(text.starts_with("view,sample,feature,slab,predicted,posterior_std,truth\n"));
    assert_eq!(s.n_targets, 50);
    assert!(text.contains("# n_targets=50"));
    let mut buf = Vec::new();
    let s = ReportSummary::compute(&p, None).unwrap();
    write_report(&mut buf, &p, &names, None, &s).unwrap();
    assert!(s.rmse.is_none());
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("view,sample,feature,slab,predicted,posterior_std\n"));
    assert!(!text.contains("rmse"));
    assert_eq!(text.lines().count(), 1 + p.targets.len() + 1);
}
