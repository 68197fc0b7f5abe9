use approx::assert_abs_diff_eq;
use rand::Rng;

use super::gradcheck;
use super::layers::*;
use super::model::*;
use super::train::*;
use crate::rng;

fn t(n: usize, h: usize, w: usize, c: usize, data: Vec<f64>) -> Tensor {
    Tensor::from_vec(n, h, w, c, data).unwrap()
}

fn ramp(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 * 0.37).sin()).collect()
}

#[test]
fn conv_identity_kernel_copies_input() {
    let x = t(1, 4, 4, 2, ramp(32));
    // 3x3 kernel, centre tap maps channel i -> channel i.
    let mut w = vec![0.0; 9 * 2 * 2];
    for ci in 0..2 {
        w[((3 + 1) * 2 + ci) * 2 + ci] = 1.0;
    }
    let mut conv = Conv2d::from_weights(3, 2, 2, w, vec![0.0; 2]).unwrap();
    let y = conv.forward(&x, false).unwrap();
    assert_eq!(y.data, x.data);
}

#[test]
fn conv_zero_kernel_gives_bias() {
    let x = t(2, 3, 3, 1, ramp(18));
    let mut conv = Conv2d::from_weights(3, 1, 2, vec![0.0; 18], vec![0.5, -1.0]).unwrap();
    let y = conv.forward(&x, false).unwrap();
    for px in y.data.chunks(2) {
        assert_eq!(px, &[0.5, -1.0]);
    }
}

#[test]
fn conv_matches_nested_loop_oracle() {
    let mut r = rng::rng(3);
    for k in [1usize, 2, 3, 4] {
        let (h, w, cin, cout) = (5, 6, 2, 3);
        let x = t(
            2,
            h,
            w,
            cin,
            (0..2 * h * w * cin)
                .map(|_| r.random::<f64>() - 0.5)
                .collect(),
        );
        let wt: Vec<f64> = (0..k * k * cin * cout)
            .map(|_| r.random::<f64>() - 0.5)
            .collect();
        let b: Vec<f64> = (0..cout).map(|_| r.random::<f64>()).collect();
        let mut conv = Conv2d::from_weights(k, cin, cout, wt.clone(), b.clone()).unwrap();
        let y = conv.forward(&x, false).unwrap();
        let p = ((k - 1) / 2) as isize;
        for n in 0..2 {
            for oy in 0..h {
                for ox in 0..w {
                    for co in 0..cout {
                        let mut s = b[co];
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = oy as isize + ky as isize - p;
                                let ix = ox as isize + kx as isize - p;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                for ci in 0..cin {
                                    let xv = x.data
                                        [((n * h + iy as usize) * w + ix as usize) * cin + ci];
                                    s += xv * wt[((ky * k + kx) * cin + ci) * cout + co];
                                }
                            }
                        }
                        let got = y.data[((n * h + oy) * w + ox) * cout + co];
                        assert_abs_diff_eq!(got, s, epsilon = 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn batch_norm_train_output_is_standardized() {
    let x = t(4, 3, 3, 2, ramp(72).iter().map(|v| 3.0 * v + 2.0).collect());
    let mut bn = BatchNorm::new(2);
    let y = bn.forward(&x, Mode::Train, false).unwrap();
    for ch in 0..2 {
        let vals: Vec<f64> = y.data.iter().skip(ch).step_by(2).copied().collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-4);
    }
    // Running statistics move 10% toward the batch, with unbiased variance.
    let xs: Vec<f64> = x.data.iter().step_by(2).copied().collect();
    let mean = xs.iter().sum::<f64>() / 36.0;
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 35.0;
    assert_abs_diff_eq!(bn.running_mean[0], 0.1 * mean, epsilon = 1e-12);
    assert_abs_diff_eq!(bn.running_var[0], 0.9 + 0.1 * var, epsilon = 1e-12);
}

#[test]
fn batch_norm_infer_uses_running_stats() {
    let mut bn = BatchNorm::new(1);
    bn.running_mean = vec![2.0];
    bn.running_var = vec![4.0 - 1e-5];
    bn.gamma.value = vec![3.0];
    bn.beta.value = vec![1.0];
    let y = bn
        .forward(&t(1, 1, 2, 1, vec![2.0, 4.0]), Mode::Infer, false)
        .unwrap();
    assert_abs_diff_eq!(y.data[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(y.data[1], 4.0, epsilon = 1e-12);
}

#[test]
fn relu_and_pool_examples() {
    let x = t(1, 2, 2, 1, vec![-1.0, 2.0, 0.5, -3.0]);
    assert_eq!(relu(&x).data, vec![0.0, 2.0, 0.5, 0.0]);
    let x = t(1, 2, 4, 1, vec![1.0, 5.0, 2.0, 0.0, 3.0, -1.0, 7.0, 1.0]);
    let (p, arg) = max_pool(&x).unwrap();
    assert_eq!(p.data, vec![5.0, 7.0]);
    assert_eq!(arg, vec![1, 6]);
    let g = max_pool_backward(x.shape(), &arg, &t(1, 1, 2, 1, vec![10.0, 20.0]));
    assert_eq!(g.data, vec![0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 20.0, 0.0]);
    assert!(max_pool(&t(1, 3, 2, 1, vec![0.0; 6])).is_err());
}

#[test]
fn softmax_and_score_formula() {
    let p = softmax(&[1.0, 0.0]);
    let e = std::f64::consts::E;
    assert_abs_diff_eq!(p[0], e / (e + 1.0), epsilon = 1e-15);
    assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    // Large logits stay finite.
    let p = softmax(&[1000.0, -1000.0]);
    assert_eq!(p, vec![1.0, 0.0]);
    let (loss, g) = cross_entropy(&[0.0, 0.0], &[0], 2);
    assert_abs_diff_eq!(loss, 2f64.ln(), epsilon = 1e-15);
    assert_eq!(g, vec![-0.5, 0.5]);
}

#[test]
fn mirror_maps_to_unit_zero() {
    assert_eq!(class_index(1), 0);
    assert_eq!(class_index(0), 1);
}

#[test]
fn dropout_keeps_expectation() {
    let x = t(1, 1, 1, 1, vec![1.0]);
    let mut r = rng::rng(11);
    let draws = 10_000;
    let rate = 0.3;
    let (mut sum, mut zeros) = (0.0, 0);
    for _ in 0..draws {
        let (y, _) = dropout(&x, rate, Mode::Train, &mut r);
        sum += y.data[0];
        zeros += (y.data[0] == 0.0) as usize;
    }
    // Mean of scaled Bernoulli: sd = sqrt(rate/(1-rate)/n) ~ 0.0065.
    assert!((sum / draws as f64 - 1.0).abs() < 0.03);
    assert!((zeros as f64 / draws as f64 - rate).abs() < 0.02);
    let (y, mask) = dropout(&x, rate, Mode::Infer, &mut r);
    assert_eq!(y.data, vec![1.0]);
    assert!(mask.is_none());
}

#[test]
fn sgd_momentum_two_steps() {
    let mut w = vec![1.0];
    let mut v = vec![0.0];
    sgd_step(&mut w, &[2.0], &mut v, 0.1, 0.9);
    assert_abs_diff_eq!(v[0], -0.2, epsilon = 1e-15);
    assert_abs_diff_eq!(w[0], 0.8, epsilon = 1e-15);
    sgd_step(&mut w, &[1.0], &mut v, 0.1, 0.9);
    assert_abs_diff_eq!(v[0], -0.28, epsilon = 1e-15);
    assert_abs_diff_eq!(w[0], 0.52, epsilon = 1e-15);
}

#[test]
fn param_count_one_block_by_hand() {
    let cfg = CnnConfig {
        depth: 1,
        filter_sizes: [3, 3, 5],
        num_filters: [4, 4, 6],
        ..CnnConfig::default()
    };
    // Block uses the last pair: 5x5x3x6 + 6 bias + 12 bn; fc from 32x32x6.
    let want = 5 * 5 * 3 * 6 + 6 + 12 + 32 * 32 * 6 * 2 + 2;
    assert_eq!(cfg.param_count(64), want);
    assert_eq!(CnnModel::new(cfg, 64, 0).unwrap().param_count(), want);
    let d = CnnConfig::default();
    assert_eq!(
        CnnModel::new(d, 64, 0).unwrap().param_count(),
        d.param_count(64)
    );
}

#[test]
fn deep_networks_pool_only_last_three() {
    let cfg = CnnConfig {
        depth: 5,
        ..CnnConfig::default()
    };
    let pools: Vec<bool> = (0..5).map(|i| cfg.pooled(i)).collect();
    assert_eq!(pools, vec![false, false, true, true, true]);
    assert_eq!(cfg.block_spec(0), (3, 8));
    assert_eq!(cfg.block_spec(3), (3, 16));
    assert_eq!(cfg.output_side(64), 8);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        CnnConfig {
            depth: 0,
            ..CnnConfig::default()
        },
        CnnConfig {
            dropout: 1.0,
            ..CnnConfig::default()
        },
        CnnConfig {
            batch_size: 1,
            ..CnnConfig::default()
        },
        CnnConfig {
            initial_lr: 0.0,
            ..CnnConfig::default()
        },
    ];
    for c in bad {
        assert!(CnnModel::new(c, 64, 0).is_err());
    }
    assert!(CnnModel::new(CnnConfig::default(), 12, 0).is_err());
}

#[test]
fn gradients_match_finite_differences() {
    for rep in gradcheck::run_all(5).unwrap() {
        assert!(rep.checked > 0);
        assert!(
            rep.max_rel_error < 1e-4,
            "{}: {}",
            rep.name,
            rep.max_rel_error
        );
    }
}

fn toy_set(n: usize, side: usize, shuffle_labels: bool, seed: u64) -> ImageSet {
    let mut r = rng::rng(seed);
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = (i % 2) as u8;
        let base = if label == 1 { 0.7 } else { 0.3 };
        pixels.extend((0..side * side * 3).map(|_| base + 0.1 * (r.random::<f64>() - 0.5)));
        labels.push(label);
    }
    if shuffle_labels {
        use rand::seq::SliceRandom;
        labels.shuffle(&mut r);
    }
    ImageSet {
        side,
        pixels,
        labels,
    }
}

fn toy_config() -> CnnConfig {
    CnnConfig {
        depth: 1,
        filter_sizes: [3, 3, 3],
        num_filters: [2, 2, 2],
        dropout: 0.0,
        initial_lr: 0.05,
        l2: 1e-4,
        batch_size: 16,
        momentum: 0.9,
    }
}

#[test]
fn separable_toy_is_learned() {
    let tc = TrainConfig {
        max_epochs: 15,
        patience: 15,
        ..TrainConfig::default()
    };
    let m = train(
        &toy_config(),
        &tc,
        &toy_set(64, 8, false, 1),
        &toy_set(32, 8, false, 2),
        0,
    )
    .unwrap();
    assert_eq!(
        m.history
            .iter()
            .map(|h| h.best_val_accuracy)
            .fold(0.0, f64::max),
        1.0
    );
    let mut m = m;
    let test = toy_set(32, 8, false, 3);
    let acc = crate::cv::accuracy(&score_set(&mut m, &test).unwrap(), &test.labels);
    assert_eq!(acc, 1.0);
}

#[test]
fn shuffled_labels_stay_near_chance() {
    let set = toy_set(200, 8, true, 4);
    let tc = TrainConfig {
        max_epochs: 5,
        ..TrainConfig::default()
    };
    let res = cnn_crossval(&toy_config(), &tc, &set, 2, 9).unwrap();
    // Two instances over 200 images: binomial sd ~ 0.035.
    assert!(
        (res.mean_accuracy() - 0.5).abs() < 0.15,
        "{}",
        res.mean_accuracy()
    );
}

#[test]
fn training_is_deterministic() {
    let tc = TrainConfig {
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let cfg = CnnConfig {
        dropout: 0.2,
        ..toy_config()
    };
    let a = train(
        &cfg,
        &tc,
        &toy_set(32, 8, false, 1),
        &toy_set(8, 8, false, 2),
        7,
    )
    .unwrap();
    let b = train(
        &cfg,
        &tc,
        &toy_set(32, 8, false, 1),
        &toy_set(8, 8, false, 2),
        7,
    )
    .unwrap();
    assert_eq!(a.fc.weight.value, b.fc.weight.value);
    assert_eq!(a.history, b.history);
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mgcn");
    let tc = TrainConfig {
        max_epochs: 2,
        ..TrainConfig::default()
    };
    let mut m = train(
        &toy_config(),
        &tc,
        &toy_set(32, 8, false, 1),
        &toy_set(8, 8, false, 2),
        7,
    )
    .unwrap();
    m.save(&path).unwrap();
    let mut back = CnnModel::load(&path).unwrap();
    assert_eq!(back.config, m.config);
    assert_eq!(back.history, m.history);
    let x = toy_set(6, 8, false, 5).batch(&[0, 1, 2, 3, 4, 5]);
    let (a, b) = (m.scores(&x).unwrap(), back.scores(&x).unwrap());
    for (u, v) in a.iter().zip(&b) {
        assert_abs_diff_eq!(u, v, epsilon = 1e-5);
    }
    std::fs::write(&path, b"nope").unwrap();
    assert!(CnnModel::load(&path).is_err());
}

#[test]
fn holdout_split_is_stratified_and_disjoint() {
    let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
    let idx: Vec<usize> = (0..40).collect();
    let (tr, va) = holdout_split(&labels, &idx, 0.1, 3);
    assert_eq!(va.len(), 4);
    assert_eq!(va.iter().filter(|&&i| labels[i] == 1).count(), 2);
    assert_eq!(tr.len() + va.len(), 40);
    assert!(tr.iter().all(|i| !va.contains(i)));
}
