use approx::assert_abs_diff_eq;
use rand::Rng;

use super::*;
use crate::image::{Image, ImageStage};
use crate::rng;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("img{i}")).collect()
}

#[test]
fn score_rdm_examples() {
    let r = rdm_from_scores(names(2), &[0.2, 0.9]).unwrap();
    assert_abs_diff_eq!(r.get(0, 1), 0.7, epsilon = 1e-15);
    assert!(r.is_symmetric());
    let z = rdm_from_scores(names(3), &[0.4; 3]).unwrap();
    assert!(z.data.iter().all(|&v| v == 0.0));
    let s = [0.1, 0.5, 0.3, 0.8];
    let shifted: Vec<f64> = s.iter().map(|v| v + 0.25).collect();
    let (a, b) = (
        rdm_from_scores(names(4), &s).unwrap(),
        rdm_from_scores(names(4), &shifted).unwrap(),
    );
    for (x, y) in a.data.iter().zip(&b.data) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-15);
    }
    assert!(rdm_from_scores(names(1), &[0.3]).is_err());
}

#[test]
fn activation_rdm_matches_brute_force() {
    let mut r = rng::rng(1);
    let acts: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..7).map(|_| r.random::<f64>()).collect())
        .collect();
    let m = rdm_from_activations(names(10), &acts).unwrap();
    for i in 0..10 {
        for j in 0..10 {
            let mut s = 0.0;
            for k in 0..7 {
                s += (acts[i][k] - acts[j][k]).powi(2);
            }
            assert_abs_diff_eq!(m.get(i, j), s.sqrt(), epsilon = 1e-14);
        }
    }
    let o =
        rdm_from_activations(names(3), &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert_abs_diff_eq!(o.get(0, 1), 2f64.sqrt(), epsilon = 1e-15);
    assert_eq!(o.get(0, 2), 0.0);
    assert!(rdm_from_activations(names(2), &[vec![1.0], vec![1.0, 2.0]]).is_err());
}

#[test]
fn rdm_correlation_examples() {
    let a = rdm_from_scores(names(5), &[0.1, 0.7, 0.3, 0.95, 0.5]).unwrap();
    assert_abs_diff_eq!(correlate_rdms(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
    let mut b = a.clone();
    b.data.iter_mut().enumerate().for_each(|(i, v)| {
        if i % 6 != 0 {
            *v = 2.0 * *v + 1.0
        }
    });
    assert_abs_diff_eq!(correlate_rdms(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
    let rev = Rdm::from_fn(names(5), |i, j| 10.0 - a.get(i, j));
    assert_abs_diff_eq!(correlate_rdms(&a, &rev).unwrap(), -1.0, epsilon = 1e-12);
    let flat = rdm_from_scores(names(5), &[0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
    let zero = rdm_from_scores(names(5), &[0.2; 5]).unwrap();
    assert!(matches!(
        correlate_rdms(&flat, &zero),
        Err(crate::Error::UndefinedCorrelation(_))
    ));
}

#[test]
fn correlation_survives_common_reordering() {
    let mut r = rng::rng(2);
    let s1: Vec<f64> = (0..8).map(|_| r.random()).collect();
    let s2: Vec<f64> = (0..8).map(|_| r.random()).collect();
    let (a, b) = (
        rdm_from_scores(names(8), &s1).unwrap(),
        rdm_from_scores(names(8), &s2).unwrap(),
    );
    let perm = [3, 7, 0, 5, 1, 6, 2, 4];
    let (pa, pb) = (a.reorder(&perm).unwrap(), b.reorder(&perm).unwrap());
    assert!(pa.is_symmetric());
    assert_abs_diff_eq!(
        correlate_rdms(&a, &b).unwrap(),
        correlate_rdms(&pa, &pb).unwrap(),
        epsilon = 1e-12
    );
    assert!(a.reorder(&[0, 0, 1, 2, 3, 4, 5, 6]).is_err());
}

#[test]
fn ccm_properties() {
    let a = rdm_from_scores(names(6), &[0.1, 0.2, 0.8, 0.9, 0.4, 0.6]).unwrap();
    let b = rdm_from_scores(names(6), &[0.3, 0.1, 0.7, 0.6, 0.5, 0.9]).unwrap();
    let m = ccm(
        &[("a".into(), a.clone()), ("a2".into(), a), ("b".into(), b)],
        10,
        4,
    )
    .unwrap();
    assert_eq!(m.n, 13);
    assert!(m.is_symmetric());
    assert_eq!(m.get(0, 1), 0.0);
    assert!(m.data.iter().all(|v| (0.0..=2.0).contains(v)));
    assert_eq!(m.names[3], "random-0");
    let again = ccm(&[("a".into(), m.clone()), ("b".into(), m.clone())], 0, 0).unwrap();
    assert_eq!(again.n, 2);
    let r = random_rdm(names(5), 9);
    assert!(r.is_symmetric() && r.data.iter().all(|v| (0.0..1.0).contains(v)));
    assert_eq!(r, random_rdm(names(5), 9));
}

#[test]
fn real_classifiers_beat_random_controls() {
    // A noisy copy of the reference is closer to it than uniform controls.
    let mut r = rng::rng(7);
    let human: Vec<f64> = (0..30).map(|_| r.random()).collect();
    let model: Vec<f64> = human.iter().map(|h| h + 0.1 * r.random::<f64>()).collect();
    let m = ccm(
        &[
            ("human".into(), rdm_from_scores(names(30), &human).unwrap()),
            ("model".into(), rdm_from_scores(names(30), &model).unwrap()),
        ],
        10,
        1,
    )
    .unwrap();
    let random_mean = (2..12).map(|j| m.get(0, j)).sum::<f64>() / 10.0;
    assert!(m.get(0, 1) < random_mean);
}

#[test]
fn ordering_is_class_block_then_rating() {
    let n = names(5);
    let labels = [0, 1, 0, 1, 1];
    let ratings = [0.9, 0.2, 0.1, 0.8, 0.8];
    let order = rdm_order(&n, &labels, &ratings).unwrap();
    assert_eq!(order, vec![3, 4, 1, 0, 2]);
    assert_eq!(order, rdm_order(&n, &labels, &ratings).unwrap());
}

#[test]
fn rdm_io_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.rdm");
    let a = rdm_from_scores(names(4), &[0.1, 0.2, 0.35, 0.9]).unwrap();
    a.write(&p, &serde_json::json!({"labels": [1, 0, 1, 0]}))
        .unwrap();
    assert_eq!(Rdm::read(&p).unwrap(), a);
    let csv = a.to_csv();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("name,img0,img1,img2,img3\n"));
    std::fs::write(&p, b"MGDM").unwrap();
    assert!(Rdm::read(&p).is_err());
}

fn dist_matrix(pts: &[Vec<f64>]) -> Vec<f64> {
    let n = pts.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = mds::euclid(&pts[i], &pts[j]);
        }
    }
    d
}

#[test]
fn mds_equilateral_triangle() {
    let d = [0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
    let m = classical_mds(&d, 3, 2).unwrap();
    assert_eq!(m.dims, 2);
    assert!(!m.reduced);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert_abs_diff_eq!(mds::euclid(&m.coords[i], &m.coords[j]), 1.0, epsilon = 1e-9);
    }
}

#[test]
fn mds_recovers_planted_configuration() {
    let mut r = rng::rng(5);
    let pts: Vec<Vec<f64>> = (0..12)
        .map(|_| vec![r.random::<f64>() * 4.0, r.random::<f64>()])
        .collect();
    let m = classical_mds(&dist_matrix(&pts), 12, 2).unwrap();
    assert!(m.stress < 1e-6);
    assert!(procrustes_error(&m.coords, &pts).unwrap() < 1e-8);
    // Asking for more dimensions than the data has.
    let m3 = classical_mds(&dist_matrix(&pts), 12, 3).unwrap();
    assert!(m3.reduced);
    assert_eq!(m3.dims, 2);
}

#[test]
fn mds_zero_matrix_collapses() {
    let m = classical_mds(&[0.0; 16], 4, 2).unwrap();
    assert!(m.coords.iter().all(|c| c.iter().all(|&v| v == 0.0)));
    assert_eq!(m.stress, 0.0);
    assert!(classical_mds(&[0.0, 1.0, 2.0, 0.0], 2, 1).is_err());
}

#[test]
fn procrustes_ignores_rotation_and_reflection() {
    let pts = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 2.0],
        vec![3.0, 1.0],
    ];
    let (c, s) = (0.6f64, 0.8f64);
    let rot: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| vec![c * p[0] - s * p[1] + 5.0, -(s * p[0] + c * p[1])])
        .collect();
    assert!(procrustes_error(&pts, &rot).unwrap() < 1e-12);
    let bent = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 2.0],
        vec![3.0, 3.0],
    ];
    assert!(procrustes_error(&pts, &bent).unwrap() > 0.1);
}

#[test]
fn accuracy_examples() {
    let labels = [1, 0, 1, 0];
    assert_eq!(accuracy(&[0.9, 0.1, 0.8, 0.2], &labels), 1.0);
    assert_eq!(accuracy(&[0.1, 0.9, 0.2, 0.8], &labels), 0.0);
    let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
    let s = [0.7, 0.3, 0.2, 0.6];
    assert_eq!(accuracy(&s, &labels) + accuracy(&s, &flipped), 1.0);
    assert_eq!(accuracy(&[0.5, 0.5], &[1, 0]), 0.0);
}

#[test]
fn human_consistency_examples() {
    let base = vec![0.1, 0.5, 0.9, 0.3];
    let same = human_to_human(&[base.clone(), base.clone(), base.clone()]).unwrap();
    assert_eq!(same.per_observer.len(), 3);
    for r in &same.per_observer {
        assert_abs_diff_eq!(r.unwrap(), 1.0, epsilon = 1e-12);
    }
    let neg: Vec<f64> = base.iter().map(|v| 1.0 - v).collect();
    let mixed = human_to_human(&[base.clone(), base.clone(), base.clone(), neg]).unwrap();
    assert!(mixed.per_observer[3].unwrap() < 0.0);
    let flat = human_to_human(&[base.clone(), base.clone(), vec![0.5; 4]]).unwrap();
    assert_eq!(flat.excluded, vec![2]);
    assert!(flat.per_observer[2].is_none());
    assert!(human_to_human(&[base.clone(), base]).is_err());
}

/// Two-tailed p for integer df from the closed-form trigonometric series of
/// the t distribution (Abramowitz & Stegun 26.7.3/26.7.4).
fn series_p(t: f64, df: usize) -> f64 {
    let th = (t.abs() / (df as f64).sqrt()).atan();
    let (s, c) = (th.sin(), th.cos());
    let a = if df % 2 == 1 {
        let mut sum = 0.0;
        if df > 1 {
            let mut term = c;
            sum = term;
            for k in 1..(df - 1) / 2 {
                term *= c * c * (2 * k) as f64 / (2 * k + 1) as f64;
                sum += term;
            }
        }
        2.0 / std::f64::consts::PI * (th + s * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..df / 2 {
            term *= c * c * (2 * k - 1) as f64 / (2 * k) as f64;
            sum += term;
        }
        s * sum
    };
    1.0 - a
}

#[test]
fn t_p_values_match_series() {
    for df in [1usize, 2, 3, 9, 10, 18, 25] {
        for t in [0.0, 0.3, 1.0, 2.1, 4.5] {
            assert_abs_diff_eq!(
                t_two_tailed_p(t, df as f64),
                series_p(t, df),
                epsilon = 1e-10
            );
        }
    }
    // Cauchy: P(|T| > 1) = 1/2.
    assert_abs_diff_eq!(t_two_tailed_p(1.0, 1.0), 0.5, epsilon = 1e-14);
}

#[test]
fn two_sample_matches_hand_formula() {
    let a = [12.0, 15.0, 11.0, 14.0, 13.0, 16.0, 12.0, 15.0, 14.0, 13.0];
    let b = [10.0, 12.0, 9.0, 11.0, 13.0, 10.0, 11.0, 12.0, 10.0, 9.0];
    // Means 13.5 and 10.7; sums of squares 22.5 and 16.1.
    let sp: f64 = (22.5 + 16.1) / 18.0;
    let t = (13.5 - 10.7) / (sp * (0.1 + 0.1f64)).sqrt();
    let r = ttest(&a, &b, TTestMode::TwoSample).unwrap();
    assert_eq!(r.df, 18);
    assert_abs_diff_eq!(r.t, t, epsilon = 1e-10);
    assert_abs_diff_eq!(r.p, series_p(t, 18), epsilon = 1e-10);
    assert!(!r.zero_variance);
}

#[test]
fn paired_matches_hand_formula() {
    let a = [5.0, 7.0, 6.0, 9.0, 8.0, 7.0, 6.0, 8.0, 9.0, 7.0];
    let b = [4.0, 5.0, 6.0, 6.0, 7.0, 5.0, 5.0, 6.0, 7.0, 6.0];
    // Differences 1,2,0,3,1,2,1,2,2,1: mean 1.5, sum of squares 6.5.
    let t = 1.5 / ((6.5 / 9.0) / 10.0f64).sqrt();
    let r = ttest(&a, &b, TTestMode::Paired).unwrap();
    assert_eq!(r.df, 9);
    assert_abs_diff_eq!(r.t, t, epsilon = 1e-10);
    assert_abs_diff_eq!(r.p, series_p(t, 9), epsilon = 1e-10);
}

#[test]
fn ttest_zero_variance_flags() {
    let a = [1.0, 2.0, 3.0];
    let r = ttest(&a, &a, TTestMode::Paired).unwrap();
    assert!(r.zero_variance);
    assert_eq!(r.t, 0.0);
    let shifted = [2.0, 3.0, 4.0];
    let r = ttest(&a, &shifted, TTestMode::Paired).unwrap();
    assert!(r.zero_variance && r.t.is_infinite() && r.p == 0.0);
    assert!(ttest(&a, &[1.0, 2.0], TTestMode::Paired).is_err());
}

fn display_images(n: usize, seed: u64) -> Vec<Image> {
    let mut r = rng::rng(seed);
    (0..n)
        .map(|_| {
            let v: f32 = r.random_range(0.1..0.9);
            Image::filled(4, 4, ImageStage::Display, [v, v, v])
        })
        .collect()
}

fn mean_score(imgs: &[Image]) -> crate::Result<Vec<f64>> {
    Ok(imgs
        .iter()
        .map(|i| i.data.iter().map(|&v| v as f64).sum::<f64>() / i.data.len() as f64)
        .collect())
}

#[test]
fn noise_curve_contract() {
    let imgs = display_images(40, 3);
    let reference = mean_score(&imgs).unwrap();
    let c = noise_robustness(mean_score, &imgs, &[1e-6], &reference, 1).unwrap();
    assert_abs_diff_eq!(c.correlations[0], c.clean_correlation, epsilon = 1e-6);
    let c = noise_robustness(mean_score, &imgs, &DEFAULT_SIGMAS, &reference, 1).unwrap();
    assert_eq!(c.correlations.len(), 4);
    assert!(c.correlations.iter().all(|r| (-1.0..=1.0).contains(r)));
    assert!(c.to_csv().lines().count() == 6);
    // A constant scorer leaves every point undefined rather than failing.
    let mut calls = 0;
    let constant = |imgs: &[Image]| {
        calls += 1;
        if calls == 1 {
            mean_score(imgs)
        } else {
            Ok(vec![0.5; imgs.len()])
        }
    };
    let c = noise_robustness(constant, &imgs, &[0.1, 1.0], &reference, 1).unwrap();
    assert_eq!(c.undefined, vec![true, true]);
    assert!(noise_robustness(mean_score, &imgs, &[0.1, 0.01], &reference, 1).is_err());
}

#[test]
fn perturb_clamps_to_display_range() {
    let img = Image::filled(8, 8, ImageStage::Display, [0.5; 3]);
    let n = perturb(&img, 10.0, &mut rng::rng(0));
    assert!(n.data.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(n.data.contains(&0.0) && n.data.contains(&1.0));
}
