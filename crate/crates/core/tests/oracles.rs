mod common;

use rand::Rng;
use stvision::bof::{assign, Vocabulary};
use stvision::classifier::{train_binary, SvmOptions};
use stvision::descriptor::{
    optical_flow, FeatureKind, FeatureVector, MAX_CONDITION, MIN_EIGENVALUE,
};
use stvision::detector::{harris_response, second_moment, DEFAULT_K};
use stvision::scalespace::{gradient, smooth, ScalePair};
use stvision::synthgen::{translating_blob_clip, SynthSpec};
use stvision::video_io::to_grayscale;
use stvision::{Dims, ScalarVolume};

use common::*;

#[test]
fn smoothing_matches_direct_convolution_on_degenerate_shapes() {
    let mut r = rng(100);
    for dims in [
        Dims::new(1, 1, 1),
        Dims::new(1, 7, 2),
        Dims::new(5, 1, 3),
        Dims::new(2, 2, 11),
    ] {
        let vol = random_volume(&mut r, dims, 0.0, 1.0);
        // kernels far wider than the volume need repeated reflection
        for scale in [
            ScalePair::new(0.5, 0.5).unwrap(),
            ScalePair::new(9.0, 16.0).unwrap(),
        ] {
            let err = smooth(&vol, scale).max_abs_diff(&direct_smooth(&vol, scale));
            assert!(err < 1e-12, "{dims:?} {scale:?}: {err}");
        }
    }
}

#[test]
fn smoothing_preserves_constants() {
    let vol = ScalarVolume::filled(Dims::new(6, 5, 4), 0.75);
    let s = smooth(&vol, ScalePair::new(8.0, 2.0).unwrap());
    assert!(s.data().iter().all(|v| (v - 0.75).abs() < 1e-14));
}

#[test]
fn gradient_matches_finite_differences() {
    let mut r = rng(101);
    let dims = Dims::new(6, 5, 4);
    let vol = random_volume(&mut r, dims, -1.0, 1.0);
    let g = gradient(&vol).unwrap();
    let diff = |a: usize, n: usize, f: &dyn Fn(usize) -> f64| {
        if a == 0 {
            f(1) - f(0)
        } else if a == n - 1 {
            f(n - 1) - f(n - 2)
        } else {
            0.5 * (f(a + 1) - f(a - 1))
        }
    };
    for t in 0..4 {
        for y in 0..5 {
            for x in 0..6 {
                let ex = diff(x, 6, &|i| vol.get(i, y, t));
                let ey = diff(y, 5, &|i| vol.get(x, i, t));
                let et = diff(t, 4, &|i| vol.get(x, y, i));
                assert_eq!(g.lx.get(x, y, t), ex);
                assert_eq!(g.ly.get(x, y, t), ey);
                assert_eq!(g.lt.get(x, y, t), et);
            }
        }
    }
}

#[test]
fn response_matches_eigenvalue_form_at_every_voxel() {
    let mut r = rng(102);
    let vol = random_volume(&mut r, Dims::new(9, 8, 7), 0.0, 1.0);
    let scale = ScalePair::new(2.0, 1.0).unwrap();
    let g = gradient(&smooth(&vol, scale)).unwrap();
    let m = second_moment(&g, scale.scaled(4.0));
    let h = harris_response(&m, DEFAULT_K);
    for t in 0..7 {
        for y in 0..8 {
            for x in 0..9 {
                let mat = m.matrix_at(x, y, t);
                let reference = harris_from_eigenvalues(mat, DEFAULT_K);
                let trace = mat[0][0] + mat[1][1] + mat[2][2];
                let scale = reference.abs().max(DEFAULT_K * trace.powi(3));
                assert!((h.get(x, y, t) - reference).abs() <= 1e-8 * scale);
            }
        }
    }
}

#[test]
fn second_moment_is_positive_semidefinite() {
    let mut r = rng(103);
    let vol = random_volume(&mut r, Dims::new(8, 8, 6), 0.0, 1.0);
    let g = gradient(&vol).unwrap();
    let m = second_moment(&g, ScalePair::new(1.0, 1.0).unwrap());
    for t in 0..6 {
        for y in 0..8 {
            for x in 0..8 {
                let mat = nalgebra::Matrix3::from_fn(|i, j| m.matrix_at(x, y, t)[i][j]);
                let eig = nalgebra::SymmetricEigen::new(mat).eigenvalues;
                let top = eig.max().max(1.0);
                assert!(eig.min() >= -1e-12 * top, "{eig:?}");
            }
        }
    }
}

/// Lucas–Kanade restated: normal equations over the clipped 5×5 window,
/// solved by nalgebra, with the same eigenvalue guards.
fn brute_flow(vol: &ScalarVolume, x: usize, y: usize, t: usize) -> (f64, f64) {
    let g = gradient(vol).unwrap();
    let d = vol.dims();
    let mut a = nalgebra::Matrix2::zeros();
    let mut rhs = nalgebra::Vector2::zeros();
    for yy in y.saturating_sub(2)..=(y + 2).min(d.height - 1) {
        for xx in x.saturating_sub(2)..=(x + 2).min(d.width - 1) {
            let v = nalgebra::Vector2::new(g.lx.get(xx, yy, t), g.ly.get(xx, yy, t));
            a += v * v.transpose();
            rhs -= v * g.lt.get(xx, yy, t);
        }
    }
    let eig = nalgebra::SymmetricEigen::new(a).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo < MIN_EIGENVALUE || hi / lo > MAX_CONDITION {
        return (0.0, 0.0);
    }
    let s = a.lu().solve(&rhs).unwrap();
    (s[0], s[1])
}

#[test]
fn flow_matches_normal_equations() {
    let mut r = rng(104);
    let vol = smooth(
        &random_volume(&mut r, Dims::new(12, 11, 5), 0.0, 1.0),
        ScalePair::new(1.0, 1.0).unwrap(),
    );
    let f = optical_flow(&vol).unwrap();
    for t in 0..5 {
        for y in 0..11 {
            for x in 0..12 {
                let (u, v) = brute_flow(&vol, x, y, t);
                assert!((f.u.get(x, y, t) - u).abs() < 1e-9 * (1.0 + u.abs()));
                assert!((f.v.get(x, y, t) - v).abs() < 1e-9 * (1.0 + v.abs()));
            }
        }
    }
}

#[test]
fn flow_recovers_blob_velocity() {
    for velocity in [(1.0, 0.0), (0.0, -1.0), (0.8, 0.6)] {
        let clip = translating_blob_clip(&SynthSpec::translating_blob(velocity)).unwrap();
        let f = optical_flow(&to_grayscale(&clip)).unwrap();
        // a ring around the blob centre at the middle frame, away from the
        // flat interior and the dark background
        let (cx, cy) = (12.0 + 4.0 * velocity.0, 16.0 + 4.0 * velocity.1);
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0);
        for y in 0..32 {
            for x in 0..32 {
                let d = (x as f64 - cx).hypot(y as f64 - cy);
                if (2.0..4.0).contains(&d) {
                    su += f.u.get(x, y, 4);
                    sv += f.v.get(x, y, 4);
                    n += 1.0;
                }
            }
        }
        let (u, v) = (su / n, sv / n);
        assert!(
            (u - velocity.0).abs() < 0.15 && (v - velocity.1).abs() < 0.15,
            "{velocity:?} → ({u}, {v})"
        );
    }
}

#[test]
fn assignment_matches_linear_scan() {
    let mut r = rng(105);
    let random_vec = |r: &mut rand_chacha::ChaCha8Rng| {
        FeatureVector::new(
            FeatureKind::Hue,
            (0..36).map(|_| r.random_range(0..3) as f64).collect(),
        )
        .unwrap()
    };
    let mut words: Vec<FeatureVector> = (0..25).map(|_| random_vec(&mut r)).collect();
    // duplicates force exact ties
    words.push(words[3].clone());
    words.insert(0, words[10].clone());
    let vocab = Vocabulary::new(FeatureKind::Hue, 0, words.clone()).unwrap();
    for _ in 0..500 {
        let d = random_vec(&mut r);
        let dist: Vec<f64> = words
            .iter()
            .map(|w| {
                w.values()
                    .iter()
                    .zip(d.values())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum()
            })
            .collect();
        let min = dist.iter().cloned().fold(f64::INFINITY, f64::min);
        let expected = dist.iter().position(|&v| v == min).unwrap();
        assert_eq!(assign(&d, &vocab).unwrap(), expected);
    }
}

#[test]
fn svm_matches_reference_on_harder_instances() {
    let mut r = rng(106);
    for case in 0..6 {
        let n = 6 + 2 * case;
        let c = [0.05, 0.5, 5.0][case % 3];
        let mut x = Vec::new();
        let mut pos = Vec::new();
        for i in 0..n {
            // heavily overlapping classes plus one exact duplicate with
            // opposite labels
            x.push(vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]);
            pos.push(i % 2 == 0);
        }
        x.push(x[0].clone());
        pos.push(!pos[0]);
        let y: Vec<f64> = pos.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
        let (m, stats) =
            train_binary(&x, &pos, ("a".into(), "b".into()), &SvmOptions::with_c(c)).unwrap();
        let got = svm_primal(&m.weights, m.bias, &x, &y, c);
        let reference = svm_reference_objective(&x, &y, c);
        assert!(
            (got - reference).abs() < 1e-3,
            "case {case}: {got} vs {reference}"
        );
        assert!(stats.duality_gap <= 1e-4);
    }
}
