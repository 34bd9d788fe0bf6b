mod common;

use boxvis::attention::{
    activated_set, attention_mask, mask_logits, masked_attention, masked_attention_sparse, AttentionParams,
    QueryMaskHead,
};
use boxvis::boxlosses::{pairwise_affinity_loss, projection_loss, spatial_pair_set};
use boxvis::color::lab_from_rgb_pixel;
use boxvis::datasetkit::{AugSpec, FrameTransform, ImageBox};
use boxvis::gradcheck::{finite_difference, rel_error, FD_STEP, MAX_REL_ERROR};
use boxvis::hungarian::{assignment_cost, hungarian_assign};
use boxvis::reg::{bce_dice_loss, classification_loss, gaussian_density_3d, gaussian_kernel_3d, tv3d_loss, BlurSpec};
use boxvis::stpa::{center_offsets, patch_correlation, stpa_loss, temporal_pair_set};
use boxvis::teacher::{dynamic_threshold, match_teacher_to_boxes, projection_score, PseudoCandidate};
use boxvis::{rasterize_box_mask, BoxEntry, BoxTrack, ClipDims, Pixel, RngStream, SpatialPairConfig, StpaConfig, Tensor};
use common::*;

fn track(id: i64, entries: &[(usize, usize, usize, usize, usize)]) -> BoxTrack {
    BoxTrack::new(
        id,
        entries
            .iter()
            .map(|&(frame, x0, y0, x1, y1)| BoxEntry { frame, x0, y0, x1, y1 })
            .collect(),
    )
    .unwrap()
}

fn assert_grad_matches_fd(f: impl Fn(&Tensor) -> boxvis::LossResult, x: &Tensor) {
    let analytic = f(x).grad;
    let numeric = finite_difference(|z| Ok(f(z).value), x, FD_STEP).unwrap();
    for (&a, &n) in analytic.data().iter().zip(numeric.data()) {
        assert!(rel_error(a, n) < MAX_REL_ERROR, "analytic {a} vs numeric {n}");
    }
}

#[test]
fn lab_of_mid_gray() {
    // Textbook chain with the tabulated D65 white (0.95047, 1, 1.08883).
    let lin = ((0.5f64 + 0.055) / 1.055).powf(2.4);
    let xyz = [0.4124564 + 0.3575761 + 0.1804375, 1.0, 0.0193339 + 0.1191920 + 0.9503041].map(|s| s * lin);
    let f = |t: f64| if t > (6.0f64 / 29.0).powi(3) { t.cbrt() } else { t / (3.0 * (6.0f64 / 29.0).powi(2)) + 4.0 / 29.0 };
    let (fx, fy, fz) = (f(xyz[0] / 0.95047), f(xyz[1]), f(xyz[2] / 1.08883));
    let expected = [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)];
    let got = lab_from_rgb_pixel([0.5, 0.5, 0.5]);
    assert!((got[0] - expected[0]).abs() < 1e-9);
    assert!((got[0] - 53.39).abs() < 0.01);
    assert!((got[1] - expected[1]).abs() < 0.01 && got[1].abs() < 0.01);
    assert!((got[2] - expected[2]).abs() < 0.01 && got[2].abs() < 0.01);
}

#[test]
fn projection_loss_random_1x4x4() {
    let mut rng = RngStream::new(11);
    let dims = ClipDims::new(1, 4, 4);
    let logits = random_tensor(&[1, 4, 4], -2.0, 2.0, &mut rng);
    let mask = rasterize_box_mask(&track(1, &[(0, 1, 0, 3, 3)]), dims).unwrap();
    let got = projection_loss(&logits, &mask).unwrap();
    assert!((got.value - common::projection_loss(&logits, &mask)).abs() < 1e-12);
    assert_grad_matches_fd(|z| projection_loss(z, &mask).unwrap(), &logits);
}

#[test]
fn spatial_pairs_of_centered_box() {
    let dims = ClipDims::new(1, 5, 5);
    let tr = track(1, &[(0, 1, 1, 4, 4)]);
    let mask = rasterize_box_mask(&tr, dims).unwrap();
    let edges = spatial_pair_set(dims, &mask).unwrap();
    let oracle = spatial_edges(dims, std::slice::from_ref(&tr));
    assert_eq!(edge_set(&edges), oracle);
    assert_eq!(edges.len(), oracle.len(), "no duplicates");
    // 3×3 box: 12 interior edges plus 12 edges leaving it.
    assert_eq!(edges.len(), 24);
}

#[test]
fn pairwise_loss_random_1x3x3() {
    let mut rng = RngStream::new(5);
    let dims = ClipDims::new(1, 3, 3);
    let tr = track(1, &[(0, 0, 0, 2, 3)]);
    let mask = rasterize_box_mask(&tr, dims).unwrap();
    let lab = random_lab(dims, &mut rng);
    let logits = random_tensor(&[1, 3, 3], -2.0, 2.0, &mut rng);
    let cfg = SpatialPairConfig::default();
    let edges = spatial_pair_set(dims, &mask).unwrap();
    let got = pairwise_affinity_loss(&logits, &lab, &edges, &cfg).unwrap();
    let expected = affinity_loss(
        &logits,
        &spatial_edges(dims, std::slice::from_ref(&tr)),
        |a, b| lab_sim(&lab, a, b, cfg.theta),
        cfg.tau_lab,
    );
    assert!(expected > 0.0);
    assert!((got.value - expected).abs() < 1e-12);
    assert_grad_matches_fd(|z| pairwise_affinity_loss(z, &lab, &edges, &cfg).unwrap(), &logits);
}

#[test]
fn color_similarity_at_distance_two() {
    let mut lab = Tensor::zeros(&[1, 1, 2, 3]);
    lab.data_mut()[3] = 2.0;
    let s = boxvis::boxlosses::color_similarity(&lab, Pixel::new(0, 0, 0), Pixel::new(0, 1, 0), 2.0).unwrap();
    assert!((s - (-1.0f64).exp()).abs() < 1e-15);
    assert!((s - 0.36788).abs() < 1e-5);
}

#[test]
fn temporal_pairs_of_moving_box() {
    let dims = ClipDims::new(2, 6, 6);
    let tr = track(1, &[(0, 1, 1, 3, 3), (1, 3, 2, 5, 4)]);
    let tracks = [tr];
    let cfg = StpaConfig::default();
    let edges = temporal_pair_set(dims, &tracks, &center_offsets(&tracks), &cfg).unwrap();
    assert_eq!(edge_set(&edges), temporal_edges(dims, &tracks, 5));
    assert_eq!(edges.len(), 20);
    let cfg3 = StpaConfig {
        temporal_neighbors: 3,
        ..cfg
    };
    let edges = temporal_pair_set(dims, &tracks, &center_offsets(&tracks), &cfg3).unwrap();
    assert_eq!(edge_set(&edges), temporal_edges(dims, &tracks, 3));
}

#[test]
fn patch_correlation_matches_hand_loop() {
    let mut rng = RngStream::new(3);
    let feat = random_tensor(&[2, 4, 5, 3], -1.0, 1.0, &mut rng);
    for (a, b) in [
        (Pixel::new(0, 0, 0), Pixel::new(1, 4, 3)),
        (Pixel::new(0, 2, 1), Pixel::new(1, 2, 2)),
        (Pixel::new(1, 4, 0), Pixel::new(0, 0, 3)),
    ] {
        let got = patch_correlation(&feat, a, b, 1).unwrap();
        assert!((got - common::patch_corr(&feat, a, b, 1)).abs() < 1e-12);
    }
}

#[test]
fn stpa_loss_random_2x6x6() {
    let mut rng = RngStream::new(8);
    let dims = ClipDims::new(2, 6, 6);
    let tracks = [track(1, &[(0, 1, 1, 4, 4), (1, 2, 1, 5, 4)])];
    let lab = random_lab(dims, &mut rng);
    let feat = random_tensor(&[2, 6, 6, 4], 0.0, 1.0, &mut rng);
    let logits = random_tensor(&[2, 6, 6], -2.0, 2.0, &mut rng);
    let cfg = StpaConfig::default();
    let mask = rasterize_box_mask(&tracks[0], dims).unwrap();
    let mut edges = spatial_pair_set(dims, &mask).unwrap();
    edges.extend(temporal_pair_set(dims, &tracks, &center_offsets(&tracks), &cfg).unwrap());
    let got = stpa_loss(&logits, &lab, &feat, &edges, &cfg).unwrap();
    let mut all = spatial_edges(dims, &tracks);
    all.extend(temporal_edges(dims, &tracks, 5));
    let expected = affinity_loss(
        &logits,
        &all,
        |a, b| lab_sim(&lab, a, b, cfg.theta) + cfg.w_corr * common::patch_corr(&feat, a, b, cfg.k),
        cfg.threshold(),
    );
    assert!(expected > 0.0);
    assert!((got.value - expected).abs() < 1e-12);
    assert_grad_matches_fd(|z| stpa_loss(z, &lab, &feat, &edges, &cfg).unwrap(), &logits);
}

#[test]
fn tv3d_random_2x4x4() {
    let mut rng = RngStream::new(2);
    let logits = random_tensor(&[2, 4, 4], -2.0, 2.0, &mut rng);
    let got = tv3d_loss(&logits).unwrap();
    assert!((got.value - tv3d(&logits)).abs() < 1e-12);
    assert_grad_matches_fd(|z| tv3d_loss(z).unwrap(), &logits);
}

#[test]
fn blur_kernel_center() {
    let spec = BlurSpec::default();
    let k = gaussian_kernel_3d(&spec).unwrap();
    let mut sum = 0.0;
    for dt in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                sum += (-((dx * dx + dy * dy + dt * dt) as f64) / 2.0).exp();
            }
        }
    }
    assert!((k[13] - 1.0 / sum).abs() < 1e-15);
    assert!((gaussian_density_3d(0.0, 0.0, 0.0, 1.0) - 0.15915).abs() < 1e-5);
}

#[test]
fn bce_dice_saturation() {
    let logits = Tensor::filled(&[2, 2], -20.0);
    let target = Tensor::filled(&[2, 2], 1.0);
    let got = bce_dice_loss(&logits, &target).unwrap().value;
    assert!((got - 21.0).abs() < 1e-3, "{got}");
}

#[test]
fn bce_dice_random_4x4() {
    let mut rng = RngStream::new(4);
    let logits = random_tensor(&[4, 4], -3.0, 3.0, &mut rng);
    let target = random_tensor(&[4, 4], 0.0, 1.0, &mut rng).map(|v| if v > 0.5 { 1.0 } else { 0.0 });
    let got = bce_dice_loss(&logits, &target).unwrap();
    assert!((got.value - bce_dice(&logits, &target)).abs() < 1e-12);
    assert_grad_matches_fd(|z| bce_dice_loss(z, &target).unwrap(), &logits);
}

#[test]
fn classification_uniform_and_random() {
    let got = classification_loss(&Tensor::zeros(&[2, 4]), &[0, 3]).unwrap().value;
    assert!((got - 4f64.ln()).abs() < 1e-12);
    let mut rng = RngStream::new(6);
    let logits = random_tensor(&[3, 5], -2.0, 2.0, &mut rng);
    let targets = [4, 0, 2];
    let got = classification_loss(&logits, &targets).unwrap();
    assert!((got.value - cross_entropy(&logits, &targets)).abs() < 1e-12);
    assert_grad_matches_fd(|z| classification_loss(z, &targets).unwrap(), &logits);
}

#[test]
fn dense_and_sparse_attention_agree() {
    let mut rng = RngStream::new(12);
    let (n, l, c) = (3, 8, 4);
    let p = AttentionParams {
        q: random_tensor(&[n, c], -1.0, 1.0, &mut rng),
        k: random_tensor(&[l, c], -1.0, 1.0, &mut rng),
        v: random_tensor(&[l, c], -1.0, 1.0, &mut rng),
        x_prev: random_tensor(&[n, c], -1.0, 1.0, &mut rng),
    };
    let mut prob = random_tensor(&[n, l], 0.0, 1.0, &mut rng);
    // One query sees nothing: both forms fall back to all locations.
    prob.data_mut()[..l].iter_mut().for_each(|v| *v = 0.1);
    let dense = masked_attention(&p, &attention_mask(&prob).unwrap()).unwrap();
    let omega = activated_set(&prob).unwrap();
    let sparse = masked_attention_sparse(&p, &omega).unwrap();
    for (a, b) in dense.data().iter().zip(sparse.output.data()) {
        assert!((a - b).abs() < 1e-10);
    }
    for w in &sparse.weights {
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn activated_set_matches_filter_loop() {
    let mut rng = RngStream::new(13);
    let prob = random_tensor(&[4, 2, 3, 3], 0.0, 1.0, &mut rng);
    let got = activated_set(&prob).unwrap();
    for q in 0..4 {
        let mut expected = Vec::new();
        for i in 0..18 {
            if prob.data()[q * 18 + i] > 0.5 {
                expected.push(i);
            }
        }
        assert_eq!(got[q], expected);
    }
}

#[test]
fn mask_sign_follows_cosine() {
    let mut rng = RngStream::new(14);
    let head = QueryMaskHead {
        features: random_tensor(&[2, 5, 5, 6], -1.0, 1.0, &mut rng),
        params: random_tensor(&[3, 6], -1.0, 1.0, &mut rng),
    };
    let (logits, binary) = mask_logits(&head).unwrap();
    for q in 0..3 {
        let w = &head.params.data()[q * 6..(q + 1) * 6];
        for loc in 0..50 {
            let f = &head.features.data()[loc * 6..(loc + 1) * 6];
            let nf = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nw = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cos = f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / (nf * nw);
            let z = logits.data()[q * 50 + loc];
            assert_eq!(binary.data()[q * 50 + loc] == 1.0, z > 0.0);
            assert_eq!(z > 0.0, cos > 0.0);
        }
    }
}

#[test]
fn threshold_closed_forms() {
    assert_eq!(dynamic_threshold(10, 10).unwrap(), 0.5);
    assert!((dynamic_threshold(0, 10).unwrap() - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
    assert!((dynamic_threshold(0, 10).unwrap() - 0.88080).abs() < 1e-5);
    assert!((dynamic_threshold(5, 10).unwrap() - 0.73106).abs() < 1e-5);
}

#[test]
fn projection_score_matches_dice_oracle() {
    let mut rng = RngStream::new(15);
    let dims = ClipDims::new(2, 5, 6);
    let prob = random_tensor(&[2, 5, 6], 0.0, 1.0, &mut rng);
    let mask = rasterize_box_mask(&track(1, &[(0, 1, 1, 4, 3), (1, 2, 0, 6, 2)]), dims).unwrap();
    let (px, py) = max_projections(&prob);
    let (bx, by) = max_projections(&mask);
    let expected = 1.0 - 0.5 * (dice(&px, &bx) + dice(&py, &by));
    assert!((projection_score(&prob, &mask).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn hungarian_5x5_against_all_permutations() {
    let mut rng = RngStream::new(16);
    let cost = random_tensor(&[5, 5], 0.0, 10.0, &mut rng);
    let (best, pairs) = brute_force_assignment(&cost);
    let got = hungarian_assign(&cost).unwrap();
    assert!((assignment_cost(&cost, &got) - best).abs() < 1e-9);
    assert_eq!(got, pairs);
}

#[test]
fn teacher_match_is_brute_force_minimum() {
    let mut rng = RngStream::new(17);
    let dims = ClipDims::new(2, 6, 6);
    let boxes = [
        track(1, &[(0, 0, 0, 3, 3), (1, 1, 0, 4, 3)]),
        track(2, &[(0, 3, 2, 6, 6), (1, 2, 3, 5, 6)]),
    ];
    let cands: Vec<PseudoCandidate> = (0..3)
        .map(|_| {
            let m = random_tensor(&[2, 6, 6], 0.0, 1.0, &mut rng);
            PseudoCandidate::new(m, rng.uniform(0.1, 1.0).unwrap(), 0.8).unwrap()
        })
        .collect();
    let mut cost = Tensor::zeros(&[3, 2]);
    for (i, c) in cands.iter().enumerate() {
        let (px, py) = max_projections(&c.mask_prob);
        for (j, b) in boxes.iter().enumerate() {
            let (bx, by) = max_projections(&rasterize_box_mask(b, dims).unwrap());
            cost.set(&[i, j], -c.class_score.ln() + dice(&px, &bx) + dice(&py, &by));
        }
    }
    let (best, pairs) = brute_force_assignment(&cost);
    let got = match_teacher_to_boxes(&cands, &boxes, 0.5).unwrap();
    let got_pairs: Vec<(usize, usize)> = got.iter().map(|m| (m.candidate, m.box_index)).collect();
    assert_eq!(got_pairs, pairs);
    assert!((got.iter().map(|m| m.cost).sum::<f64>() - best).abs() < 1e-12);
}

fn no_rotation() -> AugSpec {
    AugSpec {
        resize_short_edge: [20, 30],
        crop_short_edge: [12, 18],
        rotation_deg: [0.0, 0.0],
        frames: 3,
    }
}

#[test]
fn full_image_box_becomes_crop_window() {
    let (h, w) = (16, 24);
    for seed in 0..20 {
        let tf = FrameTransform::draw(&no_rotation(), h, w, &mut RngStream::new(seed)).unwrap();
        let b = ImageBox { instance_id: 1, x0: 0, y0: 0, x1: w, y1: h };
        // Corner-transform oracle: scale the corners, shift by the crop
        // origin, intersect with the crop window.
        let sx0 = 0.0f64 * tf.scale_x - tf.crop_x as f64;
        let sx1 = w as f64 * tf.scale_x - tf.crop_x as f64;
        let sy0 = 0.0f64 * tf.scale_y - tf.crop_y as f64;
        let sy1 = h as f64 * tf.scale_y - tf.crop_y as f64;
        let x0 = sx0.max(0.0).floor() as usize;
        let y0 = sy0.max(0.0).floor() as usize;
        let x1 = sx1.min(tf.crop_width as f64).ceil() as usize;
        let y1 = sy1.min(tf.crop_height as f64).ceil() as usize;
        assert_eq!(tf.map_box(&b), Some((x0, y0, x1, y1)));
        assert_eq!((x0, y0, x1, y1), (0, 0, tf.crop_width, tf.crop_height));
    }
}

#[test]
fn transformed_boxes_cover_their_pixels() {
    let (h, w) = (16, 24);
    let spec = AugSpec {
        rotation_deg: [-15.0, 15.0],
        ..no_rotation()
    };
    let mut rng = RngStream::new(21);
    for _ in 0..30 {
        let tf = FrameTransform::draw(&spec, h, w, &mut rng).unwrap();
        let x0 = rng.index(w - 1).unwrap();
        let y0 = rng.index(h - 1).unwrap();
        let b = ImageBox {
            instance_id: 1,
            x0,
            y0,
            x1: x0 + 1 + rng.index(w - x0 - 1).unwrap(),
            y1: y0 + 1 + rng.index(h - y0 - 1).unwrap(),
        };
        let mapped = tf.map_box(&b);
        for y in b.y0..b.y1 {
            for x in b.x0..b.x1 {
                let (u, v) = tf.map_point(x as f64 + 0.5, y as f64 + 0.5);
                if u < 0.0 || v < 0.0 || u >= tf.crop_width as f64 || v >= tf.crop_height as f64 {
                    continue;
                }
                let (bx0, by0, bx1, by1) = mapped.expect("visible pixel implies a box");
                assert!(u >= bx0 as f64 && u <= bx1 as f64 && v >= by0 as f64 && v <= by1 as f64);
            }
        }
    }
}
