mod common;

use common::dense_roi_oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recursivemix::consistency::{
    head_forward, kl_consistency, roi_align_1x1, roi_align_1x1_backward, total_loss, LossTerms, RoiSpec,
};
use recursivemix::gradcheck::{numeric_grad, relative_error};
use recursivemix::label::one_hot_batch;
use recursivemix::mix::MixBox;
use recursivemix::nn::{Linear, Network, Tensor};

fn random_roi(rng: &mut ChaCha8Rng, image: usize, feature: usize, ratio: usize) -> RoiSpec {
    loop {
        let (a, b, c, d) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        let (x1, x2) = (a.min(b), a.max(b));
        let (y1, y2) = (c.min(d), c.max(d));
        if x2 > x1 && y2 > y1 {
            return RoiSpec::new((x1, y1, x2, y2), (image, image), feature as f64 / image as f64, ratio).unwrap();
        }
    }
}

#[test]
fn roi_align_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let map: Vec<f64> = (0..36).map(|_| rng.random::<f64>()).collect();
        let t = Tensor::from_vec(&[1, 6, 6], map.clone()).unwrap();
        let roi = random_roi(&mut rng, 24, 6, 4);
        let got = roi_align_1x1(&t, &roi).unwrap()[0];
        let want = dense_roi_oracle(&map, 6, 6, roi.feature_coords(), 64);
        worst = worst.max((got - want).abs());
    }
    assert!(worst < 0.05, "worst deviation {worst}");
}

#[test]
fn roi_align_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..500 {
        let map: Vec<f64> = (0..2 * 36).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let t = Tensor::from_vec(&[2, 6, 6], map.clone()).unwrap();
        let roi = random_roi(&mut rng, 24, 6, 2);
        let r = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
        let analytic = roi_align_1x1_backward(t.shape(), &roi, &r).unwrap();
        let numeric = numeric_grad(&map, 1e-5, |d| {
            let out = roi_align_1x1(&Tensor::from_vec(&[2, 6, 6], d.to_vec()).unwrap(), &roi)?;
            Ok(out[0] * r[0] + out[1] * r[1])
        })
        .unwrap();
        assert!(relative_error(analytic.data(), &numeric) < 1e-4);
    }
}

#[test]
fn roi_examples() {
    let t = Tensor::<f64>::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let full = RoiSpec::new((0.0, 0.0, 1.0, 1.0), (2, 2), 1.0, 1).unwrap();
    assert!((roi_align_1x1(&t, &full).unwrap()[0] - 2.5).abs() < 1e-12);
    let zero = RoiSpec::new((0.3, 0.2, 0.3, 0.9), (2, 2), 1.0, 2).unwrap();
    assert!(roi_align_1x1(&t, &zero).is_err());
    // a 16×16 box in a 32×32 image over an 8×8 grid covers feature cells 2..6
    let b = MixBox::from_extent(8, 8, 24, 24, 32, 32).unwrap();
    let roi = RoiSpec::from_box(&b, 8, 2).unwrap();
    assert_eq!(roi.feature_coords(), (2.0, 2.0, 6.0, 6.0));
}

#[test]
fn kl_examples_and_gibbs() {
    let hist = Tensor::<f64>::from_vec(&[1, 2], vec![0.0, -1000.0]).unwrap();
    let roi = Tensor::<f64>::from_vec(&[1, 2], vec![0.0, 0.0]).unwrap();
    assert!((kl_consistency(&roi, &hist).unwrap().value - std::f64::consts::LN_2).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10_000 {
        let mut draw = || Tensor::<f64>::from_vec(&[1, 5], (0..5).map(|_| rng.random::<f64>() * 8.0 - 4.0).collect()).unwrap();
        let (a, b) = (draw(), draw());
        assert!(kl_consistency(&a, &b).unwrap().value >= -1e-12);
    }
    assert!(kl_consistency(&roi, &Tensor::zeros(&[2, 2])).is_err());
}

#[test]
fn total_loss_examples() {
    assert!((LossTerms::new(2.0, 0.5, 0.4, 0.1).total - 2.02).abs() < 1e-12);
    let logits = Tensor::<f64>::from_vec(&[2, 3], vec![0.2, -1.0, 0.5, 1.0, 0.0, 0.3]).unwrap();
    let labels = one_hot_batch(&[0, 2], 3).unwrap();
    let roi = Tensor::<f64>::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0]).unwrap();
    let hist = Tensor::<f64>::from_vec(&[2, 3], vec![3.0, 2.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
    let full = total_loss(&logits, &labels, Some(&roi), Some(&hist), 0.4, 0.5).unwrap();
    assert!(full.terms.kl > 0.0);
    for (lambda, omega) in [(0.4, 0.0), (0.0, 0.5)] {
        let t = total_loss(&logits, &labels, Some(&roi), Some(&hist), lambda, omega).unwrap();
        assert_eq!(t.terms.total, t.terms.ce);
        assert!(t.grad_roi_logits.is_none());
    }
    // skipped branch needs no RoI logits at all
    assert!(total_loss(&logits, &labels, None, None, 0.0, 0.5).is_ok());
    assert!(total_loss(&logits, &labels, None, None, 1.5, 0.5).is_err());
    assert!(total_loss(&logits, &labels, None, None, 0.5, -1.0).is_err());
}

fn toy_model(seed: u64, aux: bool) -> Network<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut aux_rng = ChaCha8Rng::seed_from_u64(seed + 1);
    Network::tiny_cnn(3, [4, 4, 6], 5, &mut rng, aux.then_some(&mut aux_rng))
}

#[test]
fn head_routing() {
    let model = toy_model(31, true);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let v = Tensor::from_vec(&[1, 6], (0..6).map(|_| rng.random::<f32>()).collect()).unwrap();
    let shared = head_forward(&v, &model, true).unwrap();
    assert_eq!(shared, model.head.apply(&v).unwrap());
    let unshared = head_forward(&v, &model, false).unwrap();
    assert_ne!(shared, unshared);
    assert!(head_forward(&v, &toy_model(31, false), false).is_err());
    let bad = Tensor::zeros(&[1, 5]);
    assert!(head_forward(&bad, &model, true).is_err());
    // both routes against a hand-written W·v + b
    for (head, got) in [(&model.head, &shared), (model.aux_head.as_ref().unwrap(), &unshared)] {
        let (w, b) = (head.weight.data(), head.bias.data());
        for k in 0..5 {
            let want: f32 = b[k] + (0..6).map(|i| w[k * 6 + i] * v.data()[i]).sum::<f32>();
            assert!((got.data()[k] - want).abs() < 1e-6);
        }
    }
}

#[test]
fn copied_features_give_zero_consistency() {
    // historical features: constant vector v over the whole grid
    let (c, h, w) = (3, 6, 6);
    let v = [0.7f32, -0.2, 1.3];
    let mut head = Linear::<f32>::zeros(c, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    head.weight.data_mut().iter_mut().for_each(|x| *x = rng.random::<f32>() - 0.5);
    let hist_logits = head.apply(&Tensor::from_vec(&[1, c], v.to_vec()).unwrap()).unwrap();

    // current map: random, except cells [1, 4) × [2, 5) which hold a copy of v
    let mut cur = vec![0.0f32; c * h * w];
    cur.iter_mut().for_each(|x| *x = rng.random::<f32>() * 5.0);
    for ch in 0..c {
        for y in 2..5 {
            for x in 1..4 {
                cur[(ch * h + y) * w + x] = v[ch];
            }
        }
    }
    let cur = Tensor::from_vec(&[c, h, w], cur).unwrap();
    let b = MixBox::from_extent(4, 8, 16, 20, 24, 24).unwrap();
    // a sampling ratio that divides the box into whole cells keeps every tap inside it
    let roi = RoiSpec::from_box(&b, w, 3).unwrap();
    let pooled = roi_align_1x1(&cur, &roi).unwrap();
    let roi_logits = head.apply(&Tensor::from_vec(&[1, c], pooled).unwrap()).unwrap();
    assert!(kl_consistency(&roi_logits, &hist_logits).unwrap().value < 1e-6);
}
