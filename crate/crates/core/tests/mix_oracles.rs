mod common;

use common::{on_simplex, same_bits, support, symbolic_chain};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recursivemix::label::{one_hot_batch, SoftLabel};
use recursivemix::mix::{
    cutmix_with_partners, effective_class_count, mixup_step, mixup_with_partners, recursive_mix_step, recursive_mix_with_box,
    resize_fill, sample_box, sample_lambda, Interpolation, MixBox, MixConfig, MixState, ResizeStrategy, EFFECTIVE_CLASS_THRESHOLD,
};
use recursivemix::nn::Tensor;

fn random_images(rng: &mut ChaCha8Rng, n: usize, h: usize, w: usize) -> Tensor<f32> {
    Tensor::from_vec(&[n, 3, h, w], (0..n * 3 * h * w).map(|_| rng.random::<f32>()).collect()).unwrap()
}

/// Unclipped box with integer side `s` inside a `size × size` image.
fn integer_box(rng: &mut ChaCha8Rng, size: usize) -> MixBox {
    let s = rng.random_range(1..size);
    let x1 = rng.random_range(0..=size - s);
    let y1 = rng.random_range(0..=size - s);
    MixBox::from_extent(x1, y1, x1 + s, y1 + s, size, size).unwrap()
}

#[test]
fn recursive_labels_match_symbolic_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let config = MixConfig::default();
    let classes_n = 10;
    for _ in 0..1000 {
        let steps = rng.random_range(1..=8);
        let batch = 2;
        let mut state = MixState::new();
        let mut class_hist: Vec<Vec<usize>> = vec![Vec::new(); batch];
        let mut lambdas = Vec::new();
        let mut last = Vec::new();
        for t in 0..=steps {
            let classes: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes_n)).collect();
            for (j, &c) in classes.iter().enumerate() {
                class_hist[j].push(c);
            }
            let images = random_images(&mut rng, batch, 8, 8);
            let labels = one_hot_batch(&classes, classes_n).unwrap();
            let b = integer_box(&mut rng, 8);
            let out = recursive_mix_with_box(&mut state, &images, &labels, &b, &config).unwrap();
            if t > 0 {
                assert_eq!(out.lambda, b.effective_lambda);
                lambdas.push(b.effective_lambda);
            } else {
                assert_eq!(out.lambda, 0.0);
            }
            last = out.labels;
        }
        for j in 0..batch {
            let oracle = symbolic_chain(&class_hist[j], &lambdas);
            for c in 0..classes_n {
                let want = oracle.get(&c).copied().unwrap_or(0.0);
                assert!((last[j].probs()[c] - want).abs() < 1e-6, "class {c}: {} vs {want}", last[j].probs()[c]);
            }
        }
    }
}

#[test]
fn two_step_closed_form() {
    let config = MixConfig::default();
    let mut state = MixState::new();
    let img = Tensor::zeros(&[1, 3, 10, 10]);
    let b1 = MixBox::from_extent(0, 0, 5, 8, 10, 10).unwrap();
    let b2 = MixBox::from_extent(2, 2, 8, 7, 10, 10).unwrap();
    let (l1, l2) = (0.4, 0.3);
    recursive_mix_with_box(&mut state, &img, &one_hot_batch(&[0], 3).unwrap(), &b1, &config).unwrap();
    recursive_mix_with_box(&mut state, &img, &one_hot_batch(&[1], 3).unwrap(), &b1, &config).unwrap();
    let out = recursive_mix_with_box(&mut state, &img, &one_hot_batch(&[2], 3).unwrap(), &b2, &config).unwrap();
    let want = [l2 * l1, l2 * (1.0 - l1), 1.0 - l2];
    for (a, b) in out.labels[0].probs().iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn effective_class_trajectory_matches_oracle() {
    // λ = 0.3 exactly: a 10×12 box in a 20×20 image
    let b = MixBox::from_extent(3, 4, 13, 16, 20, 20).unwrap();
    assert_eq!(b.effective_lambda, 0.3);
    let config = MixConfig::default();
    let mut state = MixState::new();
    let img = Tensor::zeros(&[1, 3, 20, 20]);
    let mut counts = Vec::new();
    for t in 0..=10 {
        let out = recursive_mix_with_box(&mut state, &img, &one_hot_batch(&[t], 11).unwrap(), &b, &config).unwrap();
        counts.push(effective_class_count(&out.labels, EFFECTIVE_CLASS_THRESHOLD));
    }
    // oracle: class from step k survives at step t iff its weight exceeds 1e-4
    let oracle: Vec<f64> = (0..=10usize)
        .map(|t| {
            let lambdas = vec![0.3; t];
            let classes: Vec<usize> = (0..=t).collect();
            symbolic_chain(&classes, &lambdas).values().filter(|&&v| v > 1e-4).count() as f64
        })
        .collect();
    assert_eq!(counts, oracle);
    assert_eq!(&counts[..8], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    assert!(counts.windows(2).take(7).all(|w| w[1] > w[0]));
}

#[test]
fn box_arithmetic_over_many_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (w, h) = (32usize, 32usize);
    let mut sum = 0.0;
    let n = 100_000;
    for _ in 0..n {
        let lambda = sample_lambda(&mut rng, 0.5).unwrap();
        sum += lambda;
        let b = sample_box(&mut rng, lambda, w, h).unwrap();
        assert_eq!(b.nominal_size, (w as f64 * lambda.sqrt(), h as f64 * lambda.sqrt()));
        assert!(b.x1 <= b.x2 && b.x2 <= w && b.y1 <= b.y2 && b.y2 <= h);
        assert_eq!(b.effective_lambda, (b.area() as f64) / (w * h) as f64);
    }
    assert!((sum / n as f64 - 0.25).abs() < 0.005);
}

#[test]
fn corner_clipping_example() {
    let b = MixBox::from_center(0.0, 0.0, 0.25, 32, 32).unwrap();
    assert_eq!((b.x1, b.y1, b.x2, b.y2), (0, 0, 8, 8));
    assert_eq!(b.effective_lambda, 0.0625);
}

#[test]
fn resize_examples() {
    let img = Tensor::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let one = MixBox::from_extent(0, 0, 1, 1, 2, 2).unwrap();
    assert_eq!(resize_fill(&img, &one, Interpolation::Nearest).unwrap().data(), &[4.0]);
    let full = MixBox::full(2, 2);
    assert_eq!(resize_fill(&img, &full, Interpolation::Nearest).unwrap(), img);
    let c = Tensor::full(&[3, 9, 7], 0.75f32);
    let b = MixBox::from_extent(1, 2, 6, 5, 7, 9).unwrap();
    for interp in [Interpolation::Nearest, Interpolation::Bilinear] {
        let p = resize_fill(&c, &b, interp).unwrap();
        assert_eq!(p.shape(), &[3, 3, 5]);
        assert!(p.data().iter().all(|&v| (v - 0.75).abs() < 1e-6));
    }
    assert!(resize_fill(&img, &MixBox::from_extent(1, 1, 1, 2, 2, 2).unwrap(), Interpolation::Nearest).is_err());
}

#[test]
fn cutmix_cut_full_box_gives_partner() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let images = random_images(&mut rng, 3, 6, 6);
    let labels = one_hot_batch(&[0, 1, 2], 3).unwrap();
    let perm = [2, 0, 1];
    let out = cutmix_with_partners(&images, &labels, &perm, &MixBox::full(6, 6), ResizeStrategy::Cut, Interpolation::Nearest).unwrap();
    for (j, &p) in perm.iter().enumerate() {
        assert_eq!(out.images.item(j), images.item(p));
        assert_eq!(out.labels[j], labels[p]);
    }
    let ident = cutmix_with_partners(&images, &labels, &[0, 1, 2], &MixBox::from_extent(1, 1, 4, 5, 6, 6).unwrap(), ResizeStrategy::Resize, Interpolation::Nearest).unwrap();
    // self-mix in cut mode is a no-op; resize mode shrinks the image itself
    let cut_self = cutmix_with_partners(&images, &labels, &[0, 1, 2], &MixBox::from_extent(1, 1, 4, 5, 6, 6).unwrap(), ResizeStrategy::Cut, Interpolation::Nearest).unwrap();
    assert!(same_bits(&cut_self.images, &images));
    assert_eq!(ident.labels, labels);
}

#[test]
fn mixup_examples() {
    let mut images = Tensor::zeros(&[2, 1, 2, 2]);
    images.item_mut(1).fill(1.0);
    let labels = one_hot_batch(&[0, 1], 2).unwrap();
    let half = mixup_with_partners(&images, &labels, &[1, 0], 0.5).unwrap();
    assert!(half.images.data().iter().all(|&v| v == 0.5));
    let keep = mixup_with_partners(&images, &labels, &[1, 0], 1.0).unwrap();
    assert!(same_bits(&keep.images, &images));
    assert_eq!(keep.labels, labels);
    // fixed-seed golden
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let out = mixup_step(&images, &labels, &mut rng, 1.0).unwrap();
    let golden = out.labels[0].probs()[0];
    assert!((golden - GOLDEN_MIXUP_LABEL).abs() < 1e-12, "golden mixup label {golden}");
}

const GOLDEN_MIXUP_LABEL: f64 = 0.16701915481868312;

#[test]
fn cutmix_relation_with_history_disabled() {
    // Pasting a stored batch with identity pairing in cut mode is exactly a
    // CutMix of the stored batch into the current one.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let config = MixConfig {
        resize_strategy: ResizeStrategy::Cut,
        ..MixConfig::default()
    };
    let hist = random_images(&mut rng, 3, 8, 8);
    let cur = random_images(&mut rng, 3, 8, 8);
    let labels_h = one_hot_batch(&[0, 1, 2], 4).unwrap();
    let labels_c = one_hot_batch(&[3, 3, 1], 4).unwrap();
    let b = MixBox::from_extent(2, 1, 7, 5, 8, 8).unwrap();
    let mut state = MixState::new();
    recursive_mix_with_box(&mut state, &hist, &labels_h, &MixBox::full(8, 8), &config).unwrap();
    let rm = recursive_mix_with_box(&mut state, &cur, &labels_c, &b, &config).unwrap();

    // concatenate [cur; hist] and pair j with j + 3
    let mut both = cur.data().to_vec();
    both.extend_from_slice(hist.data());
    let both = Tensor::from_vec(&[6, 3, 8, 8], both).unwrap();
    let mut both_labels = labels_c.clone();
    both_labels.extend(labels_h.clone());
    let cm = cutmix_with_partners(&both, &both_labels, &[3, 4, 5, 0, 1, 2], &b, ResizeStrategy::Cut, Interpolation::Nearest).unwrap();
    for j in 0..3 {
        assert_eq!(rm.images.item(j), cm.images.item(j));
        assert_eq!(rm.labels[j], cm.labels[j]);
    }
}

fn chain_strategy() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 1usize..12, 2usize..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplex_support_and_fidelity((seed, steps, classes) in chain_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = MixConfig { alpha: 1.0, ..MixConfig::default() };
        let mut state = MixState::new();
        let mut prev: Option<(Tensor<f32>, Vec<SoftLabel>)> = None;
        for t in 0..steps {
            let cls: Vec<usize> = (0..2).map(|_| rng.random_range(0..classes)).collect();
            let images = random_images(&mut rng, 2, 8, 8);
            let labels = one_hot_batch(&cls, classes).unwrap();
            let out = recursive_mix_step(&mut state, &images, &labels, &mut rng, &config).unwrap();
            prop_assert!(same_bits(&state.hist_images, &out.images));
            for j in 0..2 {
                let l = &out.labels[j];
                prop_assert!(on_simplex(l));
                prop_assert!(support(l).len() <= t + 1);
                let mut allowed = support(&labels[j]);
                if let Some((_, pl)) = &prev {
                    allowed.extend(support(&pl[j]));
                }
                prop_assert!(support(l).iter().all(|c| allowed.contains(c)));
                // pixel provenance (nearest): each pixel is from the current or the stored image
                for (i, &v) in out.images.item(j).iter().enumerate() {
                    let from_cur = images.item(j)[i] == v;
                    let from_hist = prev.as_ref().is_some_and(|(pi, _)| pi.item(j).contains(&v));
                    prop_assert!(from_cur || from_hist);
                }
                if let Some(b) = out.mix_box {
                    let fused = l.probs();
                    let want = b.effective_lambda;
                    prop_assert_eq!(want, b.area() as f64 / 64.0);
                    let pl = &prev.as_ref().unwrap().1[j];
                    let cur = &labels[j];
                    for ((f, h), c) in fused.iter().zip(pl.probs()).zip(cur.probs()) {
                        prop_assert!((f - (want * h + (1.0 - want) * c)).abs() < 1e-12);
                    }
                }
            }
            prev = Some((out.images.clone(), out.labels.clone()));
        }
    }

    #[test]
    fn identity_cases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = MixConfig::default();
        let mut state = MixState::new();
        let images = random_images(&mut rng, 3, 8, 8);
        let labels = one_hot_batch(&[0, 1, 2], 3).unwrap();
        let first = recursive_mix_step(&mut state, &images, &labels, &mut rng, &config).unwrap();
        prop_assert!(state.populated);
        prop_assert!(same_bits(&first.images, &images));
        prop_assert_eq!(first.lambda, 0.0);
        // empty box
        let empty = MixBox::from_center(4.0, 4.0, 0.0, 8, 8).unwrap();
        let again = recursive_mix_with_box(&mut state, &images, &labels, &empty, &config).unwrap();
        prop_assert!(same_bits(&again.images, &images));
        prop_assert_eq!(&again.labels, &labels);
        // batch-size change skips mixing and refreshes the buffer
        let short = random_images(&mut rng, 2, 8, 8);
        let out = recursive_mix_step(&mut state, &short, &labels[..2], &mut rng, &config).unwrap();
        prop_assert!(same_bits(&out.images, &short));
        prop_assert_eq!(state.batch_size(), 2);
    }
}

#[test]
fn label_dimension_mismatch_rejected() {
    let mut state = MixState::new();
    let img = Tensor::zeros(&[1, 3, 4, 4]);
    let config = MixConfig::default();
    let b = MixBox::full(4, 4);
    recursive_mix_with_box(&mut state, &img, &one_hot_batch(&[0], 3).unwrap(), &b, &config).unwrap();
    assert!(recursive_mix_with_box(&mut state, &img, &one_hot_batch(&[0], 4).unwrap(), &b, &config).is_err());
}
