//! Follows one sample through a chain of recursive mixing steps and prints
//! the fused label after each step next to its closed-form expansion.
//!
//! cargo run --release --example recursive_labels

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recursivemix::label::one_hot_batch;
use recursivemix::mix::{effective_class_count, recursive_mix_step, MixConfig, MixState, EFFECTIVE_CLASS_THRESHOLD};
use recursivemix::nn::Tensor;

fn main() -> recursivemix::Result<()> {
    let classes = 6;
    let config = MixConfig { alpha: 0.8, ..MixConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut state = MixState::new();
    let images = Tensor::zeros(&[1, 3, 32, 32]);
    let mut lambdas: Vec<f64> = Vec::new();
    for t in 0..classes {
        let out = recursive_mix_step(&mut state, &images, &one_hot_batch(&[t], classes)?, &mut rng, &config)?;
        if t > 0 {
            lambdas.push(out.lambda);
        }
        // class k entered at step k with weight (1 − λ_k), then shrank by every later λ
        let expected: Vec<f64> = (0..classes)
            .map(|k| {
                if k > t {
                    return 0.0;
                }
                let own = if k == 0 { 1.0 } else { 1.0 - lambdas[k - 1] };
                own * lambdas[k..].iter().product::<f64>()
            })
            .collect();
        let fmt = |v: &[f64]| v.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>().join(" ");
        println!("step {t}  lambda {:.4}", out.lambda);
        println!("  engine   {}", fmt(out.labels[0].probs()));
        println!("  expanded {}", fmt(&expected));
        println!("  effective classes {}", effective_class_count(&out.labels, EFFECTIVE_CLASS_THRESHOLD));
    }
    Ok(())
}
