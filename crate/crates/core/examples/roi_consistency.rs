//! Walks through the consistency branch by hand for one mixed batch: pools
//! the pasted region with RoIAlign, classifies it with the shared and the
//! auxiliary head, and compares both against the stored historical logits.
//!
//! cargo run --release --example roi_consistency

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recursivemix::consistency::{head_forward, kl_consistency, roi_align_batch, total_loss, RoiSpec};
use recursivemix::data::loader::assemble;
use recursivemix::data::{make_synthetic, AugPolicy};
use recursivemix::mix::{recursive_mix_with_box, MixBox, MixConfig, MixState};
use recursivemix::nn::Network;

fn main() -> recursivemix::Result<()> {
    let data = make_synthetic(1, 4, 8, 32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut aux_rng = ChaCha8Rng::seed_from_u64(4);
    let mut model = Network::tiny_cnn(3, [8, 16, 32], 4, &mut rng, Some(&mut aux_rng));
    let config = MixConfig::default();
    let mut state = MixState::new();

    // step 0 fills the history and records its logits
    let (x0, y0) = assemble(&data, &[0, 1, 2, 3], &AugPolicy::disabled(), &mut rng)?;
    let b = MixBox::from_extent(8, 8, 24, 24, 32, 32)?;
    recursive_mix_with_box(&mut state, &x0, &y0, &b, &config)?;
    state.record_logits(&model.forward(&x0)?.gap_logits)?;

    // step 1 pastes a shrunken step-0 batch into the centre quarter
    let (x1, y1) = assemble(&data, &[4, 5, 6, 7], &AugPolicy::disabled(), &mut rng)?;
    let mixed = recursive_mix_with_box(&mut state, &x1, &y1, &b, &config)?;
    let hist = mixed.hist_logits.as_ref().expect("history was recorded");
    let out = model.forward(&mixed.images)?;
    let roi = RoiSpec::from_box(&b, out.feature_map.shape()[3], 2)?;
    println!("box {:?} -> feature coords {:?}, lambda {}", (b.x1, b.y1, b.x2, b.y2), roi.feature_coords(), mixed.lambda);
    let pooled = roi_align_batch(&out.feature_map, &roi)?;
    for shared in [true, false] {
        let roi_logits = head_forward(&pooled, &model, shared)?;
        let kl = kl_consistency(&roi_logits, hist)?;
        let loss = total_loss(&out.gap_logits, &mixed.labels, Some(&roi_logits), Some(hist), mixed.lambda, 0.1)?;
        println!(
            "shared_head={shared}: kl {:.5}, ce {:.5}, total {:.5}",
            kl.value, loss.terms.ce, loss.terms.total
        );
    }
    Ok(())
}
