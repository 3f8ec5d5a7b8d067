//! Verify the hand-written backpropagation against central finite
//! differences, then take a few gradient steps on a toy regression.
//!
//! Run with: `cargo run --example gradient_check`

use anyhow::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use schedq::nn::{init_network, NetArchitecture, QNetwork};

fn main() -> Result<()> {
    let arch = NetArchitecture {
        input_dim: 110,
        hidden_layers: 2,
        hidden_width: 8,
        output_dim: 10,
    };
    let net = init_network(&arch, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let input: Vec<f64> = (0..arch.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let action = 4;
    let td_target = -2.5;

    let (loss, grads) = net.backward(&input, action, td_target)?;
    println!("loss at the probe point: {loss:.6}");

    // central finite differences over a sample of parameters
    let eps = 1e-5;
    let loss_of = |n: &QNetwork| {
        let q = n.forward(&input).unwrap();
        0.5 * (q[action] - td_target) * (q[action] - td_target)
    };
    let mut worst: f64 = 0.0;
    for layer in 0..=arch.hidden_layers {
        for k in [0usize, 7, 31] {
            if k >= net.layer_weights(layer).len() {
                continue;
            }
            let mut plus = net.clone();
            let mut minus = net.clone();
            plus.layer_weights_mut(layer)[k] += eps;
            minus.layer_weights_mut(layer)[k] -= eps;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps);
            let analytic = grads.weight_grad(layer)[k];
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            let rel = (numeric - analytic).abs() / denom;
            worst = worst.max(rel);
            println!(
                "layer {layer} weight {k:>3}: analytic {analytic:>12.8} numeric {numeric:>12.8} rel err {rel:.2e}"
            );
        }
    }
    println!("worst relative error: {worst:.2e}");
    assert!(worst < 1e-4);

    // a few gradient steps shrink the loss
    let mut trained = net;
    for step in 0..5 {
        let (loss, grads) = trained.backward(&input, action, td_target)?;
        trained.apply_update(&grads, 0.05)?;
        println!("step {step}: loss {loss:.6}");
    }
    Ok(())
}
