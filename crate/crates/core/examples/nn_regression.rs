//! Fits a small MLP to `sin(3x)` with Adam, then spot-checks the input
//! gradient against central differences.
//!
//! ```text
//! cargo run --release --example nn_regression
//! ```

use guide::nn::{mse, AdamConfig, AdamState, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> guide::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut net = Network::mlp(1, 32, 1, 3, &mut rng)?;
    let config = AdamConfig { lr: 3e-3, ..AdamConfig::default() };
    let mut adam = AdamState::new(&net, config);

    for epoch in 0..=2000 {
        let xs: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin()).collect();
        let pred = net.forward(&Tensor::new(&[64, 1], xs)?)?;
        let (loss, grad) = mse(&pred, &ys);
        let grads = net.backward_params(&grad)?;
        adam.step(&mut net, &grads, config.lr)?;
        if epoch % 400 == 0 {
            println!("epoch {epoch:4}  mse {loss:.5}");
        }
    }

    let h = 1e-5;
    for x in [-0.8, -0.1, 0.5] {
        let at = |v: f64| -> guide::Result<f64> { Ok(net.infer(&Tensor::new(&[1, 1], vec![v])?)?.data()[0]) };
        let numeric = (at(x + h)? - at(x - h)?) / (2.0 * h);
        net.forward(&Tensor::new(&[1, 1], vec![x])?)?;
        let analytic = net.input_gradient(&Tensor::new(&[1, 1], vec![1.0])?)?.data()[0];
        println!("d/dx at {x:+.1}: analytic {analytic:+.6}  numeric {numeric:+.6}  target {:+.6}", 3.0 * (3.0 * x).cos());
    }
    Ok(())
}
