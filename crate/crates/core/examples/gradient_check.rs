//! Compares the hand-written backward pass of a small ReLU net with central
//! finite differences, over every weight, bias and input.
//!
//!     cargo run --release --example gradient_check

use mpdqn::nn::{Activation, DenseNet, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss(net: &DenseNet, input: &Matrix, upstream: &Matrix) -> f64 {
    let out = net.predict(input).unwrap();
    out.row_iter()
        .zip(upstream.row_iter())
        .flat_map(|(o, u)| o.iter().zip(u).map(|(a, b)| a * b))
        .sum()
}

fn main() -> mpdqn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = DenseNet::new(6, &[32, 16], 4, Activation::Relu, &mut rng)?;
    let rows = |r: usize, c: usize, rng: &mut ChaCha8Rng| {
        let data: Vec<f64> = (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(r, c, data)
    };
    let input = rows(3, 6, &mut rng)?;
    let upstream = rows(3, 4, &mut rng)?;

    let (_, cache) = net.forward(&input)?;
    let (grads, input_grads) = net.backward(&cache, &upstream)?;
    let analytic: Vec<f64> = grads.slices().flat_map(|s| s.iter().copied()).collect();

    // Small enough that both sides almost always stay on one linear piece of
    // the ReLUs, large enough that rounding in the difference stays small.
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    let lens: Vec<usize> = net.param_slices().map(|s| s.len()).collect();
    let mut flat = 0;
    for (si, &len) in lens.iter().enumerate() {
        for i in 0..len {
            let theta = net.param_slices().nth(si).unwrap()[i];
            probe.param_slices_mut().nth(si).unwrap()[i] = theta + h;
            let plus = loss(&probe, &input, &upstream);
            probe.param_slices_mut().nth(si).unwrap()[i] = theta - h;
            let minus = loss(&probe, &input, &upstream);
            probe.param_slices_mut().nth(si).unwrap()[i] = theta;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[flat];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            flat += 1;
        }
    }
    println!("{flat} parameter gradients, max relative error {worst:.2e}");

    let mut worst_input: f64 = 0.0;
    for r in 0..input.rows() {
        for c in 0..input.cols() {
            let mut shifted = input.clone();
            shifted[(r, c)] += h;
            let plus = loss(&net, &shifted, &upstream);
            shifted[(r, c)] -= 2.0 * h;
            let minus = loss(&net, &shifted, &upstream);
            let numeric = (plus - minus) / (2.0 * h);
            let a = input_grads[(r, c)];
            worst_input = worst_input.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
    }
    println!(
        "{} input gradients, max relative error {worst_input:.2e}",
        input.rows() * input.cols()
    );
    Ok(())
}
