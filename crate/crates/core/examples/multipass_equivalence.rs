//! The multi-pass Q-network evaluates all K actions as one K-row batch where
//! row k sees only its own parameter block. This prints the batched K × K
//! output next to K separate single-row passes.
//!
//!     cargo run --release --example multipass_equivalence

use mpdqn::nn::{Activation, Matrix};
use mpdqn::qfunction::{ActionSpace, QFunction, QVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> mpdqn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let space = ActionSpace::new(4, vec![1, 2, 1])?;
    let qf = QFunction::new(space.clone(), QVariant::MultiPass, &[64], Activation::Relu, &mut rng)?;
    let s: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x: Vec<f64> = (0..space.joint_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();

    let batched = qf.multipass_matrix(&s, &x)?;
    println!("batched pass (row k = input with only x_k kept):");
    for row in batched.row_iter() {
        println!(
            "  {}",
            row.iter().map(|v| format!("{v:+.6}")).collect::<Vec<_>>().join("  ")
        );
    }

    println!("single passes:");
    for k in 0..space.num_actions() {
        let input: Vec<f64> = s.iter().copied().chain(space.mask(&x, k)).collect();
        let q = qf.nets()[0].predict(&Matrix::row_vector(&input)?)?;
        println!("  Q_{k} = {:+.6}   diagonal {:+.6}", q[(0, k)], batched[(k, k)]);
    }
    println!("q_multipass = {:?}", qf.q_multipass(&s, &x)?);
    Ok(())
}
