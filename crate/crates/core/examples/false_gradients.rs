//! Cross-action gradient norms ‖∂Q_i/∂x_j‖ for each Q-network layout at one
//! random state. Only the joint layout has nonzero off-diagonal entries,
//! so only there does the actor update for x_j also chase the other Q_i.
//!
//!     cargo run --release --example false_gradients

use mpdqn::nn::Activation;
use mpdqn::qfunction::{ActionSpace, QFunction, QVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> mpdqn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let space = ActionSpace::new(9, vec![1, 1, 1])?;
    let s: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    for variant in QVariant::ALL {
        let qf = QFunction::new(space.clone(), variant, &[128], Activation::Relu, &mut rng)?;
        let g = qf.cross_gradient_matrix(&s, &x)?;
        println!("{} (row i, column j):", variant.name());
        for row in g.row_iter() {
            println!(
                "  {}",
                row.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join("  ")
            );
        }
    }
    Ok(())
}
