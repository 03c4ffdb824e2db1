//! Sweeps one action's parameter and records every Q_i along the way. With
//! the joint layout an unrelated action's Q can overtake another's; with
//! multi-pass the other actions' values stay flat. Writes two CSVs.
//!
//!     cargo run --release --example sensitivity_sweep [out_dir]

use std::fs::File;
use std::path::PathBuf;

use mpdqn::nn::Activation;
use mpdqn::qfunction::{write_sweep_csv, ActionSpace, QFunction, QVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn best_other(q: &[f64], skip: usize) -> usize {
    (0..q.len())
        .filter(|&i| i != skip)
        .max_by(|&a, &b| q[a].total_cmp(&q[b]))
        .unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&out)?;
    let space = ActionSpace::new(9, vec![1, 1, 1])?;
    let grid: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 / 100.0).collect();
    let swept = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    for trial in 0.. {
        let joint = QFunction::new(space.clone(), QVariant::Joint, &[128], Activation::Relu, &mut rng)?;
        let s: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rows = joint.sensitivity_sweep(&s, &x, swept, 0, &grid)?;
        let first = best_other(&rows[0].q, swept);
        let Some(flip) = rows.iter().find(|r| best_other(&r.q, swept) != first) else {
            continue;
        };
        println!(
            "network {trial}: moving x_{swept} to {:.2} changes the best of the other actions from {first} to {}",
            flip.value,
            best_other(&flip.q, swept)
        );
        write_sweep_csv(&rows, 3, File::create(out.join("sweep_joint.csv"))?)?;

        let multipass = joint.with_variant(QVariant::MultiPass)?;
        let mp_rows = multipass.sensitivity_sweep(&s, &x, swept, 0, &grid)?;
        let flat = mp_rows.iter().all(|r| (1..3).all(|i| r.q[i] == mp_rows[0].q[i]));
        println!("same weights as multi-pass: Q_1, Q_2 constant over the sweep: {flat}");
        write_sweep_csv(&mp_rows, 3, File::create(out.join("sweep_multipass.csv"))?)?;
        println!("wrote sweep_joint.csv and sweep_multipass.csv to {}", out.display());
        break;
    }
    Ok(())
}
