use mpdqn::agent::{Agent, PdqnAgent, PdqnConfig};
use mpdqn::policy::EpsilonSchedule;
use mpdqn::qfunction::ActionSpace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn agent(epsilon: f64) -> (PdqnAgent, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let space = ActionSpace::new(4, vec![1, 2, 1]).unwrap();
    let mut agent = PdqnAgent::new(
        space,
        PdqnConfig {
            hidden: vec![16],
            ..PdqnConfig::default()
        },
        None,
        &mut rng,
    )
    .unwrap();
    agent.set_epsilon(EpsilonSchedule::constant(epsilon).unwrap());
    agent.begin_episode(0);
    (agent, rng)
}

#[test]
fn full_exploration_picks_actions_uniformly() {
    let (mut agent, mut rng) = agent(1.0);
    let state = [0.3, -0.2, 0.9, 0.0];
    let n = 30_000;
    let mut counts = [0u64; 3];
    for _ in 0..n {
        counts[agent.select_action(&state, true, &mut rng).unwrap().action] += 1;
    }
    let expected = n as f64 / 3.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
    assert!(p > 0.001, "counts {counts:?}, p = {p}");
}

#[test]
fn no_exploration_is_greedy_and_repeatable() {
    let (mut agent, mut rng) = agent(0.0);
    let state = [0.3, -0.2, 0.9, 0.0];
    let first = agent.select_action(&state, false, &mut rng).unwrap();
    let q = agent.q().q_values(&state, &first.joint).unwrap();
    assert_eq!(first.action, mpdqn::agent::argmax(&q));
    for _ in 0..20 {
        assert_eq!(agent.select_action(&state, false, &mut rng).unwrap(), first);
    }
}
