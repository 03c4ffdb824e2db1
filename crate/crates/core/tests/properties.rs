use mpdqn::agent::discounted_returns;
use mpdqn::envs::{Environment, Platform, PlatformConfig};
use mpdqn::harness::{smooth, summarize};
use mpdqn::nn::{polyak_update, Activation, DenseNet};
use mpdqn::policy::{invert_gradients, EpsilonSchedule, ParamScaler};
use mpdqn::qfunction::{ActionSpace, QFunction, QVariant};
use mpdqn::replay::{ReplayBuffer, Transition};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn space_strategy() -> impl Strategy<Value = ActionSpace> {
    (1usize..5, prop::collection::vec(1usize..4, 2..5)).prop_map(|(sd, dims)| ActionSpace::new(sd, dims).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mask_keeps_only_one_block(space in space_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..space.joint_dim()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        for k in 0..space.num_actions() {
            let m = space.mask(&x, k);
            for (i, v) in m.iter().enumerate() {
                let expected = if space.block_range(k).contains(&i) { x[i] } else { 0.0 };
                prop_assert_eq!(*v, expected);
            }
        }
    }

    #[test]
    fn decoupled_layouts_ignore_other_blocks(space in space_strategy(), seed in any::<u64>(), delta in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..space.state_dim()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let x: Vec<f64> = (0..space.joint_dim()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        for variant in [QVariant::MultiPass, QVariant::Separate] {
            let qf = QFunction::new(space.clone(), variant, &[16], Activation::Relu, &mut rng).unwrap();
            let base = qf.q_values(&s, &x).unwrap();
            let mut moved = x.clone();
            let j = space.num_actions() - 1;
            for c in space.block_range(j) {
                moved[c] = (moved[c] + delta).clamp(-1.0, 1.0);
            }
            let after = qf.q_values(&s, &moved).unwrap();
            for i in 0..j {
                prop_assert_eq!(base[i], after[i]);
            }
        }
    }

    #[test]
    fn multipass_values_are_the_batched_diagonal(space in space_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..space.state_dim()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let x: Vec<f64> = (0..space.joint_dim()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let qf = QFunction::new(space.clone(), QVariant::MultiPass, &[16, 8], Activation::Relu, &mut rng).unwrap();
        let m = qf.multipass_matrix(&s, &x).unwrap();
        let q = qf.q_values(&s, &x).unwrap();
        for k in 0..space.num_actions() {
            prop_assert!((m[(k, k)] - q[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn inverted_gradients_shrink_and_keep_sign(
        g in -100.0f64..100.0,
        lo in -10.0f64..0.0,
        width in 1e-3f64..10.0,
        t in 0.0f64..=1.0,
    ) {
        let hi = lo + width;
        let x = lo + t * width;
        let out = invert_gradients(&[g], &[x], &[(lo, hi)]).unwrap()[0];
        prop_assert!(out.abs() <= g.abs() * (1.0 + 1e-12));
        prop_assert!(out * g >= 0.0);
    }

    #[test]
    fn scaler_round_trips(lo in -50.0f64..50.0, width in 1e-2f64..100.0, t in 0.0f64..=1.0) {
        let scaler = ParamScaler::new(vec![(lo, lo + width)]).unwrap();
        let native = lo + t * width;
        let scaled = scaler.scale(&[native]).unwrap()[0];
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&scaled));
        let back = scaler.unscale(&[scaled]).unwrap()[0];
        prop_assert!((back - native).abs() <= 1e-9 * (1.0 + native.abs()));
    }

    #[test]
    fn epsilon_never_increases(start in 0.0f64..=1.0, frac in 0.0f64..=1.0, horizon in 1u64..500) {
        let end = start * frac;
        let sched = EpsilonSchedule::new(start, end, horizon).unwrap();
        let mut prev = f64::INFINITY;
        for e in 0..horizon + 10 {
            let v = sched.value_at(e);
            prop_assert!(v <= prev && v >= end - 1e-15 && v <= start + 1e-15);
            prev = v;
        }
        prop_assert_eq!(sched.value_at(horizon + 5), end);
    }

    #[test]
    fn smoothing_stays_within_range(series in prop::collection::vec(-5.0f64..5.0, 1..300), window in 1usize..50) {
        let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = smooth(&series, window).unwrap();
        prop_assert_eq!(out.len(), series.len());
        prop_assert!(out.iter().all(|v| *v >= lo - 1e-9 && *v <= hi + 1e-9));
    }

    #[test]
    fn summary_is_consistent(values in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let s = summarize(&values).unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s.mean >= lo - 1e-12 && s.mean <= hi + 1e-12);
        prop_assert!(s.std >= 0.0);
        prop_assert!((s.stderr * (values.len() as f64).sqrt() - s.std).abs() <= 1e-12);
    }

    #[test]
    fn returns_satisfy_the_recursion(rewards in prop::collection::vec(-1.0f64..1.0, 1..30), gamma in 0.0f64..=1.0) {
        let g = discounted_returns(&rewards, gamma);
        prop_assert_eq!(*g.last().unwrap(), *rewards.last().unwrap());
        for t in 0..rewards.len() - 1 {
            prop_assert!((g[t] - (rewards[t] + gamma * g[t + 1])).abs() <= 1e-12);
        }
    }

    #[test]
    fn replay_keeps_the_newest(capacity in 1usize..40, pushes in 0usize..120) {
        let mut buf = ReplayBuffer::new(capacity, ActionSpace::new(1, vec![1]).unwrap()).unwrap();
        for i in 0..pushes {
            buf.push(Transition::new(vec![0.0], 0, vec![0.0], i as f64, vec![0.0], false)).unwrap();
        }
        let kept: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        let first = pushes.saturating_sub(capacity);
        prop_assert_eq!(kept, (first..pushes).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn polyak_is_a_convex_combination(seed in any::<u64>(), tau in 1e-4f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = DenseNet::new(3, &[5], 2, Activation::Relu, &mut rng).unwrap();
        let target = DenseNet::new(3, &[5], 2, Activation::Relu, &mut rng).unwrap();
        let mut moved = [target.clone()];
        polyak_update(&mut moved, std::slice::from_ref(&online), tau).unwrap();
        let before = target.param_slices().flat_map(|s| s.iter().copied());
        let after = moved[0].param_slices().flat_map(|s| s.iter().copied());
        for ((t, o), m) in before.zip(online.param_slices().flat_map(|s| s.iter().copied())).zip(after) {
            prop_assert!((m - (tau * o + (1.0 - tau) * t)).abs() <= 1e-15);
        }
    }

    #[test]
    fn platform_observations_stay_bounded(actions in prop::collection::vec((0usize..3, 0.0f64..=1.0), 1..40)) {
        let mut env = Platform::new(PlatformConfig::default()).unwrap();
        let state = env.reset(0);
        prop_assert!(state.iter().all(|v| (-1.0..=1.0).contains(v)));
        let mut total = 0.0;
        for (k, p) in actions {
            let step = env.step(k, &[p]).unwrap();
            prop_assert!(step.reward >= 0.0);
            prop_assert!(step.state.iter().all(|v| (-1.0..=1.0).contains(v)));
            total += step.reward;
            if step.terminal {
                break;
            }
        }
        prop_assert!(total <= 1.0 + 1e-12);
    }
}
