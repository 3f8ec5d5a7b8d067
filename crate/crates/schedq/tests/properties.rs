//! Property tests for the simulator, baseline, network, and metrics.

use proptest::collection::vec;
use proptest::prelude::*;

use schedq::baseline::{brute_force_optimal, greedy_action, run_greedy_episode};
use schedq::env::{EnvConfig, EnvState};
use schedq::eval::{advantage, kde, Kde};
use schedq::nn::{init_network, NetArchitecture};
use schedq::qlearn::act;

/// Strategy for a valid environment config with up to four users.
fn env_config() -> impl Strategy<Value = EnvConfig> {
    (2usize..=4, 0u64..1_000_000).prop_flat_map(|(n, seed)| {
        (
            vec(0.0f64..6.0, n),
            vec(0.5f64..2.0, n),
            vec(0.0f64..1.0, n * n),
            0.0f64..0.1,
            0.0f64..0.1,
            1usize..=3,
        )
            .prop_map(move |(buffers, weights, p_flat, sigma_w, sigma_p, m)| {
                let mut p = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            p[i][j] = p_flat[i * n + j];
                        }
                    }
                }
                EnvConfig {
                    n_users: n,
                    initial_buffers: buffers,
                    initial_weights: weights,
                    initial_penalty_matrix: p,
                    memory_window: m,
                    sigma_w,
                    sigma_p,
                    w_bounds: (0.5, 2.0),
                    p_max: 1.0,
                    max_steps: 200,
                    seed,
                    normalize_state: true,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Random rollouts never violate the state invariants, rewards stay
    /// nonpositive, and the episode ends within the serve-count bound.
    #[test]
    fn rollouts_preserve_invariants(config in env_config(), policy_seed in 0u64..1000) {
        let mut state = EnvState::reset(&config).unwrap();
        let mut rng_state = policy_seed;
        let serve_bound: f64 = config
            .initial_buffers
            .iter()
            .map(|b| (b / config.w_bounds.0).ceil())
            .sum();
        let mut steps = 0usize;
        while !state.is_terminal() {
            let eligible = state.eligible_actions();
            prop_assert!(!eligible.is_empty());
            // cheap deterministic "random" pick
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let user = eligible[(rng_state >> 33) as usize % eligible.len()];
            let out = state.step(user).unwrap();
            prop_assert!(out.reward <= 0.0);
            steps += 1;

            prop_assert!(state.buffers().iter().all(|&b| b >= 0.0));
            for (i, row) in state.penalty_matrix().iter().enumerate() {
                for (j, &p) in row.iter().enumerate() {
                    if i == j {
                        prop_assert_eq!(p, 0.0);
                    } else {
                        prop_assert!((0.0..=config.p_max).contains(&p));
                    }
                }
            }
            let (w_min, w_max) = config.w_bounds;
            prop_assert!(state.weights().iter().all(|&w| w >= w_min && w <= w_max));
            prop_assert!(state.history().count() <= config.memory_window);
        }
        prop_assert!(steps as f64 <= serve_bound + 1.0);
        prop_assert!(steps <= config.max_steps);
        prop_assert_eq!(state.state_vector().len(), config.n_users + config.n_users * config.n_users);
    }

    /// Identical configs and action sequences give identical trajectories.
    #[test]
    fn replay_is_deterministic(config in env_config(), policy_seed in 0u64..1000) {
        let mut a = EnvState::reset(&config).unwrap();
        let mut b = EnvState::reset(&config).unwrap();
        let mut rng_state = policy_seed;
        while !a.is_terminal() {
            let eligible = a.eligible_actions();
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let user = eligible[(rng_state >> 33) as usize % eligible.len()];
            let ra = a.step(user).unwrap();
            let rb = b.step(user).unwrap();
            prop_assert_eq!(ra.reward.to_bits(), rb.reward.to_bits());
            prop_assert_eq!(ra.next_state_vector, rb.next_state_vector);
        }
        prop_assert!(b.is_terminal());
    }

    /// The penalty of serving `user` only reads row `user` of the matrix;
    /// rewriting any other row never changes it.
    #[test]
    fn penalty_reads_only_own_row(
        config in env_config(),
        prefix_picks in vec(0usize..4, 1..6),
        user_pick in 0usize..4,
        other_pick in 0usize..4,
        replacement in 0.0f64..1.0,
    ) {
        let n = config.n_users;
        let user = user_pick % n;
        let other = other_pick % n;
        prop_assume!(other != user);

        let mut base = config;
        base.sigma_p = 0.0;
        base.sigma_w = 0.0;
        let mut altered = base.clone();
        for j in 0..n {
            if j != other {
                altered.initial_penalty_matrix[other][j] = replacement;
            }
        }

        // walk both variants through the same action sequence
        let mut sa = EnvState::reset(&base).unwrap();
        let mut sb = EnvState::reset(&altered).unwrap();
        for pick in prefix_picks {
            let eligible = sa.eligible_actions();
            if eligible.is_empty() {
                break;
            }
            let u = eligible[pick % eligible.len()];
            sa.step(u).unwrap();
            sb.step(u).unwrap();
        }
        prop_assert_eq!(sa.penalty(user).unwrap(), sb.penalty(user).unwrap());
    }

    /// Greedy always returns an eligible user, and the oracle never does
    /// worse than greedy on static instances.
    #[test]
    fn oracle_dominates_greedy(config in env_config()) {
        let mut cfg = config;
        cfg.sigma_w = 0.0;
        cfg.sigma_p = 0.0;
        // keep instances small enough for the oracle
        for b in &mut cfg.initial_buffers {
            *b = b.min(3.0);
        }
        let state = EnvState::reset(&cfg).unwrap();
        if !state.is_terminal() {
            let g = greedy_action(&state).unwrap();
            prop_assert!(state.buffers()[g] > 0.0);
        }
        let greedy = run_greedy_episode(&cfg).unwrap();
        let oracle = brute_force_optimal(&cfg, 2_000_000).unwrap();
        prop_assert!(oracle.total_reward >= greedy.total_reward - 1e-9);
    }

    /// The masked argmax policy only ever picks eligible users.
    #[test]
    fn act_returns_eligible(config in env_config(), net_seed in 0u64..100) {
        let arch = NetArchitecture {
            input_dim: config.state_dim(),
            hidden_layers: 1,
            hidden_width: 8,
            output_dim: config.n_users,
        };
        let net = init_network(&arch, net_seed).unwrap();
        let mut state = EnvState::reset(&config).unwrap();
        while !state.is_terminal() {
            let user = act(&net, &state).unwrap();
            prop_assert!(state.buffers()[user] > 0.0);
            state.step(user).unwrap();
        }
    }

    /// Scaling the output layer by a positive constant scales Q-values and
    /// leaves the induced policy unchanged.
    #[test]
    fn output_layer_is_positively_homogeneous(scale in 0.1f64..10.0, seed in 0u64..100) {
        let arch = NetArchitecture {
            input_dim: 6,
            hidden_layers: 2,
            hidden_width: 8,
            output_dim: 4,
        };
        let mut net = init_network(&arch, seed).unwrap();
        let input = [0.3, -0.4, 0.9, 0.0, 0.5, -1.1];
        let base = net.forward(&input).unwrap();
        for w in net.layer_weights_mut(arch.hidden_layers) {
            *w *= scale;
        }
        let scaled = net.forward(&input).unwrap();
        for (s, b) in scaled.iter().zip(&base) {
            prop_assert!((s - scale * b).abs() < 1e-9);
        }
    }

    /// Advantage is positive iff the agent improved, negative iff it
    /// regressed, zero on equality.
    #[test]
    fn advantage_sign_is_faithful(greedy in -1000.0f64..-1.0, agent in -1000.0f64..-1.0) {
        let adv = advantage(greedy, agent).unwrap();
        if (agent - greedy).abs() < 1e-9 {
            prop_assert_eq!(adv, 0);
        } else if agent > greedy {
            prop_assert!(adv >= 0);
        } else {
            prop_assert!(adv <= 0);
        }
    }

    /// KDE curves are nonnegative, normalized within 1%, and shift with the
    /// data.
    #[test]
    fn kde_is_a_density(samples in vec(-100.0f64..100.0, 2..40), shift in -50.0f64..50.0) {
        let curve = kde(&samples, 128).unwrap();
        prop_assert!(curve.density.iter().all(|&d| d >= 0.0));
        let integral = curve.integral();
        prop_assert!((0.99..=1.01).contains(&integral), "integral {}", integral);

        let shifted: Vec<f64> = samples.iter().map(|x| x + shift).collect();
        let a = Kde::new(&samples).unwrap();
        let b = Kde::new(&shifted).unwrap();
        prop_assert!((a.bandwidth() - b.bandwidth()).abs() < 1e-9);
        let x = samples[0];
        prop_assert!((a.evaluate(x) - b.evaluate(x + shift)).abs() < 1e-9);
    }
}
