use lsoc::discrete::random::random_mdp;
use lsoc::discrete::{
    optimal_joint_policy, running_cost_discrete, solve_mdp, DiscreteJointMdp, SolverOptions,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Gauss-Seidel value iteration on `V(x) = q(x) + min_u [KL(u||p) + E_u V]`
/// in V space. The inner minimum is attained by the Gibbs distribution, so a
/// sweep evaluates `q - log sum p exp(-V)`; no desirability solve involved.
fn value_iteration(mdp: &DiscreteJointMdp) -> Vec<f64> {
    let n = mdp.n_states();
    let mut v: Vec<f64> = (0..n).map(|i| mdp.terminal_cost_at(i).unwrap_or(0.0)).collect();
    for _ in 0..200_000 {
        let mut delta: f64 = 0.0;
        for &i in mdp.interior() {
            let row = mdp.passive_row(i);
            let m = row.iter().map(|&(j, _)| -v[j]).fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = row.iter().map(|&(j, p)| p * (-v[j] - m).exp()).sum();
            let new = mdp.state_cost(i) - (m + s.ln());
            delta = delta.max((new - v[i]).abs());
            v[i] = new;
        }
        if delta < 1e-14 {
            break;
        }
    }
    v
}

/// Cost-to-go of a fixed policy, `J = q + KL(u||p) + E_u J`, by iteration.
fn evaluate_policy(mdp: &DiscreteJointMdp, rows: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let n = mdp.n_states();
    let mut j: Vec<f64> = (0..n).map(|i| mdp.terminal_cost_at(i).unwrap_or(0.0)).collect();
    let step: Vec<f64> = (0..n)
        .map(|i| {
            if mdp.is_boundary(i) {
                0.0
            } else {
                running_cost_discrete(mdp.state_cost(i), &rows[i], mdp.passive_row(i)).unwrap()
            }
        })
        .collect();
    for _ in 0..200_000 {
        let mut delta: f64 = 0.0;
        for &i in mdp.interior() {
            let new = step[i] + rows[i].iter().map(|&(k, u)| u * j[k]).sum::<f64>();
            delta = delta.max((new - j[i]).abs());
            j[i] = new;
        }
        if delta < 1e-14 {
            break;
        }
    }
    j
}

fn policy_rows(mdp: &DiscreteJointMdp, table: &lsoc::discrete::DesirabilityTable) -> Vec<Vec<(usize, f64)>> {
    (0..mdp.n_states())
        .map(|i| {
            if mdp.is_boundary(i) {
                Vec::new()
            } else {
                optimal_joint_policy(mdp, table, i).unwrap()
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bellman_linearity_and_boundary_values(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, 50).unwrap();
        let (z, report) = solve_mdp(&mdp, &SolverOptions::default()).unwrap();
        prop_assert!(report.residual <= 1e-12, "residual {}", report.residual);
        for &i in mdp.interior() {
            let rhs: f64 = mdp.passive_row(i).iter().map(|&(j, p)| p * z.z(j)).sum();
            let lhs = mdp.state_cost(i).exp() * z.z(i);
            prop_assert!((lhs - rhs).abs() <= 1e-11 * rhs.max(1.0));
            prop_assert!(z.value(i).is_finite());
        }
        for &b in mdp.boundary() {
            prop_assert_eq!(z.value(b), mdp.terminal_cost_at(b).unwrap());
        }
    }

    #[test]
    fn optimal_policy_matches_value_iteration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, 50).unwrap();
        let (z, _) = solve_mdp(&mdp, &SolverOptions::default()).unwrap();
        let v = value_iteration(&mdp);
        let j = evaluate_policy(&mdp, &policy_rows(&mdp, &z));
        for &i in mdp.interior() {
            prop_assert!((v[i] - z.value(i)).abs() < 1e-6, "V {} vs -log Z {}", v[i], z.value(i));
            prop_assert!((j[i] - v[i]).abs() < 1e-6, "J {} vs V {}", j[i], v[i]);
        }
    }

    #[test]
    fn perturbed_policies_cost_more(seed in any::<u64>(), eps in 0.01f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, 30).unwrap();
        let (z, _) = solve_mdp(&mdp, &SolverOptions::default()).unwrap();
        let optimal = policy_rows(&mdp, &z);
        // mix towards the passive row: still absolutely continuous, never better
        let mixed: Vec<Vec<(usize, f64)>> = (0..mdp.n_states())
            .map(|i| {
                optimal[i]
                    .iter()
                    .zip(mdp.passive_row(i))
                    .map(|(&(k, u), &(_, p))| (k, (1.0 - eps) * u + eps * p))
                    .collect()
            })
            .collect();
        let j_opt = evaluate_policy(&mdp, &optimal);
        let j_mix = evaluate_policy(&mdp, &mixed);
        for &i in mdp.interior() {
            prop_assert!(j_mix[i] >= j_opt[i] - 1e-9);
        }
    }
}

#[test]
fn spectral_radius_below_one_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let mdp = random_mdp(&mut rng, 50).unwrap();
        let est = lsoc::discrete::build_linear_system(&mdp).spectral_radius(lsoc::Execution::Sequential);
        assert!(est.upper < 1.0, "{est:?}");
    }
}
