use lsoc::continuous::{
    control_from_costs, pi_desirability, sample_passive_rollouts, Brownian1d, FnCost, SamplingParams,
    UnicycleTeam,
};

const SIGMA: f64 = 1.0;
const BETA: f64 = 0.5;
const X0: f64 = 0.8;

fn params(n: usize) -> SamplingParams {
    SamplingParams {
        n_rollouts: n,
        dt: 0.05,
        horizon_steps: 20,
        ..Default::default()
    }
}

/// Closed-form Gaussian integral for `dx = sigma dw`, `h = beta x^2`, `lambda = 1`.
fn oracle(x: f64, horizon: f64) -> (f64, f64) {
    let k = 1.0 + 2.0 * BETA * SIGMA * SIGMA * horizon;
    let log_z = -0.5 * k.ln() - BETA * x * x / k;
    let control = SIGMA * SIGMA * (-2.0 * BETA * x / k);
    (log_z, control)
}

#[allow(clippy::type_complexity)]
fn quadratic() -> FnCost<impl Fn(&[f64], f64) -> f64 + Sync, impl Fn(&[f64]) -> f64 + Sync> {
    FnCost {
        state: |_: &[f64], _: f64| 0.0,
        terminal: |x: &[f64]| BETA * x[0] * x[0],
    }
}

#[test]
fn gaussian_oracle_within_three_standard_errors() {
    let model = Brownian1d::new(SIGMA, 1.0).unwrap();
    let (log_z, u) = oracle(X0, 1.0);
    let mut pass = 0;
    let mut total = 0;
    for n in [1_000, 10_000] {
        for seed in 1..=20 {
            let b = sample_passive_rollouts(&model, &quadratic(), &[X0], 0.0, &params(n), seed).unwrap();
            let z = pi_desirability(&b, 1.0).unwrap();
            let c = control_from_costs(&b, &b.path_costs).unwrap();
            total += 1;
            if (z.log_z - log_z).abs() <= 3.0 * z.log_z_se && (c.control[0] - u).abs() <= 3.0 * c.std_error[0]
            {
                pass += 1;
            }
        }
    }
    assert!(pass * 100 >= 95 * total, "{pass}/{total}");
}

#[test]
fn log_z_error_shrinks_with_samples() {
    let model = Brownian1d::new(SIGMA, 1.0).unwrap();
    let (log_z, _) = oracle(X0, 1.0);
    let mean_err = |n: usize| {
        (1..=20)
            .map(|seed| {
                let b = sample_passive_rollouts(&model, &quadratic(), &[X0], 0.0, &params(n), seed).unwrap();
                (pi_desirability(&b, 1.0).unwrap().log_z - log_z).abs()
            })
            .sum::<f64>()
            / 20.0
    };
    let errs: Vec<f64> = [100, 1_000, 10_000].into_iter().map(mean_err).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn doubling_samples_shrinks_standard_error() {
    let model = Brownian1d::new(SIGMA, 1.0).unwrap();
    let mean_se = |n: usize| {
        (1..=20)
            .map(|seed| {
                let b = sample_passive_rollouts(&model, &quadratic(), &[X0], 0.0, &params(n), seed).unwrap();
                pi_desirability(&b, 1.0).unwrap().log_z_se
            })
            .sum::<f64>()
            / 20.0
    };
    let ratio = mean_se(4_000) / mean_se(2_000);
    assert!((ratio - 0.5f64.sqrt()).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn noiseless_limit_is_exact() {
    let model = UnicycleTeam::uniform(1, 0.0, 0.0, 1.0).unwrap();
    let cost = FnCost {
        state: |_: &[f64], _: f64| 0.0,
        terminal: |x: &[f64]| 0.1 * x[0],
    };
    let b = sample_passive_rollouts(&model, &cost, &[0.0, 0.0, 1.0, 0.0], 0.0, &params(16), 3).unwrap();
    let z = pi_desirability(&b, 1.0).unwrap();
    let endpoint: f64 = 20.0 * 0.05;
    assert!((z.z - (-0.1 * endpoint).exp()).abs() < 1e-12);
}
