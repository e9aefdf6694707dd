//! Forward-solver invariants and oracles.

use fracseir::fractional::{build_weights, gamma, TimeGrid};
use fracseir::model::SeirConstants;
use fracseir::solver::{
    daily_new, integrate, seir_rhs, solve, EpidemicState, RateFunctions, NEGATIVE_TOLERANCE,
};
use fracseir::synthetic::SyntheticRegime;
use proptest::prelude::*;
use std::sync::Arc;

fn constants(population: f64) -> SeirConstants {
    SeirConstants::new(population, 1.0 / 3.0).unwrap()
}

fn state(n: f64, e: f64, i: f64, r: f64) -> EpidemicState {
    EpidemicState {
        t: 1.0,
        s: n * (1.0 - e - i - r),
        e: n * e,
        i: n * i,
        r: n * r,
        i_cum: n * (i + r),
    }
}

/// Classical SEIR in the variable `s = log t`, which is the `α → 1` limit of
/// the Caputo-Hadamard system. Fine-step RK4.
fn classical(u0: [f64; 5], beta: f64, mu: f64, sigma: f64, days: usize) -> Vec<[f64; 5]> {
    let per_day = 2000;
    let mut u = u0;
    let mut out = vec![u];
    let mut t: f64 = 1.0;
    for _ in 0..days {
        for _ in 0..per_day {
            let (s0, s1) = (t.ln(), (t + 1.0 / per_day as f64).ln());
            let h = s1 - s0;
            let f = |u: &[f64; 5]| seir_rhs(u, beta, mu, sigma);
            let add = |u: &[f64; 5], k: &[f64; 5], c: f64| std::array::from_fn(|i| u[i] + c * k[i]);
            let k1 = f(&u);
            let k2 = f(&add(&u, &k1, h / 2.0));
            let k3 = f(&add(&u, &k2, h / 2.0));
            let k4 = f(&add(&u, &k3, h));
            u = std::array::from_fn(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
            t += 1.0 / per_day as f64;
        }
        out.push(u);
    }
    out
}

#[test]
fn near_integer_order_matches_classical_integration() {
    let n = 1e6;
    let c = constants(n);
    let init = state(n, 0.004, 0.002, 0.0);
    let (beta, mu) = (0.9, 0.1);
    let traj = solve(&init, &RateFunctions::constant(beta, mu, 0.999, c), 14, 0.1).unwrap();
    let oracle = classical(init.to_fractions(n), beta, mu, c.sigma, 14);
    let mut worst: f64 = 0.0;
    for (s, o) in traj.states.iter().zip(&oracle) {
        for (x, y) in s.to_fractions(n).iter().zip(o) {
            worst = worst.max((x - y).abs() / y.abs().max(1e-12));
        }
    }
    assert!(worst < 0.02, "max relative deviation {worst}");
}

#[test]
fn synthetic_regime_stays_nonnegative_for_thirty_days() {
    let regime = SyntheticRegime::reference();
    let n = regime.constants.population;
    let grid = TimeGrid::uniform(1.0, regime.tau, 300).unwrap();
    let table = build_weights(&grid, regime.alpha).unwrap();
    let states = integrate(&table, vec![regime.initial_state().to_fractions(n)], &regime.rates()).unwrap();
    for u in &states {
        assert!(u.iter().all(|v| *v >= -NEGATIVE_TOLERANCE));
        assert!(u[4] >= u[2] - 1e-15);
    }
    let traj = regime.trajectory(31).unwrap();
    assert!(daily_new(&traj).unwrap().infected.iter().all(|d| *d >= 0.0));
}

/// `E_α(z)` by its power series; adequate for the moderate `|z|` used here.
fn mittag_leffler(alpha: f64, z: f64) -> f64 {
    (0..120)
        .map(|k| z.powi(k) / gamma(alpha * k as f64 + 1.0))
        .take_while(|v| v.is_finite())
        .sum()
}

/// With `β = 0` the exposed compartment decays as `E_0 E_α(−σ (log t)^α)`.
fn decay_case(alpha: f64) -> (EpidemicState, RateFunctions) {
    let init = EpidemicState {
        t: 1.0,
        s: 0.99,
        e: 0.01,
        i: 0.0,
        r: 0.0,
        i_cum: 0.0,
    };
    (init, RateFunctions::constant(0.0, 0.1, alpha, constants(1.0)))
}

#[test]
fn linear_decay_matches_mittag_leffler_at_first_order() {
    for alpha in [0.3, 0.5, 0.7, 0.9] {
        let (init, rates) = decay_case(alpha);
        let exact = 0.01 * mittag_leffler(alpha, -(11f64).ln().powf(alpha) / 3.0);
        let errors: Vec<f64> = [0.25, 0.125, 0.0625, 0.03125]
            .iter()
            .map(|tau| (solve(&init, &rates, 10, *tau).unwrap().states[10].e - exact).abs())
            .collect();
        let order = (errors[0] / errors[3]).log2() / 3.0;
        assert!(order >= 0.95, "alpha {alpha}: order {order}, errors {errors:?}");
    }
}

#[test]
fn halving_the_step_converges() {
    let (init, rates) = decay_case(0.7);
    let at = |tau: f64| solve(&init, &rates, 10, tau).unwrap().states[10].to_fractions(1.0);
    let (a, b, c) = (at(0.125), at(0.0625), at(0.03125));
    let d1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let d2: f64 = b.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let order = (d1 / d2).log2();
    assert!(order >= 1.0, "self-convergence order {order}");
}

#[test]
fn time_dependent_rates_are_sampled_on_the_step_grid() {
    let c = constants(5e5);
    let rates = RateFunctions {
        beta: Arc::new(|t| 0.3 + 0.1 * (t / 5.0).sin()),
        mu: Arc::new(|t| 0.05 + 0.01 * t.ln()),
        alpha: 0.6,
        constants: c,
    };
    let traj = solve(&state(5e5, 0.002, 0.001, 0.0), &rates, 20, 0.1).unwrap();
    assert_eq!(traj.len(), 21);
    for s in &traj.states {
        assert!(((s.total() - 5e5) / 5e5).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn population_is_conserved_at_every_step(
        alpha in 0.1..0.99f64,
        beta in 0.01..2.0f64,
        mu in 0.01..0.5f64,
        e0 in 0.0..0.05f64,
        i0 in 0.0..0.05f64,
        r0 in 0.0..0.05f64,
        log_n in 3.0..8.0f64,
    ) {
        let n = 10f64.powf(log_n);
        let grid = TimeGrid::uniform(1.0, 0.1, 300).unwrap();
        let table = build_weights(&grid, alpha).unwrap();
        let rates = RateFunctions::constant(beta, mu, alpha, constants(n));
        let states = integrate(&table, vec![state(n, e0, i0, r0).to_fractions(n)], &rates).unwrap();
        let total0: f64 = states[0][..4].iter().sum();
        for u in &states {
            let total: f64 = u[..4].iter().sum();
            prop_assert!((total - total0).abs() < 1e-8);
            prop_assert!(u.iter().all(|v| *v >= -NEGATIVE_TOLERANCE));
        }
    }

    #[test]
    fn daily_new_telescopes(values in prop::collection::vec(0.0..1e4f64, 2..40)) {
        let mut cum = 0.0;
        let states: Vec<EpidemicState> = values
            .iter()
            .enumerate()
            .map(|(d, v)| {
                cum += v;
                EpidemicState { t: 1.0 + d as f64, s: 0.0, e: 0.0, i: 0.0, r: cum / 2.0, i_cum: cum }
            })
            .collect();
        let traj = fracseir::solver::Trajectory { states };
        let new = daily_new(&traj).unwrap();
        let mut acc = traj.states[0].i_cum;
        for (d, inc) in new.infected.iter().enumerate() {
            acc += inc;
            prop_assert!((acc - traj.states[d + 1].i_cum).abs() <= 1e-9 * acc.max(1.0));
        }
    }
}
