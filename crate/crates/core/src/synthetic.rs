//! Case series generated by the forward solver from known parameters.

use chrono::NaiveDate;

use crate::data::{CaseSeries, TrainingData};
use crate::model::SeirConstants;
use crate::solver::{solve, EpidemicState, RateFunctions, SolverError, Trajectory};

/// Generating parameters of a synthetic outbreak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticRegime {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub constants: SeirConstants,
    /// Exposed and infected persons on day 1; everyone else is susceptible.
    pub exposed0: f64,
    pub infected0: f64,
    pub tau: f64,
}

impl SyntheticRegime {
    /// `(α, β, μ) = (0.8, 0.25, 0.05)`, `N = 10⁶`, `σ = 1/3`.
    pub fn reference() -> Self {
        SyntheticRegime {
            alpha: 0.8,
            beta: 0.25,
            mu: 0.05,
            constants: SeirConstants::new(1e6, 1.0 / 3.0).expect("valid constants"),
            exposed0: 4_000.0,
            infected0: 2_000.0,
            tau: 0.1,
        }
    }

    pub fn rates(&self) -> RateFunctions {
        RateFunctions::constant(self.beta, self.mu, self.alpha, self.constants)
    }

    /// State on day 1. `I^c` starts at the current infections and `R` at
    /// zero, so `I = I^c − R` along the whole trajectory.
    pub fn initial_state(&self) -> EpidemicState {
        let n = self.constants.population;
        EpidemicState {
            t: 1.0,
            s: n - self.exposed0 - self.infected0,
            e: self.exposed0,
            i: self.infected0,
            r: 0.0,
            i_cum: self.infected0,
        }
    }

    /// Daily truth on days `1..=days`.
    pub fn trajectory(&self, days: usize) -> Result<Trajectory, SolverError> {
        solve(&self.initial_state(), &self.rates(), days.saturating_sub(1), self.tau)
    }

    /// Loss-ready arrays taken straight from the truth on days `1..=days`.
    pub fn training_data(&self, days: usize) -> Result<TrainingData, SolverError> {
        let traj = self.trajectory(days)?;
        let n = self.constants.population;
        let col = |f: fn(&EpidemicState) -> f64| traj.column(f).iter().map(|v| v / n).collect();
        let cum_infected: Vec<f64> = col(|s| s.i_cum);
        let removed: Vec<f64> = col(|s| s.r);
        let backward = |xs: &[f64]| {
            let mut out = vec![xs[0]];
            out.extend(xs.windows(2).map(|w| w[1] - w[0]));
            out
        };
        Ok(TrainingData {
            population: n,
            start_date: None,
            days: (1..=days).map(|d| d as f64).collect(),
            new_infected: backward(&cum_infected),
            new_removed: backward(&removed),
            current_infected: col(|s| s.i),
            cum_infected,
            removed,
        })
    }

    /// Raw daily counts on days `1..=days` starting at `start`, with all
    /// removals reported as recoveries. Day 1 carries the initial infections.
    pub fn case_series(&self, days: usize, start: NaiveDate) -> Result<CaseSeries, SolverError> {
        let traj = self.trajectory(days)?;
        let daily = |f: fn(&EpidemicState) -> f64| {
            let xs = traj.column(f);
            let mut out = vec![xs[0]];
            out.extend(xs.windows(2).map(|w| w[1] - w[0]));
            out
        };
        let dates = (0..days as u64).map(|d| start + chrono::Days::new(d)).collect();
        Ok(CaseSeries::from_daily(
            dates,
            daily(|s| s.i_cum),
            daily(|s| s.r),
            vec![0.0; days],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrays_satisfy_series_identities() {
        let regime = SyntheticRegime::reference();
        let data = regime.training_data(30).unwrap();
        assert_eq!(data.len(), 30);
        for d in 0..30 {
            let i = data.cum_infected[d] - data.removed[d];
            assert!((i - data.current_infected[d]).abs() < 1e-12);
        }
        for d in 1..30 {
            let inc = data.cum_infected[d] - data.cum_infected[d - 1];
            assert_eq!(inc, data.new_infected[d]);
            assert!(inc >= 0.0);
        }
    }

    #[test]
    fn case_series_cumulates_to_truth() {
        let regime = SyntheticRegime::reference();
        let start = NaiveDate::from_ymd_opt(2022, 3, 5).unwrap();
        let series = regime.case_series(20, start).unwrap();
        let traj = regime.trajectory(20).unwrap();
        for (d, s) in traj.states.iter().enumerate() {
            assert!((series.cum_infected[d] - s.i_cum).abs() < 1e-6);
            assert!((series.cum_removed[d] - s.r).abs() < 1e-6);
        }
    }
}
