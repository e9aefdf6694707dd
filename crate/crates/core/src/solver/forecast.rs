use serde::{Deserialize, Serialize};

use super::{daily_new, integrate, EpidemicState, RateFunctions, SolverError, Trajectory};
use crate::data::TrainingData;
use crate::fractional::{build_weights, TimeGrid};
use crate::model::{Compartment, SeirModel, TrainingMesh};

/// Relative spread applied to the frozen transmission rate.
pub const DEFAULT_UNCERTAINTY: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Central,
    Upper,
    Lower,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Central, Band::Upper, Band::Lower];

    /// Multiplier on `β` for this band.
    pub fn factor(self, uncertainty: f64) -> f64 {
        match self {
            Band::Central => 1.0,
            Band::Upper => 1.0 + uncertainty,
            Band::Lower => 1.0 - uncertainty,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Band::Central => "central",
            Band::Upper => "upper",
            Band::Lower => "lower",
        }
    }
}

/// Three forecasts differing only in the frozen `β`.
///
/// Each trajectory holds daily states from the last training day `N_u`
/// through `N_u + horizon`; `daily_new[b][d]` is the new infections on day
/// `N_u + d + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBundle {
    pub uncertainty: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub central: Trajectory,
    pub upper: Trajectory,
    pub lower: Trajectory,
    pub daily_new: [Vec<f64>; 3],
}

impl ForecastBundle {
    pub fn band(&self, band: Band) -> &Trajectory {
        match band {
            Band::Central => &self.central,
            Band::Upper => &self.upper,
            Band::Lower => &self.lower,
        }
    }

    pub fn band_daily_new(&self, band: Band) -> &[f64] {
        &self.daily_new[band as usize]
    }

    pub fn horizon(&self) -> usize {
        self.central.len().saturating_sub(1)
    }
}

/// Forecasts `horizon_days` past the training window with `β` and `μ`
/// frozen at their last fitted values.
///
/// The memory of the fitted dynamics is kept: the solver history over the
/// training window is the networks' trajectory on the training mesh, the
/// last node's `I, R, I^c` are replaced by the final data values, and the
/// integration continues from there with the lower terminal still at the
/// window start.
pub fn forecast(
    model: &SeirModel,
    data: &TrainingData,
    horizon_days: usize,
    uncertainty: f64,
) -> Result<ForecastBundle, SolverError> {
    if !model.is_trained() {
        return Err(SolverError::Untrained);
    }
    if horizon_days == 0 {
        return Err(SolverError::Horizon);
    }
    if !(0.0..1.0).contains(&uncertainty) {
        return Err(SolverError::Uncertainty(uncertainty));
    }
    let window = model.window();
    if data.len() != window.n_data {
        return Err(SolverError::WindowMismatch {
            data: data.len(),
            model: window.n_data,
        });
    }
    let mesh = TrainingMesh::new(window.n_data, window.tau)?;
    let per_day = mesh.steps_per_day();
    let last = mesh.last_index();
    let t_last = mesh.grid().points()[last];

    let mut history: Vec<[f64; 5]> = mesh.grid().points()[..last]
        .iter()
        .map(|&t| Compartment::ALL.map(|c| model.fraction(c, t)))
        .collect();
    let n_u = data.len() - 1;
    history.push([
        model.fraction(Compartment::Susceptible, t_last),
        model.fraction(Compartment::Exposed, t_last),
        data.current_infected[n_u],
        data.removed[n_u],
        data.cum_infected[n_u],
    ]);

    let steps = last + horizon_days * per_day;
    let grid = TimeGrid::uniform(1.0, window.tau, steps)?;
    let alpha = model.table_alpha();
    let table = build_weights(&grid, alpha)?;
    let (beta, mu) = (model.beta(t_last), model.mu(t_last));
    let base = RateFunctions::constant(beta, mu, alpha, *model.constants());

    let population = model.constants().population;
    let run = |band: Band| -> Result<Trajectory, SolverError> {
        let rates = base.scale_beta(band.factor(uncertainty));
        let fine = integrate(&table, history.clone(), &rates)?;
        let states = (0..=horizon_days)
            .map(|d| {
                let k = last + d * per_day;
                EpidemicState::from_fractions(grid.points()[k], &fine[k], population)
            })
            .collect();
        Ok(Trajectory { states })
    };

    let run = &run;
    let [central, upper, lower] = std::thread::scope(|scope| {
        let handles = Band::ALL.map(|band| scope.spawn(move || run(band)));
        handles.map(|h| h.join().expect("forecast band thread panicked"))
    });
    let (central, upper, lower) = (central?, upper?, lower?);
    let daily_new = [
        daily_new(&central)?.infected,
        daily_new(&upper)?.infected,
        daily_new(&lower)?.infected,
    ];
    Ok(ForecastBundle {
        uncertainty,
        alpha: model.alpha(),
        beta,
        mu,
        central,
        upper,
        lower,
        daily_new,
    })
}
