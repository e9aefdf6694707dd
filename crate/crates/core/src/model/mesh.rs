use crate::fractional::TimeGrid;
use crate::solver::{steps_per_day, SolverError};

/// Data nodes `1..=N_u` and the residual nodes `1 + kτ` covering `[1, N_u]`.
///
/// Every data node is also a residual node; day `j` sits at mesh index
/// `(j − 1)/τ`. Residuals are evaluated at indices `1..=K`: the quadrature
/// has no value at the lower terminal itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMesh {
    n_data: usize,
    tau: f64,
    per_day: usize,
    grid: TimeGrid,
}

impl TrainingMesh {
    pub fn new(n_data: usize, tau: f64) -> Result<Self, SolverError> {
        let per_day = steps_per_day(tau)?;
        if n_data < 2 {
            return Err(SolverError::TooShort(n_data));
        }
        let grid = TimeGrid::uniform(1.0, tau, (n_data - 1) * per_day)?;
        Ok(Self {
            n_data,
            tau,
            per_day,
            grid,
        })
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps_per_day(&self) -> usize {
        self.per_day
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `K`, the index of the last residual node.
    pub fn last_index(&self) -> usize {
        self.grid.last_index()
    }

    /// Mesh index of data day `day` (1-based).
    pub fn data_index(&self, day: usize) -> usize {
        (day - 1) * self.per_day
    }
}
