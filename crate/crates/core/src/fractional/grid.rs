use super::QuadratureError;

/// Ordered sample times `t_0 < t_1 < … < t_K` above a positive lower terminal.
///
/// The Hadamard kernel works in `log t`, so the grid caches the logarithms of
/// its points alongside the points themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    logs: Vec<f64>,
    lower: f64,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>, lower: f64) -> Result<Self, QuadratureError> {
        if !(lower > 0.0 && lower.is_finite()) {
            return Err(QuadratureError::InvalidGrid(format!(
                "lower terminal must be positive and finite, got {lower}"
            )));
        }
        if points.len() < 2 {
            return Err(QuadratureError::InvalidGrid(
                "a grid needs at least two points".into(),
            ));
        }
        if !points[0].is_finite() || points[0] < lower {
            return Err(QuadratureError::InvalidGrid(format!(
                "first point {} lies below the lower terminal {lower}",
                points[0]
            )));
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) || !w[1].is_finite() {
                return Err(QuadratureError::InvalidGrid(format!(
                    "points must be strictly increasing (index {})",
                    i + 1
                )));
            }
        }
        let logs = points.iter().map(|t| t.ln()).collect();
        Ok(Self {
            points,
            logs,
            lower,
        })
    }

    /// `t_k = start + k·step` for `k = 0..=steps`, with the lower terminal at `start`.
    pub fn uniform(start: f64, step: f64, steps: usize) -> Result<Self, QuadratureError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(QuadratureError::InvalidGrid(format!(
                "step must be positive, got {step}"
            )));
        }
        let points = (0..=steps).map(|k| start + k as f64 * step).collect();
        Self::new(points, start)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn logs(&self) -> &[f64] {
        &self.logs
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// Index of the last point, `K`.
    pub fn last_index(&self) -> usize {
        self.points.len() - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `log(t_k / t_j)`, exactly zero when `j == k`.
    pub(crate) fn log_ratio(&self, k: usize, j: usize) -> f64 {
        if j == k {
            0.0
        } else {
            self.logs[k] - self.logs[j]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(vec![1.0, 2.0], 0.0).is_err());
        assert!(TimeGrid::new(vec![0.5, 2.0], 1.0).is_err());
        assert!(TimeGrid::new(vec![1.0, 1.0], 1.0).is_err());
        assert!(TimeGrid::new(vec![1.0], 1.0).is_err());
        assert!(TimeGrid::uniform(1.0, -0.1, 3).is_err());
    }

    #[test]
    fn uniform_points() {
        let g = TimeGrid::uniform(1.0, 0.25, 4).unwrap();
        assert_eq!(g.points(), &[1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(g.last_index(), 4);
        assert_eq!(g.log_ratio(3, 3), 0.0);
    }
}
