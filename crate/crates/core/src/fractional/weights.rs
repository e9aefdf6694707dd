use super::gamma::gamma;
use super::{QuadratureError, TimeGrid};

/// `x^p` with `0^p = 0` for the positive exponents that occur here.
fn pow0(x: f64, p: f64) -> f64 {
    debug_assert!(x >= 0.0, "negative log ratio {x}");
    if x == 0.0 {
        0.0
    } else {
        x.powf(p)
    }
}

fn check_alpha(alpha: f64) -> Result<(), QuadratureError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(QuadratureError::OrderOutOfRange(alpha))
    }
}

fn check_pair(grid: &TimeGrid, j: usize, k: usize, min_j: usize) -> Result<(), QuadratureError> {
    if j < min_j || j > k || k > grid.last_index() {
        Err(QuadratureError::Index {
            j,
            k,
            last: grid.last_index(),
        })
    } else {
        Ok(())
    }
}

/// `a_{j,k} = (log(t_k/t_{j-1}))^{1-α} − (log(t_k/t_j))^{1-α}` for `1 ≤ j ≤ k`.
pub fn a_coeff(grid: &TimeGrid, alpha: f64, j: usize, k: usize) -> Result<f64, QuadratureError> {
    check_alpha(alpha)?;
    check_pair(grid, j, k, 1)?;
    let e = 1.0 - alpha;
    Ok(pow0(grid.log_ratio(k, j - 1), e) - pow0(grid.log_ratio(k, j), e))
}

/// The quadratic-correction coefficient `b_{j,k}` for `2 ≤ j ≤ k`.
pub fn b_coeff(grid: &TimeGrid, alpha: f64, j: usize, k: usize) -> Result<f64, QuadratureError> {
    check_alpha(alpha)?;
    check_pair(grid, j, k, 2)?;
    let span = grid.log_ratio(j, j - 2);
    let h = grid.log_ratio(j, j - 1);
    let near = grid.log_ratio(k, j);
    let far = grid.log_ratio(k, j - 1);
    let linear = h * (pow0(near, 1.0 - alpha) + pow0(far, 1.0 - alpha));
    let curved = 2.0 / (2.0 - alpha) * (pow0(near, 2.0 - alpha) - pow0(far, 2.0 - alpha));
    Ok((linear + curved) / span)
}

/// Lower-triangular weight rows: row `k` holds `k` weights multiplying the
/// increments `u^j − u^{j−1}`, `j = 1..=k`, all scaled by one common factor.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRows {
    rows: Vec<Vec<f64>>,
    scale: f64,
}

impl WeightRows {
    fn last_index(&self) -> usize {
        self.rows.len() - 1
    }

    /// Weights of row `k` before the common scale factor is applied.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `scale · Σ_{j=1..k} w_{j,k} (u^j − u^{j−1})`.
    pub fn apply(&self, values: &[f64], k: usize) -> Result<f64, QuadratureError> {
        if k == 0 || k > self.last_index() {
            return Err(QuadratureError::Index {
                j: k,
                k,
                last: self.last_index(),
            });
        }
        if values.len() < k + 1 {
            return Err(QuadratureError::LengthMismatch {
                needed: k + 1,
                got: values.len(),
            });
        }
        let sum: f64 = self.rows[k]
            .iter()
            .enumerate()
            .map(|(i, w)| w * (values[i + 1] - values[i]))
            .sum();
        Ok(self.scale * sum)
    }

    /// Applies row `k` for every `k = 1..=K`; element `k − 1` of the result
    /// belongs to node `k`.
    pub fn apply_all(&self, values: &[f64]) -> Result<Vec<f64>, QuadratureError> {
        let last = self.last_index();
        if values.len() != last + 1 {
            return Err(QuadratureError::LengthMismatch {
                needed: last + 1,
                got: values.len(),
            });
        }
        let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        Ok((1..=last)
            .map(|k| {
                let s: f64 = self.rows[k].iter().zip(&diffs).map(|(w, d)| w * d).sum();
                self.scale * s
            })
            .collect())
    }

    /// Transpose of [`apply_all`](Self::apply_all): maps sensitivities of the
    /// `K` derivative values back onto the `K + 1` samples.
    pub fn adjoint(&self, upstream: &[f64]) -> Result<Vec<f64>, QuadratureError> {
        let last = self.last_index();
        if upstream.len() != last {
            return Err(QuadratureError::LengthMismatch {
                needed: last,
                got: upstream.len(),
            });
        }
        // Gradient with respect to each increment, then spread onto samples.
        let mut by_increment = vec![0.0; last];
        for (k, g) in (1..=last).zip(upstream) {
            if *g == 0.0 {
                continue;
            }
            let g = g * self.scale;
            for (acc, w) in by_increment.iter_mut().zip(&self.rows[k]) {
                *acc += g * w;
            }
        }
        let mut out = vec![0.0; last + 1];
        for (i, d) in by_increment.iter().enumerate() {
            out[i + 1] += d;
            out[i] -= d;
        }
        Ok(out)
    }

    /// Coefficient of `u^j` at node `k` in the expanded form
    /// `c_{k,k}u^k + Σ (c_{j,k} − c_{j+1,k})u^j − c_{1,k}u^0`, unscaled.
    pub fn expanded(&self, k: usize, j: usize) -> f64 {
        let row = &self.rows[k];
        match j {
            0 => -row[0],
            j if j == k => row[k - 1],
            j if j < k => row[j - 1] - row[j],
            _ => 0.0,
        }
    }
}

/// Caputo-Hadamard weights `c_{j,k}` for one `(grid, α)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureTable {
    alpha: f64,
    grid: TimeGrid,
    weights: WeightRows,
}

impl QuadratureTable {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `(c_{1,k}, …, c_{k,k})`; empty for `k = 0`.
    pub fn row(&self, k: usize) -> &[f64] {
        self.weights.row(k)
    }

    /// `1 / Γ(2 − α)`.
    pub fn gamma_factor(&self) -> f64 {
        self.weights.scale()
    }

    pub fn weights(&self) -> &WeightRows {
        &self.weights
    }

    /// Approximates the derivative at `t_k` from the samples `u^0..u^k`.
    pub fn derivative(&self, values: &[f64], k: usize) -> Result<f64, QuadratureError> {
        self.weights.apply(values, k)
    }

    /// The same value through the expanded (rearranged) form.
    pub fn derivative_expanded(&self, values: &[f64], k: usize) -> Result<f64, QuadratureError> {
        if values.len() < k + 1 {
            return Err(QuadratureError::LengthMismatch {
                needed: k + 1,
                got: values.len(),
            });
        }
        if k == 0 || k > self.grid.last_index() {
            return Err(QuadratureError::Index {
                j: k,
                k,
                last: self.grid.last_index(),
            });
        }
        let s: f64 = (0..=k)
            .map(|j| self.weights.expanded(k, j) * values[j])
            .sum();
        Ok(self.gamma_factor() * s)
    }

    /// Derivatives at every node `k = 1..=K`.
    pub fn derivatives(&self, values: &[f64]) -> Result<Vec<f64>, QuadratureError> {
        self.weights.apply_all(values)
    }
}

/// Precomputes the weights on `grid` for fractional order `alpha`.
///
/// Rows `k ≥ 2` follow the three-branch rule (first, interior, last index);
/// row 1 uses the single-interval step `c_{1,1} = a_{1,1} / log(t_1/t_0)`.
pub fn build_weights(grid: &TimeGrid, alpha: f64) -> Result<QuadratureTable, QuadratureError> {
    check_alpha(alpha)?;
    let x = grid.logs();
    let last = grid.last_index();
    let e1 = 1.0 - alpha;
    let curve = 2.0 / (2.0 - alpha);

    let mut rows = Vec::with_capacity(last + 1);
    rows.push(Vec::new());

    let mut p1 = vec![0.0; last + 1];
    let mut p2 = vec![0.0; last + 1];
    for k in 1..=last {
        // p1[j] = log(t_k/t_j)^{1-α}, p2[j] = log(t_k/t_j)^{2-α}
        for j in 0..=k {
            let d = grid.log_ratio(k, j);
            p1[j] = pow0(d, e1);
            p2[j] = d * p1[j];
        }
        let h = |j: usize| x[j] - x[j - 1];
        let a = |j: usize| p1[j - 1] - p1[j];
        let b = |j: usize| {
            (h(j) * (p1[j] + p1[j - 1]) + curve * (p2[j] - p2[j - 1])) / (x[j] - x[j - 2])
        };

        let mut row = Vec::with_capacity(k);
        if k == 1 {
            row.push(a(1) / h(1));
        } else {
            let mut b_next = b(2);
            row.push((a(1) + b_next) / h(1));
            for j in 2..k {
                let b_here = b_next;
                b_next = b(j + 1);
                row.push((a(j) - b_here + b_next) / h(j));
            }
            row.push((a(k) - b_next) / h(k));
        }
        rows.push(row);
    }

    Ok(QuadratureTable {
        alpha,
        grid: grid.clone(),
        weights: WeightRows {
            rows,
            scale: 1.0 / gamma(2.0 - alpha),
        },
    })
}

/// `d/dα [c_{j,k} / Γ(2 − α)]` by a central difference of two weight tables.
pub fn weight_sensitivity(
    grid: &TimeGrid,
    alpha: f64,
    step: f64,
) -> Result<WeightRows, QuadratureError> {
    check_alpha(alpha - step)?;
    check_alpha(alpha + step)?;
    let hi = build_weights(grid, alpha + step)?;
    let lo = build_weights(grid, alpha - step)?;
    let (sh, sl) = (hi.gamma_factor(), lo.gamma_factor());
    let rows = hi
        .weights
        .rows
        .iter()
        .zip(&lo.weights.rows)
        .map(|(rh, rl)| {
            rh.iter()
                .zip(rl)
                .map(|(ch, cl)| (sh * ch - sl * cl) / (2.0 * step))
                .collect()
        })
        .collect();
    Ok(WeightRows { rows, scale: 1.0 })
}

/// Caputo-Hadamard derivative at `t_k` of the samples `values` (`u^0..u^k`).
pub fn ch_derivative(
    table: &QuadratureTable,
    values: &[f64],
    k: usize,
) -> Result<f64, QuadratureError> {
    table.derivative(values, k)
}
